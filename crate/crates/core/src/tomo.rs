//! Density-matrix reconstruction from 16 coincidence counts.
//!
//! Linear inversion expands `ρ` in the Pauli-product basis and solves the
//! 16×16 real system against counts normalized by the `HH+HV+VH+VV` total.
//! Maximum likelihood minimizes the Poisson negative log-likelihood
//! `Σ μ_ν − n_ν ln μ_ν` with `μ_ν = ⟨v_ν|T†T|v_ν⟩ (+ accidentals)` over
//! lower-triangular `T`; the pair number `N = Tr(T†T)` is absorbed into `T`
//! and the state is `ρ = T†T / Tr(T†T)`.

use std::sync::OnceLock;

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{tomo_settings_16, CountRecord, NORMALIZATION_LABELS, TOMO_LABELS};
use crate::optim::{minimize, LbfgsOptions, Termination};
use crate::qstate::{
    concurrence, fidelity_max_phase, fidelity_pure, hermitian_eigenvalues, phi_plus, DensityMatrix, Ket4, C64,
};

/// Floor applied to predicted rates inside the logarithm.
pub const RATE_FLOOR: f64 = 1e-12;

/// Counts aligned with [`TOMO_LABELS`].
#[derive(Debug, Clone, PartialEq)]
pub struct TomoData {
    pub counts: [f64; 16],
}

impl TomoData {
    pub fn new(counts: [f64; 16]) -> Result<Self> {
        if let Some(bad) = counts.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::InvalidInput(format!("counts must be non-negative, got {bad}")));
        }
        Ok(TomoData { counts })
    }

    /// Gather one record per setting, in any order. `use_expected` reads the
    /// noiseless expected values instead of the sampled counts.
    pub fn from_records(records: &[CountRecord], use_expected: bool) -> Result<Self> {
        let mut counts = [f64::NAN; 16];
        for r in records {
            let slot = TOMO_LABELS
                .iter()
                .position(|l| *l == r.setting.label)
                .ok_or_else(|| Error::InvalidInput(format!("setting `{}` is not part of the tomography set", r.setting.label)))?;
            if !counts[slot].is_nan() {
                return Err(Error::InvalidInput(format!("duplicate setting `{}`", r.setting.label)));
            }
            counts[slot] = if use_expected { r.expected } else { r.count as f64 };
        }
        if let Some(missing) = counts.iter().position(|c| c.is_nan()) {
            return Err(Error::InvalidInput(format!("missing setting `{}`", TOMO_LABELS[missing])));
        }
        Self::new(counts)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// Sum over the complete H/V product basis.
    pub fn normalization(&self) -> f64 {
        NORMALIZATION_LABELS
            .iter()
            .map(|l| self.counts[TOMO_LABELS.iter().position(|t| t == l).expect("label in set")])
            .sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.counts.map(|c| c * factor))
    }
}

struct Design {
    /// Product kets `|s⟩⊗|i⟩` per setting.
    kets: Vec<Vector4<C64>>,
    paulis: [Matrix4<C64>; 16],
    inverse: SMatrix<f64, 16, 16>,
}

fn pauli(k: usize) -> Matrix2<C64> {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    match k {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -i, i, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

fn design() -> &'static Design {
    static DESIGN: OnceLock<Design> = OnceLock::new();
    DESIGN.get_or_init(|| {
        let kets: Vec<_> = tomo_settings_16()
            .iter()
            .map(|s| *Ket4::product(&s.signal, &s.idler).amplitudes())
            .collect();
        let paulis: [Matrix4<C64>; 16] =
            std::array::from_fn(|k| crate::qstate::kron2(&pauli(k / 4), &pauli(k % 4)));
        // B[ν,k] = ⟨v_ν| σ_k |v_ν⟩, so Tr(ρ P_ν) = Σ_k B[ν,k] r_k / 4 with r_k = Tr(ρ σ_k)
        let b = SMatrix::<f64, 16, 16>::from_fn(|r, c| (kets[r].adjoint() * paulis[c] * kets[r])[(0, 0)].re / 4.0);
        let inverse = b.try_inverse().expect("tomography design matrix is invertible");
        Design { kets, paulis, inverse }
    })
}

/// Unconstrained Hermitian, unit-trace estimate from linear inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearEstimate {
    matrix: Matrix4<C64>,
}

impl LinearEstimate {
    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.matrix
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.matrix)
    }

    pub fn is_physical(&self) -> bool {
        self.eigenvalues()[0] >= crate::qstate::POSITIVITY_TOL
    }

    /// Clamp negative eigenvalues to zero and renormalize the trace.
    pub fn project(&self) -> DensityMatrix {
        let eig = self.matrix.symmetric_eigen();
        let clamped = eig.eigenvalues.map(|v| v.max(0.0));
        let total: f64 = clamped.sum();
        let vals = clamped.map(|v| C64::new(v / total, 0.0));
        let m = eig.eigenvectors * Matrix4::from_diagonal(&vals) * eig.eigenvectors.adjoint();
        DensityMatrix::from_hermitian_unchecked(m)
    }
}

pub fn linear_reconstruct(data: &TomoData) -> Result<LinearEstimate> {
    if data.total() <= 0.0 {
        return Err(Error::InvalidInput("all tomography counts are zero".into()));
    }
    let norm = data.normalization();
    if norm <= 0.0 {
        return Err(Error::InvalidInput("H/V basis counts sum to zero; cannot normalize".into()));
    }
    let d = design();
    let s = SVector::<f64, 16>::from_iterator(data.counts.iter().map(|c| c / norm));
    let r = d.inverse * s;
    let mut m = Matrix4::<C64>::zeros();
    for (k, coeff) in r.iter().enumerate() {
        m += d.paulis[k] * C64::new(coeff / 4.0, 0.0);
    }
    let m = (m + m.adjoint()).scale(0.5);
    let tr = m.trace().re;
    if !tr.is_finite() || (tr - 1.0).abs() > 1e-9 {
        return Err(Error::Internal(format!("linear inversion produced trace {tr}")));
    }
    Ok(LinearEstimate { matrix: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Linear,
    Mle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Mle => "mle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleOptions {
    pub max_evaluations: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    /// Constant accidental rate added to every predicted count.
    pub accidentals: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_evaluations: 100_000,
            rel_tol: 1e-9,
            grad_tol: 1e-6,
            accidentals: 0.0,
        }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations == 0 {
            return Err(Error::validation("tomography.max_evaluations", "must be at least 1"));
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("grad_tol", self.grad_tol), ("accidentals", self.accidentals)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("tomography.{name}"), format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub rho: DensityMatrix,
    pub method: Method,
    /// Poisson NLL at the result (MLE only).
    pub nll: Option<f64>,
    /// Poisson NLL at the projected linear starting point (MLE only).
    pub initial_nll: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub linear_raw: Option<LinearEstimate>,
}

const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)];

fn params_to_t(x: &[f64]) -> Matrix4<C64> {
    let mut t = Matrix4::<C64>::zeros();
    for k in 0..4 {
        t[(k, k)] = C64::new(x[k], 0.0);
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        t[(i, j)] = C64::new(x[4 + 2 * k], x[5 + 2 * k]);
    }
    t
}

fn t_to_params(t: &Matrix4<C64>) -> Vec<f64> {
    let mut x = vec![0.0; 16];
    for k in 0..4 {
        x[k] = t[(k, k)].re;
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        x[4 + 2 * k] = t[(i, j)].re;
        x[5 + 2 * k] = t[(i, j)].im;
    }
    x
}

/// Lower-triangular `T` with `T†T = m` for Hermitian positive semidefinite `m`.
///
/// Cholesky of the index-reversed matrix `JmJ = LL†` gives `m = UU†` with
/// `U = JLJ` upper triangular, so `T = U†`. Zero pivots zero their column.
pub(crate) fn lower_factor(m: &Matrix4<C64>) -> Matrix4<C64> {
    let rev = Matrix4::from_fn(|r, c| m[(3 - r, 3 - c)]);
    let mut l = Matrix4::<C64>::zeros();
    for j in 0..4 {
        let d = rev[(j, j)].re - (0..j).map(|k| l[(j, k)].norm_sqr()).sum::<f64>();
        if d <= 1e-14 {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = C64::new(pivot, 0.0);
        for i in j + 1..4 {
            let s: C64 = (0..j).map(|k| l[(i, k)] * l[(j, k)].conj()).sum();
            l[(i, j)] = (rev[(i, j)] - s) / pivot;
        }
    }
    let u = Matrix4::from_fn(|r, c| l[(3 - r, 3 - c)]);
    u.adjoint()
}

/// `Σ (n − n ln n)`: the NLL of a perfect fit. Subtracting it makes the
/// optimizer's relative-change test scale with the misfit.
fn saturated_nll(data: &TomoData) -> f64 {
    data.counts
        .iter()
        .map(|&n| if n > 0.0 { n - n * n.ln() } else { 0.0 })
        .sum()
}

fn objective(x: &[f64], data: &TomoData, accidentals: f64, grad: &mut [f64]) -> f64 {
    let d = design();
    let t = params_to_t(x);
    let a = t.adjoint() * t;
    let mut f = 0.0;
    let mut g = Matrix4::<C64>::zeros();
    for (v, &n) in d.kets.iter().zip(&data.counts) {
        let mu = (v.adjoint() * a * v)[(0, 0)].re + accidentals;
        let floored = mu.max(RATE_FLOOR);
        f += mu - n * floored.ln();
        let w = if mu > RATE_FLOOR { 1.0 - n / mu } else { 1.0 };
        g += (v * v.adjoint()) * C64::new(w, 0.0);
    }
    let tg = t * g;
    for k in 0..4 {
        grad[k] = 2.0 * tg[(k, k)].re;
    }
    for (k, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        grad[4 + 2 * k] = 2.0 * tg[(i, j)].re;
        grad[5 + 2 * k] = 2.0 * tg[(i, j)].im;
    }
    f
}

/// Poisson NLL of the scaled state `scale·ρ`.
pub fn poisson_nll(rho: &DensityMatrix, scale: f64, data: &TomoData, accidentals: f64) -> f64 {
    design()
        .kets
        .iter()
        .zip(&data.counts)
        .map(|(v, &n)| {
            let mu = scale * (v.adjoint() * rho.matrix() * v)[(0, 0)].re + accidentals;
            mu - n * mu.max(RATE_FLOOR).ln()
        })
        .sum()
}

/// Pair number that best explains the counts for a fixed state shape.
fn fitted_scale(rho: &DensityMatrix, data: &TomoData, accidentals: f64) -> f64 {
    let p: f64 = design().kets.iter().map(|v| (v.adjoint() * rho.matrix() * v)[(0, 0)].re).sum();
    ((data.total() - 16.0 * accidentals) / p).max(RATE_FLOOR)
}

/// Weights of the maximally mixed state blended into the projected linear
/// estimate to seed the optimizer. Every Cholesky row must start nonzero;
/// the heavy blend escapes rank-deficient starts, the light one keeps
/// near-pure optima sharp. The lower final NLL wins.
const START_MIXING: [f64; 2] = [1e-3, 1e-10];
pub fn mle_reconstruct(data: &TomoData, options: &MleOptions) -> Result<ReconstructionResult> {
    options.validate()?;
    if data.total() <= 0.0 {
        return Err(Error::InvalidInput("all tomography counts are zero".into()));
    }
    let linear_raw = linear_reconstruct(data).ok();
    let projected = linear_raw
        .as_ref()
        .map(LinearEstimate::project)
        .unwrap_or_else(DensityMatrix::maximally_mixed);
    let scale0 = fitted_scale(&projected, data, options.accidentals);
    let initial_nll = poisson_nll(&projected, scale0, data, options.accidentals);

    let lbfgs = LbfgsOptions {
        max_evaluations: options.max_evaluations,
        rel_tol: options.rel_tol,
        grad_tol: options.grad_tol,
        ..LbfgsOptions::default()
    };
    let offset = saturated_nll(data);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let (mut iterations, mut evaluations, mut converged) = (0, 0, true);
    for weight in START_MIXING {
        let start = projected
            .mix(&DensityMatrix::maximally_mixed(), 1.0 - weight)
            .expect("weight in range");
        let scale_start = fitted_scale(&start, data, options.accidentals);
        let x0 = t_to_params(&lower_factor(&start.matrix().scale(scale_start)));
        let min = minimize(|x, g| objective(x, data, options.accidentals, g) - offset, &x0, &lbfgs);
        iterations += min.iterations;
        evaluations += min.evaluations;
        converged &= min.termination != Termination::MaxEvaluations;
        if min.f.is_finite() && best.as_ref().is_none_or(|(f, _)| min.f < *f) {
            best = Some((min.f, min.x));
        }
    }

    let fitted = best.and_then(|(f, x)| {
        let t = params_to_t(&x);
        let a = t.adjoint() * t;
        let tr = a.trace().re;
        (tr > 0.0 && tr.is_finite() && f + offset <= initial_nll)
            .then(|| (f + offset, DensityMatrix::from_hermitian_unchecked(a.unscale(tr))))
    });
    let (nll, rho) = fitted.unwrap_or((initial_nll, projected));
    crate::qstate::check_physical(rho.matrix())
        .map_err(|e| Error::Internal(format!("MLE output failed physicality: {e}")))?;

    Ok(ReconstructionResult {
        rho,
        method: Method::Mle,
        nll: Some(nll),
        initial_nll: Some(initial_nll),
        iterations,
        evaluations,
        converged,
        linear_raw,
    })
}

/// Linear inversion followed by positivity projection.
pub fn linear_result(data: &TomoData) -> Result<ReconstructionResult> {
    let raw = linear_reconstruct(data)?;
    Ok(ReconstructionResult {
        rho: raw.project(),
        method: Method::Linear,
        nll: None,
        initial_nll: None,
        iterations: 0,
        evaluations: 0,
        converged: true,
        linear_raw: Some(raw),
    })
}

pub fn reconstruct(data: &TomoData, method: Method, options: &MleOptions) -> Result<ReconstructionResult> {
    match method {
        Method::Linear => linear_result(data),
        Method::Mle => mle_reconstruct(data, options),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fidelity_phi_plus: f64,
    pub fidelity_max_phase: f64,
    pub theta_star: f64,
    pub concurrence: f64,
    pub purity: f64,
}

pub fn report_metrics(rho: &DensityMatrix) -> Metrics {
    let pf = fidelity_max_phase(rho);
    Metrics {
        fidelity_phi_plus: fidelity_pure(rho, &phi_plus()),
        fidelity_max_phase: pf.fidelity,
        theta_star: pf.theta_star,
        concurrence: concurrence(rho),
        purity: rho.purity(),
    }
}
