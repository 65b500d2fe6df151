//! Two-qubit polarization-state algebra.
//!
//! Every two-photon object uses the product basis ordered `(HH, HV, VH, VV)`,
//! signal photon first. Index 0 is `HH` and index 3 is `VV`, so the coherence
//! that carries the two-photon phase is always `rho[(0, 3)]`.
//!
//! Single-photon conventions: `D = (H+V)/√2`, `A = (H−V)/√2`,
//! `R = (H−iV)/√2`, `L = (H+iV)/√2`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Basis labels in storage order.
pub const BASIS_ORDER: [&str; 4] = ["HH", "HV", "VH", "VV"];

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues above this are float noise, below it the matrix is unphysical.
pub const POSITIVITY_TOL: f64 = -1e-9;
pub const UNITARY_TOL: f64 = 1e-10;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Single-photon polarization ket in the `(H, V)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket2(Vector2<C64>);

impl Ket2 {
    /// Normalizing constructor; a zero or non-finite vector is rejected.
    pub fn new(h: C64, v: C64) -> Result<Self> {
        let vec = Vector2::new(h, v);
        let norm = vec.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize polarization ket with norm {norm}"
            )));
        }
        Ok(Ket2(vec.unscale(norm)))
    }

    pub fn h() -> Self {
        Ket2(Vector2::new(ONE, ZERO))
    }

    pub fn v() -> Self {
        Ket2(Vector2::new(ZERO, ONE))
    }

    pub fn d() -> Self {
        Ket2(Vector2::new(ONE, ONE).scale(FRAC_1_SQRT_2))
    }

    pub fn a() -> Self {
        Ket2(Vector2::new(ONE, -ONE).scale(FRAC_1_SQRT_2))
    }

    pub fn r() -> Self {
        Ket2(Vector2::new(ONE, -I).scale(FRAC_1_SQRT_2))
    }

    pub fn l() -> Self {
        Ket2(Vector2::new(ONE, I).scale(FRAC_1_SQRT_2))
    }

    /// Look up one of the six standard polarizations by letter.
    pub fn from_label(label: char) -> Option<Self> {
        match label {
            'H' => Some(Self::h()),
            'V' => Some(Self::v()),
            'D' => Some(Self::d()),
            'A' => Some(Self::a()),
            'R' => Some(Self::r()),
            'L' => Some(Self::l()),
            _ => None,
        }
    }

    pub fn amplitudes(&self) -> &Vector2<C64> {
        &self.0
    }

    /// The orthogonal polarization, `(−v*, h*)`.
    pub fn orthogonal(&self) -> Self {
        Ket2(Vector2::new(-self.0[1].conj(), self.0[0].conj()))
    }

    pub fn inner(&self, other: &Ket2) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn apply(&self, u: &PolarizationUnitary) -> Self {
        Ket2(u.matrix() * self.0)
    }

    pub fn projector(&self) -> Matrix2<C64> {
        self.0 * self.0.adjoint()
    }
}

/// Two-photon polarization ket, amplitudes ordered `(HH, HV, VH, VV)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket4(Vector4<C64>);

impl Ket4 {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let vec = Vector4::from(amplitudes);
        let norm = vec.norm();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize two-photon ket with norm {norm}"
            )));
        }
        Ok(Ket4(vec.unscale(norm)))
    }

    /// `|s⟩ ⊗ |i⟩`.
    pub fn product(signal: &Ket2, idler: &Ket2) -> Self {
        let s = signal.amplitudes();
        let i = idler.amplitudes();
        Ket4(Vector4::new(s[0] * i[0], s[0] * i[1], s[1] * i[0], s[1] * i[1]))
    }

    pub fn amplitudes(&self) -> &Vector4<C64> {
        &self.0
    }

    pub fn inner(&self, other: &Ket4) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::from_hermitian_unchecked(self.0 * self.0.adjoint())
    }
}

/// `(|HH⟩ + e^{iθ}|VV⟩)/√2`.
pub fn bell_state(theta: f64) -> Result<Ket4> {
    if !theta.is_finite() {
        return Err(Error::InvalidArgument(format!("theta must be finite, got {theta}")));
    }
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    Ok(Ket4(Vector4::new(a, ZERO, ZERO, C64::from_polar(FRAC_1_SQRT_2, theta))))
}

/// The compensation target `Φ+ = (|HH⟩ + |VV⟩)/√2`.
pub fn phi_plus() -> Ket4 {
    bell_state(0.0).expect("zero phase is finite")
}

/// 2×2 unitary acting on one photon's polarization (a Jones matrix).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationUnitary(Matrix2<C64>);

impl PolarizationUnitary {
    pub fn new(m: Matrix2<C64>) -> Result<Self> {
        let dev = (m.adjoint() * m - Matrix2::identity()).norm();
        if !dev.is_finite() || dev > UNITARY_TOL {
            return Err(Error::InvalidArgument(format!(
                "matrix is not unitary (‖U†U − I‖ = {dev:e})"
            )));
        }
        Ok(PolarizationUnitary(m))
    }

    /// Wrap a matrix known to be unitary by construction.
    pub(crate) fn from_unitary_unchecked(m: Matrix2<C64>) -> Self {
        PolarizationUnitary(m)
    }

    pub fn identity() -> Self {
        PolarizationUnitary(Matrix2::identity())
    }

    /// `diag(1, e^{iφ})`: relative phase on the V component.
    pub fn phase(phi: f64) -> Self {
        PolarizationUnitary(Matrix2::new(ONE, ZERO, ZERO, C64::from_polar(1.0, phi)))
    }

    pub fn matrix(&self) -> &Matrix2<C64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        PolarizationUnitary(self.0.adjoint())
    }

    /// Matrix product `self · rhs` (rhs acts first).
    pub fn then_after(&self, rhs: &PolarizationUnitary) -> Self {
        PolarizationUnitary(self.0 * rhs.0)
    }

    /// Frobenius distance minimized over a global phase.
    pub fn distance_mod_phase(&self, other: &PolarizationUnitary) -> f64 {
        let overlap = (other.0.adjoint() * self.0).trace();
        let phase = if overlap.norm() == 0.0 { ONE } else { overlap / overlap.norm() };
        (self.0 - other.0 * phase).norm()
    }
}

/// `a ⊗ b` in the `(HH, HV, VH, VV)` ordering.
pub fn tensor(a: &PolarizationUnitary, b: &PolarizationUnitary) -> Matrix4<C64> {
    kron2(a.matrix(), b.matrix())
}

pub(crate) fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Physical two-qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix4<C64>);

impl DensityMatrix {
    /// Validate and wrap a matrix. The stored matrix is the exact Hermitian part.
    pub fn new(m: Matrix4<C64>) -> Result<Self> {
        check_physical(&m)?;
        Ok(Self::from_hermitian_unchecked(m))
    }

    /// Symmetrize without validation; callers guarantee physicality.
    pub(crate) fn from_hermitian_unchecked(m: Matrix4<C64>) -> Self {
        DensityMatrix((m + m.adjoint()).scale(0.5))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Matrix4::identity().scale(0.25))
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    /// The `HH`/`VV` coherence `ρ₀₃`.
    pub fn coherence(&self) -> C64 {
        self.0[(0, 3)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        hermitian_eigenvalues(&self.0)
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Convex mixture `w·self + (1−w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(Self::from_hermitian_unchecked(
            self.0.scale(w) + other.0.scale(1.0 - w),
        ))
    }

    /// Reduced state of the idler photon.
    pub fn idler_reduced(&self) -> Matrix2<C64> {
        Matrix2::from_fn(|r, c| self.0[(r, c)] + self.0[(r + 2, c + 2)])
    }

    /// Reduced state of the signal photon.
    pub fn signal_reduced(&self) -> Matrix2<C64> {
        Matrix2::from_fn(|r, c| self.0[(2 * r, 2 * c)] + self.0[(2 * r + 1, 2 * c + 1)])
    }

    /// Expectation of a product projector `|s⟩⟨s| ⊗ |i⟩⟨i|`.
    pub fn product_expectation(&self, signal: &Ket2, idler: &Ket2) -> f64 {
        let v = Ket4::product(signal, idler);
        let amp = v.amplitudes();
        (amp.adjoint() * self.0 * amp)[(0, 0)].re
    }
}

pub(crate) fn hermitian_eigenvalues(m: &Matrix4<C64>) -> [f64; 4] {
    let eig = m.symmetric_eigenvalues();
    let mut vals = [eig[0], eig[1], eig[2], eig[3]];
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub(crate) fn check_physical(m: &Matrix4<C64>) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Unphysical("non-finite entry".into()));
    }
    let herm = (m - m.adjoint()).camax();
    if herm > HERMITIAN_TOL {
        return Err(Error::Unphysical(format!("not Hermitian (max |ρ−ρ†| = {herm:e})")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
        return Err(Error::Unphysical(format!("trace {tr} differs from 1")));
    }
    let min = hermitian_eigenvalues(&((m + m.adjoint()).scale(0.5)))[0];
    if min < POSITIVITY_TOL {
        return Err(Error::Unphysical(format!("negative eigenvalue {min:e}")));
    }
    Ok(())
}

/// Werner state `p·|ψ(θ)⟩⟨ψ(θ)| + (1−p)·I/4`.
pub fn werner(p: f64, theta: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("Werner weight {p} outside [0, 1]")));
    }
    bell_state(theta)?
        .projector()
        .mix(&DensityMatrix::maximally_mixed(), p)
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &Ket4) -> f64 {
    let amp = psi.amplitudes();
    let f = (amp.adjoint() * rho.matrix() * amp)[(0, 0)];
    debug_assert!(f.im.abs() < 1e-10, "fidelity has imaginary part {}", f.im);
    f.re.clamp(0.0, 1.0)
}

/// Fidelity maximized over the Bell phase, with the maximizing phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFidelity {
    pub fidelity: f64,
    /// Maximizing θ in `(−π, π]`; zero when the coherence vanishes.
    pub theta_star: f64,
}

/// `max_θ ⟨ψ(θ)|ρ|ψ(θ)⟩ = (ρ₀₀+ρ₃₃)/2 + |ρ₀₃|`, attained at `θ* = −arg ρ₀₃`.
pub fn fidelity_max_phase(rho: &DensityMatrix) -> PhaseFidelity {
    let m = rho.matrix();
    let coh = m[(0, 3)];
    let fidelity = ((m[(0, 0)].re + m[(3, 3)].re) / 2.0 + coh.norm()).clamp(0.0, 1.0);
    let theta_star = if coh.norm() == 0.0 { 0.0 } else { -coh.arg() };
    PhaseFidelity {
        fidelity,
        theta_star,
    }
}

fn sigma_y_sigma_y() -> Matrix4<C64> {
    let sy = Matrix2::new(ZERO, -I, I, ZERO);
    kron2(&sy, &sy)
}

fn hermitian_sqrt(m: &Matrix4<C64>) -> Matrix4<C64> {
    let eig = m.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    eig.eigenvectors * Matrix4::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

/// Wootters concurrence.
///
/// The λᵢ are computed as square roots of the eigenvalues of the Hermitian
/// matrix `√ρ ρ̃ √ρ`, which shares its spectrum with `ρ ρ̃`.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let yy = sigma_y_sigma_y();
    let tilde = yy * rho.matrix().conjugate() * yy;
    let root = hermitian_sqrt(rho.matrix());
    let m = root * tilde * root;
    let mut lambdas = hermitian_eigenvalues(&((m + m.adjoint()).scale(0.5))).map(|v| v.max(0.0).sqrt());
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0)
}

/// Uhlmann fidelity `(Tr √(√ρ σ √ρ))²`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let root = hermitian_sqrt(rho.matrix());
    let m = root * sigma.matrix() * root;
    let s: f64 = hermitian_eigenvalues(&((m + m.adjoint()).scale(0.5)))
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    (s * s).clamp(0.0, 1.0)
}

/// `(U_s ⊗ U_i) ρ (U_s ⊗ U_i)†`.
pub fn apply_local(
    rho: &DensityMatrix,
    u_signal: &PolarizationUnitary,
    u_idler: &PolarizationUnitary,
) -> DensityMatrix {
    let u = tensor(u_signal, u_idler);
    DensityMatrix::from_hermitian_unchecked(u * rho.matrix() * u.adjoint())
}

/// Plain-text record: 16 lines of `re,im`, row-major.
impl fmt::Display for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..4 {
            for c in 0..4 {
                let z = self.0[(r, c)];
                writeln!(f, "{},{}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

impl FromStr for DensityMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let entries = s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|line| {
                let (re, im) = line
                    .split_once(',')
                    .ok_or_else(|| Error::InvalidInput(format!("expected `re,im`, got `{line}`")))?;
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad number `{t}`: {e}")))
                };
                Ok(C64::new(parse(re)?, parse(im)?))
            })
            .collect::<Result<Vec<_>>>()?;
        if entries.len() != 16 {
            return Err(Error::InvalidInput(format!(
                "density matrix record needs 16 entries, found {}",
                entries.len()
            )));
        }
        DensityMatrix::new(Matrix4::from_row_slice(&entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn uhlmann_fidelity() {
        let phi = phi_plus();
        let w = werner(0.8133, 0.0).unwrap();
        assert!((fidelity(&w, &phi.projector()) - fidelity_pure(&w, &phi)).abs() < 1e-9);
        assert!((fidelity(&phi.projector(), &w) - fidelity_pure(&w, &phi)).abs() < 1e-9);
        assert!((fidelity(&w, &w) - 1.0).abs() < 1e-9);
        // commuting diagonal states: (Σ √(p_k q_k))²
        let diag = |p: [f64; 4]| {
            DensityMatrix::new(Matrix4::from_diagonal(&Vector4::from(p.map(|x| C64::new(x, 0.0))))).unwrap()
        };
        let (p, q): ([f64; 4], [f64; 4]) = ([0.1, 0.2, 0.3, 0.4], [0.4, 0.3, 0.2, 0.1]);
        let expect: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>().powi(2);
        assert!((fidelity(&diag(p), &diag(q)) - expect).abs() < 1e-12);
    }

    #[test]
    fn basis_order_puts_vv_last() {
        let hh = Ket4::product(&Ket2::h(), &Ket2::h());
        let hv = Ket4::product(&Ket2::h(), &Ket2::v());
        let vh = Ket4::product(&Ket2::v(), &Ket2::h());
        let vv = Ket4::product(&Ket2::v(), &Ket2::v());
        for (idx, k) in [hh, hv, vh, vv].iter().enumerate() {
            assert_eq!(k.amplitudes()[idx], ONE, "{}", BASIS_ORDER[idx]);
        }
    }

    #[test]
    fn circular_convention() {
        // R = (H - iV)/√2
        let r = Ket2::r();
        assert_abs_diff_eq!(r.amplitudes()[1].im, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(r.inner(&Ket2::l()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Ket2::d().inner(&Ket2::a()).norm(), 0.0, epsilon = 1e-15);
        let o = Ket2::r().orthogonal();
        assert_abs_diff_eq!(o.inner(&Ket2::l()).norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ket_rejects_zero() {
        assert!(Ket2::new(ZERO, ZERO).is_err());
        assert!(Ket4::new([ZERO; 4]).is_err());
        let k = Ket2::new(C64::new(3.0, 0.0), C64::new(0.0, 4.0)).unwrap();
        assert_abs_diff_eq!(k.amplitudes().norm(), 1.0, epsilon = NORM_TOL);
    }

    #[test]
    fn bell_state_examples() {
        let phi = bell_state(0.0).unwrap();
        let expect = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
        for (a, e) in phi.amplitudes().iter().zip(expect) {
            assert_abs_diff_eq!(a.re, e, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);
        }
        let minus = bell_state(PI).unwrap();
        assert_abs_diff_eq!(minus.amplitudes()[3].re, -FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.inner(&minus).norm(), 0.0, epsilon = 1e-15);
        // overlap |<Φ+|ψ(π/2)>|² = |(1 + i)/2|² = 0.5
        let half = bell_state(PI / 2.0).unwrap();
        assert_abs_diff_eq!(phi.inner(&half).norm_sqr(), 0.5, epsilon = 1e-15);
        assert!(bell_state(f64::NAN).is_err());
        assert!(bell_state(f64::INFINITY).is_err());
    }

    #[test]
    fn werner_examples() {
        let pure = werner(1.0, 0.0).unwrap();
        assert_abs_diff_eq!(
            (pure.matrix() - phi_plus().projector().matrix()).norm(),
            0.0,
            epsilon = 1e-15
        );
        let mixed = werner(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            (mixed.matrix() - DensityMatrix::maximally_mixed().matrix()).norm(),
            0.0,
            epsilon = 1e-15
        );
        assert!(werner(-0.01, 0.0).is_err());
        assert!(werner(1.01, 0.0).is_err());
    }

    #[test]
    fn werner_fidelity_oracle() {
        // direct <Φ+|ρ|Φ+> by explicit summation over amplitudes
        let rho = werner(0.8133, 0.0).unwrap();
        let amp = phi_plus();
        let mut direct = ZERO;
        for r in 0..4 {
            for c in 0..4 {
                direct += amp.amplitudes()[r].conj() * rho.entry(r, c) * amp.amplitudes()[c];
            }
        }
        assert_abs_diff_eq!(direct.re, 0.86, epsilon = 1e-4);
        assert_abs_diff_eq!(fidelity_pure(&rho, &amp), direct.re, epsilon = 1e-14);
        assert_abs_diff_eq!(fidelity_pure(&rho, &amp), (3.0 * 0.8133 + 1.0) / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn fidelity_trivial_cases() {
        let phi = phi_plus();
        assert_abs_diff_eq!(fidelity_pure(&phi.projector(), &phi), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            fidelity_pure(&DensityMatrix::maximally_mixed(), &phi),
            0.25,
            epsilon = 1e-15
        );
    }

    fn grid_max_phase(rho: &DensityMatrix, points: usize) -> (f64, f64) {
        (0..points)
            .map(|k| {
                let theta = -PI + 2.0 * PI * k as f64 / points as f64;
                (fidelity_pure(rho, &bell_state(theta).unwrap()), theta)
            })
            .fold((f64::MIN, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    fn wrap(x: f64) -> f64 {
        let y = x.rem_euclid(2.0 * PI);
        if y > PI {
            y - 2.0 * PI
        } else {
            y
        }
    }

    #[test]
    fn max_phase_examples() {
        let pf = fidelity_max_phase(&bell_state(1.2).unwrap().projector());
        assert_abs_diff_eq!(pf.fidelity, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(wrap(pf.theta_star - 1.2), 0.0, epsilon = 1e-14);

        let pf = fidelity_max_phase(&DensityMatrix::maximally_mixed());
        assert_abs_diff_eq!(pf.fidelity, 0.25, epsilon = 1e-15);
        assert_eq!(pf.theta_star, 0.0);

        let rho = werner(0.8133, 0.7).unwrap();
        let pf = fidelity_max_phase(&rho);
        let (grid_f, grid_theta) = grid_max_phase(&rho, 10_000);
        assert_abs_diff_eq!(pf.fidelity, 0.86, epsilon = 1e-4);
        assert!(pf.fidelity >= grid_f - 1e-12);
        assert_abs_diff_eq!(pf.fidelity, grid_f, epsilon = 1e-6);
        assert_abs_diff_eq!(pf.theta_star, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap(grid_theta - 0.7), 0.0, epsilon = 2.0 * PI / 10_000.0);
    }

    /// Pure-state concurrence `|⟨ψ|σy⊗σy|ψ*⟩|`.
    fn pure_concurrence(psi: &Ket4) -> f64 {
        let flipped = sigma_y_sigma_y() * psi.amplitudes().conjugate();
        psi.amplitudes().dotc(&flipped).norm()
    }

    #[test]
    fn concurrence_examples() {
        assert_abs_diff_eq!(concurrence(&phi_plus().projector()), 1.0, epsilon = 1e-7);
        let hh = Ket4::product(&Ket2::h(), &Ket2::h()).projector();
        assert_abs_diff_eq!(concurrence(&hh), 0.0, epsilon = 1e-7);
        let w = werner(0.8133, 0.0).unwrap();
        assert_abs_diff_eq!(concurrence(&w), (3.0 * 0.8133 - 1.0) / 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(concurrence(&w), 0.72, epsilon = 1e-3);
        assert_abs_diff_eq!(concurrence(&werner(0.2, 0.3).unwrap()), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn concurrence_matches_pure_state_formula() {
        let psi = Ket4::new([
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.5),
            C64::new(0.7, -0.1),
            C64::new(0.05, 0.4),
        ])
        .unwrap();
        assert_abs_diff_eq!(concurrence(&psi.projector()), pure_concurrence(&psi), epsilon = 1e-7);
    }

    #[test]
    fn apply_local_examples() {
        let rho = werner(0.6, 0.4).unwrap();
        let id = PolarizationUnitary::identity();
        assert_abs_diff_eq!((apply_local(&rho, &id, &id).matrix() - rho.matrix()).norm(), 0.0);

        let x = PolarizationUnitary::new(Matrix2::new(ZERO, ONE, ONE, ZERO)).unwrap();
        let phi = phi_plus().projector();
        let out = apply_local(&phi, &x, &x);
        assert_abs_diff_eq!((out.matrix() - phi.matrix()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = Matrix2::new(ONE, ONE, ZERO, ONE);
        assert!(PolarizationUnitary::new(m).is_err());
    }

    #[test]
    fn unphysical_rejected() {
        let mut m = Matrix4::identity().scale(0.25);
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err(), "trace 1.25");
        let mut m = Matrix4::<C64>::zeros();
        m[(0, 0)] = C64::new(1.5, 0.0);
        m[(1, 1)] = C64::new(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err(), "negative eigenvalue");
        let mut m = Matrix4::identity().scale(0.25);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err(), "non-Hermitian");
    }

    #[test]
    fn text_record_round_trip() {
        let rho = werner(0.77, 1.1).unwrap();
        let text = rho.to_string();
        assert_eq!(text.lines().count(), 16);
        let back: DensityMatrix = text.parse().unwrap();
        assert_eq!(back, rho);
        assert!("1,0\n".parse::<DensityMatrix>().is_err());
    }
}
