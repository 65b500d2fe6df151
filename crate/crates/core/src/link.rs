//! Fiber transmission arms.
//!
//! Each arm carries first-order PMD with principal axes aligned to H/V, so a
//! photon at detuning `δ` from the reference channel picks up a relative
//! V-phase `2π·τ·δ`. The idler detuning is always `−δ`, so the two-photon
//! phase depends only on the DGD mismatch `τ_s − τ_i`.
//!
//! Slow birefringence drift is a random walk of a Poincaré-sphere rotation
//! vector, sampled once per compensation interval. Stokes axes map onto the
//! Jones basis as `S1 ↔ σz`, `S2 ↔ σx`, `S3 ↔ σy`.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::channel_grid::ChannelPair;
use crate::error::{Error, Result};
use crate::qstate::{apply_local, DensityMatrix, PolarizationUnitary, C64};
use crate::rng::{stream, Domain, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkParams {
    /// km per arm
    pub length: f64,
    /// dB/km
    pub attenuation: f64,
    /// ps
    pub dgd_signal: f64,
    /// ps
    pub dgd_idler: f64,
    /// Poincaré-sphere rotation per interval, rad.
    pub drift_step: f64,
    /// White-noise weight applied per transit.
    pub depol: f64,
    pub seed: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        LinkParams {
            length: 5.0,
            attenuation: 0.22,
            dgd_signal: 0.3,
            dgd_idler: 0.1,
            drift_step: 0.02,
            depol: 0.03,
            seed: 17,
        }
    }
}

impl LinkParams {
    /// Lossless, birefringence-free, noiseless fiber of the default length.
    pub fn ideal() -> Self {
        LinkParams {
            attenuation: 0.0,
            dgd_signal: 0.0,
            dgd_idler: 0.0,
            drift_step: 0.0,
            depol: 0.0,
            ..LinkParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("link.{name}"),
                    format!("must be non-negative and finite, got {v}"),
                ))
            }
        };
        non_negative("length", self.length)?;
        non_negative("attenuation", self.attenuation)?;
        non_negative("drift_step", self.drift_step)?;
        if !self.dgd_signal.is_finite() {
            return Err(Error::validation("link.dgd_signal", "must be finite"));
        }
        if !self.dgd_idler.is_finite() {
            return Err(Error::validation("link.dgd_idler", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.depol) {
            return Err(Error::validation(
                "link.depol",
                format!("must lie in [0, 1], got {}", self.depol),
            ));
        }
        Ok(())
    }
}

/// Two-photon phase of a channel: `θ_ref + 2π(τ_s − τ_i)(ν_s(n) − ν_s(1))`.
pub fn channel_theta(channel: &ChannelPair, params: &LinkParams, theta_ref: f64) -> f64 {
    let (phi_s, phi_i) = pmd_phases(channel, params);
    theta_ref + phi_s + phi_i
}

/// Per-arm PMD phases; they cancel exactly when the DGDs are equal.
fn pmd_phases(channel: &ChannelPair, params: &LinkParams) -> (f64, f64) {
    let delta = channel.signal_detuning;
    (TAU * params.dgd_signal * delta, TAU * params.dgd_idler * -delta)
}

/// Per-photon survival probability of one arm.
pub fn transmission(params: &LinkParams) -> f64 {
    10f64.powf(-params.attenuation * params.length / 10.0)
}

/// `exp(−i (r·σ)/2)` for a Poincaré-sphere rotation vector `r`.
pub fn rotation_unitary(r: &Vector3<f64>) -> PolarizationUnitary {
    let angle = r.norm();
    if angle == 0.0 {
        return PolarizationUnitary::identity();
    }
    let n = r / angle;
    let (s, c) = (0.5 * angle).sin_cos();
    let i = C64::i();
    // n·σ with (S1, S2, S3) = (σz, σx, σy)
    let n_sigma = Matrix2::new(
        C64::new(n[0], 0.0),
        C64::new(n[1], -n[2]),
        C64::new(n[1], n[2]),
        C64::new(-n[0], 0.0),
    );
    PolarizationUnitary::from_unitary_unchecked(
        Matrix2::identity().map(|z: C64| z * c) - n_sigma.map(|z| z * i * s),
    )
}

/// Accumulated drift rotation vectors after `0..=intervals` steps.
pub fn drift_walk<R: Rng + ?Sized>(intervals: usize, params: &LinkParams, rng: &mut R) -> Vec<Vector3<f64>> {
    let mut r = Vector3::zeros();
    let mut out = Vec::with_capacity(intervals + 1);
    out.push(r);
    for _ in 0..intervals {
        let dir: [f64; 3] = UnitSphere.sample(rng);
        r += Vector3::from(dir) * params.drift_step;
        out.push(r);
    }
    out
}

/// Drift rotation after `elapsed_intervals` steps of the walk driven by `rng`.
pub fn drift_unitary<R: Rng + ?Sized>(elapsed_intervals: usize, params: &LinkParams, rng: &mut R) -> PolarizationUnitary {
    if params.drift_step == 0.0 {
        return PolarizationUnitary::identity();
    }
    let walk = drift_walk(elapsed_intervals, params, rng);
    rotation_unitary(&walk[elapsed_intervals])
}

/// The drift stream of one arm, keyed by the link seed.
pub fn drift_stream(seed: u64, signal_arm: bool) -> SimRng {
    let domain = if signal_arm { Domain::DriftSignal } else { Domain::DriftIdler };
    stream(seed, domain, 0)
}

/// `(interval, accumulated rotation angle)` rows for one arm.
pub fn drift_trace(params: &LinkParams, seed: u64, signal_arm: bool, intervals: usize) -> Vec<(usize, f64)> {
    let mut rng = drift_stream(seed, signal_arm);
    drift_walk(intervals, params, &mut rng)
        .iter()
        .enumerate()
        .map(|(k, r)| (k, r.norm()))
        .collect()
}

/// Apply PMD phases after the given residual drift rotations, then depolarize.
pub fn apply_link_with_drift(
    rho: &DensityMatrix,
    channel: &ChannelPair,
    params: &LinkParams,
    drift_signal: &PolarizationUnitary,
    drift_idler: &PolarizationUnitary,
) -> DensityMatrix {
    let (phi_s, phi_i) = pmd_phases(channel, params);
    let u_s = PolarizationUnitary::phase(phi_s).then_after(drift_signal);
    let u_i = PolarizationUnitary::phase(phi_i).then_after(drift_idler);
    let rotated = apply_local(rho, &u_s, &u_i);
    if params.depol == 0.0 {
        return rotated;
    }
    rotated
        .mix(&DensityMatrix::maximally_mixed(), 1.0 - params.depol)
        .expect("depol validated to [0, 1]")
}

/// Transmit `rho` through both arms with the uncorrected drift at `elapsed_intervals`.
pub fn apply_link(
    rho: &DensityMatrix,
    channel: &ChannelPair,
    params: &LinkParams,
    elapsed_intervals: usize,
) -> DensityMatrix {
    let d_s = drift_unitary(elapsed_intervals, params, &mut drift_stream(params.seed, true));
    let d_i = drift_unitary(elapsed_intervals, params, &mut drift_stream(params.seed, false));
    apply_link_with_drift(rho, channel, params, &d_s, &d_i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_grid::{build_plan, GridParams};
    use crate::qstate::{bell_state, fidelity_max_phase, fidelity_pure, phi_plus, werner};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn plan() -> Vec<ChannelPair> {
        build_plan(&GridParams::default()).unwrap()
    }

    fn wrap(x: f64) -> f64 {
        let y = x.rem_euclid(TAU);
        if y > PI {
            y - TAU
        } else {
            y
        }
    }

    #[test]
    fn equal_dgd_cancels_exactly() {
        let params = LinkParams { dgd_signal: 0.37, dgd_idler: 0.37, ..LinkParams::ideal() };
        let plan = plan();
        let spread = plan
            .iter()
            .map(|c| (channel_theta(c, &params, 0.25) - 0.25).abs())
            .fold(0.0, f64::max);
        assert!(spread < 1e-12, "spread {spread}");
    }

    #[test]
    fn reference_channel_keeps_theta_ref() {
        let params = LinkParams { dgd_signal: 1.3, dgd_idler: -0.2, ..LinkParams::ideal() };
        assert_eq!(channel_theta(&plan()[0], &params, 0.8), 0.8);
    }

    #[test]
    fn one_ps_mismatch_span() {
        let params = LinkParams { dgd_signal: 1.0, dgd_idler: 0.0, ..LinkParams::ideal() };
        let plan = plan();
        let span = channel_theta(&plan[0], &params, 0.0) - channel_theta(&plan[43], &params, 0.0);
        assert_abs_diff_eq!(span, TAU * 2.58, epsilon = 1e-9);

        // cross-check by composing diagonal per-photon phase unitaries on |ψ(0)>
        let ch = &plan[43];
        let u_s = PolarizationUnitary::phase(TAU * 1.0 * (ch.signal_freq - plan[0].signal_freq));
        let u_i = PolarizationUnitary::phase(TAU * 0.0 * (ch.idler_freq - plan[0].idler_freq));
        let out = apply_local(&phi_plus().projector(), &u_s, &u_i);
        let theta = fidelity_max_phase(&out).theta_star;
        assert_abs_diff_eq!(wrap(theta - channel_theta(ch, &params, 0.0)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn theta_is_affine_in_signal_frequency() {
        let params = LinkParams { dgd_signal: 0.7, dgd_idler: 0.2, ..LinkParams::ideal() };
        let plan = plan();
        let xs: Vec<f64> = plan.iter().map(|c| c.signal_freq).collect();
        let ys: Vec<f64> = plan.iter().map(|c| channel_theta(c, &params, 0.1)).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let expect = TAU * 0.5;
        assert!(((slope - expect) / expect).abs() < 1e-9, "slope {slope}");
    }

    #[test]
    fn transmission_examples() {
        assert_eq!(transmission(&LinkParams::ideal()), 1.0);
        let p = LinkParams { attenuation: 0.25, length: 5.0, ..LinkParams::ideal() };
        assert_abs_diff_eq!(transmission(&p), 0.7499, epsilon = 1e-4);
        let p = LinkParams { attenuation: 0.3, length: 10.0, ..LinkParams::ideal() };
        assert_abs_diff_eq!(transmission(&p), 0.501, epsilon = 1e-3);
        let a = LinkParams { attenuation: 0.2, length: 3.0, ..LinkParams::ideal() };
        let b = LinkParams { attenuation: 0.2, length: 4.5, ..LinkParams::ideal() };
        let ab = LinkParams { attenuation: 0.2, length: 7.5, ..LinkParams::ideal() };
        assert_abs_diff_eq!(transmission(&a) * transmission(&b), transmission(&ab), epsilon = 1e-15);
    }

    #[test]
    fn zero_drift_is_identity() {
        let p = LinkParams::ideal();
        let u = drift_unitary(50, &p, &mut drift_stream(3, true));
        assert_eq!(u, PolarizationUnitary::identity());
    }

    #[test]
    fn drift_is_deterministic_and_unitary() {
        let p = LinkParams { drift_step: 0.1, ..LinkParams::ideal() };
        let a = drift_unitary(25, &p, &mut drift_stream(11, true));
        let b = drift_unitary(25, &p, &mut drift_stream(11, true));
        let c = drift_unitary(25, &p, &mut drift_stream(11, false));
        assert_eq!(a, b);
        assert_ne!(a, c);
        PolarizationUnitary::new(*a.matrix()).unwrap();
    }

    #[test]
    fn rotation_unitary_matches_stokes_axes() {
        // half-turn about S1 leaves H fixed up to phase, swaps D and A
        use crate::qstate::Ket2;
        let u = rotation_unitary(&Vector3::new(PI, 0.0, 0.0));
        assert_abs_diff_eq!(Ket2::h().apply(&u).inner(&Ket2::h()).norm(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(Ket2::d().apply(&u).inner(&Ket2::a()).norm(), 1.0, epsilon = 1e-15);
        // quarter-turn about S3 takes H to D or A
        let u = rotation_unitary(&Vector3::new(0.0, 0.0, PI / 2.0));
        let out = Ket2::h().apply(&u);
        let to_diag = out.inner(&Ket2::d()).norm_sqr().max(out.inner(&Ket2::a()).norm_sqr());
        assert_abs_diff_eq!(to_diag, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn drift_angle_grows_as_sqrt_intervals() {
        // 3D walk with fixed step s: E|r_n| ≈ s·√n·√(8/(3π))
        let p = LinkParams { drift_step: 0.1, ..LinkParams::ideal() };
        let n = 10_000;
        let seeds = 100;
        let (mut at_n, mut at_quarter) = (0.0, 0.0);
        for seed in 0..seeds {
            let walk = drift_walk(n, &p, &mut drift_stream(seed, true));
            at_n += walk[n].norm();
            at_quarter += walk[n / 4].norm();
        }
        at_n /= seeds as f64;
        at_quarter /= seeds as f64;
        let predicted = 0.1 * (n as f64).sqrt() * (8.0 / (3.0 * PI)).sqrt();
        assert!(((at_n - predicted) / predicted).abs() < 0.1, "{at_n} vs {predicted}");
        assert!(((at_n / at_quarter) - 2.0).abs() < 0.2, "ratio {}", at_n / at_quarter);
    }

    #[test]
    fn drift_trace_starts_at_zero() {
        let p = LinkParams { drift_step: 0.05, ..LinkParams::ideal() };
        let t = drift_trace(&p, 4, false, 10);
        assert_eq!(t.len(), 11);
        assert_eq!(t[0], (0, 0.0));
        assert_abs_diff_eq!(t[1].1, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn ideal_link_leaves_state_unchanged() {
        let rho = werner(0.7, 0.3).unwrap();
        let ch = plan()[17];
        let zero = LinkParams { length: 0.0, ..LinkParams::ideal() };
        let out = apply_link(&rho, &ch, &zero, 12);
        assert_abs_diff_eq!((out.matrix() - rho.matrix()).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dgd_mismatch_moves_phase_only() {
        let p = LinkParams { dgd_signal: 0.8, dgd_idler: 0.1, ..LinkParams::ideal() };
        for ch in plan().iter().step_by(7) {
            let out = apply_link(&phi_plus().projector(), ch, &p, 0);
            let pf = fidelity_max_phase(&out);
            assert_abs_diff_eq!(pf.fidelity, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(wrap(pf.theta_star - channel_theta(ch, &p, 0.0)), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn depolarization_example() {
        let p = LinkParams { depol: 0.1, ..LinkParams::ideal() };
        let out = apply_link(&phi_plus().projector(), &plan()[0], &p, 0);
        assert_abs_diff_eq!(fidelity_pure(&out, &phi_plus()), 0.925, epsilon = 1e-14);
    }

    #[test]
    fn spectrum_preserved_without_depol() {
        let p = LinkParams { depol: 0.0, drift_step: 0.3, ..LinkParams::default() };
        let rho = werner(0.6, 1.0).unwrap().mix(&bell_state(0.0).unwrap().projector(), 0.5).unwrap();
        let before = rho.eigenvalues();
        let after = apply_link(&rho, &plan()[30], &p, 9).eigenvalues();
        for (a, b) in before.iter().zip(after) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(LinkParams { depol: 1.2, ..LinkParams::default() }.validate().is_err());
        assert!(LinkParams { length: -1.0, ..LinkParams::default() }.validate().is_err());
        LinkParams::default().validate().unwrap();
    }
}
