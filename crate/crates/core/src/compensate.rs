//! Phase compensation with a QWP–QWP–HWP chain and periodic drift re-alignment.
//!
//! On the Poincaré sphere a retarder at fast-axis angle φ rotates about an
//! axis at 2φ in the S1–S2 plane. Folding the three plates together gives
//!
//! ```text
//! QWP(q1)·QWP(q2)·HWP(h) ≅ R₂(2q1) · R₁(2q1 − 2q2) · R₂(2q2 − 4h)
//! ```
//!
//! up to global phase, where `R₂` and `R₁` rotate about the S2-conjugate
//! (σy) and S2 (σx) Pauli axes. Any SU(2) element has such a Y–X–Y Euler
//! form, so the chain is universal and [`synthesize_chain`] is closed-form.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::link::{drift_stream, drift_walk, rotation_unitary, LinkParams};
use crate::measure::WaveplateChain;
use crate::qstate::{apply_local, DensityMatrix, Ket2, PolarizationUnitary};

/// Minimum `|ρ₀₃|` carrying usable phase information.
pub const COHERENCE_THRESHOLD: f64 = 1e-6;

/// Largest reference leakage accepted right after a re-alignment.
pub const REALIGN_LEAKAGE_TOL: f64 = 1e-6;

/// `−arg ρ₀₃`, the Bell phase that the signal-arm compensator must null.
pub fn estimate_theta(rho: &DensityMatrix) -> Result<f64> {
    let coherence = rho.coherence().norm();
    if coherence <= COHERENCE_THRESHOLD {
        return Err(Error::NoPhaseInformation { coherence });
    }
    Ok(-rho.coherence().arg())
}

/// Unit quaternion `(w, x, y, z)` with `U ∝ w·I − i(x·σx + y·σy + z·σz)`.
fn su2_quaternion(u: &PolarizationUnitary) -> [f64; 4] {
    let m = u.matrix();
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let m = m.map(|z| z / det.sqrt());
    let w = 0.5 * (m[(0, 0)] + m[(1, 1)]).re;
    let z = -0.5 * (m[(0, 0)] - m[(1, 1)]).im;
    let x = -0.5 * (m[(0, 1)] + m[(1, 0)]).im;
    let y = 0.5 * (m[(1, 0)] - m[(0, 1)]).re;
    [w, x, y, z]
}

fn wrap_half_turn(angle: f64) -> f64 {
    angle.rem_euclid(PI)
}

/// Plate angles (radians, each in `[0, π)`) realizing `target` up to global phase.
pub fn synthesize_chain(target: &PolarizationUnitary) -> WaveplateChain {
    let [w, x, y, z] = su2_quaternion(target);
    let beta = 2.0 * x.hypot(z).atan2(w.hypot(y));
    let sum = y.atan2(w);
    let diff = (-z).atan2(x);
    let (alpha, gamma) = (sum + diff, sum - diff);
    let qwp1 = 0.5 * alpha;
    let qwp2 = qwp1 - 0.5 * beta;
    let hwp = (2.0 * qwp2 - gamma) / 4.0;
    WaveplateChain {
        qwp1: wrap_half_turn(qwp1),
        qwp2: wrap_half_turn(qwp2),
        hwp: wrap_half_turn(hwp),
    }
}

/// `diag(1, e^{−iθ})` on the signal arm maps `|HH⟩ + e^{iθ}|VV⟩` to Φ+.
pub fn nulling_unitary(theta: f64) -> PolarizationUnitary {
    PolarizationUnitary::phase(-theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub channel: usize,
    pub theta_estimate: f64,
    pub chain: WaveplateChain,
}

impl PlanEntry {
    pub fn identity(channel: usize) -> Self {
        PlanEntry {
            channel,
            theta_estimate: 0.0,
            chain: synthesize_chain(&PolarizationUnitary::identity()),
        }
    }
}

pub fn fit_plan_entry(channel: usize, rho: &DensityMatrix) -> Result<PlanEntry> {
    let theta = estimate_theta(rho)?;
    Ok(PlanEntry {
        channel,
        theta_estimate: theta,
        chain: synthesize_chain(&nulling_unitary(theta)),
    })
}

/// Apply the entry's chain to the signal photon.
pub fn compensate_channel(rho: &DensityMatrix, entry: &PlanEntry) -> DensityMatrix {
    apply_local(rho, &entry.chain.unitary(), &PolarizationUnitary::identity())
}

/// Software path: rotate the reconstructed matrix by the estimated phase directly.
pub fn compensate_in_software(rho: &DensityMatrix, theta: f64) -> DensityMatrix {
    apply_local(rho, &nulling_unitary(theta), &PolarizationUnitary::identity())
}

/// Drift and the controller setting currently applied on each arm.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub drift: [PolarizationUnitary; 2],
    pub correction: [PolarizationUnitary; 2],
    pub updated_at: usize,
}

impl Default for LinkState {
    fn default() -> Self {
        LinkState {
            drift: [PolarizationUnitary::identity(), PolarizationUnitary::identity()],
            correction: [PolarizationUnitary::identity(), PolarizationUnitary::identity()],
            updated_at: 0,
        }
    }
}

impl LinkState {
    /// Net rotation seen by each arm: drift first, then the controller.
    pub fn residual(&self) -> [PolarizationUnitary; 2] {
        [0, 1].map(|k| self.correction[k].then_after(&self.drift[k]))
    }
}

/// Power of `reference` leaked into its orthogonal state by `u`.
pub fn leakage(u: &PolarizationUnitary, reference: &Ket2) -> f64 {
    reference.orthogonal().inner(&reference.apply(u)).norm_sqr()
}

/// Reset both controllers to undo the monitored drift.
///
/// The monitor is idealized: it reports each arm's drift unitary exactly,
/// so the correction is its inverse.
pub fn drift_realign(state: &mut LinkState, reference: &Ket2, interval: usize) -> Result<[PolarizationUnitary; 2]> {
    let correction = [state.drift[0].adjoint(), state.drift[1].adjoint()];
    for (arm, (c, d)) in correction.iter().zip(&state.drift).enumerate() {
        let leak = leakage(&c.then_after(d), reference);
        if leak >= REALIGN_LEAKAGE_TOL {
            return Err(Error::Internal(format!("arm {arm} leaks {leak:e} after re-alignment")));
        }
    }
    state.correction = correction;
    state.updated_at = interval;
    Ok(correction)
}

/// Residual per-arm rotations at each of `0..=intervals` when the controllers
/// are re-aligned every `every` intervals (never when `every` is 0).
///
/// Both arms share `seed` but draw from separate streams.
pub fn residual_schedule(
    params: &LinkParams,
    seed: u64,
    intervals: usize,
    every: usize,
) -> Result<Vec<[PolarizationUnitary; 2]>> {
    let walks: [Vec<Vector3<f64>>; 2] = [true, false].map(|signal| {
        if params.drift_step == 0.0 {
            vec![Vector3::zeros(); intervals + 1]
        } else {
            drift_walk(intervals, params, &mut drift_stream(seed, signal))
        }
    });
    let reference = Ket2::h();
    let mut state = LinkState::default();
    let mut out = Vec::with_capacity(intervals + 1);
    for (t, (ws, wi)) in walks[0].iter().zip(&walks[1]).enumerate() {
        state.drift = [rotation_unitary(ws), rotation_unitary(wi)];
        if every > 0 && t % every == 0 {
            drift_realign(&mut state, &reference, t)?;
        }
        out.push(state.residual());
    }
    Ok(out)
}

/// Per-channel fitted entries plus the controller state they were fit under.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensationPlan {
    pub entries: Vec<PlanEntry>,
    pub drift_correction: [PolarizationUnitary; 2],
    pub updated_at: usize,
}

impl CompensationPlan {
    pub fn entry(&self, channel: usize) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.channel == channel)
    }
}

/// `channel,theta_estimate,q1_deg,q2_deg,h_deg` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub channel: usize,
    pub theta_estimate: f64,
    pub q1_deg: f64,
    pub q2_deg: f64,
    pub h_deg: f64,
}

impl From<&PlanEntry> for PlanRow {
    fn from(e: &PlanEntry) -> Self {
        PlanRow {
            channel: e.channel,
            theta_estimate: e.theta_estimate,
            q1_deg: e.chain.qwp1.to_degrees(),
            q2_deg: e.chain.qwp2.to_degrees(),
            h_deg: e.chain.hwp.to_degrees(),
        }
    }
}

impl From<&PlanRow> for PlanEntry {
    fn from(r: &PlanRow) -> Self {
        PlanEntry {
            channel: r.channel,
            theta_estimate: r.theta_estimate,
            chain: WaveplateChain {
                qwp1: r.q1_deg.to_radians(),
                qwp2: r.q2_deg.to_radians(),
                hwp: r.h_deg.to_radians(),
            },
        }
    }
}
