//! Analyzer optics, detectors and coincidence statistics.
//!
//! Waveplate Jones matrices take the fast-axis angle from horizontal:
//!
//! ```text
//! HWP(h) = [[cos2h, sin2h], [sin2h, −cos2h]]
//! QWP(q) = [[cos²q + i·sin²q, (1−i)·sin q·cos q], [(1−i)·sin q·cos q, sin²q + i·cos²q]]
//! ```
//!
//! Both are exact unitaries (the HWP up to a global phase of `−i`).

use nalgebra::Matrix2;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{transmission, LinkParams};
use crate::qstate::{DensityMatrix, Ket2, PolarizationUnitary, C64};

pub fn jones_hwp(angle: f64) -> PolarizationUnitary {
    let (s, c) = (2.0 * angle).sin_cos();
    PolarizationUnitary::from_unitary_unchecked(Matrix2::new(
        C64::new(c, 0.0),
        C64::new(s, 0.0),
        C64::new(s, 0.0),
        C64::new(-c, 0.0),
    ))
}

pub fn jones_qwp(angle: f64) -> PolarizationUnitary {
    let (s, c) = angle.sin_cos();
    let off = C64::new(1.0, -1.0) * (s * c);
    PolarizationUnitary::from_unitary_unchecked(Matrix2::new(
        C64::new(c * c, s * s),
        off,
        off,
        C64::new(s * s, c * c),
    ))
}

/// QWP–QWP–HWP retarder chain; light meets the HWP first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveplateChain {
    pub qwp1: f64,
    pub qwp2: f64,
    pub hwp: f64,
}

impl WaveplateChain {
    /// `QWP(q1)·QWP(q2)·HWP(h)`.
    pub fn unitary(&self) -> PolarizationUnitary {
        jones_qwp(self.qwp1)
            .then_after(&jones_qwp(self.qwp2))
            .then_after(&jones_hwp(self.hwp))
    }
}

/// One product-projector tomography setting.
#[derive(Debug, Clone, PartialEq)]
pub struct TomoSetting {
    pub signal: Ket2,
    pub idler: Ket2,
    pub label: String,
}

impl TomoSetting {
    /// Build from a two-letter label over `{H, V, D, A, R, L}`, e.g. `"DR"`.
    pub fn from_label(label: &str) -> Result<Self> {
        let mut chars = label.chars();
        let (Some(s), Some(i), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(Error::InvalidInput(format!("setting label `{label}` must be two letters")));
        };
        let lookup = |c: char| {
            Ket2::from_label(c)
                .ok_or_else(|| Error::InvalidInput(format!("unknown polarization `{c}` in `{label}`")))
        };
        Ok(TomoSetting {
            signal: lookup(s)?,
            idler: lookup(i)?,
            label: label.to_string(),
        })
    }
}

/// Labels of the 16-setting tomography scheme, in measurement order.
pub const TOMO_LABELS: [&str; 16] = [
    "HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH", "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL",
];

/// The four settings whose counts sum to the pair-number normalization.
pub const NORMALIZATION_LABELS: [&str; 4] = ["HH", "HV", "VH", "VV"];

pub fn tomo_settings_16() -> Vec<TomoSetting> {
    TOMO_LABELS
        .iter()
        .map(|l| TomoSetting::from_label(l).expect("static labels are valid"))
        .collect()
}

/// Born-rule coincidence probability `Tr(ρ·(P_s ⊗ P_i))`.
pub fn coincidence_probability(rho: &DensityMatrix, setting: &TomoSetting) -> f64 {
    rho.product_expectation(&setting.signal, &setting.idler).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorParams {
    pub efficiency_signal: f64,
    pub efficiency_idler: f64,
    pub dark_prob_per_gate: f64,
    /// gates/s
    pub gate_rate: f64,
    /// s
    pub integration_time: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            efficiency_signal: 0.10,
            efficiency_idler: 0.10,
            dark_prob_per_gate: 1e-5,
            gate_rate: 1e6,
            integration_time: 100.0,
        }
    }
}

impl DetectorParams {
    /// Superconducting-detector preset: high efficiency, negligible dark counts.
    pub fn superconducting() -> Self {
        DetectorParams {
            efficiency_signal: 0.6,
            efficiency_idler: 0.6,
            dark_prob_per_gate: 1e-8,
            ..DetectorParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("efficiency_signal", self.efficiency_signal),
            ("efficiency_idler", self.efficiency_idler),
            ("dark_prob_per_gate", self.dark_prob_per_gate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(
                    format!("detector.{name}"),
                    format!("probability must lie in [0, 1], got {v}"),
                ));
            }
        }
        for (name, v) in [("gate_rate", self.gate_rate), ("integration_time", self.integration_time)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("detector.{name}"),
                    format!("must be positive, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: TomoSetting,
    pub count: u64,
    pub expected: f64,
    /// s
    pub integration_time: f64,
}

/// Mean coincidences in one integration window: true pairs plus accidentals.
///
/// Accidentals treat each gate as the coincidence window and multiply the
/// per-gate singles probabilities (pair photons reaching the detector plus
/// dark counts).
pub fn expected_counts(
    rho: &DensityMatrix,
    setting: &TomoSetting,
    det: &DetectorParams,
    link: &LinkParams,
    pair_rate: f64,
) -> f64 {
    let t = transmission(link);
    let true_pairs = pair_rate
        * t
        * t
        * det.efficiency_signal
        * det.efficiency_idler
        * coincidence_probability(rho, setting)
        * det.integration_time;

    let pairs_per_gate = pair_rate / det.gate_rate;
    let marginal_s = rho.product_expectation(&setting.signal, &Ket2::h())
        + rho.product_expectation(&setting.signal, &Ket2::v());
    let marginal_i = rho.product_expectation(&Ket2::h(), &setting.idler)
        + rho.product_expectation(&Ket2::v(), &setting.idler);
    let singles_s = (pairs_per_gate * t * det.efficiency_signal * marginal_s.clamp(0.0, 1.0)
        + det.dark_prob_per_gate)
        .min(1.0);
    let singles_i = (pairs_per_gate * t * det.efficiency_idler * marginal_i.clamp(0.0, 1.0)
        + det.dark_prob_per_gate)
        .min(1.0);
    let accidentals = det.gate_rate * det.integration_time * singles_s * singles_i;
    true_pairs + accidentals
}

/// Poisson draw with the given mean.
pub fn sample_counts<R: Rng + ?Sized>(expected: f64, rng: &mut R) -> Result<u64> {
    if !expected.is_finite() || expected < 0.0 {
        return Err(Error::InvalidArgument(format!("Poisson mean must be non-negative, got {expected}")));
    }
    if expected == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(expected).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// How counts are produced from expected values.
pub enum CountMode<'a, R: Rng + ?Sized> {
    Sampled(&'a mut R),
    /// Expected values pass through; `count` holds the rounded mean.
    Noiseless,
}

/// One record per setting of [`tomo_settings_16`].
pub fn run_tomography<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    det: &DetectorParams,
    link: &LinkParams,
    pair_rate: f64,
    mut mode: CountMode<'_, R>,
) -> Result<Vec<CountRecord>> {
    tomo_settings_16()
        .into_iter()
        .map(|setting| {
            let expected = expected_counts(rho, &setting, det, link, pair_rate);
            let count = match &mut mode {
                CountMode::Sampled(rng) => sample_counts(expected, *rng)?,
                CountMode::Noiseless => expected.round() as u64,
            };
            Ok(CountRecord {
                setting,
                count,
                expected,
                integration_time: det.integration_time,
            })
        })
        .collect()
}
