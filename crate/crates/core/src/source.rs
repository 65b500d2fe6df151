//! Broadband SPDC pair source.
//!
//! The phase-matching spectrum of the short type-0 waveguide is expanded to
//! second order in the detuning from degeneracy, giving a `sinc²` brightness
//! profile with a single curvature coefficient. The emitted polarization state
//! is a Werner mixture of `|HH⟩ + e^{iθ₀}|VV⟩` that is identical for every
//! channel.

use serde::{Deserialize, Serialize};

use crate::channel_grid::ChannelPair;
use crate::error::{Error, Result};
use crate::qstate::{werner, DensityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceParams {
    /// nm
    pub pump_center: f64,
    /// nm
    pub pump_filter_fwhm: f64,
    /// mm
    pub crystal_length: f64,
    /// °C, recorded only
    pub temperature: f64,
    /// Source two-photon phase, rad.
    pub theta0: f64,
    pub mean_pairs_per_gate: f64,
    /// Phase-matching curvature κ, THz⁻².
    pub pm_curvature: f64,
    /// Werner weight `p0` of the emitted state.
    pub intrinsic_purity: f64,
    /// Channel the source was aligned on. Informational.
    pub optimized_channel: Option<usize>,
}

impl Default for SourceParams {
    fn default() -> Self {
        SourceParams {
            pump_center: 776.0,
            pump_filter_fwhm: 1.0,
            crystal_length: 1.0,
            temperature: 20.0,
            theta0: 0.0,
            mean_pairs_per_gate: 8.56e-4,
            pm_curvature: 0.090_33,
            intrinsic_purity: 0.97,
            optimized_channel: None,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pump_center", self.pump_center),
            ("pump_filter_fwhm", self.pump_filter_fwhm),
            ("crystal_length", self.crystal_length),
            ("pm_curvature", self.pm_curvature),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("source.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        if !self.temperature.is_finite() {
            return Err(Error::validation("source.temperature", "must be finite"));
        }
        if !self.theta0.is_finite() {
            return Err(Error::validation("source.theta0", "must be finite"));
        }
        if !(self.mean_pairs_per_gate.is_finite() && self.mean_pairs_per_gate >= 0.0) {
            return Err(Error::validation(
                "source.mean_pairs_per_gate",
                format!("must be non-negative, got {}", self.mean_pairs_per_gate),
            ));
        }
        if !(0.0..=1.0).contains(&self.intrinsic_purity) {
            return Err(Error::validation(
                "source.intrinsic_purity",
                format!("must lie in [0, 1], got {}", self.intrinsic_purity),
            ));
        }
        if self.optimized_channel == Some(0) {
            return Err(Error::validation("source.optimized_channel", "channels are 1-based"));
        }
        Ok(())
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Relative pair brightness `sinc²(κ·(ν_s − ν_deg)²)`, equal to 1 at degeneracy.
pub fn spectral_brightness(channel: &ChannelPair, params: &SourceParams) -> f64 {
    let detuning = channel.signal_freq - channel.degeneracy_freq();
    sinc(params.pm_curvature * detuning * detuning).powi(2)
}

/// The emitted polarization state; channel-independent.
pub fn emit_state(_channel: &ChannelPair, params: &SourceParams) -> Result<DensityMatrix> {
    werner(params.intrinsic_purity, params.theta0)
}

/// Expected generated pairs per second in this channel.
pub fn pair_rate(channel: &ChannelPair, params: &SourceParams, pump_rate: f64) -> Result<f64> {
    if !(pump_rate.is_finite() && pump_rate > 0.0) {
        return Err(Error::InvalidArgument(format!("pump rate must be positive, got {pump_rate}")));
    }
    Ok(params.mean_pairs_per_gate * spectral_brightness(channel, params) * pump_rate)
}
