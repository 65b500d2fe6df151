//! Energy-conserving signal/idler channel plan.
//!
//! Channel 1 sits at the configured signal start wavelength; each following
//! channel steps the signal frequency down by one grid spacing, toward the
//! degeneracy point at half the pump frequency. The idler is fixed by
//! `ν_i = ν_p − ν_s`. All wavelengths are vacuum wavelengths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in nm·THz (exact).
pub const SPEED_OF_LIGHT_NM_THZ: f64 = 299_792.458;

pub const ENERGY_TOL_THZ: f64 = 1e-9;

pub fn wavelength_to_frequency(nm: f64) -> f64 {
    SPEED_OF_LIGHT_NM_THZ / nm
}

pub fn frequency_to_wavelength(thz: f64) -> f64 {
    SPEED_OF_LIGHT_NM_THZ / thz
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridParams {
    /// nm
    pub pump_wavelength: f64,
    /// nm
    pub signal_start_wavelength: f64,
    /// GHz
    pub spacing: f64,
    pub channel_count: usize,
    /// Lower edge of the demultiplexing filter tuning range, nm.
    pub bpf_min: f64,
    /// Upper edge, nm.
    pub bpf_max: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            pump_wavelength: 776.0,
            signal_start_wavelength: 1525.0,
            spacing: 60.0,
            channel_count: 44,
            bpf_min: 1520.0,
            bpf_max: 1580.0,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("grid.{name}"),
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        positive("pump_wavelength", self.pump_wavelength)?;
        positive("signal_start_wavelength", self.signal_start_wavelength)?;
        positive("spacing", self.spacing)?;
        positive("bpf_min", self.bpf_min)?;
        positive("bpf_max", self.bpf_max)?;
        if self.channel_count == 0 {
            return Err(Error::validation("grid.channel_count", "must be at least 1"));
        }
        if self.bpf_min >= self.bpf_max {
            return Err(Error::validation(
                "grid.bpf_min",
                format!("must be below grid.bpf_max ({} >= {})", self.bpf_min, self.bpf_max),
            ));
        }
        Ok(())
    }

    pub fn pump_freq(&self) -> f64 {
        wavelength_to_frequency(self.pump_wavelength)
    }

    pub fn spacing_thz(&self) -> f64 {
        self.spacing * 1e-3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    /// 1-based.
    pub index: usize,
    /// THz
    pub signal_freq: f64,
    /// THz
    pub idler_freq: f64,
    /// nm
    pub signal_wavelength: f64,
    /// nm
    pub idler_wavelength: f64,
    /// `ν_s(n) − ν_s(1)` in THz; the idler offset is its negative.
    pub signal_detuning: f64,
}

impl ChannelPair {
    /// Pair a signal frequency with its energy-conserving idler. No feasibility check.
    pub fn from_signal(index: usize, signal_freq: f64, pump_freq: f64, signal_detuning: f64) -> Self {
        let idler_freq = pump_freq - signal_freq;
        ChannelPair {
            index,
            signal_freq,
            idler_freq,
            signal_wavelength: frequency_to_wavelength(signal_freq),
            idler_wavelength: frequency_to_wavelength(idler_freq),
            signal_detuning,
        }
    }

    /// `ν_s + ν_i`.
    pub fn pump_freq(&self) -> f64 {
        self.signal_freq + self.idler_freq
    }

    /// Half the pump frequency.
    pub fn degeneracy_freq(&self) -> f64 {
        0.5 * self.pump_freq()
    }
}

pub fn build_plan(params: &GridParams) -> Result<Vec<ChannelPair>> {
    params.validate()?;
    let pump = params.pump_freq();
    let degeneracy = 0.5 * pump;
    let first = wavelength_to_frequency(params.signal_start_wavelength);
    let step = params.spacing_thz();
    (0..params.channel_count)
        .map(|k| {
            let detuning = -(k as f64) * step;
            let signal = first + detuning;
            if signal - degeneracy <= 1e-12 {
                return Err(Error::PlanInfeasible {
                    index: k + 1,
                    signal_thz: signal,
                    degeneracy_thz: degeneracy,
                });
            }
            Ok(ChannelPair::from_signal(k + 1, signal, pump, detuning))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arm {
    Signal,
    Idler,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfBand {
        index: usize,
        arm: Arm,
        wavelength: f64,
    },
    EnergyResidual {
        index: usize,
        residual_thz: f64,
    },
}

/// Report every out-of-band wavelength and every energy-conservation residual.
pub fn validate_plan(plan: &[ChannelPair], params: &GridParams) -> Vec<Violation> {
    let pump = params.pump_freq();
    let mut out = Vec::new();
    for ch in plan {
        for (arm, wl) in [(Arm::Signal, ch.signal_wavelength), (Arm::Idler, ch.idler_wavelength)] {
            if !(params.bpf_min..=params.bpf_max).contains(&wl) {
                out.push(Violation::OutOfBand {
                    index: ch.index,
                    arm,
                    wavelength: wl,
                });
            }
        }
        let residual = ch.signal_freq + ch.idler_freq - pump;
        if residual.abs() > ENERGY_TOL_THZ {
            out.push(Violation::EnergyResidual {
                index: ch.index,
                residual_thz: residual,
            });
        }
    }
    out
}
