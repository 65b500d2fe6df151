//! The per-channel pipeline and the full 44-channel sweep.
//!
//! Channels are measured one per drift interval in index order, so channel
//! `n` sees the drift accumulated over `n − 1` intervals, corrected at the
//! most recent re-alignment.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel_grid::{build_plan, ChannelPair};
use crate::compensate::{compensate_channel, fit_plan_entry, residual_schedule, PlanEntry, PlanRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{write_csv, CountRow, MetricsRow, PlanCsvRow};
use crate::link::apply_link_with_drift;
use crate::measure::{run_tomography, CountMode, CountRecord};
use crate::qstate::{fidelity_pure, phi_plus, PolarizationUnitary};
use crate::rng::{combine, stream, Domain};
use crate::source::{emit_state, pair_rate};
use crate::tomo::{reconstruct, report_metrics, Metrics, ReconstructionResult, TomoData};

/// Reconstruction, metrics and fitted compensation for one channel's counts.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub reconstruction: ReconstructionResult,
    pub metrics: Metrics,
    /// `None` when the state carries no usable phase.
    pub entry: Option<PlanEntry>,
    /// Fidelity to Φ+ after applying `entry` (the raw fidelity without one).
    pub compensated_fidelity: f64,
}

pub fn analyze(channel: usize, data: &TomoData, config: &RunConfig) -> Result<Analysis> {
    let reconstruction = reconstruct(data, config.tomography.method, &config.tomography.mle_options())?;
    let metrics = report_metrics(&reconstruction.rho);
    let entry = fit_plan_entry(channel, &reconstruction.rho).ok();
    let compensated_fidelity = match &entry {
        Some(e) => fidelity_pure(&compensate_channel(&reconstruction.rho, e), &phi_plus()),
        None => metrics.fidelity_phi_plus,
    };
    Ok(Analysis {
        reconstruction,
        metrics,
        entry,
        compensated_fidelity,
    })
}

/// Reporting window of [`SweepRow::hh_counts`], s.
pub const HH_WINDOW_S: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub signal_nm: f64,
    pub idler_nm: f64,
    /// HH coincidences rescaled to a 100 s window.
    pub hh_counts: f64,
    pub fidelity_phi_plus: f64,
    pub fidelity_max: f64,
    pub theta_star: f64,
    pub concurrence: f64,
    pub converged: bool,
    /// Empty on success.
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct ChannelRun {
    pub channel: ChannelPair,
    pub records: Vec<CountRecord>,
    pub analysis: std::result::Result<Analysis, String>,
}

impl ChannelRun {
    pub fn row(&self) -> SweepRow {
        let hh = self
            .records
            .iter()
            .find(|r| r.setting.label == "HH")
            .map(|r| r.count as f64 * HH_WINDOW_S / r.integration_time)
            .unwrap_or(f64::NAN);
        let (fp, fm, th, c, conv, err) = match &self.analysis {
            Ok(a) => (
                a.metrics.fidelity_phi_plus,
                a.compensated_fidelity,
                a.metrics.theta_star,
                a.metrics.concurrence,
                a.reconstruction.converged,
                String::new(),
            ),
            Err(e) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, false, e.clone()),
        };
        SweepRow {
            index: self.channel.index,
            signal_nm: self.channel.signal_wavelength,
            idler_nm: self.channel.idler_wavelength,
            hh_counts: hh,
            fidelity_phi_plus: fp,
            fidelity_max: fm,
            theta_star: th,
            concurrence: c,
            converged: conv,
            error: err,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Expected-value counts instead of Poisson draws.
    pub noiseless: bool,
    /// 1-based channel subset; all channels when `None`.
    pub channels: Option<Vec<usize>>,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub plan: Vec<ChannelPair>,
    pub runs: Vec<ChannelRun>,
}

impl SweepReport {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.runs.iter().map(ChannelRun::row).collect()
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.analysis.is_err()).count()
    }

    pub fn count_rows(&self) -> Vec<CountRow> {
        self.runs
            .iter()
            .flat_map(|r| r.records.iter().map(|rec| CountRow::new(r.channel.index, rec)))
            .collect()
    }

    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        self.runs
            .iter()
            .filter_map(|r| {
                let a = r.analysis.as_ref().ok()?;
                Some(MetricsRow::new(
                    r.channel.index,
                    &a.metrics,
                    a.reconstruction.method.as_str(),
                    a.reconstruction.converged,
                ))
            })
            .collect()
    }

    pub fn compensation_rows(&self) -> Vec<PlanRow> {
        self.runs
            .iter()
            .filter_map(|r| r.analysis.as_ref().ok()?.entry.as_ref().map(PlanRow::from))
            .collect()
    }

    pub fn plan_rows(&self) -> Vec<PlanCsvRow> {
        self.plan.iter().map(PlanCsvRow::from).collect()
    }

    /// Write `plan.csv`, `counts.csv`, `metrics.csv`, `compensation.csv` and `sweep.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_csv(&dir.join("plan.csv"), &self.plan_rows())?;
        write_csv(&dir.join("counts.csv"), &self.count_rows())?;
        write_csv(&dir.join("metrics.csv"), &self.metrics_rows())?;
        write_csv(&dir.join("compensation.csv"), &self.compensation_rows())?;
        write_csv(&dir.join("sweep.csv"), &self.rows())?;
        Ok(())
    }
}

/// Seed of the drift walk for a run: the run seed folded with the link seed.
pub fn drift_seed(config: &RunConfig) -> u64 {
    combine(config.seed, config.link.seed)
}

/// Simulate counts for one channel under the given residual drift.
pub fn simulate_channel(
    channel: &ChannelPair,
    residual: &[PolarizationUnitary; 2],
    config: &RunConfig,
    noiseless: bool,
) -> Result<Vec<CountRecord>> {
    let emitted = emit_state(channel, &config.source)?;
    let received = apply_link_with_drift(&emitted, channel, &config.link, &residual[0], &residual[1]);
    let rate = pair_rate(channel, &config.source, config.detector.gate_rate)?;
    if noiseless {
        run_tomography::<crate::rng::SimRng>(&received, &config.detector, &config.link, rate, CountMode::Noiseless)
    } else {
        let mut rng = stream(config.seed, Domain::Counts, channel.index as u64);
        run_tomography(&received, &config.detector, &config.link, rate, CountMode::Sampled(&mut rng))
    }
}

fn selected(plan: &[ChannelPair], channels: &Option<Vec<usize>>) -> Result<Vec<ChannelPair>> {
    match channels {
        None => Ok(plan.to_vec()),
        Some(list) => list
            .iter()
            .map(|&n| {
                plan.get(n.wrapping_sub(1)).copied().ok_or_else(|| {
                    Error::validation("channels", format!("channel {n} outside 1..={}", plan.len()))
                })
            })
            .collect(),
    }
}

/// Counts for the selected channels, without reconstruction.
/// Plan plus the count records of each selected channel.
pub type SimulatedCounts = (Vec<ChannelPair>, Vec<(ChannelPair, Vec<CountRecord>)>);

pub fn simulate_counts(config: &RunConfig, options: &SweepOptions) -> Result<SimulatedCounts> {
    config.validate()?;
    let plan = build_plan(&config.grid)?;
    let chosen = selected(&plan, &options.channels)?;
    let schedule = residual_schedule(
        &config.link,
        drift_seed(config),
        plan.len().saturating_sub(1),
        config.compensation.realign_every,
    )?;
    let one = |ch: &ChannelPair| -> Result<(ChannelPair, Vec<CountRecord>)> {
        Ok((*ch, simulate_channel(ch, &schedule[ch.index - 1], config, options.noiseless)?))
    };
    let out: Result<Vec<_>> = if options.parallel {
        chosen.par_iter().map(one).collect()
    } else {
        chosen.iter().map(one).collect()
    };
    Ok((plan, out?))
}

/// Run the full pipeline; per-channel failures are recorded, not propagated.
pub fn run_sweep(config: &RunConfig, options: &SweepOptions) -> Result<SweepReport> {
    let (plan, simulated) = simulate_counts(config, options)?;
    let one = |(channel, records): (ChannelPair, Vec<CountRecord>)| {
        let analysis = TomoData::from_records(&records, options.noiseless)
            .and_then(|d| analyze(channel.index, &d, config))
            .map_err(|e| e.to_string());
        ChannelRun {
            channel,
            records,
            analysis,
        }
    };
    let runs = if options.parallel {
        simulated.into_par_iter().map(one).collect()
    } else {
        simulated.into_iter().map(one).collect()
    };
    Ok(SweepReport { plan, runs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

/// Min/median/max of the finite values; `None` when there are none.
pub fn summarize(values: impl IntoIterator<Item = f64>) -> Option<Summary> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Some(Summary {
        count: n,
        min: v[0],
        median,
        max: v[n - 1],
    })
}
