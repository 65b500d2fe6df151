use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use qdist_core::channel_grid::{build_plan, validate_plan, ChannelPair, Violation};
use qdist_core::compensate::{compensate_channel, PlanEntry, PlanRow};
use qdist_core::config::{load_config, RunConfig};
use qdist_core::io::{self, tomo_data_by_channel, CountRow, MetricsRow, PlanCsvRow, ReportRow};
use qdist_core::qstate::{fidelity_pure, phi_plus};
use qdist_core::sweep::{analyze, run_sweep, simulate_counts, summarize, SweepOptions};
use qdist_core::Error;

mod channels;

#[derive(Parser, Debug)]
#[command(name = "qdist", version, about = "Wavelength-multiplexed entanglement distribution simulator")]
struct Cli {
    /// Run configuration file (dotted-key TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Channel subset, e.g. `1-5,44`.
    #[arg(long, global = true, value_parser = channels::parse_list)]
    channels: Option<channels::ChannelList>,
    /// Use expected counts instead of Poisson draws.
    #[arg(long, global = true)]
    noiseless: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the channel plan.
    Plan,
    /// Simulate tomography counts for every selected channel.
    Simulate {
        /// Restrict to the channels of a previously written plan file.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Reconstruct states from a counts file.
    Tomo {
        #[arg(long)]
        counts: PathBuf,
    },
    /// Fit (or apply) per-channel phase compensation from a counts file.
    Compensate {
        #[arg(long)]
        counts: PathBuf,
        /// Apply this compensation file instead of fitting a new one.
        #[arg(long)]
        apply: Option<PathBuf>,
    },
    /// Run the full pipeline over the channel plan.
    Sweep {
        /// Process channels one at a time.
        #[arg(long)]
        serial: bool,
    },
    /// Summarize a sweep, metrics or report file.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    /// Output was written but some channels failed.
    Partial(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation { .. }
            | Error::ConfigParse(_)
            | Error::InvalidArgument(_)
            | Error::InvalidInput(_)
            | Error::PlanInfeasible { .. }
            | Error::Csv(_)
            | Error::Io(_) => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    config: RunConfig,
    out_dir: PathBuf,
    channels: Option<Vec<usize>>,
    noiseless: bool,
    format: Format,
}

impl Ctx {
    fn from_cli(cli: &Cli) -> Result<Self, Failure> {
        let mut config = match &cli.config {
            Some(path) => load_config(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        let out_dir = cli.out_dir.clone().unwrap_or_else(|| config.output_dir.clone());
        let channels = cli.channels.clone().map(|c| c.0);
        Ok(Ctx {
            config,
            out_dir,
            channels,
            noiseless: cli.noiseless,
            format: cli.format,
        })
    }

    fn path(&self, stem: &str) -> PathBuf {
        self.out_dir.join(format!("{stem}.{}", self.format.ext()))
    }

    fn write<T: Serialize>(&self, stem: &str, rows: &[T]) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out_dir).map_err(Error::from)?;
        let path = self.path(stem);
        match self.format {
            Format::Csv => io::write_csv(&path, rows)?,
            Format::Json => {
                let text = serde_json::to_string_pretty(rows).map_err(|e| Failure::Runtime(e.to_string()))?;
                fs::write(&path, text + "\n").map_err(Error::from)?;
            }
        }
        Ok(path)
    }

    fn wanted(&self, channel: usize) -> bool {
        self.channels.as_ref().is_none_or(|c| c.contains(&channel))
    }
}

/// Read CSV or JSON rows, chosen by file extension.
fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let what = |e: String| Failure::Validation(format!("{}: {e}", path.display()));
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(|e| what(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| what(e.to_string()))
    } else {
        io::read_csv(path).map_err(|e| what(e.to_string()))
    }
}

fn cmd_plan(ctx: &Ctx) -> Outcome {
    let plan = build_plan(&ctx.config.grid)?;
    let violations = validate_plan(&plan, &ctx.config.grid);
    let rows: Vec<PlanCsvRow> = plan.iter().filter(|c| ctx.wanted(c.index)).map(PlanCsvRow::from).collect();
    let path = ctx.write("plan", &rows)?;
    println!("{} channel pairs -> {}", rows.len(), path.display());
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations
        .iter()
        .map(|v| match v {
            Violation::OutOfBand { index, arm, wavelength } => {
                format!("channel {index} {arm:?} at {wavelength:.3} nm is outside the filter range")
            }
            Violation::EnergyResidual { index, residual_thz } => {
                format!("channel {index} violates energy conservation by {residual_thz:e} THz")
            }
        })
        .collect();
    Err(Failure::Validation(lines.join("\n")))
}

/// Channels of a plan file, checked against the configured grid.
fn channels_from_plan_file(path: &Path, plan: &[ChannelPair]) -> Result<Vec<usize>, Failure> {
    let rows: Vec<PlanCsvRow> = read_rows(path)?;
    rows.iter()
        .map(|r| {
            let ch = plan.get(r.index.wrapping_sub(1)).ok_or_else(|| {
                Failure::Validation(format!("plan file channel {} is not in the configured grid", r.index))
            })?;
            if (ch.signal_freq - r.signal_thz).abs() > 1e-9 || (ch.idler_freq - r.idler_thz).abs() > 1e-9 {
                return Err(Failure::Validation(format!(
                    "plan file channel {} does not match the configured grid",
                    r.index
                )));
            }
            Ok(r.index)
        })
        .collect()
}

fn cmd_simulate(ctx: &Ctx, plan_file: Option<&Path>) -> Outcome {
    let mut channels = ctx.channels.clone();
    if let Some(path) = plan_file {
        let plan = build_plan(&ctx.config.grid)?;
        let from_file = channels_from_plan_file(path, &plan)?;
        channels = Some(match channels {
            Some(c) => from_file.into_iter().filter(|n| c.contains(n)).collect(),
            None => from_file,
        });
    }
    let options = SweepOptions {
        noiseless: ctx.noiseless,
        channels,
        parallel: true,
    };
    let (_, simulated) = simulate_counts(&ctx.config, &options)?;
    let rows: Vec<CountRow> = simulated
        .iter()
        .flat_map(|(ch, records)| records.iter().map(|r| CountRow::new(ch.index, r)))
        .collect();
    let path = ctx.write("counts", &rows)?;
    println!("{} channels, {} records -> {}", simulated.len(), rows.len(), path.display());
    Ok(())
}

fn load_counts(ctx: &Ctx, path: &Path) -> Result<BTreeMap<usize, qdist_core::tomo::TomoData>, Failure> {
    let rows: Vec<CountRow> = read_rows(path)?;
    let mut data = tomo_data_by_channel(&rows, ctx.noiseless)?;
    data.retain(|ch, _| ctx.wanted(*ch));
    if data.is_empty() {
        return Err(Failure::Validation(format!("{}: no channels selected", path.display())));
    }
    Ok(data)
}

fn partial(failures: &[String]) -> Outcome {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(failures.join("\n")))
    }
}

fn cmd_tomo(ctx: &Ctx, counts: &Path) -> Outcome {
    let data = load_counts(ctx, counts)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let states = ctx.out_dir.join("states");
    fs::create_dir_all(&states).map_err(Error::from)?;
    for (ch, d) in &data {
        match analyze(*ch, d, &ctx.config) {
            Ok(a) => {
                fs::write(states.join(format!("channel_{ch:02}.txt")), a.reconstruction.rho.to_string())
                    .map_err(Error::from)?;
                rows.push(MetricsRow::new(
                    *ch,
                    &a.metrics,
                    a.reconstruction.method.as_str(),
                    a.reconstruction.converged,
                ));
            }
            Err(e) => failures.push(format!("channel {ch}: {e}")),
        }
    }
    let path = ctx.write("metrics", &rows)?;
    println!("{} channels reconstructed -> {}", rows.len(), path.display());
    partial(&failures)
}

#[derive(Serialize)]
struct CompensatedRow {
    channel: usize,
    theta_estimate: f64,
    fidelity_phi_plus: f64,
    fidelity_compensated: f64,
}

fn cmd_compensate(ctx: &Ctx, counts: &Path, apply: Option<&Path>) -> Outcome {
    let data = load_counts(ctx, counts)?;
    let given: Option<BTreeMap<usize, PlanEntry>> = apply
        .map(read_rows::<PlanRow>)
        .transpose()?
        .map(|rows| rows.iter().map(|r| (r.channel, PlanEntry::from(r))).collect());
    let mut plan_rows = Vec::new();
    let mut out_rows = Vec::new();
    let mut failures = Vec::new();
    for (ch, d) in &data {
        let a = match analyze(*ch, d, &ctx.config) {
            Ok(a) => a,
            Err(e) => {
                failures.push(format!("channel {ch}: {e}"));
                continue;
            }
        };
        let entry = match &given {
            Some(plan) => match plan.get(ch) {
                Some(e) => *e,
                None => {
                    failures.push(format!("channel {ch}: not in the compensation file"));
                    continue;
                }
            },
            None => match a.entry {
                Some(e) => e,
                None => {
                    failures.push(format!("channel {ch}: no phase information to fit"));
                    continue;
                }
            },
        };
        let after = fidelity_pure(&compensate_channel(&a.reconstruction.rho, &entry), &phi_plus());
        plan_rows.push(PlanRow::from(&entry));
        out_rows.push(CompensatedRow {
            channel: *ch,
            theta_estimate: entry.theta_estimate,
            fidelity_phi_plus: a.metrics.fidelity_phi_plus,
            fidelity_compensated: after,
        });
    }
    let path = ctx.write("compensation", &plan_rows)?;
    ctx.write("compensated", &out_rows)?;
    println!("{} channels compensated -> {}", plan_rows.len(), path.display());
    partial(&failures)
}

fn cmd_sweep(ctx: &Ctx, serial: bool) -> Outcome {
    let options = SweepOptions {
        noiseless: ctx.noiseless,
        channels: ctx.channels.clone(),
        parallel: !serial,
    };
    let report = run_sweep(&ctx.config, &options)?;
    ctx.write("plan", &report.plan_rows())?;
    ctx.write("counts", &report.count_rows())?;
    ctx.write("metrics", &report.metrics_rows())?;
    ctx.write("compensation", &report.compensation_rows())?;
    let rows = report.rows();
    let path = ctx.write("sweep", &rows)?;
    if let Some(s) = summarize(rows.iter().map(|r| r.fidelity_max)) {
        println!(
            "fidelity_max over {} channels: min {:.4} median {:.4} max {:.4}",
            s.count, s.min, s.median, s.max
        );
    }
    println!("{} rows -> {}", rows.len(), path.display());
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| !r.error.is_empty())
        .map(|r| format!("channel {}: {}", r.index, r.error))
        .collect();
    partial(&failures)
}

/// Pull `(channel, fidelity_phi_plus, fidelity_max)` out of any file that has those columns.
fn report_rows(path: &Path) -> Result<Vec<ReportRow>, Failure> {
    let value_rows: Vec<BTreeMap<String, serde_json::Value>> = if path.extension().is_some_and(|e| e == "json") {
        read_rows(path)?
    } else {
        let mut reader = csv_reader(path)?;
        let headers = reader
            .headers()
            .map_err(|e| Failure::Validation(e.to_string()))?
            .clone();
        reader
            .records()
            .map(|rec| {
                let rec = rec.map_err(|e| Failure::Validation(e.to_string()))?;
                Ok(headers
                    .iter()
                    .zip(rec.iter())
                    .map(|(h, v)| {
                        let value = v
                            .parse::<f64>()
                            .ok()
                            .and_then(serde_json::Number::from_f64)
                            .map(serde_json::Value::Number)
                            .unwrap_or_else(|| serde_json::Value::String(v.to_string()));
                        (h.to_string(), value)
                    })
                    .collect())
            })
            .collect::<Result<_, Failure>>()?
    };
    let number = |row: &BTreeMap<String, serde_json::Value>, keys: &[&str]| {
        keys.iter().find_map(|k| match row.get(*k)? {
            serde_json::Value::Number(n) => n.as_f64(),
            serde_json::Value::String(s) => s.parse().ok(),
            _ => None,
        })
    };
    value_rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let missing = |what: &str| Failure::Validation(format!("{}: row {} has no {what}", path.display(), i + 1));
            Ok(ReportRow {
                channel: number(row, &["channel", "index"]).ok_or_else(|| missing("channel"))? as usize,
                fidelity_phi_plus: number(row, &["fidelity_phi_plus"]).ok_or_else(|| missing("fidelity_phi_plus"))?,
                fidelity_max: number(row, &["fidelity_max"]).ok_or_else(|| missing("fidelity_max"))?,
            })
        })
        .collect()
}

fn csv_reader(path: &Path) -> Result<qdist_core::io::CsvReader, Failure> {
    qdist_core::io::csv_reader(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn cmd_report(ctx: &Ctx, input: &Path) -> Outcome {
    let mut rows = report_rows(input)?;
    rows.retain(|r| ctx.wanted(r.channel));
    rows.sort_by_key(|r| r.channel);
    let path = ctx.write("report", &rows)?;
    let Some(s) = summarize(rows.iter().map(|r| r.fidelity_max)) else {
        return Err(Failure::Validation(format!("{}: no finite fidelities", input.display())));
    };
    let line = format!(
        "fidelity_max over {} channels: min {:.4} median {:.4} max {:.4}",
        s.count, s.min, s.median, s.max
    );
    let mut table = String::from("channel  F(phi+)  F(max)\n");
    for r in &rows {
        table.push_str(&format!("{:>7}  {:>7.4}  {:>6.4}\n", r.channel, r.fidelity_phi_plus, r.fidelity_max));
    }
    fs::write(ctx.out_dir.join("summary.txt"), format!("{table}{line}\n")).map_err(Error::from)?;
    print!("{table}");
    println!("{line}");
    println!("table -> {}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    let ctx = Ctx::from_cli(cli)?;
    match &cli.command {
        Command::Plan => cmd_plan(&ctx),
        Command::Simulate { plan } => cmd_simulate(&ctx, plan.as_deref()),
        Command::Tomo { counts } => cmd_tomo(&ctx, counts),
        Command::Compensate { counts, apply } => cmd_compensate(&ctx, counts, apply.as_deref()),
        Command::Sweep { serial } => cmd_sweep(&ctx, *serial),
        Command::Report { input } => cmd_report(&ctx, input),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Partial(msg)) => {
            eprintln!("some channels failed:\n{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
