//! CSV records for every artifact a run writes, and generic readers/writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel_grid::ChannelPair;
use crate::error::{Error, Result};
use crate::measure::{CountRecord, TomoSetting};
use crate::tomo::{Metrics, TomoData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanCsvRow {
    pub index: usize,
    pub signal_nm: f64,
    pub idler_nm: f64,
    #[serde(rename = "signal_THz")]
    pub signal_thz: f64,
    #[serde(rename = "idler_THz")]
    pub idler_thz: f64,
}

impl From<&ChannelPair> for PlanCsvRow {
    fn from(c: &ChannelPair) -> Self {
        PlanCsvRow {
            index: c.index,
            signal_nm: c.signal_wavelength,
            idler_nm: c.idler_wavelength,
            signal_thz: c.signal_freq,
            idler_thz: c.idler_freq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub channel: usize,
    pub label: String,
    pub count: u64,
    pub expected: f64,
    pub integration_s: f64,
}

impl CountRow {
    pub fn new(channel: usize, r: &CountRecord) -> Self {
        CountRow {
            channel,
            label: r.setting.label.clone(),
            count: r.count,
            expected: r.expected,
            integration_s: r.integration_time,
        }
    }

    pub fn to_record(&self) -> Result<CountRecord> {
        Ok(CountRecord {
            setting: TomoSetting::from_label(&self.label)?,
            count: self.count,
            expected: self.expected,
            integration_time: self.integration_s,
        })
    }
}

/// Group count rows by channel, in ascending channel order.
pub fn tomo_data_by_channel(rows: &[CountRow], use_expected: bool) -> Result<BTreeMap<usize, TomoData>> {
    let mut grouped: BTreeMap<usize, Vec<CountRecord>> = BTreeMap::new();
    for row in rows {
        grouped.entry(row.channel).or_default().push(row.to_record()?);
    }
    grouped
        .into_iter()
        .map(|(ch, records)| {
            TomoData::from_records(&records, use_expected)
                .map(|d| (ch, d))
                .map_err(|e| Error::InvalidInput(format!("channel {ch}: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub channel: usize,
    pub fidelity_phi_plus: f64,
    pub fidelity_max: f64,
    pub theta_star: f64,
    pub concurrence: f64,
    pub purity: f64,
    pub method: String,
    pub converged: bool,
}

impl MetricsRow {
    pub fn new(channel: usize, m: &Metrics, method: &str, converged: bool) -> Self {
        MetricsRow {
            channel,
            fidelity_phi_plus: m.fidelity_phi_plus,
            fidelity_max: m.fidelity_max_phase,
            theta_star: m.theta_star,
            concurrence: m.concurrence,
            purity: m.purity,
            method: method.to_string(),
            converged,
        }
    }
}

/// Plot-ready channel-vs-fidelity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub channel: usize,
    pub fidelity_phi_plus: f64,
    pub fidelity_max: f64,
}

pub fn write_csv_to<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_csv_to(File::create(path)?, rows)
}

pub type CsvReader = csv::Reader<File>;

pub fn csv_reader(path: &Path) -> Result<CsvReader> {
    Ok(csv::Reader::from_reader(File::open(path)?))
}

pub fn read_csv_from<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_csv_from(File::open(path)?)
}
