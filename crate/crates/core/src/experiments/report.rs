//! Report files: raw per-replication JSON, one CSV per table and a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::metrics::MetricsTable;
use super::study::{RepRecord, StudyConfig, StudyResult};
use crate::error::{Error, Result};
use crate::estimation::CvResult;
use crate::manifest::RunManifest;
use crate::simulate::DgpTruth;

pub const TABLES: [&str; 8] = ["theta", "confusion", "edges", "alpha", "detection", "separation", "histograms", "failures"];

#[derive(Clone, Debug, Serialize, Deserialize)]
struct StudyHeader {
    config: StudyConfig,
    truth: DgpTruth,
    cv: Option<CvResult>,
}

#[derive(Clone, Debug)]
pub struct ReportFiles {
    pub root: PathBuf,
    pub written: Vec<PathBuf>,
    pub manifest: RunManifest,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// `tables/<name>.csv` for every table; returns the paths written.
pub fn write_tables(m: &MetricsTable, dir: &Path) -> Result<Vec<PathBuf>> {
    let t = dir.join("tables");
    fs::create_dir_all(&t)?;
    let p = |name: &str| t.join(format!("{name}.csv"));
    write_csv(&p("theta"), &m.theta)?;
    write_csv(&p("confusion"), &m.confusion)?;
    write_csv(&p("edges"), &m.edges)?;
    write_csv(&p("alpha"), &m.alpha)?;
    write_csv(&p("detection"), &m.detection)?;
    write_csv(&p("separation"), &m.separation)?;
    write_csv(&p("histograms"), &m.histograms)?;
    write_csv(&p("failures"), &m.failures)?;
    Ok(TABLES.iter().map(|n| p(n)).collect())
}

pub fn read_tables(dir: &Path) -> Result<MetricsTable> {
    let p = |name: &str| dir.join("tables").join(format!("{name}.csv"));
    Ok(MetricsTable {
        theta: read_csv(&p("theta"))?,
        confusion: read_csv(&p("confusion"))?,
        edges: read_csv(&p("edges"))?,
        alpha: read_csv(&p("alpha"))?,
        detection: read_csv(&p("detection"))?,
        separation: read_csv(&p("separation"))?,
        histograms: read_csv(&p("histograms"))?,
        failures: read_csv(&p("failures"))?,
    })
}

/// `study.json`, `raw/rep_<k>.json`, `tables/*.csv` and `manifest.json` under `dir`.
pub fn emit_report(result: &StudyResult, dir: &Path, mut manifest: RunManifest) -> Result<ReportFiles> {
    fs::create_dir_all(dir.join("raw"))?;
    let mut written = Vec::new();
    let header = StudyHeader { config: result.config.clone(), truth: result.truth.clone(), cv: result.cv.clone() };
    let sp = dir.join("study.json");
    fs::write(&sp, serde_json::to_string_pretty(&header)?)?;
    written.push(sp);
    for r in &result.records {
        let p = dir.join("raw").join(format!("rep_{}.json", r.rep));
        fs::write(&p, serde_json::to_string_pretty(r)?)?;
        written.push(p);
    }
    written.extend(write_tables(&result.metrics, dir)?);
    for p in &written {
        manifest.output(dir, p)?;
    }
    let manifest = manifest.finish(dir)?;
    Ok(ReportFiles { root: dir.to_path_buf(), written, manifest })
}

/// Configuration, truth and raw records of an emitted study, in replication order.
pub fn load_study(dir: &Path) -> Result<(StudyConfig, DgpTruth, Option<CvResult>, Vec<RepRecord>)> {
    let header: StudyHeader = serde_json::from_str(&fs::read_to_string(dir.join("study.json"))?)?;
    let mut records: Vec<RepRecord> = Vec::new();
    for entry in fs::read_dir(dir.join("raw"))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            records.push(serde_json::from_str(&fs::read_to_string(&path)?)?);
        }
    }
    records.sort_by_key(|r| r.rep);
    Ok((header.config, header.truth, header.cv, records))
}
