use super::MetricsSummary;
use crate::agents::CurveRow;
use crate::episode::TrajectoryRecord;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// One JSON object per line.
pub fn write_trajectory_ndjson(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_trajectory_ndjson(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

pub fn write_metrics_tsv(path: &Path, summaries: &[MetricsSummary]) -> Result<()> {
    let mut out =
        String::from("set\tcontroller\tepisodes\tsuccesses\tsuccess_rate\tavg_travel_time\tarrived_vehicles\n");
    for s in summaries {
        let time = s.avg_travel_time.map_or_else(|| "nan".to_string(), |t| format!("{t:.6}"));
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{}\t{}",
            s.set, s.controller, s.episodes, s.successes, s.success_rate, time, s.arrived_vehicles
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_curve_tsv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut out = String::from(CurveRow::TSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_tsv());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_curve_tsv(path: &Path) -> Result<Vec<CurveRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CurveRow::TSV_HEADER => {}
        _ => return Err(Error::Config(format!("{} is not a learning-curve file", path.display()))),
    }
    lines.filter(|l| !l.trim().is_empty()).map(CurveRow::from_tsv).collect()
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub controller: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub config: String,
}

impl Manifest {
    pub fn new(command: &str, controller: Option<&str>, seed: u64, cfg: &crate::config::LabConfig) -> Self {
        Self {
            command: command.to_string(),
            controller: controller.map(str::to_string),
            seed,
            config_hash: cfg.hash(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.to_toml(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
