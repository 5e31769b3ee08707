//! CSV and metadata output for ensemble runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::ensemble::{EnsembleConfig, EnsembleStats};
use crate::error::{Error, Result};

pub fn csv_header(levels: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "mean_V", "se_V", "mean_dB", "se_dB"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..levels).map(|k| format!("mean_rho{k}{k}")));
    h.push("mean_u".into());
    h.push("se_u".into());
    h
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// One row per recorded time. Floats use Rust's shortest round-trip
/// formatting, so re-parsing recovers every value exactly.
pub fn write_csv(stats: &EnsembleStats, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(csv_header(stats.populations.len()))
        .map_err(csv_error(path))?;
    for (i, t) in stats.times.iter().enumerate() {
        let mut row = vec![
            t.to_string(),
            stats.lyapunov.mean[i].to_string(),
            stats.lyapunov.se[i].to_string(),
            stats.distance.mean[i].to_string(),
            stats.distance.se[i].to_string(),
        ];
        row.extend(stats.populations.iter().map(|p| p.mean[i].to_string()));
        row.push(stats.control.mean[i].to_string());
        row.push(stats.control.se[i].to_string());
        w.write_record(&row).map_err(csv_error(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `out.csv` → `out.meta.json`
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn write_meta(cfg: &EnsembleConfig, stats: &EnsembleStats, path: &Path) -> Result<()> {
    let slopes: Vec<Option<f64>> = stats
        .trajectories
        .iter()
        .map(|t| t.exponent.map(|e| e.slope))
        .collect();
    let doc = json!({
        "config": cfg,
        "effective_horizon": stats.effective_horizon,
        "frequencies": stats.frequencies,
        "undecided": stats.undecided,
        "slopes": slopes,
        "median_slope": stats.median_slope(),
        "worst_validity": stats.worst_validity,
    });
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `path` and its `.meta.json` companion.
pub fn write_outputs(cfg: &EnsembleConfig, stats: &EnsembleStats, path: &Path) -> Result<PathBuf> {
    write_csv(stats, path)?;
    let meta = meta_path(path);
    write_meta(cfg, stats, &meta)?;
    Ok(meta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = r
        .headers()
        .map_err(csv_error(path))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error(path))?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|e| {
                    Error::InvalidConfig(format!("{}: bad number {s:?}: {e}", path.display()))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{preset, run_ensemble};

    #[test]
    fn header_schema() {
        assert_eq!(
            csv_header(3).join(","),
            "t,mean_V,se_V,mean_dB,se_dB,mean_rho00,mean_rho11,mean_rho22,mean_u,se_u"
        );
    }

    #[test]
    fn round_trip() {
        let mut cfg = preset("fig2_edge").unwrap();
        cfg.n_traj = 3;
        cfg.sde.t_final = 0.2;
        let stats = run_ensemble(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edge.csv");
        let meta = write_outputs(&cfg, &stats, &path).unwrap();
        assert_eq!(meta, dir.path().join("edge.meta.json"));
        let table = read_csv(&path).unwrap();
        assert_eq!(table.header, csv_header(3));
        assert_eq!(table.rows.len(), stats.times.len());
        assert_eq!(table.column("mean_V").unwrap(), stats.lyapunov.mean);
        assert_eq!(table.column("se_dB").unwrap(), stats.distance.se);
        assert_eq!(
            table.column("mean_rho11").unwrap(),
            stats.populations[1].mean
        );
        assert_eq!(table.column("t").unwrap(), stats.times);
        let doc: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(meta).unwrap()).unwrap();
        assert_eq!(doc["slopes"].as_array().unwrap().len(), 3);
        assert_eq!(doc["config"]["model"]["M"], 1.0);
    }
}
