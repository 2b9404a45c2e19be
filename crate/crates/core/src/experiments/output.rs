//! CSV and JSON emission. Floats are written with Rust's shortest
//! round-trip formatting.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::BoundCurve;
use crate::error::Result;

use super::{ExperimentConfig, ExperimentOutput, RunSummary};

pub const LONG_HEADER: [&str; 6] = ["method", "seed", "k", "dist_sq_u", "dist_sq_h", "alpha"];
pub const SUMMARY_HEADER: [&str; 4] = ["method", "k", "mean_dist_sq", "std_dist_sq"];
pub const BOUND_HEADER: [&str; 3] = ["theorem", "K", "bound"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputPaths {
    /// `<name>_runs.csv`: one row per recorded iteration of every run.
    pub runs: PathBuf,
    /// `<name>_summary.csv`: per-method mean and std over completed seeds.
    pub summary: PathBuf,
    /// `<name>_meta.json`: the resolved config and scalar statistics.
    pub meta: PathBuf,
}

fn recorded(k: usize, last: usize, stride: u64) -> bool {
    (k as u64).is_multiple_of(stride) || k == last
}

#[derive(Serialize)]
struct Meta<'a> {
    config: &'a ExperimentConfig,
    summary: &'a RunSummary,
}

/// Writes the three output files into `dir`, creating it if needed.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let name = &out.config.name;
    let paths = OutputPaths {
        runs: dir.join(format!("{name}_runs.csv")),
        summary: dir.join(format!("{name}_summary.csv")),
        meta: dir.join(format!("{name}_meta.json")),
    };
    let stride = out.config.record_stride;

    let mut w = csv::Writer::from_path(&paths.runs)?;
    w.write_record(LONG_HEADER)?;
    for r in &out.runs {
        let last = r.dist_sq_u.len().saturating_sub(1);
        for k in (0..r.dist_sq_u.len()).filter(|k| recorded(*k, last, stride)) {
            w.write_record([
                r.method.name().to_string(),
                r.seed.to_string(),
                k.to_string(),
                r.dist_sq_u[k].to_string(),
                r.dist_sq_h[k].to_string(),
                r.alpha[k].to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(&paths.summary)?;
    w.write_record(SUMMARY_HEADER)?;
    for m in &out.summary.methods {
        let last = m.mean.len().saturating_sub(1);
        for k in (0..m.mean.len()).filter(|k| recorded(*k, last, stride)) {
            w.write_record([
                m.method.name().to_string(),
                k.to_string(),
                m.mean[k].to_string(),
                m.std[k].to_string(),
            ])?;
        }
    }
    w.flush()?;

    let meta = Meta {
        config: &out.config,
        summary: &out.summary,
    };
    let mut f = fs::File::create(&paths.meta)?;
    serde_json::to_writer_pretty(&mut f, &meta).map_err(std::io::Error::from)?;
    writeln!(f)?;
    Ok(paths)
}

/// Writes `theorem,K,bound` rows.
pub fn write_bound_csv<W: Write>(curve: &BoundCurve, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(BOUND_HEADER)?;
    for (k, b) in &curve.values {
        w.write_record([curve.theorem.name().to_string(), k.to_string(), b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
