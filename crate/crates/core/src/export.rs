//! On-disk formats: trajectory exports and report CSV sets.
//!
//! CSV files use comma separators, '.' decimals, a header row, LF line
//! endings, and floats printed with 17 significant digits, so identical
//! (config, seed) runs produce byte-identical files. The compact binary
//! trajectory layout is little-endian: a 16-byte header of four u32 words
//! (magic "HOUB", N, R, T) followed by R*T row-major f64 values.

use std::fs::File;
use std::io::{BufWriter, Result, Write};
use std::path::Path;

use crate::engine::TrajectoryBatch;
use crate::harness::{CltRow, ComparisonReport, CorrelationRow};

pub const BINARY_MAGIC: [u8; 4] = *b"HOUB";

/// 17 significant digits: round-trips f64 exactly and deterministically.
pub fn fmt17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Trajectory CSV: header `realization,t,value`, one row per (r, t).
pub fn write_batch_csv(path: &Path, batch: &TrajectoryBatch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"realization,t,value\n")?;
    for r in 0..batch.realizations() {
        let row = batch.row(r);
        for (j, &t) in batch.t_grid.iter().enumerate() {
            writeln!(w, "{r},{},{}", fmt17(t), fmt17(row[j]))?;
        }
    }
    w.flush()
}

/// Compact binary trajectory layout (see module docs).
pub fn write_batch_binary(path: &Path, batch: &TrajectoryBatch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&(batch.meta.n_particles as u32).to_le_bytes())?;
    w.write_all(&(batch.realizations() as u32).to_le_bytes())?;
    w.write_all(&(batch.n_times() as u32).to_le_bytes())?;
    for v in batch.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// KS comparison rows: `process_a,process_b,t,ks_stat,p_value,var_a,var_b,n`.
pub fn write_ks_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"process_a,process_b,t,ks_stat,p_value,var_a,var_b,n\n")?;
    for row in &report.ks_rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.process_a.as_str(),
            row.process_b.as_str(),
            fmt17(row.t),
            fmt17(row.ks.statistic),
            fmt17(row.ks.p_value),
            fmt17(row.var_a),
            fmt17(row.var_b),
            row.ks.n1.min(row.ks.n2),
        )?;
    }
    w.flush()
}

pub fn write_variance_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"process,t,variance,std_error,target,within_band\n")?;
    for row in &report.variance_rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.process.as_str(),
            fmt17(row.t),
            fmt17(row.variance),
            fmt17(row.std_error),
            fmt17(row.target),
            row.within_band,
        )?;
    }
    w.flush()
}

pub fn write_scaling_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"process,slope,intercept,r_squared\n")?;
    for row in &report.scaling_rows {
        writeln!(
            w,
            "{},{},{},{}",
            row.process.as_str(),
            fmt17(row.slope),
            fmt17(row.intercept),
            fmt17(row.r_squared),
        )?;
    }
    w.flush()
}

/// Criterion flags: every pass/fail traces to its named threshold.
pub fn write_criteria_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"criterion,threshold,observed,pass\n")?;
    for f in &report.flags {
        writeln!(
            w,
            "{},{},{},{}",
            csv_escape(&f.name),
            csv_escape(&f.threshold),
            csv_escape(&f.observed),
            f.pass,
        )?;
    }
    writeln!(
        w,
        "inconclusive,aborted fraction <= 1%,{},{}",
        report.inconclusive, !report.inconclusive
    )?;
    w.flush()
}

pub fn write_correlation_csv(path: &Path, rows: &[CorrelationRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"t,s,empirical,std_error,quadrature,rel_error\n")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt17(row.t),
            fmt17(row.s),
            fmt17(row.empirical),
            fmt17(row.std_error),
            fmt17(row.quadrature),
            fmt17(row.rel_error),
        )?;
    }
    w.flush()
}

pub fn write_clt_csv(path: &Path, rows: &[CltRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"n_particles,t,ks_stat,p_value,variance_rescaled,variance_target\n")?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.n_particles,
            fmt17(row.t),
            fmt17(row.ks.statistic),
            fmt17(row.ks.p_value),
            fmt17(row.variance_rescaled),
            fmt17(row.variance_target),
        )?;
    }
    w.flush()
}

/// Resolved-run provenance (deterministic part).
pub fn write_resolved_txt(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "seed={}", report.seed)?;
    writeln!(w, "significance={}", fmt17(report.significance))?;
    writeln!(w, "sigma0={}", fmt17(report.sigma0))?;
    writeln!(w, "sigma0_convention={}", if report.sigma0_is_default { "one-over-n" } else { "explicit" })?;
    writeln!(w, "lambda_mode={}", report.lambda_mode)?;
    writeln!(w, "zh_mode={}", report.zh_mode)?;
    writeln!(w, "mean_lambda={}", fmt17(report.mean_lambda))?;
    let times: Vec<String> = report.times.iter().map(|&t| fmt17(t)).collect();
    writeln!(w, "times={}", times.join(";"))?;
    w.flush()
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
