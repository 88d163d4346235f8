//! CSV/JSON persistence of experiment outputs.
//!
//! Numbers are written with 17 significant digits, '.' decimal and no
//! thousands separators. Wall-clock columns are zeroed by default so that
//! repeated runs of one plan produce byte-identical files; `timing = true`
//! opts into real (non-reproducible) seconds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::stats::{FriedmanResult, SummaryStats};
use super::RunRecord;
use crate::error::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes `summary.csv`, one `trace_<seed>.csv` and `layout_<seed>.json`
/// per record.
pub fn export(
    records: &[RunRecord],
    stats: &SummaryStats,
    method: &str,
    scenario: &str,
    directory: &Path,
    timing: bool,
) -> Result<()> {
    fs::create_dir_all(directory).map_err(|e| Error::io(directory.display().to_string(), e))?;

    let mut summary = String::from("method,scenario,max,min,mean,median,std,mean_calls,mean_seconds\n");
    let n = records.len() as f64;
    let mean_calls = records.iter().map(|r| r.simulator_calls as f64).sum::<f64>() / n;
    let mean_seconds = if timing {
        records.iter().map(|r| r.wall_seconds).sum::<f64>() / n
    } else {
        0.0
    };
    let _ = writeln!(
        summary,
        "{method},{scenario},{},{},{},{},{},{},{}",
        fmt(stats.max),
        fmt(stats.min),
        fmt(stats.mean),
        fmt(stats.median),
        fmt(stats.std),
        fmt(mean_calls),
        fmt(mean_seconds),
    );
    write_file(&directory.join("summary.csv"), &summary)?;

    for record in records {
        let mut trace = String::from("calls,seconds,best_watts\n");
        for p in &record.trace.points {
            let seconds = if timing { p.elapsed } else { 0.0 };
            let _ = writeln!(trace, "{},{},{}", p.calls, fmt(seconds), fmt(p.best_objective));
        }
        write_file(&directory.join(format!("trace_{}.csv", record.seed)), &trace)?;
        write_file(
            &directory.join(format!("layout_{}.json", record.seed)),
            &record.final_layout.to_json(),
        )?;
    }
    Ok(())
}

/// Writes `ranks.csv` for a multi-method comparison; the trailing row holds
/// the Friedman chi-square statistic.
pub fn export_ranks(methods: &[String], result: &FriedmanResult, directory: &Path) -> Result<()> {
    fs::create_dir_all(directory).map_err(|e| Error::io(directory.display().to_string(), e))?;
    let mut out = String::from("method,mean_rank\n");
    let mut order: Vec<usize> = (0..methods.len()).collect();
    order.sort_by(|&a, &b| result.mean_ranks[a].total_cmp(&result.mean_ranks[b]));
    for i in order {
        let _ = writeln!(out, "{},{}", methods[i], fmt(result.mean_ranks[i]));
    }
    let _ = writeln!(out, "friedman_chi_square,{}", fmt(result.chi_square));
    write_file(&directory.join("ranks.csv"), &out)
}
