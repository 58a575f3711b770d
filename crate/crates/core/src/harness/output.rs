use std::io::Write;

use serde::Serialize;

use super::ResultRow;
use crate::error::Result;
use crate::optimizer::IterationTrace;

/// Column names of the results file for `antennas` BS antennas.
pub fn csv_header(antennas: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "seed",
        "realization",
        "snr_db",
        "sigma2",
        "converged",
        "outer_iterations",
        "objective",
        "weighted_sum_rate",
        "total_power",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((1..=antennas).map(|n| format!("power_{n}")));
    cols.push("wall_time_s".into());
    cols
}

pub fn write_results_csv<W: Write>(out: W, rows: &[ResultRow], antennas: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(antennas))?;
    for r in rows {
        let mut rec = vec![
            r.seed.to_string(),
            r.realization.to_string(),
            r.snr_db.to_string(),
            r.sigma2.to_string(),
            r.converged.to_string(),
            r.outer_iterations.to_string(),
            r.objective.to_string(),
            r.weighted_sum_rate.to_string(),
            r.total_power.to_string(),
        ];
        rec.extend(r.antenna_powers.iter().map(f64::to_string));
        rec.push(r.wall_time_s.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceLine {
    seed: u64,
    realization: u64,
    snr_db: f64,
    iteration: usize,
    objective: f64,
    weighted_sum_rate: f64,
    total_power: f64,
    max_excess: f64,
    fixed_point_sweeps: usize,
}

/// Long-format dump of the iteration traces, one line per outer iteration.
pub fn write_trace_csv<W: Write>(
    out: W,
    rows: &[ResultRow],
    traces: &[IterationTrace],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (row, trace) in rows.iter().zip(traces) {
        for rec in trace {
            w.serialize(TraceLine {
                seed: row.seed,
                realization: row.realization,
                snr_db: row.snr_db,
                iteration: rec.iteration,
                objective: rec.objective,
                weighted_sum_rate: rec.weighted_sum_rate,
                total_power: rec.total_power,
                max_excess: rec.max_excess,
                fixed_point_sweeps: rec.fixed_point_sweeps,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Per-SNR aggregates. Failed runs count towards `runs` and `failed` only;
/// runs that hit the iteration limit are averaged like converged ones.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrSummary {
    pub snr_db: f64,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    pub mean_weighted_sum_rate: f64,
    pub mean_total_power: f64,
}

impl SnrSummary {
    pub fn converged_fraction(&self) -> f64 {
        self.converged as f64 / self.runs as f64
    }
}

/// Groups consecutive rows with equal SNR.
pub fn summarize(rows: &[ResultRow]) -> Vec<SnrSummary> {
    let mut out: Vec<SnrSummary> = Vec::new();
    let mut sums = (0.0, 0.0);
    for (i, r) in rows.iter().enumerate() {
        if out.last().is_none_or(|s| s.snr_db != r.snr_db) {
            out.push(SnrSummary {
                snr_db: r.snr_db,
                runs: 0,
                converged: 0,
                failed: 0,
                mean_weighted_sum_rate: f64::NAN,
                mean_total_power: f64::NAN,
            });
            sums = (0.0, 0.0);
        }
        let s = out.last_mut().expect("pushed above");
        s.runs += 1;
        s.converged += r.converged as usize;
        if r.failed() {
            s.failed += 1;
        } else {
            sums.0 += r.weighted_sum_rate;
            sums.1 += r.total_power;
        }
        let used = (s.runs - s.failed) as f64;
        if rows.get(i + 1).is_none_or(|n| n.snr_db != r.snr_db) && used > 0.0 {
            s.mean_weighted_sum_rate = sums.0 / used;
            s.mean_total_power = sums.1 / used;
        }
    }
    out
}
