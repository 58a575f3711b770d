//! Seeded Monte Carlo sweeps over SNR with CSV output.

mod config;
mod output;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

pub use config::{DimsConfig, ExperimentConfig, Setup};
pub use output::{csv_header, summarize, write_results_csv, write_trace_csv, SnrSummary};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::model::{ChannelSet, NoiseModel, SystemDims};
use crate::optimizer::{run_algorithm_ii, IterationTrace, SolveOptions};

/// I.i.d. unit-variance circularly symmetric complex Gaussian channel. The
/// stream of the generator is selected by `realization`, so each draw
/// depends only on `(seed, realization)`.
pub fn generate_channel(dims: &SystemDims, seed: u64, realization: u64) -> ChannelSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut entry = || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re * scale, im * scale)
    };
    let h = CMat::from_fn(dims.bs_antennas(), dims.total_rx(), |_, _| entry());
    ChannelSet::from_stacked(dims.clone(), h).expect("generated shape matches dims")
}

/// `sigma^2 = p_sum / (K 10^{snr_db / 10})`.
pub fn sigma2_from_snr(snr_db: f64, p_sum: f64, users: usize) -> f64 {
    p_sum / (users as f64 * 10f64.powf(snr_db / 10.0))
}

/// One `(SNR, realization)` run. Metrics are NaN when the solver failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub seed: u64,
    pub realization: u64,
    pub snr_db: f64,
    pub sigma2: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub objective: f64,
    pub weighted_sum_rate: f64,
    pub total_power: f64,
    pub antenna_powers: Vec<f64>,
    pub wall_time_s: f64,
    /// Solver error, not written to the CSV.
    pub error: Option<String>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    /// Iteration trace of each row, in the same order.
    pub traces: Vec<IterationTrace>,
    pub summary: Vec<SnrSummary>,
}

/// A single solve on a generated channel.
pub fn run_single(
    setup: &Setup,
    solver: &SolveOptions,
    seed: u64,
    realization: u64,
    snr_db: f64,
) -> (ResultRow, IterationTrace) {
    let start = Instant::now();
    let channel = generate_channel(&setup.dims, seed, realization);
    let sigma2 = sigma2_from_snr(snr_db, setup.budget.total(), setup.dims.users());
    let result = NoiseModel::isotropic(&setup.dims, sigma2)
        .map_err(|e| (e.to_string(), Vec::new()))
        .and_then(|noise| {
            run_algorithm_ii(&channel, &noise, &setup.budget, &setup.weights, solver)
                .map_err(|f| (f.to_string(), f.trace))
        });
    let n = setup.dims.bs_antennas();
    let mut row = ResultRow {
        seed,
        realization,
        snr_db,
        sigma2,
        converged: false,
        outer_iterations: 0,
        objective: f64::NAN,
        weighted_sum_rate: f64::NAN,
        total_power: f64::NAN,
        antenna_powers: vec![f64::NAN; n],
        wall_time_s: 0.0,
        error: None,
    };
    let trace = match result {
        Ok(sol) => {
            let last = sol.final_record();
            row.converged = sol.converged;
            row.outer_iterations = sol.outer_iterations();
            row.objective = last.objective;
            row.weighted_sum_rate = last.weighted_sum_rate;
            row.total_power = last.total_power;
            row.antenna_powers = last.antenna_powers.clone();
            sol.trace
        }
        Err((msg, trace)) => {
            log::warn!("seed {seed}, realization {realization}, {snr_db} dB: {msg}");
            row.outer_iterations = trace.len().saturating_sub(1);
            row.error = Some(msg);
            trace
        }
    };
    row.wall_time_s = start.elapsed().as_secs_f64();
    (row, trace)
}

/// Runs every `(SNR, realization)` pair on `threads` worker threads and
/// returns rows ordered by SNR, then realization.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let setup = config.setup()?;
    let jobs: Vec<(f64, u64)> = config
        .snr_db
        .iter()
        .flat_map(|&snr| (0..config.realizations as u64).map(move |r| (snr, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    let results: Vec<(ResultRow, IterationTrace)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(snr, r)| run_single(&setup, &config.solver, config.seed, r, snr))
            .collect()
    });
    let (rows, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(&rows);
    Ok(ExperimentOutput {
        rows,
        traces,
        summary,
    })
}
