//! Monte Carlo MSE sweeps and wall-clock scaling runs.
//!
//! Every (grid point, trial) pair derives its own RNG stream from the
//! base seed, so results are independent of the number of worker
//! threads and of which filters are enabled: all filters see the exact
//! same observations in a given trial. Timing covers the solve only;
//! data generation and the dense noise covariance are set up outside
//! the clock.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;

use colored_lmmse::{
    block_lmmse, fg_lmmse, noise_covariance, observe, sample_ar_noise, sample_source,
    stabilize_ar, ArModel, ComplexSeq, ExtractionSlot, FilterOptions, NoiseCov, ScalarPrior,
};

use crate::config::{validate_n_grid, ExperimentConfig, FilterId};
use crate::BenchError;

/// Timed repetitions per grid point in the scaling benchmark (plus one
/// untimed warmup).
pub const SCALING_REPS: usize = 5;

/// Column layout of every CSV this harness writes.
pub const CSV_HEADER: &str = "filter,snr_db,n,L,p,a_coeffs,eps,trials,mse,mean_post_var,wall_ms";

/// SplitMix64 finalizer; a cheap bijective scrambler on u64.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Folds `v` into the seed `h`. Chaining `mix` calls gives every
/// (grid point, trial, purpose) tuple a well-separated stream.
pub fn mix(h: u64, v: u64) -> u64 {
    splitmix64(h ^ splitmix64(v))
}

/// One filter's result on one simulated block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub filter: FilterId,
    pub snr_index: usize,
    pub trial: usize,
    /// Empirical squared error of the posterior means, averaged over
    /// the block.
    pub mse: f64,
    /// Posterior variances averaged over the block; for a correct
    /// model this estimates the same quantity as `mse`.
    pub mean_post_var: f64,
    pub wall: Duration,
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MseRecord {
    pub filter: FilterId,
    pub snr_db: f64,
    pub n: usize,
    pub l: usize,
    pub p: usize,
    pub a_coeffs: Vec<Complex64>,
    pub eps: f64,
    pub trials: usize,
    pub mse: f64,
    pub mean_post_var: f64,
    pub wall_ms: f64,
}

/// Everything that is fixed across the trials of one grid point.
struct Setup {
    ch: colored_lmmse::IsiChannel,
    colored: ArModel,
    white: ArModel,
    cov: Option<NoiseCov>,
    priors: Vec<ScalarPrior>,
    opts: FilterOptions,
}

impl Setup {
    fn build(cfg: &ExperimentConfig, n: usize, snr_db: f64) -> Result<Setup, BenchError> {
        let ch = cfg.build_channel()?;
        let n0 = ch.es() / 10f64.powf(snr_db / 10.0);
        let colored = stabilize_ar(&cfg.ar_coeffs_values(), n0)?;
        let white = ArModel::white(n0)?;
        let cov = if cfg.filters.contains(&FilterId::Block) {
            Some(noise_covariance(&colored, n + ch.memory(), cfg.eps)?)
        } else {
            None
        };
        let unit = ScalarPrior::new(Complex64::new(0.0, 0.0), 1.0)?;
        Ok(Setup {
            ch,
            colored,
            white,
            cov,
            priors: vec![unit; n],
            opts: FilterOptions::new(cfg.eps, ExtractionSlot::XSlot)?,
        })
    }

    /// Draws one observation block from `seed`.
    fn simulate(&self, seed: u64) -> Result<(ComplexSeq, ComplexSeq), BenchError> {
        let n = self.priors.len();
        let x = sample_source(n, mix(seed, 1))?;
        let noise = sample_ar_noise(&self.colored, n + self.ch.memory(), mix(seed, 2));
        let r = observe(&self.ch, &x, &noise)?;
        Ok((x, r))
    }

    /// Runs one filter on one block and scores it against the truth.
    fn solve(
        &self,
        filter: FilterId,
        x: &ComplexSeq,
        r: &ComplexSeq,
    ) -> Result<(f64, f64, Duration), BenchError> {
        let start = Instant::now();
        let posts = match filter {
            FilterId::Block => {
                let cov = self
                    .cov
                    .as_ref()
                    .ok_or_else(|| BenchError::Config("block filter not configured".into()))?;
                block_lmmse(r, &self.ch, cov, &self.priors)?
            }
            FilterId::FgColored => fg_lmmse(r, &self.ch, &self.colored, &self.priors, &self.opts)?,
            FilterId::FgWhite => fg_lmmse(r, &self.ch, &self.white, &self.priors, &self.opts)?,
        };
        let wall = start.elapsed();
        let n = posts.len() as f64;
        let mse = posts
            .iter()
            .zip(x.values())
            .map(|(post, truth)| (post.mean() - truth).norm_sqr())
            .sum::<f64>()
            / n;
        let mpv = posts.iter().map(|post| post.var()).sum::<f64>() / n;
        if !mse.is_finite() || !mpv.is_finite() {
            return Err(BenchError::Numeric(format!(
                "filter {filter} produced a non-finite score"
            )));
        }
        Ok((mse, mpv, wall))
    }
}

/// Runs every configured filter on every trial of one SNR grid point
/// and returns the per-trial outcomes in deterministic order. Trials
/// run in parallel; within a trial all filters share the observations.
pub fn run_mse_trials(
    cfg: &ExperimentConfig,
    snr_index: usize,
) -> Result<Vec<TrialOutcome>, BenchError> {
    let snr_db = *cfg
        .snr_grid_db
        .get(snr_index)
        .ok_or_else(|| BenchError::Config(format!("no SNR grid point {snr_index}")))?;
    let setup = Setup::build(cfg, cfg.n, snr_db)?;
    let per_trial: Vec<Vec<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = mix(mix(cfg.seed, snr_index as u64), trial as u64);
            let (x, r) = setup.simulate(seed)?;
            cfg.filters
                .iter()
                .map(|&filter| {
                    let (mse, mean_post_var, wall) = setup.solve(filter, &x, &r)?;
                    Ok(TrialOutcome {
                        filter,
                        snr_index,
                        trial,
                        mse,
                        mean_post_var,
                        wall,
                    })
                })
                .collect()
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

/// Full MSE sweep: one record per (filter, SNR grid point), averaging
/// the per-trial scores. `wall_ms` is the mean solve time per trial.
pub fn run_mse_experiment(cfg: &ExperimentConfig) -> Result<Vec<MseRecord>, BenchError> {
    let ch = cfg.build_channel()?;
    let a_coeffs = cfg.ar_coeffs_values();
    let mut records = Vec::new();
    for (snr_index, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
        let outcomes = run_mse_trials(cfg, snr_index)?;
        for &filter in &cfg.filters {
            let scores: Vec<&TrialOutcome> =
                outcomes.iter().filter(|o| o.filter == filter).collect();
            let t = scores.len() as f64;
            records.push(MseRecord {
                filter,
                snr_db,
                n: cfg.n,
                l: ch.memory(),
                p: a_coeffs.len(),
                a_coeffs: a_coeffs.clone(),
                eps: cfg.eps,
                trials: scores.len(),
                mse: scores.iter().map(|o| o.mse).sum::<f64>() / t,
                mean_post_var: scores.iter().map(|o| o.mean_post_var).sum::<f64>() / t,
                wall_ms: scores.iter().map(|o| o.wall.as_secs_f64() * 1e3).sum::<f64>() / t,
            });
        }
    }
    Ok(records)
}

/// Wall-clock scaling over a grid of block lengths at the first SNR
/// grid point. Runs strictly sequentially (timings would otherwise
/// contend for cores), does one untimed warmup repetition per length,
/// then [`SCALING_REPS`] timed repetitions; `wall_ms` is their median
/// and the error columns are their means.
pub fn run_scaling_benchmark(
    cfg: &ExperimentConfig,
    n_grid: &[usize],
) -> Result<Vec<MseRecord>, BenchError> {
    validate_n_grid(n_grid, cfg.filters.contains(&FilterId::Block))?;
    let snr_db = cfg.snr_grid_db[0];
    let ch = cfg.build_channel()?;
    let a_coeffs = cfg.ar_coeffs_values();
    let mut records = Vec::new();
    for &n in n_grid {
        let setup = Setup::build(cfg, n, snr_db)?;
        // rep 0 is the warmup; it still scores so any failure surfaces.
        let blocks: Vec<(ComplexSeq, ComplexSeq)> = (0..=SCALING_REPS)
            .map(|rep| setup.simulate(mix(mix(cfg.seed, n as u64), rep as u64)))
            .collect::<Result<_, _>>()?;
        for &filter in &cfg.filters {
            let mut walls = Vec::with_capacity(SCALING_REPS);
            let mut mse_sum = 0.0;
            let mut mpv_sum = 0.0;
            for (rep, (x, r)) in blocks.iter().enumerate() {
                let (mse, mpv, wall) = setup.solve(filter, x, r)?;
                if rep == 0 {
                    continue;
                }
                walls.push(wall.as_secs_f64() * 1e3);
                mse_sum += mse;
                mpv_sum += mpv;
            }
            records.push(MseRecord {
                filter,
                snr_db,
                n,
                l: ch.memory(),
                p: a_coeffs.len(),
                a_coeffs: a_coeffs.clone(),
                eps: cfg.eps,
                trials: SCALING_REPS,
                mse: mse_sum / SCALING_REPS as f64,
                mean_post_var: mpv_sum / SCALING_REPS as f64,
                wall_ms: median(&mut walls),
            });
        }
    }
    Ok(records)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Formats a complex value as `re+imi` / `re-imi` with `-0` folded
/// into `0`, e.g. `0.9+0i` or `0.25-0.1i`.
pub fn format_complex(z: Complex64) -> String {
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    format!("{re}{im:+}i")
}

fn format_coeffs(a: &[Complex64]) -> String {
    a.iter()
        .map(|&z| format_complex(z))
        .collect::<Vec<_>>()
        .join(";")
}

/// Renders records as CSV. Without `with_timing` the `wall_ms` column
/// is written as `0` so repeated runs are byte-identical; wall-clock
/// noise is the only nondeterministic quantity in a record.
pub fn write_csv(records: &[MseRecord], with_timing: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for rec in records {
        let wall = if with_timing { rec.wall_ms } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            rec.filter,
            rec.snr_db,
            rec.n,
            rec.l,
            rec.p,
            format_coeffs(&rec.a_coeffs),
            rec.eps,
            rec.trials,
            rec.mse,
            rec.mean_post_var,
            wall
        ));
    }
    out
}

/// Per-filter plot lines over a shared CSV: rows belonging to other
/// filters are mapped to `1/0` (undefined), which gnuplot skips. The
/// header row is skipped the same way since its first column matches
/// no filter id.
fn plot_lines(csv_path: &str, filters: &[FilterId], x_col: usize, y_col: usize) -> String {
    filters
        .iter()
        .map(|f| {
            format!(
                "  '{csv_path}' using {x_col}:(strcol(1) eq '{f}' ? column({y_col}) : 1/0) \
                 with linespoints title '{f}'"
            )
        })
        .collect::<Vec<_>>()
        .join(", \\\n")
}

/// Gnuplot script for MSE (column 9) against SNR (column 2).
pub fn mse_plot_script(csv_path: &str, filters: &[FilterId]) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale y\n\
         set xlabel 'Es/N0 (dB)'\n\
         set ylabel 'MSE'\n\
         set key top right\n\
         plot \\\n{}\n",
        plot_lines(csv_path, filters, 2, 9)
    )
}

/// Gnuplot script for median wall time (column 11) against block
/// length (column 3), log-log so complexity exponents show as slopes.
pub fn scaling_plot_script(csv_path: &str, filters: &[FilterId]) -> String {
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set xlabel 'block length n'\n\
         set ylabel 'median wall time (ms)'\n\
         set key top left\n\
         plot \\\n{}\n",
        plot_lines(csv_path, filters, 3, 11)
    )
}
