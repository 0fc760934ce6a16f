//! JSON experiment configuration.
//!
//! Example:
//!
//! ```json
//! {
//!   "n": 1000,
//!   "channel": { "taps": [1, 2, 0, 0, 0, 1], "normalize_energy": true },
//!   "ar_coeffs": [0.98],
//!   "snr_grid_db": [0, 5, 10, 15, 20],
//!   "trials": 200,
//!   "seed": 7,
//!   "eps": 1e-5,
//!   "filters": ["fg_colored", "fg_white"]
//! }
//! ```
//!
//! Complex values are written either as a bare number (real) or as a
//! two-element array `[re, im]`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Deserialize;

use colored_lmmse::smoother::EPS_RANGE;
use colored_lmmse::{stabilize_ar, Error as LmmseError, IsiChannel};

use crate::BenchError;

/// Dense block solves are refused above this block length; they are
/// cubic and anything larger stops being a practical reference run.
pub const BLOCK_N_LIMIT: usize = 2000;

/// A complex number in configuration files: a bare real or `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ComplexParam {
    Real(f64),
    Pair(f64, f64),
}

impl ComplexParam {
    pub fn value(&self) -> Complex64 {
        match *self {
            ComplexParam::Real(re) => Complex64::new(re, 0.0),
            ComplexParam::Pair(re, im) => Complex64::new(re, im),
        }
    }
}

/// The estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterId {
    /// Dense block LMMSE (exact, cubic).
    Block,
    /// Message-passing smoother with the true colored-noise model.
    FgColored,
    /// Message-passing smoother that ignores the noise coloring and
    /// assumes white noise of the same power.
    FgWhite,
}

impl FilterId {
    pub const ALL: [FilterId; 3] = [FilterId::Block, FilterId::FgColored, FilterId::FgWhite];

    pub fn as_str(&self) -> &'static str {
        match self {
            FilterId::Block => "block",
            FilterId::FgColored => "fg_colored",
            FilterId::FgWhite => "fg_white",
        }
    }
}

impl fmt::Display for FilterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FilterId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(FilterId::Block),
            "fg_colored" => Ok(FilterId::FgColored),
            "fg_white" => Ok(FilterId::FgWhite),
            other => Err(format!(
                "unknown filter {other:?} (expected block, fg_colored or fg_white)"
            )),
        }
    }
}

/// Channel taps plus an optional energy normalization (on by default, so
/// that the configured Es/N0 grid refers to unit signal energy).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub taps: Vec<ComplexParam>,
    #[serde(default = "default_true")]
    pub normalize_energy: bool,
}

/// One experiment description; see the module docs for the JSON shape.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Source block length.
    #[serde(default = "default_n")]
    pub n: usize,
    pub channel: ChannelSpec,
    /// AR coefficients of the observation noise; empty means white.
    #[serde(default)]
    pub ar_coeffs: Vec<ComplexParam>,
    /// Es/N0 grid in dB.
    pub snr_grid_db: Vec<f64>,
    /// Monte Carlo trials per grid point.
    pub trials: usize,
    /// Base RNG seed; every (grid point, trial) derives its own stream.
    #[serde(default)]
    pub seed: u64,
    /// Observation regularization used by every estimator.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_filters")]
    pub filters: Vec<FilterId>,
    /// Block lengths for the scaling benchmark.
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
}

fn default_true() -> bool {
    true
}

fn default_n() -> usize {
    1000
}

fn default_eps() -> f64 {
    1e-5
}

fn default_filters() -> Vec<FilterId> {
    vec![FilterId::FgColored, FilterId::FgWhite]
}

impl ExperimentConfig {
    /// Reads and validates a JSON configuration file.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            BenchError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            BenchError::Config(format!("cannot parse {}: {e}", path.display()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every invariant that does not require running anything.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n == 0 {
            return Err(BenchError::Config("n must be positive".into()));
        }
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be positive".into()));
        }
        if self.snr_grid_db.is_empty() {
            return Err(BenchError::Config("snr_grid_db must be nonempty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(BenchError::Config("snr_grid_db must be finite".into()));
        }
        if !self.eps.is_finite() || self.eps < EPS_RANGE.0 || self.eps > EPS_RANGE.1 {
            return Err(BenchError::Config(format!(
                "eps must lie in [{}, {}], got {}",
                EPS_RANGE.0, EPS_RANGE.1, self.eps
            )));
        }
        if self.filters.is_empty() {
            return Err(BenchError::Config("filters must be nonempty".into()));
        }
        for (i, f) in self.filters.iter().enumerate() {
            if self.filters[..i].contains(f) {
                return Err(BenchError::Config(format!("duplicate filter {f}")));
            }
        }
        self.build_channel()?;
        // Stability is a property of the model, not of the file format:
        // report it as a numerical failure.
        match stabilize_ar(&self.ar_coeffs_values(), 1.0) {
            Ok(_) => {}
            Err(LmmseError::UnstableAr) => {
                return Err(BenchError::Numeric(
                    "ar_coeffs describe an unstable process".into(),
                ))
            }
            Err(e) => return Err(BenchError::Numeric(e.to_string())),
        }
        if self.filters.contains(&FilterId::Block) && self.n > BLOCK_N_LIMIT {
            return Err(BenchError::Config(format!(
                "block filter is limited to n <= {BLOCK_N_LIMIT}, got n = {}",
                self.n
            )));
        }
        if let Some(grid) = &self.n_grid {
            validate_n_grid(grid, self.filters.contains(&FilterId::Block))?;
        }
        Ok(())
    }

    /// The configured channel, normalized to unit energy when requested.
    pub fn build_channel(&self) -> Result<IsiChannel, BenchError> {
        let taps: Vec<Complex64> = self.channel.taps.iter().map(|t| t.value()).collect();
        let ch = IsiChannel::new(taps)
            .map_err(|e| BenchError::Config(format!("invalid channel: {e}")))?;
        Ok(if self.channel.normalize_energy {
            ch.unit_energy()
        } else {
            ch
        })
    }

    /// AR coefficients as complex values.
    pub fn ar_coeffs_values(&self) -> Vec<Complex64> {
        self.ar_coeffs.iter().map(|a| a.value()).collect()
    }
}

/// Scaling grids must be strictly increasing with at least two points
/// (one point cannot show a trend), and respect the block solve limit.
pub fn validate_n_grid(grid: &[usize], with_block: bool) -> Result<(), BenchError> {
    if grid.len() < 2 {
        return Err(BenchError::Config(
            "n_grid needs at least two block lengths".into(),
        ));
    }
    if grid[0] == 0 {
        return Err(BenchError::Config("n_grid entries must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BenchError::Config(
            "n_grid must be strictly increasing".into(),
        ));
    }
    if with_block {
        if let Some(&max) = grid.last() {
            if max > BLOCK_N_LIMIT {
                return Err(BenchError::Config(format!(
                    "block filter is limited to n <= {BLOCK_N_LIMIT}, got n = {max}"
                )));
            }
        }
    }
    Ok(())
}
