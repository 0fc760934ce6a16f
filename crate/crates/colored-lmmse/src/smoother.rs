//! Linear-complexity LMMSE smoother via Gaussian message passing.
//!
//! The block model is rewritten as a first-order state-space recursion on
//! the augmented state
//!
//! ```text
//! xbar(k) = [x(k-L), ..., x(k), n(k-p+1), ..., n(k)]^T
//! ```
//!
//! of dimension `d = L + p + 1`, which stacks the channel memory with the
//! AR noise state. Each observation is the scalar projection
//! `r(k) = hbar xbar(k)` plus a small regularizing noise `eps`, so one
//! forward (Kalman) sweep and one backward (Rauch-Tung-Striebel) sweep
//! deliver every marginal posterior in `O((N + L) d^3)` time: linear in
//! the block length, in contrast to the cubic dense solve.
//!
//! White noise (`p = 0`) drops the noise slots from the state
//! (`d = L + 1`) and enters the observation variance directly.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ar_autocorrelation, checked_cholesky, ArModel, ComplexSeq, IsiChannel};
use crate::oracle::{ScalarPosterior, ScalarPrior};

/// Variance used to pin structurally known-zero symbols (outside the
/// transmitted block). Small enough to be negligible, large enough to
/// keep predicted covariances positive definite.
pub const PIN_VAR: f64 = 1e-12;

/// Admissible range of the observation regularization `eps`.
pub const EPS_RANGE: (f64, f64) = (1e-12, 1e-2);

/// Which state slot a symbol posterior is read from. Both choices refer
/// to the same symbol and agree up to floating-point error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtractionSlot {
    /// Newest symbol slot of block `k` (the moment it is observed last).
    #[default]
    XSlot,
    /// Oldest symbol slot of block `k + L` (the moment it leaves the
    /// state).
    FirstRow,
}

/// Options controlling the smoother.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    eps: f64,
    slot: ExtractionSlot,
}

impl FilterOptions {
    /// `eps` must lie in [`EPS_RANGE`].
    pub fn new(eps: f64, slot: ExtractionSlot) -> Result<Self> {
        if !eps.is_finite() || eps < EPS_RANGE.0 || eps > EPS_RANGE.1 {
            return Err(Error::InvalidArg(format!(
                "eps must lie in [{}, {}], got {eps}",
                EPS_RANGE.0, EPS_RANGE.1
            )));
        }
        Ok(FilterOptions { eps, slot })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn slot(&self) -> ExtractionSlot {
        self.slot
    }
}

impl Default for FilterOptions {
    fn default() -> Self {
        FilterOptions {
            eps: 1e-5,
            slot: ExtractionSlot::XSlot,
        }
    }
}

/// The state-space realization of a channel/noise pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    l: usize,
    p: usize,
    hbar: RowDVector<Complex64>,
    g: DMatrix<Complex64>,
    f: DMatrix<Complex64>,
    initial_noise_cov: DMatrix<Complex64>,
    direct_noise_var: f64,
}

impl StateSpace {
    /// State dimension `d`.
    pub fn dim(&self) -> usize {
        self.hbar.ncols()
    }

    /// Channel memory `L`.
    pub fn memory(&self) -> usize {
        self.l
    }

    /// Noise order `p`.
    pub fn order(&self) -> usize {
        self.p
    }

    /// Observation row `hbar` with `r(k) = hbar xbar(k) (+ direct noise)`.
    pub fn hbar(&self) -> &RowDVector<Complex64> {
        &self.hbar
    }

    /// State transition matrix `G`.
    pub fn g(&self) -> &DMatrix<Complex64> {
        &self.g
    }

    /// Input matrix `F` mapping `[x(k+1), w(k+1)]^T` into the state.
    pub fn f(&self) -> &DMatrix<Complex64> {
        &self.f
    }

    /// Stationary covariance of the initial noise slots (`p x p`).
    pub fn initial_noise_cov(&self) -> &DMatrix<Complex64> {
        &self.initial_noise_cov
    }

    /// Noise variance entering the observation directly (the whole noise
    /// power for `p = 0`, zero otherwise).
    pub fn direct_noise_var(&self) -> f64 {
        self.direct_noise_var
    }

    /// Index of the newest symbol slot.
    pub fn x_slot(&self) -> usize {
        self.l
    }
}

/// Builds the augmented state-space realization.
///
/// The state stacks `[x(k-L), ..., x(k)]` and, for `p >= 1`, the noise
/// slots `[n(k-p+1), ..., n(k)]`:
///
/// * `hbar = [h(L), ..., h(0), 0, ..., 0, 1]`;
/// * `G` shifts both groups and regenerates the newest noise slot from
///   the AR coefficients, laid out as `[a(p), ..., a(1)]`;
/// * `F` injects the new symbol and the new innovation.
pub fn build_state_space(ch: &IsiChannel, ar: &ArModel) -> Result<StateSpace> {
    let l = ch.memory();
    let p = ar.order();
    let d = if p >= 1 { l + p + 1 } else { l + 1 };
    let cz = Complex64::new(0.0, 0.0);
    let co = Complex64::new(1.0, 0.0);

    let mut hbar = RowDVector::from_element(d, cz);
    for (i, &hi) in ch.taps().iter().enumerate() {
        hbar[l - i] = hi;
    }
    if p >= 1 {
        hbar[d - 1] = co;
    }

    let mut g = DMatrix::from_element(d, d, cz);
    for i in 0..l {
        g[(i, i + 1)] = co;
    }
    if p >= 1 {
        for j in 0..p - 1 {
            g[(l + 1 + j, l + 2 + j)] = co;
        }
        for j in 0..p {
            g[(d - 1, l + 1 + j)] = ar.coeffs()[p - 1 - j];
        }
    }

    let mut f = DMatrix::from_element(d, 2, cz);
    f[(l, 0)] = co;
    if p >= 1 {
        f[(d - 1, 1)] = co;
    }

    let initial_noise_cov = if p >= 1 {
        ar_autocorrelation(ar, p.saturating_sub(1))?.toeplitz(p)?
    } else {
        DMatrix::from_element(0, 0, cz)
    };

    Ok(StateSpace {
        l,
        p,
        hbar,
        g,
        f,
        initial_noise_cov,
        direct_noise_var: if p == 0 { ar.n0() } else { 0.0 },
    })
}

/// A Gaussian belief over one augmented state.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorBelief {
    pub mean: DVector<Complex64>,
    pub cov: DMatrix<Complex64>,
}

/// Prior information entering the state at one block: the newest symbol
/// `x(k)` and the innovation `w(k)` (the latter is structural for
/// `p = 0`). The means of innovations are zero by model assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockPrior {
    pub x_mean: Complex64,
    pub x_var: f64,
    pub w_var: f64,
}

impl BlockPrior {
    /// The prior of a transmitted symbol.
    pub fn from_symbol_prior(prior: &ScalarPrior, sigma_w2: f64) -> Self {
        BlockPrior {
            x_mean: prior.mean(),
            x_var: prior.var(),
            w_var: sigma_w2,
        }
    }

    /// A structurally zero symbol (outside the transmitted block),
    /// pinned with variance [`PIN_VAR`].
    pub fn pinned(sigma_w2: f64) -> Self {
        BlockPrior {
            x_mean: Complex64::new(0.0, 0.0),
            x_var: PIN_VAR,
            w_var: sigma_w2,
        }
    }
}

/// Forward-pass output: per block, the filtered belief (after the
/// observation update) and the predicted belief (before it). The
/// predicted beliefs are exactly what the backward smoother needs, so
/// they are cached here instead of being recomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardBeliefs {
    pub filtered: Vec<VectorBelief>,
    pub predicted: Vec<VectorBelief>,
}

fn symmetrize(m: &mut DMatrix<Complex64>) {
    let adj = m.adjoint();
    *m += adj;
    m.scale_mut(0.5);
}

/// Runs the forward (filtering) sweep over all `N + L` blocks.
///
/// `priors[k]` carries the prior of the symbol entering the state at
/// block `k + 1`; observations are regularized by `opts.eps()`. Blocks
/// past the transmitted range must be pinned by the caller (see
/// [`BlockPrior::pinned`]); [`fg_lmmse`] does this automatically.
pub fn forward_pass(
    ss: &StateSpace,
    r: &ComplexSeq,
    priors: &[BlockPrior],
    opts: &FilterOptions,
) -> Result<ForwardBeliefs> {
    let blocks = r.len();
    if blocks == 0 {
        return Err(Error::InvalidArg("need at least one observation".into()));
    }
    if priors.len() != blocks {
        return Err(Error::LengthMismatch {
            expected: blocks,
            actual: priors.len(),
        });
    }
    let d = ss.dim();
    let l = ss.memory();
    let p = ss.order();
    let cz = Complex64::new(0.0, 0.0);

    let mut filtered = Vec::with_capacity(blocks);
    let mut predicted = Vec::with_capacity(blocks);

    // Initial belief: past symbols pinned at zero, current symbol from
    // its prior, noise slots at their stationary law.
    let mut mean = DVector::from_element(d, cz);
    mean[l] = priors[0].x_mean;
    let mut cov = DMatrix::from_element(d, d, cz);
    for i in 0..l {
        cov[(i, i)] = Complex64::new(PIN_VAR, 0.0);
    }
    cov[(l, l)] = Complex64::new(priors[0].x_var, 0.0);
    if p >= 1 {
        cov.view_mut((l + 1, l + 1), (p, p))
            .copy_from(ss.initial_noise_cov());
    }

    for (kk, &rk) in r.values().iter().enumerate() {
        if kk > 0 {
            // Predict: xbar(k+1) = G xbar(k) + F [x(k+1), w(k+1)]^T.
            let bp = &priors[kk];
            mean = ss.g() * &mean;
            mean[l] += bp.x_mean;
            cov = ss.g() * &cov * ss.g().adjoint();
            cov[(l, l)] += Complex64::new(bp.x_var, 0.0);
            if p >= 1 {
                cov[(d - 1, d - 1)] += Complex64::new(bp.w_var, 0.0);
            }
            symmetrize(&mut cov);
        }
        predicted.push(VectorBelief {
            mean: mean.clone(),
            cov: cov.clone(),
        });

        // Scalar observation update.
        let hv = ss.hbar() * &cov;
        let s = (&hv * ss.hbar().adjoint())[(0, 0)].re
            + opts.eps()
            + ss.direct_noise_var();
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::SingularMatrix("innovation variance"));
        }
        let gain = hv.adjoint() / Complex64::new(s, 0.0);
        let resid = rk - (ss.hbar() * &mean)[0];
        if !resid.re.is_finite() || !resid.im.is_finite() {
            return Err(Error::NonFiniteValue("observation residual"));
        }
        mean += &gain * resid;
        cov -= &gain * &hv;
        symmetrize(&mut cov);

        filtered.push(VectorBelief {
            mean: mean.clone(),
            cov: cov.clone(),
        });
    }
    Ok(ForwardBeliefs {
        filtered,
        predicted,
    })
}

/// Runs the backward (Rauch-Tung-Striebel) sweep, turning filtered
/// beliefs into smoothed marginals conditioned on all observations.
///
/// The options are accepted for symmetry with [`forward_pass`]; this
/// realization needs none of them.
pub fn backward_smooth(
    ss: &StateSpace,
    forward: &ForwardBeliefs,
    _opts: &FilterOptions,
) -> Result<Vec<VectorBelief>> {
    let blocks = forward.filtered.len();
    if blocks == 0 || forward.predicted.len() != blocks {
        return Err(Error::LengthMismatch {
            expected: blocks,
            actual: forward.predicted.len(),
        });
    }
    let mut rev: Vec<VectorBelief> = Vec::with_capacity(blocks);
    rev.push(forward.filtered[blocks - 1].clone());
    for kk in (0..blocks - 1).rev() {
        let filt = &forward.filtered[kk];
        let pred = &forward.predicted[kk + 1];
        let chol = checked_cholesky(pred.cov.clone(), "predicted covariance")?;
        // J = V_f G^H P^{-1}, computed as (P^{-1} G V_f)^H.
        let j = chol.solve(&(ss.g() * &filt.cov)).adjoint();
        let next = rev.last().expect("nonempty by construction");
        let mean = &filt.mean + &j * (&next.mean - &pred.mean);
        let mut cov = &filt.cov + &j * (&next.cov - &pred.cov) * j.adjoint();
        symmetrize(&mut cov);
        rev.push(VectorBelief { mean, cov });
    }
    rev.reverse();
    Ok(rev)
}

/// Reads the `n` symbol posteriors out of the smoothed block beliefs.
///
/// Symbol `k` can be read from the newest slot of block `k` or the oldest
/// slot of block `k + L` (see [`ExtractionSlot`]); both refer to the same
/// marginal. Requires `smoothed.len() >= n + L`.
pub fn extract_symbol_posteriors(
    smoothed: &[VectorBelief],
    ss: &StateSpace,
    n: usize,
    opts: &FilterOptions,
) -> Result<Vec<ScalarPosterior>> {
    let l = ss.memory();
    if n == 0 || smoothed.len() < n + l {
        return Err(Error::IndexOutOfRange {
            index: n + l,
            len: smoothed.len(),
        });
    }
    let mut out = Vec::with_capacity(n);
    for kk in 0..n {
        let (block, slot) = match opts.slot() {
            ExtractionSlot::XSlot => (kk, ss.x_slot()),
            ExtractionSlot::FirstRow => (kk + l, 0),
        };
        let b = &smoothed[block];
        let mean = b.mean[slot];
        let var = b.cov[(slot, slot)].re.max(0.0);
        out.push(ScalarPosterior::new(mean, var)?);
    }
    Ok(out)
}

/// LMMSE posteriors of a source block by forward/backward message
/// passing: builds the state space, pins the `L` trailing blocks, runs
/// both sweeps and extracts the per-symbol marginals.
///
/// Cost is linear in the block length. Produces the same posteriors as
/// the dense block solve up to floating-point error.
pub fn fg_lmmse(
    r: &ComplexSeq,
    ch: &IsiChannel,
    ar: &ArModel,
    priors: &[ScalarPrior],
    opts: &FilterOptions,
) -> Result<Vec<ScalarPosterior>> {
    let n = priors.len();
    let l = ch.memory();
    if n == 0 {
        return Err(Error::InvalidArg("need at least one prior".into()));
    }
    if r.len() != n + l {
        return Err(Error::LengthMismatch {
            expected: n + l,
            actual: r.len(),
        });
    }
    let ss = build_state_space(ch, ar)?;
    let block_priors: Vec<BlockPrior> = (0..n + l)
        .map(|kk| {
            if kk < n {
                BlockPrior::from_symbol_prior(&priors[kk], ar.sigma_w2())
            } else {
                BlockPrior::pinned(ar.sigma_w2())
            }
        })
        .collect();
    let fwd = forward_pass(&ss, r, &block_priors, opts)?;
    let smoothed = backward_smooth(&ss, &fwd, opts)?;
    extract_symbol_posteriors(&smoothed, &ss, n, opts)
}
