//! LMMSE smoothing of an i.i.d. Gaussian source observed through a causal
//! FIR channel in additive colored Gaussian noise.
//!
//! The noise is modeled as a complex autoregressive (AR) process. Two
//! estimators compute the per-symbol posterior means and variances:
//!
//! * [`oracle::block_lmmse`] solves the full joint Gaussian system by dense
//!   factorization. It is exact and cubic in the block length, which makes
//!   it practical only for short blocks; it serves as the reference.
//! * [`smoother::fg_lmmse`] runs a forward/backward Gaussian message-passing
//!   sweep over an augmented state that stacks the channel memory and the
//!   AR noise state. Its cost is linear in the block length and it produces
//!   the same posteriors as the dense solver up to floating-point error.
//!
//! [`fit`] estimates AR noise models from autocorrelation sequences so that
//! the smoother can be applied when only second-order noise statistics are
//! known.

pub mod error;
pub mod fit;
pub mod model;
pub mod oracle;
pub mod smoother;

pub use error::{Error, Result};
pub use fit::{approximate_process, coeffs_from_reflections, fit_ar, FitReport};
pub use model::{
    ar_autocorrelation, observe, sample_ar_noise, sample_ar_noise_with_innovations,
    sample_source, stabilize_ar, ArModel, AutocorrSeq, ComplexSeq, IsiChannel, SeqRole,
};
pub use oracle::{block_lmmse, extrinsic, noise_covariance, NoiseCov, ScalarPosterior, ScalarPrior};
pub use smoother::{
    backward_smooth, build_state_space, extract_symbol_posteriors, fg_lmmse, forward_pass,
    BlockPrior, ExtractionSlot, FilterOptions, ForwardBeliefs, StateSpace, VectorBelief,
};
