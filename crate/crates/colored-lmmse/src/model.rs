//! Signal model: i.i.d. complex Gaussian source, causal FIR channel, and
//! additive complex autoregressive (AR) Gaussian noise.
//!
//! The noise process of order `p` is
//!
//! ```text
//! n(k) = a(1) n(k-1) + ... + a(p) n(k-p) + w(k),   w(k) ~ CN(0, sigma_w2),
//! ```
//!
//! and the observation of a source block `x(1..N)` through a channel with
//! taps `h(0..L)` is
//!
//! ```text
//! r(k) = sum_i h(i) x(k-i) + n(k),   k = 1..N+L,
//! ```
//!
//! with `x(k) = 0` outside `1..N`. All processes are circularly symmetric,
//! so second-order statistics are captured by autocorrelations
//! `R(j) = E[n(k) conj(n(k-j))]` alone.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Roots of the AR characteristic polynomial with modulus at or above
/// `1 - STABILITY_MARGIN` are treated as unstable.
pub const STABILITY_MARGIN: f64 = 1e-9;

/// Relative tolerance for the internal consistency of `(a, sigma_w2, n0)`.
const CONSISTENCY_TOL: f64 = 1e-10;

/// Samples discarded before an AR noise realization is considered
/// stationary. Adequate when the slowest mode mixes much faster than this.
fn burn_in(order: usize) -> usize {
    1000.max(50 * order)
}

/// What a [`ComplexSeq`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeqRole {
    /// Transmitted source symbols.
    Source,
    /// Colored noise samples.
    Noise,
    /// White innovations driving an AR recursion.
    Innovation,
    /// Channel output samples.
    Observation,
}

/// A finite complex-valued sequence tagged with its role in the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq {
    values: Vec<Complex64>,
    role: SeqRole,
}

impl ComplexSeq {
    pub fn new(values: Vec<Complex64>, role: SeqRole) -> Self {
        ComplexSeq { values, role }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn role(&self) -> SeqRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// A stationary complex AR(p) noise model.
///
/// Invariants established at construction:
/// * all characteristic roots have modulus below `1 - STABILITY_MARGIN`;
/// * `sigma_w2 > 0` and `n0 > 0`;
/// * `n0` equals the stationary power implied by `(a, sigma_w2)` to within
///   a small relative tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    a: Vec<Complex64>,
    sigma_w2: f64,
    n0: f64,
}

impl ArModel {
    /// Builds a model from explicit coefficients, innovation variance and
    /// stationary power, verifying stability and consistency.
    pub fn new(a: Vec<Complex64>, sigma_w2: f64, n0: f64) -> Result<Self> {
        if !sigma_w2.is_finite() || sigma_w2 <= 0.0 {
            return Err(Error::InvalidArg(format!(
                "sigma_w2 must be finite and positive, got {sigma_w2}"
            )));
        }
        if !n0.is_finite() || n0 <= 0.0 {
            return Err(Error::InvalidArg(format!(
                "n0 must be finite and positive, got {n0}"
            )));
        }
        if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFiniteValue("AR coefficients"));
        }
        if !stable_within_margin(&a) {
            return Err(Error::UnstableAr);
        }
        let implied_n0 = sigma_w2 * unit_stationary_power(&a)?;
        if (implied_n0 - n0).abs() > CONSISTENCY_TOL * n0.max(implied_n0) {
            return Err(Error::InvalidArg(format!(
                "inconsistent model: (a, sigma_w2) imply stationary power \
                 {implied_n0}, got n0 = {n0}"
            )));
        }
        Ok(ArModel { a, sigma_w2, n0 })
    }

    /// White noise of power `n0` (order zero).
    pub fn white(n0: f64) -> Result<Self> {
        ArModel::new(Vec::new(), n0, n0)
    }

    /// AR order `p`.
    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// Coefficients `[a(1), ..., a(p)]`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.a
    }

    /// Innovation variance `E|w(k)|^2`.
    pub fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    /// Stationary noise power `E|n(k)|^2`.
    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Constructor used by routines whose outputs are consistent by
    /// construction (skips the redundant power check).
    pub(crate) fn new_unchecked(a: Vec<Complex64>, sigma_w2: f64, n0: f64) -> Self {
        ArModel { a, sigma_w2, n0 }
    }
}

/// Builds the AR model with coefficients `a` whose stationary power equals
/// `n0`, by solving the Yule-Walker moment equations for the innovation
/// variance.
///
/// An empty `a` yields white noise with `sigma_w2 = n0`.
pub fn stabilize_ar(a: &[Complex64], n0: f64) -> Result<ArModel> {
    if !n0.is_finite() || n0 <= 0.0 {
        return Err(Error::InvalidArg(format!(
            "n0 must be finite and positive, got {n0}"
        )));
    }
    if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFiniteValue("AR coefficients"));
    }
    if !stable_within_margin(a) {
        return Err(Error::UnstableAr);
    }
    let unit_power = unit_stationary_power(a)?;
    Ok(ArModel::new_unchecked(a.to_vec(), n0 / unit_power, n0))
}

/// An autocorrelation sequence `R(0..=max_lag)` with `R(0)` real positive.
///
/// Negative lags follow from Hermitian symmetry, `R(-j) = conj(R(j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrSeq {
    r: Vec<Complex64>,
}

impl AutocorrSeq {
    /// Validates and wraps a raw sequence: `R(0)` must be real and
    /// positive, and the implied Hermitian Toeplitz matrix must be
    /// positive semidefinite (checked by an attempted factorization with
    /// a small diagonal jitter).
    pub fn new(r: Vec<Complex64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::InvalidArg("autocorrelation needs at least R(0)".into()));
        }
        if r.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFiniteValue("autocorrelation sequence"));
        }
        let r0 = r[0];
        if r0.re <= 0.0 || r0.im.abs() > 1e-12 * r0.re.abs() {
            return Err(Error::InvalidArg(format!(
                "R(0) must be real and positive, got {r0}"
            )));
        }
        let seq = AutocorrSeq { r };
        let m = seq.r.len();
        let jitter = 1e-10 * seq.r[0].re;
        let mut t = seq.toeplitz(m).expect("lags available by construction");
        for i in 0..m {
            t[(i, i)] += Complex64::new(jitter, 0.0);
        }
        checked_cholesky(t, "autocorrelation Toeplitz matrix")?;
        Ok(seq)
    }

    /// Constructor for sequences that are positive semidefinite by
    /// construction (moments of a validated stationary model).
    pub(crate) fn new_unchecked(r: Vec<Complex64>) -> Self {
        AutocorrSeq { r }
    }

    /// Largest available lag.
    pub fn max_lag(&self) -> usize {
        self.r.len() - 1
    }

    /// `R(j)` for `0 <= j <= max_lag`.
    pub fn lag(&self, j: usize) -> Complex64 {
        self.r[j]
    }

    /// All lags `[R(0), ..., R(max_lag)]`.
    pub fn lags(&self) -> &[Complex64] {
        &self.r
    }

    /// The `m x m` Hermitian Toeplitz covariance matrix with entries
    /// `C[i, j] = R(i - j)`. Requires `m - 1 <= max_lag`.
    pub fn toeplitz(&self, m: usize) -> Result<DMatrix<Complex64>> {
        if m == 0 || m - 1 > self.max_lag() {
            return Err(Error::IndexOutOfRange {
                index: m.saturating_sub(1),
                len: self.r.len(),
            });
        }
        Ok(DMatrix::from_fn(m, m, |i, j| {
            if i >= j {
                self.r[i - j]
            } else {
                self.r[j - i].conj()
            }
        }))
    }
}

/// Stationary autocorrelation `R(0..=max_lag)` of an AR model, scaled so
/// that `R(0) = n0` exactly.
///
/// Lags `0..=p` solve the Yule-Walker moment equations; larger lags follow
/// the recursion `R(j) = sum_i a(i) R(j-i)`.
pub fn ar_autocorrelation(model: &ArModel, max_lag: usize) -> Result<AutocorrSeq> {
    let p = model.order();
    let n0 = Complex64::new(model.n0(), 0.0);
    if p == 0 {
        let mut r = vec![Complex64::new(0.0, 0.0); max_lag + 1];
        r[0] = n0;
        return Ok(AutocorrSeq::new_unchecked(r));
    }
    let unit = unit_autocorrelation(model.coeffs())?;
    let scale = model.n0() / unit[0].re;
    let mut r: Vec<Complex64> = unit.iter().map(|c| c * scale).collect();
    r[0] = n0;
    for j in p + 1..=max_lag {
        let mut v = Complex64::new(0.0, 0.0);
        for (i, &ai) in model.coeffs().iter().enumerate() {
            v += ai * r[j - 1 - i];
        }
        r.push(v);
    }
    r.truncate(max_lag + 1);
    Ok(AutocorrSeq::new_unchecked(r))
}

/// Draws `len` samples of stationary AR noise.
///
/// The recursion starts from a zero state and a burn-in prefix is
/// discarded, so the output is stationary up to the (negligible) residual
/// of the burn-in.
pub fn sample_ar_noise(model: &ArModel, len: usize, seed: u64) -> ComplexSeq {
    sample_ar_noise_with_innovations(model, len, seed).0
}

/// Like [`sample_ar_noise`], additionally returning the innovation
/// sequence aligned so that `innovations[k]` is the white sample used to
/// produce `noise[k]`.
pub fn sample_ar_noise_with_innovations(
    model: &ArModel,
    len: usize,
    seed: u64,
) -> (ComplexSeq, ComplexSeq) {
    let p = model.order();
    let total = burn_in(p) + len;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = Vec::with_capacity(total);
    let mut innov = Vec::with_capacity(total);
    for k in 0..total {
        let w = sample_cn(&mut rng, model.sigma_w2());
        let mut v = w;
        for (i, &ai) in model.coeffs().iter().enumerate() {
            if k > i {
                v += ai * noise[k - 1 - i];
            }
        }
        noise.push(v);
        innov.push(w);
    }
    let noise = noise.split_off(total - len);
    let innov = innov.split_off(total - len);
    (
        ComplexSeq::new(noise, SeqRole::Noise),
        ComplexSeq::new(innov, SeqRole::Innovation),
    )
}

/// Draws `n >= 1` i.i.d. CN(0, 1) source symbols.
pub fn sample_source(n: usize, seed: u64) -> Result<ComplexSeq> {
    if n == 0 {
        return Err(Error::InvalidArg("source length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n).map(|_| sample_cn(&mut rng, 1.0)).collect();
    Ok(ComplexSeq::new(values, SeqRole::Source))
}

/// A causal FIR channel with taps `h(0..=L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiChannel {
    h: Vec<Complex64>,
}

impl IsiChannel {
    /// Validates taps: nonempty, finite, nonzero energy.
    pub fn new(h: Vec<Complex64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidArg("channel needs at least one tap".into()));
        }
        if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFiniteValue("channel taps"));
        }
        let ch = IsiChannel { h };
        if ch.es() <= 0.0 {
            return Err(Error::InvalidArg("channel energy must be positive".into()));
        }
        Ok(ch)
    }

    /// Channel memory `L` (number of taps minus one).
    pub fn memory(&self) -> usize {
        self.h.len() - 1
    }

    /// Taps `[h(0), ..., h(L)]`.
    pub fn taps(&self) -> &[Complex64] {
        &self.h
    }

    /// Total tap energy `Es = sum_i |h(i)|^2`.
    pub fn es(&self) -> f64 {
        self.h.iter().map(|c| c.norm_sqr()).sum()
    }

    /// The same channel scaled to unit tap energy.
    pub fn unit_energy(self) -> IsiChannel {
        let scale = 1.0 / self.es().sqrt();
        IsiChannel {
            h: self.h.into_iter().map(|c| c * scale).collect(),
        }
    }
}

/// Convolves a source block with the channel and adds noise:
/// `r(k) = sum_i h(i) x(k-i) + n(k)` for `k = 1..N+L`, with `x` zero
/// outside `1..N`. Requires `noise.len() == x.len() + L`.
pub fn observe(ch: &IsiChannel, x: &ComplexSeq, noise: &ComplexSeq) -> Result<ComplexSeq> {
    let n = x.len();
    let l = ch.memory();
    if n == 0 {
        return Err(Error::InvalidArg("source block must be nonempty".into()));
    }
    if noise.len() != n + l {
        return Err(Error::LengthMismatch {
            expected: n + l,
            actual: noise.len(),
        });
    }
    let xs = x.values();
    let h = ch.taps();
    let mut r = Vec::with_capacity(n + l);
    for k in 0..n + l {
        let mut v = noise.values()[k];
        for (i, &hi) in h.iter().enumerate() {
            if k >= i && k - i < n {
                v += hi * xs[k - i];
            }
        }
        r.push(v);
    }
    Ok(ComplexSeq::new(r, SeqRole::Observation))
}

/// Cholesky factorization that actually verifies positive definiteness.
///
/// The library routine factors complex matrices unconditionally (negative
/// pivots turn into imaginary diagonal entries instead of a failure), so
/// the factor's diagonal is checked to be real and positive here.
pub(crate) fn checked_cholesky(
    m: DMatrix<Complex64>,
    what: &'static str,
) -> Result<Cholesky<Complex64, Dyn>> {
    let chol = m.cholesky().ok_or(Error::SingularMatrix(what))?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !d.re.is_finite() || d.re <= 0.0 || d.im.abs() > 1e-8 * d.re {
            return Err(Error::SingularMatrix(what));
        }
    }
    Ok(chol)
}

/// One draw of CN(0, var).
fn sample_cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Schur-Cohn stability test with margin: all characteristic roots must
/// have modulus strictly below `1 - STABILITY_MARGIN`.
///
/// The coefficients are rescaled so the margin maps onto the unit circle,
/// then the reflection coefficients are recovered by the step-down
/// recursion; the process is stable iff all of them lie inside the unit
/// disc.
pub(crate) fn stable_within_margin(a: &[Complex64]) -> bool {
    let shrink = 1.0 - STABILITY_MARGIN;
    let mut scaled = Vec::with_capacity(a.len());
    let mut f = 1.0;
    for &ai in a {
        f *= shrink;
        scaled.push(ai / f);
    }
    let mut cur = scaled;
    while let Some(&kappa) = cur.last() {
        let k2 = kappa.norm_sqr();
        if !k2.is_finite() || k2 >= 1.0 {
            return false;
        }
        let m = cur.len();
        let denom = 1.0 - k2;
        let prev: Vec<Complex64> = (0..m - 1)
            .map(|i| (cur[i] + kappa * cur[m - 2 - i].conj()) / denom)
            .collect();
        cur = prev;
    }
    true
}

/// Stationary power `R(0)` of the unit-innovation AR process with
/// coefficients `a`.
fn unit_stationary_power(a: &[Complex64]) -> Result<f64> {
    if a.is_empty() {
        return Ok(1.0);
    }
    Ok(unit_autocorrelation(a)?[0].re)
}

/// Solves the Yule-Walker moment equations for `R(0..=p)` of the AR
/// process with coefficients `a` and unit innovation variance:
///
/// ```text
/// R(0) - sum_i a(i) conj(R(i)) = 1
/// R(j) - sum_i a(i) R(j-i)     = 0,   j = 1..p,
/// ```
///
/// with `R(-j) = conj(R(j))`. Conjugation is anti-linear, so the complex
/// system is solved in its real 2(p+1)-dimensional form.
fn unit_autocorrelation(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let p = a.len();
    let dim = 2 * (p + 1);
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = nalgebra::DVector::<f64>::zeros(dim);

    // Accumulates the equation term `coef * R(lag)` (conjugated R for
    // negative lag) into the two real rows of equation `row`.
    let add_term = |mat: &mut DMatrix<f64>, row: usize, lag: isize, coef: Complex64| {
        let (k, conj) = if lag >= 0 {
            (lag as usize, false)
        } else {
            ((-lag) as usize, true)
        };
        let (re_col, im_col) = (2 * k, 2 * k + 1);
        let re_row = 2 * row;
        let im_row = 2 * row + 1;
        if conj {
            // coef * conj(R): d(Re)/dRe = coef.re, d(Re)/dIm = coef.im,
            //                 d(Im)/dRe = coef.im, d(Im)/dIm = -coef.re.
            mat[(re_row, re_col)] += coef.re;
            mat[(re_row, im_col)] += coef.im;
            mat[(im_row, re_col)] += coef.im;
            mat[(im_row, im_col)] -= coef.re;
        } else {
            // coef * R: d(Re)/dRe = coef.re, d(Re)/dIm = -coef.im,
            //           d(Im)/dRe = coef.im, d(Im)/dIm = coef.re.
            mat[(re_row, re_col)] += coef.re;
            mat[(re_row, im_col)] -= coef.im;
            mat[(im_row, re_col)] += coef.im;
            mat[(im_row, im_col)] += coef.re;
        }
    };

    let one = Complex64::new(1.0, 0.0);
    // Equation 0: R(0) - sum_i a(i) R(-i) = 1.
    add_term(&mut mat, 0, 0, one);
    for (i, &ai) in a.iter().enumerate() {
        add_term(&mut mat, 0, -((i + 1) as isize), -ai);
    }
    rhs[0] = 1.0;
    // Equations j = 1..p: R(j) - sum_i a(i) R(j-i) = 0.
    for j in 1..=p {
        add_term(&mut mat, j, j as isize, one);
        for (i, &ai) in a.iter().enumerate() {
            add_term(&mut mat, j, j as isize - (i + 1) as isize, -ai);
        }
    }

    let sol = mat
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularMatrix("Yule-Walker moment system"))?;
    let r: Vec<Complex64> = (0..=p)
        .map(|k| Complex64::new(sol[2 * k], sol[2 * k + 1]))
        .collect();
    if r[0].re <= 0.0 || !r[0].re.is_finite() {
        return Err(Error::SingularMatrix("Yule-Walker moment system"));
    }
    Ok(r)
}
