//! Exact block LMMSE reference estimator.
//!
//! The joint distribution of the source block and the observations is
//! Gaussian, so the posterior of each symbol follows from one dense
//! factorization of the observation covariance. The cost is cubic in the
//! block length, which restricts this estimator to short blocks; it is the
//! ground truth against which the linear-time smoother is validated.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ar_autocorrelation, checked_cholesky, ArModel, ComplexSeq, IsiChannel};

/// Variance used to represent an uninformative prior; larger requested
/// variances are clamped to this value.
pub const FLAT_VAR: f64 = 1e12;

/// Dense solves refuse observation blocks longer than this.
pub const BLOCK_SIZE_LIMIT: usize = 5000;

/// Relative tolerance below which a posterior is considered identical to
/// its prior (no extrinsic information).
const NO_INFO_REL_TOL: f64 = 1e-12;

/// A Gaussian prior (or message) on one source symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPrior {
    mean: Complex64,
    var: f64,
}

impl ScalarPrior {
    /// A prior with the given mean and variance `var >= 0`. Variances
    /// above [`FLAT_VAR`] are clamped to it.
    pub fn new(mean: Complex64, var: f64) -> Result<Self> {
        if !mean.re.is_finite() || !mean.im.is_finite() {
            return Err(Error::NonFiniteValue("prior mean"));
        }
        if !var.is_finite() || var < 0.0 {
            return Err(Error::InvalidArg(format!(
                "prior variance must be finite and nonnegative, got {var}"
            )));
        }
        Ok(ScalarPrior {
            mean,
            var: var.min(FLAT_VAR),
        })
    }

    /// An uninformative prior: the given mean with variance [`FLAT_VAR`].
    pub fn flat(mean: Complex64) -> Self {
        ScalarPrior {
            mean,
            var: FLAT_VAR,
        }
    }

    pub fn mean(&self) -> Complex64 {
        self.mean
    }

    pub fn var(&self) -> f64 {
        self.var
    }

    /// True when the variance sits at the uninformative clamp.
    pub fn is_flat(&self) -> bool {
        self.var == FLAT_VAR
    }
}

/// A Gaussian posterior on one source symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarPosterior {
    mean: Complex64,
    var: f64,
}

impl ScalarPosterior {
    /// Wraps a mean and variance; `var` must be finite and nonnegative
    /// (zero only arises from degenerate, variance-zero priors).
    pub fn new(mean: Complex64, var: f64) -> Result<Self> {
        if !mean.re.is_finite() || !mean.im.is_finite() || !var.is_finite() {
            return Err(Error::NonFiniteValue("posterior"));
        }
        if var < 0.0 {
            return Err(Error::InvalidArg(format!(
                "posterior variance must be nonnegative, got {var}"
            )));
        }
        Ok(ScalarPosterior { mean, var })
    }

    pub fn mean(&self) -> Complex64 {
        self.mean
    }

    pub fn var(&self) -> f64 {
        self.var
    }
}

/// Covariance of the observation noise over a whole block, including the
/// small diagonal ridge `eps` that regularizes degenerate source priors.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCov {
    matrix: DMatrix<Complex64>,
    eps: f64,
}

impl NoiseCov {
    /// Wraps an explicit covariance matrix (which must already include
    /// any diagonal ridge; `eps` is recorded for reference). The matrix
    /// must be square, Hermitian and positive definite.
    pub fn new(matrix: DMatrix<Complex64>, eps: f64) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(Error::InvalidArg(format!(
                "covariance must be square and nonempty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if n > BLOCK_SIZE_LIMIT {
            return Err(Error::SizeLimit {
                size: n,
                max: BLOCK_SIZE_LIMIT,
            });
        }
        let scale = matrix.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        if !scale.is_finite() {
            return Err(Error::NonFiniteValue("noise covariance"));
        }
        for i in 0..n {
            for j in 0..=i {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > 1e-12 * scale {
                    return Err(Error::InvalidArg("covariance is not Hermitian".into()));
                }
            }
        }
        checked_cholesky(matrix.clone(), "noise covariance")?;
        Ok(NoiseCov { matrix, eps })
    }

    pub(crate) fn new_unchecked(matrix: DMatrix<Complex64>, eps: f64) -> Self {
        NoiseCov { matrix, eps }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Block length covered by this covariance.
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Builds the stationary noise covariance of `size` consecutive samples,
/// `C[i, j] = R(i - j) + eps * [i = j]`, from an AR model.
pub fn noise_covariance(model: &ArModel, size: usize, eps: f64) -> Result<NoiseCov> {
    if size == 0 {
        return Err(Error::InvalidArg("covariance size must be positive".into()));
    }
    if size > BLOCK_SIZE_LIMIT {
        return Err(Error::SizeLimit {
            size,
            max: BLOCK_SIZE_LIMIT,
        });
    }
    if !(0.0..=1e-2).contains(&eps) {
        return Err(Error::InvalidArg(format!(
            "eps must lie in [0, 1e-2], got {eps}"
        )));
    }
    let acorr = ar_autocorrelation(model, size - 1)?;
    let mut m = acorr.toeplitz(size)?;
    for i in 0..size {
        m[(i, i)] += Complex64::new(eps, 0.0);
    }
    Ok(NoiseCov::new_unchecked(m, eps))
}

/// Exact LMMSE posteriors of a source block from all observations at once.
///
/// With per-symbol priors `(m_k, v_k)`, observation matrix column `b_k`
/// (the channel response to symbol `k`) and total observation covariance
/// `V = C + sum_k v_k b_k b_k^H`, the posterior of symbol `k` is
///
/// ```text
/// mean = m_k + v_k b_k^H V^{-1} (r - H m)
/// var  = v_k - v_k^2 b_k^H V^{-1} b_k
/// ```
///
/// One Cholesky factorization of `V` serves all symbols. Note that for
/// nearly flat priors the variance expression loses relative accuracy;
/// the intended use is with moderate prior variances.
pub fn block_lmmse(
    r: &ComplexSeq,
    ch: &IsiChannel,
    cov: &NoiseCov,
    priors: &[ScalarPrior],
) -> Result<Vec<ScalarPosterior>> {
    let n = priors.len();
    let l = ch.memory();
    if n == 0 {
        return Err(Error::InvalidArg("need at least one prior".into()));
    }
    let m = n + l;
    if r.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: r.len(),
        });
    }
    if cov.size() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            actual: cov.size(),
        });
    }
    if m > BLOCK_SIZE_LIMIT {
        return Err(Error::SizeLimit {
            size: m,
            max: BLOCK_SIZE_LIMIT,
        });
    }
    let h = ch.taps();

    // V = C + sum_k v_k b_k b_k^H, with b_k[k + i] = h(i).
    let mut v_tot = cov.matrix().clone();
    for (k, p) in priors.iter().enumerate() {
        let vk = Complex64::new(p.var(), 0.0);
        if p.var() == 0.0 {
            continue;
        }
        for (i, &hi) in h.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                v_tot[(k + i, k + j)] += vk * hi * hj.conj();
            }
        }
    }
    let chol = checked_cholesky(v_tot, "total observation covariance")?;
    let w = chol.inverse();

    // Innovation d = r - H m_prior and g = V^{-1} d.
    let mut d = DVector::<Complex64>::zeros(m);
    for k in 0..m {
        let mut val = r.values()[k];
        for (i, &hi) in h.iter().enumerate() {
            if k >= i && k - i < n {
                val -= hi * priors[k - i].mean();
            }
        }
        d[k] = val;
    }
    let g = &w * &d;

    let mut out = Vec::with_capacity(n);
    for (k, p) in priors.iter().enumerate() {
        let mut quad = Complex64::new(0.0, 0.0);
        let mut lin = Complex64::new(0.0, 0.0);
        for (i, &hi) in h.iter().enumerate() {
            lin += hi.conj() * g[k + i];
            for (j, &hj) in h.iter().enumerate() {
                quad += hi.conj() * w[(k + i, k + j)] * hj;
            }
        }
        let vk = p.var();
        let mean = p.mean() + lin * vk;
        let var = (vk - vk * vk * quad.re).clamp(0.0, vk);
        out.push(ScalarPosterior::new(mean, var)?);
    }
    Ok(out)
}

/// Extrinsic message: the information the posterior carries beyond the
/// prior, i.e. the Gaussian `e` with `posterior = prior * e` in the
/// product-of-densities sense.
///
/// Returns [`Error::NoInformation`] when posterior and prior coincide and
/// [`Error::InvalidArg`] when the posterior variance exceeds the prior
/// variance. Extrinsic variances above [`FLAT_VAR`] are clamped, which
/// flags the message as flat.
pub fn extrinsic(post: &ScalarPosterior, prior: &ScalarPrior) -> Result<ScalarPrior> {
    let vp = post.var();
    let v0 = prior.var();
    if v0 == 0.0 {
        return Err(Error::NoInformation);
    }
    if vp > v0 * (1.0 + NO_INFO_REL_TOL) {
        return Err(Error::InvalidArg(format!(
            "posterior variance {vp} exceeds prior variance {v0}"
        )));
    }
    if vp >= v0 * (1.0 - NO_INFO_REL_TOL) {
        return Err(Error::NoInformation);
    }
    // 1/ve = 1/vp - 1/v0 > 0; me = ve (mp/vp - m0/v0).
    let we = 1.0 / vp - 1.0 / v0;
    let ve = 1.0 / we;
    let me = (post.mean() / vp - prior.mean() / v0) * ve;
    ScalarPrior::new(me, ve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{stabilize_ar, ArModel, SeqRole};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn assert_cclose(a: Complex64, b: Complex64, tol: f64) {
        assert!((a - b).norm() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn seq(values: Vec<Complex64>) -> ComplexSeq {
        ComplexSeq::new(values, SeqRole::Observation)
    }

    fn rand_cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
        let s = (0.5 * var).sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(s * re, s * im)
    }

    #[test]
    fn prior_validation_and_clamp() {
        assert!(ScalarPrior::new(c(0.0, 0.0), -1.0).is_err());
        assert!(ScalarPrior::new(c(f64::NAN, 0.0), 1.0).is_err());
        let p = ScalarPrior::new(c(1.0, 0.0), 1e15).unwrap();
        assert_eq!(p.var(), FLAT_VAR);
        assert!(p.is_flat());
        assert!(!ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap().is_flat());
        assert!(ScalarPrior::flat(c(2.0, 0.0)).is_flat());
    }

    #[test]
    fn noise_cov_white_model() {
        let m = ArModel::white(2.0).unwrap();
        let cov = noise_covariance(&m, 3, 1e-5).unwrap();
        assert_eq!(cov.size(), 3);
        assert_eq!(cov.eps(), 1e-5);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { c(2.0 + 1e-5, 0.0) } else { c(0.0, 0.0) };
                assert_cclose(cov.matrix()[(i, j)], want, 1e-15);
            }
        }
    }

    #[test]
    fn noise_cov_ar1_toeplitz() {
        let m = stabilize_ar(&[c(0.9, 0.0)], 1.0).unwrap();
        let cov = noise_covariance(&m, 4, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = 0.9f64.powi((i as i32 - j as i32).abs());
                assert_cclose(cov.matrix()[(i, j)], c(want, 0.0), 1e-12);
            }
        }
    }

    #[test]
    fn noise_cov_guards() {
        let m = ArModel::white(1.0).unwrap();
        assert!(matches!(
            noise_covariance(&m, BLOCK_SIZE_LIMIT + 1, 0.0).unwrap_err(),
            Error::SizeLimit { .. }
        ));
        assert!(noise_covariance(&m, 0, 0.0).is_err());
        assert!(noise_covariance(&m, 2, 0.1).is_err());
        assert!(noise_covariance(&m, 2, -1e-9).is_err());
    }

    #[test]
    fn noise_cov_wrapper_validation() {
        let herm = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, -0.5), c(0.5, 0.5), c(2.0, 0.0)]);
        assert!(NoiseCov::new(herm, 0.0).is_ok());
        let skew = DMatrix::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, 0.5), c(2.0, 0.0)]);
        assert!(matches!(
            NoiseCov::new(skew, 0.0).unwrap_err(),
            Error::InvalidArg(_)
        ));
        let indef = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            NoiseCov::new(indef, 0.0).unwrap_err(),
            Error::SingularMatrix(_)
        ));
    }

    #[test]
    fn scalar_observation() {
        // One symbol, no memory: classic scalar Wiener estimate.
        let ch = IsiChannel::new(vec![c(1.0, 0.0)]).unwrap();
        let m = ArModel::white(1.0).unwrap();
        let cov = noise_covariance(&m, 1, 0.0).unwrap();
        let r0 = c(2.0, -1.0);
        let posts = block_lmmse(
            &seq(vec![r0]),
            &ch,
            &cov,
            &[ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap()],
        )
        .unwrap();
        assert_cclose(posts[0].mean(), r0 * 0.5, 1e-14);
        assert_close(posts[0].var(), 0.5, 1e-14);
    }

    #[test]
    fn two_symbol_frozen_values() {
        // h = [1, 1], white unit noise, unit priors, r = [1, 1, 0]:
        // V = [[2,1,0],[1,3,1],[0,1,2]], V^{-1} = (1/8)[[5,-2,1],[-2,4,-2],[1,-2,5]],
        // posteriors (5/8, 3/8) and (1/8, 3/8).
        let ch = IsiChannel::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let m = ArModel::white(1.0).unwrap();
        let cov = noise_covariance(&m, 3, 0.0).unwrap();
        let priors = vec![ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap(); 2];
        let r = seq(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let posts = block_lmmse(&r, &ch, &cov, &priors).unwrap();
        assert_cclose(posts[0].mean(), c(0.625, 0.0), 1e-14);
        assert_cclose(posts[1].mean(), c(0.125, 0.0), 1e-14);
        assert_close(posts[0].var(), 0.375, 1e-14);
        assert_close(posts[1].var(), 0.375, 1e-14);
    }

    /// Textbook Bayesian linear model posterior, computed through the
    /// information form: Cov = (P^{-1} + H^H C^{-1} H)^{-1},
    /// mean = m + Cov H^H C^{-1} (r - H m). Independent of the rank-one
    /// route used by `block_lmmse`.
    fn dense_information_posterior(
        r: &[Complex64],
        h: &[Complex64],
        cov: &DMatrix<Complex64>,
        priors: &[ScalarPrior],
    ) -> (Vec<Complex64>, Vec<f64>) {
        let n = priors.len();
        let m = r.len();
        let mut hm = DMatrix::<Complex64>::zeros(m, n);
        for k in 0..n {
            for (i, &hi) in h.iter().enumerate() {
                hm[(k + i, k)] = hi;
            }
        }
        let cinv = cov.clone().cholesky().unwrap().inverse();
        let mut prec = hm.adjoint() * &cinv * &hm;
        for k in 0..n {
            prec[(k, k)] += c(1.0 / priors[k].var(), 0.0);
        }
        let pcov = prec.cholesky().unwrap().inverse();
        let mprior = DVector::from_iterator(n, priors.iter().map(|p| p.mean()));
        let d = DVector::from_column_slice(r) - &hm * &mprior;
        let mean = &mprior + &pcov * (hm.adjoint() * (&cinv * d));
        (
            mean.iter().copied().collect(),
            (0..n).map(|k| pcov[(k, k)].re).collect(),
        )
    }

    #[test]
    fn matches_information_form_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let n = rng.random_range(1..=30);
            let l = rng.random_range(0..=4usize);
            let p = rng.random_range(0..=3usize);
            let a: Vec<Complex64> = (0..p).map(|_| rand_cn(&mut rng, 0.08)).collect();
            let model = stabilize_ar(&a, rng.random_range(0.2..2.0)).unwrap();
            let h: Vec<Complex64> = (0..=l).map(|_| rand_cn(&mut rng, 1.0)).collect();
            let ch = IsiChannel::new(h.clone()).unwrap();
            let cov = noise_covariance(&model, n + l, 1e-5).unwrap();
            let priors: Vec<ScalarPrior> = (0..n)
                .map(|_| {
                    ScalarPrior::new(rand_cn(&mut rng, 1.0), rng.random_range(0.2..3.0)).unwrap()
                })
                .collect();
            let r: Vec<Complex64> = (0..n + l).map(|_| rand_cn(&mut rng, 2.0)).collect();

            let posts = block_lmmse(&seq(r.clone()), &ch, &cov, &priors).unwrap();
            let (means, vars) = dense_information_posterior(&r, &h, cov.matrix(), &priors);
            for k in 0..n {
                assert_cclose(posts[k].mean(), means[k], 1e-8 * (1.0 + means[k].norm()));
                assert_close(posts[k].var(), vars[k], 1e-8 * (1.0 + vars[k]));
            }
        }
    }

    #[test]
    fn matches_prewhitened_solution() {
        // Whitening the noise with the Cholesky factor of its covariance
        // and solving the white-noise problem must give the same result.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let l = 2;
        let model = stabilize_ar(&[c(0.6, 0.2), c(-0.1, -0.15)], 1.3).unwrap();
        let h: Vec<Complex64> = (0..=l).map(|_| rand_cn(&mut rng, 1.0)).collect();
        let ch = IsiChannel::new(h.clone()).unwrap();
        let cov = noise_covariance(&model, n + l, 1e-6).unwrap();
        let priors: Vec<ScalarPrior> = (0..n)
            .map(|_| ScalarPrior::new(rand_cn(&mut rng, 1.0), rng.random_range(0.3..2.0)).unwrap())
            .collect();
        let r: Vec<Complex64> = (0..n + l).map(|_| rand_cn(&mut rng, 2.0)).collect();

        let posts = block_lmmse(&seq(r.clone()), &ch, &cov, &priors).unwrap();

        let m = n + l;
        let lc = cov.matrix().clone().cholesky().unwrap().l();
        let lc_inv = lc.clone().try_inverse().unwrap();
        let mut hm = DMatrix::<Complex64>::zeros(m, n);
        for k in 0..n {
            for (i, &hi) in h.iter().enumerate() {
                hm[(k + i, k)] = hi;
            }
        }
        let hw = &lc_inv * &hm;
        let rw = &lc_inv * DVector::from_column_slice(&r);
        let mut prec = hw.adjoint() * &hw;
        for k in 0..n {
            prec[(k, k)] += c(1.0 / priors[k].var(), 0.0);
        }
        let pcov = prec.cholesky().unwrap().inverse();
        let mprior = DVector::from_iterator(n, priors.iter().map(|p| p.mean()));
        let mean = &mprior + &pcov * (hw.adjoint() * (&rw - &hw * &mprior));
        for k in 0..n {
            assert_cclose(posts[k].mean(), mean[k], 1e-8 * (1.0 + mean[k].norm()));
            assert_close(posts[k].var(), pcov[(k, k)].re, 1e-8);
        }
    }

    #[test]
    fn degenerate_prior_passes_through() {
        let ch = IsiChannel::new(vec![c(1.0, 0.0), c(0.5, 0.0)]).unwrap();
        let model = stabilize_ar(&[c(0.5, 0.0)], 1.0).unwrap();
        let cov = noise_covariance(&model, 3, 1e-5).unwrap();
        let pinned = ScalarPrior::new(c(0.7, -0.3), 0.0).unwrap();
        let free = ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap();
        let r = seq(vec![c(1.0, 1.0), c(-1.0, 0.0), c(0.5, 0.5)]);
        let posts = block_lmmse(&r, &ch, &cov, &[pinned, free]).unwrap();
        assert_cclose(posts[0].mean(), pinned.mean(), 1e-12);
        assert_eq!(posts[0].var(), 0.0);
        assert!(posts[1].var() > 0.0 && posts[1].var() <= 1.0);
    }

    #[test]
    fn posterior_variance_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 12;
        let ch = IsiChannel::new(vec![c(1.0, 0.0), c(0.4, 0.3)]).unwrap();
        let model = stabilize_ar(&[c(0.8, 0.0)], 0.5).unwrap();
        let cov = noise_covariance(&model, n + 1, 1e-5).unwrap();
        let priors: Vec<ScalarPrior> = (0..n)
            .map(|_| ScalarPrior::new(c(0.0, 0.0), rng.random_range(0.1..4.0)).unwrap())
            .collect();
        let r: Vec<Complex64> = (0..n + 1).map(|_| rand_cn(&mut rng, 2.0)).collect();
        let posts = block_lmmse(&seq(r), &ch, &cov, &priors).unwrap();
        for (post, prior) in posts.iter().zip(&priors) {
            assert!(post.var() > 0.0);
            assert!(post.var() <= prior.var());
        }
    }

    #[test]
    fn shift_with_independent_prefix_observations() {
        // Prepending variance-zero symbols and an independent block of
        // prefix observations must leave the original posteriors exactly
        // unchanged (independent data drops out of the conditioning).
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 6;
        let l = 2;
        let s = 3;
        let model = stabilize_ar(&[c(0.5, 0.1), c(-0.2, 0.05)], 1.0).unwrap();
        let ch = IsiChannel::new(vec![c(1.0, 0.0), c(0.3, -0.4), c(0.2, 0.2)]).unwrap();
        let cov = noise_covariance(&model, n + l, 1e-6).unwrap();
        let priors: Vec<ScalarPrior> = (0..n)
            .map(|_| ScalarPrior::new(rand_cn(&mut rng, 1.0), rng.random_range(0.3..2.0)).unwrap())
            .collect();
        let r: Vec<Complex64> = (0..n + l).map(|_| rand_cn(&mut rng, 2.0)).collect();
        let base = block_lmmse(&seq(r.clone()), &ch, &cov, &priors).unwrap();

        let m2 = s + n + l;
        let mut big = DMatrix::<Complex64>::zeros(m2, m2);
        for i in 0..s {
            big[(i, i)] = c(1.0, 0.0);
        }
        for i in 0..n + l {
            for j in 0..n + l {
                big[(s + i, s + j)] = cov.matrix()[(i, j)];
            }
        }
        let big_cov = NoiseCov::new(big, 1e-6).unwrap();
        let mut shifted_priors = vec![ScalarPrior::new(c(0.0, 0.0), 0.0).unwrap(); s];
        shifted_priors.extend_from_slice(&priors);
        let mut shifted_r: Vec<Complex64> = (0..s).map(|_| rand_cn(&mut rng, 1.0)).collect();
        shifted_r.extend_from_slice(&r);
        let shifted = block_lmmse(&seq(shifted_r), &ch, &big_cov, &shifted_priors).unwrap();
        for k in 0..n {
            assert_cclose(shifted[s + k].mean(), base[k].mean(), 1e-9);
            assert_close(shifted[s + k].var(), base[k].var(), 1e-9);
        }
    }

    #[test]
    fn block_lmmse_checks_shapes() {
        let ch = IsiChannel::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let m = ArModel::white(1.0).unwrap();
        let cov = noise_covariance(&m, 3, 0.0).unwrap();
        let priors = vec![ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap(); 2];
        let bad_r = seq(vec![c(0.0, 0.0); 2]);
        assert!(matches!(
            block_lmmse(&bad_r, &ch, &cov, &priors).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
        let good_r = seq(vec![c(0.0, 0.0); 3]);
        assert!(block_lmmse(&good_r, &ch, &cov, &[]).is_err());
        let small_cov = noise_covariance(&m, 2, 0.0).unwrap();
        assert!(matches!(
            block_lmmse(&good_r, &ch, &small_cov, &priors).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
    }

    #[test]
    fn extrinsic_scalar_example() {
        // Posterior (r/2, 1/2) under prior (0, 1) came from a unit-noise
        // observation of the symbol itself, so the extrinsic is (r, 1).
        let r0 = c(0.8, -0.6);
        let post = ScalarPosterior::new(r0 * 0.5, 0.5).unwrap();
        let prior = ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap();
        let e = extrinsic(&post, &prior).unwrap();
        assert_cclose(e.mean(), r0, 1e-12);
        assert_close(e.var(), 1.0, 1e-12);
    }

    #[test]
    fn extrinsic_degenerate_cases() {
        let prior = ScalarPrior::new(c(1.0, 0.0), 2.0).unwrap();
        let same = ScalarPosterior::new(c(1.0, 0.0), 2.0).unwrap();
        assert_eq!(extrinsic(&same, &prior).unwrap_err(), Error::NoInformation);
        let wider = ScalarPosterior::new(c(1.0, 0.0), 2.5).unwrap();
        assert!(matches!(
            extrinsic(&wider, &prior).unwrap_err(),
            Error::InvalidArg(_)
        ));
        let pinned = ScalarPrior::new(c(1.0, 0.0), 0.0).unwrap();
        let post = ScalarPosterior::new(c(1.0, 0.0), 0.0).unwrap();
        assert_eq!(extrinsic(&post, &pinned).unwrap_err(), Error::NoInformation);
    }

    #[test]
    fn extrinsic_near_flat_is_clamped() {
        let prior = ScalarPrior::new(c(0.0, 0.0), 1.0).unwrap();
        let post = ScalarPosterior::new(c(0.1, 0.0), 1.0 - 1e-14).unwrap();
        // Within the no-information tolerance.
        assert_eq!(extrinsic(&post, &prior).unwrap_err(), Error::NoInformation);
        // A barely informative posterior under a wide prior pushes the
        // extrinsic variance past the clamp.
        let wide = ScalarPrior::new(c(0.0, 0.0), 1e6).unwrap();
        let post = ScalarPosterior::new(c(0.1, 0.0), 1e6 * (1.0 - 1e-7)).unwrap();
        let e = extrinsic(&post, &wide).unwrap();
        assert!(e.is_flat());
        assert_eq!(e.var(), FLAT_VAR);
    }

    proptest! {
        /// Combining the prior with the extrinsic message recovers the
        /// posterior (product of Gaussian densities).
        #[test]
        fn extrinsic_round_trip(
            m0re in -3.0..3.0f64, m0im in -3.0..3.0f64,
            mpre in -3.0..3.0f64, mpim in -3.0..3.0f64,
            v0 in 0.1..10.0f64,
            shrink in 0.01..0.99f64,
        ) {
            let prior = ScalarPrior::new(c(m0re, m0im), v0).unwrap();
            let vp = v0 * shrink;
            let post = ScalarPosterior::new(c(mpre, mpim), vp).unwrap();
            let e = extrinsic(&post, &prior).unwrap();
            let v = 1.0 / (1.0 / prior.var() + 1.0 / e.var());
            let m = (prior.mean() / prior.var() + e.mean() / e.var()) * v;
            prop_assert!((v - vp).abs() <= 1e-9 * vp);
            prop_assert!((m - post.mean()).norm() <= 1e-9 * (1.0 + post.mean().norm()));
        }
    }
}
