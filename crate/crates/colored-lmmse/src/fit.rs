//! Fitting AR noise models to autocorrelation sequences.
//!
//! Given measured (or exact) autocorrelation lags of a stationary noise
//! process, [`fit_ar`] solves the normal equations
//! `R(j) = sum_i a(i) R(j-i)`, `j = 1..p`, for the coefficients and the
//! innovation variance, so the resulting [`ArModel`] can drive the
//! message-passing smoother. The primary path is the complex
//! Levinson-Durbin recursion; near-degenerate inputs fall back to a dense
//! Toeplitz solve so that failures are reported rather than silently
//! mis-solved.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ar_autocorrelation, stable_within_margin, ArModel, AutocorrSeq};

/// The Levinson-Durbin recursion hands over to the dense solve when a
/// reflection coefficient comes this close to the unit circle.
const REFLECTION_LIMIT: f64 = 1.0 - 1e-8;

/// Result of one AR fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// The fitted model; its `n0` is the (possibly overridden) stationary
    /// power.
    pub model: ArModel,
    /// Per-lag absolute deviation between the model autocorrelation and
    /// the input, over all input lags. Lags `0..=p` are interpolated by
    /// the normal equations, so their residuals are at solver precision;
    /// higher lags measure how well the model extrapolates.
    pub residuals: Vec<f64>,
    /// Condition number estimate of the order-`p` Toeplitz system
    /// (`1.0` for `p = 0`).
    pub condition: f64,
}

/// Fits an AR(p) model to the leading lags of `acorr`.
///
/// The coefficients depend only on the shape of the autocorrelation;
/// `n0_override`, when given, rescales the fitted model to that
/// stationary power (residuals are always reported against the input
/// scale). Requires `p <= acorr.max_lag()`.
pub fn fit_ar(acorr: &AutocorrSeq, p: usize, n0_override: Option<f64>) -> Result<FitReport> {
    if p > acorr.max_lag() {
        return Err(Error::InvalidArg(format!(
            "order {p} needs lags up to {p}, have {}",
            acorr.max_lag()
        )));
    }
    if let Some(n0) = n0_override {
        if !n0.is_finite() || n0 <= 0.0 {
            return Err(Error::InvalidArg(format!(
                "n0 override must be finite and positive, got {n0}"
            )));
        }
    }
    let r0 = acorr.lag(0).re;

    let (a, sigma_w2) = solve_normal_equations(acorr, p)?;
    if !stable_within_margin(&a) {
        return Err(Error::UnstableFit { coeffs: a });
    }
    if !sigma_w2.is_finite() || sigma_w2 <= 0.0 {
        return Err(Error::SingularSystem);
    }

    let natural = ArModel::new_unchecked(a.clone(), sigma_w2, r0);
    let fitted = ar_autocorrelation(&natural, acorr.max_lag())?;
    let residuals: Vec<f64> = acorr
        .lags()
        .iter()
        .zip(fitted.lags())
        .map(|(want, got)| (want - got).norm())
        .collect();

    let condition = if p == 0 {
        1.0
    } else {
        let sv = acorr.toeplitz(p)?.singular_values();
        let max = sv.iter().cloned().fold(0.0f64, f64::max);
        let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };

    let model = match n0_override {
        Some(n0) => ArModel::new_unchecked(a, sigma_w2 * (n0 / r0), n0),
        None => natural,
    };
    Ok(FitReport {
        model,
        residuals,
        condition,
    })
}

/// Fits all orders `0..=p_max` and returns one report (or error) per
/// order. Requires `acorr.max_lag() >= p_max + 2` so that every fit
/// leaves at least two extrapolated lags for its residuals.
pub fn approximate_process(
    acorr: &AutocorrSeq,
    p_max: usize,
) -> Result<Vec<Result<FitReport>>> {
    if acorr.max_lag() < p_max + 2 {
        return Err(Error::InvalidArg(format!(
            "need lags up to {}, have {}",
            p_max + 2,
            acorr.max_lag()
        )));
    }
    Ok((0..=p_max).map(|p| fit_ar(acorr, p, None)).collect())
}

/// Expands reflection coefficients into AR coefficients by the step-up
/// recursion. Any sequence with all `|kappa| < 1` yields a stable model,
/// which makes this the convenient way to construct random stable
/// processes.
pub fn coeffs_from_reflections(kappas: &[Complex64]) -> Vec<Complex64> {
    let mut a: Vec<Complex64> = Vec::with_capacity(kappas.len());
    for &k in kappas {
        let m = a.len() + 1;
        let mut next = Vec::with_capacity(m);
        for i in 0..m - 1 {
            next.push(a[i] - k * a[m - 2 - i].conj());
        }
        next.push(k);
        a = next;
    }
    a
}

/// Solves for `(a, sigma_w2)` by Levinson-Durbin, falling back to a dense
/// Toeplitz solve when the recursion degenerates.
fn solve_normal_equations(acorr: &AutocorrSeq, p: usize) -> Result<(Vec<Complex64>, f64)> {
    let r0 = acorr.lag(0).re;
    if p == 0 {
        return Ok((Vec::new(), r0));
    }
    let mut a: Vec<Complex64> = Vec::with_capacity(p);
    let mut energy = r0;
    for m in 1..=p {
        if energy <= 1e-14 * r0 {
            return dense_toeplitz_solve(acorr, p);
        }
        let mut delta = acorr.lag(m);
        for (i, &ai) in a.iter().enumerate() {
            delta -= ai * acorr.lag(m - 1 - i);
        }
        let kappa = delta / energy;
        if kappa.norm() >= REFLECTION_LIMIT {
            return dense_toeplitz_solve(acorr, p);
        }
        let mut next = Vec::with_capacity(m);
        for i in 0..m - 1 {
            next.push(a[i] - kappa * a[m - 2 - i].conj());
        }
        next.push(kappa);
        a = next;
        energy *= 1.0 - kappa.norm_sqr();
    }
    Ok((a, energy))
}

/// Direct solve of the order-`p` normal equations `T a = rho` with
/// `T[j, i] = R(j - i)` and `rho[j] = R(j + 1)`, followed by
/// `sigma_w2 = R(0) - sum_i a(i) conj(R(i))`.
fn dense_toeplitz_solve(acorr: &AutocorrSeq, p: usize) -> Result<(Vec<Complex64>, f64)> {
    let t = acorr.toeplitz(p)?;
    let rho = DVector::from_fn(p, |j, _| acorr.lag(j + 1));
    let lu = t.lu();
    if !lu.is_invertible() {
        return Err(Error::SingularSystem);
    }
    let a_vec = lu.solve(&rho).ok_or(Error::SingularSystem)?;
    let a: Vec<Complex64> = a_vec.iter().copied().collect();
    if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::SingularSystem);
    }
    let mut sigma = acorr.lag(0);
    for (i, &ai) in a.iter().enumerate() {
        sigma -= ai * acorr.lag(i + 1).conj();
    }
    Ok((a, sigma.re))
}
