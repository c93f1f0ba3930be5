//! Approximation of `X = X1 + X2` (parking time plus vacant time) by a
//! generalized-gamma ("alpha-mu") law whose parameters are recovered from the
//! first, second and fourth raw moments of the sum.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use super::weibull::{log_weibull_moment, WeibullParams};
use crate::error::TrafficError;

/// Parameters of the approximating law
/// `f(x) = alpha * mu^mu * x^(alpha*mu - 1) * exp(-mu (x/scale)^alpha) / (scale^(alpha*mu) * Gamma(mu))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumWeibullParams {
    pub shape: f64,
    /// Seconds; `E[X^shape] = scale^shape`.
    pub scale: f64,
    pub mu: f64,
}

impl SumWeibullParams {
    pub fn new(shape: f64, scale: f64, mu: f64) -> Result<Self, TrafficError> {
        for (name, value) in [("shape", shape), ("scale", scale), ("mu", mu)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TrafficError::InvalidParameter { name, value });
            }
        }
        Ok(Self { shape, scale, mu })
    }

    /// Raw moment of the approximating law:
    /// `scale^n * Gamma(mu + n/shape) / (mu^(n/shape) * Gamma(mu))`.
    pub fn moment(&self, n: u32) -> f64 {
        let r = f64::from(n) / self.shape;
        (f64::from(n) * self.scale.ln() - r * self.mu.ln() + ln_gamma(self.mu + r)
            - ln_gamma(self.mu))
        .exp()
    }
}

/// `E[R]`, `E[R^2]`, `E[R^4]` of the summed variate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m1: f64,
    pub m2: f64,
    pub m4: f64,
}

impl MomentSet {
    pub fn of_sum(p1: &WeibullParams, p2: &WeibullParams) -> Result<Self, TrafficError> {
        Ok(Self {
            m1: sum_moment(p1, p2, 1)?,
            m2: sum_moment(p1, p2, 2)?,
            m4: sum_moment(p1, p2, 4)?,
        })
    }

    /// `E^2[R] / (E[R^2] - E^2[R])`, the target of the first matching equation.
    pub fn first_ratio(&self) -> f64 {
        self.m1 * self.m1 / (self.m2 - self.m1 * self.m1)
    }

    /// `E^2[R^2] / (E[R^4] - E^2[R^2])`, the target of the second.
    pub fn second_ratio(&self) -> f64 {
        self.m2 * self.m2 / (self.m4 - self.m2 * self.m2)
    }

    fn validate(&self) -> Result<(), TrafficError> {
        let ok = self.m1 > 0.0
            && self.m2 >= self.m1 * self.m1
            && self.m4 >= self.m2 * self.m2
            && self.first_ratio().is_finite()
            && self.second_ratio().is_finite();
        if ok {
            Ok(())
        } else {
            Err(TrafficError::Domain(format!(
                "degenerate moment ratios for {self:?}"
            )))
        }
    }
}

/// n-th raw moment of `X1 + X2` for independent Weibull summands,
/// `sum_k C(n,k) E[X1^k] E[X2^(n-k)]` with `E[Xi^0] = 1`.
///
/// Terms are combined in log space so that fourth moments of shape-0.4 laws
/// (~1e20 s^4) do not lose precision.
pub fn sum_moment(p1: &WeibullParams, p2: &WeibullParams, n: u32) -> Result<f64, TrafficError> {
    let logs: Vec<f64> = (0..=n)
        .map(|k| {
            ln_binomial(n, k) + log_weibull_moment(p1, k) + log_weibull_moment(p2, n - k)
        })
        .collect();
    let m = log_sum_exp(&logs).exp();
    if m.is_finite() {
        Ok(m)
    } else {
        Err(TrafficError::NonFiniteMoment { order: n })
    }
}

/// Result of [`fit_sum_weibull`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumWeibullFit {
    pub params: SumWeibullParams,
    pub moments: MomentSet,
    /// Left minus right side of the variance-ratio equation at the solution.
    pub residual_first: f64,
    /// Left minus right side of the fourth-moment equation at the solution.
    pub residual_second: f64,
    pub iterations: usize,
}

const SHAPE_BRACKET: (f64, f64) = (0.05, 3.0);
const MU_BRACKET: (f64, f64) = (0.01, 100.0);
const RESIDUAL_TOLERANCE: f64 = 1e-8;
const SHAPE_GRID: usize = 64;
const BISECTION_STEPS: usize = 200;

/// Gamma-ratio side of the matching equations:
/// `Gamma^2(mu + p/a) / (Gamma(mu) Gamma(mu + 2p/a) - Gamma^2(mu + p/a))`,
/// with `p = 1` for the variance ratio and `p = 2` for the fourth-moment ratio.
pub fn gamma_ratio(shape: f64, mu: f64, p: u32) -> f64 {
    let p = f64::from(p);
    let d = ln_gamma(mu) + ln_gamma(mu + 2.0 * p / shape) - 2.0 * ln_gamma(mu + p / shape);
    1.0 / d.exp_m1()
}

/// Solve the first matching equation for `mu` at fixed shape. The gamma
/// ratio increases with `mu`, so bisection on `ln mu` is safe.
fn solve_mu(shape: f64, target: f64) -> Option<f64> {
    let f = |ln_mu: f64| gamma_ratio(shape, ln_mu.exp(), 1) - target;
    let (mut lo, mut hi) = (MU_BRACKET.0.ln(), MU_BRACKET.1.ln());
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo * fhi > 0.0 {
        return None;
    }
    if flo == 0.0 {
        return Some(lo.exp());
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid.exp());
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

/// Recover `(shape, mu, scale)` of the approximating law from the two Weibull
/// summands by matching `E[R]`, `E[R^2]` and `E[R^4]`.
///
/// The shape is bracketed in `[0.05, 3]` and `mu` in `[0.01, 100]`. For each
/// trial shape the variance-ratio equation pins `mu`; an outer bisection on
/// the shape then zeroes the fourth-moment equation. The scale follows in
/// closed form from the first moment.
pub fn fit_sum_weibull(
    p1: &WeibullParams,
    p2: &WeibullParams,
) -> Result<SumWeibullFit, TrafficError> {
    p1.validate()?;
    p2.validate()?;
    let moments = MomentSet::of_sum(p1, p2)?;
    fit_moments(&moments)
}

/// Moment-matching core of [`fit_sum_weibull`], usable on any moment triple.
pub fn fit_moments(moments: &MomentSet) -> Result<SumWeibullFit, TrafficError> {
    moments.validate()?;
    let t1 = moments.first_ratio();
    let t2 = moments.second_ratio();

    let outer = |shape: f64| -> Option<(f64, f64)> {
        let mu = solve_mu(shape, t1)?;
        Some((gamma_ratio(shape, mu, 2) - t2, mu))
    };

    // Scan a log grid for the first feasible sign change.
    let (lo_s, hi_s) = (SHAPE_BRACKET.0.ln(), SHAPE_BRACKET.1.ln());
    let mut prev: Option<(f64, f64)> = None;
    let mut bracket = None;
    let mut iterations = 0;
    for i in 0..SHAPE_GRID {
        let shape = (lo_s + (hi_s - lo_s) * i as f64 / (SHAPE_GRID - 1) as f64).exp();
        iterations += 1;
        if let Some((g, _)) = outer(shape) {
            if g == 0.0 {
                bracket = Some((shape, shape));
                break;
            }
            if let Some((ps, pg)) = prev {
                if pg * g < 0.0 {
                    bracket = Some((ps, shape));
                    break;
                }
            }
            prev = Some((shape, g));
        }
    }
    let (mut lo, mut hi) = bracket.ok_or(TrafficError::FitFailure {
        iterations,
        residual_first: f64::NAN,
        residual_second: f64::NAN,
    })?;

    if lo != hi {
        let mut g_lo = outer(lo).map(|r| r.0).unwrap_or(f64::NAN);
        for _ in 0..BISECTION_STEPS {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let Some((g, _)) = outer(mid) else {
                return Err(TrafficError::FitFailure {
                    iterations,
                    residual_first: f64::NAN,
                    residual_second: f64::NAN,
                });
            };
            if g == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (g < 0.0) == (g_lo < 0.0) {
                lo = mid;
                g_lo = g;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
    }
    let shape = 0.5 * (lo + hi);
    let mu = solve_mu(shape, t1).ok_or(TrafficError::FitFailure {
        iterations,
        residual_first: f64::NAN,
        residual_second: f64::NAN,
    })?;
    let residual_first = gamma_ratio(shape, mu, 1) - t1;
    let residual_second = gamma_ratio(shape, mu, 2) - t2;
    if !(residual_first.abs() < RESIDUAL_TOLERANCE && residual_second.abs() < RESIDUAL_TOLERANCE)
    {
        return Err(TrafficError::FitFailure {
            iterations,
            residual_first,
            residual_second,
        });
    }

    // scale = mu^(1/a) Gamma(mu) E[R] / Gamma(mu + 1/a)
    let ln_scale =
        mu.ln() / shape + ln_gamma(mu) + moments.m1.ln() - ln_gamma(mu + 1.0 / shape);
    let params = SumWeibullParams::new(shape, ln_scale.exp(), mu)?;
    Ok(SumWeibullFit {
        params,
        moments: *moments,
        residual_first,
        residual_second,
        iterations,
    })
}

/// Density of the approximating law, evaluated in log space.
pub fn sum_pdf(sp: &SumWeibullParams, x: f64) -> Result<f64, TrafficError> {
    if !(x > 0.0) {
        return Err(TrafficError::Domain(format!(
            "density requires x > 0, got {x}"
        )));
    }
    let SumWeibullParams { shape, scale, mu } = *sp;
    let z = (x / scale).powf(shape);
    let log_f = shape.ln() + mu * mu.ln() - ln_gamma(mu) - shape * mu * scale.ln()
        + (shape * mu - 1.0) * x.ln()
        - mu * z;
    Ok(log_f.exp())
}

/// `F(x) = 1 - Gamma(mu, mu (x/scale)^shape) / Gamma(mu)`, i.e. the regularized
/// lower incomplete gamma function at `mu (x/scale)^shape`.
pub fn sum_cdf(sp: &SumWeibullParams, x: f64) -> Result<f64, TrafficError> {
    if x.is_nan() || x < 0.0 {
        return Err(TrafficError::Domain(format!(
            "distribution function requires x >= 0, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let arg = sp.mu * (x / sp.scale).powf(sp.shape);
    if arg.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(sp.mu, arg).clamp(0.0, 1.0))
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    ln_gamma(f64::from(n) + 1.0) - ln_gamma(f64::from(k) + 1.0) - ln_gamma(f64::from(n - k) + 1.0)
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_exp() -> WeibullParams {
        WeibullParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn first_moment_is_linear() {
        let (p1, p2) = (WeibullParams::PARKING, WeibullParams::VACANT);
        let expected = p1.mean() + p2.mean();
        assert_relative_eq!(sum_moment(&p1, &p2, 1).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn second_moment_of_two_unit_exponentials() {
        // E[X1^2] + 2 E[X1] E[X2] + E[X2^2] = 2 + 2 + 2
        assert_relative_eq!(
            sum_moment(&unit_exp(), &unit_exp(), 2).unwrap(),
            6.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn erlang_two_is_recovered_exactly() {
        let fit = fit_sum_weibull(&unit_exp(), &unit_exp()).unwrap();
        assert_relative_eq!(fit.params.shape, 1.0, max_relative = 1e-9);
        assert_relative_eq!(fit.params.mu, 2.0, max_relative = 1e-9);
        assert_relative_eq!(fit.params.scale, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn santander_sum_is_heavy_tailed() {
        let fit = fit_sum_weibull(&WeibullParams::PARKING, &WeibullParams::VACANT).unwrap();
        assert!(fit.params.shape > 0.0 && fit.params.shape < 1.0, "{fit:?}");
        assert!(fit.residual_first.abs() < 1e-8);
        assert!(fit.residual_second.abs() < 1e-8);
        // The scale equation reproduces the first moment by construction.
        assert_relative_eq!(fit.params.moment(1), fit.moments.m1, max_relative = 1e-10);
    }

    #[test]
    fn santander_fit_matches_frozen_reference() {
        // Independent scipy solve of the same three moment equations.
        let fit = fit_sum_weibull(&WeibullParams::PARKING, &WeibullParams::VACANT).unwrap();
        assert_relative_eq!(fit.moments.m1, 13103.30, max_relative = 1e-6);
        assert_relative_eq!(fit.moments.m2, 1.5865e9, max_relative = 1e-4);
        assert_relative_eq!(fit.moments.m4, 6.125e20, max_relative = 1e-3);
        assert_relative_eq!(fit.params.shape, 0.35351, max_relative = 1e-4);
        assert_relative_eq!(fit.params.mu, 1.62807, max_relative = 1e-4);
        assert_relative_eq!(fit.params.scale, 4258.09, max_relative = 1e-5);
    }

    #[test]
    fn fitted_law_reproduces_matched_moments() {
        let fit = fit_sum_weibull(&WeibullParams::PARKING, &WeibullParams::VACANT).unwrap();
        assert_relative_eq!(fit.params.moment(2), fit.moments.m2, max_relative = 1e-6);
        assert_relative_eq!(fit.params.moment(4), fit.moments.m4, max_relative = 1e-6);
    }

    #[test]
    fn pdf_reduces_to_exponential() {
        let sp = SumWeibullParams::new(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(sum_pdf(&sp, 0.5).unwrap(), (-0.5f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn pdf_direct_substitution() {
        let sp = SumWeibullParams::new(1.0, 1.0, 2.0).unwrap();
        assert_relative_eq!(sum_pdf(&sp, 1.0).unwrap(), 4.0 * (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn cdf_end_points_and_median() {
        let sp = SumWeibullParams::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(sum_cdf(&sp, 0.0).unwrap(), 0.0);
        assert_relative_eq!(sum_cdf(&sp, 2f64.ln()).unwrap(), 0.5, max_relative = 1e-12);
        assert_eq!(sum_cdf(&sp, f64::INFINITY).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        let sp = SumWeibullParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(sum_pdf(&sp, 0.0).is_err());
        assert!(sum_pdf(&sp, -1.0).is_err());
        assert!(sum_cdf(&sp, -1.0).is_err());
    }

    #[test]
    fn degenerate_moments_are_rejected() {
        let m = MomentSet { m1: 1.0, m2: 1.0, m4: 1.0 };
        assert!(matches!(fit_moments(&m), Err(TrafficError::Domain(_))));
    }

    #[test]
    fn out_of_bracket_moments_fail_to_fit() {
        // A nearly deterministic sum needs mu far above the bracket.
        let p = WeibullParams::new(40.0, 1.0).unwrap();
        assert!(matches!(
            fit_sum_weibull(&p, &p),
            Err(TrafficError::FitFailure { .. })
        ));
    }
}
