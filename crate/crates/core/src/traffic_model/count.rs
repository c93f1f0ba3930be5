//! Probability of `k` renewals in `[0, t]` for a Weibull renewal process,
//! expressed as an alternating series over a triangular table of
//! coefficients `Δ_j^k`.
//!
//! ```text
//! P(N(t) = k) = Σ_{j≥k} (-1)^(j+k) (t/λ)^(αj) Δ_j^k / Γ(αj + 1)
//! Δ_j^0     = Γ(αj + 1) / Γ(j + 1)
//! Δ_j^(k+1) = Σ_{m=k}^{j-1} Δ_m^k Γ(αj − αm + 1) / Γ(j − m + 1)
//! ```

use statrs::function::gamma::ln_gamma;

use super::sum::log_sum_exp;
use super::weibull::WeibullParams;
use crate::error::TrafficError;

pub const DEFAULT_J_MAX: usize = 160;

/// Successive terms at or below this fraction of the running sum count as
/// negligible.
const RELATIVE_STOP: f64 = 1e-12;
const STOP_RUN: usize = 3;
/// Largest tolerated `max|term| * eps`; beyond it cancellation has eaten the
/// answer.
const CANCELLATION_LIMIT: f64 = 1e-9;

/// `Δ_j^k` for `0 ≤ k ≤ k_max`, `k ≤ j ≤ j_max`, stored as natural logs.
/// Every coefficient is positive, so the recursion runs entirely in log
/// space.
#[derive(Debug, Clone, PartialEq)]
pub struct CountModelTable {
    pub alpha: f64,
    pub j_max: usize,
    log_delta: Vec<Vec<f64>>,
}

impl CountModelTable {
    pub fn build(alpha: f64, j_max: usize, k_max: usize) -> Result<Self, TrafficError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(TrafficError::InvalidParameter {
                name: "shape",
                value: alpha,
            });
        }
        if k_max > j_max {
            return Err(TrafficError::Domain(format!(
                "j_max = {j_max} must be at least k = {k_max}"
            )));
        }
        let lg = |j: usize| ln_gamma(alpha * j as f64 + 1.0);
        let mut log_delta = Vec::with_capacity(k_max + 1);
        log_delta.push(
            (0..=j_max)
                .map(|j| lg(j) - ln_gamma(j as f64 + 1.0))
                .collect::<Vec<_>>(),
        );
        let mut terms = Vec::with_capacity(j_max);
        for k in 0..k_max {
            let prev = &log_delta[k];
            let mut row = vec![f64::NEG_INFINITY; j_max + 1];
            for (j, slot) in row.iter_mut().enumerate().skip(k + 1) {
                terms.clear();
                terms.extend((k..j).map(|m| {
                    prev[m] + ln_gamma(alpha * (j - m) as f64 + 1.0)
                        - ln_gamma((j - m) as f64 + 1.0)
                }));
                *slot = log_sum_exp(&terms);
            }
            log_delta.push(row);
        }
        Ok(Self {
            alpha,
            j_max,
            log_delta,
        })
    }

    pub fn k_max(&self) -> usize {
        self.log_delta.len() - 1
    }

    /// `ln Δ_j^k`; `-inf` outside the triangle.
    pub fn log_delta(&self, j: usize, k: usize) -> f64 {
        if k > self.k_max() || j > self.j_max || j < k {
            f64::NEG_INFINITY
        } else {
            self.log_delta[k][j]
        }
    }

    pub fn delta(&self, j: usize, k: usize) -> f64 {
        self.log_delta(j, k).exp()
    }

    /// Evaluate the series for `P(N(t) = k)` with this table.
    pub fn prob(&self, scale: f64, t: f64, k: usize) -> Result<f64, TrafficError> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(TrafficError::InvalidParameter {
                name: "scale",
                value: scale,
            });
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(TrafficError::Domain(format!("interval length {t} must be >= 0")));
        }
        if k > self.k_max() {
            return Err(TrafficError::Domain(format!(
                "table built for k <= {}, asked for {k}",
                self.k_max()
            )));
        }
        if t == 0.0 {
            return Ok(if k == 0 { 1.0 } else { 0.0 });
        }
        let ln_x = (t / scale).ln();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut max_term = 0.0f64;
        let mut last_term = f64::INFINITY;
        let mut quiet = 0usize;
        for j in k..=self.j_max {
            let log_mag = self.alpha * j as f64 * ln_x + self.log_delta[k][j]
                - ln_gamma(self.alpha * j as f64 + 1.0);
            let mag = log_mag.exp();
            if !mag.is_finite() {
                return Err(TrafficError::SeriesDivergence {
                    j_max: self.j_max,
                    partial_sum: sum + comp,
                    last_term: mag,
                });
            }
            let term = if (j + k) % 2 == 0 { mag } else { -mag };
            // Neumaier compensated summation
            let s = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - s) + term;
            } else {
                comp += (term - s) + sum;
            }
            sum = s;
            max_term = max_term.max(mag);
            last_term = mag;
            let total = sum + comp;
            if mag <= RELATIVE_STOP * total.abs() {
                quiet += 1;
                if quiet >= STOP_RUN {
                    if max_term * f64::EPSILON > CANCELLATION_LIMIT {
                        break;
                    }
                    return Ok(total.clamp(0.0, 1.0));
                }
            } else {
                quiet = 0;
            }
        }
        Err(TrafficError::SeriesDivergence {
            j_max: self.j_max,
            partial_sum: sum + comp,
            last_term,
        })
    }
}

/// `P(N(t) = k)` for a renewal process with Weibull interarrivals `p`.
pub fn count_prob(
    p: &WeibullParams,
    t: f64,
    k: usize,
    j_max: usize,
) -> Result<f64, TrafficError> {
    p.validate()?;
    CountModelTable::build(p.shape, j_max, k)?.prob(p.scale, t, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poisson(x: f64, k: usize) -> f64 {
        (k as f64 * x.ln() - x - ln_gamma(k as f64 + 1.0)).exp()
    }

    #[test]
    fn zero_interval_has_no_arrivals() {
        let p = WeibullParams::VACANT;
        assert_eq!(count_prob(&p, 0.0, 0, DEFAULT_J_MAX).unwrap(), 1.0);
        assert_eq!(count_prob(&p, 0.0, 2, DEFAULT_J_MAX).unwrap(), 0.0);
    }

    #[test]
    fn exponential_table_is_binomial() {
        let table = CountModelTable::build(1.0, 12, 4).unwrap();
        for k in 0..=4usize {
            for j in k..=12usize {
                let c = (ln_gamma(j as f64 + 1.0)
                    - ln_gamma(k as f64 + 1.0)
                    - ln_gamma((j - k) as f64 + 1.0))
                .exp();
                assert_relative_eq!(table.delta(j, k), c, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn base_row_matches_closed_form() {
        let table = CountModelTable::build(0.7, 30, 0).unwrap();
        for j in 0..=30usize {
            let expected = ln_gamma(0.7 * j as f64 + 1.0) - ln_gamma(j as f64 + 1.0);
            assert_relative_eq!(table.log_delta(j, 0), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn shape_one_is_poisson() {
        for &x in &[0.1, 0.5, 1.0, 2.0, 3.0] {
            let p = WeibullParams::new(1.0, 50.0).unwrap();
            for k in 0..=6 {
                let got = count_prob(&p, x * 50.0, k, DEFAULT_J_MAX).unwrap();
                assert!((got - poisson(x, k)).abs() < 1e-6, "x={x} k={k}: {got}");
            }
        }
    }

    #[test]
    fn zero_count_is_weibull_survival() {
        let p = WeibullParams::VACANT;
        for &t in &[100.0, 900.0, 2000.0] {
            let got = count_prob(&p, t, 0, DEFAULT_J_MAX).unwrap();
            assert_relative_eq!(got, 1.0 - p.cdf(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn far_tail_reports_divergence() {
        let p = WeibullParams::new(0.4, 1.0).unwrap();
        let err = count_prob(&p, 1e6, 1, 40).unwrap_err();
        assert!(matches!(err, TrafficError::SeriesDivergence { j_max: 40, .. }), "{err:?}");
    }

    #[test]
    fn j_max_below_k_is_rejected() {
        assert!(count_prob(&WeibullParams::VACANT, 10.0, 5, 3).is_err());
    }
}
