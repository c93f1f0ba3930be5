//! Numerical oracle suite for the traffic mathematics.
//!
//! Every implementation under test is reached through [`MathImpl`], so a
//! caller can swap in a deliberately broken function and watch the matching
//! check fail.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::TrafficError;
use crate::metrics::{ks_distance, EmpiricalDistribution};
use crate::quadrature::{integrate, integrate_to_infinity};
use crate::traffic_model::{
    count_prob, fit_sum_weibull, sample_weibull, sum_cdf, sum_moment, sum_pdf, weibull_moment,
    SumWeibullFit, SumWeibullParams, WeibullParams, DEFAULT_J_MAX,
};

type MomentFn = fn(&WeibullParams, u32) -> Result<f64, TrafficError>;
type SumMomentFn = fn(&WeibullParams, &WeibullParams, u32) -> Result<f64, TrafficError>;
type FitFn = fn(&WeibullParams, &WeibullParams) -> Result<SumWeibullFit, TrafficError>;
type SumDistFn = fn(&SumWeibullParams, f64) -> Result<f64, TrafficError>;
type CountFn = fn(&WeibullParams, f64, usize, usize) -> Result<f64, TrafficError>;

#[derive(Clone, Copy)]
pub struct MathImpl {
    pub weibull_moment: MomentFn,
    pub sum_moment: SumMomentFn,
    pub fit_sum_weibull: FitFn,
    pub sum_pdf: SumDistFn,
    pub sum_cdf: SumDistFn,
    pub count_prob: CountFn,
}

impl Default for MathImpl {
    fn default() -> Self {
        Self {
            weibull_moment,
            sum_moment,
            fit_sum_weibull,
            sum_pdf,
            sum_cdf,
            count_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed deviation.
    pub value: f64,
    /// `None` for informational lines.
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let status = match (c.tolerance, c.passed) {
                (None, _) => "INFO",
                (_, true) => "PASS",
                (_, false) => "FAIL",
            };
            match c.tolerance {
                Some(t) => writeln!(f, "{status} {:<28} {:.3e} (tol {t:.1e})  {}", c.name, c.value, c.detail)?,
                None => writeln!(f, "{status} {:<28} {:.3e}  {}", c.name, c.value, c.detail)?,
            }
        }
        Ok(())
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    /// Record the worst deviation, or a failure if any evaluation errored.
    fn check(&mut self, name: &'static str, tol: f64, detail: String, worst: Result<f64, String>) {
        let (value, passed, detail) = match worst {
            Ok(v) => (v, v <= tol, detail),
            Err(e) => (f64::INFINITY, false, format!("{detail}: {e}")),
        };
        self.checks.push(Check {
            name,
            value,
            tolerance: Some(tol),
            passed: passed && value.is_finite(),
            detail,
        });
    }

    fn info(&mut self, name: &'static str, value: f64, detail: String) {
        self.checks.push(Check {
            name,
            value,
            tolerance: None,
            passed: true,
            detail,
        });
    }
}

fn worst<I: IntoIterator<Item = Result<f64, TrafficError>>>(it: I) -> Result<f64, String> {
    let mut w = 0.0f64;
    for r in it {
        let v = r.map_err(|e| e.to_string())?;
        if v.is_nan() {
            return Err("NaN".into());
        }
        w = w.max(v);
    }
    Ok(w)
}

fn poisson(x: f64, k: usize) -> f64 {
    (k as f64 * x.ln() - x - ln_gamma(k as f64 + 1.0)).exp()
}

fn weibull_sums(p1: &WeibullParams, p2: &WeibullParams, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let a = sample_weibull(p1, rng.sample(Open01)).expect("valid draw");
            let b = sample_weibull(p2, rng.sample(Open01)).expect("valid draw");
            a + b
        })
        .collect()
}

fn renewal_counts(p: &WeibullParams, t: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let mut clock = 0.0;
            let mut k = 0;
            loop {
                clock += sample_weibull(p, rng.sample(Open01)).expect("valid draw");
                if clock > t {
                    break k;
                }
                k += 1;
            }
        })
        .collect()
}

pub const MONTE_CARLO_SAMPLES: usize = 100_000;

/// Run every oracle against `imp`.
pub fn verify_math(imp: &MathImpl, seed: u64) -> VerifyReport {
    let mut s = Suite { checks: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parking = WeibullParams::PARKING;
    let vacant = WeibullParams::VACANT;
    let unit = WeibullParams { shape: 1.0, scale: 1.0 };

    // Raw moments against quadrature of y^(n/α) e^(-y) after y = (x/λ)^α.
    let cases = [(0.4, 3600.0), (0.7, 900.0), (1.5, 2.0)];
    let w = worst(cases.iter().flat_map(|&(a, l)| {
        (1..=4u32).map(move |n| {
            let p = WeibullParams { shape: a, scale: l };
            let e = n as f64 / a;
            let q = integrate_to_infinity(|y| (e * y.ln() - y).exp(), 0.0, 1e-12);
            let exact = l.powi(n as i32) * q.value;
            (imp.weibull_moment)(&p, n).map(|m| ((m - exact) / exact).abs())
        })
    }));
    s.check("weibull_moment", 1e-8, "relative error vs quadrature, n = 1..4".into(), w);

    // Sum moments: exact Erlang-2 values, then Monte Carlo for Table-1 traffic.
    let w = worst((1..=4u32).map(|n| {
        let exact = (2..=n + 1).map(f64::from).product::<f64>();
        (imp.sum_moment)(&unit, &unit, n).map(|m| ((m - exact) / exact).abs())
    }));
    s.check("sum_moment_erlang", 1e-12, "relative error vs (n+1)!".into(), w);

    let sums = weibull_sums(&parking, &vacant, MONTE_CARLO_SAMPLES, &mut rng);
    let w = worst((1..=2u32).map(|n| {
        let xs: Vec<f64> = sums.iter().map(|x| x.powi(n as i32)).collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        (imp.sum_moment)(&parking, &vacant, n).map(|exact| (exact - m).abs() / se)
    }));
    s.check("sum_moment_monte_carlo", 4.0, "deviation in standard errors, n = 1, 2".into(), w);

    // Moment matching.
    let fit = (imp.fit_sum_weibull)(&parking, &vacant);
    let w = fit
        .as_ref()
        .map(|f| f.residual_first.abs().max(f.residual_second.abs()))
        .map_err(|e| e.to_string());
    s.check("fit_sum_weibull_residual", 1e-8, "moment-equation residuals".into(), w);
    let heavy = fit.as_ref().map(|f| if f.params.shape > 0.0 && f.params.shape < 1.0 { 0.0 } else { 1.0 });
    s.check(
        "fit_sum_weibull_heavy_tail",
        0.0,
        fit.as_ref()
            .map(|f| format!("alpha = {:.6}, mu = {:.6}, lambda = {:.4}", f.params.shape, f.params.mu, f.params.scale))
            .unwrap_or_default(),
        heavy.map_err(|e| e.to_string()),
    );

    if let Ok(f) = &fit {
        let sp = f.params;
        let pdf = |x: f64| (imp.sum_pdf)(&sp, x).unwrap_or(f64::NAN);
        let total = integrate_to_infinity(|x| if x > 0.0 { pdf(x) } else { 0.0 }, 0.0, 1e-10);
        s.check(
            "sum_pdf_normalisation",
            1e-6,
            "|integral of density - 1|".into(),
            if total.value.is_finite() { Ok((total.value - 1.0).abs()) } else { Err("NaN density".into()) },
        );
        let w = worst([100.0, 1_000.0, 4_000.0, 20_000.0].into_iter().map(|x| {
            let q = integrate(|y| if y > 0.0 { pdf(y) } else { 0.0 }, 0.0, x, 1e-11);
            (imp.sum_cdf)(&sp, x).map(|c| (c - q.value).abs())
        }));
        s.check("sum_cdf_vs_density", 1e-6, "|F(x) - integral of f| at 4 points".into(), w);

        let d = EmpiricalDistribution::new(sums.clone()).expect("finite sums");
        let ks = ks_distance(&d, |x| (imp.sum_cdf)(&sp, x).unwrap_or(f64::NAN));
        s.info("sum_ks_table1", ks, format!("KS distance to {MONTE_CARLO_SAMPLES} Monte-Carlo sums"));
    }

    // Erlang-2: moment matching must land on the exact distribution.
    let w = (imp.fit_sum_weibull)(&unit, &unit).map_err(|e| e.to_string()).and_then(|f| {
        worst((0..=400).map(|i| {
            let x = i as f64 * 0.05;
            let exact = 1.0 - (-x).exp() * (1.0 + x);
            (imp.sum_cdf)(&f.params, x).map(|c| (c - exact).abs())
        }))
    });
    s.check("erlang2_sup_error", 0.01, "sup |F - Erlang-2| on [0, 20]".into(), w);

    // Renewal counts.
    let w = worst([0.5, 1.0, 2.0, 3.0].into_iter().flat_map(|x| {
        (0..=6).map(move |k| (imp.count_prob)(&unit, x, k, DEFAULT_J_MAX).map(|p| (p - poisson(x, k)).abs()))
    }));
    s.check("count_prob_poisson", 1e-6, "shape 1 vs Poisson pmf, k <= 6, t/scale <= 3".into(), w);

    let w = worst([450.0, 900.0, 2_700.0].into_iter().flat_map(|t| {
        let counts = renewal_counts(&vacant, t, MONTE_CARLO_SAMPLES, &mut rng);
        (0..=5usize)
            .map(|k| {
                let freq = counts.iter().filter(|&&c| c == k).count() as f64 / counts.len() as f64;
                (imp.count_prob)(&vacant, t, k, DEFAULT_J_MAX).map(|p| (p - freq).abs())
            })
            .collect::<Vec<_>>()
    }));
    s.check("count_prob_monte_carlo", 0.01, "(0.7, 900) vs simulated renewal counts".into(), w);

    let w = (0..=20usize)
        .map(|k| (imp.count_prob)(&vacant, 900.0, k, DEFAULT_J_MAX))
        .sum::<Result<f64, _>>()
        .map(|total| (total - 1.0).abs())
        .map_err(|e| e.to_string());
    s.check("count_prob_normalisation", 1e-6, "|sum over k <= 20 - 1|, (0.7, 900), t = 900".into(), w);

    VerifyReport { checks: s.checks }
}
