//! Empirical statistics over run outputs.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::network::NodeEnergy;
use crate::node_stack::InfoRecord;
use crate::scenario::Role;

/// Sorted, finite samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    samples: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(MetricsError::Degenerate(format!("non-finite sample {bad}")));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// Right-continuous ECDF: fraction of samples `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.len() as f64
    }

    /// Linear-interpolation quantile, `p` in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        self.samples[lo] + (h - lo as f64) * (self.samples[hi] - self.samples[lo])
    }
}

/// Fraction of samples strictly greater than `x`.
pub fn survival(d: &EmpiricalDistribution, x: f64) -> f64 {
    1.0 - d.ecdf(x)
}

/// Kolmogorov-Smirnov distance between `d` and a continuous CDF.
pub fn ks_distance(d: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> f64 {
    let n = d.len() as f64;
    d.samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeibullFit {
    pub shape: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub n: usize,
}

impl WeibullFit {
    /// Asymptotic standard errors of (shape, scale).
    pub fn standard_errors(&self) -> (f64, f64) {
        let n = self.n as f64;
        let k = self.shape;
        // Inverse Fisher information of the two-parameter Weibull.
        let se_k = (6.0 / (std::f64::consts::PI.powi(2)) * k * k / n).sqrt();
        let g = 1.0 - 0.577_215_664_901_532_9;
        let var_l = self.scale.powi(2) / (k * k * n) * (1.0 + 6.0 * g * g / std::f64::consts::PI.powi(2));
        (se_k, var_l.sqrt())
    }
}

pub const MIN_FIT_SAMPLES: usize = 50;
const SHAPE_TOL: f64 = 1e-9;

/// Maximum-likelihood Weibull fit. The shape solves the profile equation
/// `Σxᵏ ln x / Σxᵏ − 1/k − mean(ln x) = 0` by bracketed bisection.
pub fn fit_weibull_mle(d: &EmpiricalDistribution) -> Result<WeibullFit, MetricsError> {
    let n = d.len();
    if n < MIN_FIT_SAMPLES {
        return Err(MetricsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: n,
        });
    }
    let xs = d.samples();
    if xs[0] <= 0.0 {
        return Err(MetricsError::Degenerate(format!("non-positive sample {}", xs[0])));
    }
    let x_max = xs[n - 1];
    if xs[0] == x_max {
        return Err(MetricsError::Degenerate("all samples equal".into()));
    }
    let ln_y: Vec<f64> = xs.iter().map(|&x| (x / x_max).ln()).collect();
    let mean_ln = ln_y.iter().sum::<f64>() / n as f64;
    let g = |k: f64| {
        let (mut s0, mut s1) = (0.0, 0.0);
        for &l in &ln_y {
            let w = (k * l).exp();
            s0 += w;
            s1 += w * l;
        }
        s1 / s0 - 1.0 / k - mean_ln
    };

    let (mut lo, mut hi) = (0.5, 2.0);
    for _ in 0..200 {
        if g(lo) < 0.0 {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..200 {
        if g(hi) > 0.0 {
            break;
        }
        hi *= 2.0;
    }
    if !(g(lo) < 0.0 && g(hi) > 0.0) {
        return Err(MetricsError::NoConvergence);
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..200 {
        k = 0.5 * (lo + hi);
        let v = g(k);
        if v.abs() < SHAPE_TOL || hi - lo < 1e-15 * hi {
            break;
        }
        if v < 0.0 {
            lo = k;
        } else {
            hi = k;
        }
    }
    if g(k).abs() > SHAPE_TOL && hi - lo >= 1e-15 * hi {
        return Err(MetricsError::NoConvergence);
    }

    let mean_yk = ln_y.iter().map(|&l| (k * l).exp()).sum::<f64>() / n as f64;
    let scale = x_max * mean_yk.powf(1.0 / k);
    let nf = n as f64;
    let sum_ln_x = xs.iter().map(|x| x.ln()).sum::<f64>();
    let sum_pow = xs.iter().map(|&x| (x / scale).powf(k)).sum::<f64>();
    let log_likelihood = nf * k.ln() - nf * k * scale.ln() + (k - 1.0) * sum_ln_x - sum_pow;
    Ok(WeibullFit {
        shape: k,
        scale,
        log_likelihood,
        n,
    })
}

fn gaps(times: &[f64]) -> impl Iterator<Item = f64> + '_ {
    times.windows(2).map(|w| w[1] - w[0])
}

/// Gaps between consecutive events of the union of `groups`.
pub fn merge_interarrivals(groups: &[&[f64]]) -> Result<EmpiricalDistribution, MetricsError> {
    let mut all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    if all.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            needed: 2,
            got: all.len(),
        });
    }
    all.sort_by(f64::total_cmp);
    EmpiricalDistribution::new(gaps(&all).collect())
}

/// Each group's own interarrival gaps, pooled.
pub fn pooled_interarrivals(groups: &[&[f64]]) -> Result<EmpiricalDistribution, MetricsError> {
    let mut out = Vec::new();
    for g in groups {
        let mut t = g.to_vec();
        t.sort_by(f64::total_cmp);
        out.extend(gaps(&t));
    }
    if out.is_empty() {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
    }
    EmpiricalDistribution::new(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaySummary {
    pub distribution: Option<EmpiricalDistribution>,
    pub delivered: usize,
    pub undelivered: usize,
}

impl DelaySummary {
    pub fn delivery_ratio(&self) -> f64 {
        let total = self.delivered + self.undelivered;
        if total == 0 {
            1.0
        } else {
            self.delivered as f64 / total as f64
        }
    }

    pub fn percentile(&self, p: f64) -> Option<f64> {
        self.distribution.as_ref().map(|d| d.quantile(p))
    }
}

/// Delays of delivered records; undelivered ones only count as loss.
pub fn info_delay_cdf<'a>(records: impl IntoIterator<Item = &'a InfoRecord>) -> DelaySummary {
    let mut delays = Vec::new();
    let mut undelivered = 0;
    for r in records {
        match r.delay() {
            Some(d) => delays.push(d),
            None => undelivered += 1,
        }
    }
    let delivered = delays.len();
    DelaySummary {
        distribution: EmpiricalDistribution::new(delays).ok(),
        delivered,
        undelivered,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeStats {
    pub role: Role,
    pub count: usize,
    pub mean_days: f64,
    pub std_days: f64,
    pub min_days: f64,
    pub max_days: f64,
    /// Node with the shortest lifetime.
    pub min_node: usize,
}

/// Lifetime statistics for routers and sensors. The mains-powered gateway is
/// left out.
pub fn energy_summary(energy: &[NodeEnergy]) -> Vec<LifetimeStats> {
    [Role::Router, Role::Sensor]
        .into_iter()
        .filter_map(|role| {
            let nodes: Vec<(usize, f64)> = energy
                .iter()
                .filter(|e| e.role == role)
                .map(|e| (e.node, e.lifetime.days()))
                .collect();
            lifetime_stats(role, &nodes)
        })
        .collect()
}

fn lifetime_stats(role: Role, nodes: &[(usize, f64)]) -> Option<LifetimeStats> {
    let (&(first, _), n) = (nodes.first()?, nodes.len() as f64);
    let mean = nodes.iter().map(|x| x.1).sum::<f64>() / n;
    let var = if nodes.len() > 1 {
        nodes.iter().map(|x| (x.1 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let (min_node, min_days) = nodes
        .iter()
        .copied()
        .fold((first, f64::INFINITY), |acc, (id, d)| if d < acc.1 { (id, d) } else { acc });
    let max_days = nodes.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    Some(LifetimeStats {
        role,
        count: nodes.len(),
        mean_days: mean,
        std_days: var.sqrt(),
        min_days,
        max_days,
        min_node,
    })
}
