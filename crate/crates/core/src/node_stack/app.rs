//! Hybrid periodic + event-driven reporting.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    /// Periodic report interval ω, seconds.
    pub period: f64,
    /// Piggyback threshold τ, seconds.
    pub threshold: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            period: 120.0,
            threshold: 30.0,
        }
    }
}

impl AppConfig {
    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        if !(self.period > 0.0 && self.period.is_finite()) {
            errs.push(ConfigError::Invalid {
                key: "app.period".into(),
                reason: "must be positive".into(),
            });
        }
        if !(self.threshold > 0.0) {
            errs.push(ConfigError::Invalid {
                key: "app.threshold".into(),
                reason: "must be positive".into(),
            });
        } else if self.threshold > self.period {
            errs.push(ConfigError::ThresholdExceedsPeriod {
                threshold: self.threshold,
                period: self.period,
            });
        }
        errs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoMode {
    Immediate,
    Piggybacked,
}

impl InfoMode {
    pub fn name(self) -> &'static str {
        match self {
            InfoMode::Immediate => "immediate",
            InfoMode::Piggybacked => "piggybacked",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppDecision {
    SendImmediate,
    PiggybackAt(f64),
}

/// Piggyback iff the next periodic report is strictly less than τ away.
pub fn app_on_state_change(t_now: f64, t_next: f64, cfg: &AppConfig) -> AppDecision {
    if (t_next - t_now).abs() < cfg.threshold {
        AppDecision::PiggybackAt(t_next)
    } else {
        AppDecision::SendImmediate
    }
}

/// First periodic fire strictly after `t` for a node with `phase` in `[0, ω)`.
pub fn next_periodic_fire(phase: f64, period: f64, t: f64) -> f64 {
    if t < phase {
        return phase;
    }
    let k = ((t - phase) / period).floor() + 1.0;
    let next = phase + k * period;
    // Guard against rounding landing on t itself.
    if next <= t {
        next + period
    } else {
        next
    }
}

/// One occupancy change and its journey to the gateway.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoRecord {
    pub sensor: usize,
    pub sensed_at: f64,
    /// When the application handed the information to the MAC.
    pub sent_at: f64,
    pub delivered_at: Option<f64>,
    pub mode: InfoMode,
    pub hops: usize,
    /// Transmission attempts of the carrying frame beyond the first, summed
    /// over hops.
    pub retries: u32,
}

impl InfoRecord {
    pub fn delay(&self) -> Option<f64> {
        self.delivered_at.map(|d| d - self.sensed_at)
    }
}

/// Chance that information reaches the gateway within the first duty cycle,
/// and the complementary tail mass, under light traffic:
/// `((ω − τ)/ω + T_cycle/ω, (τ − T_cycle)/ω)`.
pub fn delay_split_prediction(cfg: &AppConfig, t_cycle: f64) -> Result<(f64, f64), ConfigError> {
    if !(t_cycle < cfg.threshold) {
        return Err(ConfigError::Invalid {
            key: "t_cycle".into(),
            reason: format!(
                "the delay split assumes T_cycle < tau (T_cycle = {t_cycle}, tau = {})",
                cfg.threshold
            ),
        });
    }
    let p_tail = (cfg.threshold - t_cycle) / cfg.period;
    Ok((1.0 - p_tail, p_tail))
}
