use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Csma,
    Tdma,
    Funneling,
    Iqueue,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::Csma,
        Protocol::Tdma,
        Protocol::Funneling,
        Protocol::Iqueue,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Csma => "csma",
            Protocol::Tdma => "tdma",
            Protocol::Funneling => "funneling",
            Protocol::Iqueue => "iqueue",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csma" => Ok(Protocol::Csma),
            "tdma" => Ok(Protocol::Tdma),
            "funneling" | "funnelling" => Ok(Protocol::Funneling),
            "iqueue" => Ok(Protocol::Iqueue),
            _ => Err(ConfigError::UnknownProtocol(s.to_string())),
        }
    }
}

/// What a slot of the cycle is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Csma,
    Tdma,
    Vtdma,
}

// Frame sizes in bytes.
pub const DATA_BYTES: usize = 84;
pub const QUEUE_INDICATOR_BYTES: usize = 1;
pub const BEACON_BYTES: usize = 1;
pub const SYNC_BYTES: usize = 4;
pub const SIGNALING_BYTES: usize = 4;
pub const GRANT_BYTES: usize = 2;

/// Unit of the CSMA backoff and of listening guards, seconds.
pub const BACKOFF_UNIT: f64 = 320e-6;
/// Receive-to-transmit turnaround, seconds.
pub const TURNAROUND: f64 = 192e-6;

/// Resolved slot-frame configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacConfig {
    pub protocol: Protocol,
    /// Seconds.
    pub slot_duration: f64,
    pub n_csma: usize,
    pub n_tdma: usize,
    /// Seconds.
    pub t_gts: f64,
    /// Seconds.
    pub t_inactive: f64,
    /// Hops from the gateway inside which Funnelling nodes use TDMA.
    pub funneling_depth: usize,
    /// Backoff draws are uniform in `[0, backoff_window)` units.
    pub backoff_window: u32,
    pub max_retries: u32,
    pub queue_capacity: usize,
}

impl MacConfig {
    pub fn with_slots(protocol: Protocol, n_csma: usize, n_tdma: usize) -> Self {
        Self {
            protocol,
            slot_duration: 0.1,
            n_csma,
            n_tdma,
            t_gts: 0.0,
            t_inactive: 0.0,
            funneling_depth: 1,
            backoff_window: 16,
            max_retries: 5,
            queue_capacity: 64,
        }
    }

    pub fn n_slots(&self) -> usize {
        self.n_csma + self.n_tdma
    }

    /// Region of slot `s` within the cycle. CSMA slots come first.
    pub fn region(&self, s: usize) -> Region {
        match self.protocol {
            Protocol::Csma => Region::Csma,
            Protocol::Tdma => Region::Tdma,
            Protocol::Funneling if s < self.n_csma => Region::Csma,
            Protocol::Funneling => Region::Tdma,
            Protocol::Iqueue if s < self.n_csma => Region::Csma,
            Protocol::Iqueue => Region::Vtdma,
        }
    }

    /// Index of slot `s` within its TDMA/vTDMA region.
    pub fn region_index(&self, s: usize) -> usize {
        match self.region(s) {
            Region::Csma => s,
            Region::Tdma | Region::Vtdma => s - self.csma_slots_in_layout(),
        }
    }

    fn csma_slots_in_layout(&self) -> usize {
        match self.protocol {
            Protocol::Tdma => 0,
            _ => self.n_csma,
        }
    }

    pub fn data_bytes(&self) -> usize {
        match self.protocol {
            Protocol::Iqueue => DATA_BYTES + QUEUE_INDICATOR_BYTES,
            _ => DATA_BYTES,
        }
    }

    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let bad = |key: &str, reason: String| ConfigError::Invalid {
            key: format!("mac.{key}"),
            reason,
        };
        if !(self.slot_duration > 0.0 && self.slot_duration.is_finite()) {
            errs.push(bad("slot_duration", "must be positive".into()));
        }
        if !(self.t_gts >= 0.0 && self.t_inactive >= 0.0) {
            errs.push(bad("t_gts", "t_gts and t_inactive must be non-negative".into()));
        }
        if !(cycle_length(self) > 0.0) {
            errs.push(bad("n_csma", "the cycle must contain time".into()));
        }
        if self.protocol == Protocol::Csma && self.n_tdma != 0 {
            errs.push(bad("n_tdma", "plain CSMA has no TDMA region".into()));
        }
        if self.protocol == Protocol::Tdma && self.n_csma != 0 {
            errs.push(bad("n_csma", "plain TDMA has no CSMA region".into()));
        }
        if self.backoff_window == 0 {
            errs.push(bad("backoff_window", "must be at least 1".into()));
        }
        if self.queue_capacity == 0 {
            errs.push(bad("queue_capacity", "must be at least 1".into()));
        }
        errs
    }
}

/// `T_cycle = (n_csma + n_tdma) * s_D + T_GTS + T_inactive`.
pub fn cycle_length(cfg: &MacConfig) -> f64 {
    (cfg.n_csma + cfg.n_tdma) as f64 * cfg.slot_duration + cfg.t_gts + cfg.t_inactive
}

/// Slot budget shared by every protocol: `max(24, nodes at one hop)`.
pub fn base_slot_budget(hop1_count: usize) -> usize {
    hop1_count.max(24)
}

/// Default `(n_csma, n_tdma)` for a protocol.
///
/// `tdma_slots_needed` is the size of the full multi-hop schedule and
/// `funnel_slots_needed` that of the Funnelling member schedule.
pub fn auto_slot_budget(
    protocol: Protocol,
    hop1_count: usize,
    tdma_slots_needed: usize,
    funnel_slots_needed: usize,
) -> (usize, usize) {
    let base = base_slot_budget(hop1_count);
    match protocol {
        Protocol::Csma => (base, 0),
        Protocol::Tdma => (0, tdma_slots_needed),
        Protocol::Funneling => (base.saturating_sub(funnel_slots_needed), funnel_slots_needed),
        Protocol::Iqueue => (base - base / 3, base / 3),
    }
}
