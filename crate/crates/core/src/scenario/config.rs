//! Scenario file: TOML with `[topology] [mac] [traffic] [app] [radio] [run]`
//! sections. Every key is optional and defaults to the study's parameters;
//! unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::topology::TopologyKind;
use crate::error::{ConfigError, Error};
use crate::mac::Protocol;
use crate::node_stack::AppConfig;
use crate::radio_phy::{
    RadioPowerProfile, DEFAULT_BATTERY_MAH, DEFAULT_BATTERY_VOLTS, DEFAULT_CORNER_PENALTY_DB,
};
use crate::traffic_model::WeibullParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyKind,
    pub corner_penalty_db: f64,
    /// Links are usable for routing when the mean received power clears the
    /// sensitivity by this margin.
    pub route_margin_db: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            kind: TopologyKind::Crossroad,
            corner_penalty_db: DEFAULT_CORNER_PENALTY_DB,
            route_margin_db: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacSection {
    pub protocol: Protocol,
    pub slot_duration: f64,
    /// Derived from the topology when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_csma: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_tdma: Option<usize>,
    pub t_gts: f64,
    pub t_inactive: f64,
    pub funneling_depth: usize,
    pub backoff_window: u32,
    pub max_retries: u32,
    pub queue_capacity: usize,
}

impl Default for MacSection {
    fn default() -> Self {
        Self {
            protocol: Protocol::Csma,
            slot_duration: 0.1,
            n_csma: None,
            n_tdma: None,
            t_gts: 0.0,
            t_inactive: 0.0,
            funneling_depth: 1,
            backoff_window: 16,
            max_retries: 5,
            queue_capacity: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficSection {
    pub parking_shape: f64,
    pub parking_scale: f64,
    pub vacant_shape: f64,
    pub vacant_scale: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            parking_shape: WeibullParams::PARKING.shape,
            parking_scale: WeibullParams::PARKING.scale,
            vacant_shape: WeibullParams::VACANT.shape,
            vacant_scale: WeibullParams::VACANT.scale,
        }
    }
}

impl TrafficSection {
    pub fn parking(&self) -> WeibullParams {
        WeibullParams {
            shape: self.parking_shape,
            scale: self.parking_scale,
        }
    }

    pub fn vacant(&self) -> WeibullParams {
        WeibullParams {
            shape: self.vacant_shape,
            scale: self.vacant_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    pub p_tx_mw: f64,
    pub p_rx_mw: f64,
    pub p_cs_mw: f64,
    pub p_off_mw: f64,
    pub e_switch_mj: f64,
    pub tx_power_dbm: f64,
    pub sensitivity_dbm: f64,
    pub data_rate_bps: f64,
    /// Rayleigh block fading; when off every frame sees unit gain.
    pub fading: bool,
    pub battery_mah: f64,
    pub battery_volts: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        let p = RadioPowerProfile::default();
        Self {
            p_tx_mw: p.p_tx_mw,
            p_rx_mw: p.p_rx_mw,
            p_cs_mw: p.p_cs_mw,
            p_off_mw: p.p_off_mw,
            e_switch_mj: p.e_switch_mj,
            tx_power_dbm: p.tx_power_dbm,
            sensitivity_dbm: p.sensitivity_dbm,
            data_rate_bps: p.data_rate_bps,
            fading: true,
            battery_mah: DEFAULT_BATTERY_MAH,
            battery_volts: DEFAULT_BATTERY_VOLTS,
        }
    }
}

impl RadioSection {
    pub fn profile(&self) -> RadioPowerProfile {
        RadioPowerProfile {
            p_tx_mw: self.p_tx_mw,
            p_rx_mw: self.p_rx_mw,
            p_cs_mw: self.p_cs_mw,
            p_off_mw: self.p_off_mw,
            e_switch_mj: self.e_switch_mj,
            tx_power_dbm: self.tx_power_dbm,
            sensitivity_dbm: self.sensitivity_dbm,
            data_rate_bps: self.data_rate_bps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Simulated seconds per run.
    pub duration: f64,
    pub runs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            duration: 10_000.0,
            runs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologySection,
    pub mac: MacSection,
    pub traffic: TrafficSection,
    pub app: AppConfig,
    pub radio: RadioSection,
    pub run: RunSection,
}

impl ScenarioConfig {
    pub fn new(kind: TopologyKind, protocol: Protocol) -> Self {
        let mut c = Self::default();
        c.topology.kind = kind;
        c.mac.protocol = protocol;
        c
    }

    pub fn from_toml_str(s: &str) -> Result<Self, Error> {
        toml::from_str(s).map_err(|e| Error::from(ConfigError::Parse(e.message().to_string())))
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Checks that do not need the topology.
    pub(crate) fn field_errors(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let bad = |key: &str, reason: &str| ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.to_string(),
        };
        for (key, p) in [("traffic.parking", self.traffic.parking()), ("traffic.vacant", self.traffic.vacant())] {
            if p.validate().is_err() {
                errs.push(bad(key, "shape and scale must be positive and finite"));
            }
        }
        errs.extend(self.app.validate());
        errs.extend(self.radio.profile().validate());
        if !(self.radio.battery_mah > 0.0 && self.radio.battery_volts > 0.0) {
            errs.push(bad("radio.battery_mah", "battery capacity and voltage must be positive"));
        }
        if !(self.run.duration > 0.0 && self.run.duration.is_finite()) {
            errs.push(bad("run.duration", "must be positive"));
        }
        if self.run.runs == 0 {
            errs.push(bad("run.runs", "must be at least 1"));
        }
        if !self.topology.corner_penalty_db.is_finite() || self.topology.corner_penalty_db < 0.0 {
            errs.push(bad("topology.corner_penalty_db", "must be a non-negative number"));
        }
        if !self.topology.route_margin_db.is_finite() {
            errs.push(bad("topology.route_margin_db", "must be finite"));
        }
        errs
    }
}
