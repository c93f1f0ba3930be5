//! Link budget, Rayleigh block fading, collision resolution and radio energy
//! accounting.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Radio constants; the default is the CC2420-class profile of the study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioPowerProfile {
    pub p_tx_mw: f64,
    pub p_rx_mw: f64,
    pub p_cs_mw: f64,
    pub p_off_mw: f64,
    /// Energy of one radio state transition.
    pub e_switch_mj: f64,
    pub tx_power_dbm: f64,
    pub sensitivity_dbm: f64,
    pub data_rate_bps: f64,
}

impl Default for RadioPowerProfile {
    fn default() -> Self {
        Self {
            p_tx_mw: 65.7,
            p_rx_mw: 56.5,
            p_cs_mw: 55.8,
            p_off_mw: 0.03,
            e_switch_mj: 0.16425,
            tx_power_dbm: 3.0,
            sensitivity_dbm: -85.0,
            data_rate_bps: 250_000.0,
        }
    }
}

impl RadioPowerProfile {
    pub fn validate(&self) -> Vec<ConfigError> {
        let mut errs = Vec::new();
        let bad = |key: &str, reason: &str| ConfigError::Invalid {
            key: format!("radio.{key}"),
            reason: reason.to_string(),
        };
        if !(self.p_tx_mw >= self.p_rx_mw && self.p_rx_mw >= self.p_cs_mw) {
            errs.push(bad("p_tx_mw", "power levels must satisfy p_tx >= p_rx >= p_cs"));
        }
        if !(self.p_cs_mw > self.p_off_mw && self.p_off_mw > 0.0) {
            errs.push(bad("p_off_mw", "power levels must satisfy p_cs > p_off > 0"));
        }
        if !(self.e_switch_mj >= 0.0) {
            errs.push(bad("e_switch_mj", "must be non-negative"));
        }
        if !(self.data_rate_bps > 0.0 && self.data_rate_bps.is_finite()) {
            errs.push(bad("data_rate_bps", "must be positive"));
        }
        if !(self.tx_power_dbm.is_finite() && self.sensitivity_dbm.is_finite()) {
            errs.push(bad("sensitivity_dbm", "power levels must be finite"));
        }
        errs
    }

    pub fn power_mw(&self, state: RadioState) -> f64 {
        match state {
            RadioState::Tx => self.p_tx_mw,
            RadioState::Rx => self.p_rx_mw,
            RadioState::Cs => self.p_cs_mw,
            RadioState::Off => self.p_off_mw,
        }
    }
}

/// Air time of `bytes` at the profile's data rate, in seconds.
pub fn tx_duration(bytes: usize, profile: &RadioPowerProfile) -> f64 {
    bytes as f64 * 8.0 / profile.data_rate_bps
}

// ============================================================================
// Geometry and path loss
// ============================================================================

pub const DEFAULT_WAVELENGTH_M: f64 = 0.125;
pub const DEFAULT_CORNER_PENALTY_DB: f64 = 20.0;

/// Free-space loss `20 log10(4 pi d / wavelength)`.
pub fn free_space_loss_db(distance_m: f64, wavelength_m: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance_m / wavelength_m).log10()
}

pub type Point = (f64, f64);

fn dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Street intersection through which a radio path may bend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corner {
    pub position: Point,
    pub streets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkGeometry {
    pub positions: Vec<Option<Point>>,
    /// Street segments each node stands on; nodes at an intersection list
    /// every street through it.
    pub streets: Vec<Vec<usize>>,
    pub corners: Vec<Corner>,
    pub wavelength_m: f64,
    pub corner_penalty_db: f64,
}

fn share_street(a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|s| b.contains(s))
}

impl LinkGeometry {
    fn placed(&self, n: usize) -> Result<Point, ConfigError> {
        self.positions
            .get(n)
            .copied()
            .flatten()
            .ok_or(ConfigError::UnplacedNode(n))
    }

    /// Loss between two nodes. Nodes sharing a street see free-space loss;
    /// otherwise the path runs along streets through intersections and pays
    /// free-space loss over the bent length plus a fixed penalty per corner,
    /// minimised over the number of corners.
    pub fn path_loss_db(&self, a: usize, b: usize) -> Result<f64, ConfigError> {
        let (pa, pb) = (self.placed(a)?, self.placed(b)?);
        if a == b || dist(pa, pb) == 0.0 {
            return Err(ConfigError::CoLocated(a, b));
        }
        let (sa, sb) = (&self.streets[a], &self.streets[b]);
        if share_street(sa, sb) {
            return Ok(free_space_loss_db(dist(pa, pb), self.wavelength_m));
        }
        let nc = self.corners.len();
        let mut best = f64::INFINITY;
        // reach[c]: shortest along-street length from a to corner c using the
        // current number of corners.
        let mut reach: Vec<f64> = self
            .corners
            .iter()
            .map(|c| {
                if share_street(sa, &c.streets) {
                    dist(pa, c.position)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        for k in 1..=nc {
            for (c, corner) in self.corners.iter().enumerate() {
                if reach[c].is_finite() && share_street(&corner.streets, sb) {
                    let len = reach[c] + dist(corner.position, pb);
                    let loss = free_space_loss_db(len, self.wavelength_m)
                        + k as f64 * self.corner_penalty_db;
                    best = best.min(loss);
                }
            }
            let mut next = vec![f64::INFINITY; nc];
            for (c, from) in self.corners.iter().enumerate() {
                if !reach[c].is_finite() {
                    continue;
                }
                for (d, to) in self.corners.iter().enumerate() {
                    if c != d && share_street(&from.streets, &to.streets) {
                        next[d] = next[d].min(reach[c] + dist(from.position, to.position));
                    }
                }
            }
            reach = next;
        }
        Ok(best)
    }

    /// Full pairwise loss matrix; the diagonal is `+inf`.
    pub fn loss_matrix(&self) -> Result<Vec<Vec<f64>>, ConfigError> {
        let n = self.positions.len();
        let mut m = vec![vec![f64::INFINITY; n]; n];
        for a in 0..n {
            for b in (a + 1)..n {
                let l = self.path_loss_db(a, b)?;
                m[a][b] = l;
                m[b][a] = l;
            }
        }
        Ok(m)
    }
}

// ============================================================================
// Link outcome and collisions
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkOutcome {
    Delivered,
    Lost,
}

/// Unit-mean exponential power gain from a uniform draw in (0, 1).
pub fn rayleigh_gain(u: f64) -> f64 {
    -u.ln()
}

/// Received power with fading gain `E = -ln u`.
pub fn received_power_dbm(tx_dbm: f64, loss_db: f64, u: f64) -> f64 {
    tx_dbm - loss_db + 10.0 * rayleigh_gain(u).log10()
}

/// Delivered iff the faded received power reaches the sensitivity
/// (boundary inclusive). Collisions are resolved separately.
pub fn link_success(tx_dbm: f64, loss_db: f64, u: f64, sensitivity_dbm: f64) -> LinkOutcome {
    if tx_dbm - loss_db == f64::INFINITY {
        return LinkOutcome::Delivered;
    }
    if received_power_dbm(tx_dbm, loss_db, u) >= sensitivity_dbm {
        LinkOutcome::Delivered
    } else {
        LinkOutcome::Lost
    }
}

/// A frame as seen at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxFrame {
    pub start: f64,
    pub end: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RxOutcome {
    Delivered,
    Collided,
    BelowSensitivity,
}

pub fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// No capture: any two above-sensitivity frames that overlap in time at the
/// receiver destroy each other. Frames below sensitivity are never decoded
/// and never interfere.
pub fn detect_collision(frames: &[RxFrame], sensitivity_dbm: f64) -> Vec<RxOutcome> {
    let audible: Vec<bool> = frames.iter().map(|f| f.power_dbm >= sensitivity_dbm).collect();
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if !audible[i] {
                return RxOutcome::BelowSensitivity;
            }
            let hit = frames.iter().enumerate().any(|(j, g)| {
                j != i && audible[j] && overlaps((f.start, f.end), (g.start, g.end))
            });
            if hit {
                RxOutcome::Collided
            } else {
                RxOutcome::Delivered
            }
        })
        .collect()
}

// ============================================================================
// Energy
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadioState {
    Tx,
    Rx,
    Cs,
    Off,
}

/// Per-node energy split by radio state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub tx_s: f64,
    pub rx_s: f64,
    pub cs_s: f64,
    pub off_s: f64,
    pub tx_mj: f64,
    pub rx_mj: f64,
    pub cs_mj: f64,
    pub off_mj: f64,
    pub switch_count: u64,
    pub switch_mj: f64,
}

impl Default for EnergyLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self {
            tx_s: 0.0,
            rx_s: 0.0,
            cs_s: 0.0,
            off_s: 0.0,
            tx_mj: 0.0,
            rx_mj: 0.0,
            cs_mj: 0.0,
            off_mj: 0.0,
            switch_count: 0,
            switch_mj: 0.0,
        }
    }

    pub fn account_state(&mut self, state: RadioState, duration_s: f64, p: &RadioPowerProfile) {
        debug_assert!(duration_s >= 0.0, "negative dwell {duration_s}");
        let d = duration_s.max(0.0);
        let mj = d * p.power_mw(state);
        match state {
            RadioState::Tx => {
                self.tx_s += d;
                self.tx_mj += mj;
            }
            RadioState::Rx => {
                self.rx_s += d;
                self.rx_mj += mj;
            }
            RadioState::Cs => {
                self.cs_s += d;
                self.cs_mj += mj;
            }
            RadioState::Off => {
                self.off_s += d;
                self.off_mj += mj;
            }
        }
    }

    pub fn account_switch(&mut self, p: &RadioPowerProfile) {
        self.switch_count += 1;
        self.switch_mj += p.e_switch_mj;
    }

    /// One wake-up from off through `segments` and back to off. Every change
    /// of state, including leaving and re-entering off, costs one switch.
    pub fn account_burst(&mut self, segments: &[(RadioState, f64)], p: &RadioPowerProfile) {
        let mut current = RadioState::Off;
        for &(state, d) in segments {
            if state != current {
                self.account_switch(p);
                current = state;
            }
            if state == RadioState::Off {
                // Off dwell inside a burst is folded in at finalize.
                continue;
            }
            self.account_state(state, d, p);
        }
        if current != RadioState::Off {
            self.account_switch(p);
        }
    }

    pub fn active_s(&self) -> f64 {
        self.tx_s + self.rx_s + self.cs_s
    }

    /// Charge the remainder of `span_s` not spent active to the off state.
    pub fn finalize(&mut self, span_s: f64, p: &RadioPowerProfile) {
        let off = (span_s - self.active_s() - self.off_s).max(0.0);
        self.account_state(RadioState::Off, off, p);
    }

    pub fn total_mj(&self) -> f64 {
        self.tx_mj + self.rx_mj + self.cs_mj + self.off_mj + self.switch_mj
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Lifetime {
    Days(f64),
    /// Zero consumption over the observed span.
    Unbounded,
}

impl Lifetime {
    pub fn days(self) -> f64 {
        match self {
            Lifetime::Days(d) => d,
            Lifetime::Unbounded => f64::INFINITY,
        }
    }
}

pub const DEFAULT_BATTERY_MAH: f64 = 6300.0;
pub const DEFAULT_BATTERY_VOLTS: f64 = 3.0;

/// Battery energy divided by the mean power drawn over `sim_span_s`.
pub fn lifetime_estimate(
    ledger: &EnergyLedger,
    sim_span_s: f64,
    battery_mah: f64,
    battery_volts: f64,
) -> Lifetime {
    let total_j = ledger.total_mj() / 1000.0;
    if !(total_j > 0.0) || !(sim_span_s > 0.0) {
        return Lifetime::Unbounded;
    }
    let battery_j = battery_mah / 1000.0 * battery_volts * 3600.0;
    Lifetime::Days(battery_j / (total_j / sim_span_s) / 86_400.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::distr::Open01;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_geometry(xs: &[f64]) -> LinkGeometry {
        LinkGeometry {
            positions: xs.iter().map(|&x| Some((x, 0.0))).collect(),
            streets: xs.iter().map(|_| vec![0]).collect(),
            corners: vec![],
            wavelength_m: DEFAULT_WAVELENGTH_M,
            corner_penalty_db: DEFAULT_CORNER_PENALTY_DB,
        }
    }

    #[test]
    fn air_times() {
        let p = RadioPowerProfile::default();
        assert_relative_eq!(tx_duration(84, &p), 2.688e-3, max_relative = 1e-12);
        assert_relative_eq!(tx_duration(1, &p), 32e-6, max_relative = 1e-12);
        assert_relative_eq!(tx_duration(85, &p), 2.720e-3, max_relative = 1e-12);
    }

    #[test]
    fn friis_at_one_metre() {
        let g = line_geometry(&[0.0, 1.0, 2.0]);
        let l1 = g.path_loss_db(0, 1).unwrap();
        assert_relative_eq!(l1, 40.045_997, epsilon = 1e-6);
        let l2 = g.path_loss_db(0, 2).unwrap();
        assert_relative_eq!(l2 - l1, 20.0 * 2f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn one_corner_adds_the_penalty() {
        // Node 1 on street 0 at 3 m, node 2 on street 1 at 4 m, corner at the
        // origin: bent length 7 m.
        let g = LinkGeometry {
            positions: vec![Some((0.0, 0.0)), Some((3.0, 0.0)), Some((0.0, 4.0)), Some((7.0, 0.0))],
            streets: vec![vec![0, 1], vec![0], vec![1], vec![0]],
            corners: vec![Corner {
                position: (0.0, 0.0),
                streets: vec![0, 1],
            }],
            wavelength_m: DEFAULT_WAVELENGTH_M,
            corner_penalty_db: DEFAULT_CORNER_PENALTY_DB,
        };
        let bent = g.path_loss_db(1, 2).unwrap();
        let los = g.path_loss_db(0, 3).unwrap();
        assert_relative_eq!(bent, los + 20.0, epsilon = 1e-12);
    }

    #[test]
    fn two_corner_paths_are_found() {
        // A U-shaped route: street 0 (y=0), street 1 (x=10), street 2 (y=10).
        let g = LinkGeometry {
            positions: vec![Some((0.0, 0.0)), Some((0.0, 10.0))],
            streets: vec![vec![0], vec![2]],
            corners: vec![
                Corner { position: (10.0, 0.0), streets: vec![0, 1] },
                Corner { position: (10.0, 10.0), streets: vec![1, 2] },
            ],
            wavelength_m: DEFAULT_WAVELENGTH_M,
            corner_penalty_db: 20.0,
        };
        let expected = free_space_loss_db(30.0, DEFAULT_WAVELENGTH_M) + 40.0;
        assert_relative_eq!(g.path_loss_db(0, 1).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn unplaced_and_colocated_nodes() {
        let mut g = line_geometry(&[0.0, 0.0, 5.0]);
        assert_eq!(g.path_loss_db(0, 1), Err(ConfigError::CoLocated(0, 1)));
        g.positions[2] = None;
        assert_eq!(g.path_loss_db(0, 2), Err(ConfigError::UnplacedNode(2)));
    }

    #[test]
    fn link_boundary_is_inclusive() {
        // u = e^-1 gives unit gain.
        let u = (-1.0f64).exp();
        assert_eq!(link_success(3.0, 88.0, u, -85.0), LinkOutcome::Delivered);
        assert_eq!(link_success(3.0, 88.0 + 1e-9, u, -85.0), LinkOutcome::Lost);
        assert_eq!(
            link_success(f64::INFINITY, 0.0, 0.999_999, -85.0),
            LinkOutcome::Delivered
        );
    }

    #[test]
    fn ten_db_margin_delivery_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let ok = (0..n)
            .filter(|_| link_success(0.0, 0.0, rng.sample(Open01), -10.0) == LinkOutcome::Delivered)
            .count();
        let ratio = ok as f64 / n as f64;
        assert!((ratio - (-0.1f64).exp()).abs() < 0.005, "{ratio}");
    }

    #[test]
    fn collision_cases() {
        let f = |s, e| RxFrame { start: s, end: e, power_dbm: -50.0 };
        assert_eq!(detect_collision(&[f(0.0, 1.0)], -85.0), vec![RxOutcome::Delivered]);
        assert_eq!(
            detect_collision(&[f(0.0, 1.0), f(0.0, 1.0)], -85.0),
            vec![RxOutcome::Collided, RxOutcome::Collided]
        );
        assert_eq!(
            detect_collision(&[f(0.0, 1.0), f(0.5, 1.5), f(2.0, 3.0)], -85.0),
            vec![RxOutcome::Collided, RxOutcome::Collided, RxOutcome::Delivered]
        );
        let weak = RxFrame { power_dbm: -90.0, ..f(0.0, 1.0) };
        assert_eq!(
            detect_collision(&[f(0.0, 1.0), weak], -85.0),
            vec![RxOutcome::Delivered, RxOutcome::BelowSensitivity]
        );
        // Touching end points do not overlap.
        assert_eq!(
            detect_collision(&[f(0.0, 1.0), f(1.0, 2.0)], -85.0),
            vec![RxOutcome::Delivered, RxOutcome::Delivered]
        );
    }

    #[test]
    fn energy_arithmetic() {
        let p = RadioPowerProfile::default();
        let mut l = EnergyLedger::new();
        l.account_state(RadioState::Rx, 1.0, &p);
        assert_relative_eq!(l.total_mj(), 56.5, max_relative = 1e-12);

        let mut l = EnergyLedger::new();
        l.account_state(RadioState::Off, 3600.0, &p);
        assert_relative_eq!(l.total_mj(), 108.0, max_relative = 1e-12);

        let mut l = EnergyLedger::new();
        l.account_burst(&[(RadioState::Rx, 0.0)], &p);
        assert_eq!(l.switch_count, 2);
        assert_relative_eq!(l.total_mj(), 0.3285, max_relative = 1e-12);
    }

    #[test]
    fn burst_counts_every_state_change() {
        let p = RadioPowerProfile::default();
        let mut l = EnergyLedger::new();
        l.account_burst(
            &[(RadioState::Cs, 1e-3), (RadioState::Cs, 1e-3), (RadioState::Tx, 2e-3), (RadioState::Rx, 1e-3)],
            &p,
        );
        assert_eq!(l.switch_count, 4);
        assert_relative_eq!(l.cs_s, 2e-3, max_relative = 1e-12);
    }

    #[test]
    fn lifetimes() {
        let p = RadioPowerProfile::default();
        let mut off = EnergyLedger::new();
        off.finalize(1000.0, &p);
        let d = lifetime_estimate(&off, 1000.0, 6300.0, 3.0).days();
        assert_relative_eq!(d, 68040.0 / 3e-5 / 86400.0, max_relative = 1e-12);
        assert!((d - 26_250.0).abs() < 1.0);

        let mut rx = EnergyLedger::new();
        rx.account_state(RadioState::Rx, 1000.0, &p);
        let d_rx = lifetime_estimate(&rx, 1000.0, 6300.0, 3.0).days();
        assert!((d_rx - 13.94).abs() < 0.01, "{d_rx}");
        let d2 = lifetime_estimate(&rx, 1000.0, 12600.0, 3.0).days();
        assert_relative_eq!(d2, 2.0 * d_rx, max_relative = 1e-12);

        assert_eq!(lifetime_estimate(&EnergyLedger::new(), 10.0, 6300.0, 3.0), Lifetime::Unbounded);
    }

    #[test]
    fn default_profile_is_valid() {
        assert!(RadioPowerProfile::default().validate().is_empty());
        let bad = RadioPowerProfile { p_off_mw: 0.0, ..Default::default() };
        assert_eq!(bad.validate().len(), 1);
    }

    proptest! {
        #[test]
        fn collisions_match_brute_force(
            raw in proptest::collection::vec((0u32..20, 1u32..6, any::<bool>()), 1..7)
        ) {
            let frames: Vec<RxFrame> = raw.iter().map(|&(s, len, strong)| RxFrame {
                start: f64::from(s),
                end: f64::from(s + len),
                power_dbm: if strong { -60.0 } else { -95.0 },
            }).collect();
            let out = detect_collision(&frames, -85.0);
            for (i, f) in frames.iter().enumerate() {
                let expected = if f.power_dbm < -85.0 {
                    RxOutcome::BelowSensitivity
                } else {
                    let mut hit = false;
                    for (j, g) in frames.iter().enumerate() {
                        if i == j || g.power_dbm < -85.0 { continue; }
                        let lo = f.start.max(g.start);
                        let hi = f.end.min(g.end);
                        if lo < hi { hit = true; }
                    }
                    if hit { RxOutcome::Collided } else { RxOutcome::Delivered }
                };
                prop_assert_eq!(out[i], expected);
            }
            // Relabeling invariance.
            let mut rev = frames.clone();
            rev.reverse();
            let mut out_rev = detect_collision(&rev, -85.0);
            out_rev.reverse();
            prop_assert_eq!(out, out_rev);
        }

        #[test]
        fn ledger_is_monotone(steps in proptest::collection::vec((0usize..4, 0.0f64..5.0), 1..50)) {
            let p = RadioPowerProfile::default();
            let mut l = EnergyLedger::new();
            let mut last = 0.0;
            for (s, d) in steps {
                let state = [RadioState::Tx, RadioState::Rx, RadioState::Cs, RadioState::Off][s];
                l.account_burst(&[(state, d)], &p);
                prop_assert!(l.total_mj() >= last);
                last = l.total_mj();
            }
            let expected = l.tx_s * p.p_tx_mw + l.rx_s * p.p_rx_mw + l.cs_s * p.p_cs_mw
                + l.off_s * p.p_off_mw + l.switch_count as f64 * p.e_switch_mj;
            prop_assert!((l.total_mj() - expected).abs() <= 1e-9 * expected.max(1.0));
        }
    }
}
