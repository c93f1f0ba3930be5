//! Topologies and scenario binding.

mod config;
mod topology;

pub use config::*;
pub use topology::*;

use crate::error::{ConfigError, Error};
use crate::mac::{
    auto_slot_budget, cycle_length, funneling_assign, member_demands, slots_needed,
    tdma_build_schedule, MacConfig, Protocol, SlotSchedule, SyncPlan, BACKOFF_UNIT, BEACON_BYTES,
    GRANT_BYTES, TURNAROUND,
};
use crate::node_stack::{build_gradient, GradientTable};
use crate::radio_phy::{tx_duration, RadioPowerProfile};

/// A validated scenario with everything derived from its topology: routes,
/// the resolved slot budget and the TDMA schedule.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub topology: Topology,
    pub gradient: GradientTable,
    pub mac: MacConfig,
    pub profile: RadioPowerProfile,
    /// Mean path loss between every pair of nodes, dB.
    pub loss_db: Vec<Vec<f64>>,
    pub sync: SyncPlan,
    /// Owners of the TDMA region (empty for CSMA and iQueue).
    pub schedule: SlotSchedule,
    /// Nodes that use the TDMA region once they have their assignment.
    pub tdma_member: Vec<bool>,
    pub t_cycle: f64,
}

impl Prepared {
    pub fn n_nodes(&self) -> usize {
        self.topology.n_nodes()
    }

    pub fn hop1_count(&self) -> usize {
        self.gradient.hops.iter().filter(|&&h| h == 1).count()
    }
}

fn parents_and_routers(topo: &Topology, g: &GradientTable) -> (Vec<Option<usize>>, Vec<bool>) {
    (
        g.next_hop.clone(),
        topo.nodes.iter().map(|n| n.role == Role::Router).collect(),
    )
}

impl ScenarioConfig {
    /// Every violation, collected at once.
    pub fn validate(&self) -> Result<(), Vec<ConfigError>> {
        self.prepare().map(|_| ()).map_err(|e| match e {
            Error::Config(v) => v,
            other => vec![ConfigError::Invalid {
                key: "scenario".into(),
                reason: other.to_string(),
            }],
        })
    }

    pub fn prepare(&self) -> Result<Prepared, Error> {
        let mut errs = self.field_errors();
        let profile = self.radio.profile();
        let topology = build_topology(self.topology.kind, self.topology.corner_penalty_db);
        let loss_db = topology.geometry.loss_matrix()?;
        let roles = topology.roles();
        let threshold = profile.sensitivity_dbm + self.topology.route_margin_db;
        let usable = |a: usize, b: usize| {
            a != b
                && (roles[a].is_ffd() || roles[b].is_ffd())
                && profile.tx_power_dbm - loss_db[a][b] >= threshold
        };
        let gradient = match build_gradient(topology.n_nodes(), GATEWAY, usable) {
            Ok(g) => g,
            Err(e) => {
                errs.push(e);
                return Err(Error::Config(errs));
            }
        };
        let (parent, is_router) = parents_and_routers(&topology, &gradient);
        let hops = &gradient.hops;
        let hop1 = hops.iter().filter(|&&h| h == 1).count();

        let all: Vec<usize> = (0..topology.n_nodes()).filter(|&n| n != GATEWAY).collect();
        let full_demand = member_demands(&all, hops, &parent, &is_router);
        let depth = self.mac.funneling_depth;
        let funnel_members: Vec<usize> =
            all.iter().copied().filter(|&n| hops[n] <= depth).collect();
        let funnel_demand = member_demands(&funnel_members, hops, &parent, &is_router);
        let (auto_csma, auto_tdma) = auto_slot_budget(
            self.mac.protocol,
            hop1,
            slots_needed(&full_demand),
            slots_needed(&funnel_demand),
        );
        let m = &self.mac;
        let mac = MacConfig {
            protocol: m.protocol,
            slot_duration: m.slot_duration,
            n_csma: m.n_csma.unwrap_or(auto_csma),
            n_tdma: m.n_tdma.unwrap_or(auto_tdma),
            t_gts: m.t_gts,
            t_inactive: m.t_inactive,
            funneling_depth: m.funneling_depth,
            backoff_window: m.backoff_window,
            max_retries: m.max_retries,
            queue_capacity: m.queue_capacity,
        };
        errs.extend(mac.validate());

        let ffds: Vec<(usize, usize)> = topology
            .nodes
            .iter()
            .filter(|n| n.role.is_ffd())
            .map(|n| (n.id, hops[n.id]))
            .collect();
        let sync = SyncPlan::new(&ffds, &profile);

        // Worst-case occupancy of a contention slot: sync window, the whole
        // backoff window, beacon, data and an iQueue grant exchange.
        let busiest = sync.window()
            + f64::from(mac.backoff_window) * BACKOFF_UNIT
            + tx_duration(BEACON_BYTES + mac.data_bytes(), &profile)
            + TURNAROUND
            + tx_duration(GRANT_BYTES, &profile);
        if mac.slot_duration.is_finite() && profile.data_rate_bps > 0.0 && busiest > mac.slot_duration {
            errs.push(ConfigError::Invalid {
                key: "mac.slot_duration".into(),
                reason: format!("{:.6} s does not fit one contention exchange ({busiest:.6} s)", mac.slot_duration),
            });
        }

        let mut tdma_member = vec![false; topology.n_nodes()];
        let mut schedule = SlotSchedule::empty(0);
        match mac.protocol {
            Protocol::Tdma => match tdma_build_schedule(&full_demand, mac.n_tdma) {
                Ok(s) => {
                    schedule = s;
                    all.iter().for_each(|&n| tdma_member[n] = true);
                }
                Err(e) => errs.push(e),
            },
            Protocol::Funneling => {
                match funneling_assign(hops, &parent, &is_router, depth, mac.n_tdma) {
                    Ok(a) => {
                        schedule = a.schedule;
                        a.members.iter().for_each(|&n| tdma_member[n] = true);
                        let outside = all.iter().any(|&n| !tdma_member[n]);
                        if outside && mac.n_csma == 0 {
                            errs.push(ConfigError::InsufficientSlots {
                                region: "csma",
                                needed: 1,
                                available: 0,
                            });
                        }
                    }
                    Err(e) => errs.push(e),
                }
            }
            Protocol::Iqueue | Protocol::Csma => {
                if mac.n_csma == 0 {
                    errs.push(ConfigError::InsufficientSlots {
                        region: "csma",
                        needed: 1,
                        available: 0,
                    });
                }
            }
        }

        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        let t_cycle = cycle_length(&mac);
        Ok(Prepared {
            config: self.clone(),
            topology,
            gradient,
            mac,
            profile,
            loss_db,
            sync,
            schedule,
            tdma_member,
            t_cycle,
        })
    }
}
