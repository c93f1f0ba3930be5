//! Coordinator-built TDMA schedules.

use serde::Serialize;

use crate::error::ConfigError;

/// Slot demand of one schedule member.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotDemand {
    pub node: usize,
    pub hop: usize,
    pub slots: usize,
}

/// Owner of every slot of a TDMA (or vTDMA) region; `None` idles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotSchedule {
    pub owners: Vec<Option<usize>>,
}

impl SlotSchedule {
    pub fn empty(n_slots: usize) -> Self {
        Self {
            owners: vec![None; n_slots],
        }
    }

    pub fn owner(&self, region_slot: usize) -> Option<usize> {
        self.owners.get(region_slot).copied().flatten()
    }

    pub fn slots_of(&self, node: usize) -> Vec<usize> {
        self.owners
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == Some(node))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn assigned(&self) -> usize {
        self.owners.iter().filter(|o| o.is_some()).count()
    }
}

pub fn slots_needed(demands: &[SlotDemand]) -> usize {
    demands.iter().map(|d| d.slots).sum()
}

/// Lay out consecutive slots per member, deepest hop first and by node id
/// within a hop, so forwarded frames can move toward the gateway within one
/// cycle.
pub fn tdma_build_schedule(
    demands: &[SlotDemand],
    n_slots: usize,
) -> Result<SlotSchedule, ConfigError> {
    let needed = slots_needed(demands);
    if needed > n_slots {
        return Err(ConfigError::InsufficientSlots {
            region: "tdma",
            needed,
            available: n_slots,
        });
    }
    let mut order = demands.to_vec();
    order.sort_by(|a, b| b.hop.cmp(&a.hop).then(a.node.cmp(&b.node)));
    let mut owners = Vec::with_capacity(n_slots);
    for d in &order {
        owners.extend(std::iter::repeat_n(Some(d.node), d.slots));
    }
    owners.resize(n_slots, None);
    Ok(SlotSchedule { owners })
}

/// Demands for a member set: one slot per member, plus one for every member
/// router downstream of a member router so each routed region gets its own
/// forwarding slot.
///
/// `parent[n]` is the next hop of `n` (`None` for the gateway).
pub fn member_demands(
    members: &[usize],
    hops: &[usize],
    parent: &[Option<usize>],
    is_router: &[bool],
) -> Vec<SlotDemand> {
    let member = |n: usize| members.contains(&n);
    members
        .iter()
        .map(|&n| {
            let mut slots = 1;
            if is_router[n] {
                for (r, _) in is_router.iter().enumerate().filter(|(r, &x)| x && *r != n) {
                    if !member(r) {
                        continue;
                    }
                    let mut cur = parent[r];
                    while let Some(p) = cur {
                        if p == n {
                            slots += 1;
                            break;
                        }
                        cur = parent[p];
                    }
                }
            }
            SlotDemand {
                node: n,
                hop: hops[n],
                slots,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hop_schedule_is_id_ordered() {
        let demands: Vec<_> = (1..=24)
            .map(|n| SlotDemand { node: n, hop: 1, slots: 1 })
            .collect();
        let s = tdma_build_schedule(&demands, 24).unwrap();
        for i in 0..24 {
            assert_eq!(s.owner(i), Some(i + 1));
        }
    }

    #[test]
    fn deeper_nodes_go_first() {
        let demands = [
            SlotDemand { node: 1, hop: 1, slots: 2 },
            SlotDemand { node: 5, hop: 2, slots: 1 },
            SlotDemand { node: 3, hop: 2, slots: 1 },
        ];
        let s = tdma_build_schedule(&demands, 6).unwrap();
        assert_eq!(s.owners, vec![Some(3), Some(5), Some(1), Some(1), None, None]);
        assert_eq!(s.slots_of(1), vec![2, 3]);
        assert_eq!(s.assigned(), 4);
    }

    #[test]
    fn too_many_members() {
        let demands: Vec<_> = (0..30).map(|n| SlotDemand { node: n, hop: 1, slots: 1 }).collect();
        let err = tdma_build_schedule(&demands, 24).unwrap_err();
        assert_eq!(
            err,
            ConfigError::InsufficientSlots { region: "tdma", needed: 30, available: 24 }
        );
        assert!(err.to_string().contains("insufficient slots"));
    }

    #[test]
    fn router_chain_demands() {
        // 0 gateway; 1 -> 0; 2 -> 1; 3 -> 2; sensor 4 -> 1
        let parent = [None, Some(0), Some(1), Some(2), Some(1)];
        let hops = [0, 1, 2, 3, 2];
        let is_router = [false, true, true, true, false];
        let d = member_demands(&[1, 2, 3, 4], &hops, &parent, &is_router);
        let slots: Vec<_> = d.iter().map(|x| (x.node, x.slots)).collect();
        assert_eq!(slots, vec![(1, 3), (2, 2), (3, 1), (4, 1)]);
        // Non-member downstream routers do not add slots.
        let d = member_demands(&[1, 4], &hops, &parent, &is_router);
        assert_eq!(d[0].slots, 1);
    }
}
