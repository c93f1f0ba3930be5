//! Funnelling-MAC: TDMA near the gateway, CSMA further out.

use serde::{Deserialize, Serialize};

use super::tdma::{member_demands, tdma_build_schedule, SlotSchedule};
use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessMode {
    Csma,
    Tdma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunnelAssignment {
    /// Mode of every node; the gateway (hop 0) is reported as TDMA-free CSMA
    /// and never transmits data.
    pub modes: Vec<AccessMode>,
    pub members: Vec<usize>,
    pub schedule: SlotSchedule,
}

/// Nodes with `1 <= hop <= depth` switch to TDMA and share the TDMA region;
/// every other node keeps contending in the CSMA region.
pub fn funneling_assign(
    hops: &[usize],
    parent: &[Option<usize>],
    is_router: &[bool],
    depth: usize,
    n_tdma: usize,
) -> Result<FunnelAssignment, ConfigError> {
    let members: Vec<usize> = (0..hops.len())
        .filter(|&n| hops[n] >= 1 && hops[n] <= depth)
        .collect();
    let modes = (0..hops.len())
        .map(|n| {
            if members.contains(&n) {
                AccessMode::Tdma
            } else {
                AccessMode::Csma
            }
        })
        .collect();
    let demands = member_demands(&members, hops, parent, is_router);
    let schedule = tdma_build_schedule(&demands, n_tdma)?;
    Ok(FunnelAssignment {
        modes,
        members,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(n: usize) -> (Vec<usize>, Vec<Option<usize>>, Vec<bool>) {
        let mut hops = vec![1; n + 1];
        hops[0] = 0;
        let mut parent = vec![Some(0); n + 1];
        parent[0] = None;
        (hops, parent, vec![false; n + 1])
    }

    #[test]
    fn one_hop_star_is_all_tdma() {
        let (h, p, r) = star(24);
        let a = funneling_assign(&h, &p, &r, 1, 24).unwrap();
        assert_eq!(a.members.len(), 24);
        assert!(a.modes[1..].iter().all(|m| *m == AccessMode::Tdma));
    }

    #[test]
    fn depth_zero_is_all_csma() {
        let (h, p, r) = star(24);
        let a = funneling_assign(&h, &p, &r, 0, 0).unwrap();
        assert!(a.members.is_empty());
        assert!(a.modes.iter().all(|m| *m == AccessMode::Csma));
        assert!(a.schedule.owners.is_empty());
    }

    #[test]
    fn max_depth_equals_full_tdma() {
        let parent = [None, Some(0), Some(1), Some(1), Some(0)];
        let hops = [0, 1, 2, 2, 1];
        let is_router = [false, true, false, false, false];
        let a = funneling_assign(&hops, &parent, &is_router, 2, 4).unwrap();
        let all: Vec<usize> = (1..5).collect();
        let full = tdma_build_schedule(
            &member_demands(&all, &hops, &parent, &is_router),
            4,
        )
        .unwrap();
        assert_eq!(a.schedule, full);
        assert_eq!(full.owners, vec![Some(2), Some(3), Some(1), Some(4)]);
    }

    #[test]
    fn overfull_region_is_an_error() {
        let (h, p, r) = star(10);
        assert!(matches!(
            funneling_assign(&h, &p, &r, 1, 5),
            Err(ConfigError::InsufficientSlots { .. })
        ));
    }
}
