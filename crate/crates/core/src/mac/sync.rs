//! Synchronization window at the head of every cycle.
//!
//! Each FFD broadcasts a short SYN frame in its own sub-window, gateway
//! first and then routers by hop count, so a router relays timing (and the
//! acknowledgements and grants it piggybacks) after hearing its parent.

use super::config::{BACKOFF_UNIT, SYNC_BYTES};
use crate::radio_phy::{tx_duration, RadioPowerProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct SyncPlan {
    /// FFDs in broadcast order.
    pub order: Vec<usize>,
    /// Seconds per sub-window: SYN air time plus a listening guard.
    pub sub_window: f64,
    pub frame_time: f64,
}

impl SyncPlan {
    /// `ffds` are `(node, hop)` pairs.
    pub fn new(ffds: &[(usize, usize)], profile: &RadioPowerProfile) -> Self {
        let mut v = ffds.to_vec();
        v.sort_by_key(|&(n, h)| (h, n));
        let frame_time = tx_duration(SYNC_BYTES, profile);
        Self {
            order: v.into_iter().map(|(n, _)| n).collect(),
            sub_window: frame_time + BACKOFF_UNIT,
            frame_time,
        }
    }

    /// Length of the whole window; slot 0 data activity starts after it.
    pub fn window(&self) -> f64 {
        self.order.len() as f64 * self.sub_window
    }

    /// Offset of `ffd`'s SYN from the cycle start.
    pub fn offset_of(&self, ffd: usize) -> Option<f64> {
        self.order
            .iter()
            .position(|&n| n == ffd)
            .map(|i| i as f64 * self.sub_window)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gateway_then_routers_by_hop() {
        let p = RadioPowerProfile::default();
        let plan = SyncPlan::new(&[(2, 2), (0, 0), (1, 1), (3, 1)], &p);
        assert_eq!(plan.order, vec![0, 1, 3, 2]);
        assert_relative_eq!(plan.frame_time, 128e-6, max_relative = 1e-12);
        assert_relative_eq!(plan.sub_window, 448e-6, max_relative = 1e-12);
        assert_relative_eq!(plan.window(), 4.0 * 448e-6, max_relative = 1e-12);
        assert_relative_eq!(plan.offset_of(3).unwrap(), 2.0 * 448e-6, max_relative = 1e-12);
        assert_eq!(plan.offset_of(9), None);
    }
}
