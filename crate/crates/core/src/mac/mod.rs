//! Duty-cycled slotted MAC protocols sharing one slot-frame: CSMA, TDMA,
//! Funnelling-MAC and iQueue-MAC.

mod config;
pub mod csma;
pub mod funneling;
pub mod iqueue;
pub mod sync;
pub mod tdma;

pub use config::*;
pub use csma::{csma_contend, draw_backoff, resolve_with_sensing, ContentionOutcome, Fate};
pub use funneling::{funneling_assign, AccessMode, FunnelAssignment};
pub use iqueue::{queue_indicator, VtdmaAllocator};
pub use sync::SyncPlan;
pub use tdma::{member_demands, slots_needed, tdma_build_schedule, SlotDemand, SlotSchedule};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameKind {
    Data,
    Sync,
    Signaling,
    Grant,
    Beacon,
}

impl FrameKind {
    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Data => "data",
            FrameKind::Sync => "sync",
            FrameKind::Signaling => "signaling",
            FrameKind::Grant => "grant",
            FrameKind::Beacon => "beacon",
        }
    }
}
