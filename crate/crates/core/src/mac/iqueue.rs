//! iQueue-MAC gateway bookkeeping: queue indicators turn into vTDMA grants.

use serde::Serialize;

/// Queue indicator carried in the MAC header: pending frames behind the one
/// being sent, saturated to a byte.
pub fn queue_indicator(pending_after_current: usize) -> u8 {
    pending_after_current.min(255) as u8
}

/// First-come-first-served allocator of the vTDMA region of each cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VtdmaAllocator {
    grants: Vec<Option<usize>>,
    next_free: usize,
    /// `(node, slots still wanted)` in arrival order.
    deferred: Vec<(usize, usize)>,
}

impl VtdmaAllocator {
    pub fn new(n_slots: usize) -> Self {
        Self {
            grants: vec![None; n_slots],
            next_free: 0,
            deferred: Vec::new(),
        }
    }

    pub fn n_slots(&self) -> usize {
        self.grants.len()
    }

    pub fn owner(&self, slot: usize) -> Option<usize> {
        self.grants.get(slot).copied().flatten()
    }

    pub fn granted_to(&self, node: usize) -> usize {
        self.grants.iter().filter(|g| **g == Some(node)).count()
    }

    pub fn deferred(&self) -> &[(usize, usize)] {
        &self.deferred
    }

    fn take(&mut self, node: usize, want: usize) -> Vec<usize> {
        let n = want.min(self.grants.len() - self.next_free);
        let slots: Vec<usize> = (self.next_free..self.next_free + n).collect();
        for &s in &slots {
            self.grants[s] = Some(node);
        }
        self.next_free += n;
        slots
    }

    /// Clear the region for a new cycle and serve deferred demand first.
    /// Returns the grants announced in the cycle's sync beacon.
    pub fn start_cycle(&mut self) -> Vec<(usize, Vec<usize>)> {
        self.grants.iter_mut().for_each(|g| *g = None);
        self.next_free = 0;
        let pending = std::mem::take(&mut self.deferred);
        let mut out = Vec::new();
        for (node, want) in pending {
            let slots = self.take(node, want);
            if slots.len() < want {
                self.deferred.push((node, want - slots.len()));
            }
            if !slots.is_empty() {
                out.push((node, slots));
            }
        }
        out
    }

    /// A data frame from `node` carried `indicator`. Slots already granted to
    /// the node this cycle count toward it; a fresh request replaces any
    /// stale deferred demand.
    pub fn request(&mut self, node: usize, indicator: u8) -> Vec<usize> {
        self.deferred.retain(|(n, _)| *n != node);
        let want = usize::from(indicator).saturating_sub(self.granted_to(node));
        if want == 0 {
            return Vec::new();
        }
        let slots = self.take(node, want);
        if slots.len() < want {
            self.deferred.push((node, want - slots.len()));
        }
        slots
    }
}
