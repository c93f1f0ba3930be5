//! Discrete-event kernel: integer-nanosecond clock, (time, sequence) ordered
//! queue with cancellation, and per-(node, purpose) random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;

/// Virtual time in nanoseconds.
pub type SimTime = u64;

pub const NS_PER_SEC: f64 = 1e9;

pub fn secs_to_ns(s: f64) -> SimTime {
    (s * NS_PER_SEC).round() as SimTime
}

pub fn ns_to_secs(t: SimTime) -> f64 {
    t as f64 / NS_PER_SEC
}

/// Recipient of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Kernel,
    Node(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent<E> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub target: Target,
    pub payload: E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Queued<E>(SimEvent<E>);

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<E> Eq for Queued<E> {}
impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Queued<E> {
    // BinaryHeap is a max-heap; invert so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.fire_time, other.0.sequence).cmp(&(self.0.fire_time, self.0.sequence))
    }
}

pub struct Kernel<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Queued<E>>,
    cancelled: HashSet<u64>,
    delivered: u64,
}

impl<E> Default for Kernel<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Kernel<E> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            delivered: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Events delivered so far.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    /// Events still queued, including cancelled ones not yet skipped.
    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(
        &mut self,
        fire_time: SimTime,
        target: Target,
        payload: E,
    ) -> Result<EventHandle, EngineError> {
        if fire_time < self.now {
            return Err(EngineError::ScheduleInPast {
                at_ns: fire_time,
                now_ns: self.now,
            });
        }
        let sequence = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Queued(SimEvent {
            fire_time,
            sequence,
            target,
            payload,
        }));
        Ok(EventHandle(sequence))
    }

    pub fn schedule_in(
        &mut self,
        delay: SimTime,
        target: Target,
        payload: E,
    ) -> Result<EventHandle, EngineError> {
        self.schedule(self.now + delay, target, payload)
    }

    /// Returns false if the event already fired or was cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        let live = self.heap.iter().any(|q| q.0.sequence == handle.0);
        live && self.cancelled.insert(handle.0)
    }

    /// Pop the next live event with `fire_time <= t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: SimTime) -> Option<SimEvent<E>> {
        while let Some(top) = self.heap.peek() {
            if top.0.fire_time > t_end {
                return None;
            }
            let Queued(ev) = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&ev.sequence) {
                continue;
            }
            self.now = ev.fire_time;
            self.delivered += 1;
            return Some(ev);
        }
        None
    }

    /// Deliver every event due by `t_end` to `handler`, then set the clock to
    /// `t_end`. Returns the number of events delivered by this call.
    pub fn run_until<X, F>(&mut self, t_end: SimTime, mut handler: F) -> Result<u64, X>
    where
        X: From<EngineError>,
        F: FnMut(&mut Self, SimEvent<E>) -> Result<(), X>,
    {
        if t_end < self.now {
            return Err(EngineError::RunBackwards {
                t_end_ns: t_end,
                now_ns: self.now,
            }
            .into());
        }
        let start = self.delivered;
        while let Some(ev) = self.pop_until(t_end) {
            handler(self, ev)?;
        }
        self.now = t_end;
        Ok(self.delivered - start)
    }
}

// ============================================================================
// Random streams
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Traffic,
    Backoff,
    Fading,
    AppJitter,
}

impl Purpose {
    pub fn label(self) -> &'static str {
        match self {
            Purpose::Traffic => "traffic",
            Purpose::Backoff => "backoff",
            Purpose::Fading => "fading",
            Purpose::AppJitter => "app-jitter",
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Factory of independent streams keyed by `(master_seed, node, purpose)`.
/// A stream depends only on its own key, so adding nodes never shifts the
/// draws of existing ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    pub master_seed: u64,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, node: usize, purpose: Purpose) -> ChaCha8Rng {
        let mut state = splitmix64(self.master_seed)
            ^ splitmix64(node as u64 ^ 0x6e6f_6465)
            ^ fnv1a(purpose.label().as_bytes());
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }
}
