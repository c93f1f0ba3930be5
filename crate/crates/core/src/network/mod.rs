//! One simulation run of a prepared scenario.
//!
//! The kernel fires a cycle-start event (synchronization, acknowledgements,
//! grants) and one event per slot. Each slot is resolved as a unit with
//! sub-slot timing: backoff, carrier sense, overlaps at each receiver and the
//! radio state sequence every awake node goes through.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::distr::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mac::{
    draw_backoff, queue_indicator, resolve_with_sensing, Fate, FrameKind, Protocol, Region,
    VtdmaAllocator, BACKOFF_UNIT, BEACON_BYTES, GRANT_BYTES, SIGNALING_BYTES, TURNAROUND,
};
use crate::node_stack::{app_on_state_change, AppDecision, InfoMode, InfoRecord};
use crate::radio_phy::{
    lifetime_estimate, link_success, overlaps, tx_duration, EnergyLedger, Lifetime, LinkOutcome,
    RadioState,
};
use crate::scenario::{Prepared, Role, TopologyKind, GATEWAY};
use crate::sim_engine::{ns_to_secs, secs_to_ns, Kernel, Purpose, RngStreams, SimEvent, SimTime, Target};
use crate::traffic_model::{draw_initial_state, generate_occupancy_timeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Delivered,
    Collided,
    /// Faded below sensitivity, or the receiver was itself transmitting.
    Lost,
    /// Discarded by the sender: retries exhausted or queue full.
    Dropped,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Delivered => "delivered",
            Outcome::Collided => "collided",
            Outcome::Lost => "lost",
            Outcome::Dropped => "dropped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameTrace {
    pub origin: usize,
    pub src: usize,
    pub dst: usize,
    pub kind: FrameKind,
    pub gen_time: f64,
    pub tx_time: f64,
    pub rx_time: Option<f64>,
    pub outcome: Outcome,
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeEnergy {
    pub node: usize,
    pub role: Role,
    pub ledger: EnergyLedger,
    pub lifetime: Lifetime,
}

/// An occupancy change at a sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensingEvent {
    pub time: f64,
    pub origin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub topology: TopologyKind,
    pub protocol: Protocol,
    pub seed: u64,
    pub duration: f64,
    pub t_cycle: f64,
    pub n_csma: usize,
    pub n_tdma: usize,
    pub events: u64,
    pub frames: Vec<FrameTrace>,
    pub records: Vec<InfoRecord>,
    pub energy: Vec<NodeEnergy>,
    pub sensing: Vec<SensingEvent>,
}

impl RunOutput {
    pub fn count_outcome(&self, kind: FrameKind, outcome: Outcome) -> usize {
        self.frames
            .iter()
            .filter(|f| f.kind == kind && f.outcome == outcome)
            .count()
    }
}

#[derive(Debug, Clone)]
struct Frame {
    uid: u64,
    origin: usize,
    gen_time: f64,
    records: Vec<usize>,
    retries: u32,
    /// Retries spent on earlier hops.
    path_retries: u32,
}

#[derive(Debug)]
struct InFlight {
    frame: Frame,
    delivered: bool,
}

struct NodeState {
    role: Role,
    hop: usize,
    parent: Option<usize>,
    children: Vec<usize>,
    queue: VecDeque<Frame>,
    in_flight: Vec<InFlight>,
    next_seq: u64,
    seen: HashSet<u64>,
    ledger: EnergyLedger,
    next_periodic: f64,
    piggyback: Vec<usize>,
    assigned: bool,
    vtdma: Vec<usize>,
    backoff_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ev {
    Cycle(u64),
    Slot { cycle: u64, slot: usize },
    StateChange,
    Periodic,
}

#[derive(Debug, Clone, Copy)]
struct Transmission {
    node: usize,
    dst: usize,
    start: f64,
    end: f64,
    indicator: u8,
}

struct World<'a> {
    sc: &'a Prepared,
    nodes: Vec<NodeState>,
    records: Vec<InfoRecord>,
    frames: Vec<FrameTrace>,
    sensing: Vec<SensingEvent>,
    allocator: VtdmaAllocator,
    fading: bool,
    duration_ns: SimTime,
    cycle_ns: SimTime,
    slot_ns: SimTime,
    data_t: f64,
    beacon_t: f64,
    grant_t: f64,
}

/// Execute one run of `sc` with `seed`.
pub fn run_scenario(sc: &Prepared, seed: u64) -> Result<RunOutput> {
    run_with_kernel(sc, seed).map(|(out, _)| out)
}

fn run_with_kernel(sc: &Prepared, seed: u64) -> Result<(RunOutput, u64)> {
    let cfg = &sc.config;
    let streams = RngStreams::new(seed);
    let n = sc.n_nodes();
    let duration = cfg.run.duration;
    let duration_ns = secs_to_ns(duration);
    let mut kernel: Kernel<Ev> = Kernel::new();

    let mut nodes = Vec::with_capacity(n);
    for id in 0..n {
        nodes.push(NodeState {
            role: sc.topology.nodes[id].role,
            hop: sc.gradient.hops[id],
            parent: sc.gradient.next_hop[id],
            children: sc.gradient.children(id),
            queue: VecDeque::new(),
            in_flight: Vec::new(),
            next_seq: 0,
            seen: HashSet::new(),
            ledger: EnergyLedger::new(),
            next_periodic: f64::INFINITY,
            piggyback: Vec::new(),
            assigned: false,
            vtdma: Vec::new(),
            backoff_rng: streams.stream(id, Purpose::Backoff),
            fading_rng: streams.stream(id, Purpose::Fading),
        });
    }

    kernel.schedule(0, Target::Kernel, Ev::Cycle(0))?;
    let (pp, pv) = (cfg.traffic.parking(), cfg.traffic.vacant());
    for id in 0..n {
        if nodes[id].role != Role::Sensor {
            continue;
        }
        let mut traffic = streams.stream(id, Purpose::Traffic);
        let initial = draw_initial_state(&pp, &pv, &mut traffic);
        let timeline = generate_occupancy_timeline(&pp, &pv, duration, initial, &mut traffic)?;
        for &t in &timeline.transitions {
            kernel.schedule(secs_to_ns(t), Target::Node(id), Ev::StateChange)?;
        }
        let phase = streams.stream(id, Purpose::AppJitter).random::<f64>() * cfg.app.period;
        nodes[id].next_periodic = ns_to_secs(secs_to_ns(phase));
        kernel.schedule(secs_to_ns(phase), Target::Node(id), Ev::Periodic)?;
    }

    let p = &sc.profile;
    let mut world = World {
        sc,
        nodes,
        records: Vec::new(),
        frames: Vec::new(),
        sensing: Vec::new(),
        allocator: VtdmaAllocator::new(if sc.mac.protocol == Protocol::Iqueue { sc.mac.n_tdma } else { 0 }),
        fading: cfg.radio.fading,
        duration_ns,
        cycle_ns: secs_to_ns(sc.t_cycle),
        slot_ns: secs_to_ns(sc.mac.slot_duration),
        data_t: tx_duration(sc.mac.data_bytes(), p),
        beacon_t: tx_duration(BEACON_BYTES, p),
        grant_t: tx_duration(GRANT_BYTES, p),
    };

    let events = kernel.run_until::<Error, _>(duration_ns, |k, ev| world.handle(k, ev))?;

    let mut energy = Vec::with_capacity(n);
    for (id, node) in world.nodes.iter_mut().enumerate() {
        node.ledger.finalize(duration, p);
        let lifetime = lifetime_estimate(
            &node.ledger,
            duration,
            cfg.radio.battery_mah,
            cfg.radio.battery_volts,
        );
        energy.push(NodeEnergy {
            node: id,
            role: node.role,
            ledger: node.ledger.clone(),
            lifetime,
        });
    }
    Ok((
        RunOutput {
            topology: cfg.topology.kind,
            protocol: sc.mac.protocol,
            seed,
            duration,
            t_cycle: sc.t_cycle,
            n_csma: sc.mac.n_csma,
            n_tdma: sc.mac.n_tdma,
            events,
            frames: world.frames,
            records: world.records,
            energy,
            sensing: world.sensing,
        },
        events,
    ))
}

fn build_segments(mut iv: Vec<(f64, f64, RadioState)>, awake_end: f64) -> Vec<(RadioState, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(2 * iv.len() + 1);
    let mut cursor = 0.0f64;
    for (s, e, st) in iv {
        if s > cursor {
            out.push((RadioState::Cs, s - cursor));
            cursor = s;
        }
        if e > cursor {
            out.push((st, e - cursor));
            cursor = e;
        }
    }
    if awake_end > cursor {
        out.push((RadioState::Cs, awake_end - cursor));
    }
    out
}

impl World<'_> {
    fn handle(&mut self, k: &mut Kernel<Ev>, ev: SimEvent<Ev>) -> Result<()> {
        let now = ns_to_secs(ev.fire_time);
        match (ev.payload, ev.target) {
            (Ev::Cycle(c), _) => self.cycle_start(k, c),
            (Ev::Slot { cycle, slot }, _) => {
                self.slot(cycle, slot, now);
                Ok(())
            }
            (Ev::StateChange, Target::Node(n)) => {
                self.state_change(n, now);
                Ok(())
            }
            (Ev::Periodic, Target::Node(n)) => self.periodic(k, n, now),
            _ => unreachable!("node events always carry a node target"),
        }
    }

    fn burst(&mut self, n: usize, segments: &[(RadioState, f64)]) {
        let p = self.sc.profile;
        self.nodes[n].ledger.account_burst(segments, &p);
    }

    /// Draw the block-fading gain of one frame from `tx` at `rx`.
    fn fade_ok(&mut self, tx: usize, rx: usize) -> bool {
        let p = &self.sc.profile;
        let loss = self.sc.loss_db[tx][rx];
        let mean = p.tx_power_dbm - loss;
        if !self.fading {
            return mean >= p.sensitivity_dbm;
        }
        // A 40 dB fade-up has probability exp(-1e4); skip the draw.
        if mean < p.sensitivity_dbm - 40.0 {
            return false;
        }
        let u: f64 = self.nodes[tx].fading_rng.sample(Open01);
        link_success(p.tx_power_dbm, loss, u, p.sensitivity_dbm) == LinkOutcome::Delivered
    }

    fn audible(&mut self, memo: &mut HashMap<(usize, usize), bool>, tx: usize, rx: usize) -> bool {
        if let Some(&v) = memo.get(&(tx, rx)) {
            return v;
        }
        let v = self.fade_ok(tx, rx);
        memo.insert((tx, rx), v);
        v
    }

    fn trace(&mut self, t: FrameTrace) {
        self.frames.push(t);
    }

    fn new_frame(&mut self, n: usize, now: f64, records: Vec<usize>) -> Frame {
        let seq = self.nodes[n].next_seq;
        self.nodes[n].next_seq += 1;
        Frame {
            uid: ((n as u64) << 32) | seq,
            origin: n,
            gen_time: now,
            records,
            retries: 0,
            path_retries: 0,
        }
    }

    fn enqueue(&mut self, n: usize, frame: Frame, now: f64) {
        let node = &self.nodes[n];
        if node.queue.len() + node.in_flight.len() >= self.sc.mac.queue_capacity {
            let dst = node.parent.unwrap_or(GATEWAY);
            self.trace(FrameTrace {
                origin: frame.origin,
                src: n,
                dst,
                kind: FrameKind::Data,
                gen_time: frame.gen_time,
                tx_time: now,
                rx_time: None,
                outcome: Outcome::Dropped,
                retries: frame.retries,
            });
            return;
        }
        self.nodes[n].queue.push_back(frame);
    }

    // ------------------------------------------------------------------
    // Application
    // ------------------------------------------------------------------

    fn state_change(&mut self, n: usize, now: f64) {
        self.sensing.push(SensingEvent { time: now, origin: n });
        let decision = app_on_state_change(now, self.nodes[n].next_periodic, &self.sc.config.app);
        let idx = self.records.len();
        let hops = self.nodes[n].hop;
        match decision {
            AppDecision::SendImmediate => {
                self.records.push(InfoRecord {
                    sensor: n,
                    sensed_at: now,
                    sent_at: now,
                    delivered_at: None,
                    mode: InfoMode::Immediate,
                    hops,
                    retries: 0,
                });
                let f = self.new_frame(n, now, vec![idx]);
                self.enqueue(n, f, now);
            }
            AppDecision::PiggybackAt(t_next) => {
                self.records.push(InfoRecord {
                    sensor: n,
                    sensed_at: now,
                    sent_at: t_next,
                    delivered_at: None,
                    mode: InfoMode::Piggybacked,
                    hops,
                    retries: 0,
                });
                self.nodes[n].piggyback.push(idx);
            }
        }
    }

    fn periodic(&mut self, k: &mut Kernel<Ev>, n: usize, now: f64) -> Result<()> {
        let carried = std::mem::take(&mut self.nodes[n].piggyback);
        for &r in &carried {
            self.records[r].sent_at = now;
        }
        let f = self.new_frame(n, now, carried);
        self.enqueue(n, f, now);
        let next_ns = k.now() + secs_to_ns(self.sc.config.app.period);
        self.nodes[n].next_periodic = ns_to_secs(next_ns);
        if next_ns <= self.duration_ns {
            k.schedule(next_ns, Target::Node(n), Ev::Periodic)?;
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Cycle start: synchronization window
    // ------------------------------------------------------------------

    fn cycle_start(&mut self, k: &mut Kernel<Ev>, c: u64) -> Result<()> {
        let start = k.now();
        let now = ns_to_secs(start);
        for s in 0..self.sc.mac.n_slots() {
            let t = start + s as u64 * self.slot_ns;
            if t < self.duration_ns {
                k.schedule(t, Target::Kernel, Ev::Slot { cycle: c, slot: s })?;
            }
        }
        let next = start + self.cycle_ns;
        if next < self.duration_ns {
            k.schedule(next, Target::Kernel, Ev::Cycle(c + 1))?;
        }

        let announced = if self.sc.mac.protocol == Protocol::Iqueue {
            self.allocator.start_cycle()
        } else {
            Vec::new()
        };
        for node in &mut self.nodes {
            node.vtdma.clear();
        }

        let sync = &self.sc.sync;
        let (frame_t, sub) = (sync.frame_time, sync.sub_window);
        for f in sync.order.clone() {
            self.burst(f, &[(RadioState::Tx, frame_t)]);
            for child in self.nodes[f].children.clone() {
                let received = self.fade_ok(f, child);
                self.burst(child, &[(RadioState::Rx, sub)]);
                self.acknowledge(child, received, now);
                if !received {
                    continue;
                }
                if c >= 1 && self.sc.tdma_member[child] {
                    self.nodes[child].assigned = true;
                }
                if let Some((_, slots)) = announced.iter().find(|(n, _)| *n == child) {
                    self.nodes[child].vtdma = slots.clone();
                }
            }
        }
        Ok(())
    }

    /// Piggybacked acknowledgements of last cycle's frames. Without the sync
    /// every in-flight frame counts as unacknowledged.
    fn acknowledge(&mut self, n: usize, sync_received: bool, now: f64) {
        let flights = std::mem::take(&mut self.nodes[n].in_flight);
        let max = self.sc.mac.max_retries;
        let dst = self.nodes[n].parent.unwrap_or(GATEWAY);
        let mut retry = Vec::new();
        for InFlight { mut frame, delivered } in flights {
            if sync_received && delivered {
                continue;
            }
            frame.retries += 1;
            if frame.retries > max {
                self.trace(FrameTrace {
                    origin: frame.origin,
                    src: n,
                    dst,
                    kind: FrameKind::Data,
                    gen_time: frame.gen_time,
                    tx_time: now,
                    rx_time: None,
                    outcome: Outcome::Dropped,
                    retries: frame.retries - 1,
                });
            } else {
                retry.push(frame);
            }
        }
        for f in retry.into_iter().rev() {
            self.nodes[n].queue.push_front(f);
        }
    }

    // ------------------------------------------------------------------
    // Slots
    // ------------------------------------------------------------------

    fn slot(&mut self, cycle: u64, s: usize, slot_start: f64) {
        let offset = if s == 0 { self.sc.sync.window() } else { 0.0 };
        let t0 = slot_start + offset;
        let mac = &self.sc.mac;
        match mac.region(s) {
            Region::Csma => self.csma_slot(t0),
            Region::Tdma => self.tdma_slot(cycle, mac.region_index(s), t0),
            Region::Vtdma => self.vtdma_slot(mac.region_index(s), t0),
        }
    }

    fn csma_eligible(&self, n: usize) -> bool {
        let node = &self.nodes[n];
        if node.role == Role::Gateway {
            return false;
        }
        match self.sc.mac.protocol {
            Protocol::Csma | Protocol::Iqueue => true,
            Protocol::Funneling => !self.sc.tdma_member[n] || !node.assigned,
            Protocol::Tdma => false,
        }
    }

    fn is_csma_listener(&self, n: usize) -> bool {
        self.nodes[n].role.is_ffd() && self.nodes[n].children.iter().any(|&c| self.csma_eligible(c))
    }

    fn deliver(&mut self, d: usize, frame: &Frame, t: f64) {
        if !self.nodes[d].seen.insert(frame.uid) {
            return;
        }
        let path_retries = frame.path_retries + frame.retries;
        if d == GATEWAY {
            for &r in &frame.records {
                let rec = &mut self.records[r];
                if rec.delivered_at.is_none() {
                    rec.delivered_at = Some(t);
                    rec.retries = path_retries;
                }
            }
        } else {
            let fwd = Frame {
                uid: frame.uid,
                origin: frame.origin,
                gen_time: frame.gen_time,
                records: frame.records.clone(),
                retries: 0,
                path_retries,
            };
            self.enqueue(d, fwd, t);
        }
    }

    /// Gateway side of an iQueue data reception at `end` (slot-relative).
    /// Returns the grant interval if a grant frame was sent.
    fn iqueue_grant(&mut self, n: usize, indicator: u8, t0: f64, end: f64) -> Option<(f64, f64)> {
        let slots = self.allocator.request(n, indicator);
        if slots.is_empty() {
            return None;
        }
        let gs = end + TURNAROUND;
        let ge = gs + self.grant_t;
        let ok = self.fade_ok(GATEWAY, n);
        self.trace(FrameTrace {
            origin: GATEWAY,
            src: GATEWAY,
            dst: n,
            kind: FrameKind::Grant,
            gen_time: t0 + end,
            tx_time: t0 + gs,
            rx_time: ok.then_some(t0 + ge),
            outcome: if ok { Outcome::Delivered } else { Outcome::Lost },
            retries: 0,
        });
        if ok {
            self.nodes[n].vtdma.extend(slots);
        }
        Some((gs, ge))
    }

    fn wants_grant(&self, n: usize, dst: usize, indicator: u8) -> bool {
        self.sc.mac.protocol == Protocol::Iqueue && dst == GATEWAY && indicator > 0 && n != GATEWAY
    }

    fn csma_slot(&mut self, t0: f64) {
        let n_nodes = self.nodes.len();
        let window = self.sc.mac.backoff_window;
        let window_end = f64::from(window) * BACKOFF_UNIT + self.beacon_t;
        let contenders: Vec<usize> = (0..n_nodes)
            .filter(|&n| self.csma_eligible(n) && !self.nodes[n].queue.is_empty())
            .collect();
        let listeners: Vec<usize> = (0..n_nodes).filter(|&n| self.is_csma_listener(n)).collect();
        if contenders.is_empty() {
            for l in listeners {
                self.burst(l, &[(RadioState::Cs, window_end)]);
            }
            return;
        }

        let draws: Vec<(usize, u32)> = contenders
            .iter()
            .map(|&c| (c, draw_backoff(&mut self.nodes[c].backoff_rng, window)))
            .collect();
        let mut memo = HashMap::new();
        let fates = resolve_with_sensing(&draws, |l, t| self.audible(&mut memo, t, l));

        let unit = BACKOFF_UNIT;
        let mut txs: Vec<Transmission> = Vec::new();
        for &(n, b, fate) in &fates {
            if fate == Fate::Transmit {
                let start = f64::from(b) * unit;
                let dst = self.nodes[n].parent.expect("contenders are never the gateway");
                txs.push(Transmission {
                    node: n,
                    dst,
                    start,
                    end: start + self.beacon_t + self.data_t,
                    indicator: queue_indicator(self.nodes[n].queue.len() - 1),
                });
            }
        }

        // Outcome at each destination.
        let mut outcomes = Vec::with_capacity(txs.len());
        for i in 0..txs.len() {
            let t = txs[i];
            let span = (t.start, t.end);
            let dst_busy = txs
                .iter()
                .any(|o| o.node == t.dst && overlaps((o.start, o.end), span));
            let outcome = if dst_busy || !self.audible(&mut memo, t.node, t.dst) {
                Outcome::Lost
            } else {
                let mut hit = false;
                for o in txs.iter().filter(|o| o.node != t.node && o.node != t.dst) {
                    if overlaps((o.start, o.end), span) && self.audible(&mut memo, o.node, t.dst) {
                        hit = true;
                        break;
                    }
                }
                if hit {
                    Outcome::Collided
                } else {
                    Outcome::Delivered
                }
            };
            outcomes.push(outcome);
        }

        // Hand frames over, deliver, and issue grants.
        let mut grant_tx: Vec<(f64, f64)> = Vec::new();
        let mut grant_rx: HashMap<usize, (f64, f64)> = HashMap::new();
        for (t, &outcome) in txs.iter().zip(&outcomes) {
            let frame = self.nodes[t.node].queue.pop_front().expect("contender had a frame");
            let delivered = outcome == Outcome::Delivered;
            self.trace(FrameTrace {
                origin: frame.origin,
                src: t.node,
                dst: t.dst,
                kind: FrameKind::Data,
                gen_time: frame.gen_time,
                tx_time: t0 + t.start,
                rx_time: delivered.then_some(t0 + t.end),
                outcome,
                retries: frame.retries,
            });
            if delivered {
                self.deliver(t.dst, &frame, t0 + t.end);
                if self.wants_grant(t.node, t.dst, t.indicator) {
                    if let Some(g) = self.iqueue_grant(t.node, t.indicator, t0, t.end) {
                        grant_tx.push(g);
                    }
                }
            }
            if self.wants_grant(t.node, t.dst, t.indicator) {
                grant_rx.insert(t.node, (t.end, t.end + TURNAROUND + self.grant_t));
            }
            self.nodes[t.node].in_flight.push(InFlight { frame, delivered });
        }

        // Radio activity of every awake node.
        let mut awake: Vec<usize> = contenders.clone();
        awake.extend(listeners.iter().copied());
        awake.sort_unstable();
        awake.dedup();
        for x in awake {
            let own = txs.iter().find(|t| t.node == x).copied();
            let is_listener = listeners.binary_search(&x).is_ok();
            let mut iv: Vec<(f64, f64, RadioState)> = Vec::new();
            if let Some(o) = own {
                iv.push((o.start, o.end, RadioState::Tx));
                if let Some(&(gs, ge)) = grant_rx.get(&x) {
                    iv.push((gs, ge, RadioState::Rx));
                }
            }
            let segments = if is_listener {
                for o in txs.clone() {
                    if o.node == x {
                        continue;
                    }
                    if let Some(me) = own {
                        if overlaps((o.start, o.end), (me.start, me.end)) {
                            continue;
                        }
                    }
                    if self.audible(&mut memo, o.node, x) {
                        iv.push((o.start, o.end, RadioState::Rx));
                    }
                }
                if x == GATEWAY {
                    iv.extend(grant_tx.iter().map(|&(s, e)| (s, e, RadioState::Tx)));
                }
                let end = iv.iter().map(|v| v.1).fold(window_end, f64::max);
                build_segments(iv, end)
            } else if own.is_some() {
                let end = iv.iter().map(|v| v.1).fold(0.0, f64::max);
                build_segments(iv, end)
            } else {
                let heard = fates.iter().find(|f| f.0 == x).map(|f| f.2);
                match heard {
                    Some(Fate::Defer { heard }) => {
                        let b = draws.iter().find(|d| d.0 == heard).map(|d| d.1).unwrap_or(0);
                        vec![(RadioState::Cs, f64::from(b) * unit + self.beacon_t)]
                    }
                    _ => vec![(RadioState::Cs, window_end)],
                }
            };
            self.burst(x, &segments);
        }
    }

    fn tdma_slot(&mut self, cycle: u64, idx: usize, t0: f64) {
        let Some(owner) = self.sc.schedule.owner(idx) else {
            return;
        };
        let parent = self.nodes[owner].parent.expect("schedule members have a parent");
        if cycle == 0 {
            // Signaling: each member requests its slots in its first one.
            if self.sc.schedule.slots_of(owner).first() != Some(&idx) {
                return;
            }
            let sig_t = tx_duration(SIGNALING_BYTES, &self.sc.profile);
            let ok = self.fade_ok(owner, parent);
            self.trace(FrameTrace {
                origin: owner,
                src: owner,
                dst: parent,
                kind: FrameKind::Signaling,
                gen_time: t0,
                tx_time: t0,
                rx_time: ok.then_some(t0 + sig_t),
                outcome: if ok { Outcome::Delivered } else { Outcome::Lost },
                retries: 0,
            });
            self.burst(owner, &[(RadioState::Tx, sig_t)]);
            let heard = if ok { (RadioState::Rx, sig_t) } else { (RadioState::Cs, BACKOFF_UNIT) };
            self.burst(parent, &[heard]);
            return;
        }
        if !self.nodes[owner].assigned || self.nodes[owner].queue.is_empty() {
            self.burst(parent, &[(RadioState::Cs, BACKOFF_UNIT)]);
            return;
        }
        self.scheduled_tx(owner, parent, t0, false);
    }

    fn vtdma_slot(&mut self, idx: usize, t0: f64) {
        let Some(owner) = self.allocator.owner(idx) else {
            return;
        };
        let knows = self.nodes[owner].vtdma.contains(&idx);
        if !knows || self.nodes[owner].queue.is_empty() {
            self.burst(GATEWAY, &[(RadioState::Cs, BACKOFF_UNIT)]);
            return;
        }
        self.scheduled_tx(owner, GATEWAY, t0, true);
    }

    /// Contention-free transmission of the head frame at the slot start.
    fn scheduled_tx(&mut self, owner: usize, dst: usize, t0: f64, may_grant: bool) {
        let frame = self.nodes[owner].queue.pop_front().expect("checked non-empty");
        let indicator = queue_indicator(self.nodes[owner].queue.len());
        let ok = self.fade_ok(owner, dst);
        let end = self.data_t;
        self.trace(FrameTrace {
            origin: frame.origin,
            src: owner,
            dst,
            kind: FrameKind::Data,
            gen_time: frame.gen_time,
            tx_time: t0,
            rx_time: ok.then_some(t0 + end),
            outcome: if ok { Outcome::Delivered } else { Outcome::Lost },
            retries: frame.retries,
        });
        let mut owner_iv = vec![(0.0, end, RadioState::Tx)];
        let mut dst_iv = Vec::new();
        if ok {
            dst_iv.push((0.0, end, RadioState::Rx));
            self.deliver(dst, &frame, t0 + end);
            if may_grant && self.wants_grant(owner, dst, indicator) {
                if let Some((gs, ge)) = self.iqueue_grant(owner, indicator, t0, end) {
                    dst_iv.push((gs, ge, RadioState::Tx));
                }
            }
        }
        if may_grant && self.wants_grant(owner, dst, indicator) {
            owner_iv.push((end, end + TURNAROUND + self.grant_t, RadioState::Rx));
        }
        let dst_end = dst_iv.iter().map(|v| v.1).fold(BACKOFF_UNIT, f64::max);
        let owner_end = owner_iv.iter().map(|v| v.1).fold(0.0, f64::max);
        let segs = build_segments(owner_iv, owner_end);
        self.burst(owner, &segs);
        let segs = build_segments(dst_iv, dst_end);
        self.burst(dst, &segs);
        self.nodes[owner].in_flight.push(InFlight { frame, delivered: ok });
    }
}
