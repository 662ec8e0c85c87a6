//! Deterministic, seedable simulator of the CONGEST model.
//!
//! Synchronous rounds over an undirected graph; each edge carries a bounded
//! number of message units per direction per round (one unit models one
//! token descriptor: two IDs plus a hop count). Multi-unit payloads occupy
//! the link for several rounds via FIFO queuing, so congestion always
//! surfaces as measurable round slippage rather than silent magic.
//!
//! Rounds are grouped into phases of `c_l * ceil(log2 n)` rounds for the
//! random-delay token stages; the per-phase per-edge loads the congestion
//! lemmas bound are tracked in [`SimTrace`].

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeId, FaultSet, Graph, VertexId};

pub type Round = u64;
pub type Phase = u64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation exceeded {max_rounds} rounds")]
    Timeout { max_rounds: u64, trace: Box<SimTrace> },
    #[error("graph is disconnected; broadcast cannot reach every node")]
    Disconnected,
}

/// Simulator knobs. `phase_constant` is the c_l in phase length
/// `c_l * ceil(log2 n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub bandwidth: u32,
    pub phase_constant: u32,
    pub max_rounds: u64,
    pub record_deliveries: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            bandwidth: 1,
            phase_constant: 4,
            max_rounds: 50_000_000,
            record_deliveries: false,
        }
    }
}

impl NetworkConfig {
    /// Rounds per phase for an n-vertex network; at least one.
    pub fn phase_length(&self, n: usize) -> u64 {
        let log = (usize::BITS - n.max(2).saturating_sub(1).leading_zeros()) as u64;
        (self.phase_constant as u64 * log).max(1)
    }
}

/// One message unit carries up to three words (IDs or hop counts).
pub fn units_for_words(words: usize) -> u32 {
    (words.div_ceil(3)).max(1) as u32
}

/// Identity of one truncated BFS instance.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TokenKey {
    pub source: VertexId,
    pub faults: FaultSet,
}

impl TokenKey {
    pub fn single(source: VertexId, e: EdgeId) -> Self {
        TokenKey { source, faults: FaultSet::single(e) }
    }

    pub fn dual(source: VertexId, e1: EdgeId, e2: EdgeId) -> Self {
        TokenKey { source, faults: FaultSet::dual(e1, e2) }
    }

    /// Stable word encoding for the delay PRF.
    pub fn words(&self) -> Vec<u64> {
        let mut w = vec![self.source as u64 + 1];
        for e in self.faults.iter() {
            let (a, b) = e.endpoints();
            w.push(a as u64 + 1);
            w.push(b as u64 + 1);
        }
        w
    }
}

/// Descriptor of one truncated BFS token in flight: its instance key, the
/// phase at which the receiver is scheduled to hold it, and an optional
/// streamed path-suffix payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub key: TokenKey,
    pub wave: Phase,
    pub payload: Vec<(VertexId, VertexId)>,
}

impl Token {
    /// One unit per fault descriptor (source + edge + hop fits one unit;
    /// a dual-fault key takes two) plus the streamed suffix edges.
    pub fn units(&self) -> u32 {
        units_for_words(3 * self.key.faults.len().max(1) + 2 * self.payload.len())
    }
}

/// Fixed-size shared random string, identical at every node once the
/// broadcast completes.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SharedSeed {
    pub bits: u64,
    pub broadcast_round: Round,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Start phase in `1..=range_size` for the keyed algorithm instance: a pure
/// function of (seed, key, range) with near-uniform marginals. This keyed
/// PRF stands in for the k-wise-independent generator the schedule needs;
/// the congestion bounds that rely on it are verified empirically.
pub fn delay_of(seed: &SharedSeed, key_words: &[u64], range_size: u64) -> u64 {
    assert!(range_size >= 1);
    let mut h = splitmix64(seed.bits ^ 0x5851f42d4c957f2d);
    for &w in key_words {
        h = splitmix64(h ^ splitmix64(w ^ 0x9e3779b97f4a7c15));
    }
    1 + splitmix64(h) % range_size
}

/// Local view a node gets of the network: its ID, its neighbors, the vertex
/// count, and the phase length. Nothing else about the topology leaks in.
pub struct NodeCtx<'a> {
    pub id: VertexId,
    pub n: usize,
    pub neighbors: &'a [VertexId],
    pub phase_len: u64,
}

impl NodeCtx<'_> {
    pub fn phase_of(&self, round: Round) -> Phase {
        round / self.phase_len
    }

    /// First round of a phase; token sends scheduled "at phase p" enqueue here.
    pub fn phase_start(&self, phase: Phase) -> Round {
        phase * self.phase_len
    }
}

#[derive(Clone, Debug)]
pub struct Envelope<M> {
    pub from: VertexId,
    pub msg: M,
}

#[derive(Clone, Debug)]
pub struct OutMsg<M> {
    pub to: VertexId,
    pub units: u32,
    pub msg: M,
}

#[derive(Debug)]
pub struct StepOutput<M> {
    pub outbox: Vec<OutMsg<M>>,
    /// Next round this node wants to act even without incoming messages.
    pub wake: Option<Round>,
}

impl<M> Default for StepOutput<M> {
    fn default() -> Self {
        StepOutput { outbox: Vec::new(), wake: None }
    }
}

impl<M> StepOutput<M> {
    pub fn idle() -> Self {
        Self::default()
    }
}

/// Per-node behavior: an initial step at round 0 and a step for every round
/// in which the node has mail or a scheduled wake-up.
pub trait Protocol {
    type Msg: Clone;
    type Node;

    fn start(&self, node: &mut Self::Node, ctx: &NodeCtx<'_>) -> StepOutput<Self::Msg>;

    fn step(
        &self,
        node: &mut Self::Node,
        ctx: &NodeCtx<'_>,
        round: Round,
        inbox: Vec<Envelope<Self::Msg>>,
    ) -> StepOutput<Self::Msg>;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeliveryRecord {
    pub round: Round,
    pub from: VertexId,
    pub to: VertexId,
    pub units: u32,
}

/// Metrics of one simulation run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SimTrace {
    pub label: String,
    pub rounds_used: u64,
    pub phase_len: u64,
    pub messages_sent: u64,
    pub units_sent: u64,
    pub messages_delivered: u64,
    /// Maximum units over one edge direction in one round (bandwidth-bounded).
    pub max_edge_round_units: u32,
    /// Maximum units over one edge direction within one phase.
    pub max_edge_phase_units: u64,
    /// Maximum message count over one edge direction within one phase.
    pub max_edge_phase_msgs: u64,
    /// Mean units per edge direction over the whole run.
    pub mean_edge_units: f64,
    /// Largest total unit count any single edge direction carried.
    pub max_edge_total_units: u64,
    /// Messages whose delivery completed in a later phase than their send.
    pub slipped_messages: u64,
    /// Per-phase maximum edge load in units (index = phase).
    pub phase_load_hist: Vec<u32>,
    pub timed_out: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub deliveries: Vec<DeliveryRecord>,
}

impl SimTrace {
    /// Folds another stage's trace into this one, summing rounds and
    /// maxing the load statistics.
    pub fn absorb(&mut self, other: &SimTrace) {
        self.rounds_used += other.rounds_used;
        self.messages_sent += other.messages_sent;
        self.units_sent += other.units_sent;
        self.messages_delivered += other.messages_delivered;
        self.max_edge_round_units = self.max_edge_round_units.max(other.max_edge_round_units);
        self.max_edge_phase_units = self.max_edge_phase_units.max(other.max_edge_phase_units);
        self.max_edge_phase_msgs = self.max_edge_phase_msgs.max(other.max_edge_phase_msgs);
        self.slipped_messages += other.slipped_messages;
        self.timed_out |= other.timed_out;
    }
}

pub struct RunOutput<N> {
    pub nodes: Vec<N>,
    pub trace: SimTrace,
}

struct Queued<M> {
    from: VertexId,
    to: VertexId,
    msg: M,
    units_left: u32,
    units: u32,
    enqueue_phase: Phase,
}

struct DirState {
    units_this_round: u32,
    phase: Phase,
    units_this_phase: u64,
    msgs_this_phase: u64,
    total_units: u64,
}

/// Executes `proto` over `g` until quiescence: no messages in flight and no
/// node holding a scheduled wake-up. Deterministic in all inputs.
pub fn run<P: Protocol>(
    g: &Graph,
    proto: &P,
    mut nodes: Vec<P::Node>,
    cfg: &NetworkConfig,
    label: &str,
) -> Result<RunOutput<P::Node>, SimError> {
    assert_eq!(nodes.len(), g.n());
    let n = g.n();
    let phase_len = cfg.phase_length(n);
    let m = g.m();
    let ndirs = 2 * m;

    // direction index: 2*edge + (1 if from the higher endpoint)
    let dir_of = |from: VertexId, to: VertexId| -> usize {
        let e = EdgeId::new(from, to);
        let idx = g.edge_index(e).expect("message sent over a non-edge");
        2 * idx + usize::from(from == e.hi())
    };

    let mut queues: Vec<VecDeque<Queued<P::Msg>>> = (0..ndirs).map(|_| VecDeque::new()).collect();
    let mut dir_state: Vec<DirState> = (0..ndirs)
        .map(|_| DirState {
            units_this_round: 0,
            phase: 0,
            units_this_phase: 0,
            msgs_this_phase: 0,
            total_units: 0,
        })
        .collect();
    let mut active_dirs: Vec<usize> = Vec::new();
    let mut active_dirty = false;
    let mut dir_active = vec![false; ndirs];

    let mut inboxes: Vec<Vec<Envelope<P::Msg>>> = (0..n).map(|_| Vec::new()).collect();
    let mut has_inbox: Vec<bool> = vec![false; n];
    let mut inbox_nodes: Vec<VertexId> = Vec::new();

    let mut wake_at: Vec<Option<Round>> = vec![None; n];
    let mut wake_heap: BinaryHeap<Reverse<(Round, VertexId)>> = BinaryHeap::new();

    let mut trace = SimTrace {
        label: label.to_string(),
        phase_len,
        ..SimTrace::default()
    };

    let mut in_flight: u64 = 0;

    macro_rules! enqueue {
        ($round:expr, $from:expr, $out:expr) => {{
            let out: OutMsg<P::Msg> = $out;
            assert_ne!(out.to, $from, "node sent a message to itself");
            let d = dir_of($from, out.to);
            let units = out.units.max(1);
            trace.messages_sent += 1;
            trace.units_sent += units as u64;
            queues[d].push_back(Queued {
                from: $from,
                to: out.to,
                msg: out.msg,
                units_left: units,
                units,
                enqueue_phase: $round / phase_len,
            });
            in_flight += 1;
            if !dir_active[d] {
                dir_active[d] = true;
                active_dirs.push(d);
                active_dirty = true;
            }
        }};
    }

    macro_rules! set_wake {
        ($node:expr, $round:expr, $wake:expr) => {{
            if let Some(w) = $wake {
                assert!(w > $round, "wake must be in the future");
                let better = wake_at[$node].map_or(true, |cur| w < cur);
                if better {
                    wake_at[$node] = Some(w);
                    wake_heap.push(Reverse((w, $node)));
                }
            }
        }};
    }

    // Round 0: start steps in ID order.
    for v in 0..n {
        let ctx = NodeCtx { id: v, n, neighbors: g.neighbors(v), phase_len };
        let out = proto.start(&mut nodes[v], &ctx);
        for o in out.outbox {
            enqueue!(0u64, v, o);
        }
        set_wake!(v, 0u64, out.wake);
    }
    let mut rounds_used: u64 = 1;
    let mut round: Round = 0;

    loop {
        // Quiescence / fast-forward decision for the next round.
        let has_mail = !inbox_nodes.is_empty();
        if in_flight == 0 && !has_mail {
            // nothing moving; jump to the next wake or finish
            let mut next = None;
            while let Some(Reverse((w, v))) = wake_heap.peek().copied() {
                if wake_at[v] == Some(w) {
                    next = Some(w);
                    break;
                }
                wake_heap.pop();
            }
            match next {
                None => break,
                Some(w) => round = w,
            }
        } else {
            round += 1;
        }
        if round >= cfg.max_rounds {
            trace.rounds_used = rounds_used;
            trace.timed_out = true;
            finalize_trace(&mut trace, &dir_state, ndirs);
            return Err(SimError::Timeout { max_rounds: cfg.max_rounds, trace: Box::new(trace) });
        }

        // 1. Step nodes with mail or due wake-ups, in ID order.
        let mut to_step: Vec<VertexId> = std::mem::take(&mut inbox_nodes);
        while let Some(Reverse((w, v))) = wake_heap.peek().copied() {
            if w > round {
                break;
            }
            wake_heap.pop();
            if wake_at[v] == Some(w) {
                wake_at[v] = None;
                if !has_inbox[v] {
                    to_step.push(v);
                }
            }
        }
        to_step.sort_unstable();
        to_step.dedup();
        if !to_step.is_empty() {
            rounds_used = rounds_used.max(round + 1);
        }
        for v in to_step {
            has_inbox[v] = false;
            let inbox = std::mem::take(&mut inboxes[v]);
            let ctx = NodeCtx { id: v, n, neighbors: g.neighbors(v), phase_len };
            let out = proto.step(&mut nodes[v], &ctx, round, inbox);
            for o in out.outbox {
                enqueue!(round, v, o);
            }
            set_wake!(v, round, out.wake);
        }

        // 2. Transmit one bandwidth budget per active direction, in
        // direction order so inbox assembly is deterministic.
        if !active_dirs.is_empty() {
            rounds_used = rounds_used.max(round + 1);
            if active_dirty {
                active_dirs.sort_unstable();
                active_dirs.dedup();
                active_dirty = false;
            }
            let phase = round / phase_len;
            let mut still_active = Vec::with_capacity(active_dirs.len());
            for &d in active_dirs.iter() {
                let st = &mut dir_state[d];
                if st.phase != phase {
                    st.phase = phase;
                    st.units_this_phase = 0;
                    st.msgs_this_phase = 0;
                }
                st.units_this_round = 0;
                let mut budget = cfg.bandwidth;
                while budget > 0 {
                    let Some(head) = queues[d].front_mut() else { break };
                    let step = head.units_left.min(budget);
                    head.units_left -= step;
                    budget -= step;
                    st.units_this_round += step;
                    st.units_this_phase += step as u64;
                    st.total_units += step as u64;
                    if head.units_left == 0 {
                        let q = queues[d].pop_front().unwrap();
                        in_flight -= 1;
                        st.msgs_this_phase += 1;
                        trace.messages_delivered += 1;
                        if phase > q.enqueue_phase {
                            trace.slipped_messages += 1;
                        }
                        if cfg.record_deliveries {
                            trace.deliveries.push(DeliveryRecord {
                                round,
                                from: q.from,
                                to: q.to,
                                units: q.units,
                            });
                        }
                        if !has_inbox[q.to] {
                            has_inbox[q.to] = true;
                            inbox_nodes.push(q.to);
                        }
                        inboxes[q.to].push(Envelope { from: q.from, msg: q.msg });
                    }
                }
                assert!(st.units_this_round <= cfg.bandwidth, "bandwidth exceeded");
                trace.max_edge_round_units = trace.max_edge_round_units.max(st.units_this_round);
                trace.max_edge_phase_units = trace.max_edge_phase_units.max(st.units_this_phase);
                trace.max_edge_phase_msgs = trace.max_edge_phase_msgs.max(st.msgs_this_phase);
                let ph = phase as usize;
                if trace.phase_load_hist.len() <= ph {
                    trace.phase_load_hist.resize(ph + 1, 0);
                }
                trace.phase_load_hist[ph] =
                    trace.phase_load_hist[ph].max(st.units_this_phase as u32);
                if !queues[d].is_empty() {
                    still_active.push(d);
                } else {
                    dir_active[d] = false;
                }
            }
            active_dirs = still_active;
        }
    }

    trace.rounds_used = rounds_used;
    finalize_trace(&mut trace, &dir_state, ndirs);
    Ok(RunOutput { nodes, trace })
}

fn finalize_trace(trace: &mut SimTrace, dirs: &[DirState], ndirs: usize) {
    if ndirs > 0 {
        trace.mean_edge_units =
            dirs.iter().map(|d| d.total_units as f64).sum::<f64>() / ndirs as f64;
        trace.max_edge_total_units = dirs.iter().map(|d| d.total_units).max().unwrap_or(0);
    }
}

// ---------------------------------------------------------------------------
// Shared-randomness broadcast: flood a word from the minimum-ID vertex.
// ---------------------------------------------------------------------------

struct FloodProtocol {
    root: VertexId,
    bits: u64,
}

#[derive(Default)]
struct FloodNode {
    bits: Option<u64>,
}

impl Protocol for FloodProtocol {
    type Msg = u64;
    type Node = FloodNode;

    fn start(&self, node: &mut FloodNode, ctx: &NodeCtx<'_>) -> StepOutput<u64> {
        if ctx.id == self.root {
            node.bits = Some(self.bits);
            StepOutput {
                outbox: ctx
                    .neighbors
                    .iter()
                    .map(|&u| OutMsg { to: u, units: 1, msg: self.bits })
                    .collect(),
                wake: None,
            }
        } else {
            StepOutput::idle()
        }
    }

    fn step(
        &self,
        node: &mut FloodNode,
        ctx: &NodeCtx<'_>,
        _round: Round,
        inbox: Vec<Envelope<u64>>,
    ) -> StepOutput<u64> {
        if node.bits.is_some() || inbox.is_empty() {
            return StepOutput::idle();
        }
        let bits = inbox[0].msg;
        node.bits = Some(bits);
        let senders: Vec<VertexId> = inbox.iter().map(|e| e.from).collect();
        StepOutput {
            outbox: ctx
                .neighbors
                .iter()
                .filter(|u| !senders.contains(u))
                .map(|&u| OutMsg { to: u, units: 1, msg: bits })
                .collect(),
            wake: None,
        }
    }
}

/// Delivers `bits` to every node by flooding from the minimum-ID vertex.
/// Fails on disconnected graphs. The recorded rounds stay within a small
/// constant of D + log n.
pub fn broadcast_seed(
    g: &Graph,
    bits: u64,
    cfg: &NetworkConfig,
) -> Result<(SharedSeed, SimTrace), SimError> {
    let proto = FloodProtocol { root: 0, bits };
    let nodes = (0..g.n()).map(|_| FloodNode::default()).collect();
    let out = run(g, &proto, nodes, cfg, "broadcast_seed")?;
    if out.nodes.iter().any(|nd| nd.bits.is_none()) {
        return Err(SimError::Disconnected);
    }
    Ok((SharedSeed { bits, broadcast_round: out.trace.rounds_used }, out.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    struct EmptyProtocol;
    impl Protocol for EmptyProtocol {
        type Msg = ();
        type Node = ();
        fn start(&self, _: &mut (), _: &NodeCtx<'_>) -> StepOutput<()> {
            StepOutput::idle()
        }
        fn step(&self, _: &mut (), _: &NodeCtx<'_>, _: Round, _: Vec<Envelope<()>>) -> StepOutput<()> {
            StepOutput::idle()
        }
    }

    #[test]
    fn empty_protocol_quiesces_immediately() {
        let g = gen::path(5);
        let out = run(&g, &EmptyProtocol, vec![(); 5], &NetworkConfig::default(), "empty").unwrap();
        assert_eq!(out.trace.rounds_used, 1);
        assert_eq!(out.trace.messages_sent, 0);
    }

    #[test]
    fn broadcast_on_single_vertex_costs_nothing() {
        let g = Graph::from_edges(1, []).unwrap();
        let (seed, trace) = broadcast_seed(&g, 42, &NetworkConfig::default()).unwrap();
        assert_eq!(seed.bits, 42);
        assert_eq!(trace.messages_sent, 0);
    }

    #[test]
    fn broadcast_p5_needs_diameter_rounds() {
        let g = gen::path(5);
        let (seed, trace) = broadcast_seed(&g, 7, &NetworkConfig::default()).unwrap();
        assert_eq!(seed.bits, 7);
        assert!(trace.rounds_used >= 4, "information must traverse the diameter");
        assert_eq!(trace.max_edge_round_units, 1);
    }

    #[test]
    fn broadcast_rejects_disconnected() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            broadcast_seed(&g, 1, &NetworkConfig::default()),
            Err(SimError::Disconnected)
        ));
    }

    #[test]
    fn broadcast_rounds_track_diameter_plus_log() {
        let cfg = NetworkConfig::default();
        for &n in &[50usize, 120, 300, 500] {
            let p = 2.0 * (n as f64).ln() / n as f64;
            let g = gen::connected(|s| gen::erdos_renyi(n, p, n as u64 * 7 + s), 80).unwrap();
            let (_, trace) = broadcast_seed(&g, 3, &cfg).unwrap();
            let bound = 4.0 * (g.diameter() as f64 + (n as f64).ln());
            assert!(
                (trace.rounds_used as f64) <= bound,
                "n={n}: {} rounds > {bound}",
                trace.rounds_used
            );
        }
    }

    #[test]
    fn delay_is_deterministic_and_in_range() {
        let seed = SharedSeed { bits: 999, broadcast_round: 0 };
        let key = [3u64, 4, 5];
        assert_eq!(delay_of(&seed, &key, 64), delay_of(&seed, &key, 64));
        assert_eq!(delay_of(&seed, &key, 1), 1);
        for r in [2u64, 7, 64, 1000] {
            let d = delay_of(&seed, &key, r);
            assert!((1..=r).contains(&d));
        }
    }

    #[test]
    fn delay_marginals_are_near_uniform() {
        let seed = SharedSeed { bits: 31337, broadcast_round: 0 };
        let range = 64u64;
        let keys = 100_000u64;
        let mut buckets = vec![0u64; range as usize];
        for k in 0..keys {
            let d = delay_of(&seed, &[k, k.wrapping_mul(3), 17], range);
            buckets[(d - 1) as usize] += 1;
        }
        let p = 1.0 / range as f64;
        let mean = keys as f64 * p;
        let sd = (keys as f64 * p * (1.0 - p)).sqrt();
        for (i, b) in buckets.iter().enumerate() {
            assert!(
                (*b as f64 - mean).abs() <= 3.0 * sd,
                "bucket {i}: {b} vs mean {mean:.1} (3 sigma = {:.1})",
                3.0 * sd
            );
        }
    }

    #[test]
    fn queuing_delays_multi_unit_messages() {
        // one edge, one 5-unit message: delivery takes 5 rounds
        struct Big;
        impl Protocol for Big {
            type Msg = u8;
            type Node = Option<Round>;
            fn start(&self, _: &mut Self::Node, ctx: &NodeCtx<'_>) -> StepOutput<u8> {
                if ctx.id == 0 {
                    StepOutput { outbox: vec![OutMsg { to: 1, units: 5, msg: 1 }], wake: None }
                } else {
                    StepOutput::idle()
                }
            }
            fn step(
                &self,
                node: &mut Self::Node,
                _: &NodeCtx<'_>,
                round: Round,
                inbox: Vec<Envelope<u8>>,
            ) -> StepOutput<u8> {
                if !inbox.is_empty() {
                    *node = Some(round);
                }
                StepOutput::idle()
            }
        }
        let g = gen::path(2);
        let out = run(&g, &Big, vec![None, None], &NetworkConfig::default(), "big").unwrap();
        // enqueued at round 0, five rounds of transmission complete at round 5
        assert_eq!(out.nodes[1], Some(6));
        assert_eq!(out.trace.max_edge_round_units, 1);
    }

    #[test]
    fn traces_are_bytewise_deterministic() {
        let g = gen::erdos_renyi(40, 0.2, 5);
        let cfg = NetworkConfig { record_deliveries: true, ..NetworkConfig::default() };
        let (_, t1) = broadcast_seed(&g, 12, &cfg).unwrap();
        let (_, t2) = broadcast_seed(&g, 12, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&t1).unwrap(),
            serde_json::to_string(&t2).unwrap()
        );
    }
}
