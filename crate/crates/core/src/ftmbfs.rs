//! Distributed single-failure multi-source FT-BFS construction, executed
//! round by round inside the CONGEST simulator.
//!
//! The pipeline: build BFS trees for the sources plus a sampled vertex set,
//! pipeline each source tree's edges sigma' hops down the tree so every
//! vertex holds its relevant edge-list, exchange those lists with
//! neighbors, broadcast a shared random seed, then run one truncated BFS
//! per (source, fault) pair at a random phase offset. A vertex records the
//! minimum-ID sender of each first-arriving token as a preserver edge when
//! the fault sits in its sigma-suffix.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    bfs_consistent, ceil_sqrt_ratio, param_ln, sample, suffix, EdgeId, FaultSet, Graph, VertexId,
};
use crate::preserver::{PreserverSubgraph, Rule};
use crate::sim::{
    broadcast_seed, delay_of, run, Envelope, NetworkConfig, NodeCtx, OutMsg, Phase, Protocol,
    Round, RunOutput, SharedSeed, SimError, SimTrace, StepOutput, Token, TokenKey,
};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("source set is empty")]
    NoSources,
    #[error("source {0} out of range")]
    BadSource(VertexId),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Construction-wide knobs; `ln_const` scales every sampling probability.
#[derive(Clone, Debug)]
pub struct FtmbfsConfig {
    pub ln_const: f64,
    pub network: NetworkConfig,
}

impl Default for FtmbfsConfig {
    fn default() -> Self {
        FtmbfsConfig { ln_const: 10.0, network: NetworkConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FtmbfsParams {
    pub sigma: usize,
    pub sigma_prime: usize,
    pub delay_range: u64,
    pub sample_prob: f64,
}

impl FtmbfsParams {
    pub fn new(n: usize, num_sources: usize, ln_const: f64) -> Self {
        let sigma = ceil_sqrt_ratio(n, num_sources);
        let sigma_prime = 3 * sigma;
        FtmbfsParams {
            sigma,
            sigma_prime,
            delay_range: (2 * sigma_prime * num_sources).max(1) as u64,
            sample_prob: (ln_const * param_ln(n) / sigma as f64).min(1.0),
        }
    }
}

/// Tree edge oriented as it appears on the path: (parent, child).
pub type OrientedEdge = (VertexId, VertexId);

/// The sigma'-suffix of one tree path, nearest edge first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelevantList {
    /// entries[i] = the tree edge i+1 hops above the owner, oriented
    /// (parent, child); entries[0] is the owner's parent edge.
    pub entries: Vec<OrientedEdge>,
}

impl RelevantList {
    pub fn contains(&self, e: EdgeId) -> bool {
        self.entries.iter().any(|&(x, y)| e.is(x, y))
    }

    /// 1-based hop distance of `e` from the owner, if present.
    pub fn position(&self, e: EdgeId) -> Option<usize> {
        self.entries.iter().position(|&(x, y)| e.is(x, y)).map(|i| i + 1)
    }

    /// The vertex where the window stops, nearest the source.
    pub fn top_vertex(&self) -> Option<VertexId> {
        self.entries.last().map(|&(x, _)| x)
    }

    /// Step-3 edge number: injective per tree, determined by the child
    /// endpoint, computable locally by both endpoints.
    pub fn number(src_idx: usize, n: usize, entry: OrientedEdge) -> u64 {
        (src_idx * n + entry.1) as u64
    }
}

/// What one vertex ends up knowing after the pipeline.
#[derive(Clone, Debug, Default)]
pub struct NodeKnowledge {
    pub id: VertexId,
    /// Depth / parent per tree root, indexed like `all_roots`.
    pub depths: Vec<Option<u32>>,
    pub parents: Vec<Option<VertexId>>,
    /// Own relevant lists, indexed by position in the source list.
    pub lists: Vec<RelevantList>,
    /// Neighbors' relevant lists: `[neighbor position][source index]`.
    pub nbr_lists: Vec<Vec<RelevantList>>,
    /// First-arrival record per token instance.
    pub arrivals: BTreeMap<(usize, EdgeId), TokenArrival>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenArrival {
    pub wave: Phase,
    pub parent: VertexId,
    pub tau: u64,
    /// Streamed suffix of the token's path when the stage carries payloads.
    pub payload: Vec<OrientedEdge>,
    /// Physical delivery matched the schedule.
    pub on_time: bool,
}

impl NodeKnowledge {
    /// Decide whether `e` (taken from neighbor `u`'s relevant list for
    /// source index `s_idx`, oriented (parent, child)) lies on this
    /// vertex's own tree path, from local knowledge only. Errs when the
    /// precondition (`e` in the neighbor's list) fails.
    pub fn local_path_membership(
        &self,
        u: VertexId,
        nbr_pos: usize,
        s_idx: usize,
        e: OrientedEdge,
    ) -> Result<bool, PreconditionError> {
        let nbr = &self.nbr_lists[nbr_pos][s_idx];
        if !nbr.entries.contains(&e) {
            return Err(PreconditionError { vertex: self.id, neighbor: u, edge: e });
        }
        Ok(membership_from_own_list(
            &self.lists[s_idx],
            self.depths[s_idx].map(|d| d as usize),
            e,
        ))
    }
}

#[derive(Debug, Error)]
#[error("edge {edge:?} is not in neighbor {neighbor}'s relevant list at vertex {vertex}")]
pub struct PreconditionError {
    pub vertex: VertexId,
    pub neighbor: VertexId,
    pub edge: OrientedEdge,
}

/// `e` is on the owner's path iff it sits in the owner's window, or the
/// window is full and `e`'s child endpoint is the window's top vertex
/// (making `e` the next edge above the window).
fn membership_from_own_list(own: &RelevantList, depth: Option<usize>, e: OrientedEdge) -> bool {
    if own.entries.iter().any(|&(x, y)| (x, y) == e || (y, x) == e) {
        return true;
    }
    let Some(depth) = depth else { return false };
    if own.entries.len() >= depth {
        // window covers the whole path; nothing above it
        return false;
    }
    own.top_vertex() == Some(e.1)
}

// ===========================================================================
// Stage 1: concurrent BFS trees for a list of roots.
// ===========================================================================

#[derive(Clone, Debug)]
pub struct TreeMsg {
    src_idx: u32,
    depth: u32,
}

pub struct TreeStage;

pub struct TreeNode {
    my_root: Option<usize>,
    root_announced: bool,
    depth: Vec<u32>,
    /// nbr_depth[nbr_pos][src] = best announced depth + 1 (0 = unheard).
    nbr_depth: Vec<Vec<u32>>,
}

const UNSET: u32 = u32::MAX;

impl Protocol for TreeStage {
    type Msg = TreeMsg;
    type Node = TreeNode;

    fn start(&self, node: &mut TreeNode, ctx: &NodeCtx<'_>) -> StepOutput<TreeMsg> {
        let Some(k) = node.my_root else { return StepOutput::idle() };
        node.depth[k] = 0;
        if k == 0 {
            node.root_announced = true;
            StepOutput { outbox: announce(ctx, k, 0), wake: None }
        } else {
            // stagger root k by k rounds so the wavefronts pipeline
            StepOutput { outbox: Vec::new(), wake: Some(k as u64) }
        }
    }

    fn step(
        &self,
        node: &mut TreeNode,
        ctx: &NodeCtx<'_>,
        round: Round,
        inbox: Vec<Envelope<TreeMsg>>,
    ) -> StepOutput<TreeMsg> {
        let mut out = Vec::new();
        if let Some(k) = node.my_root {
            if !node.root_announced && round >= k as u64 {
                node.root_announced = true;
                out.extend(announce(ctx, k, 0));
            }
        }
        for env in inbox {
            let k = env.msg.src_idx as usize;
            let pos = ctx.neighbors.binary_search(&env.from).expect("sender is a neighbor");
            let ann = env.msg.depth + 1;
            if node.nbr_depth[pos][k] == 0 || ann < node.nbr_depth[pos][k] {
                node.nbr_depth[pos][k] = ann;
            }
            if ann < node.depth[k] {
                node.depth[k] = ann;
                out.extend(announce(ctx, k, ann));
            }
        }
        StepOutput { outbox: out, wake: None }
    }
}

fn announce(ctx: &NodeCtx<'_>, k: usize, depth: u32) -> Vec<OutMsg<TreeMsg>> {
    ctx.neighbors
        .iter()
        .map(|&u| OutMsg { to: u, units: 1, msg: TreeMsg { src_idx: k as u32, depth } })
        .collect()
}

/// Builds all BFS trees at once; returns per-node (depth, parent) per root.
pub fn run_tree_stage(
    g: &Graph,
    roots: &[VertexId],
    net: &NetworkConfig,
) -> Result<(Vec<Vec<Option<u32>>>, Vec<Vec<Option<VertexId>>>, SimTrace), SimError> {
    let mut root_of = vec![None; g.n()];
    for (k, &r) in roots.iter().enumerate() {
        root_of[r] = Some(k);
    }
    let nodes: Vec<TreeNode> = (0..g.n())
        .map(|v| TreeNode {
            my_root: root_of[v],
            root_announced: false,
            depth: vec![UNSET; roots.len()],
            nbr_depth: vec![vec![0; roots.len()]; g.degree(v)],
        })
        .collect();
    let out = run(g, &TreeStage, nodes, net, "tree_stage")?;

    let mut depths = Vec::with_capacity(g.n());
    let mut parents = Vec::with_capacity(g.n());
    for (v, node) in out.nodes.iter().enumerate() {
        let mut dv = Vec::with_capacity(roots.len());
        let mut pv = Vec::with_capacity(roots.len());
        for k in 0..roots.len() {
            let d = node.depth[k];
            if d == UNSET {
                dv.push(None);
                pv.push(None);
                continue;
            }
            dv.push(Some(d));
            if d == 0 {
                pv.push(None);
            } else {
                // minimum-ID neighbor one level up; neighbor lists are sorted
                let p = g
                    .neighbors(v)
                    .iter()
                    .enumerate()
                    .find(|(pos, _)| node.nbr_depth[*pos][k] == d)
                    .map(|(_, &u)| u);
                debug_assert!(p.is_some(), "vertex {v} at depth {d} has no parent candidate");
                pv.push(p);
            }
        }
        depths.push(dv);
        parents.push(pv);
    }
    Ok((depths, parents, out.trace))
}

// ===========================================================================
// Stage 2: suffix pipelining down each tree.
// ===========================================================================

#[derive(Clone, Debug)]
pub enum SuffixMsg {
    /// Child registering with its tree parent.
    Register { k: u32 },
    /// One relevant-list entry flowing down, oriented (parent, child).
    Entry { k: u32, x: u32, y: u32 },
}

pub struct SuffixStage {
    pub sigma_prime: usize,
    pub num_sources: usize,
}

#[derive(Clone, Default)]
pub struct SuffixNode {
    depth: Vec<Option<u32>>,
    parent: Vec<Option<VertexId>>,
    /// Own relevant list per source, bottom-up.
    entries: Vec<Vec<OrientedEdge>>,
    /// Registered children and how many entries each has been sent.
    children: Vec<Vec<(VertexId, usize)>>,
}

impl SuffixNode {
    fn target_len(&self, k: usize, sigma_prime: usize) -> usize {
        match self.depth[k] {
            Some(d) => (d as usize).min(sigma_prime),
            None => 0,
        }
    }
}

impl Protocol for SuffixStage {
    type Msg = SuffixMsg;
    type Node = SuffixNode;

    fn start(&self, node: &mut SuffixNode, ctx: &NodeCtx<'_>) -> StepOutput<SuffixMsg> {
        let mut out = Vec::new();
        for k in 0..self.num_sources {
            if let Some(p) = node.parent[k] {
                // own parent edge is entry 0, known from the tree stage
                node.entries[k].push((p, ctx.id));
                if node.target_len(k, self.sigma_prime) > 1 {
                    out.push(OutMsg { to: p, units: 1, msg: SuffixMsg::Register { k: k as u32 } });
                }
            }
        }
        StepOutput { outbox: out, wake: None }
    }

    fn step(
        &self,
        node: &mut SuffixNode,
        _ctx: &NodeCtx<'_>,
        _round: Round,
        inbox: Vec<Envelope<SuffixMsg>>,
    ) -> StepOutput<SuffixMsg> {
        let mut out = Vec::new();
        for env in inbox {
            match env.msg {
                SuffixMsg::Register { k } => {
                    let k = k as usize;
                    // stream what is already known, then forward new arrivals
                    let send_now = node.entries[k].len().min(self.sigma_prime - 1);
                    for i in 0..send_now {
                        let (x, y) = node.entries[k][i];
                        out.push(OutMsg {
                            to: env.from,
                            units: 1,
                            msg: SuffixMsg::Entry { k: k as u32, x: x as u32, y: y as u32 },
                        });
                    }
                    node.children[k].push((env.from, send_now));
                }
                SuffixMsg::Entry { k, x, y } => {
                    let k = k as usize;
                    debug_assert_eq!(node.parent[k], Some(env.from));
                    node.entries[k].push((x as usize, y as usize));
                    let idx = node.entries[k].len() - 1;
                    if idx < self.sigma_prime - 1 {
                        for (child, sent) in node.children[k].iter_mut() {
                            debug_assert_eq!(*sent, idx);
                            out.push(OutMsg {
                                to: *child,
                                units: 1,
                                msg: SuffixMsg::Entry { k: k as u32, x, y },
                            });
                            *sent += 1;
                        }
                    }
                }
            }
        }
        StepOutput { outbox: out, wake: None }
    }
}

/// Downward pipelined suffix propagation over already-built trees; the tree
/// edges travel sigma' hops down, giving each vertex its relevant list.
pub fn learn_suffixes(
    g: &Graph,
    depths: &[Vec<Option<u32>>],
    parents: &[Vec<Option<VertexId>>],
    source_idxs: &[usize],
    sigma_prime: usize,
    net: &NetworkConfig,
) -> Result<(Vec<Vec<RelevantList>>, SimTrace), SimError> {
    let nodes: Vec<SuffixNode> = (0..g.n())
        .map(|v| SuffixNode {
            depth: source_idxs.iter().map(|&k| depths[v][k]).collect(),
            parent: source_idxs.iter().map(|&k| parents[v][k]).collect(),
            entries: vec![Vec::new(); source_idxs.len()],
            children: vec![Vec::new(); source_idxs.len()],
        })
        .collect();
    let stage = SuffixStage { sigma_prime, num_sources: source_idxs.len() };
    let out = run(g, &stage, nodes, net, "suffix_stage")?;
    let lists = out
        .nodes
        .into_iter()
        .map(|nd| nd.entries.into_iter().map(|entries| RelevantList { entries }).collect())
        .collect();
    Ok((lists, out.trace))
}

// ===========================================================================
// Stage 3: exchange relevant lists with neighbors.
// ===========================================================================

#[derive(Clone, Debug)]
pub struct ExchangeMsg {
    k: u32,
    x: u32,
    y: u32,
}

struct ExchangeStage;

#[derive(Clone, Default)]
struct ExchangeNode {
    lists: Vec<RelevantList>,
    /// received lists per neighbor position per source
    nbr: Vec<Vec<Vec<OrientedEdge>>>,
}

impl Protocol for ExchangeStage {
    type Msg = ExchangeMsg;
    type Node = ExchangeNode;

    fn start(&self, node: &mut ExchangeNode, ctx: &NodeCtx<'_>) -> StepOutput<ExchangeMsg> {
        let mut out = Vec::new();
        for &u in ctx.neighbors {
            for (k, list) in node.lists.iter().enumerate() {
                for &(x, y) in &list.entries {
                    out.push(OutMsg {
                        to: u,
                        units: 1,
                        msg: ExchangeMsg { k: k as u32, x: x as u32, y: y as u32 },
                    });
                }
            }
        }
        StepOutput { outbox: out, wake: None }
    }

    fn step(
        &self,
        node: &mut ExchangeNode,
        ctx: &NodeCtx<'_>,
        _round: Round,
        inbox: Vec<Envelope<ExchangeMsg>>,
    ) -> StepOutput<ExchangeMsg> {
        for env in inbox {
            let pos = ctx.neighbors.binary_search(&env.from).unwrap();
            node.nbr[pos][env.msg.k as usize].push((env.msg.x as usize, env.msg.y as usize));
        }
        StepOutput::idle()
    }
}

pub fn run_exchange(
    g: &Graph,
    lists: &[Vec<RelevantList>],
    net: &NetworkConfig,
) -> Result<(Vec<Vec<Vec<RelevantList>>>, SimTrace), SimError> {
    let num_sources = lists[0].len();
    let nodes: Vec<ExchangeNode> = (0..g.n())
        .map(|v| ExchangeNode {
            lists: lists[v].clone(),
            nbr: vec![vec![Vec::new(); num_sources]; g.degree(v)],
        })
        .collect();
    let out = run(g, &ExchangeStage, nodes, net, "exchange_stage")?;
    let nbr_lists = out
        .nodes
        .into_iter()
        .map(|nd| {
            nd.nbr
                .into_iter()
                .map(|per_src| {
                    per_src.into_iter().map(|entries| RelevantList { entries }).collect()
                })
                .collect()
        })
        .collect();
    Ok((nbr_lists, out.trace))
}

// ===========================================================================
// Stage 5: randomly delayed truncated BFS tokens.
// ===========================================================================

/// How a token stage uses its arrivals.
#[derive(Clone, Debug)]
pub enum TokenMode {
    /// Record a preserver edge at first arrival when the fault sits in the
    /// receiver's sigma-window.
    Build { record_sigma: usize },
    /// Only record arrivals; used by the distance/suffix info stages.
    Info {
        /// Stream this many trailing path edges inside each token.
        stream_suffix: usize,
        /// When set, receiver eligibility is membership in these per-vertex
        /// key sets instead of the sigma'-window rule.
        restrict: Option<Vec<HashSet<(usize, EdgeId)>>>,
    },
}

pub struct TokenStageSpec<'a> {
    pub sources: &'a [VertexId],
    /// Depth of every vertex in each source's fault-free tree, indexed so
    /// that index k belongs to `sources[k]`.
    pub depths: &'a [Vec<Option<u32>>],
    pub lists: &'a [Vec<RelevantList>],
    pub nbr_lists: &'a [Vec<Vec<RelevantList>>],
    pub seed: SharedSeed,
    pub delay_range: u64,
    pub mode: TokenMode,
}

#[derive(Clone, Debug)]
pub struct TokenStageResult {
    pub arrivals: Vec<BTreeMap<(usize, EdgeId), TokenArrival>>,
    /// Preserver edges recorded by Build mode, tagged with their keys.
    pub h_edges: Vec<(EdgeId, TokenKey)>,
    pub trace: SimTrace,
}

struct TokenStage<'a> {
    spec: &'a TokenStageSpec<'a>,
}

#[derive(Clone)]
struct InitEvent {
    enqueue_round: Round,
    to: VertexId,
    s_idx: u32,
    edge: EdgeId,
    wave: Phase,
}

#[derive(Default)]
struct TokenNode {
    id: VertexId,
    /// initiation schedule sorted by enqueue round
    schedule: Vec<InitEvent>,
    cursor: usize,
    /// eligible (s_idx, edge) keys per neighbor position
    nbr_keys: Vec<HashSet<(usize, EdgeId)>>,
    /// own-window position per key, for the record gate
    own_pos: HashMap<(usize, EdgeId), usize>,
    /// own path suffix per source (for initiation payloads), bottom-up
    own_entries: Vec<Vec<OrientedEdge>>,
    /// buffered arrivals: wave -> (s_idx, edge, sender, payload, on_time)
    stash: BTreeMap<Phase, Vec<(usize, EdgeId, VertexId, Vec<OrientedEdge>, bool)>>,
    arrivals: BTreeMap<(usize, EdgeId), TokenArrival>,
    h_edges: Vec<(EdgeId, TokenKey)>,
}

impl TokenNode {
    fn next_wake(&self, phase_len: u64) -> Option<Round> {
        let sched = self.schedule.get(self.cursor).map(|e| e.enqueue_round);
        let stash = self.stash.keys().next().map(|&w| w * phase_len);
        match (sched, stash) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

impl TokenStage<'_> {
    fn tau(&self, s: VertexId, e: EdgeId) -> u64 {
        delay_of(&self.spec.seed, &TokenKey::single(s, e).words(), self.spec.delay_range)
    }

    fn stream_suffix(&self) -> usize {
        match &self.spec.mode {
            TokenMode::Info { stream_suffix, .. } => *stream_suffix,
            TokenMode::Build { .. } => 0,
        }
    }

    /// Process stash entries due at `phase`: first-arrival records, the
    /// min-ID parent rule, and the one-phase-later relays.
    fn drain(
        &self,
        node: &mut TokenNode,
        ctx: &NodeCtx<'_>,
        phase: Phase,
        out: &mut Vec<OutMsg<TokenMsg>>,
    ) {
        loop {
            let Some((&w, _)) = node.stash.iter().next() else { break };
            if w > phase {
                break;
            }
            let batch = node.stash.remove(&w).unwrap();
            let mut by_key: BTreeMap<(usize, EdgeId), Vec<(VertexId, Vec<OrientedEdge>, bool)>> =
                BTreeMap::new();
            for (k, e, from, payload, on_time) in batch {
                by_key.entry((k, e)).or_default().push((from, payload, on_time));
            }
            for ((k, e), mut senders) in by_key {
                if node.arrivals.contains_key(&(k, e)) {
                    continue; // duplicate first-arrival in a later phase: ignored
                }
                senders.sort_by_key(|(from, _, _)| *from);
                let (parent, payload, on_time) = senders[0].clone();
                let s = self.spec.sources[k];
                node.arrivals.insert(
                    (k, e),
                    TokenArrival { wave: w, parent, tau: self.tau(s, e), payload: payload.clone(), on_time },
                );
                if let TokenMode::Build { record_sigma } = &self.spec.mode {
                    if node.own_pos.get(&(k, e)).is_some_and(|&p| p <= *record_sigma) {
                        node.h_edges.push((EdgeId::new(parent, node.id), TokenKey::single(s, e)));
                    }
                }
                let sender_set: Vec<VertexId> = senders.iter().map(|(f, _, _)| *f).collect();
                for (pos, &u) in ctx.neighbors.iter().enumerate() {
                    if sender_set.contains(&u) || e.is(node.id, u) {
                        continue;
                    }
                    if !node.nbr_keys[pos].contains(&(k, e)) {
                        continue;
                    }
                    let cap = self.stream_suffix();
                    let mut pl = Vec::new();
                    if cap > 0 {
                        pl = payload.clone();
                        pl.push((node.id, u));
                        if pl.len() > cap {
                            pl.remove(0);
                        }
                    }
                    out.push(token_msg(u, k, s, e, w + 1, pl));
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
struct TokenMsg {
    s_idx: u32,
    token: Token,
}

fn token_msg(
    to: VertexId,
    k: usize,
    source: VertexId,
    e: EdgeId,
    wave: Phase,
    payload: Vec<OrientedEdge>,
) -> OutMsg<TokenMsg> {
    let token = Token { key: TokenKey::single(source, e), wave, payload };
    let units = token.units();
    OutMsg { to, units, msg: TokenMsg { s_idx: k as u32, token } }
}

impl Protocol for TokenStage<'_> {
    type Msg = TokenMsg;
    type Node = TokenNode;

    fn start(&self, node: &mut TokenNode, _ctx: &NodeCtx<'_>) -> StepOutput<TokenMsg> {
        StepOutput {
            outbox: Vec::new(),
            wake: node.schedule.first().map(|e| e.enqueue_round.max(1)),
        }
    }

    fn step(
        &self,
        node: &mut TokenNode,
        ctx: &NodeCtx<'_>,
        round: Round,
        inbox: Vec<Envelope<TokenMsg>>,
    ) -> StepOutput<TokenMsg> {
        let mut out = Vec::new();
        let phase = ctx.phase_of(round);

        // Stash arrivals; a late delivery's effective wave is bumped to the
        // present so causality survives queue slippage.
        for env in inbox {
            let k = env.msg.s_idx as usize;
            let e = env.msg.token.key.faults.iter().next().unwrap();
            let wave = env.msg.token.wave;
            let eff = wave.max(phase);
            node.stash
                .entry(eff)
                .or_default()
                .push((k, e, env.from, env.msg.token.payload, eff == wave));
        }

        // Fire scheduled initiations due now.
        while node.cursor < node.schedule.len()
            && node.schedule[node.cursor].enqueue_round <= round
        {
            let ev = node.schedule[node.cursor].clone();
            node.cursor += 1;
            let cap = self.stream_suffix();
            let mut payload = Vec::new();
            if cap > 0 {
                let own = &node.own_entries[ev.s_idx as usize];
                let take = own.len().min(cap - 1);
                // own entries are bottom-up; path order is the reverse
                for i in (0..take).rev() {
                    payload.push(own[i]);
                }
                payload.push((node.id, ev.to));
            }
            let s = self.spec.sources[ev.s_idx as usize];
            out.push(token_msg(ev.to, ev.s_idx as usize, s, ev.edge, ev.wave, payload));
        }

        // Handle stash entries whose wave has begun.
        self.drain(node, ctx, phase, &mut out);

        StepOutput { outbox: out, wake: node.next_wake(ctx.phase_len).filter(|&w| w > round) }
    }
}

/// Runs one truncated-BFS token stage.
pub fn run_token_stage(
    g: &Graph,
    spec: &TokenStageSpec<'_>,
    net: &NetworkConfig,
    label: &str,
) -> Result<TokenStageResult, SimError> {
    let phase_len = net.phase_length(g.n());
    let stage = TokenStage { spec };

    let restrict = match &spec.mode {
        TokenMode::Info { restrict, .. } => restrict.as_ref(),
        _ => None,
    };

    // Per-node eligibility tables and initiation schedules, all derived
    // from knowledge the earlier stages delivered to that node.
    let mut nodes: Vec<TokenNode> = Vec::with_capacity(g.n());
    for v in g.vertices() {
        let mut node = TokenNode {
            id: v,
            own_entries: spec.lists[v].iter().map(|l| l.entries.clone()).collect(),
            ..TokenNode::default()
        };
        let nbrs = g.neighbors(v);
        node.nbr_keys = (0..nbrs.len())
            .map(|pos| match restrict {
                Some(sets) => sets[nbrs[pos]].clone(),
                None => {
                    let mut set = HashSet::new();
                    for (k, list) in spec.nbr_lists[v][pos].iter().enumerate() {
                        for &(x, y) in &list.entries {
                            set.insert((k, EdgeId::new(x, y)));
                        }
                    }
                    set
                }
            })
            .collect();
        for (k, list) in spec.lists[v].iter().enumerate() {
            for (i, &(x, y)) in list.entries.iter().enumerate() {
                node.own_pos.insert((k, EdgeId::new(x, y)), i + 1);
            }
        }
        let mut events: Vec<InitEvent> = Vec::new();
        for (pos, &u) in nbrs.iter().enumerate() {
            for &(k, e) in node.nbr_keys[pos].iter() {
                if e.is(v, u) {
                    continue; // never send a token across its own fault
                }
                let Some(depth) = spec.depths[v][k] else { continue };
                let on_own = membership_from_own_list(
                    &spec.lists[v][k],
                    spec.depths[v][k].map(|d| d as usize),
                    oriented_in_nbr_list(&spec.nbr_lists[v][pos][k], e),
                );
                if on_own {
                    continue;
                }
                let s = spec.sources[k];
                let tau = delay_of(&spec.seed, &TokenKey::single(s, e).words(), spec.delay_range);
                let wave = depth as u64 + tau + 1;
                events.push(InitEvent {
                    enqueue_round: (wave - 1) * phase_len,
                    to: u,
                    s_idx: k as u32,
                    edge: e,
                    wave,
                });
            }
        }
        events.sort_by(|a, b| {
            (a.enqueue_round, a.s_idx, a.edge, a.to).cmp(&(b.enqueue_round, b.s_idx, b.edge, b.to))
        });
        node.schedule = events;
        nodes.push(node);
    }

    let out: RunOutput<TokenNode> = run(g, &stage, nodes, net, label)?;
    let mut arrivals = Vec::with_capacity(g.n());
    let mut h_edges = Vec::new();
    for nd in out.nodes {
        arrivals.push(nd.arrivals);
        h_edges.extend(nd.h_edges);
    }
    h_edges.sort_by_key(|(e, k)| (*e, k.source, k.faults));
    Ok(TokenStageResult { arrivals, h_edges, trace: out.trace })
}

/// Recover the (parent, child) orientation of `e` from the neighbor list
/// that mentioned it; the exchange stage preserves orientation. Falls back
/// to the canonical order when the restrict mode supplied a key the window
/// no longer holds.
fn oriented_in_nbr_list(list: &RelevantList, e: EdgeId) -> OrientedEdge {
    for &(a, b) in &list.entries {
        if e.is(a, b) {
            return (a, b);
        }
    }
    e.endpoints()
}

// ===========================================================================
// Driver: the full single-failure pipeline.
// ===========================================================================

#[derive(Clone, Debug)]
pub struct FtmbfsOutput {
    pub preserver: PreserverSubgraph,
    pub params: FtmbfsParams,
    pub sources: Vec<VertexId>,
    pub sampled: Vec<VertexId>,
    /// Tree roots in index order: sources first, then the sampled extras.
    pub all_roots: Vec<VertexId>,
    pub knowledge: Vec<NodeKnowledge>,
    pub token_h: Vec<(EdgeId, TokenKey)>,
    pub seed: SharedSeed,
    pub traces: Vec<SimTrace>,
    pub rounds_total: u64,
}

impl FtmbfsOutput {
    pub fn trace_by_label(&self, label: &str) -> Option<&SimTrace> {
        self.traces.iter().find(|t| t.label == label)
    }

    /// Combined trace over all stages.
    pub fn combined_trace(&self) -> SimTrace {
        let mut total = SimTrace { label: "ftmbfs".into(), ..SimTrace::default() };
        for t in &self.traces {
            total.absorb(t);
        }
        total
    }
}

/// Distributed single-failure FT-MBFS. Disconnected graphs run the
/// construction per component; components without a source need no edges.
pub fn build_ftmbfs(
    g: &Graph,
    sources: &[VertexId],
    cfg: &FtmbfsConfig,
    seed: u64,
) -> Result<FtmbfsOutput, BuildError> {
    if sources.is_empty() {
        return Err(BuildError::NoSources);
    }
    for &s in sources {
        if s >= g.n() {
            return Err(BuildError::BadSource(s));
        }
    }
    let mut sources = sources.to_vec();
    sources.sort_unstable();
    sources.dedup();

    if g.is_connected() {
        return build_ftmbfs_connected(g, &sources, cfg, seed);
    }

    let mut merged = PreserverSubgraph::new(g.n());
    let mut traces = Vec::new();
    let mut rounds_total = 0;
    let mut first: Option<FtmbfsOutput> = None;
    for comp in g.components() {
        let comp_sources: Vec<VertexId> =
            sources.iter().copied().filter(|s| comp.contains(s)).collect();
        if comp_sources.is_empty() {
            continue;
        }
        let (sub, ids) = g.induced(&comp);
        let local: Vec<VertexId> =
            comp_sources.iter().map(|s| ids.binary_search(s).unwrap()).collect();
        let out = build_ftmbfs_connected(&sub, &local, cfg, seed)?;
        for (e, rule) in out.preserver.iter() {
            merged.insert(EdgeId::new(ids[e.lo()], ids[e.hi()]), rule);
        }
        rounds_total += out.rounds_total;
        traces.extend(out.traces.clone());
        if first.is_none() {
            first = Some(out);
        }
    }
    let out = first.ok_or(BuildError::NoSources)?;
    Ok(FtmbfsOutput {
        preserver: merged,
        params: out.params,
        sources,
        sampled: Vec::new(),
        all_roots: Vec::new(),
        knowledge: Vec::new(),
        token_h: Vec::new(),
        seed: out.seed,
        traces,
        rounds_total,
    })
}

fn build_ftmbfs_connected(
    g: &Graph,
    sources: &[VertexId],
    cfg: &FtmbfsConfig,
    seed: u64,
) -> Result<FtmbfsOutput, BuildError> {
    let params = FtmbfsParams::new(g.n(), sources.len(), cfg.ln_const);
    let net = &cfg.network;
    let mut traces = Vec::new();

    // Stage 0/1: sample extra roots, then build every tree concurrently.
    let sampled = sample(g, params.sample_prob, seed ^ 0xd6e8_feb8_6659_fd93);
    let mut all_roots = sources.to_vec();
    for &r in &sampled {
        if !sources.contains(&r) {
            all_roots.push(r);
        }
    }
    let (depths, parents, t_trace) = run_tree_stage(g, &all_roots, net)?;
    traces.push(t_trace);

    let mut h = PreserverSubgraph::new(g.n());
    for k in 0..all_roots.len() {
        let rule = if k < sources.len() { Rule::SourceTree } else { Rule::SampleTree };
        for v in g.vertices() {
            if let Some(p) = parents[v][k] {
                h.insert(EdgeId::new(p, v), rule);
            }
        }
    }

    // Stage 2: relevant lists for the sources only.
    let source_idxs: Vec<usize> = (0..sources.len()).collect();
    let (lists, s_trace) =
        learn_suffixes(g, &depths, &parents, &source_idxs, params.sigma_prime, net)?;
    traces.push(s_trace);

    // Stage 3: neighbors' lists.
    let (nbr_lists, x_trace) = run_exchange(g, &lists, net)?;
    traces.push(x_trace);

    // Stage 4: shared randomness.
    let bits = splitmix_seed(seed);
    let (shared, b_trace) = broadcast_seed(g, bits, net)?;
    traces.push(b_trace);

    // Stage 5: tokens.
    let spec = TokenStageSpec {
        sources,
        depths: &depths,
        lists: &lists,
        nbr_lists: &nbr_lists,
        seed: shared,
        delay_range: params.delay_range,
        mode: TokenMode::Build { record_sigma: params.sigma },
    };
    let result = run_token_stage(g, &spec, net, "token_stage")?;
    traces.push(result.trace.clone());
    for (e, _) in &result.h_edges {
        h.insert(*e, Rule::TokenParent);
    }

    let knowledge: Vec<NodeKnowledge> = depths
        .into_iter()
        .zip(parents)
        .zip(lists)
        .zip(nbr_lists)
        .zip(result.arrivals)
        .enumerate()
        .map(|(v, ((((depths, parents), lists), nbr_lists), arrivals))| NodeKnowledge {
            id: v,
            depths,
            parents,
            lists,
            nbr_lists,
            arrivals,
        })
        .collect();

    let rounds_total = traces.iter().map(|t| t.rounds_used).sum();
    Ok(FtmbfsOutput {
        preserver: h,
        params,
        sources: sources.to_vec(),
        sampled,
        all_roots,
        knowledge,
        token_h: result.h_edges,
        seed: shared,
        traces,
        rounds_total,
    })
}

fn splitmix_seed(seed: u64) -> u64 {
    delay_of(&SharedSeed { bits: seed, broadcast_round: 0 }, &[0x5eed_b175], u64::MAX)
}

// ===========================================================================
// Sequential replay oracle: the simulator-independent reference execution.
// ===========================================================================

/// Expected first arrival of every token at every vertex, computed by a
/// sequential event-ordering relaxation that never touches the simulator:
/// (source index, fault edge, vertex) -> (wave, min-ID parent).
pub fn reference_token_schedule(
    g: &Graph,
    sources: &[VertexId],
    params: &FtmbfsParams,
    seed: &SharedSeed,
) -> BTreeMap<(usize, EdgeId, VertexId), (Phase, VertexId)> {
    let mut out = BTreeMap::new();
    for (k, &s) in sources.iter().enumerate() {
        let tree = bfs_consistent(g, s, FaultSet::empty());
        let window: Vec<RelevantList> = g
            .vertices()
            .map(|v| match tree.path_to(v) {
                Some(p) => RelevantList {
                    entries: suffix(&p, params.sigma_prime)
                        .edges()
                        .iter()
                        .rev()
                        .map(|e| tree.orient(*e).unwrap())
                        .collect(),
                },
                None => RelevantList::default(),
            })
            .collect();
        let mut keys: Vec<EdgeId> = window
            .iter()
            .flat_map(|l| l.entries.iter().map(|&(x, y)| EdgeId::new(x, y)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        for e in keys {
            let tau = delay_of(seed, &TokenKey::single(s, e).words(), params.delay_range);
            let eligible: Vec<bool> = g.vertices().map(|v| window[v].contains(e)).collect();
            let mut best: HashMap<VertexId, (Phase, VertexId)> = HashMap::new();
            let mut frontier: std::collections::BinaryHeap<
                std::cmp::Reverse<(Phase, VertexId, VertexId)>,
            > = Default::default();
            for v in g.vertices() {
                let Some(d) = tree.depth(v) else { continue };
                if tree.on_path(e, v) {
                    continue;
                }
                for &u in g.neighbors(v) {
                    if eligible[u] && !e.is(u, v) {
                        frontier.push(std::cmp::Reverse((d as u64 + tau + 1, u, v)));
                    }
                }
            }
            while let Some(std::cmp::Reverse((wave, v, from))) = frontier.pop() {
                match best.get(&v) {
                    Some(&(w, p)) if w < wave || (w == wave && p <= from) => continue,
                    _ => {}
                }
                best.insert(v, (wave, from));
                for &u in g.neighbors(v) {
                    if u != from && eligible[u] && !e.is(u, v) {
                        frontier.push(std::cmp::Reverse((wave + 1, u, v)));
                    }
                }
            }
            for (v, (wave, parent)) in best {
                out.insert((k, e, v), (wave, parent));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::oracle::verify_preserver;
    use std::collections::BTreeSet;

    fn cfg() -> FtmbfsConfig {
        FtmbfsConfig::default()
    }

    #[test]
    fn p5_is_exact_tree() {
        let g = gen::path(5);
        let out = build_ftmbfs(&g, &[0], &cfg(), 1).unwrap();
        assert_eq!(out.preserver.len(), 4);
        assert!(out.token_h.is_empty(), "a path emits no tokens");
        let rep = verify_preserver(&g, &out.preserver.edges().collect(), &[0], 1).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn random_graphs_pass_oracle_all_source_counts() {
        for (i, &num_s) in [1usize, 2, 4].iter().enumerate() {
            for seed in 0..4u64 {
                let salt = i as u64 * 101 + seed * 13;
                let g =
                    gen::connected(|s| gen::erdos_renyi(30, 0.2, 7000 + salt + s), 50).unwrap();
                let sources: Vec<VertexId> = (0..num_s).map(|j| j * 5).collect();
                let out = build_ftmbfs(&g, &sources, &cfg(), seed).unwrap();
                let rep =
                    verify_preserver(&g, &out.preserver.edges().collect(), &sources, 1).unwrap();
                assert!(rep.pass, "|S|={num_s} seed={seed}: {}", rep.summary(5));
            }
        }
    }

    #[test]
    fn tree_stage_matches_offline_bfs() {
        let g = gen::connected(|s| gen::erdos_renyi(40, 0.15, 31 + s), 50).unwrap();
        let roots = vec![0, 7, 19];
        let (depths, parents, _) = run_tree_stage(&g, &roots, &NetworkConfig::default()).unwrap();
        for (k, &r) in roots.iter().enumerate() {
            let tree = bfs_consistent(&g, r, FaultSet::empty());
            for v in g.vertices() {
                assert_eq!(depths[v][k].map(|d| d as usize), tree.depth(v), "root {r} vertex {v}");
                assert_eq!(parents[v][k], tree.parent(v), "root {r} vertex {v}");
            }
        }
    }

    #[test]
    fn suffix_stage_matches_offline_suffixes() {
        let g = gen::connected(|s| gen::erdos_renyi(35, 0.18, 77 + s), 50).unwrap();
        let roots = vec![0, 11];
        let sp = 4usize;
        let net = NetworkConfig::default();
        let (depths, parents, _) = run_tree_stage(&g, &roots, &net).unwrap();
        let (lists, _) = learn_suffixes(&g, &depths, &parents, &[0, 1], sp, &net).unwrap();
        for (k, &r) in roots.iter().enumerate() {
            let tree = bfs_consistent(&g, r, FaultSet::empty());
            for v in g.vertices() {
                let want: Vec<OrientedEdge> = match tree.path_to(v) {
                    Some(p) => suffix(&p, sp)
                        .edges()
                        .iter()
                        .rev()
                        .map(|e| tree.orient(*e).unwrap())
                        .collect(),
                    None => Vec::new(),
                };
                assert_eq!(lists[v][k].entries, want, "root {r} vertex {v}");
            }
        }
    }

    #[test]
    fn suffix_stage_per_edge_message_bound() {
        let g = gen::connected(|s| gen::erdos_renyi(30, 0.2, 2121 + s), 50).unwrap();
        let sp = 6usize;
        let roots = vec![0, 3, 9];
        let net = NetworkConfig::default();
        let (depths, parents, _) = run_tree_stage(&g, &roots, &net).unwrap();
        let (_, trace) = learn_suffixes(&g, &depths, &parents, &[0, 1, 2], sp, &net).unwrap();
        let bound = (roots.len() * sp) as u64;
        assert!(
            trace.max_edge_total_units <= bound,
            "{} units on one edge > |S| * sigma' = {bound}",
            trace.max_edge_total_units
        );
    }

    #[test]
    fn path_membership_agrees_with_offline_truth() {
        let g = gen::connected(|s| gen::erdos_renyi(30, 0.2, 555 + s), 50).unwrap();
        let sources = vec![0, 9];
        let out = build_ftmbfs(&g, &sources, &cfg(), 3).unwrap();
        for (k, &s) in sources.iter().enumerate() {
            let tree = bfs_consistent(&g, s, FaultSet::empty());
            for v in g.vertices() {
                let kn = &out.knowledge[v];
                for (pos, &u) in g.neighbors(v).iter().enumerate() {
                    for &(x, y) in &kn.nbr_lists[pos][k].entries {
                        let got = kn.local_path_membership(u, pos, k, (x, y)).unwrap();
                        let want = tree.on_path(EdgeId::new(x, y), v);
                        assert_eq!(got, want, "v={v} u={u} s={s} e=({x},{y})");
                    }
                }
                if let Some(&u) = g.neighbors(v).first() {
                    let bogus = (v, u);
                    if !kn.nbr_lists[0][k].entries.contains(&bogus) {
                        assert!(kn.local_path_membership(u, 0, k, bogus).is_err());
                    }
                }
            }
        }
    }

    #[test]
    fn arrivals_are_on_schedule() {
        let g = gen::connected(|s| gen::erdos_renyi(28, 0.2, 888 + s), 50).unwrap();
        let out = build_ftmbfs(&g, &[0, 13], &cfg(), 2).unwrap();
        let rep = verify_preserver(&g, &out.preserver.edges().collect(), &[0, 13], 1).unwrap();
        assert!(rep.pass, "{}", rep.summary(5));
        for v in g.vertices() {
            for ((k, e), arr) in &out.knowledge[v].arrivals {
                assert!(arr.on_time, "late arrival at {v} for ({k},{e})");
                // no-earlier-than-schedule: wave >= dist(s,v,G-e) + tau
                let s = out.sources[*k];
                let d = bfs_consistent(&g, s, FaultSet::single(*e)).depth(v).unwrap() as u64;
                assert!(arr.wave >= d + arr.tau, "v={v} e={e}: wave {} < {}", arr.wave, d + arr.tau);
            }
        }
    }

    #[test]
    fn output_size_within_bound() {
        let g = gen::connected(|s| gen::erdos_renyi(40, 0.15, 999 + s), 50).unwrap();
        let sources = vec![0, 13];
        let out = build_ftmbfs(&g, &sources, &cfg(), 5).unwrap();
        // |H| <= |BFS forest of S u R| + sum_v |union_s pi_sigma(s, v)|
        let mut bound = 0usize;
        for &r in &out.all_roots {
            let tree = bfs_consistent(&g, r, FaultSet::empty());
            bound += g.vertices().filter(|&v| tree.parent(v).is_some()).count();
        }
        for v in g.vertices() {
            let mut set = BTreeSet::new();
            for (k, _) in sources.iter().enumerate() {
                for &(x, y) in out.knowledge[v].lists[k].entries.iter().take(out.params.sigma) {
                    set.insert(EdgeId::new(x, y));
                }
            }
            bound += set.len();
        }
        assert!(out.preserver.len() <= bound);
    }

    #[test]
    fn disconnected_graph_builds_per_component() {
        let g = Graph::from_edges(8, [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7), (4, 7)])
            .unwrap();
        let out = build_ftmbfs(&g, &[0, 4], &cfg(), 9).unwrap();
        let rep = verify_preserver(&g, &out.preserver.edges().collect(), &[0, 4], 1).unwrap();
        assert!(rep.pass, "{}", rep.summary(5));
    }

    #[test]
    fn deterministic_given_seed() {
        let g = gen::connected(|s| gen::erdos_renyi(25, 0.22, 4242 + s), 50).unwrap();
        let a = build_ftmbfs(&g, &[0, 6], &cfg(), 77).unwrap();
        let b = build_ftmbfs(&g, &[0, 6], &cfg(), 77).unwrap();
        let ea: Vec<EdgeId> = a.preserver.edges().collect();
        let eb: Vec<EdgeId> = b.preserver.edges().collect();
        assert_eq!(ea, eb);
        assert_eq!(a.rounds_total, b.rounds_total);
        assert_eq!(a.token_h, b.token_h);
    }
}
