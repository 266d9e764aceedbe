//! Deferred-decision search over the hypothesis tree.
//!
//! Each frame's association is committed only after looking `N` frames
//! ahead: the engine grows a tree of hypotheses whose depth-`l` nodes assign
//! the detections of frame `t + l − 1`, and commits the depth-1 node on the
//! cheapest complete path. Two regimes build the tree:
//!
//! * [`Regime::ExplicitTree`] expands the `K` best children of every node,
//!   searched depth first with incumbent (branch-and-bound) pruning.
//! * [`Regime::KBestOfK`] keeps only the `K` globally best children of the
//!   whole frontier at each depth.
//!
//! The cost-matrix prediction for a child is its parent's completed state.

pub mod geometry;

use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::{build_cost_matrix, k_best_of_k, murty_k_best, CostMatrix};
use crate::association::AssociationModel;
use crate::error::{Error, Result};
use crate::evaluation::{frame_check, ErrorEvent};
use crate::interpolation::complete_with_adjacency;
use crate::model::{Assignment, DetectionSet, GateConfig, Hypothesis, TrackState};

pub use geometry::segments_intersect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "explicit")]
    ExplicitTree,
    #[serde(rename = "kbest")]
    KBestOfK,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::ExplicitTree => "explicit",
            Regime::KBestOfK => "kbest",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Regime::ExplicitTree),
            "kbest" => Ok(Regime::KBestOfK),
            _ => Err(Error::InvalidConfig(format!("unknown search regime '{s}'"))),
        }
    }
}

/// Search parameters. `k = usize::MAX` enumerates every hypothesis.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub k: usize,
    pub n: usize,
    pub regime: Regime,
    pub model: AssociationModel,
    pub gates: GateConfig,
    pub prune_intersections: bool,
}

impl SearchConfig {
    /// Single-hypothesis, no-lookahead search (a GNN tracker under the MHT model).
    pub fn new(model: AssociationModel, gates: GateConfig) -> Self {
        Self {
            k: 1,
            n: 1,
            regime: Regime::ExplicitTree,
            model,
            gates,
            prune_intersections: false,
        }
    }

    pub fn with_kn(mut self, k: usize, n: usize) -> Self {
        self.k = k;
        self.n = n;
        self
    }

    pub fn with_regime(mut self, regime: Regime) -> Self {
        self.regime = regime;
        self
    }

    pub fn with_pruning(mut self, prune: bool) -> Self {
        self.prune_intersections = prune;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidConfig(format!(
                "K and N must be at least 1 (K={}, N={})",
                self.k, self.n
            )));
        }
        self.gates.validate(self.model.graph().vertex_count())
    }
}

/// A node of the hypothesis tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchNode {
    pub depth: usize,
    pub hypothesis: Hypothesis,
    /// Arena index of the parent, where the regime keeps an arena.
    pub parent: Option<usize>,
    pub path_cost: f64,
}

impl SearchNode {
    /// Depth-0 node holding the last committed state.
    pub fn root(prev: &TrackState) -> Self {
        Self {
            depth: 0,
            hypothesis: Hypothesis {
                assignment: Assignment::all_gated(prev.len()),
                completed_state: prev.clone(),
                unary_cost: 0.0,
                model_cost: 0.0,
                cumulative_cost: 0.0,
            },
            parent: None,
            path_cost: 0.0,
        }
    }

    pub fn state(&self) -> &TrackState {
        &self.hypothesis.completed_state
    }
}

/// A depth-1 hypothesis considered at a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub assignment: Assignment,
    pub state: TrackState,
    pub unary_cost: f64,
    pub model_cost: f64,
    /// Cheapest complete path found through this hypothesis, if any.
    pub best_path_cost: Option<f64>,
}

/// Per-step search counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub frame_index: usize,
    /// Lookahead actually used, after truncation at the sequence end.
    pub horizon: usize,
    /// Child hypotheses generated.
    pub nodes_expanded: usize,
    /// Track/detection pairs excluded by the gate, over every cost matrix built.
    pub pruned_by_gate: usize,
    pub pruned_by_intersection: usize,
    pub pruned_by_bound: usize,
    pub chosen_path_cost: f64,
    /// Cheapest path cost among the hypotheses generated at each depth.
    pub best_path_cost_per_depth: Vec<f64>,
    /// Set when no path survived intersection pruning and the step was
    /// repeated without it.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub hypothesis: Hypothesis,
    pub diagnostics: StepDiagnostics,
    /// Depth-1 hypotheses ordered by best path cost, then by their own cost.
    pub alternatives: Vec<Alternative>,
}

impl StepOutcome {
    pub fn state(&self) -> &TrackState {
        &self.hypothesis.completed_state
    }
}

struct Context<'a> {
    cfg: &'a SearchConfig,
    adjacency: Vec<Vec<usize>>,
    prune: bool,
    diag: StepDiagnostics,
    /// Children by (depth, parent state). Different paths often reach the
    /// same state, whose subtree is then identical.
    cache: HashMap<Vec<u64>, Rc<Vec<Hypothesis>>>,
}

fn state_key(depth: usize, state: &TrackState) -> Vec<u64> {
    let mut key = Vec::with_capacity(1 + 3 * state.len() + 1);
    key.push(depth as u64);
    for p in &state.positions {
        key.extend([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]);
    }
    key.push(state.lost.iter().enumerate().fold(0u64, |acc, (i, &l)| {
        acc ^ (u64::from(l) << (i % 64)).rotate_left((i / 64) as u32)
    }));
    key
}

impl Context<'_> {
    fn cost_matrix(&mut self, state: &TrackState, dets: &DetectionSet) -> Result<CostMatrix> {
        let c = build_cost_matrix(state, dets, &self.cfg.gates)?;
        self.diag.pruned_by_gate += c.gated_pairs();
        Ok(c)
    }

    /// Completes, scores and filters one candidate assignment.
    fn hypothesis(
        &mut self,
        prev: &TrackState,
        assignment: Assignment,
        unary: f64,
        dets: &DetectionSet,
    ) -> Option<Hypothesis> {
        let completed = complete_with_adjacency(prev, &assignment, dets, &self.adjacency);
        self.diag.nodes_expanded += 1;
        if self.prune && segments_intersect(&completed, self.cfg.model.graph()) {
            self.diag.pruned_by_intersection += 1;
            return None;
        }
        let cost = self.cfg.model.cost(&completed, prev, unary);
        let hypothesis = Hypothesis {
            assignment,
            completed_state: completed,
            unary_cost: unary,
            model_cost: cost,
            cumulative_cost: 0.0,
        };
        hypothesis.debug_check();
        Some(hypothesis)
    }

    /// Attaches a scored hypothesis below `parent`.
    fn node(
        &mut self,
        parent: &SearchNode,
        parent_index: Option<usize>,
        mut hypothesis: Hypothesis,
    ) -> SearchNode {
        let path_cost = parent.path_cost + hypothesis.model_cost;
        let depth = parent.depth + 1;
        let best = &mut self.diag.best_path_cost_per_depth[depth - 1];
        *best = best.min(path_cost);
        hypothesis.cumulative_cost = path_cost;
        SearchNode {
            depth,
            hypothesis,
            parent: parent_index,
            path_cost,
        }
    }
}

/// The `K` best children of one node, cheapest hypothesis cost first.
pub fn expand_explicit(
    node: &SearchNode,
    detections: &DetectionSet,
    cfg: &SearchConfig,
) -> Result<Vec<SearchNode>> {
    let mut ctx = Context::new(cfg, cfg.prune_intersections, node.depth + 1);
    ctx.expand_explicit(node, detections)
}

/// The `K` best children across a whole frontier, ranked by parent path cost
/// plus assignment cost. Children refer to their parents by frontier index.
pub fn expand_kbest_of_k(
    frontier: &[SearchNode],
    detections: &DetectionSet,
    cfg: &SearchConfig,
) -> Result<Vec<SearchNode>> {
    let depth = frontier.iter().map(|n| n.depth).max().unwrap_or(0);
    let mut ctx = Context::new(cfg, cfg.prune_intersections, depth + 1);
    ctx.expand_kbest(frontier, 0, detections)
}

impl<'a> Context<'a> {
    fn new(cfg: &'a SearchConfig, prune: bool, horizon: usize) -> Self {
        Self {
            cfg,
            adjacency: cfg.model.graph().adjacency(),
            prune,
            cache: HashMap::new(),
            diag: StepDiagnostics {
                horizon,
                best_path_cost_per_depth: vec![f64::INFINITY; horizon],
                ..StepDiagnostics::default()
            },
        }
    }

    /// Scored children of `node`, cheapest hypothesis cost first.
    fn children(&mut self, node: &SearchNode, dets: &DetectionSet) -> Result<Rc<Vec<Hypothesis>>> {
        let key = state_key(node.depth, node.state());
        if let Some(hit) = self.cache.get(&key) {
            return Ok(Rc::clone(hit));
        }
        let cost = self.cost_matrix(node.state(), dets)?;
        let ranked = murty_k_best(&cost, self.cfg.k)?;
        let mut children: Vec<Hypothesis> = ranked
            .into_iter()
            .filter_map(|r| self.hypothesis(node.state(), r.assignment, r.objective, dets))
            .collect();
        children.sort_by(|a, b| a.model_cost.total_cmp(&b.model_cost));
        let children = Rc::new(children);
        self.cache.insert(key, Rc::clone(&children));
        Ok(children)
    }

    fn expand_explicit(
        &mut self,
        node: &SearchNode,
        dets: &DetectionSet,
    ) -> Result<Vec<SearchNode>> {
        let children = self.children(node, dets)?;
        Ok(children
            .iter()
            .map(|h| self.node(node, None, h.clone()))
            .collect())
    }

    /// `offset` is the arena index of `frontier[0]`.
    fn expand_kbest(
        &mut self,
        frontier: &[SearchNode],
        offset: usize,
        dets: &DetectionSet,
    ) -> Result<Vec<SearchNode>> {
        if frontier.is_empty() {
            return Err(Error::InvalidInput("empty search frontier".into()));
        }
        let matrices = frontier
            .iter()
            .map(|n| self.cost_matrix(n.state(), dets))
            .collect::<Result<Vec<_>>>()?;
        let parents: Vec<(&CostMatrix, f64)> = matrices
            .iter()
            .zip(frontier)
            .map(|(m, n)| (m, n.path_cost))
            .collect();
        let ranked = k_best_of_k(&parents, self.cfg.k)?;
        Ok(ranked
            .into_iter()
            .filter_map(|r| {
                let parent = &frontier[r.parent];
                let h = self.hypothesis(parent.state(), r.assignment, r.objective, dets)?;
                Some(self.node(parent, Some(offset + r.parent), h))
            })
            .collect())
    }
}

/// Result of one search: the chosen depth-1 node plus every depth-1 node
/// with the best complete path found through it.
struct Search {
    depth_one: Vec<(SearchNode, Option<f64>)>,
    chosen: Option<usize>,
    chosen_cost: f64,
}

struct Explicit<'c, 'a> {
    ctx: &'c mut Context<'a>,
    dets: &'c [DetectionSet],
    horizon: usize,
    incumbent: f64,
    branch: usize,
    search: Search,
}

impl Explicit<'_, '_> {
    fn visit(&mut self, node: &SearchNode) -> Result<()> {
        let children = self.ctx.expand_explicit(node, &self.dets[node.depth])?;
        let depth = node.depth + 1;
        let count = children.len();
        for (i, child) in children.into_iter().enumerate() {
            if depth == 1 {
                self.branch = self.search.depth_one.len();
                self.search.depth_one.push((child.clone(), None));
            }
            if child.path_cost >= self.incumbent {
                if depth == 1 {
                    self.ctx.diag.pruned_by_bound += 1;
                    continue;
                }
                self.ctx.diag.pruned_by_bound += count - i;
                break;
            }
            if depth == self.horizon {
                self.incumbent = child.path_cost;
                self.search.chosen = Some(self.branch);
                self.search.chosen_cost = child.path_cost;
                let best = &mut self.search.depth_one[self.branch].1;
                *best = Some(best.map_or(child.path_cost, |b: f64| b.min(child.path_cost)));
            } else {
                self.visit(&child)?;
            }
        }
        Ok(())
    }
}

fn run_explicit(ctx: &mut Context<'_>, root: &SearchNode, dets: &[DetectionSet]) -> Result<Search> {
    let mut e = Explicit {
        ctx,
        dets,
        horizon: dets.len(),
        incumbent: f64::INFINITY,
        branch: 0,
        search: Search {
            depth_one: Vec::new(),
            chosen: None,
            chosen_cost: f64::INFINITY,
        },
    };
    e.visit(root)?;
    Ok(e.search)
}

fn run_kbest(ctx: &mut Context<'_>, root: &SearchNode, dets: &[DetectionSet]) -> Result<Search> {
    let mut arena: Vec<SearchNode> = vec![root.clone()];
    let mut frontier_start = 0;
    let mut frontier_end = 1;
    for d in dets {
        let children = ctx.expand_kbest(&arena[frontier_start..frontier_end], frontier_start, d)?;
        frontier_start = arena.len();
        arena.extend(children);
        frontier_end = arena.len();
        if frontier_start == frontier_end {
            break;
        }
    }

    let depth_one_end = 1 + arena.iter().skip(1).take_while(|n| n.depth == 1).count();
    let mut depth_one: Vec<(SearchNode, Option<f64>)> =
        arena[1..depth_one_end].iter().map(|n| (n.clone(), None)).collect();
    let mut chosen = None;
    let mut chosen_cost = f64::INFINITY;
    let complete = frontier_start < frontier_end && arena[frontier_start].depth == dets.len();
    if complete {
        for leaf_index in frontier_start..frontier_end {
            let mut i = leaf_index;
            while arena[i].depth > 1 {
                i = arena[i].parent.expect("non-root node has a parent");
            }
            let leaf = &arena[leaf_index];
            let branch = i - 1;
            let best = &mut depth_one[branch].1;
            *best = Some(best.map_or(leaf.path_cost, |b: f64| b.min(leaf.path_cost)));
            if leaf.path_cost < chosen_cost {
                chosen_cost = leaf.path_cost;
                chosen = Some(branch);
            }
        }
    }
    Ok(Search {
        depth_one,
        chosen,
        chosen_cost,
    })
}

/// Commits the association for `future_detections[0]`.
///
/// The lookahead is `min(N, future_detections.len())`. If intersection
/// pruning leaves no complete path, the step is repeated without pruning
/// and flagged in the diagnostics.
pub fn step(
    prev: &TrackState,
    future_detections: &[DetectionSet],
    cfg: &SearchConfig,
) -> Result<StepOutcome> {
    cfg.validate()?;
    if future_detections.is_empty() {
        return Err(Error::InvalidInput("step needs at least one frame of detections".into()));
    }
    let n = cfg.model.graph().vertex_count();
    if prev.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: prev.len(),
        });
    }
    let horizon = cfg.n.min(future_detections.len());
    let dets = &future_detections[..horizon];
    let root = SearchNode::root(prev);

    let attempt = |prune: bool| -> Result<(Search, StepDiagnostics)> {
        let mut ctx = Context::new(cfg, prune, horizon);
        let search = match cfg.regime {
            Regime::ExplicitTree => run_explicit(&mut ctx, &root, dets)?,
            Regime::KBestOfK => run_kbest(&mut ctx, &root, dets)?,
        };
        Ok((search, ctx.diag))
    };

    let (mut search, mut diag) = attempt(cfg.prune_intersections)?;
    if search.chosen.is_none() && cfg.prune_intersections {
        let (s, mut d) = attempt(false)?;
        d.nodes_expanded += diag.nodes_expanded;
        d.pruned_by_gate += diag.pruned_by_gate;
        d.pruned_by_intersection += diag.pruned_by_intersection;
        d.pruned_by_bound += diag.pruned_by_bound;
        d.fallback = true;
        search = s;
        diag = d;
    }
    let chosen = search.chosen.ok_or(Error::Infeasible)?;
    diag.frame_index = dets[0].frame_index;
    diag.chosen_path_cost = search.chosen_cost;

    let hypothesis = search.depth_one[chosen].0.hypothesis.clone();
    let mut alternatives: Vec<Alternative> = search
        .depth_one
        .into_iter()
        .map(|(node, best)| Alternative {
            assignment: node.hypothesis.assignment,
            state: node.hypothesis.completed_state,
            unary_cost: node.hypothesis.unary_cost,
            model_cost: node.hypothesis.model_cost,
            best_path_cost: best,
        })
        .collect();
    alternatives.sort_by(|a, b| {
        let key = |x: &Alternative| x.best_path_cost.unwrap_or(f64::INFINITY);
        key(a)
            .total_cmp(&key(b))
            .then(a.model_cost.total_cmp(&b.model_cost))
    });
    Ok(StepOutcome {
        hypothesis,
        diagnostics: diag,
        alternatives,
    })
}

/// Ground-truth states used to test and reset the tracker frame by frame.
#[derive(Debug, Clone, Copy)]
pub struct CorrectionOracle<'a> {
    /// `annotations[i]` annotates `detections[i]`.
    pub annotations: &'a [TrackState],
    pub threshold: f64,
}

/// One tracked frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    pub assignment: Assignment,
    /// Tracker output before any correction.
    pub proposal: TrackState,
    /// State that replaced the proposal, when one was corrected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected: Option<TrackState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<ErrorEvent>,
    pub diagnostics: StepDiagnostics,
}

impl FrameRecord {
    /// The state carried into the next frame.
    pub fn committed(&self) -> &TrackState {
        self.corrected.as_ref().unwrap_or(&self.proposal)
    }
}

/// Full output of a tracking run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackHistory {
    pub initial: Option<TrackState>,
    pub frames: Vec<FrameRecord>,
}

impl TrackHistory {
    pub fn new(initial: TrackState) -> Self {
        Self {
            initial: Some(initial),
            frames: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// State the next frame starts from.
    pub fn last_state(&self) -> Option<&TrackState> {
        self.frames
            .last()
            .map(FrameRecord::committed)
            .or(self.initial.as_ref())
    }

    pub fn events(&self) -> impl Iterator<Item = &ErrorEvent> {
        self.frames.iter().filter_map(|f| f.event.as_ref())
    }

    pub fn error_rate(&self) -> f64 {
        if self.frames.is_empty() {
            return 0.0;
        }
        100.0 * self.events().count() as f64 / self.frames.len() as f64
    }

    /// Committed states, one per frame.
    pub fn states(&self) -> Vec<TrackState> {
        self.frames.iter().map(|f| f.committed().clone()).collect()
    }
}

/// Runs one search step and records it, applying the correction oracle.
pub fn track_frame(
    prev: &TrackState,
    future: &[DetectionSet],
    cfg: &SearchConfig,
    oracle: Option<(&TrackState, f64)>,
) -> Result<(FrameRecord, StepOutcome)> {
    let outcome = step(prev, future, cfg)?;
    let proposal = outcome.state().clone();
    let mut record = FrameRecord {
        frame_index: future[0].frame_index,
        assignment: outcome.hypothesis.assignment.clone(),
        proposal,
        corrected: None,
        event: None,
        diagnostics: outcome.diagnostics.clone(),
    };
    if let Some((annotation, threshold)) = oracle {
        let check = frame_check(&record.proposal, annotation, threshold)?;
        if !check.passes() {
            record.event = Some(check.into_event(record.frame_index));
            let mut reset = annotation.clone();
            reset.frame_index = record.frame_index;
            reset.lost = vec![false; reset.len()];
            record.corrected = Some(reset);
        }
    }
    Ok((record, outcome))
}

/// Tracks a whole sequence from `initial`.
///
/// With a correction oracle, every frame whose proposal fails the evaluation
/// test is recorded as an error event and the state is reset to the
/// annotation before the next frame.
pub fn track_sequence(
    initial: &TrackState,
    detections: &[DetectionSet],
    cfg: &SearchConfig,
    corrections: Option<CorrectionOracle<'_>>,
) -> Result<TrackHistory> {
    cfg.validate()?;
    if detections.is_empty() {
        return Err(Error::InvalidInput("no detection frames to track".into()));
    }
    if let Some(o) = &corrections {
        if o.annotations.len() != detections.len() {
            return Err(Error::DimensionMismatch {
                expected: detections.len(),
                actual: o.annotations.len(),
            });
        }
    }
    let mut history = TrackHistory::new(initial.clone());
    let mut prev = initial.clone();
    for t in 0..detections.len() {
        let oracle = corrections.map(|o| (&o.annotations[t], o.threshold));
        let (record, _) = track_frame(&prev, &detections[t..], cfg, oracle)?;
        prev = record.committed().clone();
        history.frames.push(record);
    }
    Ok(history)
}
