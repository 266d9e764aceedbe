//! Independent oracles and case generators shared by the integration tests
//! and the acceptance runner.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use mhht::assignment::{murty_k_best, CostMatrix};
use mhht::association::{
    evaluate_hypothesis, fit_covariance, fit_movement_covariance,
    fit_posture_covariance, mahalanobis_cost, AssociationModel, CovarianceKind, CovarianceModel,
    FeatureVector, FitOptions, ModelVariant,
};
use mhht::evaluation::{frame_passes, score_run, DEFAULT_THRESHOLD};
use mhht::interpolation::complete_state;
use mhht::model::{Assignment, DetectionSet, EmbryoGraph, GateConfig, Hypothesis, TrackState, Vec3};
use mhht::posture::{diffusion_coefficient, eigen_embryos, fit_posture, DvSign};
use mhht::search::{
    segments_intersect, step, track_sequence, CorrectionOracle, Regime, SearchConfig,
    TrackHistory,
};
use mhht::simulator::{generate, CorruptionConfig, SimConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(r: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(
        r.random_range(-half..half),
        r.random_range(-half..half),
        r.random_range(-half..half),
    )
}

pub fn gaussian(r: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    let n = Normal::new(0.0, sigma).unwrap();
    Vec3::new(n.sample(r), n.sample(r), n.sample(r))
}

/// Result of one checked property.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }

    pub fn assert(&self) {
        assert!(self.passed, "{}", self.detail);
    }
}

// ---------------------------------------------------------------- assignment

pub fn random_cost_matrix(r: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> CostMatrix {
    let n = r.random_range(1..=max_n);
    let m = r.random_range(0..=max_m);
    let integer = r.random_bool(0.5);
    let block: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| {
                    if r.random_bool(0.25) {
                        f64::INFINITY
                    } else if integer {
                        r.random_range(0..=20) as f64
                    } else {
                        r.random_range(0.0..20.0)
                    }
                })
                .collect()
        })
        .collect();
    let gates: Vec<f64> = (0..n).map(|_| r.random_range(5.0..25.0)).collect();
    CostMatrix::from_blocks(&block, &gates).unwrap()
}

/// Every feasible assignment with its objective, by exhaustive recursion.
pub fn brute_force_assignments(c: &CostMatrix) -> Vec<(Vec<Option<usize>>, f64)> {
    fn rec(
        c: &CostMatrix,
        row: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<Option<usize>>,
        out: &mut Vec<(Vec<Option<usize>>, f64)>,
    ) {
        if row == c.tracks() {
            let obj = cur
                .iter()
                .enumerate()
                .map(|(i, ch)| match ch {
                    Some(j) => c.get(i, *j),
                    None => c.get(i, c.detections() + i),
                })
                .sum();
            out.push((cur.clone(), obj));
            return;
        }
        cur.push(None);
        rec(c, row + 1, used, cur, out);
        cur.pop();
        for j in 0..c.detections() {
            if !used[j] && c.get(row, j).is_finite() {
                used[j] = true;
                cur.push(Some(j));
                rec(c, row + 1, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(c, 0, &mut vec![false; c.detections()], &mut Vec::new(), &mut out);
    out
}

/// Compares a full Murty enumeration with brute force.
pub fn murty_matches_brute_force(c: &CostMatrix) -> Result<(), String> {
    let ranked = murty_k_best(c, usize::MAX).map_err(|e| e.to_string())?;
    let mut brute = brute_force_assignments(c);
    if ranked.len() != brute.len() {
        return Err(format!("{} ranked vs {} feasible", ranked.len(), brute.len()));
    }
    let objs: Vec<f64> = ranked.iter().map(|r| r.objective).collect();
    if objs.windows(2).any(|w| w[1] < w[0]) {
        return Err("ranked objectives decrease".into());
    }
    brute.sort_by(|a, b| a.1.total_cmp(&b.1));
    for (k, (r, b)) in objs.iter().zip(&brute).enumerate() {
        if (r - b.1).abs() > 1e-9 {
            return Err(format!("rank {k}: objective {r} vs brute force {}", b.1));
        }
    }
    let mut got: Vec<Vec<Option<usize>>> = ranked.iter().map(|r| r.assignment.0.clone()).collect();
    let mut want: Vec<Vec<Option<usize>>> = brute.iter().map(|b| b.0.clone()).collect();
    got.sort();
    want.sort();
    if got != want {
        return Err("assignment sets differ".into());
    }
    for r in ranked.iter() {
        let b = brute.iter().find(|b| b.0 == r.assignment.0).expect("same sets");
        if (r.objective - b.1).abs() > 1e-9 {
            return Err(format!("objective of {:?}: {} vs {}", r.assignment.0, r.objective, b.1));
        }
    }
    Ok(())
}

pub fn murty_oracle(cases: u64) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut enumerated = 0usize;
    for seed in 0..cases {
        let c = random_cost_matrix(&mut rng(seed), 6, 6);
        enumerated += brute_force_assignments(&c).len();
        if let Err(e) = murty_matches_brute_force(&c) {
            failures.push(format!("case {seed}: {e}"));
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(30);
    (
        Outcome::new(
            ok,
            format!(
                "{cases} cases, {enumerated} assignments, {} mismatches, {:.1}s{}",
                failures.len(),
                elapsed.as_secs_f64(),
                failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
            ),
        ),
        elapsed,
    )
}

// ---------------------------------------------------------------- search

pub fn triangle_graph() -> EmbryoGraph {
    EmbryoGraph::new(
        vec!["a".into(), "b".into(), "c".into()],
        vec![(0, 1), (1, 2), (0, 2)],
        vec![],
    )
    .unwrap()
}

/// Neighbour-offset completion recomputed from the edge list.
pub fn oracle_complete(
    prev: &[Vec3],
    choice: &[Option<usize>],
    dets: &[Vec3],
    edges: &[(usize, usize)],
) -> Vec<Vec3> {
    (0..prev.len())
        .map(|u| match choice[u] {
            Some(j) => dets[j],
            None => {
                let preds: Vec<Vec3> = edges
                    .iter()
                    .filter_map(|&(a, b)| {
                        let v = if a == u {
                            b
                        } else if b == u {
                            a
                        } else {
                            return None;
                        };
                        choice[v].map(|j| dets[j] - (prev[v] - prev[u]))
                    })
                    .collect();
                if preds.is_empty() {
                    prev[u]
                } else {
                    preds.iter().fold(Vec3::zeros(), |a, p| a + p) / preds.len() as f64
                }
            }
        })
        .collect()
}

fn lengths(p: &[Vec3], edges: &[(usize, usize)]) -> Vec<f64> {
    edges.iter().map(|&(a, b)| (p[a] - p[b]).norm()).collect()
}

/// Feasible gated assignments of `prev` to `dets`, with unary costs.
fn gated_assignments(prev: &[Vec3], dets: &[Vec3], gate: f64) -> Vec<(Vec<Option<usize>>, f64)> {
    fn rec(
        prev: &[Vec3],
        dets: &[Vec3],
        gate: f64,
        cur: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        out: &mut Vec<(Vec<Option<usize>>, f64)>,
    ) {
        let i = cur.len();
        if i == prev.len() {
            let unary = cur
                .iter()
                .enumerate()
                .map(|(i, c)| c.map_or(gate, |j| (prev[i] - dets[j]).norm()))
                .sum();
            out.push((cur.clone(), unary));
            return;
        }
        cur.push(None);
        rec(prev, dets, gate, cur, used, out);
        cur.pop();
        for j in 0..dets.len() {
            if !used[j] && (prev[i] - dets[j]).norm() <= gate {
                used[j] = true;
                cur.push(Some(j));
                rec(prev, dets, gate, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(prev, dets, gate, &mut Vec::new(), &mut vec![false; dets.len()], &mut out);
    out
}

/// Edge-length change plus unit-weight unary cost.
fn embryo_cost(next: &[Vec3], prev: &[Vec3], edges: &[(usize, usize)], unary: f64) -> f64 {
    let a = lengths(next, edges);
    let b = lengths(prev, edges);
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() + unary
}

pub struct SearchCase {
    pub prev: TrackState,
    pub frames: Vec<DetectionSet>,
    pub gate: f64,
}

pub fn search_case(seed: u64) -> SearchCase {
    let mut r = rng(seed);
    let prev: Vec<Vec3> = (0..3).map(|_| random_point(&mut r, 5.0)).collect();
    let mut truth = prev.clone();
    let mut frames = Vec::new();
    for t in 1..=2 {
        truth = truth.iter().map(|p| p + gaussian(&mut r, 1.0)).collect();
        let m = r.random_range(0..=4usize);
        let mut pts = Vec::new();
        for k in 0..m {
            if k < 3 && r.random_bool(0.8) {
                pts.push(truth[k] + gaussian(&mut r, 0.3));
            } else {
                pts.push(truth[r.random_range(0..3)] + random_point(&mut r, 3.0));
            }
        }
        frames.push(DetectionSet::new(t, pts).unwrap());
    }
    SearchCase {
        prev: TrackState::new(0, prev).unwrap(),
        frames,
        gate: r.random_range(2.0..4.0),
    }
}

/// Exhaustive two-frame optimum and the frame-1 states that attain it.
pub fn exhaustive_two_frame(case: &SearchCase) -> (f64, Vec<Vec<Vec3>>) {
    let edges = triangle_graph().edges;
    let prev = &case.prev.positions;
    let d1 = &case.frames[0].points;
    let d2 = &case.frames[1].points;
    let mut scored = Vec::new();
    for (c1, u1) in gated_assignments(prev, d1, case.gate) {
        let s1 = oracle_complete(prev, &c1, d1, &edges);
        let cost1 = embryo_cost(&s1, prev, &edges, u1);
        let best2 = gated_assignments(&s1, d2, case.gate)
            .into_iter()
            .map(|(c2, u2)| {
                let s2 = oracle_complete(&s1, &c2, d2, &edges);
                embryo_cost(&s2, &s1, &edges, u2)
            })
            .fold(f64::INFINITY, f64::min);
        scored.push((cost1 + best2, s1));
    }
    let best = scored.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let argmin = scored
        .into_iter()
        .filter(|s| s.0 <= best + 1e-9)
        .map(|s| s.1)
        .collect();
    (best, argmin)
}

pub fn search_oracle(cases: u64) -> (Outcome, Duration) {
    let start = Instant::now();
    let model = AssociationModel::new(ModelVariant::Embryo, triangle_graph(), None, None, 1.0).unwrap();
    let mut failures = Vec::new();
    for seed in 0..cases {
        let case = search_case(seed);
        let cfg = SearchConfig::new(model.clone(), GateConfig::Uniform(case.gate)).with_kn(usize::MAX, 2);
        let outcome = step(&case.prev, &case.frames, &cfg).unwrap();
        let (best, argmin) = exhaustive_two_frame(&case);
        let got = outcome.diagnostics.chosen_path_cost;
        let state_ok = argmin.iter().any(|s| {
            s.iter()
                .zip(&outcome.state().positions)
                .all(|(a, b)| (a - b).norm() <= 1e-9)
        });
        if (got - best).abs() > 1e-9 || !state_ok {
            failures.push(format!("case {seed}: path cost {got} vs optimum {best}, state on optimal path: {state_ok}"));
        }
    }
    let elapsed = start.elapsed();
    (
        Outcome::new(
            failures.is_empty() && elapsed < Duration::from_secs(60),
            format!(
                "{cases} cases, {} mismatches, {:.1}s{}",
                failures.len(),
                elapsed.as_secs_f64(),
                failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
            ),
        ),
        elapsed,
    )
}

// ---------------------------------------------------------------- regimes

pub fn regime_sequence(seed: u64) -> (TrackState, Vec<DetectionSet>, Vec<TrackState>) {
    let sim = generate(&SimConfig {
        pair_count: 4,
        frame_count: 8,
        seed,
        ..SimConfig::default()
    })
    .unwrap();
    (
        sim.ground_truth[0].clone(),
        sim.detections[1..].to_vec(),
        sim.ground_truth,
    )
}

fn embryo_cfg(pairs: usize, gate: f64, k: usize, n: usize, regime: Regime) -> SearchConfig {
    let model = AssociationModel::new(
        ModelVariant::Embryo,
        EmbryoGraph::canonical(pairs).unwrap(),
        None,
        None,
        1.0,
    )
    .unwrap();
    SearchConfig::new(model, GateConfig::Uniform(gate))
        .with_kn(k, n)
        .with_regime(regime)
}

/// Histories agree in every committed decision and in the chosen path cost
/// bit for bit. Search counters are regime specific and not compared.
pub fn same_decisions(a: &TrackHistory, b: &TrackHistory) -> bool {
    a.initial == b.initial
        && a.len() == b.len()
        && a.frames.iter().zip(&b.frames).all(|(x, y)| {
            x.frame_index == y.frame_index
                && x.assignment == y.assignment
                && x.proposal == y.proposal
                && x.corrected == y.corrected
                && x.event == y.event
                && x.diagnostics.chosen_path_cost.to_bits() == y.diagnostics.chosen_path_cost.to_bits()
        })
}

pub fn regime_relations(sequences: u64) -> Outcome {
    let mut k1_failures = 0;
    let mut order_failures = Vec::new();
    let mut comparisons = 0;
    for seed in 0..sequences {
        let (initial, dets, truth) = regime_sequence(seed);
        let e = track_sequence(&initial, &dets, &embryo_cfg(4, 10.0, 1, 3, Regime::ExplicitTree), None).unwrap();
        let k = track_sequence(&initial, &dets, &embryo_cfg(4, 10.0, 1, 3, Regime::KBestOfK), None).unwrap();
        if !same_decisions(&e, &k) {
            k1_failures += 1;
        }
        for kk in [2, 3, 5] {
            for nn in [2, 3] {
                for t in 0..3 {
                    let ex = step(&truth[t], &dets[t..], &embryo_cfg(4, 10.0, kk, nn, Regime::ExplicitTree)).unwrap();
                    let kb = step(&truth[t], &dets[t..], &embryo_cfg(4, 10.0, kk, nn, Regime::KBestOfK)).unwrap();
                    comparisons += 1;
                    let (a, b) = (ex.diagnostics.chosen_path_cost, kb.diagnostics.chosen_path_cost);
                    if a > b {
                        order_failures.push(format!("seed {seed} K={kk} N={nn} t={t}: {a} > {b}"));
                    }
                }
            }
        }
    }
    Outcome::new(
        k1_failures == 0 && order_failures.is_empty(),
        format!(
            "K=1: {k1_failures}/{sequences} histories differ; explicit <= kbest: {} violations in {comparisons}{}",
            order_failures.len(),
            order_failures.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    )
}

// ---------------------------------------------------------------- interpolation

pub fn random_state(r: &mut ChaCha8Rng, pairs: usize) -> TrackState {
    let positions = (0..pairs)
        .flat_map(|k| {
            let base = Vec3::new(9.0 * k as f64, 0.0, 0.0);
            [base + random_point(r, 2.0), base + Vec3::new(0.0, 8.0, 0.0) + random_point(r, 2.0)]
        })
        .collect();
    TrackState::new(0, positions).unwrap()
}

/// Random detections of `state` with a random assignment; each object is
/// detected with probability `p`, and debris is mixed in.
pub fn random_detections(
    r: &mut ChaCha8Rng,
    truth: &TrackState,
    p: f64,
) -> (Assignment, DetectionSet) {
    let mut pts = Vec::new();
    let mut choice = vec![None; truth.len()];
    for (i, z) in truth.positions.iter().enumerate() {
        if r.random_bool(p) {
            choice[i] = Some(pts.len());
            pts.push(*z);
        }
    }
    for _ in 0..r.random_range(0..3) {
        pts.push(random_point(r, 30.0));
    }
    let perm = {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        for i in (1..idx.len()).rev() {
            idx.swap(i, r.random_range(0..=i));
        }
        idx
    };
    let mut shuffled = vec![Vec3::zeros(); pts.len()];
    for (old, &new) in perm.iter().enumerate() {
        shuffled[new] = pts[old];
    }
    let choice = choice.into_iter().map(|c| c.map(|j| perm[j])).collect();
    (Assignment(choice), DetectionSet::new(1, shuffled).unwrap())
}

pub fn interpolation_oracle(cases: u64) -> Outcome {
    let mut worst_equiv: f64 = 0.0;
    let mut worst_rigid: f64 = 0.0;
    let mut worst_recompute: f64 = 0.0;
    let mut rigid_cases = 0;
    for seed in 0..cases {
        let mut r = rng(10_000 + seed);
        let pairs = r.random_range(2..=6);
        let graph = EmbryoGraph::canonical(pairs).unwrap();
        let prev = random_state(&mut r, pairs);
        let moved = TrackState::new(
            1,
            prev.positions.iter().map(|p| p + gaussian(&mut r, 1.5)).collect(),
        )
        .unwrap();
        let (assignment, dets) = random_detections(&mut r, &moved, 0.6);

        let out = complete_state(&prev, &assignment, &dets, &graph);
        let expect = oracle_complete(&prev.positions, &assignment.0, &dets.points, &graph.edges);
        for (a, b) in out.positions.iter().zip(&expect) {
            worst_recompute = worst_recompute.max((a - b).norm());
        }

        let shift = random_point(&mut r, 50.0);
        let shifted = complete_state(&prev.translated(&shift), &assignment, &dets.translated(&shift), &graph);
        for (a, b) in shifted.positions.iter().zip(&out.positions) {
            worst_equiv = worst_equiv.max((a - (b + shift)).norm());
        }

        // One detected neighbour moving by a pure translation.
        let u = r.random_range(0..graph.vertex_count());
        let nbrs = &graph.adjacency()[u];
        let v = nbrs[r.random_range(0..nbrs.len())];
        let motion = random_point(&mut r, 5.0);
        let mut choice = vec![None; graph.vertex_count()];
        choice[v] = Some(0);
        for w in 0..graph.vertex_count() {
            if w != u && !nbrs.contains(&w) && r.random_bool(0.5) {
                choice[w] = Some(1 + w);
            }
        }
        let mut pts = vec![prev.positions[v] + motion];
        pts.extend((0..graph.vertex_count()).map(|w| prev.positions[w] + random_point(&mut r, 3.0)));
        let rigid = complete_state(&prev, &Assignment(choice), &DetectionSet::new(1, pts).unwrap(), &graph);
        worst_rigid = worst_rigid.max((rigid.positions[u] - (prev.positions[u] + motion)).norm());
        rigid_cases += 1;
    }
    Outcome::new(
        worst_equiv <= 1e-9 && worst_rigid <= 1e-9 && worst_recompute <= 1e-9,
        format!(
            "{cases} cases: equivariance {worst_equiv:.1e}, single-neighbour rigid motion {worst_rigid:.1e} ({rigid_cases} cases), recomputation {worst_recompute:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- geometry

fn closest_on_triangle(p: &Vec3, t: &[Vec3; 3]) -> Vec3 {
    let (a, b, c) = (t[0], t[1], t[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

fn sample_triangle(t: &[Vec3; 3], steps: usize) -> Vec<Vec3> {
    let mut pts = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let (u, v) = (i as f64 / steps as f64, j as f64 / steps as f64);
            pts.push(t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v);
        }
    }
    pts
}

/// Distance between two triangles: the closest sampled pair, refined by
/// alternating exact projections (the distance is convex in both points).
pub fn triangle_distance(a: &[Vec3; 3], b: &[Vec3; 3]) -> f64 {
    let sa = sample_triangle(a, 24);
    let sb = sample_triangle(b, 24);
    let mut best = (f64::INFINITY, Vec3::zeros(), Vec3::zeros());
    for p in &sa {
        for q in &sb {
            let d = (p - q).norm_squared();
            if d < best.0 {
                best = (d, *p, *q);
            }
        }
    }
    let (_, mut p, mut q) = best;
    let mut d = (p - q).norm();
    for _ in 0..20_000 {
        q = closest_on_triangle(&p, b);
        p = closest_on_triangle(&q, a);
        let nd = (p - q).norm();
        if nd < 1e-9 || d - nd < 1e-15 {
            d = nd;
            break;
        }
        d = nd;
    }
    d.min(best.0.sqrt())
}

fn tessellate(q: &[Vec3; 4]) -> [[Vec3; 3]; 2] {
    [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]
}

pub fn quad_distance(a: &[Vec3; 4], b: &[Vec3; 4]) -> f64 {
    let (ta, tb) = (tessellate(a), tessellate(b));
    ta.iter()
        .flat_map(|x| tb.iter().map(move |y| triangle_distance(x, y)))
        .fold(f64::INFINITY, f64::min)
}

/// A random quad near `centre`.
fn random_quad(r: &mut ChaCha8Rng, centre: Vec3) -> [Vec3; 4] {
    let u = gaussian(r, 1.0).normalize();
    let w = u.cross(&gaussian(r, 1.0)).normalize();
    let (s, h) = (r.random_range(2.0..6.0), r.random_range(2.0..6.0));
    [
        centre - u * s - w * h + gaussian(r, 0.5),
        centre + u * s - w * h + gaussian(r, 0.5),
        centre + u * s + w * h + gaussian(r, 0.5),
        centre - u * s + w * h + gaussian(r, 0.5),
    ]
}

/// State of a 4-pair body whose first and last segments are the given
/// quads (segment vertex order `[l, r, nr, nl]`).
pub fn two_segment_state(a: &[Vec3; 4], b: &[Vec3; 4]) -> TrackState {
    let mut p = vec![Vec3::zeros(); 8];
    for (quad, base) in [(a, 0), (b, 4)] {
        p[base] = quad[0];
        p[base + 1] = quad[1];
        p[base + 3] = quad[2];
        p[base + 2] = quad[3];
    }
    TrackState::new(0, p).unwrap()
}

/// Distances between the two tolerances are too close to call by sampling.
pub const TOUCH_TOLERANCE: f64 = 1e-6;
pub const AMBIGUOUS_BAND: f64 = 1e-3;

pub fn geometry_oracle(cases: usize) -> Outcome {
    let graph = EmbryoGraph::canonical(4).unwrap();
    let mut r = rng(77);
    let (mut checked, mut rejected, mut hits) = (0, 0, 0);
    let mut disagreements = Vec::new();
    while checked < cases {
        let a = random_quad(&mut r, Vec3::zeros());
        let centre = random_point(&mut r, 5.0);
        let b = random_quad(&mut r, centre);
        let d = quad_distance(&a, &b);
        if d >= TOUCH_TOLERANCE && d < AMBIGUOUS_BAND {
            rejected += 1;
            continue;
        }
        let oracle = d < TOUCH_TOLERANCE;
        let engine = segments_intersect(&two_segment_state(&a, &b), &graph);
        hits += usize::from(oracle);
        if oracle != engine {
            disagreements.push(format!("case {checked}: distance {d:.3e}, engine {engine}"));
        }
        checked += 1;
    }
    Outcome::new(
        disagreements.is_empty(),
        format!(
            "{checked} cases ({hits} intersecting, {rejected} rejected as ambiguous), {} disagreements{}",
            disagreements.len(),
            disagreements.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    )
}

// ---------------------------------------------------------------- statistics

pub fn statistical_checks() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    let mut worst_sym: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let mut worst_inv: f64 = 0.0;
    for seed in 0..50 {
        let mut r = rng(500 + seed);
        let dim = r.random_range(1..=12);
        let t = r.random_range(3..=40);
        let seq: Vec<FeatureVector> = (0..t)
            .map(|_| FeatureVector::new((0..dim).map(|_| r.random_range(-5.0..5.0)).collect()))
            .collect();
        let m = fit_covariance(&seq, CovarianceKind::Posture, &FitOptions::default()).unwrap();
        worst_sym = worst_sym.max((&m.covariance - m.covariance.transpose()).abs().max());
        min_eig = min_eig.min(m.covariance.clone().symmetric_eigen().eigenvalues.min());
        let id = &m.precision * &m.covariance - DMatrix::<f64>::identity(dim, dim);
        worst_inv = worst_inv.max(id.abs().max());
    }
    let psd = worst_sym <= 1e-9 && min_eig >= 0.0 && worst_inv <= 1e-6;
    ok &= psd;
    notes.push(format!(
        "PSD: asymmetry {worst_sym:.1e}, min eigenvalue {min_eig:.1e}, |PΣ−I| {worst_inv:.1e}"
    ));

    let mut worst_iso: f64 = 0.0;
    for seed in 0..100 {
        let mut r = rng(700 + seed);
        let dim = r.random_range(1..=20);
        let sigma = r.random_range(0.1..5.0);
        let m = CovarianceModel::from_covariance(
            CovarianceKind::Posture,
            DVector::zeros(dim),
            DMatrix::identity(dim, dim) * (sigma * sigma),
        )
        .unwrap();
        let a: Vec<f64> = (0..dim).map(|_| r.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| r.random_range(-10.0..10.0)).collect();
        let euclid = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let got = mahalanobis_cost(&FeatureVector::new(a), &FeatureVector::new(b), &m).unwrap();
        worst_iso = worst_iso.max((got - euclid / sigma).abs());
    }
    ok &= worst_iso <= 1e-9;
    notes.push(format!("σ²I: {worst_iso:.1e}"));

    let worst_rt = serialization_round_trip(100);
    ok &= worst_rt <= 1e-12;
    notes.push(format!("round trip: {worst_rt:.1e}"));
    Outcome::new(ok, notes.join("; "))
}

/// Largest change of `evaluate_hypothesis` after a JSON round trip of the
/// fitted covariances, over random hypotheses and every model variant.
pub fn serialization_round_trip(hypotheses: usize) -> f64 {
    let sim = generate(&SimConfig {
        frame_count: 300,
        seed: 31,
        ..SimConfig::default()
    })
    .unwrap();
    let graph = EmbryoGraph::canonical(10).unwrap();
    let post = fit_posture_covariance(&sim.ground_truth, &graph, &FitOptions::default()).unwrap();
    let mov = fit_movement_covariance(&sim.ground_truth, &FitOptions::default()).unwrap();
    let post2 = CovarianceModel::from_json(&post.to_json().unwrap()).unwrap();
    let mov2 = CovarianceModel::from_json(&mov.to_json().unwrap()).unwrap();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for variant in ModelVariant::ALL {
        let lam = r.random_range(0.0..2.0);
        let a = AssociationModel::new(variant, graph.clone(), Some(post.clone()), Some(mov.clone()), lam).unwrap();
        let b = AssociationModel::new(variant, graph.clone(), Some(post2.clone()), Some(mov2.clone()), lam).unwrap();
        for _ in 0..hypotheses {
            let t = r.random_range(1..sim.ground_truth.len());
            let prev = &sim.ground_truth[t - 1];
            let completed = TrackState::new(
                t,
                sim.ground_truth[t].positions.iter().map(|p| p + gaussian(&mut r, 2.0)).collect(),
            )
            .unwrap();
            let h = Hypothesis {
                assignment: Assignment::all_gated(20),
                completed_state: completed,
                unary_cost: 0.0,
                model_cost: 0.0,
                cumulative_cost: 0.0,
            };
            let unary = r.random_range(0.0..100.0);
            let x = evaluate_hypothesis(&a, &h, prev, unary).unwrap();
            let y = evaluate_hypothesis(&b, &h, prev, unary).unwrap();
            worst = worst.max((x - y).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------- evaluation

pub fn evaluation_protocol(runs: u64) -> Outcome {
    let at = |x: f64| TrackState::new(0, vec![Vec3::new(x, 0.0, 0.0)]).unwrap();
    let origin = at(0.0);
    let boundary = frame_passes(&at(7.5), &origin, DEFAULT_THRESHOLD).unwrap()
        && !frame_passes(&at(7.5 + 1e-6), &origin, DEFAULT_THRESHOLD).unwrap();

    let mut mismatched = 0;
    let mut events = 0;
    for seed in 0..runs {
        let sim = generate(&SimConfig {
            frame_count: 80,
            seed: 9_000 + seed,
            corruption: CorruptionConfig::heavy(),
            ..SimConfig::default()
        })
        .unwrap();
        let ann = &sim.ground_truth[1..];
        let graph = EmbryoGraph::canonical(10).unwrap();
        let cfg = SearchConfig::new(AssociationModel::mht(graph), GateConfig::Uniform(7.5)).with_kn(2, 2);
        let h = track_sequence(
            &sim.ground_truth[0],
            &sim.detections[1..],
            &cfg,
            Some(CorrectionOracle {
                annotations: ann,
                threshold: DEFAULT_THRESHOLD,
            }),
        )
        .unwrap();
        let report = score_run(&h, ann, None, DEFAULT_THRESHOLD).unwrap();
        let tracked: Vec<_> = h.events().cloned().collect();
        events += tracked.len();
        if tracked != report.events {
            mismatched += 1;
        }
    }
    Outcome::new(
        boundary && mismatched == 0,
        format!(
            "boundary at 7.5 µm {}; {mismatched}/{runs} runs with differing events ({events} events total)",
            if boundary { "exact" } else { "WRONG" }
        ),
    )
}

// ---------------------------------------------------------------- posture

/// Body bending dorsoventrally along a circle of radius `radius`, with
/// cells `step` radians apart and the lateral axis along y.
pub fn arc_state(pairs: usize, radius: f64, step: f64, width: f64) -> TrackState {
    let positions = (0..pairs)
        .flat_map(|k| {
            let th = step * k as f64;
            let c = Vec3::new(radius * th.sin(), 0.0, radius * (1.0 - th.cos()));
            [c + Vec3::new(0.0, width / 2.0, 0.0), c - Vec3::new(0.0, width / 2.0, 0.0)]
        })
        .collect();
    TrackState::new(0, positions).unwrap()
}

pub fn posture_checks() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // PCA against an SVD of the centred data.
    let mut r = rng(2024);
    let data: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let z: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            (0..18)
                .map(|j| z[j % 4] * (1.0 + j as f64 / 9.0) + 0.2 * r.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let pca = eigen_embryos(&data).unwrap();
    let mut worst_rec: f64 = 0.0;
    for (row, scores) in data.iter().zip(&pca.scores) {
        let rec = pca.reconstruct(scores, 18);
        for (a, b) in rec.iter().zip(row) {
            worst_rec = worst_rec.max((a - b).abs());
        }
    }
    let x = DMatrix::from_fn(50, 18, |i, j| data[i][j] - pca.mean[j]);
    let sv = x.svd(false, false).singular_values;
    let mut s2: Vec<f64> = sv.iter().map(|s| s * s).collect();
    s2.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = s2.iter().sum();
    let mut acc = 0.0;
    let mut worst_frac: f64 = 0.0;
    for (c, s) in pca.cumulative_fractions().iter().zip(&s2) {
        acc += s / total;
        worst_frac = worst_frac.max((c - acc).abs());
    }
    let mut worst_orth: f64 = 0.0;
    for (i, a) in pca.components.iter().enumerate() {
        for (j, b) in pca.components.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            worst_orth = worst_orth.max((dot - f64::from(u8::from(i == j))).abs());
        }
    }
    let pca_ok = worst_rec <= 1e-8 && worst_frac <= 1e-8 && worst_orth <= 1e-8;
    ok &= pca_ok;
    notes.push(format!(
        "PCA: reconstruction {worst_rec:.1e}, SVD fractions {worst_frac:.1e}, orthonormality {worst_orth:.1e}"
    ));

    let cum = pca.cumulative_fractions();
    let monotone = cum.windows(2).all(|w| w[1] >= w[0] - 1e-15);
    let reaches = cum.len() == 18 && (cum[17] - 1.0).abs() <= 1e-8;
    ok &= monotone && reaches;
    notes.push(format!(
        "cumulative variance monotone {monotone}, {} at 18 components",
        cum.last().map_or(f64::NAN, |c| *c)
    ));

    // 3-D random walk with known diffusivity.
    let sigma = 0.5;
    let dt = 1.0;
    let mut r = rng(4242);
    let mut p = Vec3::zeros();
    let walk: Vec<Vec3> = (0..10_000)
        .map(|_| {
            p += gaussian(&mut r, sigma);
            p
        })
        .collect();
    let fit = diffusion_coefficient(&walk, dt).unwrap();
    let truth = sigma * sigma / (2.0 * dt);
    let rel = (fit.coefficient - truth).abs() / truth;
    ok &= rel <= 0.15;
    notes.push(format!("diffusion D {:.4} vs {truth:.4} ({:.1}%)", fit.coefficient, 100.0 * rel));

    // Constant curvature.
    let step = 0.2;
    let state = arc_state(10, 30.0, step, 8.0);
    let graph = EmbryoGraph::canonical(10).unwrap();
    let bends = fit_posture(&state, &graph, DvSign::RightHanded).unwrap().bend_angles;
    let mut worst_arc: f64 = 0.0;
    for side in 0..2 {
        for k in 1..8 {
            worst_arc = worst_arc.max((bends[9 * side + k].abs() - step).abs());
        }
    }
    let same_sign = (1..8).all(|k| bends[k].signum() == bends[9 + k].signum());
    ok &= worst_arc <= 1e-6 && same_sign && bends.len() == 18;
    notes.push(format!("arc bend angles {worst_arc:.1e}"));
    Outcome::new(ok, notes.join("; "))
}
