//! Domain types shared across the engine: track states, detection sets, the
//! object graph, hypotheses and gates.
//!
//! Coordinates are physical micrometres. Object `i` of a sequence keeps its
//! index for the whole segment; a change in the object set starts a new
//! segment with a new graph.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Seam-cell pair names, anterior to posterior, for the ten-pair graph.
const SEAM_PAIRS: [&str; 10] = ["H0", "H1", "H2", "V1", "V2", "V3", "V4", "V5", "V6", "T"];

/// Positions of all tracked objects at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub frame_index: usize,
    pub positions: Vec<Vec3>,
    /// `true` marks an object whose track is lost at this frame.
    pub lost: Vec<bool>,
}

impl TrackState {
    pub fn new(frame_index: usize, positions: Vec<Vec3>) -> Result<Self> {
        if let Some(i) = positions.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate for object {i} at frame {frame_index}"
            )));
        }
        let lost = vec![false; positions.len()];
        Ok(Self {
            frame_index,
            positions,
            lost,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn any_lost(&self) -> bool {
        self.lost.iter().any(|&l| l)
    }

    /// Same state relabelled to another frame.
    pub fn at_frame(&self, frame_index: usize) -> Self {
        Self {
            frame_index,
            ..self.clone()
        }
    }

    /// Stacked coordinates `[x1, y1, z1, x2, ...]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.positions
            .iter()
            .flat_map(|p| [p.x, p.y, p.z])
            .collect()
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            positions: self.positions.iter().map(|p| p + offset).collect(),
            ..self.clone()
        }
    }
}

/// Unlabelled candidate points observed at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub frame_index: usize,
    pub points: Vec<Vec3>,
}

impl DetectionSet {
    pub fn new(frame_index: usize, points: Vec<Vec3>) -> Result<Self> {
        if let Some(j) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::InvalidInput(format!(
                "non-finite detection {j} at frame {frame_index}"
            )));
        }
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                if points[a] == points[b] {
                    return Err(Error::InvalidInput(format!(
                        "detections {a} and {b} coincide at frame {frame_index}"
                    )));
                }
            }
        }
        Ok(Self {
            frame_index,
            points,
        })
    }

    pub fn empty(frame_index: usize) -> Self {
        Self {
            frame_index,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            frame_index: self.frame_index,
            points: self.points.iter().map(|p| p + offset).collect(),
        }
    }
}

/// Vertex/edge structure encoding which objects move together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbryoGraph {
    pub vertex_labels: Vec<String>,
    /// Unordered pairs stored as `(u, v)` with `u < v`.
    pub edges: Vec<(usize, usize)>,
    /// Quadrilaterals `(left_k, right_k, right_k+1, left_k+1)` in cyclic
    /// order, anterior to posterior.
    pub body_segments: Vec<[usize; 4]>,
}

impl EmbryoGraph {
    /// Builds a graph from explicit parts, checking the structural invariants.
    pub fn new(
        vertex_labels: Vec<String>,
        edges: Vec<(usize, usize)>,
        body_segments: Vec<[usize; 4]>,
    ) -> Result<Self> {
        let n = vertex_labels.len();
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::InvalidConfig(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidConfig(format!("self-loop on vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if normalized.contains(&e) {
                return Err(Error::InvalidConfig(format!("duplicate edge ({a}, {b})")));
            }
            normalized.push(e);
        }
        if let Some(seg) = body_segments.iter().find(|s| s.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidConfig(format!(
                "body segment {seg:?} references a vertex outside 0..{n}"
            )));
        }
        Ok(Self {
            vertex_labels,
            edges: normalized,
            body_segments,
        })
    }

    /// The seam-cell graph over `pair_count` left/right pairs.
    ///
    /// Vertex `2k` is the left cell of pair `k` and `2k + 1` the right one.
    /// Edges join each pair laterally, sequential cells on the same side
    /// longitudinally, and both diagonals between sequential pairs.
    pub fn canonical(pair_count: usize) -> Result<Self> {
        if pair_count < 2 {
            return Err(Error::InvalidConfig(format!(
                "pair_count must be at least 2, got {pair_count}"
            )));
        }
        let pair_name = |k: usize| {
            if pair_count == SEAM_PAIRS.len() {
                SEAM_PAIRS[k].to_string()
            } else {
                format!("P{k}")
            }
        };
        let vertex_labels = (0..pair_count)
            .flat_map(|k| [format!("{}L", pair_name(k)), format!("{}R", pair_name(k))])
            .collect();

        let mut edges = Vec::with_capacity(pair_count + 4 * (pair_count - 1));
        let mut body_segments = Vec::with_capacity(pair_count - 1);
        for k in 0..pair_count {
            let (l, r) = (2 * k, 2 * k + 1);
            edges.push((l, r));
            if k + 1 < pair_count {
                let (nl, nr) = (2 * k + 2, 2 * k + 3);
                edges.push((l, nl));
                edges.push((r, nr));
                edges.push((l, nr));
                edges.push((r, nl));
                body_segments.push([l, r, nr, nl]);
            }
        }
        Self::new(vertex_labels, edges, body_segments)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Neighbour lists indexed by vertex.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertex_count();
        if n == 0 {
            return true;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Number of left/right pairs when the graph follows the canonical layout.
    pub fn pair_count(&self) -> usize {
        self.vertex_count() / 2
    }
}

/// Track-to-detection choice per object; `None` means the object is gated.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment(pub Vec<Option<usize>>);

impl Assignment {
    pub fn all_gated(n: usize) -> Self {
        Self(vec![None; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// No detection index used twice.
    pub fn is_one_to_one(&self) -> bool {
        let mut used: Vec<usize> = self.0.iter().flatten().copied().collect();
        used.sort_unstable();
        used.windows(2).all(|w| w[0] != w[1])
    }

    pub fn detected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.map(|_| i))
    }

    pub fn undetected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.is_none().then_some(i))
    }
}

/// One assignment together with its completed state update and costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub assignment: Assignment,
    pub completed_state: TrackState,
    /// Sum of cost-matrix entries selected by the assignment.
    pub unary_cost: f64,
    /// Association-model cost of this single step.
    pub model_cost: f64,
    /// Path cost from the search root down to this hypothesis.
    pub cumulative_cost: f64,
}

impl Hypothesis {
    /// Global hook: every hypothesis emitted by the engine passes through it.
    pub fn debug_check(&self) {
        debug_assert!(
            self.assignment.is_one_to_one(),
            "hypothesis assignment reuses a detection: {:?}",
            self.assignment
        );
        debug_assert_eq!(self.assignment.len(), self.completed_state.len());
    }
}

/// Gate radii `d_i` in micrometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateConfig {
    Uniform(f64),
    PerObject(Vec<f64>),
}

impl GateConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            GateConfig::Uniform(d) if *d > 0.0 && d.is_finite() => Ok(()),
            GateConfig::Uniform(d) => Err(Error::InvalidConfig(format!(
                "gate radius must be positive, got {d}"
            ))),
            GateConfig::PerObject(ds) if ds.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                actual: ds.len(),
            }),
            GateConfig::PerObject(ds) => match ds.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
                Some(d) => Err(Error::InvalidConfig(format!(
                    "gate radius must be positive, got {d}"
                ))),
                None => Ok(()),
            },
        }
    }

    pub fn radius(&self, i: usize) -> f64 {
        match self {
            GateConfig::Uniform(d) => *d,
            GateConfig::PerObject(ds) => ds[i],
        }
    }
}

pub(crate) fn is_finite(p: &Vec3) -> bool {
    p.iter().all(|c| c.is_finite())
}
