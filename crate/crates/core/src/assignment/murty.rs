//! Murty's ranked assignment enumeration.
//!
//! The rectangular `n x (m + n)` problem is embedded in a square one by
//! adding `m` zero-cost dummy rows that absorb whichever columns the tracks
//! leave free. Partitioning only ever constrains the real rows, so every
//! track assignment appears exactly once. Each subproblem keeps the optimal
//! matching and duals of its solution; a child differs from its parent by
//! one forbidden cell plus a longer forced prefix, which a single shortest
//! augmenting path resolves.
//!
//! Children are queued unsolved under a dual lower bound (parent objective
//! plus the smallest reduced cost left in the freed row) and solved only
//! when that bound reaches the front of the queue.
//!
//! Ordering among queued solutions is `(offset + objective, parent,
//! objective, assignment)`, so ties are broken by parent index and then by
//! the lexicographic order of the assignment.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::lap::{self, LapState, Workspace};
use super::CostMatrix;
use crate::error::{Error, Result};
use crate::model::Assignment;

/// One entry of a ranked enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAssignment {
    /// Index of the subproblem (parent) the assignment solves.
    pub parent: usize,
    pub assignment: Assignment,
    /// Sum of the selected cost-matrix entries.
    pub objective: f64,
    /// Parent offset plus objective; the ranking key.
    pub total: f64,
}

/// Assignments in nondecreasing order of `total`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedAssignments {
    pub items: Vec<RankedAssignment>,
}

impl RankedAssignments {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RankedAssignment> {
        self.items.iter()
    }
}

impl IntoIterator for RankedAssignments {
    type Item = RankedAssignment;
    type IntoIter = std::vec::IntoIter<RankedAssignment>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.into_iter()
    }
}

/// The `k` lowest-cost feasible assignments of `cost`, cheapest first.
///
/// Pass `usize::MAX` to enumerate every feasible assignment.
pub fn murty_k_best(cost: &CostMatrix, k: usize) -> Result<RankedAssignments> {
    k_best_of_k(&[(cost, 0.0)], k)
}

/// The `k` globally cheapest `(offset + objective)` assignments across
/// several independent subproblems, found with one shared queue.
pub fn k_best_of_k(parents: &[(&CostMatrix, f64)], k: usize) -> Result<RankedAssignments> {
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if parents.is_empty() {
        return Err(Error::InvalidConfig(
            "k-best-of-k needs at least one parent".into(),
        ));
    }

    let mut ws = Workspace::default();
    let mut queue = Queue::default();
    for (index, &(cost, offset)) in parents.iter().enumerate() {
        let size = cost.cols();
        let base = |r: usize, c: usize| if r < cost.tracks() { cost.get(r, c) } else { 0.0 };
        if let Some(lap) = lap::solve_padded(base, cost.tracks(), size, &mut ws) {
            queue.push_exact(Solved::new(index, offset, cost, lap, 0, Vec::new()));
        }
    }

    let mut items = Vec::new();
    while let Some(node) = queue.heap.pop() {
        match node.body {
            Body::Exact(solved) => {
                let Solved {
                    key,
                    prefix,
                    forbidden,
                    lap,
                } = *solved;
                let parent = key.parent;
                items.push(RankedAssignment {
                    parent,
                    assignment: key.assignment,
                    objective: key.objective,
                    total: key.total,
                });
                if items.len() >= k {
                    break;
                }
                let (cost, offset) = parents[parent];
                partition(cost, offset, parent, prefix, &forbidden, lap, &mut queue);
            }
            Body::Pending(pending) => {
                let (cost, offset) = parents[pending.parent];
                if let Some(solved) = pending.solve(cost, offset, &mut ws) {
                    queue.push_exact(solved);
                }
            }
        }
    }
    Ok(RankedAssignments { items })
}

/// Queues the Murty partition of a popped subproblem as pending children.
fn partition(
    cost: &CostMatrix,
    offset: f64,
    parent: usize,
    prefix: usize,
    forbidden: &[(usize, usize)],
    solved: LapState,
    queue: &mut Queue,
) {
    let n = cost.tracks();
    let size = cost.cols();
    let objective = cost.objective(&assignment_of(cost, &solved));
    let lap = Rc::new(solved);
    let mut active = vec![true; size];
    for r in 0..prefix {
        active[lap.col4row[r]] = false;
    }
    for row in prefix..n {
        let col = lap.col4row[row];
        let mut child_forbidden: Vec<(usize, usize)> =
            forbidden.iter().copied().filter(|&(r, _)| r >= row).collect();
        child_forbidden.push((row, col));

        let ur = lap.u[row];
        let slack = (0..size)
            .filter(|&j| active[j] && !child_forbidden.contains(&(row, j)))
            .map(|j| cost.get(row, j) - ur - lap.v[j])
            .fold(f64::INFINITY, f64::min);
        if slack.is_finite() {
            let bound = objective + slack.max(0.0);
            // Rounding in the incremental duals must never let a bound
            // exceed the true cost.
            let bound = offset + bound - 1e-9 * (1.0 + bound.abs());
            queue.push_pending(Pending {
                bound,
                parent,
                row,
                forbidden: child_forbidden,
                lap: Rc::clone(&lap),
            });
        }
        active[col] = false;
    }
}

fn assignment_of(cost: &CostMatrix, lap: &LapState) -> Assignment {
    let m = cost.detections();
    Assignment(
        lap.col4row[..cost.tracks()]
            .iter()
            .map(|&c| (c < m).then_some(c))
            .collect(),
    )
}

#[derive(Debug)]
struct Key {
    total: f64,
    parent: usize,
    objective: f64,
    assignment: Assignment,
}

impl Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total
            .total_cmp(&other.total)
            .then(self.parent.cmp(&other.parent))
            .then(self.objective.total_cmp(&other.objective))
            .then_with(|| self.assignment.cmp(&other.assignment))
    }
}

/// A solved subproblem: rows `0..prefix` are forced to their current
/// columns and `forbidden` cells are excluded.
struct Solved {
    key: Key,
    prefix: usize,
    forbidden: Vec<(usize, usize)>,
    lap: LapState,
}

impl Solved {
    fn new(
        parent: usize,
        offset: f64,
        cost: &CostMatrix,
        lap: LapState,
        prefix: usize,
        forbidden: Vec<(usize, usize)>,
    ) -> Self {
        let assignment = assignment_of(cost, &lap);
        let objective = cost.objective(&assignment);
        Self {
            key: Key {
                total: offset + objective,
                parent,
                objective,
                assignment,
            },
            prefix,
            forbidden,
            lap,
        }
    }
}

/// An unsolved child: the parent solution with `row` freed and its old
/// column added to `forbidden`; rows before `row` stay forced.
struct Pending {
    bound: f64,
    parent: usize,
    row: usize,
    forbidden: Vec<(usize, usize)>,
    lap: Rc<LapState>,
}

impl Pending {
    fn solve(self, cost: &CostMatrix, offset: f64, ws: &mut Workspace) -> Option<Solved> {
        let n = cost.tracks();
        let size = cost.cols();
        let mut active = vec![true; size];
        for r in 0..self.row {
            active[self.lap.col4row[r]] = false;
        }
        let mut lap = (*self.lap).clone();
        lap.unmatch_row(self.row);
        let forbidden = &self.forbidden;
        let lookup = |r: usize, c: usize| {
            if r >= n {
                0.0
            } else if forbidden.contains(&(r, c)) {
                f64::INFINITY
            } else {
                cost.get(r, c)
            }
        };
        lap::augment(lookup, &mut lap, self.row, &active, ws).then(|| {
            Solved::new(self.parent, offset, cost, lap, self.row, self.forbidden)
        })
    }
}

enum Body {
    Exact(Box<Solved>),
    Pending(Pending),
}

struct Node {
    total: f64,
    seq: u64,
    body: Body,
}

impl Node {
    fn cmp_key(&self, other: &Self) -> Ordering {
        self.total.total_cmp(&other.total).then_with(|| match (&self.body, &other.body) {
            // At equal keys pending children resolve first, so a solution is
            // only emitted once nothing unsolved can tie with or beat it.
            (Body::Pending(_), Body::Exact(_)) => Ordering::Less,
            (Body::Exact(_), Body::Pending(_)) => Ordering::Greater,
            (Body::Pending(_), Body::Pending(_)) => self.seq.cmp(&other.seq),
            (Body::Exact(a), Body::Exact(b)) => a.key.cmp(&b.key),
        })
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Node>,
    seq: u64,
}

impl Queue {
    fn push_exact(&mut self, solved: Solved) {
        self.seq += 1;
        self.heap.push(Node {
            total: solved.key.total,
            seq: self.seq,
            body: Body::Exact(Box::new(solved)),
        });
    }

    fn push_pending(&mut self, pending: Pending) {
        self.seq += 1;
        self.heap.push(Node {
            total: pending.bound,
            seq: self.seq,
            body: Body::Pending(pending),
        });
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_key(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed: `BinaryHeap` pops the cheapest node first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.cmp_key(self)
    }
}
