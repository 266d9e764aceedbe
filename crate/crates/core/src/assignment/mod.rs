//! Gated cost matrices, exact linear assignment and ranked K-best assignment
//! enumeration.
//!
//! A cost matrix has one row per track and `m + n` columns: the `m`
//! detections followed by one gate column per track. Each track takes exactly
//! one column; each detection is taken at most once. Detections left over are
//! treated as debris at zero cost.

mod lap;
mod murty;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, DetectionSet, GateConfig, TrackState};

pub use murty::{k_best_of_k, murty_k_best, RankedAssignment, RankedAssignments};

/// Dense `n x (m + n)` track-to-column costs; `+inf` marks a forbidden cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    tracks: usize,
    detections: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    /// Wraps row-major entries, checking the gate-block layout.
    pub fn new(tracks: usize, detections: usize, entries: Vec<f64>) -> Result<Self> {
        let cols = detections + tracks;
        if entries.len() != tracks * cols {
            return Err(Error::DimensionMismatch {
                expected: tracks * cols,
                actual: entries.len(),
            });
        }
        let cm = Self {
            tracks,
            detections,
            entries,
        };
        for i in 0..tracks {
            for j in 0..cols {
                let c = cm.get(i, j);
                if c.is_nan() || c < 0.0 || c == f64::NEG_INFINITY {
                    return Err(Error::InvalidInput(format!(
                        "cost ({i}, {j}) = {c} is not a nonnegative cost"
                    )));
                }
            }
            for g in 0..tracks {
                let c = cm.get(i, detections + g);
                if g == i && !c.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "gate cost of track {i} must be finite"
                    )));
                }
                if g != i && c.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "gate column of track {g} must be forbidden for track {i}"
                    )));
                }
            }
        }
        Ok(cm)
    }

    /// Builds a matrix from a detection block and per-track gate costs.
    pub fn from_blocks(detection_block: &[Vec<f64>], gates: &[f64]) -> Result<Self> {
        let n = gates.len();
        if detection_block.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: detection_block.len(),
            });
        }
        let m = detection_block.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(n * (m + n));
        for (i, row) in detection_block.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: row.len(),
                });
            }
            entries.extend_from_slice(row);
            entries.extend((0..n).map(|g| if g == i { gates[i] } else { f64::INFINITY }));
        }
        Self::new(n, m, entries)
    }

    pub fn tracks(&self) -> usize {
        self.tracks
    }

    pub fn detections(&self) -> usize {
        self.detections
    }

    pub fn cols(&self) -> usize {
        self.detections + self.tracks
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.cols() + col]
    }

    pub fn gate(&self, row: usize) -> f64 {
        self.get(row, self.detections + row)
    }

    /// Cost of the column chosen for `row` under `choice`.
    #[inline]
    pub fn choice_cost(&self, row: usize, choice: Option<usize>) -> f64 {
        match choice {
            Some(j) => self.get(row, j),
            None => self.gate(row),
        }
    }

    /// Sum of selected entries, accumulated in row order.
    pub fn objective(&self, assignment: &Assignment) -> f64 {
        assignment
            .0
            .iter()
            .enumerate()
            .map(|(i, &c)| self.choice_cost(i, c))
            .sum()
    }

    /// Whether `assignment` is one-to-one and avoids forbidden cells.
    pub fn is_feasible(&self, assignment: &Assignment) -> bool {
        assignment.len() == self.tracks
            && assignment.is_one_to_one()
            && assignment.0.iter().enumerate().all(|(i, &c)| {
                c.is_none_or(|j| j < self.detections) && self.choice_cost(i, c).is_finite()
            })
    }

    /// Number of track/detection pairs excluded by the gate.
    pub fn gated_pairs(&self) -> usize {
        (0..self.tracks)
            .map(|i| {
                (0..self.detections)
                    .filter(|&j| !self.get(i, j).is_finite())
                    .count()
            })
            .sum()
    }
}

/// Euclidean track-to-detection costs with hard gating.
///
/// Distances beyond the track's gate radius become `+inf`; the gate column
/// of track `i` holds its radius `d_i`.
pub fn build_cost_matrix(
    predicted: &TrackState,
    detections: &DetectionSet,
    gates: &GateConfig,
) -> Result<CostMatrix> {
    let n = predicted.len();
    gates.validate(n)?;
    let m = detections.len();
    let cols = m + n;
    let mut entries = vec![f64::INFINITY; n * cols];
    for (i, z) in predicted.positions.iter().enumerate() {
        let radius = gates.radius(i);
        let row = &mut entries[i * cols..(i + 1) * cols];
        for (j, o) in detections.points.iter().enumerate() {
            let d = (z - o).norm();
            if d <= radius {
                row[j] = d;
            }
        }
        row[m + i] = radius;
    }
    Ok(CostMatrix {
        tracks: n,
        detections: m,
        entries,
    })
}

/// Minimum-cost assignment: each track takes one column, each detection at
/// most one track. Returns the assignment and its objective.
pub fn solve_lap(cost: &CostMatrix) -> Result<(Assignment, f64)> {
    let mut ranked = murty_k_best(cost, 1)?;
    let best = ranked.items.pop().ok_or(Error::Infeasible)?;
    Ok((best.assignment, best.objective))
}
