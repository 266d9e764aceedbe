//! Completion of a hypothesis: detected objects take their detection, the
//! rest are carried along by the displacement of their detected neighbours.

use crate::model::{Assignment, DetectionSet, EmbryoGraph, TrackState, Vec3};

/// Builds the completed state `Ẑ` for `assignment`.
///
/// An undetected object `u` with detected neighbours `D_u` is placed at
/// `1/|D_u| Σ_{v ∈ D_u} (ẑ_v − (z_v − z_u))`, i.e. the mean of the
/// positions implied by keeping each neighbour's previous offset. Without a
/// detected neighbour it keeps its previous position and is flagged lost.
/// Neighbours that are themselves undetected never contribute.
pub fn complete_state(
    prev: &TrackState,
    assignment: &Assignment,
    detections: &DetectionSet,
    graph: &EmbryoGraph,
) -> TrackState {
    complete_with_adjacency(prev, assignment, detections, &graph.adjacency())
}

/// [`complete_state`] with a precomputed adjacency list.
pub fn complete_with_adjacency(
    prev: &TrackState,
    assignment: &Assignment,
    detections: &DetectionSet,
    adjacency: &[Vec<usize>],
) -> TrackState {
    let n = prev.len();
    debug_assert_eq!(assignment.len(), n);
    let mut positions = prev.positions.clone();
    let mut lost = vec![false; n];
    for (i, choice) in assignment.0.iter().enumerate() {
        if let Some(j) = *choice {
            positions[i] = detections.points[j];
        }
    }
    for u in 0..n {
        if assignment.0[u].is_some() {
            continue;
        }
        let mut sum = Vec3::zeros();
        let mut count = 0usize;
        for &v in &adjacency[u] {
            if let Some(j) = assignment.0[v] {
                sum += detections.points[j] - (prev.positions[v] - prev.positions[u]);
                count += 1;
            }
        }
        if count > 0 {
            positions[u] = sum / count as f64;
        } else {
            lost[u] = true;
        }
    }
    TrackState {
        frame_index: detections.frame_index,
        positions,
        lost,
    }
}

/// Edge-length distortion introduced by interpolation: the norm of the
/// edge-length change over edges touching an undetected vertex.
pub fn interpolation_residual(
    completed: &TrackState,
    prev: &TrackState,
    assignment: &Assignment,
    graph: &EmbryoGraph,
) -> f64 {
    graph
        .edges
        .iter()
        .filter(|&&(u, v)| assignment.0[u].is_none() || assignment.0[v].is_none())
        .map(|&(u, v)| {
            let now = (completed.positions[u] - completed.positions[v]).norm();
            let before = (prev.positions[u] - prev.positions[v]).norm();
            (now - before).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}
