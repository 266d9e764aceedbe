//! Self-intersection test for body-segment quadrilaterals.

use crate::model::{EmbryoGraph, TrackState, Vec3};

/// Rays closer to parallel than this are treated as missing the triangle.
pub const PARALLEL_EPS: f64 = 1e-9;

/// Triangles with twice-area below this are skipped.
const DEGENERATE_AREA: f64 = 1e-12;

/// Hit parameters of a ray against a triangle: `origin + t·dir` with
/// barycentric coordinates `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

/// Möller–Trumbore ray/triangle intersection. `t` is unrestricted; callers
/// clip it to the extent they need.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<RayHit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < PARALLEL_EPS {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    Some(RayHit { t, u, v })
}

/// Whether the closed segment `a → b` crosses the triangle.
pub fn segment_hits_triangle(a: &Vec3, b: &Vec3, tri: &[Vec3; 3]) -> bool {
    ray_triangle(a, &(b - a), tri).is_some_and(|h| (0.0..=1.0).contains(&h.t))
}

fn is_degenerate(tri: &[Vec3; 3]) -> bool {
    (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm() < DEGENERATE_AREA
}

/// The two triangles `(a, b, c)` and `(a, c, d)` of quad `[a, b, c, d]`.
pub fn quad_triangles(state: &TrackState, quad: &[usize; 4]) -> [[Vec3; 3]; 2] {
    let p = |i: usize| state.positions[quad[i]];
    [[p(0), p(1), p(2)], [p(0), p(2), p(3)]]
}

fn triangle_edges(tri: &[Vec3; 3]) -> [(Vec3, Vec3); 3] {
    [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
}

/// Whether two tessellated quads cross: some triangle edge of either one
/// passes through a triangle of the other.
pub fn quads_intersect(a: &[[Vec3; 3]; 2], b: &[[Vec3; 3]; 2]) -> bool {
    let one_way = |from: &[[Vec3; 3]; 2], into: &[[Vec3; 3]; 2]| {
        from.iter()
            .filter(|t| !is_degenerate(t))
            .flat_map(triangle_edges)
            .any(|(p, q)| {
                into.iter()
                    .filter(|t| !is_degenerate(t))
                    .any(|t| segment_hits_triangle(&p, &q, t))
            })
    };
    one_way(a, b) || one_way(b, a)
}

/// Whether any two nonadjacent body segments of `state` intersect.
///
/// Segments `k` and `k'` are nonadjacent when `|k − k'| ≥ 2`; neighbouring
/// segments share a lateral edge and always touch.
pub fn segments_intersect(state: &TrackState, graph: &EmbryoGraph) -> bool {
    let tris: Vec<[[Vec3; 3]; 2]> = graph
        .body_segments
        .iter()
        .map(|q| quad_triangles(state, q))
        .collect();
    (0..tris.len()).any(|i| ((i + 2)..tris.len()).any(|j| quads_intersect(&tris[i], &tris[j])))
}
