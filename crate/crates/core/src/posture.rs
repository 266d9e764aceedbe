//! Posture analytics: side splines, dorsoventral bend angles, eigen-embryo
//! PCA and per-cell diffusion coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbryoGraph, TrackState, Vec3};

/// Natural cubic spline through 3-D points, parameterised by cumulative
/// chord length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalSpline {
    pub knots: Vec<f64>,
    pub points: Vec<Vec3>,
    /// Second derivative at each knot.
    pub moments: Vec<Vec3>,
}

impl NaturalSpline {
    /// Fits the spline. Coincident consecutive points are rejected.
    pub fn fit(points: &[Vec3]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "a spline needs at least 2 points, got {}",
                points.len()
            )));
        }
        let mut knots = vec![0.0];
        for w in points.windows(2) {
            let h = (w[1] - w[0]).norm();
            if !(h > 0.0) {
                return Err(Error::InvalidInput("coincident spline points".into()));
            }
            knots.push(knots.last().unwrap() + h);
        }
        let n = points.len();
        let mut moments = vec![Vec3::zeros(); n];
        if n > 2 {
            // Thomas algorithm on the interior moments.
            let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut rhs = vec![Vec3::zeros(); m];
            for i in 0..m {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0
                    * ((points[i + 2] - points[i + 1]) / h[i + 1]
                        - (points[i + 1] - points[i]) / h[i]);
            }
            for i in 1..m {
                let w = h[i] / diag[i - 1];
                diag[i] -= w * h[i];
                let prev = rhs[i - 1];
                rhs[i] -= prev * w;
            }
            moments[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                moments[i + 1] = (rhs[i] - moments[i + 2] * h[i + 1]) / diag[i];
            }
        }
        Ok(Self {
            knots,
            points: points.to_vec(),
            moments,
        })
    }

    pub fn length(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    fn interval(&self, s: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= s);
        i.clamp(1, self.knots.len() - 1) - 1
    }

    pub fn eval(&self, s: f64) -> Vec3 {
        let i = self.interval(s);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - s) / h;
        let b = (s - self.knots[i]) / h;
        self.points[i] * a
            + self.points[i + 1] * b
            + (self.moments[i] * (a.powi(3) - a) + self.moments[i + 1] * (b.powi(3) - b)) * h * h
                / 6.0
    }

    pub fn derivative(&self, s: f64) -> Vec3 {
        let i = self.interval(s);
        let h = self.knots[i + 1] - self.knots[i];
        let a = (self.knots[i + 1] - s) / h;
        let b = (s - self.knots[i]) / h;
        (self.points[i + 1] - self.points[i]) / h
            + (self.moments[i + 1] * (3.0 * b * b - 1.0) - self.moments[i] * (3.0 * a * a - 1.0))
                * h
                / 6.0
    }

    /// `count` points evenly spaced in the parameter.
    pub fn sample(&self, count: usize) -> Vec<Vec3> {
        match count {
            0 => vec![],
            1 => vec![self.points[0]],
            _ => (0..count)
                .map(|i| self.eval(self.length() * i as f64 / (count - 1) as f64))
                .collect(),
        }
    }
}

/// Direction of positive bends about the lateral (left to right) axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DvSign {
    #[default]
    RightHanded,
    LeftHanded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureDescriptor {
    pub left_spline: NaturalSpline,
    pub right_spline: NaturalSpline,
    /// Left segments first, then right, anterior to posterior; radians.
    pub bend_angles: Vec<f64>,
    /// Midpoint of each left/right pair.
    pub midpoints: Vec<Vec3>,
    /// `midpoints[k + 1] − midpoints[k]`.
    pub v2: Vec<Vec3>,
}

/// Left and right vertex sequences read off the body segments.
pub fn side_chains(graph: &EmbryoGraph) -> Result<(Vec<usize>, Vec<usize>)> {
    let segs = &graph.body_segments;
    if segs.is_empty() {
        return Err(Error::InvalidInput("graph has no body segments".into()));
    }
    let mut left = vec![segs[0][0]];
    let mut right = vec![segs[0][1]];
    for (k, q) in segs.iter().enumerate() {
        if q[0] != left[k] || q[1] != right[k] {
            return Err(Error::InvalidInput(format!(
                "body segment {k} does not continue the previous one"
            )));
        }
        left.push(q[3]);
        right.push(q[2]);
    }
    Ok((left, right))
}

const TINY: f64 = 1e-12;

fn signed_angle(a: &Vec3, b: &Vec3, axis: &Vec3) -> f64 {
    let pa = a - axis * a.dot(axis);
    let pb = b - axis * b.dot(axis);
    if pa.norm() < TINY || pb.norm() < TINY {
        return 0.0;
    }
    pa.cross(&pb).dot(axis).atan2(pa.dot(&pb))
}

/// Tangents at each cell of one side: bisectors of the unit chords at
/// interior cells, spline end tangents at the two ends.
fn side_tangents(points: &[Vec3], spline: &NaturalSpline) -> Vec<Vec3> {
    let n = points.len();
    let chords: Vec<Vec3> = points
        .windows(2)
        .map(|w| (w[1] - w[0]).normalize())
        .collect();
    let mut t = Vec::with_capacity(n);
    t.push(spline.derivative(0.0).normalize());
    for k in 1..n - 1 {
        let b = chords[k - 1] + chords[k];
        t.push(if b.norm() < TINY { chords[k] } else { b.normalize() });
    }
    t.push(spline.derivative(spline.length()).normalize());
    t
}

/// Fits both side splines and measures the bend over every segment.
///
/// The bend of one side over segment `k` is the signed turning of its
/// tangent from cell `k` to cell `k + 1`, seen in the plane spanned by `v2`
/// and the dorsoventral normal, i.e. about the segment's lateral axis.
pub fn fit_posture(state: &TrackState, graph: &EmbryoGraph, sign: DvSign) -> Result<PostureDescriptor> {
    if state.len() != graph.vertex_count() {
        return Err(Error::DimensionMismatch {
            expected: graph.vertex_count(),
            actual: state.len(),
        });
    }
    let (left, right) = side_chains(graph)?;
    let lp: Vec<Vec3> = left.iter().map(|&i| state.positions[i]).collect();
    let rp: Vec<Vec3> = right.iter().map(|&i| state.positions[i]).collect();
    let left_spline = NaturalSpline::fit(&lp)?;
    let right_spline = NaturalSpline::fit(&rp)?;
    let midpoints: Vec<Vec3> = lp.iter().zip(&rp).map(|(l, r)| (l + r) / 2.0).collect();
    let v2: Vec<Vec3> = midpoints.windows(2).map(|w| w[1] - w[0]).collect();

    let s = match sign {
        DvSign::RightHanded => 1.0,
        DvSign::LeftHanded => -1.0,
    };
    let segments = lp.len() - 1;
    let mut axes = Vec::with_capacity(segments);
    for k in 0..segments {
        let lat = (rp[k] - lp[k]) + (rp[k + 1] - lp[k + 1]);
        let along = if v2[k].norm() > TINY { v2[k].normalize() } else { Vec3::zeros() };
        let lat = lat - along * lat.dot(&along);
        axes.push(if lat.norm() > TINY { lat.normalize() } else { Vec3::zeros() });
    }
    let mut bend_angles = Vec::with_capacity(2 * segments);
    for (points, spline) in [(&lp, &left_spline), (&rp, &right_spline)] {
        let t = side_tangents(points, spline);
        for k in 0..segments {
            let axis = axes[k];
            let a = if axis.norm() > 0.0 {
                signed_angle(&t[k], &t[k + 1], &axis)
            } else {
                t[k].dot(&t[k + 1]).clamp(-1.0, 1.0).acos()
            };
            bend_angles.push(s * a);
        }
    }
    Ok(PostureDescriptor {
        left_spline,
        right_spline,
        bend_angles,
        midpoints,
        v2,
    })
}

/// Bend angles of every frame, one row per frame.
pub fn bend_angle_matrix(states: &[TrackState], graph: &EmbryoGraph, sign: DvSign) -> Result<Vec<Vec<f64>>> {
    states
        .iter()
        .map(|s| fit_posture(s, graph, sign).map(|p| p.bend_angles))
        .collect()
}

/// Principal components of bend-angle space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    pub mean: Vec<f64>,
    /// Unit components, largest variance first.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub variance_fractions: Vec<f64>,
    /// Per-frame projections onto the components.
    pub scores: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    pub fn cumulative_fractions(&self) -> Vec<f64> {
        self.variance_fractions
            .iter()
            .scan(0.0, |acc, f| {
                *acc += f;
                Some(*acc)
            })
            .collect()
    }

    /// Posture rebuilt from the first `k` components.
    pub fn reconstruct(&self, scores: &[f64], k: usize) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in self.components.iter().zip(scores).take(k) {
            for (o, x) in out.iter_mut().zip(c) {
                *o += s * x;
            }
        }
        out
    }
}

/// Mean-centred PCA of the rows of `data`.
///
/// Each component is signed so its largest-magnitude entry is positive.
/// With zero total variance the first fraction is 1 and the rest 0.
pub fn eigen_embryos(data: &[Vec<f64>]) -> Result<EigenDecomposition> {
    if data.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA needs at least 2 frames, got {}",
            data.len()
        )));
    }
    let dim = data[0].len();
    if dim == 0 {
        return Err(Error::InvalidInput("empty feature vectors".into()));
    }
    if let Some(row) = data.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: row.len(),
        });
    }
    let t = data.len();
    let x = DMatrix::from_fn(t, dim, |i, j| data[i][j]);
    let mean: DVector<f64> = x.row_mean().transpose();
    let centred = DMatrix::from_fn(t, dim, |i, j| x[(i, j)] - mean[j]);
    let mut cov = centred.transpose() * &centred / (t - 1) as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // First entry of largest magnitude, ignoring round-off ties.
            let big = c
                .iter()
                .copied()
                .fold(0.0f64, |b, v| if v.abs() > b.abs() + 1e-12 { v } else { b });
            if big < 0.0 { c.iter().map(|v| -v).collect() } else { c }
        })
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    let variance_fractions = if total > 0.0 {
        eigenvalues.iter().map(|v| v / total).collect()
    } else {
        (0..dim).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
    };
    let scores = (0..t)
        .map(|i| {
            components
                .iter()
                .map(|c| (0..dim).map(|j| centred[(i, j)] * c[j]).sum())
                .collect()
        })
        .collect();
    Ok(EigenDecomposition {
        mean: mean.iter().copied().collect(),
        components,
        eigenvalues,
        variance_fractions,
        scores,
    })
}

/// Result of a mean-squared-displacement fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionFit {
    /// µm²/s.
    pub coefficient: f64,
    /// Log-log slope of MSD against lag; 1 for free diffusion.
    pub exponent: f64,
    /// MSD grows clearly faster or slower than linearly.
    pub nonlinear: bool,
    pub max_lag: usize,
}

/// Longest lag used by [`diffusion_coefficient`].
pub const MAX_LAG: usize = 10;

/// Fits `MSD(τ) = 6·D·τ` by least squares through the origin over lags
/// `1..=min(MAX_LAG, len / 4)`.
pub fn diffusion_coefficient(track: &[Vec3], dt: f64) -> Result<DiffusionFit> {
    if track.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "diffusion fit needs at least 10 samples, got {}",
            track.len()
        )));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    let max_lag = (track.len() / 4).clamp(1, MAX_LAG);
    let msd: Vec<f64> = (1..=max_lag)
        .map(|lag| {
            let n = track.len() - lag;
            (0..n).map(|i| (track[i + lag] - track[i]).norm_squared()).sum::<f64>() / n as f64
        })
        .collect();
    let taus: Vec<f64> = (1..=max_lag).map(|l| l as f64 * dt).collect();
    let num: f64 = taus.iter().zip(&msd).map(|(t, m)| t * m).sum();
    let den: f64 = taus.iter().map(|t| t * t).sum();
    let coefficient = num / (6.0 * den);

    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(&msd)
        .filter(|(_, m)| **m > 0.0)
        .map(|(t, m)| (t.ln(), m.ln()))
        .collect();
    let exponent = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        if sxx > 0.0 { sxy / sxx } else { 1.0 }
    } else {
        1.0
    };
    Ok(DiffusionFit {
        coefficient,
        exponent,
        nonlinear: coefficient > 0.0 && !(0.5..=1.5).contains(&exponent),
        max_lag,
    })
}

/// Diffusion fit for every object's track over a sequence of states.
pub fn diffusion_per_object(states: &[TrackState], dt: f64) -> Result<Vec<DiffusionFit>> {
    let n = states.first().map_or(0, TrackState::len);
    (0..n)
        .map(|i| {
            let track: Vec<Vec3> = states.iter().map(|s| s.positions[i]).collect();
            diffusion_coefficient(&track, dt)
        })
        .collect()
}
