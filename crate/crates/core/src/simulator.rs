//! Synthetic embryo-like motion with corrupted detections.
//!
//! The body is a chain of `pair_count` backbone points spaced
//! `scale / (pair_count − 1)` apart. Each joint carries a bend angle (about
//! the local lateral axis) and a twist (about the local tangent); left and
//! right cells sit at `±lateral_width / 2` along the lateral axis. A constant
//! base bend coils the body, a travelling wave bends it smoothly, and
//! Poisson-timed twitches rigidly rotate the part posterior to a random
//! interior joint. Twitch offsets then relax geometrically.
//! The centroid follows a mean-reverting random walk.
//!
//! All randomness comes from a `ChaCha8Rng` seeded with `seed`, consumed in
//! a fixed order, so equal configurations give bit-identical output.

use nalgebra::{Rotation3, Unit};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DetectionSet, TrackState, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Per-axis standard deviation of centroid steps, µm.
    pub drift_sigma: f64,
    pub twitch_probability: f64,
    /// Largest twitch rotation, rad.
    pub twitch_rotation_max: f64,
    /// Fraction of a twitch offset kept from one frame to the next.
    pub twitch_decay: f64,
    /// Amplitude of the bending wave, rad.
    pub bend_amplitude: f64,
    /// Bending wave frequency, cycles per frame.
    pub bend_frequency: f64,
    /// Constant bend per joint that coils the body, rad.
    pub base_curvature: f64,
    /// Amplitude of the slow twist wave per joint, rad.
    pub twist_amplitude: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            drift_sigma: 0.3,
            twitch_probability: 0.1,
            twitch_rotation_max: 0.3,
            twitch_decay: 0.8,
            bend_amplitude: 0.15,
            bend_frequency: 0.01,
            base_curvature: 0.45,
            twist_amplitude: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    /// Isotropic localisation noise, µm.
    pub noise_sigma: f64,
    pub dropout_probability: f64,
    /// Mean number of debris points per frame.
    pub debris_rate: f64,
    /// Side of the cube, centred on the body centroid, holding debris, µm.
    pub debris_box: f64,
    /// True points closer than this are detected as one midpoint, µm.
    pub merge_distance: f64,
}

impl CorruptionConfig {
    pub fn none() -> Self {
        Self {
            noise_sigma: 0.0,
            dropout_probability: 0.0,
            debris_rate: 0.0,
            debris_box: 60.0,
            merge_distance: 0.0,
        }
    }

    /// Poor segmentation: frequent dropout and debris.
    pub fn heavy() -> Self {
        Self {
            dropout_probability: 0.1,
            debris_rate: 2.0,
            ..Self::default()
        }
    }
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.3,
            dropout_probability: 0.03,
            debris_rate: 0.5,
            debris_box: 60.0,
            merge_distance: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub pair_count: usize,
    pub frame_count: usize,
    pub seed: u64,
    /// Backbone length, µm.
    pub scale: f64,
    /// Distance between the left and right cell of a pair, µm.
    pub lateral_width: f64,
    pub motion: MotionConfig,
    pub corruption: CorruptionConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            pair_count: 10,
            frame_count: 200,
            seed: 0,
            scale: 90.0,
            lateral_width: 8.0,
            motion: MotionConfig::default(),
            corruption: CorruptionConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.pair_count < 2 {
            return bad(format!("pair_count must be at least 2, got {}", self.pair_count));
        }
        if self.frame_count == 0 {
            return bad("frame_count must be positive".into());
        }
        let m = &self.motion;
        let c = &self.corruption;
        for (name, p) in [
            ("twitch_probability", m.twitch_probability),
            ("twitch_decay", m.twitch_decay),
            ("dropout_probability", c.dropout_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, v) in [
            ("scale", self.scale),
            ("lateral_width", self.lateral_width),
            ("drift_sigma", m.drift_sigma),
            ("twitch_rotation_max", m.twitch_rotation_max),
            ("bend_amplitude", m.bend_amplitude),
            ("bend_frequency", m.bend_frequency),
            ("twist_amplitude", m.twist_amplitude),
            ("noise_sigma", c.noise_sigma),
            ("debris_rate", c.debris_rate),
            ("debris_box", c.debris_box),
            ("merge_distance", c.merge_distance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        if !m.base_curvature.is_finite() {
            return bad("base_curvature must be finite".into());
        }
        Ok(())
    }
}

/// Ground truth and detections for every frame `0..frame_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub ground_truth: Vec<TrackState>,
    pub detections: Vec<DetectionSet>,
}

struct Body {
    centroid: Vec3,
    orientation: Rotation3<f64>,
    bend_offset: Vec<f64>,
    twist_offset: Vec<f64>,
}

fn posture(cfg: &SimConfig, body: &Body, t: usize) -> Vec<Vec3> {
    let p = cfg.pair_count;
    let m = &cfg.motion;
    let step = cfg.scale / (p - 1) as f64;
    let half = cfg.lateral_width / 2.0;
    let phase = 2.0 * std::f64::consts::PI * m.bend_frequency * t as f64;

    // Local frame columns: tangent, lateral, normal.
    let mut frame = body.orientation;
    let mut spine = Vec::with_capacity(p);
    let mut lateral = Vec::with_capacity(p);
    let mut point = Vec3::zeros();
    for k in 0..p {
        if k > 0 {
            point += frame * Vec3::x() * step;
        }
        spine.push(point);
        lateral.push(frame * Vec3::y());
        if k + 1 < p && k > 0 {
            let bend = m.base_curvature
                + m.bend_amplitude * (phase - 0.6 * k as f64).sin()
                + body.bend_offset[k];
            let twist =
                m.twist_amplitude * (0.3 * phase + 0.9 * k as f64).sin() + body.twist_offset[k];
            frame = frame
                * Rotation3::from_axis_angle(&Vector::y_axis(), bend)
                * Rotation3::from_axis_angle(&Vector::x_axis(), twist);
        }
    }
    let mean = spine.iter().fold(Vec3::zeros(), |a, s| a + s) / p as f64;
    let mut out = Vec::with_capacity(2 * p);
    for k in 0..p {
        let c = spine[k] - mean + body.centroid;
        out.push(c + lateral[k] * half);
        out.push(c - lateral[k] * half);
    }
    out
}

type Vector = nalgebra::Vector3<f64>;

fn random_axis(rng: &mut ChaCha8Rng, normal: &Normal<f64>) -> Unit<Vector> {
    loop {
        let v = Vector::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        if v.norm() > 1e-6 {
            return Unit::new_normalize(v);
        }
    }
}

/// Generates a sequence.
pub fn generate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let p = cfg.pair_count;
    let m = &cfg.motion;
    let c = &cfg.corruption;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let debris = (c.debris_rate > 0.0).then(|| Poisson::new(c.debris_rate).expect("positive rate"));

    let mut body = Body {
        centroid: Vec3::zeros(),
        orientation: Rotation3::from_axis_angle(&random_axis(&mut rng, &unit), rng.random_range(0.0..std::f64::consts::TAU)),
        bend_offset: vec![0.0; p],
        twist_offset: vec![0.0; p],
    };

    let mut ground_truth = Vec::with_capacity(cfg.frame_count);
    let mut detections = Vec::with_capacity(cfg.frame_count);
    for t in 0..cfg.frame_count {
        if t > 0 {
            for o in body.bend_offset.iter_mut().chain(body.twist_offset.iter_mut()) {
                *o *= m.twitch_decay;
            }
            let step = Vec3::new(unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng));
            body.centroid = body.centroid * 0.95 + step * m.drift_sigma;
            if p > 2 && rng.random::<f64>() < m.twitch_probability {
                let angle = rng.random_range(-1.0..=1.0) * m.twitch_rotation_max;
                let joint = rng.random_range(1..p - 1);
                body.bend_offset[joint] += angle;
                body.twist_offset[joint] += 0.5 * rng.random_range(-1.0..=1.0) * m.twitch_rotation_max;
            }
        }
        let positions = posture(cfg, &body, t);
        let truth = TrackState::new(t, positions)?;
        detections.push(corrupt(&truth, c, debris.as_ref(), &mut rng, &unit)?);
        ground_truth.push(truth);
    }
    Ok(SimOutput {
        ground_truth,
        detections,
    })
}

fn corrupt(
    truth: &TrackState,
    c: &CorruptionConfig,
    debris: Option<&Poisson<f64>>,
    rng: &mut ChaCha8Rng,
    unit: &Normal<f64>,
) -> Result<DetectionSet> {
    let n = truth.len();
    let noise = |rng: &mut ChaCha8Rng| {
        Vec3::new(unit.sample(rng), unit.sample(rng), unit.sample(rng)) * c.noise_sigma
    };
    let visible: Vec<bool> = (0..n)
        .map(|_| rng.random::<f64>() >= c.dropout_probability)
        .collect();
    let mut merged = vec![false; n];
    let mut points = Vec::with_capacity(n + 4);
    for i in 0..n {
        if !visible[i] || merged[i] {
            continue;
        }
        let partner = (i + 1..n).find(|&j| {
            visible[j]
                && !merged[j]
                && (truth.positions[i] - truth.positions[j]).norm() < c.merge_distance
        });
        let centre = match partner {
            Some(j) => {
                merged[j] = true;
                (truth.positions[i] + truth.positions[j]) / 2.0
            }
            None => truth.positions[i],
        };
        points.push(centre + noise(rng));
    }
    if let Some(d) = debris {
        let count = d.sample(rng) as usize;
        let centroid = truth.positions.iter().fold(Vec3::zeros(), |a, p| a + p) / n as f64;
        for _ in 0..count {
            let offset = Vec3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            ) * c.debris_box;
            points.push(centroid + offset);
        }
    }
    points.shuffle(rng);
    let mut unique: Vec<Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if !unique.contains(&p) {
            unique.push(p);
        }
    }
    DetectionSet::new(truth.frame_index, unique)
}

/// Per-frame movement and its quantile labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementStrata {
    /// Frames `1..T`; frame 0 has no predecessor.
    pub frame_indices: Vec<usize>,
    /// `Σ_i ‖z_i(t) − z_i(t−1)‖₂`.
    pub displacement: Vec<f64>,
    /// 0 = lowest quartile.
    pub quartile: Vec<usize>,
    /// 0 = lowest decile.
    pub decile: Vec<usize>,
}

impl MovementStrata {
    pub fn len(&self) -> usize {
        self.frame_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_indices.is_empty()
    }

    /// Quartile label of a frame, if the frame is covered.
    pub fn quartile_of(&self, frame_index: usize) -> Option<usize> {
        self.frame_indices
            .binary_search(&frame_index)
            .ok()
            .map(|i| self.quartile[i])
    }
}

/// Rank-based labels in `0..bins`: a value's label is
/// `⌊bins · #{smaller values} / len⌋`, so ties share the lower label.
pub fn quantile_labels(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = values.len().max(1);
    values
        .iter()
        .map(|v| {
            let less = sorted.partition_point(|s| s < v);
            (bins * less / len).min(bins.saturating_sub(1))
        })
        .collect()
}

/// Summed displacement of every frame after the first, with quartile and
/// decile labels.
pub fn movement_quantiles(ground_truth: &[TrackState]) -> Result<MovementStrata> {
    if ground_truth.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "movement strata need at least 4 frames, got {}",
            ground_truth.len()
        )));
    }
    let displacement: Vec<f64> = ground_truth
        .windows(2)
        .map(|w| {
            w[1].positions
                .iter()
                .zip(&w[0].positions)
                .map(|(a, b)| (a - b).norm())
                .sum()
        })
        .collect();
    Ok(MovementStrata {
        frame_indices: ground_truth[1..].iter().map(|s| s.frame_index).collect(),
        quartile: quantile_labels(&displacement, 4),
        decile: quantile_labels(&displacement, 10),
        displacement,
    })
}
