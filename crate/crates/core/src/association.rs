//! Association costs: edge-length features, fitted covariance models and the
//! Mahalanobis costs built from them.
//!
//! Five cost variants are available:
//!
//! | variant    | cost                                  |
//! |------------|---------------------------------------|
//! | `Mht`      | unary                                 |
//! | `Embryo`   | `‖Ê − E‖₂ + λ·unary`                  |
//! | `Posture`  | `f_P + λ·unary`                       |
//! | `Movement` | `f_M`                                 |
//! | `PostureMovement` | `f_P + f_M + λ·unary`          |
//!
//! where `E` are graph edge lengths, `f_P` is the Mahalanobis distance of the
//! edge-length change under the posture covariance, and `f_M` that of the
//! stacked coordinate change under the movement covariance. The difference is
//! not centred by the fitted mean.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EmbryoGraph, Hypothesis, TrackState};

/// Smallest ridge added to a fitted covariance, for all-constant training data.
pub const MIN_RIDGE: f64 = 1e-9;

/// Default relative ridge: `ε = 1e-6 · trace / dim`.
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-6;

/// Attribute vector describing one state: edge lengths or stacked coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Lengths `‖z_u − z_v‖₂` of every graph edge, in graph edge order.
pub fn edge_features(state: &TrackState, graph: &EmbryoGraph) -> FeatureVector {
    FeatureVector::new(edge_lengths(state, graph))
}

fn edge_lengths(state: &TrackState, graph: &EmbryoGraph) -> Vec<f64> {
    graph
        .edges
        .iter()
        .map(|&(u, v)| (state.positions[u] - state.positions[v]).norm())
        .collect()
}

/// Stacked coordinates `[x1, y1, z1, …, xn, yn, zn]`.
pub fn movement_features(state: &TrackState) -> FeatureVector {
    FeatureVector::new(state.stacked())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Posture,
    Movement,
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovarianceKind::Posture => "posture",
            CovarianceKind::Movement => "movement",
        })
    }
}

/// Sparsity imposed on a movement covariance.
#[derive(Debug, Clone, Default)]
pub enum CovarianceStructure {
    #[default]
    Full,
    /// Keep only the 3×3 blocks of each object with itself and with its
    /// graph neighbours.
    GraphBlocks(EmbryoGraph),
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Absolute ridge; `None` uses `DEFAULT_RELATIVE_RIDGE · trace / dim`.
    pub ridge: Option<f64>,
    pub structure: CovarianceStructure,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: None,
            structure: CovarianceStructure::Full,
        }
    }
}

/// Fitted Gaussian model of frame-to-frame feature differences.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub kind: CovarianceKind,
    pub mean_diff: DVector<f64>,
    /// Regularized covariance `Σ̂ + εI`.
    pub covariance: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub ridge: f64,
}

impl CovarianceModel {
    /// Wraps a known covariance, inverting it as given.
    pub fn from_covariance(
        kind: CovarianceKind,
        mean_diff: DVector<f64>,
        covariance: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = covariance.nrows();
        if covariance.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: covariance.ncols(),
            });
        }
        if mean_diff.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: mean_diff.len(),
            });
        }
        let precision = covariance
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))?;
        Ok(Self {
            kind,
            mean_diff,
            covariance,
            precision,
            ridge: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    /// `dᵀ Σ⁻¹ d` for a raw difference vector.
    pub fn quadratic_form(&self, diff: &[f64]) -> f64 {
        let dim = self.dim();
        debug_assert_eq!(diff.len(), dim);
        let p = self.precision.as_slice();
        let mut acc = 0.0;
        for (j, &dj) in diff.iter().enumerate() {
            if dj == 0.0 {
                continue;
            }
            let col = &p[j * dim..(j + 1) * dim];
            let s: f64 = col.iter().zip(diff).map(|(a, b)| a * b).sum();
            acc += dj * s;
        }
        acc.max(0.0)
    }

    /// Mahalanobis norm of a raw difference vector.
    pub fn distance(&self, diff: &[f64]) -> f64 {
        self.quadratic_form(diff).sqrt()
    }
}

/// Fits the covariance of consecutive differences of a feature sequence.
///
/// With `T` vectors there are `T − 1` differences `Δ_t`; the estimate is
/// `Σ̂ = 1/(T−2) Σ (Δ_t − ḡ)(Δ_t − ḡ)ᵀ` plus a ridge `εI`.
pub fn fit_covariance(
    sequence: &[FeatureVector],
    kind: CovarianceKind,
    options: &FitOptions,
) -> Result<CovarianceModel> {
    let t = sequence.len();
    if t < 3 {
        return Err(Error::InsufficientData(format!(
            "covariance fit needs at least 3 frames, got {t}"
        )));
    }
    let dim = sequence[0].len();
    if let Some(bad) = sequence.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }

    let diffs: Vec<DVector<f64>> = sequence
        .windows(2)
        .map(|w| {
            DVector::from_iterator(
                dim,
                w[1].values.iter().zip(&w[0].values).map(|(a, b)| a - b),
            )
        })
        .collect();
    let mean = diffs
        .iter()
        .fold(DVector::zeros(dim), |acc, d| acc + d)
        / diffs.len() as f64;

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for d in &diffs {
        let c = d - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (t - 2) as f64;
    cov = (&cov + cov.transpose()) * 0.5;

    if let CovarianceStructure::GraphBlocks(graph) = &options.structure {
        mask_to_graph_blocks(&mut cov, graph)?;
    }

    let ridge = options.ridge.unwrap_or_else(|| {
        (DEFAULT_RELATIVE_RIDGE * cov.trace() / dim.max(1) as f64).max(MIN_RIDGE)
    });
    let (covariance, precision) = regularized_inverse(cov, ridge);
    Ok(CovarianceModel {
        kind,
        mean_diff: mean,
        covariance,
        precision,
        ridge,
    })
}

/// Fits the posture covariance from a state sequence.
pub fn fit_posture_covariance(
    states: &[TrackState],
    graph: &EmbryoGraph,
    options: &FitOptions,
) -> Result<CovarianceModel> {
    let seq: Vec<FeatureVector> = states.iter().map(|s| edge_features(s, graph)).collect();
    fit_covariance(&seq, CovarianceKind::Posture, options)
}

/// Fits the movement covariance from a state sequence.
pub fn fit_movement_covariance(
    states: &[TrackState],
    options: &FitOptions,
) -> Result<CovarianceModel> {
    let seq: Vec<FeatureVector> = states.iter().map(movement_features).collect();
    fit_covariance(&seq, CovarianceKind::Movement, options)
}

fn mask_to_graph_blocks(cov: &mut DMatrix<f64>, graph: &EmbryoGraph) -> Result<()> {
    let n = graph.vertex_count();
    if cov.nrows() != 3 * n {
        return Err(Error::DimensionMismatch {
            expected: 3 * n,
            actual: cov.nrows(),
        });
    }
    let mut keep = vec![false; n * n];
    for i in 0..n {
        keep[i * n + i] = true;
    }
    for &(u, v) in &graph.edges {
        keep[u * n + v] = true;
        keep[v * n + u] = true;
    }
    for r in 0..3 * n {
        for c in 0..3 * n {
            if !keep[(r / 3) * n + c / 3] {
                cov[(r, c)] = 0.0;
            }
        }
    }
    Ok(())
}

/// Adds `ridge·I` and inverts. A matrix that is still not positive definite
/// (possible after block masking) has its spectrum clipped at `ridge`.
fn regularized_inverse(cov: DMatrix<f64>, ridge: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = cov.nrows();
    let reg = &cov + DMatrix::identity(dim, dim) * ridge;
    if let Some(chol) = reg.clone().cholesky() {
        return (reg, chol.inverse());
    }
    let eig = cov.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0) + ridge);
    let q = &eig.eigenvectors;
    let covariance = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let precision = q * DMatrix::from_diagonal(&clipped.map(|l| 1.0 / l)) * q.transpose();
    (
        (&covariance + covariance.transpose()) * 0.5,
        (&precision + precision.transpose()) * 0.5,
    )
}

/// `√((ĝ − g)ᵀ Σ̂⁻¹ (ĝ − g))`.
pub fn mahalanobis_cost(
    current: &FeatureVector,
    previous: &FeatureVector,
    model: &CovarianceModel,
) -> Result<f64> {
    for f in [current, previous] {
        if f.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: f.len(),
            });
        }
    }
    let diff: Vec<f64> = current
        .values
        .iter()
        .zip(&previous.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(model.distance(&diff))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Mht,
    Embryo,
    Posture,
    Movement,
    #[serde(rename = "pm")]
    PostureMovement,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::Mht,
        ModelVariant::Embryo,
        ModelVariant::Posture,
        ModelVariant::Movement,
        ModelVariant::PostureMovement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Mht => "mht",
            ModelVariant::Embryo => "embryo",
            ModelVariant::Posture => "posture",
            ModelVariant::Movement => "movement",
            ModelVariant::PostureMovement => "pm",
        }
    }

    fn needs_posture(self) -> bool {
        matches!(self, ModelVariant::Posture | ModelVariant::PostureMovement)
    }

    fn needs_movement(self) -> bool {
        matches!(self, ModelVariant::Movement | ModelVariant::PostureMovement)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model variant '{s}'")))
    }
}

/// A cost variant bound to its graph and fitted covariances.
#[derive(Debug, Clone)]
pub struct AssociationModel {
    variant: ModelVariant,
    graph: EmbryoGraph,
    posture: Option<CovarianceModel>,
    movement: Option<CovarianceModel>,
    unary_weight: f64,
}

impl AssociationModel {
    pub fn new(
        variant: ModelVariant,
        graph: EmbryoGraph,
        posture: Option<CovarianceModel>,
        movement: Option<CovarianceModel>,
        unary_weight: f64,
    ) -> Result<Self> {
        if !(unary_weight >= 0.0 && unary_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "unary weight must be nonnegative, got {unary_weight}"
            )));
        }
        if variant.needs_posture() {
            let cov = posture
                .as_ref()
                .ok_or(Error::MissingCovariance(variant.name(), "posture"))?;
            if cov.dim() != graph.edge_count() {
                return Err(Error::DimensionMismatch {
                    expected: graph.edge_count(),
                    actual: cov.dim(),
                });
            }
        }
        if variant.needs_movement() {
            let cov = movement
                .as_ref()
                .ok_or(Error::MissingCovariance(variant.name(), "movement"))?;
            if cov.dim() != 3 * graph.vertex_count() {
                return Err(Error::DimensionMismatch {
                    expected: 3 * graph.vertex_count(),
                    actual: cov.dim(),
                });
            }
        }
        Ok(Self {
            variant,
            graph,
            posture,
            movement,
            unary_weight,
        })
    }

    /// Unary-only model with no fitted parameters.
    pub fn mht(graph: EmbryoGraph) -> Self {
        Self {
            variant: ModelVariant::Mht,
            graph,
            posture: None,
            movement: None,
            unary_weight: 1.0,
        }
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn graph(&self) -> &EmbryoGraph {
        &self.graph
    }

    pub fn unary_weight(&self) -> f64 {
        self.unary_weight
    }

    pub fn posture_covariance(&self) -> Option<&CovarianceModel> {
        self.posture.as_ref()
    }

    pub fn movement_covariance(&self) -> Option<&CovarianceModel> {
        self.movement.as_ref()
    }

    /// Cost of moving from `prev` to the completed state `completed`.
    pub fn cost(&self, completed: &TrackState, prev: &TrackState, unary: f64) -> f64 {
        let weighted = self.unary_weight * unary;
        match self.variant {
            ModelVariant::Mht => unary,
            ModelVariant::Embryo => {
                let diff = self.edge_diff(completed, prev);
                diff.iter().map(|d| d * d).sum::<f64>().sqrt() + weighted
            }
            ModelVariant::Posture => self.posture_term(completed, prev) + weighted,
            ModelVariant::Movement => self.movement_term(completed, prev),
            ModelVariant::PostureMovement => {
                self.posture_term(completed, prev) + self.movement_term(completed, prev) + weighted
            }
        }
    }

    fn edge_diff(&self, completed: &TrackState, prev: &TrackState) -> Vec<f64> {
        self.graph
            .edges
            .iter()
            .map(|&(u, v)| {
                (completed.positions[u] - completed.positions[v]).norm()
                    - (prev.positions[u] - prev.positions[v]).norm()
            })
            .collect()
    }

    fn posture_term(&self, completed: &TrackState, prev: &TrackState) -> f64 {
        let cov = self.posture.as_ref().expect("validated at construction");
        cov.distance(&self.edge_diff(completed, prev))
    }

    fn movement_term(&self, completed: &TrackState, prev: &TrackState) -> f64 {
        let cov = self.movement.as_ref().expect("validated at construction");
        let diff: Vec<f64> = completed
            .positions
            .iter()
            .zip(&prev.positions)
            .flat_map(|(a, b)| {
                let d = a - b;
                [d.x, d.y, d.z]
            })
            .collect();
        cov.distance(&diff)
    }
}

/// Model cost of a hypothesis relative to the previous state.
pub fn evaluate_hypothesis(
    model: &AssociationModel,
    hypothesis: &Hypothesis,
    prev: &TrackState,
    unary: f64,
) -> Result<f64> {
    let n = model.graph.vertex_count();
    for len in [hypothesis.completed_state.len(), prev.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    Ok(model.cost(&hypothesis.completed_state, prev, unary))
}

/// Portable JSON container for a covariance model.
///
/// Matrices are stored row-major; `dim` gives the side length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceFile {
    pub format: String,
    pub version: u32,
    pub kind: CovarianceKind,
    pub dim: usize,
    pub ridge: f64,
    pub mean_diff: Vec<f64>,
    pub covariance: Vec<f64>,
    pub precision: Vec<f64>,
}

pub const COVARIANCE_FORMAT: &str = "mhht-covariance";
pub const COVARIANCE_VERSION: u32 = 1;

impl From<&CovarianceModel> for CovarianceFile {
    fn from(m: &CovarianceModel) -> Self {
        let row_major = |a: &DMatrix<f64>| a.transpose().as_slice().to_vec();
        Self {
            format: COVARIANCE_FORMAT.into(),
            version: COVARIANCE_VERSION,
            kind: m.kind,
            dim: m.dim(),
            ridge: m.ridge,
            mean_diff: m.mean_diff.as_slice().to_vec(),
            covariance: row_major(&m.covariance),
            precision: row_major(&m.precision),
        }
    }
}

impl TryFrom<CovarianceFile> for CovarianceModel {
    type Error = Error;

    fn try_from(f: CovarianceFile) -> Result<Self> {
        if f.format != COVARIANCE_FORMAT {
            return Err(Error::Format(format!(
                "expected format '{COVARIANCE_FORMAT}', found '{}'",
                f.format
            )));
        }
        if f.version != COVARIANCE_VERSION {
            return Err(Error::Format(format!(
                "unsupported covariance version {}",
                f.version
            )));
        }
        let dim = f.dim;
        for (name, len) in [
            ("mean_diff", f.mean_diff.len()),
            ("covariance", f.covariance.len() / dim.max(1)),
            ("precision", f.precision.len() / dim.max(1)),
        ] {
            if len != dim {
                return Err(Error::Format(format!("{name} does not match dim {dim}")));
            }
        }
        if f.covariance.len() != dim * dim || f.precision.len() != dim * dim {
            return Err(Error::Format(format!("matrix payload does not match dim {dim}")));
        }
        Ok(Self {
            kind: f.kind,
            mean_diff: DVector::from_vec(f.mean_diff),
            covariance: DMatrix::from_row_slice(dim, dim, &f.covariance),
            precision: DMatrix::from_row_slice(dim, dim, &f.precision),
            ridge: f.ridge,
        })
    }
}

impl CovarianceModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&CovarianceFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<CovarianceFile>(text)?.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Assignment, Vec3};

    fn state(points: &[[f64; 3]]) -> TrackState {
        TrackState::new(0, points.iter().map(|p| Vec3::from(*p)).collect()).unwrap()
    }

    fn hyp(completed: TrackState) -> Hypothesis {
        Hypothesis {
            assignment: Assignment::all_gated(completed.len()),
            completed_state: completed,
            unary_cost: 0.0,
            model_cost: 0.0,
            cumulative_cost: 0.0,
        }
    }

    fn unit_square() -> TrackState {
        // pair 0 = (0, 1), pair 1 = (2, 3), lateral spacing 1, pair spacing 1
        state(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ])
    }

    #[test]
    fn single_edge_length() {
        let g = EmbryoGraph::new(vec!["a".into(), "b".into()], vec![(0, 1)], vec![]).unwrap();
        let f = edge_features(&state(&[[0.0; 3], [1.0, 0.0, 0.0]]), &g);
        assert_eq!(f.values, vec![1.0]);
    }

    #[test]
    fn unit_square_edge_lengths() {
        let g = EmbryoGraph::canonical(2).unwrap();
        let mut f = edge_features(&unit_square(), &g).values;
        f.sort_by(f64::total_cmp);
        let r2 = 2f64.sqrt();
        assert_eq!(f, vec![1.0, 1.0, 1.0, 1.0, r2, r2]);
    }

    #[test]
    fn translation_leaves_edge_features_unchanged() {
        let g = EmbryoGraph::canonical(2).unwrap();
        let s = unit_square();
        let moved = s.translated(&Vec3::new(5.0, -3.0, 2.0));
        let a = edge_features(&s, &g).values;
        let b = edge_features(&moved, &g).values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_needs_three_frames() {
        let seq = vec![FeatureVector::new(vec![0.0]); 2];
        assert!(matches!(
            fit_covariance(&seq, CovarianceKind::Posture, &FitOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_sequence_gives_ridge_only() {
        let seq = vec![FeatureVector::new(vec![2.0, 3.0]); 6];
        let m = fit_covariance(&seq, CovarianceKind::Posture, &FitOptions::default()).unwrap();
        assert_eq!(m.mean_diff, DVector::zeros(2));
        assert_eq!(m.covariance, DMatrix::identity(2, 2) * MIN_RIDGE);
    }

    #[test]
    fn alternating_sequence_variance() {
        // diffs [1, -1, 1, -1]: mean 0, Σ(Δ²) = 4, denominator T - 2 = 3
        let seq: Vec<FeatureVector> = [0.0, 1.0, 0.0, 1.0, 0.0]
            .iter()
            .map(|&v| FeatureVector::new(vec![v]))
            .collect();
        let opts = FitOptions {
            ridge: Some(0.0),
            ..FitOptions::default()
        };
        let m = fit_covariance(&seq, CovarianceKind::Posture, &opts).unwrap();
        assert_eq!(m.mean_diff[0], 0.0);
        assert!((m.covariance[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_precision_example() {
        let m = CovarianceModel::from_covariance(
            CovarianceKind::Posture,
            DVector::zeros(2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        )
        .unwrap();
        let c = mahalanobis_cost(
            &FeatureVector::new(vec![1.0, 1.0]),
            &FeatureVector::new(vec![0.0, 0.0]),
            &m,
        )
        .unwrap();
        assert!((c - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_precision_is_euclidean() {
        let m = CovarianceModel::from_covariance(
            CovarianceKind::Posture,
            DVector::zeros(3),
            DMatrix::identity(3, 3),
        )
        .unwrap();
        let a = FeatureVector::new(vec![1.0, 2.0, 2.0]);
        let z = FeatureVector::new(vec![0.0; 3]);
        assert_eq!(mahalanobis_cost(&a, &z, &m).unwrap(), 3.0);
        assert_eq!(mahalanobis_cost(&a, &a, &m).unwrap(), 0.0);
        assert!(mahalanobis_cost(&FeatureVector::new(vec![1.0]), &z, &m).is_err());
    }

    #[test]
    fn data_driven_variants_need_covariances() {
        let g = EmbryoGraph::canonical(2).unwrap();
        for v in [
            ModelVariant::Posture,
            ModelVariant::Movement,
            ModelVariant::PostureMovement,
        ] {
            assert!(matches!(
                AssociationModel::new(v, g.clone(), None, None, 1.0),
                Err(Error::MissingCovariance(..))
            ));
        }
        assert!(AssociationModel::new(ModelVariant::Embryo, g, None, None, 1.0).is_ok());
    }

    #[test]
    fn unchanged_state_costs_nothing_without_unary() {
        let g = EmbryoGraph::canonical(2).unwrap();
        let post = CovarianceModel::from_covariance(
            CovarianceKind::Posture,
            DVector::zeros(6),
            DMatrix::identity(6, 6) * 0.3,
        )
        .unwrap();
        let mov = CovarianceModel::from_covariance(
            CovarianceKind::Movement,
            DVector::zeros(12),
            DMatrix::identity(12, 12) * 2.0,
        )
        .unwrap();
        let s = unit_square();
        for v in [
            ModelVariant::Embryo,
            ModelVariant::Posture,
            ModelVariant::Movement,
            ModelVariant::PostureMovement,
        ] {
            let m =
                AssociationModel::new(v, g.clone(), Some(post.clone()), Some(mov.clone()), 0.0)
                    .unwrap();
            assert_eq!(evaluate_hypothesis(&m, &hyp(s.clone()), &s, 3.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ModelVariant::ALL {
            assert_eq!(v.name().parse::<ModelVariant>().unwrap(), v);
        }
        assert!("gnn".parse::<ModelVariant>().is_err());
    }
}
