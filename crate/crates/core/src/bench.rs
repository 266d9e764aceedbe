//! Benchmark grids over models, gates and simulated sequences.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{
    fit_movement_covariance, fit_posture_covariance, AssociationModel, CovarianceModel,
    FitOptions, ModelVariant,
};
use crate::error::{Error, Result};
use crate::evaluation::{report_rows, score_run, ReportRow, DEFAULT_THRESHOLD};
use crate::model::{EmbryoGraph, GateConfig};
use crate::search::{track_sequence, CorrectionOracle, Regime, SearchConfig};
use crate::simulator::{generate, movement_quantiles, SimConfig, SimOutput};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "MHHT_WORKERS";

pub const DEFAULT_GATES: [f64; 5] = [2.5, 5.0, 7.5, 10.0, 12.5];

/// A tracker configuration: model name plus K and N.
///
/// `gnn` is the MHT model with K = N = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: String,
    #[serde(default = "one")]
    pub k: usize,
    #[serde(default = "one")]
    pub n: usize,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn new(model: &str, k: usize, n: usize) -> Result<Self> {
        let spec = Self {
            model: model.to_string(),
            k,
            n,
        };
        spec.variant()?;
        Ok(spec)
    }

    pub fn variant(&self) -> Result<ModelVariant> {
        if self.model == "gnn" {
            if self.k != 1 || self.n != 1 {
                return Err(Error::InvalidConfig("gnn is fixed at K = N = 1".into()));
            }
            return Ok(ModelVariant::Mht);
        }
        self.model.parse()
    }

    pub fn search_config(
        &self,
        graph: &EmbryoGraph,
        fitted: &Fitted,
        gate: f64,
        regime: Regime,
        unary_weight: f64,
    ) -> Result<SearchConfig> {
        let model = AssociationModel::new(
            self.variant()?,
            graph.clone(),
            fitted.posture.clone(),
            fitted.movement.clone(),
            unary_weight,
        )?;
        let cfg = SearchConfig::new(model, GateConfig::Uniform(gate))
            .with_kn(self.k, self.n)
            .with_regime(regime);
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.model, self.k, self.n)
    }
}

/// Parses `model`, `model:K` or `model:K:N`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let model = parts.next().unwrap_or_default();
        let mut num = |what: &str| -> Result<usize> {
            match parts.next() {
                None => Ok(1),
                Some(p) => p
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad {what} in model spec '{s}'"))),
            }
        };
        let k = num("K")?;
        let n = num("N")?;
        if parts.next().is_some() {
            return Err(Error::InvalidConfig(format!("too many fields in model spec '{s}'")));
        }
        Self::new(model, k, n)
    }
}

/// Covariances shared by every cell of a grid.
#[derive(Debug, Clone, Default)]
pub struct Fitted {
    pub posture: Option<CovarianceModel>,
    pub movement: Option<CovarianceModel>,
}

impl Fitted {
    pub fn fit(states: &[crate::model::TrackState], graph: &EmbryoGraph) -> Result<Self> {
        let options = FitOptions::default();
        Ok(Self {
            posture: Some(fit_posture_covariance(states, graph, &options)?),
            movement: Some(fit_movement_covariance(states, &options)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub sim: SimConfig,
    pub seeds: Vec<u64>,
    /// Seed of the sequence whose ground truth the covariances are fitted on.
    pub training_seed: u64,
    pub training_frames: usize,
    pub models: Vec<ModelSpec>,
    pub gates: Vec<f64>,
    pub regime: Regime,
    pub unary_weight: f64,
    pub threshold: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
            training_seed: 1000,
            training_frames: 2000,
            models: vec![
                ModelSpec::new("gnn", 1, 1).expect("valid"),
                ModelSpec::new("pm", 5, 5).expect("valid"),
            ],
            gates: DEFAULT_GATES.to_vec(),
            regime: Regime::ExplicitTree,
            unary_weight: 1.0,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() || self.models.is_empty() || self.gates.is_empty() {
            return Err(Error::InvalidConfig(
                "seeds, models and gates must all be non-empty".into(),
            ));
        }
        for m in &self.models {
            m.variant()?;
        }
        if let Some(g) = self.gates.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::InvalidConfig(format!("gate must be positive, got {g}")));
        }
        Ok(())
    }

    pub fn training(&self) -> SimConfig {
        SimConfig {
            seed: self.training_seed,
            frame_count: self.training_frames,
            ..self.sim.clone()
        }
    }

    pub fn cell_count(&self) -> usize {
        self.seeds.len() * self.models.len() * self.gates.len()
    }
}

/// Worker count from `MHHT_WORKERS`, else the available parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::InvalidConfig(format!(
                "{WORKERS_ENV} must be a positive integer, got '{v}'"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Tracks one simulated sequence with corrections and scores it.
pub fn run_cell(
    sim: &SimOutput,
    cfg: &SearchConfig,
    threshold: f64,
) -> Result<crate::evaluation::EvalReport> {
    let annotations = &sim.ground_truth[1..];
    let history = track_sequence(
        &sim.ground_truth[0],
        &sim.detections[1..],
        cfg,
        Some(CorrectionOracle {
            annotations,
            threshold,
        }),
    )?;
    let strata = movement_quantiles(&sim.ground_truth)?;
    score_run(&history, annotations, Some(&strata), threshold)
}

/// Runs every (seed, model, gate) cell on `workers` threads. Rows come back
/// in grid order regardless of the worker count.
pub fn run_grid(cfg: &BenchConfig, workers: usize) -> Result<Vec<ReportRow>> {
    cfg.validate()?;
    let graph = EmbryoGraph::canonical(cfg.sim.pair_count)?;
    let needs_fit = cfg
        .models
        .iter()
        .any(|m| !matches!(m.variant(), Ok(ModelVariant::Mht | ModelVariant::Embryo)));
    let fitted = if needs_fit {
        Fitted::fit(&generate(&cfg.training())?.ground_truth, &graph)?
    } else {
        Fitted::default()
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        let sims = cfg
            .seeds
            .par_iter()
            .map(|&seed| generate(&SimConfig { seed, ..cfg.sim.clone() }))
            .collect::<Result<Vec<_>>>()?;
        let cells: Vec<(usize, &ModelSpec, f64)> = (0..cfg.seeds.len())
            .flat_map(|s| {
                cfg.models
                    .iter()
                    .flat_map(move |m| cfg.gates.iter().map(move |&g| (s, m, g)))
            })
            .collect();
        let rows = cells
            .par_iter()
            .map(|&(s, spec, gate)| {
                let search =
                    spec.search_config(&graph, &fitted, gate, cfg.regime, cfg.unary_weight)?;
                let report = run_cell(&sims[s], &search, cfg.threshold)?;
                Ok(report_rows(
                    &report,
                    &spec.model,
                    spec.k,
                    spec.n,
                    gate,
                    &cfg.regime.to_string(),
                    cfg.seeds[s],
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(rows.into_iter().flatten().collect())
    })
}
