use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mhht::association::{
    fit_movement_covariance, fit_posture_covariance, CovarianceModel, FitOptions,
};
use mhht::bench::{run_grid, workers_from_env, BenchConfig, Fitted, ModelSpec};
use mhht::evaluation::{score_run, write_report_csv, EvalReport, DEFAULT_THRESHOLD};
use mhht::io::{load_json, save_json, SequenceArchive};
use mhht::model::{EmbryoGraph, TrackState};
use mhht::plot::{bar_chart, line_chart, Series};
use mhht::posture::{bend_angle_matrix, diffusion_per_object, eigen_embryos, DvSign};
use mhht::search::{Regime, SearchConfig, TrackHistory};
use mhht::simulator::{generate, movement_quantiles, SimConfig};
use serde::Serialize;

use crate::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mhht", version, about = "Multiple hypothesis hypergraph tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a sequence from a TOML config and write an archive.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit posture and movement covariances on an annotated archive.
    Fit {
        #[arg(long)]
        archive: PathBuf,
        /// Directory receiving posture.json and movement.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Absolute ridge; the default scales with the trace.
        #[arg(long)]
        ridge: Option<f64>,
    },
    /// Track an archive and write the history and, if annotated, a report.
    Track {
        #[arg(long)]
        archive: PathBuf,
        #[command(flatten)]
        tracker: TrackerArgs,
        /// Reset to the annotation on every failed frame.
        #[arg(long)]
        corrections: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a benchmark grid from a TOML config. Workers: MHHT_WORKERS.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one CSV per grid cell here.
        #[arg(long)]
        cells_dir: Option<PathBuf>,
    },
    /// Bend angles, eigen-embryos and diffusion of a tracked history.
    Analyze {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Supplies a graph override; otherwise the canonical graph is used.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Seconds between frames.
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = SignArg::RightHanded)]
        sign: SignArg,
    },
    /// Serve the interactive review API for an archive.
    Serve {
        #[arg(long)]
        archive: PathBuf,
        #[command(flatten)]
        tracker: TrackerArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SignArg {
    RightHanded,
    LeftHanded,
}

impl From<SignArg> for DvSign {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::RightHanded => DvSign::RightHanded,
            SignArg::LeftHanded => DvSign::LeftHanded,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrackerArgs {
    #[arg(long, value_parser = ["gnn", "mht", "embryo", "posture", "movement", "pm"])]
    pub model: String,
    #[arg(long = "K", default_value_t = 1)]
    pub k: usize,
    #[arg(long = "N", default_value_t = 1)]
    pub n: usize,
    /// Gate radius, µm.
    #[arg(long, default_value_t = 10.0)]
    pub gate: f64,
    #[arg(long, default_value = "explicit", value_parser = ["explicit", "kbest"])]
    pub regime: String,
    /// Weight of the unary term.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long)]
    pub posture: Option<PathBuf>,
    #[arg(long)]
    pub movement: Option<PathBuf>,
    /// Evaluation threshold, µm.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

impl TrackerArgs {
    pub fn search_config(&self, graph: &EmbryoGraph) -> CliResult<SearchConfig> {
        if self.model == "gnn" && (self.k != 1 || self.n != 1) {
            return Err(CliError::usage("--model gnn takes no --K or --N other than 1"));
        }
        let spec = ModelSpec::new(&self.model, self.k, self.n)?;
        let fitted = Fitted {
            posture: self.posture.as_deref().map(load_covariance).transpose()?,
            movement: self.movement.as_deref().map(load_covariance).transpose()?,
        };
        let regime: Regime = self.regime.parse()?;
        Ok(spec.search_config(graph, &fitted, self.gate, regime, self.lambda)?)
    }
}

fn load_covariance(path: &Path) -> CliResult<CovarianceModel> {
    let text = read_input(path)?;
    Ok(CovarianceModel::from_json(&text).with_context(|| format!("reading {}", path.display()))?)
}

/// Reads an input file; a missing file is a usage error.
fn read_input(path: &Path) -> CliResult<String> {
    if !path.exists() {
        return Err(CliError::usage(format!("{} does not exist", path.display())));
    }
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

pub fn load_archive(path: &Path) -> CliResult<SequenceArchive> {
    if !path.exists() {
        return Err(CliError::usage(format!("{} does not exist", path.display())));
    }
    Ok(SequenceArchive::load(path).with_context(|| format!("reading {}", path.display()))?)
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::Fit {
            archive,
            out_dir,
            ridge,
        } => fit(&archive, &out_dir, ridge),
        Command::Track {
            archive,
            tracker,
            corrections,
            out,
            report,
        } => track(&archive, &tracker, corrections, &out, report.as_deref()),
        Command::Bench {
            config,
            out,
            cells_dir,
        } => bench(&config, &out, cells_dir.as_deref()),
        Command::Analyze {
            history,
            out_dir,
            archive,
            dt,
            sign,
        } => analyze(&history, &out_dir, archive.as_deref(), dt, sign.into()),
        Command::Serve {
            archive,
            tracker,
            addr,
        } => crate::server::serve(&archive, &tracker, &addr),
    }
}

pub fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<()> {
    let text = read_input(config)?;
    let mut cfg: SimConfig =
        toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let sim = generate(&cfg)?;
    SequenceArchive::from_simulation(&cfg, &sim)?.save(out)?;
    eprintln!("wrote {} frames to {}", cfg.frame_count, out.display());
    Ok(())
}

pub fn fit(archive: &Path, out_dir: &Path, ridge: Option<f64>) -> CliResult<()> {
    let a = load_archive(archive)?;
    let annotations = a
        .annotations
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("fitting needs an annotated archive"))?;
    let graph = a.graph()?;
    let options = FitOptions {
        ridge,
        ..FitOptions::default()
    };
    let posture = fit_posture_covariance(annotations, &graph, &options)?;
    let movement = fit_movement_covariance(annotations, &options)?;
    create_dir(out_dir)?;
    fs::write(out_dir.join("posture.json"), posture.to_json()?)?;
    fs::write(out_dir.join("movement.json"), movement.to_json()?)?;
    eprintln!(
        "fitted covariances on {} frames into {}",
        annotations.len(),
        out_dir.display()
    );
    Ok(())
}

/// Tracks an archive; returns the history and, for annotated archives, its
/// evaluation report.
pub fn track_archive(
    a: &SequenceArchive,
    tracker: &TrackerArgs,
    corrections: bool,
) -> CliResult<(TrackHistory, Option<EvalReport>)> {
    let cfg = tracker.search_config(&a.graph()?)?;
    if corrections && a.annotations.is_none() {
        return Err(CliError::usage("--corrections needs an annotated archive"));
    }
    let history = a.track(&cfg, corrections.then_some(tracker.threshold))?;
    let report = match &a.annotations {
        None => None,
        Some(ann) => {
            let start = history.frames[0].frame_index;
            let strata = if ann.len() - (start - 1) >= 4 {
                Some(movement_quantiles(&ann[start - 1..])?)
            } else {
                None
            };
            Some(score_run(
                &history,
                &ann[start..],
                strata.as_ref(),
                tracker.threshold,
            )?)
        }
    };
    Ok((history, report))
}

pub fn track(
    archive: &Path,
    tracker: &TrackerArgs,
    corrections: bool,
    out: &Path,
    report_path: Option<&Path>,
) -> CliResult<()> {
    let a = load_archive(archive)?;
    let (history, report) = track_archive(&a, tracker, corrections)?;
    save_json(&history, out)?;
    match (&report, report_path) {
        (Some(r), Some(p)) => save_json(r, p)?,
        (None, Some(_)) => return Err(CliError::usage("--report needs an annotated archive")),
        _ => {}
    }
    match report {
        Some(r) => println!(
            "{} frames, {} errors, error rate {:.2}%",
            r.frames,
            r.events.len(),
            r.error_rate
        ),
        None => println!("{} frames tracked", history.len()),
    }
    Ok(())
}

pub fn bench(config: &Path, out: &Path, cells_dir: Option<&Path>) -> CliResult<()> {
    let text = read_input(config)?;
    let cfg: BenchConfig =
        toml::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    let workers = workers_from_env()?;
    eprintln!("running {} cells on {workers} workers", cfg.cell_count());
    let rows = run_grid(&cfg, workers)?;
    write_report_csv(&rows, fs::File::create(out)?)?;
    if let Some(dir) = cells_dir {
        create_dir(dir)?;
        for cell in rows.chunk_by(|a, b| {
            (&a.model, a.k, a.n, a.gate.to_bits(), a.seed)
                == (&b.model, b.k, b.n, b.gate.to_bits(), b.seed)
        }) {
            let r = &cell[0];
            let name = format!("{}_K{}_N{}_gate{}_seed{}.csv", r.model, r.k, r.n, r.gate, r.seed);
            write_report_csv(cell, fs::File::create(dir.join(name))?)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PcaReport {
    frames: usize,
    dimensions: usize,
    eigenvalues: Vec<f64>,
    variance_fractions: Vec<f64>,
    cumulative_fractions: Vec<f64>,
    /// Components needed for 95% of the variance.
    components_95: usize,
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
}

pub fn analyze(
    history_path: &Path,
    out_dir: &Path,
    archive: Option<&Path>,
    dt: f64,
    sign: DvSign,
) -> CliResult<()> {
    if !history_path.exists() {
        return Err(CliError::usage(format!("{} does not exist", history_path.display())));
    }
    let history: TrackHistory = load_json(history_path)?;
    let mut states: Vec<TrackState> = history.initial.iter().cloned().collect();
    states.extend(history.states());
    let Some(first) = states.first() else {
        return Err(anyhow::anyhow!("history is empty").into());
    };
    let graph = match archive {
        Some(p) => load_archive(p)?.graph()?,
        None => EmbryoGraph::canonical(first.len() / 2)?,
    };
    create_dir(out_dir)?;

    let bends = bend_angle_matrix(&states, &graph, sign)?;
    let mut w = csv_writer(&out_dir.join("bend_angles.csv"))?;
    let width = bends.first().map_or(0, Vec::len);
    let mut header = vec!["frame".to_string()];
    header.extend((0..width).map(|k| format!("angle_{k}")));
    w.write_record(&header)?;
    for (s, row) in states.iter().zip(&bends) {
        let mut rec = vec![s.frame_index.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let pca = eigen_embryos(&bends)?;
    let cumulative = pca.cumulative_fractions();
    let report = PcaReport {
        frames: bends.len(),
        dimensions: width,
        eigenvalues: pca.eigenvalues.clone(),
        variance_fractions: pca.variance_fractions.clone(),
        components_95: cumulative.iter().position(|&c| c >= 0.95).map_or(width, |i| i + 1),
        cumulative_fractions: cumulative.clone(),
        mean: pca.mean.clone(),
        components: pca.components.clone(),
    };
    save_json(&report, &out_dir.join("eigen_embryos.json"))?;

    let diffusion = diffusion_per_object(&states, dt)?;
    let mut w = csv_writer(&out_dir.join("diffusion.csv"))?;
    w.write_record(["object", "label", "coefficient", "exponent", "nonlinear", "max_lag"])?;
    for (i, d) in diffusion.iter().enumerate() {
        w.write_record([
            i.to_string(),
            graph.vertex_labels[i].clone(),
            d.coefficient.to_string(),
            d.exponent.to_string(),
            d.nonlinear.to_string(),
            d.max_lag.to_string(),
        ])?;
    }
    w.flush()?;

    let curve = Series {
        label: "cumulative",
        points: cumulative
            .iter()
            .enumerate()
            .map(|(i, &c)| ((i + 1) as f64, c))
            .collect(),
    };
    fs::write(
        out_dir.join("cumulative_variance.svg"),
        line_chart(
            "Eigen-embryo variance explained",
            "components",
            "cumulative fraction",
            &[curve],
        ),
    )?;
    let bars: Vec<(String, f64)> = diffusion
        .iter()
        .enumerate()
        .map(|(i, d)| (graph.vertex_labels[i].clone(), d.coefficient))
        .collect();
    fs::write(
        out_dir.join("diffusion.svg"),
        bar_chart("Diffusion coefficient per cell", "D (µm²/s)", &bars),
    )?;
    eprintln!("analysis of {} frames written to {}", states.len(), out_dir.display());
    Ok(())
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path)?)
}
