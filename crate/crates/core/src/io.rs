//! File formats.
//!
//! A sequence archive is JSON lines. The first line is the manifest:
//!
//! ```text
//! {"format":"mhht-archive","version":1,"object_count":20,"pair_count":10,
//!  "frame_count":200,"units":"um","seed":7,"provenance":"simulate","graph":null}
//! ```
//!
//! Every following line is one record tagged by `kind`:
//!
//! * `{"kind":"detections","frame":t,"points":[[x,y,z],...]}`, exactly one per
//!   frame `0..frame_count`;
//! * `{"kind":"annotation","frame":t,"positions":[[x,y,z],...]}`, either one
//!   per frame or none at all, positions in object order;
//! * `{"kind":"initial","frame":t,"positions":[...]}`, optional start state
//!   used when there are no annotations.
//!
//! Records may come in any order. Track histories are plain JSON documents.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DetectionSet, EmbryoGraph, TrackState, Vec3};
use crate::search::{track_sequence, CorrectionOracle, SearchConfig, TrackHistory};
use crate::simulator::{SimConfig, SimOutput};

pub const ARCHIVE_FORMAT: &str = "mhht-archive";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub object_count: usize,
    pub pair_count: usize,
    pub frame_count: usize,
    pub units: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub provenance: Option<String>,
    /// Replaces the canonical graph when present.
    #[serde(default)]
    pub graph: Option<EmbryoGraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Detections { frame: usize, points: Vec<Vec3> },
    Annotation { frame: usize, positions: Vec<Vec3> },
    Initial { frame: usize, positions: Vec<Vec3> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceArchive {
    pub manifest: Manifest,
    pub detections: Vec<DetectionSet>,
    pub annotations: Option<Vec<TrackState>>,
    pub initial: Option<TrackState>,
}

impl SequenceArchive {
    pub fn new(
        pair_count: usize,
        detections: Vec<DetectionSet>,
        annotations: Option<Vec<TrackState>>,
    ) -> Result<Self> {
        let archive = Self {
            manifest: Manifest {
                format: ARCHIVE_FORMAT.into(),
                version: ARCHIVE_VERSION,
                object_count: 2 * pair_count,
                pair_count,
                frame_count: detections.len(),
                units: "um".into(),
                seed: None,
                provenance: None,
                graph: None,
            },
            detections,
            annotations,
            initial: None,
        };
        archive.validate()?;
        Ok(archive)
    }

    /// Archive of a simulated sequence with its ground truth as annotations.
    pub fn from_simulation(cfg: &SimConfig, sim: &SimOutput) -> Result<Self> {
        let mut a = Self::new(
            cfg.pair_count,
            sim.detections.clone(),
            Some(sim.ground_truth.clone()),
        )?;
        a.manifest.seed = Some(cfg.seed);
        a.manifest.provenance = Some("simulate".into());
        Ok(a)
    }

    pub fn frame_count(&self) -> usize {
        self.detections.len()
    }

    pub fn graph(&self) -> Result<EmbryoGraph> {
        match &self.manifest.graph {
            Some(g) => Ok(g.clone()),
            None => EmbryoGraph::canonical(self.manifest.pair_count),
        }
    }

    /// State tracking starts from: the explicit initial record, else the
    /// first annotation.
    pub fn initial_state(&self) -> Result<TrackState> {
        self.initial
            .clone()
            .or_else(|| self.annotations.as_ref().map(|a| a[0].clone()))
            .ok_or_else(|| Error::InvalidInput("archive has no initial state or annotations".into()))
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.manifest;
        if m.format != ARCHIVE_FORMAT {
            return Err(Error::Format(format!("unknown archive format '{}'", m.format)));
        }
        if m.version != ARCHIVE_VERSION {
            return Err(Error::Format(format!("unsupported archive version {}", m.version)));
        }
        if m.object_count != 2 * m.pair_count && m.graph.is_none() {
            return Err(Error::Format(format!(
                "object_count {} does not match pair_count {}",
                m.object_count, m.pair_count
            )));
        }
        if let Some(g) = &m.graph {
            if g.vertex_count() != m.object_count {
                return Err(Error::DimensionMismatch {
                    expected: m.object_count,
                    actual: g.vertex_count(),
                });
            }
        }
        if self.detections.len() != m.frame_count {
            return Err(Error::Format(format!(
                "manifest declares {} frames, found {}",
                m.frame_count,
                self.detections.len()
            )));
        }
        for (t, d) in self.detections.iter().enumerate() {
            if d.frame_index != t {
                return Err(Error::Format(format!("detections out of order at frame {t}")));
            }
        }
        let states = self
            .annotations
            .iter()
            .flatten()
            .chain(self.initial.iter());
        for s in states {
            if s.len() != m.object_count {
                return Err(Error::DimensionMismatch {
                    expected: m.object_count,
                    actual: s.len(),
                });
            }
        }
        if let Some(a) = &self.annotations {
            if a.len() != m.frame_count {
                return Err(Error::Format(format!(
                    "{} annotation frames for {} detection frames",
                    a.len(),
                    m.frame_count
                )));
            }
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        self.validate()?;
        let mut w = BufWriter::new(out);
        serde_json::to_writer(&mut w, &self.manifest)?;
        w.write_all(b"\n")?;
        if let Some(s) = &self.initial {
            serde_json::to_writer(
                &mut w,
                &Record::Initial {
                    frame: s.frame_index,
                    positions: s.positions.clone(),
                },
            )?;
            w.write_all(b"\n")?;
        }
        for (t, d) in self.detections.iter().enumerate() {
            serde_json::to_writer(
                &mut w,
                &Record::Detections {
                    frame: t,
                    points: d.points.clone(),
                },
            )?;
            w.write_all(b"\n")?;
            if let Some(a) = &self.annotations {
                serde_json::to_writer(
                    &mut w,
                    &Record::Annotation {
                        frame: t,
                        positions: a[t].positions.clone(),
                    },
                )?;
                w.write_all(b"\n")?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input).lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty archive".into()))??;
        let manifest: Manifest = serde_json::from_str(&first)?;
        let frames = manifest.frame_count;
        let mut detections: Vec<Option<DetectionSet>> = vec![None; frames];
        let mut annotations: Vec<Option<TrackState>> = vec![None; frames];
        let mut initial = None;
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("record {}: {e}", i + 1)))?;
            let check = |frame: usize| {
                if frame < frames {
                    Ok(frame)
                } else {
                    Err(Error::Format(format!(
                        "record {} refers to frame {frame} of {frames}",
                        i + 1
                    )))
                }
            };
            match record {
                Record::Detections { frame, points } => {
                    let slot = &mut detections[check(frame)?];
                    if slot.is_some() {
                        return Err(Error::Format(format!("duplicate detections for frame {frame}")));
                    }
                    *slot = Some(DetectionSet::new(frame, points)?);
                }
                Record::Annotation { frame, positions } => {
                    let slot = &mut annotations[check(frame)?];
                    if slot.is_some() {
                        return Err(Error::Format(format!("duplicate annotation for frame {frame}")));
                    }
                    *slot = Some(TrackState::new(frame, positions)?);
                }
                Record::Initial { frame, positions } => {
                    initial = Some(TrackState::new(frame, positions)?);
                }
            }
        }
        let detections = detections
            .into_iter()
            .enumerate()
            .map(|(t, d)| d.ok_or_else(|| Error::Format(format!("no detections for frame {t}"))))
            .collect::<Result<Vec<_>>>()?;
        let annotated = annotations.iter().filter(|a| a.is_some()).count();
        let annotations = match annotated {
            0 => None,
            n if n == frames => Some(annotations.into_iter().flatten().collect()),
            n => {
                return Err(Error::Format(format!(
                    "annotations cover {n} of {frames} frames"
                )))
            }
        };
        let archive = Self {
            manifest,
            detections,
            annotations,
            initial,
        };
        archive.validate()?;
        Ok(archive)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write(File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(File::open(path)?)
    }

    /// Tracks frames `1..` from the initial state, optionally testing and
    /// resetting against the annotations.
    pub fn track(&self, cfg: &SearchConfig, corrections: Option<f64>) -> Result<TrackHistory> {
        if self.frame_count() < 2 {
            return Err(Error::InsufficientData(
                "tracking needs at least 2 frames".into(),
            ));
        }
        let initial = self.initial_state()?;
        let start = initial.frame_index + 1;
        if start >= self.frame_count() {
            return Err(Error::InvalidInput(format!(
                "initial state at frame {} leaves nothing to track",
                initial.frame_index
            )));
        }
        let oracle = match corrections {
            None => None,
            Some(threshold) => {
                let a = self.annotations.as_ref().ok_or_else(|| {
                    Error::InvalidInput("corrections need an annotated archive".into())
                })?;
                Some(CorrectionOracle {
                    annotations: &a[start..],
                    threshold,
                })
            }
        };
        track_sequence(&initial, &self.detections[start..], cfg, oracle)
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
