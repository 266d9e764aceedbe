//! Interactive review session.
//!
//! The session proposes one frame at a time. The reviewer either accepts the
//! proposal or replaces it with corrected positions, and may seek back to any
//! earlier frame, which discards the history from that frame on. Accepting
//! every proposal gives exactly the history of an uncorrected headless run.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::frame_check;
use crate::model::{Assignment, DetectionSet, EmbryoGraph, TrackState, Vec3};
use crate::search::{track_frame, FrameRecord, SearchConfig, StepOutcome, TrackHistory};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternativeView {
    pub rank: usize,
    pub assignment: Assignment,
    pub positions: Vec<Vec3>,
    pub unary_cost: f64,
    pub model_cost: f64,
    pub best_path_cost: Option<f64>,
}

/// What the reviewer sees for the current frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewState {
    pub frame: usize,
    pub first_frame: usize,
    pub last_frame: usize,
    pub finished: bool,
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    /// Committed positions of the previous frame.
    pub previous: Vec<Vec3>,
    pub proposal: Option<TrackState>,
    pub alternatives: Vec<AlternativeView>,
    pub detections: Vec<Vec3>,
}

pub struct ReviewSession {
    graph: EmbryoGraph,
    cfg: SearchConfig,
    /// Frames to review; the initial state precedes the first of them.
    detections: Vec<DetectionSet>,
    history: TrackHistory,
    pending: Option<(FrameRecord, StepOutcome)>,
    /// Alternatives shown per frame.
    shown: usize,
}

impl ReviewSession {
    pub fn new(
        initial: TrackState,
        detections: Vec<DetectionSet>,
        graph: EmbryoGraph,
        cfg: SearchConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if detections.is_empty() {
            return Err(Error::InvalidInput("no detection frames to review".into()));
        }
        if initial.len() != graph.vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.vertex_count(),
                actual: initial.len(),
            });
        }
        let shown = cfg.k.max(1);
        let mut s = Self {
            graph,
            cfg,
            detections,
            history: TrackHistory::new(initial),
            pending: None,
            shown,
        };
        s.propose()?;
        Ok(s)
    }

    pub fn object_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn first_frame(&self) -> usize {
        self.detections[0].frame_index
    }

    pub fn last_frame(&self) -> usize {
        self.detections[self.detections.len() - 1].frame_index
    }

    pub fn finished(&self) -> bool {
        self.history.len() == self.detections.len()
    }

    pub fn history(&self) -> &TrackHistory {
        &self.history
    }

    fn previous(&self) -> &TrackState {
        self.history
            .frames
            .last()
            .map(FrameRecord::committed)
            .or(self.history.initial.as_ref())
            .expect("session history always has an initial state")
    }

    fn propose(&mut self) -> Result<()> {
        let cursor = self.history.len();
        self.pending = if cursor < self.detections.len() {
            Some(track_frame(
                self.previous(),
                &self.detections[cursor..],
                &self.cfg,
                None,
            )?)
        } else {
            None
        };
        Ok(())
    }

    pub fn state(&self) -> ReviewState {
        let cursor = self.history.len();
        let frame = self
            .detections
            .get(cursor)
            .map_or(self.last_frame() + 1, |d| d.frame_index);
        let (proposal, alternatives) = match &self.pending {
            None => (None, Vec::new()),
            Some((record, outcome)) => (
                Some(record.proposal.clone()),
                outcome
                    .alternatives
                    .iter()
                    .take(self.shown)
                    .enumerate()
                    .map(|(rank, a)| AlternativeView {
                        rank,
                        assignment: a.assignment.clone(),
                        positions: a.state.positions.clone(),
                        unary_cost: a.unary_cost,
                        model_cost: a.model_cost,
                        best_path_cost: a.best_path_cost,
                    })
                    .collect(),
            ),
        };
        ReviewState {
            frame,
            first_frame: self.first_frame(),
            last_frame: self.last_frame(),
            finished: self.finished(),
            labels: self.graph.vertex_labels.clone(),
            edges: self.graph.edges.clone(),
            previous: self.previous().positions.clone(),
            proposal,
            alternatives,
            detections: self
                .detections
                .get(cursor)
                .map(|d| d.points.clone())
                .unwrap_or_default(),
        }
    }

    /// Commits the proposal and moves to the next frame.
    pub fn accept(&mut self) -> Result<&FrameRecord> {
        let (record, _) = self.pending.take().ok_or(Error::Finished)?;
        self.history.frames.push(record);
        self.propose()?;
        Ok(self.history.frames.last().expect("just pushed"))
    }

    /// Commits the reviewer's positions in place of the proposal. The frame is
    /// logged as an error event measured against the corrected positions.
    pub fn correct(&mut self, positions: Vec<Vec3>, threshold: f64) -> Result<&FrameRecord> {
        if self.pending.is_none() {
            return Err(Error::Finished);
        }
        let n = self.object_count();
        if positions.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: positions.len(),
            });
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("corrected positions must be finite".into()));
        }
        let (mut record, _) = self.pending.take().expect("checked above");
        let corrected = TrackState::new(record.frame_index, positions)?;
        let check = frame_check(&record.proposal, &corrected, threshold)?;
        record.event = Some(check.into_event(record.frame_index));
        record.corrected = Some(corrected);
        self.history.frames.push(record);
        self.propose()?;
        Ok(self.history.frames.last().expect("just pushed"))
    }

    /// Returns to `frame`, dropping every committed frame from it on.
    pub fn seek(&mut self, frame: usize) -> Result<()> {
        let first = self.first_frame();
        let reachable = first + self.history.len();
        if frame < first || frame > reachable.min(self.last_frame()) {
            return Err(Error::OutOfRange(format!(
                "frame {frame} is outside the reviewed range {first}..={}",
                reachable.min(self.last_frame())
            )));
        }
        let keep = self
            .detections
            .iter()
            .position(|d| d.frame_index == frame)
            .ok_or_else(|| Error::OutOfRange(format!("no detections for frame {frame}")))?;
        if keep == self.history.len() {
            return Ok(());
        }
        self.history.frames.truncate(keep);
        self.propose()
    }
}
