//! Reconstruction of call trees from a flat event stream.
//!
//! Frames and match nodes live in arenas indexed by [`FrameId`] and
//! [`MatchId`]; frame ids are assigned in call order, which is pre-order.

use serde::Serialize;
use thiserror::Error;

use crate::schema::{FnId, Schema, SiteId};
use crate::value::EncodedValue;
use crate::wire::{EventKind, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct FrameId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct MatchId(pub u32);

impl FrameId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Frame(FrameId),
    Match(MatchId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Returned,
    Raised,
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub id: FrameId,
    pub fn_id: FnId,
    pub parent: Option<FrameId>,
    /// Nesting level, 0 for top-level frames.
    pub depth: usize,
    pub children: Vec<Child>,
    pub outcome: Outcome,
    pub begin_event: usize,
    /// Index of the closing event; `None` iff truncated.
    pub end_event: Option<usize>,
    pub begin_ts: u64,
    pub end_ts: Option<u64>,
}

impl Frame {
    pub fn child_frames(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.children.iter().filter_map(|c| match c {
            Child::Frame(f) => Some(*f),
            Child::Match(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchNode {
    pub id: MatchId,
    pub site_id: SiteId,
    pub frame: FrameId,
    pub event_idx: usize,
    pub ts: u64,
}

/// What an event index stands for in the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventOwner {
    Open(FrameId),
    Close(FrameId),
    Match(MatchId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("event {event_idx} closes a frame but none is open")]
    OrphanClose { event_idx: usize },
    #[error("event {event_idx} is a match outside any frame")]
    OrphanMatch { event_idx: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("no function named {0:?} in the schema")]
    UnknownFunctionName(String),
    #[error("no frame with id {0}")]
    UnknownFrame(u32),
}

#[derive(Debug, Clone)]
pub struct CallForest {
    events: Vec<TraceEvent>,
    frames: Vec<Frame>,
    matches: Vec<MatchNode>,
    roots: Vec<FrameId>,
    owners: Vec<EventOwner>,
    truncated: usize,
}

impl CallForest {
    /// Builds the forest with a stack machine. Frames still open at the end
    /// of the stream are marked truncated and keep their children.
    pub fn build(events: Vec<TraceEvent>) -> Result<CallForest, BuildError> {
        let mut frames: Vec<Frame> = Vec::new();
        let mut matches = Vec::new();
        let mut roots = Vec::new();
        let mut owners = Vec::with_capacity(events.len());
        let mut stack: Vec<FrameId> = Vec::new();

        for (idx, event) in events.iter().enumerate() {
            match &event.kind {
                EventKind::Call { fn_id, .. } => {
                    let id = FrameId(frames.len() as u32);
                    let parent = stack.last().copied();
                    match parent {
                        Some(p) => frames[p.index()].children.push(Child::Frame(id)),
                        None => roots.push(id),
                    }
                    frames.push(Frame {
                        id,
                        fn_id: *fn_id,
                        parent,
                        depth: stack.len(),
                        children: Vec::new(),
                        outcome: Outcome::Truncated,
                        begin_event: idx,
                        end_event: None,
                        begin_ts: event.ts,
                        end_ts: None,
                    });
                    stack.push(id);
                    owners.push(EventOwner::Open(id));
                }
                EventKind::Return { .. } | EventKind::Raise { .. } => {
                    let id = stack.pop().ok_or(BuildError::OrphanClose { event_idx: idx })?;
                    let frame = &mut frames[id.index()];
                    frame.outcome = if matches!(event.kind, EventKind::Raise { .. }) {
                        Outcome::Raised
                    } else {
                        Outcome::Returned
                    };
                    frame.end_event = Some(idx);
                    frame.end_ts = Some(event.ts);
                    owners.push(EventOwner::Close(id));
                }
                EventKind::Match { site_id, .. } => {
                    let frame = *stack.last().ok_or(BuildError::OrphanMatch { event_idx: idx })?;
                    let id = MatchId(matches.len() as u32);
                    matches.push(MatchNode {
                        id,
                        site_id: *site_id,
                        frame,
                        event_idx: idx,
                        ts: event.ts,
                    });
                    frames[frame.index()].children.push(Child::Match(id));
                    owners.push(EventOwner::Match(id));
                }
            }
        }

        Ok(CallForest {
            truncated: stack.len(),
            events,
            frames,
            matches,
            roots,
            owners,
        })
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    /// Number of events, i.e. the largest cursor position.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, id: FrameId) -> Option<&Frame> {
        self.frames.get(id.index())
    }

    pub fn matches(&self) -> &[MatchNode] {
        &self.matches
    }

    pub fn match_node(&self, id: MatchId) -> &MatchNode {
        &self.matches[id.0 as usize]
    }

    pub fn roots(&self) -> &[FrameId] {
        &self.roots
    }

    pub fn owner(&self, event_idx: usize) -> Option<EventOwner> {
        self.owners.get(event_idx).copied()
    }

    /// Frames left open at end of stream.
    pub fn truncated_count(&self) -> usize {
        self.truncated
    }

    /// Closing event index, with truncated frames treated as ending at the
    /// stream length.
    pub fn end_or_len(&self, frame: &Frame) -> usize {
        frame.end_event.unwrap_or(self.events.len())
    }

    pub fn args(&self, frame: &Frame) -> &[EncodedValue] {
        match &self.events[frame.begin_event].kind {
            EventKind::Call { args, .. } => args,
            _ => unreachable!("frames begin at call events"),
        }
    }

    /// Returned value or raised exception; `None` for truncated frames.
    pub fn outcome_value(&self, frame: &Frame) -> Option<&EncodedValue> {
        frame.end_event.map(|i| match &self.events[i].kind {
            EventKind::Return { value } => value,
            EventKind::Raise { exn } => exn,
            _ => unreachable!("frames end at close events"),
        })
    }

    pub fn discriminee(&self, node: &MatchNode) -> &EncodedValue {
        match &self.events[node.event_idx].kind {
            EventKind::Match { discriminee, .. } => discriminee,
            _ => unreachable!("match nodes point at match events"),
        }
    }

    /// Ancestors of `id` from the outermost frame down to `id` itself.
    pub fn frame_path(&self, id: FrameId) -> Result<Vec<&Frame>, QueryError> {
        let mut cur = self.frame(id).ok_or(QueryError::UnknownFrame(id.0))?;
        let mut path = vec![cur];
        while let Some(p) = cur.parent {
            cur = &self.frames[p.index()];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Frames of `fn_id` in pre-order.
    pub fn calls_of(&self, fn_id: FnId) -> Vec<&Frame> {
        self.frames.iter().filter(|f| f.fn_id == fn_id).collect()
    }

    /// All calls of the function registered as `name`.
    pub fn find_calls(&self, schema: &Schema, name: &str) -> Result<Vec<&Frame>, QueryError> {
        let info = schema
            .function_by_name(name)
            .ok_or_else(|| QueryError::UnknownFunctionName(name.to_string()))?;
        Ok(self.calls_of(info.fn_id))
    }

    /// In-order walk of the tree, yielding the event index of every frame
    /// boundary and match node.
    pub fn flatten_indices(&self) -> Vec<usize> {
        enum Step {
            Enter(FrameId),
            Leave(FrameId),
            Match(MatchId),
        }
        let mut out = Vec::with_capacity(self.events.len());
        let mut work: Vec<Step> = self.roots.iter().rev().map(|r| Step::Enter(*r)).collect();
        while let Some(step) = work.pop() {
            match step {
                Step::Enter(id) => {
                    let frame = &self.frames[id.index()];
                    out.push(frame.begin_event);
                    work.push(Step::Leave(id));
                    for child in frame.children.iter().rev() {
                        work.push(match child {
                            Child::Frame(f) => Step::Enter(*f),
                            Child::Match(m) => Step::Match(*m),
                        });
                    }
                }
                Step::Leave(id) => out.extend(self.frames[id.index()].end_event),
                Step::Match(m) => out.push(self.match_node(m).event_idx),
            }
        }
        out
    }

    /// Regenerates the event stream from the tree.
    pub fn flatten(&self) -> Vec<TraceEvent> {
        self.flatten_indices()
            .into_iter()
            .map(|i| self.events[i].clone())
            .collect()
    }
}
