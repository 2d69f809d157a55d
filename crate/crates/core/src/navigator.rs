//! Time-travel stepping over a recorded trace.
//!
//! A cursor `c` in `0..=N` sits between events: the state it shows is the
//! effect of events `[0, c)`. Stepping is a pure function of the forest and
//! the cursor, so callers own the cursor and no session state is kept.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::call_tree::{CallForest, EventOwner, Frame, FrameId, Outcome};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOp {
    Next,
    Prev,
    Over,
    BackOver,
    Out,
    BackOut,
}

impl StepOp {
    pub const ALL: [StepOp; 6] = [
        StepOp::Next,
        StepOp::Prev,
        StepOp::Over,
        StepOp::BackOver,
        StepOp::Out,
        StepOp::BackOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StepOp::Next => "next",
            StepOp::Prev => "prev",
            StepOp::Over => "over",
            StepOp::BackOver => "back_over",
            StepOp::Out => "out",
            StepOp::BackOut => "back_out",
        }
    }
}

impl fmt::Display for StepOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StepOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StepOp::ALL
            .into_iter()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| format!("unknown step op {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("no enclosing frame at cursor {0}")]
    NoEnclosingFrame(usize),
    #[error("cursor {cursor} outside 0..={len}")]
    CursorOutOfRange { cursor: usize, len: usize },
}

fn check_cursor(forest: &CallForest, c: usize) -> Result<(), StepError> {
    if c > forest.len() {
        Err(StepError::CursorOutOfRange {
            cursor: c,
            len: forest.len(),
        })
    } else {
        Ok(())
    }
}

/// Innermost frame with `begin < c <= end`, truncated frames ending at N.
pub fn innermost_open(forest: &CallForest, c: usize) -> Option<&Frame> {
    let last = c.checked_sub(1)?;
    let id = match forest.owner(last)? {
        EventOwner::Open(f) => Some(f),
        EventOwner::Match(m) => Some(forest.match_node(m).frame),
        EventOwner::Close(f) => forest.frame(f)?.parent,
    }?;
    forest.frame(id)
}

/// Position just after `frame` closes, or N when it never does.
fn after(forest: &CallForest, frame: &Frame) -> usize {
    frame.end_event.map_or(forest.len(), |e| e + 1)
}

pub fn step(forest: &CallForest, c: usize, op: StepOp) -> Result<usize, StepError> {
    check_cursor(forest, c)?;
    let n = forest.len();
    Ok(match op {
        StepOp::Next => (c + 1).min(n),
        StepOp::Prev => c.saturating_sub(1),
        StepOp::Over => match forest.owner(c) {
            Some(EventOwner::Open(f)) => after(forest, &forest.frames()[f.index()]),
            _ => (c + 1).min(n),
        },
        StepOp::BackOver => match c.checked_sub(1).and_then(|i| forest.owner(i)) {
            Some(EventOwner::Close(f)) => forest.frames()[f.index()].begin_event,
            _ => c.saturating_sub(1),
        },
        StepOp::Out => {
            let f = innermost_open(forest, c).ok_or(StepError::NoEnclosingFrame(c))?;
            after(forest, f)
        }
        StepOp::BackOut => {
            innermost_open(forest, c)
                .ok_or(StepError::NoEnclosingFrame(c))?
                .begin_event
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Location {
    pub file: String,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeView {
    pub kind: Outcome,
    /// Rendered return value or exception; absent when truncated.
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClosedChildView {
    pub frame_id: FrameId,
    pub name: String,
    pub outcome: OutcomeView,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StackFrameView {
    pub frame_id: FrameId,
    pub name: String,
    pub args: Vec<String>,
    pub location: Location,
    /// Most recent child call that has already finished at this cursor.
    pub last_closed_child: Option<ClosedChildView>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct StackView {
    pub frames: Vec<StackFrameView>,
}

pub fn outcome_view(trace: &Trace, frame: &Frame) -> OutcomeView {
    OutcomeView {
        kind: frame.outcome,
        value: frame
            .end_event
            .and_then(|e| trace.rendered.value(e))
            .map(|v| v.text.clone()),
    }
}

pub fn function_location(trace: &Trace, frame: &Frame) -> Location {
    trace
        .schema
        .function(frame.fn_id)
        .map(|f| Location {
            file: f.source_file.clone(),
            line: f.line,
        })
        .unwrap_or(Location {
            file: String::new(),
            line: 0,
        })
}

/// Open frames at `c`, outermost first.
pub fn stack(trace: &Trace, c: usize) -> Result<StackView, StepError> {
    let forest = &trace.forest;
    check_cursor(forest, c)?;
    let mut frames = Vec::new();
    let mut cur = innermost_open(forest, c);
    while let Some(frame) = cur {
        let last_closed_child = frame
            .child_frames()
            .map(|id| &forest.frames()[id.index()])
            .take_while(|child| child.begin_event < c)
            .filter(|child| child.end_event.is_some_and(|e| e < c))
            .last()
            .map(|child| ClosedChildView {
                frame_id: child.id,
                name: trace.fn_name(child.fn_id).to_string(),
                outcome: outcome_view(trace, child),
            });
        frames.push(StackFrameView {
            frame_id: frame.id,
            name: trace.fn_name(frame.fn_id).to_string(),
            args: trace
                .rendered
                .call_args(frame.begin_event)
                .iter()
                .map(|a| a.text.clone())
                .collect(),
            location: function_location(trace, frame),
            last_closed_child,
        });
        cur = frame.parent.and_then(|p| forest.frame(p));
    }
    frames.reverse();
    Ok(StackView { frames })
}

/// Source location of the event about to happen at `c`; `None` at the end.
pub fn location_at(trace: &Trace, c: usize) -> Option<Location> {
    let forest = &trace.forest;
    match forest.owner(c)? {
        EventOwner::Open(f) | EventOwner::Close(f) => Some(function_location(trace, forest.frame(f)?)),
        EventOwner::Match(m) => {
            let site = trace.schema.match_site(forest.match_node(m).site_id)?;
            Some(Location {
                file: site.source_file.clone(),
                line: site.line,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FnId, SiteId};
    use crate::value::EncodedValue::Immediate as Imm;
    use crate::wire::TraceEvent;

    // 0 call f, 1 match, 2 call g, 3 ret g, 4 ret f, 5 call f (truncated)
    fn forest() -> CallForest {
        CallForest::build(vec![
            TraceEvent::call(FnId(0), vec![], 0),
            TraceEvent::matched(SiteId(0), Imm(0), 1),
            TraceEvent::call(FnId(1), vec![], 2),
            TraceEvent::ret(Imm(0), 3),
            TraceEvent::ret(Imm(0), 4),
            TraceEvent::call(FnId(0), vec![], 5),
        ])
        .unwrap()
    }

    #[test]
    fn clamped_linear_steps() {
        let f = forest();
        assert_eq!(step(&f, 0, StepOp::Next), Ok(1));
        assert_eq!(step(&f, 6, StepOp::Next), Ok(6));
        assert_eq!(step(&f, 0, StepOp::Prev), Ok(0));
        assert!(matches!(
            step(&f, 7, StepOp::Next),
            Err(StepError::CursorOutOfRange { .. })
        ));
    }

    #[test]
    fn over_and_back_over() {
        let f = forest();
        assert_eq!(step(&f, 0, StepOp::Over), Ok(5));
        assert_eq!(step(&f, 2, StepOp::Over), Ok(4));
        assert_eq!(step(&f, 1, StepOp::Over), Ok(2));
        assert_eq!(step(&f, 5, StepOp::Over), Ok(6));
        assert_eq!(step(&f, 5, StepOp::BackOver), Ok(0));
        assert_eq!(step(&f, 4, StepOp::BackOver), Ok(2));
        assert_eq!(step(&f, 3, StepOp::BackOver), Ok(2));
    }

    #[test]
    fn out_and_back_out() {
        let f = forest();
        assert_eq!(step(&f, 0, StepOp::Out), Err(StepError::NoEnclosingFrame(0)));
        assert_eq!(step(&f, 5, StepOp::BackOut), Err(StepError::NoEnclosingFrame(5)));
        assert_eq!(step(&f, 3, StepOp::Out), Ok(4));
        assert_eq!(step(&f, 3, StepOp::BackOut), Ok(2));
        assert_eq!(step(&f, 4, StepOp::Out), Ok(5));
        assert_eq!(step(&f, 6, StepOp::Out), Ok(6));
        assert_eq!(step(&f, 6, StepOp::BackOut), Ok(5));
    }

    #[test]
    fn innermost_follows_parents_after_close() {
        let f = forest();
        assert_eq!(innermost_open(&f, 0), None);
        assert_eq!(innermost_open(&f, 3).map(|fr| fr.id), Some(FrameId(1)));
        assert_eq!(innermost_open(&f, 4).map(|fr| fr.id), Some(FrameId(0)));
        assert_eq!(innermost_open(&f, 5), None);
    }

    #[test]
    fn op_names_round_trip() {
        for op in StepOp::ALL {
            assert_eq!(op.as_str().parse::<StepOp>(), Ok(op));
        }
        assert!("sideways".parse::<StepOp>().is_err());
    }
}
