//! Text and Chrome-trace exporters over a loaded [`Trace`].

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use serde_json::Value;

use crate::call_tree::{Child, EventOwner, Frame, Outcome, QueryError};
use crate::rendered::RenderedEvent;
use crate::trace::Trace;

/// Elision marker printed under a frame whose children exceed `max_depth`.
pub const ELISION: &str = "…";

/// `name arg1 arg2 = v`, `... raised v` or `... (truncated)`.
pub fn frame_line(trace: &Trace, frame: &Frame) -> String {
    let mut line = trace.fn_name(frame.fn_id).to_string();
    for arg in trace.rendered.call_args(frame.begin_event) {
        line.push(' ');
        line.push_str(&arg.as_arg());
    }
    match (
        frame.outcome,
        frame.end_event.and_then(|e| trace.rendered.value(e)),
    ) {
        (Outcome::Returned, Some(v)) => {
            line.push_str(" = ");
            line.push_str(&v.text);
        }
        (Outcome::Raised, Some(v)) => {
            line.push_str(" raised ");
            line.push_str(&v.text);
        }
        _ => line.push_str(" (truncated)"),
    }
    line
}

/// Indented call tree, two spaces per level. Frames deeper than
/// `max_depth` levels are replaced by a single elision line.
pub fn print_tree(trace: &Trace, max_depth: Option<usize>) -> String {
    let forest = &trace.forest;
    let mut out = String::new();
    let push = |out: &mut String, level: usize, text: &str| {
        for _ in 0..level {
            out.push_str("  ");
        }
        out.push_str(text);
        out.push('\n');
    };
    let roots: Vec<Child> = forest.roots().iter().map(|f| Child::Frame(*f)).collect();
    if max_depth == Some(0) {
        if !roots.is_empty() {
            push(&mut out, 0, ELISION);
        }
        return out;
    }
    // Explicit stack of (level, child), children pushed in reverse.
    let mut stack: Vec<(usize, Child)> = roots.into_iter().rev().map(|c| (0, c)).collect();
    while let Some((level, child)) = stack.pop() {
        match child {
            Child::Match(m) => {
                let node = forest.match_node(m);
                let text = trace
                    .rendered
                    .value(node.event_idx)
                    .map(|v| v.text.as_str())
                    .unwrap_or_default();
                push(&mut out, level, &format!("match {text}"));
            }
            Child::Frame(f) => {
                let frame = &forest.frames()[f.index()];
                push(&mut out, level, &frame_line(trace, frame));
                if frame.children.is_empty() {
                    continue;
                }
                if max_depth.is_some_and(|d| level + 1 >= d) {
                    push(&mut out, level + 1, ELISION);
                } else {
                    stack.extend(frame.children.iter().rev().map(|c| (level + 1, *c)));
                }
            }
        }
    }
    out
}

/// One line per call of `name`, in call order. With `unique`, repeated
/// lines are dropped after their first occurrence.
pub fn observe(trace: &Trace, name: &str, unique: bool) -> Result<Vec<String>, QueryError> {
    let lines = trace.find_calls(name)?.into_iter().map(|f| frame_line(trace, f));
    Ok(if unique {
        let mut seen = HashSet::new();
        lines.filter(|l| seen.insert(l.clone())).collect()
    } else {
        lines.collect()
    })
}

const PID: u32 = 1;
const TID: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeginArgs {
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndArgs {
    pub result: String,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstantArgs {
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "ph")]
pub enum ChromeEvent {
    #[serde(rename = "B")]
    Begin {
        name: String,
        ts: u64,
        pid: u32,
        tid: u32,
        args: BeginArgs,
    },
    #[serde(rename = "E")]
    End {
        ts: u64,
        pid: u32,
        tid: u32,
        args: EndArgs,
    },
    #[serde(rename = "i")]
    Instant {
        name: String,
        s: String,
        ts: u64,
        pid: u32,
        tid: u32,
        args: InstantArgs,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChromeTrace {
    #[serde(rename = "traceEvents")]
    pub trace_events: Vec<ChromeEvent>,
}

impl ChromeTrace {
    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("chrome trace serializes");
        s.push('\n');
        s
    }
}

/// Chrome trace-event view: a B/E pair per frame and an instant per match.
/// With `logical_time`, timestamps are event indices instead of recorded
/// microseconds, which makes the output independent of the machine.
pub fn to_chrome(trace: &Trace, logical_time: bool) -> ChromeTrace {
    let forest = &trace.forest;
    let events = forest.events();
    let ts_of = |i: usize| if logical_time { i as u64 } else { events[i].ts };
    let mut out = Vec::with_capacity(events.len() + forest.truncated_count());
    let mut open = 0usize;
    for i in 0..events.len() {
        let ts = ts_of(i);
        match trace.rendered.event(i) {
            RenderedEvent::Call { args } => {
                open += 1;
                let frame = match forest.owner(i) {
                    Some(EventOwner::Open(f)) => forest.frame(f),
                    _ => None,
                };
                let name = frame.map(|f| trace.fn_name(f.fn_id)).unwrap_or("<unknown>");
                out.push(ChromeEvent::Begin {
                    name: name.to_string(),
                    ts,
                    pid: PID,
                    tid: TID,
                    args: BeginArgs {
                        args: args.iter().map(|a| a.text.clone()).collect(),
                    },
                });
            }
            RenderedEvent::Return { value } => {
                open -= 1;
                out.push(end_event(ts, value.text.clone(), false));
            }
            RenderedEvent::Raise { exn } => {
                open -= 1;
                out.push(end_event(ts, format!("raised {}", exn.text), false));
            }
            RenderedEvent::Match { discriminee } => out.push(ChromeEvent::Instant {
                name: "match".into(),
                s: "t".into(),
                ts,
                pid: PID,
                tid: TID,
                args: InstantArgs {
                    value: discriminee.text.clone(),
                },
            }),
        }
    }
    let last_ts = events.len().checked_sub(1).map_or(0, ts_of);
    for _ in 0..open {
        out.push(end_event(last_ts, "(truncated)".into(), true));
    }
    ChromeTrace { trace_events: out }
}

fn end_event(ts: u64, result: String, truncated: bool) -> ChromeEvent {
    ChromeEvent::End {
        ts,
        pid: PID,
        tid: TID,
        args: EndArgs { result, truncated },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChromeStats {
    pub begins: usize,
    pub ends: usize,
    pub instants: usize,
}

/// Structural validation of a Chrome trace document: every event has a
/// known phase and numeric `ts`, timestamps never decrease, and B/E events
/// balance and nest per thread.
pub fn check_chrome(doc: &Value) -> Result<ChromeStats, String> {
    let events = doc
        .get("traceEvents")
        .and_then(Value::as_array)
        .ok_or("missing traceEvents array")?;
    let mut stats = ChromeStats::default();
    let mut open: HashMap<(u64, u64), Vec<f64>> = HashMap::new();
    let mut last_ts = f64::NEG_INFINITY;
    for (i, ev) in events.iter().enumerate() {
        let ph = ev
            .get("ph")
            .and_then(Value::as_str)
            .ok_or(format!("event {i}: no ph"))?;
        let ts = ev
            .get("ts")
            .and_then(Value::as_f64)
            .ok_or(format!("event {i}: no numeric ts"))?;
        if ts < last_ts {
            return Err(format!("event {i}: ts {ts} before {last_ts}"));
        }
        last_ts = ts;
        let thread = (
            ev.get("pid").and_then(Value::as_u64).unwrap_or(0),
            ev.get("tid").and_then(Value::as_u64).unwrap_or(0),
        );
        match ph {
            "B" => {
                if ev.get("name").and_then(Value::as_str).is_none() {
                    return Err(format!("event {i}: B without name"));
                }
                open.entry(thread).or_default().push(ts);
                stats.begins += 1;
            }
            "E" => {
                let begin = open
                    .get_mut(&thread)
                    .and_then(Vec::pop)
                    .ok_or(format!("event {i}: E without matching B"))?;
                if ts < begin {
                    return Err(format!("event {i}: E before its B"));
                }
                stats.ends += 1;
            }
            "i" | "I" => stats.instants += 1,
            other => return Err(format!("event {i}: unexpected phase {other:?}")),
        }
    }
    if let Some((thread, stack)) = open.iter().find(|(_, s)| !s.is_empty()) {
        return Err(format!("{} unclosed B events on {thread:?}", stack.len()));
    }
    Ok(stats)
}
