//! Schema-driven rendering of every value in a trace.
//!
//! Each event is decoded and rendered independently of the others, so the
//! whole trace is rendered as one data-parallel batch when the `parallel`
//! feature is enabled. The sequential path is always available and produces
//! identical output.

use std::borrow::Cow;

use thiserror::Error;

use crate::call_tree::{CallForest, EventOwner};
use crate::schema::Schema;
use crate::value::{
    decode, needs_parens, render, render_untyped, DecodeError, EncodedValue, TypeId, TypedValue,
};
use crate::wire::{EventKind, TraceEvent};

/// A rendered value plus whether it needs parentheses in argument position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedValue {
    pub text: String,
    pub atomic: bool,
}

impl RenderedValue {
    fn typed(v: &TypedValue) -> Self {
        RenderedValue {
            text: render(v),
            atomic: !needs_parens(v),
        }
    }

    fn untyped(v: &EncodedValue) -> Self {
        let atomic = !matches!(v, EncodedValue::Immediate(n) if *n < 0)
            && !matches!(v, EncodedValue::Float64(x) if x.is_sign_negative() && !x.is_nan());
        RenderedValue {
            text: render_untyped(v),
            atomic,
        }
    }

    /// Text for use after a function or constructor name.
    pub fn as_arg(&self) -> Cow<'_, str> {
        if self.atomic {
            Cow::Borrowed(&self.text)
        } else {
            Cow::Owned(format!("({})", self.text))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RenderedEvent {
    Call { args: Vec<RenderedValue> },
    Return { value: RenderedValue },
    Raise { exn: RenderedValue },
    Match { discriminee: RenderedValue },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("event {event_idx}: {source}")]
    Decode {
        event_idx: usize,
        #[source]
        source: DecodeError,
    },
    #[error("event {event_idx}: {reason}")]
    SchemaMismatch { event_idx: usize, reason: String },
}

impl RenderError {
    pub fn event_idx(&self) -> usize {
        match self {
            RenderError::Decode { event_idx, .. } | RenderError::SchemaMismatch { event_idx, .. } => {
                *event_idx
            }
        }
    }
}

fn decode_rendered(v: &EncodedValue, ty: TypeId, schema: &Schema) -> Result<RenderedValue, DecodeError> {
    decode(v, ty, &schema.types).map(|tv| RenderedValue::typed(&tv))
}

/// Decodes and renders event `idx` of `forest` against `schema`.
pub fn render_event(schema: &Schema, forest: &CallForest, idx: usize) -> Result<RenderedEvent, RenderError> {
    let err = |source| RenderError::Decode {
        event_idx: idx,
        source,
    };
    let mismatch = |reason: String| RenderError::SchemaMismatch {
        event_idx: idx,
        reason,
    };
    let event: &TraceEvent = &forest.events()[idx];
    let function_of = |owner: Option<EventOwner>| match owner {
        Some(EventOwner::Close(f)) => forest.frame(f).and_then(|f| schema.function(f.fn_id)),
        _ => None,
    };
    Ok(match &event.kind {
        EventKind::Call { fn_id, args } => {
            let info = schema
                .function(*fn_id)
                .ok_or_else(|| mismatch(format!("unknown function id {fn_id}")))?;
            if info.arg_type_ids.len() != args.len() {
                return Err(mismatch(format!(
                    "{} takes {} arguments, call has {}",
                    info.name,
                    info.arg_type_ids.len(),
                    args.len()
                )));
            }
            let args = args
                .iter()
                .zip(&info.arg_type_ids)
                .map(|(a, t)| decode_rendered(a, *t, schema))
                .collect::<Result<_, _>>()
                .map_err(err)?;
            RenderedEvent::Call { args }
        }
        EventKind::Return { value } => {
            let info = function_of(forest.owner(idx))
                .ok_or_else(|| mismatch("return from a frame of an unknown function".into()))?;
            RenderedEvent::Return {
                value: decode_rendered(value, info.ret_type_id, schema).map_err(err)?,
            }
        }
        EventKind::Raise { exn } => RenderedEvent::Raise {
            exn: match schema.exn_type() {
                Some(t) => decode_rendered(exn, t, schema).map_err(err)?,
                None => RenderedValue::untyped(exn),
            },
        },
        EventKind::Match { site_id, discriminee } => {
            let site = schema
                .match_site(*site_id)
                .ok_or_else(|| mismatch(format!("unknown match site id {site_id}")))?;
            RenderedEvent::Match {
                discriminee: decode_rendered(discriminee, site.scrutinee_type_id, schema).map_err(err)?,
            }
        }
    })
}

/// Rendered text for every event of a forest, by event index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTrace {
    events: Vec<RenderedEvent>,
}

impl RenderedTrace {
    /// Renders with the parallel path when it is compiled in.
    pub fn build(schema: &Schema, forest: &CallForest) -> Result<Self, RenderError> {
        #[cfg(feature = "parallel")]
        {
            Self::build_parallel(schema, forest)
        }
        #[cfg(not(feature = "parallel"))]
        {
            Self::build_sequential(schema, forest)
        }
    }

    pub fn build_sequential(schema: &Schema, forest: &CallForest) -> Result<Self, RenderError> {
        let events = (0..forest.len())
            .map(|i| render_event(schema, forest, i))
            .collect::<Result<_, _>>()?;
        Ok(RenderedTrace { events })
    }

    #[cfg(feature = "parallel")]
    pub fn build_parallel(schema: &Schema, forest: &CallForest) -> Result<Self, RenderError> {
        use rayon::prelude::*;
        let events = (0..forest.len())
            .into_par_iter()
            .map(|i| render_event(schema, forest, i))
            .collect::<Result<_, _>>()?;
        Ok(RenderedTrace { events })
    }

    pub fn event(&self, idx: usize) -> &RenderedEvent {
        &self.events[idx]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn call_args(&self, idx: usize) -> &[RenderedValue] {
        match &self.events[idx] {
            RenderedEvent::Call { args } => args,
            _ => &[],
        }
    }

    /// The value carried by a return, raise or match event.
    pub fn value(&self, idx: usize) -> Option<&RenderedValue> {
        match &self.events[idx] {
            RenderedEvent::Call { .. } => None,
            RenderedEvent::Return { value } => Some(value),
            RenderedEvent::Raise { exn } => Some(exn),
            RenderedEvent::Match { discriminee } => Some(discriminee),
        }
    }
}
