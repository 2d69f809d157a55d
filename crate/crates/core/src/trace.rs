//! A loaded trace: schema, call forest and rendered values together.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::call_tree::{BuildError, CallForest, Frame, QueryError};
use crate::rendered::{RenderError, RenderedTrace};
use crate::schema::{load_schema, FnId, Schema, SchemaError};
use crate::wire::{read_trace, read_trace_bytes, TraceEvent, TraceReadError, TruncationFlag};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Read(#[from] TraceReadError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("trace does not decode against its schema: {0}")]
    Render(#[from] RenderError),
}

/// `foo.trace` → `foo.schema.json`; other names get the suffix appended.
pub fn default_schema_path(trace_path: &Path) -> PathBuf {
    let s = trace_path.to_string_lossy();
    match s.strip_suffix(".trace") {
        Some(stem) => PathBuf::from(format!("{stem}.schema.json")),
        None => PathBuf::from(format!("{s}.schema.json")),
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub schema: Schema,
    pub forest: CallForest,
    pub rendered: RenderedTrace,
    pub truncation: TruncationFlag,
}

impl Trace {
    pub fn new(
        schema: Schema,
        events: Vec<TraceEvent>,
        truncation: TruncationFlag,
    ) -> Result<Self, LoadError> {
        let forest = CallForest::build(events)?;
        let rendered = RenderedTrace::build(&schema, &forest)?;
        Ok(Trace {
            schema,
            forest,
            rendered,
            truncation,
        })
    }

    pub fn from_bytes(bytes: &[u8], schema: Schema) -> Result<Self, LoadError> {
        let (events, truncation) = read_trace_bytes(bytes, &schema)?;
        Trace::new(schema, events, truncation)
    }

    /// Loads `trace_path`, with the schema from `schema_path` or from the
    /// sibling `.schema.json` file.
    pub fn load(trace_path: &Path, schema_path: Option<&Path>) -> Result<Self, LoadError> {
        let schema_path = schema_path
            .map(Path::to_path_buf)
            .unwrap_or_else(|| default_schema_path(trace_path));
        let schema = load_schema(&schema_path)?;
        let (events, truncation) = read_trace(trace_path, &schema)?;
        Trace::new(schema, events, truncation)
    }

    pub fn fn_name(&self, fn_id: FnId) -> &str {
        self.schema
            .function(fn_id)
            .map(|f| f.name.as_str())
            .unwrap_or("<unknown>")
    }

    pub fn find_calls(&self, name: &str) -> Result<Vec<&Frame>, QueryError> {
        self.forest.find_calls(&self.schema, name)
    }
}
