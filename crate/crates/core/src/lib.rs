//! Typed tracing for programs whose runtime values carry no type
//! information.
//!
//! Values are recorded in their untyped runtime encoding together with a
//! schema sidecar that describes their types. Readers rebuild the call tree,
//! decode every value against the schema and offer navigation and export.

pub mod call_tree;
pub mod demos;
pub mod export;
pub mod navigator;
pub mod rendered;
pub mod schema;
pub mod trace;
pub mod tracer;
pub mod value;
pub mod wire;

pub use trace::{default_schema_path, LoadError, Trace};
