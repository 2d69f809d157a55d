//! Runtime emission API for instrumented programs.
//!
//! A [`TraceSession`] owns the output stream. Every traced function opens a
//! frame with [`TraceSession::call`] and closes it with exactly one of
//! [`TraceSession::ret`] or [`TraceSession::raise_exit`]. An exception that
//! escapes several traced frames is recorded as one `Raise` per frame, which
//! keeps the stream properly nested.

use std::env;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use thiserror::Error;

use crate::schema::{save_schema, schema_hash, FnId, Schema, SchemaError, SiteId};
use crate::value::{Encode, EncodedValue};
use crate::wire::{TraceEvent, TraceWriteError, TraceWriter};

/// Output directory for trace and schema files.
pub const TRACE_DIR_ENV: &str = "OTR_TRACE_DIR";

pub fn trace_dir() -> PathBuf {
    env::var_os(TRACE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn trace_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.trace"))
}

pub fn schema_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.schema.json"))
}

/// Source of event timestamps.
pub trait Clock {
    fn now_micros(&mut self) -> u64;
}

impl<C: Clock + ?Sized> Clock for Box<C> {
    fn now_micros(&mut self) -> u64 {
        (**self).now_micros()
    }
}

/// Microseconds elapsed since the session started.
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now_micros(&mut self) -> u64 {
        self.origin.elapsed().as_micros() as u64
    }
}

/// Each reading returns the number of previous readings, so event `i` is
/// stamped `i`. Makes traces reproducible byte for byte.
#[derive(Default)]
pub struct LogicalClock {
    next: u64,
}

impl Clock for LogicalClock {
    fn now_micros(&mut self) -> u64 {
        let t = self.next;
        self.next += 1;
        t
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("unknown function id {0}")]
    UnknownFunction(FnId),
    #[error("unknown match site id {0}")]
    UnknownSite(SiteId),
    #[error("{fn_id} takes {expected} arguments, got {actual}")]
    ArgCount {
        fn_id: FnId,
        expected: usize,
        actual: usize,
    },
    #[error("trace session is closed")]
    SessionClosed,
    #[error("frame is not the innermost open frame")]
    NotInnermost,
    #[error("frame was already closed")]
    GuardAlreadyClosed,
    #[error("match event outside any traced frame")]
    NoOpenFrame,
    #[error("session finalized with {0} frames still open")]
    UnclosedFrames(usize),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Write(#[from] TraceWriteError),
}

impl From<io::Error> for TraceError {
    fn from(e: io::Error) -> Self {
        TraceError::Write(TraceWriteError::Io(e))
    }
}

static NEXT_SESSION: AtomicU64 = AtomicU64::new(0);

/// Handle for one open frame. Consumed by `ret` or `raise_exit`.
#[derive(Debug)]
#[must_use = "an unclosed frame is recorded as truncated"]
pub struct FrameGuard {
    session: u64,
    serial: u64,
}

/// A recording in progress. Confined to one thread.
pub struct TraceSession<W: Write> {
    schema: Schema,
    writer: TraceWriter<W>,
    clock: Box<dyn Clock>,
    id: u64,
    open: Vec<u64>,
    next_serial: u64,
    last_ts: u64,
    closed: bool,
}

impl<W: Write> TraceSession<W> {
    /// Writes the trace header for `schema` to `sink` and starts recording.
    pub fn new(schema: Schema, sink: W, clock: impl Clock + 'static) -> Result<Self, TraceError> {
        let writer = TraceWriter::new(sink, schema_hash(&schema))?;
        Ok(TraceSession {
            schema,
            writer,
            clock: Box::new(clock),
            id: NEXT_SESSION.fetch_add(1, Ordering::Relaxed),
            open: Vec::new(),
            next_serial: 0,
            last_ts: 0,
            closed: false,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Number of open frames.
    pub fn depth(&self) -> usize {
        self.open.len()
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    fn emit(&mut self, event: impl FnOnce(u64) -> TraceEvent) -> Result<(), TraceError> {
        let ts = self.clock.now_micros().max(self.last_ts);
        self.last_ts = ts;
        self.writer.write_event(&event(ts))?;
        Ok(())
    }

    pub fn call(&mut self, fn_id: FnId, args: Vec<EncodedValue>) -> Result<FrameGuard, TraceError> {
        if self.closed {
            return Err(TraceError::SessionClosed);
        }
        let info = self
            .schema
            .function(fn_id)
            .ok_or(TraceError::UnknownFunction(fn_id))?;
        if info.arg_type_ids.len() != args.len() {
            return Err(TraceError::ArgCount {
                fn_id,
                expected: info.arg_type_ids.len(),
                actual: args.len(),
            });
        }
        self.emit(|ts| TraceEvent::call(fn_id, args, ts))?;
        let serial = self.next_serial;
        self.next_serial += 1;
        self.open.push(serial);
        Ok(FrameGuard {
            session: self.id,
            serial,
        })
    }

    fn close(&mut self, guard: FrameGuard) -> Result<(), TraceError> {
        if self.closed {
            return Err(TraceError::SessionClosed);
        }
        if guard.session != self.id || !self.open.contains(&guard.serial) {
            return Err(TraceError::GuardAlreadyClosed);
        }
        if self.open.last() != Some(&guard.serial) {
            return Err(TraceError::NotInnermost);
        }
        self.open.pop();
        Ok(())
    }

    pub fn ret(&mut self, guard: FrameGuard, value: EncodedValue) -> Result<(), TraceError> {
        self.close(guard)?;
        self.emit(|ts| TraceEvent::ret(value, ts))
    }

    /// Records that an exception left the guarded frame. The caller then
    /// re-propagates it, so outer frames record their own `Raise`.
    pub fn raise_exit(&mut self, guard: FrameGuard, exn: EncodedValue) -> Result<(), TraceError> {
        self.close(guard)?;
        self.emit(|ts| TraceEvent::raise(exn, ts))
    }

    pub fn match_event(&mut self, site_id: SiteId, discriminee: EncodedValue) -> Result<(), TraceError> {
        if self.closed {
            return Err(TraceError::SessionClosed);
        }
        if self.schema.match_site(site_id).is_none() {
            return Err(TraceError::UnknownSite(site_id));
        }
        if self.open.is_empty() {
            return Err(TraceError::NoOpenFrame);
        }
        self.emit(|ts| TraceEvent::matched(site_id, discriminee, ts))
    }

    /// Runs `body` inside a frame of `fn_id`, recording its result as a
    /// return and its error as a raise.
    pub fn traced<T, E>(
        &mut self,
        fn_id: FnId,
        args: Vec<EncodedValue>,
        body: impl FnOnce(&mut Self) -> Result<T, E>,
    ) -> Result<T, E>
    where
        T: Encode,
        E: Encode + From<TraceError>,
    {
        let guard = self.call(fn_id, args)?;
        match body(self) {
            Ok(v) => {
                self.ret(guard, v.encode())?;
                Ok(v)
            }
            Err(e) => {
                self.raise_exit(guard, e.encode())?;
                Err(e)
            }
        }
    }

    /// Flushes and closes the session. Fails if frames are still open; the
    /// stream is closed either way and those frames read back as truncated.
    pub fn finalize(&mut self) -> Result<(), TraceError> {
        if self.closed {
            return Err(TraceError::SessionClosed);
        }
        self.closed = true;
        self.writer.flush()?;
        match self.open.len() {
            0 => Ok(()),
            n => Err(TraceError::UnclosedFrames(n)),
        }
    }

    /// Closes without checking for open frames, for programs that are
    /// going down.
    pub fn abort(&mut self) -> io::Result<()> {
        self.closed = true;
        self.writer.flush()
    }

    pub fn into_inner(self) -> W {
        self.writer.into_inner()
    }
}

impl TraceSession<BufWriter<File>> {
    /// Saves `<dir>/<name>.schema.json` and opens `<dir>/<name>.trace`.
    pub fn create_in(
        dir: &Path,
        name: &str,
        schema: Schema,
        clock: impl Clock + 'static,
    ) -> Result<Self, TraceError> {
        save_schema(&schema, &schema_path(dir, name))?;
        let file = File::create(trace_path(dir, name))?;
        TraceSession::new(schema, BufWriter::new(file), clock)
    }

    /// As [`create_in`](Self::create_in), in the directory named by
    /// `OTR_TRACE_DIR` (default: the current directory).
    pub fn create(name: &str, schema: Schema, clock: impl Clock + 'static) -> Result<Self, TraceError> {
        Self::create_in(&trace_dir(), name, schema, clock)
    }
}
