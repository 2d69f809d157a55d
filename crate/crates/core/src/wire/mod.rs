//! Binary trace stream: a fixed header followed by contiguous events.
//!
//! ```text
//! header  = "OTRC" version:u16le schema_hash:u64le
//! event   = 0x00 fn_id:varint argc:varint value* dts:varint      Call
//!         | 0x01 value dts:varint                                Return
//!         | 0x02 value dts:varint                                Raise
//!         | 0x03 site_id:varint value dts:varint                 Match
//! value   = 0x00 zigzag:varint                                   Immediate
//!         | 0x01 tag:u8 count:varint value*                      Block
//!         | 0x02 f64le                                           Float
//!         | 0x03 len:varint byte*                                Str
//!         | 0x04 (0 = function | 1 = abstract)                   Opaque
//! ```
//!
//! Timestamps are deltas from the previous event, the first from zero.
//! A stream cut anywhere after the header still reads: the partial event is
//! dropped and the result carries a [`TruncationFlag`].

mod varint;

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

pub use varint::{read_varint, unzigzag, write_varint, zigzag, VarintError, MAX_VARINT_LEN};

use crate::schema::{schema_hash, FnId, Schema, SiteId};
use crate::value::{EncodedValue, OpaqueKind};

pub const MAGIC: [u8; 4] = *b"OTRC";
pub const TRACE_FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 14;

const EV_CALL: u8 = 0x00;
const EV_RETURN: u8 = 0x01;
const EV_RAISE: u8 = 0x02;
const EV_MATCH: u8 = 0x03;

const VAL_IMMEDIATE: u8 = 0x00;
const VAL_BLOCK: u8 = 0x01;
const VAL_FLOAT: u8 = 0x02;
const VAL_STR: u8 = 0x03;
const VAL_OPAQUE: u8 = 0x04;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub format_version: u16,
    pub schema_hash: u64,
}

impl TraceHeader {
    pub fn new(schema_hash: u64) -> Self {
        TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            schema_hash,
        }
    }

    pub fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.format_version.to_le_bytes());
        out[6..].copy_from_slice(&self.schema_hash.to_le_bytes());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Call {
        fn_id: FnId,
        args: Vec<EncodedValue>,
    },
    Return {
        value: EncodedValue,
    },
    Raise {
        exn: EncodedValue,
    },
    Match {
        site_id: SiteId,
        discriminee: EncodedValue,
    },
}

/// One trace record; `ts` is absolute microseconds (or a logical counter).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvent {
    pub ts: u64,
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn call(fn_id: FnId, args: Vec<EncodedValue>, ts: u64) -> Self {
        TraceEvent {
            ts,
            kind: EventKind::Call { fn_id, args },
        }
    }

    pub fn ret(value: EncodedValue, ts: u64) -> Self {
        TraceEvent {
            ts,
            kind: EventKind::Return { value },
        }
    }

    pub fn raise(exn: EncodedValue, ts: u64) -> Self {
        TraceEvent {
            ts,
            kind: EventKind::Raise { exn },
        }
    }

    pub fn matched(site_id: SiteId, discriminee: EncodedValue, ts: u64) -> Self {
        TraceEvent {
            ts,
            kind: EventKind::Match { site_id, discriminee },
        }
    }

    pub fn is_close(&self) -> bool {
        matches!(self.kind, EventKind::Return { .. } | EventKind::Raise { .. })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EventKind::Call { .. } => "call",
            EventKind::Return { .. } => "return",
            EventKind::Raise { .. } => "raise",
            EventKind::Match { .. } => "match",
        }
    }
}

pub fn encode_value(out: &mut Vec<u8>, value: &EncodedValue) {
    let mut value = value;
    loop {
        match value {
            EncodedValue::Immediate(n) => {
                out.push(VAL_IMMEDIATE);
                write_varint(out, zigzag(*n));
            }
            EncodedValue::Block { tag, fields } => {
                out.push(VAL_BLOCK);
                out.push(*tag);
                write_varint(out, fields.len() as u64);
                if let Some((last, init)) = fields.split_last() {
                    for f in init {
                        encode_value(out, f);
                    }
                    // The last field is the tail of a cons chain; iterate.
                    value = last;
                    continue;
                }
            }
            EncodedValue::Float64(x) => {
                out.push(VAL_FLOAT);
                out.extend_from_slice(&x.to_le_bytes());
            }
            EncodedValue::Str(s) => {
                out.push(VAL_STR);
                write_varint(out, s.len() as u64);
                out.extend_from_slice(s);
            }
            EncodedValue::Opaque(kind) => {
                out.push(VAL_OPAQUE);
                out.push(match kind {
                    OpaqueKind::Function => 0,
                    OpaqueKind::Abstract => 1,
                });
            }
        }
        return;
    }
}

/// Appends the encoding of `event`, with `prev_ts` the timestamp of the
/// previous event (0 for the first).
pub fn encode_event(out: &mut Vec<u8>, event: &TraceEvent, prev_ts: u64) {
    match &event.kind {
        EventKind::Call { fn_id, args } => {
            out.push(EV_CALL);
            write_varint(out, fn_id.0 as u64);
            write_varint(out, args.len() as u64);
            for a in args {
                encode_value(out, a);
            }
        }
        EventKind::Return { value } => {
            out.push(EV_RETURN);
            encode_value(out, value);
        }
        EventKind::Raise { exn } => {
            out.push(EV_RAISE);
            encode_value(out, exn);
        }
        EventKind::Match { site_id, discriminee } => {
            out.push(EV_MATCH);
            write_varint(out, site_id.0 as u64);
            encode_value(out, discriminee);
        }
    }
    write_varint(out, event.ts.saturating_sub(prev_ts));
}

#[derive(Debug, Error)]
pub enum TraceWriteError {
    #[error("timestamp {ts} precedes previous timestamp {prev}")]
    NonMonotonic { ts: u64, prev: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Streams events into any sink after writing the header.
pub struct TraceWriter<W: Write> {
    out: W,
    prev_ts: u64,
    buf: Vec<u8>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, schema_hash: u64) -> io::Result<Self> {
        out.write_all(&TraceHeader::new(schema_hash).to_bytes())?;
        Ok(TraceWriter {
            out,
            prev_ts: 0,
            buf: Vec::with_capacity(256),
        })
    }

    pub fn write_event(&mut self, event: &TraceEvent) -> Result<(), TraceWriteError> {
        if event.ts < self.prev_ts {
            return Err(TraceWriteError::NonMonotonic {
                ts: event.ts,
                prev: self.prev_ts,
            });
        }
        self.buf.clear();
        encode_event(&mut self.buf, event, self.prev_ts);
        self.out.write_all(&self.buf)?;
        self.prev_ts = event.ts;
        Ok(())
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn get_ref(&self) -> &W {
        &self.out
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Serializes a whole event list, header included.
pub fn write_trace_bytes(schema: &Schema, events: &[TraceEvent]) -> Result<Vec<u8>, TraceWriteError> {
    let mut w = TraceWriter::new(Vec::new(), schema_hash(schema))?;
    for e in events {
        w.write_event(e)?;
    }
    Ok(w.into_inner())
}

/// How a trace ended when it did not end cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TruncationFlag {
    /// The stream stopped in the middle of an event, which was dropped.
    pub partial_event: bool,
    /// Calls still open at end of stream.
    pub open_frames: usize,
}

impl TruncationFlag {
    pub fn is_truncated(&self) -> bool {
        self.partial_event || self.open_frames > 0
    }
}

#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error("not a trace file (bad magic)")]
    BadMagic,
    #[error("trace ends inside its header")]
    TruncatedHeader,
    #[error("unsupported trace format version {0}")]
    UnsupportedVersion(u16),
    #[error("trace was written for schema {found:016x}, but the supplied schema hashes to {expected:016x}")]
    SchemaHashMismatch { expected: u64, found: u64 },
    #[error("malformed event at byte {offset}: {reason}")]
    MalformedEvent { offset: usize, reason: String },
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: String, source: io::Error },
}

#[derive(Debug)]
enum Fault {
    Eof,
    Malformed(String),
}

impl From<VarintError> for Fault {
    fn from(e: VarintError) -> Self {
        match e {
            VarintError::Truncated => Fault::Eof,
            VarintError::MalformedVarint => Fault::Malformed(e.to_string()),
        }
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn u8(&mut self) -> Result<u8, Fault> {
        let b = *self.bytes.get(self.pos).ok_or(Fault::Eof)?;
        self.pos += 1;
        Ok(b)
    }

    fn varint(&mut self) -> Result<u64, Fault> {
        let (v, n) = read_varint(&self.bytes[self.pos..])?;
        self.pos += n;
        Ok(v)
    }

    fn take(&mut self, n: u64) -> Result<&'a [u8], Fault> {
        let end = usize::try_from(n)
            .ok()
            .and_then(|n| self.pos.checked_add(n))
            .filter(|&end| end <= self.bytes.len())
            .ok_or(Fault::Eof)?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn value(&mut self) -> Result<EncodedValue, Fault> {
        struct Open {
            tag: u8,
            remaining: u64,
            fields: Vec<EncodedValue>,
        }
        // Explicit stack: cons chains nest as deep as the list is long.
        let mut open: Vec<Open> = Vec::new();
        loop {
            let mut value = match self.u8()? {
                VAL_IMMEDIATE => EncodedValue::Immediate(unzigzag(self.varint()?)),
                VAL_BLOCK => {
                    let tag = self.u8()?;
                    let count = self.varint()?;
                    if count > 0 {
                        open.push(Open {
                            tag,
                            remaining: count,
                            fields: Vec::with_capacity(count.min(8) as usize),
                        });
                        continue;
                    }
                    EncodedValue::Block {
                        tag,
                        fields: Vec::new(),
                    }
                }
                VAL_FLOAT => {
                    let raw = self.take(8)?;
                    EncodedValue::Float64(f64::from_le_bytes(raw.try_into().expect("8 bytes")))
                }
                VAL_STR => {
                    let len = self.varint()?;
                    EncodedValue::Str(self.take(len)?.to_vec())
                }
                VAL_OPAQUE => match self.u8()? {
                    0 => EncodedValue::Opaque(OpaqueKind::Function),
                    1 => EncodedValue::Opaque(OpaqueKind::Abstract),
                    k => return Err(Fault::Malformed(format!("unknown opaque kind {k}"))),
                },
                k => return Err(Fault::Malformed(format!("unknown value kind 0x{k:02x}"))),
            };
            loop {
                let Some(top) = open.last_mut() else {
                    return Ok(value);
                };
                top.fields.push(value);
                top.remaining -= 1;
                if top.remaining > 0 {
                    break;
                }
                let done = open.pop().expect("non-empty");
                value = EncodedValue::Block {
                    tag: done.tag,
                    fields: done.fields,
                };
            }
        }
    }
}

/// Decodes one value from the front of `bytes`, returning the number of
/// bytes consumed alongside it.
pub fn decode_value(bytes: &[u8]) -> Result<(usize, EncodedValue), TraceReadError> {
    let mut r = ByteReader { bytes, pos: 0 };
    match r.value() {
        Ok(v) => Ok((r.pos, v)),
        Err(Fault::Eof) => Err(TraceReadError::MalformedEvent {
            offset: r.pos,
            reason: "value ends early".into(),
        }),
        Err(Fault::Malformed(reason)) => Err(TraceReadError::MalformedEvent {
            offset: r.pos,
            reason,
        }),
    }
}

/// Parses a header, checking magic, version and schema identity.
pub fn read_header(bytes: &[u8], schema: &Schema) -> Result<TraceHeader, TraceReadError> {
    let magic_len = bytes.len().min(MAGIC.len());
    if bytes[..magic_len] != MAGIC[..magic_len] {
        return Err(TraceReadError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(TraceReadError::TruncatedHeader);
    }
    let format_version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if format_version != TRACE_FORMAT_VERSION {
        return Err(TraceReadError::UnsupportedVersion(format_version));
    }
    let found = u64::from_le_bytes(bytes[6..HEADER_LEN].try_into().expect("8 bytes"));
    let expected = schema_hash(schema);
    if found != expected {
        return Err(TraceReadError::SchemaHashMismatch { expected, found });
    }
    Ok(TraceHeader {
        format_version,
        schema_hash: found,
    })
}

/// Decodes a complete trace image, validating ids and nesting against
/// `schema`.
pub fn read_trace_bytes(
    bytes: &[u8],
    schema: &Schema,
) -> Result<(Vec<TraceEvent>, TruncationFlag), TraceReadError> {
    read_header(bytes, schema)?;
    let mut reader = ByteReader {
        bytes,
        pos: HEADER_LEN,
    };
    let mut events = Vec::new();
    let mut depth = 0usize;
    let mut ts = 0u64;
    let mut flag = TruncationFlag::default();
    while reader.pos < bytes.len() {
        let offset = reader.pos;
        match read_event(&mut reader, schema, depth, ts) {
            Ok(event) => {
                match event.kind {
                    EventKind::Call { .. } => depth += 1,
                    EventKind::Return { .. } | EventKind::Raise { .. } => depth -= 1,
                    EventKind::Match { .. } => {}
                }
                ts = event.ts;
                events.push(event);
            }
            Err(Fault::Eof) => {
                flag.partial_event = true;
                break;
            }
            Err(Fault::Malformed(reason)) => return Err(TraceReadError::MalformedEvent { offset, reason }),
        }
    }
    flag.open_frames = depth;
    Ok((events, flag))
}

fn read_event(
    r: &mut ByteReader<'_>,
    schema: &Schema,
    depth: usize,
    prev_ts: u64,
) -> Result<TraceEvent, Fault> {
    let kind = match r.u8()? {
        EV_CALL => {
            let raw_id = r.varint()?;
            let fn_id = u32::try_from(raw_id)
                .map(FnId)
                .ok()
                .filter(|id| schema.function(*id).is_some())
                .ok_or_else(|| Fault::Malformed(format!("unknown function id {raw_id}")))?;
            let argc = r.varint()?;
            let arity = schema.function(fn_id).expect("checked").arg_type_ids.len();
            if argc != arity as u64 {
                return Err(Fault::Malformed(format!(
                    "{fn_id} called with {argc} arguments, schema declares {arity}"
                )));
            }
            let args = (0..arity).map(|_| r.value()).collect::<Result<_, _>>()?;
            EventKind::Call { fn_id, args }
        }
        k @ (EV_RETURN | EV_RAISE) => {
            if depth == 0 {
                return Err(Fault::Malformed("close event with no open frame".into()));
            }
            let value = r.value()?;
            if k == EV_RETURN {
                EventKind::Return { value }
            } else {
                EventKind::Raise { exn: value }
            }
        }
        EV_MATCH => {
            if depth == 0 {
                return Err(Fault::Malformed("match event with no open frame".into()));
            }
            let raw_id = r.varint()?;
            let site_id = u32::try_from(raw_id)
                .map(SiteId)
                .ok()
                .filter(|id| schema.match_site(*id).is_some())
                .ok_or_else(|| Fault::Malformed(format!("unknown match site id {raw_id}")))?;
            EventKind::Match {
                site_id,
                discriminee: r.value()?,
            }
        }
        k => return Err(Fault::Malformed(format!("unknown event kind 0x{k:02x}"))),
    };
    let delta = r.varint()?;
    let ts = prev_ts
        .checked_add(delta)
        .ok_or_else(|| Fault::Malformed("timestamp overflow".into()))?;
    Ok(TraceEvent { ts, kind })
}

pub fn read_trace(path: &Path, schema: &Schema) -> Result<(Vec<TraceEvent>, TruncationFlag), TraceReadError> {
    let bytes = fs::read(path).map_err(|source| TraceReadError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    read_trace_bytes(&bytes, schema)
}
