//! Untyped value encoding and its schema-driven interpretation.
//!
//! Instrumented code records values as [`EncodedValue`]s, which carry only
//! what a uniform runtime representation keeps: immediates, tagged blocks,
//! boxed floats, byte strings and opaque placeholders. Constructor names,
//! record field names and the distinction between e.g. `option` and
//! `result` are gone. A [`TypeTable`] restores them at read time through
//! [`decode`], and [`render`] prints the result in source-like syntax.

mod decode;
mod encode;
mod render;
mod types;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use decode::{decode, DecodeError};
pub use encode::{encode_constructor, encode_list, encode_typed, EncodeError};
pub use render::{needs_parens, render, render_arg, render_untyped};
pub use types::{Constructor, Field, TypeDescriptor, TypeId, TypeTable, TypeTableError};

/// Kind of a value that could not be serialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpaqueKind {
    Function,
    Abstract,
}

/// A value as the instrumented program sees it at runtime, without types.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodedValue {
    /// Ints, booleans, unit, chars, `[]` and constant constructors.
    Immediate(i64),
    /// Tuples, records, cons cells and non-constant constructors.
    Block {
        tag: u8,
        fields: Vec<EncodedValue>,
    },
    Float64(f64),
    Str(Vec<u8>),
    Opaque(OpaqueKind),
}

impl EncodedValue {
    pub const UNIT: EncodedValue = EncodedValue::Immediate(0);

    pub fn block(tag: u8, fields: Vec<EncodedValue>) -> Self {
        EncodedValue::Block { tag, fields }
    }

    pub fn str(s: impl AsRef<[u8]>) -> Self {
        EncodedValue::Str(s.as_ref().to_vec())
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            EncodedValue::Immediate(_) => "immediate",
            EncodedValue::Block { .. } => "block",
            EncodedValue::Float64(_) => "float",
            EncodedValue::Str(_) => "string",
            EncodedValue::Opaque(_) => "opaque",
        }
    }
}

// Cons chains nest one level per element; dropping them recursively would
// overflow the stack on long lists.
impl Drop for EncodedValue {
    fn drop(&mut self) {
        let EncodedValue::Block { fields, .. } = self else {
            return;
        };
        if fields.iter().all(|f| !matches!(f, EncodedValue::Block { .. })) {
            return;
        }
        let mut pending = std::mem::take(fields);
        while let Some(mut v) = pending.pop() {
            if let EncodedValue::Block { fields, .. } = &mut v {
                pending.append(fields);
            }
        }
    }
}

impl fmt::Display for EncodedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_untyped(self))
    }
}

/// A decoded value whose shape follows the descriptor that produced it.
#[derive(Debug, Clone, PartialEq)]
pub enum TypedValue {
    Unit,
    Bool(bool),
    Int(i64),
    Char(u8),
    Float(f64),
    String(Vec<u8>),
    Tuple(Vec<TypedValue>),
    List(Vec<TypedValue>),
    Record(Vec<(String, TypedValue)>),
    Ctor(String, Vec<TypedValue>),
    Opaque(OpaqueKind),
}

/// Conversion of host values into the untyped encoding.
///
/// Implementations must agree with the descriptor the value is registered
/// under, otherwise decoding will fail when the trace is read.
pub trait Encode {
    fn encode(&self) -> EncodedValue;
}

impl Encode for () {
    fn encode(&self) -> EncodedValue {
        EncodedValue::UNIT
    }
}

impl Encode for bool {
    fn encode(&self) -> EncodedValue {
        EncodedValue::Immediate(*self as i64)
    }
}

macro_rules! encode_int {
    ($($t:ty),*) => {
        $(impl Encode for $t {
            fn encode(&self) -> EncodedValue {
                EncodedValue::Immediate(*self as i64)
            }
        })*
    };
}

encode_int!(i8, i16, i32, i64, u8, u16, u32, isize);

impl Encode for f64 {
    fn encode(&self) -> EncodedValue {
        EncodedValue::Float64(*self)
    }
}

impl Encode for str {
    fn encode(&self) -> EncodedValue {
        EncodedValue::str(self)
    }
}

impl Encode for String {
    fn encode(&self) -> EncodedValue {
        EncodedValue::str(self)
    }
}

impl<T: Encode + ?Sized> Encode for &T {
    fn encode(&self) -> EncodedValue {
        (**self).encode()
    }
}

impl<T: Encode> Encode for [T] {
    fn encode(&self) -> EncodedValue {
        encode_list(self.iter().map(Encode::encode).collect())
    }
}

impl<T: Encode> Encode for Vec<T> {
    fn encode(&self) -> EncodedValue {
        self.as_slice().encode()
    }
}

/// Encodes as `None | Some of 'a`.
impl<T: Encode> Encode for Option<T> {
    fn encode(&self) -> EncodedValue {
        match self {
            None => EncodedValue::Immediate(0),
            Some(v) => EncodedValue::block(0, vec![v.encode()]),
        }
    }
}

/// Encodes as `Ok of 'a | Error of 'b`.
impl<T: Encode, E: Encode> Encode for Result<T, E> {
    fn encode(&self) -> EncodedValue {
        match self {
            Ok(v) => EncodedValue::block(0, vec![v.encode()]),
            Err(e) => EncodedValue::block(1, vec![e.encode()]),
        }
    }
}

impl<A: Encode, B: Encode> Encode for (A, B) {
    fn encode(&self) -> EncodedValue {
        EncodedValue::block(0, vec![self.0.encode(), self.1.encode()])
    }
}

impl<A: Encode, B: Encode, C: Encode> Encode for (A, B, C) {
    fn encode(&self) -> EncodedValue {
        EncodedValue::block(0, vec![self.0.encode(), self.1.encode(), self.2.encode()])
    }
}
