use thiserror::Error;

use super::types::{ctor_by_repr, CtorRepr, TypeDescriptor, TypeId, TypeTable};
use super::{EncodedValue, OpaqueKind, TypedValue};

/// Disagreement between a recorded value and the descriptor used to read it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("expected {expected} for a {descriptor} descriptor, found {found}")]
    KindMismatch {
        descriptor: &'static str,
        expected: &'static str,
        found: &'static str,
    },
    #[error("constructor index {index} out of range for {ty}")]
    TagOutOfRange { ty: String, index: i64 },
    #[error("{what} expects {expected} fields, found {actual}")]
    ArityMismatch {
        what: String,
        expected: usize,
        actual: usize,
    },
    #[error("immediate {0} is not a boolean")]
    BoolOutOfRange(i64),
    #[error("immediate {value} is not a valid {descriptor}")]
    ImmediateOutOfRange { descriptor: &'static str, value: i64 },
    #[error("unknown type id {0}")]
    UnknownTypeId(TypeId),
}

/// Interprets `value` as a value of type `ty`.
///
/// Fails rather than guessing whenever the value's shape does not fit the
/// descriptor. An abstract opaque value is accepted under any descriptor;
/// a function opaque only under `Func`.
pub fn decode(value: &EncodedValue, ty: TypeId, table: &TypeTable) -> Result<TypedValue, DecodeError> {
    let desc = table.get(ty).ok_or(DecodeError::UnknownTypeId(ty))?;
    if let EncodedValue::Opaque(OpaqueKind::Abstract) = value {
        return Ok(TypedValue::Opaque(OpaqueKind::Abstract));
    }
    let mismatch = |expected: &'static str| DecodeError::KindMismatch {
        descriptor: desc.kind_name(),
        expected,
        found: value.kind_name(),
    };
    match desc {
        TypeDescriptor::Unit => match value {
            EncodedValue::Immediate(0) => Ok(TypedValue::Unit),
            EncodedValue::Immediate(n) => Err(DecodeError::ImmediateOutOfRange {
                descriptor: "unit",
                value: *n,
            }),
            _ => Err(mismatch("immediate")),
        },
        TypeDescriptor::Bool => match value {
            EncodedValue::Immediate(0) => Ok(TypedValue::Bool(false)),
            EncodedValue::Immediate(1) => Ok(TypedValue::Bool(true)),
            EncodedValue::Immediate(n) => Err(DecodeError::BoolOutOfRange(*n)),
            _ => Err(mismatch("immediate")),
        },
        TypeDescriptor::Int => match value {
            EncodedValue::Immediate(n) => Ok(TypedValue::Int(*n)),
            _ => Err(mismatch("immediate")),
        },
        TypeDescriptor::Char => match value {
            EncodedValue::Immediate(n) => {
                u8::try_from(*n)
                    .map(TypedValue::Char)
                    .map_err(|_| DecodeError::ImmediateOutOfRange {
                        descriptor: "char",
                        value: *n,
                    })
            }
            _ => Err(mismatch("immediate")),
        },
        TypeDescriptor::Float => match value {
            EncodedValue::Float64(x) => Ok(TypedValue::Float(*x)),
            _ => Err(mismatch("float")),
        },
        TypeDescriptor::String => match value {
            EncodedValue::Str(s) => Ok(TypedValue::String(s.clone())),
            _ => Err(mismatch("string")),
        },
        TypeDescriptor::Func => match value {
            EncodedValue::Opaque(kind) => Ok(TypedValue::Opaque(*kind)),
            _ => Err(mismatch("opaque")),
        },
        TypeDescriptor::Tuple { elems } => {
            let fields = plain_block(value, "tuple", elems.len(), &mismatch)?;
            decode_fields(fields, elems.iter().copied(), table).map(TypedValue::Tuple)
        }
        TypeDescriptor::Record { name, fields: decl } => {
            let fields = plain_block(value, name, decl.len(), &mismatch)?;
            let values = decode_fields(fields, decl.iter().map(|f| f.ty), table)?;
            Ok(TypedValue::Record(
                decl.iter().map(|f| f.name.clone()).zip(values).collect(),
            ))
        }
        TypeDescriptor::List { elem } => decode_list(value, *elem, table),
        TypeDescriptor::Variant { name, ctors } => {
            let (repr, args) = match value {
                EncodedValue::Immediate(k) => (CtorRepr::Immediate(*k), &[][..]),
                EncodedValue::Block { tag, fields } => (CtorRepr::Block(*tag), &fields[..]),
                _ => return Err(mismatch("immediate or block")),
            };
            let ctor = ctor_by_repr(ctors, repr).ok_or_else(|| DecodeError::TagOutOfRange {
                ty: name.clone(),
                index: match repr {
                    CtorRepr::Immediate(k) => k,
                    CtorRepr::Block(t) => t as i64,
                },
            })?;
            if ctor.args.len() != args.len() {
                return Err(DecodeError::ArityMismatch {
                    what: ctor.name.clone(),
                    expected: ctor.args.len(),
                    actual: args.len(),
                });
            }
            let values = decode_fields(args, ctor.args.iter().copied(), table)?;
            Ok(TypedValue::Ctor(ctor.name.clone(), values))
        }
    }
}

/// Tuples and records are tag-0 blocks of a fixed size.
fn plain_block<'v>(
    value: &'v EncodedValue,
    what: &str,
    arity: usize,
    mismatch: &dyn Fn(&'static str) -> DecodeError,
) -> Result<&'v [EncodedValue], DecodeError> {
    match value {
        EncodedValue::Block { tag: 0, fields } if fields.len() == arity => Ok(fields),
        EncodedValue::Block { tag: 0, fields } => Err(DecodeError::ArityMismatch {
            what: what.to_string(),
            expected: arity,
            actual: fields.len(),
        }),
        EncodedValue::Block { tag, .. } => Err(DecodeError::TagOutOfRange {
            ty: what.to_string(),
            index: *tag as i64,
        }),
        _ => Err(mismatch("block")),
    }
}

fn decode_fields(
    fields: &[EncodedValue],
    tys: impl Iterator<Item = TypeId>,
    table: &TypeTable,
) -> Result<Vec<TypedValue>, DecodeError> {
    fields.iter().zip(tys).map(|(v, t)| decode(v, t, table)).collect()
}

fn decode_list(value: &EncodedValue, elem: TypeId, table: &TypeTable) -> Result<TypedValue, DecodeError> {
    let mut items = Vec::new();
    let mut cell = value;
    loop {
        match cell {
            EncodedValue::Immediate(0) => return Ok(TypedValue::List(items)),
            EncodedValue::Immediate(k) => {
                return Err(DecodeError::TagOutOfRange {
                    ty: "list".into(),
                    index: *k,
                })
            }
            EncodedValue::Block { tag: 0, fields } if fields.len() == 2 => {
                items.push(decode(&fields[0], elem, table)?);
                cell = &fields[1];
            }
            EncodedValue::Block { tag: 0, fields } => {
                return Err(DecodeError::ArityMismatch {
                    what: "list cell".into(),
                    expected: 2,
                    actual: fields.len(),
                })
            }
            EncodedValue::Block { tag, .. } => {
                return Err(DecodeError::TagOutOfRange {
                    ty: "list".into(),
                    index: *tag as i64,
                })
            }
            other => {
                return Err(DecodeError::KindMismatch {
                    descriptor: "list",
                    expected: "immediate or block",
                    found: other.kind_name(),
                })
            }
        }
    }
}
