use thiserror::Error;

use super::types::{ctor_repr, CtorRepr, TypeDescriptor, TypeId, TypeTable};
use super::{EncodedValue, TypedValue};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("unknown constructor {ctor:?} for type {ty}")]
    UnknownConstructor { ty: String, ctor: String },
    #[error("constructor {ctor:?} takes {expected} arguments, got {actual}")]
    ArityMismatch {
        ctor: String,
        expected: usize,
        actual: usize,
    },
    #[error("expected a variant descriptor, got {0}")]
    NotAVariant(&'static str),
    #[error("unknown type id {0}")]
    UnknownTypeId(TypeId),
    #[error("value does not fit a {0} descriptor")]
    ShapeMismatch(&'static str),
}

/// Encodes constructor `ctor_name` of `variant` applied to `args`.
pub fn encode_constructor(
    variant: &TypeDescriptor,
    ctor_name: &str,
    args: Vec<EncodedValue>,
) -> Result<EncodedValue, EncodeError> {
    let TypeDescriptor::Variant { name, ctors } = variant else {
        return Err(EncodeError::NotAVariant(variant.kind_name()));
    };
    let index =
        ctors
            .iter()
            .position(|c| c.name == ctor_name)
            .ok_or_else(|| EncodeError::UnknownConstructor {
                ty: name.clone(),
                ctor: ctor_name.to_string(),
            })?;
    let expected = ctors[index].args.len();
    if args.len() != expected {
        return Err(EncodeError::ArityMismatch {
            ctor: ctor_name.to_string(),
            expected,
            actual: args.len(),
        });
    }
    Ok(match ctor_repr(ctors, index) {
        CtorRepr::Immediate(k) => EncodedValue::Immediate(k),
        CtorRepr::Block(tag) => EncodedValue::Block { tag, fields: args },
    })
}

/// Encodes a list as a chain of cons cells terminated by `[]`.
pub fn encode_list(items: Vec<EncodedValue>) -> EncodedValue {
    items
        .into_iter()
        .rev()
        .fold(EncodedValue::Immediate(0), |tail, head| EncodedValue::Block {
            tag: 0,
            fields: vec![head, tail],
        })
}

/// Encodes a typed value under descriptor `ty`; inverse of [`super::decode`].
pub fn encode_typed(value: &TypedValue, ty: TypeId, table: &TypeTable) -> Result<EncodedValue, EncodeError> {
    let desc = table.get(ty).ok_or(EncodeError::UnknownTypeId(ty))?;
    let mismatch = || EncodeError::ShapeMismatch(desc.kind_name());
    if let TypedValue::Opaque(kind) = value {
        return Ok(EncodedValue::Opaque(*kind));
    }
    Ok(match (desc, value) {
        (TypeDescriptor::Unit, TypedValue::Unit) => EncodedValue::UNIT,
        (TypeDescriptor::Bool, TypedValue::Bool(b)) => EncodedValue::Immediate(*b as i64),
        (TypeDescriptor::Int, TypedValue::Int(n)) => EncodedValue::Immediate(*n),
        (TypeDescriptor::Char, TypedValue::Char(c)) => EncodedValue::Immediate(*c as i64),
        (TypeDescriptor::Float, TypedValue::Float(x)) => EncodedValue::Float64(*x),
        (TypeDescriptor::String, TypedValue::String(s)) => EncodedValue::Str(s.clone()),
        (TypeDescriptor::Tuple { elems }, TypedValue::Tuple(vs)) if elems.len() == vs.len() => {
            EncodedValue::Block {
                tag: 0,
                fields: encode_all(vs, elems, table)?,
            }
        }
        (TypeDescriptor::List { elem }, TypedValue::List(vs)) => encode_list(
            vs.iter()
                .map(|v| encode_typed(v, *elem, table))
                .collect::<Result<_, _>>()?,
        ),
        (TypeDescriptor::Record { fields, .. }, TypedValue::Record(vs))
            if fields.len() == vs.len() && fields.iter().zip(vs).all(|(f, (n, _))| &f.name == n) =>
        {
            let values: Vec<_> = vs.iter().map(|(_, v)| v.clone()).collect();
            let tys: Vec<_> = fields.iter().map(|f| f.ty).collect();
            EncodedValue::Block {
                tag: 0,
                fields: encode_all(&values, &tys, table)?,
            }
        }
        (TypeDescriptor::Variant { ctors, .. }, TypedValue::Ctor(name, args)) => {
            let ctor = ctors.iter().find(|c| &c.name == name).ok_or_else(mismatch)?;
            if ctor.args.len() != args.len() {
                return Err(mismatch());
            }
            let encoded = encode_all(args, &ctor.args, table)?;
            encode_constructor(desc, name, encoded)?
        }
        _ => return Err(mismatch()),
    })
}

fn encode_all(
    values: &[TypedValue],
    tys: &[TypeId],
    table: &TypeTable,
) -> Result<Vec<EncodedValue>, EncodeError> {
    values
        .iter()
        .zip(tys)
        .map(|(v, t)| encode_typed(v, *t, table))
        .collect()
}
