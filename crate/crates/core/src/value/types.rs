use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a descriptor in a [`TypeTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeId(pub u32);

impl TypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: TypeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constructor {
    pub name: String,
    pub args: Vec<TypeId>,
}

impl Constructor {
    pub fn new(name: impl Into<String>, args: Vec<TypeId>) -> Self {
        Constructor {
            name: name.into(),
            args,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.args.is_empty()
    }
}

/// How to interpret one encoded value. Composite descriptors refer to
/// other entries of the owning table by id, which allows recursive types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TypeDescriptor {
    Unit,
    Bool,
    Int,
    Char,
    Float,
    String,
    Func,
    Tuple { elems: Vec<TypeId> },
    List { elem: TypeId },
    Record { name: String, fields: Vec<Field> },
    Variant { name: String, ctors: Vec<Constructor> },
}

/// Runtime representation chosen for a constructor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtorRepr {
    /// Index among the constant constructors.
    Immediate(i64),
    /// Index among the non-constant constructors.
    Block(u8),
}

impl TypeDescriptor {
    pub fn record(name: impl Into<String>, fields: Vec<(&str, TypeId)>) -> Self {
        TypeDescriptor::Record {
            name: name.into(),
            fields: fields
                .into_iter()
                .map(|(n, ty)| Field {
                    name: n.to_string(),
                    ty,
                })
                .collect(),
        }
    }

    pub fn variant(name: impl Into<String>, ctors: Vec<(&str, Vec<TypeId>)>) -> Self {
        TypeDescriptor::Variant {
            name: name.into(),
            ctors: ctors.into_iter().map(|(n, a)| Constructor::new(n, a)).collect(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TypeDescriptor::Unit => "unit",
            TypeDescriptor::Bool => "bool",
            TypeDescriptor::Int => "int",
            TypeDescriptor::Char => "char",
            TypeDescriptor::Float => "float",
            TypeDescriptor::String => "string",
            TypeDescriptor::Func => "func",
            TypeDescriptor::Tuple { .. } => "tuple",
            TypeDescriptor::List { .. } => "list",
            TypeDescriptor::Record { .. } => "record",
            TypeDescriptor::Variant { .. } => "variant",
        }
    }

    /// Every type-id this descriptor refers to.
    pub fn references(&self) -> Vec<TypeId> {
        match self {
            TypeDescriptor::Tuple { elems } => elems.clone(),
            TypeDescriptor::List { elem } => vec![*elem],
            TypeDescriptor::Record { fields, .. } => fields.iter().map(|f| f.ty).collect(),
            TypeDescriptor::Variant { ctors, .. } => {
                ctors.iter().flat_map(|c| c.args.iter().copied()).collect()
            }
            _ => Vec::new(),
        }
    }
}

/// Representation of the constructor at `index` of `ctors`: constant
/// constructors are numbered among themselves, and so are the others.
pub(crate) fn ctor_repr(ctors: &[Constructor], index: usize) -> CtorRepr {
    let constant = ctors[index].is_constant();
    let rank = ctors[..index]
        .iter()
        .filter(|c| c.is_constant() == constant)
        .count();
    if constant {
        CtorRepr::Immediate(rank as i64)
    } else {
        CtorRepr::Block(rank as u8)
    }
}

/// Inverse of [`ctor_repr`].
pub(crate) fn ctor_by_repr(ctors: &[Constructor], repr: CtorRepr) -> Option<&Constructor> {
    match repr {
        CtorRepr::Immediate(k) => {
            let k = usize::try_from(k).ok()?;
            ctors.iter().filter(|c| c.is_constant()).nth(k)
        }
        CtorRepr::Block(tag) => ctors.iter().filter(|c| !c.is_constant()).nth(tag as usize),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeTableError {
    #[error("type {owner} refers to undefined type {target}")]
    DanglingTypeId { owner: TypeId, target: TypeId },
    #[error("type {0} is a record without fields")]
    EmptyRecord(TypeId),
    #[error("type {0} is a variant without constructors")]
    EmptyVariant(TypeId),
    #[error("type {id} has duplicate field or constructor name {name:?}")]
    DuplicateName { id: TypeId, name: String },
    #[error("type {0} is a tuple with fewer than two components")]
    TupleArity(TypeId),
    #[error("type {id} has {count} non-constant constructors, at most 256 fit in a block tag")]
    TooManyConstructors { id: TypeId, count: usize },
}

/// Dense table of descriptors indexed by [`TypeId`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
#[serde(transparent)]
pub struct TypeTable {
    types: Vec<TypeDescriptor>,
}

impl TypeTable {
    pub fn new(types: Vec<TypeDescriptor>) -> Result<Self, TypeTableError> {
        let table = TypeTable { types };
        table.validate()?;
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, id: TypeId) -> Option<&TypeDescriptor> {
        self.types.get(id.index())
    }

    pub fn contains(&self, id: TypeId) -> bool {
        id.index() < self.types.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TypeId, &TypeDescriptor)> {
        self.types.iter().enumerate().map(|(i, t)| (TypeId(i as u32), t))
    }

    /// First record or variant declared under `name`.
    pub fn find_named(&self, name: &str) -> Option<TypeId> {
        self.iter().find_map(|(id, t)| match t {
            TypeDescriptor::Record { name: n, .. } | TypeDescriptor::Variant { name: n, .. } if n == name => {
                Some(id)
            }
            _ => None,
        })
    }

    fn validate(&self) -> Result<(), TypeTableError> {
        for (id, ty) in self.iter() {
            for target in ty.references() {
                if !self.contains(target) {
                    return Err(TypeTableError::DanglingTypeId { owner: id, target });
                }
            }
            match ty {
                TypeDescriptor::Tuple { elems } if elems.len() < 2 => {
                    return Err(TypeTableError::TupleArity(id))
                }
                TypeDescriptor::Record { fields, .. } => {
                    if fields.is_empty() {
                        return Err(TypeTableError::EmptyRecord(id));
                    }
                    unique_names(id, fields.iter().map(|f| f.name.as_str()))?;
                }
                TypeDescriptor::Variant { ctors, .. } => {
                    if ctors.is_empty() {
                        return Err(TypeTableError::EmptyVariant(id));
                    }
                    unique_names(id, ctors.iter().map(|c| c.name.as_str()))?;
                    let blocks = ctors.iter().filter(|c| !c.is_constant()).count();
                    if blocks > 256 {
                        return Err(TypeTableError::TooManyConstructors { id, count: blocks });
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn unique_names<'a>(id: TypeId, names: impl Iterator<Item = &'a str>) -> Result<(), TypeTableError> {
    let mut seen = HashSet::new();
    for name in names {
        if !seen.insert(name) {
            return Err(TypeTableError::DuplicateName {
                id,
                name: name.to_string(),
            });
        }
    }
    Ok(())
}
