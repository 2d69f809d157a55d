//! The metadata sidecar: type descriptors plus the function and match-site
//! tables needed to interpret a binary trace.
//!
//! A schema is built once at program start with a [`SchemaBuilder`], saved
//! next to the trace as canonical JSON, and identified inside the trace
//! header by [`schema_hash`].

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{TypeDescriptor, TypeId, TypeTable, TypeTableError};

pub const SCHEMA_FORMAT_VERSION: u32 = 1;

/// Name of the variant type used to interpret raised exceptions.
pub const EXN_TYPE_NAME: &str = "exn";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FnId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl fmt::Display for FnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fn#{}", self.0)
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "site#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionInfo {
    pub fn_id: FnId,
    pub name: String,
    pub source_file: String,
    pub line: u32,
    pub arg_names: Vec<String>,
    pub arg_type_ids: Vec<TypeId>,
    pub ret_type_id: TypeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSiteInfo {
    pub site_id: SiteId,
    pub source_file: String,
    pub line: u32,
    pub scrutinee_type_id: TypeId,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("type {0} defined twice")]
    DoubleDefine(TypeId),
    #[error("type {0} was declared but never defined")]
    UndefinedAtFinalize(TypeId),
    #[error("unknown type id {0}")]
    UnknownTypeId(TypeId),
    #[error("{name}: {names} argument names but {types} argument types")]
    ArgLengthMismatch {
        name: String,
        names: usize,
        types: usize,
    },
    #[error("{0}: source line must be positive")]
    InvalidLine(String),
    #[error(transparent)]
    Types(#[from] TypeTableError),
    #[error("malformed schema: {0}")]
    MalformedSchema(String),
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: String, source: io::Error },
}

/// Single-writer registry used while the traced program starts up.
#[derive(Debug, Default)]
pub struct SchemaBuilder {
    types: Vec<Option<TypeDescriptor>>,
    functions: Vec<FunctionInfo>,
    match_sites: Vec<MatchSiteInfo>,
}

impl SchemaBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reserves the next type-id; the body is supplied later by
    /// [`define_type`](Self::define_type), so types may refer to themselves.
    pub fn declare_type(&mut self) -> TypeId {
        self.types.push(None);
        TypeId(self.types.len() as u32 - 1)
    }

    pub fn define_type(&mut self, id: TypeId, body: TypeDescriptor) -> Result<(), SchemaError> {
        match self.types.get_mut(id.index()) {
            None => Err(SchemaError::UnknownTypeId(id)),
            Some(Some(_)) => Err(SchemaError::DoubleDefine(id)),
            Some(slot) => {
                *slot = Some(body);
                Ok(())
            }
        }
    }

    /// Declares and defines a non-recursive type in one step.
    pub fn add_type(&mut self, body: TypeDescriptor) -> TypeId {
        let id = self.declare_type();
        self.types[id.index()] = Some(body);
        id
    }

    fn check_type(&self, id: TypeId) -> Result<(), SchemaError> {
        if id.index() < self.types.len() {
            Ok(())
        } else {
            Err(SchemaError::UnknownTypeId(id))
        }
    }

    pub fn register_function(
        &mut self,
        name: &str,
        source_file: &str,
        line: u32,
        arg_names: &[&str],
        arg_type_ids: &[TypeId],
        ret_type_id: TypeId,
    ) -> Result<FnId, SchemaError> {
        if arg_names.len() != arg_type_ids.len() {
            return Err(SchemaError::ArgLengthMismatch {
                name: name.to_string(),
                names: arg_names.len(),
                types: arg_type_ids.len(),
            });
        }
        if line == 0 {
            return Err(SchemaError::InvalidLine(name.to_string()));
        }
        for &t in arg_type_ids.iter().chain([&ret_type_id]) {
            self.check_type(t)?;
        }
        let fn_id = FnId(self.functions.len() as u32);
        self.functions.push(FunctionInfo {
            fn_id,
            name: name.to_string(),
            source_file: source_file.to_string(),
            line,
            arg_names: arg_names.iter().map(|s| s.to_string()).collect(),
            arg_type_ids: arg_type_ids.to_vec(),
            ret_type_id,
        });
        Ok(fn_id)
    }

    pub fn register_match_site(
        &mut self,
        source_file: &str,
        line: u32,
        scrutinee_type_id: TypeId,
    ) -> Result<SiteId, SchemaError> {
        if line == 0 {
            return Err(SchemaError::InvalidLine(format!("{source_file} match site")));
        }
        self.check_type(scrutinee_type_id)?;
        let site_id = SiteId(self.match_sites.len() as u32);
        self.match_sites.push(MatchSiteInfo {
            site_id,
            source_file: source_file.to_string(),
            line,
            scrutinee_type_id,
        });
        Ok(site_id)
    }

    pub fn finish(self) -> Result<Schema, SchemaError> {
        let types = self
            .types
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or(SchemaError::UndefinedAtFinalize(TypeId(i as u32))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Schema {
            format_version: SCHEMA_FORMAT_VERSION,
            types: TypeTable::new(types)?,
            functions: self.functions,
            match_sites: self.match_sites,
        })
    }
}

/// Finalized, immutable metadata for one trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    pub format_version: u32,
    pub types: TypeTable,
    pub functions: Vec<FunctionInfo>,
    pub match_sites: Vec<MatchSiteInfo>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    format_version: u32,
    types: Vec<TypeDescriptor>,
    functions: Vec<FunctionInfo>,
    match_sites: Vec<MatchSiteInfo>,
}

impl Schema {
    pub fn function(&self, id: FnId) -> Option<&FunctionInfo> {
        self.functions.get(id.0 as usize)
    }

    pub fn function_by_name(&self, name: &str) -> Option<&FunctionInfo> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn match_site(&self, id: SiteId) -> Option<&MatchSiteInfo> {
        self.match_sites.get(id.0 as usize)
    }

    /// Descriptor for raised exceptions, if the program registered one.
    pub fn exn_type(&self) -> Option<TypeId> {
        self.types.find_named(EXN_TYPE_NAME)
    }

    /// Sorted keys, no whitespace, arrays in id order.
    pub fn to_canonical_json(&self) -> String {
        // serde_json's default map is ordered by key, so going through a
        // Value sorts every object.
        let value = serde_json::to_value(self).expect("schema is always serializable");
        serde_json::to_string(&value).expect("value is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Schema, SchemaError> {
        let raw: RawSchema =
            serde_json::from_str(text).map_err(|e| SchemaError::MalformedSchema(e.to_string()))?;
        Schema::validate(raw)
    }

    fn validate(raw: RawSchema) -> Result<Schema, SchemaError> {
        let malformed = |msg: String| SchemaError::MalformedSchema(msg);
        if raw.format_version != SCHEMA_FORMAT_VERSION {
            return Err(malformed(format!(
                "unsupported format_version {}",
                raw.format_version
            )));
        }
        let types = TypeTable::new(raw.types).map_err(|e| malformed(e.to_string()))?;
        let known = |t: TypeId| {
            if types.contains(t) {
                Ok(())
            } else {
                Err(malformed(format!("dangling type id {t}")))
            }
        };
        for (i, f) in raw.functions.iter().enumerate() {
            if f.fn_id.0 as usize != i {
                return Err(malformed(format!("function ids not dense at index {i}")));
            }
            if f.arg_names.len() != f.arg_type_ids.len() {
                return Err(malformed(format!("{}: argument name/type count differs", f.name)));
            }
            if f.line == 0 {
                return Err(malformed(format!("{}: line must be positive", f.name)));
            }
            for &t in f.arg_type_ids.iter().chain([&f.ret_type_id]) {
                known(t)?;
            }
        }
        for (i, s) in raw.match_sites.iter().enumerate() {
            if s.site_id.0 as usize != i {
                return Err(malformed(format!("match site ids not dense at index {i}")));
            }
            if s.line == 0 {
                return Err(malformed(format!("match site {i}: line must be positive")));
            }
            known(s.scrutinee_type_id)?;
        }
        Ok(Schema {
            format_version: raw.format_version,
            types,
            functions: raw.functions,
            match_sites: raw.match_sites,
        })
    }
}

/// FNV-1a 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET_BASIS, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

/// Identity of a schema as recorded in trace headers.
pub fn schema_hash(schema: &Schema) -> u64 {
    fnv1a64(schema.to_canonical_json().as_bytes())
}

pub fn save_schema(schema: &Schema, path: &Path) -> Result<(), SchemaError> {
    fs::write(path, schema.to_canonical_json()).map_err(|source| SchemaError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_schema(path: &Path) -> Result<Schema, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::IoFailure {
        path: path.display().to_string(),
        source,
    })?;
    Schema::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rose_tree() -> Schema {
        let mut b = SchemaBuilder::new();
        let int = b.add_type(TypeDescriptor::Int);
        let tree = b.declare_type();
        let trees = b.add_type(TypeDescriptor::List { elem: tree });
        b.define_type(
            tree,
            TypeDescriptor::variant("tree", vec![("Leaf", vec![int]), ("Node", vec![trees])]),
        )
        .unwrap();
        b.register_function("depth", "lib.ml", 1, &["t"], &[tree], int)
            .unwrap();
        b.register_match_site("lib.ml", 2, tree).unwrap();
        b.finish().unwrap()
    }

    #[test]
    fn two_phase_definition() {
        let mut b = SchemaBuilder::new();
        let id = b.declare_type();
        b.define_type(id, TypeDescriptor::Int).unwrap();
        assert!(matches!(
            b.define_type(id, TypeDescriptor::Int),
            Err(SchemaError::DoubleDefine(_))
        ));
        let s = b.finish().unwrap();
        assert_eq!(s.types.get(TypeId(0)), Some(&TypeDescriptor::Int));

        let mut b = SchemaBuilder::new();
        b.declare_type();
        assert!(matches!(
            b.finish(),
            Err(SchemaError::UndefinedAtFinalize(TypeId(0)))
        ));
    }

    #[test]
    fn function_registration() {
        let mut b = SchemaBuilder::new();
        let int = b.add_type(TypeDescriptor::Int);
        assert_eq!(
            b.register_function("f", "a.ml", 1, &["x"], &[int], int).unwrap(),
            FnId(0)
        );
        assert_eq!(
            b.register_function("g", "a.ml", 2, &[], &[], int).unwrap(),
            FnId(1)
        );
        assert!(matches!(
            b.register_function("h", "a.ml", 3, &["x", "y"], &[int], int),
            Err(SchemaError::ArgLengthMismatch { .. })
        ));
        assert!(matches!(
            b.register_function("h", "a.ml", 3, &["x"], &[TypeId(7)], int),
            Err(SchemaError::UnknownTypeId(TypeId(7)))
        ));
    }

    #[test]
    fn canonical_round_trip() {
        let s = rose_tree();
        let json = s.to_canonical_json();
        assert!(json.starts_with(r#"{"format_version":1,"functions":"#));
        assert!(!json.contains(' '));
        let back = Schema::from_json(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_canonical_json(), json);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn load_rejects_bad_documents() {
        let s = rose_tree();
        let json = s.to_canonical_json();
        let dangling = json.replace(r#""ret_type_id":0"#, r#""ret_type_id":9"#);
        assert!(matches!(
            Schema::from_json(&dangling),
            Err(SchemaError::MalformedSchema(_))
        ));
        let sparse = json.replace(r#""fn_id":0"#, r#""fn_id":3"#);
        assert!(matches!(
            Schema::from_json(&sparse),
            Err(SchemaError::MalformedSchema(_))
        ));
        assert!(matches!(
            Schema::from_json("{"),
            Err(SchemaError::MalformedSchema(_))
        ));
        let missing = load_schema(Path::new("/nonexistent/x.schema.json"));
        assert!(matches!(missing, Err(SchemaError::IoFailure { .. })));
    }

    #[test]
    fn hash_tracks_every_change() {
        let base = rose_tree();
        let h = schema_hash(&base);
        let mut renamed = base.clone();
        renamed.functions[0].name = "depth2".into();
        let mut moved = base.clone();
        moved.match_sites[0].line = 3;
        let mut retyped = base.clone();
        retyped.functions[0].ret_type_id = TypeId(1);
        for other in [renamed, moved, retyped] {
            assert_ne!(schema_hash(&other), h);
        }
    }
}
