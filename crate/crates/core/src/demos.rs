//! Instrumented example programs.
//!
//! Each demo is a small program written against the tracer by hand, the way
//! instrumented code would look, together with an uninstrumented reference
//! that computes the expected result independently.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::schema::{save_schema, FnId, Schema, SchemaBuilder, SchemaError, SiteId};
use crate::tracer::{schema_path, trace_path, Clock, LogicalClock, MonotonicClock, TraceError, TraceSession};
use crate::value::{encode_constructor, encode_list, EncodeError, EncodedValue, TypeDescriptor};
use crate::wire::encode_value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DemoName {
    Depth,
    Ambiguity,
    Exception,
}

impl DemoName {
    pub const ALL: [DemoName; 3] = [DemoName::Depth, DemoName::Ambiguity, DemoName::Exception];

    pub fn as_str(self) -> &'static str {
        match self {
            DemoName::Depth => "depth",
            DemoName::Ambiguity => "ambiguity",
            DemoName::Exception => "exception",
        }
    }
}

impl fmt::Display for DemoName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemoName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DemoName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown demo {s:?} (expected depth, ambiguity or exception)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClockMode {
    /// Wall-clock microseconds since the session started.
    #[default]
    Monotonic,
    /// Event `i` is stamped `i`; output is byte-for-byte reproducible.
    Logical,
}

impl ClockMode {
    fn clock(self) -> Box<dyn Clock> {
        match self {
            ClockMode::Monotonic => Box::new(MonotonicClock::new()),
            ClockMode::Logical => Box::new(LogicalClock::default()),
        }
    }
}

#[derive(Debug, Error)]
pub enum DemoError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("demo self-check failed: {0}")]
    Check(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// A finished demo run held in memory.
#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub name: DemoName,
    pub schema: Schema,
    pub trace: Vec<u8>,
}

impl DemoOutput {
    /// Writes `<dir>/<name>.trace` and `<dir>/<name>.schema.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(PathBuf, PathBuf), DemoError> {
        fs::create_dir_all(dir).map_err(|source| DemoError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let tp = trace_path(dir, self.name.as_str());
        let sp = schema_path(dir, self.name.as_str());
        fs::write(&tp, &self.trace).map_err(|source| DemoError::Io {
            path: tp.clone(),
            source,
        })?;
        save_schema(&self.schema, &sp)?;
        Ok((tp, sp))
    }
}

pub fn run_demo(name: DemoName, clock: ClockMode) -> Result<DemoOutput, DemoError> {
    match name {
        DemoName::Depth => run_depth_demo(&depth_input(), clock),
        DemoName::Ambiguity => run_ambiguity_demo(clock),
        DemoName::Exception => run_exception_demo(clock),
    }
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), DemoError> {
    if cond {
        Ok(())
    } else {
        Err(DemoError::Check(what()))
    }
}

fn finish(name: DemoName, mut session: TraceSession<Vec<u8>>) -> Result<DemoOutput, DemoError> {
    session.finalize()?;
    let schema = session.schema().clone();
    Ok(DemoOutput {
        name,
        schema,
        trace: session.into_inner(),
    })
}

// ---------------------------------------------------------------------------
// depth

/// `type tree = Leaf of int | Node of tree list`
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tree {
    Leaf(i64),
    Node(Vec<Tree>),
}

/// `Node [Leaf 1; Node [Leaf 2; Leaf 3]]`
pub fn depth_input() -> Tree {
    Tree::Node(vec![
        Tree::Leaf(1),
        Tree::Node(vec![Tree::Leaf(2), Tree::Leaf(3)]),
    ])
}

/// Uninstrumented depth: leaves are 0, nodes one more than their deepest child.
pub fn reference_depth(t: &Tree) -> i64 {
    match t {
        Tree::Leaf(_) => 0,
        Tree::Node(children) => children.iter().map(reference_depth).fold(0, i64::max) + 1,
    }
}

/// Frame counts the traced depth program must produce for `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthCounts {
    pub depth_frames: usize,
    pub closure_frames: usize,
    pub matches: usize,
}

impl DepthCounts {
    /// Call, return and match per depth frame; call and return per closure.
    pub fn events(self) -> usize {
        3 * self.depth_frames + 2 * self.closure_frames
    }
}

pub fn reference_counts(t: &Tree) -> DepthCounts {
    match t {
        Tree::Leaf(_) => DepthCounts {
            depth_frames: 1,
            closure_frames: 0,
            matches: 1,
        },
        Tree::Node(children) => children.iter().map(reference_counts).fold(
            DepthCounts {
                depth_frames: 1,
                closure_frames: children.len(),
                matches: 1,
            },
            |a, b| DepthCounts {
                depth_frames: a.depth_frames + b.depth_frames,
                closure_frames: a.closure_frames + b.closure_frames,
                matches: a.matches + b.matches,
            },
        ),
    }
}

pub const DEPTH_SOURCE: &str = "\
let rec depth t =
  match t with
  | Leaf _ -> 0
  | Node sub -> List.fold_right
      (fun c t -> max (depth c) t) sub 0 + 1
";

struct DepthProgram {
    tree: TypeDescriptor,
    depth: FnId,
    step: FnId,
    site: SiteId,
}

pub fn depth_schema() -> Result<Schema, SchemaError> {
    Ok(depth_program()?.0)
}

fn depth_program() -> Result<(Schema, DepthProgram), SchemaError> {
    let mut b = SchemaBuilder::new();
    let int = b.add_type(TypeDescriptor::Int);
    let tree_id = b.declare_type();
    let tree_list = b.add_type(TypeDescriptor::List { elem: tree_id });
    let tree = TypeDescriptor::variant("tree", vec![("Leaf", vec![int]), ("Node", vec![tree_list])]);
    b.define_type(tree_id, tree.clone())?;
    let depth = b.register_function("depth", "lib.ml", 1, &["t"], &[tree_id], int)?;
    let site = b.register_match_site("lib.ml", 2, tree_id)?;
    let step = b.register_function("depth.fun", "lib.ml", 5, &["c", "t"], &[tree_id, int], int)?;
    Ok((
        b.finish()?,
        DepthProgram {
            tree,
            depth,
            step,
            site,
        },
    ))
}

impl DepthProgram {
    fn encode_tree(&self, t: &Tree) -> Result<EncodedValue, EncodeError> {
        match t {
            Tree::Leaf(n) => encode_constructor(&self.tree, "Leaf", vec![EncodedValue::Immediate(*n)]),
            Tree::Node(children) => {
                let items = children
                    .iter()
                    .map(|c| self.encode_tree(c))
                    .collect::<Result<_, _>>()?;
                encode_constructor(&self.tree, "Node", vec![encode_list(items)])
            }
        }
    }

    fn depth(&self, s: &mut TraceSession<Vec<u8>>, t: &Tree) -> Result<i64, DemoError> {
        let v = self.encode_tree(t)?;
        let frame = s.call(self.depth, vec![v.clone()])?;
        s.match_event(self.site, v)?;
        let r = match t {
            Tree::Leaf(_) => 0,
            Tree::Node(sub) => fold_right(sub, 0, |c, acc| self.step(s, c, acc))? + 1,
        };
        s.ret(frame, EncodedValue::Immediate(r))?;
        Ok(r)
    }

    fn step(&self, s: &mut TraceSession<Vec<u8>>, c: &Tree, t: i64) -> Result<i64, DemoError> {
        let frame = s.call(self.step, vec![self.encode_tree(c)?, EncodedValue::Immediate(t)])?;
        let r = self.depth(s, c)?.max(t);
        s.ret(frame, EncodedValue::Immediate(r))?;
        Ok(r)
    }
}

/// Library fold, not instrumented: visits elements last to first.
fn fold_right<T, A, E>(items: &[T], init: A, mut f: impl FnMut(&T, A) -> Result<A, E>) -> Result<A, E> {
    items.iter().rev().try_fold(init, |acc, x| f(x, acc))
}

/// Traces `depth t` and checks the result against [`reference_depth`].
pub fn run_depth_demo(t: &Tree, clock: ClockMode) -> Result<DemoOutput, DemoError> {
    let (schema, program) = depth_program()?;
    let mut session = TraceSession::new(schema, Vec::new(), clock.clock())?;
    let d = program.depth(&mut session, t)?;
    let expected = reference_depth(t);
    check(d == expected, || {
        format!("traced depth {d}, reference {expected}")
    })?;
    finish(DemoName::Depth, session)
}

// ---------------------------------------------------------------------------
// ambiguity

pub const AMBIGUITY_SOURCE: &str = "\
let find k = if k = 1 then Some 1 else None
let parse s = Ok (int_of_string s)
";

/// `find 1 = Some 1`, `parse \"1\" = Ok 1` and `find 2 = None`. The two
/// non-constant results share one runtime encoding; only the schema tells
/// them apart.
pub fn run_ambiguity_demo(clock: ClockMode) -> Result<DemoOutput, DemoError> {
    let mut b = SchemaBuilder::new();
    let int = b.add_type(TypeDescriptor::Int);
    let string = b.add_type(TypeDescriptor::String);
    let option = TypeDescriptor::variant("option", vec![("None", vec![]), ("Some", vec![int])]);
    let result = TypeDescriptor::variant("result", vec![("Ok", vec![int]), ("Error", vec![string])]);
    let option_id = b.add_type(option.clone());
    let result_id = b.add_type(result.clone());
    let find = b.register_function("find", "ambiguity.ml", 1, &["k"], &[int], option_id)?;
    let parse = b.register_function("parse", "ambiguity.ml", 2, &["s"], &[string], result_id)?;
    let schema = b.finish()?;

    let some1 = encode_constructor(&option, "Some", vec![EncodedValue::Immediate(1)])?;
    let ok1 = encode_constructor(&result, "Ok", vec![EncodedValue::Immediate(1)])?;
    let (mut a, mut c) = (Vec::new(), Vec::new());
    encode_value(&mut a, &some1);
    encode_value(&mut c, &ok1);
    check(a == c, || "Some 1 and Ok 1 encode differently".into())?;

    let mut s = TraceSession::new(schema, Vec::new(), clock.clock())?;
    let f = s.call(find, vec![EncodedValue::Immediate(1)])?;
    s.ret(f, some1)?;
    let p = s.call(parse, vec![EncodedValue::str("1")])?;
    s.ret(p, ok1)?;
    let f = s.call(find, vec![EncodedValue::Immediate(2)])?;
    s.ret(f, encode_constructor(&option, "None", vec![])?)?;
    finish(DemoName::Ambiguity, s)
}

// ---------------------------------------------------------------------------
// exception

pub const EXCEPTION_SOURCE: &str = "\
let f x = try g x with Failure _ -> -1
let g x = h x + 1
let h x = if x > 0 then failwith \"boom\" else x
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exn {
    NotFound,
    Failure(String),
    InvalidArgument(String),
}

/// Uninstrumented program: `f 3` catches the failure raised by `h`.
pub fn reference_exception(x: i64) -> i64 {
    fn h(x: i64) -> Result<i64, Exn> {
        if x > 0 {
            Err(Exn::Failure("boom".into()))
        } else {
            Ok(x)
        }
    }
    fn g(x: i64) -> Result<i64, Exn> {
        Ok(h(x)? + 1)
    }
    match g(x) {
        Err(Exn::Failure(_)) => -1,
        Err(_) => unreachable!("only Failure is raised"),
        Ok(v) => v,
    }
}

pub const EXCEPTION_INPUT: i64 = 3;

/// `f` calls `g` calls `h`; `h` raises, `g` propagates and `f` handles it.
pub fn run_exception_demo(clock: ClockMode) -> Result<DemoOutput, DemoError> {
    let mut b = SchemaBuilder::new();
    let int = b.add_type(TypeDescriptor::Int);
    let string = b.add_type(TypeDescriptor::String);
    let exn = TypeDescriptor::variant(
        crate::schema::EXN_TYPE_NAME,
        vec![
            ("Not_found", vec![]),
            ("Failure", vec![string]),
            ("Invalid_argument", vec![string]),
        ],
    );
    b.add_type(exn.clone());
    let f = b.register_function("f", "exn.ml", 1, &["x"], &[int], int)?;
    let g = b.register_function("g", "exn.ml", 2, &["x"], &[int], int)?;
    let h = b.register_function("h", "exn.ml", 3, &["x"], &[int], int)?;
    let schema = b.finish()?;

    let encode_exn = |e: &Exn| match e {
        Exn::NotFound => encode_constructor(&exn, "Not_found", vec![]),
        Exn::Failure(m) => encode_constructor(&exn, "Failure", vec![EncodedValue::str(m)]),
        Exn::InvalidArgument(m) => encode_constructor(&exn, "Invalid_argument", vec![EncodedValue::str(m)]),
    };

    let mut s = TraceSession::new(schema, Vec::new(), clock.clock())?;
    let x = EXCEPTION_INPUT;
    let imm = EncodedValue::Immediate;
    let ff = s.call(f, vec![imm(x)])?;
    let gf = s.call(g, vec![imm(x)])?;
    let hf = s.call(h, vec![imm(x)])?;
    // h x
    let hr: Result<i64, Exn> = if x > 0 {
        Err(Exn::Failure("boom".into()))
    } else {
        Ok(x)
    };
    let gr = match hr {
        Ok(v) => {
            s.ret(hf, imm(v))?;
            Ok(v + 1)
        }
        Err(e) => {
            s.raise_exit(hf, encode_exn(&e)?)?;
            Err(e)
        }
    };
    let fr = match gr {
        Ok(v) => {
            s.ret(gf, imm(v))?;
            v
        }
        Err(e) => {
            s.raise_exit(gf, encode_exn(&e)?)?;
            match e {
                Exn::Failure(_) => -1,
                other => return Err(DemoError::Check(format!("unhandled {other:?}"))),
            }
        }
    };
    s.ret(ff, imm(fr))?;
    let expected = reference_exception(x);
    check(fr == expected, || {
        format!("traced f = {fr}, reference {expected}")
    })?;
    finish(DemoName::Exception, s)
}
