//! Seeded generators shared by the integration tests.
#![allow(dead_code)]

use otr_core::value::{EncodedValue, OpaqueKind, TypeDescriptor, TypeId, TypeTable, TypedValue};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub const INT: TypeId = TypeId(2);

/// A random table: all scalar kinds, a recursive rose tree
/// `Rose of int * rose list | Empty`, then random composites that refer only
/// to earlier entries. Returns the table and the rose tree's id.
pub fn gen_table(rng: &mut impl Rng) -> (TypeTable, TypeId) {
    let mut types = vec![
        TypeDescriptor::Unit,
        TypeDescriptor::Bool,
        TypeDescriptor::Int,
        TypeDescriptor::Char,
        TypeDescriptor::Float,
        TypeDescriptor::String,
        TypeDescriptor::Func,
    ];
    let rose = TypeId(types.len() as u32);
    let rose_list = TypeId(rose.0 + 1);
    types.push(TypeDescriptor::variant(
        "rose",
        vec![("Empty", vec![]), ("Rose", vec![INT, rose_list])],
    ));
    types.push(TypeDescriptor::List { elem: rose });
    for k in 0..rng.random_range(2..8) {
        let n = types.len() as u32;
        let desc = match rng.random_range(0..4) {
            0 => TypeDescriptor::Tuple {
                elems: (0..rng.random_range(2..4))
                    .map(|_| TypeId(rng.random_range(0..n)))
                    .collect(),
            },
            1 => TypeDescriptor::List {
                elem: TypeId(rng.random_range(0..n)),
            },
            2 => {
                let fields: Vec<(String, TypeId)> = (0..rng.random_range(1..4))
                    .map(|i| (format!("f{i}"), TypeId(rng.random_range(0..n))))
                    .collect();
                TypeDescriptor::record(
                    format!("r{k}"),
                    fields.iter().map(|(name, t)| (name.as_str(), *t)).collect(),
                )
            }
            _ => {
                let ctors: Vec<(String, Vec<TypeId>)> = (0..rng.random_range(1..5))
                    .map(|i| {
                        let args = (0..rng.random_range(0..3))
                            .map(|_| TypeId(rng.random_range(0..n)))
                            .collect();
                        (format!("C{i}"), args)
                    })
                    .collect();
                TypeDescriptor::variant(
                    format!("v{k}"),
                    ctors
                        .iter()
                        .map(|(name, args)| (name.as_str(), args.clone()))
                        .collect(),
                )
            }
        };
        types.push(desc);
    }
    (TypeTable::new(types).expect("generated table is valid"), rose)
}

pub fn gen_float(rng: &mut impl Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => [
            0.0,
            -0.0,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::MIN_POSITIVE,
            5e-324,
        ][rng.random_range(0..6)],
        1 => rng.random_range(-1000..1000) as f64,
        _ => loop {
            let x = f64::from_bits(rng.random());
            if !x.is_nan() {
                break x;
            }
        },
    }
}

pub fn gen_int(rng: &mut impl Rng) -> i64 {
    match rng.random_range(0..3) {
        0 => rng.random_range(-3..4),
        1 => rng.random(),
        _ => [i64::MIN, i64::MAX, -1, 0][rng.random_range(0..4)],
    }
}

/// A random inhabitant of `ty`. `depth` bounds list lengths and recursion.
pub fn gen_value(rng: &mut impl Rng, table: &TypeTable, ty: TypeId, depth: usize) -> TypedValue {
    if rng.random_ratio(1, 100) {
        return TypedValue::Opaque(OpaqueKind::Abstract);
    }
    match table.get(ty).expect("id in table") {
        TypeDescriptor::Unit => TypedValue::Unit,
        TypeDescriptor::Bool => TypedValue::Bool(rng.random()),
        TypeDescriptor::Int => TypedValue::Int(gen_int(rng)),
        TypeDescriptor::Char => TypedValue::Char(rng.random()),
        TypeDescriptor::Float => TypedValue::Float(gen_float(rng)),
        TypeDescriptor::String => {
            TypedValue::String((0..rng.random_range(0..8)).map(|_| rng.random()).collect())
        }
        TypeDescriptor::Func => TypedValue::Opaque(if rng.random() {
            OpaqueKind::Function
        } else {
            OpaqueKind::Abstract
        }),
        TypeDescriptor::Tuple { elems } => {
            TypedValue::Tuple(elems.iter().map(|t| gen_value(rng, table, *t, depth)).collect())
        }
        TypeDescriptor::List { elem } => {
            let len = if depth == 0 { 0 } else { rng.random_range(0..4) };
            TypedValue::List(
                (0..len)
                    .map(|_| gen_value(rng, table, *elem, depth - 1))
                    .collect(),
            )
        }
        TypeDescriptor::Record { fields, .. } => TypedValue::Record(
            fields
                .iter()
                .map(|f| (f.name.clone(), gen_value(rng, table, f.ty, depth)))
                .collect(),
        ),
        TypeDescriptor::Variant { ctors, .. } => {
            let c = &ctors[rng.random_range(0..ctors.len())];
            TypedValue::Ctor(
                c.name.clone(),
                c.args.iter().map(|t| gen_value(rng, table, *t, depth)).collect(),
            )
        }
    }
}

/// A rose tree whose leftmost spine reaches exactly `depth` levels of `Rose`.
pub fn deep_rose(rng: &mut impl Rng, depth: usize) -> TypedValue {
    if depth == 0 {
        return TypedValue::Ctor("Empty".into(), vec![]);
    }
    let mut children = vec![deep_rose(rng, depth - 1)];
    for _ in 0..rng.random_range(0..3) {
        let d = rng.random_range(0..depth);
        children.push(deep_rose(rng, d));
    }
    TypedValue::Ctor(
        "Rose".into(),
        vec![TypedValue::Int(gen_int(rng)), TypedValue::List(children)],
    )
}

/// Nesting depth of `Rose` constructors.
pub fn rose_depth(v: &TypedValue) -> usize {
    match v {
        TypedValue::Ctor(name, args) if name == "Rose" => match &args[1] {
            TypedValue::List(children) => 1 + children.iter().map(rose_depth).max().unwrap_or(0),
            _ => 1,
        },
        _ => 0,
    }
}

/// Structural equality with floats compared bit for bit.
pub fn same(a: &TypedValue, b: &TypedValue) -> bool {
    use TypedValue as T;
    let all = |x: &[T], y: &[T]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| same(p, q));
    match (a, b) {
        (T::Float(x), T::Float(y)) => x.to_bits() == y.to_bits(),
        (T::Tuple(x), T::Tuple(y)) | (T::List(x), T::List(y)) => all(x, y),
        (T::Ctor(n, x), T::Ctor(m, y)) => n == m && all(x, y),
        (T::Record(x), T::Record(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|((n, p), (m, q))| n == m && same(p, q))
        }
        _ => a == b,
    }
}

/// An arbitrary encoded value, not necessarily well-typed.
pub fn gen_encoded(rng: &mut impl Rng, depth: usize) -> EncodedValue {
    let top = if depth == 0 { 4 } else { 5 };
    match rng.random_range(0..top) {
        0 => EncodedValue::Immediate(gen_int(rng)),
        1 => EncodedValue::Float64(f64::from_bits(rng.random())),
        2 => EncodedValue::Str((0..rng.random_range(0..4)).map(|_| rng.random()).collect()),
        3 => EncodedValue::Opaque(if rng.random() {
            OpaqueKind::Function
        } else {
            OpaqueKind::Abstract
        }),
        _ => EncodedValue::Block {
            tag: rng.random_range(0..5),
            fields: (0..rng.random_range(0..4))
                .map(|_| gen_encoded(rng, depth - 1))
                .collect(),
        },
    }
}

/// Three int functions of arity 0, 1 and 2 and one match site on int.
pub fn stream_schema() -> otr_core::schema::Schema {
    let mut b = otr_core::schema::SchemaBuilder::new();
    let int = b.add_type(TypeDescriptor::Int);
    b.register_function("f0", "gen.ml", 1, &[], &[], int).unwrap();
    b.register_function("f1", "gen.ml", 2, &["a"], &[int], int)
        .unwrap();
    b.register_function("f2", "gen.ml", 3, &["a", "b"], &[int, int], int)
        .unwrap();
    b.register_match_site("gen.ml", 4, int).unwrap();
    b.finish().unwrap()
}

/// One step of a well-nested program against [`stream_schema`].
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Call(u32, Vec<i64>),
    Return(i64),
    Raise(i64),
    Match(i64),
}

/// A random legal sequence of at most `max_len` ops. With `close_all`, every
/// call is closed at the end; otherwise some may be left open.
pub fn gen_ops(rng: &mut impl Rng, max_len: usize, close_all: bool) -> Vec<Op> {
    let mut ops = Vec::new();
    let mut depth = 0usize;
    for _ in 0..rng.random_range(0..=max_len) {
        let op = match rng.random_range(0..4) {
            0 | 1 if depth < 12 => {
                let f = rng.random_range(0..3u32);
                depth += 1;
                Op::Call(f, (0..f).map(|_| gen_int(rng)).collect())
            }
            2 if depth > 0 => Op::Match(gen_int(rng)),
            _ if depth > 0 => {
                depth -= 1;
                if rng.random_ratio(1, 4) {
                    Op::Raise(gen_int(rng))
                } else {
                    Op::Return(gen_int(rng))
                }
            }
            _ => {
                depth += 1;
                Op::Call(0, vec![])
            }
        };
        ops.push(op);
    }
    if close_all {
        ops.extend((0..depth).map(|_| Op::Return(0)));
    }
    ops
}

/// Events for `ops` with non-decreasing random timestamps.
pub fn ops_to_events(rng: &mut impl Rng, ops: &[Op]) -> Vec<otr_core::wire::TraceEvent> {
    use otr_core::schema::{FnId, SiteId};
    use otr_core::wire::TraceEvent;
    let mut ts = 0u64;
    ops.iter()
        .map(|op| {
            ts += rng.random_range(0..1000);
            match op {
                Op::Call(f, args) => TraceEvent::call(
                    FnId(*f),
                    args.iter().map(|a| EncodedValue::Immediate(*a)).collect(),
                    ts,
                ),
                Op::Return(v) => TraceEvent::ret(EncodedValue::Immediate(*v), ts),
                Op::Raise(v) => TraceEvent::raise(EncodedValue::Immediate(*v), ts),
                Op::Match(v) => TraceEvent::matched(SiteId(0), EncodedValue::Immediate(*v), ts),
            }
        })
        .collect()
}

/// Call depth after each prefix of `ops`: entry `c` is the depth after `c` ops.
pub fn depth_profile(ops: &[Op]) -> Vec<usize> {
    let mut d = 0usize;
    let mut out = vec![0];
    for op in ops {
        match op {
            Op::Call(..) => d += 1,
            Op::Return(_) | Op::Raise(_) => d -= 1,
            Op::Match(_) => {}
        }
        out.push(d);
    }
    out
}
