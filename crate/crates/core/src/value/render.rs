use std::fmt::Write;

use super::{EncodedValue, OpaqueKind, TypedValue};

/// Renders a decoded value in source-like syntax.
pub fn render(value: &TypedValue) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

/// Renders a value in argument position (after a function or constructor
/// name), parenthesizing it when it would otherwise be ambiguous.
pub fn render_arg(value: &TypedValue) -> String {
    let mut out = String::new();
    write_arg(&mut out, value);
    out
}

/// Whether `value` must be parenthesized in argument position.
pub fn needs_parens(value: &TypedValue) -> bool {
    match value {
        TypedValue::Ctor(_, args) => !args.is_empty(),
        TypedValue::Int(n) => *n < 0,
        TypedValue::Float(x) => x.is_sign_negative() && !x.is_nan(),
        _ => false,
    }
}

fn write_arg(out: &mut String, value: &TypedValue) {
    if needs_parens(value) {
        out.push('(');
        write_value(out, value);
        out.push(')');
    } else {
        write_value(out, value);
    }
}

fn write_value(out: &mut String, value: &TypedValue) {
    match value {
        TypedValue::Unit => out.push_str("()"),
        TypedValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        TypedValue::Int(n) => {
            let _ = write!(out, "{n}");
        }
        TypedValue::Char(c) => write_char(out, *c),
        TypedValue::Float(x) => out.push_str(&format_float(*x)),
        TypedValue::String(s) => write_string(out, s),
        TypedValue::Tuple(items) => write_seq(out, "(", ", ", ")", items),
        TypedValue::List(items) => write_seq(out, "[", "; ", "]", items),
        TypedValue::Record(fields) => {
            out.push_str("{ ");
            for (i, (name, v)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                out.push_str(name);
                out.push_str(" = ");
                write_value(out, v);
            }
            out.push_str(" }");
        }
        TypedValue::Ctor(name, args) => {
            out.push_str(name);
            match args.as_slice() {
                [] => {}
                [arg] => {
                    out.push(' ');
                    write_arg(out, arg);
                }
                args => {
                    out.push(' ');
                    write_seq(out, "(", ", ", ")", args);
                }
            }
        }
        TypedValue::Opaque(kind) => out.push_str(opaque_text(*kind)),
    }
}

fn write_seq(out: &mut String, open: &str, sep: &str, close: &str, items: &[TypedValue]) {
    out.push_str(open);
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write_value(out, item);
    }
    out.push_str(close);
}

fn opaque_text(kind: OpaqueKind) -> &'static str {
    match kind {
        OpaqueKind::Function => "<fun>",
        OpaqueKind::Abstract => "<abstr>",
    }
}

/// Shortest round-trip decimal; integral values keep a trailing `.`.
fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "infinity" } else { "neg_infinity" }.into();
    }
    let s = format!("{x:?}");
    if let Some((mantissa, exp)) = s.split_once('e') {
        if exp.starts_with('-') {
            format!("{mantissa}e{exp}")
        } else {
            format!("{mantissa}e+{exp}")
        }
    } else if let Some(stripped) = s.strip_suffix(".0") {
        format!("{stripped}.")
    } else {
        s
    }
}

fn write_char(out: &mut String, c: u8) {
    out.push('\'');
    match c {
        b'\'' => out.push_str("\\'"),
        b'\\' => out.push_str("\\\\"),
        b'\n' => out.push_str("\\n"),
        b'\t' => out.push_str("\\t"),
        0x20..=0x7e => out.push(c as char),
        _ => {
            let _ = write!(out, "\\x{c:02x}");
        }
    }
    out.push('\'');
}

fn write_string(out: &mut String, bytes: &[u8]) {
    out.push('"');
    for chunk in bytes.utf8_chunks() {
        for ch in chunk.valid().chars() {
            match ch {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c if c.is_control() => {
                    let mut buf = [0u8; 4];
                    for b in c.encode_utf8(&mut buf).bytes() {
                        let _ = write!(out, "\\x{b:02x}");
                    }
                }
                c => out.push(c),
            }
        }
        for b in chunk.invalid() {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
    out.push('"');
}

/// Renders an encoded value without type information. Used only when no
/// descriptor is available; the output shows the raw representation.
pub fn render_untyped(value: &EncodedValue) -> String {
    let mut out = String::new();
    write_untyped(&mut out, value);
    out
}

fn write_untyped(out: &mut String, value: &EncodedValue) {
    match value {
        EncodedValue::Immediate(n) => {
            let _ = write!(out, "{n}");
        }
        EncodedValue::Block { tag, fields } => {
            let _ = write!(out, "<block {tag}");
            for (i, f) in fields.iter().enumerate() {
                out.push_str(if i == 0 { ": " } else { ", " });
                write_untyped(out, f);
            }
            out.push('>');
        }
        EncodedValue::Float64(x) => out.push_str(&format_float(*x)),
        EncodedValue::Str(s) => write_string(out, s),
        EncodedValue::Opaque(kind) => out.push_str(opaque_text(*kind)),
    }
}
