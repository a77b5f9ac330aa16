//! Canonical JSON text: lexicographically sorted keys, floats written with
//! 17 significant digits, newline-terminated documents.
//!
//! Every float is emitted with a decimal point or exponent so that it parses
//! back as a float, and 17 significant digits are enough for an exact round
//! trip of any finite `f64`.

use serde::Serialize;
use serde_json::{Number, Value};

/// Formats a finite float like C's `%.17g`, forcing a float marker.
pub fn format_f64(x: f64) -> String {
    debug_assert!(x.is_finite(), "non-finite float in canonical output");
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0" } else { "0.0" }.to_string();
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let s = trim_fraction(&format!("{:.*}", (16 - exp) as usize, x));
        if s.contains('.') {
            s
        } else {
            s + ".0"
        }
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn write_number(out: &mut String, n: &Number) {
    if let Some(u) = n.as_u64() {
        out.push_str(&u.to_string());
    } else if let Some(i) = n.as_i64() {
        out.push_str(&i.to_string());
    } else {
        out.push_str(&format_f64(n.as_f64().expect("float number")));
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(out: &mut String, v: &Value, indent: Option<usize>, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escape")),
        Value::Array(items) => {
            // Arrays of scalars stay on one line even in pretty mode.
            let inline = indent.is_none() || items.iter().all(is_scalar);
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if inline && indent.is_some() {
                        out.push(' ');
                    }
                }
                if !inline {
                    newline(out, indent, level + 1);
                }
                write_value(out, item, indent, level + 1);
            }
            if !inline && !items.is_empty() {
                newline(out, indent, level);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, indent, level + 1);
                out.push_str(&serde_json::to_string(k).expect("key escape"));
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                write_value(out, &map[k.as_str()], indent, level + 1);
            }
            if !keys.is_empty() {
                newline(out, indent, level);
            }
            out.push('}');
        }
    }
}

fn newline(out: &mut String, indent: Option<usize>, level: usize) {
    if let Some(width) = indent {
        out.push('\n');
        out.extend(std::iter::repeat_n(' ', width * level));
    }
}

/// Single-line canonical text, without trailing newline.
pub fn to_line(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, None, 0);
    out
}

/// Indented canonical document with trailing newline.
pub fn to_document(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, Some(2), 0);
    out.push('\n');
    out
}

pub fn value_of<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("in-memory serialization cannot fail")
}
