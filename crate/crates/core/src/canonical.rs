//! Canonical JSON: object keys in byte-wise lexicographic order, no
//! insignificant whitespace, single line. The key order is enforced here
//! rather than relying on the map type behind `serde_json::Value`.

use serde::Serialize;
use serde_json::Value;

/// Serializes `value` canonically. Keys named in `leading` are emitted first
/// (in the given order) in the top-level object only.
pub fn to_vec_with_leading<T: Serialize>(
    value: &T,
    leading: &[&str],
) -> serde_json::Result<Vec<u8>> {
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    write_value(&mut out, &v, leading, None, 0);
    Ok(out)
}

pub fn to_vec<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    to_vec_with_leading(value, &[])
}

pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    // canonical output is always valid UTF-8
    to_vec(value).map(|b| String::from_utf8(b).expect("utf-8"))
}

/// Same key order as the canonical form, indented two spaces, for humans.
pub fn to_pretty_with_leading<T: Serialize>(
    value: &T,
    leading: &[&str],
) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    write_value(&mut out, &v, leading, Some(2), 0);
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("utf-8"))
}

/// Re-indents an arbitrary canonical document (top-level `format` and
/// `version` first when present).
pub fn prettify(bytes: &[u8]) -> serde_json::Result<String> {
    let v: Value = serde_json::from_slice(bytes)?;
    to_pretty_with_leading(&v, &["format", "version"])
}

fn ordered_keys<'a>(map: &'a serde_json::Map<String, Value>, leading: &[&str]) -> Vec<&'a String> {
    let mut keys: Vec<&String> = map.keys().collect();
    keys.sort_by(|a, b| {
        let rank = |k: &str| {
            leading
                .iter()
                .position(|l| *l == k)
                .unwrap_or(leading.len())
        };
        rank(a)
            .cmp(&rank(b))
            .then_with(|| a.as_bytes().cmp(b.as_bytes()))
    });
    keys
}

fn newline(out: &mut Vec<u8>, indent: Option<usize>, depth: usize) {
    if let Some(n) = indent {
        out.push(b'\n');
        out.extend(std::iter::repeat_n(b' ', n * depth));
    }
}

fn write_value(
    out: &mut Vec<u8>,
    v: &Value,
    leading: &[&str],
    indent: Option<usize>,
    depth: usize,
) {
    match v {
        Value::Object(map) => {
            if map.is_empty() {
                out.extend_from_slice(b"{}");
                return;
            }
            out.push(b'{');
            for (i, key) in ordered_keys(map, leading).into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                newline(out, indent, depth + 1);
                serde_json::to_writer(&mut *out, key).expect("string serialization");
                out.push(b':');
                if indent.is_some() {
                    out.push(b' ');
                }
                write_value(out, &map[key], &[], indent, depth + 1);
            }
            newline(out, indent, depth);
            out.push(b'}');
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.extend_from_slice(b"[]");
                return;
            }
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                newline(out, indent, depth + 1);
                write_value(out, item, &[], indent, depth + 1);
            }
            newline(out, indent, depth);
            out.push(b']');
        }
        scalar => serde_json::to_writer(&mut *out, scalar).expect("scalar serialization"),
    }
}
