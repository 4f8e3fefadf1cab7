//! Canonical JSON: UTF-8, LF line endings, 2-space indent, keys in
//! lexicographic order, trailing newline.

use serde::Serialize;

pub fn to_canonical_string<T: Serialize>(value: &T) -> String {
    // serde_json::Value objects are BTreeMap-backed, which sorts keys.
    let value = serde_json::to_value(value).expect("in-memory values always serialize");
    let mut out = serde_json::to_string_pretty(&value).expect("json values always serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Doc {
        zeta: u32,
        alpha: Vec<u32>,
    }

    #[test]
    fn keys_are_sorted_and_indented() {
        let s = to_canonical_string(&Doc {
            zeta: 1,
            alpha: vec![2],
        });
        assert_eq!(s, "{\n  \"alpha\": [\n    2\n  ],\n  \"zeta\": 1\n}\n");
    }
}
