//! Number formatting and writers for CSV and JSON outputs.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;

/// `%.12g`-style rendering: 12 significant digits, trailing zeros trimmed.
pub fn g12(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds every number in a JSON tree to 12 significant digits.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => {
                let rounded: f64 = g12(f).parse().unwrap_or(f);
                serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
            }
            _ => Value::Number(n),
        },
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and rounded numbers, newline-terminated.
pub fn json_text(value: Value) -> String {
    let mut text = serde_json::to_string_pretty(&round_json(value)).expect("JSON values serialize");
    text.push('\n');
    text
}

/// CSV table with a header row; cells are preformatted strings.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn rows(&self) -> usize {
        self.text.lines().count() - 1
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn twelve_digits() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(-0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-0.5), "-0.5");
        assert_eq!(g12(0.1 + 0.2), "0.3");
        assert_eq!(g12(std::f64::consts::PI), "3.14159265359");
        assert_eq!(g12(1e-7), "1e-07");
        assert_eq!(g12(-2.5e-9), "-2.5e-09");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(0.00012345), "0.00012345");
        assert_eq!(g12(9.9999999999999), "10");
        assert_eq!(g12(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn json_is_rounded_and_sorted() {
        let text = json_text(json!({"b": 0.1 + 0.2, "a": [1, 2.00000000000001]}));
        assert_eq!(text, "{\n  \"a\": [\n    1,\n    2.0\n  ],\n  \"b\": 0.3\n}\n");
    }

    #[test]
    fn csv_rows() {
        let mut csv = Csv::new(&["x", "u"]);
        csv.row(&[g12(0.5), g12(-1.0)]);
        assert_eq!(csv.rows(), 1);
        assert_eq!(csv.into_string(), "x,u\n0.5,-1\n");
    }
}
