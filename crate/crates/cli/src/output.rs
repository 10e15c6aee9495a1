//! JSON rendering. Every number goes through [`num`], which keeps 12
//! significant digits so that reports are stable across runs.

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // no negative zero in reports
    Value::from(if rounded == 0.0 { 0.0 } else { rounded })
}

pub fn nums(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(num).collect())
}

pub fn vector(v: &DVector<f64>) -> Value {
    nums(v.iter().copied())
}

pub fn matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| nums(r.iter().copied())).collect())
}

/// One compact line, for line-oriented reports.
pub fn line(v: &Value) -> String {
    serde_json::to_string(v).expect("values always serialize")
}

/// An indented document, for single reports.
pub fn document(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("values always serialize")
}
