//! Stable JSON reports: every document carries `schema_version` and
//! `command`, and numbers are rounded to 12 significant digits.

use serde_json::{json, Map, Value};

use crate::linalg::{PExponent, C64};
use crate::regular::RegularReport;

pub const SCHEMA_VERSION: u32 = 1;

/// `x` rounded to 12 significant digits; non-finite values become strings.
pub fn number(x: f64) -> Value {
    if x.is_nan() {
        return json!("nan");
    }
    if x.is_infinite() {
        return json!(if x > 0.0 { "inf" } else { "-inf" });
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    json!(rounded)
}

pub fn complex(z: C64) -> Value {
    json!({ "re": number(z.re), "im": number(z.im) })
}

/// Finite exponents as numbers, the endpoint as `"inf"`.
pub fn exponent(p: PExponent) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        number(p.value())
    }
}

pub fn document(command: &str, fields: Map<String, Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    obj.extend(fields);
    Value::Object(obj)
}

pub fn levels(values: &[f64]) -> Value {
    Value::Array(
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| json!({ "level": i + 1, "value": number(v) }))
            .collect(),
    )
}

/// `{p, lower, upper, levels[], certificate}` for a regular-norm bracket.
pub fn regular_fields(r: &RegularReport) -> Map<String, Value> {
    let mut obj = Map::new();
    obj.insert("p".into(), exponent(r.p));
    obj.insert("lower".into(), number(r.lower.best));
    obj.insert("upper".into(), number(r.upper.upper));
    obj.insert("levels".into(), levels(&r.lower.levels));
    obj.insert("certificate".into(), json!(r.upper.certificate.kind()));
    obj.insert("best_level".into(), json!(r.lower.best_level));
    obj.insert(
        "decomposition_value".into(),
        r.upper.decomposition_value.map_or(Value::Null, number),
    );
    obj.insert("status".into(), json!(r.upper.status));
    obj
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_twelve_significant_digits() {
        assert_eq!(number(1.0 / 3.0), json!(0.333333333333));
        assert_eq!(number(2.0), json!(2.0));
        assert_eq!(number(123456789.123456789), json!(123456789.123));
        assert_eq!(number(f64::INFINITY), json!("inf"));
    }

    #[test]
    fn exponent_endpoint_is_a_string() {
        assert_eq!(exponent(PExponent::INFINITY), json!("inf"));
        assert_eq!(exponent(PExponent::new(1.5).unwrap()), json!(1.5));
    }

    #[test]
    fn document_carries_version_and_command() {
        let d = document("x", Map::new());
        assert_eq!(d["schema_version"], json!(SCHEMA_VERSION));
        assert_eq!(d["command"], json!("x"));
    }
}
