//! JSON file formats for matrices, block matrices and linear maps.
//!
//! A matrix is `{"rows": r, "cols": c, "data": [[re, im], ...]}` in row-major
//! order. Block matrices add `outer_dim`, `inner_dim` and `factor_order`; maps
//! add `in_dim` and `out_dim` next to the Choi matrix fields.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::block::{BlockMatrix, FactorOrder};
use crate::cp::LinearMap;
use crate::error::{Error, Result};
use crate::extension::{SubspaceBasis, SubspaceMap};
use crate::linalg::{cx, CMatrix};

/// Parses JSON text; syntax errors carry `source:line:column`.
pub fn parse(text: &str, source: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        Error::format(
            format!("{source}:{}:{}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

pub fn read_value(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    parse(&text, &path.display().to_string())
}

/// Serialized form with a trailing newline; identical inputs give identical bytes.
pub fn to_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

pub fn write_value(path: &Path, v: &Value) -> Result<()> {
    std::fs::write(path, to_text(v))?;
    Ok(())
}

struct Cursor<'a> {
    source: &'a str,
}

impl Cursor<'_> {
    fn err(&self, path: &str, message: impl Into<String>) -> Error {
        Error::format(format!("{}: {path}", self.source), message)
    }

    fn object<'v>(&self, v: &'v Value, path: &str) -> Result<&'v Map<String, Value>> {
        v.as_object()
            .ok_or_else(|| self.err(path, "expected an object"))
    }

    fn field<'v>(&self, obj: &'v Map<String, Value>, path: &str, key: &str) -> Result<&'v Value> {
        obj.get(key)
            .ok_or_else(|| self.err(path, format!("missing field `{key}`")))
    }

    fn dim(&self, obj: &Map<String, Value>, path: &str, key: &str) -> Result<usize> {
        let v = self.field(obj, path, key)?;
        v.as_u64()
            .filter(|&d| d > 0)
            .map(|d| d as usize)
            .ok_or_else(|| self.err(&format!("{path}.{key}"), "expected a positive integer"))
    }

    fn number(&self, v: &Value, path: &str) -> Result<f64> {
        v.as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.err(path, "expected a finite number"))
    }

    fn matrix(&self, obj: &Map<String, Value>, path: &str) -> Result<CMatrix> {
        let rows = self.dim(obj, path, "rows")?;
        let cols = self.dim(obj, path, "cols")?;
        let dpath = format!("{path}.data");
        let data = self
            .field(obj, path, "data")?
            .as_array()
            .ok_or_else(|| self.err(&dpath, "expected an array"))?;
        if data.len() != rows * cols {
            return Err(self.err(
                &dpath,
                format!("{} entries for a {rows}x{cols} matrix", data.len()),
            ));
        }
        let mut m = CMatrix::zeros(rows, cols);
        for (idx, entry) in data.iter().enumerate() {
            let epath = format!("{dpath}[{idx}]");
            let pair = entry
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| self.err(&epath, "expected a [re, im] pair"))?;
            let re = self.number(&pair[0], &format!("{epath}[0]"))?;
            let im = self.number(&pair[1], &format!("{epath}[1]"))?;
            m[(idx / cols, idx % cols)] = cx(re, im);
        }
        Ok(m)
    }
}

fn matrix_fields(m: &CMatrix) -> Map<String, Value> {
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            data.push(json!([z.re, z.im]));
        }
    }
    let mut obj = Map::new();
    obj.insert("rows".into(), json!(m.nrows()));
    obj.insert("cols".into(), json!(m.ncols()));
    obj.insert("data".into(), Value::Array(data));
    obj
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Object(matrix_fields(m))
}

pub fn matrix_from_json(v: &Value, source: &str) -> Result<CMatrix> {
    let c = Cursor { source };
    let obj = c.object(v, "$")?;
    c.matrix(obj, "$")
}

pub fn block_to_json(x: &BlockMatrix) -> Value {
    let mut obj = Map::new();
    obj.insert("outer_dim".into(), json!(x.outer_dim()));
    obj.insert("inner_dim".into(), json!(x.inner_dim()));
    obj.insert("factor_order".into(), json!(x.order()));
    obj.extend(matrix_fields(x.body()));
    Value::Object(obj)
}

pub fn block_from_json(v: &Value, source: &str) -> Result<BlockMatrix> {
    let c = Cursor { source };
    let obj = c.object(v, "$")?;
    let outer = c.dim(obj, "$", "outer_dim")?;
    let inner = c.dim(obj, "$", "inner_dim")?;
    let order = match obj.get("factor_order") {
        None => FactorOrder::OuterInner,
        Some(o) => serde_json::from_value(o.clone()).map_err(|_| {
            c.err(
                "$.factor_order",
                "expected \"outer_inner\" or \"inner_outer\"",
            )
        })?,
    };
    let body = c.matrix(obj, "$")?;
    BlockMatrix::with_order(outer, inner, body, order).map_err(|e| c.err("$", e.to_string()))
}

pub fn map_to_json(u: &LinearMap) -> Value {
    let mut obj = Map::new();
    obj.insert("in_dim".into(), json!(u.in_dim()));
    obj.insert("out_dim".into(), json!(u.out_dim()));
    obj.extend(matrix_fields(u.choi()));
    Value::Object(obj)
}

pub fn map_from_json(v: &Value, source: &str) -> Result<LinearMap> {
    let c = Cursor { source };
    let obj = c.object(v, "$")?;
    let n = c.dim(obj, "$", "in_dim")?;
    let m = c.dim(obj, "$", "out_dim")?;
    let choi = c.matrix(obj, "$")?;
    LinearMap::from_choi(n, m, choi).map_err(|e| c.err("$", e.to_string()))
}

/// Reads a list of matrices stored under `key` as matrix objects.
pub fn matrices_from_json(v: &Value, key: &str, source: &str) -> Result<Vec<CMatrix>> {
    let c = Cursor { source };
    let obj = c.object(v, "$")?;
    let path = format!("$.{key}");
    let list = c
        .field(obj, "$", key)?
        .as_array()
        .ok_or_else(|| c.err(&path, "expected an array"))?;
    list.iter()
        .enumerate()
        .map(|(i, item)| {
            let ipath = format!("{path}[{i}]");
            let o = c.object(item, &ipath)?;
            c.matrix(o, &ipath)
        })
        .collect()
}

/// `{"ambient": n, "basis": [matrix, ...], "values": [matrix, ...]}`.
pub fn subspace_map_to_json(f: &SubspaceMap) -> Value {
    json!({
        "ambient": f.basis.ambient(),
        "basis": f.basis.basis().iter().map(matrix_to_json).collect::<Vec<_>>(),
        "values": f.values.iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

pub fn subspace_map_from_json(v: &Value, source: &str) -> Result<SubspaceMap> {
    let c = Cursor { source };
    let obj = c.object(v, "$")?;
    let n = c.dim(obj, "$", "ambient")?;
    let basis = matrices_from_json(v, "basis", source)?;
    let values = matrices_from_json(v, "values", source)?;
    let basis = SubspaceBasis::new(n, basis).map_err(|e| c.err("$.basis", e.to_string()))?;
    SubspaceMap::new(basis, values).map_err(|e| c.err("$.values", e.to_string()))
}

pub fn read_subspace_map(path: &Path) -> Result<SubspaceMap> {
    subspace_map_from_json(&read_value(path)?, &path.display().to_string())
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    matrix_from_json(&read_value(path)?, &path.display().to_string())
}

pub fn read_block(path: &Path) -> Result<BlockMatrix> {
    block_from_json(&read_value(path)?, &path.display().to_string())
}

pub fn read_map(path: &Path) -> Result<LinearMap> {
    map_from_json(&read_value(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_block, random_map, seeded};

    #[test]
    fn matrix_round_trip_is_exact() {
        let mut rng = seeded(3);
        let x = random_block(&mut rng, 2, 3);
        let text = to_text(&block_to_json(&x));
        let back = block_from_json(&parse(&text, "mem").unwrap(), "mem").unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn map_round_trip_is_exact() {
        let mut rng = seeded(4);
        let u = random_map(&mut rng, 2, 3);
        let text = to_text(&map_to_json(&u));
        let back = map_from_json(&parse(&text, "mem").unwrap(), "mem").unwrap();
        assert_eq!(back.choi(), u.choi());
        assert_eq!((back.in_dim(), back.out_dim()), (2, 3));
    }

    #[test]
    fn subspace_map_round_trip() {
        let mut rng = seeded(5);
        let u = random_map(&mut rng, 2, 2);
        let f = SubspaceMap::restrict(&u, SubspaceBasis::upper_triangular(2)).unwrap();
        let text = to_text(&subspace_map_to_json(&f));
        let back = subspace_map_from_json(&parse(&text, "mem").unwrap(), "mem").unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.basis.basis(), f.basis.basis());
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let err = parse("{\n  \"rows\": 1,\n  oops\n}", "f.json").unwrap_err();
        assert!(err.to_string().starts_with("f.json:3:"), "{err}");
    }

    #[test]
    fn bad_entry_reports_its_path() {
        let v = parse(r#"{"rows":1,"cols":2,"data":[[1,0],[2]]}"#, "f").unwrap();
        let err = matrix_from_json(&v, "f").unwrap_err();
        assert!(err.to_string().contains("$.data[1]"), "{err}");
    }

    #[test]
    fn wrong_entry_count_is_rejected() {
        let v = parse(r#"{"rows":2,"cols":2,"data":[[1,0]]}"#, "f").unwrap();
        assert!(matrix_from_json(&v, "f").is_err());
    }

    #[test]
    fn block_dimensions_must_match_body() {
        let v = parse(
            r#"{"outer_dim":2,"inner_dim":2,"rows":2,"cols":2,"data":[[1,0],[0,0],[0,0],[1,0]]}"#,
            "f",
        )
        .unwrap();
        assert!(block_from_json(&v, "f").is_err());
    }
}
