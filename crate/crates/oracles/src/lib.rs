//! Independent reference values for the `wavecatch` library.
//!
//! Every case pairs JSON inputs with a value computed by [`naive`] code that
//! shares nothing with the library beyond the problem statement. The
//! [`library`] adapter evaluates the same inputs through `wavecatch`, and
//! [`write_fixtures`] refuses to write anything the two disagree on.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub mod cases;
pub mod library;
pub mod naive;
pub mod naive_sim;

/// How `actual` is judged against `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|actual − expected| ≤ tolerance` per number.
    Abs,
    /// `actual ≤ expected + tolerance`.
    UpperBound,
    /// `actual ≥ expected − tolerance`.
    LowerBound,
    /// Bitwise equality of the JSON values.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub name: String,
    pub inputs: Value,
    pub expected: Value,
    pub tolerance: f64,
    /// How `expected` was obtained.
    pub method: String,
    pub comparison: Comparison,
}

/// Recursive comparison; the error names the first offending path.
pub fn compare(expected: &Value, actual: &Value, tolerance: f64, comparison: Comparison) -> Result<(), String> {
    walk(expected, actual, tolerance, comparison, "$")
}

fn walk(e: &Value, a: &Value, tol: f64, cmp: Comparison, path: &str) -> Result<(), String> {
    match (e, a) {
        (Value::Number(x), Value::Number(y)) if cmp != Comparison::Exact => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            let ok = match cmp {
                Comparison::Abs => (y - x).abs() <= tol,
                Comparison::UpperBound => y <= x + tol,
                Comparison::LowerBound => y >= x - tol,
                Comparison::Exact => unreachable!(),
            };
            if ok {
                Ok(())
            } else {
                Err(format!("{path}: expected {x} ({cmp:?}, tol {tol:e}), got {y}"))
            }
        }
        (Value::Array(xs), Value::Array(ys)) => {
            if xs.len() != ys.len() {
                return Err(format!("{path}: expected {} elements, got {}", xs.len(), ys.len()));
            }
            for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
                walk(x, y, tol, cmp, &format!("{path}[{i}]"))?;
            }
            Ok(())
        }
        (Value::Object(xs), Value::Object(ys)) => {
            if let Some(k) = ys.keys().find(|k| !xs.contains_key(*k)) {
                return Err(format!("{path}: unexpected key `{k}`"));
            }
            for (k, x) in xs {
                let y = ys.get(k).ok_or_else(|| format!("{path}: missing key `{k}`"))?;
                walk(x, y, tol, cmp, &format!("{path}.{k}"))?;
            }
            Ok(())
        }
        _ if e == a => Ok(()),
        _ => Err(format!("{path}: expected {e}, got {a}")),
    }
}

/// Evaluates `case` through the library and compares with the oracle value.
pub fn check(case: &OracleCase) -> Result<(), String> {
    let actual = library::evaluate(case).map_err(|e| format!("{}: {e}", case.name))?;
    compare(&case.expected, &actual, case.tolerance, case.comparison).map_err(|e| format!("{}: {e}", case.name))
}

fn file_name(case: &OracleCase) -> String {
    format!("{}.json", case.name)
}

fn render(case: &OracleCase) -> String {
    let mut text = serde_json::to_string_pretty(case).expect("oracle cases serialize");
    text.push('\n');
    text
}

/// Writes one pretty-printed JSON file per case after checking every case
/// against the library. Nothing is written if any case disagrees.
pub fn write_fixtures(dir: &Path) -> Result<usize, String> {
    let cases = cases::oracle_cases();
    let failures: Vec<String> = cases.iter().filter_map(|c| check(c).err()).collect();
    if !failures.is_empty() {
        return Err(format!("{} oracle disagreement(s):\n{}", failures.len(), failures.join("\n")));
    }
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for case in &cases {
        let path = dir.join(file_name(case));
        fs::write(&path, render(case)).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(cases.len())
}

/// Loads every `*.json` fixture in `dir`, sorted by file name.
pub fn read_fixtures(dir: &Path) -> Result<Vec<OracleCase>, String> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
        })
        .collect()
}

/// Renders the fixture files in memory, for drift checks against a directory.
pub fn rendered_fixtures() -> Vec<(String, String)> {
    cases::oracle_cases().iter().map(|c| (file_name(c), render(c))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn comparison_modes() {
        let abs = Comparison::Abs;
        assert!(compare(&json!([1.0, {"a": 2.0}]), &json!([1.0005, {"a": 2.0}]), 1e-3, abs).is_ok());
        let err = compare(&json!({"a": [1.0, 2.0]}), &json!({"a": [1.0, 2.1]}), 1e-3, abs).unwrap_err();
        assert!(err.contains("$.a[1]"), "{err}");
        assert!(compare(&json!(1.0), &json!(0.5), 0.0, Comparison::UpperBound).is_ok());
        assert!(compare(&json!(1.0), &json!(0.5), 0.0, Comparison::LowerBound).is_err());
        assert!(compare(&json!("grasp"), &json!("grasp"), 0.0, Comparison::Exact).is_ok());
        assert!(compare(&json!(1.0), &json!(1.0000001), 1.0, Comparison::Exact).is_err());
        assert!(compare(&json!({"a": 1}), &json!({"a": 1, "b": 2}), 0.0, abs).is_err());
    }
}
