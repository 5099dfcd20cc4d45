//! JSON reports and CSV summaries.

use std::collections::BTreeMap;

use modulus_core::{DensityField, Grid, ModulusReport, VerificationReport};
use serde_json::{json, Map, Value};

/// A float as JSON; non-finite values become the strings `"inf"`,
/// `"-inf"` and `"nan"` since JSON has no literal for them.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn grid_json(g: &Grid) -> Value {
    json!({
        "lo": g.lo().iter().copied().map(num).collect::<Vec<_>>(),
        "hi": g.hi().iter().copied().map(num).collect::<Vec<_>>(),
        "resolution": g.resolution(),
    })
}

pub fn density_json(rho: &DensityField) -> Value {
    json!({ "min": num(rho.min()), "max": num(rho.max()) })
}

pub fn modulus_json(r: &ModulusReport, reference: Option<f64>) -> Value {
    json!({
        "value": num(r.value),
        "lower_bound": num(r.lower_bound),
        "relative_gap": num(r.relative_gap()),
        "iterations": r.iterations,
        "outer_rounds": r.outer_rounds,
        "active_constraints": r.active_constraints,
        "max_constraint_violation": num(r.max_constraint_violation),
        "empty_admissible_set": r.empty_admissible_set,
        "out_of_domain_length": num(r.out_of_domain_length),
        "reference": opt(reference),
        "reference_relative_error": opt(reference.map(|a| (r.value - a) / a)),
        "density": density_json(&r.extremal_density),
        "warnings": r.warnings,
    })
}

pub fn verification_json(r: &VerificationReport) -> Value {
    let checks: Map<String, Value> = r
        .intermediate_checks
        .iter()
        .map(|(k, c)| {
            let v = json!({ "value": num(c.value), "limit": num(c.limit), "relation": c.relation, "passed": c.passed });
            (k.clone(), v)
        })
        .collect();
    json!({
        "mapping": r.mapping,
        "p": num(r.p),
        "m": r.m,
        "lhs": num(r.lhs),
        "lhs_coarse": opt(r.lhs_coarse),
        "lhs_reference": opt(r.lhs_reference),
        "lhs_relative_gap": num(r.lhs_relative_gap),
        "rhs": num(r.rhs),
        "slack": num(r.slack),
        "rho_tilde_energy": num(r.rho_tilde_energy),
        "admissibility_residual": num(r.admissibility_residual),
        "tol_total": num(r.tol_total),
        "source_modulus": opt(r.source_modulus),
        "ess_sup_dilatation": opt(r.ess_sup_dilatation),
        "intermediate_checks": checks,
        "rho_tilde": r.rho_tilde.as_ref().map_or(Value::Null, |t| density_json(t.image_field())),
        "warnings": r.warnings,
        "passed": r.passed,
    })
}

/// Scalar columns of a report, flattened with `.`-joined keys. Arrays and
/// strings other than the non-finite markers are skipped.
pub fn flatten(v: &Value) -> BTreeMap<String, String> {
    fn walk(prefix: &str, v: &Value, out: &mut BTreeMap<String, String>) {
        match v {
            Value::Object(map) => {
                for (k, x) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    walk(&key, x, out);
                }
            }
            Value::Number(n) => {
                out.insert(prefix.to_string(), n.to_string());
            }
            Value::Bool(b) => {
                out.insert(prefix.to_string(), b.to_string());
            }
            Value::String(s) => {
                out.insert(prefix.to_string(), s.clone());
            }
            Value::Null => {
                out.insert(prefix.to_string(), String::new());
            }
            Value::Array(_) => {}
        }
    }
    let mut out = BTreeMap::new();
    walk("", v, &mut out);
    out
}

/// CSV text with the union of the rows' columns, in sorted column order.
pub fn csv_text(rows: &[BTreeMap<String, String>]) -> anyhow::Result<String> {
    let mut cols: Vec<&String> = rows.iter().flat_map(|r| r.keys()).collect();
    cols.sort();
    cols.dedup();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&cols)?;
    for r in rows {
        w.write_record(cols.iter().map(|c| r.get(*c).map_or("", String::as_str)))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers() {
        assert_eq!(num(f64::INFINITY), json!("inf"));
        assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(num(f64::NAN), json!("nan"));
        assert_eq!(num(0.25), json!(0.25));
    }

    #[test]
    fn flatten_and_csv() {
        let a = flatten(&json!({"x": 1, "y": {"z": "inf", "w": [1, 2]}, "ok": true}));
        assert_eq!(a.len(), 3);
        assert_eq!(a["y.z"], "inf");
        let b = flatten(&json!({"x": 2, "err": "bad, value"}));
        let text = csv_text(&[a, b]).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("err,ok,x,y.z"));
        assert_eq!(lines.next(), Some(",true,1,inf"));
        assert_eq!(lines.next(), Some("\"bad, value\",,2,"));
    }
}
