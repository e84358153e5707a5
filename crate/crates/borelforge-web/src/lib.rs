//! Three operations for the static page in `www/`. Each returns a JSON string;
//! the page draws the samples on a canvas.

use std::str::FromStr;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use borelforge::filtration::{PolyFiltration, RootMult};
use borelforge::flatzero::{flat_zero_chain, ln_flat_value, ZeroChain};
use borelforge::jets::Jet;
use borelforge::realize::{borel_realize, RealizeOptions};
use borelforge::verify::{num, vanishing_order};
use borelforge::{Rat, Region, SetDescriptor, SmoothExpr};

fn rat(s: &str) -> Result<Rat, String> {
    Rat::from_str(s).map_err(|e| e.to_string())
}

fn interval(lo: &str, hi: &str) -> Result<Region, String> {
    let (a, b) = (rat(lo)?, rat(hi)?);
    if a >= b {
        return Err("the interval must have lo < hi".into());
    }
    Ok(Region::interval(a, b))
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn samples(f: &SmoothExpr, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut v = Vec::with_capacity(xs.len());
    let mut d = Vec::with_capacity(xs.len());
    for x in xs {
        let t = f.eval_derivs(&[*x], 1).map_err(|e| e.to_string())?;
        v.push(t[0]);
        d.push(t[1]);
    }
    Ok((v, d))
}

/// Realize derivatives `f^(k)(base)` (comma separated) on `[lo, hi]` by a Borel sum.
pub fn realize_jet_json(base: &str, derivs: &str, lo: &str, hi: &str) -> Result<Value, String> {
    let region = interval(lo, hi)?;
    let coeffs: Vec<f64> = derivs
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<_, _>>()?;
    if coeffs.is_empty() {
        return Err("give at least one derivative".into());
    }
    let jet = Jet::new(vec![rat(base)?], coeffs.len() - 1, coeffs.clone()).map_err(|e| e.to_string())?;
    let out = borel_realize(&jet, &region, &RealizeOptions::default()).map_err(|e| e.to_string())?;
    let b = rat(base)?.to_f64();
    let got = out.expr.eval_derivs(&[b], coeffs.len() - 1).map_err(|e| e.to_string())?;
    let rel = got
        .iter()
        .zip(&coeffs)
        .map(|(g, w)| (g - w).abs() / w.abs().max(1.0))
        .fold(0.0, f64::max);
    let (a, z) = (rat(lo)?.to_f64(), rat(hi)?.to_f64());
    let xs = grid(a, z, 601);
    let (f, df) = samples(&out.expr, &xs)?;
    Ok(json!({
        "xs": xs,
        "f": f,
        "df": df,
        "derivatives": got,
        "max_rel_error": num(rel),
        "eps": out.schedules[0].eps,
    }))
}

/// Form verdict of `1/(i+offset)`-type or power filtrations on `[lo, hi]`.
/// `kind` is `harmonic` (roots `1/(i+offset)` with multiplicity `i`) or
/// `power` (one root at `point` with multiplicity `i`).
pub fn filtration_json(kind: &str, lo: &str, hi: &str, point: &str, j_max: usize) -> Result<Value, String> {
    let window = (rat(lo)?, rat(hi)?);
    if window.0 >= window.1 {
        return Err("the window must have lo < hi".into());
    }
    if !(1..=24).contains(&j_max) {
        return Err("levels must be between 1 and 24".into());
    }
    let f = match kind {
        "harmonic" => PolyFiltration::harmonic(window, Rat::one(), 0),
        "power" => PolyFiltration::power(window, vec![RootMult { root: rat(point)?, mult: 1 }], vec![]),
        other => return Err(format!("unknown filtration kind {other:?}")),
    }
    .map_err(|e| e.to_string())?;
    let verdict = f.necessary_form_check(j_max).map_err(|e| e.to_string())?;
    let loci = f.order_loci(j_max.min(6) as u32, j_max).map_err(|e| e.to_string())?;
    let first_row: Vec<Vec<String>> = loci.table.first().map_or(vec![], |row| {
        row.iter().map(|pts| pts.iter().map(|p| p.to_string()).collect()).collect()
    });
    let witness = if verdict.is_ok() {
        Value::Null
    } else {
        match f.witness_unbounded(j_max.min(12)) {
            Ok(w) => {
                let pts: Vec<Value> = (1..=w.terms.len())
                    .map(|n| {
                        let at = &w.terms[n - 1].point;
                        json!({ "point": at.to_string(), "partial_sum": w.partial_sum(n, at).map(|s| s.to_string()) })
                    })
                    .collect();
                Value::Array(pts)
            }
            Err(_) => Value::Null,
        }
    };
    Ok(json!({ "verdict": verdict, "zero_loci": first_row, "witness": witness }))
}

/// Flat function along `Z_i = {0} ∪ {1/n : i <= n <= depth}` on `[-1, 2]`:
/// `log10` of its value on a grid and the measured vanishing orders.
pub fn flat_chain_json(depth: usize) -> Result<Value, String> {
    if !(1..=12).contains(&depth) {
        return Err("depth must be between 1 and 12".into());
    }
    let sets = (1..=depth)
        .map(|i| {
            let mut v = vec![Rat::zero()];
            v.extend((i..=depth).map(|n| Rat::new(1, n as i64)));
            SetDescriptor::points_1d(&v)
        })
        .collect();
    let chain = ZeroChain::new(sets, None).map_err(|e| e.to_string())?;
    let region = Region::interval(Rat::int(-1), Rat::int(2));
    let f = flat_zero_chain(&chain, &region).map_err(|e| e.to_string())?;
    let xs = grid(-0.25, 1.25, 1201);
    let log10: Vec<Value> = xs
        .iter()
        .map(|x| num(ln_flat_value(&chain, &f, &[*x]) / std::f64::consts::LN_10))
        .collect();
    let mut orders = Vec::new();
    for n in 1..=depth {
        let p = 1.0 / n as f64;
        let v = vanishing_order(&f.expr, &[p], &[1.0], 1e-3).map_err(|e| e.to_string())?;
        orders.push(json!({ "point": format!("1/{n}"), "depth": n, "order": num(v.order()) }));
    }
    let at0 = vanishing_order(&f.expr, &[0.0], &[1.0], 1e-5).map_err(|e| e.to_string())?;
    Ok(json!({ "xs": xs, "log10": log10, "orders": orders, "infinite_at_0": at0.infinite }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn realize_jet(base: &str, derivs: &str, lo: &str, hi: &str) -> Result<String, JsValue> {
    to_js(realize_jet_json(base, derivs, lo, hi))
}

#[wasm_bindgen]
pub fn check_filtration(kind: &str, lo: &str, hi: &str, point: &str, levels: usize) -> Result<String, JsValue> {
    to_js(filtration_json(kind, lo, hi, point, levels))
}

#[wasm_bindgen]
pub fn flat_chain(depth: usize) -> Result<String, JsValue> {
    to_js(flat_chain_json(depth))
}
