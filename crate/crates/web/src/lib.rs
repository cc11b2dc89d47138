//! WebAssembly bindings for the static page in `www/`.
//!
//! Each export returns a JSON string. `n = 0` selects the asymptotic regime.
//! The `*_json` functions hold the logic so they can be tested natively.

use aloha_core::analytic::{
    bbmd, collision_prob, collision_prob_asymptotic, peak_throughput, right_branch_root, saturation, sbmd,
    solve_operating_point, throughput_at,
};
use aloha_core::delay::mean_delay;
use aloha_core::{Nodes, SystemParams};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 20_000;

fn nodes(n: u32) -> Nodes {
    if n == 0 {
        Nodes::Infinite
    } else {
        Nodes::Finite(n)
    }
}

fn grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(min.is_finite() && max.is_finite() && step > 0.0 && max >= min) {
        return Err(format!("bad grid [{min}, {max}] step {step}"));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    if count > MAX_POINTS {
        return Err(format!("grid has {count} points, limit is {MAX_POINTS}"));
    }
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

/// Finite numbers as JSON numbers, infinities as `null`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Saturation, BBMD and SBMD throughput over a grid of backoff factors.
pub fn limits_sweep_json(r0: f64, n: u32, r_min: f64, r_max: f64, step: f64) -> Result<String, String> {
    let rows = grid(r_min, r_max, step)?
        .into_iter()
        .map(|r| {
            let l = sbmd(&SystemParams::new(r0, r, nodes(n))?)?;
            Ok(json!({
                "r": r,
                "s_sat": l.s_sat,
                "s_bbmd": l.s_bbmd,
                "s_sbmd": l.s_sbmd,
                "binding": l.binding.as_str(),
            }))
        })
        .collect::<Result<Vec<_>, aloha_core::Error>>()
        .map_err(|e| e.to_string())?;
    Ok(json!({ "rows": rows }).to_string())
}

/// S–G curve with the saturation, BBMD and (when `offered_load > 0`) the
/// two operating points marked.
pub fn throughput_curve_json(r0: f64, r: f64, n: u32, offered_load: f64, g_max: f64) -> Result<String, String> {
    let n = nodes(n);
    let p = SystemParams::new(r0, r, n).map_err(|e| e.to_string())?;
    let inner = || -> aloha_core::Result<Value> {
        let mut curve = Vec::new();
        for g in grid(0.0, g_max, g_max / 400.0).map_err(aloha_core::Error::Domain)? {
            curve.push(json!({ "g": g, "s": throughput_at(g, n)? }));
        }
        let sat = saturation(&p)?;
        let b = bbmd(r, n)?;
        let mut points = vec![
            json!({ "label": "saturation", "g": sat.g, "s": sat.s, "p_c": sat.p_c }),
            json!({ "label": "bbmd", "g": b.g, "s": b.s, "p_c": 1.0 / (r * r) }),
        ];
        if offered_load > 0.0 {
            let left = solve_operating_point(offered_load, n)?;
            let right = right_branch_root(offered_load, n)?;
            for (label, op) in [("operating-left", left), ("operating-right", right)] {
                let p_c = match n {
                    Nodes::Finite(k) => collision_prob(op.g / f64::from(k), k)?,
                    Nodes::Infinite => collision_prob_asymptotic(op.g)?,
                };
                points.push(json!({ "label": label, "g": op.g, "s": op.s, "p_c": p_c }));
            }
        }
        Ok(json!({ "peak": peak_throughput(n), "curve": curve, "points": points }))
    };
    inner().map(|v| v.to_string()).map_err(|e| e.to_string())
}

/// Analytic mean delay over a grid of offered loads. Loads at or beyond the
/// peak are skipped; unbounded delays are `null`.
pub fn delay_curve_json(r0: f64, r: f64, n: u32, s_min: f64, s_max: f64, step: f64) -> Result<String, String> {
    if n == 0 {
        return Err("mean delay needs a finite node count".into());
    }
    let params = SystemParams::new(r0, r, Nodes::Finite(n)).map_err(|e| e.to_string())?;
    let peak = peak_throughput(params.n);
    let mut rows = Vec::new();
    for s_o in grid(s_min, s_max, step)? {
        if s_o <= 0.0 || s_o >= peak {
            continue;
        }
        let d = params
            .with_offered_load(s_o)
            .and_then(|p| mean_delay(&p))
            .map_err(|e| e.to_string())?;
        rows.push(json!({
            "s_o": s_o,
            "p_c": d.p_c,
            "mean_delay": num(d.mean_delay.finite().unwrap_or(f64::INFINITY)),
            "service_var_bounded": d.service_var_bounded,
        }));
    }
    Ok(json!({ "peak": peak, "rows": rows }).to_string())
}

#[wasm_bindgen]
pub fn limits_sweep(r0: f64, n: u32, r_min: f64, r_max: f64, step: f64) -> Result<String, JsError> {
    limits_sweep_json(r0, n, r_min, r_max, step).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn throughput_curve(r0: f64, r: f64, n: u32, offered_load: f64, g_max: f64) -> Result<String, JsError> {
    throughput_curve_json(r0, r, n, offered_load, g_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn delay_curve(r0: f64, r: f64, n: u32, s_min: f64, s_max: f64, step: f64) -> Result<String, JsError> {
    delay_curve_json(r0, r, n, s_min, s_max, step).map_err(|e| JsError::new(&e))
}
