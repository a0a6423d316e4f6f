use serde_json::json;
use walsh_vp::grid_io::grid_to_json;
use walsh_vp::means::{domination_check, maximal_vp, sigma_star, vp_mean_curve, weak_type_profile, weak_type_sup};
use walsh_vp::scalar::Scalar;
use walsh_vp::walsh::GridFunction;
use walsh_vp::window::WindowFamily;

use super::{by_mode, cell, json_value, pass_or_fail, to_value, window, Outcome};
use crate::config::RunConfig;
use crate::report::{float_text, CsvTable, Status};
use crate::source::FunctionSpec;
use crate::{CliError, WindowArg};

const DEFAULT_WINDOW: &str = "proportional:1/2";

fn default_n_max(n_max: Option<u64>, m: u32) -> u64 {
    n_max.unwrap_or(1u64 << m)
}

pub fn curve(cfg: &mut RunConfig, function: &FunctionSpec, w: &WindowArg, n_max: Option<u64>) -> Result<Outcome, CliError> {
    window(cfg, w, DEFAULT_WINDOW)?;
    by_mode!(cfg, curve_in(cfg, function, n_max))
}

fn curve_in<T: Scalar>(cfg: &RunConfig, function: &FunctionSpec, n_max: Option<u64>) -> Result<Outcome, CliError> {
    let w = cfg.lambda.clone().expect("resolved");
    let f: GridFunction<T> = function.build(cfg.seed)?;
    let n_max = default_n_max(n_max, f.resolution());
    let c = vp_mean_curve(&f, &w, n_max, cfg.max_resolution)?;
    let mut t = CsvTable::new("curve", &["n", "i", "value"]);
    for (n, row) in c.rows() {
        for (i, v) in row.iter().enumerate() {
            t.push(vec![n.to_string(), i.to_string(), cell(v)]);
        }
    }
    let payload = json!({
        "function": function.to_string(),
        "lambda": w.to_string(),
        "resolution": c.resolution,
        "n_max": c.n_max,
        "lambdas": &c.lambdas[1..],
        "rows": c.rows().map(|(_, r)| r.iter().map(json_value).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(Status::Info, payload).with_table(t))
}

pub fn maximal(cfg: &mut RunConfig, function: &FunctionSpec, w: &WindowArg, n_max: Option<u64>) -> Result<Outcome, CliError> {
    window(cfg, w, DEFAULT_WINDOW)?;
    by_mode!(cfg, maximal_in(cfg, function, n_max))
}

fn maximal_in<T: Scalar>(cfg: &RunConfig, function: &FunctionSpec, n_max: Option<u64>) -> Result<Outcome, CliError> {
    let w = cfg.lambda.clone().expect("resolved");
    let f: GridFunction<T> = function.build(cfg.seed)?;
    if f.resolution() > cfg.max_resolution {
        return Err(CliError::Budget(format!(
            "resolution {} exceeds max_resolution {}",
            f.resolution(),
            cfg.max_resolution
        )));
    }
    let n_max = default_n_max(n_max, f.resolution());
    let mx = maximal_vp(&f, &w, n_max)?;
    let ss = sigma_star(&f, n_max);
    let domination = match w.family() {
        WindowFamily::Proportional { theta } => Some(domination_check(&f, &w, theta, n_max)?),
        _ => None,
    };
    let mut t = CsvTable::new("maximal", &["i", "maximal", "sigma_star"]);
    for (i, (a, b)) in mx.values().iter().zip(ss.values()).enumerate() {
        t.push(vec![i.to_string(), cell(a), cell(b)]);
    }
    let status = domination.as_ref().map_or(Status::Info, |d| pass_or_fail(d.holds));
    let payload = json!({
        "function": function.to_string(),
        "lambda": w.to_string(),
        "n_max": n_max,
        "maximal": grid_to_json(&mx),
        "sigma_star": grid_to_json(&ss),
        "domination": domination.as_ref().map(to_value),
    });
    Ok(Outcome::new(status, payload).with_table(t))
}

pub fn weaktype(
    cfg: &mut RunConfig,
    m: u32,
    samples: u64,
    function: Option<&FunctionSpec>,
    n_max: Option<u64>,
) -> Result<Outcome, CliError> {
    by_mode!(cfg, weaktype_in(cfg, m, samples, function, n_max))
}

fn weaktype_in<T: Scalar>(
    cfg: &RunConfig,
    m: u32,
    samples: u64,
    function: Option<&FunctionSpec>,
    n_max: Option<u64>,
) -> Result<Outcome, CliError> {
    if samples == 0 {
        return Err(CliError::Usage("samples must be positive".into()));
    }
    let spec = function.cloned().unwrap_or(FunctionSpec::UnitL1 { m });
    if spec.resolution().is_some_and(|r| r > cfg.max_resolution) {
        return Err(CliError::Budget(format!("resolution exceeds max_resolution {}", cfg.max_resolution)));
    }
    let mut t = CsvTable::new("profile", &["sample", "t", "t_measure"]);
    let mut rows = Vec::new();
    let mut max_sup: f64 = 0.0;
    for k in 0..samples {
        let seed = cfg.seed.wrapping_add(k);
        let f: GridFunction<T> = spec.build(seed)?;
        let n_max = default_n_max(n_max, f.resolution());
        let g = GridFunction::new(sigma_star(&f, n_max).values().iter().map(Scalar::to_f64).collect::<Vec<f64>>())?;
        let mut thresholds = g.values().to_vec();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        for p in weak_type_profile(&g, &thresholds) {
            t.push(vec![k.to_string(), float_text(p.t), float_text(p.value)]);
        }
        let sup = weak_type_sup(&g);
        max_sup = max_sup.max(sup.value);
        rows.push(json!({
            "sample": k,
            "seed": seed,
            "l1_norm": json_value(&f.l1_norm()),
            "sup": sup,
            "finite": sup.value.is_finite(),
        }));
    }
    let payload = json!({
        "function": spec.to_string(),
        "samples": rows,
        "max_sup": max_sup,
    });
    Ok(Outcome::new(Status::Info, payload).with_table(t))
}
