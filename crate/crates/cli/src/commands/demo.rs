use serde_json::json;
use walsh_vp::diverge::membership_report;
use walsh_vp::means::convergence_errors;
use walsh_vp::scalar::{NumberMode, Scalar, FLOAT_AGG_TOL};
use walsh_vp::walsh::{spectrum, GridFunction};
use walsh_vp::window::WindowFamily;

use super::diverge::{load_plan, membership_table, plan_payload, point_table, run_certificate};
use super::{by_mode, cell, json_value, pass_or_fail, to_value, window, Outcome};
use crate::config::RunConfig;
use crate::report::CsvTable;
use crate::source::FunctionSpec;
use crate::{CliError, PlanArgs, WindowArg};

/// Grid enumeration cross-check for membership runs up to this `m_A`.
const DEMO_GRID_MAX_M: u64 = 16;

pub fn converge(cfg: &mut RunConfig, function: &FunctionSpec, w: &WindowArg, n_max: Option<u64>) -> Result<Outcome, CliError> {
    let win = window(cfg, w, "proportional:1/2")?;
    // a finite table has no asymptotics to check, so it is taken as given
    let table = matches!(win.family(), WindowFamily::Table { .. });
    if win.bounded_ratio().is_none() && !table {
        return Err(CliError::Usage(format!(
            "demo converge needs a window with n = O(lambda_n); {win} has unbounded n/lambda_n"
        )));
    }
    by_mode!(cfg, converge_in(cfg, function, n_max))
}

fn converge_in<T: Scalar>(cfg: &RunConfig, function: &FunctionSpec, n_max: Option<u64>) -> Result<Outcome, CliError> {
    let win = cfg.lambda.clone().expect("resolved");
    let f: GridFunction<T> = function.build(cfg.seed)?;
    let n_max = n_max.unwrap_or(1u64 << f.resolution());
    let degree = spectrum(&f).last().map_or(0, |k| k + 1);
    let errors = convergence_errors(&f, &win, n_max)?;
    let lambdas = if n_max == 0 { vec![0] } else { win.prefix(n_max)? };
    let scale = f.sup_norm().to_f64().max(1.0);
    let vanishes = |e: &T| match T::MODE {
        NumberMode::Exact => e.is_zero(),
        NumberMode::Floating => e.to_f64() <= FLOAT_AGG_TOL * scale,
    };
    let mut t = CsvTable::new("errors", &["n", "lambda", "sup_error"]);
    let mut checked = 0u64;
    let mut violations = Vec::new();
    for (n, e) in &errors {
        let lambda = lambdas[*n as usize];
        t.push(vec![n.to_string(), lambda.to_string(), cell(e)]);
        if n - lambda >= degree {
            checked += 1;
            if !vanishes(e) {
                violations.push(*n);
            }
        }
    }
    let first_exact = errors.iter().find(|(_, e)| e.is_zero()).map(|(n, _)| *n);
    let payload = json!({
        "function": function.to_string(),
        "lambda": win.to_string(),
        "resolution": f.resolution(),
        "n_max": n_max,
        "degree": degree,
        "rows_past_degree": checked,
        "first_zero_error_n": first_exact,
        "violations": violations,
        "errors": errors.iter().map(|(n, e)| json!({ "n": n, "sup_error": json_value(e) })).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(pass_or_fail(violations.is_empty()), payload).with_table(t))
}

pub fn diverge(cfg: &mut RunConfig, args: &PlanArgs, samples: usize) -> Result<Outcome, CliError> {
    let plan = load_plan(cfg, args)?;
    let (plan_json, replay_ok) = plan_payload(&plan)?;
    let levels = plan.numeric_levels();
    let cert = run_certificate(cfg, &plan, levels, samples)?;
    let membership = membership_report(&plan, levels, DEMO_GRID_MAX_M)?;
    let ok = replay_ok && cert.summary.all_pass && membership.holds;
    let payload = json!({
        "plan": plan_json,
        "certificate": {
            "sample": to_value(&cert.sample),
            "dense_crosscheck": to_value(&cert.dense_crosscheck),
            "summary": to_value(&cert.summary),
        },
        "membership": {
            "summary": membership.summary(),
            "report": to_value(&membership),
        },
    });
    Ok(Outcome::new(pass_or_fail(ok), payload)
        .with_table(point_table(&cert))
        .with_table(membership_table(&membership)))
}
