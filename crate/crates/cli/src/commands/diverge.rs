use serde_json::{json, Value};
use walsh_vp::diverge::{
    audit_plan, certify_divergence, choose_levels, default_samples, membership_report, replay_inequalities,
    DivergenceCertificate, DivergencePlan, MembershipReport, PlanOptions,
};

use super::{pass_or_fail, to_value, window, Outcome};
use crate::config::RunConfig;
use crate::report::{float_text, CsvTable};
use crate::{CliError, PlanArgs};

const DEFAULT_WINDOW: &str = "root:1/2";

/// Plans from the flags and config, or reads a saved plan. The config
/// snapshot is updated to the values actually used.
pub fn load_plan(cfg: &mut RunConfig, args: &PlanArgs) -> Result<DivergencePlan, CliError> {
    if let Some(path) = &args.plan {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read plan {}: {e}", path.display())))?;
        let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad plan JSON: {e}")))?;
        // a bare plan, or a `diverge plan` report
        let body = doc.get("payload").and_then(|p| p.get("plan")).cloned().unwrap_or(doc);
        let plan: DivergencePlan =
            serde_json::from_value(body).map_err(|e| CliError::Usage(format!("bad plan JSON: {e}")))?;
        cfg.omega = plan.omega.clone();
        cfg.lambda = Some(plan.window.clone());
        cfg.mode = plan.mode.clone();
        cfg.levels = plan.requested_levels;
        cfg.gamma_cap = plan.gamma_cap;
        // a hand-edited plan must still satisfy every level invariant
        audit_plan(&plan)?;
        return Ok(plan);
    }
    if let Some(o) = &args.omega {
        cfg.omega = o.clone();
    }
    if let Some(m) = &args.mode {
        cfg.mode = m.clone();
    }
    if let Some(l) = args.levels {
        cfg.levels = l;
    }
    cfg.validate()?;
    let w = window(cfg, &args.window, DEFAULT_WINDOW)?;
    let options = PlanOptions {
        gamma_cap: cfg.gamma_cap,
    };
    Ok(choose_levels(&cfg.omega, &w, &cfg.mode, cfg.levels, options)?)
}

fn truncation(plan: &DivergencePlan, truncate: Option<usize>) -> Result<usize, CliError> {
    let n = truncate.unwrap_or_else(|| plan.numeric_levels());
    if n == 0 {
        return Err(CliError::Usage("truncation must be at least 1".into()));
    }
    Ok(n)
}

/// The plan, its audit and the inequality replay. Strict plans must also
/// pass the replay.
pub fn plan_payload(plan: &DivergencePlan) -> Result<(Value, bool), CliError> {
    let audit = audit_plan(plan)?;
    let replay = replay_inequalities(plan);
    let replay_ok = !plan.mode.is_strict()
        || replay
            .iter()
            .all(|r| r.exceeds_3a && r.ii_below_sixteenth && r.target_increasing);
    let payload = json!({
        "plan": to_value(plan),
        "audit": to_value(&audit),
        "replay": to_value(&replay),
        "replay_holds": replay_ok,
    });
    Ok((payload, replay_ok))
}

pub fn plan(cfg: &mut RunConfig, args: &PlanArgs) -> Result<Outcome, CliError> {
    let plan = load_plan(cfg, args)?;
    let (payload, ok) = plan_payload(&plan)?;
    Ok(Outcome::new(pass_or_fail(ok), payload))
}

pub fn run_certificate(
    cfg: &RunConfig,
    plan: &DivergencePlan,
    levels: usize,
    samples: usize,
) -> Result<DivergenceCertificate, CliError> {
    let (spec, points) = default_samples(plan, levels, samples, cfg.seed)?;
    Ok(certify_divergence(plan, levels, spec, &points)?)
}

pub fn point_table(cert: &DivergenceCertificate) -> CsvTable {
    let mut t = CsvTable::new("points", &["x", "a", "ell", "v", "target", "passes"]);
    for p in &cert.points {
        for l in &p.levels {
            t.push(vec![
                p.x.to_string(),
                l.a.to_string(),
                l.ell.to_string(),
                l.v_value.clone(),
                l.target.clone(),
                l.passes.to_string(),
            ]);
        }
    }
    t
}

pub fn certify(cfg: &mut RunConfig, args: &PlanArgs, truncate: Option<usize>, samples: usize) -> Result<Outcome, CliError> {
    let plan = load_plan(cfg, args)?;
    let levels = truncation(&plan, truncate)?;
    let cert = run_certificate(cfg, &plan, levels, samples)?;
    let payload = json!({ "plan": to_value(&plan), "certificate": to_value(&cert) });
    Ok(Outcome::new(pass_or_fail(cert.summary.all_pass), payload).with_table(point_table(&cert)))
}

pub fn membership_table(report: &MembershipReport) -> CsvTable {
    let mut t = CsvTable::new("terms", &["a", "delta", "ratio", "term", "term_f64"]);
    for term in &report.bound.terms {
        let text = |r| walsh_vp::scalar::rational_text(r);
        t.push(vec![
            term.a.to_string(),
            text(&term.delta),
            text(&term.ratio),
            text(&term.term),
            float_text(walsh_vp::surd::big_ratio_f64(&term.term)),
        ]);
    }
    t
}

pub fn membership(cfg: &mut RunConfig, args: &PlanArgs, truncate: Option<usize>, grid_max_m: u64) -> Result<Outcome, CliError> {
    let plan = load_plan(cfg, args)?;
    let levels = truncation(&plan, truncate)?;
    let report = membership_report(&plan, levels, grid_max_m)?;
    let payload = json!({
        "levels": levels,
        "summary": report.summary(),
        "report": to_value(&report),
    });
    Ok(Outcome::new(pass_or_fail(report.holds), payload).with_table(membership_table(&report)))
}
