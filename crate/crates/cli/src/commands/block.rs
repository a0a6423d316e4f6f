use num_traits::ToPrimitive;
use serde_json::json;
use walsh_vp::block::{corollary22_check, corollary_replay, dense_scaled, select_ell, verify_prop21, BlockPolynomial};
use walsh_vp::dyadic::DyadicPoint;
use walsh_vp::error::BlockError;

use super::{pass_or_fail, to_value, Outcome};
use crate::config::RunConfig;
use crate::report::{float_text, CsvTable, Status};
use crate::{BlockArgs, CliError, Toggle, WindowArg};

/// `auto` replays the constant windows when `2^m · (B - 1)` stays below this.
const AUTO_REPLAY_WORK: u64 = 1 << 28;
/// Frequencies are listed in the payload up to this many.
const LIST_FREQUENCIES: u64 = 1 << 16;

fn block(cfg: &RunConfig, args: &BlockArgs) -> Result<BlockPolynomial, CliError> {
    let bp = BlockPolynomial::new(args.m, args.gamma)?;
    if args.m > cfg.max_dense_m {
        return Err(BlockError::Budget {
            m: args.m,
            limit: cfg.max_dense_m,
        }
        .into());
    }
    Ok(bp)
}

fn header(bp: &BlockPolynomial) -> serde_json::Value {
    json!({
        "m": bp.m(),
        "gamma": bp.gamma(),
        "block_size": bp.block_size().to_string(),
        "frequency_count": bp.frequency_count().to_string(),
    })
}

pub fn build(cfg: &mut RunConfig, args: &BlockArgs) -> Result<Outcome, CliError> {
    let bp = block(cfg, args)?;
    let scaled = dense_scaled(&bp, cfg.max_dense_m)?;
    let root = (bp.gamma() as f64).sqrt();
    let mut t = CsvTable::new("values", &["i", "scaled", "value"]);
    for (i, q) in scaled.iter().enumerate() {
        t.push(vec![i.to_string(), q.to_string(), float_text(*q as f64 / root)]);
    }
    let frequencies = if bp.frequency_count().to_u64().is_some_and(|n| n <= LIST_FREQUENCIES) {
        Some(bp.frequencies()?)
    } else {
        None
    };
    let mut payload = header(&bp);
    payload["e_measure"] = json!(walsh_vp::scalar::rational_text(&bp.e_measure()));
    payload["frequencies"] = json!(frequencies);
    payload["scaled_note"] = json!("values are sqrt(gamma) * P");
    payload["scaled"] = json!(scaled);
    Ok(Outcome::new(Status::Info, payload).with_table(t))
}

pub fn verify(cfg: &mut RunConfig, args: &BlockArgs, corollary: Toggle) -> Result<Outcome, CliError> {
    let bp = block(cfg, args)?;
    let cert = verify_prop21(&bp, cfg.max_dense_m)?;
    let b = bp.block_size().to_u64().expect("m <= max_dense_m");
    let windows: Vec<u64> = (1..b).collect();
    let run = match corollary {
        Toggle::On => true,
        Toggle::Off => false,
        Toggle::Auto => (1u64 << bp.m()).saturating_mul(b - 1) <= AUTO_REPLAY_WORK,
    };
    let replay = if run {
        let checks = corollary_replay(&bp, &windows)?;
        json!({ "windows": format!("1..{}", b - 1), "checks": checks, "holds": true })
    } else {
        json!({ "skipped": true })
    };
    let boundary_rejected = matches!(corollary_replay(&bp, &[b]), Err(BlockError::WindowTooWide { .. }));
    let mut payload = header(&bp);
    payload["certificate"] = to_value(&cert);
    payload["corollary_replay"] = replay;
    payload["boundary_window_rejected"] = json!(boundary_rejected);
    Ok(Outcome::new(pass_or_fail(cert.holds && boundary_rejected), payload))
}

pub fn witness(cfg: &mut RunConfig, args: &BlockArgs, x: &DyadicPoint, w: &WindowArg) -> Result<Outcome, CliError> {
    let bp = BlockPolynomial::new(args.m, args.gamma)?;
    let wit = select_ell(&bp, x)?;
    let check = wit.check();
    let corollary = match &w.lambda {
        Some(window) => {
            cfg.lambda = Some(window.clone());
            Some(match corollary22_check(&bp, window, x) {
                Ok(c) => to_value(&c),
                Err(e @ BlockError::WindowTooWide { .. }) => json!({ "precondition": e.to_string() }),
                Err(e) => return Err(e.into()),
            })
        }
        None => None,
    };
    let corollary_ok = corollary
        .as_ref()
        .and_then(|c| c.get("holds"))
        .is_none_or(|h| h.as_bool() == Some(true));
    let mut payload = header(&bp);
    payload["x"] = json!(x.to_string());
    payload["witness"] = to_value(&wit);
    payload["meets_quarter"] = json!(wit.s_ell().meets_quarter());
    payload["check"] = json!(check.as_ref().err());
    payload["corollary"] = json!(corollary);
    Ok(Outcome::new(pass_or_fail(check.is_ok() && corollary_ok), payload))
}
