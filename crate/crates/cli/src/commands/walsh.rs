use std::time::Instant;

use serde_json::json;
use walsh_vp::scalar::Scalar;
use walsh_vp::walsh::{
    forward_fwht, hadamard_to_paley, inverse_fwht, partial_sum_all, reorder_paley_to_hadamard,
    reorder_paley_to_sequency, sequency_to_paley, spectrum_of, DenseBudget, GridFunction, PartialSumStrategy,
    SpectrumVector,
};

use super::{by_mode, cell, json_value, Outcome};
use crate::config::RunConfig;
use crate::report::{CsvTable, Status, Throughput};
use crate::source::FunctionSpec;
use crate::{CliError, Order, Strategy};

fn order_name(order: Order) -> &'static str {
    match order {
        Order::Paley => "paley",
        Order::Hadamard => "hadamard",
        Order::Sequency => "sequency",
    }
}

fn index_table<T: Scalar>(name: &str, values: &[T]) -> CsvTable {
    let mut t = CsvTable::new(name, &["index", "value"]);
    for (i, v) in values.iter().enumerate() {
        t.push(vec![i.to_string(), cell(v)]);
    }
    t
}

pub fn fwht(cfg: &mut RunConfig, function: &FunctionSpec, inverse: bool, order: Order) -> Result<Outcome, CliError> {
    by_mode!(cfg, fwht_in(cfg, function, inverse, order))
}

fn fwht_in<T: Scalar>(cfg: &RunConfig, function: &FunctionSpec, inverse: bool, order: Order) -> Result<Outcome, CliError> {
    let f: GridFunction<T> = function.build(cfg.seed)?;
    let m = f.resolution();
    let start = Instant::now();
    let (values, direction) = if inverse {
        let input = f.into_values();
        let paley: Vec<T> = match order {
            Order::Paley => input,
            Order::Hadamard => {
                let mut out = vec![T::zero(); input.len()];
                for (h, v) in input.into_iter().enumerate() {
                    out[hadamard_to_paley(h as u64, m) as usize] = v;
                }
                out
            }
            Order::Sequency => {
                let mut out = vec![T::zero(); input.len()];
                for (k, v) in input.into_iter().enumerate() {
                    out[sequency_to_paley(k as u64) as usize] = v;
                }
                out
            }
        };
        let spec = SpectrumVector::new(paley)?;
        (inverse_fwht(&spec).into_values(), "inverse")
    } else {
        let c = forward_fwht(&f).into_coeffs();
        let c = match order {
            Order::Paley => c,
            Order::Hadamard => reorder_paley_to_hadamard(&c),
            Order::Sequency => reorder_paley_to_sequency(&c),
        };
        (c, "forward")
    };
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    let payload = json!({
        "function": function.to_string(),
        "direction": direction,
        "order": order_name(order),
        "resolution": m,
        "values": values.iter().map(json_value).collect::<Vec<_>>(),
    });
    let mut out = Outcome::new(Status::Info, payload).with_table(index_table("values", &values));
    out.throughput.push(Throughput {
        unit: "butterflies".into(),
        per_second: f64::from(m) * (1u64 << m) as f64 / 2.0 / secs,
    });
    Ok(out)
}

pub fn partial_sums(cfg: &mut RunConfig, function: &FunctionSpec, strategy: Strategy) -> Result<Outcome, CliError> {
    by_mode!(cfg, partial_sums_in(cfg, function, strategy))
}

fn partial_sums_in<T: Scalar>(cfg: &RunConfig, function: &FunctionSpec, strategy: Strategy) -> Result<Outcome, CliError> {
    let budget = DenseBudget {
        max_resolution: cfg.max_resolution,
    };
    if let Some(m) = function.resolution() {
        budget.check(m)?;
    }
    let f: GridFunction<T> = function.build(cfg.seed)?;
    let (strategy, name) = match strategy {
        Strategy::Incremental => (PartialSumStrategy::Incremental, "incremental"),
        Strategy::RowInverse => (PartialSumStrategy::RowInverse, "row-inverse"),
    };
    let matrix = partial_sum_all(&f, strategy, budget)?;
    let mut t = CsvTable::new("partial-sums", &["n", "i", "value"]);
    for (n, row) in matrix.rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            t.push(vec![n.to_string(), i.to_string(), cell(v)]);
        }
    }
    let payload = json!({
        "function": function.to_string(),
        "strategy": name,
        "resolution": matrix.resolution,
        "rows": matrix.rows.iter().map(|r| r.iter().map(json_value).collect::<Vec<_>>()).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(Status::Info, payload).with_table(t))
}

pub fn spectrum(cfg: &mut RunConfig, function: &FunctionSpec) -> Result<Outcome, CliError> {
    by_mode!(cfg, spectrum_in(cfg, function))
}

fn spectrum_in<T: Scalar>(cfg: &RunConfig, function: &FunctionSpec) -> Result<Outcome, CliError> {
    let f: GridFunction<T> = function.build(cfg.seed)?;
    let c = forward_fwht(&f);
    let set = spectrum_of(&c);
    let mut t = CsvTable::new("spectrum", &["k", "coefficient"]);
    for &k in &set {
        t.push(vec![k.to_string(), cell(&c.coeffs()[k as usize])]);
    }
    let payload = json!({
        "function": function.to_string(),
        "resolution": f.resolution(),
        "size": set.len(),
        "degree": set.last().map_or(0, |k| k + 1),
        "frequencies": set,
        "coefficients": set.iter().map(|&k| json_value(&c.coeffs()[k as usize])).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(Status::Info, payload).with_table(t))
}
