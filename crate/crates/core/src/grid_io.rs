//! CSV (`index,value`) and JSON (`{"resolution": M, "values": [...]}`)
//! forms of grid functions and spectra. Exact values are written as `p/q`
//! strings and read back losslessly.

use serde_json::{json, Value};

use crate::error::WalshError;
use crate::scalar::{NumberMode, Scalar};
use crate::walsh::{GridFunction, SpectrumVector};

fn value_json<T: Scalar>(v: &T) -> Value {
    match T::MODE {
        NumberMode::Exact => Value::String(v.to_text()),
        NumberMode::Floating => json!(v.to_f64()),
    }
}

pub fn values_to_json<T: Scalar>(resolution: u32, values: &[T]) -> Value {
    json!({
        "resolution": resolution,
        "values": values.iter().map(value_json).collect::<Vec<_>>(),
    })
}

pub fn values_to_csv<T: Scalar>(values: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "value"]).expect("in-memory write");
    for (i, v) in values.iter().enumerate() {
        w.write_record([i.to_string(), v.to_text()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn values_from_json<T: Scalar>(text: &str) -> Result<Vec<T>, WalshError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| WalshError::Parse(e.to_string()))?;
    let values = doc
        .get("values")
        .and_then(Value::as_array)
        .ok_or_else(|| WalshError::Parse("missing \"values\" array".into()))?;
    let parsed = values
        .iter()
        .map(|v| {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                other => return Err(WalshError::Parse(format!("bad value {other}"))),
            };
            T::from_text(&text).ok_or_else(|| WalshError::Parse(format!("bad value {text:?}")))
        })
        .collect::<Result<Vec<T>, _>>()?;
    if let Some(m) = doc.get("resolution").and_then(Value::as_u64) {
        if parsed.len() as u64 != 1u64 << m {
            return Err(WalshError::Parse(format!(
                "resolution {m} but {} values",
                parsed.len()
            )));
        }
    }
    Ok(parsed)
}

pub fn values_from_csv<T: Scalar>(text: &str) -> Result<Vec<T>, WalshError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(text.trim_start().starts_with("index"))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: Vec<(usize, T)> = Vec::new();
    for (row, record) in reader.deserialize::<(usize, String)>().enumerate() {
        let (idx, val) = record.map_err(|e| WalshError::Parse(format!("row {}: {e}", row + 1)))?;
        let val = T::from_text(&val).ok_or_else(|| WalshError::Parse(format!("row {}: bad value", row + 1)))?;
        out.push((idx, val));
    }
    out.sort_by_key(|(i, _)| *i);
    if out.iter().enumerate().any(|(k, (i, _))| k != *i) {
        return Err(WalshError::Parse("indices must be 0..len without gaps".into()));
    }
    Ok(out.into_iter().map(|(_, v)| v).collect())
}

pub fn grid_to_json<T: Scalar>(f: &GridFunction<T>) -> Value {
    values_to_json(f.resolution(), f.values())
}

pub fn spectrum_to_json<T: Scalar>(c: &SpectrumVector<T>) -> Value {
    values_to_json(c.resolution(), c.coeffs())
}

/// Reads a grid function from CSV or JSON, sniffing the format.
pub fn read_grid<T: Scalar>(text: &str) -> Result<GridFunction<T>, WalshError> {
    let values = if text.trim_start().starts_with('{') {
        values_from_json(text)?
    } else {
        values_from_csv(text)?
    };
    GridFunction::new(values)
}

pub fn read_spectrum<T: Scalar>(text: &str) -> Result<SpectrumVector<T>, WalshError> {
    let values = if text.trim_start().starts_with('{') {
        values_from_json(text)?
    } else {
        values_from_csv(text)?
    };
    SpectrumVector::new(values)
}
