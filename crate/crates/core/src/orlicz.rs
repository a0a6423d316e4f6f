//! Orlicz functions `ω`: convex, increasing, `ω(0) = 0`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::pow2;
use crate::error::OrliczError;
use crate::scalar::{parse_rational, rational_text};
use crate::surd::big_ratio_f64;

/// Relative widening applied to floating evaluations of `ω(t)/t` before
/// they are used as rational upper bounds.
pub const OUTWARD_MARGIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrliczFamily {
    /// `ω(t) = t`
    Identity,
    /// `ω(t) = t (ln(1+t))^β`, `0 < β < 1/2`
    LogPower { beta: BigRational },
    /// Piecewise linear through `(0, 0), (t_1, ω_1), …`, extended linearly.
    Table { points: Vec<(BigRational, BigRational)> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct OrliczFunction {
    family: OrliczFamily,
}

impl OrliczFunction {
    pub fn identity() -> Self {
        OrliczFunction {
            family: OrliczFamily::Identity,
        }
    }

    pub fn log_power(beta: BigRational) -> Result<Self, OrliczError> {
        let half = BigRational::new(1.into(), 2.into());
        if !beta.is_positive() || beta >= half {
            return Err(OrliczError::Parameter("log-power needs 0 < beta < 1/2".into()));
        }
        Ok(OrliczFunction {
            family: OrliczFamily::LogPower { beta },
        })
    }

    pub fn table(points: Vec<(BigRational, BigRational)>) -> Result<Self, OrliczError> {
        let bad = |m: &str| Err(OrliczError::Parameter(format!("table: {m}")));
        if points.len() < 2 {
            return bad("needs (0,0) and at least one more point");
        }
        if !points[0].0.is_zero() || !points[0].1.is_zero() {
            return bad("first point must be (0, 0)");
        }
        let mut prev_slope: Option<BigRational> = None;
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return bad("abscissae must increase");
            }
            let slope = (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0);
            if !slope.is_positive() {
                return bad("values must increase");
            }
            if prev_slope.as_ref().is_some_and(|p| slope < *p) {
                return bad("slopes must not decrease (convexity)");
            }
            prev_slope = Some(slope);
        }
        Ok(OrliczFunction {
            family: OrliczFamily::Table { points },
        })
    }

    pub fn family(&self) -> &OrliczFamily {
        &self.family
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.family {
            OrliczFamily::Identity => t,
            OrliczFamily::LogPower { beta } => t * t.ln_1p().powf(beta.to_f64().unwrap_or(0.0)),
            OrliczFamily::Table { .. } => self
                .eval_exact(&BigRational::from_float(t).unwrap_or_else(BigRational::zero))
                .map(|v| big_ratio_f64(&v))
                .unwrap_or(f64::NAN),
        }
    }

    /// `ln ω(e^{ln_t})`, usable far beyond the `f64` range of `t`.
    pub fn ln_eval(&self, ln_t: f64) -> f64 {
        if ln_t < 600.0 {
            return self.eval(ln_t.exp()).ln();
        }
        match &self.family {
            OrliczFamily::Identity => ln_t,
            // ln(1 + t) = ln t to within e^{-600}
            OrliczFamily::LogPower { beta } => ln_t + beta.to_f64().unwrap_or(0.0) * ln_t.ln(),
            OrliczFamily::Table { points } => {
                let (x0, y0) = &points[points.len() - 2];
                let (x1, y1) = &points[points.len() - 1];
                let slope = (y1 - y0) / (x1 - x0);
                ln_t + big_ratio_f64(&slope).ln()
            }
        }
    }

    /// `ω(t)` exactly, when the family is rational-valued.
    pub fn eval_exact(&self, t: &BigRational) -> Option<BigRational> {
        match &self.family {
            OrliczFamily::Identity => Some(t.clone()),
            OrliczFamily::LogPower { .. } => {
                if t.is_zero() {
                    Some(BigRational::zero())
                } else {
                    None
                }
            }
            OrliczFamily::Table { points } => {
                let idx = points.iter().position(|(x, _)| x >= t).unwrap_or(points.len() - 1);
                let i = idx.max(1);
                let (x0, y0) = &points[i - 1];
                let (x1, y1) = &points[i];
                Some(y0 + (y1 - y0) / (x1 - x0) * (t - x0))
            }
        }
    }

    /// `ln(ω(2^e)/2^e)` in floating point, finite for every `e >= 0`.
    pub fn ln_ratio_at_pow2(&self, e: u64) -> f64 {
        match &self.family {
            OrliczFamily::Identity => 0.0,
            OrliczFamily::LogPower { beta } => {
                beta.to_f64().unwrap_or(0.0) * ln_ln1p_pow2(e).unwrap_or(f64::NEG_INFINITY)
            }
            OrliczFamily::Table { .. } => big_ratio_f64(&self.ratio_upper_at_pow2(e).0).ln(),
        }
    }

    /// A rational `U >= ω(2^e)/2^e` and whether `U` is exact.
    pub fn ratio_upper_at_pow2(&self, e: u64) -> (BigRational, bool) {
        match &self.family {
            OrliczFamily::Identity => (BigRational::one(), true),
            OrliczFamily::LogPower { .. } => {
                let v = self.ln_ratio_at_pow2(e).exp() * (1.0 + OUTWARD_MARGIN);
                (BigRational::from_float(v).expect("finite ratio"), false)
            }
            OrliczFamily::Table { .. } => {
                let t = BigRational::from_integer(BigInt::from(pow2(e)));
                let v = self.eval_exact(&t).expect("table is exact");
                (v / t, true)
            }
        }
    }

    /// Sampled shape checks on a logarithmic grid of `points >= 256` nodes.
    pub fn check(&self, points: usize) -> OrliczReport {
        let points = points.max(256);
        let (lo, hi) = (-20.0f64, 60.0f64);
        let ts: Vec<f64> = (0..points)
            .map(|i| 2f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64))
            .collect();
        let ws: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect();
        let zero_at_zero = self.eval(0.0) == 0.0;
        let increasing = ws.windows(2).all(|w| w[1] > w[0]);
        let slopes: Vec<f64> = (1..points).map(|i| (ws[i] - ws[i - 1]) / (ts[i] - ts[i - 1])).collect();
        let convex = slopes
            .windows(2)
            .all(|s| s[1] >= s[0] - 1e-9 * s[0].abs().max(1.0));
        let ratios: Vec<f64> = ts.iter().zip(&ws).map(|(t, w)| w / t).collect();
        let ratio_nondecreasing = ratios
            .windows(2)
            .all(|r| r[1] >= r[0] - 1e-12 * r[0].abs().max(1.0));
        // ω(t)/(t √ln t) at t = 2^e on the tail
        let tail: Vec<(u64, f64)> = (0..=12)
            .map(|i| 8u64 << i)
            .map(|e| {
                let ln_t = e as f64 * std::f64::consts::LN_2;
                (e, (self.ln_ratio_at_pow2(e) - 0.5 * ln_t.ln()).exp())
            })
            .collect();
        let tail_decreasing = tail.windows(2).all(|w| w[1].1 < w[0].1);
        OrliczReport {
            omega: self.to_string(),
            grid_points: points,
            zero_at_zero,
            increasing,
            convex,
            ratio_nondecreasing,
            subcritical_tail: tail
                .into_iter()
                .map(|(e, v)| SubcriticalPoint { log2_t: e, value: v })
                .collect(),
            subcritical: tail_decreasing,
            flagged: !(zero_at_zero && increasing && convex && ratio_nondecreasing && tail_decreasing),
        }
    }
}

/// `ln ln(1 + 2^e)`.
fn ln_ln1p_pow2(e: u64) -> Option<f64> {
    let ln = if e < 1000 {
        2f64.powi(e as i32).ln_1p()
    } else {
        e as f64 * std::f64::consts::LN_2
    };
    (ln > 0.0).then(|| ln.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubcriticalPoint {
    pub log2_t: u64,
    /// `ω(t) / (t √ln t)`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrliczReport {
    pub omega: String,
    pub grid_points: usize,
    pub zero_at_zero: bool,
    pub increasing: bool,
    pub convex: bool,
    pub ratio_nondecreasing: bool,
    pub subcritical_tail: Vec<SubcriticalPoint>,
    pub subcritical: bool,
    pub flagged: bool,
}

impl fmt::Display for OrliczFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            OrliczFamily::Identity => write!(f, "identity"),
            OrliczFamily::LogPower { beta } => write!(f, "log-power:{}", rational_text(beta)),
            OrliczFamily::Table { points } => {
                let p: Vec<String> = points
                    .iter()
                    .map(|(t, w)| format!("{}:{}", rational_text(t), rational_text(w)))
                    .collect();
                write!(f, "table:{}", p.join(","))
            }
        }
    }
}

impl From<OrliczFunction> for String {
    fn from(w: OrliczFunction) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for OrliczFunction {
    type Error = OrliczError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl std::str::FromStr for OrliczFunction {
    type Err = OrliczError;

    /// `identity`, `log-power:β`, `table:t0:w0,t1:w1,…`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || OrliczError::Parse(s.to_string());
        let (name, arg) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        match name {
            "identity" => Ok(OrliczFunction::identity()),
            "log-power" => OrliczFunction::log_power(parse_rational(arg).ok_or_else(bad)?),
            "table" => {
                let points = arg
                    .split(',')
                    .map(|p| {
                        let (t, w) = p.split_once(':').ok_or_else(bad)?;
                        Ok((parse_rational(t).ok_or_else(bad)?, parse_rational(w).ok_or_else(bad)?))
                    })
                    .collect::<Result<Vec<_>, OrliczError>>()?;
                OrliczFunction::table(points)
            }
            _ => Err(bad()),
        }
    }
}
