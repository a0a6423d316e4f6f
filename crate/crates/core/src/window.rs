//! Window sequences `λ = (λ_n)`: nondecreasing integers with `1 <= λ_n <= n`.

use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::pow2;
use crate::error::WindowError;
use crate::scalar::{parse_rational, rational_text};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowFamily {
    /// `λ_n = min(c, n)`.
    Constant { c: u64 },
    /// `λ_n = max(1, ⌈θ n⌉)`, `0 < θ <= 1`.
    Proportional { theta: BigRational },
    /// `λ_n = max(1, ⌊n^θ⌋)`, `0 < θ < 1`.
    Root { theta: BigRational },
    /// Running maximum of `max(1, ⌊n / ⌈log₂(n+1)⌉⌋)`; the raw sequence
    /// dips at powers of two, so it is clamped to be nondecreasing.
    LogRatio,
    /// Explicit prefix `λ_1, …, λ_len`.
    Table { values: Vec<u64> },
}

/// Serialized as its text form, e.g. `"root:1/2"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct WindowSequence {
    family: WindowFamily,
}

fn one_if_zero(v: BigUint) -> BigUint {
    if v.is_zero() {
        BigUint::one()
    } else {
        v
    }
}

fn log_ratio_raw(n: &BigUint) -> BigUint {
    let len = n.bits();
    one_if_zero(n / BigUint::from(len))
}

impl WindowSequence {
    pub fn new(family: WindowFamily) -> Result<Self, WindowError> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        match &family {
            WindowFamily::Constant { c } if *c == 0 => {
                return Err(WindowError::Parameter("constant window needs c >= 1".into()))
            }
            WindowFamily::Proportional { theta } if *theta <= zero || *theta > one => {
                return Err(WindowError::Parameter("proportional window needs 0 < theta <= 1".into()))
            }
            WindowFamily::Root { theta } if *theta <= zero || *theta >= one => {
                return Err(WindowError::Parameter("root window needs 0 < theta < 1".into()))
            }
            WindowFamily::Table { values } if values.is_empty() => {
                return Err(WindowError::Parameter("table window needs at least one entry".into()))
            }
            _ => {}
        }
        let w = WindowSequence { family };
        if let WindowFamily::Table { values } = &w.family {
            w.validate(values.len() as u64)?;
        }
        Ok(w)
    }

    pub fn constant(c: u64) -> Result<Self, WindowError> {
        Self::new(WindowFamily::Constant { c })
    }

    pub fn proportional(theta: BigRational) -> Result<Self, WindowError> {
        Self::new(WindowFamily::Proportional { theta })
    }

    pub fn root(theta: BigRational) -> Result<Self, WindowError> {
        Self::new(WindowFamily::Root { theta })
    }

    pub fn log_ratio() -> Self {
        WindowSequence {
            family: WindowFamily::LogRatio,
        }
    }

    pub fn table(values: Vec<u64>) -> Result<Self, WindowError> {
        Self::new(WindowFamily::Table { values })
    }

    pub fn family(&self) -> &WindowFamily {
        &self.family
    }

    /// `λ_n` for `n >= 1`.
    pub fn at(&self, n: &BigUint) -> Result<BigUint, WindowError> {
        if n.is_zero() {
            return Err(WindowError::OutOfBounds {
                n: "0".into(),
                lambda: "undefined".into(),
            });
        }
        Ok(match &self.family {
            WindowFamily::Constant { c } => n.min(&BigUint::from(*c)).clone(),
            WindowFamily::Proportional { theta } => {
                let p = theta.numer().to_biguint().expect("theta > 0");
                let q = theta.denom().to_biguint().expect("denominator > 0");
                one_if_zero((p * n + &q - 1u32) / q)
            }
            WindowFamily::Root { theta } => {
                let p = theta.numer().to_u32().expect("small exponent numerator");
                let q = theta.denom().to_u32().expect("small exponent denominator");
                one_if_zero(n.pow(p).nth_root(q))
            }
            WindowFamily::LogRatio => {
                let raw = log_ratio_raw(n);
                let len = n.bits();
                if len >= 2 {
                    let prev_band_top = pow2(len - 1) - 1u32;
                    raw.max(log_ratio_raw(&prev_band_top))
                } else {
                    raw
                }
            }
            WindowFamily::Table { values } => {
                let idx = n.to_usize().filter(|&i| i <= values.len()).ok_or_else(|| {
                    WindowError::BeyondTable {
                        n: n.to_string(),
                        len: values.len(),
                    }
                })?;
                BigUint::from(values[idx - 1])
            }
        })
    }

    pub fn at_u64(&self, n: u64) -> Result<u64, WindowError> {
        match &self.family {
            WindowFamily::Constant { c } if n >= 1 => Ok(n.min(*c)),
            WindowFamily::Table { values } if n >= 1 => values
                .get(n as usize - 1)
                .copied()
                .ok_or_else(|| WindowError::BeyondTable {
                    n: n.to_string(),
                    len: values.len(),
                }),
            _ => Ok(self
                .at(&BigUint::from(n))?
                .to_u64()
                .expect("lambda_n <= n fits in u64")),
        }
    }

    /// Whether `λ_n` at `n` differs from the unclamped family formula.
    pub fn is_clamped_at(&self, n: &BigUint) -> bool {
        match self.family {
            WindowFamily::LogRatio => self.at(n).map(|v| v != log_ratio_raw(n)).unwrap_or(false),
            _ => false,
        }
    }

    /// `[λ_0 = 0, λ_1, …, λ_{n_max}]`, checking the window invariants on the
    /// whole range.
    pub fn prefix(&self, n_max: u64) -> Result<Vec<u64>, WindowError> {
        let mut out = Vec::with_capacity(n_max as usize + 1);
        out.push(0);
        for n in 1..=n_max {
            let l = self.at_u64(n)?;
            if l < 1 || l > n {
                return Err(WindowError::OutOfBounds {
                    n: n.to_string(),
                    lambda: l.to_string(),
                });
            }
            let prev = out[n as usize - 1];
            if n >= 2 && l < prev {
                return Err(WindowError::Decreasing {
                    n: n - 1,
                    lambda: prev,
                    next: l,
                });
            }
            out.push(l);
        }
        Ok(out)
    }

    /// Checks `1 <= λ_n <= n` and `λ_n <= λ_{n+1}` for `1 <= n <= n_max`.
    pub fn validate(&self, n_max: u64) -> Result<(), WindowError> {
        self.prefix(n_max).map(|_| ())
    }

    /// A finite bound on `sup n/λ_n`, when the family has one.
    pub fn bounded_ratio(&self) -> Option<BigRational> {
        match &self.family {
            WindowFamily::Proportional { theta } => Some(theta.recip()),
            _ => None,
        }
    }

    /// Smallest `m` for which the family's analytic statement guarantees
    /// `N/λ_N > 2^s` at `N = 2^m`, and at `N = 2^{m'}` for every `m' >= m`.
    pub fn witness_exponent(&self, s: u64) -> Option<BigUint> {
        match &self.family {
            // λ_N <= N^θ, so N/λ_N >= 2^{m(1-θ)} > 2^s once m(q-p) > sq.
            WindowFamily::Root { theta } => {
                let p = theta.numer().to_biguint()?;
                let q = theta.denom().to_biguint()?;
                Some(BigUint::from(s) * &q / (q - p) + 1u32)
            }
            // λ_N = c, so N/λ_N > 2^s once 2^m > c 2^s.
            WindowFamily::Constant { c } => Some(BigUint::from(s + u64::from(c.ilog2()) + 1)),
            // λ_{2^m} = ⌊(2^m - 1)/m⌋ for m >= 2, so N/λ_N > m >= 2^s.
            WindowFamily::LogRatio => Some(pow2(s).max(BigUint::from(2u32))),
            WindowFamily::Proportional { .. } | WindowFamily::Table { .. } => None,
        }
    }

    /// Human-readable form of the analytic statement behind
    /// [`witness_exponent`](Self::witness_exponent).
    pub fn witness_statement(&self) -> Option<String> {
        match &self.family {
            WindowFamily::Root { theta } => Some(format!(
                "lambda_N <= N^{}; N = 2^m gives N/lambda_N >= 2^(m(1-theta))",
                rational_text(theta)
            )),
            WindowFamily::Constant { c } => Some(format!("lambda_N = {c} for N >= {c}")),
            WindowFamily::LogRatio => {
                Some("lambda_(2^m) = floor((2^m - 1)/m) for m >= 2, so N/lambda_N > m".into())
            }
            _ => None,
        }
    }

    /// Upper end of explicitly known values, if any.
    pub fn materialized_len(&self) -> Option<u64> {
        match &self.family {
            WindowFamily::Table { values } => Some(values.len() as u64),
            _ => None,
        }
    }
}

impl fmt::Display for WindowSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            WindowFamily::Constant { c } => write!(f, "constant:{c}"),
            WindowFamily::Proportional { theta } => write!(f, "proportional:{}", rational_text(theta)),
            WindowFamily::Root { theta } => write!(f, "root:{}", rational_text(theta)),
            WindowFamily::LogRatio => write!(f, "log-ratio"),
            WindowFamily::Table { values } => {
                let v: Vec<String> = values.iter().map(u64::to_string).collect();
                write!(f, "table:{}", v.join(","))
            }
        }
    }
}

impl From<WindowSequence> for String {
    fn from(w: WindowSequence) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for WindowSequence {
    type Error = WindowError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl std::str::FromStr for WindowSequence {
    type Err = WindowError;

    /// `constant:c`, `proportional:θ`, `root:θ`, `log-ratio`, `table:λ1,λ2,…`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WindowError::Parse(s.to_string());
        let (name, arg) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        match name {
            "constant" => WindowSequence::constant(arg.parse().map_err(|_| bad())?),
            "proportional" => WindowSequence::proportional(parse_rational(arg).ok_or_else(bad)?),
            "root" => WindowSequence::root(parse_rational(arg).ok_or_else(bad)?),
            "log-ratio" => Ok(WindowSequence::log_ratio()),
            "table" => WindowSequence::table(
                arg.split(',')
                    .map(|v| v.trim().parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?,
            ),
            _ => Err(bad()),
        }
    }
}
