//! Grid functions named on the command line.

use std::path::PathBuf;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use walsh_vp::grid_io::read_grid;
use walsh_vp::random::{random_grid, random_rational_grid, random_walsh_polynomial};
use walsh_vp::scalar::{parse_rational, Scalar};
use walsh_vp::walsh::GridFunction;

use crate::CliError;

/// Largest resolution a generated function may have.
pub const MAX_SOURCE_RESOLUTION: u32 = 26;

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    /// CSV or JSON grid, as written by `walsh fwht` and friends.
    File(PathBuf),
    /// Uniform values in `[-1, 1)`.
    Random { m: u32 },
    /// `Random` normalized to `‖f‖₁ = 1`.
    UnitL1 { m: u32 },
    /// Rationals with small denominators.
    Rational { m: u32 },
    /// Random Walsh polynomial of degree `< degree`.
    Poly { degree: u64, m: u32 },
    Constant { c: BigRational, m: u32 },
    /// The single Walsh function `w_n`.
    Walsh { n: u64, m: u32 },
}

fn parse_m(s: &str) -> Option<u32> {
    s.trim().parse().ok().filter(|&m| m <= MAX_SOURCE_RESOLUTION)
}

impl FromStr for FunctionSpec {
    type Err = CliError;

    /// `file:PATH`, `random:M`, `unit-l1:M`, `rational:M`, `poly:D:M`,
    /// `constant:C:M`, `walsh:N:M`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CliError::Usage(format!("cannot parse function {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let two = || rest.rsplit_once(':').ok_or_else(bad);
        let spec = match kind {
            "file" => FunctionSpec::File(PathBuf::from(rest)),
            "random" => FunctionSpec::Random { m: parse_m(rest).ok_or_else(bad)? },
            "unit-l1" => FunctionSpec::UnitL1 { m: parse_m(rest).ok_or_else(bad)? },
            "rational" => FunctionSpec::Rational { m: parse_m(rest).ok_or_else(bad)? },
            "poly" => {
                let (d, m) = two()?;
                let m = parse_m(m).ok_or_else(bad)?;
                let degree: u64 = d.trim().parse().map_err(|_| bad())?;
                if degree > 1u64 << m {
                    return Err(CliError::Usage(format!("degree {degree} exceeds 2^{m}")));
                }
                FunctionSpec::Poly { degree, m }
            }
            "constant" => {
                let (c, m) = two()?;
                FunctionSpec::Constant {
                    c: parse_rational(c).ok_or_else(bad)?,
                    m: parse_m(m).ok_or_else(bad)?,
                }
            }
            "walsh" => {
                let (n, m) = two()?;
                let m = parse_m(m).ok_or_else(bad)?;
                let n: u64 = n.trim().parse().map_err(|_| bad())?;
                if n >= 1u64 << m {
                    return Err(CliError::Usage(format!("w_{n} is not resolved at resolution {m}")));
                }
                FunctionSpec::Walsh { n, m }
            }
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

impl std::fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionSpec::File(p) => write!(f, "file:{}", p.display()),
            FunctionSpec::Random { m } => write!(f, "random:{m}"),
            FunctionSpec::UnitL1 { m } => write!(f, "unit-l1:{m}"),
            FunctionSpec::Rational { m } => write!(f, "rational:{m}"),
            FunctionSpec::Poly { degree, m } => write!(f, "poly:{degree}:{m}"),
            FunctionSpec::Constant { c, m } => write!(f, "constant:{}:{m}", walsh_vp::scalar::rational_text(c)),
            FunctionSpec::Walsh { n, m } => write!(f, "walsh:{n}:{m}"),
        }
    }
}

impl FunctionSpec {
    /// An upper bound on the Walsh degree when it is known without
    /// transforming.
    pub fn degree(&self) -> Option<u64> {
        match self {
            FunctionSpec::Poly { degree, .. } => Some(*degree),
            FunctionSpec::Constant { c, .. } => Some(u64::from(!Zero::is_zero(c))),
            FunctionSpec::Walsh { n, .. } => Some(n + 1),
            _ => None,
        }
    }

    /// Resolution of generated functions; files are only known once read.
    pub fn resolution(&self) -> Option<u32> {
        match self {
            FunctionSpec::File(_) => None,
            FunctionSpec::Random { m }
            | FunctionSpec::UnitL1 { m }
            | FunctionSpec::Rational { m }
            | FunctionSpec::Poly { m, .. }
            | FunctionSpec::Constant { m, .. }
            | FunctionSpec::Walsh { m, .. } => Some(*m),
        }
    }

    pub fn build<T: Scalar>(&self, seed: u64) -> Result<GridFunction<T>, CliError> {
        let exact = |v: &f64| T::from_rational(&BigRational::from_float(*v).expect("finite"));
        let f = match self {
            FunctionSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
                // CSV artifacts start with a `#` envelope line
                let body: String = text
                    .lines()
                    .filter(|l| !l.starts_with('#'))
                    .map(|l| format!("{l}\n"))
                    .collect();
                read_grid(&body).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            FunctionSpec::Random { m } => GridFunction::new(random_grid(*m, seed).values().iter().map(exact).collect())
                .expect("power-of-two grid"),
            FunctionSpec::UnitL1 { m } => {
                // normalized in exact arithmetic so both modes see the same function
                let raw: Vec<BigRational> = random_grid(*m, seed)
                    .values()
                    .iter()
                    .map(|v| BigRational::from_float(*v).expect("finite"))
                    .collect();
                let norm = raw.iter().fold(<BigRational as Zero>::zero(), |acc, v| acc + Signed::abs(v)) / BigRational::from_integer((raw.len() as i64).into());
                GridFunction::new(raw.iter().map(|v| T::from_rational(&(v / &norm))).collect())
                    .expect("power-of-two grid")
            }
            FunctionSpec::Rational { m } => {
                GridFunction::new(random_rational_grid(*m, seed).values().iter().map(T::from_rational).collect())
                    .expect("power-of-two grid")
            }
            FunctionSpec::Poly { degree, m } => random_walsh_polynomial(*degree, *m, seed),
            FunctionSpec::Constant { c, m } => GridFunction::constant(*m, T::from_rational(c)),
            FunctionSpec::Walsh { n, m } => {
                let w = GridFunction::<f64>::walsh(*m, *n);
                GridFunction::new(w.values().iter().map(exact).collect()).expect("power-of-two grid")
            }
        };
        Ok(f)
    }
}
