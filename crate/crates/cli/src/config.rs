//! Run configuration, read from a TOML file and overridden by flags.
//!
//! Every key is optional:
//!
//! | key              | type    | default         | meaning                                              |
//! |------------------|---------|-----------------|------------------------------------------------------|
//! | `number_mode`    | string  | `"floating"`    | `exact` (rationals) or `floating` (f64)              |
//! | `max_resolution` | integer | `12`            | largest grid resolution `M` for dense tables         |
//! | `max_dense_m`    | integer | `24`            | largest `m` for dense block-polynomial grids         |
//! | `gamma_cap`      | integer | `65536`         | strict plans stop with a symbolic tail above this γ  |
//! | `seed`           | integer | `0x5EED0FD1AD`  | seed for every random draw                           |
//! | `output_dir`     | string  | unset           | write artifacts here; unset prints JSON to stdout    |
//! | `lambda`         | string  | per command     | window, e.g. `root:1/2`, `proportional:1/2`          |
//! | `omega`          | string  | `"identity"`    | Orlicz function, e.g. `log-power:1/4`                |
//! | `mode`           | string  | `"relaxed:1/4"` | `strict` or `relaxed:<margin>`                       |
//! | `levels`         | integer | `2`             | number of plan levels                                |

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walsh_vp::block::DEFAULT_MAX_DENSE_M;
use walsh_vp::diverge::{PlanMode, DEFAULT_GAMMA_CAP};
use walsh_vp::orlicz::OrliczFunction;
use walsh_vp::random::DEFAULT_SEED;
use walsh_vp::scalar::NumberMode;
use walsh_vp::window::WindowSequence;

use crate::CliError;

pub const DEFAULT_MAX_RESOLUTION: u32 = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub number_mode: NumberMode,
    pub max_resolution: u32,
    pub max_dense_m: u64,
    pub gamma_cap: u64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<WindowSequence>,
    pub omega: OrliczFunction,
    pub mode: PlanMode,
    pub levels: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            number_mode: NumberMode::Floating,
            max_resolution: DEFAULT_MAX_RESOLUTION,
            max_dense_m: DEFAULT_MAX_DENSE_M,
            gamma_cap: DEFAULT_GAMMA_CAP,
            seed: DEFAULT_SEED,
            output_dir: None,
            lambda: None,
            omega: OrliczFunction::identity(),
            mode: PlanMode::Relaxed {
                margin: num_rational::BigRational::new(1.into(), 4.into()),
            },
            levels: 2,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let zero = [
            ("max_resolution", self.max_resolution == 0),
            ("max_dense_m", self.max_dense_m == 0),
            ("gamma_cap", self.gamma_cap == 0),
            ("levels", self.levels == 0),
        ];
        match zero.iter().find(|(_, z)| *z) {
            Some((key, _)) => Err(CliError::Usage(format!("{key} must be positive"))),
            None if self.max_resolution > 30 => Err(CliError::Usage("max_resolution must be at most 30".into())),
            None => Ok(()),
        }
    }

    /// The configured window, or `default` when none was given.
    pub fn window_or(&mut self, default: &str) -> Result<WindowSequence, CliError> {
        if self.lambda.is_none() {
            self.lambda = Some(default.parse().map_err(|e| CliError::Usage(format!("{e}")))?);
        }
        Ok(self.lambda.clone().expect("set above"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let text = r#"
number_mode = "exact"
max_resolution = 10
seed = 7
lambda = "root:1/2"
omega = "log-power:1/4"
mode = "strict"
levels = 1
"#;
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.number_mode, NumberMode::Exact);
        assert_eq!(c.lambda.as_ref().unwrap().to_string(), "root:1/2");
        assert_eq!(c.mode, PlanMode::Strict);
        let back = RunConfig::from_toml(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(RunConfig::from_toml("colour = 3").is_err());
    }

    #[test]
    fn zero_budget_rejected() {
        let c = RunConfig {
            max_dense_m: 0,
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
