mod block;
mod demo;
mod diverge;
mod means;
mod walsh;

use serde::Serialize;
use serde_json::Value;
use walsh_vp::scalar::{NumberMode, Scalar};

use crate::config::RunConfig;
use crate::report::{float_text, CsvTable, Status, Throughput};
use crate::{BlockCmd, CliError, Command, DemoCmd, DivergeCmd, VpCmd, WalshCmd};

pub struct Outcome {
    pub status: Status,
    pub payload: Value,
    pub tables: Vec<CsvTable>,
    pub throughput: Vec<Throughput>,
}

impl Outcome {
    pub fn new(status: Status, payload: Value) -> Self {
        Outcome {
            status,
            payload,
            tables: Vec::new(),
            throughput: Vec::new(),
        }
    }

    pub fn with_table(mut self, t: CsvTable) -> Self {
        self.tables.push(t);
        self
    }
}

pub fn pass_or_fail(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

pub fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// CSV cell: `p/q` in exact mode, shortest round-trip decimal otherwise.
pub fn cell<T: Scalar>(v: &T) -> String {
    match T::MODE {
        NumberMode::Exact => v.to_text(),
        NumberMode::Floating => float_text(v.to_f64()),
    }
}

/// JSON value: string in exact mode, number otherwise.
pub fn json_value<T: Scalar>(v: &T) -> Value {
    match T::MODE {
        NumberMode::Exact => Value::String(v.to_text()),
        NumberMode::Floating => serde_json::json!(v.to_f64()),
    }
}

/// Runs `$f::<T>(args)` with `T` chosen by the configured number mode.
macro_rules! by_mode {
    ($cfg:expr, $f:ident($($arg:expr),* $(,)?)) => {
        match $cfg.number_mode {
            walsh_vp::scalar::NumberMode::Exact => $f::<num_rational::BigRational>($($arg),*),
            walsh_vp::scalar::NumberMode::Floating => $f::<f64>($($arg),*),
        }
    };
}
pub(crate) use by_mode;

pub fn dispatch(cmd: &Command, cfg: &mut RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Walsh { cmd } => match cmd {
            WalshCmd::Fwht { function, inverse, order } => walsh::fwht(cfg, function, *inverse, *order),
            WalshCmd::PartialSums { function, strategy } => walsh::partial_sums(cfg, function, *strategy),
            WalshCmd::Spectrum { function } => walsh::spectrum(cfg, function),
        },
        Command::Vp { cmd } => match cmd {
            VpCmd::Curve { function, window, n_max } => means::curve(cfg, function, window, *n_max),
            VpCmd::Maximal { function, window, n_max } => means::maximal(cfg, function, window, *n_max),
            VpCmd::Weaktype {
                m,
                samples,
                function,
                n_max,
            } => means::weaktype(cfg, *m, *samples, function.as_ref(), *n_max),
        },
        Command::Blockpoly { cmd } => match cmd {
            BlockCmd::Build { block } => block::build(cfg, block),
            BlockCmd::Verify { block, corollary } => block::verify(cfg, block, *corollary),
            BlockCmd::Witness { block, x, window } => block::witness(cfg, block, x, window),
        },
        Command::Diverge { cmd } => match cmd {
            DivergeCmd::Plan { plan } => diverge::plan(cfg, plan),
            DivergeCmd::Certify {
                plan,
                truncate,
                samples,
            } => diverge::certify(cfg, plan, *truncate, *samples),
            DivergeCmd::Membership {
                plan,
                truncate,
                grid_max_m,
            } => diverge::membership(cfg, plan, *truncate, *grid_max_m),
        },
        Command::Demo { cmd } => match cmd {
            DemoCmd::Converge {
                function,
                window,
                n_max,
            } => demo::converge(cfg, function, window, *n_max),
            DemoCmd::Diverge { plan, samples } => demo::diverge(cfg, plan, *samples),
        },
    }
}

/// `--lambda` overrides the config; the command default fills the gap.
pub fn window(cfg: &mut RunConfig, arg: &crate::WindowArg, default: &str) -> Result<walsh_vp::window::WindowSequence, CliError> {
    if let Some(w) = &arg.lambda {
        cfg.lambda = Some(w.clone());
    }
    cfg.window_or(default)
}
