//! `walsh-vp` command-line front end: argument parsing, configuration,
//! dispatch and report emission.

pub mod config;
pub mod report;
pub mod source;

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use walsh_vp::diverge::PlanMode;
use walsh_vp::dyadic::DyadicPoint;
use walsh_vp::error::{BlockError, MeansError, PlanError, WalshError, WindowError};
use walsh_vp::orlicz::OrliczFunction;
use walsh_vp::scalar::NumberMode;
use walsh_vp::window::WindowSequence;

use crate::config::RunConfig;
use crate::report::{write_artifacts, ReportEnvelope, Status, Timing};
use crate::source::FunctionSpec;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFICATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Budget(String),
    Verification(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Budget(_) => EXIT_BUDGET,
            CliError::Verification(_) => EXIT_VERIFICATION,
        }
    }

    fn class(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Budget(_) => "budget",
            CliError::Verification(_) => "verification",
            CliError::Io(_) => "io",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Budget(m) | CliError::Verification(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<WalshError> for CliError {
    fn from(e: WalshError) -> Self {
        match e {
            WalshError::Budget { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<WindowError> for CliError {
    fn from(e: WindowError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<MeansError> for CliError {
    fn from(e: MeansError) -> Self {
        match e {
            MeansError::Walsh(w) => w.into(),
            MeansError::Window(w) => w.into(),
        }
    }
}

impl From<BlockError> for CliError {
    fn from(e: BlockError) -> Self {
        match e {
            BlockError::Budget { .. } => CliError::Budget(e.to_string()),
            BlockError::Verification { .. } | BlockError::NoQualifyingEll { .. } => {
                CliError::Verification(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        match e {
            PlanError::Budget { .. } | PlanError::NoWitness { .. } => CliError::Budget(e.to_string()),
            PlanError::Invariant { .. } | PlanError::Certificate { .. } => CliError::Verification(e.to_string()),
            PlanError::Block(b) => b.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "walsh-vp", version, about = "Walsh transforms, de la Vallée Poussin means and divergence certificates")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// exact or floating
    #[arg(long, global = true)]
    pub number_mode: Option<NumberMode>,
    #[arg(long, global = true)]
    pub max_resolution: Option<u32>,
    #[arg(long, global = true)]
    pub max_dense_m: Option<u64>,
    /// Largest γ a strict plan evaluates numerically.
    #[arg(long, global = true)]
    pub gamma_cap: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the JSON report and CSV tables here.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Add wall-clock timing to the report (breaks byte-identical reruns).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transforms and partial sums.
    Walsh {
        #[command(subcommand)]
        cmd: WalshCmd,
    },
    /// de la Vallée Poussin means and maximal functions.
    Vp {
        #[command(subcommand)]
        cmd: VpCmd,
    },
    /// Block polynomials.
    Blockpoly {
        #[command(subcommand)]
        cmd: BlockCmd,
    },
    /// Divergence plans, certificates and Orlicz membership.
    Diverge {
        #[command(subcommand)]
        cmd: DivergeCmd,
    },
    /// End-to-end demonstrations.
    Demo {
        #[command(subcommand)]
        cmd: DemoCmd,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Paley,
    Hadamard,
    Sequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    Incremental,
    RowInverse,
}

#[derive(Debug, Subcommand)]
pub enum WalshCmd {
    /// Walsh–Paley coefficients of a grid function (or the inverse).
    Fwht {
        #[arg(long, default_value = "random:8")]
        function: FunctionSpec,
        /// Treat the input as coefficients and synthesize the grid.
        #[arg(long)]
        inverse: bool,
        #[arg(long, value_enum, default_value = "paley")]
        order: Order,
    },
    /// S_n(f; x_i) for 0 <= n <= 2^M at every cell; CSV columns n,i,value.
    PartialSums {
        #[arg(long, default_value = "random:6")]
        function: FunctionSpec,
        #[arg(long, value_enum, default_value = "incremental")]
        strategy: Strategy,
    },
    /// Frequencies with nonzero coefficient; CSV columns k,coefficient.
    Spectrum {
        #[arg(long, default_value = "random:6")]
        function: FunctionSpec,
    },
}

#[derive(Debug, Args)]
pub struct WindowArg {
    /// Window family, e.g. proportional:1/2, root:1/2, constant:3, log-ratio.
    #[arg(long)]
    pub lambda: Option<WindowSequence>,
}

#[derive(Debug, Subcommand)]
pub enum VpCmd {
    /// V_n(f; x_i) for 1 <= n <= n_max; CSV columns n,i,value.
    Curve {
        #[arg(long, default_value = "poly:32:5")]
        function: FunctionSpec,
        #[command(flatten)]
        window: WindowArg,
        /// Defaults to 2^M.
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// M_λ f and σ* f per cell, plus the domination check for proportional
    /// windows; CSV columns i,maximal,sigma_star.
    Maximal {
        #[arg(long, default_value = "unit-l1:8")]
        function: FunctionSpec,
        #[command(flatten)]
        window: WindowArg,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Profile t·|{σ*f > t}| for seeded ‖f‖₁ = 1 inputs; CSV columns
    /// sample,t,t_measure.
    Weaktype {
        /// Resolution of the random inputs.
        #[arg(long, default_value_t = 8)]
        m: u32,
        /// Number of random inputs, seeded seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        samples: u64,
        /// Use this function instead of random inputs.
        #[arg(long)]
        function: Option<FunctionSpec>,
        #[arg(long)]
        n_max: Option<u64>,
    },
}

#[derive(Debug, Args)]
pub struct BlockArgs {
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub gamma: u64,
}

#[derive(Debug, Subcommand)]
pub enum BlockCmd {
    /// Dense values √γ·P at resolution m; CSV columns i,scaled,value.
    Build {
        #[command(flatten)]
        block: BlockArgs,
    },
    /// Exhaustive certificate for the norm, sup, spectrum and ℓ(x)
    /// properties, plus the constant-window replay.
    Verify {
        #[command(flatten)]
        block: BlockArgs,
        /// Replay V_ℓ = S_ℓ for every constant window c below the block size.
        #[arg(long, value_enum, default_value = "auto")]
        corollary: Toggle,
    },
    /// The ℓ(x) construction at one point.
    Witness {
        #[command(flatten)]
        block: BlockArgs,
        /// Dyadic point k/2^M.
        #[arg(long)]
        x: DyadicPoint,
        #[command(flatten)]
        window: WindowArg,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    Auto,
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Orlicz function: identity, log-power:β, table:t:ω,...
    #[arg(long)]
    pub omega: Option<OrliczFunction>,
    #[command(flatten)]
    pub window: WindowArg,
    /// strict or relaxed:<margin>
    #[arg(long)]
    pub mode: Option<PlanMode>,
    #[arg(long)]
    pub levels: Option<usize>,
    /// Read a plan JSON (as written by `diverge plan`) instead of planning.
    #[arg(long, conflicts_with_all = ["omega", "mode", "levels", "lambda"])]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum DivergeCmd {
    /// Choose (γ_a, δ_a, m_a) and audit the plan invariants.
    Plan {
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Pointwise certificates of the lower bound |V_ℓ(f; x)| at sample points.
    Certify {
        #[command(flatten)]
        plan: PlanArgs,
        /// Use the first A levels; defaults to all numeric levels.
        #[arg(long)]
        truncate: Option<usize>,
        /// Random points when m_A is too large for every cell.
        #[arg(long, default_value_t = walsh_vp::diverge::DEFAULT_SAMPLE_COUNT)]
        samples: usize,
    },
    /// ∫ω(|f_A|) against the level bound and 1/3.
    Membership {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long)]
        truncate: Option<usize>,
        /// Also enumerate the grid when m_A is at most this.
        #[arg(long, default_value_t = 16)]
        grid_max_m: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum DemoCmd {
    /// ‖V_n f − f‖_∞ against n; CSV columns n,lambda,sup_error.
    Converge {
        #[arg(long, default_value = "poly:256:10")]
        function: FunctionSpec,
        #[command(flatten)]
        window: WindowArg,
        /// Defaults to 2^M.
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Plan, certify and check membership in one run; CSV columns
    /// x,a,ell,v,target,passes.
    Diverge {
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value_t = walsh_vp::diverge::DEFAULT_SAMPLE_COUNT)]
        samples: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Walsh { cmd } => match cmd {
                WalshCmd::Fwht { .. } => "walsh fwht",
                WalshCmd::PartialSums { .. } => "walsh partial-sums",
                WalshCmd::Spectrum { .. } => "walsh spectrum",
            },
            Command::Vp { cmd } => match cmd {
                VpCmd::Curve { .. } => "vp curve",
                VpCmd::Maximal { .. } => "vp maximal",
                VpCmd::Weaktype { .. } => "vp weaktype",
            },
            Command::Blockpoly { cmd } => match cmd {
                BlockCmd::Build { .. } => "blockpoly build",
                BlockCmd::Verify { .. } => "blockpoly verify",
                BlockCmd::Witness { .. } => "blockpoly witness",
            },
            Command::Diverge { cmd } => match cmd {
                DivergeCmd::Plan { .. } => "diverge plan",
                DivergeCmd::Certify { .. } => "diverge certify",
                DivergeCmd::Membership { .. } => "diverge membership",
            },
            Command::Demo { cmd } => match cmd {
                DemoCmd::Converge { .. } => "demo converge",
                DemoCmd::Diverge { .. } => "demo diverge",
            },
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig, CliError> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = g.number_mode {
        c.number_mode = v;
    }
    if let Some(v) = g.max_resolution {
        c.max_resolution = v;
    }
    if let Some(v) = g.max_dense_m {
        c.max_dense_m = v;
    }
    if let Some(v) = g.gamma_cap {
        c.gamma_cap = v;
    }
    if let Some(v) = g.seed {
        c.seed = v;
    }
    if let Some(v) = &g.output_dir {
        c.output_dir = Some(v.clone());
    }
    c.validate()?;
    Ok(c)
}

/// Parses `args`, runs the command and writes the report. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                let _ = write!(err, "{e}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{e}");
                EXIT_PASS
            };
            return code;
        }
    };
    let mut config = match resolve_config(&cli.global) {
        Ok(c) => c,
        Err(e) => return report_error(&e, err),
    };
    let name = cli.command.name();
    let start = Instant::now();
    let result = commands::dispatch(&cli.command, &mut config);
    let elapsed = start.elapsed().as_secs_f64();
    let (outcome, code) = match result {
        Ok(o) => {
            let code = if o.status == Status::Fail { EXIT_VERIFICATION } else { EXIT_PASS };
            (o, code)
        }
        Err(e @ CliError::Verification(_)) => {
            let payload = json!({ "failure": { "class": e.class(), "message": e.to_string() } });
            let _ = writeln!(err, "verification failed: {e}");
            (commands::Outcome::new(Status::Fail, payload), EXIT_VERIFICATION)
        }
        Err(e) => return report_error(&e, err),
    };
    let mut envelope = ReportEnvelope::new(name, &config, outcome.status, outcome.payload);
    if cli.global.timing {
        envelope.timing = Some(Timing {
            wall_seconds: elapsed,
            throughput: outcome.throughput,
        });
    }
    if let Some(dir) = &config.output_dir {
        let stem = name.replace(' ', "-");
        match write_artifacts(dir, &stem, &mut envelope, &outcome.tables) {
            Ok(paths) => {
                for p in paths {
                    let _ = writeln!(err, "wrote {}", p.display());
                }
            }
            Err(e) => return report_error(&e, err),
        }
    }
    if out.write_all(envelope.to_json().as_bytes()).is_err() {
        return EXIT_USAGE;
    }
    code
}

fn report_error(e: &CliError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error ({}): {e}", e.class());
    e.exit_code()
}
