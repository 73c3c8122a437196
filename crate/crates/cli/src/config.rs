//! Command-line arguments, run configuration and report envelopes.

use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use selfsim::automaton::{Structure, WreathRecursion, DEFAULT_BALL_BUDGET, DEFAULT_MAX_ROUNDS, DEFAULT_STATE_CAP};
use selfsim::builtins::builtin_group;
use selfsim::complex::{Complex, DEFAULT_VERTEX_BUDGET};
use selfsim::Error;

#[derive(Parser, Debug)]
#[command(name = "selfsim", version, about = "Self-similarity complexes of contracting groups and their boundary dynamics")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Group definition file (JSON).
    #[arg(short = 'g', long, global = true, conflicts_with = "builtin")]
    pub group: Option<PathBuf>,
    /// Shipped group: odometer, grigorchuk or basilica.
    #[arg(long, global = true)]
    pub builtin: Option<String>,
    /// Use this HΣ instead of estimating it.
    #[arg(long, global = true)]
    pub hsigma: Option<usize>,
    /// Visual parameter; defaults to min(0.1, 1/(4(1+m(HΣ)))).
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Inclusive level range, e.g. 2..8.
    #[arg(long, global = true, value_parser = parse_range)]
    pub levels: Option<Range>,
    /// Inclusive range of iterates, e.g. 0..5.
    #[arg(long, global = true, value_parser = parse_range)]
    pub k: Option<Range>,
    /// Depth for ray equivalence and visual distances.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Write DOT output here instead of standard output.
    #[arg(long, global = true)]
    pub dot: Option<PathBuf>,
    /// Cap on distinct group elements during restriction closures.
    #[arg(long, global = true, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    /// Rounds allowed for the nucleus fixpoint.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_ROUNDS)]
    pub max_rounds: usize,
    /// Largest level size the complex may materialize.
    #[arg(long, global = true, default_value_t = DEFAULT_VERTEX_BUDGET)]
    pub vertex_budget: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Nucleus, good generators and magic levels.
    Nucleus,
    /// DOT export of level graphs, or of the complex up to a level.
    Graph {
        /// Export levels 0..=B with vertical edges instead of separate level graphs.
        #[arg(long)]
        slice: bool,
    },
    /// Cone types per level.
    ConeTypes,
    /// Shadow types of horizontal balls per level.
    ShadowTypes {
        #[arg(long, default_value_t = 1)]
        radius: usize,
    },
    /// Catalogue of iterate forms of pullbacks of horizontal balls.
    Dynatlas {
        #[arg(long, default_value_t = 1)]
        radius: usize,
        /// Hull thickening; defaults to (2r+1)(C+1)+2r with C observed.
        #[arg(long)]
        hull_d: Option<usize>,
        /// Use this many seeded base vertices per level instead of all.
        #[arg(long)]
        sample: Option<usize>,
    },
    /// Stabilizer-orbit sweep against 1 + q + ... + q^(N+1).
    Orbits {
        #[arg(long, default_value_t = 50)]
        samples: usize,
        /// Largest ball radius L.
        #[arg(long, default_value_t = 2)]
        radius: usize,
        /// Largest tail length |w|.
        #[arg(long, default_value_t = 4)]
        tail: usize,
    },
    /// Boundary map computations.
    #[command(subcommand)]
    Boundary(BoundaryCommand),
    /// Run the invariant suite.
    Verify,
}

#[derive(Subcommand, Debug)]
pub enum BoundaryCommand {
    /// Preimage classes of a ray with their local degrees.
    Degree {
        /// Eventually periodic ray "preperiod;period", e.g. "1;0".
        #[arg(long)]
        ray: String,
    },
    /// Diameter tables of shadows and umbrae along a ray, and the
    /// quasi-ultrametric check.
    Metric {
        #[arg(long)]
        ray: String,
        /// Random triples for the quasi-ultrametric check.
        #[arg(long, default_value_t = 1000)]
        triples: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Range(pub usize, pub usize);

impl Range {
    pub fn inclusive(self) -> RangeInclusive<usize> {
        self.0..=self.1
    }
}

fn parse_range(s: &str) -> Result<Range, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got `{s}`"))?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}"));
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(Range(a, b))
}

/// Why a run stopped, mapped onto the exit status.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Cap(anyhow::Error),
    Property(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Cap(_) => 3,
            Failure::Property(_) => 4,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StateCapExceeded { .. } | Error::NotContractingWithinBound { .. } | Error::LevelTooLarge { .. } => {
                Failure::Cap(e.into())
            }
            Error::UndecidedEquivalence(_) | Error::NotStabilized { .. } | Error::ZeroInradius => {
                Failure::Property(e.to_string())
            }
            _ => Failure::Config(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(inner) => inner.into(),
            Err(e) => Failure::Config(e),
        }
    }
}

#[derive(Serialize)]
pub struct GroupInfo {
    pub source: String,
    pub hash: String,
    pub degree: usize,
    pub generators: Vec<String>,
}

#[derive(Serialize)]
pub struct Budgets {
    pub state_cap: usize,
    pub max_rounds: usize,
    pub vertex_budget: usize,
    pub ball_budget: usize,
    pub levels: Option<Range>,
    pub k: Option<Range>,
    pub depth: Option<usize>,
}

#[derive(Serialize)]
pub struct HSigmaUsed {
    pub value: usize,
    /// `override` or `estimated`.
    pub source: &'static str,
    pub estimated_over_levels: Option<usize>,
    pub estimate_stabilized: Option<bool>,
    pub magic_level: usize,
    pub magic_level_exact: bool,
}

/// Fields shared by every report.
#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub group: GroupInfo,
    pub hsigma: Option<HSigmaUsed>,
    pub epsilon: Option<f64>,
    pub budgets: Budgets,
    pub seed: u64,
    pub passed: Option<bool>,
    pub result: T,
}

pub fn load_group(g: &Global) -> Result<(WreathRecursion, String), Failure> {
    match (&g.group, &g.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let rec = WreathRecursion::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok((rec, format!("file:{}", path.display())))
        }
        (None, Some(name)) => Ok((builtin_group(name)?, format!("builtin:{name}"))),
        (None, None) => Err(Failure::Config(anyhow::anyhow!("pass a group file with -g or a --builtin name"))),
        (Some(_), Some(_)) => Err(Failure::Config(anyhow::anyhow!("-g and --builtin are exclusive"))),
    }
}

pub fn build_complex(g: &Global, rec: WreathRecursion) -> Result<Complex, Failure> {
    for (what, value) in [("--state-cap", g.state_cap), ("--max-rounds", g.max_rounds), ("--vertex-budget", g.vertex_budget)] {
        if value == 0 {
            return Err(Failure::Config(anyhow::anyhow!("{what} must be positive")));
        }
    }
    let st = Structure::with_limits(rec, g.state_cap, g.max_rounds)?;
    Ok(Complex::with_budget(Arc::new(st), g.vertex_budget))
}

pub fn budgets(g: &Global) -> Budgets {
    Budgets {
        state_cap: g.state_cap,
        max_rounds: g.max_rounds,
        vertex_budget: g.vertex_budget,
        ball_budget: DEFAULT_BALL_BUDGET,
        levels: g.levels,
        k: g.k,
        depth: g.depth,
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).map_err(Failure::Config),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
