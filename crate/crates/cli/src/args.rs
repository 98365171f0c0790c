use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rectbound::sampler::HashFamily;

use crate::config::{Format, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "rectbound", version, about = "Rectangle bounds, lemma checks and sampler experiments on small two-party functions")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rectangle, smooth-rectangle and LP bounds.
    Bound {
        #[command(subcommand)]
        kind: BoundKind,
    },
    /// Run a named check suite and print a pass/fail table.
    Verify(VerifyArgs),
    /// Correlated-sampling protocol experiments.
    Sampler {
        #[command(subcommand)]
        action: SamplerAction,
    },
    /// Success probability of a shared-budget product protocol as t grows.
    Decay(DecayArgs),
    /// Built-in function families.
    Family {
        #[command(subcommand)]
        action: FamilyAction,
    },
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub family: Option<String>,
    /// Input length in bits.
    #[arg(long)]
    pub n: Option<usize>,
    /// Problem file in place of a family.
    #[arg(long)]
    pub problem: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub z: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum BoundKind {
    /// Rectangle bound by enumeration.
    Rec(BoundArgs),
    /// Smooth rectangle bound, maximized over nearby functions.
    SrecEntropy {
        #[command(flatten)]
        common: BoundArgs,
        /// Smoothing radius.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Covering LP with its dual.
    SrecLp(BoundArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Randomized trials per check.
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub reduced_delta: Option<f64>,
    #[arg(long)]
    pub hash: Option<HashFamily>,
}

#[derive(Debug, Args)]
pub struct SamplerArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Information budget; defaults to the protocol's own, at least 1.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub reduced_delta: Option<f64>,
    #[arg(long)]
    pub reduced_iterations: Option<u64>,
    #[arg(long)]
    pub reduced_hash_bits: Option<u32>,
    #[arg(long)]
    pub hash: Option<HashFamily>,
}

#[derive(Debug, Subcommand)]
pub enum SamplerAction {
    /// Monte-Carlo simulation.
    Run {
        #[command(flatten)]
        common: SamplerArgs,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Exact evaluation of the sampler's claims.
    Verify {
        #[command(flatten)]
        common: SamplerArgs,
    },
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Largest number of coordinates.
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Share of the full per-coordinate cost available to the product.
    #[arg(long)]
    pub budget_fraction: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum FamilyAction {
    List,
    /// Print a family instance as a problem file.
    Dump {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
}

impl ProblemArgs {
    fn fill(self, cfg: &mut RunConfig) {
        cfg.family = self.family;
        cfg.n = self.n;
        cfg.problem = self.problem;
    }
}

impl SamplerArgs {
    fn fill(self, cfg: &mut RunConfig) {
        self.problem.fill(cfg);
        cfg.eps = self.eps;
        cfg.c = self.c;
        cfg.reduced_delta = self.reduced_delta;
        cfg.reduced_iterations = self.reduced_iterations;
        cfg.reduced_hash_bits = self.reduced_hash_bits;
        cfg.hash = self.hash;
    }
}

impl BoundArgs {
    fn fill(self, cfg: &mut RunConfig) {
        self.problem.fill(cfg);
        cfg.z = self.z;
        cfg.eps = self.eps;
    }
}

impl Cli {
    /// The command name and the flags given on the command line.
    pub fn into_parts(self) -> (String, Option<PathBuf>, RunConfig) {
        let mut cfg = RunConfig { format: self.format, output: self.output, ..Default::default() };
        let name = match self.command {
            Command::Bound { kind } => match kind {
                BoundKind::Rec(a) => {
                    a.fill(&mut cfg);
                    "bound rec"
                }
                BoundKind::SrecEntropy { common, delta } => {
                    common.fill(&mut cfg);
                    cfg.delta = delta;
                    "bound srec-entropy"
                }
                BoundKind::SrecLp(a) => {
                    a.fill(&mut cfg);
                    "bound srec-lp"
                }
            },
            Command::Verify(a) => {
                cfg.suite = a.suite;
                cfg.family = a.family;
                cfg.n = a.n;
                cfg.eps = a.eps;
                cfg.c = a.c;
                cfg.seed = a.seed;
                cfg.trials = a.trials;
                cfg.reduced_delta = a.reduced_delta;
                cfg.hash = a.hash;
                "verify"
            }
            Command::Sampler { action } => match action {
                SamplerAction::Run { common, trials, seed } => {
                    common.fill(&mut cfg);
                    cfg.trials = trials;
                    cfg.seed = seed;
                    "sampler run"
                }
                SamplerAction::Verify { common } => {
                    common.fill(&mut cfg);
                    "sampler verify"
                }
            },
            Command::Decay(a) => {
                a.problem.fill(&mut cfg);
                cfg.t = a.t;
                cfg.trials = a.trials;
                cfg.seed = a.seed;
                cfg.budget_fraction = a.budget_fraction;
                "decay"
            }
            Command::Family { action } => match action {
                FamilyAction::List => "family list",
                FamilyAction::Dump { family, n } => {
                    cfg.family = family;
                    cfg.n = n;
                    "family dump"
                }
            },
        };
        (name.to_string(), self.config, cfg)
    }
}
