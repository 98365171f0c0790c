//! Named check suites behind `verify`. Each suite returns one [`Item`] per
//! checked statement; randomized checks are aggregated into a single item
//! per statement with the trial and failure counts.

mod bounds;
mod directproduct;
mod infotheory;
pub mod pipeline;
pub mod sampler;
mod zerocomm;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rectbound::domain::{make_family, Distribution, Relation};
use rectbound::par::{map_collect, Exec};
use rectbound::sampler::{ClaimItem, HashFamily};
use rectbound::Error;
use serde::Serialize;

use crate::error::{validation, CliError, CliResult};

pub use bounds::lp_families;
pub use pipeline::{conditioned_instances, ConditionedInstance};

/// Slack for checks that are equalities up to rounding.
pub const EQ_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Item {
    pub suite: String,
    pub instance: String,
    pub name: String,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub trials: u64,
    pub failures: u64,
    /// Smallest margin by which the statement held over the trials;
    /// negative on a failure. Absent for claims without a direction.
    pub margin: Option<f64>,
    pub pass: bool,
}

impl Item {
    pub fn claim(suite: &str, instance: &str, c: &ClaimItem) -> Item {
        Item {
            suite: suite.into(),
            instance: instance.into(),
            name: c.name.clone(),
            lhs: Some(c.lhs),
            rhs: Some(c.rhs),
            trials: 1,
            failures: (!c.pass) as u64,
            margin: None,
            pass: c.pass,
        }
    }

    pub fn at_most(suite: &str, instance: &str, name: &str, lhs: f64, rhs: f64, tol: f64) -> Item {
        Self::single(suite, instance, name, lhs, rhs, rhs - lhs, tol)
    }

    pub fn at_least(suite: &str, instance: &str, name: &str, lhs: f64, rhs: f64, tol: f64) -> Item {
        Self::single(suite, instance, name, lhs, rhs, lhs - rhs, tol)
    }

    pub fn holds(suite: &str, instance: &str, name: &str, pass: bool) -> Item {
        Item {
            suite: suite.into(),
            instance: instance.into(),
            name: name.into(),
            lhs: None,
            rhs: None,
            trials: 1,
            failures: (!pass) as u64,
            margin: None,
            pass,
        }
    }

    fn single(suite: &str, instance: &str, name: &str, lhs: f64, rhs: f64, margin: f64, tol: f64) -> Item {
        let pass = margin >= -tol;
        Item {
            suite: suite.into(),
            instance: instance.into(),
            name: name.into(),
            lhs: Some(lhs),
            rhs: Some(rhs),
            trials: 1,
            failures: (!pass) as u64,
            margin: Some(margin),
            pass,
        }
    }
}

/// Accumulates one statement over many trials.
pub struct Tally {
    item: Item,
}

impl Tally {
    pub fn new(suite: &str, instance: &str, name: &str) -> Tally {
        Tally {
            item: Item {
                suite: suite.into(),
                instance: instance.into(),
                name: name.into(),
                lhs: None,
                rhs: None,
                trials: 0,
                failures: 0,
                margin: Some(f64::INFINITY),
                pass: true,
            },
        }
    }

    pub fn add(&mut self, margin: f64, pass: bool) {
        self.item.trials += 1;
        self.item.failures += (!pass) as u64;
        self.item.pass &= pass;
        if let Some(m) = self.item.margin.as_mut() {
            *m = m.min(margin);
        }
    }

    pub fn finish(self) -> Item {
        self.item
    }
}

/// Parameters shared by all suites. Unset fields take per-suite defaults.
#[derive(Clone, Debug)]
pub struct SuiteParams {
    /// Instances to run on, as `(family, n)`.
    pub families: Option<Vec<(String, usize)>>,
    pub eps: Option<f64>,
    pub c: Option<f64>,
    pub seed: u64,
    pub trials: u64,
    pub reduced_delta: Option<f64>,
    pub hash: HashFamily,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams { families: None, eps: None, c: None, seed: 0, trials: 1000, reduced_delta: None, hash: HashFamily::Affine }
    }
}

impl SuiteParams {
    fn families_or(&self, default: &[(&str, usize)]) -> Vec<(String, usize)> {
        self.families.clone().unwrap_or_else(|| default.iter().map(|(f, n)| (f.to_string(), *n)).collect())
    }
}

pub type SuiteFn = fn(&SuiteParams) -> CliResult<Vec<Item>>;

/// Every suite in the order `all` runs them.
pub const SUITES: &[(&str, SuiteFn)] = &[
    ("chainrules", infotheory::chainrules),
    ("convexity", infotheory::convexity),
    ("pinsker", infotheory::pinsker),
    ("substate", infotheory::substate),
    ("ratiovs1", infotheory::ratiovs1),
    ("lpduality", bounds::lpduality),
    ("eqv", bounds::eqv),
    ("dgeqsrec", bounds::dgeqsrec),
    ("distclose", sampler::distclose),
    ("probofg", sampler::probofg),
    ("singlemessagecloseness", sampler::singlemessagecloseness),
    ("probnonabort-reduced", sampler::probnonabort_reduced),
    ("zeroprotocolimpliesrec", zerocomm::zeroprotocolimpliesrec),
    ("goodcoordinate", directproduct::goodcoordinate),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|s| s.0).chain(["all"]).collect()
}

/// Runs `name` (or every suite for `all`).
pub fn run_suite(name: &str, params: &SuiteParams) -> CliResult<Vec<(String, Vec<Item>)>> {
    if name == "all" {
        return SUITES.iter().map(|(n, f)| Ok((n.to_string(), f(params)?))).collect();
    }
    let (n, f) = SUITES
        .iter()
        .find(|s| s.0 == name)
        .ok_or_else(|| validation(format!("unknown suite `{name}`; expected one of {}", suite_names().join(", "))))?;
    Ok(vec![(n.to_string(), f(params)?)])
}

/// Per-trial generator: ChaCha8 seeded with `seed`, stream `stream << 32 | i`.
pub fn trial_rng(seed: u64, stream: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream << 32 | i);
    rng
}

/// Runs `trials` independent trials, each scoring `K` statements as
/// `(margin, pass)`, and tallies them in trial order.
pub fn randomized<const K: usize, F>(p: &SuiteParams, suite: &str, stream: u64, names: [&str; K], trial: F) -> CliResult<Vec<Item>>
where
    F: Fn(&mut ChaCha8Rng) -> CliResult<[(f64, bool); K]> + Sync + Send,
{
    if p.trials == 0 {
        return Err(validation("trials must be positive"));
    }
    let results = map_collect(p.trials as usize, Exec::Auto, |i| trial(&mut trial_rng(p.seed, stream, i as u64)));
    let instance = format!("{} random trials, seed {}", p.trials, p.seed);
    let mut tallies: Vec<Tally> = names.iter().map(|n| Tally::new(suite, &instance, n)).collect();
    for r in results {
        for (t, (margin, pass)) in tallies.iter_mut().zip(r?) {
            t.add(margin, pass);
        }
    }
    Ok(tallies.into_iter().map(Tally::finish).collect())
}

pub(crate) fn family(name: &str, n: usize) -> CliResult<(Relation, Distribution)> {
    Ok(make_family(name, n)?)
}

pub(crate) fn label(name: &str, n: usize) -> String {
    format!("{}/n={n}", name.to_uppercase())
}

/// Failed hypotheses of a lemma become a failing item rather than an error.
pub(crate) fn precondition_item<T>(suite: &str, instance: &str, r: rectbound::Result<T>) -> CliResult<Result<T, Item>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(Error::Precondition(msg)) => {
            let mut item = Item::holds(suite, instance, "hypotheses hold", false);
            item.name = format!("hypotheses hold ({msg})");
            Ok(Err(item))
        }
        Err(e) => Err(CliError::from(e)),
    }
}
