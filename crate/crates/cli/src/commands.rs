use rectbound::bounds::{lrec, srec_entropy, srec_lp, LpBoundResult, RectangleBoundResult};
use rectbound::directproduct::{decay_experiment, MAX_DECAY_T};
use rectbound::domain::{Distribution, Family, Problem, Rectangle, Relation, MAX_FAMILY_BITS};
use rectbound::par::Exec;
use rectbound::protocols::{factorize, ProtocolTree, TranscriptFactorization};
use rectbound::sampler::{
    check_preconditions, exact_analysis, good_sets, idealized_outcome, make_config, run_monte_carlo, HashFamily, MonteCarloOptions,
    Overrides, SamplerConfig, SamplerReport,
};
use serde::Serialize;

use crate::config::{check_range, require, Format, RunConfig};
use crate::error::{validation, CliError, CliResult, EXIT_FAILURE, EXIT_OK};
use crate::output::{emit, num, opt, Table};
use crate::suites::{self, Item, SuiteParams};

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.5;

/// Runs `command` on the merged configuration and returns the exit code.
pub fn execute(command: &str, cfg: RunConfig) -> CliResult<i32> {
    match command {
        "bound rec" | "bound srec-entropy" | "bound srec-lp" => bound(command, &cfg),
        "verify" => verify(&cfg),
        "sampler run" => sampler_run(&cfg),
        "sampler verify" => sampler_verify(&cfg),
        "decay" => decay(&cfg),
        "family list" => family_list(&cfg),
        "family dump" => family_dump(&cfg),
        other => Err(CliError::Internal(format!("unhandled command {other}"))),
    }
}

fn format_of(cfg: &RunConfig, default: Format) -> Format {
    cfg.format.unwrap_or(default)
}

/// The echoed configuration: the command, the parameters it used, and the
/// format. The output path is left out so moving a file does not change it.
fn echo(command: &str, format: Format) -> RunConfig {
    RunConfig { command: Some(command.into()), format: Some(format), ..Default::default() }
}

fn check_n(n: usize) -> CliResult<usize> {
    if n == 0 || n > MAX_FAMILY_BITS {
        return Err(validation(format!("--n = {n}; need 1 <= n <= {MAX_FAMILY_BITS}")));
    }
    Ok(n)
}

/// Loads the problem from `--family/--n` or `--problem`, recording the
/// source in `echo`.
fn load_problem(cfg: &RunConfig, echo: &mut RunConfig) -> CliResult<(Relation, Distribution)> {
    match (&cfg.family, &cfg.problem) {
        (Some(_), Some(_)) => Err(validation("give either --family or --problem, not both")),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| validation(format!("cannot read {}: {e}", path.display())))?;
            let p: Problem = serde_json::from_str(&text).map_err(|e| validation(format!("problem file: {e}")))?;
            echo.problem = Some(path.clone());
            Ok((p.relation, p.distribution))
        }
        (family, None) => {
            let name = require(family.clone(), "family")?;
            let fam: Family = name.parse()?;
            let n = check_n(cfg.n.unwrap_or(1))?;
            echo.family = Some(fam.name().into());
            echo.n = Some(n);
            Ok(fam.build(n)?)
        }
    }
}

#[derive(Serialize)]
struct SrecLpOutput<'a> {
    z: usize,
    eps: f64,
    primal: f64,
    dual: f64,
    gap: f64,
    log_value: f64,
    primal_infeasibility: f64,
    rows_generated: usize,
    lambda: &'a [f64],
    phi: &'a [f64],
    cover: &'a [(Rectangle, f64)],
}

fn rect_cells(r: Option<Rectangle>) -> [String; 2] {
    r.map_or([String::new(), String::new()], |r| [r.rows.to_string(), r.cols.to_string()])
}

fn rec_row(r: &RectangleBoundResult) -> Vec<String> {
    let [rows, cols] = rect_cells(r.witness);
    vec![num(r.value), rows, cols, num(r.witness_mass), num(r.witness_error), num(r.witness_minentropy)]
}

fn bound(command: &str, cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Json);
    let mut e = echo(command, format);
    let (f, dist) = load_problem(cfg, &mut e)?;
    let z = require(cfg.z, "z")?;
    let eps = check_range("eps", require(cfg.eps, "eps")?, 0.0, 1.0)?;
    e.z = Some(z);
    e.eps = Some(eps);
    let out = cfg.output.as_deref();
    match command {
        "bound rec" => {
            let r = lrec(&f, &dist, z, eps)?;
            emit(command, &e, format, out, &r, || {
                let mut t = Table::new(&["value", "witness_rows", "witness_cols", "witness_mass", "witness_error", "witness_minentropy"]);
                t.push(rec_row(&r));
                t
            })?;
        }
        "bound srec-entropy" => {
            let delta = check_range("delta", require(cfg.delta, "delta")?, 0.0, 1.0)?;
            e.delta = Some(delta);
            let r = srec_entropy(&f, &dist, z, eps, delta)?;
            emit(command, &e, format, out, &r, || {
                let mut t = Table::new(&[
                    "value",
                    "g_distance",
                    "witness_rows",
                    "witness_cols",
                    "witness_mass",
                    "witness_error",
                    "witness_minentropy",
                ]);
                let mut row = rec_row(&r.inner);
                row.insert(1, num(r.g_distance));
                t.push(row);
                t
            })?;
        }
        _ => {
            let r: LpBoundResult = srec_lp(&f, z, eps)?;
            let o = SrecLpOutput {
                z: r.z,
                eps: r.eps,
                primal: r.primal_value,
                dual: r.dual_value,
                gap: r.gap,
                log_value: r.log_value,
                primal_infeasibility: r.primal_infeasibility,
                rows_generated: r.rows_generated,
                lambda: &r.lambda,
                phi: &r.phi,
                cover: &r.cover,
            };
            emit(command, &e, format, out, &o, || {
                let mut t = Table::new(&["z", "eps", "primal", "dual", "gap", "log_value", "primal_infeasibility", "rows_generated"]);
                t.push(vec![
                    o.z.to_string(),
                    num(o.eps),
                    num(o.primal),
                    num(o.dual),
                    num(o.gap),
                    num(o.log_value),
                    num(o.primal_infeasibility),
                    o.rows_generated.to_string(),
                ]);
                t
            })?;
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SuiteResult {
    suite: String,
    pass: bool,
    checks: usize,
    failed: usize,
    items: Vec<Item>,
}

#[derive(Serialize)]
struct VerifyOutput {
    pass: bool,
    suites: Vec<SuiteResult>,
}

fn item_table(items: &[&Item]) -> Table {
    let mut t = Table::new(&["suite", "instance", "name", "lhs", "rhs", "trials", "failures", "margin", "pass"]);
    for i in items {
        t.push(vec![
            i.suite.clone(),
            i.instance.clone(),
            i.name.clone(),
            opt(i.lhs),
            opt(i.rhs),
            i.trials.to_string(),
            i.failures.to_string(),
            opt(i.margin),
            i.pass.to_string(),
        ]);
    }
    t
}

fn verify(cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Json);
    let mut e = echo("verify", format);
    let suite = cfg.suite.clone().unwrap_or_else(|| "all".into());
    if !suites::suite_names().contains(&suite.as_str()) {
        return Err(validation(format!("unknown suite `{suite}`; expected one of {}", suites::suite_names().join(", "))));
    }
    let mut params = SuiteParams { seed: cfg.seed.unwrap_or(0), trials: cfg.trials.unwrap_or(1000), ..Default::default() };
    if params.trials == 0 {
        return Err(validation("--trials must be positive"));
    }
    if let Some(name) = &cfg.family {
        let fam: Family = name.parse()?;
        let n = check_n(cfg.n.unwrap_or(1))?;
        params.families = Some(vec![(fam.name().to_string(), n)]);
        e.family = Some(fam.name().into());
        e.n = Some(n);
    }
    if let Some(eps) = cfg.eps {
        params.eps = Some(check_range("eps", eps, 0.0, 1.0)?);
    }
    if let Some(c) = cfg.c {
        params.c = Some(check_range("c", c, 1.0, f64::MAX)?);
    }
    if let Some(d) = cfg.reduced_delta {
        params.reduced_delta = Some(check_range("reduced-delta", d, 0.0, 64.0)?);
    }
    params.hash = cfg.hash.unwrap_or_default();
    e.suite = Some(suite.clone());
    e.seed = Some(params.seed);
    e.trials = Some(params.trials);
    e.eps = params.eps;
    e.c = params.c;
    e.reduced_delta = params.reduced_delta;
    e.hash = Some(params.hash);

    let results = suites::run_suite(&suite, &params)?;
    let suites: Vec<SuiteResult> = results
        .into_iter()
        .map(|(name, items)| SuiteResult {
            pass: items.iter().all(|i| i.pass),
            checks: items.len(),
            failed: items.iter().filter(|i| !i.pass).count(),
            suite: name,
            items,
        })
        .collect();
    let pass = suites.iter().all(|s| s.pass);
    for s in &suites {
        eprintln!("{:<4} {:<24} {:>5}/{:<5} checks", if s.pass { "PASS" } else { "FAIL" }, s.suite, s.checks - s.failed, s.checks);
        for i in s.items.iter().filter(|i| !i.pass) {
            eprintln!("     failed: [{}] {} (lhs {}, rhs {})", i.instance, i.name, opt(i.lhs), opt(i.rhs));
        }
    }
    let result = VerifyOutput { pass, suites };
    emit("verify", &e, format, cfg.output.as_deref(), &result, || {
        item_table(&result.suites.iter().flat_map(|s| &s.items).collect::<Vec<_>>())
    })?;
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

/// The family's one-way protocol, factorized, with the sampler config.
fn sampler_setup(cfg: &RunConfig, e: &mut RunConfig) -> CliResult<(Relation, TranscriptFactorization, SamplerConfig, HashFamily)> {
    let (f, dist) = load_problem(cfg, e)?;
    let fac = factorize(&ProtocolTree::send_then_answer(&f)?, &dist)?;
    let eps = require(cfg.eps, "eps")?;
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(validation(format!("--eps = {eps}; need 0 < eps < 1/3")));
    }
    let c = match cfg.c {
        Some(c) => c,
        None => suites::sampler::default_c(&fac)?,
    };
    let overrides = Overrides { delta: cfg.reduced_delta, iterations: cfg.reduced_iterations, hash_bits: cfg.reduced_hash_bits };
    let sc = make_config(c, eps, fac.q(), fac.m_size(), !overrides.is_empty(), overrides)?;
    let hash = cfg.hash.unwrap_or_default();
    e.eps = Some(eps);
    e.c = Some(c);
    e.reduced_delta = overrides.delta;
    e.reduced_iterations = overrides.iterations;
    e.reduced_hash_bits = overrides.hash_bits;
    e.hash = Some(hash);
    Ok((f, fac, sc, hash))
}

#[derive(Serialize)]
struct SamplerRunOutput {
    pass: bool,
    report: SamplerReport,
}

fn sampler_run(cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Json);
    let mut e = echo("sampler run", format);
    let (_, fac, sc, hash) = sampler_setup(cfg, &mut e)?;
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(validation("--trials must be positive"));
    }
    let seed = cfg.seed.unwrap_or(0);
    e.trials = Some(trials);
    e.seed = Some(seed);
    let report = run_monte_carlo(&fac, &sc, trials, seed, &MonteCarloOptions { hash, exec: Exec::Auto })?;
    let out = SamplerRunOutput { pass: report.pass(), report };
    emit("sampler run", &e, format, cfg.output.as_deref(), &out, || {
        let r = &out.report;
        let mut t = Table::new(&["statistic", "value", "std_error", "bound", "pass"]);
        for (name, est) in [
            ("Pr[A nonempty]", Some(r.nonempty)),
            ("Pr[E]", Some(r.e)),
            ("Pr[H]", Some(r.h)),
            ("Pr[A=B!=bot]", Some(r.agree)),
            ("Pr[B_c|E]", r.bc_given_e),
        ] {
            t.push(vec![name.into(), opt(est.map(|e| e.value)), opt(est.map(|e| e.std_error)), String::new(), String::new()]);
        }
        for c in r.checks.iter().chain(&r.consistency) {
            t.push(vec![c.name.clone(), opt(c.value), opt(c.std_error), num(c.bound), c.pass.to_string()]);
        }
        t
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SamplerVerifyOutput {
    pass: bool,
    config: SamplerConfig,
    items: Vec<Item>,
}

fn sampler_verify(cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Json);
    let mut e = echo("sampler verify", format);
    let (f, fac, sc, hash) = sampler_setup(cfg, &mut e)?;
    let inst = e.family.clone().map_or_else(|| "problem".to_string(), |name| format!("{name}/n={}", e.n.unwrap_or(1)));
    let mut items = Vec::new();
    let pre = check_preconditions(&fac, &sc, Some(&f))?;
    items.extend(pre.items().into_iter().map(|c| Item::claim("preconditions", &inst, c)));
    if pre.closeness.pass && pre.information.pass {
        let gs = good_sets(&fac, &sc, Some(&f))?;
        items.extend(gs.items.iter().map(|c| Item::claim("probofg", &inst, c)));
        let ideal = idealized_outcome(&fac, &sc)?;
        items.push(Item::claim("singlemessagecloseness", &inst, &ideal.bound));
    }
    let ex = exact_analysis(&fac, &sc, hash)?;
    items.extend(ex.items.iter().map(|c| Item::claim("exact", &inst, c)));
    let pass = items.iter().all(|i| i.pass);
    let out = SamplerVerifyOutput { pass, config: sc, items };
    emit("sampler verify", &e, format, cfg.output.as_deref(), &out, || item_table(&out.items.iter().collect::<Vec<_>>()))?;
    Ok(if pass { EXIT_OK } else { EXIT_FAILURE })
}

fn decay(cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Csv);
    let mut e = echo("decay", format);
    let (f, dist) = load_problem(cfg, &mut e)?;
    let t = require(cfg.t, "t")?;
    if t == 0 || t > MAX_DECAY_T {
        return Err(validation(format!("--t = {t}; need 1 <= t <= {MAX_DECAY_T}")));
    }
    let trials = cfg.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(validation("--trials must be positive"));
    }
    let seed = cfg.seed.unwrap_or(0);
    let fraction = check_range("budget-fraction", cfg.budget_fraction.unwrap_or(DEFAULT_BUDGET_FRACTION), 0.0, 1.0)?;
    e.t = Some(t);
    e.trials = Some(trials);
    e.seed = Some(seed);
    e.budget_fraction = Some(fraction);
    let base = ProtocolTree::send_then_answer(&f)?;
    let curve = decay_experiment(&f, &dist, &base, t, fraction, trials, seed, Exec::Auto)?;
    emit("decay", &e, format, cfg.output.as_deref(), &curve, || {
        let mut tab = Table::new(&["t", "successes", "trials", "estimate", "std_error"]);
        for p in &curve.points {
            tab.push(vec![p.t.to_string(), p.successes.to_string(), p.trials.to_string(), num(p.estimate), num(p.std_error)]);
        }
        tab
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FamilyEntry {
    name: &'static str,
    description: &'static str,
}

fn family_list(cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Json);
    let e = echo("family list", format);
    let list: Vec<FamilyEntry> = Family::ALL.iter().map(|f| FamilyEntry { name: f.name(), description: f.description() }).collect();
    emit("family list", &e, format, cfg.output.as_deref(), &list, || {
        let mut t = Table::new(&["name", "description"]);
        for f in &list {
            t.push(vec![f.name.into(), f.description.into()]);
        }
        t
    })?;
    Ok(EXIT_OK)
}

fn family_dump(cfg: &RunConfig) -> CliResult<i32> {
    let format = format_of(cfg, Format::Json);
    let mut e = echo("family dump", format);
    if cfg.problem.is_some() {
        return Err(validation("family dump takes --family and --n"));
    }
    let (relation, distribution) = load_problem(cfg, &mut e)?;
    let problem = Problem { relation, distribution };
    emit("family dump", &e, format, cfg.output.as_deref(), &problem, || {
        let mut t = Table::new(&["x", "y", "accept", "mass"]);
        let (f, d) = (&problem.relation, &problem.distribution);
        for x in 0..f.x_size() {
            for y in 0..f.y_size() {
                let acc: Vec<String> = f.outputs(x, y).iter().map(|z| z.to_string()).collect();
                t.push(vec![x.to_string(), y.to_string(), acc.join(" "), num(d.prob(x, y))]);
            }
        }
        t
    })?;
    Ok(EXIT_OK)
}
