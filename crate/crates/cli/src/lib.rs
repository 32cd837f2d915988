//! Command implementations.
//!
//! Every command returns an [`Output`]: a JSON report and a flat table. The
//! report is wrapped in an envelope carrying the schema tag, library version
//! and resolved configuration; CSV output starts with one `#` line holding the
//! same envelope without the result.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lfbranch::evolution::{survival_profile, GenerationLaw};
use lfbranch::rng::derive_seed;
use lfbranch::simulate::{bgw_size, run_replicates, simulate_cmj, simulate_contour, Start, POPULATION_CAP, STEP_CAP};
use lfbranch::spectral::phase_grid;
use lfbranch::stats::{
    ks_two_sample, limit_critical, limit_subcritical, limit_supercritical, renewal_sequence, LimitReport, MonteCarlo,
};
use lfbranch::typespace::load_triplet;
use lfbranch::{analyze, evolve, Criticality, LfTriplet, TestFn, Triplet, TypePoint};
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;

pub const SCHEMA: &str = "lfbranch.report/1";

/// Default replicate count of stochastic commands.
pub const DEFAULT_REPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by all commands.
#[derive(Debug, Clone, Default, Serialize, Args)]
pub struct RunConfig {
    /// Triplet as inline JSON or a path to a JSON file.
    #[arg(long, global = true)]
    pub triplet: Option<String>,
    /// Master seed; required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo replicates [default: 10000].
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Horizon (generation count); each command has its own default.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Worker threads [default: all cores]. Output does not depend on it.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Acceptance threshold of the command's own check.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Parser)]
#[command(name = "lfbranch", version, about = "Linear-fractional branching processes")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Direct,
    Cmj,
    Contour,
}

impl Engine {
    pub const ALL: [Engine; 3] = [Engine::Direct, Engine::Cmj, Engine::Contour];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Direct => "direct",
            Engine::Cmj => "cmj",
            Engine::Contour => "contour",
        }
    }
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct PhaseArgs {
    #[arg(long, default_value_t = 0.1)]
    pub lambda_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub lambda_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mu_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub mu_max: f64,
    /// Nodes per axis.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, default_value_t = 2.0)]
    pub m: f64,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct PointArgs {
    /// Starting type: an index for finite triplets, a positive real otherwise.
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct DistributionArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Values s of the generating function E s^{Z_n}.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75])]
    pub s: Vec<f64>,
    /// Tilts θ of E exp(−θ Σ y_i) over the particles of generation n.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Engine::Direct)]
    pub engine: Engine,
    /// Fixed ancestor type (direct engine only); γ-distributed otherwise.
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct LimitArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Generations of the exact convergence grid; defaults to ten even steps up to --n.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// Probe tilt θ of the subcritical functional check.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Horizon of the Monte Carlo checks (run only when --seed is given).
    #[arg(long)]
    pub mc_n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct YaglomArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Generations of the exact survival check [default: 1000, 2000, …, 10000].
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Args)]
pub struct RenewalArgs {
    /// a_1, a_2, … (fractions such as 1/2 are accepted).
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<String>,
    /// b_0, b_1, …
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Subcommand)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Criticality, recurrence and spectral constants of a triplet.
    Classify,
    /// Spectral constants over a (λ, μ) grid of the exponential family.
    PhaseGrid(PhaseArgs),
    /// Exact P_x(Z_k > 0) and m_k for k ≤ n.
    Survive(PointArgs),
    /// Exact law of generation n.
    Distribution(DistributionArgs),
    /// Per-replicate generation sizes Z_n.
    Simulate(SimulateArgs),
    /// Pairwise two-sample KS table of the three simulators.
    Crosscheck(PointArgs),
    /// Limit-theorem verification in the triplet's own regime.
    Limits(LimitArgs),
    /// Yaglom limit of a critical process, simulated to generation --n.
    Yaglom(YaglomArgs),
    /// Renewal sequence c = b/(1 − a) and its limit.
    Renewal(RenewalArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::PhaseGrid(_) => "phase-grid",
            Command::Survive(_) => "survive",
            Command::Distribution(_) => "distribution",
            Command::Simulate(_) => "simulate",
            Command::Crosscheck(_) => "crosscheck",
            Command::Limits(_) => "limits",
            Command::Yaglom(_) => "yaglom",
            Command::Renewal(_) => "renewal",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::PhaseGrid(_) | Command::Survive(_) | Command::Simulate(_) | Command::Crosscheck(_) | Command::Renewal(_) => {
                Format::Csv
            }
            _ => Format::Json,
        }
    }
}

/// Flat tabular view of a result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Result of one command.
#[derive(Debug, Clone)]
pub struct Output {
    pub command: &'static str,
    pub config: RunConfig,
    pub args: Value,
    pub result: Value,
    pub table: Table,
}

impl Output {
    fn envelope(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "version": lfbranch::VERSION,
            "command": self.command,
            "config": self.config,
            "args": self.args,
        })
    }

    pub fn to_json(&self) -> String {
        let mut v = self.envelope();
        v["result"] = self.result.clone();
        let mut s = serde_json::to_string_pretty(&v).expect("report is valid JSON");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        format!("# {}\n{}", self.envelope(), self.table.to_csv())
    }

    pub fn render(&self) -> String {
        match self.config.format.unwrap_or(Format::Json) {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Shortest round-trip decimal, switching to exponent form for tiny or huge values.
fn num(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn triplet(config: &RunConfig) -> Result<Triplet> {
    let source = config.triplet.as_deref().context("--triplet is required")?;
    load_triplet(source).with_context(|| "loading triplet")
}

fn seed(config: &RunConfig, command: &str) -> Result<u64> {
    config
        .seed
        .with_context(|| format!("--seed is required for {command}"))
}

fn point(t: &Triplet, x: Option<&str>) -> Result<TypePoint> {
    match x {
        Some(text) => Ok(t.parse_point(text)?),
        None => Ok(t.default_point()),
    }
}

/// Parse a decimal or a fraction `p/q`.
pub fn parse_number(text: &str) -> Result<f64> {
    let text = text.trim();
    let v = match text.split_once('/') {
        Some((p, q)) => p.trim().parse::<f64>()? / q.trim().parse::<f64>()?,
        None => text.parse::<f64>()?,
    };
    if !v.is_finite() {
        bail!("{text} is not a finite number");
    }
    Ok(v)
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect(),
    }
}

/// Parse the command line and run it on a local worker pool.
pub fn run(cli: Cli) -> Result<Output> {
    match cli.config.workers {
        Some(0) => bail!("--workers must be positive"),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()?
            .install(|| execute(cli)),
        None => execute(cli),
    }
}

/// Run and write the rendered output to `--out` or return it.
pub fn run_to_string(cli: Cli) -> Result<String> {
    let out = run(cli)?;
    let text = out.render();
    if let Some(path) = &out.config.out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
        return Ok(String::new());
    }
    Ok(text)
}

fn execute(cli: Cli) -> Result<Output> {
    let Cli { mut config, command } = cli;
    config.format.get_or_insert(command.default_format());
    let name = command.name();
    let args = serde_json::to_value(&command)?;
    let (result, table) = match &command {
        Command::Classify => cmd_classify(&config),
        Command::PhaseGrid(a) => cmd_phase_grid(a),
        Command::Survive(a) => cmd_survive(&mut config, a),
        Command::Distribution(a) => cmd_distribution(&mut config, a),
        Command::Simulate(a) => cmd_simulate(&mut config, a),
        Command::Crosscheck(a) => cmd_crosscheck(&mut config, a),
        Command::Limits(a) => cmd_limits(&mut config, a),
        Command::Yaglom(a) => cmd_yaglom(&mut config, a),
        Command::Renewal(a) => cmd_renewal(&mut config, a),
    }
    .with_context(|| format!("{name} failed"))?;
    Ok(Output {
        command: name,
        config,
        args,
        result,
        table,
    })
}

pub fn cmd_classify(config: &RunConfig) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let s = analyze(&t)?;
    let mut table = Table::new(&[
        "family",
        "criticality",
        "recurrence",
        "m",
        "R",
        "R_star",
        "rho",
        "alpha",
        "beta",
        "mean_life",
        "m_f1",
    ]);
    table.push(vec![
        t.family().to_string(),
        s.criticality.to_string(),
        s.recurrence.to_string(),
        num(s.m),
        num(s.r),
        num(s.r_star),
        num(s.rho),
        opt(s.alpha),
        num(s.beta),
        num(s.mean_life),
        num(s.m_f1),
    ]);
    let result = json!({ "triplet": t.spec(), "summary": s });
    Ok((result, table))
}

pub fn cmd_phase_grid(a: &PhaseArgs) -> Result<(Value, Table)> {
    if !(a.lambda_min > 0.0 && a.lambda_max >= a.lambda_min && a.mu_min > 0.0 && a.mu_max >= a.mu_min) {
        bail!("ranges must be positive and ordered");
    }
    let lambdas = linspace(a.lambda_min, a.lambda_max, a.steps);
    let mus = linspace(a.mu_min, a.mu_max, a.steps);
    let rows = phase_grid(&lambdas, &mus, a.m)?;
    let mut table = Table::new(&["lambda", "mu", "alpha", "beta", "mean_life", "m_f1", "class"]);
    for r in &rows {
        table.push(vec![
            num(r.lambda),
            num(r.mu),
            opt(r.alpha),
            num(r.beta),
            num(r.mean_life),
            num(r.m_f1),
            r.class.to_string(),
        ]);
    }
    Ok((json!({ "m": a.m, "rows": rows }), table))
}

pub fn cmd_survive(config: &mut RunConfig, a: &PointArgs) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let x = point(&t, a.x.as_deref())?;
    let n = *config.n.get_or_insert(10);
    let p = survival_profile(&t, x, n)?;
    let mut table = Table::new(&["n", "survival", "m_n", "mean_mass"]);
    for k in 0..=n {
        table.push(vec![k.to_string(), num(p.survival[k]), num(p.m_n[k]), num(p.mean_mass[k])]);
    }
    let result = json!({
        "x": x,
        "survival": p.survival,
        "m_n": p.m_n,
        "mean_mass": p.mean_mass,
    });
    Ok((result, table))
}

fn law_json<T: LfTriplet + ?Sized>(law: &GenerationLaw<'_, T>, x: TypePoint, a: &DistributionArgs) -> Result<Value> {
    let mut pgf = Vec::new();
    for &s in &a.s {
        pgf.push(json!({ "s": s, "value": law.functional(x, &TestFn::Const(s))? }));
    }
    let mut tilts = Vec::new();
    for &theta in &a.theta {
        tilts.push(json!({ "theta": theta, "value": law.functional(x, &TestFn::ExpTilt(theta))? }));
    }
    Ok(json!({
        "n": law.n(),
        "x": x,
        "m_n": law.m_n(),
        "survival": law.survival(x)?,
        "conditional_mean": 1.0 + law.m_n(),
        "mean_mass": law.mean_power_mass(x)?,
        "pgf": pgf,
        "exp_tilt": tilts,
    }))
}

pub fn cmd_distribution(config: &mut RunConfig, a: &DistributionArgs) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let x = point(&t, a.point.x.as_deref())?;
    let n = *config.n.get_or_insert(10);
    if n == 0 {
        bail!("--n must be at least 1");
    }
    if a.s.iter().any(|s| !(0.0..=1.0).contains(s)) || a.theta.iter().any(|th| *th < 0.0) {
        bail!("--s must lie in [0, 1] and --theta must be non-negative");
    }
    let law = evolve(&t, n)?;
    let mut result = law_json(&law, x, a)?;
    if let Some(evolved) = law.evolved_finite() {
        let e = evolved?;
        result["evolved"] = json!(lfbranch::Triplet::Finite(e).spec());
    }
    let mut table = Table::new(&["quantity", "argument", "value"]);
    table.push(vec!["m_n".into(), String::new(), num(law.m_n())]);
    table.push(vec!["survival".into(), String::new(), num(law.survival(x)?)]);
    for &s in &a.s {
        table.push(vec!["pgf".into(), num(s), num(law.functional(x, &TestFn::Const(s))?)]);
    }
    for &theta in &a.theta {
        table.push(vec!["exp_tilt".into(), num(theta), num(law.functional(x, &TestFn::ExpTilt(theta))?)]);
    }
    Ok((result, table))
}

/// `Z_n` for replicates `0..reps` of one engine.
pub fn sample_sizes(t: &Triplet, engine: Engine, start: Start, n: usize, reps: usize, seed: u64) -> Result<Vec<u64>> {
    let law = match engine {
        Engine::Direct => None,
        _ => Some(t.life_length_law()?),
    };
    let m = t.m();
    let draws = run_replicates(seed, reps, |i, rng| {
        let r = match (engine, &law) {
            (Engine::Direct, _) => bgw_size(t, start, n, POPULATION_CAP, rng),
            (Engine::Cmj, Some(law)) => simulate_cmj(law, m, n, POPULATION_CAP, rng).map(|c| c[n]),
            (Engine::Contour, Some(law)) => simulate_contour(law, m, n, STEP_CAP, rng),
            _ => unreachable!(),
        };
        r.with_context(|| format!("{} replicate {i}", engine.name()))
    });
    draws.into_iter().collect()
}

pub fn cmd_simulate(config: &mut RunConfig, a: &SimulateArgs) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let seed = seed(config, "simulate")?;
    let n = *config.n.get_or_insert(10);
    let reps = *config.reps.get_or_insert(DEFAULT_REPS);
    let start = match (&a.x, a.engine) {
        (None, _) => Start::Gamma,
        (Some(x), Engine::Direct) => Start::Point(t.parse_point(x)?),
        (Some(_), _) => bail!("--x is only supported by the direct engine"),
    };
    let z = sample_sizes(&t, a.engine, start, n, reps, seed)?;
    let mut table = Table::new(&["replicate", "n", "Z_n", "survived"]);
    for (i, &v) in z.iter().enumerate() {
        table.push(vec![i.to_string(), n.to_string(), v.to_string(), (v > 0).to_string()]);
    }
    let survivors = z.iter().filter(|&&v| v > 0).count();
    let mean = z.iter().map(|&v| v as f64).sum::<f64>() / reps.max(1) as f64;
    let result = json!({
        "engine": a.engine,
        "n": n,
        "reps": reps,
        "mean": mean,
        "survivors": survivors,
        "Z_n": z,
    });
    Ok((result, table))
}

pub fn cmd_crosscheck(config: &mut RunConfig, a: &PointArgs) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let seed = seed(config, "crosscheck")?;
    if a.x.is_some() {
        bail!("crosscheck always starts from a γ-distributed ancestor");
    }
    let n = *config.n.get_or_insert(6);
    let reps = *config.reps.get_or_insert(DEFAULT_REPS);
    let tol = *config.tol.get_or_insert(0.01);
    let samples: Vec<Vec<f64>> = Engine::ALL
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let z = sample_sizes(&t, e, Start::Gamma, n, reps, derive_seed(seed, k as u64))?;
            Ok(z.into_iter().map(|v| v as f64).collect())
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["engine_a", "engine_b", "statistic", "p_value"]);
    let mut matrix = vec![vec![1.0; 3]; 3];
    let mut min_p = 1.0f64;
    for (i, ea) in Engine::ALL.iter().enumerate() {
        for (j, eb) in Engine::ALL.iter().enumerate() {
            let (d, p) = if i == j {
                (0.0, 1.0)
            } else {
                let r = ks_two_sample(&samples[i], &samples[j])?;
                (r.statistic, r.p_value)
            };
            matrix[i][j] = p;
            min_p = min_p.min(p);
            table.push(vec![ea.name().into(), eb.name().into(), num(d), num(p)]);
        }
    }
    let means: Vec<f64> = samples.iter().map(|s| s.iter().sum::<f64>() / s.len().max(1) as f64).collect();
    let result = json!({
        "engines": Engine::ALL,
        "n": n,
        "reps": reps,
        "means": means,
        "p_values": matrix,
        "min_p": min_p,
        "agree": min_p > tol,
    });
    Ok((result, table))
}

fn limit_table(r: &LimitReport) -> Table {
    let mut table = Table::new(&["test", "target", "measured", "tolerance", "sample_size", "verdict"]);
    for test in &r.tests {
        table.push(vec![
            test.name.clone(),
            num(test.target),
            opt(test.measured),
            num(test.tolerance),
            test.sample_size.map(|s| s.to_string()).unwrap_or_default(),
            serde_json::to_value(test.verdict)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        ]);
    }
    table
}

fn default_grid(n: usize) -> Vec<usize> {
    (1..=10).map(|i| (n * i / 10).max(i)).collect()
}

fn run_limits(t: &Triplet, x: TypePoint, grid: &[usize], theta: f64, mc: Option<&MonteCarlo>) -> Result<(Value, Table)> {
    let w = TestFn::Const(1.0);
    let report = match analyze(t)?.criticality {
        Criticality::Subcritical => limit_subcritical(t, x, grid, &TestFn::ExpTilt(theta))?,
        Criticality::Critical => limit_critical(t, x, grid, &w, mc)?,
        Criticality::Supercritical => limit_supercritical(t, x, grid, &w, mc)?,
    };
    let table = limit_table(&report);
    Ok((json!(report), table))
}

pub fn cmd_limits(config: &mut RunConfig, a: &LimitArgs) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let x = point(&t, a.point.x.as_deref())?;
    let regime = analyze(&t)?.criticality;
    let n = *config.n.get_or_insert(match regime {
        Criticality::Critical => 10_000,
        _ => 60,
    });
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(n));
    let mc = match config.seed {
        Some(seed) => Some(MonteCarlo {
            n: a.mc_n.unwrap_or(match regime {
                Criticality::Critical => 200,
                _ => 10,
            }),
            reps: *config.reps.get_or_insert(DEFAULT_REPS),
            seed,
        }),
        None => None,
    };
    run_limits(&t, x, &grid, a.theta, mc.as_ref())
}

pub fn cmd_yaglom(config: &mut RunConfig, a: &YaglomArgs) -> Result<(Value, Table)> {
    let t = triplet(config)?;
    let x = point(&t, a.point.x.as_deref())?;
    let regime = analyze(&t)?.criticality;
    if regime != Criticality::Critical {
        bail!("the Yaglom limit needs a critical triplet, this one is {regime}");
    }
    let mc = MonteCarlo {
        n: *config.n.get_or_insert(200),
        reps: *config.reps.get_or_insert(200_000),
        seed: seed(config, "yaglom")?,
    };
    let grid = a.grid.clone().unwrap_or_else(|| default_grid(10_000));
    run_limits(&t, x, &grid, 1.0, Some(&mc))
}

pub fn cmd_renewal(config: &mut RunConfig, a: &RenewalArgs) -> Result<(Value, Table)> {
    let av = a.a.iter().map(|s| parse_number(s)).collect::<Result<Vec<_>>>()?;
    let bv = a.b.iter().map(|s| parse_number(s)).collect::<Result<Vec<_>>>()?;
    let n = *config.n.get_or_insert(200);
    let tol = *config.tol.get_or_insert(1e-3);
    let r = renewal_sequence(&av, &bv, n)?;
    let mut table = Table::new(&["n", "c_n"]);
    for (k, c) in r.c.iter().enumerate() {
        table.push(vec![k.to_string(), num(*c)]);
    }
    let result = json!({
        "last": r.last(),
        "limit": r.limit,
        "deviation": r.deviation,
        "within_tol": r.warning.is_none() && r.deviation <= tol,
        "period": r.period,
        "warning": r.warning,
        "c": r.c,
    });
    Ok((result, table))
}
