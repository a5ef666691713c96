use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use covering_core::analysis::{
    clique_statistic, density_experiment, fit_alpha, p_tau, read_density_csv,
    simulate_idealized_tree, write_density_csv, AlphaReport, BudgetRule, IdealizedTreeConfig,
};
use covering_core::design::{verify_with_budget, DEFAULT_EXHAUSTIVE_BUDGET};
use covering_core::geometry::{
    ag_hyperplane_covering, induced_cover, precompute_small_covers, select_induced_params,
    SmallCoverCache,
};
use covering_core::greedy::{budget_with_beta, DEFAULT_BETA};
use covering_core::{
    density, density_bound, greedy_cover, read_design, rng, schonheim_bound, write_design,
    CoveringDesign, DesignParams, Error, GreedyConfig, VerifyMode,
};

#[derive(Parser)]
#[command(
    name = "covering",
    version,
    about = "Construct, verify and study (v,k,t) covering designs"
)]
struct Cli {
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random greedy covering with early abort.
    Greedy(GreedyArgs),
    /// Induced covering from affine hyperplanes.
    Induced(InducedArgs),
    /// Hyperplanes of AG(t, p) as a covering.
    Ag(AgArgs),
    /// Check that a design file covers every t-set.
    Verify(VerifyArgs),
    /// Lower bounds on the covering number.
    Bound(ParamArgs),
    /// Mean greedy density over a range of v, as CSV.
    ExperimentDensity(DensityArgs),
    /// Monte Carlo estimate of the uncovered probability on the idealized tree.
    ExperimentTree(TreeArgs),
    /// Fit the density excess exponent to an experiment CSV.
    FitAlpha(FitArgs),
    /// Fraction of leftover t-sets in no k-set of leftover t-sets.
    CliqueStat(CliqueArgs),
}

#[derive(Clone, Copy, Debug)]
enum Seed {
    Fixed(u64),
    Random,
}

impl FromStr for Seed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "random" {
            return Ok(Seed::Random);
        }
        s.parse()
            .map(Seed::Fixed)
            .map_err(|_| format!("expected an integer or `random`, got `{s}`"))
    }
}

#[derive(Args)]
struct SeedArg {
    /// RNG seed, or `random` for an entropy seed.
    #[arg(long, default_value = "0")]
    seed: Seed,
}

impl SeedArg {
    fn resolve(&self) -> u64 {
        let seed = match self.seed {
            Seed::Fixed(s) => s,
            Seed::Random => rand::random(),
        };
        eprintln!("seed: {seed}");
        seed
    }
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    v: u32,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    t: u32,
}

impl ParamArgs {
    fn params(&self) -> Result<DesignParams, Error> {
        DesignParams::new(self.v, self.k, self.t)
    }
}

#[derive(Args)]
struct GreedyArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Number of random draws before completion.
    #[arg(long, conflicts_with = "beta")]
    budget: Option<u64>,
    /// Draw budget `ceil(beta v^t ln v)`.
    #[arg(long)]
    beta: Option<f64>,
    /// After the draws, pack until no k-set can be added.
    #[arg(long)]
    saturate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InducedArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Directory of precomputed small coverings; missing entries are built and saved.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Greedy trials per small covering.
    #[arg(long)]
    cache_trials: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AgArgs {
    #[arg(long)]
    p: u64,
    #[arg(long)]
    t: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    file: PathBuf,
    /// Check this many random t-sets instead of all of them.
    #[arg(long)]
    sample: Option<u64>,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    k: u32,
    #[arg(long)]
    t: u32,
    #[arg(long, default_value_t = 30)]
    vmin: u32,
    #[arg(long, default_value_t = 150)]
    vmax: u32,
    #[arg(long, default_value_t = 10)]
    step: u32,
    /// Trials per v (default 1000, or 200 for k >= 4).
    #[arg(long)]
    trials: Option<u64>,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Stop after the draw budget and complete, instead of packing to saturation.
    #[arg(long)]
    early_abort: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TreeArgs {
    #[arg(long)]
    tau: f64,
    /// Number of t-children of a k-vertex, C(k,t) - 1.
    #[arg(long = "D")]
    d: u32,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_nodes: u64,
    #[command(flatten)]
    seed: SeedArg,
}

#[derive(Args)]
struct FitArgs {
    csv: PathBuf,
    #[arg(long, default_value_t = 100)]
    vlo: u32,
    #[arg(long, default_value_t = 150)]
    vhi: u32,
}

#[derive(Args)]
struct CliqueArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[command(flatten)]
    seed: SeedArg,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
}

enum Outcome {
    Done,
    VerifyFailed,
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report_design(d: &CoveringDesign) -> Result<(), Error> {
    let bound = schonheim_bound(d.params())?.value;
    eprintln!("blocks: {}", d.len());
    eprintln!("density: {:.6}", density(d)?.as_f64());
    eprintln!("schonheim bound: {bound}");
    Ok(())
}

fn run_greedy(a: &GreedyArgs) -> Result<Outcome, Error> {
    let p = a.params.params()?;
    let seed = a.seed.resolve();
    let mut cfg = match (a.budget, a.beta) {
        (Some(b), _) => GreedyConfig::with_budget(seed, b),
        (None, Some(beta)) => GreedyConfig::with_budget(seed, budget_with_beta(p, beta)?),
        (None, None) => GreedyConfig::new(p, seed)?,
    };
    cfg.saturate = a.saturate;
    let (d, stats) = greedy_cover(p, &cfg)?;
    emit(a.out.as_deref(), &write_design(&d))?;
    eprintln!("budget: {}", cfg.budget);
    eprintln!("draws used: {}", stats.draws_used);
    eprintln!("packing blocks: {}", stats.blocks_from_packing);
    if a.saturate {
        eprintln!("sweep blocks: {}", stats.blocks_from_sweep);
    }
    eprintln!("uncovered after packing: {}", stats.uncovered_at_abort);
    eprintln!("completion blocks: {}", stats.blocks_from_completion);
    report_design(&d)?;
    Ok(Outcome::Done)
}

fn run_induced(a: &InducedArgs) -> Result<Outcome, Error> {
    let p = a.params.params()?;
    let seed = a.seed.resolve();
    let mut cfg = select_induced_params(p)?;
    cfg.seed = seed;
    cfg.precompute_trials = a.cache_trials;
    let cache = match &a.cache {
        Some(dir) => {
            SmallCoverCache::load_or_build(dir, p.k(), p.t(), cfg.ell, a.cache_trials, seed)?
        }
        None => precompute_small_covers(p.k(), p.t(), cfg.ell, a.cache_trials, seed)?,
    };
    let (d, stats) = induced_cover(p, &cache, &cfg)?;
    emit(a.out.as_deref(), &write_design(&d))?;
    eprintln!("prime: {}", stats.p);
    eprintln!("ell: {}", stats.ell);
    if stats.small_prime {
        eprintln!("warning: prime below 5");
    }
    eprintln!("hyperplanes: {}", stats.hyperplanes);
    eprintln!("trivial hyperplanes: {}", stats.trivial_hyperplanes);
    eprintln!("cached blocks: {}", stats.cached_blocks);
    eprintln!("trivial blocks: {}", stats.trivial_blocks);
    report_design(&d)?;
    Ok(Outcome::Done)
}

fn run_ag(a: &AgArgs) -> Result<Outcome, Error> {
    let d = ag_hyperplane_covering(a.p, a.t)?;
    emit(a.out.as_deref(), &write_design(&d))?;
    report_design(&d)?;
    Ok(Outcome::Done)
}

fn run_verify(a: &VerifyArgs) -> Result<Outcome, Error> {
    let d = read_design(&fs::read_to_string(&a.file)?)?;
    let mode = match a.sample {
        Some(samples) => VerifyMode::Sampled {
            samples,
            seed: a.seed.resolve(),
        },
        None => VerifyMode::Exhaustive,
    };
    let r = verify_with_budget(&d, mode, DEFAULT_EXHAUSTIVE_BUDGET)?;
    let mut out = String::new();
    out.push_str(&format!("params: {}\n", d.params()));
    out.push_str(&format!("blocks: {}\n", d.len()));
    out.push_str(&format!("mode: {:?}\n", r.mode).to_lowercase());
    out.push_str(&format!("checked: {}\n", r.checked));
    out.push_str(&format!("uncovered: {}\n", r.uncovered_count));
    for s in &r.uncovered_found {
        out.push_str(&format!("uncovered t-set: {s:?}\n"));
    }
    if let Some(c) = r.is_covering {
        out.push_str(&format!("covering: {c}\n"));
    }
    emit(None, &out)?;
    Ok(if r.passed() {
        Outcome::Done
    } else {
        Outcome::VerifyFailed
    })
}

fn run_bound(a: &ParamArgs) -> Result<Outcome, Error> {
    let p = a.params()?;
    let s = schonheim_bound(p)?;
    let d = density_bound(p)?;
    emit(
        None,
        &format!("schonheim: {}\ndensity: {}\n", s.value, d.value),
    )?;
    Ok(Outcome::Done)
}

fn run_density(a: &DensityArgs) -> Result<Outcome, Error> {
    if a.step == 0 || a.vmin > a.vmax {
        return Err(Error::InvalidParams(
            "need step >= 1 and vmin <= vmax".into(),
        ));
    }
    let seed = a.seed.resolve();
    let trials = a.trials.unwrap_or(if a.k >= 4 { 200 } else { 1000 });
    let rule = if a.early_abort {
        BudgetRule::EarlyAbort { beta: a.beta }
    } else {
        BudgetRule::Saturate { beta: a.beta }
    };
    let vs: Vec<u32> = (a.vmin..=a.vmax).step_by(a.step as usize).collect();
    let rows = density_experiment(a.k, a.t, &vs, trials, rule, seed)?;
    let mut buf = Vec::new();
    write_density_csv(&rows, &mut buf)?;
    emit(
        a.out.as_deref(),
        &String::from_utf8(buf).expect("csv is utf-8"),
    )?;
    Ok(Outcome::Done)
}

fn run_tree(a: &TreeArgs) -> Result<Outcome, Error> {
    let seed = a.seed.resolve();
    let mut cfg = IdealizedTreeConfig::new(a.tau, a.d, a.trials, seed);
    cfg.max_nodes = a.max_nodes;
    let est = simulate_idealized_tree(&cfg)?;
    let exact = p_tau(a.tau, a.d);
    emit(
        None,
        &format!(
            "estimate: {:.6}\nstderr: {:.6}\nclosed_form: {exact:.6}\ndifference: {:.6}\nmean_nodes: {:.2}\n",
            est.estimate,
            est.stderr,
            est.estimate - exact,
            est.mean_nodes
        ),
    )?;
    Ok(Outcome::Done)
}

fn run_fit(a: &FitArgs) -> Result<Outcome, Error> {
    let rows = read_density_csv(fs::File::open(&a.csv)?)?;
    let (k, t) = match rows.first() {
        Some(r) => (r.k, r.t),
        None => {
            return Err(Error::InvalidParams(format!(
                "{} has no rows",
                a.csv.display()
            )))
        }
    };
    if rows.iter().any(|r| (r.k, r.t) != (k, t)) {
        return Err(Error::InvalidParams("CSV mixes several (k,t) pairs".into()));
    }
    let points: Vec<(u32, f64)> = rows.iter().map(|r| (r.v, r.mean_density)).collect();
    let fit = fit_alpha(&points, a.vlo, a.vhi)?;
    for v in &fit.excluded {
        eprintln!("warning: excluded v = {v}, mean density <= 1");
    }
    emit(None, &(AlphaReport::new(k, t, &fit).to_json() + "\n"))?;
    Ok(Outcome::Done)
}

fn run_clique(a: &CliqueArgs) -> Result<Outcome, Error> {
    let p = a.params.params()?;
    let seed = a.seed.resolve();
    let budget = budget_with_beta(p, a.beta)?;
    let stats = (0..a.trials)
        .into_par_iter()
        .map(|i| {
            clique_statistic(
                p,
                &GreedyConfig::with_budget(rng::split_seed(seed, i), budget),
            )
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut out = String::from("trial,uncovered,isolated,fraction\n");
    for (i, s) in stats.iter().enumerate() {
        let frac = s
            .isolated_fraction()
            .map_or_else(|| "NA".to_string(), |f| format!("{f:.6}"));
        out.push_str(&format!("{i},{},{},{frac}\n", s.uncovered, s.isolated));
    }
    let fractions: Vec<f64> = stats.iter().filter_map(|s| s.isolated_fraction()).collect();
    let positive = fractions.iter().filter(|&&f| f > 0.0).count();
    eprintln!("runs with leftover t-sets: {}", fractions.len());
    eprintln!("runs with a positive fraction: {positive}");
    if !fractions.is_empty() {
        eprintln!(
            "mean fraction: {:.6}",
            fractions.iter().sum::<f64>() / fractions.len() as f64
        );
    }
    emit(None, &out)?;
    Ok(Outcome::Done)
}

fn run(cli: &Cli) -> Result<Outcome, Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Greedy(a) => run_greedy(a),
        Command::Induced(a) => run_induced(a),
        Command::Ag(a) => run_ag(a),
        Command::Verify(a) => run_verify(a),
        Command::Bound(a) => run_bound(a),
        Command::ExperimentDensity(a) => run_density(a),
        Command::ExperimentTree(a) => run_tree(a),
        Command::FitAlpha(a) => run_fit(a),
        Command::CliqueStat(a) => run_clique(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerifyFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
