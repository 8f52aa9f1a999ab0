use std::path::{Path, PathBuf};
use std::process::ExitCode;

use barbench::bar::{evaluate_n, residual_sweep, SweepOptions, ThetaGrid};
use barbench::config::ExperimentConfig;
use barbench::exponents::expansion_error;
use barbench::model::{reflection_and_mmatrix, validate_network};
use barbench::report::{self, Header, Table};
use barbench::sim::{flow_checks, simulate};
use barbench::srbm::{analytic_1d, regulator_rates, simulate_srbm, srbm_bar_residual};
use barbench::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "barbench", version, about = "Heavy-traffic BAR experiments for generalized Jackson networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the network and print the validation report.
    Validate(Common),
    /// Simulate the n-th network; writes flow.csv and summary.csv.
    Simulate(Common),
    /// Exponents against their quadratic expansions; writes expansion.csv.
    Exponents(Common),
    /// Prelimit and asymptotic residuals at one n; writes prelimit.csv and residuals.csv.
    BarCheck(Common),
    /// Simulate the limiting SRBM; writes srbm_summary.csv and srbm_residuals.csv.
    Srbm(Common),
    /// Residual sweep over the n-list; writes residuals.csv, sup.csv, distances.csv, rays.csv.
    Converge(Common),
}

#[derive(Args)]
struct Common {
    /// Config file, or one of the bundled names mm1, tandem2, feedback3.
    #[arg(long)]
    config: String,
    /// Overrides every simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 4 when a check misses its threshold.
    #[arg(long)]
    assert: bool,
}

enum Failure {
    Error(Error),
    Assertion(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(Error::Io(e))
    }
}

type Outcome = Result<(), Failure>;

struct Context {
    cfg: ExperimentConfig,
    header: Header,
    out: PathBuf,
    assert: bool,
}

impl Context {
    fn new(args: &Common) -> Result<Self, Failure> {
        let mut cfg = ExperimentConfig::load(&args.config)?;
        if let Some(seed) = args.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = &args.out {
            cfg.out = Some(out.display().to_string());
        }
        let cfg = cfg.resolve()?;
        let out = PathBuf::from(cfg.out.clone().expect("resolved"));
        let header = Header { config_hash: cfg.hash(), seed: cfg.sim.seed };
        Ok(Context { cfg, header, out, assert: args.assert })
    }

    fn prepare_out(&self) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join("resolved_config.json"), self.cfg.to_json() + "\n")?;
        Ok(())
    }

    fn save(&self, name: &str, table: &Table) -> Result<(), Failure> {
        let path = self.out.join(name);
        table.save(&self.header, &path)?;
        println!("wrote {}", display(&path));
        Ok(())
    }

    fn grid(&self) -> Result<ThetaGrid, Failure> {
        Ok(ThetaGrid::generate(self.cfg.network.d(), &self.cfg.grid)?)
    }

    fn check(&self, failures: Vec<String>) -> Outcome {
        if self.assert && !failures.is_empty() {
            return Err(Failure::Assertion(failures));
        }
        Ok(())
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn validate(args: &Common) -> Outcome {
    let cfg = ExperimentConfig::load(&args.config)?;
    let report = validate_network(&cfg.network)?;
    println!("{report}");
    if !report.passed() {
        return Err(report.into_result().unwrap_err().into());
    }
    let m = reflection_and_mmatrix(&cfg.network.routing_matrix()?)?;
    println!("[{}] m-matrix: {} principal submatrices checked", if m.is_m { "ok" } else { "FAIL" }, m.certificates.len());
    let cfg = cfg.resolve()?;
    let seq = cfg.sequence()?;
    let p = seq.srbm_params()?;
    println!("lambda_a = {:?}", seq.lambda_a().as_slice());
    println!("mu = {:?}", p.mu.as_slice());
    println!("config hash {}", cfg.hash());
    Ok(())
}

fn run_simulate(ctx: &Context) -> Outcome {
    let seq = ctx.cfg.sequence()?;
    let nth = seq.nth_network(ctx.cfg.n)?;
    let (est, counters) = simulate(&nth.network, &ctx.cfg.sim_options())?;
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
    let flow = flow_checks(&est, &counters, &nth.network)?;
    ctx.prepare_out()?;
    ctx.save("flow.csv", &report::flow_table(&flow))?;
    ctx.save("summary.csv", &report::summary_table(&est))?;
    println!("n = {}, max flow z = {:.3}", ctx.cfg.n, flow.max_z());
    let mut failures = Vec::new();
    if !flow.passes(ctx.cfg.thresholds.z) {
        failures.push(format!("flow check: max z {:.3} > {}", flow.max_z(), ctx.cfg.thresholds.z));
    }
    ctx.check(failures)
}

fn run_exponents(ctx: &Context) -> Outcome {
    let seq = ctx.cfg.sequence()?;
    let grid = ctx.grid()?;
    let mut n_list = ctx.cfg.sweep.n_list.clone();
    if n_list.is_empty() {
        n_list.push(ctx.cfg.n);
    }
    let tables = n_list.iter().map(|&n| expansion_error(&seq, n, &grid.points)).collect::<Result<Vec<_>, _>>()?;
    ctx.prepare_out()?;
    ctx.save("expansion.csv", &report::expansion_table(&tables))?;
    for t in &tables {
        println!("n = {:>6}: eta error {:.4e}, zeta error {:.4e}", t.n, t.eta_sup, t.zeta_sup);
    }
    let mut failures = Vec::new();
    if tables.len() >= 2 {
        let (first, last) = (&tables[0], &tables[tables.len() - 1]);
        let k = ctx.cfg.thresholds.expansion_ratio;
        if last.eta_sup > k * first.eta_sup {
            failures.push(format!("eta error ratio {:.3} > {k}", last.eta_sup / first.eta_sup));
        }
        if last.zeta_sup > k * first.zeta_sup {
            failures.push(format!("zeta error ratio {:.3} > {k}", last.zeta_sup / first.zeta_sup));
        }
    }
    ctx.check(failures)
}

fn run_bar_check(ctx: &Context) -> Outcome {
    let seq = ctx.cfg.sequence()?;
    let grid = ctx.grid()?;
    let n = ctx.cfg.n;
    let nth = seq.nth_network(n)?;
    let (est, _) = simulate(&nth.network, &ctx.cfg.sim_options())?;
    let rep = evaluate_n(&seq, n, &est, &grid, true)?;
    ctx.prepare_out()?;
    ctx.save("prelimit.csv", &report::prelimit_table(n, &rep.prelimit))?;
    ctx.save("residuals.csv", &report::residuals_table(std::slice::from_ref(&rep)))?;
    let z = ctx.cfg.thresholds.z;
    let passed = rep.prelimit.iter().filter(|r| r.z().abs() <= z).count();
    println!("n = {n}: prelimit residual within {z} SE at {passed}/{} points", rep.prelimit.len());
    println!("n = {n}: sup |epsilon| / ||theta|| = {:.4e}", rep.sup_normalized);
    let mut failures = Vec::new();
    let need = ctx.cfg.thresholds.prelimit_pass_fraction * rep.prelimit.len() as f64;
    if (passed as f64) < need {
        failures.push(format!("prelimit residual: {passed} of {} points within {z} SE", rep.prelimit.len()));
    }
    ctx.check(failures)
}

fn run_srbm(ctx: &Context) -> Outcome {
    let seq = ctx.cfg.sequence()?;
    let params = seq.srbm_params()?;
    let grid = ctx.grid()?;
    let sample = simulate_srbm(&params, &ctx.cfg.srbm_options())?;
    let regulator = regulator_rates(&sample);
    let rows = grid.points.iter().map(|th| srbm_bar_residual(&sample, &params, th)).collect::<Result<Vec<_>, _>>()?;
    ctx.prepare_out()?;
    ctx.save("srbm_summary.csv", &report::srbm_summary_table(&sample, &regulator, &ctx.cfg.b))?;
    ctx.save("srbm_residuals.csv", &report::srbm_residual_table(&rows))?;
    let th = &ctx.cfg.thresholds;
    let mut failures = Vec::new();
    let worst = rows
        .iter()
        .map(|r| r.residual.mean.abs() / r.theta.iter().fold(0.0f64, |a, x| a.max(x.abs())))
        .fold(0.0, f64::max);
    println!("sup |residual| / ||theta|| = {worst:.4e}");
    if worst > th.srbm_normalized {
        failures.push(format!("SRBM residual {worst:.4e} > {}", th.srbm_normalized));
    }
    for (j, r) in regulator.iter().enumerate() {
        let rel = (r.mean - ctx.cfg.b[j]).abs() / ctx.cfg.b[j];
        println!("station {}: regulator rate {:.4} (b = {})", j + 1, r.mean, ctx.cfg.b[j]);
        if rel > th.regulator_relative {
            failures.push(format!("station {}: regulator rate off by {:.2}%", j + 1, 100.0 * rel));
        }
    }
    if sample.d == 1 {
        let a = analytic_1d(&params)?;
        let ks = sample.marginal(0).ks_to(|x| a.cdf(x));
        println!("KS to exponential({:.4}) = {ks:.4}", a.alpha);
        if ks > th.srbm_ks {
            failures.push(format!("KS {ks:.4} > {}", th.srbm_ks));
        }
    }
    ctx.check(failures)
}

fn run_converge(ctx: &Context) -> Outcome {
    let seq = ctx.cfg.sequence()?;
    let grid = ctx.grid()?;
    let opts = SweepOptions {
        sim: ctx.cfg.sweep_sim_options(),
        srbm: ctx.cfg.sweep.srbm_reference.then(|| ctx.cfg.srbm_options()),
        prelimit: false,
        ray_alphas: ctx.cfg.sweep.ray_alphas.clone(),
    };
    let rep = residual_sweep(&seq, &ctx.cfg.sweep.n_list, &grid, &opts)?;
    ctx.prepare_out()?;
    ctx.save("residuals.csv", &report::residuals_table(&rep.per_n))?;
    ctx.save("sup.csv", &report::sup_table(&rep.per_n))?;
    ctx.save("distances.csv", &report::distances_table(&rep))?;
    if let Some(rays) = &rep.rays {
        ctx.save("rays.csv", &report::rays_table(rays))?;
    }
    for r in &rep.per_n {
        println!("n = {:>6}: sup |epsilon| / ||theta|| = {:.4e}", r.n, r.sup_normalized);
    }
    let mut failures = Vec::new();
    let first = rep.per_n.iter().min_by_key(|r| r.n).expect("nonempty");
    let last = rep.per_n.iter().max_by_key(|r| r.n).expect("nonempty");
    if first.n != last.n {
        let ratio = last.sup_normalized / first.sup_normalized;
        let k = ctx.cfg.thresholds.sup_ratio;
        println!("sup ratio n = {} / n = {}: {ratio:.3}", last.n, first.n);
        if ratio > k {
            failures.push(format!("sup ratio {ratio:.3} > {k}"));
        }
    }
    ctx.check(failures)
}

fn run(cli: &Cli) -> Outcome {
    if let Command::Validate(args) = &cli.command {
        return validate(args);
    }
    let args = match &cli.command {
        Command::Validate(a)
        | Command::Simulate(a)
        | Command::Exponents(a)
        | Command::BarCheck(a)
        | Command::Srbm(a)
        | Command::Converge(a) => a,
    };
    let ctx = Context::new(args)?;
    match &cli.command {
        Command::Validate(_) => unreachable!(),
        Command::Simulate(_) => run_simulate(&ctx),
        Command::Exponents(_) => run_exponents(&ctx),
        Command::BarCheck(_) => run_bar_check(&ctx),
        Command::Srbm(_) => run_srbm(&ctx),
        Command::Converge(_) => run_converge(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = std::env::var("BARBENCH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // ignore the error if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(failures)) => {
            for f in failures {
                eprintln!("assertion failed: {f}");
            }
            ExitCode::from(4)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Io(_) => 1,
                e if e.is_numeric() => 3,
                _ => 2,
            })
        }
    }
}
