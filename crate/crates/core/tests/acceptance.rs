//! Acceptance suite: one line per criterion, `[PASS]` or `[FAIL]`, and a
//! nonzero exit status if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use barbench::bar::{evaluate_n, residual_sweep, BarReport, GridSpec, SweepOptions, ThetaGrid};
use barbench::config::ExperimentConfig;
use barbench::exponents::{expansion_error, solve_eta};
use barbench::model::{DistributionSpec, NetworkSpec, SrbmParams};
use barbench::report::{self, Header};
use barbench::sim::{flow_checks, simulate, SimOptions};
use barbench::srbm::{analytic_1d, lcp_reflect, regulator_rates, simulate_srbm, srbm_bar_residual, SrbmOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod tol {
    use std::time::Duration;

    pub const Z: f64 = 3.0;
    pub const C1_RUNTIME: Duration = Duration::from_secs(60);
    pub const C2_KS: f64 = 0.01;
    pub const C2_MEAN_REL: f64 = 0.05;
    pub const C3_EXPONENTIAL: f64 = 1e-8;
    pub const C3_DETERMINISTIC: f64 = 1e-10;
    pub const C4_RATIO: f64 = 0.5;
    pub const C4_RUNTIME: Duration = Duration::from_secs(10);
    pub const C5_MIN_PASSING: usize = 19;
    pub const C6_RATIO_MM1: f64 = 0.5;
    pub const C6_RATIO_TANDEM: f64 = 0.6;
    pub const C6_RUNTIME: Duration = Duration::from_secs(300);
    pub const C7_KS: f64 = 0.02;
    pub const C7_REGULATOR_REL: f64 = 0.05;
    pub const C8_ANALYTIC: f64 = 1e-12;
    pub const C8_TANDEM: f64 = 0.05;
    pub const C9_SIGN: f64 = 1e-12;
    pub const C9_COMPLEMENTARITY: f64 = 1e-10;
    pub const C9_EQUATION: f64 = 1e-10;
    pub const C10_KS: f64 = 0.05;
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::bundled(name).unwrap().resolve().unwrap()
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

fn flow_identities() -> Verdict {
    let t = Instant::now();
    let cfg = config("tandem2");
    let seq = cfg.sequence().unwrap();
    let nth = seq.nth_network(16).unwrap();
    let (est, _) = simulate(&nth.network, &SimOptions::new(2e5, cfg.sim.seed)).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for j in 0..2 {
        let dep = est.departure_rate(j);
        ok &= dep.within(1.0, tol::Z);
        worst = worst.max(dep.z_score(1.0));
        let lambda_s = 1.0 + cfg.b[j] * nth.r_n;
        let idle_target = nth.r_n * cfg.b[j] / lambda_s;
        let idle = est.idle_fraction(j);
        ok &= idle.within(idle_target, tol::Z);
        worst = worst.max(idle.z_score(idle_target));
    }
    let elapsed = t.elapsed();
    verdict(ok && elapsed <= tol::C1_RUNTIME, format!("max z {worst:.2} (<= {}), {:.1}s", tol::Z, elapsed.as_secs_f64()))
}

fn mm1_geometric_law() -> Verdict {
    let rho = 0.8;
    let net = NetworkSpec {
        stations: 1,
        arrivals: vec![Some(DistributionSpec::exponential(rho))],
        services: vec![DistributionSpec::exponential(1.0)],
        routing: vec![vec![0.0]],
    };
    let (est, _) = simulate(&net, &SimOptions::new(1e6, 1)).unwrap();
    let pmf = est.queue_pmf(0);
    let mut cum = 0.0;
    let mut ks: f64 = 0.0;
    for k in 0..pmf.len() + 50 {
        cum += pmf.get(k).copied().unwrap_or(0.0);
        ks = ks.max((cum - (1.0 - rho.powi(k as i32 + 1))).abs());
    }
    let mean = est.mean_queue(0).mean;
    let rel = (mean - 4.0).abs() / 4.0;
    verdict(ks <= tol::C2_KS && rel <= tol::C2_MEAN_REL, format!("KS {ks:.4} (<= {}), E[l] {mean:.3} ({:.1}% off)", tol::C2_KS, 100.0 * rel))
}

fn exponent_solver_oracle() -> Verdict {
    let r_n = 1e-6;
    let mut exp_err: f64 = 0.0;
    let mut det_err: f64 = 0.0;
    for k in 1..=50 {
        let th = -(k as f64) / 50.0;
        let e = solve_eta(&DistributionSpec::exponential(1.0), th, r_n).unwrap().value;
        exp_err = exp_err.max((e - (1.0 - th.exp())).abs());
        let d = solve_eta(&DistributionSpec::deterministic(1.0), th, r_n).unwrap().value;
        det_err = det_err.max((d + th).abs());
    }
    verdict(
        exp_err <= tol::C3_EXPONENTIAL && det_err <= tol::C3_DETERMINISTIC,
        format!("exponential {exp_err:.2e} (<= {:e}), deterministic {det_err:.2e} (<= {:e})", tol::C3_EXPONENTIAL, tol::C3_DETERMINISTIC),
    )
}

fn expansion_decay() -> Verdict {
    let t = Instant::now();
    let mut cfg = config("mm1");
    cfg.network.arrivals[0] = Some(DistributionSpec::erlang(2, 2.0));
    let seq = cfg.sequence().unwrap();
    let grid = ThetaGrid::generate(1, &cfg.grid).unwrap();
    let e4 = expansion_error(&seq, 4, &grid.points).unwrap();
    let e64 = expansion_error(&seq, 64, &grid.points).unwrap();
    let (re, rz) = (e64.eta_sup / e4.eta_sup, e64.zeta_sup / e4.zeta_sup);
    let elapsed = t.elapsed();
    verdict(
        re <= tol::C4_RATIO && rz <= tol::C4_RATIO && elapsed <= tol::C4_RUNTIME,
        format!("eta ratio {re:.3}, zeta ratio {rz:.3} (<= {}), {:.2}s", tol::C4_RATIO, elapsed.as_secs_f64()),
    )
}

fn exact_prelimit_bar() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["mm1", "tandem2"] {
        let cfg = config(name);
        let seq = cfg.sequence().unwrap();
        let grid = ThetaGrid::generate(cfg.network.d(), &cfg.grid).unwrap();
        assert_eq!(grid.len(), 20);
        let nth = seq.nth_network(16).unwrap();
        let (est, _) = simulate(&nth.network, &SimOptions::new(2e5, cfg.sim.seed)).unwrap();
        let rep = evaluate_n(&seq, 16, &est, &grid, true).unwrap();
        let passing = rep.prelimit.iter().filter(|r| r.z().abs() <= tol::Z).count();
        ok &= passing >= tol::C5_MIN_PASSING;
        parts.push(format!("{name} {passing}/20"));
    }
    verdict(ok, format!("{} within {} SE (need {})", parts.join(", "), tol::Z, tol::C5_MIN_PASSING))
}

fn sweep(name: &str) -> BarReport {
    let cfg = config(name);
    let seq = cfg.sequence().unwrap();
    let grid = ThetaGrid::generate(cfg.network.d(), &cfg.grid).unwrap();
    let opts = SweepOptions { sim: SimOptions::new(1e6, cfg.sim.seed), srbm: None, prelimit: false, ray_alphas: Vec::new() };
    residual_sweep(&seq, &[4, 16, 64], &grid, &opts).unwrap()
}

static MM1_SWEEP: OnceLock<(BarReport, Duration)> = OnceLock::new();

fn mm1_sweep() -> &'static (BarReport, Duration) {
    MM1_SWEEP.get_or_init(|| {
        let t = Instant::now();
        let r = sweep("mm1");
        (r, t.elapsed())
    })
}

fn asymptotic_bar_decay() -> Verdict {
    let (mm1, mm1_time) = mm1_sweep();
    let t = Instant::now();
    let tandem = sweep("tandem2");
    let elapsed = *mm1_time + t.elapsed();
    let ratio = |r: &BarReport| r.sup_normalized(64).unwrap() / r.sup_normalized(4).unwrap();
    let (a, b) = (ratio(mm1), ratio(&tandem));
    verdict(
        a <= tol::C6_RATIO_MM1 && b <= tol::C6_RATIO_TANDEM && elapsed <= tol::C6_RUNTIME,
        format!(
            "mm1 ratio {a:.3} (<= {}), tandem2 ratio {b:.3} (<= {}), {:.1}s",
            tol::C6_RATIO_MM1,
            tol::C6_RATIO_TANDEM,
            elapsed.as_secs_f64()
        ),
    )
}

fn srbm_1d() -> SrbmParams {
    SrbmParams::new(DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0))
        .unwrap()
}

fn srbm_opts() -> SrbmOptions {
    let mut o = SrbmOptions::new(1e4, 1);
    o.h = 1e-3;
    o.burn_in = 1e3;
    o
}

fn srbm_one_dimensional_law() -> Verdict {
    let s = simulate_srbm(&srbm_1d(), &srbm_opts()).unwrap();
    let ks = s.marginal(0).ks_to(|x| 1.0 - (-x).exp());
    let rate = regulator_rates(&s)[0].mean;
    let rel = (rate - 1.0).abs();
    verdict(
        ks <= tol::C7_KS && rel <= tol::C7_REGULATOR_REL,
        format!("KS {ks:.4} (<= {}), regulator rate {rate:.4} ({:.1}% off)", tol::C7_KS, 100.0 * rel),
    )
}

fn srbm_bar() -> Verdict {
    let p1 = srbm_1d();
    let a = analytic_1d(&p1).unwrap();
    let grid1 = ThetaGrid::generate(1, &GridSpec::default()).unwrap();
    let analytic = grid1.points.iter().map(|t| a.bar_residual(&p1, t[0]).abs()).fold(0.0, f64::max);
    let cfg = config("tandem2");
    let params = cfg.sequence().unwrap().srbm_params().unwrap();
    let s = simulate_srbm(&params, &srbm_opts()).unwrap();
    let grid = ThetaGrid::generate(2, &GridSpec::default()).unwrap();
    let worst = grid
        .points
        .iter()
        .map(|t| srbm_bar_residual(&s, &params, t).unwrap().residual.mean.abs() / sup_norm(t))
        .fold(0.0, f64::max);
    verdict(
        analytic <= tol::C8_ANALYTIC && worst <= tol::C8_TANDEM,
        format!("analytic {analytic:.1e} (<= {:e}), tandem sup {worst:.4} (<= {})", tol::C8_ANALYTIC, tol::C8_TANDEM),
    )
}

/// `R = (I - Q^T) D` with `Q` substochastic and `D` a positive diagonal.
fn random_m_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let mut q = DMatrix::from_fn(d, d, |i, j| if i == j { 0.0 } else { rng.random::<f64>() });
    for i in 0..d {
        let s: f64 = q.row(i).sum();
        let target = rng.random::<f64>() * 0.99;
        if s > 0.0 {
            for j in 0..d {
                q[(i, j)] *= target / s;
            }
        }
    }
    let diag = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| 0.1 + 3.0 * rng.random::<f64>()));
    (DMatrix::identity(d, d) - q.transpose()) * diag
}

fn lcp_reflection() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = [0.0f64; 3];
    let mut ok = true;
    for _ in 0..10_000 {
        let d = rng.random_range(1..=5);
        let r = random_m_matrix(&mut rng, d);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (z, y) = lcp_reflect(&w, &r).unwrap();
        let wn = sup_norm(&w);
        let neg = z.iter().chain(&y).fold(0.0f64, |a, v| a.max(-v));
        let dot = z.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs() / (1.0 + wn);
        let ry = &r * DVector::from_column_slice(&y);
        let eq = (0..d).map(|i| (z[i] - w[i] - ry[i]).abs()).fold(0.0, f64::max);
        ok &= neg <= tol::C9_SIGN && dot <= tol::C9_COMPLEMENTARITY && eq <= tol::C9_EQUATION;
        worst = [worst[0].max(neg).abs(), worst[1].max(dot), worst[2].max(eq)];
    }
    verdict(ok, format!("10000 instances: sign {:.1e}, <z,y> {:.1e}, equation {:.1e}", worst[0], worst[1], worst[2]))
}

fn heavy_traffic_laws() -> Verdict {
    let (rep, _) = mm1_sweep();
    let ks: Vec<f64> = [4, 16, 64]
        .iter()
        .map(|&n| rep.distances.iter().find(|d| d.n == n && d.reference == "exponential").unwrap().ks)
        .collect();
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    verdict(
        decreasing && ks[2] <= tol::C10_KS,
        format!("KS at n=4,16,64: {:.4}, {:.4}, {:.4} (decreasing, last <= {})", ks[0], ks[1], ks[2], tol::C10_KS),
    )
}

/// Every artifact of a short pipeline, as the bytes the CLI would write.
fn pipeline_bytes() -> Vec<Vec<u8>> {
    let mut cfg = config("tandem2");
    cfg.sim.horizon = 2e4;
    cfg.sim.warmup = Some(2e3);
    let header = Header { config_hash: cfg.hash(), seed: cfg.sim.seed };
    let seq = cfg.sequence().unwrap();
    let grid = ThetaGrid::generate(2, &cfg.grid).unwrap();
    let nth = seq.nth_network(16).unwrap();
    let (est, counters) = simulate(&nth.network, &cfg.sim_options()).unwrap();
    let mut out = Vec::new();
    let mut dump = Vec::new();
    est.write_csv(&mut dump).unwrap();
    out.push(dump);
    let mut tables = vec![report::flow_table(&flow_checks(&est, &counters, &nth.network).unwrap()), report::summary_table(&est)];
    let rep = evaluate_n(&seq, 16, &est, &grid, true).unwrap();
    tables.push(report::prelimit_table(16, &rep.prelimit));
    let tabs = [4, 64].map(|n| expansion_error(&seq, n, &grid.points).unwrap());
    tables.push(report::expansion_table(&tabs));
    let params = seq.srbm_params().unwrap();
    let mut so = SrbmOptions::new(200.0, cfg.srbm.seed);
    so.burn_in = 20.0;
    let s = simulate_srbm(&params, &so).unwrap();
    let rows: Vec<_> = grid.points.iter().map(|t| srbm_bar_residual(&s, &params, t).unwrap()).collect();
    tables.push(report::srbm_residual_table(&rows));
    let opts = SweepOptions { sim: cfg.sim_options(), srbm: Some(so), prelimit: true, ray_alphas: vec![0.5, 0.25, 0.125] };
    let sweep = residual_sweep(&seq, &[4, 16], &grid, &opts).unwrap();
    tables.push(report::residuals_table(&sweep.per_n));
    tables.push(report::distances_table(&sweep));
    tables.push(report::rays_table(sweep.rays.as_ref().unwrap()));
    for t in tables {
        let mut buf = Vec::new();
        t.write(&header, &mut buf).unwrap();
        out.push(buf);
    }
    out
}

fn determinism() -> Verdict {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(pipeline_bytes)
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    let same = a == b && a == c;
    let bytes: usize = a.iter().map(Vec::len).sum();
    verdict(same, format!("{} artifacts, {bytes} bytes, identical across reruns and 1 vs 4 threads", a.len()))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Verdict); 11] = [
        ("C1", "traffic and flow identities", flow_identities),
        ("C2", "M/M/1 geometric law", mm1_geometric_law),
        ("C3", "exponent solver oracle", exponent_solver_oracle),
        ("C4", "quadratic expansion decay", expansion_decay),
        ("C5", "exact prelimit relation", exact_prelimit_bar),
        ("C6", "asymptotic residual decay", asymptotic_bar_decay),
        ("C7", "one-dimensional SRBM law", srbm_one_dimensional_law),
        ("C8", "SRBM adjoint relation", srbm_bar),
        ("C9", "LCP reflection", lcp_reflection),
        ("C10", "heavy-traffic convergence of laws", heavy_traffic_laws),
        ("C11", "determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, title, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let mark = if v.pass { "PASS" } else { "FAIL" };
        println!("[{mark}] {id} {title}: {} [{:.1}s]", v.detail, t.elapsed().as_secs_f64());
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
