use barbench::model::{DistributionSpec, NetworkSpec, SrbmParams};
use barbench::sim::{simulate, SimOptions};
use barbench::srbm::{regulator_rates, simulate_srbm, SrbmOptions, SrbmSample};
use barbench::stats::BatchEstimate;
use nalgebra::{DMatrix, DVector};

fn mm1(rho: f64) -> NetworkSpec {
    NetworkSpec {
        stations: 1,
        arrivals: vec![Some(DistributionSpec::exponential(rho))],
        services: vec![DistributionSpec::exponential(1.0)],
        routing: vec![vec![0.0]],
    }
}

fn srbm_1d() -> SrbmParams {
    SrbmParams::new(DMatrix::from_element(1, 1, 2.0), DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0))
        .unwrap()
}

fn mean_by_batch(s: &SrbmSample) -> BatchEstimate {
    BatchEstimate::from_batches(
        (0..s.batches())
            .map(|b| {
                let r = s.state_range(b);
                let n = r.len() as f64;
                r.map(|k| s.state(k)[0]).sum::<f64>() / n
            })
            .collect(),
    )
}

#[test]
fn arrivals_see_time_averages_on_mm1() {
    let (est, _) = simulate(&mm1(0.7), &SimOptions::new(200_000.0, 5)).unwrap();
    for k in 0..6u32 {
        let time: Vec<f64> = est.time_average(|s| (s.l[0] == k) as u8 as f64).batch_values;
        let mut seen = vec![0.0; est.batches()];
        let mut total = vec![0.0; est.batches()];
        for (_, b, l) in &est.arrival_views {
            total[*b as usize] += 1.0;
            if l[0] == k {
                seen[*b as usize] += 1.0;
            }
        }
        let diff = BatchEstimate::from_batches(
            time.iter().zip(seen.iter().zip(&total)).map(|(t, (s, n))| t - s / n).collect(),
        );
        assert!(diff.within(0.0, 3.0), "k={k}: {} +- {}", diff.mean, diff.se);
    }
}

#[test]
fn srbm_regulator_rate_matches_drift() {
    let mut o = SrbmOptions::new(1e4, 3);
    o.burn_in = 1e3;
    let s = simulate_srbm(&srbm_1d(), &o).unwrap();
    let rate = &regulator_rates(&s)[0];
    assert!((rate.mean - 1.0).abs() <= 0.05, "{}", rate.mean);
}

#[test]
fn halving_the_step_keeps_the_mean() {
    let params = srbm_1d();
    let run = |h: f64, seed: u64| {
        let mut o = SrbmOptions::new(1e4, seed);
        o.burn_in = 1e3;
        o.h = h;
        mean_by_batch(&simulate_srbm(&params, &o).unwrap())
    };
    let coarse = run(2e-3, 8);
    let fine = run(1e-3, 9);
    let combined = (coarse.se.powi(2) + fine.se.powi(2)).sqrt();
    assert!((coarse.mean - fine.mean).abs() < 2.0 * combined, "{} vs {} (se {combined})", coarse.mean, fine.mean);
}
