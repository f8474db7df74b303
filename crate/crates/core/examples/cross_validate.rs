//! End-to-end cross-validation drive: every analytic law against its
//! Monte-Carlo counterpart on one preset. Exits nonzero on disagreement.
//!
//! ```text
//! cargo run --example cross_validate
//! ```

use chargegrid::analytic::{cdf_dn, cdf_x2, prob_tc, AnalyticQuery, QuadratureConfig};
use chargegrid::mplp::{trial_rng, ModelParams};
use chargegrid::sim::{
    estimate_cdf_dn, estimate_prob_tc, rejection_sample_x2, sample_nearest_road_distance,
};
use chargegrid::stats::{ks_threshold_99, EmpiricalCdf};

fn main() {
    let params = ModelParams::new(0.016, 0.2).unwrap();
    let (d_h, d_v) = (2000.0, 3000.0);
    let cfg = QuadratureConfig::default();
    let mut failures = 0usize;

    // nearest charging road distance vs its exponential law
    let n = 20_000;
    let mut rng = trial_rng(11, 0);
    let samples: Vec<f64> = (0..n)
        .map(|_| sample_nearest_road_distance(&params, Some(true), &mut rng).unwrap())
        .collect();
    let ks = EmpiricalCdf::new(samples)
        .ks_distance(|x| 1.0 - (-params.charging_rate() * x).exp());
    let thresh = ks_threshold_99(n);
    println!("nearest-charging law   ks {ks:.5} (threshold {thresh:.5})");
    failures += usize::from(ks > thresh);

    // charging/non-charging gap law vs its rejection sampler
    let gaps = rejection_sample_x2(&params, d_v, 4_000, 13).unwrap();
    let ks = gaps.ks_distance(|x| cdf_x2(&params, d_v, x, &cfg).unwrap());
    let thresh = ks_threshold_99(gaps.len());
    println!("conditional gap law    ks {ks:.5} (threshold {thresh:.5})");
    failures += usize::from(ks > thresh);

    // nearest-charging-distance CDF along the route: tree MC vs quadrature
    let xs = [100.0, 300.0, 500.0, 900.0];
    let ests = estimate_cdf_dn(&params, d_h, d_v, &xs, 50_000, 17).unwrap();
    for (x, est) in xs.iter().zip(&ests) {
        let q = AnalyticQuery::new(params, d_h, d_v, *x).unwrap();
        let a = cdf_dn(&q, &cfg).unwrap().total();
        let z = (a - est.value) / est.stderr;
        println!(
            "route cdf   x={x:>5} analytic {a:.5} mc {:.5} z {z:+.2}",
            est.value
        );
        failures += usize::from(z.abs() > 4.0);
    }

    // probability the route touches a charging road, on a trip short enough
    // that the value sits well inside (0, 1)
    let est = estimate_prob_tc(&params, 300.0, 450.0, 50_000, 19).unwrap();
    let a = prob_tc(&params, 300.0, 450.0).unwrap();
    let z = (a - est.value) / est.stderr;
    println!("charging coverage      analytic {a:.5} mc {:.5} z {z:+.2}", est.value);
    failures += usize::from(z.abs() > 4.0);

    if failures > 0 {
        eprintln!("{failures} cross-validation check(s) failed");
        std::process::exit(1);
    }
    println!("all cross-validation checks passed");
}
