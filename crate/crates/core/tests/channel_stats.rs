mod common;

use num_complex::Complex64;
use papc::channel_sim::{
    generate_channel, generate_scenario, trial_rng, ScenarioConfig, StreamPurpose,
};

fn small() -> ScenarioConfig {
    ScenarioConfig {
        n: 2,
        m: 2,
        k: 16,
        delay_spread_s: 4e-7,
        trials: 1,
        ..ScenarioConfig::default()
    }
}

#[test]
fn carriers_have_unit_power_and_profile_correlation() {
    let cfg = small();
    let profile = cfg.tap_profile();
    assert!((profile.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let draws = 3000;
    let mut power = 0.0;
    let lags = [1usize, 3, 8];
    let mut corr = vec![Complex64::new(0.0, 0.0); lags.len()];
    let mut count = 0.0;
    for t in 0..draws {
        let hs = generate_channel(&cfg, &mut trial_rng(5, t, StreamPurpose::Channel)).unwrap();
        for j in 0..cfg.m {
            for i in 0..cfg.n {
                power += hs.iter().map(|h| h[(j, i)].norm_sqr()).sum::<f64>() / cfg.k as f64;
                for (c, d) in corr.iter_mut().zip(lags) {
                    *c += hs[0][(j, i)] * hs[d][(j, i)].conj();
                }
                count += 1.0;
            }
        }
    }
    power /= count;
    assert!((power - 1.0).abs() < 0.03, "mean power {power}");
    for (c, d) in corr.iter().zip(lags) {
        let expected: Complex64 = profile
            .iter()
            .enumerate()
            .map(|(l, rho)| {
                Complex64::from_polar(*rho, std::f64::consts::TAU * (d * l) as f64 / cfg.k as f64)
            })
            .sum();
        let est = c / count;
        assert!(
            (est - expected).norm() < 0.05,
            "lag {d}: {est} vs {expected}"
        );
    }
}

#[test]
fn scenario_draws_respect_ranges() {
    let cfg = ScenarioConfig {
        n: 50,
        m: 50,
        ..small()
    };
    let (pc, noise) =
        generate_scenario(&cfg, &mut trial_rng(9, 0, StreamPurpose::Scenario)).unwrap();
    assert!(pc
        .budgets()
        .iter()
        .all(|p| (cfg.p_min_w..=cfg.p_max_w).contains(p)));
    let lo = 10f64.powf(cfg.noise_floor_dbw / 10.0);
    let hi = 10f64.powf((cfg.noise_floor_dbw + cfg.noise_spread_db) / 10.0);
    assert!(noise.variances().iter().all(|v| *v >= lo && *v <= hi));
}

#[test]
fn streams_are_independent_of_each_other() {
    let cfg = small();
    let a = generate_channel(&cfg, &mut trial_rng(5, 0, StreamPurpose::Channel)).unwrap();
    let b = generate_channel(&cfg, &mut trial_rng(5, 1, StreamPurpose::Channel)).unwrap();
    let c = generate_channel(&cfg, &mut trial_rng(5, 0, StreamPurpose::Scenario)).unwrap();
    assert_ne!(a, b);
    assert_ne!(a, c);
    assert_eq!(
        a,
        generate_channel(&cfg, &mut trial_rng(5, 0, StreamPurpose::Channel)).unwrap()
    );
}
