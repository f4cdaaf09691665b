mod common;

use common::*;
use num_complex::Complex64;
use papc::geometry::is_feasible;
use papc::multicarrier::{
    cyclic_multicarrier, dual_value, primal_objective, solve_papc_precoders, CyclicOptions,
    DualOptions, MultiCarrierLink,
};
use papc::PowerConstraints;
use rand::Rng;

/// Projected gradient descent on the primal QCQP from a random start.
fn primal_descent(gs: &[Vec<Complex64>], pc: &PowerConstraints, z0: Vec<Vec<Complex64>>) -> f64 {
    let mut zs = z0;
    let step = 0.5
        / gs.iter()
            .map(|g| g.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
    for _ in 0..20_000 {
        for (z, g) in zs.iter_mut().zip(gs) {
            let e: Complex64 = g
                .iter()
                .zip(z.iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                - 1.0;
            for (zi, gi) in z.iter_mut().zip(g) {
                *zi -= gi * e * (2.0 * step);
            }
        }
        for (i, p) in pc.budgets().iter().enumerate() {
            let used: f64 = zs.iter().map(|z| z[i].norm_sqr()).sum();
            if used > *p {
                let s = (p / used).sqrt();
                zs.iter_mut().for_each(|z| z[i] *= s);
            }
        }
    }
    primal_objective(&zs, gs)
}

#[test]
fn two_antenna_two_carrier_solver_matches_multistart() {
    let mut rng = rng(41);
    for _ in 0..10 {
        let pc = budgets(&mut rng, 2);
        let scale = rng.random_range(0.2..3.0);
        let gs: Vec<Vec<Complex64>> = (0..2)
            .map(|_| cvec(&mut rng, 2).into_iter().map(|v| v * scale).collect())
            .collect();
        let (zs, state) = solve_papc_precoders(&gs, &pc, &DualOptions::default()).unwrap();
        assert!(is_feasible(&zs, &pc, 1e-9).unwrap());
        let ours = primal_objective(&zs, &gs);
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let z0 = vec![
                feasible_point(&mut rng, &pc.scaled(0.5).unwrap()),
                feasible_point(&mut rng, &pc.scaled(0.5).unwrap()),
            ];
            best = best.min(primal_descent(&gs, &pc, z0));
        }
        assert!(ours <= best + 1e-7, "{ours} vs multistart {best}");
        assert!(state.value <= ours + 1e-10);
    }
}

#[test]
fn dual_is_concave_along_segments() {
    let mut rng = rng(42);
    for _ in 0..50 {
        let pc = budgets(&mut rng, 3);
        let gs: Vec<Vec<Complex64>> = (0..4).map(|_| cvec(&mut rng, 3)).collect();
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..3.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..3.0)).collect();
        let da = dual_value(&a, &gs, &pc).unwrap();
        let db = dual_value(&b, &gs, &pc).unwrap();
        for t in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let m: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| (1.0 - t) * x + t * y)
                .collect();
            let dm = dual_value(&m, &gs, &pc).unwrap();
            assert!(dm >= (1.0 - t) * da + t * db - 1e-12);
        }
    }
}

#[test]
fn cyclic_sum_mse_never_increases() {
    let mut rng = rng(43);
    for _ in 0..8 {
        let (m, n, k) = (3, 4, 6);
        let channels = (0..k).map(|_| cmat(&mut rng, m, n)).collect();
        let link =
            MultiCarrierLink::new(channels, noise(&mut rng, m), budgets(&mut rng, n)).unwrap();
        let sol = cyclic_multicarrier(&link, &CyclicOptions::default()).unwrap();
        for w in sol.sum_mse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", sol.sum_mse_trace);
        }
        assert!(is_feasible(&sol.z, &link.pc, 1e-9).unwrap());
    }
}
