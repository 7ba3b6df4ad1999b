//! Integrator properties checked against independent references.

use junction::dynamics::{
    compressibility, conserved_energy, extended_vector_field, propagate_element, step_by, ExtendedPoint,
};
use junction::model::{AdiabaticPair, ModelParams};
use junction::sampling::{draw_initial_sample, SamplingOptions};
use proptest::prelude::*;

const PAIRS: [AdiabaticPair; 3] = [AdiabaticPair::UPPER, AdiabaticPair::LOWER, AdiabaticPair::COHERENCE];

fn params(nhc: bool, decay: bool) -> ModelParams {
    ModelParams {
        nhc_enabled: nhc,
        decay_enabled: decay,
        ..ModelParams::default()
    }
}

/// Largest relative deviation of the extended energy over `n` steps.
fn energy_drift(x0: ExtendedPoint, pair: AdiabaticPair, p: &ModelParams, n: usize) -> f64 {
    let h0 = conserved_energy(&x0, pair, p);
    let mut x = x0;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        x = step_by(&x, pair, p, p.tau).0;
        worst = worst.max((conserved_energy(&x, pair, p) - h0).abs());
    }
    worst / h0.abs()
}

pub fn rk4(x: ExtendedPoint, pair: AdiabaticPair, p: &ModelParams, dt: f64, n: usize) -> ExtendedPoint {
    let f = |y: ExtendedPoint| extended_vector_field(&y, p.mean_force(y.q, pair), p);
    let mut y = x;
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f(y + k1 * (0.5 * dt));
        let k3 = f(y + k2 * (0.5 * dt));
        let k4 = f(y + k3 * dt);
        y = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    y
}

fn distance(a: &ExtendedPoint, b: &ExtendedPoint) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    (0..6).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
}

#[test]
fn extended_energy_drift_is_small() {
    for nhc in [false, true] {
        for gamma in [0.0, 0.1, 3.0] {
            let p = ModelParams {
                gamma,
                ..params(nhc, true)
            };
            let mut worst: f64 = 0.0;
            for i in 0..20 {
                let s = draw_initial_sample(&p, &SamplingOptions::default(), i);
                worst = worst.max(energy_drift(s.point, PAIRS[i % 3], &p, p.n_step));
            }
            assert!(worst <= 1e-4, "nhc={nhc} gamma={gamma}: drift {worst:e}");
        }
    }
}

#[test]
fn matches_rk4_reference() {
    let p = params(true, false);
    let x0 = draw_initial_sample(&p, &SamplingOptions::default(), 3).point;
    for pair in PAIRS {
        let mut x = x0;
        for _ in 0..200 {
            x = step_by(&x, pair, &p, p.tau).0;
        }
        let reference = rk4(x0, pair, &p, p.tau / 20.0, 4000);
        let scale = distance(&reference, &ExtendedPoint::default());
        assert!(distance(&x, &reference) / scale < 1e-4);
    }
}

#[test]
fn global_error_is_second_order() {
    for nhc in [false, true] {
        let p = params(nhc, false);
        let x0 = draw_initial_sample(&p, &SamplingOptions::default(), 11).point;
        let t_end = 2.0;
        let reference = rk4(x0, AdiabaticPair::UPPER, &p, 1e-4, 20_000);
        let error = |dt: f64| {
            let n = (t_end / dt).round() as usize;
            let mut x = x0;
            for _ in 0..n {
                x = step_by(&x, AdiabaticPair::UPPER, &p, dt).0;
            }
            distance(&x, &reference)
        };
        let (e1, e2, e3) = (error(0.02), error(0.01), error(0.005));
        assert!(e1 / e2 >= 3.5 && e2 / e3 >= 3.5, "nhc={nhc}: {e1:e} {e2:e} {e3:e}");
    }
}

#[test]
fn backward_step_inverts_forward_step_without_thermostat() {
    let p = params(false, true);
    for i in 0..50 {
        let x0 = draw_initial_sample(&p, &SamplingOptions::default(), i).point;
        let pair = PAIRS[i % 3];
        let mut x = x0;
        for _ in 0..100 {
            x = step_by(&x, pair, &p, p.tau).0;
        }
        x.p = -x.p;
        for _ in 0..100 {
            x = step_by(&x, pair, &p, p.tau).0;
        }
        x.p = -x.p;
        let scale = x0.q.abs().max(x0.p.abs()).max(1.0);
        assert!(distance(&x, &x0) / scale <= 1e-12, "{:e}", distance(&x, &x0) / scale);
    }
}

#[test]
fn compressibility_weight_equals_thermostat_displacement() {
    let p = params(true, true);
    for i in 0..20 {
        let s = draw_initial_sample(&p, &SamplingOptions::default(), i);
        let traj = propagate_element(&s.point, PAIRS[i % 3], &p, 500).unwrap();
        for snap in &traj {
            let dl = snap.point.lambda1 - s.point.lambda1 + snap.point.lambda2 - s.point.lambda2;
            let lhs = snap.log_compressibility.exp();
            assert!((lhs / dl.exp() - 1.0).abs() <= 1e-6, "{} vs {}", snap.log_compressibility, dl);
        }
    }
}

#[test]
fn thermostat_off_is_plain_hamiltonian_flow() {
    let p = params(false, false);
    let x = ExtendedPoint {
        lambda1: 0.0,
        lambda2: 0.0,
        pi1: 0.0,
        pi2: 0.0,
        ..ExtendedPoint::new(12.0, -3.0)
    };
    let (y, _) = step_by(&x, AdiabaticPair::LOWER, &p, p.tau);
    // velocity Verlet written out
    let h = p.tau;
    let p_half = x.p + 0.5 * h * p.mean_force(x.q, AdiabaticPair::LOWER);
    let q1 = x.q + h * p_half;
    let p1 = p_half + 0.5 * h * p.mean_force(q1, AdiabaticPair::LOWER);
    assert_eq!((y.q, y.p), (q1, p1));
    assert_eq!((y.lambda1, y.lambda2, y.pi1, y.pi2), (0.0, 0.0, 0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergence_matches_compressibility(
        q in -200.0f64..200.0,
        pm in -50.0f64..50.0,
        pi1 in -30.0f64..30.0,
        pi2 in -30.0f64..30.0,
        mu1 in 0.2f64..5.0,
        mu2 in 0.2f64..5.0,
    ) {
        let p = ModelParams { mu1, mu2, ..params(true, false) };
        let x = ExtendedPoint { q, p: pm, lambda1: 0.0, lambda2: 0.0, pi1, pi2 };
        let h = 1e-5;
        let mut div = 0.0;
        for pair in [AdiabaticPair::UPPER] {
            for k in 0..6 {
                let mut plus = x.to_array();
                let mut minus = x.to_array();
                plus[k] += h;
                minus[k] -= h;
                let (xp, xm) = (ExtendedPoint::from_array(plus), ExtendedPoint::from_array(minus));
                let fp = extended_vector_field(&xp, p.mean_force(xp.q, pair), &p).to_array();
                let fm = extended_vector_field(&xm, p.mean_force(xm.q, pair), &p).to_array();
                div += (fp[k] - fm[k]) / (2.0 * h);
            }
        }
        prop_assert!((div - compressibility(&x, &p)).abs() <= 1e-6 * (1.0 + div.abs()));
    }

    #[test]
    fn step_is_time_symmetric(
        q in -150.0f64..150.0,
        pm in -40.0f64..40.0,
        pi1 in -20.0f64..20.0,
        pi2 in -20.0f64..20.0,
        nhc in any::<bool>(),
        idx in 0usize..3,
    ) {
        let p = params(nhc, false);
        let x = ExtendedPoint { q, p: pm, lambda1: 0.0, lambda2: 0.0, pi1, pi2 };
        let pair = PAIRS[idx];
        let (y, _) = step_by(&x, pair, &p, p.tau);
        let (z, _) = step_by(&y, pair, &p, -p.tau);
        let scale = 1.0 + q.abs() + pm.abs() + pi1.abs() + pi2.abs();
        prop_assert!(distance(&x, &z) <= 1e-12 * scale);
    }

    #[test]
    fn weights_have_unit_modulus_without_decay(seed in 0u64..1000, idx in 0usize..3) {
        let p = ModelParams { seed, n_step: 300, ..params(true, false) };
        let s = draw_initial_sample(&p, &SamplingOptions::default(), 0);
        let traj = propagate_element(&s.point, PAIRS[idx], &p, 100).unwrap();
        for snap in traj {
            prop_assert!((snap.volume_weighted().norm() - 1.0).abs() <= 1e-12);
        }
    }
}
