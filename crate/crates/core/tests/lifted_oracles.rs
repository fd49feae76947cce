use std::f64::consts::PI;

use gpsnap_core::lifted::{
    closed_loop_error, crossover_hz, design_lead_controller, is_closed_loop_stable, loop_response,
    phase_margin_deg, process_lifted, sensitivity_lifted,
};
use gpsnap_core::plant::build_free_free_beam;
use gpsnap_core::trajectory::plan_fourth_order;
use gpsnap_core::{
    BeamConfig, ClosedLoop, Controller, DiscreteTf, Error, FrozenPlant, LiftedLti, ModalPlant,
    MotionBounds, SchedulingPosition, Trajectory,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn beam() -> ModalPlant {
    build_free_free_beam(&BeamConfig::default()).unwrap()
}

fn nominal_setup() -> (ModalPlant, FrozenPlant, Controller) {
    let p = beam();
    let g = p.freeze(SchedulingPosition(0.25)).unwrap();
    let c = design_lead_controller(&g, 4.0).unwrap();
    (p, g, c)
}

fn short_move(ts: f64) -> Trajectory {
    plan_fourth_order(&MotionBounds::benchmark(), ts)
        .unwrap()
        .extended_at_rest(400)
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

#[test]
fn benchmark_controller_has_four_hertz_crossover() {
    let (_, g, c) = nominal_setup();
    let l = loop_response(&g, &c, 2.0 * PI * 4.0).unwrap().norm();
    assert!((l - 1.0).abs() <= 0.02, "|CG(4 Hz)| = {l}");
    assert!((crossover_hz(&g, &c).unwrap() / 4.0 - 1.0).abs() <= 0.02);
    assert!(phase_margin_deg(&g, &c).unwrap() >= 30.0);
    assert!(c.lead.is_stable());
    assert!(is_closed_loop_stable(&g, &c));

    let f2 = crossover_hz(&g, &c.with_gain(2.0 * c.gain)).unwrap();
    assert!(f2 > crossover_hz(&g, &c).unwrap());
    assert!(matches!(
        design_lead_controller(&g, 45.0),
        Err(Error::DesignFailure(_))
    ));
}

#[test]
fn benchmark_controller_stabilizes_every_position() {
    let (p, _, c) = nominal_setup();
    for k in 0..50 {
        let rho = p.length * k as f64 / 49.0;
        assert!(
            is_closed_loop_stable(&p.freeze(SchedulingPosition(rho)).unwrap(), &c),
            "rho = {rho}"
        );
    }
}

#[test]
fn apply_matches_dense_product() {
    let (_, g, _) = nominal_setup();
    let n = 300;
    let op = LiftedLti::from_plant(&g, n);
    let u = pseudo_random(n, 7);
    let y = op.apply(&u).unwrap();
    let mut dense = vec![0.0; n * n];
    let h = g.impulse_response(n);
    for i in 0..n {
        for j in 0..=i {
            dense[i * n + j] = h[i - j];
        }
    }
    let scale = max_abs(&y);
    for i in 0..n {
        let yi: f64 = (0..n).map(|j| dense[i * n + j] * u[j]).sum();
        assert!((yi - y[i]).abs() <= 1e-12 * scale);
        assert_eq!(
            op.entry(i, (i + 1).min(n - 1)),
            if i + 1 < n { 0.0 } else { h[0] }
        );
    }
    assert!(matches!(
        op.apply(&u[1..]),
        Err(Error::LengthMismatch { .. })
    ));
}

#[test]
fn lifted_operators_are_causal() {
    let (_, g, c) = nominal_setup();
    let n = 200;
    let s = sensitivity_lifted(&g, &c, n).unwrap();
    let mut u = pseudo_random(n, 3);
    let y = s.apply(&u).unwrap();
    for v in &mut u[120..] {
        *v += 5.0;
    }
    let y2 = s.apply(&u).unwrap();
    assert_eq!(y[..120], y2[..120]);
}

#[test]
fn closed_loop_decomposition() {
    let (_, g, c) = nominal_setup();
    let t = short_move(2.5e-4);
    let n = t.len();
    let lp = ClosedLoop::new(&g, &c, n).unwrap();
    let f: Vec<f64> = t
        .acc
        .iter()
        .zip(&t.snap)
        .map(|(a, s)| 0.9 * a + 1e-5 * s)
        .collect();
    let e = closed_loop_error(&g, &c, &t, &f).unwrap();
    let sr = sensitivity_lifted(&g, &c, n)
        .unwrap()
        .apply(&t.pos)
        .unwrap();
    let gsf = process_lifted(&g, &c, n).unwrap().apply(&f).unwrap();
    let scale = max_abs(&sr);
    for k in 0..n {
        assert!((e[k] - (sr[k] - gsf[k])).abs() <= 1e-9 * scale);
    }
    // f = 0 gives pure feedback tracking
    assert_eq!(lp.error(&t.pos, &vec![0.0; n]).unwrap(), sr);
}

#[test]
fn error_difference_is_process_sensitivity() {
    let (_, g, c) = nominal_setup();
    let t = short_move(2.5e-4);
    let n = t.len();
    let lp = ClosedLoop::new(&g, &c, n).unwrap();
    let f1: Vec<f64> = t.acc.clone();
    let f2: Vec<f64> = t
        .acc
        .iter()
        .zip(&t.snap)
        .map(|(a, s)| 1.1 * a - 3e-5 * s)
        .collect();
    let e1 = lp.error(&t.pos, &f1).unwrap();
    let e2 = lp.error(&t.pos, &f2).unwrap();
    let df: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a - b).collect();
    let pred = lp.process().apply(&df).unwrap();
    let scale = max_abs(&pred);
    for k in 0..n {
        assert!(((e1[k] - e2[k]) + pred[k]).abs() <= 1e-9 * scale);
    }
}

#[test]
fn rigid_plant_with_mass_feedforward_tracks_exactly() {
    let p = build_free_free_beam(&BeamConfig {
        flex_modes: 0,
        ..BeamConfig::default()
    })
    .unwrap();
    let g = p.freeze(SchedulingPosition(0.25)).unwrap();
    let c = design_lead_controller(&g, 4.0).unwrap();
    let t = short_move(p.ts);
    let f: Vec<f64> = t.acc.iter().map(|a| p.mass * a).collect();
    let e = closed_loop_error(&g, &c, &t, &f).unwrap();
    assert!(max_abs(&e) <= 1e-9 * max_abs(&t.pos), "{}", max_abs(&e));
}

#[test]
fn zero_controller_sensitivity_is_identity() {
    let p = build_free_free_beam(&BeamConfig {
        flex_modes: 0,
        ..BeamConfig::default()
    })
    .unwrap();
    let g = p.freeze(SchedulingPosition(0.0)).unwrap();
    let n = 64;
    let gl = LiftedLti::from_plant(&g, n);
    let k = LiftedLti::from_filter(&Controller::open_loop(g.ts).transfer_function(), n);
    let s = LiftedLti::identity(n)
        .add(&gl.compose(&k).unwrap())
        .unwrap()
        .inverse()
        .unwrap();
    assert_eq!(s, LiftedLti::identity(n));
}

#[test]
fn sensitivity_matches_frequency_response_at_lowest_bin() {
    let (_, g, c) = nominal_setup();
    let n = 1 << 14;
    let s = sensitivity_lifted(&g, &c, n).unwrap();
    let h = s.impulse_response();
    assert!(
        max_abs(&h[n - 100..]) < 1e-12,
        "S has not decayed within the window"
    );
    let w = 2.0 * PI / (n as f64 * g.ts);
    let dft: Complex64 = h
        .iter()
        .enumerate()
        .map(|(k, v)| Complex64::from_polar(*v, -w * g.ts * k as f64))
        .sum();
    let expect = 1.0 / (1.0 + loop_response(&g, &c, w).unwrap());
    assert!(
        (dft - expect).norm() <= 1e-6 * expect.norm(),
        "{dft} vs {expect}"
    );
}

#[test]
fn acceleration_feedforward_leaves_filtered_compliance() {
    // closed loop: e = S(r − G m r̈) ≈ S(compliance · r̈) at low frequency
    let (p, g, c) = nominal_setup();
    let t = short_move(p.ts);
    let n = t.len();
    let lp = ClosedLoop::new(&g, &c, n).unwrap();
    let f: Vec<f64> = t.acc.iter().map(|a| p.mass * a).collect();
    let e = lp.error(&t.pos, &f).unwrap();
    let comp = p.compliance(SchedulingPosition(0.25)).unwrap();
    let scaled: Vec<f64> = t.acc.iter().map(|a| comp * a).collect();
    let pred = lp.sensitivity().apply(&scaled).unwrap();
    let diff: Vec<f64> = e.iter().zip(&pred).map(|(a, b)| a - b).collect();
    let rel = gpsnap_core::linalg::norm2(&diff) / gpsnap_core::linalg::norm2(&pred);
    assert!(rel < 0.05, "relative deviation {rel}");
}

#[test]
fn unstable_loop_is_reported() {
    let (_, g, c) = nominal_setup();
    let bad = c.with_gain(-c.gain);
    assert!(!is_closed_loop_stable(&g, &bad));
    assert!(matches!(
        ClosedLoop::new(&g, &bad, 100),
        Err(Error::Instability(_))
    ));
}

fn random_filter(seed: u64) -> DiscreteTf {
    let r = pseudo_random(4, seed);
    DiscreteTf::new(vec![r[0], r[1]], vec![1.0, 0.6 * r[2], 0.3 * r[3]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lifted_operators_commute(sa in 0u64..10_000, sb in 0u64..10_000, su in 0u64..10_000) {
        let n = 150;
        let a = LiftedLti::from_filter(&random_filter(sa), n);
        let b = LiftedLti::from_filter(&random_filter(sb), n);
        let u = pseudo_random(n, su);
        let ab = a.apply(&b.apply(&u).unwrap()).unwrap();
        let ba = b.apply(&a.apply(&u).unwrap()).unwrap();
        let scale = max_abs(&ab).max(1e-300);
        for k in 0..n {
            prop_assert!((ab[k] - ba[k]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn lifted_apply_is_linear(seed in 0u64..10_000, alpha in -5.0..5.0f64) {
        let n = 120;
        let a = LiftedLti::from_filter(&random_filter(seed), n);
        let u = pseudo_random(n, seed + 1);
        let v = pseudo_random(n, seed + 2);
        let mix: Vec<f64> = u.iter().zip(&v).map(|(x, y)| alpha * x + y).collect();
        let (yu, yv, ym) = (a.apply(&u).unwrap(), a.apply(&v).unwrap(), a.apply(&mix).unwrap());
        let scale = max_abs(&ym).max(max_abs(&yu)).max(1e-300);
        for k in 0..n {
            prop_assert!((ym[k] - alpha * yu[k] - yv[k]).abs() <= 1e-12 * scale * (1.0 + alpha.abs()));
        }
    }

    #[test]
    fn process_sensitivity_commutes_with_sensitivity(seed in 0u64..10_000) {
        let (_, g, c) = nominal_setup();
        let n = 200;
        let lp = ClosedLoop::new(&g, &c, n).unwrap();
        let u = pseudo_random(n, seed);
        let a = lp.process().apply(&lp.sensitivity().apply(&u).unwrap()).unwrap();
        let b = lp.sensitivity().apply(&lp.process().apply(&u).unwrap()).unwrap();
        let scale = max_abs(&a).max(1e-300);
        for k in 0..n {
            prop_assert!((a[k] - b[k]).abs() <= 1e-10 * scale);
        }
    }
}
