use std::f64::consts::PI;

use cauchy_core::field::curl;
use cauchy_core::stepper::{
    advance, compute_coefficients, estimate_radius, run_until, SimState, StepperConfig,
};
use cauchy_core::weights::{WeightKind, WeightSequence};
use cauchy_core::{LabelGrid, VectorField};

fn abc(n: usize, scale: f64) -> VectorField {
    let g = LabelGrid::periodic([n; 3], [2.0 * PI; 3]).unwrap();
    VectorField::from_fn(g, |p| {
        [
            scale * (p[2].sin() + p[1].cos()),
            scale * (p[0].sin() + p[2].cos()),
            scale * (p[1].sin() + p[0].cos()),
        ]
    })
}

fn analytic(k: usize) -> WeightSequence {
    WeightSequence::new(WeightKind::Analytic, k).unwrap()
}

#[test]
fn abc_flow_is_steady_under_one_step() {
    let v0 = abc(16, 1.0);
    let state = SimState::new(v0.clone(), 0.0);
    let series = compute_coefficients(&v0, &state.vorticity, 8, None).unwrap();
    let next = advance(&state, &series, 0.05).unwrap();
    let drift = next.velocity.sub(&v0).unwrap().max_abs();
    assert!(drift <= 1e-8, "{drift}");
}

#[test]
fn one_step_matches_two_half_steps() {
    let v0 = abc(16, 1.0);
    let s0 = SimState::new(v0.clone(), 0.0);
    let full = advance(
        &s0,
        &compute_coefficients(&v0, &s0.vorticity, 8, None).unwrap(),
        0.04,
    )
    .unwrap();
    let mut half = s0.clone();
    for _ in 0..2 {
        let series = compute_coefficients(&half.velocity, &half.vorticity, 8, None).unwrap();
        half = advance(&half, &series, 0.02).unwrap();
    }
    let diff = full.velocity.sub(&half.velocity).unwrap().max_abs();
    assert!(diff <= 1e-8, "{diff}");
    assert!((full.time - half.time).abs() < 1e-15);
}

#[test]
fn radius_scales_inversely_with_amplitude() {
    let w = analytic(8);
    let radius = |lambda: f64| {
        let v = abc(16, lambda);
        let series = compute_coefficients(&v, &curl(&v), 8, None).unwrap();
        estimate_radius(&series, &w, 0.5).unwrap()
    };
    let (r1, r3) = (radius(1.0), radius(3.0));
    assert!(r1.is_finite() && r1 > 0.0);
    assert!((r1 / r3 - 3.0).abs() <= 0.05 * 3.0, "{r1} {r3}");
}

#[test]
fn abc_run_keeps_energy_and_invariants() {
    let cfg = StepperConfig::new(8, 0.25, analytic(8));
    let mut calls = 0;
    let out = run_until(SimState::new(abc(16, 1.0), 0.0), 0.1, &cfg, |_, _| {
        calls += 1;
        Ok(())
    });
    assert!(out.failure.is_none(), "{:?}", out.failure);
    assert_eq!(calls, out.reports.len());
    assert!((out.state.time - 0.1).abs() < 1e-12);
    for r in &out.reports {
        assert!(r.energy_drift <= 1e-6, "{r:?}");
        assert!(r.cauchy <= 1e-6, "{r:?}");
        assert!(r.volume_defect.abs() <= 1e-6, "{r:?}");
        assert_eq!(r.coefficient_norms.len(), 8);
    }
}

#[test]
fn callback_error_stops_the_run() {
    let cfg = StepperConfig::new(6, 0.25, analytic(8));
    let out = run_until(SimState::new(abc(8, 1.0), 0.0), 1.0, &cfg, |_, _| {
        Err(cauchy_core::Error::Numeric("stop".into()))
    });
    assert_eq!(out.reports.len(), 1);
    assert!(out.failure.is_some());
}
