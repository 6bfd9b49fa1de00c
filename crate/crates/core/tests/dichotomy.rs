use std::f64::consts::E;

use nalgebra::DMatrix;
use nued::dichotomy::*;
use nued::odeint::{integrate, FnField, IntegratorConfig, LinearField, Trajectory};
use proptest::prelude::*;

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn sampled(field: &LinearField, spec: &GridSpec) -> NormSampleGrid {
    NormSampleGrid::sample(field, spec, &cfg()).unwrap()
}

fn decay_grid() -> NormSampleGrid {
    sampled(&LinearField::diagonal(&[-1.0]), &GridSpec::new(30.0, 0.5, 30.0, 0.5))
}

#[test]
fn scalar_decay_certificate() {
    let c = fit_stability_certificate(&decay_grid(), &FitSearch::default()).unwrap();
    assert!(c.k <= 1.1 && c.alpha >= 0.95 && c.eps <= 0.05, "{c:?}");
    assert!(c.k >= 1.0 && c.eps <= c.alpha - STRICT_GAP);
    assert!(c.worst_slack.unwrap() >= 0.0);
    let u = check_uniform_fit(&decay_grid(), &FitSearch::default());
    let u = u.certificate().unwrap();
    assert!((u.alpha - 1.0).abs() < 0.05 && u.k < 1.1);
}

#[test]
fn oscillating_coefficient_needs_nonuniform_part() {
    let sys = OscillatingScalar::new(-4.0, -1.0);
    let grid = sampled(&sys.field(), &sys.grid());
    let c = fit_stability_certificate(&grid, &FitSearch::default()).unwrap();
    assert!((1.8..=2.2).contains(&c.eps), "{c:?}");
    assert!(c.alpha > c.eps && c.k >= 1.0);
    assert!(validate_certificate(&c, &grid) >= 0.0);
    assert!(!check_uniform_fit(&grid, &FitSearch::default()).is_feasible());
}

#[test]
fn oscillating_coefficient_sampled_matches_closed_form() {
    let sys = OscillatingScalar::new(-4.0, -1.0);
    let grid = sampled(&sys.field(), &GridSpec::new(20.0, 1.0, 20.0, 1.0));
    for e in &grid.entries {
        let exact = sys.log_transition(e.t, e.s);
        assert!((e.log_norm - exact).abs() < 1e-7, "{e:?} vs {exact}");
    }
}

#[test]
fn weak_base_rate_is_infeasible() {
    let sys = OscillatingScalar::new(-2.0, -1.0);
    let grid = sampled(&sys.field(), &sys.grid());
    let err = fit_stability_certificate(&grid, &FitSearch::default()).unwrap_err();
    assert!(err.best_eps.is_some() && err.alpha_bound.is_some());
    let w = sys.lower_bound(50.0);
    assert!(w.rules_out_strict_certificate());
    assert_eq!((w.eps_needed, w.alpha_allowed), (2.0, 1.0));
    // the witness points are among the sampled pairs
    for p in &w.samples {
        let hit = grid.entries.iter().find(|e| (e.t - p.t).abs() < 1e-12 && (e.s - p.s).abs() < 1e-12).unwrap();
        assert!((hit.log_norm - p.log_norm).abs() < 1e-6);
    }
}

#[test]
fn decoupled_spectrum() {
    let est = estimate_spectrum(&LinearField::diagonal(&[-2.0, -1.0]), &ScanConfig::default(), &cfg()).unwrap();
    assert_eq!(est.intervals.len(), 2, "{est:?}");
    assert!((est.intervals[0].midpoint() + 2.0).abs() < 2e-3);
    assert!((est.intervals[1].midpoint() + 1.0).abs() < 2e-3);
    assert_eq!(est.confidence, Confidence::High);
    assert!(!est.left_unbounded && !est.right_unbounded);
}

#[test]
fn constant_scalar_spectrum_is_a_point() {
    let lam = 0.37;
    let f = LinearField::constant("c", DMatrix::from_element(1, 1, lam));
    let est = estimate_spectrum(&f, &ScanConfig::default(), &cfg()).unwrap();
    assert_eq!(est.intervals.len(), 1);
    let i = est.intervals[0];
    assert!(i.width() <= 0.01 && (i.midpoint() - lam).abs() < 2e-3, "{i:?}");
}

#[test]
fn oscillating_spectrum_is_one_interval() {
    let sys = OscillatingScalar::new(-4.0, -1.0);
    let est = estimate_spectrum(&sys.field(), &ScanConfig::default(), &cfg()).unwrap();
    assert_eq!(est.intervals.len(), 1, "{est:?}");
    let i = est.intervals[0];
    // finite-time exponents of the closed form sweep lambda0 -+ |a|
    assert!(i.lower > -5.2 && i.lower < -4.5 && i.upper > -1.5 && i.upper < -0.8, "{i:?}");
}

#[test]
fn coupled_constant_system_spectrum() {
    let m = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.0, -0.5]);
    let est = estimate_spectrum(&LinearField::constant("upper", m), &ScanConfig::default(), &cfg()).unwrap();
    assert_eq!(est.intervals.len(), 2, "{est:?}");
    assert!((est.intervals[0].midpoint() + 3.0).abs() < 0.05, "{:?}", est.intervals);
    assert!((est.intervals[1].midpoint() + 0.5).abs() < 0.05);
    assert!(matches!(est.confidence, Confidence::Low { .. }));
}

#[test]
fn roughness_prediction_holds_for_perturbed_system() {
    let cert = fit_stability_certificate(&decay_grid(), &FitSearch::default()).unwrap();
    let delta = 0.5;
    let pred = roughness_predict(&cert, delta, 0.0).unwrap();
    assert!((pred.alpha - (cert.alpha - delta * cert.k)).abs() < 1e-15);
    let perturbed = LinearField::scalar("-1 + 0.5 sin t", move |t| -1.0 + delta * t.sin());
    let grid = sampled(&perturbed, &GridSpec::new(30.0, 0.5, 30.0, 0.5));
    assert!(validate_certificate(&pred, &grid) >= -1e-9);
}

#[test]
fn extension_recovers_whole_half_line() {
    let grid = decay_grid();
    let tail = grid.filtered(grid.tau_span, |e| e.s >= 2.0).unwrap();
    let cert = fit_stability_certificate(&tail, &FitSearch::default()).unwrap();
    assert_eq!(cert.interval_start, 2.0);
    let l = grid.entries.iter().filter(|e| e.t <= 2.0).map(|e| e.norm()).fold(0.0, f64::max);
    let ext = extend_certificate(&cert, l).unwrap();
    assert!((ext.certificate.k - l * cert.k * (2.0 * cert.alpha).exp()).abs() < 1e-9);
    assert_eq!(ext.certificate.interval_start, 0.0);
    assert!(validate_certificate(&ext.certificate, &grid) >= -1e-9);

    let by_hand = DichotomyCertificate { k: 1.5, alpha: 1.0, interval_start: 1.0, ..cert };
    let ext = extend_certificate(&by_hand, 2.0).unwrap();
    assert!((ext.certificate.k - 3.0 * E).abs() < 1e-12);
}

fn decay_ensemble() -> Vec<Trajectory> {
    let f = FnField::new("x' = -x", 1, |_, x, out| out[0] = -x[0]);
    let mut out = Vec::new();
    for t0 in [0.0, 5.0, 10.0] {
        for x0 in [-3.0, 0.5, 2.0] {
            let times: Vec<f64> = (0..=40).map(|k| t0 + 0.5 * k as f64).collect();
            let c = IntegratorConfig::default().with_samples(times);
            out.push(integrate(&f, t0, &[x0], t0 + 20.0, &c).completed().unwrap());
        }
    }
    out
}

#[test]
fn envelope_of_linear_decay() {
    let ens = decay_ensemble();
    let fit = fit_gnuas_envelope(&ens, &envelope_search());
    let fit = fit.fit().expect("feasible");
    assert!((fit.k - 1.0).abs() < 1e-3 && (fit.alpha - 1.0).abs() < 1e-3 && fit.eps < 1e-3, "{fit:?}");
    for tr in &ens {
        let x0 = tr.x0[0].abs();
        for (t, x) in &tr.samples {
            assert!(x[0].abs() <= fit.bound(tr.t0, x0, *t) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn constant_trajectory_is_a_violation() {
    let f = FnField::new("x' = 0", 1, |_, _, out| out[0] = 0.0);
    let c = IntegratorConfig::default().with_samples((0..=20).map(f64::from).collect());
    let tr = integrate(&f, 0.0, &[1.0], 20.0, &c).completed().unwrap();
    match fit_gnuas_envelope(&[tr], &envelope_search()) {
        EnvelopeOutcome::Violation { non_decay: Some(w), .. } => {
            assert_eq!(w.trajectory, 0);
            assert_eq!(w.final_norm, 1.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn comparison_functions_from_the_stability_estimate() {
    let kl = ComparisonFunctionSample::kl_from_fn(
        (0..=20).map(|k| k as f64 * 0.5).collect(),
        (0..=40).map(|k| k as f64 * 0.25).collect(),
        |r, tau| r * (-tau).exp(),
    );
    assert!(validate_comparison_function(&kl).pass);
    let theta = ComparisonFunctionSample::from_fn(FunctionClass::N, (0..=20).map(f64::from).collect(), |t| (0.5 * t).exp());
    assert!(validate_comparison_function(&theta).pass);
    let e = ComparisonFunctionSample::from_fn(FunctionClass::K, vec![0.0, 1.0], |x| (-x).exp());
    let v = validate_comparison_function(&e).violation.unwrap();
    assert_eq!((v.at[0], v.value), (0.0, 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn more_samples_never_lower_eps(mask in proptest::collection::vec(any::<bool>(), 121), l0 in -6.0f64..-3.5) {
        let sys = OscillatingScalar::new(l0, -1.0);
        let mut all = Vec::new();
        for i in 0..=10 {
            for j in 0..=10 {
                let (s, tau) = (i as f64 * 2.0, j as f64 * 2.0);
                all.push(NormSample { t: s + tau, s, log_norm: sys.log_transition(s + tau, s) });
            }
        }
        let sub: Vec<NormSample> = all.iter().zip(&mask).filter(|(_, m)| **m).map(|(e, _)| *e).collect();
        prop_assume!(!sub.is_empty());
        let big = NormSampleGrid::new("all", 1, all, 20.0).unwrap();
        let small = NormSampleGrid::new("sub", 1, sub, 20.0).unwrap();
        let search = FitSearch::default();
        if let Ok(cb) = fit_stability_certificate(&big, &search) {
            let cs = fit_stability_certificate(&small, &search).unwrap();
            prop_assert!(cs.eps <= cb.eps + 1e-9);
        }
    }
}
