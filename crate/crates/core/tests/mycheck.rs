use std::time::Instant;

use num_rational::BigRational;
use nued::injectivity::{builtin_family, FamilyParams};
use nued::mycheck::*;
use nued::odeint::PiecewiseSignal;
use nued::polyalg::{catalog, GaussianRational, ParamBinding, ParamPolyMap, Poly};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn sec42() -> ParamPolyMap {
    catalog::cubic_nilpotent_map(rat(-1))
}

fn print(r: &ExampleReport) {
    print!("{}", r.summary());
}

#[test]
fn reproduce_nilpotent_example() {
    let start = Instant::now();
    let r = reproduce_example("4.2").unwrap();
    print(&r);
    assert!(r.passed);
    assert_eq!(r.check("inverse equals closed-form N_t").unwrap().passed, Some(true));
    assert_eq!(r.check("M o N = N o M = id").unwrap().passed, Some(true));
    println!("elapsed {:?}", start.elapsed());
}

#[test]
fn reproduce_scalar_examples() {
    for id in ["3.2", "3.3", "3.4"] {
        let r = reproduce_example(id).unwrap();
        print(&r);
        assert!(r.passed, "{id}");
    }
    let r = reproduce_example("3.3").unwrap();
    let printed = r.check("printed inverse candidate").unwrap();
    assert_eq!(printed.passed, None);
    assert_eq!(printed.details["two_sided_inverse"], false);
    assert!(matches!(reproduce_example("9.9"), Err(MyCheckError::UnknownExample(_))));
}

#[test]
fn hypotheses_of_the_nilpotent_family() {
    let r = check_hypotheses(&sec42(), &default_omega_suite(3), &CheckConfig::default()).unwrap();
    for id in [CheckId::CondI, CheckId::CondII, CheckId::CondIII, CheckId::CondIV, CheckId::G2, CheckId::G3star] {
        assert_eq!(r.status(id), Some(CheckStatus::Pass), "{id:?}: {:?}", r.checks);
    }
    assert_eq!(r.status(CheckId::G1), Some(CheckStatus::EvidenceOnly));
    assert_eq!(r.overall, CheckStatus::EvidenceOnly);
    assert!(r.comparison_radius.unwrap() > 0.0);
    for c in &r.condition_iv {
        assert!(c.max_violation <= 1e-12 * c.delta);
    }
}

fn map_with_h(h: Vec<Poly>) -> ParamPolyMap {
    ParamPolyMap::with_linear_part(rat(-1), h, vec![ParamBinding::exp_decay(catalog::decay_symbol(), 1.0)]).unwrap()
}

#[test]
fn non_cubic_or_non_nilpotent_parts_fail_condition_ii() {
    let s = Poly::param(3, &catalog::decay_symbol());
    let (x, y, z) = (Poly::var(3, 0), Poly::var(3, 1), Poly::var(3, 2));
    let quadratic = map_with_h(vec![s.mul(&y.pow(2)), s.mul(&x.add(&z).pow(2)), s.mul(&y.pow(2)).neg()]);
    let cfg = CheckConfig { g1_radii: vec![1.0], ..CheckConfig::default() };
    let suite = vec![PiecewiseSignal::constant(vec![0.0; 3])];
    let r = check_hypotheses(&quadratic, &suite, &cfg).unwrap();
    assert_eq!(r.status(CheckId::CondII), Some(CheckStatus::Fail));
    // JH = diag{s} from H = s (x, y, z)^3 / 3 is cubic but not nilpotent
    let third = GaussianRational::real(BigRational::new(1.into(), 3.into()));
    let diag = map_with_h([x, y, z].iter().map(|v| s.mul(&v.pow(3)).scale(&third)).collect());
    let r = check_hypotheses(&diag, &suite, &cfg).unwrap();
    assert_eq!(r.status(CheckId::CondII), Some(CheckStatus::Fail));
    assert_eq!(r.overall, CheckStatus::Fail);
    let linear = ParamPolyMap::identity(3);
    let scaled = linear.add(&linear).unwrap().scale(&third);
    assert!(matches!(check_hypotheses(&scaled, &suite, &cfg), Err(MyCheckError::PreconditionViolated(_))));
    let two = GaussianRational::real(rat(-2));
    let uneven = ParamPolyMap::new(vec![Poly::var(3, 0).neg(), Poly::var(3, 1).scale(&two), Poly::var(3, 2).neg()], vec![])
        .unwrap()
        .detect_linear_part();
    assert!(matches!(check_hypotheses(&uneven, &suite, &cfg), Err(MyCheckError::NotLambdaPlusH(_))));
}

#[test]
fn threshold_is_monotone_in_delta() {
    let w = PiecewiseSignal::constant(vec![1.0, 1.0, 0.5]);
    let cfg = ThresholdConfig::default();
    let ts: Vec<f64> = (1..=10)
        .map(|k| condition_iv_threshold(&sec42(), &w, 0.095 * k as f64, 0.0, &cfg).unwrap().t_omega)
        .collect();
    assert!(ts.windows(2).all(|p| p[1] < p[0]), "{ts:?}");
    let zero = PiecewiseSignal::constant(vec![0.0; 3]);
    assert_eq!(condition_iv_threshold(&sec42(), &zero, 0.5, 0.0, &cfg).unwrap().t_omega, 0.0);
    assert!(condition_iv_threshold(&sec42(), &zero, 1.0, 0.0, &cfg).is_err());
}

#[test]
fn nilpotent_flow_is_globally_stable() {
    let start = Instant::now();
    let ics = cube_ic_grid(3, 10.0, vec![0.0, 5.0, 10.0]);
    let r = verify_gnuas(&sec42(), &ics, &GnuasConfig::default()).unwrap();
    println!("elapsed {:?}, identity error {:?}", start.elapsed(), r.identity_max_error);
    assert_eq!(r.trajectories.len(), 81);
    assert!(r.all_completed && r.all_decayed, "{:?}", r.trajectories.iter().find(|t| !t.decayed));
    assert!(r.identity_holds == Some(true));
    let fit = r.envelope.fit().expect("envelope");
    assert!(fit.worst_slack >= 0.0 && fit.eps < fit.alpha);
    let zero = r.trajectories.iter().find(|t| t.x0.iter().all(|v| *v == 0.0)).unwrap();
    assert_eq!(zero.peak_norm, 0.0);
}

#[test]
fn constant_solution_of_shifted_cubic() {
    let fam = builtin_family("noninjective_demo", &FamilyParams::default()).unwrap();
    let r = constant_solution_check(&fam, &[rat(0)], &[rat(1)], &ConstantCheckConfig::default()).unwrap();
    assert_eq!(r.shifted_vanishes_at_zero, Some(true));
    assert!(r.premise_holds && r.premise_exact && r.constant && r.passed);
    assert!(r.max_deviation <= 1e-6);
    assert!(r.envelope.is_violation());
    assert!(constant_solution_check(&fam, &[rat(1)], &[rat(1)], &ConstantCheckConfig::default()).is_err());
    let r = constant_solution_check(&fam, &[rat(0)], &[rat(2)], &ConstantCheckConfig::default()).unwrap();
    assert!(!r.premise_holds && !r.passed);
}

#[test]
fn constant_solution_of_threshold_family() {
    let fam = builtin_family("example_3_2", &FamilyParams::default()).unwrap();
    let r = constant_solution_check(&fam, &[rat(30)], &[rat(40)], &ConstantCheckConfig::default()).unwrap();
    assert_eq!(r.shifted_vanishes_at_zero, None);
    assert!(r.premise_holds && !r.premise_exact && r.constant && r.passed, "{r:?}");
}
