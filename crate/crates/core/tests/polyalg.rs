use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nued::polyalg::catalog::{self, decay_symbol};
use nued::polyalg::{
    cubic_bound_constant, formal_inverse, GaussianRational, Homogeneity, ParamBinding, ParamPolyMap, Poly,
    PolyMatrix,
};

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn lambda_minus_one() -> BigRational {
    rat(-1)
}

#[test]
fn sec42_inverse_matches_printed_formula() {
    for lambda in [rat(-1), rat(-3), BigRational::new((-1).into(), 2.into())] {
        let m = catalog::cubic_nilpotent_map(lambda.clone());
        let n = formal_inverse(&m, None).expect("inverse exists");
        assert_eq!(n, catalog::cubic_nilpotent_printed_inverse(lambda));
        assert!(ParamPolyMap::compose(&m, &n).unwrap().is_identity());
        assert!(ParamPolyMap::compose(&n, &m).unwrap().is_identity());
    }
}

#[test]
fn compose_with_identity_and_hand_expansion() {
    let f = catalog::eventual_cubic_map();
    let id = ParamPolyMap::identity(3);
    assert_eq!(ParamPolyMap::compose(&f, &id).unwrap(), f);

    let sq = ParamPolyMap::new(vec![Poly::var(1, 0).pow(2)], vec![]).unwrap();
    let shift = ParamPolyMap::new(vec![Poly::var(1, 0).add(&Poly::one(1))], vec![]).unwrap();
    let c = ParamPolyMap::compose(&sq, &shift).unwrap();
    let expected = Poly::var(1, 0)
        .pow(2)
        .add(&Poly::var(1, 0).scale(&GaussianRational::from_integer(2)))
        .add(&Poly::one(1));
    assert_eq!(c.coords()[0], expected);
}

#[test]
fn sec42_jacobian_matches_display() {
    let m = catalog::cubic_nilpotent_map(lambda_minus_one());
    let h = m.nonlinear_map().unwrap();
    let j = h.jacobian();
    let (x, y, z) = (Poly::var(3, 0), Poly::var(3, 1), Poly::var(3, 2));
    let s3 = Poly::param(3, &decay_symbol()).scale(&GaussianRational::from_integer(3));
    let y2 = s3.mul(&y.pow(2));
    let xz2 = s3.mul(&x.add(&z).pow(2));
    let zero = Poly::zero(3);
    let expected = PolyMatrix::new(vec![
        vec![zero.clone(), y2.clone(), zero.clone()],
        vec![xz2.clone(), zero.clone(), xz2],
        vec![zero.clone(), y2.neg(), zero],
    ])
    .unwrap();
    assert_eq!(j, expected);
}

#[test]
fn sec42_jacobian_is_nilpotent_of_index_three() {
    let h = catalog::cubic_nilpotent_map(lambda_minus_one()).nonlinear_map().unwrap();
    let j = h.jacobian();
    let nil = j.is_nilpotent();
    assert!(nil.nilpotent);
    assert_eq!(nil.index, Some(3));
    // (JH)^2 = 9 s^2 y^2 (x+z)^2 [[1,0,1],[0,0,0],[-1,0,-1]]
    let (x, y, z) = (Poly::var(3, 0), Poly::var(3, 1), Poly::var(3, 2));
    let c = Poly::param(3, &decay_symbol())
        .pow(2)
        .mul(&y.pow(2))
        .mul(&x.add(&z).pow(2))
        .scale(&GaussianRational::from_integer(9));
    let zero = Poly::zero(3);
    let expected = PolyMatrix::new(vec![
        vec![c.clone(), zero.clone(), c.clone()],
        vec![zero.clone(), zero.clone(), zero.clone()],
        vec![c.neg(), zero, c.neg()],
    ])
    .unwrap();
    assert_eq!(j.pow(2), expected);
}

#[test]
fn eventual_cubic_jacobian_agrees_with_finite_differences() {
    let f = catalog::eventual_cubic_map();
    let compiled = f.compiled();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let t: f64 = rng.gen_range(0.0..3.0);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let jac = compiled.jacobian_at(t, &x);
        for j in 0..3 {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = f.evaluate(t, &xp).unwrap();
            let fm = f.evaluate(t, &xm).unwrap();
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                let scale = jac[(i, j)].abs().max(1.0);
                assert!((fd - jac[(i, j)]).abs() / scale <= 1e-6, "entry ({i},{j}): {fd} vs {}", jac[(i, j)]);
            }
        }
    }
}

#[test]
fn eventual_cubic_inverse_candidates() {
    let f = catalog::eventual_cubic_map();
    let derived = catalog::eventual_cubic_backsubstituted_inverse();
    assert!(ParamPolyMap::compose(&f, &derived).unwrap().is_identity());
    assert!(ParamPolyMap::compose(&derived, &f).unwrap().is_identity());
    let g = formal_inverse(&f, None).unwrap();
    assert_eq!(g, derived);
    let printed = catalog::eventual_cubic_printed_inverse();
    assert!(!ParamPolyMap::compose(&f, &printed).unwrap().is_identity());
}

#[test]
fn shift_conjugate_examples() {
    // F = lambda x: G = lambda z for any base point
    let lin = ParamPolyMap::with_linear_part(rat(-2), vec![Poly::zero(1)], vec![]).unwrap();
    let sc = lin.shift_conjugate(&[rat(5)], &[rat(7)]).unwrap();
    assert_eq!(sc.map, lin);
    assert_eq!(sc.z0, vec![rat(2)]);

    // F(t,x) = t x^2 with a constant-valued binding standing in for t, x = 1
    let tsym = nued::polyalg::Symbol::new("tau");
    let f = ParamPolyMap::new(
        vec![Poly::param(1, &tsym).mul(&Poly::var(1, 0).pow(2))],
        vec![ParamBinding::bounded(tsym.clone(), "identity", |t| t, 1e9).unwrap()],
    )
    .unwrap();
    let sc = f.shift_conjugate(&[rat(1)], &[rat(2)]).unwrap();
    let z = Poly::var(1, 0);
    let expected = Poly::param(1, &tsym).mul(&z.pow(2).add(&z.scale(&GaussianRational::from_integer(2))));
    assert_eq!(sc.map.coords()[0], expected);

    let demo = catalog::noninjective_cubic();
    let sc = demo.shift_conjugate(&[rat(0)], &[rat(1)]).unwrap();
    assert_eq!(sc.map, demo);
    assert_eq!(sc.z0, vec![rat(1)]);
    let at_z0 = demo.eval_exact(&[GaussianRational::from_integer(1)]);
    assert!(at_z0[0].is_zero());
}

#[test]
fn realify_cube() {
    let m = ParamPolyMap::new(vec![Poly::var(1, 0).pow(3)], vec![]).unwrap();
    let r = m.realify();
    let (u, v) = (Poly::var(2, 0), Poly::var(2, 1));
    let three = GaussianRational::from_integer(3);
    let re = u.pow(3).sub(&u.mul(&v.pow(2)).scale(&three));
    let im = u.pow(2).mul(&v).scale(&three).sub(&v.pow(3));
    assert_eq!(r.coords(), &[re, im]);
}

#[test]
fn realify_real_map_restricted_to_real_points() {
    // On v = 0 the real slots reproduce the original map and the imaginary slots vanish.
    let m = catalog::cubic_nilpotent_map(lambda_minus_one());
    let r = m.realify();
    assert_eq!(r.dimension(), 6);
    let on_real_axis: Vec<Poly> = (0..6)
        .map(|k| if k % 2 == 0 { Poly::var(3, k / 2) } else { Poly::zero(3) })
        .collect();
    for k in 0..3 {
        assert_eq!(r.coords()[2 * k].substitute(&on_real_axis, None), m.coords()[k]);
        assert!(r.coords()[2 * k + 1].substitute(&on_real_axis, None).is_zero());
    }
}

#[test]
fn evaluate_sec42_examples() {
    let m = catalog::cubic_nilpotent_map(lambda_minus_one());
    let v = m.evaluate(0.0, &[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(v, vec![0.0, 7.0, -2.0]);
    assert_eq!(m.evaluate(3.0, &[0.0; 3]).unwrap(), vec![0.0; 3]);

    let bound = cubic_bound_constant(&m.nonlinear_map().unwrap(), 1000, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let v = m.evaluate(50.0, &x).unwrap();
        let dev = v.iter().zip(&x).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        let nx3 = x.iter().map(|a| a * a).sum::<f64>().sqrt().powi(3);
        assert!(dev <= 8e-22 * nx3, "{dev} vs {}", 8e-22 * nx3);
        assert!(dev <= bound.c_coeff * (-50.0f64).exp() * nx3 * (1.0 + 1e-12));
    }
}

#[test]
fn sec42_cubic_bound_dominates_samples() {
    let h = catalog::cubic_nilpotent_map(lambda_minus_one()).nonlinear_map().unwrap();
    let b = cubic_bound_constant(&h, 100_000, 42).unwrap();
    assert!(b.c_empirical <= b.c_coeff, "{b:?}");
    assert!(b.c_empirical > 1.0);
    let compiled = h.compiled();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut out = [0.0; 3];
    for _ in 0..1000 {
        let t: f64 = rng.gen_range(0.0..20.0);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        compiled.eval_real(t, &x, &mut out);
        let lhs = out.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rhs = b.c_coeff * (-t).exp() * x.iter().map(|a| a * a).sum::<f64>().sqrt().powi(3);
        assert!(lhs <= rhs * (1.0 + 1e-12));
    }
}

#[test]
fn homogeneity_of_sec42_nonlinear_part() {
    let h = catalog::cubic_nilpotent_map(lambda_minus_one()).nonlinear_map().unwrap();
    assert_eq!(h.homogeneity(), vec![Homogeneity::Degree(3); 3]);
}

fn small_poly(n: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec((prop::collection::vec(0u32..3, n), -3i64..=3, 0u32..2), 1..4).prop_map(move |terms| {
        let s = decay_symbol();
        Poly::from_terms(
            n,
            terms.into_iter().map(|(e, c, sp)| {
                let mut params = BTreeMap::new();
                params.insert(s.clone(), sp);
                (nued::polyalg::Monomial::new(e, params), GaussianRational::from_integer(c))
            }),
        )
    })
}

fn small_map(n: usize) -> impl Strategy<Value = ParamPolyMap> {
    prop::collection::vec(small_poly(n), n).prop_map(|coords| {
        ParamPolyMap::new(coords, vec![ParamBinding::exp_decay(decay_symbol(), 1.0)]).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn compose_is_associative(a in small_map(2), b in small_map(2), c in small_map(2)) {
        let left = ParamPolyMap::compose(&ParamPolyMap::compose(&a, &b).unwrap(), &c).unwrap();
        let right = ParamPolyMap::compose(&a, &ParamPolyMap::compose(&b, &c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn jacobian_is_linear(a in small_map(2), b in small_map(2), p in -4i64..4, q in 1i64..4) {
        let ca = GaussianRational::from_ratio(p, q);
        let cb = GaussianRational::from_ratio(q, 3);
        let combo = a.scale(&ca).add(&b.scale(&cb)).unwrap();
        let lhs = combo.jacobian();
        let rhs = a.jacobian().scale(&ca).add(&b.jacobian().scale(&cb));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn realify_commutes_with_evaluation(re in prop::collection::vec(-1.5f64..1.5, 2), im in prop::collection::vec(-1.5f64..1.5, 2), t in 0.0f64..3.0) {
        let m = catalog::cubic_nilpotent_map(rat(-2)).nonlinear_map().unwrap();
        let m = ParamPolyMap::new(
            m.coords().iter().take(2).map(|p| p.reindex(2, &[0, 1, 1]).scale(&GaussianRational::new(rat(1), rat(2)))).collect(),
            m.bindings().cloned().collect(),
        ).unwrap();
        let z: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
        let direct = m.evaluate_complex(t, &z).unwrap();
        let real_pt: Vec<f64> = z.iter().flat_map(|c| [c.re, c.im]).collect();
        let via = m.realify().evaluate(t, &real_pt).unwrap();
        for k in 0..2 {
            prop_assert!((direct[k].re - via[2 * k]).abs() <= 1e-12 * (1.0 + direct[k].norm()));
            prop_assert!((direct[k].im - via[2 * k + 1]).abs() <= 1e-12 * (1.0 + direct[k].norm()));
        }
    }

    #[test]
    fn nilpotent_iff_nth_power_vanishes(a in small_map(2)) {
        let j = a.jacobian();
        let nil = j.is_nilpotent();
        prop_assert_eq!(nil.nilpotent, j.pow(2).is_zero());
        if let Some(k) = nil.index { prop_assert!(k <= 2); }
    }
}
