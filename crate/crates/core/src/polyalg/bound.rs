use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_normal::sample_standard_normal;
use serde::Serialize;

use super::gaussian::rat_to_f64;
use super::map::ParamPolyMap;
use super::poly::{Homogeneity, Monomial, Poly, Symbol};
use super::PolyError;

/// Constants for `||H(t,x)|| <= C a(t) ||x||^3`.
#[derive(Clone, Debug, Serialize)]
pub struct CubicBound {
    /// Constant from the coefficient-wise Young/AM-GM domination of `sum H_l^2`
    /// by `(x_1^2 + ... + x_n^2)^3`.
    pub c_coeff: f64,
    /// Largest observed `||H(1,x)|| / a(1)` over sampled unit vectors.
    pub c_empirical: f64,
    /// The shared time factor `a(t) = symbol(t)^power`, if any.
    pub time_factor: Option<(Symbol, u32)>,
    pub samples: usize,
}

/// Splits a degree-6 monomial with odd exponents into two even ones `a`, `b`
/// with `a + b = 2e`, so that `|x^e| <= (x^a + x^b) / 2`.
fn young_split(e: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let odd: Vec<usize> = (0..e.len()).filter(|&i| e[i] % 2 == 1).collect();
    let mut a = e.to_vec();
    let mut b = e.to_vec();
    for pair in odd.chunks(2) {
        let (i, j) = (pair[0], pair[1]);
        a[i] += 1;
        a[j] -= 1;
        b[i] -= 1;
        b[j] += 1;
    }
    (a, b)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Coefficient of the even monomial `x^a` in `(x_1^2 + ... + x_n^2)^3`.
fn sphere_coefficient(a: &[u32]) -> f64 {
    let halves: Vec<u32> = a.iter().map(|e| e / 2).collect();
    factorial(3) / halves.iter().map(|h| factorial(*h)).product::<f64>()
}

/// Extracts the common time factor and strips it, leaving a time-free cubic.
fn strip_time_factor(map: &ParamPolyMap) -> Result<(Vec<Poly>, Option<(Symbol, u32)>), PolyError> {
    let mut factor: Option<BTreeMap<Symbol, u32>> = None;
    for p in map.coords() {
        match p.homogeneity_degree() {
            Homogeneity::Zero | Homogeneity::Degree(3) => {}
            _ => return Err(PolyError::NotCubic),
        }
        if !p.is_real() {
            return Err(PolyError::ComplexCoefficients);
        }
        for (m, _) in p.terms() {
            match &factor {
                None => factor = Some(m.param_exponents().clone()),
                Some(f) if f == m.param_exponents() => {}
                Some(_) => return Err(PolyError::MixedTimeFactors),
            }
        }
    }
    let factor = factor.unwrap_or_default();
    if factor.len() > 1 {
        return Err(PolyError::MixedTimeFactors);
    }
    let time_factor = factor.iter().next().map(|(s, e)| (s.clone(), *e));
    let n = map.dimension();
    let stripped = map
        .coords()
        .iter()
        .map(|p| Poly::from_terms(n, p.terms().map(|(m, c)| (Monomial::new(m.state_exponents().to_vec(), BTreeMap::new()), c.clone()))))
        .collect();
    Ok((stripped, time_factor))
}

/// Coefficient-domination constant for a time-free cubic map.
fn coefficient_constant(h: &[Poly]) -> f64 {
    let n = h.first().map(Poly::nvars).unwrap_or(0);
    let mut sum_sq = Poly::zero(n);
    for p in h {
        sum_sq = sum_sq.add(&p.mul(p));
    }
    let mut dominated: BTreeMap<Vec<u32>, BigRational> = BTreeMap::new();
    for (m, c) in sum_sq.terms() {
        let e = m.state_exponents();
        let coef = c.re().clone();
        if e.iter().all(|v| v % 2 == 0) {
            if coef.is_positive() {
                *dominated.entry(e.to_vec()).or_insert_with(BigRational::zero) += coef;
            }
        } else {
            let half = coef.abs() / BigRational::from_integer(2.into());
            let (a, b) = young_split(e);
            *dominated.entry(a).or_insert_with(BigRational::zero) += half.clone();
            *dominated.entry(b).or_insert_with(BigRational::zero) += half;
        }
    }
    let d = dominated
        .iter()
        .map(|(a, c)| rat_to_f64(c) / sphere_coefficient(a))
        .fold(0.0, f64::max);
    d.sqrt()
}

mod rand_distr_normal {
    use rand::Rng;

    /// Box-Muller standard normal.
    pub fn sample_standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Uniform sample on the unit sphere of `R^n`.
pub(crate) fn unit_sphere_point<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| sample_standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Bound `||H(t,x)|| <= C a(t) ||x||^3` for a zero-or-cubic homogeneous map
/// sharing one time factor `a(t)`.
pub fn cubic_bound_constant(h: &ParamPolyMap, samples: usize, seed: u64) -> Result<CubicBound, PolyError> {
    let (stripped, time_factor) = strip_time_factor(h)?;
    let c_coeff = coefficient_constant(&stripped);
    let n = h.dimension();
    let free = ParamPolyMap::new(stripped, vec![])?;
    let compiled = free.compiled();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; n];
    let mut c_empirical: f64 = 0.0;
    for _ in 0..samples {
        let x = unit_sphere_point(&mut rng, n);
        compiled.eval_real(1.0, &x, &mut out);
        c_empirical = c_empirical.max(out.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    Ok(CubicBound { c_coeff, c_empirical, time_factor, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn young_split_pairs_odd_exponents() {
        let (a, b) = young_split(&[5, 1, 0]);
        assert_eq!(a, vec![6, 0, 0]);
        assert_eq!(b, vec![4, 2, 0]);
        let (a, b) = young_split(&[3, 3]);
        assert_eq!((a, b), (vec![4, 2], vec![2, 4]));
    }

    #[test]
    fn sphere_coefficients() {
        assert_eq!(sphere_coefficient(&[6, 0, 0]), 1.0);
        assert_eq!(sphere_coefficient(&[4, 2, 0]), 3.0);
        assert_eq!(sphere_coefficient(&[2, 2, 2]), 6.0);
    }

    #[test]
    fn scalar_cube_has_unit_constant() {
        let h = ParamPolyMap::new(vec![Poly::var(1, 0).pow(3)], vec![]).unwrap();
        let b = cubic_bound_constant(&h, 100, 1).unwrap();
        assert_eq!(b.c_coeff, 1.0);
        assert!((b.c_empirical - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_quadratic() {
        let h = ParamPolyMap::new(vec![Poly::var(1, 0).pow(2)], vec![]).unwrap();
        assert!(matches!(cubic_bound_constant(&h, 10, 1), Err(PolyError::NotCubic)));
    }
}
