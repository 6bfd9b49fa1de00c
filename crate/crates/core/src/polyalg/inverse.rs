use num_rational::BigRational;
use num_traits::{One, Zero};

use super::gaussian::GaussianRational;
use super::map::ParamPolyMap;
use super::poly::Poly;
use super::PolyError;

/// Classical degree bound `3^(n-1)` for inverses of cubic Keller maps.
pub fn default_degree_cap(n: usize) -> u32 {
    3u32.saturating_pow(n.saturating_sub(1) as u32)
}

/// Formal inverse of `lambda X + H` by the fixed-point iteration
/// `G <- (X - H(G)) / lambda` truncated at `degree_cap`.
///
/// The returned map is checked to be a two-sided inverse by exact composition.
pub fn formal_inverse(map: &ParamPolyMap, degree_cap: Option<u32>) -> Result<ParamPolyMap, PolyError> {
    let n = map.dimension();
    let lambda = map
        .linear_coefficient()
        .cloned()
        .ok_or_else(|| PolyError::NotLambdaPlusH("formal inverse needs a map of the form lambda X + H".into()))?;
    if lambda.is_zero() {
        return Err(PolyError::NotLambdaPlusH("linear coefficient is zero".into()));
    }
    let cap = degree_cap.unwrap_or_else(|| default_degree_cap(n));
    let h = map.nonlinear_map()?;
    let inv_lambda = GaussianRational::real(BigRational::one() / &lambda);
    let bindings: Vec<_> = map.bindings().cloned().collect();

    let x: Vec<Poly> = (0..n).map(|i| Poly::var(n, i)).collect();
    let mut g = ParamPolyMap::new(x.iter().map(|p| p.scale(&inv_lambda)).collect(), bindings.clone())?;
    // every pass fixes at least one more degree of the formal inverse
    let budget = cap as usize + 2;
    let mut stabilized = false;
    for _ in 0..budget {
        let hg = ParamPolyMap::compose_truncated(&h, &g, Some(cap))?;
        let next_coords: Vec<Poly> = x
            .iter()
            .zip(hg.coords())
            .map(|(xi, hi)| xi.sub(hi).scale(&inv_lambda).truncate(cap))
            .collect();
        let next = ParamPolyMap::new(next_coords, bindings.clone())?;
        if next == g {
            stabilized = true;
            break;
        }
        g = next;
    }
    if !stabilized {
        return Err(PolyError::NoStabilization { cap, reason: format!("no fixed point after {budget} iterations") });
    }
    let right = ParamPolyMap::compose(map, &g)?;
    let left = ParamPolyMap::compose(&g, map)?;
    if !right.is_identity() || !left.is_identity() {
        return Err(PolyError::NoStabilization {
            cap,
            reason: "truncated fixed point is not a two-sided inverse; the inverse, if any, exceeds the cap".into(),
        });
    }
    Ok(g.detect_linear_part())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{ParamBinding, Symbol};

    #[test]
    fn inverse_of_linear_map() {
        let lambda = BigRational::new((-3).into(), 2.into());
        let m = ParamPolyMap::with_linear_part(lambda.clone(), vec![Poly::zero(2), Poly::zero(2)], vec![]).unwrap();
        let g = formal_inverse(&m, None).unwrap();
        let expected: Vec<Poly> = (0..2).map(|i| Poly::var(2, i).scale_rational(&(BigRational::one() / &lambda))).collect();
        assert_eq!(g.coords(), expected.as_slice());
    }

    #[test]
    fn non_automorphism_does_not_stabilize() {
        // x -> -x + x^3 has no polynomial inverse
        let m = ParamPolyMap::with_linear_part(
            BigRational::from_integer((-1).into()),
            vec![Poly::var(1, 0).pow(3)],
            vec![],
        )
        .unwrap();
        assert!(matches!(formal_inverse(&m, Some(9)), Err(PolyError::NoStabilization { .. })));
    }

    #[test]
    fn triangular_map_inverts() {
        // (x, y) -> (-x + s y^3, -y)
        let s = Symbol::new("s");
        let h = vec![Poly::param(2, &s).mul(&Poly::var(2, 1).pow(3)), Poly::zero(2)];
        let m = ParamPolyMap::with_linear_part(
            BigRational::from_integer((-1).into()),
            h,
            vec![ParamBinding::exp_decay(s, 1.0)],
        )
        .unwrap();
        let g = formal_inverse(&m, None).unwrap();
        assert!(ParamPolyMap::compose(&m, &g).unwrap().is_identity());
    }
}
