//! Concrete maps used throughout the crate: the cubic nilpotent family
//! `M_t(x,y,z) = (lx + s y^3, ly + s (x+z)^3, lz - s y^3)` with `s = e^{-t}`,
//! its closed-form inverse, the eventually-injective cubic family, and the
//! non-injective scalar map `x - x^3`.

use num_rational::BigRational;
use num_traits::One;

use super::gaussian::GaussianRational;
use super::map::{ParamBinding, ParamPolyMap};
use super::poly::{Poly, Symbol};

/// Symbol used for `e^{-t}`.
pub fn decay_symbol() -> Symbol {
    Symbol::new("s")
}

fn decay_binding() -> ParamBinding {
    ParamBinding::exp_decay(decay_symbol(), 1.0)
}

fn vars3() -> (Poly, Poly, Poly, Poly) {
    (Poly::var(3, 0), Poly::var(3, 1), Poly::var(3, 2), Poly::param(3, &decay_symbol()))
}

/// Nonlinear part `H = (s y^3, s (x+z)^3, -s y^3)`.
pub fn cubic_nilpotent_h() -> Vec<Poly> {
    let (x, y, z, s) = vars3();
    let y3 = s.mul(&y.pow(3));
    let xz3 = s.mul(&x.add(&z).pow(3));
    vec![y3.clone(), xz3, y3.neg()]
}

/// `M_t = lambda X + H` with `H` from [`cubic_nilpotent_h`].
pub fn cubic_nilpotent_map(lambda: BigRational) -> ParamPolyMap {
    ParamPolyMap::with_linear_part(lambda, cubic_nilpotent_h(), vec![decay_binding()])
        .expect("catalog map is well formed")
}

/// The closed-form inverse `(N_1, N_2, N_3)`, built literally from the nested
/// expressions and expanded.
pub fn cubic_nilpotent_printed_inverse(lambda: BigRational) -> ParamPolyMap {
    let (x, y, z, s) = vars3();
    let inv = GaussianRational::real(BigRational::one() / lambda);
    let xz_over = x.add(&z).scale(&inv);
    let n2 = y.sub(&s.mul(&xz_over.pow(3))).scale(&inv);
    let n2_cubed = s.mul(&n2.pow(3));
    let n1 = x.sub(&n2_cubed).scale(&inv);
    let n3 = z.add(&n2_cubed).scale(&inv);
    ParamPolyMap::new(vec![n1, n2, n3], vec![decay_binding()])
        .expect("catalog map is well formed")
        .detect_linear_part()
}

/// `F_t = (-x + s(x+y)^3, -y + s[(x+z)^3 - (x+y)^3], -z - s(x+y)^3)`.
pub fn eventual_cubic_map() -> ParamPolyMap {
    let (x, y, z, s) = vars3();
    let xy3 = s.mul(&x.add(&y).pow(3));
    let xz3 = s.mul(&x.add(&z).pow(3));
    ParamPolyMap::with_linear_part(
        -BigRational::one(),
        vec![xy3.clone(), xz3.sub(&xy3), xy3.neg()],
        vec![decay_binding()],
    )
    .expect("catalog map is well formed")
}

/// Inverse candidate as printed alongside [`eventual_cubic_map`]:
/// `G_1 = -x - s(x+y)^3 (1 + s(x+y)^2)^3`, etc.
pub fn eventual_cubic_printed_inverse() -> ParamPolyMap {
    let (x, y, z, s) = vars3();
    let p = x.add(&y);
    let inner = Poly::one(3).add(&s.mul(&p.pow(2))).pow(3);
    let core = p.pow(3).mul(&inner);
    let g1 = x.neg().sub(&s.mul(&core));
    let g2 = y.neg().sub(&s.mul(&p.pow(3))).sub(&core);
    let g3 = z.neg().add(&s.mul(&core));
    ParamPolyMap::new(vec![g1, g2, g3], vec![decay_binding()])
        .expect("catalog map is well formed")
        .detect_linear_part()
}

/// Inverse of [`eventual_cubic_map`] by back-substitution from
/// `F_1 + F_3 = -(x + z)`: with `p = -(u + v + s(u+w)^3)`,
/// `G = (-u + s p^3, p + u - s p^3, -w - s p^3)`.
pub fn eventual_cubic_backsubstituted_inverse() -> ParamPolyMap {
    let (u, v, w, s) = vars3();
    let p = u.add(&v).add(&s.mul(&u.add(&w).pow(3))).neg();
    let sp3 = s.mul(&p.pow(3));
    let g1 = u.neg().add(&sp3);
    let g2 = p.add(&u).sub(&sp3);
    let g3 = w.neg().sub(&sp3);
    ParamPolyMap::new(vec![g1, g2, g3], vec![decay_binding()])
        .expect("catalog map is well formed")
        .detect_linear_part()
}

/// Scalar map `x - x^3`, which identifies `-1`, `0` and `1`.
pub fn noninjective_cubic() -> ParamPolyMap {
    ParamPolyMap::with_linear_part(BigRational::one(), vec![Poly::var(1, 0).pow(3).neg()], vec![])
        .expect("catalog map is well formed")
}
