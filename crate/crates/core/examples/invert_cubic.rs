//! Exact inverse and nilpotency of the cubic map `-X + e^{-t} H`.
use num_rational::BigRational;
use nued::polyalg::{catalog, formal_inverse, ParamPolyMap};

fn main() {
    let m = catalog::cubic_nilpotent_map(BigRational::from_integer((-1).into()));
    println!("M   = {m}");
    let n = formal_inverse(&m, None).expect("inverse stabilizes");
    println!("N   = {n}");
    println!("M o N = id: {}", ParamPolyMap::compose(&m, &n).unwrap().is_identity());
    println!("N o M = id: {}", ParamPolyMap::compose(&n, &m).unwrap().is_identity());
    println!("matches printed N: {}", n == catalog::cubic_nilpotent_printed_inverse(BigRational::from_integer((-1).into())));

    let jh = m.nonlinear_map().unwrap().jacobian();
    let nil = jh.is_nilpotent();
    println!("JH =\n{jh}nilpotent: {} (index {:?})", nil.nilpotent, nil.index);
}
