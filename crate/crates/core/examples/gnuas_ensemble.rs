//! Global decay of `x' = -x + e^{-t} H(x)` from a cube of initial conditions.
use num_rational::BigRational;
use nued::mycheck::{cube_ic_grid, verify_gnuas, GnuasConfig};
use nued::polyalg::catalog;

fn main() {
    let map = catalog::cubic_nilpotent_map(BigRational::from_integer((-1).into()));
    let ics = cube_ic_grid(3, 10.0, vec![0.0, 5.0, 10.0]);
    let r = verify_gnuas(&map, &ics, &GnuasConfig::default()).unwrap();
    let worst = r.trajectories.iter().map(|t| t.peak_norm).fold(0.0, f64::max);
    println!("{} trajectories, all decayed: {}, largest excursion {worst:.3e}", r.trajectories.len(), r.all_decayed);
    println!("x + z identity error {:?}", r.identity_max_error);
    match r.envelope.fit() {
        Some(fit) => println!("envelope: {fit:?}"),
        None => println!("no envelope"),
    }
}
