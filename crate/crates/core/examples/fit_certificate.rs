//! Certificates for `x' = (lambda0 + a t sin t) x`.
use nued::dichotomy::{check_uniform_fit, fit_stability_certificate, FitSearch, NormSampleGrid, OscillatingScalar};
use nued::odeint::IntegratorConfig;

fn main() {
    for (l0, a) in [(-4.0, -1.0), (-2.0, -1.0)] {
        let sys = OscillatingScalar::new(l0, a);
        let grid = NormSampleGrid::sample(&sys.field(), &sys.grid(), &IntegratorConfig::default()).unwrap();
        println!("lambda0 = {l0}, a = {a}, {} samples", grid.len());
        match fit_stability_certificate(&grid, &FitSearch::default()) {
            Ok(c) => println!("  K = {:.4}, alpha = {:.4}, eps = {:.4}", c.k, c.alpha, c.eps),
            Err(e) => {
                let w = sys.lower_bound(50.0);
                println!("  {e}");
                println!("  lattice witness: eps >= {}, alpha <= {}", w.eps_needed, w.alpha_allowed);
            }
        }
        println!("  uniform fit feasible: {}", check_uniform_fit(&grid, &FitSearch::default()).is_feasible());
    }
}
