//! Blow-up of `v' = -v + v^3` against the closed form.
use nued::odeint::{bernoulli_reference, integrate, FnField, IntegratorConfig, SolveOutcome};

fn main() {
    let field = FnField::bernoulli(-1.0, 1.0);
    for v0 in [0.5, 0.99, 1.01, 2.0, 5.0] {
        let r = bernoulli_reference(-1.0, 1.0, v0, 0.0);
        match integrate(&field, 0.0, &[v0], 20.0, &IntegratorConfig::default()) {
            SolveOutcome::Blowup { t_star, .. } => {
                println!("v0 = {v0}: blowup at {t_star:.6}, closed form {:.6}", r.blowup_time.unwrap())
            }
            SolveOutcome::Completed(tr) => {
                let (t, x) = tr.last();
                println!("v0 = {v0}: global, v({t}) = {:.3e} (closed form {:.3e})", x[0], r.value(*t).unwrap())
            }
            other => println!("v0 = {v0}: {}", other.describe()),
        }
    }
}
