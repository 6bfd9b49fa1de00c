//! Loads a system description and checks the hypotheses on it.
use std::path::Path;

use nued::cli::{load_system_file, System};
use nued::mycheck::{check_hypotheses, default_omega_suite, CheckConfig};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/sec42.json");
    let (desc, _) = load_system_file(&path).expect("bundled file loads");
    let System::Poly { name, map } = desc.build().unwrap() else { panic!("not a polynomial map") };
    println!("{name}: {map}");
    let report = check_hypotheses(&map, &default_omega_suite(3), &CheckConfig::default()).unwrap();
    for c in &report.checks {
        println!("{:?}: {:?}", c.id, c.status);
    }
    println!("overall: {:?}", report.overall);
}
