use nued::dichotomy::{estimate_spectrum, ScanConfig};
use nued::odeint::{IntegratorConfig, LinearField};

fn main() {
    let field = LinearField::diagonal(&[-2.0, -1.0]);
    let est = estimate_spectrum(&field, &ScanConfig::default(), &IntegratorConfig::default()).unwrap();
    for i in &est.intervals {
        println!("[{:.4}, {:.4}]", i.lower, i.upper);
    }
    println!("confidence: {:?}", est.confidence);
}
