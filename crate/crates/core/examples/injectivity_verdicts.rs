//! The four injectivity notions on the built-in families.
use nued::injectivity::{builtin_family, implication_audit, test_injectivity, FamilyParams, Notion, SearchConfig, BUILTIN_FAMILIES};

fn main() {
    let cfg = SearchConfig::default();
    for id in BUILTIN_FAMILIES {
        let f = builtin_family(id, &FamilyParams::default()).unwrap();
        let verdicts: Vec<_> = Notion::ALL.iter().map(|n| test_injectivity(&f, *n, &cfg).unwrap()).collect();
        let line: Vec<String> = verdicts.iter().map(|v| format!("{}={}", v.notion.name(), v.outcome.label())).collect();
        println!("{id}: {} (audit consistent: {})", line.join(" "), implication_audit(&verdicts).consistent);
    }
}
