use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunctionClass {
    K,
    KInfinity,
    N,
    KL,
}

/// Sampled comparison function. One-argument classes use `values[i] = f(r[i])`;
/// the KL class uses `table[i][j] = beta(r[i], tau[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonFunctionSample {
    pub class: FunctionClass,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
    pub tau: Vec<f64>,
    pub table: Vec<Vec<f64>>,
    /// Last value a K-infinity sample must reach.
    pub divergence_threshold: f64,
    /// KL rows must fall below this fraction of their first value.
    pub limit_fraction: f64,
}

impl ComparisonFunctionSample {
    pub fn from_fn(class: FunctionClass, r: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let values = r.iter().map(|&x| f(x)).collect();
        Self { class, r, values, tau: vec![], table: vec![], divergence_threshold: 10.0, limit_fraction: 1e-3 }
    }

    pub fn kl_from_fn(r: Vec<f64>, tau: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let table = r.iter().map(|&x| tau.iter().map(|&s| f(x, s)).collect()).collect();
        Self {
            class: FunctionClass::KL,
            r,
            values: vec![],
            tau,
            table,
            divergence_threshold: 10.0,
            limit_fraction: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonViolation {
    /// Sample point (`[r]` or `[r, tau]`).
    pub at: Vec<f64>,
    pub value: f64,
    pub rule: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCheck {
    pub class: FunctionClass,
    pub pass: bool,
    pub violation: Option<ComparisonViolation>,
}

fn fail(at: Vec<f64>, value: f64, rule: &str) -> Option<ComparisonViolation> {
    Some(ComparisonViolation { at, value, rule: rule.into() })
}

fn increasing_grid(g: &[f64], name: &str) -> Option<ComparisonViolation> {
    if g.is_empty() {
        return fail(vec![], f64::NAN, &format!("empty {name} grid"));
    }
    g.windows(2).find(|w| w[1] <= w[0]).and_then(|w| fail(vec![w[1]], f64::NAN, &format!("{name} grid not strictly increasing")))
}

fn class_k(r: &[f64], v: &[f64], strict: bool) -> Option<ComparisonViolation> {
    if r[0] != 0.0 || v[0] != 0.0 {
        return fail(vec![r[0]], v[0], "must vanish at 0");
    }
    for i in 0..v.len() {
        if !(v[i] >= 0.0) {
            return fail(vec![r[i]], v[i], "must be nonnegative");
        }
        if i > 0 && (v[i] < v[i - 1] || (strict && v[i] == v[i - 1])) {
            return fail(vec![r[i]], v[i], if strict { "must be strictly increasing" } else { "must be nondecreasing" });
        }
    }
    None
}

fn check(s: &ComparisonFunctionSample) -> Option<ComparisonViolation> {
    if let Some(v) = increasing_grid(&s.r, "r") {
        return Some(v);
    }
    match s.class {
        FunctionClass::K | FunctionClass::KInfinity | FunctionClass::N if s.values.len() != s.r.len() => {
            fail(vec![], f64::NAN, "values and grid lengths differ")
        }
        FunctionClass::K => class_k(&s.r, &s.values, false),
        FunctionClass::KInfinity => class_k(&s.r, &s.values, true).or_else(|| {
            let last = *s.values.last().unwrap();
            (last < s.divergence_threshold).then(|| ComparisonViolation {
                at: vec![*s.r.last().unwrap()],
                value: last,
                rule: format!("must grow past {}", s.divergence_threshold),
            })
        }),
        FunctionClass::N => {
            for i in 0..s.values.len() {
                if !(s.values[i] > 0.0) {
                    return fail(vec![s.r[i]], s.values[i], "must be positive");
                }
                if i > 0 && s.values[i] < s.values[i - 1] {
                    return fail(vec![s.r[i]], s.values[i], "must be nondecreasing");
                }
            }
            None
        }
        FunctionClass::KL => {
            if let Some(v) = increasing_grid(&s.tau, "tau") {
                return Some(v);
            }
            if s.table.len() != s.r.len() || s.table.iter().any(|row| row.len() != s.tau.len()) {
                return fail(vec![], f64::NAN, "table shape does not match grids");
            }
            for (j, &tau) in s.tau.iter().enumerate() {
                let col: Vec<f64> = s.table.iter().map(|row| row[j]).collect();
                if let Some(mut v) = class_k(&s.r, &col, false) {
                    v.at.push(tau);
                    v.rule = format!("first argument: {}", v.rule);
                    return Some(v);
                }
            }
            for (i, &r) in s.r.iter().enumerate() {
                let row = &s.table[i];
                for j in 1..row.len() {
                    if row[j] > row[j - 1] || (row[j - 1] > 0.0 && row[j] == row[j - 1]) {
                        return fail(vec![r, s.tau[j]], row[j], "second argument: must be decreasing");
                    }
                }
                let (first, last) = (row[0], *row.last().unwrap());
                if first > 0.0 && last > s.limit_fraction * first {
                    return fail(vec![r, *s.tau.last().unwrap()], last, "second argument: must tend to 0");
                }
            }
            None
        }
    }
}

/// Checks the defining properties of the claimed class on the sample grid.
pub fn validate_comparison_function(sample: &ComparisonFunctionSample) -> ComparisonCheck {
    let violation = check(sample);
    ComparisonCheck { class: sample.class, pass: violation.is_none(), violation }
}
