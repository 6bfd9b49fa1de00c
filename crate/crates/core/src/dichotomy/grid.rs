use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::odeint::{transition_scaled, IntegratorConfig, LinearField, ScaledMatrix, VectorField};

use super::DichotomyError;

/// One sample `(t, s, ln ||Phi(t, s)||)` with `t >= s >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub s: f64,
    pub log_norm: f64,
}

impl NormSample {
    pub fn norm(&self) -> f64 {
        self.log_norm.exp()
    }
}

/// Sampling pattern: `s` on `[0, s_max]`, `t - s` on `[0, tau_max]`, plus
/// extra `(t, s)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub s_max: f64,
    pub s_step: f64,
    pub tau_max: f64,
    pub tau_step: f64,
    pub extra_pairs: Vec<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { s_max: 50.0, s_step: 0.5, tau_max: 50.0, tau_step: 0.5, extra_pairs: Vec::new() }
    }
}

fn ladder(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

impl GridSpec {
    pub fn new(s_max: f64, s_step: f64, tau_max: f64, tau_step: f64) -> Self {
        Self { s_max, s_step, tau_max, tau_step, extra_pairs: Vec::new() }
    }

    pub fn s_values(&self) -> Vec<f64> {
        ladder(self.s_max, self.s_step)
    }

    pub fn tau_values(&self) -> Vec<f64> {
        ladder(self.tau_max, self.tau_step)
    }

    /// All `(s, [t...])` groups in increasing `s`, extras merged in.
    pub fn pairs_by_s(&self) -> Vec<(f64, Vec<f64>)> {
        let mut groups: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        let key = |s: f64| s.to_bits();
        for s in self.s_values() {
            let ts = self.tau_values().into_iter().map(|tau| s + tau).collect();
            groups.insert(key(s), (s, ts));
        }
        for &(t, s) in &self.extra_pairs {
            groups.entry(key(s)).or_insert_with(|| (s, Vec::new())).1.push(t);
        }
        let mut out: Vec<(f64, Vec<f64>)> = groups.into_values().collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, ts) in &mut out {
            ts.sort_by(f64::total_cmp);
            ts.dedup();
        }
        out
    }

    fn validate(&self) -> Result<(), DichotomyError> {
        let ok = self.s_max >= 0.0 && self.s_step > 0.0 && self.tau_max > 0.0 && self.tau_step > 0.0;
        if !ok || self.extra_pairs.iter().any(|(t, s)| !(*s >= 0.0 && t >= s)) {
            return Err(DichotomyError::InvalidGrid(format!("bad grid specification {self:?}")));
        }
        Ok(())
    }
}

/// Samples of `||Phi(t, s)||` for one linear system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSampleGrid {
    pub system: String,
    pub dimension: usize,
    pub entries: Vec<NormSample>,
    /// Longest elapsed time `t - s` the grid was declared to cover.
    pub tau_span: f64,
    pub spec: Option<GridSpec>,
}

impl NormSampleGrid {
    pub fn new(
        system: impl Into<String>,
        dimension: usize,
        entries: Vec<NormSample>,
        tau_span: f64,
    ) -> Result<Self, DichotomyError> {
        if entries.is_empty() {
            return Err(DichotomyError::InvalidGrid("empty grid".into()));
        }
        if let Some(bad) = entries.iter().find(|e| !(e.s >= 0.0 && e.t >= e.s && e.log_norm.is_finite())) {
            return Err(DichotomyError::InvalidGrid(format!("invalid sample {bad:?}")));
        }
        if !(tau_span > 0.0) {
            return Err(DichotomyError::InvalidGrid("tau_span must be positive".into()));
        }
        Ok(Self { system: system.into(), dimension, entries, tau_span, spec: None })
    }

    /// Integrates the transition matrix from every grid `s` (in parallel).
    pub fn sample(field: &LinearField, spec: &GridSpec, cfg: &IntegratorConfig) -> Result<Self, DichotomyError> {
        let table = sample_matrices(field, spec, cfg)?;
        let entries = table
            .iter()
            .flat_map(|(s, row)| row.iter().map(move |m| NormSample { t: m.t, s: *s, log_norm: m.log_norm() }))
            .collect();
        let mut grid = Self::new(field.name(), field.dimension(), entries, spec.tau_max)?;
        grid.spec = Some(spec.clone());
        Ok(grid)
    }

    /// Keeps the samples satisfying `keep`, with a new declared span.
    pub fn filtered(&self, tau_span: f64, keep: impl Fn(&NormSample) -> bool) -> Result<Self, DichotomyError> {
        let entries = self.entries.iter().copied().filter(|e| keep(e)).collect();
        Self::new(self.system.clone(), self.dimension, entries, tau_span)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Phi(t, s)` in scaled form for every pair of the grid, grouped by `s`.
pub(crate) fn sample_matrices(
    field: &LinearField,
    spec: &GridSpec,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, Vec<ScaledMatrix>)>, DichotomyError> {
    spec.validate()?;
    spec.pairs_by_s()
        .into_par_iter()
        .map(|(s, ts)| {
            transition_scaled(field, s, &ts, cfg)
                .map(|row| (s, row))
                .map_err(|e| DichotomyError::Integration(e.to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_includes_end() {
        assert_eq!(ladder(1.0, 0.5), vec![0.0, 0.5, 1.0]);
        assert_eq!(GridSpec::default().s_values().len(), 101);
    }

    #[test]
    fn extras_are_merged() {
        let mut spec = GridSpec::new(1.0, 1.0, 1.0, 1.0);
        spec.extra_pairs = vec![(5.0, 1.0), (3.0, 0.25)];
        let groups = spec.pairs_by_s();
        assert_eq!(groups.len(), 3);
        assert_eq!(groups[1], (0.25, vec![3.0]));
        assert_eq!(groups[2], (1.0, vec![1.0, 2.0, 5.0]));
    }

    #[test]
    fn invalid_samples_rejected() {
        let bad = NormSample { t: 0.0, s: 1.0, log_norm: 0.0 };
        assert!(NormSampleGrid::new("x", 1, vec![bad], 1.0).is_err());
        assert!(NormSampleGrid::new("x", 1, vec![], 1.0).is_err());
    }
}
