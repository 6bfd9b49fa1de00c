use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::gaussian::GaussianRational;

/// Name of a time-parameter symbol such as `s` standing for `e^{-t}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(String);

impl Symbol {
    pub fn new(name: impl Into<String>) -> Self {
        Symbol(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Product of state variables and parameter symbols with non-negative exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    state: Vec<u32>,
    params: BTreeMap<Symbol, u32>,
}

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Self { state: vec![0; nvars], params: BTreeMap::new() }
    }

    pub fn new(state: Vec<u32>, params: BTreeMap<Symbol, u32>) -> Self {
        let params = params.into_iter().filter(|(_, e)| *e > 0).collect();
        Self { state, params }
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut m = Self::one(nvars);
        m.state[i] = 1;
        m
    }

    pub fn state_exponents(&self) -> &[u32] {
        &self.state
    }

    pub fn param_exponents(&self) -> &BTreeMap<Symbol, u32> {
        &self.params
    }

    pub fn nvars(&self) -> usize {
        self.state.len()
    }

    /// Total degree in the state variables only.
    pub fn state_degree(&self) -> u32 {
        self.state.iter().sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.state.len(), other.state.len());
        let state = self.state.iter().zip(&other.state).map(|(a, b)| a + b).collect();
        let mut params = self.params.clone();
        for (s, e) in &other.params {
            *params.entry(s.clone()).or_insert(0) += e;
        }
        Monomial { state, params }
    }

    /// Parameter part only, with every state exponent zeroed.
    pub fn param_part(&self) -> Monomial {
        Monomial { state: vec![0; self.state.len()], params: self.params.clone() }
    }

    pub fn is_param_only(&self) -> bool {
        self.state.iter().all(|e| *e == 0)
    }
}

/// Sparse polynomial over `Q(i)` in `nvars` state variables and any number of
/// parameter symbols.
///
/// Zero coefficients are never stored, so derived equality is exact equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Monomial, GaussianRational>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: GaussianRational) -> Self {
        Self::term(Monomial::one(nvars), c)
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, GaussianRational::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::term(Monomial::var(nvars, i), GaussianRational::one())
    }

    pub fn param(nvars: usize, symbol: &Symbol) -> Self {
        let mut params = BTreeMap::new();
        params.insert(symbol.clone(), 1);
        Self::term(Monomial::new(vec![0; nvars], params), GaussianRational::one())
    }

    pub fn term(m: Monomial, c: GaussianRational) -> Self {
        let nvars = m.nvars();
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Self { nvars, terms }
    }

    /// Builds a polynomial from arbitrary terms, merging duplicates and
    /// dropping zeros.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, GaussianRational)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial arity mismatch");
            p.add_term(m, &c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &GaussianRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> GaussianRational {
        self.terms.get(m).cloned().unwrap_or_else(GaussianRational::zero)
    }

    fn add_term(&mut self, m: Monomial, c: &GaussianRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), &-c);
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn scale(&self, c: &GaussianRational) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly { nvars: self.nvars, terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect() }
    }

    pub fn scale_rational(&self, r: &BigRational) -> Poly {
        self.scale(&GaussianRational::real(r.clone()))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        self.mul_truncated(other, None)
    }

    /// Product keeping only terms of state degree `<= cap` (all terms when
    /// `cap` is `None`).
    pub fn mul_truncated(&self, other: &Poly, cap: Option<u32>) -> Poly {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Poly::zero(self.nvars);
        for (ma, ca) in &self.terms {
            let da = ma.state_degree();
            for (mb, cb) in &other.terms {
                if let Some(cap) = cap {
                    if da + mb.state_degree() > cap {
                        continue;
                    }
                }
                out.add_term(ma.mul(mb), &(ca * cb));
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one(self.nvars);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Drops every term of state degree above `cap`.
    pub fn truncate(&self, cap: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.state_degree() <= cap)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Highest state degree among the terms; `None` for the zero polynomial.
    pub fn state_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::state_degree).max()
    }

    /// Terms of exactly the given state degree.
    pub fn homogeneous_part(&self, d: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.state_degree() == d)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn homogeneity_degree(&self) -> Homogeneity {
        let mut degrees = self.terms.keys().map(Monomial::state_degree);
        match degrees.next() {
            None => Homogeneity::Zero,
            Some(d) => {
                if degrees.all(|e| e == d) {
                    Homogeneity::Degree(d)
                } else {
                    Homogeneity::NotHomogeneous
                }
            }
        }
    }

    /// Partial derivative with respect to state variable `i`. Parameters are
    /// treated as constants.
    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.state[i];
            if e == 0 {
                continue;
            }
            let mut dm = m.clone();
            dm.state[i] -= 1;
            out.add_term(dm, &c.scale(&BigRational::from_integer(e.into())));
        }
        out
    }

    pub fn symbols(&self) -> BTreeSet<Symbol> {
        self.terms.keys().flat_map(|m| m.params.keys().cloned()).collect()
    }

    pub fn is_real(&self) -> bool {
        self.terms.values().all(GaussianRational::is_real)
    }

    /// Substitutes `inner[i]` for state variable `i`. The result lives in the
    /// variable space of `inner`. Terms above `cap` state degree are dropped
    /// while multiplying when a cap is given.
    pub fn substitute(&self, inner: &[Poly], cap: Option<u32>) -> Poly {
        assert_eq!(inner.len(), self.nvars, "substitution arity mismatch");
        let out_vars = inner.first().map(Poly::nvars).unwrap_or(0);
        let mut powers: Vec<Vec<Poly>> = inner.iter().map(|p| vec![Poly::one(p.nvars)]).collect();
        let mut out = Poly::zero(out_vars);
        for (m, c) in &self.terms {
            let mut acc = Poly::term(
                Monomial { state: vec![0; out_vars], params: m.params.clone() },
                c.clone(),
            );
            for (i, &e) in m.state.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap().mul_truncated(&inner[i], cap);
                    powers[i].push(next);
                }
                acc = acc.mul_truncated(&powers[i][e as usize], cap);
                if acc.is_zero() {
                    break;
                }
            }
            for (mm, cc) in acc.terms {
                out.add_term(mm, &cc);
            }
        }
        out
    }

    /// Substitutes exact values for parameter symbols; symbols missing from
    /// `values` are kept.
    pub fn substitute_params(&self, values: &BTreeMap<Symbol, GaussianRational>) -> Poly {
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            let mut params = BTreeMap::new();
            for (s, e) in &m.params {
                match values.get(s) {
                    Some(v) => {
                        for _ in 0..*e {
                            coef = &coef * v;
                        }
                    }
                    None => {
                        params.insert(s.clone(), *e);
                    }
                }
            }
            out.add_term(Monomial { state: m.state.clone(), params }, &coef);
        }
        out
    }

    /// Exact evaluation of the state variables at rational/complex-rational
    /// points, leaving a polynomial in the parameter symbols only (zero state
    /// variables).
    pub fn eval_state_exact(&self, x: &[GaussianRational]) -> Poly {
        assert_eq!(x.len(), self.nvars);
        let mut out = Poly::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut coef = c.clone();
            for (xi, &e) in x.iter().zip(&m.state) {
                for _ in 0..e {
                    coef = &coef * xi;
                }
            }
            out.add_term(m.param_part(), &coef);
        }
        out
    }

    /// Floating evaluation with given parameter values.
    pub fn eval_complex(&self, params: &BTreeMap<Symbol, f64>, x: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = c.to_complex64();
            for (s, e) in &m.params {
                v *= params.get(s).copied().unwrap_or(f64::NAN).powi(*e as i32);
            }
            for (xi, &e) in x.iter().zip(&m.state) {
                if e > 0 {
                    v *= xi.powu(e);
                }
            }
            acc += v;
        }
        acc
    }

    /// Re-embeds into a larger variable space, sending variable `i` to
    /// `positions[i]`.
    pub fn reindex(&self, new_nvars: usize, positions: &[usize]) -> Poly {
        let mut out = Poly::zero(new_nvars);
        for (m, c) in &self.terms {
            let mut state = vec![0; new_nvars];
            for (i, &e) in m.state.iter().enumerate() {
                state[positions[i]] += e;
            }
            out.add_term(Monomial { state, params: m.params.clone() }, c);
        }
        out
    }
}

/// Result of [`Poly::homogeneity_degree`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Homogeneity {
    Zero,
    Degree(u32),
    NotHomogeneous,
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}")?;
            for (s, e) in &m.params {
                write!(f, "*{s}")?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
            for (i, e) in m.state.iter().enumerate() {
                if *e > 0 {
                    write!(f, "*x{}", i + 1)?;
                    if *e > 1 {
                        write!(f, "^{e}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(n: usize, i: usize) -> Poly {
        Poly::var(n, i)
    }

    #[test]
    fn cube_of_sum_is_homogeneous() {
        let p = x(2, 0).add(&x(2, 1)).pow(3);
        assert_eq!(p.num_terms(), 4);
        assert_eq!(p.homogeneity_degree(), Homogeneity::Degree(3));
    }

    #[test]
    fn mixed_degrees_not_homogeneous() {
        let p = x(1, 0).pow(2).add(&x(1, 0).pow(3));
        assert_eq!(p.homogeneity_degree(), Homogeneity::NotHomogeneous);
        assert_eq!(Poly::zero(1).homogeneity_degree(), Homogeneity::Zero);
    }

    #[test]
    fn cancellation_leaves_no_zero_terms() {
        let p = x(2, 0).add(&x(2, 1));
        let q = p.sub(&x(2, 1)).sub(&x(2, 0));
        assert!(q.is_zero());
        assert_eq!(q, Poly::zero(2));
    }

    #[test]
    fn derivative_of_cube() {
        let s = Symbol::new("s");
        let p = Poly::param(2, &s).mul(&x(2, 0).add(&x(2, 1)).pow(3));
        let d = p.derivative(0);
        let expected = Poly::param(2, &s)
            .mul(&x(2, 0).add(&x(2, 1)).pow(2))
            .scale(&GaussianRational::from_integer(3));
        assert_eq!(d, expected);
    }

    #[test]
    fn truncated_product_matches_truncation() {
        let p = x(2, 0).add(&x(2, 1)).add(&Poly::one(2));
        let full = p.pow(4).mul(&p.pow(3));
        let trunc = p.pow(4).mul_truncated(&p.pow(3), Some(4));
        assert_eq!(full.truncate(4), trunc);
    }
}
