use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::One;

use super::gaussian::GaussianRational;
use super::poly::{Homogeneity, Monomial, Poly, Symbol};
use super::PolyError;

/// How a parameter symbol is evaluated as a function of time.
#[derive(Clone)]
pub enum BindingKind {
    /// `s(t) = e^{-rate * t}`.
    ExpDecay { rate: f64 },
    Constant { value: f64 },
    /// Any bounded function with a declared supremum on `t >= 0`.
    BoundedGeneric {
        name: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        declared_sup: f64,
    },
}

impl fmt::Debug for BindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BindingKind::ExpDecay { rate } => write!(f, "ExpDecay({rate})"),
            BindingKind::Constant { value } => write!(f, "Constant({value})"),
            BindingKind::BoundedGeneric { name, declared_sup, .. } => {
                write!(f, "BoundedGeneric({name}, sup={declared_sup})")
            }
        }
    }
}

impl PartialEq for BindingKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (BindingKind::ExpDecay { rate: a }, BindingKind::ExpDecay { rate: b }) => a == b,
            (BindingKind::Constant { value: a }, BindingKind::Constant { value: b }) => a == b,
            (
                BindingKind::BoundedGeneric { name: a, declared_sup: sa, .. },
                BindingKind::BoundedGeneric { name: b, declared_sup: sb, .. },
            ) => a == b && sa == sb,
            _ => false,
        }
    }
}

/// Binding of one parameter symbol to a time evaluator.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBinding {
    pub symbol: Symbol,
    pub kind: BindingKind,
}

impl ParamBinding {
    pub fn exp_decay(symbol: Symbol, rate: f64) -> Self {
        Self { symbol, kind: BindingKind::ExpDecay { rate } }
    }

    pub fn constant(symbol: Symbol, value: f64) -> Self {
        Self { symbol, kind: BindingKind::Constant { value } }
    }

    pub fn bounded(
        symbol: Symbol,
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        declared_sup: f64,
    ) -> Result<Self, PolyError> {
        if !declared_sup.is_finite() {
            return Err(PolyError::InvalidBinding(format!("{symbol}: declared sup must be finite")));
        }
        Ok(Self {
            symbol,
            kind: BindingKind::BoundedGeneric { name: name.into(), eval: Arc::new(eval), declared_sup },
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.kind {
            BindingKind::ExpDecay { rate } => (-rate * t).exp(),
            BindingKind::Constant { value } => *value,
            BindingKind::BoundedGeneric { eval, .. } => eval(t),
        }
    }

    /// Supremum of `|s(t)|` on `t >= 0`, when finite.
    pub fn declared_sup(&self) -> Option<f64> {
        match &self.kind {
            BindingKind::ExpDecay { rate } if *rate >= 0.0 => Some(1.0),
            BindingKind::ExpDecay { .. } => None,
            BindingKind::Constant { value } => Some(value.abs()),
            BindingKind::BoundedGeneric { declared_sup, .. } => Some(*declared_sup),
        }
    }
}

/// Polynomial map `R+ x K^n -> K^n` with exact coefficients and symbolic time
/// dependence.
#[derive(Clone, Debug)]
pub struct ParamPolyMap {
    coords: Vec<Poly>,
    bindings: BTreeMap<Symbol, ParamBinding>,
    linear_coefficient: Option<BigRational>,
}

impl PartialEq for ParamPolyMap {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}

impl ParamPolyMap {
    /// Validates that every parameter symbol has exactly one binding.
    pub fn new(coords: Vec<Poly>, bindings: Vec<ParamBinding>) -> Result<Self, PolyError> {
        let n = coords.len();
        if let Some(p) = coords.iter().find(|p| p.nvars() != n) {
            return Err(PolyError::DimensionMismatch { expected: n, found: p.nvars() });
        }
        let mut map = BTreeMap::new();
        for b in bindings {
            if let Some(prev) = map.get(&b.symbol) {
                if prev != &b {
                    return Err(PolyError::ConflictingBinding(b.symbol.to_string()));
                }
            }
            map.insert(b.symbol.clone(), b);
        }
        for p in &coords {
            for s in p.symbols() {
                if !map.contains_key(&s) {
                    return Err(PolyError::UnboundSymbol(s.to_string()));
                }
            }
        }
        Ok(Self { coords, bindings: map, linear_coefficient: None })
    }

    /// Map of the form `lambda * X + H`; `H` must have no state terms of
    /// degree 0 or 1.
    pub fn with_linear_part(
        lambda: BigRational,
        h: Vec<Poly>,
        bindings: Vec<ParamBinding>,
    ) -> Result<Self, PolyError> {
        let n = h.len();
        for p in &h {
            if p.terms().any(|(m, _)| m.state_degree() <= 1) {
                return Err(PolyError::NotLambdaPlusH(
                    "nonlinear part contains terms of state degree 0 or 1".into(),
                ));
            }
        }
        let coords = h
            .iter()
            .enumerate()
            .map(|(i, p)| Poly::var(n, i).scale_rational(&lambda).add(p))
            .collect();
        let mut map = Self::new(coords, bindings)?;
        map.linear_coefficient = Some(lambda);
        Ok(map)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::new((0..n).map(|i| Poly::var(n, i)).collect(), vec![]).unwrap();
        m.linear_coefficient = Some(BigRational::one());
        m
    }

    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[Poly] {
        &self.coords
    }

    pub fn bindings(&self) -> impl Iterator<Item = &ParamBinding> {
        self.bindings.values()
    }

    pub fn binding(&self, s: &Symbol) -> Option<&ParamBinding> {
        self.bindings.get(s)
    }

    pub fn linear_coefficient(&self) -> Option<&BigRational> {
        self.linear_coefficient.as_ref()
    }

    /// Tries to read the map as `lambda * X + H`, recording `lambda` on success.
    pub fn detect_linear_part(mut self) -> Self {
        self.linear_coefficient = self.infer_lambda();
        self
    }

    fn infer_lambda(&self) -> Option<BigRational> {
        let n = self.dimension();
        let mut lambda: Option<BigRational> = None;
        for (i, p) in self.coords.iter().enumerate() {
            for (m, c) in p.terms() {
                match m.state_degree() {
                    0 => return None,
                    1 => {
                        if m.state_exponents()[i] != 1 || !m.param_exponents().is_empty() || !c.is_real() {
                            return None;
                        }
                        match &lambda {
                            None => lambda = Some(c.re().clone()),
                            Some(l) if l == c.re() => {}
                            Some(_) => return None,
                        }
                    }
                    _ => {}
                }
            }
        }
        let lambda = lambda?;
        // every coordinate must actually carry the diagonal term
        let ok = (0..n).all(|i| {
            self.coords[i].coefficient(&Monomial::var(n, i)) == GaussianRational::real(lambda.clone())
        });
        ok.then_some(lambda)
    }

    /// Nonlinear part `H = M - lambda X`.
    pub fn nonlinear_part(&self) -> Result<Vec<Poly>, PolyError> {
        let lambda = self
            .linear_coefficient
            .as_ref()
            .ok_or_else(|| PolyError::NotLambdaPlusH("map has no linear coefficient".into()))?;
        let n = self.dimension();
        Ok(self
            .coords
            .iter()
            .enumerate()
            .map(|(i, p)| p.sub(&Poly::var(n, i).scale_rational(lambda)))
            .collect())
    }

    /// `H` packaged as a map with the same bindings.
    pub fn nonlinear_map(&self) -> Result<ParamPolyMap, PolyError> {
        let h = self.nonlinear_part()?;
        Ok(ParamPolyMap { coords: h, bindings: self.bindings.clone(), linear_coefficient: None })
    }

    fn merged_bindings(&self, other: &ParamPolyMap) -> Result<BTreeMap<Symbol, ParamBinding>, PolyError> {
        let mut out = self.bindings.clone();
        for (s, b) in &other.bindings {
            match out.get(s) {
                Some(prev) if prev != b => return Err(PolyError::ConflictingBinding(s.to_string())),
                _ => {
                    out.insert(s.clone(), b.clone());
                }
            }
        }
        Ok(out)
    }

    /// Exact composition `outer(inner(x))`.
    pub fn compose(outer: &ParamPolyMap, inner: &ParamPolyMap) -> Result<ParamPolyMap, PolyError> {
        Self::compose_truncated(outer, inner, None)
    }

    pub(crate) fn compose_truncated(
        outer: &ParamPolyMap,
        inner: &ParamPolyMap,
        cap: Option<u32>,
    ) -> Result<ParamPolyMap, PolyError> {
        if outer.dimension() != inner.dimension() {
            return Err(PolyError::DimensionMismatch { expected: outer.dimension(), found: inner.dimension() });
        }
        let bindings = outer.merged_bindings(inner)?;
        let coords = outer.coords.iter().map(|p| p.substitute(&inner.coords, cap)).collect();
        Ok(ParamPolyMap { coords, bindings, linear_coefficient: None }.detect_linear_part())
    }

    pub fn is_identity(&self) -> bool {
        let n = self.dimension();
        self.coords.iter().enumerate().all(|(i, p)| *p == Poly::var(n, i))
    }

    /// Jacobian with respect to the state variables.
    pub fn jacobian(&self) -> PolyMatrix {
        let n = self.dimension();
        PolyMatrix {
            n,
            entries: self.coords.iter().map(|p| (0..n).map(|j| p.derivative(j)).collect()).collect(),
        }
    }

    pub fn homogeneity(&self) -> Vec<Homogeneity> {
        self.coords.iter().map(Poly::homogeneity_degree).collect()
    }

    /// Real `2n`-dimensional map `(Re M_1, Im M_1, ..., Re M_n, Im M_n)` in the
    /// interleaved variables `(u_1, v_1, ..., u_n, v_n)` with `x_k = u_k + i v_k`.
    pub fn realify(&self) -> ParamPolyMap {
        let n = self.dimension();
        let m = 2 * n;
        let i = GaussianRational::i();
        let subs: Vec<Poly> = (0..n)
            .map(|k| Poly::var(m, 2 * k).add(&Poly::var(m, 2 * k + 1).scale(&i)))
            .collect();
        let mut coords = Vec::with_capacity(m);
        for p in &self.coords {
            let q = p.substitute(&subs, None);
            let re = Poly::from_terms(m, q.terms().map(|(mm, c)| (mm.clone(), GaussianRational::real(c.re().clone()))));
            let im = Poly::from_terms(m, q.terms().map(|(mm, c)| (mm.clone(), GaussianRational::real(c.im().clone()))));
            coords.push(re);
            coords.push(im);
        }
        ParamPolyMap { coords, bindings: self.bindings.clone(), linear_coefficient: None }.detect_linear_part()
    }

    /// `G(t, z) = F(t, z + x) - F(t, x)`, together with the candidate constant
    /// solution `z0 = y - x`.
    pub fn shift_conjugate(&self, x: &[BigRational], y: &[BigRational]) -> Result<ShiftConjugate, PolyError> {
        let n = self.dimension();
        if x.len() != n || y.len() != n {
            return Err(PolyError::DimensionMismatch { expected: n, found: x.len().min(y.len()) });
        }
        let shifted: Vec<Poly> = (0..n)
            .map(|i| Poly::var(n, i).add(&Poly::constant(n, GaussianRational::real(x[i].clone()))))
            .collect();
        let xg: Vec<GaussianRational> = x.iter().cloned().map(GaussianRational::real).collect();
        let coords = self
            .coords
            .iter()
            .map(|p| {
                let at_x = p.eval_state_exact(&xg);
                p.substitute(&shifted, None).sub(&at_x)
            })
            .collect();
        let map = ParamPolyMap { coords, bindings: self.bindings.clone(), linear_coefficient: None }
            .detect_linear_part();
        let z0 = y.iter().zip(x).map(|(a, b)| a - b).collect();
        Ok(ShiftConjugate { map, z0 })
    }

    /// Parameter values at time `t`.
    pub fn param_values(&self, t: f64) -> BTreeMap<Symbol, f64> {
        self.bindings.iter().map(|(s, b)| (s.clone(), b.eval(t))).collect()
    }

    /// Floating evaluation at a complex point.
    pub fn evaluate_complex(&self, t: f64, x: &[Complex64]) -> Result<Vec<Complex64>, PolyError> {
        if x.len() != self.dimension() {
            return Err(PolyError::DimensionMismatch { expected: self.dimension(), found: x.len() });
        }
        Ok(self.compiled().eval_complex(t, x))
    }

    /// Floating evaluation at a real point; imaginary parts of complex
    /// coefficients are discarded, so use [`Self::realify`] first for complex maps.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        if x.len() != self.dimension() {
            return Err(PolyError::DimensionMismatch { expected: self.dimension(), found: x.len() });
        }
        let mut out = vec![0.0; x.len()];
        self.compiled().eval_real(t, x, &mut out);
        Ok(out)
    }

    /// Float-coefficient form for fast repeated evaluation.
    pub fn compiled(&self) -> CompiledMap {
        CompiledMap::new(self)
    }

    /// Exact image of a rational point, as polynomials in the parameter symbols.
    pub fn eval_exact(&self, x: &[GaussianRational]) -> Vec<Poly> {
        self.coords.iter().map(|p| p.eval_state_exact(x)).collect()
    }

    /// Replaces the bindings' symbols by exact values where the binding is a
    /// constant, leaving other symbols symbolic.
    pub fn with_params_substituted(&self, values: &BTreeMap<Symbol, GaussianRational>) -> ParamPolyMap {
        let coords = self.coords.iter().map(|p| p.substitute_params(values)).collect();
        let bindings = self.bindings.iter().filter(|(s, _)| !values.contains_key(*s)).map(|(s, b)| (s.clone(), b.clone())).collect();
        ParamPolyMap { coords, bindings, linear_coefficient: None }.detect_linear_part()
    }

    pub fn scale(&self, c: &GaussianRational) -> ParamPolyMap {
        ParamPolyMap {
            coords: self.coords.iter().map(|p| p.scale(c)).collect(),
            bindings: self.bindings.clone(),
            linear_coefficient: None,
        }
        .detect_linear_part()
    }

    pub fn add(&self, other: &ParamPolyMap) -> Result<ParamPolyMap, PolyError> {
        if self.dimension() != other.dimension() {
            return Err(PolyError::DimensionMismatch { expected: self.dimension(), found: other.dimension() });
        }
        let bindings = self.merged_bindings(other)?;
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a.add(b)).collect();
        Ok(ParamPolyMap { coords, bindings, linear_coefficient: None }.detect_linear_part())
    }
}

impl fmt::Display for ParamPolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// Output of [`ParamPolyMap::shift_conjugate`].
#[derive(Clone, Debug)]
pub struct ShiftConjugate {
    pub map: ParamPolyMap,
    pub z0: Vec<BigRational>,
}

/// Square matrix of polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    n: usize,
    entries: Vec<Vec<Poly>>,
}

/// Result of [`PolyMatrix::is_nilpotent`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Nilpotency {
    pub nilpotent: bool,
    /// Smallest `k` with `m^k = 0`, when nilpotent.
    pub index: Option<usize>,
}

impl PolyMatrix {
    pub fn new(entries: Vec<Vec<Poly>>) -> Result<Self, PolyError> {
        let n = entries.len();
        if entries.iter().any(|r| r.len() != n) {
            return Err(PolyError::NotSquare);
        }
        let nv = entries.first().and_then(|r| r.first()).map(Poly::nvars);
        if let Some(nv) = nv {
            if entries.iter().flatten().any(|p| p.nvars() != nv) {
                return Err(PolyError::DimensionMismatch { expected: nv, found: 0 });
            }
        }
        Ok(Self { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly {
        &self.entries[i][j]
    }

    pub fn nvars(&self) -> usize {
        self.entries.first().and_then(|r| r.first()).map(Poly::nvars).unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().flatten().all(Poly::is_zero)
    }

    pub fn mul(&self, other: &PolyMatrix) -> PolyMatrix {
        let n = self.n;
        let nv = self.nvars();
        let mut entries = vec![vec![Poly::zero(nv); n]; n];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc = Poly::zero(nv);
                for k in 0..n {
                    let a = &self.entries[i][k];
                    let b = &other.entries[k][j];
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b));
                }
                *cell = acc;
            }
        }
        PolyMatrix { n, entries }
    }

    pub fn scale(&self, c: &GaussianRational) -> PolyMatrix {
        PolyMatrix { n: self.n, entries: self.entries.iter().map(|r| r.iter().map(|p| p.scale(c)).collect()).collect() }
    }

    pub fn add(&self, other: &PolyMatrix) -> PolyMatrix {
        PolyMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p.add(q)).collect())
                .collect(),
        }
    }

    /// Exact powers `m^1 .. m^n`; nilpotent iff one of them vanishes.
    pub fn is_nilpotent(&self) -> Nilpotency {
        let mut power = self.clone();
        for k in 1..=self.n.max(1) {
            if power.is_zero() {
                return Nilpotency { nilpotent: true, index: Some(k) };
            }
            if k < self.n {
                power = power.mul(self);
            }
        }
        Nilpotency { nilpotent: false, index: None }
    }

    pub fn pow(&self, k: usize) -> PolyMatrix {
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Floating evaluation with parameter values fixed.
    pub fn evaluate(&self, params: &BTreeMap<Symbol, f64>, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let xc: Vec<Complex64> = x.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.entries[i][j].eval_complex(params, &xc).re)
    }
}

impl fmt::Display for PolyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.entries {
            let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    coef: Complex64,
    /// Rounding error of `coef.re`, for double-double accumulation.
    coef_lo: f64,
    params: Vec<(usize, i32)>,
    state: Vec<(usize, u32)>,
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn quick(s: f64, e: f64) -> Dd {
        let hi = s + e;
        Dd { hi, lo: e - (hi - s) }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let p = self.hi * b;
        let e = self.hi.mul_add(b, -p) + self.lo * b;
        Dd::quick(p, e)
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let e = (self.hi - (s - bb)) + (o.hi - bb) + self.lo + o.lo;
        Dd::quick(s, e)
    }
}

/// Float-coefficient snapshot of a [`ParamPolyMap`] for hot loops (ODE
/// right-hand sides, Jacobian sampling).
#[derive(Clone, Debug)]
pub struct CompiledMap {
    n: usize,
    bindings: Vec<ParamBinding>,
    coords: Vec<Vec<CompiledTerm>>,
    jac: Vec<Vec<Vec<CompiledTerm>>>,
}

impl CompiledMap {
    fn compile_poly(p: &Poly, index: &BTreeMap<Symbol, usize>) -> Vec<CompiledTerm> {
        p.terms()
            .map(|(m, c)| CompiledTerm {
                coef: c.to_complex64(),
                coef_lo: {
                    let hi = c.to_complex64().re;
                    BigRational::from_float(hi).map_or(0.0, |h| super::gaussian::rat_to_f64(&(c.re() - h)))
                },
                params: m.param_exponents().iter().map(|(s, e)| (index[s], *e as i32)).collect(),
                state: m
                    .state_exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| **e > 0)
                    .map(|(i, e)| (i, *e))
                    .collect(),
            })
            .collect()
    }

    fn new(map: &ParamPolyMap) -> Self {
        let bindings: Vec<ParamBinding> = map.bindings.values().cloned().collect();
        let index: BTreeMap<Symbol, usize> =
            bindings.iter().enumerate().map(|(i, b)| (b.symbol.clone(), i)).collect();
        let coords = map.coords.iter().map(|p| Self::compile_poly(p, &index)).collect();
        let jm = map.jacobian();
        let jac = (0..jm.size())
            .map(|i| (0..jm.size()).map(|j| Self::compile_poly(jm.entry(i, j), &index)).collect())
            .collect();
        Self { n: map.dimension(), bindings, coords, jac }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    fn params_at(&self, t: f64) -> Vec<f64> {
        self.bindings.iter().map(|b| b.eval(t)).collect()
    }

    /// Sum of real terms in double-double arithmetic, so that expanded forms
    /// such as `(x + z)^3` with `x ~ -z` large keep their relative accuracy.
    fn eval_terms_real(terms: &[CompiledTerm], pv: &[f64], x: &[f64]) -> f64 {
        let mut acc = Dd::ZERO;
        for term in terms {
            let mut v = Dd { hi: term.coef.re, lo: term.coef_lo };
            for &(k, e) in &term.params {
                v = v.mul_f64(pv[k].powi(e));
            }
            for &(i, e) in &term.state {
                for _ in 0..e {
                    v = v.mul_f64(x[i]);
                }
            }
            acc = acc.add(v);
        }
        acc.hi + acc.lo
    }

    pub fn eval_real(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let pv = self.params_at(t);
        for (o, terms) in out.iter_mut().zip(&self.coords) {
            *o = Self::eval_terms_real(terms, &pv, x);
        }
    }

    pub fn eval_complex(&self, t: f64, x: &[Complex64]) -> Vec<Complex64> {
        let pv = self.params_at(t);
        self.coords
            .iter()
            .map(|terms| {
                let mut acc = Complex64::new(0.0, 0.0);
                for term in terms {
                    let mut v = term.coef;
                    for &(k, e) in &term.params {
                        v *= pv[k].powi(e);
                    }
                    for &(i, e) in &term.state {
                        v *= x[i].powu(e);
                    }
                    acc += v;
                }
                acc
            })
            .collect()
    }

    /// Jacobian at `(t, x)`.
    pub fn jacobian_at(&self, t: f64, x: &[f64]) -> nalgebra::DMatrix<f64> {
        let pv = self.params_at(t);
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| Self::eval_terms_real(&self.jac[i][j], &pv, x))
    }
}
