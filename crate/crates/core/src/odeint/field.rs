use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::polyalg::{CompiledMap, ParamPolyMap};

/// Where a vector field came from.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    PolyMap,
    ClosedForm(String),
    Linear(String),
}

/// Right-hand side of `x' = f(t, x)` on `t >= 0`.
///
/// `eval_on_piece` receives a time strictly inside the current smooth piece so
/// that fields built on piecewise signals pick the correct branch at
/// breakpoints; smooth fields ignore it.
pub trait VectorField: Send + Sync {
    fn dimension(&self) -> usize;

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn eval_on_piece(&self, t: f64, _piece: f64, x: &[f64], out: &mut [f64]) {
        self.eval(t, x, out)
    }

    /// Times where the field may be discontinuous; the integrator restarts there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }

    fn source(&self) -> FieldSource;
}

/// Field given by a parametrized polynomial map.
#[derive(Clone, Debug)]
pub struct PolyField {
    map: ParamPolyMap,
    compiled: CompiledMap,
}

impl PolyField {
    pub fn new(map: ParamPolyMap) -> Self {
        let compiled = map.compiled();
        Self { map, compiled }
    }

    pub fn map(&self) -> &ParamPolyMap {
        &self.map
    }

    pub fn compiled(&self) -> &CompiledMap {
        &self.compiled
    }
}

impl VectorField for PolyField {
    fn dimension(&self) -> usize {
        self.compiled.dimension()
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.compiled.eval_real(t, x, out)
    }

    fn source(&self) -> FieldSource {
        FieldSource::PolyMap
    }
}

type RhsFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// Field given by a closure (named built-ins such as Bernoulli equations).
#[derive(Clone)]
pub struct FnField {
    name: String,
    dim: usize,
    f: Arc<RhsFn>,
}

impl FnField {
    pub fn new(name: impl Into<String>, dim: usize, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { name: name.into(), dim, f: Arc::new(f) }
    }

    /// Scalar `v' = lambda v + c v^3`.
    pub fn bernoulli(lambda: f64, c: f64) -> Self {
        Self::new("bernoulli", 1, move |_, x, out| out[0] = lambda * x[0] + c * x[0].powi(3))
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnField({}, n={})", self.name, self.dim)
    }
}

impl VectorField for FnField {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(t, x, out)
    }

    fn source(&self) -> FieldSource {
        FieldSource::ClosedForm(self.name.clone())
    }
}

type MatrixFn = dyn Fn(f64, f64) -> DMatrix<f64> + Send + Sync;

/// Linear field `x' = A(t) x`.
#[derive(Clone)]
pub struct LinearField {
    name: String,
    n: usize,
    a: Arc<MatrixFn>,
    breakpoints: Vec<f64>,
    blocks: Option<Vec<Vec<usize>>>,
}

impl fmt::Debug for LinearField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearField")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("breakpoints", &self.breakpoints)
            .field("blocks", &self.blocks)
            .finish()
    }
}

impl LinearField {
    pub fn new(name: impl Into<String>, n: usize, a: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self { name: name.into(), n, a: Arc::new(move |t, _| a(t)), breakpoints: Vec::new(), blocks: None }
    }

    /// Matrix function that also receives a time inside the current smooth
    /// piece, for piecewise-defined coefficients.
    pub fn piecewise(
        name: impl Into<String>,
        n: usize,
        breakpoints: Vec<f64>,
        a: impl Fn(f64, f64) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), n, a: Arc::new(a), breakpoints, blocks: None }
    }

    pub fn constant(name: impl Into<String>, a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self::new(name, n, move |_| a.clone())
    }

    /// Constant diagonal system; each coordinate is declared its own block.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag));
        Self::constant(format!("diag{diag:?}"), m).with_blocks((0..n).map(|i| vec![i]).collect())
    }

    /// Scalar `x' = c(t) x`.
    pub fn scalar(name: impl Into<String>, c: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(name, 1, move |t| DMatrix::from_element(1, 1, c(t)))
    }

    /// Declares an invariant block-diagonal splitting (coordinate index sets).
    pub fn with_blocks(mut self, blocks: Vec<Vec<usize>>) -> Self {
        self.blocks = Some(blocks);
        self
    }

    pub fn blocks(&self) -> Option<&[Vec<usize>]> {
        self.blocks.as_deref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self, t: f64) -> DMatrix<f64> {
        (self.a)(t, t)
    }

    pub fn matrix_on_piece(&self, t: f64, piece: f64) -> DMatrix<f64> {
        (self.a)(t, piece)
    }

    /// Adjoint system `y' = -A(t)^T y`, whose transition is `Phi(t, s)^{-T}`.
    pub fn adjoint(&self) -> LinearField {
        let a = self.a.clone();
        LinearField {
            name: format!("adjoint of {}", self.name),
            n: self.n,
            a: Arc::new(move |t, p| -a(t, p).transpose()),
            breakpoints: self.breakpoints.clone(),
            blocks: self.blocks.clone(),
        }
    }

    /// Restriction to a coordinate block (valid when the block is invariant).
    pub fn restrict(&self, block: &[usize]) -> LinearField {
        let a = self.a.clone();
        let idx = block.to_vec();
        let k = idx.len();
        LinearField {
            name: format!("{}|{:?}", self.name, block),
            n: k,
            a: Arc::new(move |t, p| {
                let full = a(t, p);
                DMatrix::from_fn(k, k, |i, j| full[(idx[i], idx[j])])
            }),
            breakpoints: self.breakpoints.clone(),
            blocks: None,
        }
    }
}

impl VectorField for LinearField {
    fn dimension(&self) -> usize {
        self.n
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.eval_on_piece(t, t, x, out)
    }

    fn eval_on_piece(&self, t: f64, piece: f64, x: &[f64], out: &mut [f64]) {
        let a = (self.a)(t, piece);
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..self.n).map(|j| a[(i, j)] * x[j]).sum();
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }

    fn source(&self) -> FieldSource {
        FieldSource::Linear(self.name.clone())
    }
}

/// Matrix ODE `X' = A(t) X` for an `n x cols` matrix, flattened column-major.
pub(crate) struct MatrixField<'a> {
    pub(crate) inner: &'a LinearField,
    pub(crate) cols: usize,
}

impl VectorField for MatrixField<'_> {
    fn dimension(&self) -> usize {
        self.inner.n * self.cols
    }

    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.eval_on_piece(t, t, x, out)
    }

    fn eval_on_piece(&self, t: f64, piece: f64, x: &[f64], out: &mut [f64]) {
        let n = self.inner.n;
        let a = self.inner.matrix_on_piece(t, piece);
        for col in 0..self.cols {
            for i in 0..n {
                out[col * n + i] = (0..n).map(|k| a[(i, k)] * x[col * n + k]).sum();
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.inner.breakpoints()
    }

    fn source(&self) -> FieldSource {
        self.inner.source()
    }
}

type SignalPiece = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Bounded piecewise continuous signal `t -> omega(t)` on `t >= 0`.
#[derive(Clone)]
pub struct PiecewiseSignal {
    name: String,
    dim: usize,
    breakpoints: Vec<f64>,
    pieces: Vec<Arc<SignalPiece>>,
    declared_bound: Option<f64>,
}

impl fmt::Debug for PiecewiseSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PiecewiseSignal")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("breakpoints", &self.breakpoints)
            .field("declared_bound", &self.declared_bound)
            .finish()
    }
}

impl PiecewiseSignal {
    /// `pieces.len()` must be `breakpoints.len() + 1`, breakpoints increasing.
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        breakpoints: Vec<f64>,
        pieces: Vec<Arc<SignalPiece>>,
    ) -> Result<Self, String> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err("need exactly one more piece than breakpoints".into());
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) || breakpoints.iter().any(|b| *b <= 0.0) {
            return Err("breakpoints must be positive and strictly increasing".into());
        }
        Ok(Self { name: name.into(), dim, breakpoints, pieces, declared_bound: None })
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let dim = v.len();
        let name = format!("const{v:?}");
        Self::new(name, dim, vec![], vec![Arc::new(move |_| v.clone())]).unwrap()
    }

    /// Jumps from `before` to `after` at `t_switch`.
    pub fn switch(t_switch: f64, before: Vec<f64>, after: Vec<f64>) -> Self {
        let dim = before.len();
        Self::new(
            format!("switch@{t_switch}"),
            dim,
            vec![t_switch],
            vec![Arc::new(move |_| before.clone()), Arc::new(move |_| after.clone())],
        )
        .unwrap()
    }

    /// `omega_k(t) = amp_k sin(freq t + k)`.
    pub fn sinusoid(amplitudes: Vec<f64>, freq: f64) -> Self {
        let dim = amplitudes.len();
        Self::new(
            format!("sin{amplitudes:?}"),
            dim,
            vec![],
            vec![Arc::new(move |t| {
                amplitudes.iter().enumerate().map(|(k, a)| a * (freq * t + k as f64).sin()).collect()
            })],
        )
        .unwrap()
    }

    pub fn with_declared_bound(mut self, bound: f64) -> Self {
        self.declared_bound = Some(bound);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn declared_bound(&self) -> Option<f64> {
        self.declared_bound
    }

    fn piece_index(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|b| *b <= t)
    }

    /// Value at `t`; at a breakpoint the right-hand piece is used.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        (self.pieces[self.piece_index(t)])(t)
    }

    /// Value at `t` using the piece that contains `piece`.
    pub fn eval_on_piece(&self, t: f64, piece: f64) -> Vec<f64> {
        (self.pieces[self.piece_index(piece)])(t)
    }

    /// Largest Euclidean norm over a uniform grid on `[0, horizon]`, including
    /// both one-sided values at every breakpoint.
    pub fn sampled_sup(&self, horizon: f64, step: f64) -> f64 {
        let norm = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut sup: f64 = 0.0;
        let n = (horizon / step).ceil() as usize;
        for k in 0..=n {
            sup = sup.max(norm(self.eval((k as f64 * step).min(horizon))));
        }
        for (i, b) in self.breakpoints.iter().enumerate() {
            sup = sup.max(norm((self.pieces[i])(*b)));
            sup = sup.max(norm((self.pieces[i + 1])(*b)));
        }
        sup
    }

    /// Checks the declared bound against [`Self::sampled_sup`].
    pub fn check_declared_bound(&self, horizon: f64, step: f64) -> bool {
        match self.declared_bound {
            Some(b) => self.sampled_sup(horizon, step) <= b,
            None => true,
        }
    }
}

/// Linear field `t -> J_map(t, omega(t))` along a bounded signal.
pub fn linearize_along(map: &ParamPolyMap, omega: &PiecewiseSignal) -> Result<LinearField, String> {
    if map.dimension() != omega.dimension() {
        return Err(format!("map has dimension {}, signal {}", map.dimension(), omega.dimension()));
    }
    let compiled = map.compiled();
    let w = omega.clone();
    Ok(LinearField::piecewise(
        format!("J along {}", omega.name()),
        map.dimension(),
        omega.breakpoints().to_vec(),
        move |t, piece| compiled.jacobian_at(t, &w.eval_on_piece(t, piece)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switch_signal_uses_right_piece_at_breakpoint() {
        let s = PiecewiseSignal::switch(2.0, vec![1.0], vec![3.0]);
        assert_eq!(s.eval(1.999), vec![1.0]);
        assert_eq!(s.eval(2.0), vec![3.0]);
        assert_eq!(s.eval_on_piece(2.0, 1.5), vec![1.0]);
        assert_eq!(s.sampled_sup(5.0, 0.1), 3.0);
    }

    #[test]
    fn declared_bound_is_checked() {
        let s = PiecewiseSignal::sinusoid(vec![2.0], 1.0).with_declared_bound(1.5);
        assert!(!s.check_declared_bound(10.0, 0.01));
        let s = PiecewiseSignal::sinusoid(vec![2.0], 1.0).with_declared_bound(2.0);
        assert!(s.check_declared_bound(10.0, 0.01));
    }

    #[test]
    fn bad_breakpoints_rejected() {
        let p: Arc<SignalPiece> = Arc::new(|_| vec![0.0]);
        assert!(PiecewiseSignal::new("x", 1, vec![2.0, 1.0], vec![p.clone(), p.clone(), p]).is_err());
    }
}
