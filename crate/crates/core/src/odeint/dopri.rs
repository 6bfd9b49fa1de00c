//! Dormand-Prince 5(4) with FSAL, PI-free step control and the standard
//! fourth-order continuous extension.

use super::field::VectorField;
use super::{IntegratorConfig, SolveOutcome, SolverStats, Trajectory};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Stepper<'a, F: VectorField + ?Sized> {
    f: &'a F,
    n: usize,
    /// A time strictly inside the current smooth piece.
    piece: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    ynew: Vec<f64>,
    err: Vec<f64>,
    evals: usize,
    /// Scale `atol` by the max-norm of the state at the start of each step.
    norm_relative: bool,
}

impl<'a, F: VectorField + ?Sized> Stepper<'a, F> {
    fn new(f: &'a F) -> Self {
        let n = f.dimension();
        let z = || vec![0.0; n];
        Self { f, n, piece: 0.0, k: [z(), z(), z(), z(), z(), z(), z()], tmp: z(), ynew: z(), err: z(), evals: 0, norm_relative: false }
    }

    fn rhs(&mut self, t: f64, x_from_tmp: bool, out: usize) {
        let (k, tmp) = (&mut self.k, &self.tmp);
        let x: &[f64] = if x_from_tmp { tmp } else { &self.ynew };
        self.f.eval_on_piece(t, self.piece, x, &mut k[out]);
        self.evals += 1;
    }

    fn init_k1(&mut self, t: f64, y: &[f64]) {
        self.f.eval_on_piece(t, self.piece, y, &mut self.k[0]);
        self.evals += 1;
    }

    /// One trial step; fills `ynew`, `k[6]` and returns the scaled error norm.
    fn trial(&mut self, t: f64, y: &[f64], h: f64, cfg: &IntegratorConfig) -> f64 {
        let n = self.n;
        macro_rules! stage {
            ($out:expr, $c:expr, $( ($ki:expr, $a:expr) ),+ ) => {{
                for i in 0..n {
                    self.tmp[i] = y[i] + h * (0.0 $( + $a * self.k[$ki][i] )+);
                }
                self.rhs(t + $c * h, true, $out);
            }};
        }
        stage!(1, C2, (0, A21));
        stage!(2, C3, (0, A31), (1, A32));
        stage!(3, C4, (0, A41), (1, A42), (2, A43));
        stage!(4, C5, (0, A51), (1, A52), (2, A53), (3, A54));
        stage!(5, 1.0, (0, A61), (1, A62), (2, A63), (3, A64), (4, A65));
        for i in 0..n {
            self.ynew[i] = y[i]
                + h * (A71 * self.k[0][i] + A73 * self.k[2][i] + A74 * self.k[3][i] + A75 * self.k[4][i] + A76 * self.k[5][i]);
        }
        self.rhs(t + h, false, 6);
        let atol = if self.norm_relative {
            cfg.atol * y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE)
        } else {
            cfg.atol
        };
        let mut acc = 0.0;
        for i in 0..n {
            let k = &self.k;
            self.err[i] =
                h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = atol + cfg.rtol * y[i].abs().max(self.ynew[i].abs());
            acc += (self.err[i] / sc).powi(2);
        }
        (acc / n.max(1) as f64).sqrt()
    }

    /// Continuous extension on the accepted step `[t, t + h]`.
    fn dense(&self, y: &[f64], h: f64, theta: f64, out: &mut [f64]) {
        let th1 = 1.0 - theta;
        let k = &self.k;
        for i in 0..self.n {
            let r2 = self.ynew[i] - y[i];
            let r3 = h * k[0][i] - r2;
            let r4 = r2 - h * k[6][i] - r3;
            let r5 = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            out[i] = y[i] + theta * (r2 + th1 * (r3 + theta * (r4 + th1 * r5)));
        }
    }

    fn initial_step(&mut self, t: f64, y: &[f64], span: f64, cfg: &IntegratorConfig) -> f64 {
        let n = self.n.max(1) as f64;
        let atol = if self.norm_relative {
            cfg.atol * y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE)
        } else {
            cfg.atol
        };
        let sc: Vec<f64> = y.iter().map(|v| atol + cfg.rtol * v.abs()).collect();
        let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
        let d1 = (self.k[0].iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span).min(cfg.max_step);
        for i in 0..self.n {
            self.tmp[i] = y[i] + h0 * self.k[0][i];
        }
        let mut f1 = vec![0.0; self.n];
        self.f.eval_on_piece(t + h0, self.piece, &self.tmp, &mut f1);
        self.evals += 1;
        let d2 = (f1.iter().zip(&self.k[0]).zip(&sc).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n)
            .sqrt()
            / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(span).min(cfg.max_step)
    }
}

pub(super) fn integrate_impl<F: VectorField + ?Sized>(
    field: &F,
    t0: f64,
    x0: &[f64],
    tf: f64,
    cfg: &IntegratorConfig,
    norm_relative: bool,
) -> SolveOutcome {
    let mut traj = Trajectory {
        t0,
        x0: x0.to_vec(),
        samples: vec![(t0, x0.to_vec())],
        stats: SolverStats::default(),
    };
    if !(tf > t0) || t0 < 0.0 || x0.len() != field.dimension() {
        return SolveOutcome::StepFailure {
            t: t0,
            diagnostics: format!(
                "invalid problem: need tf > t0 >= 0 and x0 of length {} (t0={t0}, tf={tf}, len={})",
                field.dimension(),
                x0.len()
            ),
            partial: traj,
        };
    }
    if let Err(e) = cfg.validate() {
        return SolveOutcome::StepFailure { t: t0, diagnostics: e, partial: traj };
    }
    if tf - t0 > cfg.max_horizon {
        return SolveOutcome::StepFailure {
            t: t0,
            diagnostics: format!("integration window {} exceeds horizon cap {}", tf - t0, cfg.max_horizon),
            partial: traj,
        };
    }

    let mut outputs: Vec<f64> = cfg.sample_times.iter().copied().filter(|s| *s > t0 && *s <= tf).collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    let dense_mode = !cfg.sample_times.is_empty();
    let mut next_out = 0usize;

    let mut cuts: Vec<f64> = field.breakpoints().into_iter().filter(|b| *b > t0 && *b < tf).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(tf);

    let mut st = Stepper::new(field);
    st.norm_relative = norm_relative;
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut h: f64 = 0.0;
    let mut buf = vec![0.0; field.dimension()];
    let blowup_soft = cfg.blowup_threshold.sqrt();

    for &seg_end in &cuts {
        st.piece = 0.5 * (t + seg_end);
        st.init_k1(t, &y);
        let span = seg_end - t;
        h = if h > 0.0 { h.min(span) } else { st.initial_step(t, &y, span, cfg) };
        let mut last_rejected = false;
        while t < seg_end {
            let remaining = seg_end - t;
            let mut final_step = false;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
                final_step = true;
            }
            let min_h = 1e-14 * t.abs().max(1.0);
            if h < min_h || !h.is_finite() {
                let nrm = norm2(&y);
                traj.stats.evaluations = st.evals;
                if nrm >= blowup_soft || !nrm.is_finite() {
                    return SolveOutcome::Blowup { t_star: t, last_norm: nrm, partial: traj };
                }
                return SolveOutcome::StepFailure {
                    t,
                    diagnostics: format!("step size underflow (h={h:e}) at |x|={nrm:e}"),
                    partial: traj,
                };
            }
            let err = st.trial(t, &y, h, cfg);
            if !err.is_finite() {
                traj.stats.rejections += 1;
                h *= 0.2;
                last_rejected = true;
                continue;
            }
            if err <= 1.0 {
                traj.stats.steps += 1;
                let t_new = if final_step { seg_end } else { t + h };
                while next_out < outputs.len() && outputs[next_out] <= t_new {
                    let ts = outputs[next_out];
                    if ts == t_new {
                        traj.samples.push((ts, st.ynew.clone()));
                    } else {
                        st.dense(&y, h, (ts - t) / h, &mut buf);
                        traj.samples.push((ts, buf.clone()));
                    }
                    next_out += 1;
                }
                if !dense_mode {
                    traj.samples.push((t_new, st.ynew.clone()));
                }
                let nrm = norm2(&st.ynew);
                std::mem::swap(&mut y, &mut st.ynew);
                t = t_new;
                if nrm > cfg.blowup_threshold || !nrm.is_finite() {
                    traj.stats.evaluations = st.evals;
                    return SolveOutcome::Blowup { t_star: t, last_norm: nrm, partial: traj };
                }
                st.k.swap(0, 6);
                let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
                fac = fac.clamp(0.2, 10.0);
                if last_rejected {
                    fac = fac.min(1.0);
                }
                h = (h * fac).min(cfg.max_step);
                last_rejected = false;
            } else {
                traj.stats.rejections += 1;
                let fac = (0.9 * err.powf(-0.2)).max(0.2);
                h *= fac;
                last_rejected = true;
            }
        }
        t = seg_end;
    }
    if traj.samples.last().map(|s| s.0) != Some(tf) {
        traj.samples.push((tf, y));
    }
    traj.stats.evaluations = st.evals;
    SolveOutcome::Completed(traj)
}
