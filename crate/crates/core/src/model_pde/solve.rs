//! Backward-Euler solvers for the trace problem and the `f̃` problem.

use super::coefficients::{ModelCoefficients, TraceValues, TransformedCoefficients};
use super::linalg::{bicgstab, cyclic_tridiagonal, tridiagonal, Csr};
use super::operator::{BoundaryField, TildeField};
use super::ModelError;
use crate::grid::{is_strictly_increasing, lagrange3};
use ndarray::{Array2, Array3, Axis};
use std::sync::Arc;

pub type Source2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type Source3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Smallest `w` window accepted with outflow ends, in hyperbolic units.
pub const MIN_WINDOW: f64 = 8.0;
const TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeStepping {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every `record_every`-th step; the first and last are always kept.
    pub record_every: usize,
}

impl TimeStepping {
    fn steps(&self) -> Result<(usize, f64), ModelError> {
        if !(self.dt > 0.0) || !(self.t_end >= 0.0) || !self.t_end.is_finite() || self.record_every == 0 {
            return Err(ModelError::Config(format!("invalid time stepping {self:?}")));
        }
        let n = (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize;
        Ok((n, if n == 0 { 0.0 } else { self.t_end / n as f64 }))
    }

    fn keeps(&self, step: usize, n: usize) -> bool {
        step.is_multiple_of(self.record_every) || step == n
    }
}

/// End condition in `y` for the trace problem.
#[derive(Clone)]
pub enum BoundarySide {
    /// The axis holds one period, endpoint excluded, uniformly spaced.
    Periodic,
    /// Values at both ends from `g(y, t)`.
    Dirichlet(Source2),
}

pub struct BoundaryProblem {
    pub y: Vec<f64>,
    pub side: BoundarySide,
    pub initial: Vec<f64>,
    pub forcing: Option<Source2>,
}

/// Axis geometry: periodic axes wrap with uniform spacing.
struct Axis1<'a> {
    x: &'a [f64],
    period: Option<f64>,
}

impl<'a> Axis1<'a> {
    fn new(name: &str, x: &'a [f64], periodic: bool) -> Result<Self, ModelError> {
        if x.len() < 3 || !is_strictly_increasing(x) {
            return Err(ModelError::Config(format!("{name} axis needs at least three increasing nodes")));
        }
        if !periodic {
            return Ok(Self { x, period: None });
        }
        let h = x[1] - x[0];
        if x.windows(2).any(|s| ((s[1] - s[0]) - h).abs() > 1e-9 * h) {
            return Err(ModelError::Config(format!("periodic {name} axis must be uniform")));
        }
        Ok(Self { x, period: Some(h * x.len() as f64) })
    }

    /// Neighbour indices and first/second derivative weights at interior
    /// node `k` (every node when periodic).
    fn stencil(&self, k: usize) -> ([usize; 3], [f64; 3], [f64; 3]) {
        let n = self.x.len();
        match self.period {
            Some(period) => {
                let h = period / n as f64;
                let idx = [(k + n - 1) % n, k, (k + 1) % n];
                (idx, [-0.5 / h, 0.0, 0.5 / h], [1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)])
            }
            None => {
                let (d1, d2) = lagrange3([self.x[k - 1], self.x[k], self.x[k + 1]], self.x[k]);
                ([k - 1, k, k + 1], d1, d2)
            }
        }
    }

    fn solved(&self, k: usize) -> bool {
        self.period.is_some() || (k > 0 && k + 1 < self.x.len())
    }
}

/// Backward Euler for `f°_t = a22° f°_yy + b2° f°_y + c° f° + φ°` on the
/// trace `z = 0`. One tridiagonal solve per step, cyclic when periodic.
pub fn solve_boundary_problem(
    coeffs: &ModelCoefficients,
    problem: &BoundaryProblem,
    stepping: TimeStepping,
) -> Result<BoundaryField, ModelError> {
    let periodic = matches!(problem.side, BoundarySide::Periodic);
    let axis = Axis1::new("y", &problem.y, periodic)?;
    let ny = problem.y.len();
    if problem.initial.len() != ny {
        return Err(ModelError::GridMismatch("initial trace does not match the y axis".into()));
    }
    let (n, dt) = stepping.steps()?;
    coeffs.check_trace(&problem.y, 0.0)?;
    let mut u = problem.initial.clone();
    let mut times = vec![0.0];
    let mut kept = vec![u.clone()];
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; ny], vec![0.0; ny], vec![0.0; ny], vec![0.0; ny]);
    for step in 1..=n {
        let t = step as f64 * dt;
        coeffs.check_trace(&problem.y, t)?;
        for k in 0..ny {
            if !axis.solved(k) {
                let BoundarySide::Dirichlet(g) = &problem.side else { unreachable!() };
                (lower[k], diag[k], upper[k], rhs[k]) = (0.0, 1.0, 0.0, g(problem.y[k], t));
                continue;
            }
            let y = problem.y[k];
            let co = coeffs.at(0.0, y, t);
            let (_, d1, d2) = axis.stencil(k);
            let w: Vec<f64> = (0..3).map(|m| co.a22 * d2[m] + co.b2 * d1[m]).collect();
            lower[k] = -dt * w[0];
            diag[k] = 1.0 - dt * (w[1] + co.c);
            upper[k] = -dt * w[2];
            rhs[k] = u[k] + dt * problem.forcing.as_ref().map_or(0.0, |f| f(y, t));
        }
        let next = if periodic {
            cyclic_tridiagonal(&lower, &diag, &upper, &rhs)
        } else {
            tridiagonal(&lower, &diag, &upper, &rhs)
        };
        u = next.ok_or_else(|| ModelError::Solver(format!("singular tridiagonal system at t = {t}")))?;
        if stepping.keeps(step, n) {
            times.push(t);
            kept.push(u.clone());
        }
    }
    let mut values = Array2::zeros((ny, times.len()));
    for (c, col) in kept.iter().enumerate() {
        values.column_mut(c).assign(&ndarray::ArrayView1::from(col.as_slice()));
    }
    Ok(BoundaryField { y: problem.y.clone(), t: times, values })
}

/// End condition in `w` for the `f̃` problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WSide {
    Periodic,
    /// Linear extrapolation `f̃_ww = 0` at both ends of a truncated window.
    Outflow,
}

/// End condition in `y` for the `f̃` problem.
#[derive(Clone)]
pub enum TildeYSide {
    Periodic,
    /// Values at both ends from `g(w, y, t)`.
    Dirichlet(Source3),
}

pub struct TildeProblem {
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub w_side: WSide,
    pub y_side: TildeYSide,
    /// `f̃₀` over `(w, y)`.
    pub initial: Array2<f64>,
    pub forcing: Option<Source3>,
    /// Trace solution feeding `Ĝ`; must share the `y` axis and cover the
    /// time span. Linear in `t` between its recorded times.
    pub trace: Option<BoundaryField>,
}

fn trace_at(trace: &BoundaryField, axis: &Axis1, b: usize, t: f64) -> TraceValues {
    let nt = trace.t.len();
    let c = trace.t.partition_point(|&s| s <= t).clamp(1, nt.max(2) - 1);
    let (c0, c1) = if nt == 1 { (0, 0) } else { (c - 1, c) };
    let theta = if c1 == c0 { 0.0 } else { ((t - trace.t[c0]) / (trace.t[c1] - trace.t[c0])).clamp(0.0, 1.0) };
    let at = |k: usize| (1.0 - theta) * trace.values[[k, c0]] + theta * trace.values[[k, c1]];
    let ny = trace.y.len();
    let (idx, d1, d2) = if axis.solved(b) {
        axis.stencil(b)
    } else {
        let base = if b == 0 { 0 } else { ny - 3 };
        let idx = [base, base + 1, base + 2];
        let (d1, d2) = lagrange3([trace.y[idx[0]], trace.y[idx[1]], trace.y[idx[2]]], trace.y[b]);
        (idx, d1, d2)
    };
    TraceValues {
        f: at(b),
        f_y: (0..3).map(|m| d1[m] * at(idx[m])).sum(),
        f_yy: (0..3).map(|m| d2[m] * at(idx[m])).sum(),
    }
}

/// Backward Euler for `f̃_t = â11 f̃_ww + 2â12 f̃_wy + â22 f̃_yy + b̂1 f̃_w + b̂2 f̃_y + ĉ f̃ + Ĝ + φ̃`
/// on the `(w, y)` window. Each step is a sparse solve by BiCGSTAB.
pub fn solve_tilde_problem(
    tc: &TransformedCoefficients,
    problem: &TildeProblem,
    stepping: TimeStepping,
) -> Result<TildeField, ModelError> {
    let wa = Axis1::new("w", &problem.w, problem.w_side == WSide::Periodic)?;
    let ya = Axis1::new("y", &problem.y, matches!(problem.y_side, TildeYSide::Periodic))?;
    let (nw, ny) = (problem.w.len(), problem.y.len());
    if problem.w_side == WSide::Outflow {
        let width = problem.w[nw - 1] - problem.w[0];
        if width < MIN_WINDOW {
            return Err(ModelError::Window(format!("w window of width {width} is below {MIN_WINDOW}")));
        }
    }
    if problem.initial.dim() != (nw, ny) {
        return Err(ModelError::GridMismatch("initial data does not match the (w, y) axes".into()));
    }
    if let Some(tr) = &problem.trace {
        if tr.y != problem.y {
            return Err(ModelError::GridMismatch("trace uses a different y axis".into()));
        }
        if tr.t.is_empty() || tr.t[tr.t.len() - 1] < stepping.t_end - 1e-12 {
            return Err(ModelError::GridMismatch("trace does not cover the time span".into()));
        }
    }
    let (n, dt) = stepping.steps()?;
    tc.check_ellipticity(&problem.w, &problem.y, 0.0)?;
    let idx = |a: usize, b: usize| a * ny + b;
    let mut u: Vec<f64> = problem.initial.iter().copied().collect();
    let mut times = vec![0.0];
    let mut kept = vec![u.clone()];
    for step in 1..=n {
        let t = step as f64 * dt;
        tc.check_ellipticity(&problem.w, &problem.y, t)?;
        let mut mat = Csr::with_capacity(nw * ny, 9 * nw * ny);
        let mut rhs = vec![0.0; nw * ny];
        for a in 0..nw {
            for b in 0..ny {
                let r = idx(a, b);
                let (w, y) = (problem.w[a], problem.y[b]);
                if !ya.solved(b) {
                    let TildeYSide::Dirichlet(g) = &problem.y_side else { unreachable!() };
                    mat.push(r, 1.0);
                    mat.end_row();
                    rhs[r] = g(w, y, t);
                    continue;
                }
                if !wa.solved(a) {
                    let inner = if a == 0 { [0, 1, 2] } else { [nw - 1, nw - 2, nw - 3] };
                    // Second difference on the (possibly nonuniform) end triple.
                    let (_, d2) = lagrange3(inner.map(|k| problem.w[k]), problem.w[inner[1]]);
                    let order = [inner[0], inner[1], inner[2]];
                    let mut pairs: Vec<(usize, f64)> = order.iter().zip(d2).map(|(&k, d)| (idx(k, b), d / d2[0])).collect();
                    pairs.sort_by_key(|&(c, _)| c);
                    for (c, v) in pairs {
                        mat.push(c, v);
                    }
                    mat.end_row();
                    continue;
                }
                let h = tc.at(w, y, t);
                let (wi, w1, w2) = wa.stencil(a);
                let (yi, y1, y2) = ya.stencil(b);
                let mut diag = 1.0 - dt * h.c;
                let mut entries: Vec<(usize, f64)> = Vec::with_capacity(9);
                for m in 0..3 {
                    let cw = -dt * (h.a11 * w2[m] + h.b1 * w1[m]);
                    let cy = -dt * (h.a22 * y2[m] + h.b2 * y1[m]);
                    if wi[m] == a {
                        diag += cw;
                    } else {
                        entries.push((idx(wi[m], b), cw));
                    }
                    if yi[m] == b {
                        diag += cy;
                    } else {
                        entries.push((idx(a, yi[m]), cy));
                    }
                    for l in 0..3 {
                        let cm = -dt * 2.0 * h.a12 * w1[m] * y1[l];
                        if cm != 0.0 {
                            entries.push((idx(wi[m], yi[l]), cm));
                        }
                    }
                }
                entries.push((r, diag));
                entries.sort_by_key(|&(c, _)| c);
                let mut last = usize::MAX;
                for (c, v) in entries {
                    if c == last {
                        *mat.val.last_mut().expect("entry pushed") += v;
                    } else {
                        mat.push(c, v);
                        last = c;
                    }
                }
                mat.end_row();
                let g = problem.trace.as_ref().map_or(0.0, |tr| tc.source(w, y, t, trace_at(tr, &ya, b, t)));
                let phi = problem.forcing.as_ref().map_or(0.0, |f| f(w, y, t));
                rhs[r] = u[r] + dt * (g + phi);
            }
        }
        let mut next = u.clone();
        bicgstab(&mat, &rhs, &mut next, TOLERANCE, 20 * nw * ny)
            .map_err(|res| ModelError::Solver(format!("BiCGSTAB stalled at t = {t} with residual ratio {res:e}")))?;
        u = next;
        if stepping.keeps(step, n) {
            times.push(t);
            kept.push(u.clone());
        }
    }
    let mut values = Array3::zeros((nw, ny, times.len()));
    for (c, snap) in kept.iter().enumerate() {
        let mut slab = values.index_axis_mut(Axis(2), c);
        for a in 0..nw {
            for b in 0..ny {
                slab[[a, b]] = snap[idx(a, b)];
            }
        }
    }
    Ok(TildeField { w: problem.w.clone(), y: problem.y.clone(), t: times, values })
}
