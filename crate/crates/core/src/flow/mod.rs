//! Explicit evolution of a height field by harmonic mean curvature flow,
//! `h_t = det D²h / ((1+h_y²)h_xx − 2h_x h_y h_xy + (1+h_x²)h_yy)`, including
//! the stationary flat side, and the containment measure used for the
//! comparison principle.

mod scheme;

pub use scheme::graph_quotient;

use crate::analysis::{check_star, pressure, AnalysisError};
use crate::geometry::{hessian_and_gradient, GeometryError, HeightField};
use crate::interface::{extract_interface_with, InterfaceError, Interpolation};
use ndarray::Array2;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("invalid flow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("degenerate quotient at ({i}, {j}): zero denominator with numerator {numerator}")]
    Degenerate { i: usize, j: usize, numerator: f64 },
    #[error("stiffness abort: dt = {dt} at t = {t}")]
    Stiffness { dt: f64, t: f64 },
    #[error("grid mismatch between the two fields")]
    GridMismatch,
    #[error("initial data rejected: {0}")]
    Precondition(String),
    #[error("flat set split: {before} components became {after}")]
    FlatSetGrew { before: usize, after: usize },
}

impl From<AnalysisError> for FlowError {
    fn from(e: AnalysisError) -> Self {
        FlowError::Precondition(e.to_string())
    }
}

impl From<InterfaceError> for FlowError {
    fn from(e: InterfaceError) -> Self {
        FlowError::Precondition(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Euler,
    /// Two-stage strong-stability-preserving Runge–Kutta.
    Rk2,
}

pub type BoundaryFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Treatment of the outermost ring of nodes, which the centred stencils
/// cannot reach.
#[derive(Clone)]
pub enum Boundary {
    /// Keep the initial values.
    Frozen,
    /// Set to `h(x, y, t)` after every step.
    Prescribed(BoundaryFn),
    /// Move each ring node at the rate extrapolated linearly from the two
    /// nodes inward along the grid normal (diagonal at corners).
    Extrapolate,
}

impl fmt::Debug for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Frozen => write!(f, "Frozen"),
            Boundary::Prescribed(_) => write!(f, "Prescribed(..)"),
            Boundary::Extrapolate => write!(f, "Extrapolate"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowConfig {
    pub dt_safety: f64,
    pub t_end: f64,
    /// Floor for the quotient denominator; `None` means `1e-10/dx`.
    pub denom_eps: Option<f64>,
    pub record_every: usize,
    pub p: f64,
    pub integrator: Integrator,
    pub boundary: Boundary,
}

impl FlowConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            dt_safety: 0.5,
            t_end,
            denom_eps: None,
            record_every: 100,
            p: 0.5,
            integrator: Integrator::Euler,
            boundary: Boundary::Frozen,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: String| Err(FlowError::Config(m));
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return bad(format!("dt_safety = {} outside (0, 1]", self.dt_safety));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be finite and nonnegative", self.t_end));
        }
        if let Some(eps) = self.denom_eps {
            if !(eps > 0.0) {
                return bad(format!("denom_eps = {eps} must be positive"));
            }
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return bad(format!("p = {} outside (0, 1)", self.p));
        }
        Ok(())
    }

    fn denom_eps_for(&self, field: &HeightField) -> f64 {
        self.denom_eps.unwrap_or(1e-10 / field.dx().min(field.dy()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub field: HeightField,
    pub t: f64,
    pub step_count: usize,
    /// Smallest |denominator| of the graph quotient on strictly convex nodes
    /// during the last step (infinite before the first step).
    pub min_denominator: f64,
}

impl FlowState {
    pub fn initial(field: HeightField) -> Self {
        Self { field, t: 0.0, step_count: 0, min_denominator: f64::INFINITY }
    }

    fn plan(&self, cfg: &FlowConfig) -> Result<scheme::Plan, FlowError> {
        scheme::plan(&self.field, cfg.p, cfg.denom_eps_for(&self.field))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    /// Why the run stopped early, if it did.
    pub error: Option<FlowError>,
}

impl Trajectory {
    pub fn last(&self) -> &FlowState {
        self.snapshots.last().expect("a trajectory holds at least the initial state")
    }
}

/// Vertical speed at an interior node: the graph quotient, exactly zero where
/// the numerator and the gradient are below `flat_tol`, and with the
/// denominator floored at `denom_eps` (sign kept) otherwise.
pub fn rhs_graph(field: &HeightField, i: usize, j: usize, denom_eps: f64) -> Result<f64, FlowError> {
    let (grad, hess) = hessian_and_gradient(field, i, j)?;
    Ok(scheme::height_rate(grad, hess, field.flat_tol(), denom_eps, (i, j))?.0)
}

/// Explicit step bound `dt_safety·min(dx², dy²)/(4·max diffusivity)`, capped
/// by the time left to `t_end`.
pub fn stable_dt(state: &FlowState, cfg: &FlowConfig) -> Result<f64, FlowError> {
    cfg.validate()?;
    let plan = state.plan(cfg)?;
    Ok(stable_bound(&plan, state, cfg).min(remaining(state, cfg)))
}

/// The CFL bound alone; infinite when nothing diffuses.
fn stable_bound(plan: &scheme::Plan, state: &FlowState, cfg: &FlowConfig) -> f64 {
    let h2 = state.field.dx().min(state.field.dy()).powi(2);
    if plan.diffusivity > 0.0 {
        cfg.dt_safety * h2 / (4.0 * plan.diffusivity)
    } else {
        f64::INFINITY
    }
}

fn remaining(state: &FlowState, cfg: &FlowConfig) -> f64 {
    (cfg.t_end - state.t).max(0.0)
}

/// One step with the stable `dt`, truncated to land on `t_end`.
pub fn step(state: &FlowState, cfg: &FlowConfig) -> Result<FlowState, FlowError> {
    cfg.validate()?;
    let plan = state.plan(cfg)?;
    let bound = stable_bound(&plan, state, cfg);
    check_dt(bound, state, cfg)?;
    let dt = bound.min(remaining(state, cfg));
    if !(dt > 0.0) {
        return Err(FlowError::Config(format!("nothing left to integrate at t = {}", state.t)));
    }
    advance(state, cfg, dt, plan)
}

/// One step with a caller-chosen `dt`.
pub fn step_with_dt(state: &FlowState, cfg: &FlowConfig, dt: f64) -> Result<FlowState, FlowError> {
    cfg.validate()?;
    check_dt(dt, state, cfg)?;
    let plan = state.plan(cfg)?;
    advance(state, cfg, dt, plan)
}

fn check_dt(dt: f64, state: &FlowState, cfg: &FlowConfig) -> Result<(), FlowError> {
    if !(dt > 0.0) || dt < 1e-14 * cfg.t_end {
        return Err(FlowError::Stiffness { dt, t: state.t });
    }
    Ok(())
}

fn advance(state: &FlowState, cfg: &FlowConfig, dt: f64, plan: scheme::Plan) -> Result<FlowState, FlowError> {
    let field = &state.field;
    let q = 1.0 / cfg.p;
    let tol = field.flat_tol();
    let t_new = state.t + dt;
    let h0 = field.values();
    let mut h1 = scheme::apply(h0, &plan, dt, q);
    set_ring(&mut h1, h0, field, &cfg.boundary, t_new);
    let mut next = match cfg.integrator {
        Integrator::Euler => h1,
        Integrator::Rk2 => {
            clamp_roundoff(&mut h1, tol);
            check_sign(&h1)?;
            let mid = FlowState { field: HeightField::from_parts_unchecked(*field.grid(), h1, tol), ..state.clone() };
            let plan1 = mid.plan(cfg)?;
            let mut h2 = scheme::apply(mid.field.values(), &plan1, dt, q);
            set_ring(&mut h2, mid.field.values(), field, &cfg.boundary, t_new);
            let mut avg = (h0 + &h2) * 0.5;
            // Exact stationarity of the flat side, and the ring as the
            // boundary condition dictates.
            for ((i, j), &s) in plan.stationary.indexed_iter() {
                if s {
                    avg[[i, j]] = h0[[i, j]];
                }
            }
            if let Boundary::Prescribed(_) = cfg.boundary {
                set_ring(&mut avg, h0, field, &cfg.boundary, t_new);
            }
            avg
        }
    };
    clamp_roundoff(&mut next, tol);
    check_sign(&next)?;
    Ok(FlowState {
        field: HeightField::from_parts_unchecked(*field.grid(), next, tol),
        t: t_new,
        step_count: state.step_count + 1,
        min_denominator: plan.min_denominator,
    })
}

/// Rounding can push a node that should sit on the plane a few ulps below it.
fn clamp_roundoff(h: &mut Array2<f64>, flat_tol: f64) {
    h.mapv_inplace(|v| if v < 0.0 && v > -flat_tol { 0.0 } else { v });
}

fn check_sign(h: &Array2<f64>) -> Result<(), FlowError> {
    if let Some(((i, j), &value)) = h.indexed_iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(GeometryError::NegativeHeight { i, j, value }.into());
    }
    Ok(())
}

fn set_ring(next: &mut Array2<f64>, prev: &Array2<f64>, field: &HeightField, boundary: &Boundary, t: f64) {
    let (nx, ny) = next.dim();
    let ring = (0..nx)
        .flat_map(|i| [(i, 0), (i, ny - 1)])
        .chain((1..ny - 1).flat_map(|j| [(0, j), (nx - 1, j)]));
    match boundary {
        Boundary::Frozen => {}
        Boundary::Prescribed(f) => {
            let grid = field.grid();
            for (i, j) in ring {
                next[[i, j]] = f(grid.x(i), grid.y(j), t);
            }
        }
        Boundary::Extrapolate => {
            for (i, j) in ring {
                let di: i64 = if i == 0 { 1 } else if i == nx - 1 { -1 } else { 0 };
                let dj: i64 = if j == 0 { 1 } else if j == ny - 1 { -1 } else { 0 };
                let at = |k: i64| ((i as i64 + k * di) as usize, (j as i64 + k * dj) as usize);
                let (n1, n2) = (at(1), at(2));
                let d1 = next[[n1.0, n1.1]] - prev[[n1.0, n1.1]];
                let d2 = next[[n2.0, n2.1]] - prev[[n2.0, n2.1]];
                next[[i, j]] = prev[[i, j]] + 2.0 * d1 - d2;
            }
        }
    }
}

/// Rejects initial data whose resolved interface fails (★) with `λ = 0`.
fn check_initial(field: &HeightField, cfg: &FlowConfig) -> Result<(), FlowError> {
    let Some(curve) = extract_interface_with(field, field.flat_tol(), Interpolation::Power(cfg.p))? else {
        return Ok(());
    };
    let report = check_star(&pressure(field, cfg.p)?, &curve, 0.0)?;
    if !report.passes {
        return Err(FlowError::Precondition(format!(
            "non-degeneracy fails on the initial interface: min |Dg| = {}, min g_ττ = {}",
            report.min_grad, report.min_g_tautau
        )));
    }
    Ok(())
}

/// Evolves to `cfg.t_end`, recording the initial state, every
/// `record_every`-th step and the final state. Step failures end the run
/// with the partial trajectory and the reason.
pub fn run(initial: &HeightField, cfg: &FlowConfig) -> Result<Trajectory, FlowError> {
    let mut all = run_many(&[(initial.clone(), cfg.clone())])?;
    Ok(all.remove(0))
}

/// Evolves several bodies with a common step (the smallest stable one), so
/// their snapshots share times. All configurations must agree on `t_end` and
/// `record_every`.
pub fn run_many(bodies: &[(HeightField, FlowConfig)]) -> Result<Vec<Trajectory>, FlowError> {
    let Some((_, first)) = bodies.first() else {
        return Ok(Vec::new());
    };
    for (field, cfg) in bodies {
        cfg.validate()?;
        if cfg.t_end != first.t_end || cfg.record_every != first.record_every {
            return Err(FlowError::Config("bodies must share t_end and record_every".into()));
        }
        field.validate()?;
        check_initial(field, cfg)?;
    }
    let (t_end, every) = (first.t_end, first.record_every);
    let mut states: Vec<FlowState> = bodies.iter().map(|(f, _)| FlowState::initial(f.clone())).collect();
    let mut trajectories: Vec<Trajectory> =
        states.iter().map(|s| Trajectory { snapshots: vec![s.clone()], error: None }).collect();
    let mut components: Vec<usize> = states.iter().map(|s| s.field.flat_components()).collect();

    let fail = |mut trajectories: Vec<Trajectory>, states: &[FlowState], e: FlowError| {
        for (tr, s) in trajectories.iter_mut().zip(states) {
            if tr.last().step_count != s.step_count {
                tr.snapshots.push(s.clone());
            }
            tr.error = Some(e.clone());
        }
        trajectories
    };

    while states[0].t < t_end {
        let mut plans = Vec::with_capacity(bodies.len());
        let mut bound = f64::INFINITY;
        for ((_, cfg), s) in bodies.iter().zip(&states) {
            match s.plan(cfg) {
                Ok(plan) => {
                    bound = bound.min(stable_bound(&plan, s, cfg));
                    plans.push(plan);
                }
                Err(e) => return Ok(fail(trajectories, &states, e)),
            }
        }
        if let Err(e) = check_dt(bound, &states[0], first) {
            return Ok(fail(trajectories, &states, e));
        }
        let left = remaining(&states[0], first);
        let dt = if left - bound < 1e-12 * t_end { left } else { bound };
        let mut next = Vec::with_capacity(states.len());
        for (((_, cfg), s), plan) in bodies.iter().zip(&states).zip(plans) {
            match advance(s, cfg, dt, plan) {
                Ok(n) => next.push(n),
                Err(e) => return Ok(fail(trajectories, &states, e)),
            }
        }
        if (next[0].t - t_end).abs() <= 1e-12 * t_end {
            for s in &mut next {
                s.t = t_end;
            }
        }
        states = next;
        let done = states[0].t >= t_end;
        if states[0].step_count.is_multiple_of(every) || done {
            for (k, s) in states.iter().enumerate() {
                let after = s.field.flat_components();
                if after > components[k] {
                    let e = FlowError::FlatSetGrew { before: components[k], after };
                    return Ok(fail(trajectories, &states, e));
                }
                components[k] = after;
                trajectories[k].snapshots.push(s.clone());
            }
        }
    }
    Ok(trajectories)
}

/// `max(outer.h − inner.h)` over the common grid. In the lower-graph picture
/// the inner body lies inside the outer one iff its graph is on or above the
/// outer graph, so a value ≤ 0 means containment holds.
pub fn containment_check(inner: &HeightField, outer: &HeightField) -> Result<f64, FlowError> {
    if inner.grid() != outer.grid() {
        return Err(FlowError::GridMismatch);
    }
    Ok(outer
        .values()
        .iter()
        .zip(inner.values().iter())
        .map(|(o, i)| o - i)
        .fold(f64::NEG_INFINITY, f64::max))
}
