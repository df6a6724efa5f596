//! The `w_t` conversion and the coefficient structure of the linearised
//! evolution of `w`.

use super::expansion::second_derivative_expansion;
use super::{ChartError, ChartMap, WJet};
use crate::flow::graph_quotient;
use serde::Serialize;

const TRANSVERSAL_EPS: f64 = 1e-12;

/// `w_t = z_t / (z_y y_w − z_w)`, evaluated as printed.
pub fn w_time_derivative(z_t: f64, z_y: f64, y_w: f64, z_w: f64) -> Result<f64, ChartError> {
    let den = z_y * y_w - z_w;
    if !(den.abs() >= TRANSVERSAL_EPS) {
        return Err(ChartError::Transversality(den));
    }
    Ok(z_t / den)
}

/// `w_t = z_t / (z_w − z_x x_w − z_y y_w)`, from differentiating
/// `S₃ + wT₃ = z(S₁ + wT₁, S₂ + wT₂, t)` in `t` at fixed `(u, v)`.
pub fn w_time_derivative_derived(z_t: f64, grad: [f64; 2], transverse: [f64; 3]) -> Result<f64, ChartError> {
    let den = transverse[2] - grad[0] * transverse[0] - grad[1] * transverse[1];
    if !(den.abs() >= TRANSVERSAL_EPS) {
        return Err(ChartError::Transversality(den));
    }
    Ok(z_t / den)
}

/// `w_t` under the flow `z_t = det D²z / N` with the chain-rule conversion.
fn velocity(chart: &ChartMap, u: f64, v: f64, w: &WJet) -> Result<f64, ChartError> {
    let ex = second_derivative_expansion(chart, u, v, w)?;
    let (num, den) = graph_quotient(ex.grad, ex.hess);
    let z_t = if den != 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        return Err(ChartError::Degenerate { u, v });
    };
    w_time_derivative_derived(z_t, ex.grad, ex.transverse)
}

/// Coefficients of `a11 w̃₁₁ + 2a12 w̃₁₂ + a22 w̃₂₂ + b1 w̃₁ + b2 w̃₂ + c w̃`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearCoeffs {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl LinearCoeffs {
    fn get(&self, k: usize) -> f64 {
        [self.a11, self.a12, self.a22, self.b1, self.b2, self.c][k]
    }
}

const NAMES: [&str; 6] = ["a11", "a12", "a22", "b1", "b2", "c"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearizationSample {
    pub u: f64,
    pub v: f64,
    /// Distance to the degenerate set, as supplied by the caller.
    pub distance: f64,
    pub velocity: f64,
    pub coeffs: LinearCoeffs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StructureClass {
    /// Identically zero along the ray.
    Zero,
    /// `|coefficient| ~ distance^order` with `order ≥ 1/2` near the degenerate set.
    Vanishing { order: f64 },
    /// Grows like `distance^order` with `order ≤ −1/2`.
    Unbounded { order: f64 },
    Bounded { min_abs: f64, max_abs: f64 },
    /// Not differentiable at some sample (reported as `NaN` there).
    Singular,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientClass {
    pub name: String,
    pub class: StructureClass,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearizationReport {
    pub samples: Vec<LinearizationSample>,
    pub classes: Vec<CoefficientClass>,
    /// Every sampled velocity vanishes: the reference does not move.
    pub stationary: bool,
}

impl LinearizationReport {
    pub fn class(&self, name: &str) -> Option<StructureClass> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn linear_coeffs(chart: &ChartMap, u: f64, v: f64, w: &WJet) -> Result<LinearCoeffs, ChartError> {
    let probe = |set: fn(&mut WJet, f64), get: fn(&WJet) -> f64| -> Result<f64, ChartError> {
        let eps = 1e-6 * get(w).abs().max(1.0);
        let (mut up, mut dn) = (*w, *w);
        set(&mut up, get(w) + eps);
        set(&mut dn, get(w) - eps);
        match (velocity(chart, u, v, &up), velocity(chart, u, v, &dn)) {
            (Ok(a), Ok(b)) => Ok((a - b) / (2.0 * eps)),
            // The speed is not differentiable here in this direction.
            (Err(ChartError::Degenerate { .. }), _) | (_, Err(ChartError::Degenerate { .. })) => Ok(f64::NAN),
            (Err(e), _) | (_, Err(e)) => Err(e),
        }
    };
    Ok(LinearCoeffs {
        a11: probe(|j, x| j.uu = x, |j| j.uu)?,
        a12: 0.5 * probe(|j, x| j.uv = x, |j| j.uv)?,
        a22: probe(|j, x| j.vv = x, |j| j.vv)?,
        b1: probe(|j, x| j.u = x, |j| j.u)?,
        b2: probe(|j, x| j.v = x, |j| j.v)?,
        c: probe(|j, x| j.f = x, |j| j.f)?,
    })
}

fn classify(points: &[(f64, f64)]) -> StructureClass {
    if points.iter().any(|p| p.1.is_nan()) {
        return StructureClass::Singular;
    }
    let max_abs = points.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let min_abs = points.iter().fold(f64::INFINITY, |m, p| m.min(p.1.abs()));
    if max_abs <= 1e-10 {
        return StructureClass::Zero;
    }
    // Log-log slope over the third of the samples nearest the degenerate set.
    let near: Vec<(f64, f64)> = points
        .iter()
        .take((points.len() / 3).max(2))
        .filter(|p| p.0 > 0.0 && p.1 != 0.0)
        .map(|p| (p.0.ln(), p.1.abs().ln()))
        .collect();
    if near.len() >= 2 {
        let n = near.len() as f64;
        let (mx, my) = near.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0 / n, b + p.1 / n));
        let sxy: f64 = near.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = near.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx > 0.0 {
            let order = sxy / sxx;
            if order >= 0.5 {
                return StructureClass::Vanishing { order };
            }
            if order <= -0.5 {
                return StructureClass::Unbounded { order };
            }
        }
    }
    StructureClass::Bounded { min_abs, max_abs }
}

/// Evaluates the linearised coefficients of `w_t = F(u, v, w, Dw, D²w)` at
/// the ray points `(u, v, distance)` by central differences in the jet, and
/// classifies each coefficient by its behaviour as the distance shrinks.
pub fn linearization_structure_report(
    chart: &ChartMap,
    field: &dyn Fn(f64, f64) -> WJet,
    ray: &[(f64, f64, f64)],
) -> Result<LinearizationReport, ChartError> {
    if ray.is_empty() {
        return Err(ChartError::Config("empty ray".into()));
    }
    let mut samples = Vec::with_capacity(ray.len());
    for &(u, v, distance) in ray {
        let w = field(u, v);
        samples.push(LinearizationSample {
            u,
            v,
            distance,
            velocity: velocity(chart, u, v, &w)?,
            coeffs: linear_coeffs(chart, u, v, &w)?,
        });
    }
    samples.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    let classes = (0..6)
        .map(|k| {
            let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.distance, s.coeffs.get(k))).collect();
            CoefficientClass { name: NAMES[k].into(), class: classify(&pts) }
        })
        .collect();
    let stationary = samples.iter().all(|s| s.velocity.abs() <= 1e-14);
    Ok(LinearizationReport { samples, classes, stationary })
}
