//! Per-node rates of one explicit step.
//!
//! Away from the flat side the graph equation is used as is. Within a few
//! cells of the stationary flat set the rate is computed for the pressure
//! `g = h^p`, whose gradient does not vanish at the interface.
//!
//! Where a centred stencil would reach into the flat set, the derivatives of
//! `g` come from a least-squares quadratic fitted to positive nodes only.
//! Continuing `g` into the flat set and differencing across the interface
//! does not work: a linear continuation leaves an O(1) error in the second
//! differences on a curved interface, and any continuation exact for
//! quadratics puts the node's own value into its second differences with a
//! positive weight, which is anti-diffusive. Flat nodes next to the
//! interface get a rate from the same kind of fit; their value is not state,
//! it only decides when they turn positive.

use super::FlowError;
use crate::geometry::{centered_derivatives, harmonic_mean_velocity, principal_curvatures, HeightField, Sym2, VelocityParams};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rayon::prelude::*;

/// Width of the pressure band around the stationary flat set, in cells.
pub(crate) const BAND: usize = 3;

/// Half-width of the least-squares window, in cells. Flat nodes see the
/// positive side from one side only and need a wider window to resolve the
/// curvature across the interface.
const FIT_RADIUS: i64 = 2;
const WIDE_FIT_RADIUS: i64 = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Update {
    Keep,
    Height { rate: f64 },
    Pressure { g: f64, rate: f64 },
}

pub(crate) struct Plan {
    pub updates: Array2<Update>,
    pub stationary: Array2<bool>,
    pub diffusivity: f64,
    pub min_denominator: f64,
}

/// `(det D²h, (1+h_y²)h_xx − 2h_x h_y h_xy + (1+h_x²)h_yy)`; their quotient
/// is the vertical speed `W·K/H` of the graph.
pub fn graph_quotient(grad: [f64; 2], hess: Sym2) -> (f64, f64) {
    let [hx, hy] = grad;
    let den = (1.0 + hy * hy) * hess.xx - 2.0 * hx * hy * hess.xy + (1.0 + hx * hx) * hess.yy;
    (hess.det(), den)
}

/// Largest |eigenvalue| of `(P_N·D − N·P_D)/D²`, the derivative of `N/D`
/// with respect to the Hessian.
fn diffusivity(pn: Sym2, pd: Sym2, num: f64, den: f64) -> f64 {
    let d2 = den * den;
    let m = Sym2::new(
        (pn.xx * den - num * pd.xx) / d2,
        (pn.xy * den - num * pd.xy) / d2,
        (pn.yy * den - num * pd.yy) / d2,
    );
    let (a, b) = m.eigenvalues();
    a.abs().max(b.abs())
}

fn floor_denominator(den: f64, eps: f64) -> f64 {
    if den.abs() >= eps {
        den
    } else if den < 0.0 {
        -eps
    } else {
        eps
    }
}

/// Graph-equation rate with the degenerate shortcut and the floored
/// denominator. Also returns the unfloored denominator.
pub(crate) fn height_rate(
    grad: [f64; 2],
    hess: Sym2,
    flat_tol: f64,
    denom_eps: f64,
    at: (usize, usize),
) -> Result<(f64, f64), FlowError> {
    let (num, den) = graph_quotient(grad, hess);
    if num.abs() < flat_tol && grad[0].hypot(grad[1]) < flat_tol {
        return Ok((0.0, den));
    }
    if den == 0.0 && num.abs() > flat_tol {
        return Err(FlowError::Degenerate { i: at.0, j: at.1, numerator: num });
    }
    Ok((num / floor_denominator(den, denom_eps), den))
}

fn stationary_mask(field: &HeightField) -> Array2<bool> {
    let (nx, ny) = (field.nx(), field.ny());
    let h = field.values();
    let tol = field.flat_tol();
    Array2::from_shape_fn((nx, ny), |(i, j)| {
        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 || h[[i, j]] >= tol {
            return false;
        }
        let (g, s) = centered_derivatives(h, i, j, field.dx(), field.dy());
        g[0].abs() < tol && g[1].abs() < tol && s.xx.abs() < tol && s.yy.abs() < tol && s.xy.abs() < tol
    })
}

fn dilate(mask: &Array2<bool>, r: usize) -> Array2<bool> {
    let (nx, ny) = mask.dim();
    let mut rows = Array2::from_elem((nx, ny), false);
    for ((i, j), &m) in mask.indexed_iter() {
        if m {
            for a in i.saturating_sub(r)..=(i + r).min(nx - 1) {
                rows[[a, j]] = true;
            }
        }
    }
    let mut out = Array2::from_elem((nx, ny), false);
    for ((i, j), &m) in rows.indexed_iter() {
        if m {
            for b in j.saturating_sub(r)..=(j + r).min(ny - 1) {
                out[[i, b]] = true;
            }
        }
    }
    out
}

/// Value, gradient and Hessian at node `(i, j)` of the quadratic fitted by
/// least squares to `g` on the positive nodes of the surrounding window.
/// With `pinned` the fit passes through that value at the node itself.
#[allow(clippy::too_many_arguments)]
fn quadratic_fit(
    g: &Array2<f64>,
    positive: &Array2<bool>,
    i: usize,
    j: usize,
    dx: f64,
    dy: f64,
    pinned: Option<f64>,
    radius: i64,
) -> Option<(f64, [f64; 2], Sym2)> {
    let (nx, ny) = g.dim();
    let free = usize::from(pinned.is_none());
    let mut rows: Vec<[f64; 6]> = Vec::new();
    let mut rhs = Vec::new();
    for a in -radius..=radius {
        for b in -radius..=radius {
            let (u, v) = (i as i64 + a, j as i64 + b);
            if u < 0 || v < 0 || u >= nx as i64 || v >= ny as i64 || (a == 0 && b == 0 && pinned.is_some()) {
                continue;
            }
            let (u, v) = (u as usize, v as usize);
            if !positive[[u, v]] {
                continue;
            }
            let (x, y) = (a as f64, b as f64);
            rows.push([1.0, x, y, 0.5 * x * x, x * y, 0.5 * y * y]);
            rhs.push(g[[u, v]] - pinned.unwrap_or(0.0));
        }
    }
    let k = 5 + free;
    if rows.len() < k + 2 {
        return None;
    }
    let m = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c + 1 - free]);
    let svd = m.svd(true, true);
    let (lo, hi) = svd.singular_values.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(lo > 1e-8 * hi) {
        return None;
    }
    let sol = svd.solve(&DVector::from_vec(rhs), 0.0).ok()?;
    let c = |n: usize| sol[n - 1 + free];
    let value = pinned.unwrap_or_else(|| sol[0]);
    let grad = [c(1) / dx, c(2) / dy];
    let hess = Sym2::new(c(3) / (dx * dx), c(4) / (dx * dy), c(5) / (dy * dy));
    grad.iter().chain([hess.xx, hess.xy, hess.yy].iter()).all(|v| v.is_finite()).then_some((value, grad, hess))
}

/// Rate of the pressure equation and its diffusivity.
fn pressure_rate(
    g0: f64,
    grad: [f64; 2],
    hess: Sym2,
    q: f64,
    flat_tol: f64,
    denom_eps: f64,
    at: (usize, usize),
) -> Result<(f64, f64), FlowError> {
    let [gx, gy] = grad;
    let m = Sym2::new(gy * gy, -gx * gy, gx * gx);
    let t = m.xx * hess.xx + 2.0 * m.xy * hess.xy + m.yy * hess.yy;
    let weight = q * q * g0.max(0.0).powf(2.0 * q - 1.0);
    let num = g0 * hess.det() + (q - 1.0) * t;
    let den = g0 * hess.trace() + (q - 1.0) * (gx * gx + gy * gy) + weight * t;
    if den == 0.0 && num.abs() > flat_tol {
        return Err(FlowError::Degenerate { i: at.0, j: at.1, numerator: num });
    }
    let den_f = floor_denominator(den, denom_eps);
    let adj = Sym2::new(hess.yy, -hess.xy, hess.xx);
    let pn = Sym2::new(g0 * adj.xx + (q - 1.0) * m.xx, g0 * adj.xy + (q - 1.0) * m.xy, g0 * adj.yy + (q - 1.0) * m.yy);
    let pd = Sym2::new(g0 + weight * m.xx, weight * m.xy, g0 + weight * m.yy);
    Ok((num / den_f, diffusivity(pn, pd, num, den_f)))
}

/// Rates at every node of `field` for one explicit step.
pub(crate) fn plan(field: &HeightField, p: f64, denom_eps: f64) -> Result<Plan, FlowError> {
    let (nx, ny) = (field.nx(), field.ny());
    let (dx, dy) = (field.dx(), field.dy());
    let tol = field.flat_tol();
    let q = 1.0 / p;
    let h = field.values();
    let stationary = stationary_mask(field);
    let band = dilate(&stationary, BAND);
    let positive = h.mapv(|v| v >= tol);
    let g = h.mapv(|v| if v >= tol { v.powf(p) } else { 0.0 });
    let params = VelocityParams::for_spacing(dx.min(dy));

    let rows: Vec<(Vec<Update>, f64, f64)> = (0..nx)
        .into_par_iter()
        .map(|i| -> Result<(Vec<Update>, f64, f64), FlowError> {
            let mut row = vec![Update::Keep; ny];
            let (mut diff, mut min_den) = (0.0f64, f64::INFINITY);
            if i == 0 || i == nx - 1 {
                return Ok((row, diff, min_den));
            }
            for j in 1..ny - 1 {
                if stationary[[i, j]] {
                    continue;
                }
                if band[[i, j]] {
                    let inner = (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| positive[[a, b]]));
                    if inner {
                        let (grad, hess) = centered_derivatives(&g, i, j, dx, dy);
                        let (rate, d) = pressure_rate(g[[i, j]], grad, hess, q, tol, denom_eps, (i, j))?;
                        diff = diff.max(d);
                        row[j] = Update::Pressure { g: g[[i, j]], rate };
                    } else if positive[[i, j]] {
                        let pin = Some(g[[i, j]]);
                        let Some((g0, grad, hess)) = quadratic_fit(&g, &positive, i, j, dx, dy, pin, FIT_RADIUS)
                            .or_else(|| quadratic_fit(&g, &positive, i, j, dx, dy, pin, WIDE_FIT_RADIUS))
                        else {
                            continue;
                        };
                        let (rate, d) = pressure_rate(g0, grad, hess, q, tol, denom_eps, (i, j))?;
                        diff = diff.max(d);
                        row[j] = Update::Pressure { g: g0, rate };
                    } else if let Some((g0, grad, hess)) = quadratic_fit(&g, &positive, i, j, dx, dy, None, WIDE_FIT_RADIUS) {
                        // Only a crossing in this step changes the node, so
                        // its rate does not bound the step.
                        let (rate, _) = pressure_rate(g0, grad, hess, q, tol, denom_eps, (i, j))?;
                        row[j] = Update::Pressure { g: g0, rate };
                    }
                    continue;
                }
                let (grad, hess) = centered_derivatives(h, i, j, dx, dy);
                let (rate, den) = height_rate(grad, hess, tol, denom_eps, (i, j))?;
                harmonic_mean_velocity(principal_curvatures(grad, hess), params)?;
                if rate != 0.0 {
                    let [hx, hy] = grad;
                    let pn = Sym2::new(hess.yy, -hess.xy, hess.xx);
                    let pd = Sym2::new(1.0 + hy * hy, -hx * hy, 1.0 + hx * hx);
                    let (num, _) = graph_quotient(grad, hess);
                    diff = diff.max(diffusivity(pn, pd, num, floor_denominator(den, denom_eps)));
                    if hess.det() > 0.0 {
                        min_den = min_den.min(den.abs());
                    }
                }
                row[j] = Update::Height { rate };
            }
            Ok((row, diff, min_den))
        })
        .collect::<Result<_, _>>()?;

    let mut updates = Array2::from_elem((nx, ny), Update::Keep);
    let (mut diffusivity, mut min_denominator) = (0.0f64, f64::INFINITY);
    for (i, (row, d, m)) in rows.into_iter().enumerate() {
        for (j, u) in row.into_iter().enumerate() {
            updates[[i, j]] = u;
        }
        diffusivity = diffusivity.max(d);
        min_denominator = min_denominator.min(m);
    }
    Ok(Plan { updates, stationary, diffusivity, min_denominator })
}

/// Interior values after a step of length `dt`; the outer ring is copied.
pub(crate) fn apply(h: &Array2<f64>, plan: &Plan, dt: f64, q: f64) -> Array2<f64> {
    let mut out = h.clone();
    out.zip_mut_with(&plan.updates, |v, u| match *u {
        Update::Keep => {}
        Update::Height { rate } => *v += dt * rate,
        Update::Pressure { g, rate } => *v = (g + dt * rate).max(0.0).powf(q),
    });
    out
}
