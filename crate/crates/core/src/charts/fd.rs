//! Finite-difference oracle: invert the map numerically and difference the
//! height of the composed surface.

use super::{ChartError, ChartMap, WJet};
use crate::geometry::Sym2;
use nalgebra::{Matrix2, Vector2};

/// `(u, v)` with `(x, y)(u, v) = target` on the surface, by Newton from `start`.
fn invert(
    chart: &ChartMap,
    field: &dyn Fn(f64, f64) -> WJet,
    target: [f64; 2],
    start: [f64; 2],
) -> Result<[f64; 2], ChartError> {
    let mut uv = Vector2::new(start[0], start[1]);
    for _ in 0..60 {
        let sj = chart.surface_jet(uv[0], uv[1], &field(uv[0], uv[1]));
        let [x, y, _] = sj.total;
        let r = Vector2::new(x.f - target[0], y.f - target[1]);
        let j = Matrix2::new(x.u, x.v, y.u, y.v);
        let step = j.lu().solve(&r).ok_or(ChartError::Inversion { x: target[0], y: target[1] })?;
        uv -= step;
        if step.norm() <= 1e-15 * (1.0 + uv.norm()) {
            return Ok([uv[0], uv[1]]);
        }
    }
    Err(ChartError::Inversion { x: target[0], y: target[1] })
}

/// Central-difference gradient and Hessian of `z(x, y)` on the surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdDerivatives {
    pub grad: [f64; 2],
    pub hess: Sym2,
}

fn stencil(f: &dyn Fn(f64, f64) -> Result<f64, ChartError>, x: f64, y: f64, h: f64) -> Result<FdDerivatives, ChartError> {
    let c = f(x, y)?;
    let (xp, xm) = (f(x + h, y)?, f(x - h, y)?);
    let (yp, ym) = (f(x, y + h)?, f(x, y - h)?);
    let (pp, pm, mp, mm) = (f(x + h, y + h)?, f(x + h, y - h)?, f(x - h, y + h)?, f(x - h, y - h)?);
    Ok(FdDerivatives {
        grad: [(xp - xm) / (2.0 * h), (yp - ym) / (2.0 * h)],
        hess: Sym2::new(
            (xp - 2.0 * c + xm) / (h * h),
            (pp - pm - mp + mm) / (4.0 * h * h),
            (yp - 2.0 * c + ym) / (h * h),
        ),
    })
}

fn combine(a: FdDerivatives, b: FdDerivatives, ka: f64, kb: f64) -> FdDerivatives {
    FdDerivatives {
        grad: [ka * a.grad[0] + kb * b.grad[0], ka * a.grad[1] + kb * b.grad[1]],
        hess: Sym2::new(
            ka * a.hess.xx + kb * b.hess.xx,
            ka * a.hess.xy + kb * b.hess.xy,
            ka * a.hess.yy + kb * b.hess.yy,
        ),
    }
}

/// Derivatives of the height of `{w = field(u, v)}` at the image of
/// `(u0, v0)`, with step `h` in `(x, y)`. With `richardson` the steps `h` and
/// `h/2` are combined to fourth order.
pub fn fd_derivatives(
    chart: &ChartMap,
    field: &dyn Fn(f64, f64) -> WJet,
    u0: f64,
    v0: f64,
    h: f64,
    richardson: bool,
) -> Result<FdDerivatives, ChartError> {
    let p = chart.surface_jet(u0, v0, &field(u0, v0)).total;
    let height = |x: f64, y: f64| -> Result<f64, ChartError> {
        let [u, v] = invert(chart, field, [x, y], [u0, v0])?;
        Ok(chart.surface_jet(u, v, &field(u, v)).total[2].f)
    };
    let coarse = stencil(&height, p[0].f, p[1].f, h)?;
    if !richardson {
        return Ok(coarse);
    }
    let fine = stencil(&height, p[0].f, p[1].f, 0.5 * h)?;
    Ok(combine(fine, coarse, 4.0 / 3.0, -1.0 / 3.0))
}

/// `A = [[u_x, v_x], [u_y, v_y]]` by central differences of the inverse of
/// `(u, v) ↦ (x, y)` at fixed `w`.
pub fn fd_inverse_jacobian(chart: &ChartMap, u0: f64, v0: f64, w: f64, h: f64) -> Result<Matrix2<f64>, ChartError> {
    let field = move |_: f64, _: f64| WJet::constant(w);
    let p = chart.surface_jet(u0, v0, &WJet::constant(w)).total;
    let at = |dx: f64, dy: f64| invert(chart, &field, [p[0].f + dx, p[1].f + dy], [u0, v0]);
    let (xp, xm, yp, ym) = (at(h, 0.0)?, at(-h, 0.0)?, at(0.0, h)?, at(0.0, -h)?);
    let d = |a: [f64; 2], b: [f64; 2], k: usize| (a[k] - b[k]) / (2.0 * h);
    Ok(Matrix2::new(d(xp, xm, 0), d(xp, xm, 1), d(yp, ym, 0), d(yp, ym, 1)))
}

/// `(∂A⁻¹/∂x, ∂A⁻¹/∂y)` by central differences along the surface, where
/// `A⁻¹ = [[x_u, y_u], [x_v, y_v]]`.
pub fn fd_inverse_jacobian_derivatives(
    chart: &ChartMap,
    field: &dyn Fn(f64, f64) -> WJet,
    u0: f64,
    v0: f64,
    h: f64,
) -> Result<(Matrix2<f64>, Matrix2<f64>), ChartError> {
    let p = chart.surface_jet(u0, v0, &field(u0, v0)).total;
    let a_inv = |dx: f64, dy: f64| -> Result<Matrix2<f64>, ChartError> {
        let [u, v] = invert(chart, field, [p[0].f + dx, p[1].f + dy], [u0, v0])?;
        let [x, y, _] = chart.surface_jet(u, v, &field(u, v)).total;
        Ok(Matrix2::new(x.u, y.u, x.v, y.v))
    };
    let bx = (a_inv(h, 0.0)? - a_inv(-h, 0.0)?) / (2.0 * h);
    let by = (a_inv(0.0, h)? - a_inv(0.0, -h)?) / (2.0 * h);
    Ok((bx, by))
}
