//! Second derivatives of `z(x, y)` by the chain rule.
//!
//! Along the surface, `D²z = A (D²Z − z_x D²X − z_y D²Y) Aᵀ` with `X, Y, Z`
//! the total `(u, v)` jets of `Φ(u, v, w(u, v))`. Holding `A` fixed, the
//! bracket is `G D²w` plus a quadratic polynomial in `(w₁, w₂)`, where
//! `G = z_w − z_x x_w − z_y y_w`; that polynomial's coefficients are the
//! nine per target.

use super::{evaluate_chart, ChartError, ChartFrame, ChartMap, Jet2, WJet};
use crate::geometry::Sym2;
use nalgebra::Matrix2;
use serde::Serialize;

/// `A₁₁ w₁₁ + A₁₂ w₁₂ + A₂₂ w₂₂ + B₁ w₁ + B₂ w₂ + B₁₂ w₁w₂ + B₁₁ w₁² + B₂₂ w₂² + C`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TargetCoeffs {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub b12: f64,
    pub b11: f64,
    pub b22: f64,
    pub c: f64,
}

impl TargetCoeffs {
    pub fn evaluate(&self, w: &WJet) -> f64 {
        self.a11 * w.uu
            + self.a12 * w.uv
            + self.a22 * w.vv
            + self.b1 * w.u
            + self.b2 * w.v
            + self.b12 * w.u * w.v
            + self.b11 * w.u * w.u
            + self.b22 * w.v * w.v
            + self.c
    }

    pub fn as_array(&self) -> [f64; 9] {
        [self.a11, self.a12, self.a22, self.b1, self.b2, self.b12, self.b11, self.b22, self.c]
    }
}

/// Coefficients for `z_xx`, `z_yy` and `z_xy`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SecondDerivCoeffs {
    pub xx: TargetCoeffs,
    pub yy: TargetCoeffs,
    pub xy: TargetCoeffs,
}

impl SecondDerivCoeffs {
    pub fn evaluate(&self, w: &WJet) -> Sym2 {
        Sym2::new(self.xx.evaluate(w), self.xy.evaluate(w), self.yy.evaluate(w))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Expansion {
    pub frame: ChartFrame,
    /// `(z_x, z_y)`.
    pub grad: [f64; 2],
    pub hess: Sym2,
    pub coeffs: SecondDerivCoeffs,
    /// `(x_w, y_w, z_w) = T`.
    pub transverse: [f64; 3],
}

fn e1(t: &Jet2) -> Matrix2<f64> {
    Matrix2::new(2.0 * t.u, t.v, t.v, 0.0)
}

fn e2(t: &Jet2) -> Matrix2<f64> {
    Matrix2::new(0.0, t.u, t.u, 2.0 * t.v)
}

fn sandwich(a: &Matrix2<f64>, m: &Matrix2<f64>, i: usize, j: usize) -> f64 {
    (a * m * a.transpose())[(i, j)]
}

pub fn second_derivative_expansion(chart: &ChartMap, u: f64, v: f64, w: &WJet) -> Result<Expansion, ChartError> {
    let frame = evaluate_chart(chart, u, v, w)?;
    let sj = chart.surface_jet(u, v, w);
    let [x, y, z] = sj.total;
    let [px, py, pz] = sj.partial;
    let [t1, t2, t3] = sj.t;
    let a = frame.a;
    let grad = [a[(0, 0)] * z.u + a[(0, 1)] * z.v, a[(1, 0)] * z.u + a[(1, 1)] * z.v];
    let bracket = z.hessian() - grad[0] * x.hessian() - grad[1] * y.hessian();
    let full = a * bracket * a.transpose();
    let hess = Sym2::new(full[(0, 0)], 0.5 * (full[(0, 1)] + full[(1, 0)]), full[(1, 1)]);

    // z_x = α0 + α1 w1 + α2 w2 and z_y = β0 + β1 w1 + β2 w2 with A frozen.
    let alpha = [a[(0, 0)] * pz.u + a[(0, 1)] * pz.v, a[(0, 0)] * t3.f, a[(0, 1)] * t3.f];
    let beta = [a[(1, 0)] * pz.u + a[(1, 1)] * pz.v, a[(1, 0)] * t3.f, a[(1, 1)] * t3.f];
    let g = t3.f - grad[0] * t1.f - grad[1] * t2.f;
    let (p1, p2, p3) = (px.hessian(), py.hessian(), pz.hessian());
    let n0 = p3 - p1 * alpha[0] - p2 * beta[0];
    let n1 = e1(&t3) - p1 * alpha[1] - e1(&t1) * alpha[0] - p2 * beta[1] - e1(&t2) * beta[0];
    let n2 = e2(&t3) - p1 * alpha[2] - e2(&t1) * alpha[0] - p2 * beta[2] - e2(&t2) * beta[0];
    let n11 = -(e1(&t1) * alpha[1] + e1(&t2) * beta[1]);
    let n22 = -(e2(&t1) * alpha[2] + e2(&t2) * beta[2]);
    let n12 = -(e2(&t1) * alpha[1] + e1(&t1) * alpha[2] + e2(&t2) * beta[1] + e1(&t2) * beta[2]);
    let target = |i: usize, j: usize| TargetCoeffs {
        a11: a[(i, 0)] * a[(j, 0)] * g,
        a12: (a[(i, 0)] * a[(j, 1)] + a[(i, 1)] * a[(j, 0)]) * g,
        a22: a[(i, 1)] * a[(j, 1)] * g,
        b1: sandwich(&a, &n1, i, j),
        b2: sandwich(&a, &n2, i, j),
        b12: sandwich(&a, &n12, i, j),
        b11: sandwich(&a, &n11, i, j),
        b22: sandwich(&a, &n22, i, j),
        c: sandwich(&a, &n0, i, j),
    };
    let coeffs = SecondDerivCoeffs { xx: target(0, 0), yy: target(1, 1), xy: target(0, 1) };
    Ok(Expansion { frame, grad, hess, coeffs, transverse: [t1.f, t2.f, t3.f] })
}
