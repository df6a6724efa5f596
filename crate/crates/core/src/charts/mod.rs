//! The global change of coordinates `Φ(u, v, w) = S(u, v) + w T(u, v)` from
//! the unit disk times an offset range, and the formulary that expresses
//! second derivatives of the height `z(x, y)` of the surface `{w = w(u, v)}`
//! through derivatives of `w`.
//!
//! Conventions. `A = [[a, b], [c, d]] = [[u_x, v_x], [u_y, v_y]]`, so that
//! `∇z = A (z_u, z_v)ᵀ`. With `J = ∂(x, y)/∂(u, v)` along the surface this is
//! `A = J⁻ᵀ` and `A⁻¹ = Jᵀ`. Subscripts `1, 2` on `w` are `u, v` derivatives.

mod expansion;
mod fd;
mod linearize;
mod printed;

pub use expansion::{second_derivative_expansion, Expansion, SecondDerivCoeffs, TargetCoeffs};
pub use fd::{fd_derivatives, fd_inverse_jacobian, fd_inverse_jacobian_derivatives, FdDerivatives};
pub use linearize::{
    linearization_structure_report, w_time_derivative, w_time_derivative_derived, CoefficientClass, LinearCoeffs,
    LinearizationReport, LinearizationSample, StructureClass,
};
pub use printed::{errata_report, printed_coefficients, ChartSample, ErrataEntry, ErrataReport, PRINTED_NAMES};

use crate::geometry::Sym2;
use nalgebra::{Matrix2, Matrix3, Vector3};
use std::f64::consts::PI;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("singular Jacobian at (u, v) = ({u}, {v}): det = {det:e}")]
    SingularJacobian { u: f64, v: f64, det: f64 },
    #[error("transversality fails: denominator {0:e}")]
    Transversality(f64),
    #[error("point ({u}, {v}, {w}) outside the chart domain")]
    Domain { u: f64, v: f64, w: f64 },
    #[error("inversion did not converge near ({x}, {y})")]
    Inversion { x: f64, y: f64 },
    #[error("zero denominator with nonzero curvature at ({u}, {v})")]
    Degenerate { u: f64, v: f64 },
    #[error("{0}")]
    Config(String),
}

/// A function of `(u, v)` with its derivatives up to second order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub f: f64,
    pub u: f64,
    pub v: f64,
    pub uu: f64,
    pub uv: f64,
    pub vv: f64,
}

impl Jet2 {
    pub fn constant(f: f64) -> Self {
        Self { f, ..Self::default() }
    }

    pub fn hessian(&self) -> Matrix2<f64> {
        Matrix2::new(self.uu, self.uv, self.uv, self.vv)
    }

    fn plus(self, o: Self) -> Self {
        Self { f: self.f + o.f, u: self.u + o.u, v: self.v + o.v, uu: self.uu + o.uu, uv: self.uv + o.uv, vv: self.vv + o.vv }
    }

    fn scale(self, k: f64) -> Self {
        Self { f: k * self.f, u: k * self.u, v: k * self.v, uu: k * self.uu, uv: k * self.uv, vv: k * self.vv }
    }

    /// Jet of a product.
    fn times(self, o: Self) -> Self {
        Self {
            f: self.f * o.f,
            u: self.u * o.f + self.f * o.u,
            v: self.v * o.f + self.f * o.v,
            uu: self.uu * o.f + 2.0 * self.u * o.u + self.f * o.uu,
            uv: self.uv * o.f + self.u * o.v + self.v * o.u + self.f * o.uv,
            vv: self.vv * o.f + 2.0 * self.v * o.v + self.f * o.vv,
        }
    }
}

/// Jet of the offset field `w(u, v)`.
pub type WJet = Jet2;

pub type VecJetFn = Arc<dyn Fn(f64, f64) -> [Jet2; 3] + Send + Sync>;

/// `Φ = S + w T` with analytic jets of `S` and `T`.
#[derive(Clone)]
pub struct ChartMap {
    pub s: VecJetFn,
    pub t: VecJetFn,
    /// `T₃` vanishes on `1 − δ ≤ |(u, v)| ≤ 1` when set.
    pub delta: Option<f64>,
    /// Offset range `|w| ≤ η`.
    pub eta: f64,
}

impl std::fmt::Debug for ChartMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChartMap").field("delta", &self.delta).field("eta", &self.eta).finish_non_exhaustive()
    }
}

fn coord(k: usize, value: f64) -> Jet2 {
    let mut j = Jet2::constant(value);
    if k == 0 {
        j.u = 1.0;
    } else {
        j.v = 1.0;
    }
    j
}

/// `A sin(k₁u + k₂v + φ)`.
fn wave(amp: f64, k1: f64, k2: f64, phase: f64, u: f64, v: f64) -> Jet2 {
    let (s, c) = (k1 * u + k2 * v + phase).sin_cos();
    Jet2 { f: amp * s, u: amp * k1 * c, v: amp * k2 * c, uu: -amp * k1 * k1 * s, uv: -amp * k1 * k2 * s, vv: -amp * k2 * k2 * s }
}

/// Quintic smoothstep of `ρ` from 1 (inside `ρ ≤ r0`) to 0 (outside `ρ ≥ r1`).
fn cutoff(r0: f64, r1: f64, u: f64, v: f64) -> Jet2 {
    let rho2 = Jet2 { f: u * u + v * v, u: 2.0 * u, v: 2.0 * v, uu: 2.0, uv: 0.0, vv: 2.0 };
    let rho = rho2.f.sqrt();
    if rho <= r0 {
        return Jet2::constant(1.0);
    }
    if rho >= r1 {
        return Jet2::constant(0.0);
    }
    // Smoothstep in s = (ρ² − r0²)/(r1² − r0²), smooth in (u, v) away from 0.
    let span = r1 * r1 - r0 * r0;
    let s = (rho2.f - r0 * r0) / span;
    let g = 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
    let g1 = -30.0 * s * s * (1.0 - s) * (1.0 - s) / span;
    let g2 = -60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (span * span);
    Jet2 {
        f: g,
        u: g1 * rho2.u,
        v: g1 * rho2.v,
        uu: g2 * rho2.u * rho2.u + g1 * rho2.uu,
        uv: g2 * rho2.u * rho2.v,
        vv: g2 * rho2.v * rho2.v + g1 * rho2.vv,
    }
}

/// Values of `Φ` and its `(u, v)` derivatives along the surface `w = w(u, v)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SurfaceJet {
    /// Total jets of `x`, `y`, `z` along the surface.
    pub total: [Jet2; 3],
    /// Partial jets at fixed `w`: `S + w T`.
    pub partial: [Jet2; 3],
    /// `T` and its first derivatives: `(x_w, y_w, z_w)` and the `uw`, `vw` mixed partials.
    pub t: [Jet2; 3],
}

impl ChartMap {
    pub fn new(
        s: impl Fn(f64, f64) -> [Jet2; 3] + Send + Sync + 'static,
        t: impl Fn(f64, f64) -> [Jet2; 3] + Send + Sync + 'static,
        delta: Option<f64>,
        eta: f64,
    ) -> Self {
        Self { s: Arc::new(s), t: Arc::new(t), delta, eta }
    }

    /// `S = (u, v, 0)`, `T = (0, 0, 1)`.
    pub fn identity() -> Self {
        Self::new(
            |u, v| [coord(0, u), coord(1, v), Jet2::constant(0.0)],
            |_, _| [Jet2::constant(0.0), Jet2::constant(0.0), Jet2::constant(1.0)],
            None,
            0.1,
        )
    }

    /// `S = (su·u, sv·v, 0)`, `T = (0, 0, 1)`.
    pub fn scaled(su: f64, sv: f64) -> Self {
        Self::new(
            move |u, v| [coord(0, u).scale(su), coord(1, v).scale(sv), Jet2::constant(0.0)],
            |_, _| [Jet2::constant(0.0), Jet2::constant(0.0), Jet2::constant(1.0)],
            None,
            0.1,
        )
    }

    /// The lower cap of the sphere of radius `r` tangent to `z = 0` at the
    /// origin, over the disk, with a vertical transverse field.
    pub fn sphere_cap(r: f64) -> Self {
        assert!(r > 1.0, "the cap must cover the unit disk");
        Self::new(
            move |u, v| {
                let q = (r * r - u * u - v * v).sqrt();
                let z = Jet2 {
                    f: r - q,
                    u: u / q,
                    v: v / q,
                    uu: 1.0 / q + u * u / (q * q * q),
                    uv: u * v / (q * q * q),
                    vv: 1.0 / q + v * v / (q * q * q),
                };
                [coord(0, u), coord(1, v), z]
            },
            |_, _| [Jet2::constant(0.0), Jet2::constant(0.0), Jet2::constant(1.0)],
            None,
            0.1 * (r - (r * r - 1.0).sqrt()).max(0.1),
        )
    }

    /// A smooth random perturbation of a convex bowl with a tilted transverse
    /// field. `x_w = T₁` vanishes when `horizontal_x` is false, as the printed
    /// coefficient lists assume.
    pub fn random(seed: u64, amplitude: f64, horizontal_x: bool) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut modes = |count: usize| -> Vec<[f64; 4]> {
            (0..count)
                .map(|_| {
                    [
                        amplitude * rng.random_range(-1.0..1.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        rng.random_range(0.0..2.0 * PI),
                    ]
                })
                .collect()
        };
        let sm: Vec<Vec<[f64; 4]>> = (0..3).map(|_| modes(3)).collect();
        let tm: Vec<Vec<[f64; 4]>> = (0..3).map(|_| modes(3)).collect();
        let sum = |ms: &[[f64; 4]], u: f64, v: f64| {
            ms.iter().fold(Jet2::default(), |acc, m| acc.plus(wave(m[0], m[1], m[2], m[3], u, v)))
        };
        let tilt = 0.3 * rng.random_range(-1.0..1.0);
        Self::new(
            move |u, v| {
                let bowl = Jet2 { f: 0.3 * (u * u + v * v), u: 0.6 * u, v: 0.6 * v, uu: 0.6, uv: 0.0, vv: 0.6 };
                [
                    coord(0, u).plus(sum(&sm[0], u, v)),
                    coord(1, v).plus(sum(&sm[1], u, v)),
                    bowl.plus(sum(&sm[2], u, v)),
                ]
            },
            move |u, v| {
                let t1 = if horizontal_x { sum(&tm[0], u, v) } else { Jet2::default() };
                [t1, Jet2::constant(tilt).plus(sum(&tm[1], u, v)), Jet2::constant(1.0).plus(sum(&tm[2], u, v))]
            },
            None,
            0.05,
        )
    }

    /// A steep plane `S = (u, v, 2v)` whose transverse field turns horizontal
    /// on the annulus `ρ ≥ 1 − δ`: `T = (0, −(1 − χ), χ)` with a smooth cutoff
    /// `χ`. Transverse everywhere since `T·(0, −2, 1) = 2 − χ > 0`.
    pub fn steep_rim(delta: f64) -> Self {
        let (r0, r1) = (1.0 - 3.0 * delta, 1.0 - delta);
        Self::new(
            |u, v| [coord(0, u), coord(1, v), coord(1, v).scale(2.0)],
            move |u, v| {
                let chi = cutoff(r0, r1, u, v);
                [Jet2::default(), chi.plus(Jet2::constant(-1.0)), chi]
            },
            Some(delta),
            0.1,
        )
    }

    pub(crate) fn surface_jet(&self, u: f64, v: f64, w: &WJet) -> SurfaceJet {
        let s = (self.s)(u, v);
        let t = (self.t)(u, v);
        let wf = Jet2::constant(w.f);
        let partial = [0, 1, 2].map(|k| s[k].plus(t[k].times(wf)));
        let total = [0, 1, 2].map(|k| s[k].plus(t[k].times(*w)));
        SurfaceJet { total, partial, t }
    }

    /// Checks the domain, `T₃ = 0` on the annulus and `|det J| ≥ 1e−8` at the samples.
    pub fn validate(&self, samples: &[(f64, f64, WJet)]) -> Result<(), ChartError> {
        for (u, v, w) in samples {
            if u.hypot(*v) > 1.0 + 1e-12 || w.f.abs() > self.eta + 1e-12 {
                return Err(ChartError::Domain { u: *u, v: *v, w: w.f });
            }
            if let Some(delta) = self.delta {
                if u.hypot(*v) >= 1.0 - delta && (self.t)(*u, *v)[2].f.abs() > 1e-14 {
                    return Err(ChartError::Config(format!("T3 does not vanish on the annulus at ({u}, {v})")));
                }
            }
            evaluate_chart(self, *u, *v, w)?;
        }
        Ok(())
    }

    /// `η = 0.1 × (smallest focal distance of S)`, the focal distance capped
    /// at the disk radius, estimated on a polar sample grid.
    pub fn default_eta(&self) -> f64 {
        let mut kmax: f64 = 1.0;
        for i in 0..=8 {
            let rho = 0.99 * i as f64 / 8.0;
            for j in 0..16 {
                let th = 2.0 * PI * j as f64 / 16.0;
                kmax = kmax.max(max_curvature(&(self.s)(rho * th.cos(), rho * th.sin())));
            }
        }
        0.1 / kmax
    }
}

/// Largest absolute principal curvature of a parametrised surface.
fn max_curvature(s: &[Jet2; 3]) -> f64 {
    let su = Vector3::new(s[0].u, s[1].u, s[2].u);
    let sv = Vector3::new(s[0].v, s[1].v, s[2].v);
    let n = su.cross(&sv);
    let nn = n.norm();
    if nn == 0.0 {
        return f64::INFINITY;
    }
    let n = n / nn;
    let second = |f: fn(&Jet2) -> f64| Vector3::new(f(&s[0]), f(&s[1]), f(&s[2])).dot(&n);
    let ii = Matrix2::new(second(|j| j.uu), second(|j| j.uv), second(|j| j.uv), second(|j| j.vv));
    let first = Matrix2::new(su.dot(&su), su.dot(&sv), su.dot(&sv), sv.dot(&sv));
    let shape = first.try_inverse().map(|fi| fi * ii);
    match shape {
        Some(m) => {
            let tr = m.trace();
            let det = m.determinant();
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            (0.5 * tr).abs() + disc
        }
        None => f64::INFINITY,
    }
}

/// Everything the formulary needs at one point of the surface.
#[derive(Clone, Copy, Debug)]
pub struct ChartFrame {
    pub point: [f64; 3],
    /// `[[a, b], [c, d]] = [[u_x, v_x], [u_y, v_y]]`.
    pub a: Matrix2<f64>,
    /// `Jᵀ = [[x_u, y_u], [x_v, y_v]]`.
    pub a_inv: Matrix2<f64>,
    /// `∂A⁻¹/∂x` and `∂A⁻¹/∂y`.
    pub b1: Matrix2<f64>,
    pub b2: Matrix2<f64>,
    pub d2u: Sym2,
    pub d2v: Sym2,
}

/// Evaluates `Φ`, `A`, `A⁻¹`, `B₁`, `B₂`, `D²u`, `D²v` on the surface
/// `w = w(u, v)` at `(u, v)`. A constant jet gives the fixed-`w` frame.
pub fn evaluate_chart(chart: &ChartMap, u: f64, v: f64, w: &WJet) -> Result<ChartFrame, ChartError> {
    let sj = chart.surface_jet(u, v, w);
    let [x, y, z] = sj.total;
    let j = Matrix2::new(x.u, x.v, y.u, y.v);
    let det = j.determinant();
    if !(det.abs() >= 1e-8) {
        return Err(ChartError::SingularJacobian { u, v, det });
    }
    let a_inv = j.transpose();
    let a = a_inv.try_inverse().ok_or(ChartError::SingularJacobian { u, v, det })?;
    let (aa, bb, cc, dd) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let b1 = Matrix2::new(aa * x.uu + bb * x.uv, aa * y.uu + bb * y.uv, aa * x.uv + bb * x.vv, aa * y.uv + bb * y.vv);
    let b2 = Matrix2::new(cc * x.uu + dd * x.uv, cc * y.uu + dd * y.uv, cc * x.uv + dd * x.vv, cc * y.uv + dd * y.vv);
    let grad_u = nalgebra::Vector2::new(aa, cc);
    let grad_v = nalgebra::Vector2::new(bb, dd);
    let (col_u1, col_v1) = (-a * b1 * grad_u, -a * b1 * grad_v);
    let (col_u2, col_v2) = (-a * b2 * grad_u, -a * b2 * grad_v);
    // (a1, c1) and (a2, c2) are the x and y columns of D²u; a2 = c1 up to roundoff.
    let d2u = Sym2::new(col_u1[0], 0.5 * (col_u1[1] + col_u2[0]), col_u2[1]);
    let d2v = Sym2::new(col_v1[0], 0.5 * (col_v1[1] + col_v2[0]), col_v2[1]);
    Ok(ChartFrame { point: [x.f, y.f, z.f], a, a_inv, b1, b2, d2u, d2v })
}

/// `DΦ` at fixed `w`: columns `∂_u Φ`, `∂_v Φ`, `T`.
pub fn jacobian3(chart: &ChartMap, u: f64, v: f64, w: f64) -> Matrix3<f64> {
    let sj = chart.surface_jet(u, v, &WJet::constant(w));
    let p = sj.partial;
    Matrix3::new(p[0].u, p[0].v, sj.t[0].f, p[1].u, p[1].v, sj.t[1].f, p[2].u, p[2].v, sj.t[2].f)
}
