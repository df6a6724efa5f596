//! The reference coefficient lists, transcribed literally,
//! and the errata report comparing them with the chain rule.
//!
//! The printed lists assume `x_w = T₁ = 0`. Symbols: `a, b, c, d` are the
//! entries of `A` on the surface; `x_uu, y_uv, z_u, ...` are partial
//! derivatives of `S + wT` at fixed `w`; `y_w = T₂`, `z_w = T₃`,
//! `y_uw = ∂_u T₂` and so on; `w1, w2` are `w_u, w_v`.

use super::expansion::{second_derivative_expansion, SecondDerivCoeffs, TargetCoeffs};
use super::fd::fd_derivatives;
use super::{ChartError, ChartMap, WJet};
use rand::{Rng, SeedableRng};
use serde::Serialize;
use std::sync::Arc;

/// Names in the order of [`TargetCoeffs::as_array`], for `z_xx`, `z_yy`, `z_xy`.
pub const PRINTED_NAMES: [[&str; 9]; 3] = [
    ["A^1_11", "A^1_12", "A^1_22", "B^1_1", "B^1_2", "B^1_12", "B^1_11", "B^1_22", "C_1"],
    ["A^2_11", "A^2_12", "A^2_22", "B^2_1", "B^2_2", "B^2_12", "B^2_11", "B^2_22", "C_2"],
    ["A^0_11", "A^0_12", "A^0_22", "B^0_1", "B^0_2", "B^0_12", "B^0_11", "B^0_22", "C^0"],
];

const TARGETS: [&str; 3] = ["z_xx", "z_yy", "z_xy"];

pub fn printed_coefficients(chart: &ChartMap, u: f64, v: f64, w: &WJet) -> Result<SecondDerivCoeffs, ChartError> {
    let ex = second_derivative_expansion(chart, u, v, w)?;
    let sj = chart.surface_jet(u, v, w);
    let [px, py, pz] = sj.partial;
    let [t1, t2, t3] = sj.t;
    if t1.f.abs() > 1e-14 || t1.u.abs() > 1e-14 || t1.v.abs() > 1e-14 {
        return Err(ChartError::Config("the printed coefficients assume x_w = 0".into()));
    }
    let m = ex.frame.a;
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let (x_uu, x_uv) = (px.uu, px.uv);
    let (y_uu, y_uv, y_vv) = (py.uu, py.uv, py.vv);
    let (y_w, y_uw, y_vw) = (t2.f, t2.u, t2.v);
    let (z_u, z_v, z_w) = (pz.u, pz.v, t3.f);
    let (z_uu, z_uv, z_vv) = (pz.uu, pz.uv, pz.vv);
    let (z_uw, z_vw) = (t3.u, t3.v);
    let (w1, w2) = (w.u, w.v);

    let k = -z_w + b * y_w * (z_u + w1 * z_w) + d * y_w * (z_v + w2 * z_w);
    let xx = TargetCoeffs {
        a11: -a * a * k,
        a22: -b * b * k,
        a12: -2.0 * a * b * k,
        b11: -2.0 * a * b * (a * y_uw + b * y_vw),
        b22: -2.0 * b * d * (a * y_uw + b * y_vw),
        b12: -2.0 * (b * b + a * d) * (a * y_uw + b * y_vw) * z_w,
        b1: -2.0 * a * (a * (b * y_uw * z_u - z_uw + d * y_uw * z_v) + b * (b * y_vw * z_u + d * y_vw * z_v - z_vw))
            - (a * a * a * x_uu
                + a * a * b * (2.0 * x_uv + y_uu)
                + a * b * b * (x_uv + 2.0 * y_uv)
                + b * b * b * y_vv)
                * z_w,
        b2: -a * a * (c * x_uu + d * y_uu) * z_w
            - 2.0 * a * b * (b * y_uw * z_u - z_uw + d * y_uw * z_v + c * x_uv * z_w + d * y_uv * z_w)
            - b * b * (2.0 * b * y_vw * z_u + 2.0 * d * y_vw * z_v - 2.0 * z_vw + c * x_uv * z_w + d * y_vv * z_w),
        c: -a * a * a * x_uu * z_u
            - a * a * (b * (2.0 * x_uv + y_uu) * z_u - z_uu + c * x_uu * z_v + d * y_uu * z_v)
            - a * b * (b * (x_uv + 2.0 * y_uv) * z_u - 2.0 * z_uv + 2.0 * (c * x_uv + d * y_uv) * z_v)
            - b * b * (b * y_vv * z_u + c * x_uv * z_v + d * y_vv * z_v - z_vv),
    };
    let yy = TargetCoeffs {
        a11: c * c * (z_w - d * y_w * (z_v + w2 * z_w)),
        a22: d * d * (z_w - d * y_w * (z_v + w2 * z_w)),
        a12: -2.0 * c * d * (-z_w + d * y_w * (z_v + w2 * z_w)),
        b11: 0.0,
        b22: -2.0 * d * d * (c * y_uw + d * y_vw) * z_w,
        b12: -2.0 * c * d * (c * y_uw + d * y_vw) * z_w,
        // The printed parentheses are unbalanced; read as 2c[(...) + (...)] − a d² x_uv z_w.
        b1: 2.0 * c * (c * (z_uw - d * y_uw * z_v) + d * (-d * y_vw * z_v + z_vw)) - a * d * d * x_uv * z_w,
        b2: -2.0 * d * (-c * z_uw + c * d * y_uw * z_v + d * d * y_vw * z_v - d * z_vw)
            - (c * c * c * x_uu
                + c * c * d * (2.0 * x_uv + y_uu)
                + c * d * d * (x_uv + 2.0 * y_uv)
                + d * d * d * y_vv)
                * z_w,
        c: -a * d * d * x_uv * z_u - c * c * c * x_uu * z_v
            + c * c * (z_uu - d * (2.0 * x_uv + y_uu) * z_v)
            + c * d * (2.0 * z_uv - d * (x_uv + 2.0 * y_uv) * z_v)
            + d * d * (-d * y_vv * z_v + z_vv),
    };
    let mixed = -b * (2.0 * a * c * y_uw + b * c * y_vw + a * d * y_vw) * z_w;
    let xy = TargetCoeffs {
        a11: -a * c * k,
        a22: -b * d * k,
        a12: mixed,
        b11: mixed,
        b22: -d * (b * c * y_uw + a * d * y_uw + 2.0 * b * d * y_vw) * z_w,
        b12: -((b * b * c + a * (b + 2.0 * c) * d) * y_uw + d * (b * (2.0 * b + c) + a * d) * y_vw) * z_w,
        b1: -a * a * (c * x_uu + d * x_uv) * z_w
            - b * (b * c * y_vw * z_u + c * d * y_vw * z_v - c * z_vw + b * c * y_uv * z_w + b * d * y_vv * z_w)
            - a * (-2.0 * c * z_uw + 2.0 * c * d * y_uw * z_v + d * d * y_vw * z_v - d * z_vw
                + b * (2.0 * c * y_uw * z_u
                    + d * y_vw * z_u
                    + c * (x_uv + y_uu) * z_w
                    + d * (x_uv + y_uv) * z_w)),
        b2: -b * b * (c * y_uw + 2.0 * d * y_vw) * z_u
            - b * (-c * z_uw
                + d * (a * y_uw * z_u + c * y_uw * z_v + 2.0 * d * y_vw * z_v - 2.0 * z_vw)
                + (c * (c + d) * x_uv + c * d * y_uv + d * d * y_vv) * z_w)
            - a * (c * c * x_uu * z_w + d * (-z_uw + c * (x_uv + y_uu) * z_w + d * (y_uw * z_v + y_uv * z_w))),
        c: -a * a * (c * x_uu + d * x_uv) * z_u
            - a * (b * (c * (x_uv + y_uu) + d * (x_uv + y_uv)) * z_u - c * z_uu
                + c * c * x_uu * z_v
                + c * d * (x_uv + y_uu) * z_v
                + d * (-z_uv + d * y_uv * z_v))
            - b * (b * (c * y_uv + d * y_vv) * z_u - c * z_uv
                + c * c * x_uv * z_v
                + c * d * (x_uv + y_uv) * z_v
                + d * (d * y_vv * z_v - z_vv)),
    };
    Ok(SecondDerivCoeffs { xx, yy, xy })
}

/// A chart, an offset field and a sample point.
#[derive(Clone)]
pub struct ChartSample {
    pub chart: ChartMap,
    pub field: Arc<dyn Fn(f64, f64) -> WJet + Send + Sync>,
    pub u: f64,
    pub v: f64,
}

impl ChartSample {
    /// Random chart with `T₁ = 0` (as the printed lists need), random
    /// sinusoidal offset and a random point in the disk of radius 0.7.
    pub fn random(seed: u64) -> Self {
        let (u, v) = random_point(seed);
        Self { chart: ChartMap::random(seed, 0.05, false), field: random_field(seed), u, v }
    }
}

/// `w = c0 + A sin(k1 u + k2 v + φ)` with random parameters, `|w| ≤ 0.04`.
pub(crate) fn random_field(seed: u64) -> Arc<dyn Fn(f64, f64) -> WJet + Send + Sync> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let c0 = rng.random_range(-0.02..0.02);
    let amp = rng.random_range(-0.02..0.02);
    let (k1, k2, ph) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..6.0));
    Arc::new(move |u, v| {
        let (s, c) = (k1 * u + k2 * v + ph).sin_cos();
        WJet { f: c0 + amp * s, u: amp * k1 * c, v: amp * k2 * c, uu: -amp * k1 * k1 * s, uv: -amp * k1 * k2 * s, vv: -amp * k2 * k2 * s }
    })
}

pub(crate) fn random_point(seed: u64) -> (f64, f64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xa11);
    let (r, th) = (0.7 * rng.random_range(0.0f64..1.0).sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
    (r * th.cos(), r * th.sin())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrataEntry {
    pub name: String,
    pub target: String,
    /// Printed and chain-rule values at the worst sample.
    pub printed_value: f64,
    pub oracle_value: f64,
    /// Largest `|printed − oracle| / (1 + |oracle|)` over the samples.
    pub discrepancy: f64,
    pub failing_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrataReport {
    pub samples: usize,
    pub tolerance: f64,
    /// Printed coefficients that disagree with the chain rule.
    pub failing: Vec<ErrataEntry>,
    pub passing: Vec<String>,
    /// Printed expansions against the finite-difference oracle, per target.
    pub printed_totals: Vec<ErrataEntry>,
    /// Chain-rule expansions against the finite-difference oracle, per target.
    pub derived_totals: Vec<ErrataEntry>,
    /// Structural errata that are not single coefficients.
    pub notes: Vec<String>,
}

impl ErrataReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn relative(printed: f64, oracle: f64) -> f64 {
    (printed - oracle).abs() / (1.0 + oracle.abs())
}

#[derive(Default)]
struct Tally {
    worst: f64,
    printed: f64,
    oracle: f64,
    failing: usize,
}

impl Tally {
    fn add(&mut self, printed: f64, oracle: f64, tol: f64) {
        let r = relative(printed, oracle);
        if r > tol || !r.is_finite() {
            self.failing += 1;
        }
        if r > self.worst || !r.is_finite() {
            (self.worst, self.printed, self.oracle) = (r, printed, oracle);
        }
    }

    fn entry(&self, name: &str, target: &str) -> ErrataEntry {
        ErrataEntry {
            name: name.into(),
            target: target.into(),
            printed_value: self.printed,
            oracle_value: self.oracle,
            discrepancy: self.worst,
            failing_samples: self.failing,
        }
    }
}

/// Compares every printed coefficient with the chain rule, and both
/// expansions with the finite-difference oracle (step `h`, Richardson).
pub fn errata_report(samples: &[ChartSample], tol: f64, h: f64) -> Result<ErrataReport, ChartError> {
    let mut coeff: Vec<Vec<Tally>> = (0..3).map(|_| (0..9).map(|_| Tally::default()).collect()).collect();
    let mut printed_tot: Vec<Tally> = (0..3).map(|_| Tally::default()).collect();
    let mut derived_tot: Vec<Tally> = (0..3).map(|_| Tally::default()).collect();
    for s in samples {
        let w = (s.field)(s.u, s.v);
        let derived = second_derivative_expansion(&s.chart, s.u, s.v, &w)?.coeffs;
        let printed = printed_coefficients(&s.chart, s.u, s.v, &w)?;
        let fd = fd_derivatives(&s.chart, &*s.field, s.u, s.v, h, true)?;
        let oracle = [fd.hess.xx, fd.hess.yy, fd.hess.xy];
        for (k, (p, d)) in [(printed.xx, derived.xx), (printed.yy, derived.yy), (printed.xy, derived.xy)]
            .into_iter()
            .enumerate()
        {
            for (i, (pv, dv)) in p.as_array().into_iter().zip(d.as_array()).enumerate() {
                coeff[k][i].add(pv, dv, tol);
            }
            printed_tot[k].add(p.evaluate(&w), oracle[k], tol);
            derived_tot[k].add(d.evaluate(&w), oracle[k], tol);
        }
    }
    let mut failing = Vec::new();
    let mut passing = Vec::new();
    for k in 0..3 {
        for i in 0..9 {
            let name = PRINTED_NAMES[k][i];
            if coeff[k][i].failing > 0 {
                failing.push(coeff[k][i].entry(name, TARGETS[k]));
            } else {
                passing.push(name.to_string());
            }
        }
    }
    let totals = |t: &[Tally], tag: &str| -> Vec<ErrataEntry> {
        (0..3).map(|k| t[k].entry(&format!("{tag} {}", TARGETS[k]), TARGETS[k])).collect()
    };
    Ok(ErrataReport {
        samples: samples.len(),
        tolerance: tol,
        failing,
        passing,
        printed_totals: totals(&printed_tot, "printed"),
        derived_totals: totals(&derived_tot, "derived"),
        notes: vec![
            "A^{-1} is displayed as [[x_u, x_v], [y_u, y_v]]; the B1, B2 formulas and A = [[u_x, v_x], [u_y, v_y]] require its transpose [[x_u, y_u], [x_v, y_v]]".into(),
            "the fourth D^2u/D^2v identity is labelled (b2, c2); it yields (b2, d2)".into(),
            "B^2_1 has unbalanced parentheses; transcribed as 2c[c(z_uw - d y_uw z_v) + d(z_vw - d y_vw z_v)] - a d^2 x_uv z_w".into(),
            "the printed lists omit x_w = T1 terms and so assume T1 = 0".into(),
            "w_t = z_t / (z_y y_w - z_w) has the opposite sign to the chain rule w_t = z_t / (z_w - z_x x_w - z_y y_w)".into(),
        ],
    })
}
