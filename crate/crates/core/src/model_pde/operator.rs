use super::coefficients::{derived_c, printed_c_bracket, CoefficientSet, ModelCoefficients, TraceValues, TransformedCoefficients};
use super::ModelError;
use crate::analysis::LogField;
use crate::grid::{is_strictly_increasing, SpaceTimeField, Stencil3};
use ndarray::{Array2, Array3};
use serde::Serialize;

/// The trace `f°` over `(y, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Array2<f64>,
}

/// `f̃` over `(w, y, t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TildeField {
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Array3<f64>,
}

impl BoundaryField {
    pub fn from_fn(y: Vec<f64>, t: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((y.len(), t.len()), |(b, c)| f(y[b], t[c]));
        Self { y, t, values }
    }

    /// The trace and its `y` derivatives at node `(b, c)`: centred inside,
    /// one-sided at the ends of the axis.
    pub fn trace_at(&self, b: usize, c: usize) -> TraceValues {
        let s = Stencil3::at(&self.y, b);
        let f = |k: usize| self.values[[k, c]];
        TraceValues { f: f(b), f_y: s.apply1(f), f_yy: s.apply2(f) }
    }
}

impl TildeField {
    pub fn from_fn(w: Vec<f64>, y: Vec<f64>, t: Vec<f64>, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = Array3::from_shape_fn((w.len(), y.len(), t.len()), |(a, b, c)| f(w[a], y[b], t[c]));
        Self { w, y, t, values }
    }
}

fn need_axis(name: &str, axis: &[f64], min: usize) -> Result<(), ModelError> {
    if axis.len() < min || !is_strictly_increasing(axis) {
        return Err(ModelError::Stencil(format!(
            "{name} axis needs at least {min} strictly increasing nodes, has {}",
            axis.len()
        )));
    }
    Ok(())
}

/// Residual `L f` at every node with stencil room.
///
/// The `z` derivatives at `z > 0` are taken in `w = ln z` through
/// `z f_z = f_w`, `z² f_zz = f_ww − f_w` and `z f_zy = f_wy`, centred on the
/// positive nodes, so the non-smooth `z^p` behaviour at the trace never
/// enters a stencil. On the trace node `z = 0` the `z` terms vanish and the
/// residual is that of the trace equation. Output nodes: the trace (if
/// present) and the positive `z` nodes with a positive neighbour on each
/// side; interior `y` nodes; every `t` node, one-sided at the ends.
pub fn apply_model_operator(coeffs: &ModelCoefficients, f: &SpaceTimeField) -> Result<SpaceTimeField, ModelError> {
    f.validate().map_err(ModelError::Stencil)?;
    need_axis("y", &f.y, 3)?;
    need_axis("t", &f.t, 3)?;
    let pos: Vec<usize> = (0..f.z.len()).filter(|&a| f.z[a] > 0.0).collect();
    let lw: Vec<f64> = pos.iter().map(|&a| f.z[a].ln()).collect();
    let mut rows: Vec<(usize, Option<usize>)> = Vec::new();
    if f.has_trace() {
        rows.push((0, None));
    }
    if pos.len() >= 3 {
        rows.extend((1..pos.len() - 1).map(|k| (pos[k], Some(k))));
    }
    if rows.is_empty() {
        return Err(ModelError::Stencil("no z node with stencil room".into()));
    }
    let (_, ny, nt) = f.dim();
    let mut out = Array3::zeros((rows.len(), ny - 2, nt));
    for (r, &(a, k)) in rows.iter().enumerate() {
        let sw = k.map(|k| Stencil3::at(&lw, k));
        for b in 1..ny - 1 {
            let sy = Stencil3::at(&f.y, b);
            for c in 0..nt {
                let st = Stencil3::at(&f.t, c);
                let v = |a: usize, b: usize, c: usize| f.values[[a, b, c]];
                let f_t = st.apply1(|m| v(a, b, m));
                let f_y = sy.apply1(|m| v(a, m, c));
                let f_yy = sy.apply2(|m| v(a, m, c));
                let co = coeffs.at(f.z[a], f.y[b], f.t[c]);
                let mut rhs = co.a22 * f_yy + co.b2 * f_y + co.c * v(a, b, c);
                if let Some(sw) = sw {
                    let f_w = sw.apply1(|m| v(pos[m], b, c));
                    let f_ww = sw.apply2(|m| v(pos[m], b, c));
                    let f_wy = sy.apply1(|n| sw.apply1(|m| v(pos[m], n, c)));
                    rhs += co.a11 * (f_ww - f_w) + 2.0 * co.a12 * f_wy + co.b1 * f_w;
                }
                out[[r, b - 1, c]] = f_t - rhs;
            }
        }
    }
    Ok(SpaceTimeField {
        z: rows.iter().map(|&(a, _)| f.z[a]).collect(),
        y: f.y[1..ny - 1].to_vec(),
        t: f.t.clone(),
        values: out,
    })
}

/// Residual of the trace equation `f°_t − (a22° f°_yy + b2° f°_y + c° f°)`
/// on interior `y` nodes.
pub fn boundary_residual(coeffs: &ModelCoefficients, f0: &BoundaryField) -> Result<BoundaryField, ModelError> {
    need_axis("y", &f0.y, 3)?;
    need_axis("t", &f0.t, 3)?;
    if f0.values.dim() != (f0.y.len(), f0.t.len()) {
        return Err(ModelError::GridMismatch("boundary values do not match the (y, t) axes".into()));
    }
    let (ny, nt) = f0.values.dim();
    let values = Array2::from_shape_fn((ny - 2, nt), |(b, c)| {
        let b = b + 1;
        let tr = f0.trace_at(b, c);
        let f_t = Stencil3::at(&f0.t, c).apply1(|m| f0.values[[b, m]]);
        let co = coeffs.at(0.0, f0.y[b], f0.t[c]);
        f_t - (co.a22 * tr.f_yy + co.b2 * tr.f_y + co.c * tr.f)
    });
    Ok(BoundaryField { y: f0.y[1..ny - 1].to_vec(), t: f0.t.clone(), values })
}

/// Residual `L̃ f̃ = f̃_t − (â11 f̃_ww + 2â12 f̃_wy + â22 f̃_yy + b̂1 f̃_w + b̂2 f̃_y + ĉ f̃ + Ĝ)`
/// on interior `(w, y)` nodes. `Ĝ` is built from `trace`, which must share
/// the `(y, t)` axes; without a trace it is zero.
pub fn tilde_residual(
    tc: &TransformedCoefficients,
    ft: &TildeField,
    trace: Option<&BoundaryField>,
) -> Result<TildeField, ModelError> {
    need_axis("w", &ft.w, 3)?;
    need_axis("y", &ft.y, 3)?;
    need_axis("t", &ft.t, 3)?;
    if ft.values.dim() != (ft.w.len(), ft.y.len(), ft.t.len()) {
        return Err(ModelError::GridMismatch("tilde values do not match the (w, y, t) axes".into()));
    }
    if let Some(tr) = trace {
        if tr.y != ft.y || tr.t != ft.t {
            return Err(ModelError::GridMismatch("trace and tilde fields use different (y, t) axes".into()));
        }
    }
    let (nw, ny, nt) = ft.values.dim();
    let v = &ft.values;
    let values = Array3::from_shape_fn((nw - 2, ny - 2, nt), |(a, b, c)| {
        let (a, b) = (a + 1, b + 1);
        let sw = Stencil3::at(&ft.w, a);
        let sy = Stencil3::at(&ft.y, b);
        let st = Stencil3::at(&ft.t, c);
        let (w, y, t) = (ft.w[a], ft.y[b], ft.t[c]);
        let h = tc.at(w, y, t);
        let g = trace.map_or(0.0, |tr| tc.source(w, y, t, tr.trace_at(b, c)));
        let f_t = st.apply1(|m| v[[a, b, m]]);
        let f_w = sw.apply1(|m| v[[m, b, c]]);
        let f_ww = sw.apply2(|m| v[[m, b, c]]);
        let f_y = sy.apply1(|n| v[[a, n, c]]);
        let f_yy = sy.apply2(|n| v[[a, n, c]]);
        let f_wy = sy.apply1(|n| sw.apply1(|m| v[[m, n, c]]));
        f_t - (h.a11 * f_ww + 2.0 * h.a12 * f_wy + h.a22 * f_yy + h.b1 * f_w + h.b2 * f_y + h.c * v[[a, b, c]] + g)
    });
    Ok(TildeField { w: ft.w[1..nw - 1].to_vec(), y: ft.y[1..ny - 1].to_vec(), t: ft.t.clone(), values })
}

/// `f = f° + z^p f̃` on `z = (0, e^{w_0}, e^{w_1}, ...)`.
pub fn reconstruct(boundary: &BoundaryField, tilde: &TildeField, p: f64) -> Result<SpaceTimeField, ModelError> {
    if boundary.y != tilde.y || boundary.t != tilde.t {
        return Err(ModelError::GridMismatch("trace and tilde fields use different (y, t) axes".into()));
    }
    let lf = LogField::new(
        tilde.y.clone(),
        tilde.t.clone(),
        tilde.w.clone(),
        boundary.values.clone(),
        tilde.values.clone(),
        p,
    )
    .map_err(|e| ModelError::GridMismatch(e.to_string()))?;
    Ok(lf.reconstruct())
}

/// Largest gap between `L(f° + z^p f̃)` and the split residual: the trace
/// residual on `z = 0`, and trace residual plus `z^p L̃ f̃` on `z > 0`.
/// Zero up to discretisation error exactly when the transformed
/// coefficients are consistent with `L`.
pub fn splitting_defect(
    tc: &TransformedCoefficients,
    boundary: &BoundaryField,
    tilde: &TildeField,
) -> Result<f64, ModelError> {
    let full = apply_model_operator(&tc.base, &reconstruct(boundary, tilde, tc.p)?)?;
    let r0 = boundary_residual(&tc.base, boundary)?;
    let rt = tilde_residual(tc, tilde, Some(boundary))?;
    let (_, ny, nt) = full.dim();
    let mut worst: f64 = 0.0;
    for b in 0..ny {
        for c in 0..nt {
            worst = worst.max((full.values[[0, b, c]] - r0.values[[b, c]]).abs());
        }
    }
    for a in 0..rt.w.len() {
        let zp = (tc.p * rt.w[a]).exp();
        for b in 0..ny {
            for c in 0..nt {
                let split = r0.values[[b, c]] + zp * rt.values[[a, b, c]];
                worst = worst.max((full.values[[a + 1, b, c]] - split).abs());
            }
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscrepancyEntry {
    pub coefficient: String,
    pub printed: String,
    pub derived: String,
    /// `(w, y, t)` of the sample.
    pub at: [f64; 3],
    pub printed_value: f64,
    pub derived_value: f64,
}

/// Printed against derived transformed coefficients, with the splitting
/// defect of each set on a manufactured field when one is supplied.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscrepancyReport {
    pub p: f64,
    pub entries: Vec<DiscrepancyEntry>,
    pub defect_derived: Option<f64>,
    pub defect_printed: Option<f64>,
}

impl DiscrepancyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Compares the two coefficient sets at `at = (w, y, t)` with the given
/// trace values, and on `sample = (f°, f̃)` when supplied.
pub fn discrepancy_report(
    coeffs: &ModelCoefficients,
    p: f64,
    at: [f64; 3],
    trace: TraceValues,
    sample: Option<(&BoundaryField, &TildeField)>,
) -> Result<DiscrepancyReport, ModelError> {
    let derived = TransformedCoefficients::new(coeffs.clone(), p, CoefficientSet::Derived)?;
    let printed = TransformedCoefficients::new(coeffs.clone(), p, CoefficientSet::Printed)?;
    let [w, y, t] = at;
    let (d, pr) = (derived.at(w, y, t), printed.at(w, y, t));
    let a = coeffs.at(w.exp(), y, t);
    let entry = |name: &str, printed: &str, derived: &str, pv: f64, dv: f64| DiscrepancyEntry {
        coefficient: name.into(),
        printed: printed.into(),
        derived: derived.into(),
        at,
        printed_value: pv,
        derived_value: dv,
    };
    let mut entries = vec![
        entry("b2_hat", "b2", "b2 + 2p a12", pr.b2, d.b2),
        entry(
            "c_hat",
            "exp(-p z) [p^2 a11 - 2p a12 + p b1]",
            "p(p-1) a11 + p b1 + c",
            pr.c,
            d.c,
        ),
        entry(
            "G_hat",
            "b2~ g_y + a22 g_yy",
            "exp(-p w) [(a22 - a22°) f°_yy + (b2 - b2°) f°_y + (c - c°) f°]",
            printed.source(w, y, t, trace),
            derived.source(w, y, t, trace),
        ),
    ];
    debug_assert_eq!(pr.b1, d.b1);
    debug_assert_eq!(derived_c(p, a.a11, a.b1, a.c), d.c);
    entries.push(entry(
        "c_hat bracket",
        "p^2 a11 - 2p a12 + p b1",
        "p(p-1) a11 + p b1 + c",
        printed_c_bracket(p, a.a11, a.a12, a.b1),
        d.c,
    ));
    let (defect_derived, defect_printed) = match sample {
        Some((f0, ft)) => (Some(splitting_defect(&derived, f0, ft)?), Some(splitting_defect(&printed, f0, ft)?)),
        None => (None, None),
    };
    Ok(DiscrepancyReport { p, entries, defect_derived, defect_printed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::log_decompose;
    use crate::grid::uniform_axis;
    use crate::model_pde::Coefficient;

    fn log_axis(w_min: f64, w_max: f64, n: usize) -> Vec<f64> {
        std::iter::once(0.0).chain(uniform_axis(w_min, w_max, n).into_iter().map(f64::exp)).collect()
    }

    #[test]
    fn power_residual() {
        let p = 0.5;
        let f = SpaceTimeField::from_fn(log_axis(-4.0, 0.0, 161), uniform_axis(-1.0, 1.0, 5), uniform_axis(0.0, 1.0, 3), |z, _, _| z.powf(p));
        let r = apply_model_operator(&ModelCoefficients::laplacian(), &f).unwrap();
        assert_eq!(r.z[0], 0.0);
        for (a, &z) in r.z.iter().enumerate() {
            let exact = p * (1.0 - p) * z.powf(p);
            for v in r.values.index_axis(ndarray::Axis(0), a).iter() {
                assert!((v - exact).abs() <= 1e-4 * exact.max(1e-12), "{v} vs {exact} at z = {z}");
            }
        }
        let zero = SpaceTimeField::from_fn(f.z.clone(), f.y.clone(), f.t.clone(), |_, _, _| 0.0);
        assert!(apply_model_operator(&ModelCoefficients::laplacian(), &zero).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn z_independent_heat_solution() {
        let mut worst = Vec::new();
        for n in [33, 65] {
            let f = SpaceTimeField::from_fn(
                log_axis(-3.0, 0.0, 9),
                uniform_axis(0.0, std::f64::consts::PI, n),
                uniform_axis(0.0, 0.5, n),
                |_, y, t| (-t).exp() * y.sin(),
            );
            let r = apply_model_operator(&ModelCoefficients::laplacian(), &f).unwrap();
            worst.push(r.values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
        assert!(worst[1] < 2e-3 && worst[1] < 0.3 * worst[0], "{worst:?}");
    }

    #[test]
    fn stencil_violations() {
        let small = SpaceTimeField::from_fn(vec![0.5, 1.0], vec![0.0, 1.0], vec![0.0, 1.0, 2.0], |_, _, _| 0.0);
        assert!(matches!(apply_model_operator(&ModelCoefficients::laplacian(), &small), Err(ModelError::Stencil(_))));
        let no_room = SpaceTimeField::from_fn(vec![0.5, 1.0], uniform_axis(0.0, 1.0, 4), vec![0.0, 1.0, 2.0], |_, _, _| 0.0);
        assert!(matches!(apply_model_operator(&ModelCoefficients::laplacian(), &no_room), Err(ModelError::Stencil(_))));
    }

    #[test]
    fn reconstruct_examples_and_mismatch() {
        let (y, t) = (uniform_axis(0.0, 1.0, 4), uniform_axis(0.0, 1.0, 3));
        let w = uniform_axis(-3.0, 0.0, 7);
        let f0 = BoundaryField::from_fn(y.clone(), t.clone(), |y, t| y + t);
        let zero = TildeField::from_fn(w.clone(), y.clone(), t.clone(), |_, _, _| 0.0);
        let f = reconstruct(&f0, &zero, 0.5).unwrap();
        for a in 0..f.z.len() {
            assert_eq!(f.values.index_axis(ndarray::Axis(0), a), f0.values);
        }
        let one = TildeField::from_fn(w.clone(), y.clone(), t.clone(), |_, _, _| 1.0);
        let none = BoundaryField::from_fn(y.clone(), t.clone(), |_, _| 0.0);
        let g = reconstruct(&none, &one, 0.5).unwrap();
        for (a, z) in g.z.iter().enumerate() {
            assert!((g.values[[a, 2, 1]] - z.sqrt()).abs() < 1e-15);
        }
        let lf = log_decompose(&g, 0.5, -10.0, 10.0).unwrap();
        assert!(lf.tilde.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let other = BoundaryField::from_fn(uniform_axis(0.0, 2.0, 4), t, |_, _| 0.0);
        assert!(matches!(reconstruct(&other, &one, 0.5), Err(ModelError::GridMismatch(_))));
    }

    fn manufactured(n: usize) -> (BoundaryField, TildeField) {
        let y = uniform_axis(-1.0, 1.0, n);
        let t = uniform_axis(0.0, 0.5, n);
        let w = uniform_axis(-3.0, 0.5, 2 * n);
        let f0 = BoundaryField::from_fn(y.clone(), t.clone(), |y, t| (-t).exp() * (1.3 * y).cos() + 0.2 * y);
        let ft = TildeField::from_fn(w, y, t, |w, y, t| (0.7 * w).sin() * (y + 0.5 * t).cos() + 0.3 / (1.0 + w.exp()));
        (f0, ft)
    }

    fn variable_coefficients() -> ModelCoefficients {
        ModelCoefficients::new(
            Coefficient::field(|z, y, _| 1.0 + 0.3 * z * (1.0 + 0.2 * y)),
            Coefficient::field(|z, _, t| 0.2 * z / (1.0 + z) + 0.05 * t),
            Coefficient::field(|z, y, _| 1.2 + 0.4 * z.sqrt() + 0.1 * y),
            0.4,
            Coefficient::field(|z, y, _| -0.3 + 0.5 * z.sqrt() * y),
            Coefficient::field(|z, _, t| -0.5 + 0.4 * z.sqrt() - 0.1 * t),
            0.2,
        )
        .unwrap()
    }

    #[test]
    fn splitting_identity_converges_for_the_derived_coefficients() {
        let p = 0.5;
        let derived = TransformedCoefficients::new(variable_coefficients(), p, CoefficientSet::Derived).unwrap();
        let printed = TransformedCoefficients::new(variable_coefficients(), p, CoefficientSet::Printed).unwrap();
        let (c0, t0) = manufactured(21);
        let (c1, t1) = manufactured(41);
        let e0 = splitting_defect(&derived, &c0, &t0).unwrap();
        let e1 = splitting_defect(&derived, &c1, &t1).unwrap();
        let order = (e0 / e1).log2();
        assert!(order > 1.8, "defects {e0} {e1}, order {order}");
        let lit = splitting_defect(&printed, &c1, &t1).unwrap();
        assert!(lit > 100.0 * e1, "printed {lit} vs derived {e1}");
    }

    #[test]
    fn discrepancy_report_serializes() {
        let (f0, ft) = manufactured(11);
        let trace = TraceValues { f: 1.0, f_y: 0.5, f_yy: -1.0 };
        let rep = discrepancy_report(&variable_coefficients(), 0.5, [-1.0, 0.2, 0.1], trace, Some((&f0, &ft))).unwrap();
        let json = rep.to_json();
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["entries"].as_array().unwrap().len(), 4);
        assert!(rep.defect_printed.unwrap() > rep.defect_derived.unwrap());
    }
}
