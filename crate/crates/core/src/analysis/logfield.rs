use super::{check_exponent, AnalysisError};
use crate::grid::{is_strictly_increasing, SpaceTimeField};
use ndarray::{Array2, Array3, Axis};

/// A field split as `f(z, y, t) = f°(y, t) + z^p f̃(w, y, t)` with `w = ln z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogField {
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub w: Vec<f64>,
    /// `f°` over `(y, t)`.
    pub boundary: Array2<f64>,
    /// `f̃` over `(w, y, t)`.
    pub tilde: Array3<f64>,
    pub p: f64,
}

impl LogField {
    pub fn new(
        y: Vec<f64>,
        t: Vec<f64>,
        w: Vec<f64>,
        boundary: Array2<f64>,
        tilde: Array3<f64>,
        p: f64,
    ) -> Result<Self, AnalysisError> {
        check_exponent(p)?;
        for (name, axis) in [("w", &w), ("y", &y), ("t", &t)] {
            if axis.is_empty() || !is_strictly_increasing(axis) {
                return Err(AnalysisError::InvalidField(format!("{name} axis must be nonempty and strictly increasing")));
            }
        }
        if boundary.dim() != (y.len(), t.len()) {
            return Err(AnalysisError::InvalidField("boundary part does not match the (y, t) axes".into()));
        }
        if tilde.dim() != (w.len(), y.len(), t.len()) {
            return Err(AnalysisError::InvalidField("tilde part does not match the (w, y, t) axes".into()));
        }
        Ok(Self { y, t, w, boundary, tilde, p })
    }

    /// `f = f° + z^p f̃` on the axis `z = (0, e^{w_0}, e^{w_1}, ...)`; the
    /// first slab is the trace `f°`.
    pub fn reconstruct(&self) -> SpaceTimeField {
        let mut z = Vec::with_capacity(self.w.len() + 1);
        z.push(0.0);
        z.extend(self.w.iter().map(|w| w.exp()));
        let (nw, ny, nt) = self.tilde.dim();
        let mut values = Array3::zeros((nw + 1, ny, nt));
        values.index_axis_mut(Axis(0), 0).assign(&self.boundary);
        for a in 0..nw {
            let zp = (self.p * self.w[a]).exp();
            for b in 0..ny {
                for c in 0..nt {
                    values[[a + 1, b, c]] = self.boundary[[b, c]] + zp * self.tilde[[a, b, c]];
                }
            }
        }
        SpaceTimeField { z, y: self.y.clone(), t: self.t.clone(), values }
    }
}

/// Splits a field whose first `z` slab is the trace at `z = 0`. The tilde
/// part keeps the nodes with `ln z ∈ [w_min, w_max]`.
pub fn log_decompose(field: &SpaceTimeField, p: f64, w_min: f64, w_max: f64) -> Result<LogField, AnalysisError> {
    check_exponent(p)?;
    field.validate().map_err(AnalysisError::InvalidField)?;
    if !field.has_trace() {
        return Err(AnalysisError::InvalidField("the first z node must be the trace z = 0".into()));
    }
    let kept: Vec<usize> = (1..field.z.len()).filter(|&a| (w_min..=w_max).contains(&field.z[a].ln())).collect();
    if kept.is_empty() {
        return Err(AnalysisError::Window(format!("no z > 0 node with ln z in [{w_min}, {w_max}]")));
    }
    let boundary = field.values.index_axis(Axis(0), 0).to_owned();
    let w: Vec<f64> = kept.iter().map(|&a| field.z[a].ln()).collect();
    let (_, ny, nt) = field.dim();
    let tilde = Array3::from_shape_fn((kept.len(), ny, nt), |(k, b, c)| {
        let a = kept[k];
        field.z[a].powf(-p) * (field.values[[a, b, c]] - boundary[[b, c]])
    });
    LogField::new(field.y.clone(), field.t.clone(), w, boundary, tilde, p)
}

/// [`log_decompose`] on the window `[ln flat_tol, ln max z]`.
pub fn log_decompose_default(field: &SpaceTimeField, p: f64, flat_tol: f64) -> Result<LogField, AnalysisError> {
    let z_max = field.z.last().copied().unwrap_or(0.0);
    if !(flat_tol > 0.0) || !(z_max > 0.0) {
        return Err(AnalysisError::Window("default window needs flat_tol > 0 and a node with z > 0".into()));
    }
    log_decompose(field, p, flat_tol.ln(), z_max.ln())
}
