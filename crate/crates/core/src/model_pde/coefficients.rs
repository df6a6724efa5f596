use super::ModelError;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

pub type CoefficientFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// A coefficient of the model operator: a constant or a field over `(z, y, t)`.
#[derive(Clone)]
pub enum Coefficient {
    Constant(f64),
    Field(CoefficientFn),
}

impl Coefficient {
    pub fn field(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Field(Arc::new(f))
    }

    pub fn at(&self, z: f64, y: f64, t: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Field(f) => f(z, y, t),
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

impl From<f64> for Coefficient {
    fn from(v: f64) -> Self {
        Self::Constant(v)
    }
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "Constant({v})"),
            Self::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// Coefficient values at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoefficientValues {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
}

impl CoefficientValues {
    /// Smallest eigenvalue of the symmetric matrix `[[a11, a12], [a12, a22]]`.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.a12 == 0.0 {
            return self.a11.min(self.a22);
        }
        let mean = 0.5 * (self.a11 + self.a22);
        let half_gap = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        mean - half_gap
    }
}

#[derive(Clone, Debug)]
pub struct ModelCoefficients {
    pub a11: Coefficient,
    pub a12: Coefficient,
    pub a22: Coefficient,
    pub b1: Coefficient,
    pub b2: Coefficient,
    pub c: Coefficient,
    pub lambda_ell: f64,
}

impl ModelCoefficients {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a11: impl Into<Coefficient>,
        a12: impl Into<Coefficient>,
        a22: impl Into<Coefficient>,
        b1: impl Into<Coefficient>,
        b2: impl Into<Coefficient>,
        c: impl Into<Coefficient>,
        lambda_ell: f64,
    ) -> Result<Self, ModelError> {
        if !(lambda_ell > 0.0) || !lambda_ell.is_finite() {
            return Err(ModelError::Config(format!("ellipticity constant must be positive, got {lambda_ell}")));
        }
        let coeffs = Self {
            a11: a11.into(),
            a12: a12.into(),
            a22: a22.into(),
            b1: b1.into(),
            b2: b2.into(),
            c: c.into(),
            lambda_ell,
        };
        if coeffs.is_constant() {
            coeffs.check_ellipticity(&[[0.0, 0.0, 0.0]])?;
        }
        Ok(coeffs)
    }

    /// `a11 = a22 = 1` and every other coefficient zero.
    pub fn laplacian() -> Self {
        Self::new(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0).expect("the identity is elliptic")
    }

    pub fn is_constant(&self) -> bool {
        [&self.a11, &self.a12, &self.a22, &self.b1, &self.b2, &self.c].iter().all(|c| c.is_constant())
    }

    pub fn at(&self, z: f64, y: f64, t: f64) -> CoefficientValues {
        CoefficientValues {
            a11: self.a11.at(z, y, t),
            a12: self.a12.at(z, y, t),
            a22: self.a22.at(z, y, t),
            b1: self.b1.at(z, y, t),
            b2: self.b2.at(z, y, t),
            c: self.c.at(z, y, t),
        }
    }

    /// Checks `a ξ·ξ ≥ λ|ξ|²` at each `(z, y, t)` point.
    pub fn check_ellipticity(&self, points: &[[f64; 3]]) -> Result<(), ModelError> {
        for &[z, y, t] in points {
            check_point(self.at(z, y, t), [z, y, t], self.lambda_ell)?;
        }
        Ok(())
    }

    /// The boundary operator needs `a22 ≥ λ` on the trace.
    pub(crate) fn check_trace(&self, y: &[f64], t: f64) -> Result<(), ModelError> {
        for &yy in y {
            let a22 = self.a22.at(0.0, yy, t);
            if !(a22 >= self.lambda_ell) {
                return Err(ModelError::Ellipticity { at: [0.0, yy, t], min_eigenvalue: a22, lambda: self.lambda_ell });
            }
        }
        Ok(())
    }
}

pub(crate) fn check_point(v: CoefficientValues, at: [f64; 3], lambda: f64) -> Result<(), ModelError> {
    let m = v.min_eigenvalue();
    if m >= lambda * (1.0 - 1e-12) {
        Ok(())
    } else {
        Err(ModelError::Ellipticity { at, min_eigenvalue: m, lambda })
    }
}

/// Which transformed coefficients to use for the `f̃` problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CoefficientSet {
    /// From the chain rule; makes the splitting identity exact.
    Derived,
    /// Literal transcription of the reference formulas, kept for comparison.
    Printed,
}

/// The trace `f°` and its `y` derivatives at one `(y, t)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraceValues {
    pub f: f64,
    pub f_y: f64,
    pub f_yy: f64,
}

/// Coefficients of the `f̃` operator over `(w, y, t)`.
#[derive(Clone, Debug)]
pub struct TransformedCoefficients {
    pub base: ModelCoefficients,
    pub p: f64,
    pub set: CoefficientSet,
}

/// The derived zeroth-order coefficient `p(p−1) a11 + p b1 + c`.
pub fn derived_c(p: f64, a11: f64, b1: f64, c: f64) -> f64 {
    p * (p - 1.0) * a11 + p * b1 + c
}

/// The printed bracket `p² a11 − 2p a12 + p b1`.
pub fn printed_c_bracket(p: f64, a11: f64, a12: f64, b1: f64) -> f64 {
    p * p * a11 - 2.0 * p * a12 + p * b1
}

impl TransformedCoefficients {
    pub fn new(base: ModelCoefficients, p: f64, set: CoefficientSet) -> Result<Self, ModelError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(ModelError::Config(format!("exponent p must lie in (0, 1), got {p}")));
        }
        Ok(Self { base, p, set })
    }

    /// `â`, `b̂`, `ĉ` at `(w, y, t)`.
    pub fn at(&self, w: f64, y: f64, t: f64) -> CoefficientValues {
        let z = w.exp();
        let a = self.base.at(z, y, t);
        let p = self.p;
        let b1 = (2.0 * p - 1.0) * a.a11 + a.b1;
        match self.set {
            CoefficientSet::Derived => CoefficientValues {
                b1,
                b2: a.b2 + 2.0 * p * a.a12,
                c: derived_c(p, a.a11, a.b1, a.c),
                ..a
            },
            CoefficientSet::Printed => CoefficientValues {
                b1,
                b2: a.b2,
                c: (-p * z).exp() * printed_c_bracket(p, a.a11, a.a12, a.b1),
                ..a
            },
        }
    }

    /// The source `Ĝ` at `(w, y, t)` built from the trace of `f°`.
    ///
    /// Derived: `e^{−pw}[(a22 − a22°) f°_yy + (b2 − b2°) f°_y + (c − c°) f°]`,
    /// the part of `L f°` that the trace equation leaves over at `z > 0`.
    pub fn source(&self, w: f64, y: f64, t: f64, trace: TraceValues) -> f64 {
        let a = self.base.at(w.exp(), y, t);
        let a0 = self.base.at(0.0, y, t);
        let s = (-self.p * w).exp();
        match self.set {
            CoefficientSet::Derived => {
                s * ((a.a22 - a0.a22) * trace.f_yy + (a.b2 - a0.b2) * trace.f_y + (a.c - a0.c) * trace.f)
            }
            CoefficientSet::Printed => s * (a.b2 - a0.b2) * trace.f_y + a.a22 * trace.f_yy,
        }
    }

    pub fn check_ellipticity(&self, w: &[f64], y: &[f64], t: f64) -> Result<(), ModelError> {
        for &ww in w {
            for &yy in y {
                check_point(self.at(ww, yy, t), [ww, yy, t], self.base.lambda_ell)?;
            }
        }
        Ok(())
    }
}
