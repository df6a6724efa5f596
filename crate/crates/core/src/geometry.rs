//! Pointwise differential geometry of height fields `z = h(x, y)`:
//! finite-difference derivatives, principal curvatures of the graph and the
//! harmonic-mean speed `K/H`.

use crate::grid::{label_components, Grid2};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("height must be finite and nonnegative, found {value} at ({i}, {j})")]
    NegativeHeight { i: usize, j: usize, value: f64 },
    #[error("flat set is not simply connected ({components} components, {holes} holes)")]
    FlatSetTopology { components: usize, holes: usize },
    #[error("node ({i}, {j}) is outside the centred stencil range")]
    Stencil { i: usize, j: usize },
    #[error("convexity violation: smallest principal curvature {lambda1} below -{clamp_tol}")]
    ConvexityViolation { lambda1: f64, clamp_tol: f64 },
}

/// Symmetric 2×2 matrix, used for Hessians.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (m - r, m + r)
    }

    /// `vᵀ M v`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }
}

/// A discretised graph `z = h(x, y)` over a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct HeightField {
    grid: Grid2,
    values: Array2<f64>,
    flat_tol: f64,
}

impl HeightField {
    pub fn new(grid: Grid2, values: Array2<f64>, flat_tol: f64) -> Result<Self, GeometryError> {
        if grid.nx < 5 || grid.ny < 5 {
            return Err(GeometryError::InvalidGrid(format!(
                "need at least 5×5 nodes, got {}×{}",
                grid.nx, grid.ny
            )));
        }
        if !(grid.dx > 0.0 && grid.dy > 0.0) {
            return Err(GeometryError::InvalidGrid("spacings must be positive".into()));
        }
        if values.dim() != (grid.nx, grid.ny) {
            return Err(GeometryError::InvalidGrid(format!(
                "value array {:?} does not match grid {}×{}",
                values.dim(),
                grid.nx,
                grid.ny
            )));
        }
        if !(flat_tol > 0.0) {
            return Err(GeometryError::InvalidGrid("flat_tol must be positive".into()));
        }
        if let Some(((i, j), &value)) = values.indexed_iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(GeometryError::NegativeHeight { i, j, value });
        }
        let field = Self { grid, values, flat_tol };
        let (components, holes) = field.flat_topology();
        if components > 1 || holes > 0 {
            return Err(GeometryError::FlatSetTopology { components, holes });
        }
        Ok(field)
    }

    /// Skips validation; the flow checks sign per step and topology at
    /// snapshots.
    pub(crate) fn from_parts_unchecked(grid: Grid2, values: Array2<f64>, flat_tol: f64) -> Self {
        Self { grid, values, flat_tol }
    }

    /// Re-runs the constructor checks.
    pub fn validate(&self) -> Result<(), GeometryError> {
        Self::new(self.grid, self.values.clone(), self.flat_tol).map(|_| ())
    }

    pub fn from_fn(grid: Grid2, flat_tol: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self, GeometryError> {
        let values = Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| f(grid.x(i), grid.y(j)));
        Self::new(grid, values, flat_tol)
    }

    /// Same grid and tolerance, new heights.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self, GeometryError> {
        Self::new(self.grid, values, self.flat_tol)
    }

    /// The same surface translated vertically by `dz ≥ 0`.
    pub fn shifted(&self, dz: f64) -> Result<Self, GeometryError> {
        self.with_values(self.values.mapv(|v| v + dz))
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn flat_tol(&self) -> f64 {
        self.flat_tol
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    pub fn dy(&self) -> f64 {
        self.grid.dy
    }

    pub fn origin(&self) -> [f64; 2] {
        self.grid.origin
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn flat_mask(&self) -> Array2<bool> {
        self.values.mapv(|v| v < self.flat_tol)
    }

    /// Number of connected components of `{h < flat_tol}`.
    pub fn flat_components(&self) -> usize {
        label_components(&self.flat_mask(), false).1
    }

    /// Components of the flat set (four-neighbourhood) and holes in it, i.e.
    /// components of the complement (eight-neighbourhood) that do not reach
    /// the grid boundary.
    fn flat_topology(&self) -> (usize, usize) {
        let mask = self.flat_mask();
        let (_, components) = label_components(&mask, false);
        if components == 0 {
            return (0, 0);
        }
        let complement = mask.mapv(|f| !f);
        let (labels, count) = label_components(&complement, true);
        let mut touches = vec![false; count];
        let (nx, ny) = mask.dim();
        for ((i, j), &l) in labels.indexed_iter() {
            if l != usize::MAX && (i == 0 || j == 0 || i == nx - 1 || j == ny - 1) {
                touches[l] = true;
            }
        }
        (components, touches.iter().filter(|t| !**t).count())
    }
}

/// Centred second-order gradient and Hessian at an interior node.
pub fn hessian_and_gradient(field: &HeightField, i: usize, j: usize) -> Result<([f64; 2], Sym2), GeometryError> {
    if i < 1 || j < 1 || i + 2 > field.nx() || j + 2 > field.ny() {
        return Err(GeometryError::Stencil { i, j });
    }
    Ok(centered_derivatives(field.values(), i, j, field.dx(), field.dy()))
}

/// Centred differences of an arbitrary node array; the caller guarantees
/// `1 ≤ i ≤ nx-2` and `1 ≤ j ≤ ny-2`.
pub(crate) fn centered_derivatives(h: &Array2<f64>, i: usize, j: usize, dx: f64, dy: f64) -> ([f64; 2], Sym2) {
    let c = h[[i, j]];
    let (e, w) = (h[[i + 1, j]], h[[i - 1, j]]);
    let (n, s) = (h[[i, j + 1]], h[[i, j - 1]]);
    let gx = (e - w) / (2.0 * dx);
    let gy = (n - s) / (2.0 * dy);
    let hxx = (e - 2.0 * c + w) / (dx * dx);
    let hyy = (n - 2.0 * c + s) / (dy * dy);
    let hxy = (h[[i + 1, j + 1]] - h[[i + 1, j - 1]] - h[[i - 1, j + 1]] + h[[i - 1, j - 1]]) / (4.0 * dx * dy);
    ([gx, gy], Sym2::new(hxx, hxy, hyy))
}

/// Gradient and Hessian at any node: centred in the interior, one-sided
/// second-order on the outermost ring. Intended for diagnostics; the flow
/// never evolves the outer ring with these stencils.
pub fn hessian_and_gradient_extended(field: &HeightField, i: usize, j: usize) -> Result<([f64; 2], Sym2), GeometryError> {
    let (nx, ny) = (field.nx(), field.ny());
    if i >= nx || j >= ny {
        return Err(GeometryError::Stencil { i, j });
    }
    let h = field.values();
    let xs: Vec<f64> = (0..nx).map(|k| k as f64 * field.dx()).collect();
    let ys: Vec<f64> = (0..ny).map(|k| k as f64 * field.dy()).collect();
    let sx = crate::grid::Stencil3::at(&xs, i);
    let sy = crate::grid::Stencil3::at(&ys, j);
    let gx = sx.apply1(|a| h[[a, j]]);
    let gy = sy.apply1(|b| h[[i, b]]);
    let hxx = sx.apply2(|a| h[[a, j]]);
    let hyy = sy.apply2(|b| h[[i, b]]);
    let hxy = sx.apply1(|a| sy.apply1(|b| h[[a, b]]));
    Ok(([gx, gy], Sym2::new(hxx, hxy, hyy)))
}

/// Ordered principal curvatures with Gauss and mean curvature
/// (`H` is the sum `λ₁ + λ₂`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub k: f64,
    pub h: f64,
}

impl CurvaturePair {
    pub fn new(a: f64, b: f64) -> Self {
        let (lambda1, lambda2) = if a <= b { (a, b) } else { (b, a) };
        Self { lambda1, lambda2, k: lambda1 * lambda2, h: lambda1 + lambda2 }
    }
}

/// Eigenvalues of the shape operator of the graph with the given
/// gradient and Hessian, curvature positive for upward-convex graphs.
pub fn principal_curvatures(gradient: [f64; 2], hessian: Sym2) -> CurvaturePair {
    let [p, q] = gradient;
    let w2 = 1.0 + p * p + q * q;
    let gauss = hessian.det() / (w2 * w2);
    let mean = ((1.0 + q * q) * hessian.xx - 2.0 * p * q * hessian.xy + (1.0 + p * p) * hessian.yy) / w2.powf(1.5);
    let disc = (mean * mean - 4.0 * gauss).max(0.0).sqrt();
    // Pick the root without cancellation and recover the other from K.
    let (a, b) = if mean >= 0.0 {
        let big = 0.5 * (mean + disc);
        (big, if big != 0.0 { gauss / big } else { 0.0 })
    } else {
        let small = 0.5 * (mean - disc);
        (small, gauss / small)
    };
    CurvaturePair::new(a, b)
}

/// Floors for the degenerate limit of `K/H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VelocityParams {
    /// Mean curvature at or below which the speed is exactly zero.
    pub h_floor: f64,
    /// Negative curvatures above `-clamp_tol` are treated as zero.
    pub clamp_tol: f64,
}

impl VelocityParams {
    pub fn for_spacing(dx: f64) -> Self {
        Self { h_floor: 1e-12 / dx, clamp_tol: 1e-8 / dx }
    }
}

/// Harmonic-mean speed `λ₁λ₂/(λ₁+λ₂)`.
pub fn harmonic_mean_velocity(pair: CurvaturePair, params: VelocityParams) -> Result<f64, GeometryError> {
    if pair.lambda1 < -params.clamp_tol {
        return Err(GeometryError::ConvexityViolation { lambda1: pair.lambda1, clamp_tol: params.clamp_tol });
    }
    let l1 = pair.lambda1.max(0.0);
    let l2 = pair.lambda2.max(0.0);
    let h = l1 + l2;
    if h <= params.h_floor {
        return Ok(0.0);
    }
    Ok(l1 * l2 / h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2;

    fn unit_params() -> VelocityParams {
        VelocityParams { h_floor: 1e-12, clamp_tol: 1e-8 }
    }

    #[test]
    fn quadratics_are_differentiated_exactly() {
        let grid = Grid2::new(7, 7, 0.1, 0.1, [-0.3, -0.3]);
        let f = HeightField::from_fn(grid, 1e-9, |x, _| x * x).unwrap();
        for i in 1..6 {
            let (g, h) = hessian_and_gradient(&f, i, 3).unwrap();
            assert_relative_eq!(g[0], 2.0 * grid.x(i), epsilon = 1e-13);
            assert_relative_eq!(g[1], 0.0, epsilon = 1e-13);
            assert_relative_eq!(h.xx, 2.0, epsilon = 1e-12);
            assert_relative_eq!(h.xy, 0.0, epsilon = 1e-12);
            assert_relative_eq!(h.yy, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_field_has_zero_derivatives() {
        let f = HeightField::new(Grid2::centered_square(5, 1.0), Array2::zeros((5, 5)), 1e-9).unwrap();
        assert_eq!(hessian_and_gradient(&f, 2, 2).unwrap(), ([0.0, 0.0], Sym2::default()));
    }

    #[test]
    fn hemisphere_hessian_at_apex_is_identity_to_second_order() {
        for n in [41usize, 81] {
            let grid = Grid2::centered_square(n, 0.5);
            let f = HeightField::from_fn(grid, 1e-9, |x, y| 1.0 - (1.0 - x * x - y * y).sqrt()).unwrap();
            let c = n / 2;
            let (g, h) = hessian_and_gradient(&f, c, c).unwrap();
            let dx = grid.dx;
            assert!(g[0].abs() < 1e-14 && g[1].abs() < 1e-14);
            // Taylor: h = r²/2 + r⁴/8 + …, so the centred error is dx²/4.
            assert_relative_eq!(h.xx, 1.0 + dx * dx / 4.0, epsilon = 2.0 * dx.powi(4));
            assert_relative_eq!(h.yy, h.xx, epsilon = 1e-12);
            assert!(h.xy.abs() < 1e-12);
        }
    }

    #[test]
    fn stencil_range_is_enforced() {
        let f = HeightField::new(Grid2::centered_square(5, 1.0), Array2::zeros((5, 5)), 1e-9).unwrap();
        assert!(matches!(hessian_and_gradient(&f, 0, 2), Err(GeometryError::Stencil { .. })));
        assert!(matches!(hessian_and_gradient(&f, 2, 4), Err(GeometryError::Stencil { .. })));
    }

    #[test]
    fn extended_stencil_is_second_order_on_the_boundary() {
        let grid = Grid2::new(9, 9, 0.05, 0.05, [0.0, 0.0]);
        let f = HeightField::from_fn(grid, 1e-9, |x, y| 1.0 + x * x * y + 0.5 * y * y).unwrap();
        let (g, h) = hessian_and_gradient_extended(&f, 0, 8).unwrap();
        let (x, y) = (grid.x(0), grid.y(8));
        assert_relative_eq!(g[0], 2.0 * x * y, epsilon = 1e-12);
        assert_relative_eq!(g[1], x * x + y, epsilon = 1e-12);
        assert_relative_eq!(h.xx, 2.0 * y, epsilon = 1e-10);
        assert_relative_eq!(h.xy, 2.0 * x, epsilon = 1e-10);
        assert_relative_eq!(h.yy, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn field_invariants_are_checked() {
        let grid = Grid2::centered_square(9, 1.0);
        assert!(matches!(
            HeightField::from_fn(grid, 1e-9, |x, _| x),
            Err(GeometryError::NegativeHeight { .. })
        ));
        // Two separate flat disks.
        let two = HeightField::from_fn(grid, 1e-9, |x, y| ((x.abs() - 0.5).powi(2) + y * y - 0.04).max(0.0));
        assert!(matches!(two, Err(GeometryError::FlatSetTopology { components: 2, .. })));
        // A flat annulus has a hole.
        let annulus =
            HeightField::from_fn(grid, 1e-9, |x, y| (((x * x + y * y).sqrt() - 0.5).abs() - 0.25).max(0.0));
        assert!(matches!(annulus, Err(GeometryError::FlatSetTopology { holes: 1, .. })));
        assert!(matches!(
            HeightField::new(Grid2::centered_square(4, 1.0), Array2::zeros((4, 4)), 1e-9),
            Err(GeometryError::InvalidGrid(_))
        ));
    }

    #[test]
    fn apex_and_cylinder_curvatures() {
        let sphere = principal_curvatures([0.0, 0.0], Sym2::new(1.0, 0.0, 1.0));
        assert_eq!((sphere.lambda1, sphere.lambda2, sphere.k, sphere.h), (1.0, 1.0, 1.0, 2.0));
        let cyl = principal_curvatures([0.0, 0.0], Sym2::new(2.0, 0.0, 0.0));
        assert_eq!((cyl.lambda1, cyl.lambda2, cyl.k, cyl.h), (0.0, 2.0, 0.0, 2.0));
    }

    /// Shape operator `g⁻¹ II` symmetrised as `g^{-1/2} II g^{-1/2}` and
    /// diagonalised by a general symmetric eigensolver.
    fn brute_force(gradient: [f64; 2], hess: Sym2) -> (f64, f64) {
        let gv = nalgebra::Vector2::new(gradient[0], gradient[1]);
        let metric = Matrix2::identity() + gv * gv.transpose();
        let second = Matrix2::new(hess.xx, hess.xy, hess.xy, hess.yy) / (1.0 + gv.norm_squared()).sqrt();
        let eig = metric.symmetric_eigen();
        let inv_sqrt = eig.eigenvectors
            * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
            * eig.eigenvectors.transpose();
        let s = (inv_sqrt * second * inv_sqrt).symmetric_eigen().eigenvalues;
        (s.min(), s.max())
    }

    #[test]
    fn tilted_graph_matches_brute_force_shape_operator() {
        let pair = principal_curvatures([1.0, 0.0], Sym2::new(2.0, 0.0, 2.0));
        let (l1, l2) = brute_force([1.0, 0.0], Sym2::new(2.0, 0.0, 2.0));
        assert_relative_eq!(pair.lambda1, l1, epsilon = 1e-12);
        assert_relative_eq!(pair.lambda2, l2, epsilon = 1e-12);
        assert_relative_eq!(l1, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(l2, 2f64.sqrt(), epsilon = 1e-12);
        for (g, h) in [
            ([0.3, -0.7], Sym2::new(1.5, 0.4, 0.8)),
            ([-2.0, 0.5], Sym2::new(0.2, -0.1, 3.0)),
            ([0.1, 0.1], Sym2::new(-1.0, 0.3, 2.0)),
        ] {
            let pair = principal_curvatures(g, h);
            let (l1, l2) = brute_force(g, h);
            assert_relative_eq!(pair.lambda1, l1, epsilon = 1e-12);
            assert_relative_eq!(pair.lambda2, l2, epsilon = 1e-12);
            assert_eq!(pair.k, pair.lambda1 * pair.lambda2);
            assert_eq!(pair.h, pair.lambda1 + pair.lambda2);
        }
    }

    #[test]
    fn velocity_examples() {
        let p = unit_params();
        assert_eq!(harmonic_mean_velocity(CurvaturePair::new(1.0, 1.0), p).unwrap(), 0.5);
        assert_eq!(harmonic_mean_velocity(CurvaturePair::new(0.0, 2.0), p).unwrap(), 0.0);
        assert_eq!(harmonic_mean_velocity(CurvaturePair::new(0.5, 0.5), p).unwrap(), 0.25);
        assert_eq!(harmonic_mean_velocity(CurvaturePair::new(0.0, 0.0), p).unwrap(), 0.0);
    }

    #[test]
    fn small_negative_curvature_is_clamped_large_is_rejected() {
        let p = unit_params();
        assert_eq!(harmonic_mean_velocity(CurvaturePair::new(-1e-10, 1.0), p).unwrap(), 0.0);
        assert!(matches!(
            harmonic_mean_velocity(CurvaturePair::new(-1e-3, 1.0), p),
            Err(GeometryError::ConvexityViolation { .. })
        ));
        let dx = 0.01;
        assert_relative_eq!(VelocityParams::for_spacing(dx).clamp_tol, 1e-6);
    }

    fn rotate(g: [f64; 2], h: Sym2, theta: f64) -> ([f64; 2], Sym2) {
        let r = Matrix2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
        let hm = r * Matrix2::new(h.xx, h.xy, h.xy, h.yy) * r.transpose();
        ([r[(0, 0)] * g[0] + r[(0, 1)] * g[1], r[(1, 0)] * g[0] + r[(1, 1)] * g[1]], Sym2::new(hm[(0, 0)], hm[(0, 1)], hm[(1, 1)]))
    }

    proptest::proptest! {
        #[test]
        fn harmonic_mean_sandwich_symmetry_and_scaling(a in 1e-3f64..10.0, b in 1e-3f64..10.0, c in 0.1f64..10.0) {
            let p = unit_params();
            let v = harmonic_mean_velocity(CurvaturePair::new(a, b), p).unwrap();
            proptest::prop_assert!(a.min(b) / 2.0 <= v + 1e-15 && v <= a.min(b) + 1e-15);
            proptest::prop_assert_eq!(v, harmonic_mean_velocity(CurvaturePair::new(b, a), p).unwrap());
            let scaled = harmonic_mean_velocity(CurvaturePair::new(c * a, c * b), p).unwrap();
            proptest::prop_assert!((scaled - c * v).abs() <= 1e-12 * scaled);
        }

        #[test]
        fn curvatures_are_frame_invariant(
            gx in -2.0f64..2.0, gy in -2.0f64..2.0,
            xx in -3.0f64..3.0, xy in -3.0f64..3.0, yy in -3.0f64..3.0,
        ) {
            let (g, h) = ([gx, gy], Sym2::new(xx, xy, yy));
            let (g2, h2) = rotate(g, h, std::f64::consts::PI / 6.0);
            let (a, b) = (principal_curvatures(g, h), principal_curvatures(g2, h2));
            proptest::prop_assert!((a.lambda1 - b.lambda1).abs() <= 1e-6 * (1.0 + a.lambda1.abs()));
            proptest::prop_assert!((a.lambda2 - b.lambda2).abs() <= 1e-6 * (1.0 + a.lambda2.abs()));
        }
    }
}
