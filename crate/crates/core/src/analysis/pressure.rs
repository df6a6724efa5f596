use super::{check_exponent, AnalysisError};
use crate::geometry::{centered_derivatives, HeightField, Sym2};
use crate::grid::{bilinear, Grid2, SpaceTimeField, Stencil3};
use crate::interface::Curve;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// `g = h^p` on the grid of the source height field.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureField {
    pub grid: Grid2,
    pub values: Array2<f64>,
    pub p: f64,
}

pub fn pressure(field: &HeightField, p: f64) -> Result<PressureField, AnalysisError> {
    check_exponent(p)?;
    Ok(PressureField { grid: *field.grid(), values: field.values().mapv(|h| h.powf(p)), p })
}

/// Margins of condition (★) sampled along an interface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarReport {
    pub min_grad: f64,
    pub min_g_tautau: f64,
    pub lambda: f64,
    pub passes: bool,
    pub samples: usize,
}

impl StarReport {
    pub fn margin(&self) -> f64 {
        self.min_grad.min(self.min_g_tautau)
    }
}

const OFFSETS: [f64; 6] = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0];

/// Samples `|Dg|` and `g_ττ` (τ the unit tangent to the level sets of `g`)
/// just outside the flat set and extrapolates them back to the interface.
///
/// At each vertex the sample point is pushed outward along the curve normal
/// by a few cells until every node of its bilinear cell has a centred
/// stencil lying entirely in `{g > 0}`. Values from the first two valid
/// offsets are extrapolated linearly to the curve; a single valid offset is
/// used as is.
pub fn check_star(g: &PressureField, interface: &Curve, lambda: f64) -> Result<StarReport, AnalysisError> {
    let grid = g.grid;
    let (nx, ny) = (grid.nx, grid.ny);
    let v = &g.values;
    let mut valid = Array2::from_elem((nx, ny), false);
    let mut grads = Array2::from_elem((nx, ny), [0.0; 2]);
    let mut hess = Array2::from_elem((nx, ny), Sym2::default());
    for i in 1..nx - 1 {
        for j in 1..ny - 1 {
            let ok = (i - 1..=i + 1).all(|a| (j - 1..=j + 1).all(|b| v[[a, b]] > 0.0));
            if ok {
                let (gr, he) = centered_derivatives(v, i, j, grid.dx, grid.dy);
                valid[[i, j]] = true;
                grads[[i, j]] = gr;
                hess[[i, j]] = he;
            }
        }
    }
    let step = grid.dx.min(grid.dy);
    let normals = interface.outward_normals();
    let (mut min_grad, mut min_gtt) = (f64::INFINITY, f64::INFINITY);
    for (k, (p, n)) in interface.points().iter().zip(&normals).enumerate() {
        let mut found: Vec<(f64, f64, f64)> = Vec::new();
        for &o in &OFFSETS {
            let q = [p[0] + o * step * n[0], p[1] + o * step * n[1]];
            let Some((i, j, sx, sy)) = grid.locate(q[0], q[1]) else { continue };
            if !(valid[[i, j]] && valid[[i + 1, j]] && valid[[i, j + 1]] && valid[[i + 1, j + 1]]) {
                continue;
            }
            let comp = |f: &dyn Fn(usize, usize) -> f64| {
                let a = Array2::from_shape_fn((2, 2), |(a, b)| f(i + a, j + b));
                bilinear(&a, 0, 0, sx, sy)
            };
            let gx = comp(&|a, b| grads[[a, b]][0]);
            let gy = comp(&|a, b| grads[[a, b]][1]);
            let h = Sym2::new(comp(&|a, b| hess[[a, b]].xx), comp(&|a, b| hess[[a, b]].xy), comp(&|a, b| hess[[a, b]].yy));
            let norm = gx.hypot(gy);
            let tau = [-gy / norm, gx / norm];
            found.push((o, norm, h.quad(tau)));
            if found.len() == 2 {
                break;
            }
        }
        let (grad, gtt) = match found.as_slice() {
            [] => return Err(AnalysisError::NoValidOffset { vertex: k }),
            [(_, a, b)] => (*a, *b),
            [(o1, a1, b1), (o2, a2, b2), ..] => {
                let s = o1 / (o2 - o1);
                (a1 - s * (a2 - a1), b1 - s * (b2 - b1))
            }
        };
        min_grad = min_grad.min(grad);
        min_gtt = min_gtt.min(gtt);
    }
    Ok(StarReport {
        min_grad,
        min_g_tautau: min_gtt,
        lambda,
        passes: min_grad >= lambda && min_gtt >= lambda,
        samples: interface.len(),
    })
}

/// Smallest eigenvalue of `[[−z^{2−p} f_zz, z^{1−p} f_zy], [z^{1−p} f_zy, −f_yy]]`
/// over the interior nodes of every time slice of a field `x = f(z, y)`.
pub fn check_star_star(field: &SpaceTimeField, p: f64) -> Result<f64, AnalysisError> {
    check_exponent(p)?;
    field.validate_axes().map_err(AnalysisError::InvalidField)?;
    let (nz, ny, nt) = field.dim();
    if nz < 3 || ny < 3 {
        return Err(AnalysisError::InvalidField("need at least three nodes in z and y".into()));
    }
    let f = &field.values;
    let mut margin = f64::INFINITY;
    for a in 1..nz - 1 {
        let z = field.z[a];
        if z <= 0.0 {
            return Err(AnalysisError::Domain(format!("sample at z = {z} is not in z > 0")));
        }
        let sz = Stencil3::at(&field.z, a);
        for b in 1..ny - 1 {
            let sy = Stencil3::at(&field.y, b);
            for c in 0..nt {
                let fzz = sz.apply2(|k| f[[k, b, c]]);
                let fyy = sy.apply2(|k| f[[a, k, c]]);
                let fzy = sz.apply1(|k| sy.apply1(|m| f[[k, m, c]]));
                let m = Sym2::new(-z.powf(2.0 - p) * fzz, z.powf(1.0 - p) * fzy, -fyy);
                margin = margin.min(m.eigenvalues().0);
            }
        }
    }
    Ok(margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2;
    use crate::interface::{extract_interface, extract_interface_with, Interpolation};
    use approx::assert_relative_eq;

    fn disk_field(n: usize, r0: f64) -> HeightField {
        let grid = Grid2::centered_square(n, 1.0);
        HeightField::from_fn(grid, 1e-9, |x, y| ((x * x + y * y).sqrt() - r0).max(0.0).powi(2)).unwrap()
    }

    #[test]
    fn pointwise_power() {
        let grid = Grid2::centered_square(5, 1.0);
        let four = HeightField::from_fn(grid, 1e-9, |_, _| 4.0).unwrap();
        assert!(pressure(&four, 0.5).unwrap().values.iter().all(|&g| g == 2.0));
        let zero = HeightField::from_fn(grid, 1e-9, |_, _| 0.0).unwrap();
        assert!(pressure(&zero, 0.5).unwrap().values.iter().all(|&g| g == 0.0));
        assert!(pressure(&four, 1.5).is_err());
    }

    #[test]
    fn square_distance_pressure_is_distance() {
        let f = disk_field(201, 0.5);
        let g = pressure(&f, 0.5).unwrap();
        let grid = g.grid;
        for i in (1..200).step_by(7) {
            for j in (1..200).step_by(11) {
                let (x, y) = (grid.x(i), grid.y(j));
                let rho = x.hypot(y);
                assert_eq!(g.values[[i, j]] == 0.0, f.at(i, j) == 0.0);
                assert_relative_eq!(g.values[[i, j]], (rho - 0.5).max(0.0), epsilon = 1e-12);
                if rho > 0.5 + 2.0 * grid.dx {
                    let (gr, _) = centered_derivatives(&g.values, i, j, grid.dx, grid.dy);
                    assert_relative_eq!(gr[0].hypot(gr[1]), 1.0, epsilon = 1e-3);
                }
            }
        }
    }

    #[test]
    fn radial_margins_match_closed_forms() {
        let mut errors = Vec::new();
        for n in [101, 201] {
            let f = disk_field(n, 0.5);
            let dx = f.dx();
            let curve = extract_interface_with(&f, 1e-9, Interpolation::Power(0.5)).unwrap().unwrap();
            let g = pressure(&f, 0.5).unwrap();
            let rep = check_star(&g, &curve, 0.9).unwrap();
            assert!(rep.passes);
            assert!((rep.min_grad - 1.0).abs() < 2.0 * dx);
            assert!((rep.min_g_tautau - 2.0).abs() < 10.0 * dx, "{rep:?}");
            errors.push((rep.min_g_tautau - 2.0).abs());
            let vacuous = check_star(&g, &curve, 0.0).unwrap();
            assert!(vacuous.passes);
        }
        assert!(errors[1] < errors[0]);
    }

    #[test]
    fn concave_flat_set_fails_with_negative_margin() {
        // Flat set bounded by r(θ) = 0.4(1 + 0.3 cos 3θ): concave near θ = π/3.
        let grid = Grid2::centered_square(201, 1.0);
        let f = HeightField::from_fn(grid, 1e-9, |x, y| {
            let r = 0.4 * (1.0 + 0.3 * (3.0 * y.atan2(x)).cos());
            (x.hypot(y) - r).max(0.0).powi(2)
        })
        .unwrap();
        let curve = extract_interface(&f, 1e-9).unwrap().unwrap();
        let g = pressure(&f, 0.5).unwrap();
        let rep = check_star(&g, &curve, 0.1).unwrap();
        assert!(!rep.passes);
        assert!(rep.min_g_tautau < 0.0);
    }

    fn zy_field(f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        let z: Vec<f64> = (0..200).map(|k| (0.01f64.ln() + k as f64 * (100f64.ln() / 199.0)).exp()).collect();
        let y = crate::grid::uniform_axis(-1.0, 1.0, 41);
        SpaceTimeField::from_fn(z, y, vec![0.0], |z, y, _| f(z, y))
    }

    #[test]
    fn star_star_examples() {
        let p = 0.5;
        let good = check_star_star(&zy_field(|z, y| z.powf(p) - y * y), p).unwrap();
        assert_relative_eq!(good, 0.25, epsilon = 1e-3);
        let flipped = check_star_star(&zy_field(|z, y| -(z.powf(p) + y * y)), p).unwrap();
        assert_relative_eq!(flipped, -0.25, epsilon = 1e-3);
        let pure = check_star_star(&zy_field(|z, _| z.powf(p)), p).unwrap();
        assert!(pure.abs() < 1e-3);
        let linear = check_star_star(&zy_field(|z, y| 2.0 * z - y), p).unwrap();
        assert!(linear.abs() < 1e-9);
    }

    #[test]
    fn star_star_rejects_the_boundary() {
        let z = vec![-0.1, 0.0, 0.1, 0.2];
        let field = SpaceTimeField::from_fn(z, vec![0.0, 0.1, 0.2], vec![0.0], |z, _, _| z);
        assert!(matches!(check_star_star(&field, 0.5), Err(AnalysisError::Domain(_))));
        // A z = 0 trace in the first slab is never sampled.
        let z = vec![0.0, 0.1, 0.2, 0.3];
        let field = SpaceTimeField::from_fn(z, vec![0.0, 0.1, 0.2], vec![0.0], |z, _, _| z);
        assert!(check_star_star(&field, 0.5).is_ok());
    }
}
