//! Grid descriptors, connected-component labelling and three-point
//! finite-difference weights on monotone (possibly nonuniform) axes.

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Uniform node-centred 2D grid: node `(i, j)` sits at
/// `(origin[0] + i*dx, origin[1] + j*dy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
}

impl Grid2 {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2]) -> Self {
        Self { nx, ny, dx, dy, origin }
    }

    /// Square grid with `n × n` nodes covering `[-half_width, half_width]²`.
    pub fn centered_square(n: usize, half_width: f64) -> Self {
        let h = 2.0 * half_width / (n as f64 - 1.0);
        Self::new(n, n, h, h, [-half_width, -half_width])
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin[0] + i as f64 * self.dx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.origin[1] + j as f64 * self.dy
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Node index and fractional offset of the cell containing `(x, y)`,
    /// or `None` if the point lies outside the grid.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
        let fx = (x - self.origin[0]) / self.dx;
        let fy = (y - self.origin[1]) / self.dy;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (sx, sy) = (fx - i as f64, fy - j as f64);
        if sx > 1.0 || sy > 1.0 {
            return None;
        }
        Some((i, j, sx, sy))
    }
}

/// Bilinear interpolation of a node array at fractional cell coordinates.
pub fn bilinear(a: &Array2<f64>, i: usize, j: usize, sx: f64, sy: f64) -> f64 {
    let v00 = a[[i, j]];
    let v10 = a[[i + 1, j]];
    let v01 = a[[i, j + 1]];
    let v11 = a[[i + 1, j + 1]];
    (1.0 - sx) * (1.0 - sy) * v00 + sx * (1.0 - sy) * v10 + (1.0 - sx) * sy * v01 + sx * sy * v11
}

/// Labels the connected components of `mask`. With `diagonal` set, the
/// eight-neighbourhood is used, otherwise the four-neighbourhood.
/// Returns one label per node (`usize::MAX` outside the mask) and the count.
pub fn label_components(mask: &Array2<bool>, diagonal: bool) -> (Array2<usize>, usize) {
    let (nx, ny) = mask.dim();
    let mut labels = Array2::from_elem((nx, ny), usize::MAX);
    let mut count = 0;
    let mut queue = VecDeque::new();
    for i0 in 0..nx {
        for j0 in 0..ny {
            if !mask[[i0, j0]] || labels[[i0, j0]] != usize::MAX {
                continue;
            }
            labels[[i0, j0]] = count;
            queue.push_back((i0, j0));
            while let Some((i, j)) = queue.pop_front() {
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if (di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0) {
                            continue;
                        }
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            continue;
                        }
                        let (a, b) = (a as usize, b as usize);
                        if mask[[a, b]] && labels[[a, b]] == usize::MAX {
                            labels[[a, b]] = count;
                            queue.push_back((a, b));
                        }
                    }
                }
            }
            count += 1;
        }
    }
    (labels, count)
}

/// Weights of the quadratic Lagrange interpolant through `nodes`,
/// differentiated once and twice at `at`.
pub fn lagrange3(nodes: [f64; 3], at: f64) -> ([f64; 3], [f64; 3]) {
    let [a, b, c] = nodes;
    let da = (a - b) * (a - c);
    let db = (b - a) * (b - c);
    let dc = (c - a) * (c - b);
    let first = [
        ((at - b) + (at - c)) / da,
        ((at - a) + (at - c)) / db,
        ((at - a) + (at - b)) / dc,
    ];
    let second = [2.0 / da, 2.0 / db, 2.0 / dc];
    (first, second)
}

/// Three-point stencil at node `k` of a strictly increasing axis: centred in
/// the interior, one-sided at the two ends. Needs at least three nodes.
#[derive(Clone, Copy, Debug)]
pub struct Stencil3 {
    pub idx: [usize; 3],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
}

impl Stencil3 {
    pub fn at(axis: &[f64], k: usize) -> Self {
        let n = axis.len();
        assert!(n >= 3, "three-point stencil needs at least three nodes");
        let base = k.saturating_sub(1).min(n - 3);
        let idx = [base, base + 1, base + 2];
        let (d1, d2) = lagrange3([axis[idx[0]], axis[idx[1]], axis[idx[2]]], axis[k]);
        Self { idx, d1, d2 }
    }

    pub fn apply1(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.d1[0] * f(self.idx[0]) + self.d1[1] * f(self.idx[1]) + self.d1[2] * f(self.idx[2])
    }

    pub fn apply2(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.d2[0] * f(self.idx[0]) + self.d2[1] * f(self.idx[1]) + self.d2[2] * f(self.idx[2])
    }
}

pub fn is_strictly_increasing(axis: &[f64]) -> bool {
    axis.iter().all(|v| v.is_finite()) && axis.windows(2).all(|w| w[1] > w[0])
}

pub fn uniform_axis(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![start];
    }
    let h = (end - start) / (n as f64 - 1.0);
    (0..n).map(|k| start + k as f64 * h).collect()
}

/// Periodic axis: `n` nodes `start + k*(period/n)`, the endpoint excluded.
pub fn periodic_axis(start: f64, period: f64, n: usize) -> Vec<f64> {
    let h = period / n as f64;
    (0..n).map(|k| start + k as f64 * h).collect()
}

/// A scalar field sampled on a tensor grid over `(z, y, t)`.
///
/// The `z` axis is the distance to the boundary line. When `z[0] == 0` the
/// first slab holds the boundary trace.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Array3<f64>,
}

impl SpaceTimeField {
    pub fn from_fn(z: Vec<f64>, y: Vec<f64>, t: Vec<f64>, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let values = Array3::from_shape_fn((z.len(), y.len(), t.len()), |(a, b, c)| f(z[a], y[b], t[c]));
        Self { z, y, t, values }
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.values.dim()
    }

    pub fn has_trace(&self) -> bool {
        self.z.first() == Some(&0.0)
    }

    /// Checks axis monotonicity and that the value array matches the axes.
    pub fn validate_axes(&self) -> Result<(), String> {
        for (name, axis) in [("z", &self.z), ("y", &self.y), ("t", &self.t)] {
            if axis.is_empty() || !is_strictly_increasing(axis) {
                return Err(format!("{name} axis must be nonempty and strictly increasing"));
            }
        }
        if self.values.dim() != (self.z.len(), self.y.len(), self.t.len()) {
            return Err("value array does not match the axes".into());
        }
        Ok(())
    }

    /// [`validate_axes`](Self::validate_axes) plus `z ≥ 0`.
    pub fn validate(&self) -> Result<(), String> {
        self.validate_axes()?;
        if self.z[0] < 0.0 {
            return Err("z axis must be nonnegative".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lagrange_weights_are_exact_on_quadratics() {
        let nodes = [0.1, 0.35, 0.9];
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 0.5;
        for at in [0.1, 0.35, 0.9, 0.5] {
            let (d1, d2) = lagrange3(nodes, at);
            let v1: f64 = (0..3).map(|k| d1[k] * f(nodes[k])).sum();
            let v2: f64 = (0..3).map(|k| d2[k] * f(nodes[k])).sum();
            assert_relative_eq!(v1, 6.0 * at - 2.0, epsilon = 1e-12);
            assert_relative_eq!(v2, 6.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn stencil_is_one_sided_at_the_ends() {
        let axis = [0.0, 1.0, 3.0, 4.0];
        assert_eq!(Stencil3::at(&axis, 0).idx, [0, 1, 2]);
        assert_eq!(Stencil3::at(&axis, 2).idx, [1, 2, 3]);
        assert_eq!(Stencil3::at(&axis, 3).idx, [1, 2, 3]);
    }

    #[test]
    fn components_respect_connectivity() {
        let mut mask = Array2::from_elem((4, 4), false);
        mask[[0, 0]] = true;
        mask[[1, 1]] = true;
        assert_eq!(label_components(&mask, false).1, 2);
        assert_eq!(label_components(&mask, true).1, 1);
    }

    #[test]
    fn locate_finds_the_containing_cell() {
        let g = Grid2::centered_square(5, 1.0);
        let (i, j, sx, sy) = g.locate(0.25, -1.0).unwrap();
        assert_eq!((i, j), (2, 0));
        assert_relative_eq!(sx, 0.5);
        assert_relative_eq!(sy, 0.0);
        assert!(g.locate(1.5, 0.0).is_none());
        assert_eq!(g.locate(1.0, 1.0).map(|c| (c.0, c.1)), Some((3, 3)));
    }
}
