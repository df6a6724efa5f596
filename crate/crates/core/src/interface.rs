//! The flat-side boundary as a closed polyline: extraction from height
//! fields by marching squares, a polyline curve-shortening integrator and
//! the Hausdorff distance between curves.

use crate::geometry::HeightField;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterfaceError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("level must be positive, got {0}")]
    InvalidLevel(f64),
    #[error("contour leaves the domain; the flat set must close inside the grid")]
    OpenContour,
    #[error("found {0} interface components, expected one")]
    MultipleInterfaces(usize),
    #[error("dt = {dt} violates 0 < dt <= {bound} (quarter squared minimum segment)")]
    InvalidStep { dt: f64, bound: f64 },
}

pub type Point = [f64; 2];

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

/// Closed, simple, counterclockwise polyline (the last point connects back
/// to the first).
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    points: Vec<Point>,
}

impl Curve {
    pub fn new(points: Vec<Point>) -> Result<Self, InterfaceError> {
        let bad = |m: &str| Err(InterfaceError::InvalidCurve(m.into()));
        let n = points.len();
        if n < 8 {
            return bad("need at least 8 points");
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return bad("non-finite coordinates");
        }
        if (0..n).any(|i| points[i] == points[(i + 1) % n]) {
            return bad("consecutive points coincide");
        }
        let curve = Self { points };
        if !(curve.signed_area() > 0.0) {
            return bad("signed area must be positive (counterclockwise)");
        }
        if !curve.is_simple() {
            return bad("polygon self-intersects");
        }
        Ok(curve)
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` about `center`.
    pub fn circle(center: Point, r: f64, n: usize) -> Result<Self, InterfaceError> {
        Self::new(
            (0..n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [center[0] + r * a.cos(), center[1] + r * a.sin()]
                })
                .collect(),
        )
    }

    pub fn ellipse(center: Point, a: f64, b: f64, n: usize) -> Result<Self, InterfaceError> {
        Self::new(
            (0..n)
                .map(|k| {
                    let s = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [center[0] + a * s.cos(), center[1] + b * s.sin()]
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn at(&self, i: isize) -> Point {
        let n = self.points.len() as isize;
        self.points[i.rem_euclid(n) as usize]
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        0.5 * self.segments().map(|(a, b)| cross(a, b)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).sum()
    }

    pub fn min_segment(&self) -> f64 {
        self.segments().map(|(a, b)| dist(a, b)).fold(f64::INFINITY, f64::min)
    }

    pub fn centroid(&self) -> Point {
        let a = self.signed_area();
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.segments() {
            let c = cross(p, q);
            cx += (p[0] + q[0]) * c;
            cy += (p[1] + q[1]) * c;
        }
        [cx / (6.0 * a), cy / (6.0 * a)]
    }

    /// Distances of the vertices from `center`.
    pub fn radii(&self, center: Point) -> Vec<f64> {
        self.points.iter().map(|&p| dist(p, center)).collect()
    }

    /// Signed curvature at each vertex from the circle through the vertex
    /// and its two neighbours; positive on convex counterclockwise arcs.
    pub fn discrete_curvatures(&self) -> Vec<f64> {
        (0..self.points.len() as isize).map(|i| circumcurvature(self.at(i - 1), self.at(i), self.at(i + 1))).collect()
    }

    /// Outward unit normal at each vertex, perpendicular to the chord
    /// joining the two neighbours.
    pub fn outward_normals(&self) -> Vec<Point> {
        (0..self.points.len() as isize)
            .map(|i| {
                let d = sub(self.at(i + 1), self.at(i - 1));
                let l = norm(d);
                [d[1] / l, -d[0] / l]
            })
            .collect()
    }

    fn is_simple(&self) -> bool {
        let n = self.points.len();
        let segs: Vec<(Point, Point)> = self.segments().collect();
        for i in 0..n {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                if segments_cross(segs[i], segs[j]) {
                    return false;
                }
            }
        }
        true
    }

    /// Uniform arc-length resampling with `n` vertices, starting at the
    /// first vertex.
    pub fn resampled(&self, n: usize) -> Result<Self, InterfaceError> {
        let total = self.perimeter();
        let segs: Vec<(Point, Point, f64)> = self.segments().map(|(a, b)| (a, b, dist(a, b))).collect();
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        let mut start = 0.0;
        for m in 0..n {
            let s = total * m as f64 / n as f64;
            while k + 1 < segs.len() && start + segs[k].2 < s {
                start += segs[k].2;
                k += 1;
            }
            let (a, b, l) = segs[k];
            let f = if l > 0.0 { ((s - start) / l).clamp(0.0, 1.0) } else { 0.0 };
            out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
        }
        Self::new(out)
    }
}

fn circumcurvature(a: Point, b: Point, c: Point) -> f64 {
    let denom = dist(a, b) * dist(b, c) * dist(c, a);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * cross(sub(b, a), sub(c, b)) / denom
}

fn segments_cross(s: (Point, Point), t: (Point, Point)) -> bool {
    let (p1, p2) = s;
    let (q1, q2) = t;
    let d1 = cross(sub(p2, p1), sub(q1, p1));
    let d2 = cross(sub(p2, p1), sub(q2, p1));
    let d3 = cross(sub(q2, q1), sub(p1, q1));
    let d4 = cross(sub(q2, q1), sub(p2, q1));
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// How a crossing point is placed along a cell edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Interpolation {
    /// Linear in the height.
    Linear,
    /// Linear in `h^p`; exact for heights vanishing like `dist^{1/p}`.
    Power(f64),
}

/// Contour of `h = level` around the flat set, counterclockwise.
pub fn extract_interface(field: &HeightField, level: f64) -> Result<Option<Curve>, InterfaceError> {
    extract_interface_with(field, level, Interpolation::Linear)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

pub fn extract_interface_with(
    field: &HeightField,
    level: f64,
    interp: Interpolation,
) -> Result<Option<Curve>, InterfaceError> {
    if !(level > 0.0) {
        return Err(InterfaceError::InvalidLevel(level));
    }
    let h = field.values();
    let grid = field.grid();
    let (nx, ny) = (field.nx(), field.ny());
    let inside = |i: usize, j: usize| h[[i, j]] < level;
    let transform = |v: f64| match interp {
        Interpolation::Linear => v,
        Interpolation::Power(p) => v.max(0.0).powf(p),
    };
    let point = |key: EdgeKey| -> Point {
        let (a, b) = match key {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (va, vb) = (transform(h[[a.0, a.1]]), transform(h[[b.0, b.1]]));
        let lv = transform(level);
        let mut s = ((lv - va) / (vb - va)).clamp(0.0, 1.0);
        if let Interpolation::Power(_) = interp {
            // The pressure is clamped at zero inside, so interpolating across
            // the edge pins the crossing to the inside node. Extrapolate from
            // the outside instead, where the pressure is close to linear.
            let (outer, step) = if va < vb { (b, 1i64) } else { (a, -1i64) };
            let (di, dj) = (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64);
            let (ci, cj) = (outer.0 as i64 + step * di, outer.1 as i64 + step * dj);
            if ci >= 0 && cj >= 0 && (ci as usize) < nx && (cj as usize) < ny {
                let (vo, vc) = (transform(h[[outer.0, outer.1]]), transform(h[[ci as usize, cj as usize]]));
                if vc > vo {
                    let back = (vo - lv) / (vc - vo);
                    s = if va < vb { 1.0 - back } else { back }.clamp(0.0, 1.0);
                }
            }
        }
        let (xa, ya) = (grid.x(a.0), grid.y(a.1));
        let (xb, yb) = (grid.x(b.0), grid.y(b.1));
        [xa + s * (xb - xa), ya + s * (yb - ya)]
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for i in 0..nx - 1 {
        for j in 0..ny - 1 {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            let count = c.iter().filter(|&&b| b).count();
            if count == 0 || count == 4 {
                continue;
            }
            let e = [EdgeKey::H(i, j), EdgeKey::V(i + 1, j), EdgeKey::H(i, j + 1), EdgeKey::V(i, j)];
            // Corner k touches edges e[(k+3)%4] and e[k].
            let centre_inside = 0.25 * (h[[i, j]] + h[[i + 1, j]] + h[[i + 1, j + 1]] + h[[i, j + 1]]) < level;
            let saddle = count == 2 && c[0] == c[2];
            if saddle {
                for k in 0..4 {
                    if c[k] != centre_inside {
                        segments.push((e[(k + 3) % 4], e[k]));
                    }
                }
            } else {
                let crossed: Vec<EdgeKey> = (0..4).filter(|&k| c[k] != c[(k + 1) % 4]).map(|k| e[k]).collect();
                segments.push((crossed[0], crossed[1]));
            }
        }
    }
    if segments.is_empty() {
        return Ok(None);
    }

    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut loops: Vec<Vec<Point>> = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let first = segments[start].0;
        let mut edge = segments[start].1;
        let mut current = start;
        let mut pts = vec![point(first)];
        while edge != first {
            pts.push(point(edge));
            let next = by_edge[&edge].iter().copied().find(|&s| s != current && !used[s]);
            let Some(next) = next else {
                return Err(InterfaceError::OpenContour);
            };
            used[next] = true;
            let (a, b) = segments[next];
            edge = if a == edge { b } else { a };
            current = next;
        }
        if by_edge[&first].len() < 2 {
            return Err(InterfaceError::OpenContour);
        }
        loops.push(pts);
    }

    let tiny = 1e-12 * grid.dx.min(grid.dy);
    let mut curves = Vec::new();
    for mut pts in loops {
        pts.dedup_by(|a, b| dist(*a, *b) <= tiny);
        while pts.len() > 1 && dist(pts[0], *pts.last().unwrap()) <= tiny {
            pts.pop();
        }
        // Loops below grid resolution (e.g. an isolated zero node at a
        // sphere apex) carry no interface.
        if pts.len() < 8 {
            continue;
        }
        let area: f64 = 0.5 * (0..pts.len()).map(|k| cross(pts[k], pts[(k + 1) % pts.len()])).sum::<f64>();
        if area < 0.0 {
            pts.reverse();
        }
        curves.push(Curve::new(pts)?);
    }
    match curves.len() {
        0 => Ok(None),
        1 => Ok(curves.pop()),
        n => Err(InterfaceError::MultipleInterfaces(n)),
    }
}

/// Result of one curve-shortening step.
#[derive(Clone, Debug, PartialEq)]
pub enum CsfOutcome {
    Evolved(Curve),
    /// The curve collapsed below eight usable vertices or lost its area.
    Extinct,
}

/// One explicit curve-shortening step: each vertex moves by `k·dt` along
/// the inward normal.
pub fn csf_step(curve: &Curve, dt: f64) -> Result<CsfOutcome, InterfaceError> {
    let bound = 0.25 * curve.min_segment().powi(2);
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(InterfaceError::InvalidStep { dt, bound });
    }
    let kappa = curve.discrete_curvatures();
    let normals = curve.outward_normals();
    let mut pts: Vec<Point> = curve
        .points()
        .iter()
        .zip(kappa.iter().zip(&normals))
        .map(|(p, (k, n))| [p[0] - dt * k * n[0], p[1] - dt * k * n[1]])
        .collect();
    let tiny = 1e-9 * curve.perimeter();
    pts.dedup_by(|a, b| dist(*a, *b) <= tiny);
    while pts.len() > 1 && dist(pts[0], *pts.last().unwrap()) <= tiny {
        pts.pop();
    }
    if pts.len() < 8 {
        return Ok(CsfOutcome::Extinct);
    }
    match Curve::new(pts) {
        Ok(c) => Ok(CsfOutcome::Evolved(c)),
        Err(_) => Ok(CsfOutcome::Extinct),
    }
}

/// Curve-shortening run with arc-length resampling every `resample_every`
/// steps (back to the initial vertex count).
#[derive(Clone, Debug)]
pub struct CsfRun {
    pub curve: Curve,
    pub t: f64,
    pub steps: usize,
    pub extinct: bool,
}

pub fn csf_evolve(curve: &Curve, t_end: f64, dt_safety: f64, resample_every: usize) -> Result<CsfRun, InterfaceError> {
    let n = curve.len();
    let mut run = CsfRun { curve: curve.clone(), t: 0.0, steps: 0, extinct: false };
    while run.t < t_end {
        let dt = (dt_safety * 0.25 * run.curve.min_segment().powi(2)).min(t_end - run.t);
        match csf_step(&run.curve, dt)? {
            CsfOutcome::Evolved(c) => run.curve = c,
            CsfOutcome::Extinct => {
                run.extinct = true;
                return Ok(run);
            }
        }
        run.t += dt;
        run.steps += 1;
        if resample_every > 0 && run.steps.is_multiple_of(resample_every) {
            run.curve = run.curve.resampled(n)?;
        }
        if t_end - run.t <= 1e-14 * t_end {
            run.t = t_end;
        }
    }
    Ok(run)
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = sub(b, a);
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if l2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    dist(p, [a[0] + s * ab[0], a[1] + s * ab[1]])
}

const SEGMENT_SAMPLES: usize = 4;

fn directed_hausdorff(a: &Curve, b: &Curve) -> f64 {
    let mut worst: f64 = 0.0;
    for (p, q) in a.segments() {
        for m in 0..SEGMENT_SAMPLES {
            let s = m as f64 / SEGMENT_SAMPLES as f64;
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            let d = b.segments().map(|(u, v)| point_segment_distance(x, u, v)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Symmetric Hausdorff distance between two polylines, sampling each
/// segment of one curve and measuring point-to-segment distance to the
/// other.
pub fn curve_distance(a: &Curve, b: &Curve) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2;
    use approx::assert_relative_eq;

    #[test]
    fn curve_invariants() {
        assert!(Curve::circle([0.0, 0.0], 1.0, 7).is_err());
        let mut cw: Vec<Point> = Curve::circle([0.0, 0.0], 1.0, 16).unwrap().points().to_vec();
        cw.reverse();
        assert!(Curve::new(cw).is_err());
        // Figure eight.
        let eight: Vec<Point> = (0..32)
            .map(|k| {
                let s = 2.0 * std::f64::consts::PI * k as f64 / 32.0;
                [s.sin(), (2.0 * s).sin() + 0.1]
            })
            .collect();
        assert!(Curve::new(eight).is_err());
    }

    #[test]
    fn regular_polygon_has_unit_curvature() {
        let c = Curve::circle([0.3, -0.2], 1.0, 256).unwrap();
        for k in c.discrete_curvatures() {
            assert!((k - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn circle_step_matches_the_ode() {
        let c = Curve::circle([0.0, 0.0], 1.0, 32).unwrap();
        let CsfOutcome::Evolved(next) = csf_step(&c, 1e-3).unwrap() else { panic!("extinct") };
        let expect = (1.0f64 - 2e-3).sqrt();
        for r in next.radii([0.0, 0.0]) {
            assert_relative_eq!(r, expect, max_relative = 1e-6);
        }
    }

    #[test]
    fn oversized_step_is_rejected() {
        let c = Curve::circle([0.0, 0.0], 1.0, 256).unwrap();
        assert!(matches!(csf_step(&c, 1e-3), Err(InterfaceError::InvalidStep { .. })));
    }

    #[test]
    fn ellipse_stays_convex_and_loses_area() {
        let mut c = Curve::ellipse([0.0, 0.0], 1.0, 0.5, 64).unwrap();
        for _ in 0..100 {
            let dt = 0.2 * c.min_segment().powi(2);
            let before = c.signed_area();
            let CsfOutcome::Evolved(next) = csf_step(&c, dt).unwrap() else { panic!("extinct") };
            assert!(next.signed_area() < before);
            assert!(next.discrete_curvatures().iter().all(|&k| k > 0.0));
            c = next;
        }
    }

    #[test]
    fn circle_shrinks_self_similarly() {
        let r0 = 1.0;
        let c = Curve::circle([0.0, 0.0], r0, 64).unwrap();
        let run = csf_evolve(&c, 0.2, 0.5, 10).unwrap();
        let centre = run.curve.centroid();
        let radii = run.curve.radii(centre);
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        assert!(radii.iter().all(|r| (r - mean).abs() <= 1e-4 * r0));
        let expect = (r0 * r0 - 2.0 * 0.2f64).sqrt();
        assert_relative_eq!(mean, expect, max_relative = 1e-3);
    }

    #[test]
    fn tiny_curve_goes_extinct() {
        let c = Curve::circle([0.0, 0.0], 0.1, 8).unwrap();
        let run = csf_evolve(&c, 1.0, 0.9, 10).unwrap();
        assert!(run.extinct);
    }

    #[test]
    fn distances() {
        let a = Curve::circle([0.0, 0.0], 1.0, 256).unwrap();
        assert!(curve_distance(&a, &a) < 1e-15);
        let b = Curve::circle([0.0, 0.0], 1.1, 256).unwrap();
        assert_relative_eq!(curve_distance(&a, &b), 0.1, epsilon = 1e-3);
        let c = Curve::circle([0.3, 0.0], 1.0, 256).unwrap();
        assert_relative_eq!(curve_distance(&a, &c), 0.3, epsilon = 1e-3);
        assert_eq!(curve_distance(&a, &c), curve_distance(&c, &a));
    }

    /// Brute force: dense sampling of both curves, point-to-point only.
    #[test]
    fn hausdorff_agrees_with_dense_point_sampling() {
        let a = Curve::ellipse([0.0, 0.0], 1.0, 0.6, 40).unwrap();
        let b = Curve::circle([0.2, 0.1], 0.8, 50).unwrap();
        let dense = |c: &Curve| -> Vec<Point> {
            c.segments()
                .flat_map(|(p, q)| {
                    (0..200).map(move |m| {
                        let s = m as f64 / 200.0;
                        [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
                    })
                })
                .collect()
        };
        let (da, db) = (dense(&a), dense(&b));
        let directed = |x: &[Point], y: &[Point]| {
            x.iter().map(|p| y.iter().map(|q| dist(*p, *q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
        };
        let brute = directed(&da, &db).max(directed(&db, &da));
        assert!((curve_distance(&a, &b) - brute).abs() < 5e-3, "{} vs {}", curve_distance(&a, &b), brute);
    }

    #[test]
    fn extracts_the_flat_disk() {
        let grid = Grid2::centered_square(101, 1.0);
        let f = HeightField::from_fn(grid, 1e-9, |x, y| ((x * x + y * y).sqrt() - 0.5).max(0.0).powi(2)).unwrap();
        let c = extract_interface(&f, 1e-9).unwrap().unwrap();
        assert!(c.signed_area() > 0.0);
        for r in c.radii([0.0, 0.0]) {
            assert!((r - 0.5).abs() <= grid.dx, "radius {r}");
        }
        let c = extract_interface_with(&f, 1e-9, Interpolation::Power(0.5)).unwrap().unwrap();
        for r in c.radii([0.0, 0.0]) {
            assert!((r - 0.5).abs() <= 0.1 * grid.dx, "radius {r}");
        }
    }

    #[test]
    fn no_flat_side_gives_none() {
        let grid = Grid2::centered_square(21, 1.0);
        let f = HeightField::from_fn(grid, 1e-9, |x, y| 1.0 + x * x + y * y).unwrap();
        assert_eq!(extract_interface(&f, 1e-9).unwrap(), None);
    }

    #[test]
    fn clipped_flat_set_is_rejected() {
        let grid = Grid2::centered_square(21, 1.0);
        let f = HeightField::from_fn(grid, 1e-9, |x, y| (x.max(0.0)).powi(2) * (1.0 + 0.1 * y * y)).unwrap();
        assert_eq!(extract_interface(&f, 1e-9), Err(InterfaceError::OpenContour));
    }

    #[test]
    fn single_zero_node_is_below_resolution() {
        let grid = Grid2::centered_square(21, 0.5);
        let f = HeightField::from_fn(grid, 1e-9, |x, y| 1.0 - (1.0 - x * x - y * y).sqrt()).unwrap();
        assert_eq!(extract_interface(&f, 1e-9).unwrap(), None);
    }

    #[test]
    fn level_must_be_positive() {
        let grid = Grid2::centered_square(21, 1.0);
        let f = HeightField::from_fn(grid, 1e-9, |x, _| x * x).unwrap();
        assert!(matches!(extract_interface(&f, 0.0), Err(InterfaceError::InvalidLevel(_))));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn extraction_recovers_the_disk_radius(r in 0.2f64..0.7, cx in -0.2f64..0.2, cy in -0.2f64..0.2, k in 2i32..4) {
            let grid = Grid2::centered_square(81, 1.0);
            let f = HeightField::from_fn(grid, 1e-9, |x, y| ((x - cx).hypot(y - cy) - r).max(0.0).powi(k)).unwrap();
            let c = extract_interface(&f, 1e-9).unwrap().unwrap();
            proptest::prop_assert!(c.signed_area() > 0.0);
            for q in c.radii([cx, cy]) {
                proptest::prop_assert!((q - r).abs() <= grid.dx);
            }
        }

        #[test]
        fn convex_curves_lose_area_every_step(a in 0.5f64..1.5, b in 0.3f64..1.0, n in 32usize..96) {
            let mut c = Curve::ellipse([0.1, -0.2], a, b, n).unwrap();
            for _ in 0..20 {
                let before = c.signed_area();
                let CsfOutcome::Evolved(next) = csf_step(&c, 0.25 * c.min_segment().powi(2)).unwrap() else { break };
                proptest::prop_assert!(next.signed_area() < before);
                c = next;
            }
        }

        #[test]
        fn hausdorff_distance_is_a_metric(r1 in 0.2f64..1.0, r2 in 0.2f64..1.0, dx in -0.5f64..0.5) {
            let a = Curve::circle([0.0, 0.0], r1, 48).unwrap();
            let b = Curve::ellipse([dx, 0.0], r2, 0.8 * r2, 40).unwrap();
            proptest::prop_assert!(curve_distance(&a, &a) < 1e-15);
            proptest::prop_assert!((curve_distance(&a, &b) - curve_distance(&b, &a)).abs() < 1e-14);
            proptest::prop_assert!(curve_distance(&a, &b) > 0.0);
        }
    }
}
