use super::metric::s_bar;
use super::{check_exponent, AnalysisError};
use crate::grid::{SpaceTimeField, Stencil3};
use ndarray::{Array3, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormMode {
    /// `C^{α,p}_s`: the field itself.
    CAlphaP,
    /// `C^{2+α,p}_s`: the field and its weighted derivatives.
    C2AlphaP,
}

/// Pair sample for the seminorm sup: every pair whose index offset lies
/// within `stencil_radius` on each axis, plus `random_pairs` uniformly drawn
/// long-range pairs. Pairs are drawn over the whole grid and then filtered to
/// the region, so a sub-box always sees a subset of the pairs of its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSampling {
    pub seed: u64,
    pub stencil_radius: usize,
    pub random_pairs: usize,
}

impl Default for PairSampling {
    fn default() -> Self {
        Self { seed: 0, stencil_radius: 2, random_pairs: 10_000 }
    }
}

/// Half-open index ranges into the `(z, y, t)` axes of a field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBox {
    pub z: Range<usize>,
    pub y: Range<usize>,
    pub t: Range<usize>,
}

impl NodeBox {
    pub fn full(field: &SpaceTimeField) -> Self {
        let (nz, ny, nt) = field.dim();
        Self { z: 0..nz, y: 0..ny, t: 0..nt }
    }

    pub fn contains_box(&self, other: &NodeBox) -> bool {
        let sub = |a: &Range<usize>, b: &Range<usize>| b.is_empty() || (a.start <= b.start && b.end <= a.end);
        sub(&self.z, &other.z) && sub(&self.y, &other.y) && sub(&self.t, &other.t)
    }

    pub fn node_count(&self) -> usize {
        self.z.len() * self.y.len() * self.t.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentNorm {
    pub name: String,
    /// `"boundary"` for the trace part `f°`, `"tilde"` for `z^{-p}(f − f°)`.
    pub part: String,
    pub sup: f64,
    pub seminorm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub c0: f64,
    pub holder_seminorm: f64,
    pub total: f64,
    pub alpha: f64,
    pub pairs_sampled: usize,
    pub components: Vec<ComponentNorm>,
}

impl NormReport {
    pub fn component(&self, part: &str, name: &str) -> Option<&ComponentNorm> {
        self.components.iter().find(|c| c.part == part && c.name == name)
    }
}

/// Discrete `C^{α,p}_s` or `C^{2+α,p}_s` norm of a field whose first `z`
/// slab is the trace at `z = 0`, over the whole grid.
pub fn holder_norm(
    field: &SpaceTimeField,
    alpha: f64,
    p: f64,
    mode: NormMode,
    sampling: PairSampling,
) -> Result<NormReport, AnalysisError> {
    holder_norm_in(field, alpha, p, mode, sampling, &NodeBox::full(field))
}

/// [`holder_norm`] restricted to the nodes of `region`. Derivatives are taken
/// on the full grid before restriction. The trace part is measured over the
/// `(y, t)` ranges of the region.
///
/// The norm is the sum over components and parts of sup plus Hölder
/// seminorm. Tilde pairs are measured in the parabolic hyperbolic distance,
/// trace pairs in `|Δy| + sqrt|Δt|`.
pub fn holder_norm_in(
    field: &SpaceTimeField,
    alpha: f64,
    p: f64,
    mode: NormMode,
    sampling: PairSampling,
    region: &NodeBox,
) -> Result<NormReport, AnalysisError> {
    check_exponent(p)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AnalysisError::Domain(format!("alpha = {alpha} outside (0, 1]")));
    }
    field.validate().map_err(AnalysisError::InvalidField)?;
    if !field.has_trace() {
        return Err(AnalysisError::InvalidField("the first z node must be the trace z = 0".into()));
    }
    let (nz, ny, nt) = field.dim();
    if nz < 2 {
        return Err(AnalysisError::InvalidField("need a z > 0 node besides the trace".into()));
    }
    if !NodeBox::full(field).contains_box(region) || region.node_count() == 0 {
        return Err(AnalysisError::Window("region is empty or exceeds the grid".into()));
    }
    let parts = split_components(field, p, mode)?;

    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed);
    let tilde_dims = [nz - 1, ny, nt];
    let tilde_random = random_pairs(&mut rng, tilde_dims, sampling.random_pairs);
    let trace_dims = [1, ny, nt];
    let trace_random = random_pairs(&mut rng, trace_dims, sampling.random_pairs);

    let lnz: Vec<f64> = field.z[1..].iter().map(|z| z.ln()).collect();
    let zs = &field.z[1..];
    let (y, t) = (&field.y, &field.t);
    let tilde_box = NodeBox {
        z: region.z.start.max(1) - 1..region.z.end.saturating_sub(1),
        y: region.y.clone(),
        t: region.t.clone(),
    };
    let trace_box = NodeBox { z: 0..1, y: region.y.clone(), t: region.t.clone() };

    let mut components = Vec::new();
    let mut pairs_sampled = 0;
    let tilde_views: Vec<ArrayView3<f64>> = parts.tilde.iter().map(|(_, a)| a.view()).collect();
    if tilde_box.node_count() > 0 {
        let dist = |a: [usize; 3], b: [usize; 3]| {
            s_bar(zs[a[0]], lnz[a[0]], y[a[1]], zs[b[0]], lnz[b[0]], y[b[1]]) + (t[a[2]] - t[b[2]]).abs().sqrt()
        };
        let (sups, semis, count) = sweep(&tilde_views, &tilde_box, sampling.stencil_radius, &tilde_random, alpha, dist);
        pairs_sampled += count;
        for (k, (name, _)) in parts.tilde.iter().enumerate() {
            components.push(ComponentNorm { name: name.to_string(), part: "tilde".into(), sup: sups[k], seminorm: semis[k] });
        }
    }
    let trace_views: Vec<ArrayView3<f64>> = parts.boundary.iter().map(|(_, a)| a.view()).collect();
    let dist = |a: [usize; 3], b: [usize; 3]| (y[a[1]] - y[b[1]]).abs() + (t[a[2]] - t[b[2]]).abs().sqrt();
    let (sups, semis, count) = sweep(&trace_views, &trace_box, sampling.stencil_radius, &trace_random, alpha, dist);
    pairs_sampled += count;
    for (k, (name, _)) in parts.boundary.iter().enumerate() {
        components.push(ComponentNorm { name: name.to_string(), part: "boundary".into(), sup: sups[k], seminorm: semis[k] });
    }
    if pairs_sampled == 0 {
        return Err(AnalysisError::Sampling("no pair of distinct nodes in the region".into()));
    }
    let c0: f64 = components.iter().map(|c| c.sup).sum();
    let holder_seminorm: f64 = components.iter().map(|c| c.seminorm).sum();
    Ok(NormReport { c0, holder_seminorm, total: c0 + holder_seminorm, alpha, pairs_sampled, components })
}

struct Parts {
    boundary: Vec<(&'static str, Array3<f64>)>,
    tilde: Vec<(&'static str, Array3<f64>)>,
}

/// Trace parts (shape `(1, ny, nt)`) and tilde parts (shape `(nz−1, ny, nt)`)
/// of every component the mode measures. `z`-derivatives are taken in
/// `w = ln z`: `z f_z = f_w` and `z² f_zz = f_ww − f_w`.
fn split_components(field: &SpaceTimeField, p: f64, mode: NormMode) -> Result<Parts, AnalysisError> {
    let (nz, ny, nt) = field.dim();
    let f = &field.values;
    let trace = f.slice(ndarray::s![0..1, .., ..]).to_owned();
    let inner = f.slice(ndarray::s![1.., .., ..]).to_owned();
    let weight: Vec<f64> = field.z[1..].iter().map(|z| z.powf(-p)).collect();
    let tilde_of = |d: &Array3<f64>, tr: Option<&Array3<f64>>| {
        Array3::from_shape_fn(d.dim(), |(a, b, c)| weight[a] * (d[[a, b, c]] - tr.map_or(0.0, |tr| tr[[0, b, c]])))
    };
    match mode {
        NormMode::CAlphaP => Ok(Parts {
            tilde: vec![("f", tilde_of(&inner, Some(&trace)))],
            boundary: vec![("f", trace)],
        }),
        NormMode::C2AlphaP => {
            if nz < 4 || ny < 3 || nt == 2 {
                return Err(AnalysisError::InvalidField(
                    "the 2+α norm needs three z > 0 nodes, three y nodes and one or at least three t nodes".into(),
                ));
            }
            let w: Vec<f64> = field.z[1..].iter().map(|z| z.ln()).collect();
            let fw = diff(&inner, Axis(0), &w, 1);
            let fww = diff(&inner, Axis(0), &w, 2);
            let fy = diff(&inner, Axis(1), &field.y, 1);
            let fyy = diff(&inner, Axis(1), &field.y, 2);
            let fwy = diff(&fw, Axis(1), &field.y, 1);
            let ty = diff(&trace, Axis(1), &field.y, 1);
            let tyy = diff(&trace, Axis(1), &field.y, 2);
            let mut tilde = vec![
                ("f", tilde_of(&inner, Some(&trace))),
                ("z f_z", tilde_of(&fw, None)),
                ("f_y", tilde_of(&fy, Some(&ty))),
                ("z^2 f_zz", tilde_of(&(&fww - &fw), None)),
                ("z f_zy", tilde_of(&fwy, None)),
                ("f_yy", tilde_of(&fyy, Some(&tyy))),
            ];
            let mut boundary = vec![("f", trace.clone()), ("f_y", ty), ("f_yy", tyy)];
            if nt > 1 {
                let ft = diff(&inner, Axis(2), &field.t, 1);
                let tt = diff(&trace, Axis(2), &field.t, 1);
                tilde.push(("f_t", tilde_of(&ft, Some(&tt))));
                boundary.push(("f_t", tt));
            }
            Ok(Parts { boundary, tilde })
        }
    }
}

/// Three-point derivative of order `order` along `axis` with coordinates `x`.
fn diff(a: &Array3<f64>, axis: Axis, x: &[f64], order: u8) -> Array3<f64> {
    let stencils: Vec<Stencil3> = (0..x.len()).map(|k| Stencil3::at(x, k)).collect();
    Array3::from_shape_fn(a.dim(), |(i, j, k)| {
        let idx = [i, j, k];
        let s = &stencils[idx[axis.index()]];
        let at = |m: usize| {
            let mut q = idx;
            q[axis.index()] = m;
            a[q]
        };
        if order == 1 { s.apply1(at) } else { s.apply2(at) }
    })
}

fn random_pairs(rng: &mut ChaCha8Rng, dims: [usize; 3], n: usize) -> Vec<([usize; 3], [usize; 3])> {
    let total = dims[0] * dims[1] * dims[2];
    let unflatten = |l: usize| [l / (dims[1] * dims[2]), (l / dims[2]) % dims[1], l % dims[2]];
    (0..n)
        .map(|_| (unflatten(rng.random_range(0..total)), unflatten(rng.random_range(0..total))))
        .collect()
}

fn in_box(b: &NodeBox, q: [usize; 3]) -> bool {
    b.z.contains(&q[0]) && b.y.contains(&q[1]) && b.t.contains(&q[2])
}

/// Per-component sup and seminorm over the region, plus the number of pairs
/// at positive distance that entered the sup.
fn sweep(
    comps: &[ArrayView3<f64>],
    region: &NodeBox,
    radius: usize,
    random: &[([usize; 3], [usize; 3])],
    alpha: f64,
    dist: impl Fn([usize; 3], [usize; 3]) -> f64 + Sync,
) -> (Vec<f64>, Vec<f64>, usize) {
    let m = comps.len();
    let r = radius as i64;
    let offsets: Vec<[i64; 3]> = (-r..=r)
        .flat_map(|a| (-r..=r).flat_map(move |b| (-r..=r).map(move |c| [a, b, c])))
        .filter(|o| *o > [0, 0, 0])
        .collect();
    let nodes: Vec<[usize; 3]> = region
        .z
        .clone()
        .flat_map(|a| region.y.clone().flat_map(move |b| region.t.clone().map(move |c| [a, b, c])))
        .collect();
    #[allow(clippy::needless_range_loop)]
    let visit = |acc: &mut (Vec<f64>, Vec<f64>, usize), a: [usize; 3], b: [usize; 3]| {
        let d = dist(a, b);
        if d > 0.0 {
            let da = d.powf(alpha);
            for k in 0..m {
                let ratio = (comps[k][a] - comps[k][b]).abs() / da;
                acc.1[k] = acc.1[k].max(ratio);
            }
            acc.2 += 1;
        }
    };
    let merge = |mut x: (Vec<f64>, Vec<f64>, usize), y: (Vec<f64>, Vec<f64>, usize)| {
        for k in 0..m {
            x.0[k] = x.0[k].max(y.0[k]);
            x.1[k] = x.1[k].max(y.1[k]);
        }
        x.2 += y.2;
        x
    };
    let empty = || (vec![0.0f64; m], vec![0.0f64; m], 0usize);
    let local = nodes
        .par_iter()
        .fold(empty, |mut acc, &a| {
            for (c0, comp) in acc.0.iter_mut().zip(comps.iter()) {
                *c0 = c0.max(comp[a].abs());
            }
            for o in &offsets {
                let q = [a[0] as i64 + o[0], a[1] as i64 + o[1], a[2] as i64 + o[2]];
                if q.iter().any(|&v| v < 0) {
                    continue;
                }
                let b = [q[0] as usize, q[1] as usize, q[2] as usize];
                if in_box(region, b) {
                    visit(&mut acc, a, b);
                }
            }
            acc
        })
        .reduce(empty, merge);
    let mut long = empty();
    for &(a, b) in random {
        if in_box(region, a) && in_box(region, b) {
            visit(&mut long, a, b);
        }
    }
    let (sups, semis, count) = merge(local, long);
    (sups, semis, count)
}

/// Grid nodes of `B_r(P)`: `z ≥ 0`, `|z − z0| ≤ e^r`, `|y − y0| ≤ r`,
/// `t0 − r² ≤ t ≤ t0`.
pub fn schauder_box(field: &SpaceTimeField, center: [f64; 3], r: f64) -> Result<NodeBox, AnalysisError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(AnalysisError::Domain(format!("box radius {r} outside (0, 1]")));
    }
    field.validate().map_err(AnalysisError::InvalidField)?;
    let [z0, y0, t0] = center;
    let range = |axis: &[f64], lo: f64, hi: f64| {
        let start = axis.partition_point(|&v| v < lo);
        let end = axis.partition_point(|&v| v <= hi);
        start..end.max(start)
    };
    let b = NodeBox {
        z: range(&field.z, (z0 - r.exp()).max(0.0), z0 + r.exp()),
        y: range(&field.y, y0 - r, y0 + r),
        t: range(&field.t, t0 - r * r, t0),
    };
    if b.node_count() == 0 {
        return Err(AnalysisError::Window(format!("box of radius {r} around {center:?} holds no grid node")));
    }
    Ok(b)
}
