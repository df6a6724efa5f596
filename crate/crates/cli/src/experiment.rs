use crate::config::{BoundaryKind, Experiment, Initial, IntegratorKind, RunConfig};
use crate::emit::{emit_snapshot, fmt_float};
use hmcf_core::analysis::{holder_norm, NormMode, PairSampling};
use hmcf_core::charts::{errata_report, ChartSample};
use hmcf_core::flow::{containment_check, run_many, Boundary, FlowConfig, Integrator, Trajectory};
use hmcf_core::geometry::HeightField;
use hmcf_core::grid::{periodic_axis, uniform_axis, Grid2, SpaceTimeField};
use hmcf_core::model_pde::{
    discrepancy_report, solve_boundary_problem, BoundaryProblem, BoundarySide, ModelCoefficients, TimeStepping, TraceValues,
};
use hmcf_core::oracle::{circle_csf_radius, radial_evolve, sphere_height, sphere_radius, RadialProfile};
use serde_json::{json, Map, Value};
use std::fmt::{Debug, Display, Write as _};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// A module error in machine-readable form.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub module: &'static str,
    /// Snake-case name of the error variant, e.g. `stiffness`.
    pub reason: String,
    pub message: String,
}

impl Failure {
    pub fn new<E: Debug + Display>(module: &'static str, e: &E) -> Self {
        let debug = format!("{e:?}");
        let variant = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default();
        let mut reason = String::new();
        for (k, c) in variant.chars().enumerate() {
            if c.is_uppercase() && k > 0 {
                reason.push('_');
            }
            reason.push(c.to_ascii_lowercase());
        }
        Self { module, reason, message: e.to_string() }
    }

    fn to_json(&self) -> Value {
        json!({ "module": self.module, "reason": self.reason, "message": self.message })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExitReport {
    /// 0 when no module failed, 2 otherwise.
    pub code: i32,
    pub summary: Value,
    pub summary_path: PathBuf,
}

pub const MODULE_ERROR_CODE: i32 = 2;

type Outcome = io::Result<(Map<String, Value>, Option<Failure>)>;

/// Runs the configured pipeline, writes its files and `summary.json` under
/// `cfg.out`. I/O failures are returned as errors; module failures end up
/// in the summary and the exit code.
pub fn run_experiment(cfg: &RunConfig) -> io::Result<ExitReport> {
    fs::create_dir_all(&cfg.out)?;
    let (mut summary, failure) = match cfg.experiment {
        Experiment::Flow => flow(cfg)?,
        Experiment::ModelPde => model_pde(cfg)?,
        Experiment::ChartsValidate => charts(cfg)?,
        Experiment::Norms => norms(cfg)?,
        Experiment::Oracle => oracle_table(cfg)?,
    };
    summary.insert("experiment".into(), serde_json::to_value(cfg.experiment).map_err(io::Error::other)?);
    summary.insert("seed".into(), json!(cfg.seed));
    summary.insert("config".into(), serde_json::to_value(cfg).map_err(io::Error::other)?);
    let code = match &failure {
        None => {
            summary.insert("status".into(), json!("ok"));
            0
        }
        Some(f) => {
            summary.insert("status".into(), json!("error"));
            summary.insert("error".into(), f.to_json());
            MODULE_ERROR_CODE
        }
    };
    let summary = Value::Object(summary);
    let summary_path = cfg.out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary).map_err(io::Error::other)?)?;
    Ok(ExitReport { code, summary, summary_path })
}

fn write_json(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text)
}

fn flow_config(cfg: &RunConfig, boundary: Boundary) -> FlowConfig {
    FlowConfig {
        dt_safety: cfg.dt_safety,
        t_end: cfg.t_end,
        denom_eps: cfg.denom_eps,
        record_every: cfg.record_every,
        p: cfg.p,
        integrator: match cfg.integrator {
            IntegratorKind::Euler => Integrator::Euler,
            IntegratorKind::Rk2 => Integrator::Rk2,
        },
        boundary,
    }
}

fn sphere_boundary(r0: f64) -> Boundary {
    // Parsing guarantees the sphere covers the grid up to t_end.
    Boundary::Prescribed(Arc::new(move |x, y, t| sphere_height(r0, t, x, y).unwrap_or(f64::NAN)))
}

fn flow(cfg: &RunConfig) -> Outcome {
    let grid = Grid2::centered_square(cfg.grid, cfg.half_width);
    let r0 = cfg.radius;
    let disk = |x: f64, y: f64| (x.hypot(y) - r0).max(0.0).powi(2);
    let sphere = |r: f64| move |x: f64, y: f64| sphere_height(r, 0.0, x, y).unwrap_or(f64::NAN);
    let primary = match cfg.initial {
        Initial::Sphere => HeightField::from_fn(grid, cfg.flat_tol, sphere(r0)),
        Initial::FlatDisk | Initial::Nested => HeightField::from_fn(grid, cfg.flat_tol, disk),
    };
    let primary = match primary {
        Ok(f) => f,
        Err(e) => return Ok((Map::new(), Some(Failure::new("geometry", &e)))),
    };
    let boundary = match cfg.boundary {
        BoundaryKind::Frozen => Boundary::Frozen,
        BoundaryKind::Prescribed => sphere_boundary(r0),
        BoundaryKind::Extrapolate => Boundary::Extrapolate,
    };
    let mut bodies = vec![(primary, flow_config(cfg, boundary))];
    if cfg.initial == Initial::Nested {
        match HeightField::from_fn(grid, cfg.flat_tol, sphere(cfg.outer_radius)) {
            Ok(outer) => bodies.push((outer, flow_config(cfg, sphere_boundary(cfg.outer_radius)))),
            Err(e) => return Ok((Map::new(), Some(Failure::new("geometry", &e)))),
        }
    }
    let trajectories = match run_many(&bodies) {
        Ok(t) => t,
        Err(e) => return Ok((Map::new(), Some(Failure::new("flow", &e)))),
    };

    let mut summary = Map::new();
    let main = &trajectories[0];
    let star = emit_trajectory(main, cfg.p, &cfg.out.join("snapshots"), &mut summary)?;
    if let Some(outer) = trajectories.get(1) {
        emit_trajectory(outer, cfg.p, &cfg.out.join("outer"), &mut Map::new())?;
    }
    summary.insert("star".into(), star);
    summary.insert("dx".into(), json!(grid.dx));

    let failure = main.error.as_ref().map(|e| Failure::new("flow", e));
    match cfg.initial {
        Initial::Sphere => {
            summary.insert("apex".into(), apex_errors(main, r0));
        }
        Initial::FlatDisk | Initial::Nested => {
            summary.insert("interface_radius".into(), radius_errors(main, r0, cfg.p));
        }
    }
    if let [inner, outer] = &trajectories[..] {
        let mut worst = f64::NEG_INFINITY;
        let mut rows = Vec::new();
        for (a, b) in inner.snapshots.iter().zip(&outer.snapshots) {
            match containment_check(&a.field, &b.field) {
                Ok(c) => {
                    worst = worst.max(c);
                    rows.push(json!([a.t, c]));
                }
                Err(e) => return Ok((summary, Some(Failure::new("flow", &e)))),
            }
        }
        summary.insert("containment".into(), json!({ "max": worst, "per_snapshot": rows, "limit": 2.0 * grid.dx }));
    }
    Ok((summary, failure))
}

/// Emits every snapshot and returns the (★) margin history.
fn emit_trajectory(tr: &Trajectory, p: f64, dir: &Path, summary: &mut Map<String, Value>) -> io::Result<Value> {
    let mut margins = Vec::new();
    for s in &tr.snapshots {
        let (_, meta) = emit_snapshot(s, p, dir)?;
        margins.push(json!([meta.t, meta.star.map(|r| r.margin())]));
    }
    let last = tr.last();
    summary.insert("snapshots".into(), json!(tr.snapshots.len()));
    summary.insert("t_final".into(), json!(last.t));
    summary.insert("steps".into(), json!(last.step_count));
    let first = margins.first().and_then(|m| m[1].as_f64());
    let worst = margins.iter().filter_map(|m| m[1].as_f64()).fold(f64::INFINITY, f64::min);
    Ok(json!({
        "lambda": first,
        "final_margin": margins.last().and_then(|m| m[1].as_f64()),
        "min_ratio": first.filter(|l| *l > 0.0 && worst.is_finite()).map(|l| worst / l),
        "margins": margins,
    }))
}

fn apex_errors(tr: &Trajectory, r0: f64) -> Value {
    let f = &tr.snapshots[0].field;
    let g = *f.grid();
    let nearest = |n: usize, x: &dyn Fn(usize) -> f64| (0..n).min_by(|&a, &b| x(a).abs().total_cmp(&x(b).abs())).unwrap_or(0);
    let (i0, j0) = (nearest(g.nx, &|i| g.x(i)), nearest(g.ny, &|j| g.y(j)));
    let mut worst_apex: f64 = 0.0;
    let mut worst_field: f64 = 0.0;
    for s in &tr.snapshots {
        let exact = |i: usize, j: usize| sphere_height(r0, s.t, g.x(i), g.y(j)).unwrap_or(f64::NAN);
        worst_apex = worst_apex.max((s.field.at(i0, j0) - exact(i0, j0)).abs());
        for ((i, j), h) in s.field.values().indexed_iter() {
            worst_field = worst_field.max((h - exact(i, j)).abs());
        }
    }
    json!({
        "max_apex_error": worst_apex,
        "max_field_error": worst_field,
        "final_oracle_radius": sphere_radius(r0, tr.last().t).ok(),
    })
}

fn radius_errors(tr: &Trajectory, r0: f64, p: f64) -> Value {
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for s in &tr.snapshots {
        let Ok(Some(curve)) = crate::emit::snapshot_interface(s, p) else { continue };
        let radii = curve.radii([0.0, 0.0]);
        let measured = radii.iter().sum::<f64>() / radii.len() as f64;
        let Ok(exact) = circle_csf_radius(r0, s.t) else { continue };
        worst = worst.max((measured / exact - 1.0).abs());
        rows.push(json!([s.t, measured, exact]));
    }
    json!({ "max_relative_error": worst, "per_snapshot": rows })
}

/// The trace problem with the manufactured solution `e^{-t} sin y`, plus
/// the coefficient discrepancy report.
fn model_pde(cfg: &RunConfig) -> Outcome {
    let y = periodic_axis(0.0, std::f64::consts::TAU, cfg.grid);
    let dy = y[1] - y[0];
    let problem =
        BoundaryProblem { y: y.clone(), side: BoundarySide::Periodic, initial: y.iter().map(|v| v.sin()).collect(), forcing: None };
    let stepping = TimeStepping { dt: cfg.dt, t_end: cfg.t_end, record_every: cfg.record_every };
    let sol = match solve_boundary_problem(&ModelCoefficients::laplacian(), &problem, stepping) {
        Ok(s) => s,
        Err(e) => return Ok((Map::new(), Some(Failure::new("model_pde", &e)))),
    };
    let mut worst_l2: f64 = 0.0;
    let mut worst_max: f64 = 0.0;
    for (c, &t) in sol.t.iter().enumerate() {
        let errs: Vec<f64> = y.iter().enumerate().map(|(b, yy)| sol.values[[b, c]] - (-t).exp() * yy.sin()).collect();
        worst_l2 = worst_l2.max((errs.iter().map(|e| e * e).sum::<f64>() * dy).sqrt());
        worst_max = worst_max.max(errs.iter().fold(0.0, |m, e| m.max(e.abs())));
    }
    let last = sol.t.len() - 1;
    let mut csv = String::from("y,numeric,exact\n");
    for (b, yy) in y.iter().enumerate() {
        let exact = (-sol.t[last]).exp() * yy.sin();
        writeln!(csv, "{},{},{}", fmt_float(*yy), fmt_float(sol.values[[b, last]]), fmt_float(exact)).expect("string write");
    }
    fs::write(cfg.out.join("boundary_solution.csv"), csv)?;

    // A constant, non-diagonal coefficient set exercises every entry.
    let coeffs = ModelCoefficients::new(1.0, 0.2, 1.0, 0.3, 0.1, -0.2, 0.5).expect("constant coefficients are elliptic");
    let trace = TraceValues { f: 1.0, f_y: 0.5, f_yy: -1.0 };
    let report = match discrepancy_report(&coeffs, cfg.p, [-1.0, 0.3, 0.5], trace, None) {
        Ok(r) => r,
        Err(e) => return Ok((Map::new(), Some(Failure::new("model_pde", &e)))),
    };
    write_json(&cfg.out.join("discrepancy.json"), &report.to_json())?;

    let mut summary = Map::new();
    summary.insert("dy".into(), json!(dy));
    summary.insert("t_final".into(), json!(sol.t[last]));
    summary.insert("max_l2_error".into(), json!(worst_l2));
    summary.insert("max_abs_error".into(), json!(worst_max));
    summary.insert("discrepancy_entries".into(), json!(report.entries.len()));
    Ok((summary, None))
}

fn charts(cfg: &RunConfig) -> Outcome {
    let samples: Vec<ChartSample> = (0..cfg.samples as u64).map(|k| ChartSample::random(cfg.seed.wrapping_add(k))).collect();
    let report = match errata_report(&samples, 1e-6, 1e-3) {
        Ok(r) => r,
        Err(e) => return Ok((Map::new(), Some(Failure::new("charts", &e)))),
    };
    write_json(&cfg.out.join("errata.json"), &report.to_json())?;
    let derived_worst = report.derived_totals.iter().map(|e| e.discrepancy).fold(0.0, f64::max);
    let mut summary = Map::new();
    summary.insert("samples".into(), json!(report.samples));
    summary.insert("failing".into(), json!(report.failing.iter().map(|e| e.name.clone()).collect::<Vec<_>>()));
    summary.insert("passing".into(), json!(report.passing));
    summary.insert("derived_max_relative_error".into(), json!(derived_worst));
    Ok((summary, None))
}

/// Trace node plus `z = e^w` for `w` from `-4·2^k` to 0 in steps `0.5/2^k`.
pub fn refinement_z_axis(level: u32) -> Vec<f64> {
    let scale = f64::from(1u32 << level);
    let (w_min, hw) = (-4.0 * scale, 0.5 / scale);
    let n = (-w_min / hw).round() as usize;
    std::iter::once(0.0).chain((0..=n).map(|k| (w_min + k as f64 * hw).exp())).collect()
}

/// Norm totals of `z^p·smooth` and the tilde sup of `z^{p/2}` under refinement.
fn norms(cfg: &RunConfig) -> Outcome {
    let p = cfg.p;
    let sampling = PairSampling { seed: cfg.seed, ..PairSampling::default() };
    let mut rows = Vec::new();
    for level in 0..cfg.levels as u32 {
        let n = 8 * (1usize << level) + 1;
        let axis = |f: &dyn Fn(f64, f64, f64) -> f64| {
            SpaceTimeField::from_fn(refinement_z_axis(level), uniform_axis(-1.0, 1.0, n), uniform_axis(0.0, 1.0, n), f)
        };
        let smooth = axis(&|z, y, t| z.powf(p) * (1.0 + 0.5 * y * y + t / 3.0) * (-z).exp());
        let rough = axis(&|z, _, _| z.powf(p / 2.0));
        let smooth = holder_norm(&smooth, cfg.alpha, p, NormMode::CAlphaP, sampling);
        let rough = holder_norm(&rough, cfg.alpha, p, NormMode::CAlphaP, sampling);
        let (smooth, rough) = match (smooth, rough) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Ok((Map::new(), Some(Failure::new("analysis", &e)))),
        };
        let tilde_sup = rough.component("tilde", "f").map(|c| c.sup);
        rows.push(json!({ "level": level, "smooth_total": smooth.total, "rough_total": rough.total, "rough_tilde_sup": tilde_sup }));
    }
    let ratios = |key: &str| -> Vec<f64> {
        rows.windows(2).filter_map(|w| Some(w[1][key].as_f64()? / w[0][key].as_f64()?)).collect()
    };
    let mut summary = Map::new();
    summary.insert("smooth_total_ratios".into(), json!(ratios("smooth_total")));
    summary.insert("rough_tilde_sup_ratios".into(), json!(ratios("rough_tilde_sup")));
    summary.insert("levels".into(), Value::Array(rows));
    write_json(&cfg.out.join("norms.json"), &serde_json::to_string_pretty(&summary).map_err(io::Error::other)?)?;
    Ok((summary, None))
}

/// Closed-form sphere and circle laws beside the radial flat-disk oracle.
fn oracle_table(cfg: &RunConfig) -> Outcome {
    let r0 = cfg.radius;
    let disk = |r: f64| (r - r0).max(0.0).powi(2);
    let mut profile = match RadialProfile::from_fn(cfg.half_width.max(2.0 * r0), cfg.grid, cfg.p, cfg.flat_tol, disk) {
        Ok(p) => p,
        Err(e) => return Ok((Map::new(), Some(Failure::new("oracle", &e)))),
    };
    let rows_n = if cfg.t_end > 0.0 { 11 } else { 1 };
    let mut csv = String::from("t,sphere_apex_height,circle_csf_radius,radial_interface_radius\n");
    let mut rows = Vec::new();
    let mut t_prev = 0.0;
    for k in 0..rows_n {
        let t = if rows_n == 1 { 0.0 } else { cfg.t_end * k as f64 / (rows_n - 1) as f64 };
        if t > t_prev {
            profile = match radial_evolve(&profile, t - t_prev, cfg.dt_safety) {
                Ok(p) => p,
                Err(e) => return Ok((Map::new(), Some(Failure::new("oracle", &e)))),
            };
            t_prev = t;
        }
        let apex = sphere_radius(r0, t).ok().map(|r| r0 - r);
        let csf = circle_csf_radius(r0, t).ok();
        let radial = profile.interface_radius();
        let cell = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        writeln!(csv, "{},{},{},{}", fmt_float(t), cell(apex), cell(csf), cell(radial)).expect("string write");
        rows.push(json!([t, apex, csf, radial]));
    }
    fs::write(cfg.out.join("oracle_table.csv"), csv)?;
    let mut summary = Map::new();
    summary.insert("rows".into(), json!(rows));
    Ok((summary, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hmcf_core::flow::FlowError;

    #[test]
    fn failure_reasons_are_snake_case_variants() {
        let f = Failure::new("flow", &FlowError::Stiffness { dt: 1e-12, t: 0.1 });
        assert_eq!((f.module, f.reason.as_str()), ("flow", "stiffness"));
        let f = Failure::new("flow", &FlowError::FlatSetGrew { before: 1, after: 2 });
        assert_eq!(f.reason, "flat_set_grew");
        assert!(f.message.contains("1 components"));
    }

    #[test]
    fn refinement_axes_nest() {
        let (a, b) = (refinement_z_axis(0), refinement_z_axis(1));
        assert_eq!(a[0], 0.0);
        assert_eq!(a.len(), 10);
        assert_eq!(*a.last().unwrap(), 1.0);
        assert_eq!(b.len(), 34);
        assert!((a[1].ln() + 4.0).abs() < 1e-12 && (b[1].ln() + 8.0).abs() < 1e-12);
    }
}
