//! Cross-module checks: flow output feeding the analysis, interface and
//! model-operator layers.

use hmcf_core::analysis::{check_star, log_decompose, pressure};
use hmcf_core::flow::{containment_check, run, run_many, Boundary, FlowConfig};
use hmcf_core::geometry::HeightField;
use hmcf_core::grid::{uniform_axis, Grid2, SpaceTimeField};
use hmcf_core::interface::{csf_evolve, curve_distance, extract_interface_with, Interpolation};
use hmcf_core::model_pde::{
    reconstruct, splitting_defect, BoundaryField, CoefficientSet, ModelCoefficients, TildeField, TransformedCoefficients,
};
use hmcf_core::oracle::sphere_height;
use std::sync::Arc;

/// Lower cap of the sphere of radius `r` centred at height `top`.
fn cap(r: f64, top: f64, t: f64, x: f64, y: f64) -> f64 {
    sphere_height(r, t, x, y).unwrap() + top - r
}

fn capped(grid: Grid2, r: f64, top: f64, t_end: f64) -> (HeightField, FlowConfig) {
    let field = HeightField::from_fn(grid, 1e-9, |x, y| cap(r, top, 0.0, x, y)).unwrap();
    let cfg = FlowConfig {
        record_every: 20,
        boundary: Boundary::Prescribed(Arc::new(move |x, y, t| cap(r, top, t, x, y))),
        ..FlowConfig::new(t_end)
    };
    (field, cfg)
}

#[test]
fn concentric_spheres_stay_strictly_nested() {
    // Concentric: both spheres centred at height 2.
    let grid = Grid2::centered_square(41, 0.55);
    let (inner, outer) = (capped(grid, 1.0, 2.0, 0.05), capped(grid, 2.0, 2.0, 0.05));
    assert!(containment_check(&inner.0, &outer.0).unwrap() < 0.0);
    let both = run_many(&[inner, outer]).unwrap();
    assert!(both.iter().all(|t| t.error.is_none()));
    for (a, b) in both[0].snapshots.iter().zip(&both[1].snapshots) {
        assert_eq!(a.t, b.t);
        assert!(containment_check(&a.field, &b.field).unwrap() < 0.0);
    }
}

#[test]
fn evolved_interface_tracks_the_independent_csf_integrator() {
    let r0 = 0.5;
    let grid = Grid2::centered_square(129, 1.0);
    let f = HeightField::from_fn(grid, 1e-9, |x, y| (x.hypot(y) - r0).max(0.0).powi(2)).unwrap();
    let cfg = FlowConfig { record_every: 1000, boundary: Boundary::Extrapolate, ..FlowConfig::new(0.01) };
    let tr = run(&f, &cfg).unwrap();
    assert!(tr.error.is_none());
    let start = extract_interface_with(&f, 1e-9, Interpolation::Power(0.5)).unwrap().unwrap();
    let end = extract_interface_with(&tr.last().field, 1e-9, Interpolation::Power(0.5)).unwrap().unwrap();
    let csf = csf_evolve(&start.resampled(128).unwrap(), 0.01, 0.5, 10).unwrap();
    assert!(curve_distance(&end, &csf.curve) <= 2.0 * grid.dx, "{}", curve_distance(&end, &csf.curve));

    // The pressure keeps a nondegenerate gradient at the moved interface.
    let star = check_star(&pressure(&tr.last().field, 0.5).unwrap(), &end, 0.5).unwrap();
    assert!(star.passes, "{star:?}");
}

#[test]
fn log_splitting_of_a_model_solution_round_trips_through_the_operator() {
    let p = 0.5;
    let y = uniform_axis(-1.0, 1.0, 21);
    let t = uniform_axis(0.0, 0.5, 21);
    let z: Vec<f64> = std::iter::once(0.0).chain(uniform_axis(-3.0, 0.5, 42).into_iter().map(f64::exp)).collect();
    let field = SpaceTimeField::from_fn(z, y.clone(), t.clone(), |z, y, t| (-t).exp() * y.cos() + z.powf(p) * (1.0 + y * t));
    let split = log_decompose(&field, p, -10.0, 10.0).unwrap();
    let boundary = BoundaryField { y: split.y.clone(), t: split.t.clone(), values: split.boundary.clone() };
    let tilde = TildeField { w: split.w.clone(), y, t, values: split.tilde.clone() };
    let back = reconstruct(&boundary, &tilde, p).unwrap();
    for (a, b) in back.values.iter().zip(field.values.iter()) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let tc = TransformedCoefficients::new(ModelCoefficients::laplacian(), p, CoefficientSet::Derived).unwrap();
    let defect = splitting_defect(&tc, &boundary, &tilde).unwrap();
    assert!(defect < 1e-2, "{defect}");
}
