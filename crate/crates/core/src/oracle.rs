//! Reference solutions: the shrinking sphere, the shrinking circle under
//! curve shortening, and the axisymmetric reduction of the flow to a 1D
//! profile `h(ρ)`.

use crate::geometry::{harmonic_mean_velocity, CurvaturePair, VelocityParams};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("extinct: t = {t} is past the extinction time {t_ext}")]
    Extinct { t: f64, t_ext: f64 },
    #[error("point at radius {rho} is outside the sphere of radius {radius}")]
    OutsideSphere { rho: f64, radius: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("dt = {dt} exceeds the explicit stability bound {bound}")]
    Cfl { dt: f64, bound: f64 },
}

/// Radius of a sphere shrinking at speed `K/H = 1/(2R)`.
pub fn sphere_radius(r0: f64, t: f64) -> Result<f64, OracleError> {
    let t_ext = r0 * r0;
    if t >= t_ext {
        return Err(OracleError::Extinct { t, t_ext });
    }
    Ok((t_ext - t).sqrt())
}

/// Radius of a circle shrinking by curve shortening, `dr/dt = -1/r`.
pub fn circle_csf_radius(r0: f64, t: f64) -> Result<f64, OracleError> {
    let t_ext = 0.5 * r0 * r0;
    if t >= t_ext {
        return Err(OracleError::Extinct { t, t_ext });
    }
    Ok((r0 * r0 - 2.0 * t).sqrt())
}

/// Lower graph at time `t` of the sphere whose lowest point touches `z = 0`
/// at `t = 0`; the centre stays at height `r0`.
pub fn sphere_height(r0: f64, t: f64, x: f64, y: f64) -> Result<f64, OracleError> {
    let radius = sphere_radius(r0, t)?;
    let rho2 = x * x + y * y;
    if rho2 >= radius * radius {
        return Err(OracleError::OutsideSphere { rho: rho2.sqrt(), radius });
    }
    Ok(r0 - (radius * radius - rho2).sqrt())
}

/// Axisymmetric height profile on a uniform radial grid starting on the axis.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    /// Pressure exponent used near the flat disk (`g = h^p`).
    pub p: f64,
    pub flat_tol: f64,
}

const BAND: usize = 3;

impl RadialProfile {
    pub fn new(r: Vec<f64>, h: Vec<f64>, p: f64, flat_tol: f64) -> Result<Self, OracleError> {
        let bad = |m: &str| Err(OracleError::InvalidProfile(m.into()));
        if r.len() < 5 || r.len() != h.len() {
            return bad("need at least five nodes and matching lengths");
        }
        if r[0] != 0.0 {
            return bad("radial grid must start on the axis");
        }
        let dr = r[1] - r[0];
        if !(dr > 0.0) || r.windows(2).any(|w| ((w[1] - w[0]) - dr).abs() > 1e-9 * dr) {
            return bad("radial grid must be uniform");
        }
        if !(p > 0.0 && p < 1.0) {
            return bad("pressure exponent must lie in (0, 1)");
        }
        if h.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("heights must be finite and nonnegative");
        }
        let scale = h.iter().cloned().fold(0.0, f64::max).max(1.0);
        if h.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) {
            return bad("profile must be nondecreasing in the radius");
        }
        Ok(Self { r, h, p, flat_tol })
    }

    pub fn from_fn(r_max: f64, n: usize, p: f64, flat_tol: f64, f: impl Fn(f64) -> f64) -> Result<Self, OracleError> {
        let r = crate::grid::uniform_axis(0.0, r_max, n);
        let h = r.iter().map(|&x| f(x)).collect();
        Self::new(r, h, p, flat_tol)
    }

    pub fn dr(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    fn stationary(&self, k: usize) -> bool {
        let n = self.h.len();
        let tol = self.flat_tol;
        let dr = self.dr();
        let h = &self.h;
        if h[k] >= tol {
            return false;
        }
        let (hm, hp) = if k == 0 { (h[1], h[1]) } else if k == n - 1 { (h[k - 1], h[k]) } else { (h[k - 1], h[k + 1]) };
        ((hp - hm) / (2.0 * dr)).abs() < tol && ((hp - 2.0 * h[k] + hm) / (dr * dr)).abs() < tol
    }

    /// Radius where the pressure `h^p` extrapolates linearly to zero from
    /// the first two positive nodes; `None` without a flat disk.
    pub fn interface_radius(&self) -> Option<f64> {
        if self.h[0] >= self.flat_tol {
            return None;
        }
        let k = self.h.iter().position(|&v| v >= self.flat_tol)?;
        if k + 1 >= self.h.len() {
            return None;
        }
        let (g0, g1) = (self.h[k].powf(self.p), self.h[k + 1].powf(self.p));
        if g1 <= g0 {
            return Some(self.r[k]);
        }
        Some(self.r[k] - g0 * self.dr() / (g1 - g0))
    }
}

/// Per-node update data: the explicit rate and its sensitivity to the
/// second derivative (the effective diffusivity).
struct Rates {
    rate: Vec<f64>,
    /// Signed pressure at nodes updated in the pressure form.
    pressure: Vec<Option<f64>>,
    diffusivity: f64,
}

fn radial_rates(profile: &RadialProfile) -> Result<Rates, OracleError> {
    let n = profile.h.len();
    let dr = profile.dr();
    let q = 1.0 / profile.p;
    let h = &profile.h;
    let stationary: Vec<bool> = (0..n).map(|k| profile.stationary(k)).collect();
    let mut band = vec![false; n];
    for k in (0..n).filter(|&k| stationary[k]) {
        band[k.saturating_sub(BAND)..=(k + BAND).min(n - 1)].fill(true);
    }

    // Signed pressure, extended by linear extrapolation into the flat part.
    let positive: Vec<bool> = h.iter().map(|&v| v >= profile.flat_tol).collect();
    let mut g: Vec<Option<f64>> =
        (0..n).map(|k| if positive[k] { Some(h[k].powf(profile.p)) } else { None }).collect();
    for _ in 0..BAND {
        let prev = g.clone();
        for k in 0..n {
            if prev[k].is_some() {
                continue;
            }
            let mut acc = Vec::new();
            if k + 2 < n {
                if let (Some(a), Some(b)) = (prev[k + 1], prev[k + 2]) {
                    acc.push(2.0 * a - b);
                }
            }
            if k >= 2 {
                if let (Some(a), Some(b)) = (prev[k - 1], prev[k - 2]) {
                    acc.push(2.0 * a - b);
                }
            }
            if !acc.is_empty() {
                g[k] = Some(acc.iter().sum::<f64>() / acc.len() as f64);
            }
        }
    }

    let params = VelocityParams::for_spacing(dr);
    let mut rate = vec![0.0; n];
    let mut pressure = vec![None; n];
    let mut diffusivity: f64 = 0.0;
    for k in 0..n - 1 {
        if stationary[k] {
            continue;
        }
        let rho = profile.r[k];
        let use_pressure = band[k] && k > 0 && g[k - 1].is_some() && g[k].is_some() && g[k + 1].is_some();
        if use_pressure {
            let (gm, g0, gp) = (g[k - 1].unwrap(), g[k].unwrap(), g[k + 1].unwrap());
            let g1 = (gp - gm) / (2.0 * dr);
            let g2 = (gp - 2.0 * g0 + gm) / (dr * dr);
            let a = g0 * g2 + (q - 1.0) * g1 * g1;
            let e = g0 * g1 + q * q * g0.max(0.0).powf(2.0 * q - 1.0) * g1.powi(3);
            let den = rho * a + e;
            if den.abs() > 1e-300 {
                rate[k] = g1 * a / den;
                diffusivity = diffusivity.max((g1 * g0 * e / (den * den)).abs());
            }
            pressure[k] = Some(g0);
        } else if positive[k] || k == 0 || !band[k] {
            let (hm, hp) = if k == 0 { (h[1], h[1]) } else { (h[k - 1], h[k + 1]) };
            let h1 = (hp - hm) / (2.0 * dr);
            let h2 = (hp - 2.0 * h[k] + hm) / (dr * dr);
            let w = (1.0 + h1 * h1).sqrt();
            let meridian = h2 / w.powi(3);
            let parallel = if k == 0 { meridian } else { h1 / (rho * w) };
            let speed = harmonic_mean_velocity(CurvaturePair::new(meridian, parallel), params)
                .map_err(|e| OracleError::InvalidProfile(e.to_string()))?;
            rate[k] = speed * w;
            let s = if k == 0 { h2 } else { h1 / rho };
            let big = s * (1.0 + h1 * h1);
            let d = if k == 0 { 0.5 } else if h2 + big > 0.0 { s * big / (h2 + big).powi(2) } else { 0.0 };
            diffusivity = diffusivity.max(d.abs());
        }
    }
    Ok(Rates { rate, pressure, diffusivity })
}

/// Largest stable explicit step for the profile.
pub fn radial_stable_dt(profile: &RadialProfile) -> Result<f64, OracleError> {
    let rates = radial_rates(profile)?;
    let dr = profile.dr();
    Ok(if rates.diffusivity > 0.0 { dr * dr / (2.0 * rates.diffusivity) } else { f64::INFINITY })
}

/// One explicit step of the axisymmetric flow. The outermost node is held
/// fixed; nodes of the flat disk away from its rim are never written.
pub fn radial_hmcf_step(profile: &RadialProfile, dt: f64) -> Result<RadialProfile, OracleError> {
    let rates = radial_rates(profile)?;
    let dr = profile.dr();
    let bound = if rates.diffusivity > 0.0 { dr * dr / (2.0 * rates.diffusivity) } else { f64::INFINITY };
    if !(dt > 0.0) || dt > bound * (1.0 + 1e-12) {
        return Err(OracleError::Cfl { dt, bound });
    }
    let q = 1.0 / profile.p;
    let mut next = profile.clone();
    for k in 0..profile.h.len() - 1 {
        if let Some(g) = rates.pressure[k] {
            next.h[k] = (g + dt * rates.rate[k]).max(0.0).powf(q);
        } else {
            next.h[k] = profile.h[k] + dt * rates.rate[k];
        }
    }
    Ok(next)
}

/// Evolves to `t_end` with `dt = safety × stable dt`, returning the final
/// profile.
pub fn radial_evolve(profile: &RadialProfile, t_end: f64, safety: f64) -> Result<RadialProfile, OracleError> {
    let mut state = profile.clone();
    let mut t = 0.0;
    while t < t_end {
        let dt = (safety * radial_stable_dt(&state)?).min(t_end - t);
        state = radial_hmcf_step(&state, dt)?;
        t += dt;
        if t_end - t < 1e-14 * t_end {
            break;
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_radius_law() {
        assert_eq!(sphere_radius(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(sphere_radius(1.0, 0.5).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(sphere_radius(2.0, 3.0).unwrap(), 1.0, epsilon = 1e-15);
        assert!(matches!(sphere_radius(1.0, 1.0), Err(OracleError::Extinct { .. })));
    }

    #[test]
    fn sphere_radius_solves_its_ode() {
        // dR/dt = -1/(2R) by central differences.
        let (r0, t, dt) = (1.3, 0.4, 1e-5);
        let d = (sphere_radius(r0, t + dt).unwrap() - sphere_radius(r0, t - dt).unwrap()) / (2.0 * dt);
        assert_relative_eq!(d, -0.5 / sphere_radius(r0, t).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn circle_radius_law() {
        assert_eq!(circle_csf_radius(1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(circle_csf_radius(1.0, 0.25).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(circle_csf_radius(0.5, 0.1).unwrap(), 0.223_606_797_749_979, epsilon = 1e-14);
        assert!(circle_csf_radius(0.5, 0.125).is_err());
    }

    #[test]
    fn sphere_height_apex_matches_radius() {
        let t = 0.3;
        assert_relative_eq!(sphere_height(1.0, t, 0.0, 0.0).unwrap(), 1.0 - 0.7f64.sqrt(), epsilon = 1e-15);
        assert!(sphere_height(1.0, t, 0.9, 0.0).is_err());
    }

    fn hemisphere(dr: f64) -> RadialProfile {
        let n = (0.6 / dr).round() as usize + 1;
        RadialProfile::from_fn(0.6, n, 0.5, 1e-12, |r| 1.0 - (1.0 - r * r).sqrt()).unwrap()
    }

    #[test]
    fn hemisphere_apex_rises_at_half() {
        for dr in [0.02, 0.01] {
            let prof = hemisphere(dr);
            let dt = 0.5 * radial_stable_dt(&prof).unwrap();
            let next = radial_hmcf_step(&prof, dt).unwrap();
            let rate = (next.h[0] - prof.h[0]) / dt;
            // h'' at the apex is 1 + dr²/4 + O(dr⁴), and the rate is h''/2.
            assert_relative_eq!(rate, 0.5, epsilon = 0.2 * dr * dr);
        }
    }

    #[test]
    fn flat_profile_is_unchanged() {
        let prof = RadialProfile::from_fn(1.0, 21, 0.5, 1e-9, |_| 0.0).unwrap();
        let next = radial_hmcf_step(&prof, 1e-3).unwrap();
        assert_eq!(next, prof);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let prof = hemisphere(0.02);
        let bound = radial_stable_dt(&prof).unwrap();
        assert!(matches!(radial_hmcf_step(&prof, 2.0 * bound), Err(OracleError::Cfl { .. })));
    }

    #[test]
    fn flat_disk_rim_follows_the_circle_law() {
        let r0 = 0.5;
        let prof = RadialProfile::from_fn(1.0, 401, 0.5, 1e-9, |r| (r - r0).max(0.0).powi(2)).unwrap();
        let out = radial_evolve(&prof, 0.02, 0.8).unwrap();
        let expect = circle_csf_radius(r0, 0.02).unwrap();
        let got = out.interface_radius().unwrap();
        assert!((got - expect).abs() / expect < 0.02, "{got} vs {expect}");
    }

    #[test]
    fn richardson_order_in_dr() {
        // dt scales with dr², so the error is O(dr²) overall.
        let t_end = 0.05;
        let apex = |dr: f64| radial_evolve(&hemisphere(dr), t_end, 0.5).unwrap().h[0];
        let (a, b, c) = (apex(0.04), apex(0.02), apex(0.01));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!(order >= 1.8, "observed order {order}");
    }
}
