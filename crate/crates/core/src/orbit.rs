//! Circular-orbit propagation and visibility geometry between a ground site
//! and LEO satellites: sub-satellite point, central angle, elevation, slant
//! range, and visibility windows.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeoPoint;
use crate::scenario::{OrbitElements, SatId, SimParams};

/// Below this central angle the satellite counts as directly overhead.
const OVERHEAD_PSI: f64 = 1e-9;
/// Width of the refined threshold crossings, s.
const CROSSING_RESOLUTION: f64 = 0.01;
/// Bound on the outward walk toward a closest approach beyond the span.
const MAX_APPROACH_STEPS: usize = 10_000;

/// Along-track / cross-track description of one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassGeometry {
    pub sat_id: SatId,
    /// Smallest central angle between the ground trace and the site, rad.
    pub gamma_min: f64,
    /// Start of visibility, s.
    pub t0: f64,
    /// Along-track angle at `t0`, rad.
    pub phi0: f64,
    /// `omega_E cos i - omega_S`, rad/s.
    pub rel_rate: f64,
}

impl PassGeometry {
    /// Along-track angle at time `t`.
    pub fn phi(&self, t: f64) -> f64 {
        self.rel_rate * (t - self.t0) + self.phi0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityWindow {
    pub sat_id: SatId,
    pub t_start: f64,
    pub t_end: f64,
    pub max_elevation: f64,
}

impl VisibilityWindow {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn contains(&self, t: f64) -> bool {
        (self.t_start..=self.t_end).contains(&t)
    }
}

/// A visibility window with the pass geometry fitted to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pass {
    pub window: VisibilityWindow,
    pub geometry: PassGeometry,
    /// Time of closest approach, s.
    pub t_closest: f64,
}

/// Geometry of one satellite seen from a site at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub sat_id: SatId,
    pub t: f64,
    pub central_angle: f64,
    pub elevation: f64,
    pub slant_range: f64,
}

/// Normalizes an angle to `(-pi, pi]`.
pub fn wrap_pi(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

/// Geodetic latitude and longitude beneath the satellite at time `t`.
pub fn subsatellite_point(orbit: &OrbitElements, t: f64, earth_rotation_rate: f64) -> GeoPoint {
    let u = orbit.phase0 + orbit.angular_rate * t;
    let (sin_i, cos_i) = orbit.inclination.sin_cos();
    let (sin_u, cos_u) = u.sin_cos();
    let lat = (sin_i * sin_u).clamp(-1.0, 1.0).asin();
    let lon = orbit.raan + (cos_i * sin_u).atan2(cos_u) - earth_rotation_rate * t;
    GeoPoint::new(lat, wrap_pi(lon))
}

/// Great-circle angle between two surface points.
pub fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    let c = a.lat.sin() * b.lat.sin() + a.lat.cos() * b.lat.cos() * (a.lon - b.lon).cos();
    c.clamp(-1.0, 1.0).acos()
}

fn elevation_from_cos(cos_psi: f64, sin_psi: f64, h_s: f64, h_u: f64, r_e: f64) -> f64 {
    if sin_psi < OVERHEAD_PSI {
        return if cos_psi > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
    }
    ((cos_psi - (r_e + h_u) / (r_e + h_s)) / sin_psi).atan()
}

/// Elevation of a satellite at altitude `h_s` seen from altitude `h_u` at
/// central angle `psi`.
pub fn elevation_direct(psi: f64, h_s: f64, h_u: f64, r_e: f64) -> f64 {
    if psi < OVERHEAD_PSI {
        return FRAC_PI_2;
    }
    elevation_from_cos(psi.cos(), psi.sin(), h_s, h_u, r_e)
}

/// Elevation from the along-track/cross-track decomposition
/// `cos psi = cos phi(t) cos gamma_min`.
pub fn elevation_decomposed(pass: &PassGeometry, t: f64, h_s: f64, h_u: f64, r_e: f64) -> f64 {
    let cos_psi = (pass.phi(t).cos() * pass.gamma_min.cos()).clamp(-1.0, 1.0);
    let sin_psi = (1.0 - cos_psi * cos_psi).max(0.0).sqrt();
    elevation_from_cos(cos_psi, sin_psi, h_s, h_u, r_e)
}

/// Line-of-sight distance at elevation `theta`.
pub fn slant_range(theta: f64, h_s: f64, h_u: f64, r_e: f64) -> f64 {
    let rs = r_e + h_s;
    let ru = r_e + h_u;
    let c = theta.cos();
    (rs * rs - ru * ru * c * c).sqrt() - ru * theta.sin()
}

/// Largest central angle at which the elevation still reaches `theta_min`.
pub fn max_central_angle(theta_min: f64, h_s: f64, h_u: f64, r_e: f64) -> f64 {
    ((r_e + h_u) / (r_e + h_s) * theta_min.cos()).acos() - theta_min
}

pub fn observe(orbit: &OrbitElements, site: GeoPoint, t: f64, params: &SimParams) -> Observation {
    let ssp = subsatellite_point(orbit, t, params.earth_rotation_rate);
    let psi = central_angle(ssp, site);
    let elevation = elevation_direct(
        psi,
        orbit.altitude,
        params.uav_altitude,
        params.earth_radius,
    );
    Observation {
        sat_id: orbit.sat_id,
        t,
        central_angle: psi,
        elevation,
        slant_range: slant_range(
            elevation,
            orbit.altitude,
            params.uav_altitude,
            params.earth_radius,
        ),
    }
}

pub fn elevation_at(orbit: &OrbitElements, site: GeoPoint, t: f64, params: &SimParams) -> f64 {
    observe(orbit, site, t, params).elevation
}

/// Relative along-track rate `omega_E cos i - omega_S`.
pub fn relative_rate(orbit: &OrbitElements, earth_rotation_rate: f64) -> f64 {
    earth_rotation_rate * orbit.inclination.cos() - orbit.angular_rate
}

/// Narrows `[lo, hi]`, where `above(lo) != above(hi)`, to the crossing
/// resolution. Returns the narrowed bracket.
fn bisect(mut lo: f64, mut hi: f64, above: impl Fn(f64) -> bool) -> (f64, f64) {
    let lo_state = above(lo);
    while hi - lo > CROSSING_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if above(mid) == lo_state {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Visibility windows of one satellite over `[t_a, t_b]`, sampled every `dt`
/// seconds with threshold crossings refined by bisection.
pub fn visibility_windows(
    orbit: &OrbitElements,
    site: GeoPoint,
    span: (f64, f64),
    theta_min: f64,
    dt: f64,
    params: &SimParams,
) -> Result<Vec<Pass>> {
    let (t_a, t_b) = span;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sampling step must be positive, got {dt}"
        )));
    }
    if !(t_a < t_b) {
        return Err(Error::InvalidArgument(format!(
            "empty time span [{t_a}, {t_b}]"
        )));
    }
    let psi = |t: f64| {
        central_angle(
            subsatellite_point(orbit, t, params.earth_rotation_rate),
            site,
        )
    };
    let elevation = |t: f64| {
        elevation_direct(
            psi(t),
            orbit.altitude,
            params.uav_altitude,
            params.earth_radius,
        )
    };
    let above = |t: f64| elevation(t) > theta_min;

    let steps = ((t_b - t_a) / dt).ceil() as usize;
    let time = |k: usize| (t_a + k as f64 * dt).min(t_b);

    let mut passes = Vec::new();
    let mut start: Option<f64> = None;
    // best sample inside the current window: (psi, time)
    let mut best = (f64::INFINITY, t_a);
    let mut prev_t = t_a;
    let mut prev_above = false;
    for k in 0..=steps {
        let t = time(k);
        let p = psi(t);
        let now = elevation_direct(p, orbit.altitude, params.uav_altitude, params.earth_radius)
            > theta_min;
        match (prev_above, now, k == 0) {
            (_, true, true) => {
                start = Some(t);
                best = (p, t);
            }
            (false, true, false) => {
                start = Some(bisect(prev_t, t, above).1);
                best = (p, t);
            }
            (true, true, false) => {
                if p < best.0 {
                    best = (p, t);
                }
            }
            (true, false, false) => {
                let end = bisect(prev_t, t, above).0;
                if let Some(s) = start.take() {
                    if let Some(pass) =
                        fit_pass(orbit, s, end, best.1, dt, &psi, &elevation, params)
                    {
                        passes.push(pass);
                    }
                }
            }
            _ => {}
        }
        prev_t = t;
        prev_above = now;
    }
    if let Some(s) = start {
        if let Some(pass) = fit_pass(orbit, s, t_b, best.1, dt, &psi, &elevation, params) {
            passes.push(pass);
        }
    }
    Ok(passes)
}

#[allow(clippy::too_many_arguments)]
fn fit_pass(
    orbit: &OrbitElements,
    t_start: f64,
    t_end: f64,
    best_sample: f64,
    dt: f64,
    psi: &impl Fn(f64) -> f64,
    elevation: &impl Fn(f64) -> f64,
    params: &SimParams,
) -> Option<Pass> {
    if !(t_start < t_end) {
        return None;
    }
    // a window cut by the span can have its closest approach outside it
    let mut c = best_sample;
    for _ in 0..MAX_APPROACH_STEPS {
        if psi(c - dt) < psi(c) {
            c -= dt;
        } else if psi(c + dt) < psi(c) {
            c += dt;
        } else {
            break;
        }
    }
    let t_closest = golden_min(psi, c - dt, c + dt, 1e-4);
    let gamma_min = psi(t_closest);
    let max_elevation = if t_closest < t_start || t_closest > t_end {
        elevation(t_start).max(elevation(t_end))
    } else {
        elevation(t_closest)
    };
    let rel_rate = relative_rate(orbit, params.earth_rotation_rate);
    Some(Pass {
        window: VisibilityWindow {
            sat_id: orbit.sat_id,
            t_start,
            t_end,
            max_elevation,
        },
        geometry: PassGeometry {
            sat_id: orbit.sat_id,
            gamma_min,
            t0: t_start,
            // phi decreases through zero at closest approach
            phi0: -rel_rate * (t_closest - t_start),
            rel_rate,
        },
        t_closest,
    })
}

/// Windows for every satellite, ordered by start time then satellite id.
pub fn constellation_windows(
    constellation: &[OrbitElements],
    site: GeoPoint,
    span: (f64, f64),
    dt: f64,
    params: &SimParams,
) -> Result<Vec<Pass>> {
    let per_sat: Result<Vec<Vec<Pass>>> = constellation
        .par_iter()
        .map(|o| visibility_windows(o, site, span, params.min_elevation, dt, params))
        .collect();
    let mut all: Vec<Pass> = per_sat?.into_iter().flatten().collect();
    all.sort_by(|a, b| {
        a.window
            .t_start
            .total_cmp(&b.window.t_start)
            .then(a.window.sat_id.cmp(&b.window.sat_id))
    });
    Ok(all)
}

/// Writes `t,sat_id,elevation,slant_range` samples for plotting.
pub fn write_samples_csv(
    path: &Path,
    constellation: &[OrbitElements],
    site: GeoPoint,
    span: (f64, f64),
    dt: f64,
    params: &SimParams,
) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling step must be positive, got {dt}"
        )));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = csv::Writer::from_writer(std::io::BufWriter::new(file));
    out.write_record(["t", "sat_id", "elevation", "slant_range"])?;
    let steps = ((span.1 - span.0) / dt).floor() as usize;
    for k in 0..=steps {
        let t = span.0 + k as f64 * dt;
        for orbit in constellation {
            let o = observe(orbit, site, t, params);
            out.write_record([
                t.to_string(),
                o.sat_id.to_string(),
                o.elevation.to_string(),
                o.slant_range.to_string(),
            ])?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_params;

    const R_E: f64 = 6378e3;

    fn orbit(incl: f64, raan: f64, phase0: f64) -> OrbitElements {
        OrbitElements::circular(1, 550e3, incl, raan, phase0, R_E)
    }

    #[test]
    fn subsatellite_latitude_cases() {
        let p = default_params();
        for t in [0.0, 100.0, 3000.0] {
            let ssp = subsatellite_point(&orbit(0.0, 0.3, 1.0), t, p.earth_rotation_rate);
            assert!(ssp.lat.abs() < 1e-12);
        }
        let polar = orbit(FRAC_PI_2, 0.0, FRAC_PI_2);
        assert!(
            (subsatellite_point(&polar, 0.0, p.earth_rotation_rate).lat - FRAC_PI_2).abs() < 1e-12
        );
        let incl = orbit(53f64.to_radians(), 0.0, FRAC_PI_2);
        let lat = subsatellite_point(&incl, 0.0, p.earth_rotation_rate).lat;
        assert!((lat - 0.925025).abs() < 1e-6, "{lat}");
        assert!((lat - 53f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn longitude_is_normalized() {
        let o = orbit(0.9, 3.0, 0.2);
        for k in 0..2000 {
            let lon = subsatellite_point(&o, k as f64 * 7.3, EARTH_RATE).lon;
            assert!(lon > -PI && lon <= PI);
        }
    }

    const EARTH_RATE: f64 = crate::scenario::EARTH_ROTATION_RATE;

    #[test]
    fn central_angle_cases() {
        let a = GeoPoint::new(0.3, 1.2);
        assert_eq!(central_angle(a, a), 0.0);
        let q = central_angle(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, FRAC_PI_2));
        assert!((q - FRAC_PI_2).abs() < 1e-12);
        let psi = central_angle(
            GeoPoint::from_degrees(15.0, 118.0),
            GeoPoint::from_degrees(20.0, 120.0),
        );
        assert!((psi - 0.093396).abs() < 1e-5, "{psi}");
    }

    #[test]
    fn elevation_cases() {
        let (hs, hu) = (550e3, 200.0);
        assert_eq!(elevation_direct(0.0, hs, hu, R_E), FRAC_PI_2);
        let theta = elevation_direct(0.2132, hs, hu, R_E);
        assert!(
            (theta.to_degrees() - 15.0).abs() < 0.01,
            "{}",
            theta.to_degrees()
        );
        let horizon = ((R_E + hu) / (R_E + hs)).acos();
        assert!(elevation_direct(horizon, hs, hu, R_E).abs() < 1e-12);
        // inverse of the half-angle formula
        let psi_max = max_central_angle(15f64.to_radians(), hs, hu, R_E);
        assert!((psi_max - 0.213249).abs() < 1e-5, "{psi_max}");
        assert!((elevation_direct(psi_max, hs, hu, R_E) - 15f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn decomposed_cases() {
        let (hs, hu) = (550e3, 200.0);
        let mut pass = PassGeometry {
            sat_id: 0,
            gamma_min: 0.0,
            t0: 0.0,
            phi0: 0.0,
            rel_rate: -1e-3,
        };
        assert_eq!(elevation_decomposed(&pass, 0.0, hs, hu, R_E), FRAC_PI_2);
        pass.phi0 = 0.2132;
        let d = elevation_decomposed(&pass, 0.0, hs, hu, R_E);
        assert!((d - elevation_direct(0.2132, hs, hu, R_E)).abs() < 1e-12);
        pass.phi0 = ((R_E + hu) / (R_E + hs)).acos();
        assert!(elevation_decomposed(&pass, 0.0, hs, hu, R_E).abs() < 1e-12);
    }

    #[test]
    fn slant_range_cases() {
        let (hs, hu) = (550e3, 200.0);
        assert_eq!(slant_range(FRAC_PI_2, hs, hu, R_E), hs - hu);
        let r15 = slant_range(15f64.to_radians(), hs, hu, R_E);
        assert!((r15 - 1_517_940.0).abs() < 100.0, "{r15}");
        assert!(slant_range(30f64.to_radians(), hs, hu, R_E) < r15);
        let mut prev = f64::INFINITY;
        for k in 0..=90 {
            let r = slant_range((k as f64).to_radians(), hs, hu, R_E);
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn equatorial_window_matches_half_angle() {
        let p = default_params();
        let o = orbit(0.0, 0.0, -0.5);
        let site = GeoPoint::new(0.0, 0.0);
        let passes = visibility_windows(&o, site, (0.0, 2000.0), p.min_elevation, 1.0, &p).unwrap();
        assert_eq!(passes.len(), 1);
        let psi_max = max_central_angle(p.min_elevation, 550e3, p.uav_altitude, p.earth_radius);
        let expected = 2.0 * psi_max / (o.angular_rate - p.earth_rotation_rate);
        let got = passes[0].window.duration();
        assert!((got - expected).abs() < 2.0, "{got} vs {expected}");
        assert!((expected - 417.34).abs() < 0.05, "{expected}");
        assert!((passes[0].window.max_elevation - FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn polar_site_never_sees_equatorial_orbit() {
        let p = default_params();
        let site = GeoPoint::new(FRAC_PI_2, 0.0);
        let passes = visibility_windows(
            &orbit(0.0, 0.0, 0.0),
            site,
            (0.0, 20_000.0),
            p.min_elevation,
            1.0,
            &p,
        )
        .unwrap();
        assert!(passes.is_empty());
    }

    #[test]
    fn window_arguments_checked() {
        let p = default_params();
        let o = orbit(0.9, 0.0, 0.0);
        let site = GeoPoint::new(0.0, 0.0);
        assert!(visibility_windows(&o, site, (0.0, 10.0), 0.2, 0.0, &p).is_err());
        assert!(visibility_windows(&o, site, (10.0, 10.0), 0.2, 1.0, &p).is_err());
    }

    #[test]
    fn windows_stay_above_threshold() {
        let p = default_params();
        let site = GeoPoint::from_degrees(15.0, 118.0);
        let o = OrbitElements::circular(3, 550e3, 53f64.to_radians(), 2.0, 0.4, p.earth_radius);
        let passes =
            visibility_windows(&o, site, (0.0, 86_400.0), p.min_elevation, 1.0, &p).unwrap();
        assert!(!passes.is_empty());
        for pass in &passes {
            let w = pass.window;
            assert!(w.t_start < w.t_end);
            assert!(w.max_elevation >= p.min_elevation);
            let mut t = w.t_start;
            while t <= w.t_end {
                assert!(elevation_at(&o, site, t, &p) > p.min_elevation);
                t += 0.25;
            }
            if w.t_start > 0.0 {
                assert!(
                    elevation_at(&o, site, w.t_start - CROSSING_RESOLUTION, &p) <= p.min_elevation
                );
            }
            if w.t_end < 86_400.0 {
                assert!(
                    elevation_at(&o, site, w.t_end + CROSSING_RESOLUTION, &p) <= p.min_elevation
                );
            }
            // phi runs from phi0 > 0 through zero at closest approach
            let g = pass.geometry;
            if pass.t_closest >= w.t_start {
                assert!(g.phi0 >= 0.0);
            }
            if w.t_start > 0.0 && w.t_end < 86_400.0 {
                assert!(w.contains(pass.t_closest));
            }
            assert!(g.phi(pass.t_closest).abs() < 1e-9);
        }
    }

    #[test]
    fn cut_window_keeps_the_full_pass_geometry() {
        let p = default_params();
        let site = GeoPoint::from_degrees(15.0, 118.0);
        let o = OrbitElements::circular(3, 550e3, 53f64.to_radians(), 2.0, 0.4, p.earth_radius);
        let full = visibility_windows(&o, site, (0.0, 86_400.0), p.min_elevation, 1.0, &p).unwrap();
        let pass = full.iter().find(|q| q.window.t_start > 0.0).unwrap();
        // start the span after closest approach so the window is cut
        let span = (pass.t_closest + 20.0, 86_400.0);
        let cut = visibility_windows(&o, site, span, p.min_elevation, 1.0, &p).unwrap();
        let first = &cut[0];
        assert_eq!(first.window.t_start, span.0);
        assert!((first.t_closest - pass.t_closest).abs() < 1e-3);
        assert!((first.geometry.gamma_min - pass.geometry.gamma_min).abs() < 1e-9);
        assert!(first.geometry.phi0 < 0.0);
    }

    #[test]
    fn ground_track_repeats_each_nodal_period() {
        // after one orbit the sub-satellite latitude repeats and the longitude
        // shifts by the Earth rotation over that period
        let o = orbit(0.9, 1.0, 0.3);
        let period = TAU / o.angular_rate;
        for k in 0..20 {
            let t = k as f64 * 97.0;
            let a = subsatellite_point(&o, t, EARTH_RATE);
            let b = subsatellite_point(&o, t + period, EARTH_RATE);
            assert!((a.lat - b.lat).abs() < 1e-9);
            assert!(wrap_pi(a.lon - b.lon - EARTH_RATE * period).abs() < 1e-9);
        }
    }

    #[test]
    fn decomposition_exact_for_equatorial_pass() {
        let p = default_params();
        let o = orbit(0.0, 0.0, -0.4);
        let site = GeoPoint::new(0.05, 0.0);
        let passes = visibility_windows(&o, site, (0.0, 3000.0), p.min_elevation, 1.0, &p).unwrap();
        assert_eq!(passes.len(), 1);
        let pass = passes[0];
        assert!((pass.geometry.gamma_min - 0.05).abs() < 1e-9);
        let mut t = pass.window.t_start;
        while t <= pass.window.t_end {
            let direct = elevation_at(&o, site, t, &p);
            let dec = elevation_decomposed(
                &pass.geometry,
                t,
                o.altitude,
                p.uav_altitude,
                p.earth_radius,
            );
            assert!((direct - dec).abs() < 1e-6, "t={t}: {direct} vs {dec}");
            t += 3.7;
        }
    }
}
