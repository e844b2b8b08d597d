//! Sun-position computation and occluder shadow projection for scheduled
//! attacks: fix a cardboard occluder so the sun itself casts the adversarial
//! shadow onto the sign at a chosen time of day.
//!
//! The solar model is deliberately low-precision (cosine declination, mean
//! solar time, no refraction): attack windows span minutes, so sub-degree
//! accuracy is enough. Scene axes follow the sign: X east, Z up, Y south,
//! with the sign quad on the XOZ plane.

use chrono::{Datelike, NaiveDateTime, TimeDelta, Timelike};
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::geometry::{rasterize, Polygon, RegionMask};
use crate::pso::{minimize, Evaluation, SwarmConfig};
use crate::raster::RasterImage;
use crate::shadow::apply_shadow_in_region;

/// Where and when the sun is observed. The timestamp is treated as mean
/// solar time at the given longitude (at longitude 0 this coincides with
/// UTC).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarContext {
    pub latitude: f64,
    pub longitude: f64,
    pub timestamp: NaiveDateTime,
}

impl SolarContext {
    pub fn new(latitude: f64, longitude: f64, timestamp: NaiveDateTime) -> Result<Self> {
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::InvalidConfig(format!("latitude {latitude} out of range")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidConfig(format!("longitude {longitude} out of range")));
        }
        Ok(Self { latitude, longitude, timestamp })
    }
}

/// Solar elevation and azimuth in degrees; azimuth is measured from north,
/// clockwise, in [0, 360). Elevation is negative at night.
///
/// Declination uses the cosine approximation
/// `-23.44 deg * cos(360 deg * (d + 10) / 365)` for day-of-year `d`, and the
/// hour angle is `15 deg * (solar_hour - 12)`.
pub fn solar_position(ctx: &SolarContext) -> (f64, f64) {
    let day = ctx.timestamp.date().ordinal() as f64;
    let declination = -23.44 * (360.0 * (day + 10.0) / 365.0).to_radians().cos();

    let solar_hour = f64::from(ctx.timestamp.time().num_seconds_from_midnight()) / 3600.0;
    let hour_angle = (15.0 * (solar_hour - 12.0)).to_radians();

    let phi = ctx.latitude.to_radians();
    let delta = declination.to_radians();

    let sin_elev = phi.sin() * delta.sin() + phi.cos() * delta.cos() * hour_angle.cos();
    let elevation = sin_elev.asin().to_degrees();

    // horizontal sun vector: east and north components
    let east = -delta.cos() * hour_angle.sin();
    let north = delta.sin() * phi.cos() - delta.cos() * hour_angle.cos() * phi.sin();
    let azimuth = east.atan2(north).to_degrees().rem_euclid(360.0);

    (elevation, azimuth)
}

/// The physical scene: the sign quad on the XOZ plane, an occluder polygon
/// floating south of it, and the raster extent its image maps to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneGeometry {
    /// Sign quad extent in meters: (x_min, x_max, z_min, z_max) at y = 0.
    pub sign_extent: (f64, f64, f64, f64),
    /// Occluder vertices in meters; y must be positive (south of the sign).
    pub occluder: Vec<[f64; 3]>,
    /// Pixel size of the sign image mapped onto the quad.
    pub image_size: (usize, usize),
}

impl SceneGeometry {
    pub fn validate(&self) -> Result<()> {
        let (x0, x1, z0, z1) = self.sign_extent;
        if !(x0 < x1 && z0 < z1) {
            return Err(Error::InvalidConfig("empty sign extent".into()));
        }
        if self.occluder.len() < 3 {
            return Err(Error::TooFewVertices(self.occluder.len()));
        }
        if self.occluder.iter().any(|v| v[1] <= 0.0) {
            return Err(Error::InvalidConfig("occluder vertex not south of the sign".into()));
        }
        Ok(())
    }

    /// Meters on the sign plane to sign-image pixel coordinates.
    pub fn meters_to_pixels(&self, x: f64, z: f64) -> (f64, f64) {
        let (x0, x1, z0, z1) = self.sign_extent;
        let (w, h) = self.image_size;
        (
            (x - x0) / (x1 - x0) * w as f64,
            (z1 - z) / (z1 - z0) * h as f64,
        )
    }
}

/// Unit vector of travelling sunlight in scene axes (X east, Y south, Z up).
fn sun_ray(elevation_deg: f64, azimuth_deg: f64) -> [f64; 3] {
    let e = elevation_deg.to_radians();
    let a = azimuth_deg.to_radians();
    // pointing from the scene toward the sun, then negated
    [-a.sin() * e.cos(), a.cos() * e.cos(), -e.sin()]
}

/// Project occluder vertices along the sun ray onto the y = 0 plane,
/// in meters. Fails when the sun is down or the ray never meets the plane.
pub fn project_shadow_meters(
    occluder: &[[f64; 3]],
    sun: (f64, f64),
) -> Result<Vec<(f64, f64)>> {
    let (elevation, azimuth) = sun;
    if elevation <= 0.0 {
        return Err(Error::NoShadow(elevation));
    }
    let d = sun_ray(elevation, azimuth);
    if d[1].abs() < 1e-12 {
        return Err(Error::DegenerateProjection);
    }
    Ok(occluder
        .iter()
        .map(|p| {
            let t = -p[1] / d[1];
            (p[0] + t * d[0], p[2] + t * d[2])
        })
        .collect())
}

/// Shadow polygon in sign-image pixel coordinates for the given sun
/// position. The caller clips against its target mask at raster time.
pub fn project_shadow(scene: &SceneGeometry, sun: (f64, f64)) -> Result<Polygon> {
    scene.validate()?;
    let meters = project_shadow_meters(&scene.occluder, sun)?;
    Polygon::new(
        meters
            .into_iter()
            .map(|(x, z)| scene.meters_to_pixels(x, z))
            .collect(),
    )
}

/// One frame of a scheduled sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub timestamp: NaiveDateTime,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    /// Projected shadow polygon; absent when the sun casts none.
    pub shadow: Option<Polygon>,
    pub label: usize,
    pub confidence_true: f64,
}

/// Walk the window from `ctx_start` to `end_time` inclusive in `step_secs`
/// steps, casting the occluder's shadow at each instant and classifying the
/// result. Frames where no shadow reaches the plane classify the clean image
/// instead of failing. The true label is taken from the clean image's
/// prediction before the sweep.
#[allow(clippy::too_many_arguments)]
pub fn scheduled_sweep<C: Classifier + ?Sized>(
    scene: &SceneGeometry,
    ctx_start: &SolarContext,
    ctx_end: &SolarContext,
    step_secs: u64,
    image: &RasterImage,
    mask: &RegionMask,
    k: f64,
    classifier: &C,
) -> Result<Vec<SweepRow>> {
    scene.validate()?;
    if ctx_end.timestamp < ctx_start.timestamp {
        return Err(Error::InvalidSweep("window end precedes start".into()));
    }
    if (ctx_start.latitude, ctx_start.longitude) != (ctx_end.latitude, ctx_end.longitude) {
        return Err(Error::InvalidSweep("window endpoints move".into()));
    }
    if step_secs == 0 {
        return Err(Error::InvalidSweep("step must be at least one second".into()));
    }

    let y_true = classifier.predict(image)?.argmax();
    let mut rows = Vec::new();
    let mut t = ctx_start.timestamp;
    while t <= ctx_end.timestamp {
        let ctx = SolarContext { timestamp: t, ..*ctx_start };
        let (elevation, azimuth) = solar_position(&ctx);
        let shadow = match project_shadow(scene, (elevation, azimuth)) {
            Ok(poly) => Some(poly),
            Err(Error::NoShadow(_)) | Err(Error::DegenerateProjection) => None,
            Err(other) => return Err(other),
        };
        let frame = match &shadow {
            Some(poly) => {
                let region = rasterize(poly, mask);
                apply_shadow_in_region(image, &region, k)
            }
            None => image.clone(),
        };
        let conf = classifier.predict(&frame)?;
        rows.push(SweepRow {
            timestamp: t,
            elevation_deg: elevation,
            azimuth_deg: azimuth,
            shadow,
            label: conf.argmax(),
            confidence_true: conf.get(y_true),
        });
        t += TimeDelta::seconds(step_secs as i64);
    }
    Ok(rows)
}

/// Render sweep rows as the plot-ready CSV timeline.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("timestamp,elevation_deg,azimuth_deg,label,confidence_true\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4},{},{:.6}\n",
            r.timestamp.format("%Y-%m-%dT%H:%M:%S"),
            r.elevation_deg,
            r.azimuth_deg,
            r.label,
            r.confidence_true,
        ));
    }
    out
}

/// Search occluder vertex coordinates so that the shadow cast at the
/// scheduled instant misclassifies the sign, reusing the swarm optimizer
/// over the flattened 3D coordinates. Returns the found occluder and
/// whether its shadow flips the prediction.
#[allow(clippy::too_many_arguments)]
pub fn optimize_occluder<C: Classifier + ?Sized>(
    scene: &SceneGeometry,
    ctx: &SolarContext,
    image: &RasterImage,
    mask: &RegionMask,
    k: f64,
    classifier: &C,
    swarm: &SwarmConfig,
) -> Result<(Vec<[f64; 3]>, bool)> {
    scene.validate()?;
    let y_true = classifier.predict(image)?.argmax();
    let sun = solar_position(ctx);

    // search box: x and z roam a few occluder-distances around the sign,
    // y stays strictly south of the plane
    let (x0, x1, z0, z1) = scene.sign_extent;
    let dist = scene.occluder.iter().map(|v| v[1]).sum::<f64>() / scene.occluder.len() as f64;
    let mut bounds = Vec::with_capacity(scene.occluder.len() * 3);
    for _ in 0..scene.occluder.len() {
        bounds.push((x0 - 3.0 * dist, x1 + 3.0 * dist));
        bounds.push((0.25 * dist, 1.5 * dist));
        bounds.push((z0 - dist, z1 + 3.0 * dist));
    }

    let result = minimize(
        |coords| {
            let occluder: Vec<[f64; 3]> =
                coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            let candidate = SceneGeometry { occluder, ..scene.clone() };
            match project_shadow(&candidate, sun) {
                Ok(poly) => {
                    let region = rasterize(&poly, mask);
                    let shadowed = apply_shadow_in_region(image, &region, k);
                    let conf = classifier.predict(&shadowed)?;
                    Ok(Evaluation {
                        cost: conf.get(y_true),
                        stop: conf.argmax() != y_true,
                    })
                }
                // no shadow on the sign: worthless but not an error
                Err(Error::NoShadow(_)) | Err(Error::DegenerateProjection) => {
                    Ok(Evaluation::cost_only(f64::INFINITY))
                }
                Err(other) => Err(other),
            }
        },
        &bounds,
        swarm,
    )?;

    let occluder: Vec<[f64; 3]> = result
        .best_position
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok((occluder, result.early_exit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{NaiveDate, NaiveTime};

    fn ctx(lat: f64, day: u32, time: (u32, u32, u32)) -> SolarContext {
        let date = NaiveDate::from_yo_opt(2026, day).unwrap();
        let t = NaiveTime::from_hms_opt(time.0, time.1, time.2).unwrap();
        SolarContext::new(lat, 0.0, date.and_time(t)).unwrap()
    }

    #[test]
    fn equinox_noon_at_lat_45() {
        let (elev, az) = solar_position(&ctx(45.0, 80, (12, 0, 0)));
        assert!((elev - 45.0).abs() <= 0.7, "elevation {elev}");
        assert!((az - 180.0).abs() <= 1.0, "azimuth {az}");
    }

    #[test]
    fn equinox_noon_at_equator_is_near_zenith() {
        let (elev, _) = solar_position(&ctx(0.0, 80, (12, 0, 0)));
        assert!((elev - 90.0).abs() <= 0.7, "elevation {elev}");
        assert!(elev <= 90.0);
    }

    #[test]
    fn midnight_sun_is_below_horizon() {
        let (elev, _) = solar_position(&ctx(45.0, 80, (0, 0, 0)));
        assert!(elev < 0.0, "elevation {elev}");
    }

    #[test]
    fn morning_azimuth_is_east_of_south() {
        let (_, az) = solar_position(&ctx(45.0, 80, (8, 30, 0)));
        assert!(az > 90.0 && az < 180.0, "azimuth {az}");
    }

    #[test]
    fn elevation_is_symmetric_about_solar_noon() {
        for (day, lat) in [(80u32, 45.0), (172, 60.0), (355, 10.0)] {
            for dt in [1u32, 2, 3, 5] {
                let (before, _) = solar_position(&ctx(lat, day, (12 - dt, 0, 0)));
                let (after, _) = solar_position(&ctx(lat, day, (12 + dt, 0, 0)));
                assert!((before - after).abs() < 0.3, "asymmetry at {day}/{lat}/{dt}");
            }
        }
    }

    #[test]
    fn shadow_projects_along_similar_triangles() {
        // sun due south at 45 degrees: ray (0, -1, -1)/sqrt(2)
        let shadow = project_shadow_meters(&[[0.0, 1.0, 1.0]], (45.0, 180.0)).unwrap();
        assert!((shadow[0].0).abs() < 1e-9);
        assert!((shadow[0].1).abs() < 1e-9);
    }

    #[test]
    fn on_plane_vertex_projects_to_itself() {
        let shadow = project_shadow_meters(&[[0.3, 0.0, 0.7]], (30.0, 150.0)).unwrap();
        assert!((shadow[0].0 - 0.3).abs() < 1e-9);
        assert!((shadow[0].1 - 0.7).abs() < 1e-9);
    }

    #[test]
    fn overhead_sun_is_degenerate() {
        let r = project_shadow_meters(&[[0.0, 1.0, 1.0]], (90.0, 180.0));
        assert!(matches!(r, Err(Error::DegenerateProjection)));
    }

    #[test]
    fn night_sun_casts_no_shadow() {
        let r = project_shadow_meters(&[[0.0, 1.0, 1.0]], (-5.0, 0.0));
        assert!(matches!(r, Err(Error::NoShadow(_))));
    }

    #[test]
    fn doubling_the_occluder_doubles_the_shadow() {
        let occluder = [[0.4, 1.0, 1.5], [-0.2, 0.8, 2.0], [0.1, 1.2, 0.9]];
        let doubled: Vec<[f64; 3]> = occluder.iter().map(|v| [2.0 * v[0], 2.0 * v[1], 2.0 * v[2]]).collect();
        let sun = (37.0, 160.0);
        let a = project_shadow_meters(&occluder, sun).unwrap();
        let b = project_shadow_meters(&doubled, sun).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            assert!((2.0 * pa.0 - pb.0).abs() < 1e-9);
            assert!((2.0 * pa.1 - pb.1).abs() < 1e-9);
        }
    }

    #[test]
    fn shadow_area_grows_as_the_sun_sinks() {
        // a slightly back-tilted occluder: top edge closer to the sun
        let occluder = vec![
            [-0.3, 1.0, 0.2],
            [0.3, 1.0, 0.2],
            [0.3, 1.17, 1.2],
            [-0.3, 1.17, 1.2],
        ];
        let mut last_area = f64::NEG_INFINITY;
        for elev_i in (10..=80).rev().step_by(5) {
            let shadow = project_shadow_meters(&occluder, (f64::from(elev_i), 180.0)).unwrap();
            let poly = Polygon::new(shadow.into_iter().map(|(x, z)| (x, z)).collect()).unwrap();
            let area = poly.area();
            assert!(
                area >= last_area,
                "area shrank from {last_area} to {area} at elevation {elev_i}"
            );
            last_area = area;
        }
    }

    #[test]
    fn invalid_scene_is_rejected() {
        let scene = SceneGeometry {
            sign_extent: (0.3, -0.3, 1.2, 1.8),
            occluder: vec![[0.0, 1.0, 2.0]; 3],
            image_size: (32, 32),
        };
        assert!(scene.validate().is_err());
        let scene = SceneGeometry {
            sign_extent: (-0.3, 0.3, 1.2, 1.8),
            occluder: vec![[0.0, -1.0, 2.0]; 3],
            image_size: (32, 32),
        };
        assert!(scene.validate().is_err());
    }
}
