//! Circular-orbit kinematics and satellite/user geometry.
//!
//! The Earth is a non-rotating sphere and the satellite follows a circular
//! Keplerian orbit. A pass is parameterised by the ground point the track
//! passes closest to at mid-pass, a cross-track offset, and the orbit
//! inclination (which fixes the heading of the ground track at that point).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Standard gravitational parameter of the Earth, km^3/s^2.
pub const MU_EARTH_KM3_S2: f64 = 398_600.4418;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitConfig {
    pub altitude_km: f64,
    pub earth_radius_km: f64,
    pub inclination_deg: f64,
    pub carrier_hz: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            altitude_km: 540.0,
            earth_radius_km: 6371.0,
            inclination_deg: 53.0,
            carrier_hz: 27.5e9,
        }
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km > 0.0) {
            return Err(Error::Config(format!("altitude_km must be > 0, got {}", self.altitude_km)));
        }
        if !(self.earth_radius_km > 0.0) {
            return Err(Error::Config(format!(
                "earth_radius_km must be > 0, got {}",
                self.earth_radius_km
            )));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Config(format!("carrier_hz must be > 0, got {}", self.carrier_hz)));
        }
        Ok(())
    }

    /// Orbital speed of a circular orbit at this altitude, km/s.
    pub fn orbital_speed_km_s(&self) -> f64 {
        (MU_EARTH_KM3_S2 / (self.earth_radius_km + self.altitude_km)).sqrt()
    }

    /// Angular rate about the Earth's centre, rad/s.
    pub fn angular_rate(&self) -> f64 {
        self.orbital_speed_km_s() / (self.earth_radius_km + self.altitude_km)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundUser {
    pub id: usize,
    pub lat_deg: f64,
    pub lon_deg: f64,
}

/// Where and how the satellite crosses the service area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassGeometry {
    /// Reference ground point; the track passes abeam of it at mid-pass.
    pub center_lat_deg: f64,
    pub center_lon_deg: f64,
    /// Distance between the reference point and the ground track at
    /// mid-pass, km. Zero gives an overhead pass.
    pub cross_track_offset_km: f64,
    /// Descending rather than ascending node crossing.
    pub descending: bool,
    /// Minimum elevation at which a user counts as visible, degrees.
    pub mask_deg: f64,
}

impl Default for PassGeometry {
    fn default() -> Self {
        // Canberra, Australia.
        Self {
            center_lat_deg: -35.28,
            center_lon_deg: 149.13,
            cross_track_offset_km: 0.0,
            descending: false,
            mask_deg: 10.0,
        }
    }
}

/// Per-user, per-slot elevation angles over one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotGrid {
    pub n_slots: usize,
    pub coherence_s: f64,
    /// `elevation_deg[k][n]`, rows in the order users were given.
    pub elevation_deg: Vec<Vec<f64>>,
    /// Start time of each slot, seconds from the start of the pass.
    pub slot_epoch_s: Vec<f64>,
}

impl SlotGrid {
    pub fn n_users(&self) -> usize {
        self.elevation_deg.len()
    }
}

fn check_angle(alpha_deg: f64) -> Result<()> {
    if !(0.0..=90.0).contains(&alpha_deg) {
        return Err(Error::Domain(format!("elevation {alpha_deg} deg outside [0, 90]")));
    }
    Ok(())
}

/// Satellite-to-user distance in km at elevation `alpha_deg`.
pub fn slant_range(alpha_deg: f64, orbit: &OrbitConfig) -> Result<f64> {
    check_angle(alpha_deg)?;
    if alpha_deg == 90.0 {
        return Ok(orbit.altitude_km);
    }
    let re = orbit.earth_radius_km;
    let d0 = orbit.altitude_km;
    let s = alpha_deg.to_radians().sin();
    Ok(((re * s).powi(2) + d0 * d0 + 2.0 * d0 * re).sqrt() - re * s)
}

/// Maximum Doppler shift in Hz seen at elevation `alpha_deg`: the orbital
/// velocity projected on the line of sight.
pub fn max_doppler(alpha_deg: f64, orbit: &OrbitConfig) -> Result<f64> {
    check_angle(alpha_deg)?;
    let v_m_s = orbit.orbital_speed_km_s() * 1e3;
    let c = alpha_deg.to_radians().cos().max(0.0);
    Ok(v_m_s * c / SPEED_OF_LIGHT * orbit.carrier_hz)
}

type Vec3 = [f64; 3];

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn unit_up(lat_deg: f64, lon_deg: f64) -> Vec3 {
    let (sp, cp) = lat_deg.to_radians().sin_cos();
    let (sl, cl) = lon_deg.to_radians().sin_cos();
    [cp * cl, cp * sl, sp]
}

fn unit_east(lon_deg: f64) -> Vec3 {
    let (sl, cl) = lon_deg.to_radians().sin_cos();
    [-sl, cl, 0.0]
}

fn unit_north(lat_deg: f64, lon_deg: f64) -> Vec3 {
    let (sp, cp) = lat_deg.to_radians().sin_cos();
    let (sl, cl) = lon_deg.to_radians().sin_cos();
    [-sp * cl, -sp * sl, cp]
}

/// Satellite position track for one pass, centred on `t_mid`.
#[derive(Debug, Clone, Copy)]
struct PassTrack {
    radius_km: f64,
    omega: f64,
    t_mid: f64,
    sub_point: Vec3,
    along_track: Vec3,
}

impl PassTrack {
    fn new(orbit: &OrbitConfig, pass: &PassGeometry, t_mid: f64) -> Self {
        let (lat, lon) = (pass.center_lat_deg, pass.center_lon_deg);
        let up = unit_up(lat, lon);
        let east = unit_east(lon);
        let north = unit_north(lat, lon);

        // Ground-track azimuth for a circular orbit of inclination i at
        // latitude phi: sin(A) = cos(i) / cos(phi). Latitudes beyond the
        // orbit's reach clamp to an east-west track.
        let ratio = orbit.inclination_deg.to_radians().cos() / lat.to_radians().cos();
        let mut azimuth = ratio.clamp(-1.0, 1.0).asin();
        if pass.descending {
            azimuth = std::f64::consts::PI - azimuth;
        }
        let (sa, ca) = azimuth.sin_cos();
        let heading = add(scale(north, ca), scale(east, sa));
        let cross = add(scale(north, -sa), scale(east, ca));

        let delta = pass.cross_track_offset_km / orbit.earth_radius_km;
        let sub_point = add(scale(up, delta.cos()), scale(cross, delta.sin()));

        Self {
            radius_km: orbit.earth_radius_km + orbit.altitude_km,
            omega: orbit.angular_rate(),
            t_mid,
            sub_point,
            along_track: heading,
        }
    }

    fn position(&self, t: f64) -> Vec3 {
        let (s, c) = (self.omega * (t - self.t_mid)).sin_cos();
        scale(add(scale(self.sub_point, c), scale(self.along_track, s)), self.radius_km)
    }
}

fn elevation_deg(sat: Vec3, user: &GroundUser, earth_radius_km: f64) -> f64 {
    let up = unit_up(user.lat_deg, user.lon_deg);
    let los = add(sat, scale(up, -earth_radius_km));
    let s = (dot(los, up) / norm(los)).clamp(-1.0, 1.0);
    s.asin().to_degrees()
}

/// Elevation of every user at every slot epoch of a pass.
///
/// Slot `n` starts at `n * coherence_s`; mid-pass falls at the midpoint of
/// the first and last epoch, so an odd slot count puts one epoch exactly at
/// culmination.
pub fn elevation_profile(
    orbit: &OrbitConfig,
    users: &[GroundUser],
    pass: &PassGeometry,
    n_slots: usize,
    coherence_s: f64,
) -> Result<SlotGrid> {
    orbit.validate()?;
    if n_slots == 0 {
        return Err(Error::Config("n_slots must be >= 1".into()));
    }
    if !(coherence_s > 0.0) {
        return Err(Error::Config(format!("coherence_s must be > 0, got {coherence_s}")));
    }
    let mut seen = std::collections::HashSet::new();
    for u in users {
        if u.lat_deg.abs() > 90.0 {
            return Err(Error::Scenario(format!("user {} has latitude {} outside [-90, 90]", u.id, u.lat_deg)));
        }
        if !seen.insert(u.id) {
            return Err(Error::Scenario(format!("duplicate user id {}", u.id)));
        }
    }

    let slot_epoch_s: Vec<f64> = (0..n_slots).map(|n| n as f64 * coherence_s).collect();
    let t_mid = 0.5 * (n_slots - 1) as f64 * coherence_s;
    let track = PassTrack::new(orbit, pass, t_mid);
    let positions: Vec<Vec3> = slot_epoch_s.iter().map(|&t| track.position(t)).collect();

    let mut elevation = Vec::with_capacity(users.len());
    for user in users {
        let row: Vec<f64> = positions
            .iter()
            .map(|&p| elevation_deg(p, user, orbit.earth_radius_km))
            .collect();
        if let Some((n, a)) = row.iter().enumerate().find(|(_, &a)| a <= pass.mask_deg) {
            return Err(Error::Scenario(format!(
                "user {} is not visible above the {} deg mask at slot {n} (elevation {a:.2} deg)",
                user.id, pass.mask_deg
            )));
        }
        elevation.push(row);
    }

    Ok(SlotGrid {
        n_slots,
        coherence_s,
        elevation_deg: elevation,
        slot_epoch_s,
    })
}

/// Offsets a ground point by `(east_km, north_km)` on the sphere.
pub fn offset_point(lat_deg: f64, lon_deg: f64, east_km: f64, north_km: f64, earth_radius_km: f64) -> (f64, f64) {
    let dlat = (north_km / earth_radius_km).to_degrees();
    let dlon = (east_km / (earth_radius_km * lat_deg.to_radians().cos())).to_degrees();
    (lat_deg + dlat, lon_deg + dlon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slant_range_reference_values() {
        let orbit = OrbitConfig::default();
        assert_eq!(slant_range(90.0, &orbit).unwrap(), 540.0);
        // sqrt(540^2 + 2*540*6371)
        assert_relative_eq!(slant_range(0.0, &orbit).unwrap(), 7_172_280f64.sqrt(), max_relative = 1e-12);
        assert!((slant_range(0.0, &orbit).unwrap() - 2678.11).abs() < 0.01);
        assert!((slant_range(30.0, &orbit).unwrap() - 976.2).abs() < 0.05);
    }

    #[test]
    fn slant_range_rejects_bad_angles() {
        let orbit = OrbitConfig::default();
        assert!(matches!(slant_range(-1.0, &orbit), Err(Error::Domain(_))));
        assert!(matches!(slant_range(90.5, &orbit), Err(Error::Domain(_))));
        assert!(slant_range(f64::NAN, &orbit).is_err());
    }

    #[test]
    fn slant_range_monotone() {
        let orbit = OrbitConfig::default();
        let mut prev = f64::INFINITY;
        for i in 0..=900 {
            let d = slant_range(i as f64 * 0.1, &orbit).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn doppler_reference_values() {
        let orbit = OrbitConfig::default();
        assert_eq!(max_doppler(90.0, &orbit).unwrap().abs() < 1e-6, true);
        assert!((orbit.orbital_speed_km_s() - 7.5945).abs() < 1e-4);
        let nu = max_doppler(0.0, &orbit).unwrap();
        assert!((nu - 696.64e3).abs() < 50.0, "nu = {nu}");
        let mut prev = f64::INFINITY;
        for i in 0..=90 {
            let v = max_doppler(i as f64, &orbit).unwrap();
            assert!(v >= 0.0 && v <= prev);
            prev = v;
        }
    }

    fn center_user(pass: &PassGeometry, id: usize) -> GroundUser {
        GroundUser { id, lat_deg: pass.center_lat_deg, lon_deg: pass.center_lon_deg }
    }

    #[test]
    fn zenith_at_mid_pass() {
        let orbit = OrbitConfig::default();
        let pass = PassGeometry::default();
        let grid = elevation_profile(&orbit, &[center_user(&pass, 0)], &pass, 31, 5.0).unwrap();
        assert!((grid.elevation_deg[0][15] - 90.0).abs() < 1e-6);
        for w in grid.slot_epoch_s.windows(2) {
            assert_eq!(w[1] - w[0], 5.0);
        }
    }

    #[test]
    fn identical_users_identical_rows() {
        let orbit = OrbitConfig::default();
        let pass = PassGeometry::default();
        let users = [center_user(&pass, 0), center_user(&pass, 1)];
        let grid = elevation_profile(&orbit, &users, &pass, 10, 5.0).unwrap();
        assert_eq!(grid.elevation_deg[0], grid.elevation_deg[1]);
        let again = elevation_profile(&orbit, &users, &pass, 10, 5.0).unwrap();
        assert_eq!(grid, again);
    }

    #[test]
    fn overhead_pass_is_symmetric() {
        let orbit = OrbitConfig::default();
        let pass = PassGeometry::default();
        let grid = elevation_profile(&orbit, &[center_user(&pass, 0)], &pass, 30, 5.0).unwrap();
        let row = &grid.elevation_deg[0];
        for n in 0..30 {
            assert!((row[n] - row[29 - n]).abs() < 0.5);
        }
        // peak sits in the middle two slots
        let imax = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!(imax == 14 || imax == 15);
    }

    #[test]
    fn invisible_user_is_named() {
        let orbit = OrbitConfig::default();
        let pass = PassGeometry::default();
        let far = GroundUser { id: 42, lat_deg: 10.0, lon_deg: -20.0 };
        let err = elevation_profile(&orbit, &[far], &pass, 10, 5.0).unwrap_err();
        assert!(matches!(&err, Error::Scenario(m) if m.contains("user 42")), "{err}");
    }

    #[test]
    fn offset_point_round_trip_distance() {
        let (lat, lon) = offset_point(-35.0, 149.0, 30.0, 40.0, 6371.0);
        let a = unit_up(-35.0, 149.0);
        let b = unit_up(lat, lon);
        let dist = dot(a, b).clamp(-1.0, 1.0).acos() * 6371.0;
        assert!((dist - 50.0).abs() < 0.2, "{dist}");
    }
}
