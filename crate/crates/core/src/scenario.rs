//! World description: physical parameters, ground devices, UAVs and the
//! satellite constellation, plus the config and snapshot file formats.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GeoPoint, Point2};
use crate::tle;

/// Earth's gravitational parameter, m³/s².
pub const MU_EARTH: f64 = 3.986004418e14;

/// Sidereal rotation rate of the Earth, rad/s.
pub const EARTH_ROTATION_RATE: f64 = 7.292115e-5;

pub type DeviceId = u32;
pub type UavId = u32;
pub type SatId = u32;

/// Physical and model constants. Angles in radians, gains linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Device transmit power floor, W.
    pub p_min: f64,
    /// Device transmit power ceiling, W.
    pub p_max: f64,
    pub hover_power: f64,
    pub flight_power: f64,
    pub sat_compute_power: f64,
    /// UAV uplink transmit power towards the satellite, W.
    pub uav_tx_power: f64,
    pub ground_bandwidth: f64,
    pub space_bandwidth: f64,
    pub carrier_freq: f64,
    /// Ground channel gain at the 1 m reference distance.
    pub ref_gain: f64,
    pub uav_antenna_gain: f64,
    pub sat_antenna_gain: f64,
    pub earth_radius: f64,
    pub uav_altitude: f64,
    pub min_elevation: f64,
    /// NOMA power-difference ratio for successive decoding.
    pub power_ratio: f64,
    pub earth_rotation_rate: f64,
    /// Satellite processing rate, bit/s.
    pub sat_compute_rate: f64,
    pub ground_noise: f64,
    pub space_noise: f64,
    pub uav_speed: f64,
    /// Maximum device separation for a NOMA pair, m.
    pub pair_distance: f64,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// The reference simulation parameter set.
pub fn default_params() -> SimParams {
    SimParams {
        p_min: 0.1,
        p_max: 5.0,
        hover_power: 80.0,
        flight_power: 240.0,
        sat_compute_power: 200.0,
        uav_tx_power: 10.0,
        ground_bandwidth: 1e6,
        space_bandwidth: 10e6,
        carrier_freq: 20e9,
        ref_gain: 9.89e-5,
        uav_antenna_gain: db_to_linear(10.0),
        sat_antenna_gain: db_to_linear(30.0),
        earth_radius: 6378e3,
        uav_altitude: 200.0,
        min_elevation: 15f64.to_radians(),
        power_ratio: 0.8,
        earth_rotation_rate: EARTH_ROTATION_RATE,
        sat_compute_rate: 25e6,
        ground_noise: 1e-18,
        space_noise: 4e-14,
        uav_speed: 10.0,
        pair_distance: 100.0,
    }
}

impl Default for SimParams {
    fn default() -> Self {
        default_params()
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_min", self.p_min),
            ("p_max", self.p_max),
            ("hover_power", self.hover_power),
            ("flight_power", self.flight_power),
            ("sat_compute_power", self.sat_compute_power),
            ("uav_tx_power", self.uav_tx_power),
            ("ground_bandwidth", self.ground_bandwidth),
            ("space_bandwidth", self.space_bandwidth),
            ("carrier_freq", self.carrier_freq),
            ("ref_gain", self.ref_gain),
            ("uav_antenna_gain", self.uav_antenna_gain),
            ("sat_antenna_gain", self.sat_antenna_gain),
            ("earth_radius", self.earth_radius),
            ("uav_altitude", self.uav_altitude),
            ("sat_compute_rate", self.sat_compute_rate),
            ("ground_noise", self.ground_noise),
            ("space_noise", self.space_noise),
            ("uav_speed", self.uav_speed),
            ("pair_distance", self.pair_distance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.p_min >= self.p_max {
            return Err(Error::InvalidArgument(format!(
                "p_min ({}) must be below p_max ({})",
                self.p_min, self.p_max
            )));
        }
        if !(self.power_ratio > 0.0 && self.power_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "power_ratio must lie in (0, 1), got {}",
                self.power_ratio
            )));
        }
        if !(self.min_elevation > 0.0 && self.min_elevation < PI / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "min_elevation must lie in (0, pi/2), got {}",
                self.min_elevation
            )));
        }
        if (self.earth_rotation_rate / EARTH_ROTATION_RATE - 1.0).abs() > 0.1 {
            return Err(Error::InvalidArgument(format!(
                "earth_rotation_rate {} rad/s is not within 10% of {EARTH_ROTATION_RATE}",
                self.earth_rotation_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IotDevice {
    pub id: DeviceId,
    pub position: Point2,
    pub data_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    pub id: UavId,
    pub start: Point2,
    /// Geodetic location of the operation area used for satellite geometry.
    pub site: GeoPoint,
}

/// Circular-orbit elements of one satellite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitElements {
    pub sat_id: SatId,
    pub altitude: f64,
    pub inclination: f64,
    pub raan: f64,
    /// Argument of latitude at the scenario epoch.
    pub phase0: f64,
    /// Orbital angular rate, rad/s.
    pub angular_rate: f64,
}

/// Angular rate of a circular orbit at `altitude` above a sphere of `earth_radius`.
pub fn circular_rate(altitude: f64, earth_radius: f64) -> f64 {
    (MU_EARTH / (earth_radius + altitude).powi(3)).sqrt()
}

impl OrbitElements {
    pub fn circular(
        sat_id: SatId,
        altitude: f64,
        inclination: f64,
        raan: f64,
        phase0: f64,
        earth_radius: f64,
    ) -> Self {
        Self {
            sat_id,
            altitude,
            inclination,
            raan,
            phase0,
            angular_rate: circular_rate(altitude, earth_radius),
        }
    }

    /// True when the angular rate matches circular Kepler motion within 1%.
    pub fn is_kepler_consistent(&self, earth_radius: f64) -> bool {
        let expected = circular_rate(self.altitude, earth_radius);
        self.altitude > 0.0 && ((self.angular_rate - expected) / expected).abs() <= 0.01
    }
}

/// Immutable world description consumed by every other module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub t_epoch: f64,
    pub params: SimParams,
    pub devices: Vec<IotDevice>,
    pub uavs: Vec<UavConfig>,
    #[serde(rename = "satellites")]
    pub constellation: Vec<OrbitElements>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.devices.is_empty() || self.uavs.is_empty() || self.constellation.is_empty() {
            return Err(Error::InvalidArgument(
                "scenario needs at least one device, one UAV and one satellite".into(),
            ));
        }
        let mut ids: Vec<u32> = self.devices.iter().map(|d| d.id).collect();
        check_unique(&mut ids, "device")?;
        let mut ids: Vec<u32> = self.uavs.iter().map(|u| u.id).collect();
        check_unique(&mut ids, "uav")?;
        let mut ids: Vec<u32> = self.constellation.iter().map(|s| s.sat_id).collect();
        check_unique(&mut ids, "satellite")?;
        for d in &self.devices {
            if d.data_bits == 0 || !d.position.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "device {} needs finite position and data_bits > 0",
                    d.id
                )));
            }
        }
        for u in &self.uavs {
            if !(-PI / 2.0..=PI / 2.0).contains(&u.site.lat) {
                return Err(Error::InvalidArgument(format!(
                    "uav {} latitude out of range",
                    u.id
                )));
            }
        }
        for s in &self.constellation {
            if !s.is_kepler_consistent(self.params.earth_radius) {
                return Err(Error::InvalidArgument(format!(
                    "satellite {} angular rate is inconsistent with its altitude",
                    s.sat_id
                )));
            }
        }
        Ok(())
    }

    pub fn device(&self, id: DeviceId) -> Option<&IotDevice> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn satellite(&self, id: SatId) -> Option<&OrbitElements> {
        self.constellation.iter().find(|s| s.sat_id == id)
    }

    pub fn total_data_bits(&self) -> u64 {
        self.devices.iter().map(|d| d.data_bits).sum()
    }

    /// Serializes the fully expanded scenario.
    pub fn to_snapshot_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_snapshot_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_snapshot_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_snapshot_str(&text)
    }
}

fn check_unique(ids: &mut [u32], what: &str) -> Result<()> {
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "duplicate {what} id {}",
            w[0]
        )));
    }
    Ok(())
}

/// Flat key/value scenario configuration. Unknown keys are rejected.
///
/// Angles are given in degrees and antenna gains in dBi here; they are
/// converted when the [`SimParams`] are built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub devices: usize,
    pub uavs: usize,
    pub sats: usize,
    pub area_side: f64,
    pub site_lat_deg: f64,
    pub site_lon_deg: f64,
    pub data_min_bits: u64,
    pub data_max_bits: u64,
    pub sat_altitude: f64,
    pub sat_inclination_deg: f64,
    pub t_epoch: f64,
    /// Optional TLE catalog; when set, satellites are sampled from it.
    pub tle_path: Option<String>,
    pub gwo_population: usize,
    pub gwo_iterations: usize,

    pub p_min: f64,
    pub p_max: f64,
    pub hover_power: f64,
    pub flight_power: f64,
    pub sat_compute_power: f64,
    pub uav_tx_power: f64,
    pub ground_bandwidth: f64,
    pub space_bandwidth: f64,
    pub carrier_freq: f64,
    pub ref_gain: f64,
    pub uav_antenna_gain_dbi: f64,
    pub sat_antenna_gain_dbi: f64,
    pub earth_radius: f64,
    pub uav_altitude: f64,
    pub min_elevation_deg: f64,
    pub power_ratio: f64,
    pub earth_rotation_rate: f64,
    pub sat_compute_rate: f64,
    pub ground_noise: f64,
    pub space_noise: f64,
    pub uav_speed: f64,
    pub pair_distance: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = default_params();
        Self {
            seed: 0,
            devices: 30,
            uavs: 3,
            sats: 200,
            area_side: 500.0,
            site_lat_deg: 15.0,
            site_lon_deg: 118.0,
            data_min_bits: 1_000_000,
            data_max_bits: 10_000_000,
            sat_altitude: 550e3,
            sat_inclination_deg: 53.0,
            t_epoch: 0.0,
            tle_path: None,
            gwo_population: 50,
            gwo_iterations: 200,
            p_min: p.p_min,
            p_max: p.p_max,
            hover_power: p.hover_power,
            flight_power: p.flight_power,
            sat_compute_power: p.sat_compute_power,
            uav_tx_power: p.uav_tx_power,
            ground_bandwidth: p.ground_bandwidth,
            space_bandwidth: p.space_bandwidth,
            carrier_freq: p.carrier_freq,
            ref_gain: p.ref_gain,
            uav_antenna_gain_dbi: 10.0,
            sat_antenna_gain_dbi: 30.0,
            earth_radius: p.earth_radius,
            uav_altitude: p.uav_altitude,
            min_elevation_deg: 15.0,
            power_ratio: p.power_ratio,
            earth_rotation_rate: p.earth_rotation_rate,
            sat_compute_rate: p.sat_compute_rate,
            ground_noise: p.ground_noise,
            space_noise: p.space_noise,
            uav_speed: p.uav_speed,
            pair_distance: p.pair_distance,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> SimParams {
        SimParams {
            p_min: self.p_min,
            p_max: self.p_max,
            hover_power: self.hover_power,
            flight_power: self.flight_power,
            sat_compute_power: self.sat_compute_power,
            uav_tx_power: self.uav_tx_power,
            ground_bandwidth: self.ground_bandwidth,
            space_bandwidth: self.space_bandwidth,
            carrier_freq: self.carrier_freq,
            ref_gain: self.ref_gain,
            uav_antenna_gain: db_to_linear(self.uav_antenna_gain_dbi),
            sat_antenna_gain: db_to_linear(self.sat_antenna_gain_dbi),
            earth_radius: self.earth_radius,
            uav_altitude: self.uav_altitude,
            min_elevation: self.min_elevation_deg.to_radians(),
            power_ratio: self.power_ratio,
            earth_rotation_rate: self.earth_rotation_rate,
            sat_compute_rate: self.sat_compute_rate,
            ground_noise: self.ground_noise,
            space_noise: self.space_noise,
            uav_speed: self.uav_speed,
            pair_distance: self.pair_distance,
        }
    }

    /// Builds the scenario. A pure function of the configuration (and the
    /// TLE file contents when `tle_path` is set).
    pub fn generate(&self) -> Result<Scenario> {
        let catalog = match &self.tle_path {
            Some(p) => {
                let path = Path::new(p);
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Some(tle::parse_tle(&text)?.elements)
            }
            None => None,
        };
        self.generate_with_catalog(catalog.as_deref())
    }

    pub fn generate_with_catalog(&self, catalog: Option<&[OrbitElements]>) -> Result<Scenario> {
        if self.devices == 0 || self.uavs == 0 || self.sats == 0 {
            return Err(Error::InvalidArgument(
                "device, uav and satellite counts must all be >= 1".into(),
            ));
        }
        if !(self.area_side.is_finite() && self.area_side > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "area_side must be > 0, got {}",
                self.area_side
            )));
        }
        if self.data_min_bits == 0 || self.data_min_bits > self.data_max_bits {
            return Err(Error::InvalidArgument(
                "data size range must satisfy 0 < data_min_bits <= data_max_bits".into(),
            ));
        }
        let params = self.params();
        params.validate()?;

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let side = self.area_side;
        let devices = (0..self.devices)
            .map(|i| {
                let x = rng.gen_range(0.0..side);
                let y = rng.gen_range(0.0..side);
                let data_bits = rng.gen_range(self.data_min_bits..=self.data_max_bits);
                IotDevice {
                    id: i as DeviceId,
                    position: Point2::new(x, y),
                    data_bits,
                }
            })
            .collect();

        let site = GeoPoint::from_degrees(self.site_lat_deg, self.site_lon_deg);
        let center = Point2::new(side / 2.0, side / 2.0);
        let uavs = (0..self.uavs)
            .map(|i| UavConfig {
                id: i as UavId,
                start: center,
                site,
            })
            .collect();

        let constellation = match catalog {
            Some(cat) => {
                if cat.len() < self.sats {
                    return Err(Error::InvalidArgument(format!(
                        "TLE catalog has {} satellites, {} requested",
                        cat.len(),
                        self.sats
                    )));
                }
                let mut picked = index::sample(&mut rng, cat.len(), self.sats).into_vec();
                picked.sort_unstable();
                picked.into_iter().map(|i| cat[i].clone()).collect()
            }
            None => (0..self.sats)
                .map(|i| {
                    let raan = rng.gen_range(0.0..TAU);
                    let phase0 = rng.gen_range(0.0..TAU);
                    OrbitElements::circular(
                        i as SatId,
                        self.sat_altitude,
                        self.sat_inclination_deg.to_radians(),
                        raan,
                        phase0,
                        params.earth_radius,
                    )
                })
                .collect(),
        };

        let scenario = Scenario {
            seed: self.seed,
            t_epoch: self.t_epoch,
            params,
            devices,
            uavs,
            constellation,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Random scenario with the reference parameters: devices uniform in a
/// square of `area_side`, UAVs at its center, a 550 km / 53° shell.
pub fn generate_scenario(
    seed: u64,
    n_devices: usize,
    n_uavs: usize,
    n_sats: usize,
    area_side: f64,
) -> Result<Scenario> {
    ScenarioConfig {
        seed,
        devices: n_devices,
        uavs: n_uavs,
        sats: n_sats,
        area_side,
        ..ScenarioConfig::default()
    }
    .generate_with_catalog(None)
}

/// TOML integers are signed 64-bit; seeds above `i64::MAX` round-trip as strings.
mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(|_| de::Error::custom("seed must be >= 0")),
            Repr::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}
