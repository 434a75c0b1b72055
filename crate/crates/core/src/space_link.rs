//! UAV to LEO uplink budget, data aggregation and delays.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::collection::Association;
use crate::error::{Error, Result};
use crate::scenario::{DeviceId, IotDevice, SatId, SimParams};

pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// How the link SNR is composed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LinkMode {
    /// SNR = Friis received power / noise.
    #[default]
    Physical,
    /// Received power multiplied by the abbreviated path-loss figure
    /// `92.44 + log10(r_km) + log10(f_GHz)`, as literally composed in the
    /// source model. Dimensionally inconsistent; kept for auditing only.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceLinkSample {
    pub sat_id: SatId,
    pub t: f64,
    pub slant_range: f64,
    pub fspl_db: f64,
    pub received_power: f64,
    pub rate: f64,
}

/// Free-space path loss in dB for range in meters and frequency in Hz.
pub fn fspl_db(r: f64, f: f64) -> f64 {
    92.44 + 20.0 * (r / 1e3).log10() + 20.0 * (f / 1e9).log10()
}

/// Friis received power at the satellite.
pub fn received_power(r: f64, params: &SimParams) -> f64 {
    let k = SPEED_OF_LIGHT / (4.0 * PI * params.carrier_freq * r);
    params.uav_tx_power * params.sat_antenna_gain * params.uav_antenna_gain * k * k
}

pub fn snr(r: f64, params: &SimParams, mode: LinkMode) -> f64 {
    let p = received_power(r, params);
    match mode {
        LinkMode::Physical => p / params.space_noise,
        LinkMode::Literal => {
            let loss = 92.44 + (r / 1e3).log10() + (params.carrier_freq / 1e9).log10();
            p * loss / params.space_noise
        }
    }
}

/// Uplink rate at slant range `r` in physical mode.
pub fn link_rate(r: f64, params: &SimParams) -> f64 {
    link_rate_with_mode(r, params, LinkMode::Physical)
}

pub fn link_rate_with_mode(r: f64, params: &SimParams, mode: LinkMode) -> f64 {
    params.space_bandwidth * (1.0 + snr(r, params, mode)).log2()
}

pub fn sample(
    sat_id: SatId,
    t: f64,
    r: f64,
    params: &SimParams,
    mode: LinkMode,
) -> SpaceLinkSample {
    SpaceLinkSample {
        sat_id,
        t,
        slant_range: r,
        fspl_db: fspl_db(r, params.carrier_freq),
        received_power: received_power(r, params),
        rate: link_rate_with_mode(r, params, mode),
    }
}

/// Sign function with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn sgn_i64(x: i64) -> i64 {
    x.signum()
}

/// Total data held by a UAV after serving `association`.
pub fn aggregate_uav_data(association: &Association, devices: &[IotDevice]) -> Result<u64> {
    let bits: HashMap<DeviceId, u64> = devices.iter().map(|d| (d.id, d.data_bits)).collect();
    let get = |id: DeviceId| {
        bits.get(&id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("device {id}")))
    };
    let mut total = 0u64;
    for &(a, b) in &association.pairs {
        total += get(a)? + get(b)?;
    }
    for &s in &association.singles {
        total += get(s)?;
    }
    Ok(total)
}

/// Transfer time of `data_bits` at `rate`.
pub fn uplink_delay(data_bits: u64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::Infeasible(format!(
            "uplink rate {rate} cannot carry data"
        )));
    }
    Ok(data_bits as f64 / rate)
}

/// Satellite processing time at compute rate `c_sa` (bit/s).
pub fn compute_delay(data_bits: u64, c_sa: f64) -> Result<f64> {
    if !(c_sa > 0.0) {
        return Err(Error::Infeasible(format!(
            "compute rate {c_sa} cannot process data"
        )));
    }
    Ok(data_bits as f64 / c_sa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point2;
    use crate::scenario::default_params;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn fspl_cases() {
        assert!((fspl_db(1000e3, 20e9) - 178.46).abs() < 0.01);
        assert!((fspl_db(1e3, 1e9) - 92.44).abs() < 1e-12);
        assert!((fspl_db(2.0 * 777e3, 20e9) - fspl_db(777e3, 20e9) - 6.0206).abs() < 1e-4);
    }

    #[test]
    fn friis_cases() {
        let p = default_params();
        // independent evaluation of (c / 4 pi f r)^2 with the reference gains
        let oracle = |r: f64| 10.0 * 1000.0 * 10.0 * (2.99792458e8 / (4.0 * PI * 20e9 * r)).powi(2);
        assert!(close(received_power(1000e3, &p), 1.42286e-13, 1e-5));
        assert!(close(received_power(549.8e3, &p), 4.7071e-13, 1e-4));
        assert!(close(received_power(1234e3, &p), oracle(1234e3), 1e-12));
        assert!(close(
            received_power(1000e3, &p) / received_power(4000e3, &p),
            16.0,
            1e-12
        ));
    }

    #[test]
    fn rate_cases() {
        let p = default_params();
        let s = snr(1000e3, &p, LinkMode::Physical);
        assert!(close(s, 3.5571, 1e-4), "{s}");
        assert!(close(link_rate(1000e3, &p), 2.18813e7, 1e-5));
        // SNR = 1 at the range where received power equals noise
        let r1 = (10.0 * 1000.0 * 10.0 / p.space_noise).sqrt() * SPEED_OF_LIGHT
            / (4.0 * PI * p.carrier_freq);
        assert!(close(link_rate(r1, &p), p.space_bandwidth, 1e-12));
        let mut prev = f64::INFINITY;
        for k in 1..200 {
            let r = 400e3 + 10e3 * k as f64;
            let rate = link_rate(r, &p);
            assert!(rate < prev);
            prev = rate;
        }
    }

    #[test]
    fn literal_mode_differs() {
        let p = default_params();
        let a = link_rate_with_mode(1000e3, &p, LinkMode::Physical);
        let b = link_rate_with_mode(1000e3, &p, LinkMode::Literal);
        assert!(b > a);
    }

    #[test]
    fn delays() {
        let p = default_params();
        let t = uplink_delay(40_000_000, link_rate(1000e3, &p)).unwrap();
        assert!(close(t, 1.82804, 1e-5));
        assert_eq!(compute_delay(40_000_000, p.sat_compute_rate).unwrap(), 1.6);
        assert_eq!(uplink_delay(0, 1.0).unwrap(), 0.0);
        assert!(matches!(uplink_delay(1, 0.0), Err(Error::Infeasible(_))));
        assert!(matches!(compute_delay(1, 0.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn sgn_exhaustive() {
        for x in -1000i64..=1000 {
            assert_eq!(sgn_i64(x), -sgn_i64(-x));
            assert_eq!(sgn(x as f64), sgn_i64(x) as f64);
        }
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
        assert_eq!(sgn(1e-300), 1.0);
        assert_eq!(sgn(-f64::INFINITY), -1.0);
    }

    fn devices(bits: &[u64]) -> Vec<IotDevice> {
        bits.iter()
            .enumerate()
            .map(|(i, &b)| IotDevice {
                id: i as DeviceId,
                position: Point2::default(),
                data_bits: b,
            })
            .collect()
    }

    #[test]
    fn aggregate_cases() {
        let devs = devices(&[2_000_000, 3_000_000, 1_000_000]);
        let a = Association {
            pairs: vec![(0, 1)],
            singles: vec![2],
        };
        assert_eq!(aggregate_uav_data(&a, &devs).unwrap(), 6_000_000);
        let singles = Association::all_singles([0, 1, 2]);
        assert_eq!(aggregate_uav_data(&singles, &devs).unwrap(), 6_000_000);
        assert_eq!(
            aggregate_uav_data(&Association::default(), &devs).unwrap(),
            0
        );
        let missing = Association::all_singles([9]);
        assert!(aggregate_uav_data(&missing, &devs).is_err());
    }

    /// sum_k sum_m alpha[k][m] (D_k + sgn|k - m| D_m) with a symmetric
    /// association matrix counted over k <= m.
    fn double_sum(alpha: &[Vec<u8>], bits: &[u64]) -> u64 {
        let n = bits.len();
        let mut total = 0i64;
        for k in 0..n {
            for m in k..n {
                if alpha[k][m] == 1 {
                    let s = sgn_i64((k as i64 - m as i64).abs());
                    total += bits[k] as i64 + s * bits[m] as i64;
                }
            }
        }
        total as u64
    }

    proptest! {
        #[test]
        fn aggregate_matches_double_sum(seed in any::<u64>(), n in 0usize..20) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bits: Vec<u64> = (0..n).map(|_| rng.gen_range(1..10_000_000)).collect();
            let devs = devices(&bits);
            let mut order: Vec<usize> = (0..n).collect();
            rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);
            let mut alpha = vec![vec![0u8; n]; n];
            let mut assoc = Association::default();
            let mut i = 0;
            while i < n {
                if i + 1 < n && rng.gen_bool(0.5) {
                    let (a, b) = (order[i], order[i + 1]);
                    alpha[a.min(b)][a.max(b)] = 1;
                    assoc.pairs.push((a as DeviceId, b as DeviceId));
                    i += 2;
                } else {
                    alpha[order[i]][order[i]] = 1;
                    assoc.singles.push(order[i] as DeviceId);
                    i += 1;
                }
            }
            prop_assert_eq!(aggregate_uav_data(&assoc, &devs).unwrap(), double_sum(&alpha, &bits));
        }
    }
}
