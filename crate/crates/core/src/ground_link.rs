//! IoT device to UAV link: line-of-sight channel gain, NOMA SINR under
//! successive interference cancellation, and the resulting rate, delay and
//! device transmit energy.

use std::collections::BTreeMap;

use crate::collection::Association;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::scenario::{DeviceId, IotDevice, SimParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundLinkSample {
    pub device_id: DeviceId,
    pub gain: f64,
    pub sinr: f64,
    /// bit/s
    pub rate: f64,
    pub tx_delay: f64,
    pub device_energy: f64,
}

/// Free-space gain between a hovering UAV and a ground device.
pub fn channel_gain(hover: Point3, device: Point2, params: &SimParams) -> f64 {
    let dx = hover.x - device.x;
    let dy = hover.y - device.y;
    params.ref_gain / (hover.z * hover.z + dx * dx + dy * dy)
}

/// SINR of a first-decoded NOMA member: the partner's signal is interference.
pub fn sinr_first_decoded(p_k: f64, g_k: f64, p_m: f64, g_m: f64, noise: f64) -> f64 {
    p_k * g_k / (p_m * g_m + noise)
}

/// SINR with no co-channel interference (second-decoded member or singleton).
pub fn sinr_clear(p: f64, g: f64, noise: f64) -> f64 {
    p * g / noise
}

/// SINR of `device` given the pairing structure, transmit powers and gains.
pub fn sinr(
    device: DeviceId,
    association: &Association,
    powers: &BTreeMap<DeviceId, f64>,
    gains: &BTreeMap<DeviceId, f64>,
    params: &SimParams,
) -> Result<f64> {
    let lookup = |id: DeviceId, map: &BTreeMap<DeviceId, f64>, what: &str| {
        map.get(&id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("{what} for device {id}")))
    };
    let p = lookup(device, powers, "power")?;
    let g = lookup(device, gains, "gain")?;
    if let Some(&(first, second)) = association
        .pairs
        .iter()
        .find(|&&(a, b)| a == device || b == device)
    {
        if first == device {
            let pm = lookup(second, powers, "power")?;
            let gm = lookup(second, gains, "gain")?;
            return Ok(sinr_first_decoded(p, g, pm, gm, params.ground_noise));
        }
        return Ok(sinr_clear(p, g, params.ground_noise));
    }
    if association.singles.contains(&device) {
        return Ok(sinr_clear(p, g, params.ground_noise));
    }
    Err(Error::NotFound(format!(
        "device {device} is not in the association"
    )))
}

/// Shannon rate over `bandwidth`.
pub fn shannon_rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * (1.0 + sinr).log2()
}

/// Rate, transmit delay and energy for one device over the full ground bandwidth.
pub fn rate_delay_energy(
    device: &IotDevice,
    sinr: f64,
    power: f64,
    params: &SimParams,
) -> Result<GroundLinkSample> {
    rate_delay_energy_with_bandwidth(device, sinr, power, params.ground_bandwidth, params)
}

pub fn rate_delay_energy_with_bandwidth(
    device: &IotDevice,
    sinr: f64,
    power: f64,
    bandwidth: f64,
    params: &SimParams,
) -> Result<GroundLinkSample> {
    if !(sinr > 0.0) {
        return Err(Error::Infeasible(format!(
            "device {} has SINR {sinr}; transmission never completes",
            device.id
        )));
    }
    let rate = shannon_rate(bandwidth, sinr);
    let tx_delay = device.data_bits as f64 / rate;
    Ok(GroundLinkSample {
        device_id: device.id,
        gain: params.ref_gain,
        sinr,
        rate,
        tx_delay,
        device_energy: power * tx_delay,
    })
}

/// Successive-decoding feasibility: `rho * p_m * G_m <= p_k * G_k`.
pub fn decode_order_holds(p_k: f64, g_k: f64, p_m: f64, g_m: f64, rho: f64) -> bool {
    rho * p_m * g_m <= p_k * g_k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_params;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    #[test]
    fn gain_directly_below_and_offset() {
        let p = default_params();
        let hover = Point3::new(0.0, 0.0, 200.0);
        let g0 = channel_gain(hover, Point2::new(0.0, 0.0), &p);
        let g100 = channel_gain(hover, Point2::new(100.0, 0.0), &p);
        assert!(close(g0, 2.4725e-9, 1e-12));
        assert!(close(g100, 1.9780e-9, 1e-12));
        assert!(g0 > g100);
    }

    #[test]
    fn pair_and_single_sinr() {
        let p = default_params();
        let assoc = Association {
            pairs: vec![(1, 2)],
            singles: vec![3],
        };
        let powers = BTreeMap::from([(1, 5.0), (2, 2.0), (3, 5.0)]);
        let gains = BTreeMap::from([(1, 2.3271e-9), (2, 2.3271e-9), (3, 2.4725e-9)]);
        let s1 = sinr(1, &assoc, &powers, &gains, &p).unwrap();
        let s2 = sinr(2, &assoc, &powers, &gains, &p).unwrap();
        let s3 = sinr(3, &assoc, &powers, &gains, &p).unwrap();
        assert!((s1 - 2.5).abs() < 1e-8);
        assert!(close(s2, 4.6542e9, 1e-12));
        assert!(close(s3, 1.23625e10, 1e-12));
        assert!(matches!(
            sinr(9, &assoc, &powers, &gains, &p),
            Err(Error::NotFound(_))
        ));
    }

    #[test]
    fn rate_delay_energy_reference_case() {
        let p = default_params();
        let dev = IotDevice {
            id: 0,
            position: Point2::default(),
            data_bits: 1_000_000,
        };
        let s = rate_delay_energy(&dev, 1.23625e10, 5.0, &p).unwrap();
        assert!(close(s.rate, 3.3525e7, 1e-4));
        assert!(close(s.tx_delay, 0.02983, 1e-3));
        assert!(close(s.device_energy, 0.1491, 1e-3));

        let one = rate_delay_energy(&dev, 1.0, 5.0, &p).unwrap();
        assert_eq!(one.rate, p.ground_bandwidth);
        let three = rate_delay_energy(&dev, 3.0, 5.0, &p).unwrap();
        assert_eq!(three.rate, 2.0 * p.ground_bandwidth);

        assert!(matches!(
            rate_delay_energy(&dev, 0.0, 5.0, &p),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn decode_order_check_is_exact() {
        assert!(decode_order_holds(5.0, 1.0, 5.0, 1.25, 0.8));
        assert!(!decode_order_holds(5.0, 1.0, 5.0, 1.26, 0.8));
    }
}
