//! LEO satellite selection for UAV offloading and the phase-two energy.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeoPoint;
use crate::orbit::observe;
use crate::scenario::{OrbitElements, SatId, SimParams, UavId};
use crate::space_link::{compute_delay, link_rate, uplink_delay};
use crate::streams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionKind {
    MaxThroughput,
    Random,
    Unchanging,
}

impl SelectionKind {
    pub const ALL: [SelectionKind; 3] = [Self::MaxThroughput, Self::Random, Self::Unchanging];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MaxThroughput => "max-throughput",
            Self::Random => "random",
            Self::Unchanging => "unchanging",
        }
    }
}

impl fmt::Display for SelectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "max-throughput" | "maxthroughput" | "max" => Ok(Self::MaxThroughput),
            "random" => Ok(Self::Random),
            "unchanging" => Ok(Self::Unchanging),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection policy '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    pub kind: SelectionKind,
    /// Seeds the random policy.
    pub seed: u64,
}

impl SelectionPolicy {
    pub fn new(kind: SelectionKind, seed: u64) -> Self {
        Self { kind, seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibleSatellite {
    pub sat_id: SatId,
    pub elevation: f64,
    pub slant_range: f64,
    pub rate: f64,
}

/// One offload event: the UAV sends `data_bits` to `sat_id`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionDecision {
    pub uav_id: UavId,
    /// Time the UAV became ready to offload, s.
    pub t_request: f64,
    /// Hover time spent waiting for a satellite to rise, s.
    pub t_wait: f64,
    /// Selection instant, s.
    pub t_offload: f64,
    pub sat_id: SatId,
    pub elevation: f64,
    pub rate_at_selection: f64,
    pub data_bits: u64,
    pub t_tr: f64,
    pub t_sa: f64,
}

impl SelectionDecision {
    /// Total UAV hover time attributed to this event.
    pub fn hover_time(&self) -> f64 {
        self.t_wait + self.t_tr + self.t_sa
    }

    pub fn t_done(&self) -> f64 {
        self.t_offload + self.t_tr + self.t_sa
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadOptions {
    /// Give up if no satellite rises within this many seconds.
    pub horizon: f64,
    /// Scan step when waiting for a satellite, s.
    pub dt: f64,
}

impl Default for OffloadOptions {
    fn default() -> Self {
        Self {
            horizon: 7200.0,
            dt: 1.0,
        }
    }
}

/// Satellites strictly above `theta_min` at time `t`, ordered by id.
pub fn visible_satellites(
    constellation: &[OrbitElements],
    site: GeoPoint,
    t: f64,
    theta_min: f64,
    params: &SimParams,
) -> Vec<VisibleSatellite> {
    let mut v: Vec<VisibleSatellite> = constellation
        .iter()
        .map(|o| observe(o, site, t, params))
        .filter(|o| o.elevation > theta_min)
        .map(|o| VisibleSatellite {
            sat_id: o.sat_id,
            elevation: o.elevation,
            slant_range: o.slant_range,
            rate: link_rate(o.slant_range, params),
        })
        .collect();
    v.sort_by_key(|s| s.sat_id);
    v
}

fn max_throughput(visible: &[VisibleSatellite]) -> SatId {
    visible
        .iter()
        .fold(None::<&VisibleSatellite>, |best, s| match best {
            Some(b) if b.rate > s.rate || (b.rate == s.rate && b.sat_id < s.sat_id) => Some(b),
            _ => Some(s),
        })
        .map(|s| s.sat_id)
        .expect("non-empty")
}

/// Picks a satellite from the visible set.
pub fn select(
    policy: &SelectionPolicy,
    uav_id: UavId,
    visible: &[VisibleSatellite],
    previous: Option<&SelectionDecision>,
    t: f64,
) -> Result<SatId> {
    if visible.is_empty() {
        return Err(Error::Scheduling(format!(
            "no satellite visible at t = {t} s"
        )));
    }
    Ok(match policy.kind {
        SelectionKind::MaxThroughput => max_throughput(visible),
        SelectionKind::Random => {
            let mut rng = streams::stream(policy.seed, &[u64::from(uav_id), t.to_bits()]);
            visible[rng.gen_range(0..visible.len())].sat_id
        }
        SelectionKind::Unchanging => match previous {
            Some(p) if visible.iter().any(|s| s.sat_id == p.sat_id) => p.sat_id,
            _ => max_throughput(visible),
        },
    })
}

/// Earliest time in `(t, t + horizon]` at which any satellite is visible.
fn next_visible_time(
    constellation: &[OrbitElements],
    site: GeoPoint,
    t: f64,
    params: &SimParams,
    opts: &OffloadOptions,
) -> Result<f64> {
    let any = |t: f64| {
        constellation
            .iter()
            .any(|o| observe(o, site, t, params).elevation > params.min_elevation)
    };
    let steps = (opts.horizon / opts.dt).ceil() as usize;
    let mut lo = t;
    for k in 1..=steps {
        let hi = t + (k as f64 * opts.dt).min(opts.horizon);
        if any(hi) {
            let (mut a, mut b) = (lo, hi);
            while b - a > 0.01 {
                let mid = 0.5 * (a + b);
                if any(mid) {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return Ok(b);
        }
        lo = hi;
    }
    Err(Error::Scheduling(format!(
        "no satellite visible within {} s after t = {t} s",
        opts.horizon
    )))
}

/// Offloads `data_bits` from a UAV at `site`, waiting for the next
/// visibility window if nothing is above the threshold.
#[allow(clippy::too_many_arguments)]
pub fn offload(
    uav_id: UavId,
    site: GeoPoint,
    data_bits: u64,
    t_request: f64,
    policy: &SelectionPolicy,
    previous: Option<&SelectionDecision>,
    constellation: &[OrbitElements],
    params: &SimParams,
    opts: &OffloadOptions,
) -> Result<SelectionDecision> {
    if data_bits == 0 {
        return Err(Error::InvalidArgument("offload needs data".into()));
    }
    if !(opts.dt > 0.0) || !(opts.horizon >= 0.0) {
        return Err(Error::InvalidArgument(
            "offload scan step and horizon must be positive".into(),
        ));
    }
    let mut t = t_request;
    let mut visible = visible_satellites(constellation, site, t, params.min_elevation, params);
    if visible.is_empty() {
        t = next_visible_time(constellation, site, t, params, opts)?;
        visible = visible_satellites(constellation, site, t, params.min_elevation, params);
        if visible.is_empty() {
            return Err(Error::Scheduling(format!("visibility lost at t = {t} s")));
        }
    }
    let sat_id = select(policy, uav_id, &visible, previous, t)?;
    let chosen = visible
        .iter()
        .find(|s| s.sat_id == sat_id)
        .expect("selected from visible");
    Ok(SelectionDecision {
        uav_id,
        t_request,
        t_wait: t - t_request,
        t_offload: t,
        sat_id,
        elevation: chosen.elevation,
        rate_at_selection: chosen.rate,
        data_bits,
        t_tr: uplink_delay(data_bits, chosen.rate)?,
        t_sa: compute_delay(data_bits, params.sat_compute_rate)?,
    })
}

/// Satellite compute energy plus UAV hover energy over all events.
pub fn phase2_energy(decisions: &[SelectionDecision], params: &SimParams) -> f64 {
    let compute: f64 = decisions.iter().map(|d| d.t_sa).sum();
    let hover: f64 = decisions.iter().map(SelectionDecision::hover_time).sum();
    params.sat_compute_power * compute + params.hover_power * hover
}

pub fn write_decisions_csv(path: &Path, decisions: &[SelectionDecision]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record([
        "uav_id",
        "t_offload",
        "sat_id",
        "elevation",
        "rate",
        "t_tr",
        "t_sa",
        "t_wait",
    ])?;
    for d in decisions {
        out.write_record([
            d.uav_id.to_string(),
            d.t_offload.to_string(),
            d.sat_id.to_string(),
            d.elevation.to_string(),
            d.rate_at_selection.to_string(),
            d.t_tr.to_string(),
            d.t_sa.to_string(),
            d.t_wait.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
