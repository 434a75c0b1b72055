//! Itemized energy accounting and feasibility checks on a full solution.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::collection::{Association, GroupPlan, HoverPlan};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::ground_link::{channel_gain, shannon_rate, sinr_clear, sinr_first_decoded};
use crate::orbit::elevation_at;
use crate::scenario::{DeviceId, Scenario, UavId};
use crate::selection::SelectionDecision;
use crate::trajectory::{route_length, TrajectoryPlan};

const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyReport {
    pub hover_energy_p1: f64,
    pub flight_energy: f64,
    pub device_energy: f64,
    pub sat_compute_energy: f64,
    pub hover_energy_p2: f64,
    pub total: f64,
}

impl EnergyReport {
    pub fn from_items(hover_p1: f64, flight: f64, device: f64, sat: f64, hover_p2: f64) -> Self {
        Self {
            hover_energy_p1: hover_p1,
            flight_energy: flight,
            device_energy: device,
            sat_compute_energy: sat,
            hover_energy_p2: hover_p2,
            total: hover_p1 + flight + device + sat + hover_p2,
        }
    }

    /// Collection-phase energy: hover, flight and device transmission.
    pub fn phase_one(&self) -> f64 {
        self.hover_energy_p1 + self.flight_energy + self.device_energy
    }

    /// Offloading-phase energy: satellite computation and UAV hover.
    pub fn phase_two(&self) -> f64 {
        self.sat_compute_energy + self.hover_energy_p2
    }

    pub fn items(&self) -> [(&'static str, f64); 6] {
        [
            ("hover_p1_J", self.hover_energy_p1),
            ("flight_J", self.flight_energy),
            ("device_J", self.device_energy),
            ("sat_J", self.sat_compute_energy),
            ("hover_p2_J", self.hover_energy_p2),
            ("total_J", self.total),
        ]
    }
}

impl fmt::Display for EnergyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "hover (collection)  {:>14.3} J", self.hover_energy_p1)?;
        writeln!(f, "flight              {:>14.3} J", self.flight_energy)?;
        writeln!(f, "devices             {:>14.3} J", self.device_energy)?;
        writeln!(f, "satellite compute   {:>14.3} J", self.sat_compute_energy)?;
        writeln!(f, "hover (offloading)  {:>14.3} J", self.hover_energy_p2)?;
        write!(f, "total               {:>14.3} J", self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    /// Constraint number, 22 to 29.
    pub constraint_id: u8,
    pub subject: String,
    pub detail: String,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {}",
            self.constraint_id, self.subject, self.detail
        )
    }
}

fn check_consistency(
    association: &Association,
    plan: &HoverPlan,
    trajectory: &TrajectoryPlan,
    scenario: &Scenario,
) -> Result<()> {
    if association.canonical() != plan.association().canonical() {
        return Err(Error::Integrity(
            "hover plan groups differ from the association".into(),
        ));
    }
    for g in &plan.groups {
        for id in &g.members {
            if scenario.device(*id).is_none() {
                return Err(Error::Integrity(format!(
                    "hover plan references unknown device {id}"
                )));
            }
        }
    }
    if trajectory.routes.len() != scenario.uavs.len() {
        return Err(Error::Integrity(format!(
            "{} routes for {} UAVs",
            trajectory.routes.len(),
            scenario.uavs.len()
        )));
    }
    if let Some(&i) = trajectory
        .routes
        .iter()
        .flatten()
        .find(|&&i| i >= plan.groups.len())
    {
        return Err(Error::Integrity(format!(
            "route visits hover point {i} of {}",
            plan.groups.len()
        )));
    }
    Ok(())
}

/// Builds the itemized report.
pub fn assemble(
    association: &Association,
    plan: &HoverPlan,
    trajectory: &TrajectoryPlan,
    decisions: &[SelectionDecision],
    scenario: &Scenario,
) -> Result<EnergyReport> {
    check_consistency(association, plan, trajectory, scenario)?;
    let p = &scenario.params;
    for d in decisions {
        if !scenario.uavs.iter().any(|u| u.id == d.uav_id) {
            return Err(Error::Integrity(format!(
                "decision for unknown UAV {}",
                d.uav_id
            )));
        }
    }
    let hover_p1: f64 = plan.groups.iter().map(|g| g.hover_energy).sum();
    let device: f64 = plan.groups.iter().map(|g| g.device_energy).sum();
    let flight = p.flight_power * trajectory.total_fly_time();
    let sat = p.sat_compute_power * decisions.iter().map(|d| d.t_sa).sum::<f64>();
    let hover_p2 = p.hover_power
        * decisions
            .iter()
            .map(SelectionDecision::hover_time)
            .sum::<f64>();
    Ok(EnergyReport::from_items(
        hover_p1, flight, device, sat, hover_p2,
    ))
}

/// Total energy recomputed from raw inputs: link rates from powers and hover
/// positions, flight from route geometry, and phase two from data sizes and
/// selected rates. Returns `(E_iu, E_su)`.
pub fn recompute_totals(
    plan: &HoverPlan,
    trajectory: &TrajectoryPlan,
    decisions: &[SelectionDecision],
    scenario: &Scenario,
) -> Result<(f64, f64)> {
    let p = &scenario.params;
    let mut e_iu = 0.0;
    for g in &plan.groups {
        let bits = |id: DeviceId| {
            scenario
                .device(id)
                .map(|d| (d.position, d.data_bits as f64))
                .ok_or_else(|| Error::Integrity(format!("unknown device {id}")))
        };
        let delays: Vec<f64> = match g.members[..] {
            [a] => {
                let (pos, d) = bits(a)?;
                let s = sinr_clear(g.powers[0], channel_gain(g.hover, pos, p), p.ground_noise);
                vec![d / shannon_rate(g.bandwidth, s)]
            }
            [k, m] => {
                let (pk_pos, dk) = bits(k)?;
                let (pm_pos, dm) = bits(m)?;
                let gk = channel_gain(g.hover, pk_pos, p);
                let gm = channel_gain(g.hover, pm_pos, p);
                let sk = sinr_first_decoded(g.powers[0], gk, g.powers[1], gm, p.ground_noise);
                let sm = sinr_clear(g.powers[1], gm, p.ground_noise);
                vec![
                    dk / shannon_rate(g.bandwidth, sk),
                    dm / shannon_rate(g.bandwidth, sm),
                ]
            }
            _ => return Err(Error::Integrity("group with more than two devices".into())),
        };
        for (t, pw) in delays.iter().zip(&g.powers) {
            e_iu += (p.hover_power + pw) * t;
        }
    }
    let points = plan.hover_points();
    for (route, uav) in trajectory.routes.iter().zip(&scenario.uavs) {
        e_iu += p.flight_power * route_length(route, &points, uav.start) / p.uav_speed;
    }
    let mut e_su = 0.0;
    for d in decisions {
        let bits = d.data_bits as f64;
        let t_tr = bits / d.rate_at_selection;
        let t_sa = bits / p.sat_compute_rate;
        e_su += p.sat_compute_power * t_sa + p.hover_power * (d.t_wait + t_tr + t_sa);
    }
    Ok((e_iu, e_su))
}

fn rel_excess(lhs: f64, rhs: f64) -> f64 {
    // how far lhs exceeds rhs, relative to their scale
    (lhs - rhs) / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE)
}

/// Checks every constraint on a candidate solution; empty means feasible.
pub fn validate(
    association: &Association,
    plan: &HoverPlan,
    trajectory: &TrajectoryPlan,
    decisions: &[SelectionDecision],
    scenario: &Scenario,
) -> Vec<ConstraintViolation> {
    let p = &scenario.params;
    let mut out = Vec::new();
    let mut flag = |id: u8, subject: String, detail: String| {
        out.push(ConstraintViolation {
            constraint_id: id,
            subject,
            detail,
        })
    };

    // (29) association is a partition within the pairing radius
    if let Err(e) = association.check(&scenario.devices, p.pair_distance) {
        flag(29, "association".into(), e.to_string());
    }
    if association.canonical() != plan.association().canonical() {
        flag(
            29,
            "hover plan".into(),
            "groups differ from the association".into(),
        );
    }

    // (22) power limits, (23) decode order
    for g in &plan.groups {
        let subject = format!("group {:?}", g.members);
        for (&pw, id) in g.powers.iter().zip(&g.members) {
            if rel_excess(p.p_min, pw) > REL_TOL || rel_excess(pw, p.p_max) > REL_TOL {
                flag(
                    22,
                    format!("device {id}"),
                    format!("power {pw} W outside [{}, {}]", p.p_min, p.p_max),
                );
            }
        }
        if g.powers.len() != g.members.len() {
            flag(
                22,
                subject.clone(),
                "power count differs from member count".into(),
            );
            continue;
        }
        if let [k, m] = g.members[..] {
            let (Some(dk), Some(dm)) = (scenario.device(k), scenario.device(m)) else {
                flag(29, subject, "unknown device".into());
                continue;
            };
            let lhs = p.power_ratio * g.powers[1] * channel_gain(g.hover, dm.position, p);
            let rhs = g.powers[0] * channel_gain(g.hover, dk.position, p);
            if rel_excess(lhs, rhs) > REL_TOL {
                flag(
                    23,
                    subject,
                    format!("rho*p_m*G_m = {lhs:e} exceeds p_k*G_k = {rhs:e}"),
                );
            }
        }
    }

    // (24) closed routes covering every hover point once
    if trajectory.routes.len() != scenario.uavs.len() {
        flag(
            24,
            "trajectory".into(),
            format!(
                "{} routes for {} UAVs",
                trajectory.routes.len(),
                scenario.uavs.len()
            ),
        );
    }
    if !trajectory.is_partition_of(plan.groups.len()) {
        flag(
            24,
            "trajectory".into(),
            "routes do not visit every hover point exactly once".into(),
        );
    } else {
        let points = plan.hover_points();
        for (u, (route, uav)) in trajectory.routes.iter().zip(&scenario.uavs).enumerate() {
            let closed = route_length(route, &points, uav.start);
            let stated = trajectory.lengths.get(u).copied().unwrap_or(f64::NAN);
            if !((closed - stated).abs() <= REL_TOL * closed.max(1.0)) {
                flag(
                    24,
                    format!("uav {}", uav.id),
                    format!("route length {stated} m, closed tour is {closed} m"),
                );
            }
        }
    }

    // (25) elevation at selection, (27)-(28) one satellite per UAV at a time
    let sites: HashMap<UavId, _> = scenario.uavs.iter().map(|u| (u.id, u.site)).collect();
    let mut by_uav: BTreeMap<UavId, Vec<&SelectionDecision>> = BTreeMap::new();
    for d in decisions {
        let subject = format!("uav {} at t = {}", d.uav_id, d.t_offload);
        let Some(&site) = sites.get(&d.uav_id) else {
            flag(28, subject, "unknown UAV".into());
            continue;
        };
        let Some(orbit) = scenario.satellite(d.sat_id) else {
            flag(
                28,
                subject,
                format!("satellite {} is not in the constellation", d.sat_id),
            );
            continue;
        };
        let elevation = elevation_at(orbit, site, d.t_offload, p);
        if !(elevation > p.min_elevation) {
            flag(
                25,
                subject,
                format!(
                    "satellite {} at {:.4} deg elevation",
                    d.sat_id,
                    elevation.to_degrees()
                ),
            );
        }
        by_uav.entry(d.uav_id).or_default().push(d);
    }
    for (uav, mut events) in by_uav {
        events.sort_by(|a, b| a.t_offload.total_cmp(&b.t_offload));
        for w in events.windows(2) {
            if w[1].t_offload < w[0].t_done() * (1.0 - REL_TOL) {
                flag(
                    27,
                    format!("uav {uav}"),
                    format!(
                        "satellites {} and {} overlap at t = {}",
                        w[0].sat_id, w[1].sat_id, w[1].t_offload
                    ),
                );
            }
        }
    }

    // (26) every bit collected is offloaded, per UAV and in total
    let total: u64 = scenario.devices.iter().map(|d| d.data_bits).sum();
    let offloaded: u64 = decisions.iter().map(|d| d.data_bits).sum();
    if total != offloaded {
        flag(
            26,
            "all devices".into(),
            format!("{total} bits collected, {offloaded} offloaded"),
        );
    }
    let covered: HashSet<DeviceId> = plan
        .groups
        .iter()
        .flat_map(|g| g.members.iter().copied())
        .collect();
    if covered.len() != scenario.devices.len() {
        flag(
            26,
            "hover plan".into(),
            format!(
                "{} of {} devices served",
                covered.len(),
                scenario.devices.len()
            ),
        );
    }
    if trajectory.is_partition_of(plan.groups.len()) {
        for (route, uav) in trajectory.routes.iter().zip(&scenario.uavs) {
            let collected: u64 = route
                .iter()
                .map(|&i| group_bits(&plan.groups[i], scenario))
                .sum();
            let sent: u64 = decisions
                .iter()
                .filter(|d| d.uav_id == uav.id)
                .map(|d| d.data_bits)
                .sum();
            if collected != sent {
                flag(
                    26,
                    format!("uav {}", uav.id),
                    format!("{collected} bits collected, {sent} offloaded"),
                );
            }
        }
    }
    out
}

fn group_bits(g: &GroupPlan, scenario: &Scenario) -> u64 {
    g.members
        .iter()
        .filter_map(|&id| scenario.device(id))
        .map(|d| d.data_bits)
        .sum()
}

/// Data collected at hover point `i` of `plan`.
pub fn hover_point_bits(plan: &HoverPlan, i: usize, scenario: &Scenario) -> u64 {
    group_bits(&plan.groups[i], scenario)
}

/// Positions of the UAV start points, in UAV order.
pub fn uav_starts(scenario: &Scenario) -> Vec<Point2> {
    scenario.uavs.iter().map(|u| u.start).collect()
}
