//! NOMA pairing and per-group optimization of transmit powers and hover
//! positions, plus the exchange refinement over the pairing.
//!
//! A pair is optimized by alternating a projected one-dimensional Newton
//! method on each power with a Nelder-Mead search over the hover position.
//! Singletons are served from directly above at maximum power.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3};
use crate::ground_link::{channel_gain, shannon_rate, sinr_clear, sinr_first_decoded};
use crate::nelder_mead::{self, NelderMeadOptions};
use crate::scenario::{DeviceId, IotDevice, Scenario, SimParams};

/// Pairing structure. Pairs are `(first_decoded, second_decoded)`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Association {
    pub pairs: Vec<(DeviceId, DeviceId)>,
    pub singles: Vec<DeviceId>,
}

impl Association {
    pub fn all_singles(ids: impl IntoIterator<Item = DeviceId>) -> Self {
        let mut singles: Vec<DeviceId> = ids.into_iter().collect();
        singles.sort_unstable();
        Self {
            pairs: Vec::new(),
            singles,
        }
    }

    pub fn from_groups(groups: &[Group]) -> Self {
        let mut a = Association::default();
        for g in groups {
            match *g {
                Group::Single(id) => a.singles.push(id),
                Group::Pair(x, y) => a.pairs.push((x, y)),
            }
        }
        a
    }

    /// Groups in canonical form: pairs as `(min, max)`, sorted by first member.
    pub fn groups(&self) -> Vec<Group> {
        let mut g: Vec<Group> = self
            .pairs
            .iter()
            .map(|&(a, b)| Group::pair(a, b))
            .chain(self.singles.iter().map(|&s| Group::Single(s)))
            .collect();
        g.sort();
        g
    }

    /// Order-insensitive view used to compare pairings.
    pub fn canonical(&self) -> Association {
        Association::from_groups(&self.groups())
    }

    pub fn device_count(&self) -> usize {
        2 * self.pairs.len() + self.singles.len()
    }

    pub fn partner(&self, id: DeviceId) -> Option<DeviceId> {
        self.pairs.iter().find_map(|&(a, b)| {
            if a == id {
                Some(b)
            } else if b == id {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Checks the partition and distance invariants against `devices`.
    pub fn check(&self, devices: &[IotDevice], pair_distance: f64) -> Result<()> {
        let index = DeviceIndex::new(devices);
        let mut seen: HashMap<DeviceId, usize> = HashMap::new();
        for id in self
            .pairs
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(self.singles.iter().copied())
        {
            index.get(id)?;
            *seen.entry(id).or_default() += 1;
        }
        if let Some((id, _)) = seen.iter().find(|(_, &n)| n != 1) {
            return Err(Error::Integrity(format!(
                "device {id} appears more than once"
            )));
        }
        if seen.len() != devices.len() {
            return Err(Error::Integrity(format!(
                "association covers {} of {} devices",
                seen.len(),
                devices.len()
            )));
        }
        for &(a, b) in &self.pairs {
            let d = index.get(a)?.position.distance(index.get(b)?.position);
            if d > pair_distance {
                return Err(Error::Integrity(format!(
                    "pair ({a}, {b}) is {d:.3} m apart, above {pair_distance} m"
                )));
            }
        }
        Ok(())
    }
}

/// One hover group before optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Single(DeviceId),
    Pair(DeviceId, DeviceId),
}

impl Group {
    pub fn pair(a: DeviceId, b: DeviceId) -> Self {
        Group::Pair(a.min(b), a.max(b))
    }

    fn first_id(&self) -> DeviceId {
        match *self {
            Group::Single(a) | Group::Pair(a, _) => a,
        }
    }
}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .first_id()
            .cmp(&other.0.first_id())
            .then(self.0.cmp(&other.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct GroupKey(Group);

fn sort_groups(groups: &mut [Group]) {
    groups.sort_by_key(|&g| GroupKey(g));
}

/// Optimized hover group. For pairs `members[0]` is decoded first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub members: Vec<DeviceId>,
    pub hover: Point3,
    pub powers: Vec<f64>,
    pub tx_delays: Vec<f64>,
    /// Bandwidth each member transmits over, Hz.
    pub bandwidth: f64,
    pub hover_energy: f64,
    pub device_energy: f64,
    pub converged: bool,
}

impl GroupPlan {
    pub fn energy(&self) -> f64 {
        self.hover_energy + self.device_energy
    }

    pub fn hover_time(&self) -> f64 {
        self.tx_delays.iter().sum()
    }

    pub fn group(&self) -> Group {
        match self.members[..] {
            [a] => Group::Single(a),
            [a, b] => Group::pair(a, b),
            _ => unreachable!("groups hold one or two devices"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HoverPlan {
    pub groups: Vec<GroupPlan>,
}

impl HoverPlan {
    pub fn hover_points(&self) -> Vec<Point2> {
        self.groups.iter().map(|g| g.hover.horizontal()).collect()
    }

    pub fn collection_energy(&self) -> f64 {
        self.groups.iter().map(GroupPlan::energy).sum()
    }

    pub fn association(&self) -> Association {
        let mut a = Association::default();
        for g in &self.groups {
            match g.members[..] {
                [s] => a.singles.push(s),
                [k, m] => a.pairs.push((k, m)),
                _ => unreachable!(),
            }
        }
        a
    }

    pub fn group_of(&self, id: DeviceId) -> Option<&GroupPlan> {
        self.groups.iter().find(|g| g.members.contains(&id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupOptions {
    /// Outer power/position alternations.
    pub max_iters: usize,
    /// Relative objective improvement below which the alternation stops.
    pub tol: f64,
    pub nelder_mead: NelderMeadOptions,
    /// Offset of the initial simplex vertices from the pair midpoint, m.
    pub simplex_step: f64,
    /// Charge hover displacement from the pair midpoint at the flight cost of
    /// the out-and-back detour it can add to a tour.
    pub detour_penalty: bool,
}

impl Default for GroupOptions {
    fn default() -> Self {
        Self {
            max_iters: 20,
            tol: 1e-6,
            nelder_mead: NelderMeadOptions::default(),
            simplex_step: 10.0,
            detour_penalty: true,
        }
    }
}

pub(crate) struct DeviceIndex<'a> {
    by_id: HashMap<DeviceId, &'a IotDevice>,
}

impl<'a> DeviceIndex<'a> {
    pub(crate) fn new(devices: &'a [IotDevice]) -> Self {
        Self {
            by_id: devices.iter().map(|d| (d.id, d)).collect(),
        }
    }

    pub(crate) fn get(&self, id: DeviceId) -> Result<&'a IotDevice> {
        self.by_id
            .get(&id)
            .copied()
            .ok_or_else(|| Error::NotFound(format!("device {id}")))
    }
}

/// Greedy closest-first NOMA pairing under the distance threshold.
pub fn greedy_pair(devices: &[IotDevice], pair_distance: f64) -> Association {
    let mut candidates: Vec<(f64, DeviceId, DeviceId)> = Vec::new();
    for (i, a) in devices.iter().enumerate() {
        for b in &devices[i + 1..] {
            let d = a.position.distance(b.position);
            if d <= pair_distance {
                candidates.push((d, a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut paired: HashMap<DeviceId, bool> = devices.iter().map(|d| (d.id, false)).collect();
    let mut pairs = Vec::new();
    for (_, a, b) in candidates {
        if !paired[&a] && !paired[&b] {
            paired.insert(a, true);
            paired.insert(b, true);
            pairs.push((a, b));
        }
    }
    let mut singles: Vec<DeviceId> = devices
        .iter()
        .map(|d| d.id)
        .filter(|id| !paired[id])
        .collect();
    singles.sort_unstable();
    Association { pairs, singles }
}

/// Serves a device from directly above at maximum power.
pub fn optimize_single(
    device: &IotDevice,
    params: &SimParams,
    bandwidth: f64,
) -> Result<GroupPlan> {
    let hover = device.position.at_altitude(params.uav_altitude);
    let gain = channel_gain(hover, device.position, params);
    let sinr = sinr_clear(params.p_max, gain, params.ground_noise);
    let rate = shannon_rate(bandwidth, sinr);
    if !(rate > 0.0) {
        return Err(Error::Infeasible(format!(
            "device {} has zero rate",
            device.id
        )));
    }
    let delay = device.data_bits as f64 / rate;
    Ok(GroupPlan {
        members: vec![device.id],
        hover,
        powers: vec![params.p_max],
        tx_delays: vec![delay],
        bandwidth,
        hover_energy: params.hover_power * delay,
        device_energy: params.p_max * delay,
        converged: true,
    })
}

/// Delay and energy terms of a pair at fixed gains and powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms {
    pub first_delay: f64,
    pub second_delay: f64,
    /// `(P_h + p_k) T_k + (P_h + p_m) T_m`
    pub objective: f64,
}

/// The pair cost model with a fixed decode order.
#[derive(Clone, Copy)]
struct PairModel<'a> {
    first: &'a IotDevice,
    second: &'a IotDevice,
    params: &'a SimParams,
    bandwidth: f64,
}

const LN2: f64 = std::f64::consts::LN_2;

impl PairModel<'_> {
    fn gains(&self, hover: Point3) -> (f64, f64) {
        (
            channel_gain(hover, self.first.position, self.params),
            channel_gain(hover, self.second.position, self.params),
        )
    }

    fn delay(&self, bits: u64, sinr: f64) -> f64 {
        bits as f64 / shannon_rate(self.bandwidth, sinr)
    }

    /// dT/dS for T = D / (B log2(1 + S)).
    fn delay_slope(&self, bits: u64, sinr: f64) -> f64 {
        let l = (1.0 + sinr).ln();
        -(bits as f64) * LN2 / (self.bandwidth * l * l * (1.0 + sinr))
    }

    fn terms(&self, gk: f64, gm: f64, pk: f64, pm: f64) -> PairTerms {
        let noise = self.params.ground_noise;
        let tk = self.delay(
            self.first.data_bits,
            sinr_first_decoded(pk, gk, pm, gm, noise),
        );
        let tm = self.delay(self.second.data_bits, sinr_clear(pm, gm, noise));
        let ph = self.params.hover_power;
        PairTerms {
            first_delay: tk,
            second_delay: tm,
            objective: (ph + pk) * tk + (ph + pm) * tm,
        }
    }

    fn objective(&self, gk: f64, gm: f64, pk: f64, pm: f64) -> f64 {
        self.terms(gk, gm, pk, pm).objective
    }

    fn d_first(&self, gk: f64, gm: f64, pk: f64, pm: f64) -> f64 {
        let noise = self.params.ground_noise;
        let interference = pm * gm + noise;
        let sk = pk * gk / interference;
        let tk = self.delay(self.first.data_bits, sk);
        tk + (self.params.hover_power + pk) * self.delay_slope(self.first.data_bits, sk) * gk
            / interference
    }

    fn d_second(&self, gk: f64, gm: f64, pk: f64, pm: f64) -> f64 {
        let noise = self.params.ground_noise;
        let ph = self.params.hover_power;
        let interference = pm * gm + noise;
        let sk = pk * gk / interference;
        let dsk = -pk * gk * gm / (interference * interference);
        let sm = pm * gm / noise;
        let tm = self.delay(self.second.data_bits, sm);
        (ph + pk) * self.delay_slope(self.first.data_bits, sk) * dsk
            + tm
            + (ph + pm) * self.delay_slope(self.second.data_bits, sm) * gm / noise
    }

    /// Projects powers onto the box and the decode-order constraint: raise
    /// `p_k` first, then lower `p_m` if `p_k` would exceed `p_max`.
    fn project(&self, pk: f64, pm: f64, gk: f64, gm: f64) -> Option<(f64, f64)> {
        let p = self.params;
        let mut pk = pk.clamp(p.p_min, p.p_max);
        let mut pm = pm.clamp(p.p_min, p.p_max);
        let need = p.power_ratio * pm * gm / gk;
        if pk < need {
            if need <= p.p_max {
                pk = need;
            } else {
                pk = p.p_max;
                pm = p.p_max * gk / (p.power_ratio * gm);
                if pm < p.p_min {
                    return None;
                }
            }
        }
        Some((pk, pm))
    }

    fn first_bounds(&self, pm: f64, gk: f64, gm: f64) -> (f64, f64) {
        let p = self.params;
        let lo = p.p_min.max(p.power_ratio * pm * gm / gk);
        (lo.min(p.p_max), p.p_max)
    }

    fn second_bounds(&self, pk: f64, gk: f64, gm: f64) -> (f64, f64) {
        let p = self.params;
        let hi = p.p_max.min(pk * gk / (p.power_ratio * gm));
        (p.p_min, hi.max(p.p_min))
    }

    /// One sweep of coordinate-wise Newton: `p_k` with `p_m` fixed, then `p_m`.
    fn newton_sweep(&self, gk: f64, gm: f64, pk: f64, pm: f64) -> (f64, f64) {
        let (lo, hi) = self.first_bounds(pm, gk, gm);
        let pk = newton_1d(
            |x| self.objective(gk, gm, x, pm),
            |x| self.d_first(gk, gm, x, pm),
            lo,
            hi,
            pk,
        );
        let (lo, hi) = self.second_bounds(pk, gk, gm);
        let pm = newton_1d(
            |x| self.objective(gk, gm, pk, x),
            |x| self.d_second(gk, gm, pk, x),
            lo,
            hi,
            pm,
        );
        (pk, pm)
    }
}

const FD_STEP: f64 = 1e-4;
const MAX_HALVINGS: usize = 30;
const NEWTON_ITERS: usize = 100;

/// Damped projected Newton on `[lo, hi]` with analytic first derivative and
/// a central-difference second derivative.
fn newton_1d(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, lo: f64, hi: f64, x0: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let mut x = x0.clamp(lo, hi);
    let mut fx = f(x);
    for _ in 0..NEWTON_ITERS {
        let g = df(x);
        if (x <= lo && g >= 0.0) || (x >= hi && g <= 0.0) || g == 0.0 {
            break;
        }
        let h = FD_STEP.min(0.5 * x);
        let curvature = (df(x + h) - df(x - h)) / (2.0 * h);
        let step = if curvature > 0.0 {
            -g / curvature
        } else {
            // non-convex slice: head for the bound in the descent direction
            if g > 0.0 {
                lo - x
            } else {
                hi - x
            }
        };
        let mut t = 1.0;
        let mut candidate = (x + step).clamp(lo, hi);
        let mut fc = f(candidate);
        let mut halvings = 0;
        while fc > fx && halvings < MAX_HALVINGS {
            t *= 0.5;
            candidate = (x + t * step).clamp(lo, hi);
            fc = f(candidate);
            halvings += 1;
        }
        if fc > fx {
            break;
        }
        let moved = (candidate - x).abs();
        x = candidate;
        fx = fc;
        if moved <= 1e-13 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// `(P_h + p_k) T_k + (P_h + p_m) T_m` for a pair with `first` decoded first.
pub fn pair_objective(
    first: &IotDevice,
    second: &IotDevice,
    hover: Point3,
    p_first: f64,
    p_second: f64,
    params: &SimParams,
) -> PairTerms {
    let model = PairModel {
        first,
        second,
        params,
        bandwidth: params.ground_bandwidth,
    };
    let (gk, gm) = model.gains(hover);
    model.terms(gk, gm, p_first, p_second)
}

/// Power allocation at a fixed hover point: coordinate Newton sweeps from
/// `(p_max, p_max)` until the powers stop moving.
pub fn optimize_powers(
    first: &IotDevice,
    second: &IotDevice,
    hover: Point3,
    params: &SimParams,
    max_sweeps: usize,
) -> Option<(f64, f64)> {
    let model = PairModel {
        first,
        second,
        params,
        bandwidth: params.ground_bandwidth,
    };
    let (gk, gm) = model.gains(hover);
    let (mut pk, mut pm) = model.project(params.p_max, params.p_max, gk, gm)?;
    for _ in 0..max_sweeps {
        let (nk, nm) = model.newton_sweep(gk, gm, pk, pm);
        let still = (nk - pk).abs() < 1e-12 && (nm - pm).abs() < 1e-12;
        pk = nk;
        pm = nm;
        if still {
            break;
        }
    }
    Some((pk, pm))
}

/// Optimizes a pair with `first` decoded first.
pub fn optimize_pair_ordered(
    first: &IotDevice,
    second: &IotDevice,
    params: &SimParams,
    opts: &GroupOptions,
) -> Result<GroupPlan> {
    if opts.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
    }
    let model = PairModel {
        first,
        second,
        params,
        bandwidth: params.ground_bandwidth,
    };
    let center = first.position.midpoint(second.position);
    let altitude = params.uav_altitude;
    let detour_cost = if opts.detour_penalty {
        2.0 * params.flight_power / params.uav_speed
    } else {
        0.0
    };

    let mut hover = center.at_altitude(altitude);
    let (gk, gm) = model.gains(hover);
    let (mut pk, mut pm) = model
        .project(params.p_max, params.p_max, gk, gm)
        .ok_or_else(|| {
            Error::Infeasible("pair cannot satisfy the decode-order constraint".into())
        })?;
    let mut current = model.objective(gk, gm, pk, pm);
    let mut converged = false;

    for _ in 0..opts.max_iters {
        let previous = current;
        let (gk, gm) = model.gains(hover);
        (pk, pm) = model.newton_sweep(gk, gm, pk, pm);

        let position_cost = |x: &[f64]| -> f64 {
            let q = Point3::new(x[0], x[1], altitude);
            let (gk, gm) = model.gains(q);
            match model.project(pk, pm, gk, gm) {
                Some((a, b)) => {
                    model.objective(gk, gm, a, b)
                        + detour_cost * Point2::new(x[0], x[1]).distance(center)
                }
                None => f64::INFINITY,
            }
        };
        let start = [hover.x, hover.y];
        let start_cost = position_cost(&start);
        let vertices = vec![
            start.to_vec(),
            vec![hover.x + opts.simplex_step, hover.y],
            vec![hover.x, hover.y + opts.simplex_step],
        ];
        let found = nelder_mead::minimize_from_simplex(position_cost, vertices, &opts.nelder_mead);
        if found.value < start_cost {
            hover = Point3::new(found.point[0], found.point[1], altitude);
        }
        let (gk, gm) = model.gains(hover);
        (pk, pm) = model
            .project(pk, pm, gk, gm)
            .ok_or_else(|| Error::Infeasible("hover search left the feasible region".into()))?;
        current = model.objective(gk, gm, pk, pm);
        if previous - current <= opts.tol * previous.abs() {
            converged = true;
            break;
        }
    }

    let (gk, gm) = model.gains(hover);
    let t = model.terms(gk, gm, pk, pm);
    Ok(GroupPlan {
        members: vec![first.id, second.id],
        hover,
        powers: vec![pk, pm],
        tx_delays: vec![t.first_delay, t.second_delay],
        bandwidth: params.ground_bandwidth,
        hover_energy: params.hover_power * (t.first_delay + t.second_delay),
        device_energy: pk * t.first_delay + pm * t.second_delay,
        converged,
    })
}

/// Optimizes a pair under both decode orders and keeps the cheaper one.
pub fn optimize_pair(
    a: &IotDevice,
    b: &IotDevice,
    params: &SimParams,
    opts: &GroupOptions,
) -> Result<GroupPlan> {
    let (lo, hi) = if a.id <= b.id { (a, b) } else { (b, a) };
    let one = optimize_pair_ordered(lo, hi, params, opts);
    let two = optimize_pair_ordered(hi, lo, params, opts);
    match (one, two) {
        (Ok(x), Ok(y)) => Ok(if y.energy() < x.energy() { y } else { x }),
        (Ok(x), Err(_)) | (Err(_), Ok(x)) => Ok(x),
        (Err(e), Err(_)) => Err(e),
    }
}

pub fn optimize_group(group: Group, scenario: &Scenario, opts: &GroupOptions) -> Result<GroupPlan> {
    let index = DeviceIndex::new(&scenario.devices);
    optimize_group_indexed(group, &index, &scenario.params, opts)
}

fn optimize_group_indexed(
    group: Group,
    index: &DeviceIndex,
    params: &SimParams,
    opts: &GroupOptions,
) -> Result<GroupPlan> {
    match group {
        Group::Single(id) => optimize_single(index.get(id)?, params, params.ground_bandwidth),
        Group::Pair(a, b) => optimize_pair(index.get(a)?, index.get(b)?, params, opts),
    }
}

/// Optimizes every group of `association`, ordered by lowest member id.
pub fn build_hover_plan(
    association: &Association,
    scenario: &Scenario,
    opts: &GroupOptions,
) -> Result<HoverPlan> {
    let index = DeviceIndex::new(&scenario.devices);
    let groups = association.groups();
    let mut sorted = groups;
    sort_groups(&mut sorted);
    let plans: Result<Vec<GroupPlan>> = sorted
        .par_iter()
        .map(|&g| optimize_group_indexed(g, &index, &scenario.params, opts))
        .collect();
    Ok(HoverPlan { groups: plans? })
}

/// Phase-one energy: collection energy plus flight energy for a tour length.
pub fn phase_one_energy(plan: &HoverPlan, flight_length: f64, params: &SimParams) -> f64 {
    plan.collection_energy() + params.flight_power * flight_length / params.uav_speed
}

/// Local search over the pairing. Each candidate move re-optimizes the
/// affected groups and re-estimates flight length with `estimator`; a move
/// is kept only if the phase-one energy strictly drops.
pub fn exchange_refine<E>(
    association: &Association,
    plan: &HoverPlan,
    scenario: &Scenario,
    opts: &GroupOptions,
    mut estimator: E,
) -> Result<(Association, HoverPlan)>
where
    E: FnMut(&[Point2]) -> f64,
{
    let params = &scenario.params;
    let index = DeviceIndex::new(&scenario.devices);
    let mut cache: HashMap<Group, GroupPlan> =
        plan.groups.iter().map(|g| (g.group(), g.clone())).collect();

    let mut groups = association.groups();
    sort_groups(&mut groups);

    let mut energy_of = |groups: &[Group], cache: &mut HashMap<Group, GroupPlan>| -> Result<f64> {
        let mut collection = 0.0;
        let mut points = Vec::with_capacity(groups.len());
        for g in groups {
            if !cache.contains_key(g) {
                let p = optimize_group_indexed(*g, &index, params, opts)?;
                cache.insert(*g, p);
            }
            let p = &cache[g];
            collection += p.energy();
            points.push(p.hover.horizontal());
        }
        Ok(collection + params.flight_power * estimator(&points) / params.uav_speed)
    };

    let mut current = energy_of(&groups, &mut cache)?;
    'search: loop {
        for candidate in candidate_moves(&groups, &index, params.pair_distance)? {
            let e = energy_of(&candidate, &mut cache)?;
            if e < current {
                groups = candidate;
                current = e;
                continue 'search;
            }
        }
        break;
    }

    let plan = HoverPlan {
        groups: groups.iter().map(|g| cache[g].clone()).collect(),
    };
    Ok((plan.association(), plan))
}

/// Candidate pairings one move away from `groups`, in deterministic order.
fn candidate_moves(
    groups: &[Group],
    index: &DeviceIndex,
    pair_distance: f64,
) -> Result<Vec<Vec<Group>>> {
    let mut singles: Vec<DeviceId> = Vec::new();
    let mut pairs: Vec<(DeviceId, DeviceId)> = Vec::new();
    for g in groups {
        match *g {
            Group::Single(s) => singles.push(s),
            Group::Pair(a, b) => pairs.push((a, b)),
        }
    }
    let pos = |id: DeviceId| index.get(id).map(|d| d.position);
    let near = |a: DeviceId, b: DeviceId| -> Result<bool> {
        Ok(pos(a)?.distance(pos(b)?) <= pair_distance)
    };

    let rebuild = |drop: &[Group], add: &[Group]| -> Vec<Group> {
        let mut out: Vec<Group> = groups
            .iter()
            .filter(|g| !drop.contains(g))
            .copied()
            .collect();
        out.extend_from_slice(add);
        sort_groups(&mut out);
        out
    };

    // pairs a freed node with its closest unpaired node within range
    let repair = |freed: DeviceId, taken: &[DeviceId]| -> Result<Option<DeviceId>> {
        let mut best: Option<(f64, DeviceId)> = None;
        for &s in &singles {
            if taken.contains(&s) {
                continue;
            }
            let d = pos(freed)?.distance(pos(s)?);
            if d <= pair_distance && best.is_none_or(|(bd, bid)| d < bd || (d == bd && s < bid)) {
                best = Some((d, s));
            }
        }
        Ok(best.map(|(_, s)| s))
    };

    let mut out = Vec::new();

    // (a) an unpaired node takes the place of one pair member
    for &u in &singles {
        for &(x, y) in &pairs {
            for (freed, keep) in [(x, y), (y, x)] {
                if !near(u, keep)? {
                    continue;
                }
                let mut add = vec![Group::pair(u, keep)];
                match repair(freed, &[u])? {
                    Some(s) => add.push(Group::pair(freed, s)),
                    None => add.push(Group::Single(freed)),
                }
                let mut drop = vec![Group::Single(u), Group::Pair(x, y)];
                if let Some(Group::Pair(a, b)) = add.get(1).copied() {
                    let other = if a == freed { b } else { a };
                    drop.push(Group::Single(other));
                }
                out.push(rebuild(&drop, &add));
            }
        }
    }

    // (b) two nearby pairs exchange members
    for (i, &(a1, b1)) in pairs.iter().enumerate() {
        for &(a2, b2) in &pairs[i + 1..] {
            let c1 = pos(a1)?.midpoint(pos(b1)?);
            let c2 = pos(a2)?.midpoint(pos(b2)?);
            if c1.distance(c2) > 2.0 * pair_distance {
                continue;
            }
            let drop = [Group::Pair(a1, b1), Group::Pair(a2, b2)];
            for [(p, q), (r, s)] in [[(a1, a2), (b1, b2)], [(a1, b2), (b1, a2)]] {
                if near(p, q)? && near(r, s)? {
                    out.push(rebuild(&drop, &[Group::pair(p, q), Group::pair(r, s)]));
                }
            }
        }
    }

    // (c) two unpaired nodes join
    for (i, &s1) in singles.iter().enumerate() {
        for &s2 in &singles[i + 1..] {
            if near(s1, s2)? {
                out.push(rebuild(
                    &[Group::Single(s1), Group::Single(s2)],
                    &[Group::pair(s1, s2)],
                ));
            }
        }
    }

    // (d) a pair splits
    for &(a, b) in &pairs {
        out.push(rebuild(
            &[Group::Pair(a, b)],
            &[Group::Single(a), Group::Single(b)],
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_link::decode_order_holds;
    use crate::scenario::default_params;

    fn dev(id: DeviceId, x: f64, y: f64, bits: u64) -> IotDevice {
        IotDevice {
            id,
            position: Point2::new(x, y),
            data_bits: bits,
        }
    }

    fn line(xs: &[f64]) -> Vec<IotDevice> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| dev(i as DeviceId, x, 0.0, 1_000_000))
            .collect()
    }

    #[test]
    fn greedy_single_feasible_pair() {
        let a = greedy_pair(&line(&[0.0, 10.0, 707.0]), 100.0);
        assert_eq!(a.pairs, vec![(0, 1)]);
        assert_eq!(a.singles, vec![2]);
    }

    #[test]
    fn greedy_takes_closest_first() {
        let a = greedy_pair(&line(&[0.0, 80.0, 100.0, 180.0]), 100.0);
        assert_eq!(a.pairs, vec![(1, 2)]);
        assert_eq!(a.singles, vec![0, 3]);
    }

    #[test]
    fn greedy_no_feasible_pairs() {
        let a = greedy_pair(&line(&[0.0, 200.0, 400.0]), 100.0);
        assert!(a.pairs.is_empty());
        assert_eq!(a.singles, vec![0, 1, 2]);
    }

    #[test]
    fn greedy_ties_break_on_ids() {
        // 0-1 and 2-3 both 50 m; 1-2 also 50 m
        let a = greedy_pair(&line(&[0.0, 50.0, 100.0, 150.0]), 100.0);
        assert_eq!(a.pairs, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn singleton_reference_energy() {
        let p = default_params();
        let g = optimize_single(&dev(0, 3.0, 4.0, 1_000_000), &p, p.ground_bandwidth).unwrap();
        assert_eq!(g.hover, Point3::new(3.0, 4.0, 200.0));
        assert_eq!(g.powers, vec![5.0]);
        assert!((g.energy() - 2.5354).abs() < 1e-3, "{}", g.energy());
        assert!((g.tx_delays[0] - 0.029828).abs() < 1e-5);
    }

    #[test]
    fn coincident_pair_hovers_above() {
        let p = default_params();
        let a = dev(0, 40.0, 60.0, 3_000_000);
        let b = dev(1, 40.0, 60.0, 5_000_000);
        for detour_penalty in [true, false] {
            let opts = GroupOptions {
                detour_penalty,
                ..Default::default()
            };
            let g = optimize_pair(&a, &b, &p, &opts).unwrap();
            let off = g.hover.horizontal().distance(a.position);
            assert!(off < 0.5, "offset {off}");
        }
    }

    #[test]
    fn pair_plan_is_feasible_and_consistent() {
        let p = default_params();
        let a = dev(3, 0.0, 0.0, 4_000_000);
        let b = dev(7, 60.0, 30.0, 6_000_000);
        let g = optimize_pair(&a, &b, &p, &GroupOptions::default()).unwrap();
        let first = if g.members[0] == a.id { &a } else { &b };
        let second = if g.members[0] == a.id { &b } else { &a };
        let gk = channel_gain(g.hover, first.position, &p);
        let gm = channel_gain(g.hover, second.position, &p);
        assert!(decode_order_holds(
            g.powers[0],
            gk,
            g.powers[1],
            gm,
            p.power_ratio
        ));
        for &pw in &g.powers {
            assert!((p.p_min..=p.p_max).contains(&pw));
        }
        let expected_hover = p.hover_power * g.tx_delays.iter().sum::<f64>();
        assert!((g.hover_energy - expected_hover).abs() < 1e-12 * expected_hover);
        let expected_dev = g.powers[0] * g.tx_delays[0] + g.powers[1] * g.tx_delays[1];
        assert!((g.device_energy - expected_dev).abs() < 1e-12 * expected_dev);
        // larger p*G decoded first
        assert!(g.powers[0] * gk >= g.powers[1] * gm);
    }

    #[test]
    fn symmetric_pair_power_corner_matches_grid() {
        // both devices 50 m either side of the hover point, equal data
        let p = default_params();
        let a = dev(0, -50.0, 0.0, 2_000_000);
        let b = dev(1, 50.0, 0.0, 2_000_000);
        let hover = Point3::new(0.0, 0.0, p.uav_altitude);
        let (pk, pm) = optimize_powers(&a, &b, hover, &p, 50).unwrap();
        // grid oracle in 0.01 W steps over the feasible region
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = ((p.p_max - p.p_min) / 0.01).round() as usize;
        let g = channel_gain(hover, a.position, &p);
        for i in 0..=steps {
            for j in 0..=steps {
                let x = p.p_min + 0.01 * i as f64;
                let y = p.p_min + 0.01 * j as f64;
                if !decode_order_holds(x, g, y, g, p.power_ratio) {
                    continue;
                }
                let v = pair_objective(&a, &b, hover, x, y, &p).objective;
                if v < best.0 {
                    best = (v, x, y);
                }
            }
        }
        assert!((pk - best.1).abs() <= 0.01 + 1e-9, "{pk} vs {}", best.1);
        assert!((pm - best.2).abs() <= 0.01 + 1e-9, "{pm} vs {}", best.2);
        // first-decoded at p_max, partner at p_min
        assert!((pk - p.p_max).abs() < 1e-9);
        assert!((pm - p.p_min).abs() < 1e-9);
    }

    #[test]
    fn interior_optimum_is_stationary() {
        // low hover power moves the optimum off the box corner
        let mut p = default_params();
        p.hover_power = 5.0;
        let a = dev(0, 0.0, 0.0, 3_000_000);
        let b = dev(1, 40.0, 0.0, 5_000_000);
        let hover = Point3::new(10.0, 0.0, p.uav_altitude);
        let (pk, pm) = optimize_powers(&a, &b, hover, &p, 100).unwrap();
        let j = |x: f64, y: f64| pair_objective(&a, &b, hover, x, y, &p).objective;
        let h = 1e-4;
        let interior = |x: f64| x > p.p_min + 1e-6 && x < p.p_max - 1e-6;
        assert!(
            interior(pk) || interior(pm),
            "expected an interior power, got {pk}, {pm}"
        );
        let scale = j(pk, pm) / p.p_max;
        if interior(pk) {
            let d = (j(pk + h, pm) - j(pk - h, pm)) / (2.0 * h);
            assert!(d.abs() < 1e-6 * scale, "dJ/dpk = {d}");
        }
        if interior(pm) {
            let d = (j(pk, pm + h) - j(pk, pm - h)) / (2.0 * h);
            assert!(d.abs() < 1e-6 * scale, "dJ/dpm = {d}");
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let p = default_params();
        let a = dev(0, 0.0, 0.0, 3_000_000);
        let b = dev(1, 40.0, 10.0, 5_000_000);
        let model = PairModel {
            first: &a,
            second: &b,
            params: &p,
            bandwidth: p.ground_bandwidth,
        };
        let (gk, gm) = model.gains(Point3::new(5.0, 3.0, 200.0));
        let h = 1e-6;
        for &(pk, pm) in &[(1.0, 0.5), (4.0, 2.0), (2.5, 0.2)] {
            let fd_k = (model.objective(gk, gm, pk + h, pm) - model.objective(gk, gm, pk - h, pm))
                / (2.0 * h);
            let fd_m = (model.objective(gk, gm, pk, pm + h) - model.objective(gk, gm, pk, pm - h))
                / (2.0 * h);
            assert!((model.d_first(gk, gm, pk, pm) - fd_k).abs() < 1e-5 * fd_k.abs().max(1.0));
            assert!((model.d_second(gk, gm, pk, pm) - fd_m).abs() < 1e-5 * fd_m.abs().max(1.0));
        }
    }

    #[test]
    fn pair_beats_midpoint_start() {
        let p = default_params();
        let a = dev(0, 0.0, 0.0, 7_000_000);
        let b = dev(1, 90.0, 20.0, 2_000_000);
        let g = optimize_pair(&a, &b, &p, &GroupOptions::default()).unwrap();
        let mid = a.position.midpoint(b.position).at_altitude(p.uav_altitude);
        let (first, second) = if g.members[0] == 0 {
            (&a, &b)
        } else {
            (&b, &a)
        };
        let (pk, pm) = optimize_powers(first, second, mid, &p, 50).unwrap();
        let at_mid = pair_objective(first, second, mid, pk, pm, &p).objective;
        assert!(g.energy() <= at_mid * (1.0 + 1e-12));
    }

    #[test]
    fn zero_iterations_rejected() {
        let p = default_params();
        let opts = GroupOptions {
            max_iters: 0,
            ..Default::default()
        };
        let a = dev(0, 0.0, 0.0, 1);
        let b = dev(1, 1.0, 0.0, 1);
        assert!(matches!(
            optimize_pair_ordered(&a, &b, &p, &opts),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn association_check_catches_duplicates_and_range() {
        let devices = line(&[0.0, 50.0, 300.0]);
        let ok = Association {
            pairs: vec![(0, 1)],
            singles: vec![2],
        };
        ok.check(&devices, 100.0).unwrap();
        let dup = Association {
            pairs: vec![(0, 1)],
            singles: vec![1, 2],
        };
        assert!(dup.check(&devices, 100.0).is_err());
        let far = Association {
            pairs: vec![(0, 2)],
            singles: vec![1],
        };
        assert!(far.check(&devices, 100.0).is_err());
    }

    #[test]
    fn candidate_moves_follow_the_rules() {
        let devices = line(&[0.0, 80.0, 100.0, 180.0]);
        let index = DeviceIndex::new(&devices);
        let groups = vec![Group::Single(0), Group::pair(1, 2), Group::Single(3)];
        let moves = candidate_moves(&groups, &index, 100.0).unwrap();
        // single 0 replaces 2 next to 1, then 2 repairs with 3
        let expected = {
            let mut g = vec![Group::pair(0, 1), Group::pair(2, 3)];
            sort_groups(&mut g);
            g
        };
        assert!(moves.contains(&expected));
        for m in &moves {
            let a = Association::from_groups(m);
            a.check(&devices, 100.0).unwrap();
        }
    }
}
