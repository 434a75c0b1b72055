//! End-to-end pipeline, baseline schemes, and the seeded sweep harness.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collection::{
    build_hover_plan, exchange_refine, greedy_pair, optimize_single, Association, GroupOptions,
    HoverPlan,
};
use crate::energy::{
    assemble, hover_point_bits, uav_starts, validate, ConstraintViolation, EnergyReport,
};
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::scenario::{DeviceId, Scenario, ScenarioConfig};
use crate::selection::{
    offload, visible_satellites, OffloadOptions, SelectionDecision, SelectionKind, SelectionPolicy,
};
use crate::streams;
use crate::trajectory::{nearest_neighbor_plan, plan_trajectories, GwoParams, TrajectoryPlan};

// stream coordinates for the scheme-level random draws
const GWO_STREAM: u64 = 1;
const PAIRING_STREAM: u64 = 2;
const SELECTION_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Proposed,
    RScheme,
    FScheme,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Self::Proposed, Self::RScheme, Self::FScheme];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::RScheme => "r-scheme",
            Self::FScheme => "f-scheme",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "proposed" => Ok(Self::Proposed),
            "r-scheme" | "rscheme" | "r" => Ok(Self::RScheme),
            "f-scheme" | "fscheme" | "f" => Ok(Self::FScheme),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// When UAVs offload to satellites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffloadMode {
    /// One event per UAV after its tour, carrying everything it collected.
    #[default]
    Batch,
    /// One event after each hover point, carrying that group's data.
    PerHover,
}

impl FromStr for OffloadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "batch" => Ok(Self::Batch),
            "per-hover" | "per_hover" | "perhover" => Ok(Self::PerHover),
            other => Err(Error::InvalidArgument(format!(
                "unknown offload mode '{other}'"
            ))),
        }
    }
}

impl fmt::Display for OffloadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Batch => "batch",
            Self::PerHover => "per-hover",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub gwo_population: usize,
    pub gwo_iterations: usize,
    pub gwo_local_search: bool,
    pub group: GroupOptions,
    pub offload: OffloadOptions,
    pub offload_mode: OffloadMode,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            gwo_population: 50,
            gwo_iterations: 200,
            gwo_local_search: true,
            group: GroupOptions::default(),
            offload: OffloadOptions::default(),
            offload_mode: OffloadMode::Batch,
        }
    }
}

impl PipelineOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            gwo_population: config.gwo_population,
            gwo_iterations: config.gwo_iterations,
            ..Self::default()
        }
    }

    fn gwo(&self, seed: u64) -> GwoParams {
        GwoParams {
            population: self.gwo_population,
            iterations: self.gwo_iterations,
            seed,
            local_search: self.gwo_local_search,
        }
    }
}

/// Everything a run decided, enough to re-validate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub association: Association,
    pub hover_plan: HoverPlan,
    pub trajectory: TrajectoryPlan,
    pub decisions: Vec<SelectionDecision>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub scheme: Scheme,
    pub selection: SelectionKind,
    pub report: EnergyReport,
    pub artifacts: RunArtifacts,
}

impl RunOutput {
    pub fn flight_distance(&self) -> f64 {
        self.artifacts.trajectory.total_length()
    }

    pub fn mean_ttr(&self) -> f64 {
        let d = &self.artifacts.decisions;
        if d.is_empty() {
            0.0
        } else {
            d.iter().map(|x| x.t_tr).sum::<f64>() / d.len() as f64
        }
    }

    pub fn violations(&self, scenario: &Scenario) -> Vec<ConstraintViolation> {
        let a = &self.artifacts;
        validate(
            &a.association,
            &a.hover_plan,
            &a.trajectory,
            &a.decisions,
            scenario,
        )
    }
}

/// Saved run: the scenario plus the decisions made on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scheme: Scheme,
    pub selection: SelectionKind,
    pub scenario: Scenario,
    pub artifacts: RunArtifacts,
}

impl Solution {
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Seeded random matching: devices in random order each take a uniformly
/// random unpaired partner within the pairing radius, if any.
pub fn random_pairing(scenario: &Scenario, seed: u64) -> Association {
    let devices = &scenario.devices;
    let d_pair = scenario.params.pair_distance;
    let mut rng = streams::stream(seed, &[PAIRING_STREAM]);
    let mut order: Vec<usize> = (0..devices.len()).collect();
    order.shuffle(&mut rng);
    let mut taken = vec![false; devices.len()];
    let mut assoc = Association::default();
    for &i in &order {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let candidates: Vec<usize> = (0..devices.len())
            .filter(|&j| !taken[j] && devices[i].position.distance(devices[j].position) <= d_pair)
            .collect();
        if candidates.is_empty() {
            assoc.singles.push(devices[i].id);
        } else {
            let j = candidates[rng.gen_range(0..candidates.len())];
            taken[j] = true;
            let (a, b) = (devices[i].id, devices[j].id);
            assoc.pairs.push((a.min(b), a.max(b)));
        }
    }
    assoc.singles.sort_unstable();
    assoc.pairs.sort_unstable();
    assoc
}

fn flight_estimator(starts: Vec<Point2>, speed: f64) -> impl FnMut(&[Point2]) -> f64 {
    move |points: &[Point2]| nearest_neighbor_plan(points, &starts, speed).total_length()
}

/// Collection-phase decisions for a scheme: pairing and hover plan.
pub fn collection_plan(
    scenario: &Scenario,
    scheme: Scheme,
    opts: &PipelineOptions,
) -> Result<(Association, HoverPlan)> {
    let p = &scenario.params;
    match scheme {
        Scheme::Proposed => {
            let initial = greedy_pair(&scenario.devices, p.pair_distance);
            let plan = build_hover_plan(&initial, scenario, &opts.group)?;
            let estimator = flight_estimator(uav_starts(scenario), p.uav_speed);
            exchange_refine(&initial, &plan, scenario, &opts.group, estimator)
        }
        Scheme::RScheme => {
            let assoc = random_pairing(scenario, scenario.seed);
            let plan = build_hover_plan(&assoc, scenario, &opts.group)?;
            Ok((assoc, plan))
        }
        Scheme::FScheme => {
            let share = p.ground_bandwidth / scenario.devices.len() as f64;
            let mut devices: Vec<_> = scenario.devices.iter().collect();
            devices.sort_by_key(|d| d.id);
            let groups = devices
                .iter()
                .map(|d| optimize_single(d, p, share))
                .collect::<Result<Vec<_>>>()?;
            let assoc = Association::all_singles(scenario.devices.iter().map(|d| d.id));
            Ok((assoc, HoverPlan { groups }))
        }
    }
}

/// Runs the offloading phase over a planned mission.
pub fn schedule_offloads(
    scenario: &Scenario,
    plan: &HoverPlan,
    trajectory: &TrajectoryPlan,
    policy: &SelectionPolicy,
    opts: &PipelineOptions,
) -> Result<Vec<SelectionDecision>> {
    let p = &scenario.params;
    let points = plan.hover_points();
    let per_uav: Result<Vec<Vec<SelectionDecision>>> = scenario
        .uavs
        .par_iter()
        .zip(&trajectory.routes)
        .map(|(uav, route)| {
            let mut out: Vec<SelectionDecision> = Vec::new();
            let mut t = scenario.t_epoch;
            let mut at = uav.start;
            let mut pending = 0u64;
            for &i in route {
                t += at.distance(points[i]) / p.uav_speed;
                at = points[i];
                t += plan.groups[i].hover_time();
                let bits = hover_point_bits(plan, i, scenario);
                match opts.offload_mode {
                    OffloadMode::Batch => pending += bits,
                    OffloadMode::PerHover => {
                        let d = offload(
                            uav.id,
                            uav.site,
                            bits,
                            t,
                            policy,
                            out.last(),
                            &scenario.constellation,
                            p,
                            &opts.offload,
                        )?;
                        t = d.t_done();
                        out.push(d);
                    }
                }
            }
            if pending > 0 {
                t += at.distance(uav.start) / p.uav_speed;
                let d = offload(
                    uav.id,
                    uav.site,
                    pending,
                    t,
                    policy,
                    out.last(),
                    &scenario.constellation,
                    p,
                    &opts.offload,
                )?;
                out.push(d);
            }
            Ok(out)
        })
        .collect();
    Ok(per_uav?.into_iter().flatten().collect())
}

/// Collection, trajectory planning and offloading for one scheme.
pub fn run_pipeline(
    scenario: &Scenario,
    scheme: Scheme,
    policy: &SelectionPolicy,
    opts: &PipelineOptions,
) -> Result<RunOutput> {
    scenario.validate()?;
    let (association, hover_plan) = collection_plan(scenario, scheme, opts)?;
    let gwo = opts.gwo(streams::derive_seed(scenario.seed, &[GWO_STREAM]));
    let trajectory = plan_trajectories(
        &hover_plan.hover_points(),
        &uav_starts(scenario),
        scenario.params.uav_speed,
        &gwo,
    )?;
    let decisions = schedule_offloads(scenario, &hover_plan, &trajectory, policy, opts)?;
    let report = assemble(&association, &hover_plan, &trajectory, &decisions, scenario)?;
    Ok(RunOutput {
        scheme,
        selection: policy.kind,
        report,
        artifacts: RunArtifacts {
            association,
            hover_plan,
            trajectory,
            decisions,
        },
    })
}

/// Selection policy for a scenario, seeded from the scenario seed.
pub fn policy_for(scenario: &Scenario, kind: SelectionKind) -> SelectionPolicy {
    SelectionPolicy::new(
        kind,
        streams::derive_seed(scenario.seed, &[SELECTION_STREAM]),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub schemes: Vec<Scheme>,
    pub selections: Vec<SelectionKind>,
    pub device_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub output_path: PathBuf,
    pub pipeline: PipelineOptions,
}

impl ExperimentSpec {
    fn check(&self) -> Result<()> {
        if self.device_counts.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs device counts and seeds".into(),
            ));
        }
        if self.schemes.is_empty() || self.selections.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs schemes and selection policies".into(),
            ));
        }
        Ok(())
    }

    pub fn scenario(&self, devices: usize, seed: u64) -> Result<Scenario> {
        let mut cfg = self.base.clone();
        cfg.devices = devices;
        cfg.seed = seed;
        cfg.generate()
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub scheme: String,
    pub selection: String,
    #[serde(rename = "total_J")]
    pub total_j: f64,
    #[serde(rename = "hover_p1_J")]
    pub hover_p1_j: f64,
    #[serde(rename = "flight_J")]
    pub flight_j: f64,
    #[serde(rename = "device_J")]
    pub device_j: f64,
    #[serde(rename = "sat_J")]
    pub sat_j: f64,
    #[serde(rename = "hover_p2_J")]
    pub hover_p2_j: f64,
    pub flight_m: f64,
    pub mean_ttr_s: f64,
}

impl SweepRow {
    pub fn from_run(seed: u64, k: usize, run: &RunOutput) -> Self {
        let r = &run.report;
        Self {
            seed,
            k,
            scheme: run.scheme.to_string(),
            selection: run.selection.to_string(),
            total_j: r.total,
            hover_p1_j: r.hover_energy_p1,
            flight_j: r.flight_energy,
            device_j: r.device_energy,
            sat_j: r.sat_compute_energy,
            hover_p2_j: r.hover_energy_p2,
            flight_m: run.flight_distance(),
            mean_ttr_s: run.mean_ttr(),
        }
    }

    fn metrics(&self) -> [f64; 8] {
        [
            self.total_j,
            self.hover_p1_j,
            self.flight_j,
            self.device_j,
            self.sat_j,
            self.hover_p2_j,
            self.flight_m,
            self.mean_ttr_s,
        ]
    }
}

const METRICS: [&str; 8] = [
    "total_J",
    "hover_p1_J",
    "flight_J",
    "device_J",
    "sat_J",
    "hover_p2_J",
    "flight_m",
    "mean_ttr_s",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary_path: PathBuf,
}

/// Runs every (scheme, selection, K, seed) cell and checks each output.
/// Cells run in parallel; rows come back in sorted order.
pub fn sweep_rows(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    spec.check()?;
    let mut cells = Vec::new();
    for &scheme in &spec.schemes {
        for &selection in &spec.selections {
            for &k in &spec.device_counts {
                for &seed in &spec.seeds {
                    cells.push((scheme, selection, k, seed));
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|&(scheme, selection, k, seed)| {
            let scenario = spec.scenario(k, seed)?;
            let run = run_pipeline(
                &scenario,
                scheme,
                &policy_for(&scenario, selection),
                &spec.pipeline,
            )?;
            let violations = run.violations(&scenario);
            if let Some(v) = violations.first() {
                return Err(Error::Integrity(format!(
                    "{scheme} K={k} seed={seed}: {} violation(s), first {v}",
                    violations.len()
                )));
            }
            Ok(SweepRow::from_run(seed, k, &run))
        })
        .collect()
}

pub fn summary_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("sweep");
    output.with_file_name(format!("{stem}_summary.csv"))
}

/// Runs the sweep and writes the rows and the per-cell summary.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    let rows = sweep_rows(spec)?;
    write_rows(&spec.output_path, &rows)?;
    let summary = summary_path(&spec.output_path);
    write_summary(&summary, &rows)?;
    Ok(SweepResult {
        rows,
        summary_path: summary,
    })
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-cell summary keyed by (scheme, selection, K) in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<((String, String, usize), usize, Vec<(f64, f64)>)> {
    let mut keys: Vec<(String, String, usize)> = Vec::new();
    for r in rows {
        let key = (r.scheme.clone(), r.selection.clone(), r.k);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let cell: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.scheme == key.0 && r.selection == key.1 && r.k == key.2)
                .collect();
            let stats = (0..METRICS.len())
                .map(|m| mean_std(&cell.iter().map(|r| r.metrics()[m]).collect::<Vec<_>>()))
                .collect();
            (key, cell.len(), stats)
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    let mut header = vec![
        "scheme".to_string(),
        "selection".into(),
        "K".into(),
        "n".into(),
    ];
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    out.write_record(&header)?;
    for ((scheme, selection, k), n, stats) in summarize(rows) {
        let mut rec = vec![scheme, selection, k.to_string(), n.to_string()];
        for (mean, std) in stats {
            rec.push(mean.to_string());
            rec.push(std.to_string());
        }
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One offload event in the selection comparison, with the best rate any
/// visible satellite offered at the same instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub policy: String,
    pub seed: u64,
    pub uav_id: u32,
    pub event: usize,
    pub t_offload: f64,
    pub sat_id: u32,
    pub rate: f64,
    pub t_tr: f64,
    pub best_rate: f64,
    pub best_t_tr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionComparison {
    pub events: Vec<SelectionEvent>,
    /// (policy, event count, mean t_tr)
    pub means: Vec<(SelectionKind, usize, f64)>,
    /// Events where the max-throughput choice was beaten at its own instant.
    pub dominance_exceptions: usize,
}

/// Runs the proposed scheme in per-hover offload mode under each selection
/// policy and records every offload event.
pub fn compare_selection(spec: &ExperimentSpec) -> Result<SelectionComparison> {
    spec.check()?;
    let mut pipeline = spec.pipeline;
    pipeline.offload_mode = OffloadMode::PerHover;
    let mut cells = Vec::new();
    for &selection in &spec.selections {
        for &k in &spec.device_counts {
            for &seed in &spec.seeds {
                cells.push((selection, k, seed));
            }
        }
    }
    let per_cell: Result<Vec<Vec<SelectionEvent>>> = cells
        .par_iter()
        .map(|&(selection, k, seed)| {
            let scenario = spec.scenario(k, seed)?;
            let scheme = spec.schemes.first().copied().unwrap_or(Scheme::Proposed);
            let run = run_pipeline(
                &scenario,
                scheme,
                &policy_for(&scenario, selection),
                &pipeline,
            )?;
            let violations = run.violations(&scenario);
            if let Some(v) = violations.first() {
                return Err(Error::Integrity(format!(
                    "{selection} K={k} seed={seed}: {v}"
                )));
            }
            let sites: std::collections::HashMap<u32, _> =
                scenario.uavs.iter().map(|u| (u.id, u.site)).collect();
            let mut counters: std::collections::HashMap<u32, usize> = Default::default();
            Ok(run
                .artifacts
                .decisions
                .iter()
                .map(|d| {
                    let visible = visible_satellites(
                        &scenario.constellation,
                        sites[&d.uav_id],
                        d.t_offload,
                        scenario.params.min_elevation,
                        &scenario.params,
                    );
                    let best_rate = visible.iter().map(|v| v.rate).fold(0.0, f64::max);
                    let n = counters.entry(d.uav_id).or_default();
                    *n += 1;
                    SelectionEvent {
                        policy: selection.to_string(),
                        seed,
                        uav_id: d.uav_id,
                        event: *n - 1,
                        t_offload: d.t_offload,
                        sat_id: d.sat_id,
                        rate: d.rate_at_selection,
                        t_tr: d.t_tr,
                        best_rate,
                        best_t_tr: d.data_bits as f64 / best_rate,
                    }
                })
                .collect())
        })
        .collect();
    let events: Vec<SelectionEvent> = per_cell?.into_iter().flatten().collect();
    let means = spec
        .selections
        .iter()
        .map(|&kind| {
            let t: Vec<f64> = events
                .iter()
                .filter(|e| e.policy == kind.as_str())
                .map(|e| e.t_tr)
                .collect();
            (kind, t.len(), mean_std(&t).0)
        })
        .collect();
    let dominance_exceptions = events
        .iter()
        .filter(|e| e.policy == SelectionKind::MaxThroughput.as_str() && e.rate < e.best_rate)
        .count()
        + events.iter().filter(|e| e.rate > e.best_rate).count();
    Ok(SelectionComparison {
        events,
        means,
        dominance_exceptions,
    })
}

pub fn write_selection_events(path: &Path, cmp: &SelectionComparison) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    for e in &cmp.events {
        out.serialize(e)?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_selection_summary(path: &Path, cmp: &SelectionComparison) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record(["policy", "events", "mean_ttr_s"])?;
    for (kind, n, mean) in &cmp.means {
        out.write_record([kind.to_string(), n.to_string(), mean.to_string()])?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Devices served at each hover point, for reports.
pub fn hover_point_members(plan: &HoverPlan) -> Vec<Vec<DeviceId>> {
    plan.groups.iter().map(|g| g.members.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_scenario;

    fn quick() -> PipelineOptions {
        PipelineOptions {
            gwo_population: 20,
            gwo_iterations: 40,
            ..Default::default()
        }
    }

    #[test]
    fn scheme_and_mode_parsing() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("x".parse::<Scheme>().is_err());
        assert_eq!(
            "per-hover".parse::<OffloadMode>().unwrap(),
            OffloadMode::PerHover
        );
        assert_eq!("batch".parse::<OffloadMode>().unwrap(), OffloadMode::Batch);
    }

    #[test]
    fn random_pairing_is_a_feasible_seeded_matching() {
        let s = generate_scenario(3, 40, 2, 20, 500.0).unwrap();
        let a = random_pairing(&s, 5);
        a.check(&s.devices, s.params.pair_distance).unwrap();
        assert_eq!(a, random_pairing(&s, 5));
        assert_ne!(a, random_pairing(&s, 6));
        // maximal: no two singles are within range
        for (i, &x) in a.singles.iter().enumerate() {
            for &y in &a.singles[i + 1..] {
                let d = s
                    .device(x)
                    .unwrap()
                    .position
                    .distance(s.device(y).unwrap().position);
                assert!(d > s.params.pair_distance);
            }
        }
    }

    #[test]
    fn pipelines_are_feasible_and_deterministic() {
        let s = generate_scenario(7, 12, 2, 60, 500.0).unwrap();
        for scheme in Scheme::ALL {
            for mode in [OffloadMode::Batch, OffloadMode::PerHover] {
                let opts = PipelineOptions {
                    offload_mode: mode,
                    ..quick()
                };
                let pol = policy_for(&s, SelectionKind::MaxThroughput);
                let a = run_pipeline(&s, scheme, &pol, &opts).unwrap();
                let b = run_pipeline(&s, scheme, &pol, &opts).unwrap();
                assert_eq!(a, b);
                assert!(
                    a.violations(&s).is_empty(),
                    "{scheme} {mode}: {:?}",
                    a.violations(&s)
                );
                let bits: u64 = a.artifacts.decisions.iter().map(|d| d.data_bits).sum();
                assert_eq!(bits, s.total_data_bits());
            }
        }
    }

    #[test]
    fn f_scheme_hovers_above_every_device() {
        let s = generate_scenario(2, 8, 1, 30, 500.0).unwrap();
        let (a, plan) = collection_plan(&s, Scheme::FScheme, &quick()).unwrap();
        assert!(a.pairs.is_empty());
        assert_eq!(plan.groups.len(), 8);
        for g in &plan.groups {
            let d = s.device(g.members[0]).unwrap();
            assert_eq!(g.hover.horizontal(), d.position);
            assert_eq!(g.bandwidth, s.params.ground_bandwidth / 8.0);
        }
    }

    #[test]
    fn single_satellite_makes_policies_agree() {
        let mut s = generate_scenario(4, 6, 1, 1, 500.0).unwrap();
        s.constellation.truncate(1);
        let mut opts = PipelineOptions {
            offload_mode: OffloadMode::PerHover,
            ..quick()
        };
        opts.offload.horizon = 86_400.0;
        let runs: Vec<_> = SelectionKind::ALL
            .iter()
            .map(|&k| run_pipeline(&s, Scheme::Proposed, &policy_for(&s, k), &opts).unwrap())
            .collect();
        for r in &runs[1..] {
            assert_eq!(r.artifacts.decisions, runs[0].artifacts.decisions);
        }
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0, 4.0]), (3.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn solution_round_trips() {
        let s = generate_scenario(9, 6, 1, 10, 500.0).unwrap();
        let run = run_pipeline(
            &s,
            Scheme::Proposed,
            &policy_for(&s, SelectionKind::Random),
            &quick(),
        )
        .unwrap();
        let sol = Solution {
            scheme: run.scheme,
            selection: run.selection,
            scenario: s,
            artifacts: run.artifacts,
        };
        let text = sol.to_toml_string().unwrap();
        let back = Solution::from_toml_str(&text).unwrap();
        assert_eq!(back, sol);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }
}
