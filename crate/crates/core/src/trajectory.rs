//! Closed multi-UAV tours over hover points.
//!
//! The planner is a grey wolf optimizer over random-key vectors: the first
//! `M` keys order the hover points, the trailing `U - 1` keys cut that
//! sequence into one consecutive block per UAV. Fitness is the summed tour
//! length of all UAVs, each tour starting and ending at the UAV's start.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::streams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPlan {
    /// Per UAV, hover-point indices in visit order. Tours are implicitly closed.
    pub routes: Vec<Vec<usize>>,
    pub lengths: Vec<f64>,
    pub fly_times: Vec<f64>,
}

impl TrajectoryPlan {
    pub fn from_routes(
        routes: Vec<Vec<usize>>,
        points: &[Point2],
        starts: &[Point2],
        speed: f64,
    ) -> Self {
        let lengths: Vec<f64> = routes
            .iter()
            .zip(starts)
            .map(|(r, &s)| route_length(r, points, s))
            .collect();
        let fly_times = lengths.iter().map(|l| l / speed).collect();
        Self {
            routes,
            lengths,
            fly_times,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn total_fly_time(&self) -> f64 {
        self.fly_times.iter().sum()
    }

    /// True when every point index in `0..n_points` appears exactly once.
    pub fn is_partition_of(&self, n_points: usize) -> bool {
        let mut seen = vec![false; n_points];
        for &i in self.routes.iter().flatten() {
            if i >= n_points || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GwoParams {
    pub population: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Apply 2-opt to every decoded route and write the improved order back
    /// into the wolf's keys.
    pub local_search: bool,
}

impl Default for GwoParams {
    fn default() -> Self {
        Self {
            population: 50,
            iterations: 200,
            seed: 0,
            local_search: true,
        }
    }
}

/// Length of start -> points in order -> start.
pub fn tour_length(route: &[Point2], start: Point2) -> f64 {
    let Some((&first, _)) = route.split_first() else {
        return 0.0;
    };
    let inner: f64 = route.windows(2).map(|w| w[0].distance(w[1])).sum();
    start.distance(first) + inner + route[route.len() - 1].distance(start)
}

pub fn route_length(route: &[usize], points: &[Point2], start: Point2) -> f64 {
    if route.is_empty() {
        return 0.0;
    }
    let mut len = start.distance(points[route[0]]);
    for w in route.windows(2) {
        len += points[w[0]].distance(points[w[1]]);
    }
    len + points[route[route.len() - 1]].distance(start)
}

/// 2-opt on a closed tour anchored at `start`; applies improving segment
/// reversals until none remains. Never lengthens the route.
pub fn two_opt(route: &mut [usize], points: &[Point2], start: Point2) {
    let at = |i: usize| if i == usize::MAX { start } else { points[i] };
    two_opt_by(route, usize::MAX, |a, b| at(a).distance(at(b)));
}

/// 2-opt over node indices; `start` is the depot node.
fn two_opt_by(route: &mut [usize], start: usize, dist: impl Fn(usize, usize) -> f64) {
    let n = route.len();
    if n < 2 {
        return;
    }
    let node = |route: &[usize], i: isize| -> usize {
        if i < 0 || i as usize >= n {
            start
        } else {
            route[i as usize]
        }
    };
    loop {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let a = node(route, i as isize - 1);
                let b = route[i];
                let c = route[j];
                let d = node(route, j as isize + 1);
                let delta = dist(a, b) + dist(c, d) - dist(a, c) - dist(b, d);
                if delta > 1e-9 {
                    route[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Greedy multi-vehicle nearest neighbour: at each step the globally
/// closest (vehicle position, unvisited point) pair is appended.
pub fn nearest_neighbor_routes(points: &[Point2], starts: &[Point2]) -> Vec<Vec<usize>> {
    let mut routes = vec![Vec::new(); starts.len()];
    if starts.is_empty() {
        return routes;
    }
    let mut current: Vec<Point2> = starts.to_vec();
    let mut visited = vec![false; points.len()];
    for _ in 0..points.len() {
        let mut best: Option<(f64, usize, usize)> = None;
        for (u, &at) in current.iter().enumerate() {
            for (p, &pt) in points.iter().enumerate() {
                if visited[p] {
                    continue;
                }
                let d = at.distance(pt);
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, u, p));
                }
            }
        }
        let (_, u, p) = best.expect("unvisited point exists");
        visited[p] = true;
        routes[u].push(p);
        current[u] = points[p];
    }
    routes
}

/// Nearest-neighbour construction followed by per-route 2-opt.
pub fn nearest_neighbor_plan(points: &[Point2], starts: &[Point2], speed: f64) -> TrajectoryPlan {
    let mut routes = nearest_neighbor_routes(points, starts);
    for (r, &s) in routes.iter_mut().zip(starts) {
        two_opt(r, points, s);
    }
    TrajectoryPlan::from_routes(routes, points, starts, speed)
}

/// Decodes a random-key vector of length `m + u - 1` into `u` routes.
pub fn decode_keys(keys: &[f64], m: usize, u: usize) -> Vec<Vec<usize>> {
    assert_eq!(keys.len(), m + u.saturating_sub(1));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    let mut cuts: Vec<usize> = keys[m..]
        .iter()
        .map(|k| ((k.clamp(0.0, 1.0) * m as f64).round() as usize).min(m))
        .collect();
    cuts.sort_unstable();
    let mut routes = Vec::with_capacity(u);
    let mut lo = 0;
    for &c in cuts.iter().chain(std::iter::once(&m)) {
        routes.push(order[lo..c].to_vec());
        lo = c;
    }
    routes
}

#[derive(Debug, Clone)]
struct Wolf {
    keys: Vec<f64>,
    fitness: f64,
    routes: Vec<Vec<usize>>,
}

struct Problem<'a> {
    points: &'a [Point2],
    starts: &'a [Point2],
    local_search: bool,
    /// Distances between hover points and UAV starts; start `u` is node `m + u`.
    dist: Vec<f64>,
}

impl<'a> Problem<'a> {
    fn new(points: &'a [Point2], starts: &'a [Point2], local_search: bool) -> Self {
        let nodes: Vec<Point2> = points.iter().chain(starts).copied().collect();
        let dist = nodes
            .iter()
            .flat_map(|a| nodes.iter().map(move |b| a.distance(*b)))
            .collect();
        Self {
            points,
            starts,
            local_search,
            dist,
        }
    }

    fn m(&self) -> usize {
        self.points.len()
    }

    fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * (self.points.len() + self.starts.len()) + b]
    }

    fn evaluate(&self, keys: &mut [f64]) -> (f64, Vec<Vec<usize>>) {
        let m = self.m();
        let u = self.starts.len();
        let mut routes = decode_keys(keys, m, u);
        if self.local_search {
            let mut sorted: Vec<f64> = keys[..m].to_vec();
            sorted.sort_by(f64::total_cmp);
            // strictly increasing so the written-back keys decode to the improved order
            for i in 1..m {
                if sorted[i] <= sorted[i - 1] {
                    sorted[i] = sorted[i - 1].next_up();
                }
            }
            let mut lo = 0;
            for (u, r) in routes.iter_mut().enumerate() {
                two_opt_by(r, m + u, |a, b| self.d(a, b));
                for (offset, &p) in r.iter().enumerate() {
                    keys[p] = sorted[lo + offset];
                }
                lo += r.len();
            }
        }
        let fitness = routes
            .iter()
            .zip(self.starts)
            .map(|(r, &s)| route_length(r, self.points, s))
            .sum();
        (fitness, routes)
    }
}

#[derive(Debug, Clone)]
pub struct GwoOutcome {
    pub plan: TrajectoryPlan,
    /// Best total length after initialization and after each iteration.
    pub history: Vec<f64>,
}

/// Grey wolf optimization of the multi-UAV tour partition.
pub fn plan_trajectories(
    hover_points: &[Point2],
    starts: &[Point2],
    speed: f64,
    gwo: &GwoParams,
) -> Result<TrajectoryPlan> {
    run_gwo(hover_points, starts, speed, gwo).map(|o| o.plan)
}

pub fn run_gwo(
    hover_points: &[Point2],
    starts: &[Point2],
    speed: f64,
    gwo: &GwoParams,
) -> Result<GwoOutcome> {
    if hover_points.is_empty() {
        return Err(Error::InvalidArgument("no hover points to plan".into()));
    }
    if starts.is_empty() {
        return Err(Error::InvalidArgument("no UAVs to plan for".into()));
    }
    if gwo.population < 4 || gwo.iterations == 0 {
        return Err(Error::InvalidArgument(
            "GWO needs population >= 4 and iterations >= 1".into(),
        ));
    }
    let problem = Problem::new(hover_points, starts, gwo.local_search);
    let dims = problem.m() + starts.len() - 1;

    let mut wolves: Vec<Wolf> = (0..gwo.population)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::stream(gwo.seed, &[i as u64, 0]);
            let mut keys: Vec<f64> = (0..dims).map(|_| rng.gen::<f64>()).collect();
            let (fitness, routes) = problem.evaluate(&mut keys);
            Wolf {
                keys,
                fitness,
                routes,
            }
        })
        .collect();

    let mut leaders: Vec<Wolf> = Vec::with_capacity(3);
    update_leaders(&mut leaders, &wolves);
    let mut history = vec![leaders[0].fitness];

    for iter in 0..gwo.iterations {
        let a = 2.0 - 2.0 * iter as f64 / gwo.iterations as f64;
        let lead: Vec<&[f64]> = leaders.iter().map(|w| w.keys.as_slice()).collect();
        wolves.par_iter_mut().enumerate().for_each(|(i, wolf)| {
            let mut rng = streams::stream(gwo.seed, &[i as u64, iter as u64 + 1]);
            for d in 0..dims {
                let x = wolf.keys[d];
                let mut acc = 0.0;
                for leader in &lead {
                    let big_a = 2.0 * a * rng.gen::<f64>() - a;
                    let big_c = 2.0 * rng.gen::<f64>();
                    let dist = (big_c * leader[d] - x).abs();
                    acc += leader[d] - big_a * dist;
                }
                wolf.keys[d] = (acc / lead.len() as f64).clamp(0.0, 1.0);
            }
            (wolf.fitness, wolf.routes) = problem.evaluate(&mut wolf.keys);
        });
        update_leaders(&mut leaders, &wolves);
        history.push(leaders[0].fitness);
    }

    let routes = leaders.swap_remove(0).routes;
    Ok(GwoOutcome {
        plan: TrajectoryPlan::from_routes(routes, hover_points, starts, speed),
        history,
    })
}

/// Keeps the three best distinct solutions seen so far (alpha, beta, delta).
fn update_leaders(leaders: &mut Vec<Wolf>, wolves: &[Wolf]) {
    let mut pool: Vec<Wolf> = leaders.drain(..).chain(wolves.iter().cloned()).collect();
    pool.sort_by(|a, b| a.fitness.total_cmp(&b.fitness));
    for w in pool {
        if leaders.len() == 3 {
            break;
        }
        if leaders.iter().all(|l| l.keys != w.keys) {
            leaders.push(w);
        }
    }
    // population >= 4 leaves at least three entries unless keys collide
    while leaders.len() < 3 {
        let last = leaders[leaders.len() - 1].clone();
        leaders.push(last);
    }
}
