//! Route planning and pulse compilation: shortest fault-avoiding paths over
//! the switch graph, deterministic pulse schedules realizing them, and
//! pass/fail transfer reports with predicted-phase bookkeeping.
//!
//! The protocol for an N-hop route: upload at t0 (head → ξ), one global
//! two-layer pulse per turn at t0 + k·t1, download back onto the output head
//! at t0 + N·t1, finished at exactly 2·t0 + N·t1. Every hop contributes a
//! factor −1 and each of the two head legs a factor −i, so the arrival
//! amplitude is (−i)²(−1)^N times the input.

use crate::dynamics::{
    head_state, run_schedule, site_fidelity, DynamicsError, LayerSet, PhasePulse, Propagator,
    PulseSchedule, ScheduledPulse, TrajectoryOptions, TrajectoryRow,
};
use crate::hamiltonian::Hamiltonian;
use crate::lattice::{Edge, LatticeGraph, VertexId};
use crate::{tol, T0, T1};
use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

type Complex64 = Complex<f64>;

/// A hop-by-hop path between two head-carrying switches.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RoutePlan {
    pub input_head: VertexId,
    pub output_head: VertexId,
    /// Visited switches, input first, output last.
    pub vertices: Vec<VertexId>,
    /// The edge taken out of each visited switch; one shorter than `vertices`.
    pub steps: Vec<Edge>,
}

impl RoutePlan {
    pub fn hops(&self) -> usize {
        self.steps.len()
    }
}

fn vertex_list(vertices: &[VertexId]) -> String {
    let labels: Vec<String> = vertices.iter().map(VertexId::to_string).collect();
    labels.join(", ")
}

/// Errors from planning and running routes.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RouteError {
    #[error("vertex {0} carries no read/write head")]
    NotAHead(VertexId),
    #[error("vertex {0} is not part of the lattice")]
    UnknownVertex(VertexId),
    #[error("no fault-free route from {from} to {to} (blocking cut: {})", vertex_list(.blocking))]
    Unroutable { from: VertexId, to: VertexId, blocking: Vec<VertexId> },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Shortest path from `from` to `to` avoiding faulty switches, ties broken
/// toward the lexicographically smallest next vertex. Unroutable pairs
/// report the blocking cut: the faulty switches fencing in the source.
pub fn plan_path(
    graph: &LatticeGraph,
    from: VertexId,
    to: VertexId,
) -> Result<RoutePlan, RouteError> {
    for v in [from, to] {
        if !graph.vertex_exists(v) {
            return Err(RouteError::UnknownVertex(v));
        }
        if graph.head_index(v).is_none() {
            return Err(RouteError::NotAHead(v));
        }
    }
    let unroutable = |blocking: Vec<VertexId>| RouteError::Unroutable { from, to, blocking };
    if graph.is_faulty(from) {
        return Err(unroutable(vec![from]));
    }
    if graph.is_faulty(to) {
        return Err(unroutable(vec![to]));
    }
    if from == to {
        return Ok(RoutePlan { input_head: from, output_head: to, vertices: vec![from], steps: Vec::new() });
    }

    // Breadth-first distances to the target over non-faulty switches.
    let mut dist: BTreeMap<VertexId, usize> = BTreeMap::new();
    dist.insert(to, 0);
    let mut queue = VecDeque::from([to]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for &(w, _) in graph.neighbors(v) {
            if !graph.is_faulty(w) && !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }

    let Some(&total) = dist.get(&from) else {
        // Fence: faulty switches adjacent to anything the source can reach.
        let mut reached = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        let mut blocking = BTreeSet::new();
        while let Some(v) = queue.pop_front() {
            for &(w, _) in graph.neighbors(v) {
                if graph.is_faulty(w) {
                    blocking.insert(w);
                } else if reached.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        return Err(unroutable(blocking.into_iter().collect()));
    };

    // Greedy descent: neighbors are stored sorted, so the first one strictly
    // closer to the target is the lexicographic tie-break winner.
    let mut vertices = vec![from];
    let mut steps = Vec::with_capacity(total);
    let mut current = from;
    for remaining in (0..total).rev() {
        let &(next, edge) = graph
            .neighbors(current)
            .iter()
            .find(|(w, _)| dist.get(w) == Some(&remaining))
            .expect("descent from a reachable vertex cannot dead-end");
        vertices.push(next);
        steps.push(edge);
        current = next;
    }
    Ok(RoutePlan { input_head: from, output_head: to, vertices, steps })
}

/// The global pulse that converts standing on leg `arrive` into standing on
/// leg `depart` (0 is the head/connector leg). Equal legs need no pulse;
/// distinct in-plane legs take the two-layer pulse {arrive, depart}; leg 0
/// pairs with i through the complement pulse Ẑ_i = {1,2,3}\{i}.
pub fn pulse_for_turn(arrive: u8, depart: u8) -> Option<LayerSet> {
    assert!(arrive <= 3 && depart <= 3, "leg indices run 0..=3");
    match (arrive, depart) {
        (a, d) if a == d => None,
        (0, d) => Some(LayerSet::excluding(d)),
        (a, 0) => Some(LayerSet::excluding(a)),
        (a, d) => Some(LayerSet::pair(a, d)),
    }
}

/// A plan lowered to pulse times, plus the phase the arrival amplitude
/// should carry.
#[derive(Clone, Debug)]
pub struct CompiledRoute {
    pub plan: RoutePlan,
    pub schedule: PulseSchedule,
    pub predicted_phase: Complex64,
}

/// Lower a plan to its pulse schedule: upload at t0, one turn per switch at
/// t0 + k·t1, download at t0 + N·t1. A zero-hop plan needs no protocol at
/// all and compiles to an empty schedule of duration zero.
pub fn compile_schedule(plan: &RoutePlan) -> CompiledRoute {
    let leg_of = |edge: Edge| match edge {
        Edge::InPlane { dir } => dir,
        Edge::Connector { .. } => 0,
    };
    let n = plan.hops();
    let mut pulses = Vec::new();
    let mut arrive = 0u8;
    for k in 0..=n {
        let depart = if k < n { leg_of(plan.steps[k]) } else { 0 };
        if let Some(layers) = pulse_for_turn(arrive, depart) {
            pulses.push(ScheduledPulse {
                time: T0 + k as f64 * T1,
                pulse: PhasePulse::global(layers),
            });
        }
        // In-plane links keep their direction index at both endpoints and
        // connectors land on leg 0, so departure leg = next arrival leg.
        arrive = depart;
    }
    let (schedule, predicted_phase) = if n == 0 {
        (PulseSchedule::empty(0.0), Complex64::new(1.0, 0.0))
    } else {
        let duration = 2.0 * T0 + n as f64 * T1;
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 }; // (−i)²(−1)^N
        (PulseSchedule { pulses, duration }, Complex64::new(sign, 0.0))
    };
    CompiledRoute { plan: plan.clone(), schedule, predicted_phase }
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let y = x.rem_euclid(tau);
    if y > std::f64::consts::PI {
        y - tau
    } else {
        y
    }
}

/// Per-run tolerances and options.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub tol_modulus: f64,
    pub tol_phase: f64,
    /// Sample the evolution for plotting (single routes only).
    pub trajectory: Option<TrajectoryOptions>,
    /// Shift pulse `index` and everything after it by the offset.
    pub delay: Option<(usize, f64)>,
    /// Sweep worker threads; `None` uses one per core.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            tol_modulus: tol::MODULUS_DEFAULT,
            tol_phase: tol::PHASE_DEFAULT,
            trajectory: None,
            delay: None,
            workers: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// The outcome of one transfer, ready for JSON.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TransferReport {
    pub schema: String,
    pub from: VertexId,
    pub to: VertexId,
    pub path: Vec<VertexId>,
    pub hops: usize,
    pub pulses: usize,
    pub duration: f64,
    pub modulus: f64,
    pub phase: f64,
    pub predicted_phase: f64,
    pub phase_error: f64,
    pub tol_modulus: f64,
    pub tol_phase: f64,
    pub verdict: Verdict,
}

pub const REPORT_SCHEMA: &str = "hexpst-report/1";
pub const SWEEP_SCHEMA: &str = "hexpst-sweep/1";

/// A report plus the sampled trajectory when one was requested.
#[derive(Clone, Debug)]
pub struct RouteRun {
    pub report: TransferReport,
    pub trajectory: Vec<TrajectoryRow>,
}

/// One unroutable pair inside a sweep.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct UnroutablePair {
    pub from: VertexId,
    pub to: VertexId,
    pub blocking: Vec<VertexId>,
}

/// Duration bucket of a sweep: every route of `hops` hops runs for the same
/// `duration`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TimingRow {
    pub hops: usize,
    pub duration: f64,
    pub routes: usize,
}

/// Aggregated sweep results. The extrema default to 1/0/0 when no route ran.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub schema: String,
    pub reports: Vec<TransferReport>,
    pub unroutable: Vec<UnroutablePair>,
    pub timing: Vec<TimingRow>,
    pub min_modulus: f64,
    pub max_phase_error: f64,
    pub max_duration: f64,
    pub pass: usize,
    pub fail: usize,
}

/// A lattice with its propagator, ready to run transfers.
pub struct Simulator {
    graph: LatticeGraph,
    propagator: Propagator,
}

impl Simulator {
    pub fn new(graph: LatticeGraph) -> Self {
        let h = Hamiltonian::assemble(&graph);
        let propagator = Propagator::new(&h);
        Simulator { graph, propagator }
    }

    pub fn graph(&self) -> &LatticeGraph {
        &self.graph
    }

    /// Plan, compile, and run one transfer.
    pub fn route(&self, from: VertexId, to: VertexId, cfg: &RunConfig) -> Result<RouteRun, RouteError> {
        let plan = plan_path(&self.graph, from, to)?;
        let compiled = compile_schedule(&plan);
        let mut schedule = compiled.schedule;
        if let Some((index, delta)) = cfg.delay {
            schedule.delay_pulse(index, delta)?;
        }
        let initial = head_state(&self.graph, from).expect("endpoint head checked by the planner");
        let outcome = run_schedule(&self.propagator, &self.graph, &initial, &schedule, cfg.trajectory)?;
        let out_site = self.graph.head_index(to).expect("endpoint head checked by the planner");
        let (modulus, phase) = site_fidelity(&outcome.state, out_site);
        let predicted = compiled.predicted_phase.arg();
        let phase_error = wrap_angle(phase - predicted).abs();
        let verdict = if (modulus - 1.0).abs() <= cfg.tol_modulus && phase_error <= cfg.tol_phase {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        let report = TransferReport {
            schema: REPORT_SCHEMA.to_string(),
            from,
            to,
            path: plan.vertices.clone(),
            hops: plan.hops(),
            pulses: schedule.pulses.len(),
            duration: schedule.duration,
            modulus,
            phase,
            predicted_phase: predicted,
            phase_error,
            tol_modulus: cfg.tol_modulus,
            tol_phase: cfg.tol_phase,
            verdict,
        };
        Ok(RouteRun { report, trajectory: outcome.trajectory })
    }

    /// Run every pair, in the given order, in parallel. Unroutable pairs are
    /// recorded, not fatal; planner misuse (unknown vertices, missing heads)
    /// aborts the sweep.
    pub fn sweep(
        &self,
        pairs: &[(VertexId, VertexId)],
        cfg: &RunConfig,
    ) -> Result<SweepOutcome, RouteError> {
        enum PairOutcome {
            Ran(TransferReport),
            Blocked(UnroutablePair),
        }
        let cfg = RunConfig { trajectory: None, ..cfg.clone() };
        let run_pair = |&(from, to): &(VertexId, VertexId)| match self.route(from, to, &cfg) {
            Ok(run) => Ok(PairOutcome::Ran(run.report)),
            Err(RouteError::Unroutable { from, to, blocking }) => {
                Ok(PairOutcome::Blocked(UnroutablePair { from, to, blocking }))
            }
            Err(other) => Err(other),
        };
        let results: Result<Vec<PairOutcome>, RouteError> = match cfg.workers {
            Some(threads) => rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("worker pool")
                .install(|| pairs.par_iter().map(run_pair).collect()),
            None => pairs.par_iter().map(run_pair).collect(),
        };

        let mut outcome = SweepOutcome {
            schema: SWEEP_SCHEMA.to_string(),
            reports: Vec::new(),
            unroutable: Vec::new(),
            timing: Vec::new(),
            min_modulus: 1.0,
            max_phase_error: 0.0,
            max_duration: 0.0,
            pass: 0,
            fail: 0,
        };
        let mut timing: BTreeMap<usize, TimingRow> = BTreeMap::new();
        for result in results? {
            match result {
                PairOutcome::Ran(report) => {
                    outcome.min_modulus = outcome.min_modulus.min(report.modulus);
                    outcome.max_phase_error = outcome.max_phase_error.max(report.phase_error);
                    outcome.max_duration = outcome.max_duration.max(report.duration);
                    match report.verdict {
                        Verdict::Pass => outcome.pass += 1,
                        Verdict::Fail => outcome.fail += 1,
                    }
                    timing
                        .entry(report.hops)
                        .or_insert(TimingRow { hops: report.hops, duration: report.duration, routes: 0 })
                        .routes += 1;
                    outcome.reports.push(report);
                }
                PairOutcome::Blocked(pair) => outcome.unroutable.push(pair),
            }
        }
        outcome.timing = timing.into_values().collect();
        Ok(outcome)
    }
}

/// All ordered pairs of distinct head-carrying switches, lexicographic.
pub fn all_head_pairs(graph: &LatticeGraph) -> Vec<(VertexId, VertexId)> {
    let heads: Vec<VertexId> = graph.heads().collect();
    let mut pairs = Vec::with_capacity(heads.len().saturating_sub(1) * heads.len());
    for &from in &heads {
        for &to in &heads {
            if from != to {
                pairs.push((from, to));
            }
        }
    }
    pairs
}
