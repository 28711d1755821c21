//! Randomized invariant checks: serialization round-trips, planner
//! guarantees, schedule arithmetic, and norm conservation, over generated
//! lattices rather than hand-picked ones.

use hexpst::dynamics::{
    run_schedule, LayerSet, PhasePulse, Propagator, PulseSchedule, ScheduledPulse, StateVector,
};
use hexpst::hamiltonian::Hamiltonian;
use hexpst::lattice::{
    BoundaryPolicy, ConnectorSpec, HeadPolicy, HexExtent, LatticeGraph, LatticeSpec, VertexId,
};
use hexpst::routing::{all_head_pairs, compile_schedule, plan_path, RouteError, RunConfig, Simulator, Verdict};
use hexpst::{tol, T0, T1};
use proptest::prelude::*;
use proptest::sample::Index;

/// Any syntactically valid spec, including ones `build` would reject
/// (listed heads may collide with connector endpoints).
fn arb_spec() -> BoxedStrategy<LatticeSpec> {
    (1u32..=2, 1u32..=3, 1u32..=3, any::<bool>(), any::<bool>())
        .prop_flat_map(|(planes, rows, cols, trim, all_heads)| {
            let extent = HexExtent::new(rows, cols);
            let pool = extent.vertices(0).len();
            (
                Just(planes),
                Just(extent),
                Just(trim),
                Just(all_heads),
                proptest::collection::btree_set(0..pool, 0..=2),
                proptest::collection::btree_set(0..pool, 0..=3),
                proptest::option::of((0..pool, 0..pool)),
            )
        })
        .prop_map(|(planes, extent, trim, all_heads, faults, listed, connector)| {
            let pool = extent.vertices(0);
            let mut spec = LatticeSpec::new(planes, extent);
            spec.boundary_policy = if trim {
                BoundaryPolicy::TrimDangling
            } else {
                BoundaryPolicy::KeepDangling
            };
            if !all_heads {
                spec.rw_head_policy = HeadPolicy::Listed(listed.iter().map(|&i| pool[i]).collect());
            }
            spec.faulty_switches = faults.iter().map(|&i| pool[i]).collect();
            if planes == 2 {
                if let Some((a, b)) = connector {
                    spec.interplane_connectors = vec![ConnectorSpec {
                        plane_a: 0,
                        plane_b: 1,
                        vertex_on_a: [pool[a].row, pool[a].col],
                        vertex_on_b: [pool[b].row, pool[b].col],
                    }];
                }
            }
            spec
        })
        .boxed()
}

/// A spec `build` always accepts: heads everywhere, optional faults and
/// (on two-plane stacks) one connector.
fn arb_built_spec(max_faults: usize) -> BoxedStrategy<LatticeSpec> {
    (1u32..=2, 1u32..=3, 1u32..=3, any::<bool>())
        .prop_flat_map(move |(planes, rows, cols, trim)| {
            let extent = HexExtent::new(rows, cols);
            let pool = extent.vertices(0).len();
            (
                Just(planes),
                Just(extent),
                Just(trim),
                proptest::collection::btree_set(0..pool, 0..=max_faults),
                proptest::option::of((0..pool, 0..pool)),
            )
        })
        .prop_map(|(planes, extent, trim, faults, connector)| {
            let pool = extent.vertices(0);
            let mut spec = LatticeSpec::new(planes, extent);
            spec.boundary_policy = if trim {
                BoundaryPolicy::TrimDangling
            } else {
                BoundaryPolicy::KeepDangling
            };
            spec.faulty_switches = faults.iter().map(|&i| pool[i]).collect();
            if planes == 2 {
                if let Some((a, b)) = connector {
                    spec.interplane_connectors = vec![ConnectorSpec {
                        plane_a: 0,
                        plane_b: 1,
                        vertex_on_a: [pool[a].row, pool[a].col],
                        vertex_on_b: [pool[b].row, pool[b].col],
                    }];
                }
            }
            spec
        })
        .boxed()
}

/// Heads that are legal route endpoints (the planner refuses faulty ones).
fn usable_heads(graph: &LatticeGraph) -> Vec<VertexId> {
    graph.heads().filter(|&v| !graph.is_faulty(v)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    /// A spec survives a JSON round-trip unchanged.
    #[test]
    fn spec_json_round_trips(spec in arb_spec()) {
        let text = spec.to_json();
        let reparsed = LatticeSpec::from_json(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(reparsed, spec);
    }

    /// A graph dump parses back to a graph that dumps byte-identically.
    #[test]
    fn graph_dump_round_trips(spec in arb_built_spec(2)) {
        let graph = LatticeGraph::build(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let text = graph.dump();
        let reparsed = LatticeGraph::parse_dump(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(reparsed.dump(), text);
    }

    /// Compiled schedules keep exact time arithmetic: upload at t0, turns on
    /// the t1 grid, duration exactly 2t0 + N·t1, never more than N+2 pulses,
    /// and the predicted end phase is ±1 by hop parity.
    #[test]
    fn compiled_schedules_follow_the_clock(spec in arb_built_spec(0), pick in any::<Index>()) {
        let graph = LatticeGraph::build(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let pairs = all_head_pairs(&graph);
        prop_assume!(!pairs.is_empty());
        let (from, to) = pairs[pick.index(pairs.len())];
        // A two-plane stack without a connector is legitimately split; only
        // routable pairs have a schedule to check.
        let plan = match plan_path(&graph, from, to) {
            Ok(plan) => plan,
            Err(RouteError::Unroutable { .. }) => {
                prop_assume!(false);
                unreachable!()
            }
            Err(other) => return Err(TestCaseError::fail(other.to_string())),
        };
        let route = compile_schedule(&plan);
        let n = plan.hops();

        prop_assert_eq!(route.predicted_phase.im, 0.0);
        if n == 0 {
            prop_assert_eq!(route.schedule.duration, 0.0);
            prop_assert!(route.schedule.pulses.is_empty());
            prop_assert_eq!(route.predicted_phase.re, 1.0);
        } else {
            prop_assert_eq!(route.schedule.duration, 2.0 * T0 + n as f64 * T1);
            let count = route.schedule.pulses.len();
            prop_assert!((2..=n + 2).contains(&count), "{count} pulses for {n} hops");
            let mut last = f64::NEG_INFINITY;
            for pulse in &route.schedule.pulses {
                prop_assert!(pulse.time > last);
                last = pulse.time;
                prop_assert!(
                    (0..=n).any(|k| pulse.time == T0 + k as f64 * T1),
                    "pulse at {} is off the t0/t1 grid",
                    pulse.time
                );
            }
            let expected = if n % 2 == 1 { 1.0 } else { -1.0 };
            prop_assert_eq!(route.predicted_phase.re, expected);
        }

        // The trivial self-route compiles to an empty, zero-length schedule.
        let stay = plan_path(&graph, from, from).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let stay = compile_schedule(&stay);
        prop_assert_eq!(stay.schedule.duration, 0.0);
        prop_assert!(stay.schedule.pulses.is_empty());
        prop_assert_eq!(stay.predicted_phase.re, 1.0);
        prop_assert_eq!(stay.predicted_phase.im, 0.0);
    }

    /// The planner never routes through a faulty switch; when it gives up it
    /// names a non-empty blocking cut of genuinely faulty switches.
    #[test]
    fn planner_avoids_faults(spec in arb_built_spec(3), a in any::<Index>(), b in any::<Index>()) {
        let graph = LatticeGraph::build(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let heads = usable_heads(&graph);
        prop_assume!(heads.len() >= 2);
        let from = heads[a.index(heads.len())];
        let to = heads[b.index(heads.len())];
        match plan_path(&graph, from, to) {
            Ok(plan) => {
                prop_assert_eq!(plan.vertices.first().copied(), Some(from));
                prop_assert_eq!(plan.vertices.last().copied(), Some(to));
                prop_assert!(plan.vertices.iter().all(|&v| !graph.is_faulty(v)));
            }
            Err(RouteError::Unroutable { blocking, .. }) => {
                prop_assert!(blocking.iter().all(|&v| graph.is_faulty(v)));
                if blocking.is_empty() {
                    // Nothing to blame on faults: the pair must be
                    // disconnected outright (faults never change adjacency).
                    let mut clean = spec.clone();
                    clean.faulty_switches.clear();
                    let clean_graph = LatticeGraph::build(&clean)
                        .map_err(|e| TestCaseError::fail(e.to_string()))?;
                    prop_assert!(plan_path(&clean_graph, from, to).is_err());
                }
            }
            Err(other) => return Err(TestCaseError::fail(other.to_string())),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    /// Evolution interleaved with phase pulses conserves the norm.
    #[test]
    fn evolution_preserves_norm(
        spec in arb_built_spec(0),
        site in any::<Index>(),
        raw_times in proptest::collection::vec(0.01f64..6.0, 0..=3),
        tail in 0.0f64..4.0,
    ) {
        let graph = LatticeGraph::build(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let dim = graph.site_count();
        prop_assume!(dim > 0);
        let h = Hamiltonian::assemble(&graph);
        let propagator = Propagator::new(&h);

        let mut times = raw_times;
        times.sort_by(f64::total_cmp);
        times.dedup();
        let layers = [LayerSet::pair(1, 2), LayerSet::pair(1, 3), LayerSet::pair(2, 3)];
        let pulses: Vec<ScheduledPulse> = times
            .iter()
            .enumerate()
            .map(|(k, &time)| ScheduledPulse { time, pulse: PhasePulse::global(layers[k % 3]) })
            .collect();
        let duration = times.last().copied().unwrap_or(0.0) + tail;
        let schedule = PulseSchedule { pulses, duration };

        let initial = StateVector::basis(dim, site.index(dim));
        let outcome = run_schedule(&propagator, &graph, &initial, &schedule, None)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!((outcome.state.norm() - 1.0).abs() <= tol::UNITARITY);
        prop_assert_eq!(outcome.state.time, duration);
    }

    /// Every routable head pair actually passes its verdict at default
    /// tolerances, with the phase the parity ledger predicts.
    #[test]
    fn routed_transfers_pass_their_verdicts(spec in arb_built_spec(1), pick in any::<Index>()) {
        let graph = LatticeGraph::build(&spec).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let heads = usable_heads(&graph);
        prop_assume!(heads.len() >= 2);
        let pairs: Vec<(VertexId, VertexId)> = heads
            .iter()
            .flat_map(|&x| heads.iter().map(move |&y| (x, y)))
            .filter(|(x, y)| x != y)
            .collect();
        let (from, to) = pairs[pick.index(pairs.len())];
        prop_assume!(plan_path(&graph, from, to).is_ok());

        let sim = Simulator::new(graph);
        let run = sim
            .route(from, to, &RunConfig::default())
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(run.report.verdict, Verdict::Pass);
        prop_assert!(run.report.phase_error <= tol::PHASE_DEFAULT);
        prop_assert!((run.report.modulus - 1.0).abs() <= tol::MODULUS_DEFAULT);
        prop_assert_eq!(run.report.duration, 2.0 * T0 + run.report.hops as f64 * T1);
        prop_assert!(run.report.pulses <= run.report.hops + 2);
    }
}
