mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use qcontext::dag::{build_dag, Direction, NodeRef};
use qcontext::native::{count_sx, lower_circuit_to_native, LoweringMode, NativeLibrary};
use qcontext::peephole::{optimize_circuit, PeepholeOptions};
use qcontext::pipeline::{compile_pipeline, Libraries, Mode, PipelineConfig};
use qcontext::qasm::{emit_qasm, parse_qasm};
use qcontext::routing::{route, RouteOptions};
use qcontext::topology::CouplingMap;
use qcontext::unitary::{circuit_unitary, extract_u3, phase_distance};
use qcontext::{Circuit, Gate, GateKind, Tag};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn angle() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(PI / 2.0), Just(-PI / 4.0), -PI..PI]
}

fn distinct(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle().prop_map(move |v| v[..k].to_vec())
}

fn gate(n: usize, with_ccx: bool) -> BoxedStrategy<Gate> {
    let q = 0..n;
    let one = prop_oneof![
        (q.clone(), angle(), angle(), angle()).prop_map(|(q, a, b, c)| Gate::u3(q, a, b, c)),
        (q.clone(), angle()).prop_map(|(q, a)| Gate::rz(q, a)),
        q.clone().prop_map(Gate::h),
        q.clone().prop_map(Gate::t),
        q.clone().prop_map(Gate::tdg),
        q.clone().prop_map(Gate::x),
        q.clone().prop_map(Gate::sx),
    ];
    let two = distinct(n, 2).prop_flat_map(|v| prop_oneof![Just(Gate::cx(v[0], v[1])), Just(Gate::swap(v[0], v[1]))]);
    if with_ccx && n >= 3 {
        let three = distinct(n, 3).prop_map(|v| Gate::ccx(v[0], v[1], v[2]));
        prop_oneof![3 => one, 3 => two, 1 => three].boxed()
    } else {
        prop_oneof![one, two].boxed()
    }
}

fn circuit(max_q: usize, max_gates: usize, with_ccx: bool) -> impl Strategy<Value = Circuit> {
    (2..=max_q).prop_flat_map(move |n| {
        prop::collection::vec(gate(n, with_ccx), 0..=max_gates).prop_map(move |g| Circuit::from_gates(n, g).unwrap())
    })
}

/// Circuits already executable on `line-n`: cx and swap only between neighbors.
fn line_circuit(n: usize, max_gates: usize) -> impl Strategy<Value = Circuit> {
    let one = prop_oneof![
        (0..n, angle(), angle(), angle()).prop_map(|(q, a, b, c)| Gate::u3(q, a, b, c)),
        (0..n).prop_map(Gate::h),
        (0..n).prop_map(Gate::sx),
    ];
    let cx = (0..n - 1, any::<bool>()).prop_map(|(i, up)| if up { Gate::cx(i, i + 1) } else { Gate::cx(i + 1, i) });
    let sw = (0..n - 1).prop_map(|i| Gate::swap(i, i + 1));
    prop::collection::vec(prop_oneof![2 => one, 3 => cx, 1 => sw], 0..=max_gates).prop_map(move |g| Circuit::from_gates(n, g).unwrap())
}

fn native_lib() -> &'static NativeLibrary {
    &Libraries::shared().unwrap().native
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dag_round_trip_preserves_unitary(c in circuit(6, 50, true)) {
        let d = build_dag(&c);
        prop_assert!(d.check_integrity());
        let back = d.to_circuit();
        prop_assert_eq!(back.len(), c.len());
        prop_assert!(common::circuit_distance(&back, &c) < 1e-10);
    }

    #[test]
    fn wire_neighbors_are_mutual(c in circuit(5, 30, true)) {
        let d = build_dag(&c);
        for id in d.node_ids() {
            for &q in &d.gate(id).unwrap().qubits {
                if let NodeRef::Op(s) = d.wire_neighbor(id, q, Direction::Succ).unwrap() {
                    prop_assert_eq!(d.wire_neighbor(s, q, Direction::Pred).unwrap(), NodeRef::Op(id));
                }
            }
        }
    }

    #[test]
    fn qasm_round_trip_is_exact(c in circuit(6, 40, true)) {
        let text = emit_qasm(&c).unwrap();
        let back = parse_qasm(&text).unwrap();
        prop_assert_eq!(back.num_qubits, c.num_qubits);
        prop_assert_eq!(&back.gates, &c.gates);
    }

    #[test]
    fn extract_u3_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::haar(2, &mut rng);
        let (p, phase) = extract_u3(&common::to_unitary(&m)).unwrap();
        prop_assert!((0.0..=PI).contains(&p.theta));
        let rebuilt = common::gate_matrix(p.to_gate(0), 1);
        let e = num_complex::Complex64::from_polar(1.0, phase);
        let err: f64 = rebuilt.iter().zip(&m).flat_map(|(a, b)| a.iter().zip(b).map(move |(x, y)| (x * e - y).norm_sqr())).sum();
        prop_assert!(err.sqrt() < 1e-10, "error {}", err.sqrt());
    }

    #[test]
    fn phase_distance_is_symmetric_and_phase_blind(a in circuit(3, 12, true), b in circuit(3, 12, true), phi in -PI..PI) {
        prop_assume!(a.num_qubits == b.num_qubits);
        let (ua, ub) = (circuit_unitary(&a).unwrap(), circuit_unitary(&b).unwrap());
        let d = phase_distance(&ua, &ub).unwrap();
        prop_assert!(d >= -1e-12);
        prop_assert!((d - phase_distance(&ub, &ua).unwrap()).abs() < 1e-9);
        prop_assert!((d - common::circuit_distance(&a, &b)).abs() < 1e-9);
        let mut shifted = a.clone();
        shifted.global_phase += phi;
        prop_assert!(phase_distance(&circuit_unitary(&shifted).unwrap(), &ua).unwrap() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn peephole_is_sound_and_never_adds_cnots(c in circuit(4, 30, false)) {
        let out = optimize_circuit(&c, &PeepholeOptions::default());
        prop_assert!(out.cnot_cost() <= c.cnot_cost());
        prop_assert!(common::circuit_distance(&out, &c) < 1e-9);
    }

    #[test]
    fn routing_is_executable_and_equivalent(c in circuit(6, 30, true), which in 0..3usize, seed in any::<u64>()) {
        let name = ["line", "ring", "full"][which];
        let n = c.num_qubits.max(3);
        let map = CouplingMap::builtin(&format!("{name}-{n}")).unwrap();
        let r = route(&c, &map, &RouteOptions { seed, initial_layout: None }).unwrap();
        for g in &r.circuit.gates {
            match g.kind {
                GateKind::Ccx => prop_assert!(map.topo_tag_of_triple(g.qubits[0], g.qubits[1], g.qubits[2]).is_ok()),
                _ if g.qubits.len() == 2 => prop_assert!(map.has_edge(g.qubits[0], g.qubits[1])),
                _ => {}
            }
        }
        let routing_swaps = r.circuit.gates.iter().filter(|g| g.tag == Tag::Routing).count();
        prop_assert_eq!(routing_swaps, r.num_swaps);
        let d = common::routed_distance(&c, &r.circuit, &r.initial_layout, &r.final_layout, true);
        prop_assert!(d < 1e-9, "distance {}", d);
    }

    #[test]
    fn lowering_is_sound_and_context_never_loses(c in (2..6usize).prop_flat_map(|n| line_circuit(n, 25))) {
        let n = c.num_qubits;
        let map = CouplingMap::builtin(&format!("line-{n}")).unwrap();
        let ctx = lower_circuit_to_native(&c, &map, native_lib(), LoweringMode::ContextAware).unwrap();
        let can = lower_circuit_to_native(&c, &map, native_lib(), LoweringMode::Canonical).unwrap();
        for l in [&ctx, &can] {
            prop_assert!(l.circuit.gates.iter().all(|g| matches!(g.kind, GateKind::Rzx | GateKind::Rz | GateKind::Sx | GateKind::Barrier)));
            prop_assert_eq!(count_sx(&l.circuit), l.predicted_sx);
            let d = common::circuit_distance(&l.circuit, &c);
            prop_assert!(d < 1e-7, "distance {}", d);
        }
        prop_assert!(count_sx(&ctx.circuit) <= count_sx(&can.circuit));
        prop_assert_eq!(ctx.circuit.count(GateKind::Rzx), can.circuit.count(GateKind::Rzx));
    }

    #[test]
    fn pipeline_metrics_are_recounts(c in circuit(4, 14, true), qctx in any::<bool>()) {
        let mode = if qctx { Mode::Qcontext } else { Mode::Trios };
        let map = CouplingMap::builtin("line-4").unwrap();
        let cfg = PipelineConfig { mode, verify: true, ..PipelineConfig::default() };
        let out = compile_pipeline(&c, &map, &cfg, Libraries::shared().unwrap()).unwrap();
        let m = &out.metrics;
        prop_assert_eq!(m.cr_r + m.cr_b, out.native.count(GateKind::Rzx));
        prop_assert_eq!(m.cr_r, out.native.gates.iter().filter(|g| g.kind == GateKind::Rzx && g.tag == Tag::Routing).count());
        prop_assert_eq!(m.sx, count_sx(&out.native));
        prop_assert_eq!(m.basis_cx, out.basis.cnot_cost());
        prop_assert!(out.verify_distance.unwrap() < 1e-7);
        let d = common::routed_distance(&c, &out.native, &out.routed.initial_layout, &out.routed.final_layout, true);
        prop_assert!(d < 1e-7, "distance {}", d);
    }
}
