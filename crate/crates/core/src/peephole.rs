//! Adjacency-based circuit optimization: inverse-pair cancellation,
//! single-qubit run merging and two-qubit block resynthesis.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::circuit::{Circuit, Gate, GateKind, Tag};
use crate::dag::{build_dag, CircuitDag, Direction, NodeRef};
use crate::synth::{cnot_lower_bound, resynth_2q_block_with, FitOptions};
use crate::unitary::{circuit_unitary, extract_u3, gate_unitary, normalize_angle, Unitary};

#[derive(Clone, Debug, PartialEq)]
pub struct PeepholeOptions {
    pub rounds: usize,
    pub min_cx_gain: usize,
    pub synth: FitOptions,
}

impl Default for PeepholeOptions {
    fn default() -> Self {
        PeepholeOptions { rounds: 3, min_cx_gain: 1, synth: FitOptions { tol: 1e-9, ..FitOptions::default() } }
    }
}

/// A maximal run of gates confined to one qubit pair.
#[derive(Clone, Debug)]
pub struct Block2Q {
    pub qubits: (usize, usize),
    /// Node ids in topological order.
    pub nodes: Vec<usize>,
    pub unitary: Unitary,
}

/// CNOT-equivalent cost of a gate: cx 1, swap 3.
fn cx_cost(g: &Gate) -> usize {
    match g.kind {
        GateKind::Cx => 1,
        GateKind::Swap => 3,
        _ => 0,
    }
}

pub fn dag_cnot_cost(dag: &CircuitDag) -> usize {
    dag.node_ids().map(|i| cx_cost(dag.gate(i).unwrap())).sum()
}

fn is_1q(g: &Gate) -> bool {
    g.kind.is_single_qubit()
}

fn same_qubit_set(a: &Gate, b: &Gate) -> bool {
    let sa: BTreeSet<_> = a.qubits.iter().collect();
    let sb: BTreeSet<_> = b.qubits.iter().collect();
    sa == sb
}

/// Unitary of `gates` over their combined qubits, relabeled in the order given.
fn local_unitary(gates: &[&Gate], qubits: &[usize]) -> Unitary {
    let map: HashMap<usize, usize> = qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut c = Circuit::new(qubits.len());
    for g in gates {
        let mut g = (*g).clone();
        g.qubits = g.qubits.iter().map(|q| map[q]).collect();
        c.gates.push(g);
    }
    circuit_unitary(&c).expect("small circuit")
}

/// If `u` is e^{iα}·I within `tol`, return α.
fn identity_phase(u: &Unitary, tol: f64) -> Option<f64> {
    let a = u.get(0, 0);
    if (a.norm() - 1.0).abs() > tol {
        return None;
    }
    let d = u.dim();
    for r in 0..d {
        for c in 0..d {
            let want = if r == c { a } else { num_complex::Complex64::new(0.0, 0.0) };
            if (u.get(r, c) - want).norm() > tol {
                return None;
            }
        }
    }
    Some(a.arg())
}

/// Remove adjacent pairs whose product is the identity (up to phase), to a
/// fixpoint. Pairs must share a provenance tag. Returns the number of gates removed.
pub fn cancel_inverse_pairs(dag: &mut CircuitDag) -> usize {
    let mut removed = 0;
    loop {
        let mut changed = false;
        for id in dag.topological_order() {
            let Some(a) = dag.gate(id).cloned() else { continue };
            if a.kind == GateKind::Barrier {
                continue;
            }
            let Ok(NodeRef::Op(nid)) = dag.wire_neighbor(id, a.qubits[0], Direction::Succ) else { continue };
            let b = dag.gate(nid).unwrap().clone();
            if b.kind == GateKind::Barrier || b.tag != a.tag || !same_qubit_set(&a, &b) {
                continue;
            }
            let adjacent = a.qubits.iter().all(|&q| dag.wire_neighbor(id, q, Direction::Succ) == Ok(NodeRef::Op(nid)));
            if !adjacent {
                continue;
            }
            let u = local_unitary(&[&a, &b], &a.qubits);
            if let Some(alpha) = identity_phase(&u, 1e-10) {
                dag.remove_node(id).unwrap();
                dag.remove_node(nid).unwrap();
                dag.global_phase += alpha;
                removed += 2;
                changed = true;
            }
        }
        if !changed {
            return removed;
        }
    }
}

/// Maximal runs of single-qubit gates, one list per run, in wire order.
fn one_qubit_runs(dag: &CircuitDag) -> Vec<(usize, Vec<usize>)> {
    let mut runs = Vec::new();
    for q in 0..dag.num_qubits() {
        let mut cur = dag.wire_first(q);
        let mut run = Vec::new();
        while let NodeRef::Op(id) = cur {
            if is_1q(dag.gate(id).unwrap()) {
                run.push(id);
            } else if !run.is_empty() {
                runs.push((q, std::mem::take(&mut run)));
            }
            cur = dag.wire_neighbor(id, q, Direction::Succ).unwrap();
        }
        if !run.is_empty() {
            runs.push((q, run));
        }
    }
    runs
}

/// Replace every maximal single-qubit run by one u3, or delete it when it is
/// the identity up to phase. Returns the number of runs rewritten.
pub fn merge_1q_runs(dag: &mut CircuitDag) -> usize {
    let mut rewritten = 0;
    for (q, run) in one_qubit_runs(dag) {
        let gates: Vec<Gate> = run.iter().map(|&i| dag.gate(i).unwrap().clone()).collect();
        let mut m = Unitary::identity(2);
        for g in &gates {
            m = gate_unitary(g).unwrap().mul(&m);
        }
        let (p, gamma) = extract_u3(&m).expect("product of unitaries");
        let tag = if gates.iter().any(|g| g.tag == Tag::Program) { Tag::Program } else { Tag::Routing };
        let mut rep = Circuit::new(1);
        rep.global_phase = gamma;
        let trivial = p.theta == 0.0 && normalize_angle(p.lambda).abs() < 1e-12;
        if !trivial {
            rep.gates.push(Gate::u3(0, p.theta, p.phi, p.lambda).with_tag(tag));
        }
        // Leave a lone u3 alone when it is already canonical.
        if gates.len() == 1 && gates[0].kind == GateKind::U3 && !trivial {
            let old = &gates[0].params;
            if (old[0] - p.theta).abs() < 1e-12 && (old[1] - p.phi).abs() < 1e-12 && (old[2] - p.lambda).abs() < 1e-12 {
                continue;
            }
        }
        dag.replace_region(&run, &rep, &[q]).unwrap();
        rewritten += 1;
    }
    rewritten
}

fn eligible_2q(g: &Gate) -> bool {
    matches!(g.kind, GateKind::Cx | GateKind::Swap) && g.tag == Tag::Program
}

/// Greedy maximal two-qubit blocks seeded at each unassigned cx/swap.
pub fn collect_blocks(dag: &CircuitDag) -> Vec<Block2Q> {
    let order = dag.topological_order();
    let rank: HashMap<usize, usize> = order.iter().enumerate().map(|(r, &i)| (i, r)).collect();
    let mut assigned: HashSet<usize> = HashSet::new();
    let mut blocks = Vec::new();
    for &id in &order {
        let g = dag.gate(id).unwrap();
        if assigned.contains(&id) || !eligible_2q(g) {
            continue;
        }
        let (a, b) = (g.qubits[0], g.qubits[1]);
        let mut nodes = vec![id];
        assigned.insert(id);
        for w in [a, b] {
            let mut cur = dag.wire_neighbor(id, w, Direction::Pred).unwrap();
            while let NodeRef::Op(p) = cur {
                if assigned.contains(&p) || !is_1q(dag.gate(p).unwrap()) {
                    break;
                }
                nodes.push(p);
                assigned.insert(p);
                cur = dag.wire_neighbor(p, w, Direction::Pred).unwrap();
            }
        }
        let mut tail = [id, id];
        let mut open = [true, true];
        let wires = [a, b];
        loop {
            let mut progressed = false;
            for k in 0..2 {
                if !open[k] {
                    continue;
                }
                let nxt = dag.wire_neighbor(tail[k], wires[k], Direction::Succ).unwrap();
                let NodeRef::Op(n) = nxt else {
                    open[k] = false;
                    continue;
                };
                let ng = dag.gate(n).unwrap();
                if assigned.contains(&n) {
                    open[k] = false;
                } else if is_1q(ng) {
                    nodes.push(n);
                    assigned.insert(n);
                    tail[k] = n;
                    progressed = true;
                } else if eligible_2q(ng) && open[0] && open[1] && same_qubit_set(ng, g) {
                    let o = 1 - k;
                    if dag.wire_neighbor(tail[o], wires[o], Direction::Succ).unwrap() == NodeRef::Op(n) {
                        nodes.push(n);
                        assigned.insert(n);
                        tail = [n, n];
                        progressed = true;
                    }
                } else {
                    open[k] = false;
                }
            }
            if !progressed {
                break;
            }
        }
        nodes.sort_by_key(|n| rank[n]);
        let gates: Vec<&Gate> = nodes.iter().map(|&n| dag.gate(n).unwrap()).collect();
        let unitary = local_unitary(&gates, &[a, b]);
        blocks.push(Block2Q { qubits: (a, b), nodes, unitary });
    }
    blocks
}

/// Resynthesize two-qubit blocks holding at least two CNOTs whenever the
/// CNOT count drops by `min_cx_gain` or more. Returns the CNOTs saved.
pub fn resynth_blocks_pass(dag: &mut CircuitDag, min_cx_gain: usize, synth: &FitOptions) -> usize {
    let mut saved = 0;
    for block in collect_blocks(dag) {
        let cost: usize = block.nodes.iter().map(|&n| cx_cost(dag.gate(n).unwrap())).sum();
        if cost < 2 || cost < min_cx_gain.max(1) {
            continue;
        }
        let budget = cost - min_cx_gain.max(1);
        if cnot_lower_bound(&block.unitary) > budget {
            continue;
        }
        match resynth_2q_block_with(&block.unitary, synth, budget) {
            Ok(rep) => {
                let new_cost = rep.cnot_cost();
                dag.replace_region(&block.nodes, &rep, &[block.qubits.0, block.qubits.1]).unwrap();
                saved += cost - new_cost;
            }
            Err(e) => log::debug!("block on {:?} kept: {e}", block.qubits),
        }
    }
    saved
}

/// Cancellation, then 1q merging, then block resynthesis, repeated until
/// nothing changes or `opts.rounds` is reached.
pub fn optimize(dag: &mut CircuitDag, opts: &PeepholeOptions) {
    for round in 0..opts.rounds {
        let removed = cancel_inverse_pairs(dag);
        let merged = merge_1q_runs(dag);
        let saved = resynth_blocks_pass(dag, opts.min_cx_gain, &opts.synth);
        log::trace!("peephole round {round}: cancelled {removed}, merged {merged} runs, saved {saved} cx");
        if removed == 0 && saved == 0 && merged == 0 {
            break;
        }
    }
}

pub fn optimize_circuit(c: &Circuit, opts: &PeepholeOptions) -> Circuit {
    let mut dag = build_dag(c);
    optimize(&mut dag, opts);
    dag.to_circuit()
}

/// Grow a convex window around `region`: repeatedly add the gate just before
/// (or after) the window on some wire when it stays inside the region's
/// qubits and borders the window on every wire it touches. At most `window`
/// gates are added per side.
pub fn grow_window(dag: &CircuitDag, region: &[usize], window: usize) -> Vec<usize> {
    let qubits: BTreeSet<usize> = region.iter().flat_map(|&i| dag.gate(i).unwrap().qubits.clone()).collect();
    let mut inside: HashSet<usize> = region.iter().copied().collect();
    for dir in [Direction::Pred, Direction::Succ] {
        let back = match dir {
            Direction::Pred => Direction::Succ,
            Direction::Succ => Direction::Pred,
        };
        let mut added = 0;
        'grow: while added < window {
            for &q in &qubits {
                // Outermost window node on wire q in this direction.
                let Some(edge) = boundary(dag, &inside, q, dir) else { continue };
                let NodeRef::Op(c) = dag.wire_neighbor(edge, q, dir).unwrap() else { continue };
                let g = dag.gate(c).unwrap();
                if g.kind == GateKind::Barrier || !g.qubits.iter().all(|w| qubits.contains(w)) {
                    continue;
                }
                let borders =
                    g.qubits.iter().all(|&w| matches!(dag.wire_neighbor(c, w, back).unwrap(), NodeRef::Op(x) if inside.contains(&x)));
                if borders {
                    inside.insert(c);
                    added += 1;
                    continue 'grow;
                }
            }
            break;
        }
    }
    let mut v: Vec<usize> = inside.into_iter().collect();
    v.sort_unstable();
    v
}

fn boundary(dag: &CircuitDag, inside: &HashSet<usize>, q: usize, dir: Direction) -> Option<usize> {
    // Walk the wire from the window outward.
    let start = inside.iter().copied().find(|&i| dag.gate(i).unwrap().qubits.contains(&q))?;
    let mut cur = start;
    loop {
        match dag.wire_neighbor(cur, q, dir).unwrap() {
            NodeRef::Op(n) if inside.contains(&n) => cur = n,
            _ => return Some(cur),
        }
    }
}

/// Optimize a bounded window around `region` in isolation and splice the
/// result back. Returns the rewritten DAG and the window's CNOT cost.
pub fn local_optimize(dag: &CircuitDag, region: &[usize], window: usize, opts: &PeepholeOptions) -> (CircuitDag, usize) {
    if region.is_empty() {
        return (dag.clone(), 0);
    }
    let win = grow_window(dag, region, window);
    let qubits: Vec<usize> = win.iter().flat_map(|&i| dag.gate(i).unwrap().qubits.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let rank: HashMap<usize, usize> = dag.topological_order().into_iter().enumerate().map(|(r, i)| (i, r)).collect();
    let mut ordered = win.clone();
    ordered.sort_by_key(|i| rank[i]);
    let map: HashMap<usize, usize> = qubits.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let mut sub = Circuit::new(qubits.len());
    for &i in &ordered {
        let mut g = dag.gate(i).unwrap().clone();
        g.qubits = g.qubits.iter().map(|q| map[q]).collect();
        sub.gates.push(g);
    }
    let opt = optimize_circuit(&sub, opts);
    let count = opt.cnot_cost();
    let mut out = dag.clone();
    out.replace_region(&ordered, &opt, &qubits).expect("window is convex");
    (out, count)
}
