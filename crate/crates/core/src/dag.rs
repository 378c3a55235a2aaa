//! Wire-linked DAG view of a circuit.
//!
//! Every operation keeps, per qubit it touches, a link to the previous and
//! next operation on that wire. Wires start at an input sentinel and end at an
//! output sentinel, so the structure is a DAG whose per-wire paths are exactly
//! the gate order of the source circuit restricted to that wire.

use std::collections::{BTreeSet, HashSet};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Input(usize),
    Op(usize),
    Output(usize),
}

impl NodeRef {
    pub fn op(self) -> Option<usize> {
        match self {
            NodeRef::Op(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Pred,
    Succ,
}

#[derive(Clone, Debug)]
pub struct OpNode {
    pub gate: Gate,
    prev: Vec<NodeRef>,
    next: Vec<NodeRef>,
}

#[derive(Clone, Debug)]
pub struct CircuitDag {
    num_qubits: usize,
    nodes: Vec<Option<OpNode>>,
    first: Vec<NodeRef>,
    last: Vec<NodeRef>,
    pub global_phase: f64,
}

pub fn build_dag(circuit: &Circuit) -> CircuitDag {
    let n = circuit.num_qubits;
    let mut dag = CircuitDag {
        num_qubits: n,
        nodes: Vec::with_capacity(circuit.gates.len()),
        first: (0..n).map(NodeRef::Output).collect(),
        last: (0..n).map(NodeRef::Input).collect(),
        global_phase: circuit.global_phase,
    };
    for g in &circuit.gates {
        dag.push_back(g.clone());
    }
    dag
}

impl CircuitDag {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gate(&self, id: usize) -> Option<&Gate> {
        self.nodes.get(id).and_then(|n| n.as_ref()).map(|n| &n.gate)
    }

    fn node(&self, id: usize) -> Result<&OpNode> {
        self.nodes.get(id).and_then(|n| n.as_ref()).ok_or(Error::NoSuchNode(id))
    }

    pub fn contains(&self, id: usize) -> bool {
        self.gate(id).is_some()
    }

    /// Ids of live operation nodes, in creation order.
    pub fn node_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().enumerate().filter(|(_, n)| n.is_some()).map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First node on a wire (output sentinel for an idle wire).
    pub fn wire_first(&self, q: usize) -> NodeRef {
        self.first[q]
    }

    pub fn wire_last(&self, q: usize) -> NodeRef {
        self.last[q]
    }

    fn slot(&self, id: usize, qubit: usize) -> Result<usize> {
        let node = self.node(id)?;
        node.gate.qubits.iter().position(|&q| q == qubit).ok_or(Error::NotOnWire { node: id, qubit })
    }

    pub fn wire_neighbor(&self, id: usize, qubit: usize, dir: Direction) -> Result<NodeRef> {
        let s = self.slot(id, qubit)?;
        let node = self.node(id)?;
        Ok(match dir {
            Direction::Pred => node.prev[s],
            Direction::Succ => node.next[s],
        })
    }

    pub fn predecessors(&self, id: usize) -> Result<Vec<NodeRef>> {
        Ok(self.node(id)?.prev.clone())
    }

    pub fn successors(&self, id: usize) -> Result<Vec<NodeRef>> {
        Ok(self.node(id)?.next.clone())
    }

    fn set_link(&mut self, from: NodeRef, to: NodeRef, q: usize) {
        match from {
            NodeRef::Input(_) => self.first[q] = to,
            NodeRef::Op(i) => {
                let n = self.nodes[i].as_mut().expect("live node");
                let s = n.gate.qubits.iter().position(|&x| x == q).expect("on wire");
                n.next[s] = to;
            }
            NodeRef::Output(_) => unreachable!("output sentinel has no successor"),
        }
        match to {
            NodeRef::Output(_) => self.last[q] = from,
            NodeRef::Op(i) => {
                let n = self.nodes[i].as_mut().expect("live node");
                let s = n.gate.qubits.iter().position(|&x| x == q).expect("on wire");
                n.prev[s] = from;
            }
            NodeRef::Input(_) => unreachable!("input sentinel has no predecessor"),
        }
    }

    /// Append a gate at the end of its wires; returns the new node id.
    pub fn push_back(&mut self, gate: Gate) -> usize {
        let id = self.nodes.len();
        let k = gate.qubits.len();
        let qubits = gate.qubits.clone();
        self.nodes.push(Some(OpNode { gate, prev: vec![NodeRef::Input(0); k], next: vec![NodeRef::Output(0); k] }));
        for q in qubits {
            let tail = self.last[q];
            self.set_link(tail, NodeRef::Op(id), q);
            self.set_link(NodeRef::Op(id), NodeRef::Output(q), q);
        }
        id
    }

    /// Remove a node, splicing its wires back together.
    pub fn remove_node(&mut self, id: usize) -> Result<Gate> {
        let node = self.node(id)?.clone();
        for (s, &q) in node.gate.qubits.iter().enumerate() {
            self.set_link(node.prev[s], node.next[s], q);
        }
        self.nodes[id] = None;
        Ok(node.gate)
    }

    /// Nodes in a deterministic topological order: ASAP layer, then lowest qubit.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut depth: Vec<usize> = vec![0; self.nodes.len()];
        let mut indeg: Vec<usize> = vec![0; self.nodes.len()];
        for id in self.node_ids() {
            let n = self.nodes[id].as_ref().unwrap();
            indeg[id] = n.prev.iter().filter(|p| matches!(p, NodeRef::Op(_))).count();
        }
        let mut ready: Vec<usize> = self.node_ids().filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::new();
        while let Some(id) = ready.pop() {
            order.push(id);
            let n = self.nodes[id].as_ref().unwrap();
            for nx in &n.next {
                if let NodeRef::Op(j) = *nx {
                    depth[j] = depth[j].max(depth[id] + 1);
                    indeg[j] -= 1;
                    if indeg[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        order.sort_by_key(|&i| {
            let g = &self.nodes[i].as_ref().unwrap().gate;
            (depth[i], g.qubits.iter().copied().min().unwrap_or(0), i)
        });
        order
    }

    pub fn to_circuit(&self) -> Circuit {
        let mut c = Circuit::new(self.num_qubits);
        c.global_phase = self.global_phase;
        for id in self.topological_order() {
            c.gates.push(self.nodes[id].as_ref().unwrap().gate.clone());
        }
        c
    }

    /// True when no path leaves `region` and re-enters it.
    pub fn is_convex(&self, region: &[usize]) -> bool {
        let inside: HashSet<usize> = region.iter().copied().collect();
        let mut stack: Vec<usize> = Vec::new();
        let mut seen: HashSet<usize> = HashSet::new();
        for &id in region {
            if let Some(n) = self.nodes.get(id).and_then(|n| n.as_ref()) {
                for nx in &n.next {
                    if let NodeRef::Op(j) = *nx {
                        if !inside.contains(&j) && seen.insert(j) {
                            stack.push(j);
                        }
                    }
                }
            }
        }
        while let Some(id) = stack.pop() {
            for nx in &self.nodes[id].as_ref().unwrap().next {
                if let NodeRef::Op(j) = *nx {
                    if inside.contains(&j) {
                        return false;
                    }
                    if seen.insert(j) {
                        stack.push(j);
                    }
                }
            }
        }
        true
    }

    /// Replace a convex set of nodes by `replacement`, whose qubit `i` maps to
    /// `qubit_map[i]`. Every qubit the replacement uses must be touched by the
    /// region. Returns the ids of the inserted nodes, in replacement order.
    pub fn replace_region(&mut self, region: &[usize], replacement: &Circuit, qubit_map: &[usize]) -> Result<Vec<usize>> {
        if qubit_map.len() != replacement.num_qubits {
            return Err(Error::BadQubitMap);
        }
        let inside: BTreeSet<usize> = region.iter().copied().collect();
        for &id in &inside {
            self.node(id)?;
        }
        debug_assert!(
            inside.len() == 1 || wires_of(self, &inside).len() == 1 || self.is_convex(region),
            "replace_region needs a convex region"
        );
        // Boundary links per wire.
        let mut wires: BTreeSet<usize> = BTreeSet::new();
        for &id in &inside {
            wires.extend(self.nodes[id].as_ref().unwrap().gate.qubits.iter().copied());
        }
        for g in &replacement.gates {
            for &q in &g.qubits {
                if !wires.contains(&qubit_map[q]) {
                    return Err(Error::BadQubitMap);
                }
            }
        }
        let mut before: Vec<(usize, NodeRef)> = Vec::new();
        let mut after: Vec<(usize, NodeRef)> = Vec::new();
        for &q in &wires {
            let on_wire: Vec<usize> =
                inside.iter().copied().filter(|&id| self.nodes[id].as_ref().unwrap().gate.qubits.contains(&q)).collect();
            let mut head = None;
            let mut tail = None;
            for &id in &on_wire {
                let p = self.wire_neighbor(id, q, Direction::Pred)?;
                if !matches!(p, NodeRef::Op(j) if inside.contains(&j)) {
                    if head.is_some() {
                        return Err(Error::InvalidGate(format!("region is not contiguous on wire {q}")));
                    }
                    head = Some(p);
                }
                let s = self.wire_neighbor(id, q, Direction::Succ)?;
                if !matches!(s, NodeRef::Op(j) if inside.contains(&j)) {
                    tail = Some(s);
                }
            }
            before.push((q, head.expect("region touches wire")));
            after.push((q, tail.expect("region touches wire")));
        }
        for &id in &inside {
            self.nodes[id] = None;
        }
        let mut cursor: Vec<(usize, NodeRef)> = before;
        let mut created = Vec::with_capacity(replacement.gates.len());
        for g in &replacement.gates {
            let g = g.remapped(qubit_map);
            let id = self.nodes.len();
            let k = g.qubits.len();
            let qs = g.qubits.clone();
            self.nodes.push(Some(OpNode { gate: g, prev: vec![NodeRef::Input(0); k], next: vec![NodeRef::Output(0); k] }));
            for q in qs {
                let cur = cursor.iter_mut().find(|(w, _)| *w == q).unwrap();
                let from = cur.1;
                self.set_link(from, NodeRef::Op(id), q);
                cur.1 = NodeRef::Op(id);
            }
            created.push(id);
        }
        for (q, tail) in after {
            let from = cursor.iter().find(|(w, _)| *w == q).unwrap().1;
            self.set_link(from, tail, q);
        }
        self.global_phase += replacement.global_phase;
        Ok(created)
    }

    /// Replace one node by a circuit; replacement qubit `i` lands on
    /// `qubit_map[i]`, which must be a bijection onto the node's qubits.
    /// Replacement gates inherit the node's tag.
    pub fn substitute_node(&mut self, id: usize, replacement: &Circuit, qubit_map: &[usize]) -> Result<Vec<usize>> {
        let node = self.node(id)?;
        let qs = &node.gate.qubits;
        let tag = node.gate.tag;
        let mut sorted_map = qubit_map.to_vec();
        sorted_map.sort_unstable();
        sorted_map.dedup();
        let mut sorted_q = qs.clone();
        sorted_q.sort_unstable();
        if sorted_map != sorted_q || qubit_map.len() != qs.len() || replacement.num_qubits != qs.len() {
            return Err(Error::BadQubitMap);
        }
        let mut rep = replacement.clone();
        for g in &mut rep.gates {
            g.tag = tag;
        }
        self.replace_region(&[id], &rep, qubit_map)
    }

    /// Number of live nodes of a given kind.
    pub fn count(&self, kind: GateKind) -> usize {
        self.node_ids().filter(|&i| self.gate(i).unwrap().kind == kind).count()
    }

    /// Check the wire links; used by tests.
    pub fn check_integrity(&self) -> bool {
        for q in 0..self.num_qubits {
            let mut prev = NodeRef::Input(q);
            let mut cur = self.first[q];
            let mut steps = 0;
            while let NodeRef::Op(id) = cur {
                let Ok(p) = self.wire_neighbor(id, q, Direction::Pred) else { return false };
                if p != prev {
                    return false;
                }
                prev = cur;
                cur = self.wire_neighbor(id, q, Direction::Succ).unwrap();
                steps += 1;
                if steps > self.nodes.len() {
                    return false;
                }
            }
            if cur != NodeRef::Output(q) || self.last[q] != prev {
                return false;
            }
        }
        true
    }
}

fn wires_of(dag: &CircuitDag, ids: &BTreeSet<usize>) -> BTreeSet<usize> {
    ids.iter().flat_map(|&i| dag.nodes[i].as_ref().unwrap().gate.qubits.iter().copied()).collect()
}
