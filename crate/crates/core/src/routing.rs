//! Layout and swap insertion that keeps Toffolis whole: afterwards every
//! two-qubit gate sits on an edge and every ccx on a connected triple.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind, Tag};
use crate::error::{Error, Result};
use crate::topology::CouplingMap;
use crate::unitary::{circuit_unitary, phase_distance, sampled_phase_distance};

/// Bijection between virtual qubits and physical qubits. Virtual indices at
/// or beyond the program width are idle ancillas.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    l2p: Vec<usize>,
    p2l: Vec<usize>,
    /// Physical swaps applied so far.
    pub history: Vec<(usize, usize)>,
}

impl Layout {
    pub fn identity(n: usize) -> Layout {
        Layout { l2p: (0..n).collect(), p2l: (0..n).collect(), history: Vec::new() }
    }

    /// Complete a partial placement (`l2p[l]` for the first logical qubits)
    /// by assigning the remaining physical qubits in increasing order.
    pub fn from_partial(placed: &[usize], num_physical: usize) -> Result<Layout> {
        let mut used = vec![false; num_physical];
        for &p in placed {
            if p >= num_physical || used[p] {
                return Err(Error::BadQubitMap);
            }
            used[p] = true;
        }
        let mut l2p = placed.to_vec();
        l2p.extend((0..num_physical).filter(|&p| !used[p]));
        let mut p2l = vec![0; num_physical];
        for (l, &p) in l2p.iter().enumerate() {
            p2l[p] = l;
        }
        Ok(Layout { l2p, p2l, history: Vec::new() })
    }

    pub fn physical(&self, l: usize) -> usize {
        self.l2p[l]
    }

    pub fn logical(&self, p: usize) -> usize {
        self.p2l[p]
    }

    pub fn as_vec(&self) -> &[usize] {
        &self.l2p
    }

    pub fn swap_physical(&mut self, a: usize, b: usize) {
        let (la, lb) = (self.p2l[a], self.p2l[b]);
        self.p2l.swap(a, b);
        self.l2p[la] = b;
        self.l2p[lb] = a;
        self.history.push((a, b));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoutedCircuit {
    /// Circuit over all physical qubits.
    pub circuit: Circuit,
    /// Virtual → physical placement before the first gate.
    pub initial_layout: Vec<usize>,
    /// Virtual → physical placement after the last gate.
    pub final_layout: Vec<usize>,
    /// Program width.
    pub num_logical: usize,
    pub num_swaps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RouteOptions {
    pub seed: u64,
    /// Forced placement of the logical qubits.
    pub initial_layout: Option<Vec<usize>>,
}

/// Bring a circuit to {1q, 2q, ccx}. Every supported gate already is, so
/// this only validates and copies.
pub fn decompose_to_trios_level(c: &Circuit) -> Result<Circuit> {
    c.validate()?;
    for g in &c.gates {
        if g.kind.arity().is_some_and(|a| a > 3) {
            return Err(Error::UnsupportedGate(g.kind.to_string()));
        }
    }
    Ok(c.clone())
}

fn executable(g: &Gate, map: &CouplingMap, lay: &Layout) -> bool {
    let p: Vec<usize> = g.qubits.iter().map(|&q| lay.physical(q)).collect();
    match g.kind {
        GateKind::Ccx => map.topo_tag_of_triple(p[0], p[1], p[2]).is_ok(),
        GateKind::Barrier => true,
        _ if p.len() == 2 => map.has_edge(p[0], p[1]),
        _ => true,
    }
}

fn greedy_layout(c: &Circuit, map: &CouplingMap, seed: u64) -> Layout {
    let n = c.num_qubits;
    let mut w = vec![vec![0usize; n]; n];
    for g in &c.gates {
        if g.kind == GateKind::Barrier {
            continue;
        }
        for (i, &a) in g.qubits.iter().enumerate() {
            for &b in &g.qubits[i + 1..] {
                w[a][b] += 1;
                w[b][a] += 1;
            }
        }
    }
    let total: Vec<usize> = w.iter().map(|r| r.iter().sum()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.sort_by_key(|&l| std::cmp::Reverse(total[l]));

    let np = map.num_physical();
    let mut pos: Vec<Option<usize>> = vec![None; n];
    let mut taken = vec![false; np];
    let mut placed = Vec::new();
    let hub = (0..np).max_by_key(|&p| (map.degree(p), std::cmp::Reverse(p))).unwrap();
    while placed.len() < n {
        // Next: the unplaced qubit most tied to the placed ones.
        let l = *order
            .iter()
            .filter(|&&l| pos[l].is_none())
            .max_by_key(|&&l| {
                let tie: usize = placed.iter().map(|&r: &usize| w[l][r]).sum();
                (tie, std::cmp::Reverse(order.iter().position(|&x| x == l)))
            })
            .unwrap();
        let p = if placed.is_empty() {
            hub
        } else {
            (0..np)
                .filter(|&p| !taken[p])
                .min_by_key(|&p| {
                    let cost: usize = placed.iter().map(|&r: &usize| w[l][r] * map.distance(p, pos[r].unwrap())).sum();
                    let near = placed.iter().map(|&r: &usize| map.distance(p, pos[r].unwrap())).min().unwrap();
                    (cost, near, p)
                })
                .unwrap()
        };
        pos[l] = Some(p);
        taken[p] = true;
        placed.push(l);
    }
    let l2p: Vec<usize> = pos.into_iter().map(Option::unwrap).collect();
    Layout::from_partial(&l2p, np).expect("distinct placement")
}

struct Router<'a> {
    map: &'a CouplingMap,
    lay: Layout,
    out: Circuit,
    swaps: usize,
}

impl Router<'_> {
    fn swap(&mut self, a: usize, b: usize) {
        self.out.gates.push(Gate::swap(a, b).with_tag(Tag::Routing));
        self.lay.swap_physical(a, b);
        self.swaps += 1;
    }

    /// Move logical `l` along `path` (starting at its position).
    fn walk(&mut self, path: &[usize]) {
        for w in path.windows(2) {
            self.swap(w[0], w[1]);
        }
    }

    fn route_pair(&mut self, a: usize, b: usize) {
        let (mover, other) = (a.min(b), a.max(b));
        let pm = self.lay.physical(mover);
        let po = self.lay.physical(other);
        let path = self.map.shortest_path(pm, po);
        self.walk(&path[..path.len() - 1]);
    }

    fn route_triple(&mut self, qs: [usize; 3]) -> Result<()> {
        let map = self.map;
        let pos = |lay: &Layout| qs.map(|q| lay.physical(q));
        let p = pos(&self.lay);
        let mut centers: Vec<usize> = (0..map.num_physical()).filter(|&v| map.degree(v) >= 2).collect();
        centers.sort_by_key(|&v| (p.iter().map(|&x| map.distance(v, x)).sum::<usize>(), v));
        for v in centers {
            let mut trial = Router { map, lay: self.lay.clone(), out: Circuit::new(self.out.num_qubits), swaps: 0 };
            if trial.gather(qs, v) {
                self.out.gates.extend(trial.out.gates);
                self.swaps += trial.swaps;
                self.lay = trial.lay;
                return Ok(());
            }
        }
        Err(Error::Routing(format!("no connected triple reachable for ccx on {qs:?}")))
    }

    /// Put the qubit nearest `v` on it and the other two on neighbors of `v`.
    fn gather(&mut self, qs: [usize; 3], v: usize) -> bool {
        let map = self.map;
        let mut by_dist = qs;
        by_dist.sort_by_key(|&q| map.distance(self.lay.physical(q), v));
        let c = by_dist[0];
        let path = map.shortest_path(self.lay.physical(c), v);
        self.walk(&path);
        let mut fixed = vec![v];
        for &q in &by_dist[1..] {
            let from = self.lay.physical(q);
            if map.has_edge(from, v) {
                fixed.push(from);
                continue;
            }
            match bfs_to_neighbor(map, from, v, &fixed) {
                Some(path) => {
                    self.walk(&path);
                    fixed.push(*path.last().unwrap());
                }
                None => return false,
            }
        }
        true
    }
}

/// Shortest path from `from` to a neighbor of `v`, never entering `blocked`.
fn bfs_to_neighbor(map: &CouplingMap, from: usize, v: usize, blocked: &[usize]) -> Option<Vec<usize>> {
    let n = map.num_physical();
    let mut prev = vec![usize::MAX; n];
    prev[from] = from;
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        if u != from && map.has_edge(u, v) {
            let mut path = vec![u];
            let mut x = u;
            while x != from {
                x = prev[x];
                path.push(x);
            }
            path.reverse();
            return Some(path);
        }
        for &w in map.neighbors(u) {
            if prev[w] == usize::MAX && !blocked.contains(&w) {
                prev[w] = u;
                q.push_back(w);
            }
        }
    }
    None
}

/// Place and route. The identity placement is kept when it already makes
/// every gate executable; otherwise a greedy placement seeded by `seed`.
pub fn route(c: &Circuit, map: &CouplingMap, opts: &RouteOptions) -> Result<RoutedCircuit> {
    let n = c.num_qubits;
    let np = map.num_physical();
    if n > np {
        return Err(Error::TooWide(n, np));
    }
    let c = decompose_to_trios_level(c)?;
    let lay = match &opts.initial_layout {
        Some(l) if l.len() == n => Layout::from_partial(l, np)?,
        Some(_) => return Err(Error::BadQubitMap),
        None => {
            let id = Layout::identity(np);
            if c.gates.iter().all(|g| executable(g, map, &id)) {
                id
            } else {
                greedy_layout(&c, map, opts.seed)
            }
        }
    };
    let initial_layout = lay.as_vec().to_vec();
    let mut out = Circuit::new(np);
    out.global_phase = c.global_phase;
    let mut r = Router { map, lay, out, swaps: 0 };
    for g in &c.gates {
        if !executable(g, map, &r.lay) {
            match g.kind {
                GateKind::Ccx => r.route_triple([g.qubits[0], g.qubits[1], g.qubits[2]])?,
                _ => r.route_pair(g.qubits[0], g.qubits[1]),
            }
            debug_assert!(executable(g, map, &r.lay));
        }
        let phys: Vec<usize> = (0..n).map(|l| r.lay.physical(l)).collect();
        r.out.gates.push(g.remapped(&phys));
    }
    log::debug!("routing inserted {} swaps", r.swaps);
    Ok(RoutedCircuit { circuit: r.out, initial_layout, final_layout: r.lay.as_vec().to_vec(), num_logical: n, num_swaps: r.swaps })
}

/// Phase-invariant distance between a physical circuit and the logical
/// input, given the placements before and after. Only physical qubits that
/// are touched or hold a program qubit take part.
pub fn equivalence_distance(input: &Circuit, physical: &Circuit, initial: &[usize], final_: &[usize]) -> Result<f64> {
    let np = initial.len();
    if physical.num_qubits != np || final_.len() != np {
        return Err(Error::BadQubitMap);
    }
    let mut keep = vec![false; np];
    for g in &physical.gates {
        for &q in &g.qubits {
            keep[q] = true;
        }
    }
    for l in 0..input.num_qubits {
        keep[initial[l]] = true;
        keep[final_[l]] = true;
    }
    // Virtual qubits that moved must be tracked as well.
    for l in 0..np {
        if initial[l] != final_[l] {
            keep[initial[l]] = true;
            keep[final_[l]] = true;
        }
    }
    let touched: Vec<usize> = (0..np).filter(|&p| keep[p]).collect();
    let mut idx = vec![usize::MAX; np];
    for (i, &p) in touched.iter().enumerate() {
        idx[p] = i;
    }
    let k = touched.len();
    let mut lhs = Circuit::new(k);
    lhs.global_phase = physical.global_phase;
    lhs.gates = physical.gates.iter().map(|g| g.remapped(&idx)).collect();

    let mut rhs = Circuit::new(k);
    rhs.global_phase = input.global_phase;
    let place: Vec<usize> = (0..input.num_qubits).map(|l| idx[initial[l]]).collect();
    rhs.gates = input.gates.iter().map(|g| g.remapped(&place)).collect();
    // Swap network carrying the content of initial[l] to final[l].
    let mut at: Vec<usize> = (0..k).collect(); // compressed slot -> virtual marker
    let mut want = vec![usize::MAX; k];
    for l in 0..np {
        if keep[initial[l]] {
            at[idx[initial[l]]] = l;
            want[idx[final_[l]]] = l;
        }
    }
    for s in 0..k {
        if at[s] != want[s] {
            let j = (s + 1..k).find(|&j| at[j] == want[s]).ok_or(Error::BadQubitMap)?;
            rhs.gates.push(Gate::swap(s, j));
            at.swap(s, j);
        }
    }
    if k <= DENSE_LIMIT {
        phase_distance(&circuit_unitary(&lhs)?, &circuit_unitary(&rhs)?)
    } else {
        sampled_phase_distance(&lhs, &rhs, 4, 0x7e57)
    }
}

/// Widest compressed check done with dense unitaries; wider ones sample states.
const DENSE_LIMIT: usize = 8;
