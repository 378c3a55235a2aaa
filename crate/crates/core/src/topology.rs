//! Coupling maps, three-qubit connectivity classes and CR orientation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HEAVY_HEX_27: &str = include_str!("../data/heavy_hex_27.json");

/// Connectivity of three physical qubits: a triangle, or a path whose middle
/// is logical position `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TopoTag {
    F,
    L0,
    L1,
    L2,
}

impl TopoTag {
    pub const ALL: [TopoTag; 4] = [TopoTag::F, TopoTag::L0, TopoTag::L1, TopoTag::L2];

    pub fn linear(center: usize) -> TopoTag {
        match center {
            0 => TopoTag::L0,
            1 => TopoTag::L1,
            2 => TopoTag::L2,
            _ => panic!("center position {center} out of range"),
        }
    }

    /// Middle position of a path class.
    pub fn center(self) -> Option<usize> {
        match self {
            TopoTag::F => None,
            TopoTag::L0 => Some(0),
            TopoTag::L1 => Some(1),
            TopoTag::L2 => Some(2),
        }
    }

    /// Tag after relabeling logical positions through `perm` (old -> new).
    pub fn relabel(self, perm: &[usize; 3]) -> TopoTag {
        match self.center() {
            None => TopoTag::F,
            Some(k) => TopoTag::linear(perm[k]),
        }
    }

    /// Whether a two-qubit interaction between positions `a` and `b` is allowed.
    pub fn allows(self, a: usize, b: usize) -> bool {
        match self.center() {
            None => true,
            Some(k) => a == k || b == k,
        }
    }
}

impl fmt::Display for TopoTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TopoTag::F => "F",
            TopoTag::L0 => "L0",
            TopoTag::L1 => "L1",
            TopoTag::L2 => "L2",
        };
        f.write_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct MapFile {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orientations: Option<Vec<[usize; 2]>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMap {
    num_physical: usize,
    edges: BTreeSet<(usize, usize)>,
    /// Unordered edge (lo, hi) -> (driver, target).
    orientation: BTreeMap<(usize, usize), (usize, usize)>,
    adj: Vec<Vec<usize>>,
    dist: Vec<Vec<usize>>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl CouplingMap {
    /// Build and validate a map. Edges without an explicit orientation are
    /// driven from their lower index.
    pub fn new(num_physical: usize, edges: &[(usize, usize)], orientations: Option<&[(usize, usize)]>) -> Result<CouplingMap> {
        if num_physical == 0 {
            return Err(Error::Coupling("no qubits".into()));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b || a >= num_physical || b >= num_physical {
                return Err(Error::Coupling(format!("bad edge ({a}, {b})")));
            }
            set.insert(key(a, b));
        }
        let mut orientation: BTreeMap<_, _> = set.iter().map(|&e| (e, e)).collect();
        for &(d, t) in orientations.unwrap_or(&[]) {
            let k = key(d, t);
            if !set.contains(&k) || d == t {
                return Err(Error::Coupling(format!("orientation ({d}, {t}) is not an edge")));
            }
            orientation.insert(k, (d, t));
        }
        let mut adj = vec![Vec::new(); num_physical];
        for &(a, b) in &set {
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        let dist: Vec<Vec<usize>> = (0..num_physical).map(|s| bfs(&adj, s)).collect();
        if dist[0].contains(&usize::MAX) {
            return Err(Error::Coupling("graph is not connected".into()));
        }
        Ok(CouplingMap { num_physical, edges: set, orientation, adj, dist })
    }

    pub fn from_json(text: &str) -> Result<CouplingMap> {
        let f: MapFile = serde_json::from_str(text)?;
        let edges: Vec<_> = f.edges.iter().map(|e| (e[0], e[1])).collect();
        let ors: Option<Vec<_>> = f.orientations.map(|v| v.iter().map(|e| (e[0], e[1])).collect());
        CouplingMap::new(f.n, &edges, ors.as_deref())
    }

    pub fn to_json(&self) -> String {
        let f = MapFile {
            n: self.num_physical,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            orientations: Some(self.orientation.values().map(|&(a, b)| [a, b]).collect()),
        };
        serde_json::to_string(&f).expect("serializable")
    }

    /// `line-n`, `ring-n`, `full-n` or `heavy-hex-27`.
    pub fn builtin(name: &str) -> Result<CouplingMap> {
        if name == "heavy-hex-27" {
            return CouplingMap::from_json(HEAVY_HEX_27);
        }
        let unknown = || Error::Coupling(format!("unknown builtin map `{name}`"));
        let (kind, n) = name.rsplit_once('-').ok_or_else(unknown)?;
        let n: usize = n.parse().map_err(|_| unknown())?;
        let edges: Vec<(usize, usize)> = match kind {
            "line" if n >= 1 => (1..n).map(|i| (i - 1, i)).collect(),
            "ring" if n >= 3 => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            "full" if n >= 1 => (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect(),
            _ => return Err(unknown()),
        };
        CouplingMap::new(n, &edges, None)
    }

    /// A builtin name or a path to a JSON file.
    pub fn load(source: &str) -> Result<CouplingMap> {
        match CouplingMap::builtin(source) {
            Ok(m) => Ok(m),
            Err(_) if Path::new(source).exists() => CouplingMap::from_json(&std::fs::read_to_string(source)?),
            Err(e) => Err(e),
        }
    }

    pub fn num_physical(&self) -> usize {
        self.num_physical
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&key(a, b))
    }

    pub fn neighbors(&self, q: usize) -> &[usize] {
        &self.adj[q]
    }

    pub fn degree(&self, q: usize) -> usize {
        self.adj[q].len()
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        self.dist[a][b]
    }

    /// Shortest path from `a` to `b`, inclusive; ties go to the lowest index.
    pub fn shortest_path(&self, a: usize, b: usize) -> Vec<usize> {
        let mut path = vec![a];
        let mut cur = a;
        while cur != b {
            let d = self.dist[cur][b];
            cur = *self.adj[cur].iter().find(|&&n| self.dist[n][b] + 1 == d).expect("connected");
            path.push(cur);
        }
        path
    }

    /// Connectivity class of the physical triple holding logical positions 0, 1, 2.
    pub fn topo_tag_of_triple(&self, q0: usize, q1: usize, q2: usize) -> Result<TopoTag> {
        if q0 == q1 || q1 == q2 || q0 == q2 {
            return Err(Error::InvalidGate(format!("triple ({q0}, {q1}, {q2}) repeats a qubit")));
        }
        let (e01, e12, e02) = (self.has_edge(q0, q1), self.has_edge(q1, q2), self.has_edge(q0, q2));
        match (e01, e12, e02) {
            (true, true, true) => Ok(TopoTag::F),
            (true, false, true) => Ok(TopoTag::L0),
            (true, true, false) => Ok(TopoTag::L1),
            (false, true, true) => Ok(TopoTag::L2),
            _ => Err(Error::TripleNotConnected(q0, q1, q2)),
        }
    }

    /// Native (driver, target) order of edge {a, b} and whether `(a, b)` matches it.
    pub fn orientation_of(&self, a: usize, b: usize) -> Result<((usize, usize), bool)> {
        let o = *self.orientation.get(&key(a, b)).ok_or(Error::NotAnEdge(a, b))?;
        Ok((o, o == (a, b)))
    }
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<usize> {
    let mut d = vec![usize::MAX; adj.len()];
    d[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v] == usize::MAX {
                d[v] = d[u] + 1;
                q.push_back(v);
            }
        }
    }
    d
}
