//! Gate alphabet and the flat circuit representation.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    U3,
    Rz,
    Sx,
    X,
    H,
    T,
    Tdg,
    Cx,
    Swap,
    Ccx,
    Rzx,
    Barrier,
}

impl GateKind {
    pub const ALL: [GateKind; 12] = [
        GateKind::U3,
        GateKind::Rz,
        GateKind::Sx,
        GateKind::X,
        GateKind::H,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Cx,
        GateKind::Swap,
        GateKind::Ccx,
        GateKind::Rzx,
        GateKind::Barrier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::U3 => "u3",
            GateKind::Rz => "rz",
            GateKind::Sx => "sx",
            GateKind::X => "x",
            GateKind::H => "h",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Cx => "cx",
            GateKind::Swap => "swap",
            GateKind::Ccx => "ccx",
            GateKind::Rzx => "rzx",
            GateKind::Barrier => "barrier",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// Number of qubits, or `None` for barriers (any width).
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::Cx | GateKind::Swap | GateKind::Rzx => Some(2),
            GateKind::Ccx => Some(3),
            GateKind::Barrier => None,
            _ => Some(1),
        }
    }

    pub fn num_params(self) -> usize {
        match self {
            GateKind::U3 => 3,
            GateKind::Rz | GateKind::Rzx => 1,
            _ => 0,
        }
    }

    pub fn is_single_qubit(self) -> bool {
        self.arity() == Some(1)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a gate came from: the user's program or the router.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    #[default]
    Program,
    Routing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default)]
    pub tag: Tag,
}

impl Gate {
    /// Checked constructor.
    pub fn new(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Result<Gate> {
        let g = Gate { kind, qubits, params, tag: Tag::Program };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.kind.arity() {
            if self.qubits.len() != a {
                return Err(Error::InvalidGate(format!("{} expects {} qubits, got {}", self.kind, a, self.qubits.len())));
            }
        } else if self.qubits.is_empty() {
            return Err(Error::InvalidGate("barrier without qubits".into()));
        }
        for (i, q) in self.qubits.iter().enumerate() {
            if self.qubits[..i].contains(q) {
                return Err(Error::InvalidGate(format!("{} repeats qubit {}", self.kind, q)));
            }
        }
        if self.params.len() != self.kind.num_params() {
            return Err(Error::InvalidGate(format!(
                "{} expects {} parameters, got {}",
                self.kind,
                self.kind.num_params(),
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGate(format!("{} has a non-finite angle", self.kind)));
        }
        Ok(())
    }

    fn raw(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Gate {
        let g = Gate { kind, qubits, params, tag: Tag::Program };
        if let Err(e) = g.validate() {
            panic!("{e}");
        }
        g
    }

    pub fn u3(q: usize, theta: f64, phi: f64, lambda: f64) -> Gate {
        Gate::raw(GateKind::U3, vec![q], vec![theta, phi, lambda])
    }
    pub fn rz(q: usize, theta: f64) -> Gate {
        Gate::raw(GateKind::Rz, vec![q], vec![theta])
    }
    pub fn sx(q: usize) -> Gate {
        Gate::raw(GateKind::Sx, vec![q], vec![])
    }
    pub fn x(q: usize) -> Gate {
        Gate::raw(GateKind::X, vec![q], vec![])
    }
    pub fn h(q: usize) -> Gate {
        Gate::raw(GateKind::H, vec![q], vec![])
    }
    pub fn t(q: usize) -> Gate {
        Gate::raw(GateKind::T, vec![q], vec![])
    }
    pub fn tdg(q: usize) -> Gate {
        Gate::raw(GateKind::Tdg, vec![q], vec![])
    }
    pub fn cx(c: usize, t: usize) -> Gate {
        Gate::raw(GateKind::Cx, vec![c, t], vec![])
    }
    pub fn swap(a: usize, b: usize) -> Gate {
        Gate::raw(GateKind::Swap, vec![a, b], vec![])
    }
    pub fn ccx(c0: usize, c1: usize, t: usize) -> Gate {
        Gate::raw(GateKind::Ccx, vec![c0, c1, t], vec![])
    }
    pub fn rzx(drive: usize, other: usize, theta: f64) -> Gate {
        Gate::raw(GateKind::Rzx, vec![drive, other], vec![theta])
    }
    pub fn barrier(qubits: Vec<usize>) -> Gate {
        Gate::raw(GateKind::Barrier, qubits, vec![])
    }

    pub fn with_tag(mut self, tag: Tag) -> Gate {
        self.tag = tag;
        self
    }

    pub fn is_two_qubit(&self) -> bool {
        self.kind.arity() == Some(2)
    }

    /// Inverse gate plus the global phase that must be added so that
    /// `inverse · self` is exactly the identity.
    pub fn inverse(&self) -> (Gate, f64) {
        let mut g = self.clone();
        let mut phase = 0.0;
        match self.kind {
            GateKind::U3 => {
                let (t, p, l) = (self.params[0], self.params[1], self.params[2]);
                g.params = vec![-t, -l, -p];
            }
            GateKind::Rz | GateKind::Rzx => g.params = vec![-self.params[0]],
            GateKind::T => g.kind = GateKind::Tdg,
            GateKind::Tdg => g.kind = GateKind::T,
            GateKind::Sx => {
                // sx = e^{iπ/4} U3(π/2, −π/2, π/2)
                g.kind = GateKind::U3;
                g.params = vec![-FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2];
                phase = -FRAC_PI_4;
            }
            GateKind::X | GateKind::H | GateKind::Cx | GateKind::Swap | GateKind::Ccx | GateKind::Barrier => {}
        }
        (g, phase)
    }

    /// Same gate with qubits relabeled through `map` (old index -> new index).
    pub fn remapped(&self, map: &[usize]) -> Gate {
        let mut g = self.clone();
        g.qubits = self.qubits.iter().map(|&q| map[q]).collect();
        g
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| format!("{p:.6}")).collect();
            write!(f, "({})", ps.join(","))?;
        }
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        write!(f, " {}", qs.join(","))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<Gate>,
    #[serde(default)]
    pub global_phase: f64,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Circuit {
        Circuit { num_qubits, gates: Vec::new(), global_phase: 0.0 }
    }

    pub fn from_gates(num_qubits: usize, gates: Vec<Gate>) -> Result<Circuit> {
        let mut c = Circuit::new(num_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate()?;
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.num_qubits) {
            return Err(Error::QubitOutOfRange { index: q, num_qubits: self.num_qubits });
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            g.validate()?;
            if let Some(&q) = g.qubits.iter().find(|&&q| q >= self.num_qubits) {
                return Err(Error::QubitOutOfRange { index: q, num_qubits: self.num_qubits });
            }
        }
        if !self.global_phase.is_finite() {
            return Err(Error::InvalidGate("non-finite global phase".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Exact inverse, including the global phase.
    pub fn inverse(&self) -> Circuit {
        let mut out = Circuit::new(self.num_qubits);
        out.global_phase = -self.global_phase;
        for g in self.gates.iter().rev() {
            let (ig, ph) = g.inverse();
            out.global_phase += ph;
            out.gates.push(ig);
        }
        out
    }

    /// Append `other`'s gates (same width) and phase.
    pub fn extend(&mut self, other: &Circuit) {
        assert_eq!(self.num_qubits, other.num_qubits);
        self.gates.extend(other.gates.iter().cloned());
        self.global_phase += other.global_phase;
    }

    pub fn gate_counts(&self) -> GateCounts {
        gate_counts(self)
    }

    /// CNOT-equivalent two-qubit cost: each cx counts 1, each swap 3.
    pub fn cnot_cost(&self) -> usize {
        self.gates
            .iter()
            .map(|g| match g.kind {
                GateKind::Cx => 1,
                GateKind::Swap => 3,
                _ => 0,
            })
            .sum()
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }
}

/// Gate multiset, overall and split by provenance tag.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GateCounts {
    pub total: BTreeMap<GateKind, usize>,
    pub program: BTreeMap<GateKind, usize>,
    pub routing: BTreeMap<GateKind, usize>,
}

impl GateCounts {
    pub fn get(&self, kind: GateKind) -> usize {
        self.total.get(&kind).copied().unwrap_or(0)
    }
    pub fn get_tagged(&self, kind: GateKind, tag: Tag) -> usize {
        let m = match tag {
            Tag::Program => &self.program,
            Tag::Routing => &self.routing,
        };
        m.get(&kind).copied().unwrap_or(0)
    }
}

pub fn gate_counts(circuit: &Circuit) -> GateCounts {
    let mut c = GateCounts::default();
    for g in &circuit.gates {
        *c.total.entry(g.kind).or_default() += 1;
        let m = match g.tag {
            Tag::Program => &mut c.program,
            Tag::Routing => &mut c.routing,
        };
        *m.entry(g.kind).or_default() += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_and_params_checked() {
        assert!(Gate::new(GateKind::Cx, vec![0], vec![]).is_err());
        assert!(Gate::new(GateKind::Cx, vec![1, 1], vec![]).is_err());
        assert!(Gate::new(GateKind::U3, vec![0], vec![0.0, 1.0]).is_err());
        assert!(Gate::new(GateKind::Rz, vec![0], vec![f64::NAN]).is_err());
        assert!(Gate::new(GateKind::Barrier, vec![0, 1, 2], vec![]).is_ok());
    }

    #[test]
    fn out_of_range_rejected() {
        let mut c = Circuit::new(2);
        assert!(matches!(c.push(Gate::cx(0, 2)), Err(Error::QubitOutOfRange { index: 2, .. })));
    }

    #[test]
    fn counts_split_by_tag() {
        let c = Circuit::from_gates(3, vec![Gate::cx(0, 1), Gate::swap(1, 2).with_tag(Tag::Routing), Gate::cx(1, 2)]).unwrap();
        let k = c.gate_counts();
        assert_eq!(k.get(GateKind::Cx), 2);
        assert_eq!(k.get_tagged(GateKind::Swap, Tag::Routing), 1);
        assert_eq!(k.get_tagged(GateKind::Swap, Tag::Program), 0);
        assert_eq!(c.cnot_cost(), 5);
        assert_eq!(Circuit::new(4).gate_counts(), GateCounts::default());
    }

    #[test]
    fn names_round_trip() {
        for k in GateKind::ALL {
            assert_eq!(GateKind::from_name(k.name()), Some(k));
        }
        assert_eq!(GateKind::from_name("cz"), None);
    }
}
