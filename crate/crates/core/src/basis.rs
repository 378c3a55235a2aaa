//! Toffoli decomposition variants: tags, generation rules, and
//! context-aware selection.
//!
//! Templates act on logical positions 0 and 1 (controls) and 2 (target).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::dag::{build_dag, CircuitDag, Direction, NodeRef};
use crate::error::{Error, Result};
use crate::peephole::{local_optimize, PeepholeOptions};
use crate::topology::{CouplingMap, TopoTag};
use crate::unitary::{circuit_unitary, gate_unitary, phase_distance};

/// Ordered (control, target) positions of a boundary CNOT, written "ct".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Pair(pub u8, pub u8);

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0, self.1)
    }
}

impl From<Pair> for String {
    fn from(p: Pair) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Pair {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Pair, String> {
        let b = s.as_bytes();
        let ok = b.len() == 2 && b.iter().all(|c| (b'0'..=b'2').contains(c)) && b[0] != b[1];
        if ok {
            Ok(Pair(b[0] - b'0', b[1] - b'0'))
        } else {
            Err(format!("bad qubit pair `{s}`"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptTag {
    /// Original orientation.
    O,
    /// Inverted (gates reversed and individually inverted).
    I,
}

impl OptTag {
    fn flip(self) -> OptTag {
        match self {
            OptTag::O => OptTag::I,
            OptTag::I => OptTag::O,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisVariantTag {
    pub pre_tag: Pair,
    pub suc_tag: Pair,
    pub design_tag: u32,
    pub topo_tag: TopoTag,
    pub opt_tag: OptTag,
}

impl fmt::Display for BasisVariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {}, {:?})", self.pre_tag, self.suc_tag, self.design_tag, self.topo_tag, self.opt_tag)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisVariant {
    pub tag: BasisVariantTag,
    pub template: Circuit,
}

/// Six-CNOT fully connected template, as usually drawn.
pub fn canonical_template() -> Circuit {
    let g = vec![
        Gate::h(2),
        Gate::cx(1, 2),
        Gate::tdg(2),
        Gate::cx(0, 2),
        Gate::t(2),
        Gate::cx(1, 2),
        Gate::tdg(2),
        Gate::cx(0, 2),
        Gate::t(1),
        Gate::t(2),
        Gate::h(2),
        Gate::cx(0, 1),
        Gate::t(0),
        Gate::tdg(1),
        Gate::cx(0, 1),
    ];
    Circuit::from_gates(3, g).unwrap()
}

/// Eight-CNOT template whose CNOTs all touch the target (a path centered on it).
pub fn linear_template() -> Circuit {
    let g = vec![
        Gate::h(2),
        Gate::cx(2, 1),
        Gate::cx(0, 2),
        Gate::t(1),
        Gate::cx(2, 1),
        Gate::t(1),
        Gate::t(2),
        Gate::cx(0, 2),
        Gate::cx(2, 1),
        Gate::cx(0, 2),
        Gate::tdg(1),
        Gate::cx(2, 1),
        Gate::cx(0, 2),
        Gate::tdg(0),
        Gate::tdg(1),
        Gate::tdg(2),
        Gate::h(2),
    ];
    Circuit::from_gates(3, g).unwrap()
}

fn boundary_pairs(template: &Circuit) -> Result<(Pair, Pair)> {
    let mut cx = template.gates.iter().filter(|g| g.kind == GateKind::Cx);
    let first = cx.next().ok_or_else(|| Error::Library("template without CNOTs".into()))?;
    let last = template.gates.iter().rev().find(|g| g.kind == GateKind::Cx).unwrap();
    let p = |g: &Gate| Pair(g.qubits[0] as u8, g.qubits[1] as u8);
    Ok((p(first), p(last)))
}

/// Smallest connectivity class the template's interactions fit in.
fn connectivity_of(template: &Circuit) -> TopoTag {
    let pairs: BTreeSet<(usize, usize)> = template
        .gates
        .iter()
        .filter(|g| g.qubits.len() == 2)
        .map(|g| (g.qubits[0].min(g.qubits[1]), g.qubits[0].max(g.qubits[1])))
        .collect();
    for k in 0..3 {
        if pairs.iter().all(|&(a, b)| a == k || b == k) {
            return TopoTag::linear(k);
        }
    }
    TopoTag::F
}

impl BasisVariant {
    /// Build a variant, reading pre/suc tags and connectivity off the template.
    pub fn from_template(template: Circuit, design_tag: u32, opt_tag: OptTag) -> Result<BasisVariant> {
        let (pre_tag, suc_tag) = boundary_pairs(&template)?;
        let topo_tag = connectivity_of(&template);
        Ok(BasisVariant { tag: BasisVariantTag { pre_tag, suc_tag, design_tag, topo_tag, opt_tag }, template })
    }

    pub fn cnot_count(&self) -> usize {
        self.template.cnot_cost()
    }

    /// Unitary equal to ccx, tags consistent with the template.
    pub fn validate(&self) -> Result<()> {
        let u = circuit_unitary(&self.template)?;
        let ccx = gate_unitary(&Gate::ccx(0, 1, 2))?;
        let d = phase_distance(&u, &ccx)?;
        if d > 1e-9 {
            return Err(Error::Library(format!("{} is not a Toffoli (distance {d:.3e})", self.tag)));
        }
        let (pre, suc) = boundary_pairs(&self.template)?;
        if pre != self.tag.pre_tag || suc != self.tag.suc_tag {
            return Err(Error::Library(format!("{}: boundary CNOTs are {pre}/{suc}", self.tag)));
        }
        for g in self.template.gates.iter().filter(|g| g.qubits.len() == 2) {
            if !self.tag.topo_tag.allows(g.qubits[0], g.qubits[1]) {
                return Err(Error::Library(format!("{}: {g} breaks connectivity", self.tag)));
            }
        }
        Ok(())
    }

    fn relabeled(&self, perm: [usize; 3]) -> Circuit {
        let mut c = Circuit::new(3);
        c.global_phase = self.template.global_phase;
        c.gates = self.template.gates.iter().map(|g| g.remapped(&perm)).collect();
        c
    }
}

/// Reverse the template and invert every gate; boundary tags trade places.
pub fn invert_variant(v: &BasisVariant) -> BasisVariant {
    let template = v.template.inverse();
    let mut tag = v.tag;
    tag.pre_tag = v.tag.suc_tag;
    tag.suc_tag = v.tag.pre_tag;
    tag.opt_tag = v.tag.opt_tag.flip();
    BasisVariant { tag, template }
}

fn relabel_pair(p: Pair, perm: &[usize; 3]) -> Pair {
    Pair(perm[p.0 as usize] as u8, perm[p.1 as usize] as u8)
}

/// Swap the two control positions.
pub fn permute_controls(v: &BasisVariant) -> BasisVariant {
    let perm = [1, 0, 2];
    let mut tag = v.tag;
    tag.pre_tag = relabel_pair(v.tag.pre_tag, &perm);
    tag.suc_tag = relabel_pair(v.tag.suc_tag, &perm);
    tag.topo_tag = v.tag.topo_tag.relabel(&perm);
    BasisVariant { tag, template: v.relabeled(perm) }
}

/// Exchange the target with control `which` by viewing the Toffoli as a
/// Hadamard-conjugated CCZ, which is symmetric in all three qubits.
pub fn permute_control_target(v: &BasisVariant, which: usize) -> Result<BasisVariant> {
    if which == 2 {
        return Ok(v.clone());
    }
    if which > 2 {
        return Err(Error::Library(format!("no control at position {which}")));
    }
    let mut perm = [0, 1, 2];
    perm.swap(which, 2);
    let mut c = Circuit::new(3);
    c.gates.push(Gate::h(which));
    c.gates.push(Gate::h(2));
    c.extend(&v.relabeled(perm));
    c.gates.push(Gate::h(which));
    c.gates.push(Gate::h(2));
    let template = cancel_hadamard_pairs(&c);
    let mut out = BasisVariant::from_template(template, v.tag.design_tag, v.tag.opt_tag)?;
    out.tag.topo_tag = v.tag.topo_tag.relabel(&perm);
    Ok(out)
}

fn cancel_hadamard_pairs(c: &Circuit) -> Circuit {
    let mut dag = build_dag(c);
    loop {
        let mut hit = None;
        for id in dag.topological_order() {
            let g = dag.gate(id).unwrap();
            if g.kind != GateKind::H {
                continue;
            }
            if let Ok(NodeRef::Op(n)) = dag.wire_neighbor(id, g.qubits[0], Direction::Succ) {
                if dag.gate(n).unwrap().kind == GateKind::H {
                    hit = Some((id, n));
                    break;
                }
            }
        }
        match hit {
            Some((a, b)) => {
                dag.remove_node(a).unwrap();
                dag.remove_node(b).unwrap();
            }
            None => return dag.to_circuit(),
        }
    }
}

pub fn default_seeds() -> Vec<BasisVariant> {
    vec![
        BasisVariant::from_template(canonical_template(), 0, OptTag::O).unwrap(),
        BasisVariant::from_template(linear_template(), 1, OptTag::O).unwrap(),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisLibrary {
    variants: Vec<BasisVariant>,
    by_topo: BTreeMap<TopoTag, Vec<usize>>,
}

/// Closure of `seeds` under inversion and the control/target permutations,
/// deduplicated by tag. Path-shaped variants are also registered for the
/// triangle class, where any path is available.
pub fn generate_basis_library(seeds: &[BasisVariant]) -> Result<BasisLibrary> {
    let mut seen: BTreeSet<BasisVariantTag> = BTreeSet::new();
    let mut templates: Vec<Circuit> = Vec::new();
    let mut order: Vec<BasisVariant> = Vec::new();
    let mut queue: VecDeque<BasisVariant> = seeds.iter().cloned().collect();
    while let Some(v) = queue.pop_front() {
        if seen.contains(&v.tag) || templates.contains(&v.template) {
            continue;
        }
        v.validate()?;
        seen.insert(v.tag);
        templates.push(v.template.clone());
        queue.push_back(invert_variant(&v));
        queue.push_back(permute_controls(&v));
        queue.push_back(permute_control_target(&v, 0)?);
        queue.push_back(permute_control_target(&v, 1)?);
        order.push(v);
    }
    let promoted: Vec<BasisVariant> = order
        .iter()
        .filter(|v| v.tag.topo_tag != TopoTag::F)
        .map(|v| {
            let mut p = v.clone();
            p.tag.topo_tag = TopoTag::F;
            p
        })
        .collect();
    for p in promoted {
        if seen.insert(p.tag) {
            p.validate()?;
            order.push(p);
        }
    }
    BasisLibrary::from_variants(order)
}

#[derive(Serialize, Deserialize)]
struct LibraryFile {
    variants: Vec<BasisVariant>,
}

impl BasisLibrary {
    pub fn from_variants(variants: Vec<BasisVariant>) -> Result<BasisLibrary> {
        let mut by_topo: BTreeMap<TopoTag, Vec<usize>> = BTreeMap::new();
        let mut tags = BTreeSet::new();
        for (i, v) in variants.iter().enumerate() {
            if !tags.insert(v.tag) {
                return Err(Error::Library(format!("duplicate tag {}", v.tag)));
            }
            by_topo.entry(v.tag.topo_tag).or_default().push(i);
        }
        Ok(BasisLibrary { variants, by_topo })
    }

    /// Library generated from the two standard seeds.
    pub fn standard() -> Result<BasisLibrary> {
        generate_basis_library(&default_seeds())
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    /// All variants in generation order.
    pub fn variants(&self) -> &[BasisVariant] {
        &self.variants
    }

    pub fn for_topo(&self, topo: TopoTag) -> impl Iterator<Item = &BasisVariant> {
        self.by_topo.get(&topo).into_iter().flatten().map(move |&i| &self.variants[i])
    }

    pub fn get(&self, tag: &BasisVariantTag) -> Option<&BasisVariant> {
        self.variants.iter().find(|v| &v.tag == tag)
    }

    /// Fixed template used when decomposition ignores context: the first
    /// original-orientation variant generated for the class (the seed itself
    /// for the triangle and for paths centered on the target).
    pub fn fixed_for(&self, topo: TopoTag) -> Option<&BasisVariant> {
        let design = if topo == TopoTag::F { 0 } else { 1 };
        self.for_topo(topo).find(|v| v.tag.opt_tag == OptTag::O && v.tag.design_tag == design)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&LibraryFile { variants: self.variants.clone() }).expect("serializable")
    }

    /// Load and re-validate a dumped library.
    pub fn from_json(text: &str) -> Result<BasisLibrary> {
        let f: LibraryFile = serde_json::from_str(text)?;
        for v in &f.variants {
            v.validate()?;
        }
        BasisLibrary::from_variants(f.variants)
    }
}

/// Outcome of choosing a variant for one Toffoli.
#[derive(Clone, Debug)]
pub struct Selection {
    pub variant: BasisVariant,
    /// DAG with the variant substituted and its window optimized.
    pub dag: CircuitDag,
    /// CNOT cost of the optimized window.
    pub window_cost: usize,
}

fn tie_key(t: &BasisVariantTag) -> (OptTag, u32, Pair, Pair) {
    (t.opt_tag, t.design_tag, t.pre_tag, t.suc_tag)
}

/// Try every variant of the Toffoli's connectivity class and keep the one
/// whose substitution plus window optimization leaves the fewest CNOTs.
/// The DAG is over physical qubits.
pub fn select_basis_variant(
    dag: &CircuitDag,
    ccx_node: usize,
    library: &BasisLibrary,
    map: &CouplingMap,
    window: usize,
    opts: &PeepholeOptions,
) -> Result<Selection> {
    let g = dag.gate(ccx_node).ok_or(Error::NoSuchNode(ccx_node))?;
    if g.kind != GateKind::Ccx {
        return Err(Error::InvalidGate(format!("node {ccx_node} is {}, not ccx", g.kind)));
    }
    let qs = g.qubits.clone();
    let topo = map.topo_tag_of_triple(qs[0], qs[1], qs[2])?;
    let mut best: Option<Selection> = None;
    for v in library.for_topo(topo) {
        let mut trial = dag.clone();
        let created = trial.substitute_node(ccx_node, &v.template, &qs)?;
        let (optimized, cost) = local_optimize(&trial, &created, window, opts);
        log::trace!("variant {} scores {cost}", v.tag);
        let better = match &best {
            None => true,
            Some(b) => (cost, tie_key(&v.tag)) < (b.window_cost, tie_key(&b.variant.tag)),
        };
        if better {
            best = Some(Selection { variant: v.clone(), dag: optimized, window_cost: cost });
        }
    }
    best.ok_or_else(|| Error::Library(format!("no variant for class {topo}")))
}

/// Substitute a given variant without optimizing.
pub fn substitute_variant(dag: &mut CircuitDag, ccx_node: usize, v: &BasisVariant) -> Result<Vec<usize>> {
    let qs = dag.gate(ccx_node).ok_or(Error::NoSuchNode(ccx_node))?.qubits.clone();
    dag.substitute_node(ccx_node, &v.template, &qs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> BasisLibrary {
        BasisLibrary::standard().unwrap()
    }

    #[test]
    fn seed_tags_are_computed_from_templates() {
        let s = default_seeds();
        assert_eq!(s[0].tag.to_string(), "(12, 01, 0, F, O)");
        assert_eq!(s[1].tag.to_string(), "(21, 02, 1, L2, O)");
        assert_eq!(s[1].cnot_count(), 8);
        for v in &s {
            v.validate().unwrap();
        }
    }

    #[test]
    fn permuted_controls_give_the_02_10_variant() {
        let v = permute_controls(&default_seeds()[0]);
        assert_eq!(v.tag.to_string(), "(02, 10, 0, F, O)");
        v.validate().unwrap();
        let i = invert_variant(&v);
        assert_eq!(i.tag.to_string(), "(10, 02, 0, F, I)");
        i.validate().unwrap();
    }

    #[test]
    fn rules_are_involutions() {
        for v in default_seeds() {
            assert_eq!(invert_variant(&invert_variant(&v)).template.gates, v.template.gates);
            assert_eq!(permute_controls(&permute_controls(&v)), v);
            assert_eq!(permute_control_target(&v, 2).unwrap(), v);
        }
    }

    #[test]
    fn control_target_moves_path_center() {
        let v = &default_seeds()[1];
        let w = permute_control_target(v, 0).unwrap();
        assert_eq!(w.tag.topo_tag, TopoTag::L0);
        w.validate().unwrap();
        assert_eq!(permute_controls(&w).tag.topo_tag, TopoTag::L1);
    }

    #[test]
    fn library_shape() {
        let l = lib();
        assert!(l.len() >= 32, "{}", l.len());
        for t in TopoTag::ALL {
            assert!(l.for_topo(t).count() > 0, "{t}");
        }
        assert!(l.get(&default_seeds()[1].tag).is_some());
        for v in l.variants() {
            v.validate().unwrap();
        }
        assert_eq!(l.fixed_for(TopoTag::F).unwrap().tag, default_seeds()[0].tag);
        assert_eq!(l.fixed_for(TopoTag::L2).unwrap().tag, default_seeds()[1].tag);
    }

    #[test]
    fn closure_has_both_orientations_per_boundary() {
        let l = lib();
        for v in l.variants() {
            let mut inv = v.tag;
            inv.pre_tag = v.tag.suc_tag;
            inv.suc_tag = v.tag.pre_tag;
            inv.opt_tag = v.tag.opt_tag.flip();
            assert!(l.get(&inv).is_some(), "{} lacks its inverse", v.tag);
        }
    }

    #[test]
    fn json_round_trip() {
        let l = lib();
        assert_eq!(BasisLibrary::from_json(&l.to_json()).unwrap(), l);
    }
}
