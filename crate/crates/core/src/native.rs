//! CNOT to cross-resonance lowering.
//!
//! Every variant has the shape `[L_c, L_t] · CR · [R_c, R_t]` where the CR is
//! `rzx(±π/2)` driven from the control (native orientation) or from the
//! target (reversed), optionally framed by X gates on the driver when the
//! echo polarity is switched. Corner positions: 1 control-left,
//! 2 control-right, 3 target-left, 4 target-right.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::dag::build_dag;
use crate::error::{Error, Result};
use crate::peephole::merge_1q_runs;
use crate::synth::{fit_template, FitOptions, Skeleton};
use crate::topology::CouplingMap;
use crate::unitary::{circuit_unitary, extract_u3, gate_unitary, normalize_angle, phase_distance, relative_phase, U3Params, Unitary};

/// Tolerance for classifying a rotation angle as 0 or π/2.
pub const PULSE_TOL: f64 = 1e-8;
/// Variant soundness threshold on the phase-invariant distance to cx.
pub const VARIANT_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// CR driven from the CNOT control.
    Native,
    /// CR driven from the CNOT target.
    Reversed,
}

impl Orientation {
    pub const ALL: [Orientation; 2] = [Orientation::Native, Orientation::Reversed];

    /// Template wires (driver, other); wire 0 is the control.
    fn wires(self) -> (usize, usize) {
        match self {
            Orientation::Native => (0, 1),
            Orientation::Reversed => (1, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    /// Positive half-CR first.
    #[serde(rename = "+-")]
    PlusMinus,
    /// Negative half-CR first; costs an X frame on each side.
    #[serde(rename = "-+")]
    MinusPlus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NativeKind {
    Canonical,
    Inverse,
    Polarity,
    PolarityInverse,
    Ladder,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeVariantTag {
    /// θ₁ φ₁ λ₁ … θ₄ φ₄ λ₄ in radians.
    pub angles: [f64; 12],
    pub ori_tag: Orientation,
    pub polarity: Polarity,
}

impl NativeVariantTag {
    pub fn corner(&self, pos: usize) -> U3Params {
        assert!((1..=4).contains(&pos), "corner position {pos}");
        let a = &self.angles[3 * (pos - 1)..3 * pos];
        U3Params::new(a[0], a[1], a[2])
    }
}

impl fmt::Display for NativeVariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.angles.iter().enumerate() {
            let d = a.to_degrees();
            let d = if d.abs() < 5e-10 { 0.0 } else { d };
            write!(f, "{}{:.6}", if i > 0 { ", " } else { "" }, d)?;
        }
        let o = match self.ori_tag {
            Orientation::Native => "native",
            Orientation::Reversed => "reversed",
        };
        let p = match self.polarity {
            Polarity::PlusMinus => "+-",
            Polarity::MinusPlus => "-+",
        };
        write!(f, "; {o}, {p})")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeVariant {
    pub kind: NativeKind,
    pub tag: NativeVariantTag,
    /// Two-qubit template: wire 0 is the CNOT control, wire 1 the target.
    /// Its global phase makes it exactly equal to cx.
    pub template: Circuit,
}

/// Number of √X pulses a canonical U3 needs: 0 for a pure frame change,
/// 1 at θ = π/2, 2 otherwise.
pub fn sx_count(p: &U3Params) -> usize {
    let t = normalize_angle(p.theta).abs();
    if t < PULSE_TOL {
        0
    } else if (t - FRAC_PI_2).abs() < PULSE_TOL {
        1
    } else {
        2
    }
}

/// Pulse cost of an arbitrary 2×2 unitary.
pub fn sx_count_matrix(m: &Unitary) -> usize {
    sx_count(&extract_u3(m).expect("unitary").0)
}

/// #sx of a circuit, with x counted as two pulses.
pub fn count_sx(c: &Circuit) -> usize {
    c.count(GateKind::Sx) + 2 * c.count(GateKind::X)
}

fn cx_unitary() -> Unitary {
    gate_unitary(&Gate::cx(0, 1)).unwrap()
}

impl NativeVariant {
    /// Build the template from four corners and validate it against cx.
    pub fn assemble(kind: NativeKind, corners: [U3Params; 4], ori: Orientation, polarity: Polarity, cr_sign: f64) -> Result<NativeVariant> {
        let (d, o) = ori.wires();
        let [p1, p2, p3, p4] = corners;
        let mut gates = vec![p1.to_gate(0), p3.to_gate(1)];
        match polarity {
            Polarity::PlusMinus => gates.push(Gate::rzx(d, o, cr_sign * FRAC_PI_2)),
            Polarity::MinusPlus => {
                gates.push(Gate::x(d));
                gates.push(Gate::rzx(d, o, -cr_sign * FRAC_PI_2));
                gates.push(Gate::x(d));
            }
        }
        gates.push(p2.to_gate(0));
        gates.push(p4.to_gate(1));
        let mut template = Circuit::from_gates(2, gates)?;
        let u = circuit_unitary(&template)?;
        template.global_phase = -relative_phase(&u, &cx_unitary());
        let mut angles = [0.0; 12];
        for (i, p) in corners.iter().enumerate() {
            angles[3 * i..3 * i + 3].copy_from_slice(&p.as_array());
        }
        let v = NativeVariant { kind, tag: NativeVariantTag { angles, ori_tag: ori, polarity }, template };
        v.validate()?;
        Ok(v)
    }

    pub fn corners(&self) -> [U3Params; 4] {
        [1, 2, 3, 4].map(|p| self.tag.corner(p))
    }

    /// Sign of the CR rotation angle that the +− skeleton carries.
    fn cr_sign(&self) -> f64 {
        let r = self.template.gates.iter().find(|g| g.kind == GateKind::Rzx).expect("template has a CR");
        let s = r.params[0].signum();
        match self.tag.polarity {
            Polarity::PlusMinus => s,
            Polarity::MinusPlus => -s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let u = circuit_unitary(&self.template)?;
        let d = phase_distance(&u, &cx_unitary())?;
        if d > VARIANT_TOL {
            return Err(Error::Library(format!("CNOT variant {} misses cx by {d:.3e}", self.tag)));
        }
        Ok(())
    }

    /// Total pulses of the four corners and X frames, in isolation.
    pub fn standalone_sx(&self) -> usize {
        let fx = if self.tag.polarity == Polarity::MinusPlus { 4 } else { 0 };
        self.corners().iter().map(sx_count).sum::<usize>() + fx
    }

    /// Products of the template's one-qubit gates before and after the CR on
    /// each wire: `[left, right]` per wire (X frames included).
    fn effective_corners(&self) -> [[Unitary; 2]; 2] {
        let mut out = [[Unitary::identity(2), Unitary::identity(2)], [Unitary::identity(2), Unitary::identity(2)]];
        let mut after = false;
        for g in &self.template.gates {
            if g.kind == GateKind::Rzx {
                after = true;
                continue;
            }
            let side = usize::from(after);
            let w = g.qubits[0];
            out[w][side] = gate_unitary(g).unwrap().mul(&out[w][side]);
        }
        out
    }
}

/// Reverse the template and invert each gate; corners 1↔2 and 3↔4 trade
/// places, each U3(θ, φ, λ) becoming U3(−θ, −λ, −φ).
pub fn invert_native(v: &NativeVariant) -> Result<NativeVariant> {
    let [p1, p2, p3, p4] = v.corners();
    let kind = match v.kind {
        NativeKind::Canonical => NativeKind::Inverse,
        NativeKind::Inverse => NativeKind::Canonical,
        NativeKind::Polarity => NativeKind::PolarityInverse,
        NativeKind::PolarityInverse => NativeKind::Polarity,
        NativeKind::Ladder => NativeKind::Ladder,
    };
    NativeVariant::assemble(kind, [p2.inverse(), p1.inverse(), p4.inverse(), p3.inverse()], v.tag.ori_tag, v.tag.polarity, -v.cr_sign())
}

/// Swap the order of the two half-CR pulses: the CR flips sign and gains an
/// X frame on the driver on both sides (or loses it, switching back).
pub fn polarity_switch(v: &NativeVariant) -> Result<NativeVariant> {
    let kind = match v.kind {
        NativeKind::Canonical => NativeKind::Polarity,
        NativeKind::Polarity => NativeKind::Canonical,
        NativeKind::Inverse => NativeKind::PolarityInverse,
        NativeKind::PolarityInverse => NativeKind::Inverse,
        NativeKind::Ladder => NativeKind::Ladder,
    };
    let pol = match v.tag.polarity {
        Polarity::PlusMinus => Polarity::MinusPlus,
        Polarity::MinusPlus => Polarity::PlusMinus,
    };
    NativeVariant::assemble(kind, v.corners(), v.tag.ori_tag, pol, v.cr_sign())
}

/// Generic skeleton over the four corners, any of which may be pinned.
pub fn cr_skeleton(ori: Orientation, pins: [Option<U3Params>; 4]) -> Skeleton {
    let (d, o) = ori.wires();
    let slot = |s: Skeleton, q: usize, p: Option<U3Params>| match p {
        Some(p) => s.pinned_u3(q, p),
        None => s.u3(q),
    };
    let s = slot(Skeleton::new(2), 0, pins[0]);
    let s = slot(s, 1, pins[2]);
    let s = s.fixed(Gate::rzx(d, o, FRAC_PI_2));
    let s = slot(s, 0, pins[1]);
    slot(s, 1, pins[3])
}

/// Fit the free corners of `cr_skeleton(ori, pins)` to cx.
pub fn fit_corners(ori: Orientation, pins: [Option<U3Params>; 4], opts: &FitOptions) -> Result<[U3Params; 4]> {
    let skel = cr_skeleton(ori, pins);
    let fit = fit_template(&skel, &cx_unitary(), opts)?;
    if !fit.success {
        return Err(Error::Synthesis(fit.residual));
    }
    let mut free = fit.params.into_iter();
    // Slot order is 1, 3, 2, 4.
    let mut by_slot = [None; 4];
    for (i, pin) in [pins[0], pins[2], pins[1], pins[3]].into_iter().enumerate() {
        by_slot[i] = Some(pin.unwrap_or_else(|| free.next().unwrap()));
    }
    let s = by_slot.map(Option::unwrap);
    Ok([s[0], s[2], s[1], s[3]])
}

/// Left corners that make junctions between consecutive ladder CNOTs cancel:
/// corner 4 is pinned to the inverse of corner 1.
pub fn ladder_corners() -> Vec<(Orientation, U3Params)> {
    let d = U3Params::deg;
    vec![
        (Orientation::Reversed, d(90.0, 0.0, 0.0)),
        (Orientation::Reversed, d(90.0, 0.0, 180.0)),
        (Orientation::Reversed, d(90.0, 180.0, 0.0)),
        (Orientation::Reversed, d(90.0, 180.0, 180.0)),
        (Orientation::Native, d(180.0, 0.0, 0.0)),
        (Orientation::Native, d(180.0, 0.0, 180.0)),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NativeLibrary {
    variants: Vec<NativeVariant>,
}

/// Canonical corners per orientation from an unconstrained fit, the rule
/// variants derived from them, and the synthesized ladder variants.
pub fn generate_native_library(opts: &FitOptions) -> Result<NativeLibrary> {
    let mut canon = Vec::new();
    for ori in Orientation::ALL {
        let c = fit_corners(ori, [None; 4], opts)?;
        canon.push(NativeVariant::assemble(NativeKind::Canonical, c, ori, Polarity::PlusMinus, 1.0)?);
    }
    let mut variants = canon.clone();
    for v in &canon {
        variants.push(invert_native(v)?);
    }
    for v in &canon {
        variants.push(polarity_switch(v)?);
    }
    for v in &canon {
        variants.push(polarity_switch(&invert_native(v)?)?);
    }
    for (ori, a) in ladder_corners() {
        let c = fit_corners(ori, [Some(a), None, None, Some(a.inverse())], opts)?;
        variants.push(NativeVariant::assemble(NativeKind::Ladder, c, ori, Polarity::PlusMinus, 1.0)?);
    }
    NativeLibrary::new(variants)
}

impl NativeLibrary {
    pub fn new(variants: Vec<NativeVariant>) -> Result<NativeLibrary> {
        for ori in Orientation::ALL {
            let first = variants.iter().find(|v| v.tag.ori_tag == ori);
            if first.is_none_or(|v| v.kind != NativeKind::Canonical) {
                return Err(Error::Library(format!("no leading canonical variant for {ori:?} orientation")));
            }
        }
        for v in &variants {
            v.validate()?;
        }
        Ok(NativeLibrary { variants })
    }

    /// Library generated with default fit options.
    pub fn standard() -> Result<NativeLibrary> {
        generate_native_library(&FitOptions::default())
    }

    pub fn len(&self) -> usize {
        self.variants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variants.is_empty()
    }

    pub fn variants(&self) -> &[NativeVariant] {
        &self.variants
    }

    pub fn for_orientation(&self, ori: Orientation) -> impl Iterator<Item = (usize, &NativeVariant)> {
        self.variants.iter().enumerate().filter(move |(_, v)| v.tag.ori_tag == ori)
    }

    pub fn canonical(&self, ori: Orientation) -> &NativeVariant {
        &self.variants[self.canonical_index(ori)]
    }

    fn canonical_index(&self, ori: Orientation) -> usize {
        self.for_orientation(ori).next().map(|(i, _)| i).expect("checked on construction")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<NativeLibrary> {
        let lib: NativeLibrary = serde_json::from_str(text)?;
        NativeLibrary::new(lib.variants)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoweringMode {
    /// Per-CNOT variant choice against the neighboring one-qubit gates.
    ContextAware,
    /// The canonical variant for every CNOT.
    Canonical,
}

#[derive(Clone, Debug)]
pub struct Lowered {
    /// Circuit over rzx, rz and sx (plus barriers).
    pub circuit: Circuit,
    /// Library index chosen for each CNOT, in circuit order.
    pub choices: Vec<usize>,
    /// #sx predicted by the cost model before emission.
    pub predicted_sx: usize,
}

/// One-qubit stretch of a wire between two CR boundaries. `pieces` are the
/// program's one-qubit products, split at barriers.
struct Segment {
    left: Option<(usize, usize)>,
    right: Option<(usize, usize)>,
    pieces: Vec<Unitary>,
}

struct CostModel<'a> {
    segs: Vec<Segment>,
    /// Per CNOT, the segments it borders.
    touching: Vec<Vec<usize>>,
    candidates: Vec<Vec<usize>>,
    corners: &'a [[[Unitary; 2]; 2]],
}

impl CostModel<'_> {
    fn seg_cost(&self, s: &Segment, assign: &[usize]) -> usize {
        let id = Unitary::identity(2);
        let r_prev = match s.left {
            Some((i, w)) => &self.corners[assign[i]][w][1],
            None => &id,
        };
        let l_next = match s.right {
            Some((i, w)) => &self.corners[assign[i]][w][0],
            None => &id,
        };
        let n = s.pieces.len();
        if n == 1 {
            return sx_count_matrix(&l_next.mul(&s.pieces[0]).mul(r_prev));
        }
        let mut cost = sx_count_matrix(&s.pieces[0].mul(r_prev));
        for p in &s.pieces[1..n - 1] {
            cost += sx_count_matrix(p);
        }
        cost + sx_count_matrix(&l_next.mul(&s.pieces[n - 1]))
    }

    fn total(&self, assign: &[usize]) -> usize {
        self.segs.iter().map(|s| self.seg_cost(s, assign)).sum()
    }

    fn local(&self, i: usize, assign: &[usize]) -> usize {
        self.touching[i].iter().map(|&s| self.seg_cost(&self.segs[s], assign)).sum()
    }

    /// Left-merge greedy: each CNOT sees its predecessors' committed right
    /// corners and pays its own right corners standalone.
    fn greedy(&self) -> Vec<usize> {
        let n = self.candidates.len();
        let mut assign: Vec<usize> = self.candidates.iter().map(|c| c[0]).collect();
        for i in 0..n {
            let mut best = (usize::MAX, assign[i]);
            for &v in &self.candidates[i] {
                assign[i] = v;
                let mut score = 0;
                for &s in &self.touching[i] {
                    let seg = &self.segs[s];
                    match seg.right {
                        Some((j, _)) if j == i => score += self.seg_cost_left_part(seg, assign.as_slice()),
                        _ => {}
                    }
                }
                score += (0..2).map(|w| sx_count_matrix(&self.corners[v][w][1])).sum::<usize>();
                if score < best.0 {
                    best = (score, v);
                }
            }
            assign[i] = best.1;
        }
        assign
    }

    /// Cost of the pieces a segment contributes up to its right boundary,
    /// with the right boundary's corner merged in.
    fn seg_cost_left_part(&self, s: &Segment, assign: &[usize]) -> usize {
        if s.pieces.len() == 1 {
            return self.seg_cost(s, assign);
        }
        let (i, w) = s.right.unwrap();
        sx_count_matrix(&self.corners[assign[i]][w][0].mul(s.pieces.last().unwrap()))
    }

    /// Iterated conditional modes: re-choose each CNOT given its neighbors
    /// until no single change lowers the exact total.
    fn improve(&self, assign: &mut [usize]) {
        for _ in 0..32 {
            let mut changed = false;
            for i in 0..assign.len() {
                let cur = assign[i];
                let mut best = (self.local(i, assign), cur);
                for &v in &self.candidates[i] {
                    if v == cur {
                        continue;
                    }
                    assign[i] = v;
                    let c = self.local(i, assign);
                    if c < best.0 {
                        best = (c, v);
                    }
                }
                assign[i] = best.1;
                changed |= best.1 != cur;
            }
            if !changed {
                break;
            }
        }
    }
}

/// Expand swaps into three cx, keeping their tag.
fn expand_swaps(c: &Circuit) -> Circuit {
    let mut out = Circuit::new(c.num_qubits);
    out.global_phase = c.global_phase;
    for g in &c.gates {
        if g.kind == GateKind::Swap {
            let (a, b) = (g.qubits[0], g.qubits[1]);
            for (x, y) in [(a, b), (b, a), (a, b)] {
                out.gates.push(Gate::cx(x, y).with_tag(g.tag));
            }
        } else {
            out.gates.push(g.clone());
        }
    }
    out
}

/// Lower a circuit of one-qubit gates, cx and swap (every two-qubit gate on
/// a coupling edge) to CR pulses plus rz/sx.
pub fn lower_circuit_to_native(c: &Circuit, map: &CouplingMap, lib: &NativeLibrary, mode: LoweringMode) -> Result<Lowered> {
    let c = expand_swaps(c);
    if c.num_qubits > map.num_physical() {
        return Err(Error::TooWide(c.num_qubits, map.num_physical()));
    }
    let corners: Vec<[[Unitary; 2]; 2]> = lib.variants().iter().map(|v| v.effective_corners()).collect();

    let mut segs: Vec<Segment> = Vec::new();
    let mut open: Vec<Segment> =
        (0..c.num_qubits).map(|_| Segment { left: None, right: None, pieces: vec![Unitary::identity(2)] }).collect();
    let mut touching: Vec<Vec<usize>> = Vec::new();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut cx_wires: Vec<[usize; 2]> = Vec::new();
    let fresh = |left| Segment { left, right: None, pieces: vec![Unitary::identity(2)] };
    for g in &c.gates {
        match g.kind {
            k if k.is_single_qubit() => {
                let q = g.qubits[0];
                let last = open[q].pieces.last_mut().unwrap();
                *last = gate_unitary(g)?.mul(last);
            }
            GateKind::Barrier => {
                for &q in &g.qubits {
                    open[q].pieces.push(Unitary::identity(2));
                }
            }
            GateKind::Cx => {
                let (ct, tt) = (g.qubits[0], g.qubits[1]);
                let (_, matches) = map.orientation_of(ct, tt)?;
                let ori = if matches { Orientation::Native } else { Orientation::Reversed };
                let i = candidates.len();
                candidates.push(match mode {
                    LoweringMode::ContextAware => lib.for_orientation(ori).map(|(k, _)| k).collect(),
                    LoweringMode::Canonical => vec![lib.canonical_index(ori)],
                });
                touching.push(Vec::new());
                cx_wires.push([ct, tt]);
                for (w, q) in [(0, ct), (1, tt)] {
                    let mut s = std::mem::replace(&mut open[q], fresh(Some((i, w))));
                    s.right = Some((i, w));
                    if let Some((j, _)) = s.left {
                        touching[j].push(segs.len());
                    }
                    touching[i].push(segs.len());
                    segs.push(s);
                }
            }
            GateKind::Rzx => {
                for &q in &g.qubits {
                    let s = std::mem::replace(&mut open[q], fresh(None));
                    if let Some((j, _)) = s.left {
                        touching[j].push(segs.len());
                    }
                    segs.push(s);
                }
            }
            k => return Err(Error::UnsupportedGate(format!("{k} reached native lowering"))),
        }
    }
    for s in open {
        if let Some((j, _)) = s.left {
            touching[j].push(segs.len());
        }
        segs.push(s);
    }
    for t in &mut touching {
        let set: BTreeSet<usize> = t.iter().copied().collect();
        *t = set.into_iter().collect();
    }

    let model = CostModel { segs, touching, candidates, corners: &corners };
    let canonical: Vec<usize> = model.candidates.iter().map(|c| c[0]).collect();
    let (choices, predicted_sx) = match mode {
        LoweringMode::Canonical => {
            let t = model.total(&canonical);
            (canonical, t)
        }
        LoweringMode::ContextAware => {
            let mut a = model.greedy();
            model.improve(&mut a);
            let (ta, tc) = (model.total(&a), model.total(&canonical));
            log::debug!("native lowering: context-aware {ta} sx, canonical {tc} sx");
            if ta <= tc {
                (a, ta)
            } else {
                (canonical, tc)
            }
        }
    };

    let mut sub = Circuit::new(c.num_qubits);
    sub.global_phase = c.global_phase;
    let mut k = 0;
    for g in &c.gates {
        if g.kind == GateKind::Cx {
            let v = &lib.variants()[choices[k]];
            let wires = cx_wires[k];
            for tg in &v.template.gates {
                sub.gates.push(tg.remapped(&wires).with_tag(g.tag));
            }
            sub.global_phase += v.template.global_phase;
            k += 1;
        } else {
            sub.gates.push(g.clone());
        }
    }
    let mut dag = build_dag(&sub);
    merge_1q_runs(&mut dag);
    let merged = dag.to_circuit();
    let circuit = expand_to_pulses(&merged)?;
    Ok(Lowered { circuit, choices, predicted_sx })
}

/// Rewrite every one-qubit gate as rz/sx pulses: none for a frame change,
/// one sx at θ = π/2, two otherwise.
pub fn expand_to_pulses(c: &Circuit) -> Result<Circuit> {
    let mut out = Circuit::new(c.num_qubits);
    out.global_phase = c.global_phase;
    for g in &c.gates {
        if !g.kind.is_single_qubit() || g.kind == GateKind::Rz || g.kind == GateKind::Sx {
            out.gates.push(g.clone());
            continue;
        }
        let m = gate_unitary(g)?;
        let (p, _) = extract_u3(&m)?;
        let q = g.qubits[0];
        let mut seq = Vec::new();
        let rz = |seq: &mut Vec<Gate>, a: f64| {
            let a = normalize_angle(a);
            if a.abs() > 1e-12 {
                seq.push(Gate::rz(q, a).with_tag(g.tag));
            }
        };
        match sx_count(&p) {
            0 => rz(&mut seq, p.phi + p.lambda),
            1 => {
                rz(&mut seq, p.lambda - FRAC_PI_2);
                seq.push(Gate::sx(q).with_tag(g.tag));
                rz(&mut seq, p.phi + FRAC_PI_2);
            }
            _ => {
                rz(&mut seq, p.lambda);
                seq.push(Gate::sx(q).with_tag(g.tag));
                rz(&mut seq, p.theta + PI);
                seq.push(Gate::sx(q).with_tag(g.tag));
                rz(&mut seq, p.phi + PI);
            }
        }
        let local = Circuit::from_gates(1, seq.iter().map(|s| Gate { qubits: vec![0], ..s.clone() }).collect())?;
        out.global_phase -= relative_phase(&circuit_unitary(&local)?, &m);
        out.gates.extend(seq);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn lib() -> &'static NativeLibrary {
        static L: OnceLock<NativeLibrary> = OnceLock::new();
        L.get_or_init(|| NativeLibrary::standard().unwrap())
    }

    #[test]
    fn sx_rule() {
        assert_eq!(sx_count(&U3Params::new(0.0, 0.3, 1.2)), 0);
        assert_eq!(sx_count(&U3Params::deg(37.0, 0.3f64.to_degrees(), 1.1f64.to_degrees())), 2);
        assert_eq!(sx_count(&U3Params::deg(90.0, -90.0, 0.0)), 1);
        assert_eq!(sx_count(&U3Params::deg(-90.0, 0.0, 0.0)), 1);
        assert_eq!(sx_count(&U3Params::deg(180.0, 0.0, 0.0)), 2);
    }

    #[test]
    fn library_composition() {
        let l = lib();
        assert!(l.len() >= 14);
        assert_eq!(l.variants().iter().filter(|v| v.kind == NativeKind::Ladder).count(), 6);
        for v in l.variants() {
            v.validate().unwrap();
        }
        assert_eq!(l.canonical(Orientation::Native).kind, NativeKind::Canonical);
    }

    #[test]
    fn inverse_rule_on_corner_angles() {
        let l = lib();
        let ladder = l.variants().iter().find(|v| v.kind == NativeKind::Ladder).unwrap();
        let inv = invert_native(ladder).unwrap();
        // Corner 4 of the ladder variant moves to corner 3 inverted.
        let p4 = ladder.tag.corner(4);
        let p3 = inv.tag.corner(3);
        assert_eq!(p3.as_array(), [-p4.theta, -p4.lambda, -p4.phi]);
        let back = invert_native(&inv).unwrap();
        assert_eq!(back.tag.angles, ladder.tag.angles);
    }

    #[test]
    fn polarity_involution() {
        let v = lib().canonical(Orientation::Reversed);
        let p = polarity_switch(v).unwrap();
        assert_eq!(p.template.count(GateKind::X), 2);
        let pp = polarity_switch(&p).unwrap();
        assert_eq!(pp.template.gates, v.template.gates);
        polarity_switch(&invert_native(v).unwrap()).unwrap().validate().unwrap();
    }

    fn lowered_equiv(c: &Circuit, low: &Circuit) -> f64 {
        phase_distance(&circuit_unitary(c).unwrap(), &circuit_unitary(low).unwrap()).unwrap()
    }

    #[test]
    fn pulse_expansion_is_exact() {
        let mut c = Circuit::new(1);
        for (t, p, l) in [(0.0, 0.4, 1.0), (FRAC_PI_2, -0.3, 2.0), (1.1, 0.2, -2.5), (PI, 0.0, 0.3)] {
            c.gates.push(Gate::u3(0, t, p, l));
        }
        c.gates.push(Gate::h(0));
        c.gates.push(Gate::x(0));
        let e = expand_to_pulses(&c).unwrap();
        let u = circuit_unitary(&c).unwrap();
        let v = circuit_unitary(&e).unwrap();
        let diff: f64 = u.as_slice().iter().zip(v.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn isolated_cx_keeps_canonical_cost() {
        let map = CouplingMap::builtin("line-2").unwrap();
        let c = Circuit::from_gates(2, vec![Gate::cx(0, 1)]).unwrap();
        let a = lower_circuit_to_native(&c, &map, lib(), LoweringMode::ContextAware).unwrap();
        let b = lower_circuit_to_native(&c, &map, lib(), LoweringMode::Canonical).unwrap();
        assert!(count_sx(&a.circuit) <= count_sx(&b.circuit));
        assert_eq!(count_sx(&a.circuit), a.predicted_sx);
        assert!(lowered_equiv(&c, &a.circuit) < 1e-7);
        assert!(lowered_equiv(&c, &b.circuit) < 1e-7);
    }

    #[test]
    fn reversed_edge_uses_reversed_variants() {
        let map = CouplingMap::builtin("line-2").unwrap();
        let c = Circuit::from_gates(2, vec![Gate::cx(1, 0)]).unwrap();
        let a = lower_circuit_to_native(&c, &map, lib(), LoweringMode::ContextAware).unwrap();
        assert!(a.choices.iter().all(|&i| lib().variants()[i].tag.ori_tag == Orientation::Reversed));
        let r = a.circuit.gates.iter().find(|g| g.kind == GateKind::Rzx).unwrap();
        assert_eq!(r.qubits[0], 0, "CR is driven from the native driver");
    }

    #[test]
    fn off_edge_cx_is_rejected() {
        let map = CouplingMap::builtin("line-3").unwrap();
        let c = Circuit::from_gates(3, vec![Gate::cx(0, 2)]).unwrap();
        assert!(lower_circuit_to_native(&c, &map, lib(), LoweringMode::Canonical).is_err());
    }
}
