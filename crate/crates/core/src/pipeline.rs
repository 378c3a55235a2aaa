//! End-to-end compilation, metrics and the benchmark harness.
//!
//! Flow: trios-level circuit → layout and routing → Toffoli decomposition →
//! peephole optimization → CR lowering → metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::basis::{select_basis_variant, substitute_variant, BasisLibrary, BasisVariantTag};
use crate::circuit::{Circuit, GateKind, Tag};
use crate::dag::{build_dag, CircuitDag};
use crate::error::{Error, Result};
use crate::native::{count_sx, lower_circuit_to_native, LoweringMode, NativeLibrary};
use crate::peephole::{optimize, PeepholeOptions};
use crate::qasm::parse_qasm;
use crate::routing::{equivalence_distance, route, RouteOptions, RoutedCircuit};
use crate::topology::CouplingMap;

/// End-to-end equivalence threshold after lowering.
pub const NATIVE_VERIFY_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Context-aware choice at both the Toffoli and the CNOT level.
    Qcontext,
    /// Fixed template per connectivity class and canonical CNOT lowering.
    Trios,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "qcontext" => Ok(Mode::Qcontext),
            "trios" | "trios-baseline" => Ok(Mode::Trios),
            _ => Err(Error::InvalidGate(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Gates per side in the Toffoli scoring window.
    pub window: usize,
    pub peephole: PeepholeOptions,
    pub initial_layout: Option<Vec<usize>>,
    pub verify: bool,
    /// Widest program the unitary check is attempted on.
    pub verify_max_qubits: usize,
    /// Record wall time (makes reports run-dependent).
    pub timing: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Qcontext,
            seed: 0,
            window: 12,
            peephole: PeepholeOptions::default(),
            initial_layout: None,
            verify: false,
            verify_max_qubits: 10,
            timing: false,
        }
    }
}

impl PipelineConfig {
    pub fn with_mode(&self, mode: Mode) -> PipelineConfig {
        PipelineConfig { mode, ..self.clone() }
    }
}

/// Both variant libraries.
pub struct Libraries {
    pub basis: BasisLibrary,
    pub native: NativeLibrary,
}

impl Libraries {
    pub fn generate() -> Result<Libraries> {
        Ok(Libraries { basis: BasisLibrary::standard()?, native: NativeLibrary::standard()? })
    }

    /// Process-wide copy, generated on first use.
    pub fn shared() -> Result<&'static Libraries> {
        static LIBS: OnceLock<std::result::Result<Libraries, Error>> = OnceLock::new();
        LIBS.get_or_init(Libraries::generate).as_ref().map_err(Clone::clone)
    }
}

/// Metrics of one compiled circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    /// CR pulses coming from routing swaps.
    pub cr_r: usize,
    /// All other CR pulses.
    pub cr_b: usize,
    pub sx: usize,
    /// CNOT cost of the basis-level circuit before lowering (swap = 3).
    pub basis_cx: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_ms: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Compiled {
    pub routed: RoutedCircuit,
    /// Decomposed and optimized circuit over cx/swap and one-qubit gates.
    pub basis: Circuit,
    /// Circuit over rzx, rz and sx.
    pub native: Circuit,
    pub toffoli_variants: Vec<BasisVariantTag>,
    pub metrics: ModeMetrics,
    /// Distance to the input after lowering, when checked.
    pub verify_distance: Option<f64>,
}

fn next_ccx(dag: &CircuitDag) -> Option<usize> {
    dag.topological_order().into_iter().find(|&i| dag.gate(i).unwrap().kind == GateKind::Ccx)
}

/// Decompose every Toffoli of a routed circuit, in topological order, then
/// run the peephole optimizer over the whole circuit.
pub fn decompose_toffolis(
    routed: &Circuit,
    map: &CouplingMap,
    lib: &BasisLibrary,
    cfg: &PipelineConfig,
) -> Result<(Circuit, Vec<BasisVariantTag>)> {
    let mut dag = build_dag(routed);
    let mut chosen = Vec::new();
    while let Some(id) = next_ccx(&dag) {
        match cfg.mode {
            Mode::Qcontext => {
                let sel = select_basis_variant(&dag, id, lib, map, cfg.window, &cfg.peephole)?;
                log::debug!("ccx {:?}: {} (window cost {})", dag.gate(id).unwrap().qubits, sel.variant.tag, sel.window_cost);
                chosen.push(sel.variant.tag);
                dag = sel.dag;
            }
            Mode::Trios => {
                let q = dag.gate(id).unwrap().qubits.clone();
                let topo = map.topo_tag_of_triple(q[0], q[1], q[2])?;
                let v = lib.fixed_for(topo).ok_or_else(|| Error::Library(format!("no template for {topo}")))?;
                chosen.push(v.tag);
                substitute_variant(&mut dag, id, v)?;
            }
        }
    }
    optimize(&mut dag, &cfg.peephole);
    Ok((dag.to_circuit(), chosen))
}

/// Compile one circuit.
pub fn compile_pipeline(input: &Circuit, map: &CouplingMap, cfg: &PipelineConfig, libs: &Libraries) -> Result<Compiled> {
    let start = Instant::now();
    let routed = route(input, map, &RouteOptions { seed: cfg.seed, initial_layout: cfg.initial_layout.clone() })?;
    let (basis, toffoli_variants) = decompose_toffolis(&routed.circuit, map, &libs.basis, cfg)?;
    let lowering = match cfg.mode {
        Mode::Qcontext => LoweringMode::ContextAware,
        Mode::Trios => LoweringMode::Canonical,
    };
    let lowered = lower_circuit_to_native(&basis, map, &libs.native, lowering)?;
    let native = lowered.circuit;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let rzx = |tag: Tag| native.gates.iter().filter(|g| g.kind == GateKind::Rzx && g.tag == tag).count();
    let metrics = ModeMetrics {
        cr_r: rzx(Tag::Routing),
        cr_b: rzx(Tag::Program),
        sx: count_sx(&native),
        basis_cx: basis.cnot_cost(),
        time_ms: cfg.timing.then_some(elapsed),
    };
    let mut verify_distance = None;
    if cfg.verify {
        if input.num_qubits > cfg.verify_max_qubits {
            log::warn!("skipping verification: {} qubits exceed the cap of {}", input.num_qubits, cfg.verify_max_qubits);
        } else {
            let d = equivalence_distance(input, &native, &routed.initial_layout, &routed.final_layout)?;
            if d > NATIVE_VERIFY_TOL {
                return Err(Error::Verification(d));
            }
            verify_distance = Some(d);
        }
    }
    Ok(Compiled { routed, basis, native, toffoli_variants, metrics, verify_distance })
}

/// 1 − a/b, undefined when b is zero.
fn delta(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| 1.0 - a as f64 / b as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub benchmark: String,
    pub nq: usize,
    pub toffolis: usize,
    pub qcontext: ModeMetrics,
    pub trios: ModeMetrics,
    /// Undefined ("---") without Toffolis.
    pub delta_cr_b: Option<f64>,
    pub delta_sx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub verified: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchFailure {
    pub benchmark: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub coupling: String,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    pub failures: Vec<BenchFailure>,
    /// 1 − geomean of CR_b ratios over rows with Toffolis.
    pub geomean_delta_cr_b: Option<f64>,
    /// 1 − geomean of sx ratios over all rows.
    pub geomean_delta_sx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub geomean_time_ratio: Option<f64>,
}

fn geomean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    if xs.iter().any(|&x| x <= 0.0) {
        return Some(0.0);
    }
    Some((xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64).exp())
}

/// Compile one circuit in both modes with identical settings.
pub fn compare_modes(name: &str, c: &Circuit, map: &CouplingMap, cfg: &PipelineConfig, libs: &Libraries) -> Result<BenchRow> {
    let t = compile_pipeline(c, map, &cfg.with_mode(Mode::Trios), libs)?;
    let q = compile_pipeline(c, map, &cfg.with_mode(Mode::Qcontext), libs)?;
    let toffolis = c.count(GateKind::Ccx);
    let time_ratio = match (q.metrics.time_ms, t.metrics.time_ms) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    let verified = (cfg.verify && c.num_qubits <= cfg.verify_max_qubits).then_some(true);
    Ok(BenchRow {
        benchmark: name.to_string(),
        nq: c.num_qubits,
        toffolis,
        delta_cr_b: if toffolis > 0 { delta(q.metrics.cr_b, t.metrics.cr_b) } else { None },
        delta_sx: delta(q.metrics.sx, t.metrics.sx),
        qcontext: q.metrics,
        trios: t.metrics,
        time_ratio,
        verified,
    })
}

/// `.qasm` files of a directory, sorted by name.
pub fn suite_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> =
        std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "qasm")).collect();
    v.sort();
    Ok(v)
}

/// Run both modes over every file. Failures are recorded and skipped.
pub fn benchmark_run(paths: &[PathBuf], coupling: &str, cfg: &PipelineConfig) -> Result<Report> {
    if paths.is_empty() {
        return Err(Error::Io("no benchmark files given".into()));
    }
    let map = CouplingMap::load(coupling)?;
    let libs = Libraries::shared()?;
    let mut paths = paths.to_vec();
    paths.sort();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for p in &paths {
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let res = std::fs::read_to_string(p)
            .map_err(Error::from)
            .and_then(|t| parse_qasm(&t))
            .and_then(|c| compare_modes(&name, &c, &map, cfg, libs));
        match res {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::error!("{name}: {e}");
                failures.push(BenchFailure { benchmark: name, error: e.to_string() });
            }
        }
    }
    let cr: Vec<f64> = rows.iter().filter(|r| r.delta_cr_b.is_some()).map(|r| r.qcontext.cr_b as f64 / r.trios.cr_b as f64).collect();
    let sx: Vec<f64> = rows.iter().filter(|r| r.delta_sx.is_some()).map(|r| r.qcontext.sx as f64 / r.trios.sx as f64).collect();
    let tr: Vec<f64> = rows.iter().filter_map(|r| r.time_ratio).collect();
    Ok(Report {
        coupling: coupling.to_string(),
        seed: cfg.seed,
        geomean_delta_cr_b: geomean(&cr).map(|g| 1.0 - g),
        geomean_delta_sx: geomean(&sx).map(|g| 1.0 - g),
        geomean_time_ratio: geomean(&tr),
        rows,
        failures,
    })
}

fn pct(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{:.1}%", 100.0 * v),
        None => "---".to_string(),
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// Plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let timing = self.rows.iter().any(|r| r.time_ratio.is_some());
        let _ = writeln!(s, "{:<20} | {:^19} | {:^19} |", "", "trios", "qcontext");
        let _ = write!(
            s,
            "{:<16} {:>3} | {:>5} {:>6} {:>6} | {:>5} {:>6} {:>6} | {:>7} {:>7}",
            "benchmark", "nq", "CR_r", "CR_b", "#sx", "CR_r", "CR_b", "#sx", "dCR_b", "dsx"
        );
        if timing {
            s.push_str("  Tc/Tt");
        }
        let _ = writeln!(s);
        for r in &self.rows {
            let _ = write!(
                s,
                "{:<16} {:>3} | {:>5} {:>6} {:>6} | {:>5} {:>6} {:>6} | {:>7} {:>7}",
                r.benchmark,
                r.nq,
                r.trios.cr_r,
                r.trios.cr_b,
                r.trios.sx,
                r.qcontext.cr_r,
                r.qcontext.cr_b,
                r.qcontext.sx,
                pct(r.delta_cr_b),
                pct(r.delta_sx)
            );
            if let Some(t) = r.time_ratio {
                let _ = write!(s, "  {t:.2}");
            }
            let _ = writeln!(s);
        }
        let _ = write!(s, "geomean {:>53} {:>7}", pct(self.geomean_delta_cr_b), pct(self.geomean_delta_sx));
        if let Some(t) = self.geomean_time_ratio {
            let _ = write!(s, "  {t:.2}");
        }
        let _ = writeln!(s);
        for f in &self.failures {
            let _ = writeln!(s, "FAILED {}: {}", f.benchmark, f.error);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    fn sandwich() -> Circuit {
        Circuit::from_gates(3, vec![Gate::cx(0, 1), Gate::ccx(0, 1, 2), Gate::swap(1, 2)]).unwrap()
    }

    #[test]
    fn linear_toffoli_costs_eight_in_both_modes() {
        let libs = Libraries::shared().unwrap();
        let map = CouplingMap::builtin("line-3").unwrap();
        let c = Circuit::from_gates(3, vec![Gate::ccx(0, 1, 2)]).unwrap();
        for mode in [Mode::Trios, Mode::Qcontext] {
            let cfg = PipelineConfig { mode, verify: true, ..PipelineConfig::default() };
            let out = compile_pipeline(&c, &map, &cfg, libs).unwrap();
            assert_eq!(out.metrics.basis_cx, 8, "{mode:?}");
            assert_eq!(out.metrics.cr_b, 8);
        }
    }

    #[test]
    fn sandwich_baseline_is_ten() {
        let libs = Libraries::shared().unwrap();
        let map = CouplingMap::builtin("full-3").unwrap();
        let cfg = PipelineConfig { mode: Mode::Trios, verify: true, ..PipelineConfig::default() };
        let out = compile_pipeline(&sandwich(), &map, &cfg, libs).unwrap();
        assert_eq!(out.metrics.basis_cx, 10);
    }

    #[test]
    fn metric_identity() {
        let libs = Libraries::shared().unwrap();
        let map = CouplingMap::builtin("line-4").unwrap();
        let c = Circuit::from_gates(4, vec![Gate::h(0), Gate::ccx(0, 3, 1), Gate::cx(3, 0), Gate::t(2), Gate::cx(2, 0)]).unwrap();
        let out = compile_pipeline(&c, &map, &PipelineConfig { verify: true, ..PipelineConfig::default() }, libs).unwrap();
        assert_eq!(out.metrics.cr_r + out.metrics.cr_b, out.native.count(GateKind::Rzx));
        assert!(out.metrics.cr_r > 0);
        assert_eq!(out.metrics.sx, count_sx(&out.native));
    }

    #[test]
    fn deltas() {
        assert_eq!(delta(7, 10), Some(1.0 - 0.7));
        assert_eq!(delta(1, 0), None);
        assert_eq!(geomean(&[]), None);
        assert!((geomean(&[0.5, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }
}
