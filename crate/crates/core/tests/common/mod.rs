//! Reference simulator for the integration tests. Written from the gate
//! definitions alone and shares no code with the library's matrix module.
#![allow(dead_code)]

use num_complex::Complex64 as C;
use qcontext::{Circuit, Gate, GateKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const I: C = C::new(0.0, 1.0);

fn expi(x: f64) -> C {
    C::new(x.cos(), x.sin())
}

/// 2×2 matrix [[a, b], [c, d]] of a one-qubit gate.
fn one_qubit(g: &Gate) -> [C; 4] {
    let p = &g.params;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match g.kind {
        GateKind::U3 => {
            let (t, f, l) = (p[0] / 2.0, p[1], p[2]);
            [C::from(t.cos()), -expi(l) * t.sin(), expi(f) * t.sin(), expi(f + l) * t.cos()]
        }
        GateKind::Rz => [expi(-p[0] / 2.0), C::from(0.0), C::from(0.0), expi(p[0] / 2.0)],
        GateKind::Sx => {
            let (a, b) = (C::new(0.5, 0.5), C::new(0.5, -0.5));
            [a, b, b, a]
        }
        GateKind::X => [C::from(0.0), C::from(1.0), C::from(1.0), C::from(0.0)],
        GateKind::H => [C::from(s), C::from(s), C::from(s), C::from(-s)],
        GateKind::T => [C::from(1.0), C::from(0.0), C::from(0.0), expi(std::f64::consts::FRAC_PI_4)],
        GateKind::Tdg => [C::from(1.0), C::from(0.0), C::from(0.0), expi(-std::f64::consts::FRAC_PI_4)],
        k => panic!("{k} is not a one-qubit gate"),
    }
}

fn bit(k: usize, q: usize) -> bool {
    k >> q & 1 == 1
}

/// Apply one gate to a state vector (qubit q is bit q of the index).
pub fn apply(g: &Gate, s: &mut [C]) {
    let q = &g.qubits;
    match g.kind {
        GateKind::Barrier => {}
        GateKind::Cx => {
            for k in 0..s.len() {
                if bit(k, q[0]) && !bit(k, q[1]) {
                    s.swap(k, k | 1 << q[1]);
                }
            }
        }
        GateKind::Ccx => {
            for k in 0..s.len() {
                if bit(k, q[0]) && bit(k, q[1]) && !bit(k, q[2]) {
                    s.swap(k, k | 1 << q[2]);
                }
            }
        }
        GateKind::Swap => {
            for k in 0..s.len() {
                if bit(k, q[0]) && !bit(k, q[1]) {
                    s.swap(k, k ^ (1 << q[0]) ^ (1 << q[1]));
                }
            }
        }
        GateKind::Rzx => {
            // exp(-iθ/2 Z⊗X) = cos(θ/2) − i sin(θ/2) Z_a X_b
            let (c, sn) = ((g.params[0] / 2.0).cos(), (g.params[0] / 2.0).sin());
            let old = s.to_vec();
            for k in 0..s.len() {
                let z = if bit(k, q[0]) { -1.0 } else { 1.0 };
                s[k] = c * old[k] - I * sn * z * old[k ^ (1 << q[1])];
            }
        }
        _ => {
            let [a, b, c, d] = one_qubit(g);
            for k in 0..s.len() {
                if !bit(k, q[0]) {
                    let j = k | 1 << q[0];
                    let (x, y) = (s[k], s[j]);
                    s[k] = a * x + b * y;
                    s[j] = c * x + d * y;
                }
            }
        }
    }
}

pub fn run(c: &Circuit, s: &mut [C]) {
    assert_eq!(s.len(), 1 << c.num_qubits);
    for g in &c.gates {
        apply(g, s);
    }
    let ph = expi(c.global_phase);
    s.iter_mut().for_each(|x| *x *= ph);
}

/// Columns of the circuit's matrix.
pub fn matrix(c: &Circuit) -> Vec<Vec<C>> {
    let d = 1 << c.num_qubits;
    (0..d)
        .map(|k| {
            let mut s = vec![C::from(0.0); d];
            s[k] = C::from(1.0);
            run(c, &mut s);
            s
        })
        .collect()
}

/// 2d − 2|tr(B†A)|, zero iff the matrices agree up to a global phase.
pub fn distance(a: &[Vec<C>], b: &[Vec<C>]) -> f64 {
    let d = a.len();
    let tr: C = a.iter().zip(b).map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| y.conj() * x).sum::<C>()).sum();
    2.0 * d as f64 - 2.0 * tr.norm()
}

pub fn circuit_distance(a: &Circuit, b: &Circuit) -> f64 {
    distance(&matrix(a), &matrix(b))
}

/// Toffoli, CNOT etc. as reference matrices.
pub fn gate_matrix(g: Gate, n: usize) -> Vec<Vec<C>> {
    matrix(&Circuit::from_gates(n, vec![g]).unwrap())
}

pub fn random_state(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
    let mut s: Vec<C> = (0..1usize << n).map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = s.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    s.iter_mut().for_each(|x| *x /= norm);
    s
}

/// Relabel qubits: bit v of the input index moves to bit `perm[v]`.
pub fn permute(s: &[C], perm: &[usize]) -> Vec<C> {
    let mut out = vec![C::from(0.0); s.len()];
    for (k, &x) in s.iter().enumerate() {
        let j = perm.iter().enumerate().filter(|&(v, _)| bit(k, v)).fold(0, |acc, (_, &p)| acc | 1 << p);
        out[j] = x;
    }
    out
}

fn inverse_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (v, &x) in p.iter().enumerate() {
        inv[x] = v;
    }
    inv
}

/// Distance between an input program and its routed physical version.
/// Both layouts map virtual → physical over the whole device; virtual
/// qubits beyond the program are idle. Dense when `exact`, otherwise
/// estimated from a few random states.
pub fn routed_distance(input: &Circuit, physical: &Circuit, initial: &[usize], final_: &[usize], exact: bool) -> f64 {
    let n = physical.num_qubits;
    let mut wide = input.clone();
    wide.num_qubits = n;
    let expected = |s: &[C]| {
        let mut v = permute(s, &inverse_perm(initial));
        run(&wide, &mut v);
        permute(&v, final_)
    };
    let got = |s: &[C]| {
        let mut v = s.to_vec();
        run(physical, &mut v);
        v
    };
    if exact {
        let d = 1 << n;
        let basis = |k: usize| {
            let mut s = vec![C::from(0.0); d];
            s[k] = C::from(1.0);
            s
        };
        let a: Vec<Vec<C>> = (0..d).map(|k| got(&basis(k))).collect();
        let b: Vec<Vec<C>> = (0..d).map(|k| expected(&basis(k))).collect();
        distance(&a, &b)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples = 3;
        let mut acc = C::from(0.0);
        for _ in 0..samples {
            let s = random_state(n, &mut rng);
            let (a, b) = (got(&s), expected(&s));
            acc += b.iter().zip(&a).map(|(y, x)| y.conj() * x).sum::<C>();
        }
        2.0 * (1u64 << n) as f64 * (1.0 - acc.norm() / samples as f64)
    }
}

/// Haar-random unitary of dimension d via Gram–Schmidt on a Gaussian matrix.
pub fn haar(d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<C>> {
    let gauss = |rng: &mut ChaCha8Rng| {
        // Box–Muller.
        let (u, v): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
        let r = (-2.0 * u.ln()).sqrt();
        C::new(r * (std::f64::consts::TAU * v).cos(), r * (std::f64::consts::TAU * v).sin())
    };
    let mut cols: Vec<Vec<C>> = Vec::with_capacity(d);
    for _ in 0..d {
        let mut c: Vec<C> = (0..d).map(|_| gauss(rng)).collect();
        for p in &cols {
            let proj: C = p.iter().zip(&c).map(|(a, b)| a.conj() * b).sum();
            c.iter_mut().zip(p).for_each(|(x, y)| *x -= proj * y);
        }
        let n = c.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= n);
        cols.push(c);
    }
    cols
}

/// Column-major matrix into the library's type.
pub fn to_unitary(cols: &[Vec<C>]) -> qcontext::unitary::Unitary {
    let d = cols.len();
    let mut u = qcontext::unitary::Unitary::zeros(d);
    for (c, col) in cols.iter().enumerate() {
        for (r, &x) in col.iter().enumerate() {
            u.set(r, c, x);
        }
    }
    u
}

pub fn cnot_count(c: &Circuit) -> usize {
    c.gates.iter().filter(|g| g.kind == GateKind::Cx).count()
}
