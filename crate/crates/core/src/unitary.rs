//! Dense unitaries, phase-invariant comparison and U3 extraction.
//!
//! Conventions follow OpenQASM 2 / Qiskit: qubit 0 is the least significant
//! bit of a basis index, and for a multi-qubit gate the first listed qubit is
//! the least significant bit of the gate's local index.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};

/// Widest circuit `circuit_unitary` accepts.
pub const MAX_QUBITS: usize = 12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary {
    dim: usize,
    data: Vec<C64>,
}

impl Unitary {
    pub fn identity(dim: usize) -> Unitary {
        let mut u = Unitary::zeros(dim);
        for i in 0..dim {
            u.data[i * dim + i] = ONE;
        }
        u
    }

    pub fn zeros(dim: usize) -> Unitary {
        Unitary { dim, data: vec![ZERO; dim * dim] }
    }

    /// Build from row-major entries, which reads naturally in literals.
    pub fn from_rows(dim: usize, rows: &[C64]) -> Unitary {
        assert_eq!(rows.len(), dim * dim);
        let mut u = Unitary::zeros(dim);
        for r in 0..dim {
            for c in 0..dim {
                u.data[c * dim + r] = rows[r * dim + c];
            }
        }
        u
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[c * self.dim + r]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[c * self.dim + r] = v;
    }

    pub fn column(&self, c: usize) -> &[C64] {
        &self.data[c * self.dim..(c + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Unitary) -> Unitary {
        assert_eq!(self.dim, rhs.dim);
        let d = self.dim;
        let mut out = Unitary::zeros(d);
        for c in 0..d {
            let col = &mut out.data[c * d..(c + 1) * d];
            for k in 0..d {
                let b = rhs.data[c * d + k];
                if b == ZERO {
                    continue;
                }
                let a = &self.data[k * d..(k + 1) * d];
                for r in 0..d {
                    col[r] += a[r] * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Unitary {
        let d = self.dim;
        let mut out = Unitary::zeros(d);
        for c in 0..d {
            for r in 0..d {
                out.data[r * d + c] = self.data[c * d + r].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&self, s: C64) -> Unitary {
        Unitary { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    /// Frobenius norm of `U†U − I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut acc = 0.0;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let e = if r == c { ONE } else { ZERO };
                acc += (p.get(r, c) - e).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn determinant(&self) -> C64 {
        // Gaussian elimination with partial pivoting; only used on tiny matrices.
        let d = self.dim;
        let mut a: Vec<Vec<C64>> = (0..d).map(|r| (0..d).map(|c| self.get(r, c)).collect()).collect();
        let mut det = ONE;
        for k in 0..d {
            let p = (k..d).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap();
            if a[p][k].norm() == 0.0 {
                return ZERO;
            }
            if p != k {
                a.swap(p, k);
                det = -det;
            }
            det *= a[k][k];
            for i in k + 1..d {
                let f = a[i][k] / a[k][k];
                for j in k..d {
                    let v = a[k][j];
                    a[i][j] -= f * v;
                }
            }
        }
        det
    }

    /// Tensor product `self ⊗ rhs`; `rhs` occupies the low-order qubits.
    pub fn kron(&self, rhs: &Unitary) -> Unitary {
        let d = self.dim * rhs.dim;
        let mut out = Unitary::zeros(d);
        for r1 in 0..self.dim {
            for c1 in 0..self.dim {
                let a = self.get(r1, c1);
                for r2 in 0..rhs.dim {
                    for c2 in 0..rhs.dim {
                        out.set(r1 * rhs.dim + r2, c1 * rhs.dim + c2, a * rhs.get(r2, c2));
                    }
                }
            }
        }
        out
    }

    /// Replace `self` by `G · self`, where `G` is `gate` acting on `qubits`.
    pub fn apply_left(&mut self, gate: &Unitary, qubits: &[usize]) {
        let d = self.dim;
        let plan = ApplyPlan::new(gate.dim, qubits);
        for c in 0..d {
            plan.apply(gate, &mut self.data[c * d..(c + 1) * d]);
        }
    }

    /// The `n`-qubit operator that applies `gate` to `qubits`.
    pub fn embed(n: usize, gate: &Unitary, qubits: &[usize]) -> Unitary {
        let mut u = Unitary::identity(1 << n);
        u.apply_left(gate, qubits);
        u
    }
}

struct ApplyPlan {
    offsets: Vec<usize>,
    mask: usize,
}

impl ApplyPlan {
    fn new(gdim: usize, qubits: &[usize]) -> ApplyPlan {
        assert_eq!(gdim, 1 << qubits.len());
        let offsets = (0..gdim).map(|l| qubits.iter().enumerate().map(|(j, &q)| ((l >> j) & 1) << q).sum()).collect();
        let mask = qubits.iter().map(|&q| 1usize << q).sum();
        ApplyPlan { offsets, mask }
    }

    fn apply(&self, gate: &Unitary, state: &mut [C64]) {
        let g = gate.dim;
        let mut buf = [ZERO; 8];
        for base in 0..state.len() {
            if base & self.mask != 0 {
                continue;
            }
            for l in 0..g {
                buf[l] = state[base + self.offsets[l]];
            }
            for r in 0..g {
                let mut acc = ZERO;
                for l in 0..g {
                    acc += gate.data[l * g + r] * buf[l];
                }
                state[base + self.offsets[r]] = acc;
            }
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Euler angles of the OpenQASM `u3` gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct U3Params {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl U3Params {
    pub const IDENTITY: U3Params = U3Params { theta: 0.0, phi: 0.0, lambda: 0.0 };

    pub fn new(theta: f64, phi: f64, lambda: f64) -> U3Params {
        U3Params { theta, phi, lambda }
    }

    /// Angles in degrees, as they are usually written.
    pub fn deg(theta: f64, phi: f64, lambda: f64) -> U3Params {
        U3Params::new(theta.to_radians(), phi.to_radians(), lambda.to_radians())
    }

    pub fn matrix(&self) -> Unitary {
        u3_matrix(self.theta, self.phi, self.lambda)
    }

    /// The `(−θ, −λ, −φ)` inverse.
    pub fn inverse(&self) -> U3Params {
        U3Params::new(-self.theta, -self.lambda, -self.phi)
    }

    pub fn to_gate(&self, q: usize) -> Gate {
        Gate::u3(q, self.theta, self.phi, self.lambda)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta, self.phi, self.lambda]
    }
}

pub fn u3_matrix(theta: f64, phi: f64, lambda: f64) -> Unitary {
    let (s, co) = (theta / 2.0).sin_cos();
    let el = C64::from_polar(1.0, lambda);
    let ep = C64::from_polar(1.0, phi);
    Unitary::from_rows(2, &[c(co, 0.0), -el * s, ep * s, ep * el * co])
}

/// Partial derivatives of the u3 matrix with respect to (θ, φ, λ).
pub fn u3_derivatives(theta: f64, phi: f64, lambda: f64) -> [Unitary; 3] {
    let (s, co) = (theta / 2.0).sin_cos();
    let el = C64::from_polar(1.0, lambda);
    let ep = C64::from_polar(1.0, phi);
    let i = C64::i();
    let dt = Unitary::from_rows(2, &[c(-s / 2.0, 0.0), -el * co / 2.0, ep * co / 2.0, -ep * el * s / 2.0]);
    let dp = Unitary::from_rows(2, &[ZERO, ZERO, i * ep * s, i * ep * el * co]);
    let dl = Unitary::from_rows(2, &[ZERO, -i * el * s, ZERO, i * ep * el * co]);
    [dt, dp, dl]
}

pub fn rz_matrix(theta: f64) -> Unitary {
    Unitary::from_rows(2, &[C64::from_polar(1.0, -theta / 2.0), ZERO, ZERO, C64::from_polar(1.0, theta / 2.0)])
}

/// exp(−i θ/2 · Z⊗X) with Z on the first (driving) qubit.
pub fn rzx_matrix(theta: f64) -> Unitary {
    let (s, co) = (theta / 2.0).sin_cos();
    let mut u = Unitary::identity(4).scale(c(co, 0.0));
    for i in 0..4usize {
        let sign = if i & 1 == 1 { -1.0 } else { 1.0 };
        u.set(i ^ 2, i, c(0.0, -s * sign));
    }
    u
}

fn permutation(dim: usize, swaps: &[(usize, usize)]) -> Unitary {
    let mut perm: Vec<usize> = (0..dim).collect();
    for &(a, b) in swaps {
        perm.swap(a, b);
    }
    let mut u = Unitary::zeros(dim);
    for (col, &row) in perm.iter().enumerate() {
        u.set(row, col, ONE);
    }
    u
}

pub fn gate_unitary(gate: &Gate) -> Result<Unitary> {
    let p = &gate.params;
    let h = FRAC_1_SQRT_2;
    Ok(match gate.kind {
        GateKind::U3 => u3_matrix(p[0], p[1], p[2]),
        GateKind::Rz => rz_matrix(p[0]),
        GateKind::Sx => Unitary::from_rows(2, &[c(0.5, 0.5), c(0.5, -0.5), c(0.5, -0.5), c(0.5, 0.5)]),
        GateKind::X => Unitary::from_rows(2, &[ZERO, ONE, ONE, ZERO]),
        GateKind::H => Unitary::from_rows(2, &[c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)]),
        GateKind::T => Unitary::from_rows(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, FRAC_PI_4)]),
        GateKind::Tdg => Unitary::from_rows(2, &[ONE, ZERO, ZERO, C64::from_polar(1.0, -FRAC_PI_4)]),
        GateKind::Cx => permutation(4, &[(1, 3)]),
        GateKind::Swap => permutation(4, &[(1, 2)]),
        GateKind::Ccx => permutation(8, &[(3, 7)]),
        GateKind::Rzx => rzx_matrix(p[0]),
        GateKind::Barrier => return Err(Error::UnsupportedGate("barrier has no matrix".into())),
    })
}

/// Unitary of the whole circuit, including its global phase.
pub fn circuit_unitary(circuit: &Circuit) -> Result<Unitary> {
    let n = circuit.num_qubits;
    if n > MAX_QUBITS {
        return Err(Error::TooWide(n, MAX_QUBITS));
    }
    let mut u = Unitary::identity(1 << n);
    // Runs of one-qubit gates are fused before touching the big matrix.
    let mut pending: Vec<Option<Unitary>> = vec![None; n];
    for g in &circuit.gates {
        if g.kind == GateKind::Barrier {
            continue;
        }
        let m = gate_unitary(g)?;
        if g.qubits.len() == 1 {
            let q = g.qubits[0];
            pending[q] = Some(match pending[q].take() {
                Some(prev) => m.mul(&prev),
                None => m,
            });
            continue;
        }
        for &q in &g.qubits {
            if let Some(p) = pending[q].take() {
                u.apply_left(&p, &[q]);
            }
        }
        u.apply_left(&m, &g.qubits);
    }
    for (q, p) in pending.into_iter().enumerate() {
        if let Some(p) = p {
            u.apply_left(&p, &[q]);
        }
    }
    if circuit.global_phase != 0.0 {
        u = u.scale(C64::from_polar(1.0, circuit.global_phase));
    }
    Ok(u)
}

/// Widest circuit [`simulate`] accepts.
pub const MAX_SIM_QUBITS: usize = 26;

/// Apply `circuit` (global phase included) to a state vector in place.
pub fn simulate(circuit: &Circuit, state: &mut [C64]) -> Result<()> {
    let n = circuit.num_qubits;
    if n > MAX_SIM_QUBITS {
        return Err(Error::TooWide(n, MAX_SIM_QUBITS));
    }
    if state.len() != 1 << n {
        return Err(Error::DimensionMismatch(state.len(), 1 << n));
    }
    for g in &circuit.gates {
        if g.kind == GateKind::Barrier {
            continue;
        }
        let m = gate_unitary(g)?;
        ApplyPlan::new(m.dim, &g.qubits).apply(&m, state);
    }
    if circuit.global_phase != 0.0 {
        let e = C64::from_polar(1.0, circuit.global_phase);
        state.iter_mut().for_each(|a| *a *= e);
    }
    Ok(())
}

/// Estimate of the phase-invariant distance between two equal-width
/// circuits from their action on `samples` random states, for widths where
/// dense unitaries are out of reach. Exact agreement gives 0 up to rounding.
pub fn sampled_phase_distance(a: &Circuit, b: &Circuit, samples: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    if a.num_qubits != b.num_qubits {
        return Err(Error::DimensionMismatch(a.num_qubits, b.num_qubits));
    }
    let d = 1usize << a.num_qubits;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut acc = ZERO;
    for _ in 0..samples.max(1) {
        let mut psi: Vec<C64> = (0..d).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        let mut phi = psi.clone();
        simulate(a, &mut psi)?;
        simulate(b, &mut phi)?;
        acc += phi.iter().zip(&psi).map(|(x, y)| x.conj() * y).sum::<C64>();
    }
    let t = acc.norm() / samples.max(1) as f64;
    Ok((2.0 * d as f64 * (1.0 - t)).max(0.0))
}

/// min over φ of ‖U − e^{iφ}V‖²_F.
pub fn phase_distance(u: &Unitary, v: &Unitary) -> Result<f64> {
    if u.dim != v.dim {
        return Err(Error::DimensionMismatch(u.dim, v.dim));
    }
    let tr: C64 = v.data.iter().zip(&u.data).map(|(a, b)| a.conj() * b).sum();
    let d = 2.0 * u.dim as f64 - 2.0 * tr.norm();
    Ok(d.max(0.0))
}

pub fn phase_equiv(u: &Unitary, v: &Unitary, tol: f64) -> Result<bool> {
    Ok(phase_distance(u, v)? <= tol)
}

/// Phase φ minimizing ‖U − e^{iφ}V‖, i.e. arg tr(V†U).
pub fn relative_phase(u: &Unitary, v: &Unitary) -> f64 {
    let tr: C64 = v.data.iter().zip(&u.data).map(|(a, b)| a.conj() * b).sum();
    tr.arg()
}

/// Map an angle into (−π, π].
pub fn normalize_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

const SNAP: f64 = 1e-12;

/// Decompose a 2×2 unitary as `e^{i·phase} · U3(θ, φ, λ)` in canonical form.
pub fn extract_u3(m: &Unitary) -> Result<(U3Params, f64)> {
    if m.dim != 2 {
        return Err(Error::DimensionMismatch(m.dim, 2));
    }
    let dev = m.unitarity_deviation();
    if dev > 1e-8 {
        return Err(Error::NotUnitary(dev));
    }
    let (m00, m01, m10, m11) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let co = m00.norm();
    let s = m10.norm();
    let (theta, phi, lambda, gamma);
    if s < SNAP {
        theta = 0.0;
        gamma = m00.arg();
        phi = 0.0;
        lambda = m11.arg() - gamma;
    } else if co < SNAP {
        theta = PI;
        gamma = m10.arg();
        phi = 0.0;
        lambda = (-m01).arg() - gamma;
    } else {
        theta = 2.0 * s.atan2(co);
        gamma = if co >= s { m00.arg() } else { (m10 * (-m01) * m11.conj()).arg() };
        phi = m10.arg() - gamma;
        lambda = (-m01).arg() - gamma;
    }
    Ok((U3Params::new(theta, normalize_angle(phi), normalize_angle(lambda)), normalize_angle(gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Unitary, b: &Unitary, tol: f64) -> bool {
        a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn u3_zero_is_identity() {
        assert!(close(&u3_matrix(0.0, 0.0, 0.0), &Unitary::identity(2), 1e-15));
        let a = U3Params::deg(-90.0, 0.0, 0.0).matrix();
        let b = U3Params::deg(90.0, 0.0, 0.0).matrix();
        assert!(close(&a.mul(&b), &Unitary::identity(2), 1e-15));
    }

    #[test]
    fn sx_squares_to_x() {
        let sx = gate_unitary(&Gate::sx(0)).unwrap();
        let x = gate_unitary(&Gate::x(0)).unwrap();
        assert!(close(&sx.mul(&sx), &x, 1e-15));
    }

    #[test]
    fn ccx_is_the_3_7_transposition() {
        let u = gate_unitary(&Gate::ccx(0, 1, 2)).unwrap();
        for col in 0..8 {
            let row = match col {
                3 => 7,
                7 => 3,
                x => x,
            };
            assert_eq!(u.get(row, col), ONE);
        }
    }

    #[test]
    fn cx_little_endian() {
        // control qubit 0 set, target qubit 1 flips: |01> (index 1) -> |11> (index 3)
        let u = circuit_unitary(&Circuit::from_gates(2, vec![Gate::cx(0, 1)]).unwrap()).unwrap();
        assert_eq!(u.get(3, 1), ONE);
        let u = circuit_unitary(&Circuit::from_gates(2, vec![Gate::cx(1, 0)]).unwrap()).unwrap();
        assert_eq!(u.get(3, 2), ONE);
    }

    #[test]
    fn rzx_matches_exponential() {
        // Z⊗X squared is the identity, so exp(−iθ/2 ZX) = cos I − i sin ZX.
        let th = 0.37;
        let u = rzx_matrix(th);
        let z = Unitary::from_rows(2, &[ONE, ZERO, ZERO, -ONE]);
        let x = Unitary::from_rows(2, &[ZERO, ONE, ONE, ZERO]);
        let zx = x.kron(&z); // Z on the low-order (first) qubit
        let want = Unitary::identity(4)
            .scale(c((th / 2.0).cos(), 0.0))
            .as_slice()
            .iter()
            .zip(zx.as_slice())
            .map(|(a, b)| a + b * c(0.0, -(th / 2.0).sin()))
            .collect::<Vec<_>>();
        assert!(u.as_slice().iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn phase_distance_examples() {
        let x = gate_unitary(&Gate::x(0)).unwrap();
        let i = Unitary::identity(2);
        assert!((phase_distance(&i, &x).unwrap() - 4.0).abs() < 1e-12);
        let h = gate_unitary(&Gate::h(0)).unwrap();
        let hp = h.scale(C64::from_polar(1.0, PI / 7.0));
        assert!(phase_distance(&h, &hp).unwrap() < 1e-14);
        assert!(phase_distance(&h, &Unitary::identity(4)).is_err());
    }

    #[test]
    fn extract_special_cases() {
        let (p, g) = extract_u3(&Unitary::identity(2)).unwrap();
        assert_eq!((p.theta, p.phi, p.lambda, g), (0.0, 0.0, 0.0, 0.0));
        let x = gate_unitary(&Gate::x(0)).unwrap();
        let (p, g) = extract_u3(&x).unwrap();
        assert_eq!(p.theta, PI);
        assert_eq!(p.phi, 0.0);
        assert!((p.lambda - PI).abs() < 1e-15);
        assert!(close(&p.matrix().scale(C64::from_polar(1.0, g)), &x, 1e-15));
        let bad = Unitary::from_rows(2, &[ONE, ONE, ZERO, ONE]);
        assert!(extract_u3(&bad).is_err());
    }

    #[test]
    fn determinant_of_phase() {
        let u = Unitary::identity(4).scale(C64::from_polar(1.0, 0.3));
        assert!((u.determinant() - C64::from_polar(1.0, 1.2)).norm() < 1e-14);
    }
    #[test]
    fn statevector_agrees_with_dense() {
        let c = Circuit::from_gates(
            3,
            vec![Gate::h(0), Gate::ccx(0, 1, 2), Gate::u3(1, 0.3, 0.2, 0.1), Gate::rzx(2, 0, 0.7), Gate::swap(0, 2)],
        )
        .unwrap();
        let u = circuit_unitary(&c).unwrap();
        for k in 0..8 {
            let mut s = vec![ZERO; 8];
            s[k] = ONE;
            simulate(&c, &mut s).unwrap();
            for r in 0..8 {
                assert!((s[r] - u.get(r, k)).norm() < 1e-14);
            }
        }
        let mut shifted = c.clone();
        shifted.global_phase += 0.4;
        assert!(sampled_phase_distance(&c, &shifted, 3, 1).unwrap() < 1e-12);
        let mut other = c.clone();
        other.gates.push(Gate::t(1));
        assert!(sampled_phase_distance(&c, &other, 3, 1).unwrap() > 1e-2);
    }
}
