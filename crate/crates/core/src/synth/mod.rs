//! Least-squares fitting of U3 angles in a fixed gate skeleton.
//!
//! The objective is ‖U(x) − e^{iφ}·T‖²_F over the free U3 angles `x` and a
//! global-phase parameter `φ`. Residuals are the real and imaginary parts of
//! every matrix entry, so the problem has 2·4ⁿ residuals and `3·free + 1`
//! parameters.

mod optim;
mod resynth;

pub use optim::Method;
pub use resynth::{cnot_lower_bound, resynth_2q_block, resynth_2q_block_with, two_qubit_skeleton};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::unitary::{extract_u3, gate_unitary, phase_distance, relative_phase, u3_derivatives, u3_matrix, U3Params, Unitary};

#[derive(Clone, Debug, PartialEq)]
pub enum Slot {
    /// A gate with nothing to fit.
    Fixed(Gate),
    /// A U3 on `qubit`; `fixed` pins its angles (corner constraint).
    U3 { qubit: usize, fixed: Option<U3Params> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    pub num_qubits: usize,
    pub slots: Vec<Slot>,
}

impl Skeleton {
    pub fn new(num_qubits: usize) -> Skeleton {
        Skeleton { num_qubits, slots: Vec::new() }
    }

    pub fn fixed(mut self, g: Gate) -> Skeleton {
        self.slots.push(Slot::Fixed(g));
        self
    }

    pub fn u3(mut self, qubit: usize) -> Skeleton {
        self.slots.push(Slot::U3 { qubit, fixed: None });
        self
    }

    pub fn pinned_u3(mut self, qubit: usize, p: U3Params) -> Skeleton {
        self.slots.push(Slot::U3 { qubit, fixed: Some(p) });
        self
    }

    pub fn num_free(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::U3 { fixed: None, .. })).count()
    }

    /// Length of the angle vector (the phase parameter is not included).
    pub fn num_params(&self) -> usize {
        3 * self.num_free()
    }

    fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    /// Per-slot local matrices for angle vector `x`.
    fn local(&self, x: &[f64]) -> Vec<(Unitary, Vec<usize>)> {
        let mut k = 0;
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Fixed(g) => (gate_unitary(g).expect("skeleton gate has a matrix"), g.qubits.clone()),
                Slot::U3 { qubit, fixed: Some(p) } => (p.matrix(), vec![*qubit]),
                Slot::U3 { qubit, fixed: None } => {
                    let m = u3_matrix(x[k], x[k + 1], x[k + 2]);
                    k += 3;
                    (m, vec![*qubit])
                }
            })
            .collect()
    }

    /// U(x), ignoring the phase parameter.
    pub fn unitary(&self, x: &[f64]) -> Unitary {
        let mut u = Unitary::identity(self.dim());
        for (m, qs) in self.local(x) {
            u.apply_left(&m, &qs);
        }
        u
    }

    /// U(x) together with ∂U/∂x_j for every angle.
    pub fn unitary_and_derivatives(&self, x: &[f64]) -> (Unitary, Vec<Unitary>) {
        let d = self.dim();
        let local = self.local(x);
        let m = local.len();
        let mut prefix = Vec::with_capacity(m + 1);
        prefix.push(Unitary::identity(d));
        for (g, qs) in &local {
            let mut p = prefix.last().unwrap().clone();
            p.apply_left(g, qs);
            prefix.push(p);
        }
        // suffix[k] = G_{m-1} ... G_{k+1}
        let mut suffix = vec![Unitary::identity(d); m];
        for k in (0..m.saturating_sub(1)).rev() {
            let (g, qs) = &local[k + 1];
            suffix[k] = suffix[k + 1].mul(&Unitary::embed(self.num_qubits, g, qs));
        }
        let mut derivs = Vec::with_capacity(self.num_params());
        let mut k = 0;
        for (idx, s) in self.slots.iter().enumerate() {
            if let Slot::U3 { qubit, fixed: None } = s {
                for dm in u3_derivatives(x[k], x[k + 1], x[k + 2]) {
                    let mut t = prefix[idx].clone();
                    t.apply_left(&dm, &[*qubit]);
                    derivs.push(suffix[idx].mul(&t));
                }
                k += 3;
            }
        }
        (prefix.pop().unwrap(), derivs)
    }

    /// Residual vector for parameters `xp` = angles followed by the phase.
    pub fn residuals(&self, target: &Unitary, xp: &[f64]) -> Vec<f64> {
        let (x, phi) = xp.split_at(self.num_params());
        let u = self.unitary(x);
        residual_vec(&u, target, phi[0])
    }

    /// Residuals and their Jacobian (rows: residuals, columns: angles then phase).
    pub fn residuals_and_jacobian(&self, target: &Unitary, xp: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let np = self.num_params();
        let (x, phi) = xp.split_at(np);
        let (u, derivs) = self.unitary_and_derivatives(x);
        let r = residual_vec(&u, target, phi[0]);
        let nr = r.len();
        let half = nr / 2;
        let mut j = DMatrix::zeros(nr, np + 1);
        for (c, du) in derivs.iter().enumerate() {
            for (i, z) in du.as_slice().iter().enumerate() {
                j[(i, c)] = z.re;
                j[(half + i, c)] = z.im;
            }
        }
        let e = C64::from_polar(1.0, phi[0]) * C64::i();
        for (i, t) in target.as_slice().iter().enumerate() {
            let z = -e * t;
            j[(i, np)] = z.re;
            j[(half + i, np)] = z.im;
        }
        (r, j)
    }

    /// Materialize the skeleton with the given free-slot angles.
    pub fn to_circuit(&self, params: &[U3Params], phase: f64) -> Circuit {
        let mut c = Circuit::new(self.num_qubits);
        c.global_phase = phase;
        let mut k = 0;
        for s in &self.slots {
            let g = match s {
                Slot::Fixed(g) => g.clone(),
                Slot::U3 { qubit, fixed: Some(p) } => p.to_gate(*qubit),
                Slot::U3 { qubit, fixed: None } => {
                    k += 1;
                    params[k - 1].to_gate(*qubit)
                }
            };
            c.push(g).expect("skeleton gate fits its width");
        }
        c
    }
}

fn residual_vec(u: &Unitary, target: &Unitary, phi: f64) -> Vec<f64> {
    let e = C64::from_polar(1.0, phi);
    let n = u.as_slice().len();
    let mut r = vec![0.0; 2 * n];
    for (i, (a, t)) in u.as_slice().iter().zip(target.as_slice()).enumerate() {
        let z = a - e * t;
        r[i] = z.re;
        r[n + i] = z.im;
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    /// Success threshold on the Frobenius objective.
    pub tol: f64,
    pub max_restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub method: Method,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-10, max_restarts: 64, max_iters: 400, seed: 0x5eed_c0de, method: Method::LevenbergMarquardt }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    /// Canonical angles per free slot, in slot order.
    pub params: Vec<U3Params>,
    /// Global phase making `skeleton.to_circuit(params, phase)` equal the target.
    pub phase: f64,
    pub residual: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub success: bool,
}

/// Multistart fit. A failed fit is reported through `success == false`
/// with the best residual found.
pub fn fit_template(skel: &Skeleton, target: &Unitary, opts: &FitOptions) -> Result<FitResult> {
    if target.dim() != 1 << skel.num_qubits {
        return Err(Error::DimensionMismatch(target.dim(), 1 << skel.num_qubits));
    }
    let np = skel.num_params();
    if np == 0 {
        let u = skel.unitary(&[]);
        let residual = phase_distance(&u, target)?;
        let phi = relative_phase(&u, target);
        return Ok(FitResult { params: vec![], phase: -phi, residual, iterations: 0, restarts: 1, success: residual <= opts.tol });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut total_iters = 0;
    for start in 0..opts.max_restarts.max(1) {
        let mut x0 = vec![0.0; np + 1];
        if start > 0 {
            for v in x0.iter_mut().take(np) {
                *v = rng.gen_range(-PI..PI);
            }
        }
        x0[np] = relative_phase(&skel.unitary(&x0[..np]), target);
        let out = optim::minimize(opts.method, skel, target, DVector::from_vec(x0), opts.max_iters);
        total_iters += out.iterations;
        log::debug!("fit start {start}: cost {:.3e} after {} iterations", out.cost, out.iterations);
        let better = best.as_ref().is_none_or(|b| out.cost < b.1);
        if better {
            best = Some((out.x.as_slice().to_vec(), out.cost, start));
        }
        if out.cost <= opts.tol {
            break;
        }
    }
    let (x, cost, start) = best.expect("at least one start");
    let mut params = Vec::with_capacity(np / 3);
    let mut gamma = 0.0;
    for k in 0..np / 3 {
        let (p, g) = extract_u3(&u3_matrix(x[3 * k], x[3 * k + 1], x[3 * k + 2]))?;
        params.push(p);
        gamma += g;
    }
    Ok(FitResult { params, phase: gamma - x[np], residual: cost, iterations: total_iters, restarts: start + 1, success: cost <= opts.tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::circuit_unitary;
    use std::f64::consts::FRAC_PI_2;

    fn cx() -> Unitary {
        gate_unitary(&Gate::cx(0, 1)).unwrap()
    }

    fn generic() -> Skeleton {
        Skeleton::new(2).u3(0).u3(1).fixed(Gate::rzx(0, 1, FRAC_PI_2)).u3(0).u3(1)
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = generic();
        let t = cx();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..13).map(|_| rng.gen_range(-PI..PI)).collect();
        let (_, j) = s.residuals_and_jacobian(&t, &x);
        let h = 1e-6;
        for c in 0..13 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let rp = s.residuals(&t, &xp);
            let rm = s.residuals(&t, &xm);
            for r in 0..rp.len() {
                assert!(((rp[r] - rm[r]) / (2.0 * h) - j[(r, c)]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fits_cx_from_cr() {
        let s = generic();
        let fit = fit_template(&s, &cx(), &FitOptions::default()).unwrap();
        assert!(fit.success, "residual {}", fit.residual);
        let c = s.to_circuit(&fit.params, fit.phase);
        let u = circuit_unitary(&c).unwrap();
        // the phase is carried exactly, not just up to phase
        let diff: f64 = u.as_slice().iter().zip(cx().as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum();
        assert!(diff < 1e-10);
    }

    #[test]
    fn bfgs_also_fits() {
        let s = generic();
        let opts = FitOptions { method: Method::Bfgs, ..FitOptions::default() };
        let fit = fit_template(&s, &cx(), &opts).unwrap();
        assert!(fit.success, "residual {}", fit.residual);
    }

    #[test]
    fn zero_free_slots() {
        let s = Skeleton::new(2).fixed(Gate::cx(0, 1));
        let fit = fit_template(&s, &cx().scale(C64::from_polar(1.0, 0.4)), &FitOptions::default()).unwrap();
        assert!(fit.success && fit.residual < 1e-14);
        let s = Skeleton::new(2).fixed(Gate::cx(1, 0));
        let fit = fit_template(&s, &cx(), &FitOptions::default()).unwrap();
        assert!(!fit.success);
    }

    #[test]
    fn deterministic() {
        let s = generic();
        let a = fit_template(&s, &cx(), &FitOptions::default()).unwrap();
        let b = fit_template(&s, &cx(), &FitOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
