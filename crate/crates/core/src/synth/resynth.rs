//! Minimal-CNOT resynthesis of two-qubit unitaries.

use num_complex::Complex64 as C64;

use super::{fit_template, FitOptions, Skeleton};
use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};
use crate::unitary::Unitary;

/// `k` CNOTs on (0, 1) interleaved with free U3 layers on both qubits.
pub fn two_qubit_skeleton(k: usize) -> Skeleton {
    let mut s = Skeleton::new(2).u3(0).u3(1);
    for _ in 0..k {
        s = s.fixed(Gate::cx(0, 1)).u3(0).u3(1);
    }
    s
}

/// Smallest CNOT count that can realize `u`, read off the spectrum of
/// γ(u) = u (Y⊗Y) uᵀ (Y⊗Y) for `u` scaled into SU(4).
pub fn cnot_lower_bound(u: &Unitary) -> usize {
    assert_eq!(u.dim(), 4);
    let det = u.determinant();
    let su = u.scale(C64::from_polar(1.0, -det.arg() / 4.0));
    // Y⊗Y is real: it maps |b1 b0> to −(−1)^{b0+b1}|¬b1 ¬b0>, i.e. index i ↦ 3 − i.
    let mut yy = Unitary::zeros(4);
    for i in 0..4usize {
        let parity = (i & 1) ^ (i >> 1);
        yy.set(3 - i, i, C64::new(if parity == 1 { 1.0 } else { -1.0 }, 0.0));
    }
    let mut sut = Unitary::zeros(4);
    for r in 0..4 {
        for c in 0..4 {
            sut.set(r, c, su.get(c, r));
        }
    }
    let g = su.mul(&yy).mul(&sut).mul(&yy);
    let tr = g.trace();
    let eps = 1e-7;
    let near_scalar = |s: f64| {
        let mut acc = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c { s } else { 0.0 };
                acc += (g.get(r, c) - want).norm_sqr();
            }
        }
        acc.sqrt() < eps
    };
    if near_scalar(1.0) || near_scalar(-1.0) {
        return 0;
    }
    let g2 = g.mul(&g);
    let mut dev = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            let want = if r == c { -1.0 } else { 0.0 };
            dev += (g2.get(r, c) - want).norm_sqr();
        }
    }
    if tr.norm() < eps && dev.sqrt() < eps {
        return 1;
    }
    if tr.im.abs() < eps {
        return 2;
    }
    3
}

/// Resynthesize with the fewest CNOTs, trying counts from the analytic
/// lower bound upward. Counts below the bound cannot succeed and are skipped.
pub fn resynth_2q_block(u: &Unitary) -> Result<Circuit> {
    resynth_2q_block_with(u, &FitOptions { tol: 1e-9, ..FitOptions::default() }, 3)
}

/// Like [`resynth_2q_block`] but gives up once more than `max_cx` CNOTs
/// would be needed.
pub fn resynth_2q_block_with(u: &Unitary, opts: &FitOptions, max_cx: usize) -> Result<Circuit> {
    if u.dim() != 4 {
        return Err(Error::DimensionMismatch(u.dim(), 4));
    }
    let lb = cnot_lower_bound(u);
    let mut best = f64::INFINITY;
    for k in lb..=max_cx.min(3) {
        let skel = two_qubit_skeleton(k);
        let fit = fit_template(&skel, u, opts)?;
        log::debug!("resynth with {k} cx: residual {:.3e}", fit.residual);
        if fit.success {
            return Ok(skel.to_circuit(&fit.params, fit.phase));
        }
        best = best.min(fit.residual);
    }
    Err(Error::Synthesis(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::{circuit_unitary, gate_unitary, phase_distance, U3Params};

    #[test]
    fn bounds_of_known_gates() {
        let cx = gate_unitary(&Gate::cx(0, 1)).unwrap();
        let sw = gate_unitary(&Gate::swap(0, 1)).unwrap();
        let local = U3Params::new(0.3, 1.0, -0.2).matrix().kron(&U3Params::new(1.1, 0.4, 2.0).matrix());
        assert_eq!(cnot_lower_bound(&Unitary::identity(4)), 0);
        assert_eq!(cnot_lower_bound(&local), 0);
        assert_eq!(cnot_lower_bound(&cx), 1);
        assert_eq!(cnot_lower_bound(&gate_unitary(&Gate::cx(1, 0)).unwrap()), 1);
        assert_eq!(cnot_lower_bound(&sw), 3);
        let two = circuit_unitary(&Circuit::from_gates(2, vec![Gate::cx(0, 1), Gate::cx(1, 0)]).unwrap()).unwrap();
        assert_eq!(cnot_lower_bound(&two), 2);
    }

    #[test]
    fn resynth_counts() {
        let cx = gate_unitary(&Gate::cx(1, 0)).unwrap();
        let c = resynth_2q_block(&cx).unwrap();
        assert_eq!(c.cnot_cost(), 1);
        assert!(phase_distance(&circuit_unitary(&c).unwrap(), &cx).unwrap() < 1e-9);
        let local = U3Params::new(0.3, 1.0, -0.2).matrix().kron(&U3Params::new(1.1, 0.4, 2.0).matrix());
        assert_eq!(resynth_2q_block(&local).unwrap().cnot_cost(), 0);
        let sw = gate_unitary(&Gate::swap(0, 1)).unwrap();
        let c = resynth_2q_block(&sw).unwrap();
        assert_eq!(c.cnot_cost(), 3);
        assert!(phase_distance(&circuit_unitary(&c).unwrap(), &sw).unwrap() < 1e-9);
    }
}
