//! Levenberg–Marquardt and BFGS on the skeleton residuals.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Skeleton;
use crate::unitary::Unitary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    LevenbergMarquardt,
    Bfgs,
}

pub(super) struct Outcome {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
}

// Below this the fit is at machine precision and further steps are noise.
const FLOOR: f64 = 1e-28;

pub(super) fn minimize(method: Method, skel: &Skeleton, target: &Unitary, x0: DVector<f64>, max_iters: usize) -> Outcome {
    match method {
        Method::LevenbergMarquardt => lm(skel, target, x0, max_iters),
        Method::Bfgs => bfgs(skel, target, x0, max_iters),
    }
}

fn sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn lm(skel: &Skeleton, target: &Unitary, mut x: DVector<f64>, max_iters: usize) -> Outcome {
    let n = x.len();
    let (r, mut jac) = skel.residuals_and_jacobian(target, x.as_slice());
    let mut r = DVector::from_vec(r);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut it = 0;
    let mut stalled = 0;
    while it < max_iters && cost > FLOOR {
        it += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * &r;
        let mut accepted = false;
        while lambda < 1e14 {
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] += lambda * (a[(i, i)] + 1e-9);
            }
            let Some(ch) = m.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = ch.solve(&(-&g));
            let xn = &x + &step;
            let rn = skel.residuals(target, xn.as_slice());
            let cn = sq(&rn);
            if cn < cost {
                let gain = cost - cn;
                x = xn;
                let (r2, j2) = skel.residuals_and_jacobian(target, x.as_slice());
                r = DVector::from_vec(r2);
                jac = j2;
                if gain <= 1e-15 * cost {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                cost = cn;
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || stalled >= 5 {
            break;
        }
        // Starts that plateau far from zero are local minima; give up early.
        if it >= 60 && cost > 1e-3 && stalled > 0 {
            break;
        }
    }
    Outcome { x, cost, iterations: it }
}

fn bfgs(skel: &Skeleton, target: &Unitary, mut x: DVector<f64>, max_iters: usize) -> Outcome {
    let n = x.len();
    let eval = |x: &DVector<f64>| -> (f64, DVector<f64>) {
        let (r, j) = skel.residuals_and_jacobian(target, x.as_slice());
        let r = DVector::from_vec(r);
        (r.norm_squared(), 2.0 * j.transpose() * r)
    };
    let (mut f, mut g) = eval(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut it = 0;
    while it < max_iters && f > FLOOR && g.norm() > 1e-16 {
        it += 1;
        let mut p = -(&h * &g);
        if p.dot(&g) >= 0.0 {
            h = DMatrix::identity(n, n);
            p = -g.clone();
        }
        let slope = p.dot(&g);
        let mut step = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let xn = &x + step * &p;
            let fnew = sq(&skel.residuals(target, xn.as_slice()));
            if fnew <= f + 1e-4 * step * slope {
                next = Some(xn);
                break;
            }
            step *= 0.5;
        }
        let Some(xn) = next else { break };
        let (fnew, gnew) = eval(&xn);
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ, expanded.
            h += (rho * rho * yhy + rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = xn;
        f = fnew;
        g = gnew;
    }
    Outcome { x, cost: f, iterations: it }
}
