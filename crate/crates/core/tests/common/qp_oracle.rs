//! Slow reference solver: projected gradient on `½xᵀHx + fᵀx` over
//! `{A x = b} ∩ [lo, hi]` with an exact Euclidean projection computed by a
//! semismooth Newton method on the projection dual.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub struct OracleProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl OracleProblem {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.f.dot(x)
    }
}

fn clip(v: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(v.len(), |i, _| v[i].clamp(lo[i], hi[i]))
}

/// Projection of `v` onto `{A x = b, lo <= x <= hi}`.
pub fn project(v: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    let m = a.nrows();
    if m == 0 {
        return clip(v, lo, hi);
    }
    // Dual ψ(λ) = ½‖x(λ) − v‖² + λᵀ(A x(λ) − b), x(λ) = clip(v − Aᵀλ); maximize.
    let x_of = |lam: &DVector<f64>| clip(&(v - a.tr_mul(lam)), lo, hi);
    let psi = |lam: &DVector<f64>| {
        let x = x_of(lam);
        0.5 * (&x - v).norm_squared() + lam.dot(&(a * &x - b))
    };
    let tol = 1e-13 * (1.0 + b.amax());
    let mut lam = DVector::zeros(m);
    for _ in 0..200 {
        let x = x_of(&lam);
        let g = a * &x - b;
        if g.amax() < tol {
            break;
        }
        let free = DVector::from_fn(v.len(), |i, _| {
            let t = v[i] - a.column(i).dot(&lam);
            if t > lo[i] && t < hi[i] { 1.0 } else { 0.0 }
        });
        let mut jac = DMatrix::zeros(m, m);
        for i in 0..v.len() {
            if free[i] > 0.0 {
                let c = a.column(i);
                jac += &c * c.transpose();
            }
        }
        // Levenberg shift keeps the step an ascent direction when few
        // coordinates are free; it vanishes with the residual.
        let mu = 1e-12 + g.norm();
        for i in 0..m {
            jac[(i, i)] += mu;
        }
        let step = jac.lu().solve(&g).expect("regularized Jacobian is invertible");
        let base = psi(&lam);
        let mut t = 1.0;
        let stalled = loop {
            let trial = &lam + &step * t;
            if psi(&trial) >= base - 1e-15 * base.abs() {
                lam = trial;
                break false;
            }
            if t < 1e-10 {
                break true;
            }
            t *= 0.5;
        };
        // No ascent direction left at machine precision.
        if stalled {
            break;
        }
    }
    x_of(&lam)
}

/// Runs projected gradient with step `1/λ_max(H)` until the iterate moves
/// less than `1e-14`.
pub fn solve(p: &OracleProblem, max_iters: usize) -> DVector<f64> {
    let lmax = p.h.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lmax;
    let mut x = project(&DVector::zeros(p.f.len()), &p.a, &p.b, &p.lo, &p.hi);
    for _ in 0..max_iters {
        let grad = &p.h * &x + &p.f;
        let next = project(&(&x - grad * step), &p.a, &p.b, &p.lo, &p.hi);
        let moved = (&next - &x).amax();
        x = next;
        if moved < 1e-14 {
            break;
        }
    }
    x
}

/// Strictly convex problem with `n_eq` equalities and unit boxes, where the
/// linear term is scaled so that several bounds are active.
pub fn random_problem<R: Rng>(rng: &mut R, n: usize, n_eq: usize) -> OracleProblem {
    let mut u = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let mhalf = u(n, n);
    let mut h = mhalf.transpose() * &mhalf / n as f64;
    for i in 0..n {
        h[(i, i)] += 0.1;
    }
    let f = u(n, 1).column(0) * 3.0;
    let a = u(n_eq, n);
    let x_feas = u(n, 1).column(0) * 0.5;
    let b = &a * x_feas;
    OracleProblem {
        h,
        f: f.into_owned(),
        a,
        b,
        lo: DVector::from_element(n, -1.0),
        hi: DVector::from_element(n, 1.0),
    }
}
