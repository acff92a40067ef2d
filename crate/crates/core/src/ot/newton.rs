//! Damped Newton refinement of balanced Sinkhorn scalings.
//!
//! Plain scaling iterations converge at a rate that degrades like
//! `exp(−Δ/ε)` when the optimal coupling is close to a permutation with a
//! cost margin `Δ`. The refinement solves the same marginal equations
//! `Π(a,b)1 = p`, `Π(a,b)ᵀ1 = q` with `Π_ij = exp(a_i + b_j − C_ij/ε)`, so
//! its fixed point is the Sinkhorn fixed point.

use nalgebra::{DMatrix, DVector};

/// Largest `n + m` for which the dense refinement is attempted.
pub(crate) const MAX_NEWTON_SIZE: usize = 2048;

pub(crate) struct NewtonOutcome {
    pub steps: usize,
    pub residual: f64,
}

/// Refines log scalings `a`, `b` in place. `neg` is `−C/ε` row-major.
pub(crate) fn refine(
    neg: &[f64],
    p: &[f64],
    q: &[f64],
    a: &mut [f64],
    b: &mut [f64],
    tol: f64,
    max_steps: usize,
) -> NewtonOutcome {
    let n = p.len();
    let m = q.len();
    let mut plan = vec![0.0; n * m];
    let mut res = residual(neg, p, q, a, b, &mut plan);
    let mut steps = 0;
    while steps < max_steps {
        let sup = sup_norm(&res);
        if sup <= tol {
            break;
        }
        steps += 1;

        // (J + μI) δ = −F with J = [[diag r, Π], [Πᵀ, diag c]]; the tiny
        // shift only removes the exact (1, −1) null direction.
        let mu = 1e-12 * p.iter().chain(q).fold(0.0f64, |acc, x| acc.max(*x));
        let dim = n + m;
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            for j in 0..m {
                let x = plan[i * m + j];
                jac[(i, i)] += x;
                jac[(n + j, n + j)] += x;
                jac[(i, n + j)] = x;
                jac[(n + j, i)] = x;
            }
        }
        for k in 0..dim {
            jac[(k, k)] += mu;
        }
        let rhs = DVector::from_iterator(dim, res.iter().map(|r| -r));
        let Some(chol) = jac.cholesky() else {
            break;
        };
        let delta = chol.solve(&rhs);

        let merit = l2(&res);
        let dual = dual_value(p, q, a, b, &plan);
        let slope: f64 = res.iter().zip(delta.iter()).map(|(r, d)| -r * d).sum();
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let ta: Vec<f64> = (0..n).map(|i| a[i] + t * delta[i]).collect();
            let tb: Vec<f64> = (0..m).map(|j| b[j] + t * delta[n + j]).collect();
            let mut trial_plan = vec![0.0; n * m];
            let trial = residual(neg, p, q, &ta, &tb, &mut trial_plan);
            let finite = trial.iter().all(|x| x.is_finite());
            let ascent = dual_value(p, q, &ta, &tb, &trial_plan) >= dual + 1e-4 * t * slope;
            if finite && (ascent || l2(&trial) < merit) {
                a.copy_from_slice(&ta);
                b.copy_from_slice(&tb);
                plan = trial_plan;
                res = trial;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    NewtonOutcome {
        steps,
        residual: sup_norm(&res),
    }
}

fn residual(neg: &[f64], p: &[f64], q: &[f64], a: &[f64], b: &[f64], plan: &mut [f64]) -> Vec<f64> {
    let n = p.len();
    let m = q.len();
    let mut out = vec![0.0; n + m];
    for i in 0..n {
        for j in 0..m {
            let x = (a[i] + b[j] + neg[i * m + j]).exp();
            plan[i * m + j] = x;
            out[i] += x;
            out[n + j] += x;
        }
    }
    for i in 0..n {
        out[i] -= p[i];
    }
    for j in 0..m {
        out[n + j] -= q[j];
    }
    out
}

/// Dual objective `⟨a,p⟩ + ⟨b,q⟩ − ΣΠ`, concave in `(a, b)`.
fn dual_value(p: &[f64], q: &[f64], a: &[f64], b: &[f64], plan: &[f64]) -> f64 {
    let lin: f64 = a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>()
        + b.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
    lin - plan.iter().sum::<f64>()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
