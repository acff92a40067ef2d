//! Reference solvers used to validate the Sinkhorn iterations. Both are
//! deliberately slow and share no code with the scaling algorithms.

use super::{Marginals, UotConfig};
use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{CostMatrix, Matrix};
use crate::scalar::Scalar;

/// Largest square instance accepted by [`exact_ot_oracle`] (8! permutations).
pub const MAX_OT_ORACLE_SIZE: usize = 8;

/// Exact balanced transport between uniform marginals by enumerating the
/// vertices of the Birkhoff polytope (permutation matrices scaled by `1/n`).
/// Permutations are visited in lexicographic order and only a strictly
/// cheaper one replaces the incumbent, so ties resolve to the
/// lexicographically smallest permutation.
pub fn exact_ot_oracle<T: Scalar>(cost: &CostMatrix<T>) -> Result<(Matrix<T>, T)> {
    let (n, m) = cost.shape();
    ensure_dim("exact_ot_oracle square", n, m)?;
    if n == 0 {
        return Err(Error::Empty("cost matrix"));
    }
    if n > MAX_OT_ORACLE_SIZE {
        return Err(Error::InvalidArgument(format!(
            "exact_ot_oracle supports n <= {MAX_OT_ORACLE_SIZE}, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_sum = T::infinity();
    loop {
        let s = perm
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (i, &j)| acc + cost.get(i, j));
        if s < best_sum {
            best_sum = s;
            best.copy_from_slice(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let w = T::one() / T::count(n);
    let mut plan = Matrix::zeros(n, n);
    for (i, &j) in best.iter().enumerate() {
        plan.set(i, j, w);
    }
    Ok((plan, best_sum * w))
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Result of the direct minimization in [`exact_uot_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution<T> {
    pub plan: Matrix<T>,
    pub objective: T,
    pub iterations: usize,
    /// Sup norm of the gradient with respect to `log Π` at termination.
    pub grad_norm: f64,
    pub converged: bool,
}

const UOT_ORACLE_MAX_CELLS: usize = 16;
const UOT_ORACLE_GRAD_TOL: f64 = 1e-10;
const UOT_ORACLE_MAX_ITER: usize = 20_000;
const UOT_ORACLE_NEWTON_STEPS: usize = 100;

/// Minimizes the unbalanced objective directly over `Π = exp(θ)` by
/// gradient descent (Barzilai-Borwein steps with a non-monotone Armijo
/// safeguard), then finishes with Newton steps on the stationarity
/// conditions once descent stalls. Converged when the gradient sup norm is
/// at most `1e-10`. Runs in `f64` whatever `T` is.
pub fn exact_uot_oracle<T: Scalar>(
    cost: &CostMatrix<T>,
    mu: &Marginals<T>,
    cfg: &UotConfig<T>,
) -> Result<OracleSolution<T>> {
    cfg.validate()?;
    let (n, m) = cost.shape();
    mu.check_shape(n, m)?;
    if n * m > UOT_ORACLE_MAX_CELLS {
        return Err(Error::InvalidArgument(format!(
            "exact_uot_oracle supports n*m <= {UOT_ORACLE_MAX_CELLS}, got {}",
            n * m
        )));
    }
    if mu.p.iter().chain(&mu.q).any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidArgument(
            "unbalanced oracle needs strictly positive marginals".into(),
        ));
    }
    let problem = Problem {
        n,
        m,
        c: cost.matrix().as_slice().iter().map(|x| x.as_f64()).collect(),
        p: mu.p.iter().map(|x| x.as_f64()).collect(),
        q: mu.q.iter().map(|x| x.as_f64()).collect(),
        eps: cfg.epsilon.as_f64(),
        tau: cfg.tau.as_f64(),
    };

    let mut theta: Vec<f64> = (0..n * m)
        .map(|k| problem.p[k / m].ln() + problem.q[k % m].ln())
        .collect();
    let mut value = problem.value(&theta);
    let mut grad = problem.grad(&theta);
    let mut step = 1.0;
    let mut history = vec![value; 10];
    let mut iterations = 0;
    let mut gnorm = sup(&grad);

    while gnorm > UOT_ORACLE_GRAD_TOL && iterations < UOT_ORACLE_MAX_ITER {
        iterations += 1;
        let ref_value = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..80 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t - trial_step * g)
                .collect();
            let v = problem.value(&cand);
            if v.is_finite() && v <= ref_value - 1e-4 * trial_step * g2 {
                accepted = Some((cand, v));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((cand, v)) = accepted else {
            // No representable decrease left.
            break;
        };
        let cand_grad = problem.grad(&cand);
        let (mut ss, mut sy) = (0.0, 0.0);
        for k in 0..theta.len() {
            let s = cand[k] - theta[k];
            let y = cand_grad[k] - grad[k];
            ss += s * s;
            sy += s * y;
        }
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { trial_step * 2.0 };
        theta = cand;
        grad = cand_grad;
        value = v;
        let slot = iterations % history.len();
        history[slot] = v;
        gnorm = sup(&grad);
    }

    // Damped Newton on the stationarity residual; descent stalls when the
    // problem is badly conditioned.
    for _ in 0..UOT_ORACLE_NEWTON_STEPS {
        if gnorm <= UOT_ORACLE_GRAD_TOL {
            break;
        }
        let Some((delta, res)) = problem.newton_direction(&theta) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(&delta).map(|(x, s)| x - t * s).collect();
            if problem.residual(&cand) <= (1.0 - 1e-4 * t) * res {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(cand) = accepted else {
            break;
        };
        iterations += 1;
        value = problem.value(&cand);
        gnorm = sup(&problem.grad(&cand));
        theta = cand;
    }

    let plan = Matrix::from_vec(n, m, theta.iter().map(|t| T::lit(t.exp())).collect())?;
    Ok(OracleSolution {
        plan,
        objective: T::lit(value),
        iterations,
        grad_norm: gnorm,
        converged: gnorm <= UOT_ORACLE_GRAD_TOL,
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

struct Problem {
    n: usize,
    m: usize,
    c: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
    eps: f64,
    tau: f64,
}

impl Problem {
    fn sums(&self, pi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut r = vec![0.0; self.n];
        let mut c = vec![0.0; self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                r[i] += pi[i * self.m + j];
                c[j] += pi[i * self.m + j];
            }
        }
        (r, c)
    }

    fn kl(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| if x > 0.0 { x * (x / y).ln() } else { 0.0 } - x + y)
            .sum()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let pi: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let (r, c) = self.sums(&pi);
        let mut v = 0.0;
        for k in 0..pi.len() {
            // Π(log Π − 1) with log Π = θ exactly.
            v += pi[k] * self.c[k] + self.eps * pi[k] * (theta[k] - 1.0);
        }
        if self.tau > 0.0 {
            v += self.tau * (Self::kl(&r, &self.p) + Self::kl(&c, &self.q));
        }
        v
    }

    /// `Π = exp(θ)` and the stationarity residual `d_ij = C_ij + ε θ_ij +
    /// τ log(r_i/p_i) + τ log(c_j/q_j)`, so that `∂F/∂θ = Π ⊙ d`.
    fn stationarity(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pi: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let (r, c) = self.sums(&pi);
        let mut d = vec![0.0; pi.len()];
        for i in 0..self.n {
            for j in 0..self.m {
                let k = i * self.m + j;
                d[k] = self.c[k] + self.eps * theta[k];
                if self.tau > 0.0 {
                    d[k] += self.tau * ((r[i] / self.p[i]).ln() + (c[j] / self.q[j]).ln());
                }
            }
        }
        (pi, d)
    }

    fn grad(&self, theta: &[f64]) -> Vec<f64> {
        let (pi, d) = self.stationarity(theta);
        pi.iter().zip(&d).map(|(p, d)| p * d).collect()
    }

    fn residual(&self, theta: &[f64]) -> f64 {
        self.stationarity(theta).1.iter().map(|d| d * d).sum::<f64>().sqrt()
    }

    /// Newton direction for `d(θ) = 0` together with `‖d‖₂`. The Jacobian of
    /// `d` is `ε I` plus `τ Π_l / r_i` within a row and `τ Π_l / c_j` within
    /// a column.
    fn newton_direction(&self, theta: &[f64]) -> Option<(Vec<f64>, f64)> {
        let (pi, d) = self.stationarity(theta);
        let (r, c) = self.sums(&pi);
        let len = pi.len();
        let mut jac = nalgebra::DMatrix::from_diagonal_element(len, len, self.eps);
        if self.tau > 0.0 {
            for i in 0..self.n {
                for j in 0..self.m {
                    let k = i * self.m + j;
                    for l in 0..self.m {
                        jac[(k, i * self.m + l)] += self.tau * pi[i * self.m + l] / r[i];
                    }
                    for l in 0..self.n {
                        jac[(k, l * self.m + j)] += self.tau * pi[l * self.m + j] / c[j];
                    }
                }
            }
        }
        let d = nalgebra::DVector::from_vec(d);
        let delta = jac.lu().solve(&d)?;
        delta
            .iter()
            .all(|x| x.is_finite())
            .then(|| (delta.iter().copied().collect(), d.norm()))
    }
}
