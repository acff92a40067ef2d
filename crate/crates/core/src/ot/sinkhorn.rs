use super::{marginal_residuals, uot_objective, transport_cost};
use super::{Marginals, SinkhornConfig, TransportPlan, UotConfig};
use crate::error::{Error, Result};
use crate::geometry::{CostMatrix, Matrix};
use crate::scalar::Scalar;
use super::newton;

/// Balanced entropic transport by alternating diagonal scaling of
/// `K = exp(−C/ε)`. Stops once both marginal residuals are within `tol`.
///
/// Runs on log scalings with log-sum-exp reductions when the resolved
/// [`LogDomain`](super::LogDomain) mode asks for it; otherwise an underflowing kernel is
/// reported as [`Error::EpsilonTooSmall`].
pub fn sinkhorn_balanced<T: Scalar>(
    cost: &CostMatrix<T>,
    mu: &Marginals<T>,
    cfg: &SinkhornConfig<T>,
) -> Result<TransportPlan<T>> {
    cfg.validate()?;
    let (n, m) = cost.shape();
    mu.check_shape(n, m)?;
    mu.check_balanced()?;
    let log_domain = cfg.log_domain.resolve(cfg.epsilon, cost.matrix().max());
    let refine = cfg.newton_after.filter(|_| {
        n + m <= newton::MAX_NEWTON_SIZE && mu.p.iter().chain(&mu.q).all(|&x| x > T::zero())
    });
    let first_budget = refine.map_or(cfg.max_iter, |k| k.min(cfg.max_iter));

    let kernel = LogKernel::new(cost, cfg.epsilon);
    let (mut a, mut b, mut iterations, mut done) = if log_domain {
        let zeros = (vec![T::zero(); n], vec![T::zero(); m]);
        balanced_log(&kernel, mu, cfg.tol, first_budget, zeros)
    } else {
        let linear = LinearKernel::new(cost, cfg.epsilon)?;
        let (u, v, it, ok) = balanced_linear(&linear, mu, cfg, cost, first_budget)?;
        let logs = |x: Vec<T>| x.into_iter().map(T::ln).collect::<Vec<T>>();
        (logs(u), logs(v), it, ok)
    };

    if !done && refine.is_some() && iterations < cfg.max_iter {
        let to64 = |x: &[T]| x.iter().map(|v| v.as_f64()).collect::<Vec<f64>>();
        let (mut a64, mut b64) = (to64(&a), to64(&b));
        let outcome = newton::refine(
            &to64(kernel.neg.as_slice()),
            &to64(&mu.p),
            &to64(&mu.q),
            &mut a64,
            &mut b64,
            cfg.tol.as_f64(),
            (cfg.max_iter - iterations).min(200),
        );
        iterations += outcome.steps;
        a = a64.into_iter().map(T::lit).collect();
        b = b64.into_iter().map(T::lit).collect();
        done = outcome.residual <= cfg.tol.as_f64();
        if !done && iterations < cfg.max_iter {
            let (a2, b2, it, _) =
                balanced_log(&kernel, mu, cfg.tol, cfg.max_iter - iterations, (a, b));
            a = a2;
            b = b2;
            iterations += it;
        }
    }

    let plan = kernel.plan(&a, &b);
    let (row_residual, col_residual) = marginal_residuals(&plan, mu);
    let objective = transport_cost(&plan, cost)?;
    Ok(TransportPlan {
        converged: row_residual <= cfg.tol && col_residual <= cfg.tol,
        plan,
        iterations,
        row_residual,
        col_residual,
        objective,
        log_domain,
    })
}

/// Entropic transport with generalized-KL marginal penalties of strength
/// `tau`. Each half step raises the marginal ratio to `τ/(τ+ε)`; with
/// `tau = 0` the scalings stay at one and the plan is exactly `exp(−C/ε)`.
pub fn sinkhorn_unbalanced<T: Scalar>(
    cost: &CostMatrix<T>,
    mu: &Marginals<T>,
    cfg: &UotConfig<T>,
) -> Result<TransportPlan<T>> {
    cfg.validate()?;
    let (n, m) = cost.shape();
    mu.check_shape(n, m)?;
    if mu.p.iter().chain(&mu.q).any(|&x| !(x > T::zero())) {
        return Err(Error::InvalidArgument(
            "unbalanced transport needs strictly positive marginals".into(),
        ));
    }
    let log_domain = cfg.log_domain.resolve(cfg.epsilon, cost.matrix().max());
    let damping = cfg.damping();

    let (plan, iterations, converged) = if log_domain {
        let kernel = LogKernel::new(cost, cfg.epsilon);
        let (a, b, it, ok) = unbalanced_log(&kernel, mu, damping, cfg);
        (kernel.plan(&a, &b), it, ok)
    } else {
        let kernel = LinearKernel::new_unchecked(cost, cfg.epsilon);
        let (u, v, it, ok) = unbalanced_linear(&kernel, mu, damping, cfg, cost)?;
        (kernel.plan(&u, &v), it, ok)
    };

    let (row_residual, col_residual) = marginal_residuals(&plan, mu);
    let objective = uot_objective(&plan, cost, mu, cfg)?;
    Ok(TransportPlan {
        plan,
        iterations,
        row_residual,
        col_residual,
        objective,
        converged,
        log_domain,
    })
}

struct LinearKernel<T> {
    k: Matrix<T>,
    kt: Matrix<T>,
}

impl<T: Scalar> LinearKernel<T> {
    fn new_unchecked(cost: &CostMatrix<T>, epsilon: T) -> Self {
        let k = cost.matrix().map(|c| (-c / epsilon).exp());
        let kt = k.transpose();
        Self { k, kt }
    }

    /// Rejects kernels with an all-zero row or column.
    fn new(cost: &CostMatrix<T>, epsilon: T) -> Result<Self> {
        let kernel = Self::new_unchecked(cost, epsilon);
        let dead = kernel
            .k
            .row_sums()
            .into_iter()
            .chain(kernel.k.col_sums())
            .any(|s| !(s > T::zero()));
        if dead {
            return Err(too_small(cost, epsilon));
        }
        Ok(kernel)
    }

    fn plan(&self, u: &[T], v: &[T]) -> Matrix<T> {
        Matrix::from_fn(self.k.rows(), self.k.cols(), |i, j| u[i] * self.k.get(i, j) * v[j])
    }
}

fn too_small<T: Scalar>(cost: &CostMatrix<T>, epsilon: T) -> Error {
    Error::EpsilonTooSmall {
        epsilon: epsilon.as_f64(),
        max_cost: cost.matrix().max().as_f64(),
    }
}

fn matvec<T: Scalar>(k: &Matrix<T>, v: &[T], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = k
            .row(i)
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
    }
}

fn balanced_linear<T: Scalar>(
    kernel: &LinearKernel<T>,
    mu: &Marginals<T>,
    cfg: &SinkhornConfig<T>,
    cost: &CostMatrix<T>,
    budget: usize,
) -> Result<(Vec<T>, Vec<T>, usize, bool)> {
    let (n, m) = kernel.k.shape();
    let mut u = vec![T::one(); n];
    let mut v = vec![T::one(); m];
    let mut kv = vec![T::zero(); n];
    let mut ktu = vec![T::zero(); m];
    let mut iterations = 0;
    loop {
        matvec(&kernel.k, &v, &mut kv);
        if iterations > 0 {
            // Columns are exact after the v update, so the row residual decides.
            let row_res = u
                .iter()
                .zip(&kv)
                .zip(&mu.p)
                .map(|((&ui, &kvi), &pi)| (ui * kvi - pi).abs())
                .fold(T::zero(), T::max);
            if row_res <= cfg.tol {
                return Ok((u, v, iterations, true));
            }
        }
        if iterations == budget {
            return Ok((u, v, iterations, false));
        }
        for ((ui, &pi), &kvi) in u.iter_mut().zip(&mu.p).zip(&kv) {
            *ui = pi / kvi;
        }
        matvec(&kernel.kt, &u, &mut ktu);
        for ((vj, &qj), &ktuj) in v.iter_mut().zip(&mu.q).zip(&ktu) {
            *vj = qj / ktuj;
        }
        iterations += 1;
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(too_small(cost, cfg.epsilon));
        }
    }
}

fn unbalanced_linear<T: Scalar>(
    kernel: &LinearKernel<T>,
    mu: &Marginals<T>,
    damping: T,
    cfg: &UotConfig<T>,
    cost: &CostMatrix<T>,
) -> Result<(Vec<T>, Vec<T>, usize, bool)> {
    let (n, m) = kernel.k.shape();
    let mut u = vec![T::one(); n];
    let mut v = vec![T::one(); m];
    let mut kv = vec![T::zero(); n];
    let mut ktu = vec![T::zero(); m];
    for it in 1..=cfg.max_iter {
        let mut delta = T::zero();
        matvec(&kernel.k, &v, &mut kv);
        for ((ui, &pi), &kvi) in u.iter_mut().zip(&mu.p).zip(&kv) {
            let next = (pi / kvi).powf(damping);
            delta = delta.max((next.ln() - ui.ln()).abs());
            *ui = next;
        }
        matvec(&kernel.kt, &u, &mut ktu);
        for ((vj, &qj), &ktuj) in v.iter_mut().zip(&mu.q).zip(&ktu) {
            let next = (qj / ktuj).powf(damping);
            delta = delta.max((next.ln() - vj.ln()).abs());
            *vj = next;
        }
        if u.iter().chain(&v).any(|x| !x.is_finite() || *x == T::zero()) {
            return Err(too_small(cost, cfg.epsilon));
        }
        if delta <= cfg.tol {
            return Ok((u, v, it, true));
        }
    }
    Ok((u, v, cfg.max_iter, false))
}

/// `−C/ε` stored in both orientations so that row and column reductions are
/// contiguous.
struct LogKernel<T> {
    neg: Matrix<T>,
    neg_t: Matrix<T>,
}

impl<T: Scalar> LogKernel<T> {
    fn new(cost: &CostMatrix<T>, epsilon: T) -> Self {
        let neg = cost.matrix().map(|c| -(c / epsilon));
        let neg_t = neg.transpose();
        Self { neg, neg_t }
    }

    fn plan(&self, a: &[T], b: &[T]) -> Matrix<T> {
        Matrix::from_fn(self.neg.rows(), self.neg.cols(), |i, j| {
            (a[i] + self.neg.get(i, j) + b[j]).exp()
        })
    }
}

/// Terms more than this many nats below the largest one are dropped from a
/// log-sum-exp; their total contribution is below double rounding.
const LSE_FLOOR: f64 = 40.0;

/// Drift of the shift vector (in nats) tolerated before active sets are
/// rebuilt.
const ACTIVE_SLACK: f64 = 20.0;

/// `log Σ_j exp(row_j + shift_j)` over all entries.
#[cfg(test)]
fn log_sum_exp<T: Scalar>(row: &[T], shift: &[T]) -> T {
    let mut top = T::neg_infinity();
    for (&r, &s) in row.iter().zip(shift) {
        let x = r + s;
        if x > top {
            top = x;
        }
    }
    if top == T::neg_infinity() {
        return top;
    }
    let floor = top - T::lit(LSE_FLOOR);
    let mut acc = T::zero();
    for (&r, &s) in row.iter().zip(shift) {
        let x = r + s;
        if x > floor {
            acc = acc + (x - top).exp();
        }
    }
    top + acc.ln()
}

/// Sparse log-sum-exp over the entries that can matter while the shift
/// vector stays within [`ACTIVE_SLACK`] of the anchor it was built from.
///
/// At rebuild, row `i` keeps `kernel_ij = exp(mat_ij + anchor_j − top_i)`
/// for entries within `LSE_FLOOR + 2·ACTIVE_SLACK` nats of the row maximum
/// `top_i`. A reduction then needs one `exp` per column:
/// `out_i = top_i + log Σ_j kernel_ij · exp(shift_j − anchor_j)`.
/// Dropped entries sit at least `LSE_FLOOR` nats below the current row
/// maximum, so the result agrees with a dense reduction to rounding.
struct ActiveSets<T> {
    idx: Vec<Vec<u32>>,
    kernel: Vec<Vec<T>>,
    top: Vec<T>,
    anchor: Vec<T>,
    scale: Vec<T>,
}

impl<T: Scalar> ActiveSets<T> {
    fn new() -> Self {
        Self {
            idx: Vec::new(),
            kernel: Vec::new(),
            top: Vec::new(),
            anchor: Vec::new(),
            scale: Vec::new(),
        }
    }

    fn stale(&self, shift: &[T]) -> bool {
        self.anchor.len() != shift.len()
            || self
                .anchor
                .iter()
                .zip(shift)
                .any(|(&a, &s)| !((a - s).abs() <= T::lit(ACTIVE_SLACK)))
    }

    fn rebuild(&mut self, mat: &Matrix<T>, shift: &[T]) {
        let margin = T::lit(LSE_FLOOR + 2.0 * ACTIVE_SLACK);
        self.idx.resize_with(mat.rows(), Vec::new);
        self.kernel.resize_with(mat.rows(), Vec::new);
        self.top.clear();
        for i in 0..mat.rows() {
            let row = mat.row(i);
            let top = row
                .iter()
                .zip(shift)
                .fold(T::neg_infinity(), |acc, (&r, &s)| acc.max(r + s));
            let (idx, kernel) = (&mut self.idx[i], &mut self.kernel[i]);
            idx.clear();
            kernel.clear();
            if top > T::neg_infinity() {
                for (j, (&r, &s)) in row.iter().zip(shift).enumerate() {
                    let x = r + s - top;
                    if x >= -margin {
                        idx.push(j as u32);
                        kernel.push(x.exp());
                    }
                }
            }
            self.top.push(top);
        }
        self.anchor.clear();
        self.anchor.extend_from_slice(shift);
    }

    /// `out_i = log Σ_j exp(mat_ij + shift_j)` for every row.
    fn reduce(&mut self, mat: &Matrix<T>, shift: &[T], out: &mut [T]) {
        if self.stale(shift) {
            self.rebuild(mat, shift);
        }
        self.scale.clear();
        self.scale
            .extend(shift.iter().zip(&self.anchor).map(|(&s, &a)| (s - a).exp()));
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (&j, &k) in self.idx[i].iter().zip(&self.kernel[i]) {
                acc = acc + k * self.scale[j as usize];
            }
            *o = self.top[i] + acc.ln();
        }
    }
}

fn balanced_log<T: Scalar>(
    kernel: &LogKernel<T>,
    mu: &Marginals<T>,
    tol: T,
    budget: usize,
    (mut a, mut b): (Vec<T>, Vec<T>),
) -> (Vec<T>, Vec<T>, usize, bool) {
    let (n, m) = kernel.neg.shape();
    let log_p: Vec<T> = mu.p.iter().map(|x| x.ln()).collect();
    let log_q: Vec<T> = mu.q.iter().map(|x| x.ln()).collect();
    let mut lse = vec![T::zero(); n];
    let mut col_lse = vec![T::zero(); m];
    let (mut rows, mut cols) = (ActiveSets::new(), ActiveSets::new());
    let mut iterations = 0;
    loop {
        rows.reduce(&kernel.neg, &b, &mut lse);
        if iterations > 0 {
            let row_res = (0..n)
                .map(|i| ((a[i] + lse[i]).exp() - mu.p[i]).abs())
                .fold(T::zero(), T::max);
            if row_res <= tol {
                return (a, b, iterations, true);
            }
        }
        if iterations == budget {
            return (a, b, iterations, false);
        }
        for i in 0..n {
            a[i] = log_p[i] - lse[i];
        }
        cols.reduce(&kernel.neg_t, &a, &mut col_lse);
        for j in 0..m {
            b[j] = log_q[j] - col_lse[j];
        }
        iterations += 1;
    }
}

fn unbalanced_log<T: Scalar>(
    kernel: &LogKernel<T>,
    mu: &Marginals<T>,
    damping: T,
    cfg: &UotConfig<T>,
) -> (Vec<T>, Vec<T>, usize, bool) {
    let (n, m) = kernel.neg.shape();
    let log_p: Vec<T> = mu.p.iter().map(|x| x.ln()).collect();
    let log_q: Vec<T> = mu.q.iter().map(|x| x.ln()).collect();
    let mut a = vec![T::zero(); n];
    let mut b = vec![T::zero(); m];
    let mut row_lse = vec![T::zero(); n];
    let mut col_lse = vec![T::zero(); m];
    let (mut rows, mut cols) = (ActiveSets::new(), ActiveSets::new());
    for it in 1..=cfg.max_iter {
        let mut delta = T::zero();
        rows.reduce(&kernel.neg, &b, &mut row_lse);
        for i in 0..n {
            let next = damping * (log_p[i] - row_lse[i]);
            delta = delta.max((next - a[i]).abs());
            a[i] = next;
        }
        cols.reduce(&kernel.neg_t, &a, &mut col_lse);
        for j in 0..m {
            let next = damping * (log_q[j] - col_lse[j]);
            delta = delta.max((next - b[j]).abs());
            b[j] = next;
        }
        if delta <= cfg.tol {
            return (a, b, it, true);
        }
    }
    (a, b, cfg.max_iter, false)
}
