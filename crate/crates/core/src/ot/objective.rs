use super::{Marginals, UotConfig};
use crate::error::{ensure_dim, Error, Result};
use crate::geometry::{CostMatrix, Matrix};
use crate::scalar::Scalar;

/// Frobenius inner product `⟨Π, C⟩`.
pub fn transport_cost<T: Scalar>(plan: &Matrix<T>, cost: &CostMatrix<T>) -> Result<T> {
    check_shape(plan, cost)?;
    Ok(plan
        .as_slice()
        .iter()
        .zip(cost.matrix().as_slice())
        .fold(T::zero(), |acc, (&p, &c)| acc + p * c))
}

/// `x log x` with the convention `0 log 0 = 0`.
#[inline]
fn xlogx<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x * x.ln()
    } else {
        T::zero()
    }
}

/// Generalized KL divergence for unnormalized vectors:
/// `Σ a_i log(a_i/b_i) − a_i + b_i`.
pub fn generalized_kl<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    ensure_dim("generalized_kl", a.len(), b.len())?;
    Ok(a.iter().zip(b).fold(T::zero(), |acc, (&ai, &bi)| {
        let log_term = if ai > T::zero() {
            ai * (ai / bi).ln()
        } else {
            T::zero()
        };
        acc + log_term - ai + bi
    }))
}

/// Regularized unbalanced objective
/// `⟨Π,C⟩ + ε Σ Π_ij(log Π_ij − 1) + τ KL(Π1‖p) + τ KL(Πᵀ1‖q)`.
pub fn uot_objective<T: Scalar>(
    plan: &Matrix<T>,
    cost: &CostMatrix<T>,
    mu: &Marginals<T>,
    cfg: &UotConfig<T>,
) -> Result<T> {
    check_shape(plan, cost)?;
    mu.check_shape(plan.rows(), plan.cols())?;
    if plan.as_slice().iter().any(|&x| !(x >= T::zero())) {
        return Err(Error::InvalidArgument(
            "plan entries must be nonnegative".into(),
        ));
    }
    let linear = transport_cost(plan, cost)?;
    let entropy = plan
        .as_slice()
        .iter()
        .fold(T::zero(), |acc, &x| acc + xlogx(x) - x);
    let mut value = linear + cfg.epsilon * entropy;
    if cfg.tau > T::zero() {
        value = value
            + cfg.tau * generalized_kl(&plan.row_sums(), &mu.p)?
            + cfg.tau * generalized_kl(&plan.col_sums(), &mu.q)?;
    }
    Ok(value)
}

fn check_shape<T: Scalar>(plan: &Matrix<T>, cost: &CostMatrix<T>) -> Result<()> {
    let (n, m) = cost.shape();
    ensure_dim("plan rows", n, plan.rows())?;
    ensure_dim("plan cols", m, plan.cols())
}
