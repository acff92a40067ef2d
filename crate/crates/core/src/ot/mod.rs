//! Entropic optimal transport: balanced Sinkhorn, unbalanced Sinkhorn with
//! generalized-KL marginal penalties, objective evaluators and brute-force
//! reference solvers for small instances.

mod newton;
mod objective;
mod oracle;
mod sinkhorn;

pub use objective::{generalized_kl, transport_cost, uot_objective};
pub use oracle::{exact_ot_oracle, exact_uot_oracle, OracleSolution, MAX_OT_ORACLE_SIZE};
pub use sinkhorn::{sinkhorn_balanced, sinkhorn_unbalanced};

use serde::Serialize;

use crate::error::{ensure_dim, Error, Result};
use crate::geometry::Matrix;
use crate::scalar::Scalar;

/// Source and target masses.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Scalar> Marginals<T> {
    pub fn new(p: Vec<T>, q: Vec<T>) -> Result<Self> {
        if p.is_empty() || q.is_empty() {
            return Err(Error::Empty("marginal"));
        }
        if p.iter().chain(&q).any(|&x| !x.is_finite() || x < T::zero()) {
            return Err(Error::InvalidArgument(
                "marginal entries must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { p, q })
    }

    /// Uniform `1/n` and `1/m` masses.
    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            p: vec![T::one() / T::count(n); n],
            q: vec![T::one() / T::count(m); m],
        }
    }

    pub(crate) fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        ensure_dim("source marginal", rows, self.p.len())?;
        ensure_dim("target marginal", cols, self.q.len())
    }

    pub(crate) fn check_balanced(&self) -> Result<()> {
        let sp: T = self.p.iter().copied().sum();
        let sq: T = self.q.iter().copied().sum();
        if (sp - sq).abs() > T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) {
            return Err(Error::InvalidArgument(format!(
                "balanced transport needs equal masses, got {sp} and {sq}"
            )));
        }
        Ok(())
    }
}

/// Whether the scaling iterations run on `u, v` directly or on `log u, log v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogDomain {
    /// Log-domain when `epsilon < 0.01 · max(C)`.
    #[default]
    Auto,
    Always,
    Never,
}

impl LogDomain {
    pub const ALL: [LogDomain; 3] = [LogDomain::Auto, LogDomain::Always, LogDomain::Never];

    pub fn name(self) -> &'static str {
        match self {
            LogDomain::Auto => "auto",
            LogDomain::Always => "always",
            LogDomain::Never => "never",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown log-domain setting {s:?}")))
    }

    pub(crate) fn resolve<T: Scalar>(self, epsilon: T, max_cost: T) -> bool {
        match self {
            LogDomain::Auto => epsilon < T::lit(0.01) * max_cost,
            LogDomain::Always => true,
            LogDomain::Never => false,
        }
    }
}

/// Balanced Sinkhorn settings. `tol` bounds both marginal residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig<T> {
    pub epsilon: T,
    pub max_iter: usize,
    pub tol: T,
    pub log_domain: LogDomain,
    /// Number of plain scaling iterations after which a still unconverged
    /// solve switches to damped Newton steps on the same marginal
    /// equations. `None` keeps plain scaling for the whole budget.
    pub newton_after: Option<usize>,
}

impl<T: Scalar> SinkhornConfig<T> {
    pub fn new(epsilon: T) -> Self {
        Self {
            epsilon,
            max_iter: 10_000,
            tol: T::lit(1e-9),
            log_domain: LogDomain::Auto,
            newton_after: Some(200),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(self.epsilon, self.max_iter, self.tol)
    }
}

/// Unbalanced Sinkhorn settings: entropic strength `epsilon`, marginal KL
/// strength `tau`, and a stopping tolerance on the sup-norm change of the
/// log scaling vectors between iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UotConfig<T> {
    pub epsilon: T,
    pub tau: T,
    pub max_iter: usize,
    pub tol: T,
    pub log_domain: LogDomain,
}

impl<T: Scalar> Default for UotConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(0.0005),
            tau: T::lit(0.01),
            max_iter: 10_000,
            tol: T::lit(1e-9),
            log_domain: LogDomain::Auto,
        }
    }
}

impl<T: Scalar> UotConfig<T> {
    pub fn new(epsilon: T, tau: T) -> Self {
        Self {
            epsilon,
            tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_common(self.epsilon, self.max_iter, self.tol)?;
        if !(self.tau >= T::zero()) || !self.tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tau must be finite and >= 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Exponent `τ/(τ+ε)` applied to the marginal ratio in each update.
    pub fn damping(&self) -> T {
        self.tau / (self.tau + self.epsilon)
    }
}

fn validate_common<T: Scalar>(epsilon: T, max_iter: usize, tol: T) -> Result<()> {
    if !(epsilon > T::zero()) || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be finite and > 0, got {epsilon}"
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument(format!("tol must be > 0, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    Ok(())
}

/// A solved coupling together with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub plan: Matrix<T>,
    pub iterations: usize,
    /// `max_i |Π1 − p|`.
    pub row_residual: T,
    /// `max_j |Πᵀ1 − q|`.
    pub col_residual: T,
    /// Transport cost for balanced solves; the full regularized objective
    /// for unbalanced solves.
    pub objective: T,
    pub converged: bool,
    pub log_domain: bool,
}

impl<T: Scalar> TransportPlan<T> {
    pub fn shape(&self) -> (usize, usize) {
        self.plan.shape()
    }

    pub fn mass(&self) -> T {
        self.plan.sum()
    }

    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            objective: self.objective.as_f64(),
            iterations: self.iterations,
            row_residual: self.row_residual.as_f64(),
            col_residual: self.col_residual.as_f64(),
            converged: self.converged,
        }
    }
}

/// One-line JSON summary of a solve.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PlanSummary {
    pub objective: f64,
    pub iterations: usize,
    pub row_residual: f64,
    pub col_residual: f64,
    pub converged: bool,
}

pub(crate) fn marginal_residuals<T: Scalar>(plan: &Matrix<T>, mu: &Marginals<T>) -> (T, T) {
    let sup = |a: Vec<T>, b: &[T]| {
        a.iter()
            .zip(b)
            .map(|(&x, &y)| (x - y).abs())
            .fold(T::zero(), T::max)
    };
    (sup(plan.row_sums(), &mu.p), sup(plan.col_sums(), &mu.q))
}
