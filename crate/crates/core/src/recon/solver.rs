//! Equality-constrained ℓ1 minimization by primal-dual splitting.
//!
//! Iteration for `min ‖x‖₁ s.t. Ax = y` over complex `x`:
//!
//! ```text
//! x⁺ = soft(x − τ A*z, τ)
//! z⁺ = z + σ (A(2x⁺ − x) − y)
//! ```
//!
//! with `τσ‖A‖² < 1`, `‖A‖` from power iteration. When `adaptive` is set the
//! ratio `τ/σ` is rebalanced from the primal and dual residuals while the
//! product stays fixed, with geometrically shrinking adjustments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::operator::LinearOperator;
use crate::Complex64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Absolute bound on `‖Ax − y‖₂`.
    pub tol_feas: f64,
    /// Relative change of `‖x‖₁` per iteration regarded as stagnant.
    pub stagnation_tol: f64,
    /// Consecutive stagnant iterations required to stop.
    pub stagnation_window: usize,
    /// Product `τσ‖A‖²`, in `(0, 1)`.
    pub step_product: f64,
    /// Initial `τ/σ`.
    pub step_ratio: f64,
    pub adaptive: bool,
    pub power_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 5000,
            tol_feas: 1e-6,
            stagnation_tol: 1e-7,
            stagnation_window: 20,
            step_product: 0.95,
            step_ratio: 1.0,
            adaptive: false,
            power_iterations: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_feas > 0.0
            && self.stagnation_tol > 0.0
            && self.step_product > 0.0
            && self.step_product < 1.0
            && self.step_ratio > 0.0
            && self.max_iterations > 0
            && self.power_iterations > 0;
        if !ok {
            return Err(Error::InvalidConfig(format!("solver configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    #[serde(skip)]
    pub x: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub objective: f64,
    pub operator_norm: f64,
    /// `‖Ax_k − y‖₂` after every iteration.
    pub residual_history: Vec<f64>,
}

impl SolverReport {
    /// Whether the feasibility residual never increased after iteration `skip`.
    pub fn residual_nonincreasing_after(&self, skip: usize) -> bool {
        self.residual_history.iter().skip(skip).collect::<Vec<_>>().windows(2).all(|w| w[1] <= w[0])
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value of `op`, from a deterministic start vector.
pub fn operator_norm(op: &dyn LinearOperator, iterations: usize) -> f64 {
    let n = op.cols();
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.1)).collect();
    let mut av = vec![Complex64::new(0.0, 0.0); op.rows()];
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|c| *c /= nv);
        op.apply(&v, &mut av);
        op.adjoint(&av, &mut v);
        lambda = norm(&v);
    }
    lambda.sqrt()
}

fn soft(v: Complex64, t: f64) -> Complex64 {
    let m = v.norm();
    if m <= t {
        Complex64::new(0.0, 0.0)
    } else {
        v * (1.0 - t / m)
    }
}

/// Runs the iteration and reports whether it converged.
pub fn basis_pursuit_report(op: &dyn LinearOperator, y: &[Complex64], cfg: &SolverConfig) -> Result<SolverReport> {
    cfg.validate()?;
    let (m, n) = (op.rows(), op.cols());
    if y.len() != m {
        return Err(Error::InvalidConfig(format!("{} measurements for an operator with {m} rows", y.len())));
    }
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidConfig("non-finite measurements".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    // 2% margin over the power-iteration estimate, which approaches from below
    let l = operator_norm(op, cfg.power_iterations) * 1.02;
    if l == 0.0 {
        return Err(Error::Degenerate("zero operator".into()));
    }
    let prod = cfg.step_product / (l * l);
    let mut tau = (prod * cfg.step_ratio).sqrt();
    let mut sigma = prod / tau;
    let (mut alpha, eta, delta) = (0.5, 0.95, 1.5);

    let mut x = vec![zero; n];
    let mut ax = vec![zero; m];
    let mut z = vec![zero; m];
    let mut atz = vec![zero; n];
    let mut x_new = vec![zero; n];
    let mut ax_new = vec![zero; m];
    let mut atz_new = vec![zero; n];
    let mut history = Vec::new();
    let mut obj_prev = 0.0f64;
    let mut stagnant = 0usize;

    for it in 1..=cfg.max_iterations {
        for ((xn, &xo), &g) in x_new.iter_mut().zip(&x).zip(&atz) {
            *xn = soft(xo - g * tau, tau);
        }
        op.apply(&x_new, &mut ax_new);
        let mut z_new = z.clone();
        for ((zn, (&an, &ao)), &yi) in z_new.iter_mut().zip(ax_new.iter().zip(&ax)).zip(y) {
            *zn += (an * 2.0 - ao - yi) * sigma;
        }
        op.adjoint(&z_new, &mut atz_new);

        let residual = ax_new.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        history.push(residual);
        let obj: f64 = x_new.iter().map(|c| c.norm()).sum();

        if cfg.adaptive {
            let p: f64 = x
                .iter()
                .zip(&x_new)
                .zip(atz.iter().zip(&atz_new))
                .map(|((&a, &b), (&ga, &gb))| ((a - b) / tau - (ga - gb)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let d: f64 = z
                .iter()
                .zip(&z_new)
                .zip(ax.iter().zip(&ax_new))
                .map(|((&a, &b), (&ka, &kb))| ((a - b) / sigma - (ka - kb)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if p > delta * d {
                tau /= 1.0 - alpha;
                sigma *= 1.0 - alpha;
                alpha *= eta;
            } else if d > delta * p {
                tau *= 1.0 - alpha;
                sigma /= 1.0 - alpha;
                alpha *= eta;
            }
        }

        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut ax, &mut ax_new);
        std::mem::swap(&mut atz, &mut atz_new);
        z = z_new;

        let change = (obj - obj_prev).abs() / obj.max(f64::MIN_POSITIVE);
        obj_prev = obj;
        stagnant = if change <= cfg.stagnation_tol { stagnant + 1 } else { 0 };
        if residual <= cfg.tol_feas && stagnant >= cfg.stagnation_window {
            return Ok(SolverReport {
                x,
                iterations: it,
                converged: true,
                final_residual: residual,
                objective: obj,
                operator_norm: l,
                residual_history: history,
            });
        }
    }
    let final_residual = *history.last().unwrap_or(&f64::NAN);
    Ok(SolverReport {
        objective: x.iter().map(|c| c.norm()).sum(),
        x,
        iterations: cfg.max_iterations,
        converged: false,
        final_residual,
        operator_norm: l,
        residual_history: history,
    })
}

/// As [`basis_pursuit_report`], failing with the residual history when the
/// iteration does not converge.
pub fn basis_pursuit(op: &dyn LinearOperator, y: &[Complex64], cfg: &SolverConfig) -> Result<SolverReport> {
    let rep = basis_pursuit_report(op, y, cfg)?;
    if rep.converged {
        Ok(rep)
    } else {
        Err(Error::NonConvergence {
            iterations: rep.iterations,
            final_residual: rep.final_residual,
            residual_history: rep.residual_history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::operator::DenseOperator;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_system() {
        let op = DenseOperator { rows: 2, cols: 2, data: vec![c(1.0), c(0.0), c(0.0), c(1.0)] };
        let r = basis_pursuit(&op, &[c(1.0), c(0.0)], &SolverConfig::default()).unwrap();
        assert!((r.x[0] - c(1.0)).norm() < 1e-6 && r.x[1].norm() < 1e-6);
    }

    #[test]
    fn minimum_l1_face() {
        let op = DenseOperator { rows: 1, cols: 2, data: vec![c(1.0), c(1.0)] };
        let r = basis_pursuit(&op, &[c(1.0)], &SolverConfig::default()).unwrap();
        let l1: f64 = r.x.iter().map(|v| v.norm()).sum();
        assert!((l1 - 1.0).abs() < 1e-4);
        assert!((r.x[0] + r.x[1] - c(1.0)).norm() < 1e-6);
    }

    #[test]
    fn non_convergence_carries_history() {
        let op = DenseOperator { rows: 1, cols: 2, data: vec![c(1.0), c(1.0)] };
        let cfg = SolverConfig { max_iterations: 3, ..SolverConfig::default() };
        match basis_pursuit(&op, &[c(1.0)], &cfg) {
            Err(Error::NonConvergence { iterations, residual_history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(residual_history.len(), 3);
            }
            other => panic!("{other:?}"),
        }
        assert!(basis_pursuit(&op, &[c(1.0), c(2.0)], &SolverConfig::default()).is_err());
    }
}
