//! Dense Levenberg–Marquardt for small least-squares problems.
//!
//! Minimises ½‖r(p)‖² by solving (JᵀJ + λ·diag JᵀJ) δ = −Jᵀr. λ starts at
//! 1e-3, grows ×10 on a rejected step and shrinks ÷10 on an accepted one.

use nalgebra::{DMatrix, DVector};

pub trait LeastSquaresProblem {
    fn residuals(&self, params: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, params: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub rel_cost_tol: f64,
    /// Stop when the proposed step is shorter than this (parameter units).
    pub step_tol: f64,
    pub max_iterations: usize,
}

impl Default for LmSettings {
    fn default() -> Self {
        LmSettings {
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 10.0,
            rel_cost_tol: 1e-10,
            step_tol: 1e-12,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    /// ½‖r‖² at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after the initial evaluation and after every accepted step.
    pub cost_history: Vec<f64>,
    /// JᵀJ at `params`.
    pub normal_matrix: DMatrix<f64>,
}

fn half_norm2(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

pub fn minimize<P: LeastSquaresProblem>(problem: &P, start: DVector<f64>, settings: &LmSettings) -> LmReport {
    let mut params = start;
    let mut residuals = problem.residuals(&params);
    let mut cost = half_norm2(&residuals);
    let mut jac = problem.jacobian(&params);
    let mut damping = settings.initial_damping;
    let mut history = vec![cost];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < settings.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let gradient = jac.transpose() * &residuals;
        let mut lhs = jtj.clone();
        for i in 0..lhs.nrows() {
            let d = jtj[(i, i)].max(f64::MIN_POSITIVE);
            lhs[(i, i)] += damping * d;
        }
        let step = match lhs.cholesky() {
            Some(ch) => -ch.solve(&gradient),
            None => {
                damping *= settings.damping_increase;
                continue;
            }
        };
        if !step.iter().all(|v| v.is_finite()) {
            damping *= settings.damping_increase;
            continue;
        }
        let small_step = step.norm() < settings.step_tol;

        let trial = &params + &step;
        let trial_residuals = problem.residuals(&trial);
        let trial_cost = half_norm2(&trial_residuals);
        if trial_cost.is_finite() && trial_cost <= cost {
            let rel_change = (cost - trial_cost) / cost;
            params = trial;
            residuals = trial_residuals;
            cost = trial_cost;
            jac = problem.jacobian(&params);
            history.push(cost);
            damping /= settings.damping_decrease;
            if rel_change < settings.rel_cost_tol || small_step {
                converged = true;
                break;
            }
        } else {
            damping *= settings.damping_increase;
            if small_step {
                converged = true;
                break;
            }
        }
    }

    let normal_matrix = jac.transpose() * &jac;
    LmReport {
        params,
        cost,
        iterations,
        converged,
        cost_history: history,
        normal_matrix,
    }
}
