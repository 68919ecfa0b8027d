//! Newton solver with an exact line search for the per-step cost
//!
//! `ℓ_p(v) = ½‖v − v*‖²_A + Σ_i ℓ_i(J_i v + b_i)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dynamics::StepProblem;
use crate::error::{invalid, Error, Result};
use crate::potentials::{ModelId, PotentialEval};

/// Relative PSD tolerance applied to each contact Hessian.
const CONTACT_PSD_TOLERANCE: f64 = 1e-10;
/// Absolute floor of the stopping test, relative to `‖A v*‖`.
const STOP_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub rel_tol: f64,
    pub max_iters: usize,
    /// The line search stops once `|φ'(α)| ≤ ls_rel_tol·|φ'(0)|`.
    pub ls_rel_tol: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    pub compute_condition_number: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-5,
            max_iters: 100,
            ls_rel_tol: 1e-3,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            max_backtracks: 40,
            compute_condition_number: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(invalid("rel_tol", format!("must lie in (0, 1), got {}", self.rel_tol)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "at least one iteration is required"));
        }
        if !(self.ls_rel_tol > 0.0 && self.ls_rel_tol < 1.0) {
            return Err(invalid("ls_rel_tol", "must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(invalid("backtrack_factor", "must lie in (0, 1)"));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 0.5) {
            return Err(invalid("armijo_c", "must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Human-readable statement of the stopping test, echoed into run metadata.
pub const STOPPING_CRITERION: &str = "|grad| <= rel_tol*max(|A(v-v*)|,|J^T gamma|) + 1e-14*|A v*|";

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub v: DVector<f64>,
    pub impulses: Vec<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub condition_number: Option<f64>,
    /// Cost at the warm start followed by the cost after every accepted step.
    pub cost_history: Vec<f64>,
    pub gradient_norm: f64,
    /// `‖A(v − v*) − Jᵀγ‖` at the returned iterate.
    pub momentum_residual: f64,
    /// `max(‖A(v − v*)‖, ‖Jᵀγ‖)`.
    pub residual_scale: f64,
}

struct Evaluation {
    cost: f64,
    gradient: DVector<f64>,
    contacts: Vec<PotentialEval>,
    momentum: DVector<f64>,
    contact_force: DVector<f64>,
}

fn evaluate(problem: &StepProblem, model: ModelId, v: &DVector<f64>) -> Result<Evaluation> {
    let dv = v - &problem.v_star;
    let momentum = &problem.a * &dv;
    let mut cost = 0.5 * dv.dot(&momentum);
    let mut contact_force = DVector::zeros(v.len());
    let mut contacts = Vec::with_capacity(problem.contacts.len());
    let contact_model = model.contact_model();
    for c in &problem.contacts {
        let k = &c.kinematics;
        let v_c = &k.jacobian * v + &k.bias;
        let e = contact_model.eval(&c.data, &v_c)?;
        cost += e.cost;
        contact_force += k.jacobian.transpose() * &e.gamma;
        contacts.push(e);
    }
    let gradient = &momentum - &contact_force;
    Ok(Evaluation { cost, gradient, contacts, momentum, contact_force })
}

fn hessian(problem: &StepProblem, eval: &Evaluation) -> Result<DMatrix<f64>> {
    let mut h = problem.a.clone();
    for (i, (c, e)) in problem.contacts.iter().zip(&eval.contacts).enumerate() {
        let g = &e.hessian;
        let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
        if min < -CONTACT_PSD_TOLERANCE * g.norm() {
            return Err(Error::NonConvexContact { contact: i, min_eigenvalue: min });
        }
        let j = &c.kinematics.jacobian;
        h += j.transpose() * g * j;
    }
    Ok(h)
}

/// `dᵀ(A + JᵀGJ)d` at an evaluated point.
fn curvature(problem: &StepProblem, eval: &Evaluation, dir: &DVector<f64>, a_dir: &DVector<f64>) -> f64 {
    let contacts: f64 = problem
        .contacts
        .iter()
        .zip(&eval.contacts)
        .map(|(c, e)| {
            let jd = &c.kinematics.jacobian * dir;
            jd.dot(&(&e.hessian * &jd))
        })
        .sum();
    dir.dot(a_dir) + contacts
}

fn sufficient_decrease(opts: &SolveOptions, phi0: f64, trial: &Evaluation, alpha: f64, slope: f64, dphi: f64) -> bool {
    let decrease = trial.cost - phi0;
    if decrease <= opts.armijo_c * alpha * slope {
        return true;
    }
    // Convexity gives φ(α) − φ(0) ≤ α·φ'(α); when the value difference is
    // lost to roundoff this derivative bound still certifies the decrease.
    let roundoff = 64.0 * f64::EPSILON * phi0.abs().max(trial.cost.abs());
    decrease.abs() <= roundoff && dphi <= opts.armijo_c * slope
}

/// Minimizes the convex `φ(α) = ℓ_p(v + α·d)` over `(0, 1]` with safeguarded
/// Newton on `φ'`, then checks Armijo. Falls back to backtracking from the
/// minimizer if the check fails. Plain backtracking from `α = 1` can cycle
/// across friction kinks, landing on alternating sides of `v_t = 0`.
fn line_search(
    problem: &StepProblem,
    model: ModelId,
    opts: &SolveOptions,
    v: &DVector<f64>,
    dir: &DVector<f64>,
    eval: &Evaluation,
    slope: f64,
) -> Result<Option<(DVector<f64>, Evaluation)>> {
    let a_dir = &problem.a * dir;
    let at = |alpha: f64| -> Result<(DVector<f64>, Evaluation, f64)> {
        let trial = v + alpha * dir;
        let e = evaluate(problem, model, &trial)?;
        let dphi = e.gradient.dot(dir);
        Ok((trial, e, dphi))
    };

    let (mut trial, mut e, mut dphi) = at(1.0)?;
    let mut alpha = 1.0;
    if dphi > 0.0 {
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut d_lo, mut d_hi) = (slope, dphi);
        for _ in 0..opts.max_backtracks {
            if dphi.abs() <= opts.ls_rel_tol * slope.abs() {
                break;
            }
            if dphi < 0.0 {
                (lo, d_lo) = (alpha, dphi);
            } else {
                (hi, d_hi) = (alpha, dphi);
            }
            let newton = alpha - dphi / curvature(problem, &e, dir, &a_dir);
            let secant = lo - d_lo * (hi - lo) / (d_hi - d_lo);
            let inside = |x: f64| x > lo + 0.01 * (hi - lo) && x < hi - 0.01 * (hi - lo);
            alpha = if newton.is_finite() && inside(newton) {
                newton
            } else if secant.is_finite() && inside(secant) {
                secant
            } else {
                0.5 * (lo + hi)
            };
            (trial, e, dphi) = at(alpha)?;
        }
    }

    for _ in 0..=opts.max_backtracks {
        if sufficient_decrease(opts, eval.cost, &e, alpha, slope, dphi) {
            return Ok(Some((trial, e)));
        }
        alpha *= opts.backtrack_factor;
        (trial, e, dphi) = at(alpha)?;
    }
    Ok(None)
}

fn stop_threshold(problem: &StepProblem, opts: &SolveOptions, eval: &Evaluation) -> f64 {
    let scale = eval.momentum.norm().max(eval.contact_force.norm());
    let floor = STOP_FLOOR * (&problem.a * &problem.v_star).norm();
    opts.rel_tol * scale + floor
}

/// Minimizes the step cost from the warm start `v0`.
pub fn solve_step(problem: &StepProblem, model: ModelId, opts: &SolveOptions) -> Result<Solution> {
    solve_from(problem, model, opts, &problem.v0)
}

/// Minimizes the step cost from an explicit warm start.
pub fn solve_from(problem: &StepProblem, model: ModelId, opts: &SolveOptions, start: &DVector<f64>) -> Result<Solution> {
    opts.validate()?;
    if start.len() != problem.num_dofs() {
        return Err(invalid("warm start", "dimension does not match the problem"));
    }
    let mut v = start.clone();
    let mut eval = evaluate(problem, model, &v)?;
    let mut cost_history = vec![eval.cost];
    let mut iterations = 0;
    let mut converged = problem.num_dofs() == 0 || eval.gradient.norm() <= stop_threshold(problem, opts, &eval);

    while !converged && iterations < opts.max_iters {
        let h = hessian(problem, &eval)?;
        let chol = h.cholesky().ok_or_else(|| Error::NotPositiveDefinite("Newton matrix A + JᵀGJ".into()))?;
        let dir = -chol.solve(&eval.gradient);
        let slope = eval.gradient.dot(&dir);
        if !(slope < 0.0) {
            // no descent left at working precision
            break;
        }

        let accepted = line_search(problem, model, opts, &v, &dir, &eval, slope)?;
        let Some((trial, e)) = accepted else { break };
        v = trial;
        eval = e;
        iterations += 1;
        cost_history.push(eval.cost);
        converged = eval.gradient.norm() <= stop_threshold(problem, opts, &eval);
    }

    let condition_number = if opts.compute_condition_number { Some(condition_number(problem, model, &v)?) } else { None };
    let residual_scale = eval.momentum.norm().max(eval.contact_force.norm());
    Ok(Solution {
        gradient_norm: eval.gradient.norm(),
        momentum_residual: eval.gradient.norm(),
        residual_scale,
        impulses: eval.contacts.into_iter().map(|e| e.gamma).collect(),
        v,
        iterations,
        converged,
        condition_number,
        cost_history,
    })
}

/// `λ_max/λ_min` of `A + JᵀG(v)J`.
pub fn condition_number(problem: &StepProblem, model: ModelId, v: &DVector<f64>) -> Result<f64> {
    if problem.num_dofs() == 0 {
        return Ok(1.0);
    }
    let eval = evaluate(problem, model, v)?;
    let h = hessian(problem, &eval)?;
    let eig = SymmetricEigen::new(h).eigenvalues;
    let (min, max) = (eig.min(), eig.max());
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite("Newton matrix at solution".into()));
    }
    Ok(max / min)
}
