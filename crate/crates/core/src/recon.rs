//! Sparse recovery by minimizing
//!
//! ```text
//! f(x) = 1/2 ||Phi x - y||^2 + lambda * sum_i ((D2 x)_i^2 + eps^2)^(p/2)
//! ```
//!
//! where `D2` is the second-order difference operator. The solver runs a
//! continuation over `(eps, lambda)`: each stage is a short nonlinear
//! conjugate-gradient run (Polak-Ribiere+, Armijo backtracking) warm-started
//! from the previous stage, after which both parameters are divided by the
//! continuation divisor down to their floors.

use serde::{Deserialize, Serialize};

use crate::sensing::SensingPlan;
use crate::{Error, Result};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Step halvings before a line search is declared failed.
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconParams {
    /// Exponent of the pseudo-norm, in `(0, 1]`.
    pub p: f64,
    /// Initial smoothing.
    pub eps1: f64,
    /// Initial regularization weight.
    pub lambda1: f64,
    /// Continuation stages (outer iterations).
    #[serde(alias = "T")]
    pub outer_iterations: usize,
    /// Stop when the relative objective decrease between stages drops
    /// below this.
    pub delta: f64,
    /// Stop when the gradient norm drops below this.
    #[serde(alias = "E_t")]
    pub grad_tol: f64,
    /// Conjugate-gradient iterations per stage.
    #[serde(alias = "L_b")]
    pub inner_iterations: usize,
    /// Divisor applied to `eps` and `lambda` after each stage.
    #[serde(alias = "r")]
    pub continuation_divisor: f64,
    pub eps_floor: f64,
    /// `lambda` never drops below `lambda_floor_ratio * lambda1`.
    pub lambda_floor_ratio: f64,
}

impl Default for ReconParams {
    fn default() -> Self {
        ReconParams {
            p: 0.9,
            eps1: 1.0,
            lambda1: 1.0,
            outer_iterations: 50,
            delta: 1e-5,
            grad_tol: 1e-15,
            inner_iterations: 15,
            continuation_divisor: 4.0,
            eps_floor: 1e-6,
            lambda_floor_ratio: 1e-4,
        }
    }
}

impl ReconParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps1", self.eps1),
            ("lambda1", self.lambda1),
            ("delta", self.delta),
            ("grad_tol", self.grad_tol),
            ("continuation_divisor", self.continuation_divisor),
            ("eps_floor", self.eps_floor),
            ("lambda_floor_ratio", self.lambda_floor_ratio),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "recon.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::config(format!(
                "recon.p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if self.outer_iterations == 0 || self.inner_iterations == 0 {
            return Err(Error::config("recon iteration counts must be >= 1"));
        }
        if self.continuation_divisor < 1.0 {
            return Err(Error::config("recon.continuation_divisor must be >= 1"));
        }
        Ok(())
    }

    pub fn initial_penalty(&self) -> Penalty {
        Penalty {
            p: self.p,
            eps: self.eps1,
            lambda: self.lambda1,
        }
    }
}

/// The regularizer's parameters at one continuation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    pub p: f64,
    pub eps: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconResult {
    pub x_star: Vec<f64>,
    /// Objective at the end of each stage, under that stage's penalty.
    pub objective_history: Vec<f64>,
    /// A stopping test fired before the stage budget ran out.
    pub converged: bool,
    /// Continuation stages run.
    pub iterations_used: usize,
    pub cg_iterations: usize,
    /// Stages cut short because backtracking found no decrease.
    pub line_search_failures: usize,
    /// `eps` in force during each stage.
    pub eps_history: Vec<f64>,
}

/// `out[i] = x[i+2] - 2 x[i+1] + x[i]`.
pub fn second_diff(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 3 {
        return Err(Error::input(format!(
            "second difference needs at least 3 samples, got {}",
            x.len()
        )));
    }
    Ok(x.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect())
}

fn second_diff_into(x: &[f64], out: &mut [f64]) {
    for (o, w) in out.iter_mut().zip(x.windows(3)) {
        *o = w[2] - 2.0 * w[1] + w[0];
    }
}

/// Accumulates `D2^T v` into `out` (length `v.len() + 2`).
fn second_diff_transpose_add(v: &[f64], scale: f64, out: &mut [f64]) {
    for (i, &vi) in v.iter().enumerate() {
        let s = scale * vi;
        out[i] += s;
        out[i + 1] -= 2.0 * s;
        out[i + 2] += s;
    }
}

/// `sum_i (v_i^2 + eps^2)^(p/2)`.
pub fn smoothed_lp(v: &[f64], p: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    v.iter().map(|&vi| (vi * vi + e2).powf(0.5 * p)).sum()
}

fn check_dims(x: &[f64], y: &[f64], plan: &SensingPlan) -> Result<()> {
    if x.len() != plan.n() || y.len() != plan.m() {
        return Err(Error::input(format!(
            "dimension mismatch: x has {}, y has {}, plan is {}x{}",
            x.len(),
            y.len(),
            plan.m(),
            plan.n()
        )));
    }
    if plan.n() < 3 {
        return Err(Error::input("reconstruction needs N >= 3"));
    }
    Ok(())
}

/// Scratch buffers shared by objective and gradient evaluations.
struct Workspace {
    residual: Vec<f64>,
    diff: Vec<f64>,
}

impl Workspace {
    fn new(plan: &SensingPlan) -> Self {
        Workspace {
            residual: vec![0.0; plan.m()],
            diff: vec![0.0; plan.n() - 2],
        }
    }
}

fn objective_ws(
    x: &[f64],
    y: &[f64],
    plan: &SensingPlan,
    pen: &Penalty,
    ws: &mut Workspace,
) -> f64 {
    plan.apply(x, &mut ws.residual);
    let data: f64 = ws
        .residual
        .iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    second_diff_into(x, &mut ws.diff);
    0.5 * data + pen.lambda * smoothed_lp(&ws.diff, pen.p, pen.eps)
}

fn gradient_ws(
    x: &[f64],
    y: &[f64],
    plan: &SensingPlan,
    pen: &Penalty,
    ws: &mut Workspace,
    out: &mut [f64],
) {
    plan.apply(x, &mut ws.residual);
    for (r, &yk) in ws.residual.iter_mut().zip(y) {
        *r -= yk;
    }
    plan.apply_transpose(&ws.residual, out);
    second_diff_into(x, &mut ws.diff);
    let e2 = pen.eps * pen.eps;
    let expo = 0.5 * pen.p - 1.0;
    for v in ws.diff.iter_mut() {
        *v *= (*v * *v + e2).powf(expo);
    }
    second_diff_transpose_add(&ws.diff, pen.lambda * pen.p, out);
}

pub fn objective(x: &[f64], y: &[f64], plan: &SensingPlan, pen: &Penalty) -> Result<f64> {
    check_dims(x, y, plan)?;
    Ok(objective_ws(x, y, plan, pen, &mut Workspace::new(plan)))
}

/// `Phi^T (Phi x - y) + lambda p D2^T (v (v^2 + eps^2)^(p/2 - 1))` with
/// `v = D2 x`.
pub fn gradient(x: &[f64], y: &[f64], plan: &SensingPlan, pen: &Penalty) -> Result<Vec<f64>> {
    check_dims(x, y, plan)?;
    let mut g = vec![0.0; plan.n()];
    gradient_ws(x, y, plan, pen, &mut Workspace::new(plan), &mut g);
    Ok(g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Curvature of a quadratic majorizer of `f` along `d` at `x`: the data
/// term exactly, and the penalty through `phi''(v) <= p (v^2+eps^2)^(p/2-1)`
/// (valid for `p <= 2`).
fn majorizer_curvature(
    x: &[f64],
    d: &[f64],
    plan: &SensingPlan,
    pen: &Penalty,
    ws: &mut Workspace,
) -> f64 {
    plan.apply(d, &mut ws.residual);
    let data: f64 = ws.residual.iter().map(|v| v * v).sum();
    let e2 = pen.eps * pen.eps;
    let expo = 0.5 * pen.p - 1.0;
    let mut reg = 0.0;
    for (wx, wd) in x.windows(3).zip(d.windows(3)) {
        let v = wx[2] - 2.0 * wx[1] + wx[0];
        let dv = wd[2] - 2.0 * wd[1] + wd[0];
        reg += (v * v + e2).powf(expo) * dv * dv;
    }
    data + pen.lambda * pen.p * reg
}

struct StageOutcome {
    iterations: usize,
    line_search_failed: bool,
    grad_norm: f64,
}

/// One continuation stage of PR+ nonlinear CG, restarting every `n` steps
/// or whenever the direction stops being a descent direction.
fn cg_stage(
    x: &mut [f64],
    y: &[f64],
    plan: &SensingPlan,
    pen: &Penalty,
    params: &ReconParams,
    ws: &mut Workspace,
) -> StageOutcome {
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut trial = vec![0.0; n];
    gradient_ws(x, y, plan, pen, ws, &mut g);
    let mut grad_norm = dot(&g, &g).sqrt();
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut f = objective_ws(x, y, plan, pen, ws);
    let mut since_restart = 0;
    let mut iterations = 0;

    while iterations < params.inner_iterations {
        if grad_norm < params.grad_tol {
            break;
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || since_restart >= n {
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            slope = -grad_norm * grad_norm;
            since_restart = 0;
        }
        let curvature = majorizer_curvature(x, &d, plan, pen, ws);
        let mut alpha = if curvature > 0.0 && curvature.is_finite() {
            -slope / curvature
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            for ((t, xi), di) in trial.iter_mut().zip(x.iter()).zip(&d) {
                *t = xi + alpha * di;
            }
            let f_trial = objective_ws(&trial, y, plan, pen, ws);
            if f_trial <= f + ARMIJO_C * alpha * slope {
                accepted = Some(f_trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(f_trial) = accepted else {
            return StageOutcome {
                iterations,
                line_search_failed: true,
                grad_norm,
            };
        };
        x.copy_from_slice(&trial);
        f = f_trial;
        iterations += 1;
        since_restart += 1;

        gradient_ws(x, y, plan, pen, ws, &mut g_new);
        let gg = dot(&g, &g);
        let beta = if gg > 0.0 {
            let num: f64 = g_new.iter().zip(&g).map(|(a, b)| a * (a - b)).sum();
            (num / gg).max(0.0)
        } else {
            0.0
        };
        for (di, gi) in d.iter_mut().zip(&g_new) {
            *di = -gi + beta * *di;
        }
        std::mem::swap(&mut g, &mut g_new);
        grad_norm = dot(&g, &g).sqrt();
    }
    StageOutcome {
        iterations,
        line_search_failed: false,
        grad_norm,
    }
}

/// Recovers a frame from its measurements, starting from `Phi^T y`.
pub fn reconstruct(y: &[f64], plan: &SensingPlan, params: &ReconParams) -> Result<ReconResult> {
    params.validate()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("measurements contain non-finite values"));
    }
    let mut x = vec![0.0; plan.n()];
    check_dims(&x, y, plan)?;
    plan.apply_transpose(y, &mut x);

    let mut ws = Workspace::new(plan);
    let mut pen = params.initial_penalty();
    let lambda_floor = params.lambda_floor_ratio * params.lambda1;
    let mut prev_f = objective_ws(&x, y, plan, &pen, &mut ws);
    let mut result = ReconResult {
        x_star: Vec::new(),
        objective_history: Vec::with_capacity(params.outer_iterations),
        converged: false,
        iterations_used: 0,
        cg_iterations: 0,
        line_search_failures: 0,
        eps_history: Vec::with_capacity(params.outer_iterations),
    };

    for _ in 0..params.outer_iterations {
        let stage = cg_stage(&mut x, y, plan, &pen, params, &mut ws);
        let f = objective_ws(&x, y, plan, &pen, &mut ws);
        result.iterations_used += 1;
        result.cg_iterations += stage.iterations;
        result.line_search_failures += stage.line_search_failed as usize;
        result.objective_history.push(f);
        result.eps_history.push(pen.eps);

        let rel_decrease = (prev_f - f) / prev_f.abs().max(f64::MIN_POSITIVE);
        if stage.grad_norm < params.grad_tol || rel_decrease < params.delta {
            result.converged = true;
            break;
        }
        prev_f = f;
        pen.eps = (pen.eps / params.continuation_divisor).max(params.eps_floor);
        pen.lambda = (pen.lambda / params.continuation_divisor).max(lambda_floor);
    }
    result.x_star = x;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::gen_bernoulli_plan;

    #[test]
    fn second_diff_examples() {
        assert_eq!(second_diff(&[2.0; 6]).unwrap(), vec![0.0; 4]);
        let ramp: Vec<f64> = (0..7).map(|i| 1.5 - 0.25 * i as f64).collect();
        assert!(second_diff(&ramp).unwrap().iter().all(|v| v.abs() < 1e-15));
        // columns of the banded operator, N = 5
        let expected = [
            vec![1.0, 0.0, 0.0],
            vec![-2.0, 1.0, 0.0],
            vec![1.0, -2.0, 1.0],
            vec![0.0, 1.0, -2.0],
            vec![0.0, 0.0, 1.0],
        ];
        for (j, col) in expected.iter().enumerate() {
            let mut e = vec![0.0; 5];
            e[j] = 1.0;
            assert_eq!(&second_diff(&e).unwrap(), col);
        }
        assert!(second_diff(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn transpose_is_adjoint() {
        let x = [0.3, -1.0, 2.0, 0.5, 0.0, 1.25];
        let v = [1.0, -0.5, 2.0, 0.75];
        let mut dt = vec![0.0; 6];
        second_diff_transpose_add(&v, 1.0, &mut dt);
        let lhs = dot(&second_diff(&x).unwrap(), &v);
        assert!((lhs - dot(&x, &dt)).abs() < 1e-12);
    }

    #[test]
    fn smoothed_lp_examples() {
        assert!((smoothed_lp(&[0.0; 10], 0.9, 0.5) - 10.0 * 0.5f64.powf(0.9)).abs() < 1e-12);
        assert!((smoothed_lp(&[3.0, 4.0], 1.0, 1e-9) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn objective_floor_and_zero_data_term() {
        let plan = gen_bernoulli_plan(8, 16, 2, 1).unwrap();
        let pen = Penalty {
            p: 0.9,
            eps: 0.5,
            lambda: 2.0,
        };
        let floor = 2.0 * 14.0 * 0.5f64.powf(0.9);
        let f0 = objective(&[0.0; 16], &[0.0; 8], &plan, &pen).unwrap();
        assert!((f0 - floor).abs() < 1e-12);
        let x: Vec<f64> = (0..16).map(|i| 0.1 * i as f64 - 0.4).collect();
        let mut y = vec![0.0; 8];
        plan.apply(&x, &mut y);
        assert!((objective(&x, &y, &plan, &pen).unwrap() - floor).abs() < 1e-12);
        assert!(objective(&x, &y[..7], &plan, &pen).is_err());
    }

    #[test]
    fn gradient_vanishes_without_regularizer_on_consistent_data() {
        let plan = gen_bernoulli_plan(8, 16, 2, 3).unwrap();
        let x: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 * 0.2).collect();
        let mut y = vec![0.0; 8];
        plan.apply(&x, &mut y);
        let pen = Penalty {
            p: 0.9,
            eps: 1.0,
            lambda: 0.0,
        };
        assert!(gradient(&x, &y, &plan, &pen)
            .unwrap()
            .iter()
            .all(|g| g.abs() < 1e-14));
    }

    #[test]
    fn zero_measurements_stay_at_zero() {
        let plan = gen_bernoulli_plan(128, 256, 2, 9).unwrap();
        let r = reconstruct(&[0.0; 128], &plan, &ReconParams::default()).unwrap();
        let norm = dot(&r.x_star, &r.x_star).sqrt();
        assert!(norm < 1e-6, "{norm}");
        assert!(r.converged);
    }

    #[test]
    fn rejects_bad_input() {
        let plan = gen_bernoulli_plan(4, 8, 2, 9).unwrap();
        let mut y = vec![0.0; 4];
        y[1] = f64::NAN;
        assert!(matches!(
            reconstruct(&y, &plan, &ReconParams::default()),
            Err(Error::Input(_))
        ));
        let bad = ReconParams {
            p: 1.5,
            ..Default::default()
        };
        assert!(reconstruct(&[0.0; 4], &plan, &bad).is_err());
        assert!(reconstruct(&[0.0; 3], &plan, &ReconParams::default()).is_err());
    }

    #[test]
    fn params_from_config_keys() {
        let p: ReconParams = toml::from_str("T = 7\nL_b = 3\nE_t = 1e-12\nr = 2.0").unwrap();
        assert_eq!(p.outer_iterations, 7);
        assert_eq!(p.inner_iterations, 3);
        assert_eq!(p.grad_tol, 1e-12);
        assert_eq!(p.continuation_divisor, 2.0);
        assert_eq!(p.p, 0.9);
    }
}
