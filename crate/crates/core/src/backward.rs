//! Implicit differentiation of the equilibrium.
//!
//! Given loss gradients `g_u`, `g_v` at the equilibrium `(u, v)`, the backward
//! pass solves
//!
//! ```text
//! [ Xi(u)   P      E^T  0   ] [y_u ]   [-g_u]
//! [ P^T    -Xi(v)  0    F^T ] [y_v ] = [-g_v]
//! [ E       0      0    0   ] [y_mu]   [ 0  ]
//! [ 0       F      0    0   ] [y_nu]   [ 0  ]
//! ```
//!
//! which is exactly the KKT system of the quadratic saddle point
//! `min_{Ex=0} max_{Fy=0} x^T P y + x^T Xi(u) x / 2 - y^T Xi(v) y / 2 + g_u^T x + g_v^T y`.
//! The direct solver factors the matrix; the first-order solver runs the
//! primal-dual method on the saddle point with `Xi`-weighted quadratic proxes,
//! each of which is a linear-time tree solve.

use crate::error::{Error, Result};
use crate::game::{Game, RationalityParams};
use crate::newton::SaddleSystem;
use crate::solution::{inf_norm, EquilibriumSolution};
use crate::xi::{constraint_transpose_apply, XiMatrix};

pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
/// Iterations between residual evaluations of the first-order solver.
pub const RESIDUAL_CHECK_EVERY: usize = 10;

/// Everything the backward pass needs from the forward solution.
#[derive(Debug, Clone)]
pub struct BackwardProblem {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub xi_u: XiMatrix,
    pub xi_v: XiMatrix,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
}

impl BackwardProblem {
    pub fn new(
        game: &Game,
        lambda: &RationalityParams,
        sol: &EquilibriumSolution,
        grad_u: Vec<f64>,
        grad_v: Vec<f64>,
    ) -> Result<Self> {
        let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
        tu.check_len(&grad_u, "loss gradient for u")?;
        tv.check_len(&grad_v, "loss gradient for v")?;
        for (what, g) in [("loss gradient for u", &grad_u), ("loss gradient for v", &grad_v)] {
            if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { what, index: i });
            }
        }
        Ok(BackwardProblem {
            xi_u: XiMatrix::from_log_behavior(tu, &sol.u, &sol.log_behavior_u, &lambda.u)?,
            xi_v: XiMatrix::from_log_behavior(tv, &sol.v, &sol.log_behavior_v, &lambda.v)?,
            u: sol.u.to_vec(),
            v: sol.v.to_vec(),
            grad_u,
            grad_v,
        })
    }
}

/// Strategy-space solution `(y_u, y_v)`; the multipliers come only from the
/// direct solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardSolution {
    pub y_u: Vec<f64>,
    pub y_v: Vec<f64>,
    pub y_mu: Option<Vec<f64>>,
    pub y_nu: Option<Vec<f64>>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves the backward system by sparse LU.
pub fn direct_backward_solve(bp: &BackwardProblem, game: &Game) -> Result<BackwardSolution> {
    let system = SaddleSystem::new(game, 1.0)?;
    let lu = system.factor(game, &bp.xi_u, &bp.xi_v)?;
    let mut rhs = vec![0.0; system.dim()];
    let nu = bp.grad_u.len() - 1;
    for a in 1..bp.grad_u.len() {
        rhs[a - 1] = -bp.grad_u[a];
    }
    for b in 1..bp.grad_v.len() {
        rhs[nu + b - 1] = -bp.grad_v[b];
    }
    let y = system.solve(&lu, &rhs)?;
    let (y_u, y_v, y_mu, y_nu) = system.split(&y);
    let residual = backward_residual(bp, game, &y_u, &y_v);
    if residual.is_nan() {
        return Err(Error::NonFinite {
            what: "direct backward solution",
            index: 0,
        });
    }
    Ok(BackwardSolution {
        y_u,
        y_v,
        y_mu: Some(y_mu),
        y_nu: Some(y_nu),
        iterations: 1,
        residual,
    })
}

/// Stationarity residual of `(x, y)` with the multipliers implied by the
/// quadratic best responses: `max(|g_u + P y + E^T gamma + Xi(u) x|,
/// |-g_v - P^T x + F^T delta + Xi(v) y|)` over non-root sequences.
pub fn backward_residual(bp: &BackwardProblem, game: &Game, x: &[f64], y: &[f64]) -> f64 {
    let mut py = vec![0.0; x.len()];
    game.payoff().mul_into(y, &mut py);
    let mut ptx = vec![0.0; y.len()];
    game.payoff().mul_t_into(x, &mut ptx);
    let cu: Vec<f64> = bp.grad_u.iter().zip(&py).map(|(g, p)| g + p).collect();
    let cv: Vec<f64> = bp.grad_v.iter().zip(&ptx).map(|(g, p)| -g - p).collect();
    block_residual(&bp.xi_u, game.treeplex_u(), &cu, x).max(block_residual(&bp.xi_v, game.treeplex_v(), &cv, y))
}

fn block_residual(xi: &XiMatrix, t: &crate::treeplex::Treeplex, c: &[f64], x: &[f64]) -> f64 {
    let (_, gamma) = xi.quadratic_best_response(c);
    let et = constraint_transpose_apply(t, &gamma);
    let xx = xi.mul(x);
    // NaN must survive the max so that a blown-up iterate is never accepted.
    (1..x.len())
        .map(|a| (c[a] + et[a] + xx[a]).abs())
        .fold(0.0, |m, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) })
}

/// Absolute residual target `tol * max(1, |g|_inf)` used by [`fom_backward_solve`].
pub fn residual_target(bp: &BackwardProblem, tol: f64) -> f64 {
    tol * inf_norm(&bp.grad_u).max(inf_norm(&bp.grad_v)).max(1.0)
}

/// Primal-dual iteration on the quadratic saddle point until
/// [`backward_residual`] is at most [`residual_target`].
///
/// The tolerance is relative because log-loss gradients scale like the
/// inverse of the observed probabilities, which can be tiny.
pub fn fom_backward_solve(
    bp: &BackwardProblem,
    game: &Game,
    tau: f64,
    tol: f64,
    max_iters: usize,
) -> Result<BackwardSolution> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {tau}")));
    }
    let (nu, nv) = (bp.grad_u.len(), bp.grad_v.len());
    let mut x = vec![0.0; nu];
    let mut y = vec![0.0; nv];
    let mut xt = vec![0.0; nu];
    let mut py = vec![0.0; nu];
    let mut ptx = vec![0.0; nv];
    let mut cx = vec![0.0; nu];
    let mut cy = vec![0.0; nv];
    let mut x_next = vec![0.0; nu];
    let mut xix = vec![0.0; nu];
    let mut xiy = vec![0.0; nv];
    let mut ws_u = bp.xi_u.workspace();
    let mut ws_v = bp.xi_v.workspace();
    let k = tau / (1.0 + tau);
    let target = residual_target(bp, tol);
    let mut iter = 0;
    loop {
        if iter % RESIDUAL_CHECK_EVERY == 0 || iter == max_iters {
            let residual = backward_residual(bp, game, &x, &y);
            log::trace!("backward fom iter {iter}: residual {residual:.3e}");
            if residual.is_nan() {
                return Err(Error::NonFinite {
                    what: "fom backward iterate",
                    index: iter,
                });
            }
            if residual <= target {
                return Ok(BackwardSolution {
                    y_u: x,
                    y_v: y,
                    y_mu: None,
                    y_nu: None,
                    iterations: iter,
                    residual,
                });
            }
            if iter >= max_iters {
                return Err(Error::NotConverged {
                    solver: "fom backward",
                    iterations: iter,
                    achieved: residual,
                    best: None,
                });
            }
        }
        iter += 1;

        game.payoff().mul_into(&y, &mut py);
        bp.xi_u.mul_into(&x, &mut xix);
        for a in 0..nu {
            cx[a] = k * (bp.grad_u[a] + py[a] - xix[a] / tau);
        }
        bp.xi_u.quadratic_best_response_into(&cx, &mut ws_u, &mut x_next);
        for a in 0..nu {
            xt[a] = 2.0 * x_next[a] - x[a];
        }
        std::mem::swap(&mut x, &mut x_next);

        game.payoff().mul_t_into(&xt, &mut ptx);
        bp.xi_v.mul_into(&y, &mut xiy);
        for b in 0..nv {
            cy[b] = k * (-bp.grad_v[b] - ptx[b] - xiy[b] / tau);
        }
        bp.xi_v.quadratic_best_response_into(&cy, &mut ws_v, &mut y);
    }
}

/// Infinity norm of the difference of two backward solutions' strategy parts.
pub fn backward_distance(a: &BackwardSolution, b: &BackwardSolution) -> f64 {
    let du: Vec<f64> = a.y_u.iter().zip(&b.y_u).map(|(x, y)| x - y).collect();
    let dv: Vec<f64> = a.y_v.iter().zip(&b.y_v).map(|(x, y)| x - y).collect();
    inf_norm(&du).max(inf_norm(&dv))
}
