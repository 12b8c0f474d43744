//! Solver selection shared by the learning loop, the benchmarks and the CLI.

use serde::{Deserialize, Serialize};

use crate::backward::{direct_backward_solve, fom_backward_solve, BackwardProblem, BackwardSolution};
use crate::error::Result;
use crate::forward::{fom_forward_solve, gap_from_log};
use crate::game::{Game, RationalityParams};
use crate::newton::newton_solve;
use crate::solution::{EquilibriumSolution, SolverKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub solver: SolverKind,
    /// First-order step size.
    pub tau: f64,
    /// Duality-gap target of the first-order solver.
    pub gap_tol: f64,
    /// KKT residual target of Newton's method.
    pub residual_tol: f64,
    pub max_iters: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            solver: SolverKind::Newton,
            tau: crate::forward::DEFAULT_TAU,
            gap_tol: crate::forward::DEFAULT_GAP_TOL,
            residual_tol: crate::newton::DEFAULT_RESIDUAL_TOL,
            max_iters: None,
        }
    }
}

impl SolveOptions {
    pub fn newton(residual_tol: f64) -> Self {
        SolveOptions {
            solver: SolverKind::Newton,
            residual_tol,
            ..Default::default()
        }
    }

    pub fn fom(tau: f64, gap_tol: f64) -> Self {
        SolveOptions {
            solver: SolverKind::Fom,
            tau,
            gap_tol,
            ..Default::default()
        }
    }
}

/// Forward solve with the selected method. Newton solutions also get their
/// duality gap filled in.
pub fn solve(game: &Game, lambda: &RationalityParams, opts: &SolveOptions) -> Result<EquilibriumSolution> {
    match opts.solver {
        SolverKind::Newton => {
            let iters = opts.max_iters.unwrap_or(crate::newton::DEFAULT_MAX_ITERS);
            let mut sol = newton_solve(game, lambda, opts.residual_tol, iters)?;
            sol.diagnostics.gap = Some(gap_from_log(
                game,
                lambda,
                &sol.u,
                &sol.log_behavior_u,
                &sol.v,
                &sol.log_behavior_v,
            ));
            Ok(sol)
        }
        SolverKind::Fom => {
            let iters = opts.max_iters.unwrap_or(crate::forward::DEFAULT_MAX_ITERS);
            fom_forward_solve(game, lambda, opts.tau, opts.gap_tol, iters)
        }
    }
}

/// Backward options: the direct solver, or the first-order solver with its
/// step size and residual target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackwardOptions {
    pub solver: SolverKind,
    pub tau: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BackwardOptions {
    fn default() -> Self {
        BackwardOptions {
            solver: SolverKind::Newton,
            tau: crate::backward::DEFAULT_TAU,
            tol: crate::backward::DEFAULT_TOL,
            max_iters: crate::backward::DEFAULT_MAX_ITERS,
        }
    }
}

pub fn solve_backward(bp: &BackwardProblem, game: &Game, opts: &BackwardOptions) -> Result<BackwardSolution> {
    match opts.solver {
        SolverKind::Newton => direct_backward_solve(bp, game),
        SolverKind::Fom => fom_backward_solve(bp, game, opts.tau, opts.tol, opts.max_iters),
    }
}
