//! Quantal response equilibria of extensive-form zero-sum games with
//! dilated entropy regularization: forward solvers (Newton and a
//! first-order method), implicit differentiation through the equilibrium, and
//! learning of rationality parameters from observed play.

pub mod backward;
pub mod bench;
pub mod efg;
pub mod entropy;
pub mod error;
pub mod forward;
pub mod game;
pub mod grad;
pub mod learning;
pub mod newton;
pub mod payoff;
pub mod solution;
pub mod solve;
pub mod treeplex;
pub mod xi;
pub mod zoo;

pub use backward::{
    backward_residual, direct_backward_solve, fom_backward_solve, BackwardProblem, BackwardSolution,
};
pub use error::{Error, Result};
pub use forward::{duality_gap, fom_forward_solve, prox_step, smoothed_best_response, DilatedEntropyProx};
pub use game::{Game, LambdaGroups, Player, RationalityParams};
pub use grad::{grad_lambda, grad_payoff, log_loss, ActionRecord, ObservedPlay};
pub use learning::{lambda_forward, train, LambdaModel, TrainConfig};
pub use newton::{kkt_residual, newton_solve, KktState};
pub use payoff::SparsePayoff;
pub use solution::{EquilibriumSolution, SolveDiagnostics, SolverKind};
pub use solve::{solve, solve_backward, BackwardOptions, SolveOptions};
pub use treeplex::{RealizationPlan, Treeplex, TreeplexDef};
pub use xi::{build_xi, quadratic_best_response, XiMatrix};
