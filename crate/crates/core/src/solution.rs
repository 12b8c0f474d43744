use serde::{Deserialize, Serialize};

use crate::game::Game;
use crate::treeplex::{behavioral_from_log, RealizationPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Newton,
    Fom,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Newton => "newton",
            SolverKind::Fom => "fom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub solver: SolverKind,
    pub iterations: usize,
    /// Duality gap at the returned point, when computed.
    pub gap: Option<f64>,
    /// KKT residual infinity-norm at the returned point, when computed.
    pub residual: Option<f64>,
    pub converged: bool,
    /// `(iteration, gap)` at every gap check of the first-order solver, or
    /// `(iteration, residual)` at every accepted Newton step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<(usize, f64)>,
}

/// Realization-plan pair at (or near) the equilibrium, with multipliers when
/// the solver produces them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSolution {
    pub u: RealizationPlan,
    pub v: RealizationPlan,
    /// Per-sequence `log(u_a / u_{p_{rho_a}})`, root entry 0.
    pub log_behavior_u: Vec<f64>,
    pub log_behavior_v: Vec<f64>,
    pub mu: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub diagnostics: SolveDiagnostics,
}

impl EquilibriumSolution {
    pub fn behavioral_u(&self, game: &Game) -> Vec<Vec<f64>> {
        behavioral_from_log(game.treeplex_u(), &self.log_behavior_u)
    }

    pub fn behavioral_v(&self, game: &Game) -> Vec<Vec<f64>> {
        behavioral_from_log(game.treeplex_v(), &self.log_behavior_v)
    }

    /// Expected payoff to the max player.
    pub fn value(&self, game: &Game) -> f64 {
        game.value(&self.u, &self.v)
    }
}

/// Largest absolute entrywise difference.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
