//! First-order primal-dual forward solver.
//!
//! Every subproblem is a smoothed best response
//! `argmin_{Eu = e, u >= 0} u^T c + Psi(u)`, solved exactly by one bottom-up
//! pass computing
//!
//! ```text
//! r_a = -c_a + sum_{h in C_a} z_h,    z_h = lambda_h log sum_{a in A_h} exp(r_a / lambda_h)
//! ```
//!
//! and one top-down pass applying the per-infoset softmax. Strategies are
//! carried as log-behavioral probabilities so that deep, sharply peaked plans
//! never need `0 / 0`.

use crate::entropy::{dilated_entropy, entropy_gradient};
use crate::error::{Error, Result};
use crate::game::{Game, RationalityParams};
use crate::solution::{EquilibriumSolution, SolveDiagnostics, SolverKind};
use crate::treeplex::{constraint_residual, RealizationPlan, Treeplex};

pub const DEFAULT_TAU: f64 = 0.1;
pub const DEFAULT_GAP_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
/// Iterations between duality-gap evaluations.
pub const GAP_CHECK_EVERY: usize = 20;

/// Infoset values `z` and action values `r` of one bottom-up pass.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalValues {
    pub z: Vec<f64>,
    pub r: Vec<f64>,
}

impl TraversalValues {
    /// Bottom-up pass for cost `c`.
    pub fn compute(t: &Treeplex, c: &[f64], lambda: &[f64]) -> Self {
        let mut r: Vec<f64> = c.iter().map(|x| -x).collect();
        let mut z = vec![0.0; t.num_infosets()];
        for (h, info) in t.infosets().iter().enumerate().rev() {
            let l = lambda[h];
            let m = info.actions.iter().map(|&a| r[a]).fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = info.actions.iter().map(|&a| ((r[a] - m) / l).exp()).sum();
            z[h] = m + l * s.ln();
            r[info.parent] += z[h];
        }
        TraversalValues { z, r }
    }

    /// Per-sequence `log b_a = (r_a - z_h) / lambda_h` (root entry 0).
    pub fn log_behavior(&self, t: &Treeplex, lambda: &[f64]) -> Vec<f64> {
        let mut lb = vec![0.0; t.num_sequences()];
        for (h, info) in t.infosets().iter().enumerate() {
            for &a in &info.actions {
                lb[a] = (self.r[a] - self.z[h]) / lambda[h];
            }
        }
        lb
    }

    /// Optimal value `min_u u^T c + Psi(u) = -r_root`.
    pub fn value(&self) -> f64 {
        -self.r[0]
    }
}

/// Smoothed best response to cost `c`: the minimizing plan and the optimal value.
pub fn smoothed_best_response(t: &Treeplex, c: &[f64], lambda: &[f64]) -> Result<(RealizationPlan, f64)> {
    t.check_len(c, "cost vector")?;
    t.check_lambda(lambda)?;
    if let Some(i) = c.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "cost vector", index: i });
    }
    let tv = TraversalValues::compute(t, c, lambda);
    let lb = tv.log_behavior(t, lambda);
    Ok((t.plan_from_log_behavior(&lb), tv.value()))
}

/// Bregman prox of the dilated entropy for one player.
#[derive(Debug, Clone, Copy)]
pub struct DilatedEntropyProx<'a> {
    pub treeplex: &'a Treeplex,
    pub lambda: &'a [f64],
    pub tau: f64,
}

impl<'a> DilatedEntropyProx<'a> {
    pub fn new(treeplex: &'a Treeplex, lambda: &'a [f64], tau: f64) -> Result<Self> {
        treeplex.check_lambda(lambda)?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {tau}")));
        }
        Ok(DilatedEntropyProx { treeplex, lambda, tau })
    }

    /// Prox cost `(tau * linear - Psi'(anchor)) / (1 + tau)`.
    fn cost(&self, anchor_log_behavior: &[f64], linear: &[f64]) -> Vec<f64> {
        let grad = entropy_gradient(self.treeplex, self.lambda, anchor_log_behavior);
        let k = 1.0 / (1.0 + self.tau);
        linear
            .iter()
            .zip(&grad)
            .map(|(l, g)| k * (self.tau * l - g))
            .collect()
    }

    /// Log-behavioral form of the prox step anchored at `anchor_log_behavior`.
    pub fn step_log(&self, anchor_log_behavior: &[f64], linear: &[f64]) -> Vec<f64> {
        let c = self.cost(anchor_log_behavior, linear);
        TraversalValues::compute(self.treeplex, &c, self.lambda).log_behavior(self.treeplex, self.lambda)
    }
}

/// `argmin_{Eu = e} u^T linear + Psi(u) + D(u, anchor) / tau`.
pub fn prox_step(prox: &DilatedEntropyProx<'_>, anchor: &[f64], linear: &[f64]) -> Result<RealizationPlan> {
    prox.treeplex.check_len(linear, "linear term")?;
    let lb = prox.treeplex.log_behavior_of(anchor)?;
    let out = prox.step_log(&lb, linear);
    Ok(prox.treeplex.plan_from_log_behavior(&out))
}

/// `sum_h lambda_h u_{p_h} KL(b_h || b*_h)`, the suboptimality of `u` for
/// `u^T c + Psi(u)` where `b*` is the smoothed best response to `c`.
fn suboptimality(t: &Treeplex, lambda: &[f64], u: &[f64], log_behavior: &[f64], c: &[f64]) -> f64 {
    let best = TraversalValues::compute(t, c, lambda).log_behavior(t, lambda);
    let mut s = 0.0;
    for (h, info) in t.infosets().iter().enumerate() {
        let mut kl = 0.0;
        for &a in &info.actions {
            if u[a] > 0.0 {
                kl += u[a] * (log_behavior[a] - best[a]);
            }
        }
        s += lambda[h] * kl;
    }
    s.max(0.0)
}

/// Gap from plans and their log-behavioral forms; no validation.
pub(crate) fn gap_from_log(
    game: &Game,
    lambda: &RationalityParams,
    u: &[f64],
    lbu: &[f64],
    v: &[f64],
    lbv: &[f64],
) -> f64 {
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    let mut pv = vec![0.0; tu.num_sequences()];
    game.payoff().mul_into(v, &mut pv);
    let mut ptu = vec![0.0; tv.num_sequences()];
    game.payoff().mul_t_into(u, &mut ptu);
    for x in &mut ptu {
        *x = -*x;
    }
    suboptimality(tu, &lambda.u, u, lbu, &pv) + suboptimality(tv, &lambda.v, v, lbv, &ptu)
}

/// Tolerance on `Eu = e` accepted by [`duality_gap`].
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// `max_v' Obj(u, v') - min_u' Obj(u', v)` for interior feasible plans.
pub fn duality_gap(game: &Game, lambda: &RationalityParams, u: &[f64], v: &[f64]) -> Result<f64> {
    lambda.validate(game)?;
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    for (t, x) in [(tu, u), (tv, v)] {
        let residual = constraint_residual(t, x)?;
        if residual > FEASIBILITY_TOL {
            return Err(Error::Infeasible { residual });
        }
    }
    let lbu = tu.log_behavior_of(u)?;
    let lbv = tv.log_behavior_of(v)?;
    Ok(gap_from_log(game, lambda, u, &lbu, v, &lbv))
}

/// The gap evaluated literally as a difference of two best-response values.
/// Subject to cancellation; [`duality_gap`] is the accurate form.
pub fn duality_gap_direct(game: &Game, lambda: &RationalityParams, u: &[f64], v: &[f64]) -> Result<f64> {
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    let lbu = tu.log_behavior_of(u)?;
    let lbv = tv.log_behavior_of(v)?;
    let pv = game.payoff().apply(v, crate::payoff::Transpose::No)?;
    let ptu: Vec<f64> = game
        .payoff()
        .apply(u, crate::payoff::Transpose::Yes)?
        .iter()
        .map(|x| -x)
        .collect();
    let (_, min_u) = smoothed_best_response(tu, &pv, &lambda.u)?;
    let (_, min_v) = smoothed_best_response(tv, &ptu, &lambda.v)?;
    let max_over_v = -min_v + dilated_entropy(tu, &lambda.u, u, &lbu);
    let min_over_u = min_u - dilated_entropy(tv, &lambda.v, v, &lbv);
    Ok(max_over_v - min_over_u)
}

/// Iterate state of the primal-dual method, exposed for inspection between steps.
#[derive(Debug, Clone)]
pub struct ForwardIterate<'g> {
    game: &'g Game,
    lambda: &'g RationalityParams,
    tau: f64,
    lbu: Vec<f64>,
    lbv: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    pv: Vec<f64>,
    ptx: Vec<f64>,
    extrapolated: Vec<f64>,
    iterations: usize,
}

impl<'g> ForwardIterate<'g> {
    /// Starts at uniform strategies.
    pub fn new(game: &'g Game, lambda: &'g RationalityParams, tau: f64) -> Result<Self> {
        lambda.validate(game)?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidConfig(format!("step size must be positive, got {tau}")));
        }
        let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
        let u = tu.uniform_plan().into_inner();
        let v = tv.uniform_plan().into_inner();
        Ok(ForwardIterate {
            game,
            lambda,
            tau,
            lbu: tu.uniform_log_behavior(),
            lbv: tv.uniform_log_behavior(),
            extrapolated: u.clone(),
            pv: vec![0.0; tu.num_sequences()],
            ptx: vec![0.0; tv.num_sequences()],
            u,
            v,
            iterations: 0,
        })
    }

    /// One iteration: `x+ = BR_x(x, y)`, `x~ = 2 x+ - x`, `y+ = BR_y(y, x~)`.
    pub fn step(&mut self) {
        let (tu, tv) = (self.game.treeplex_u(), self.game.treeplex_v());
        let prox_u = DilatedEntropyProx {
            treeplex: tu,
            lambda: &self.lambda.u,
            tau: self.tau,
        };
        let prox_v = DilatedEntropyProx {
            treeplex: tv,
            lambda: &self.lambda.v,
            tau: self.tau,
        };
        self.game.payoff().mul_into(&self.v, &mut self.pv);
        self.lbu = prox_u.step_log(&self.lbu, &self.pv);
        let u_next = tu.plan_from_log_behavior(&self.lbu).into_inner();
        for a in 0..u_next.len() {
            self.extrapolated[a] = 2.0 * u_next[a] - self.u[a];
        }
        self.u = u_next;
        self.game.payoff().mul_t_into(&self.extrapolated, &mut self.ptx);
        for x in &mut self.ptx {
            *x = -*x;
        }
        self.lbv = prox_v.step_log(&self.lbv, &self.ptx);
        self.v = tv.plan_from_log_behavior(&self.lbv).into_inner();
        self.iterations += 1;
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// Last extrapolated point `2 u^{i+1} - u^i`; not necessarily feasible.
    pub fn extrapolated(&self) -> &[f64] {
        &self.extrapolated
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn gap(&self) -> f64 {
        gap_from_log(self.game, self.lambda, &self.u, &self.lbu, &self.v, &self.lbv)
    }

    fn snapshot(&self, gap: f64, converged: bool, trace: Vec<(usize, f64)>) -> EquilibriumSolution {
        EquilibriumSolution {
            u: self.u.clone().into(),
            v: self.v.clone().into(),
            log_behavior_u: self.lbu.clone(),
            log_behavior_v: self.lbv.clone(),
            mu: None,
            nu: None,
            diagnostics: SolveDiagnostics {
                solver: SolverKind::Fom,
                iterations: self.iterations,
                gap: Some(gap),
                residual: None,
                converged,
                trace,
            },
        }
    }
}

/// Runs the primal-dual method until the duality gap is at most `gap_tol`.
///
/// The gap is evaluated every [`GAP_CHECK_EVERY`] iterations. When
/// `max_iters` runs out the error carries the best iterate seen.
pub fn fom_forward_solve(
    game: &Game,
    lambda: &RationalityParams,
    tau: f64,
    gap_tol: f64,
    max_iters: usize,
) -> Result<EquilibriumSolution> {
    let mut it = ForwardIterate::new(game, lambda, tau)?;
    let mut trace = Vec::new();
    let mut best: Option<(f64, EquilibriumSolution)> = None;
    loop {
        if it.iterations % GAP_CHECK_EVERY == 0 || it.iterations == max_iters {
            let gap = it.gap();
            trace.push((it.iterations, gap));
            if gap <= gap_tol {
                return Ok(it.snapshot(gap, true, trace));
            }
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                best = Some((gap, it.snapshot(gap, false, Vec::new())));
            }
            if it.iterations >= max_iters {
                let (g, mut sol) = best.expect("at least one gap check");
                sol.diagnostics.trace = trace;
                return Err(Error::NotConverged {
                    solver: "fom",
                    iterations: it.iterations,
                    achieved: g,
                    best: Some(Box::new(sol)),
                });
            }
        }
        it.step();
    }
}
