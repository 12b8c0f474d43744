//! Damped Newton iteration on the KKT conditions of the regularized saddle
//! point.
//!
//! Unknowns are the non-root sequences of both players and one multiplier per
//! infoset. The stationarity blocks are
//!
//! ```text
//! g_u[a] = (Pv)_a + lambda_h (1 + log(u_a / u_{p_h})) - J_a + sum_{c in C_a} mu_c - mu_h
//! g_v[a] = (P^T u)_a - lambda_h (1 + log(v_a / v_{p_h})) + J_a + sum_{c in C_a} nu_c - nu_h
//! ```
//!
//! followed by `Eu - e` and `Fv - f`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Pair, SparseColMat, SymbolicSparseColMat};
use faer::Col;

use crate::error::{Error, Result};
use crate::game::{Game, RationalityParams};
use crate::solution::{inf_norm, EquilibriumSolution, SolveDiagnostics, SolverKind};
use crate::treeplex::{RealizationPlan, Treeplex};
use crate::xi::XiMatrix;

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Primal-dual point of the KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct KktState {
    pub u: RealizationPlan,
    pub v: RealizationPlan,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl KktState {
    /// Uniform behavioral strategies and zero multipliers.
    pub fn uniform(game: &Game) -> Self {
        KktState {
            u: game.treeplex_u().uniform_plan(),
            v: game.treeplex_v().uniform_plan(),
            mu: vec![0.0; game.treeplex_u().num_infosets()],
            nu: vec![0.0; game.treeplex_v().num_infosets()],
        }
    }

    fn check(&self, game: &Game) -> Result<()> {
        let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
        tu.check_len(&self.u, "u")?;
        tv.check_len(&self.v, "v")?;
        for (what, len, exp) in [
            ("mu", self.mu.len(), tu.num_infosets()),
            ("nu", self.nu.len(), tv.num_infosets()),
        ] {
            if len != exp {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: exp,
                    found: len,
                });
            }
        }
        Ok(())
    }
}

/// Stationarity rows of one player; `sign` is `+1` for `u` and `-1` for `v`.
fn stationarity(
    t: &Treeplex,
    lambda: &[f64],
    coupling: &[f64],
    log_behavior: &[f64],
    mult: &[f64],
    sign: f64,
    out: &mut Vec<f64>,
) {
    let jsum = t.child_lambda_sum(lambda);
    for a in 1..t.num_sequences() {
        let h = t.infoset_of(a).expect("non-root sequence");
        let mut g = coupling[a] + sign * (lambda[h] * (1.0 + log_behavior[a]) - jsum[a]) - mult[h];
        for &c in t.child_infosets(a) {
            g += mult[c];
        }
        out.push(g);
    }
}

fn constraint_rows(t: &Treeplex, u: &[f64], out: &mut Vec<f64>) {
    for info in t.infosets() {
        out.push(info.actions.iter().map(|&a| u[a]).sum::<f64>() - u[info.parent]);
    }
}

/// Stacked residual without the root rows (which vanish when `u_0 = v_0 = 1`).
fn reduced_residual(
    game: &Game,
    lambda: &RationalityParams,
    s: &KktState,
    lbu: &[f64],
    lbv: &[f64],
) -> Vec<f64> {
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    let mut pv = vec![0.0; tu.num_sequences()];
    let mut ptu = vec![0.0; tv.num_sequences()];
    game.payoff().mul_into(&s.v, &mut pv);
    game.payoff().mul_t_into(&s.u, &mut ptu);
    let mut g = Vec::with_capacity(tu.num_sequences() + tv.num_sequences() + s.mu.len() + s.nu.len());
    stationarity(tu, &lambda.u, &pv, lbu, &s.mu, 1.0, &mut g);
    stationarity(tv, &lambda.v, &ptu, lbv, &s.nu, -1.0, &mut g);
    constraint_rows(tu, &s.u, &mut g);
    constraint_rows(tv, &s.v, &mut g);
    g
}

/// Full KKT residual: `[g_u; g_v; Eu - e; Fv - f]` where the stationarity
/// blocks cover non-root sequences and the constraint blocks start with the
/// root row.
pub fn kkt_residual(game: &Game, lambda: &RationalityParams, s: &KktState) -> Result<Vec<f64>> {
    lambda.validate(game)?;
    s.check(game)?;
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    let lbu = tu.log_behavior_of(&s.u)?;
    let lbv = tv.log_behavior_of(&s.v)?;
    let red = reduced_residual(game, lambda, s, &lbu, &lbv);
    let (nu, nv) = (tu.num_sequences() - 1, tv.num_sequences() - 1);
    let mut g = Vec::with_capacity(red.len() + 2);
    g.extend_from_slice(&red[..nu + nv]);
    g.push(s.u[0] - 1.0);
    g.extend_from_slice(&red[nu + nv..nu + nv + tu.num_infosets()]);
    g.push(s.v[0] - 1.0);
    g.extend_from_slice(&red[nu + nv + tu.num_infosets()..]);
    Ok(g)
}

/// Sparse saddle-point matrix
///
/// ```text
/// [ Xi(u)   P      s E^T   0     ]
/// [ P^T    -Xi(v)  0       s F^T ]
/// [ E       0      0       0     ]
/// [ 0       F      0       0     ]
/// ```
///
/// over non-root sequences, with a fixed sparsity pattern so the symbolic
/// factorization is computed once. `s` is `-1` for the Newton Jacobian and
/// `+1` for the backward system.
pub(crate) struct SaddleSystem {
    pattern: Vec<(usize, usize)>,
    symbolic: SymbolicSparseColMat<usize>,
    argsort: faer::sparse::Argsort<usize>,
    lu: SymbolicLu<usize>,
    dim: usize,
    offsets: [usize; 4],
    multiplier_sign: f64,
}

impl SaddleSystem {
    pub(crate) fn new(game: &Game, multiplier_sign: f64) -> Result<Self> {
        let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
        let (nu, nv) = (tu.num_sequences() - 1, tv.num_sequences() - 1);
        let (mu, mv) = (tu.num_infosets(), tv.num_infosets());
        let offsets = [0, nu, nu + nv, nu + nv + mu];
        let dim = nu + nv + mu + mv;
        let mut pattern = Vec::new();
        for (t, off, moff) in [(tu, 0, offsets[2]), (tv, offsets[1], offsets[3])] {
            for a in 1..t.num_sequences() {
                pattern.push((off + a - 1, off + a - 1));
                let p = t.parent_sequence(a);
                if p != 0 {
                    pattern.push((off + a - 1, off + p - 1));
                    pattern.push((off + p - 1, off + a - 1));
                }
            }
            for (h, info) in t.infosets().iter().enumerate() {
                for &a in &info.actions {
                    pattern.push((moff + h, off + a - 1));
                    pattern.push((off + a - 1, moff + h));
                }
                if info.parent != 0 {
                    pattern.push((moff + h, off + info.parent - 1));
                    pattern.push((off + info.parent - 1, moff + h));
                }
            }
        }
        for &(r, c, _) in game.payoff().triplets() {
            if r != 0 && c != 0 {
                pattern.push((r - 1, offsets[1] + c - 1));
                pattern.push((offsets[1] + c - 1, r - 1));
            }
        }
        let pairs: Vec<Pair<usize, usize>> = pattern.iter().map(|&(row, col)| Pair { row, col }).collect();
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(dim, dim, &pairs)
            .map_err(|e| Error::Singular(format!("{e:?}")))?;
        let lu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|e| Error::Singular(format!("{e:?}")))?;
        Ok(SaddleSystem {
            pattern,
            symbolic,
            argsort,
            lu,
            dim,
            offsets,
            multiplier_sign,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        self.dim
    }

    /// Values in pattern order for the given `Xi` blocks.
    fn values(&self, game: &Game, xi_u: &XiMatrix, xi_v: &XiMatrix) -> Vec<f64> {
        let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
        let s = self.multiplier_sign;
        let mut vals = Vec::with_capacity(self.pattern.len());
        for (t, xi, sign) in [(tu, xi_u, 1.0), (tv, xi_v, -1.0)] {
            for a in 1..t.num_sequences() {
                vals.push(sign * xi.diag(a));
                if t.parent_sequence(a) != 0 {
                    let o = sign * xi.off_diag(a);
                    vals.push(o);
                    vals.push(o);
                }
            }
            for info in t.infosets() {
                for _ in &info.actions {
                    vals.push(1.0);
                    vals.push(s);
                }
                if info.parent != 0 {
                    vals.push(-1.0);
                    vals.push(-s);
                }
            }
        }
        for &(r, c, p) in game.payoff().triplets() {
            if r != 0 && c != 0 {
                vals.push(p);
                vals.push(p);
            }
        }
        debug_assert_eq!(vals.len(), self.pattern.len());
        vals
    }

    pub(crate) fn factor(&self, game: &Game, xi_u: &XiMatrix, xi_v: &XiMatrix) -> Result<Lu<usize, f64>> {
        let vals = self.values(game, xi_u, xi_v);
        let mat = SparseColMat::<usize, f64>::new_from_argsort(self.symbolic.clone(), &self.argsort, &vals)
            .map_err(|e| Error::Singular(format!("{e:?}")))?;
        Lu::try_new_with_symbolic(self.lu.clone(), mat.as_ref()).map_err(|e| Error::Singular(format!("{e:?}")))
    }

    pub(crate) fn solve(&self, lu: &Lu<usize, f64>, rhs: &[f64]) -> Result<Vec<f64>> {
        let b = Col::<f64>::from_fn(self.dim, |i| rhs[i]);
        let x = lu.solve(&b);
        let out: Vec<f64> = (0..self.dim).map(|i| x[i]).collect();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Singular(format!("non-finite solution entry {i}")));
        }
        Ok(out)
    }

    /// Splits a stacked vector into (u-part, v-part, mu, nu), re-inserting a zero root.
    pub(crate) fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let o = self.offsets;
        let with_root = |s: &[f64]| {
            let mut v = Vec::with_capacity(s.len() + 1);
            v.push(0.0);
            v.extend_from_slice(s);
            v
        };
        (
            with_root(&x[o[0]..o[1]]),
            with_root(&x[o[1]..o[2]]),
            x[o[2]..o[3]].to_vec(),
            x[o[3]..].to_vec(),
        )
    }
}

/// Interior plan step `u + alpha du` keeps every entry at least this fraction
/// of its current value.
const MIN_SHRINK: f64 = 0.01;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// [`newton_solve_from`] starting at uniform strategies. If that fails and
/// some `lambda` is below 1, retries with [`newton_solve_continuation`].
pub fn newton_solve(game: &Game, lambda: &RationalityParams, tol: f64, max_iters: usize) -> Result<EquilibriumSolution> {
    match newton_solve_from(game, lambda, KktState::uniform(game), tol, max_iters) {
        Err(Error::NotConverged { .. } | Error::Stalled { .. }) if min_lambda(lambda) < 1.0 => {
            log::debug!("newton from uniform failed, switching to continuation");
            newton_solve_continuation(game, lambda, tol, max_iters)
        }
        r => r,
    }
}

fn min_lambda(lambda: &RationalityParams) -> f64 {
    lambda.u.iter().chain(&lambda.v).copied().fold(f64::INFINITY, f64::min)
}

/// Tolerance of the intermediate continuation stages.
const STAGE_TOL: f64 = 1e-8;

/// Solves at `c * lambda` for `c` halving from `1 / min(lambda)` down to 1,
/// warm-starting each stage from the previous one. `max_iters` bounds each
/// stage; the reported iteration count is the total.
pub fn newton_solve_continuation(
    game: &Game,
    lambda: &RationalityParams,
    tol: f64,
    max_iters: usize,
) -> Result<EquilibriumSolution> {
    lambda.validate(game)?;
    let mut c = (1.0 / min_lambda(lambda)).max(1.0);
    let mut start = KktState::uniform(game);
    let mut total = 0;
    loop {
        let scaled = RationalityParams {
            u: lambda.u.iter().map(|l| l * c).collect(),
            v: lambda.v.iter().map(|l| l * c).collect(),
        };
        let last = c == 1.0;
        let stage_tol = if last { tol } else { tol.max(STAGE_TOL) };
        let mut sol = newton_solve_from(game, &scaled, start, stage_tol, max_iters).map_err(|e| match e {
            Error::NotConverged {
                solver,
                iterations,
                achieved,
                best,
            } => Error::NotConverged {
                solver,
                iterations: total + iterations,
                achieved,
                best,
            },
            e => e,
        })?;
        total += sol.diagnostics.iterations;
        if last {
            sol.diagnostics.iterations = total;
            return Ok(sol);
        }
        start = KktState {
            u: sol.u,
            v: sol.v,
            mu: sol.mu.expect("newton returns multipliers"),
            nu: sol.nu.expect("newton returns multipliers"),
        };
        c = (c * 0.5).max(1.0);
    }
}

/// Damped Newton from an interior feasible start.
///
/// Each step is first halved until the plans stay above `MIN_SHRINK` times
/// their current values, then backtracked until the residual max-norm
/// decreases sufficiently, so accepted residuals never increase.
pub fn newton_solve_from(
    game: &Game,
    lambda: &RationalityParams,
    start: KktState,
    tol: f64,
    max_iters: usize,
) -> Result<EquilibriumSolution> {
    lambda.validate(game)?;
    start.check(game)?;
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    let mut s = start;
    let mut lbu = tu.log_behavior_of(&s.u)?;
    let mut lbv = tv.log_behavior_of(&s.v)?;
    let system = SaddleSystem::new(game, -1.0)?;
    let mut g = reduced_residual(game, lambda, &s, &lbu, &lbv);
    let mut res = inf_norm(&g);
    let mut trace = vec![(0, res)];
    let mut iter = 0;
    while res > tol {
        if iter == max_iters {
            let best = finish(game, s, lbu, lbv, iter, res, false, trace);
            return Err(Error::NotConverged {
                solver: "newton",
                iterations: iter,
                achieved: res,
                best: Some(Box::new(best)),
            });
        }
        iter += 1;
        let xi_u = XiMatrix::from_log_behavior(tu, &s.u, &lbu, &lambda.u)?;
        let xi_v = XiMatrix::from_log_behavior(tv, &s.v, &lbv, &lambda.v)?;
        let lu = system.factor(game, &xi_u, &xi_v)?;
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let step = system.solve(&lu, &rhs)?;
        let (du, dv, dmu, dnu) = system.split(&step);

        let mut alpha: f64 = 1.0;
        for (x, dx) in [(&s.u, &du), (&s.v, &dv)] {
            for a in 1..x.len() {
                while x[a] + alpha * dx[a] < MIN_SHRINK * x[a] {
                    alpha *= 0.5;
                }
            }
        }
        loop {
            let trial = KktState {
                u: axpy(&s.u, alpha, &du).into(),
                v: axpy(&s.v, alpha, &dv).into(),
                mu: axpy(&s.mu, alpha, &dmu),
                nu: axpy(&s.nu, alpha, &dnu),
            };
            let tlbu = tu.log_behavior_of(&trial.u)?;
            let tlbv = tv.log_behavior_of(&trial.v)?;
            let tg = reduced_residual(game, lambda, &trial, &tlbu, &tlbv);
            let tres = inf_norm(&tg);
            if tres <= (1.0 - ARMIJO * alpha) * res {
                s = trial;
                lbu = tlbu;
                lbv = tlbv;
                g = tg;
                res = tres;
                break;
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(Error::Stalled {
                    solver: "newton",
                    residual: res,
                });
            }
        }
        log::trace!("newton iter {iter}: step {alpha:.3e}, residual {res:.3e}");
        trace.push((iter, res));
    }
    Ok(finish(game, s, lbu, lbv, iter, res, true, trace))
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + alpha * d).collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    _game: &Game,
    s: KktState,
    lbu: Vec<f64>,
    lbv: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
    trace: Vec<(usize, f64)>,
) -> EquilibriumSolution {
    EquilibriumSolution {
        u: s.u,
        v: s.v,
        log_behavior_u: lbu,
        log_behavior_v: lbv,
        mu: Some(s.mu),
        nu: Some(s.nu),
        diagnostics: SolveDiagnostics {
            solver: SolverKind::Newton,
            iterations,
            gap: None,
            residual: Some(residual),
            converged,
            trace,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payoff::SparsePayoff;
    use crate::treeplex::{InfosetDef, TreeplexDef};

    fn simplex(k: usize) -> Treeplex {
        Treeplex::new(TreeplexDef {
            num_sequences: k + 1,
            infosets: vec![InfosetDef {
                parent: 0,
                actions: (1..=k).collect(),
            }],
        })
        .unwrap()
    }

    fn matrix_game(m: &[&[f64]]) -> Game {
        let mut trip = Vec::new();
        for (i, row) in m.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                if x != 0.0 {
                    trip.push((i + 1, j + 1, x));
                }
            }
        }
        let p = SparsePayoff::new(m.len() + 1, m[0].len() + 1, trip).unwrap();
        Game::new(simplex(m.len()), simplex(m[0].len()), p).unwrap()
    }

    fn rps() -> Game {
        matrix_game(&[&[0.0, 1.0, -1.0], &[-1.0, 0.0, 1.0], &[1.0, -1.0, 0.0]])
    }

    #[test]
    fn rps_uniform_state_has_zero_residual() {
        let g = rps();
        let lam = RationalityParams::constant(&g, 1.0);
        let s = KktState {
            u: g.treeplex_u().uniform_plan(),
            v: g.treeplex_v().uniform_plan(),
            mu: vec![1.0 - 3f64.ln()],
            nu: vec![-(1.0 - 3f64.ln())],
        };
        let r = kkt_residual(&g, &lam, &s).unwrap();
        assert!(inf_norm(&r) < 1e-12, "{r:?}");
    }

    #[test]
    fn infeasible_state_shows_in_constraint_block() {
        let g = rps();
        let lam = RationalityParams::constant(&g, 1.0);
        let mut s = KktState::uniform(&g);
        s.u[1] += 0.25;
        let r = kkt_residual(&g, &lam, &s).unwrap();
        // [g_u (3), g_v (3), root row, infoset row, ...]
        assert!((r[7] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rps_solves_to_uniform() {
        let g = rps();
        let lam = RationalityParams::constant(&g, 1.0);
        let sol = newton_solve(&g, &lam, 1e-10, 50).unwrap();
        for a in 1..4 {
            assert!((sol.u[a] - 1.0 / 3.0).abs() < 1e-8);
            assert!((sol.v[a] - 1.0 / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn nonpositive_plan_is_rejected() {
        let g = rps();
        let lam = RationalityParams::constant(&g, 1.0);
        let mut s = KktState::uniform(&g);
        s.u[1] = 0.0;
        assert!(kkt_residual(&g, &lam, &s).is_err());
    }

    #[test]
    fn residual_never_increases() {
        let g = matrix_game(&[&[5.0, -3.0, 1.0], &[-2.0, 4.0, 0.5], &[0.0, -1.0, 3.0]]);
        let lam = RationalityParams::constant(&g, 0.05);
        let sol = newton_solve(&g, &lam, 1e-10, 200).unwrap();
        let t = &sol.diagnostics.trace;
        assert!(t.windows(2).all(|w| w[1].1 <= w[0].1));
    }
}
