//! Timing comparisons on random stacked games.
//!
//! Forward: Newton runs to a KKT residual of 1e-3, its duality gap is
//! measured, and the first-order solver is run to that gap (or 1e-12 when the
//! Newton gap is below 1e-12). Backward: both solvers receive the log-loss
//! gradient of trajectories sampled from the equilibrium at the generating
//! parameters; the first-order solver runs to a fixed residual target.
//!
//! Only the solve calls are timed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backward::{backward_distance, direct_backward_solve, fom_backward_solve, BackwardProblem};
use crate::error::{Error, Result};
use crate::forward::{fom_forward_solve, gap_from_log};
use crate::game::{Game, Player, RationalityParams};
use crate::grad::{log_loss, ActionRecord, ObservedPlay};
use crate::newton::newton_solve;
use crate::solution::{max_abs_diff, EquilibriumSolution};
use crate::treeplex::Treeplex;
use crate::zoo::{gen_stacked, StackedGameSpec};

pub const NEWTON_BENCH_RESIDUAL: f64 = 1e-3;
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Forward,
    Backward,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Forward => "forward",
            Phase::Backward => "backward",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    /// `stacked-d{d}-n{n}-t{trial}`.
    pub game_id: String,
    pub depth: usize,
    pub actions: usize,
    pub trial: usize,
    /// `newton`, `fom`, `direct` or `fom`.
    pub solver: String,
    pub phase: Phase,
    pub wall_seconds: f64,
    pub iterations: usize,
    /// The quantity the solver stops on: KKT residual for Newton, duality gap
    /// for the forward first-order method, residual for both backward solvers.
    pub achieved: f64,
    /// Gap or residual the solver was asked to reach.
    pub target: f64,
    pub sequences_u: usize,
    pub sequences_v: usize,
    /// Seed the game was generated from.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSuite {
    pub depths: Vec<usize>,
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub forward_tau: f64,
    pub backward_tau: f64,
    pub backward_tol: f64,
    /// Sampled trajectories per player feeding the backward loss.
    pub backward_samples: usize,
    pub run_forward: bool,
    pub run_backward: bool,
}

impl Default for BenchSuite {
    fn default() -> Self {
        BenchSuite {
            depths: vec![1, 2],
            sizes: vec![3, 5, 10],
            trials: 3,
            seed: 0,
            forward_tau: 0.1,
            backward_tau: 0.1,
            backward_tol: 1e-6,
            backward_samples: 32,
            run_forward: true,
            run_backward: true,
        }
    }
}

/// Per-trial seed, distinct for every `(depth, size, trial)`.
pub fn trial_seed(base: u64, depth: usize, actions: usize, trial: usize) -> u64 {
    base.wrapping_mul(1_000_003)
        .wrapping_add((depth as u64) << 40)
        .wrapping_add((actions as u64) << 20)
        .wrapping_add(trial as u64)
}

/// Forward pair for one game: Newton then the gap-matched first-order run.
pub struct ForwardComparison {
    pub newton: EquilibriumSolution,
    pub fom: EquilibriumSolution,
    pub newton_seconds: f64,
    pub fom_seconds: f64,
    pub target_gap: f64,
}

impl ForwardComparison {
    /// Infinity-norm distance of the two strategy profiles.
    pub fn distance(&self) -> f64 {
        max_abs_diff(&self.newton.u, &self.fom.u).max(max_abs_diff(&self.newton.v, &self.fom.v))
    }
}

pub fn compare_forward(
    game: &Game,
    lambda: &RationalityParams,
    newton_residual: f64,
    tau: f64,
) -> Result<ForwardComparison> {
    let t = Instant::now();
    let mut newton = newton_solve(game, lambda, newton_residual, crate::newton::DEFAULT_MAX_ITERS)?;
    let newton_seconds = t.elapsed().as_secs_f64();
    let gap = gap_from_log(
        game,
        lambda,
        &newton.u,
        &newton.log_behavior_u,
        &newton.v,
        &newton.log_behavior_v,
    );
    newton.diagnostics.gap = Some(gap);
    let target_gap = gap.max(GAP_FLOOR);
    let t = Instant::now();
    let fom = fom_forward_solve(game, lambda, tau, target_gap, crate::forward::DEFAULT_MAX_ITERS)?;
    let fom_seconds = t.elapsed().as_secs_f64();
    Ok(ForwardComparison {
        newton,
        fom,
        newton_seconds,
        fom_seconds,
        target_gap,
    })
}

/// Walks the treeplex from the root, choosing one child infoset uniformly at
/// every sequence and one action by the behavioral strategy.
fn sample_path(t: &Treeplex, log_behavior: &[f64], player: Player, rng: &mut impl Rng) -> Vec<ActionRecord> {
    let mut out = Vec::new();
    let mut seq = 0;
    loop {
        let kids = t.child_infosets(seq);
        if kids.is_empty() {
            return out;
        }
        let h = kids[rng.random_range(0..kids.len())];
        let actions = t.actions(h);
        let mut r: f64 = rng.random();
        let mut pick = actions.len() - 1;
        for (i, &a) in actions.iter().enumerate() {
            r -= log_behavior[a].exp();
            if r < 0.0 {
                pick = i;
                break;
            }
        }
        out.push(ActionRecord {
            player,
            infoset: h,
            action: pick,
        });
        seq = actions[pick];
    }
}

/// Mean log-loss gradient of `samples` trajectories drawn at `sol`.
pub fn sampled_loss_gradient(
    game: &Game,
    sol: &EquilibriumSolution,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut gu = vec![0.0; sol.u.len()];
    let mut gv = vec![0.0; sol.v.len()];
    for _ in 0..samples {
        let mut records = sample_path(game.treeplex_u(), &sol.log_behavior_u, Player::Min, rng);
        records.extend(sample_path(game.treeplex_v(), &sol.log_behavior_v, Player::Max, rng));
        let obs = ObservedPlay {
            features: Vec::new(),
            records,
        };
        let l = log_loss(game, &sol.u, &sol.v, &obs)?;
        for (a, b) in gu.iter_mut().zip(&l.grad_u) {
            *a += b / samples as f64;
        }
        for (a, b) in gv.iter_mut().zip(&l.grad_v) {
            *a += b / samples as f64;
        }
    }
    Ok((gu, gv))
}

fn run_trial(suite: &BenchSuite, d: usize, n: usize, trial: usize, out: &mut Vec<BenchRecord>) -> Result<()> {
    let seed = trial_seed(suite.seed, d, n, trial);
    let game = gen_stacked(&StackedGameSpec::new(d, n, seed))?;
    let lambda = game.lambda().cloned().expect("stacked games carry lambda");
    let (su, sv) = (game.treeplex_u().num_sequences(), game.treeplex_v().num_sequences());
    let rec = |solver: &str, phase, wall_seconds, iterations, achieved, target| BenchRecord {
        game_id: format!("stacked-d{d}-n{n}-t{trial}"),
        depth: d,
        actions: n,
        trial,
        solver: solver.to_string(),
        phase,
        wall_seconds,
        iterations,
        achieved,
        target,
        sequences_u: su,
        sequences_v: sv,
        seed,
    };
    let fwd = compare_forward(&game, &lambda, NEWTON_BENCH_RESIDUAL, suite.forward_tau)?;
    if suite.run_forward {
        let nd = &fwd.newton.diagnostics;
        out.push(rec(
            "newton",
            Phase::Forward,
            fwd.newton_seconds,
            nd.iterations,
            nd.residual.unwrap_or(f64::NAN),
            NEWTON_BENCH_RESIDUAL,
        ));
        let fd = &fwd.fom.diagnostics;
        out.push(rec(
            "fom",
            Phase::Forward,
            fwd.fom_seconds,
            fd.iterations,
            fd.gap.unwrap_or(f64::NAN),
            fwd.target_gap,
        ));
    }
    if suite.run_backward {
        // The backward pass linearizes at an accurate equilibrium.
        let sol = newton_solve(&game, &lambda, 1e-10, crate::newton::DEFAULT_MAX_ITERS)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (gu, gv) = sampled_loss_gradient(&game, &sol, suite.backward_samples, &mut rng)?;
        let bp = BackwardProblem::new(&game, &lambda, &sol, gu, gv)?;
        let t = Instant::now();
        let direct = direct_backward_solve(&bp, &game)?;
        let direct_seconds = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let fom = fom_backward_solve(&bp, &game, suite.backward_tau, suite.backward_tol, crate::backward::DEFAULT_MAX_ITERS)?;
        let fom_seconds = t.elapsed().as_secs_f64();
        log::debug!(
            "d={d} n={n} trial {trial}: backward distance {:.2e}",
            backward_distance(&direct, &fom)
        );
        out.push(rec("direct", Phase::Backward, direct_seconds, 1, direct.residual, 0.0));
        out.push(rec(
            "fom",
            Phase::Backward,
            fom_seconds,
            fom.iterations,
            fom.residual,
            crate::backward::residual_target(&bp, suite.backward_tol),
        ));
    }
    Ok(())
}

/// Runs every `(depth, size, trial)` cell. Cells whose solver fails are
/// logged and listed in the second return value.
pub fn run_suite(suite: &BenchSuite) -> Result<(Vec<BenchRecord>, Vec<String>)> {
    if suite.trials == 0 || suite.depths.is_empty() || suite.sizes.is_empty() {
        return Err(Error::InvalidConfig("bench suite is empty".into()));
    }
    for &d in &suite.depths {
        for &n in &suite.sizes {
            // Refuse oversized cells before any work starts.
            let spec = StackedGameSpec::new(d, n, 0);
            gen_size_check(&spec)?;
        }
    }
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &d in &suite.depths {
        for &n in &suite.sizes {
            for trial in 0..suite.trials {
                let mut cell = Vec::new();
                match run_trial(suite, d, n, trial, &mut cell) {
                    Ok(()) => records.extend(cell),
                    Err(e) => {
                        log::warn!("skipping d={d} n={n} trial {trial}: {e}");
                        skipped.push(format!("d={d} n={n} trial={trial}: {e}"));
                    }
                }
            }
        }
    }
    Ok((records, skipped))
}

fn gen_size_check(spec: &StackedGameSpec) -> Result<()> {
    match spec.sequences_per_player() {
        Some(s) if s <= crate::zoo::stacked::MAX_SEQUENCES => Ok(()),
        s => Err(Error::SizeOverflow {
            sequences: s.unwrap_or(u128::MAX),
            limit: crate::zoo::stacked::MAX_SEQUENCES,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub depth: usize,
    pub actions: usize,
    pub phase: Phase,
    pub solver: String,
    pub trials: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    /// Mean over trials of the baseline time divided by this solver's time;
    /// 1 for the baseline itself.
    pub mean_speedup: f64,
    pub std_speedup: f64,
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let var = if x.len() > 1 {
        x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn baseline(phase: Phase) -> &'static str {
    match phase {
        Phase::Forward => "newton",
        Phase::Backward => "direct",
    }
}

/// Mean and sample standard deviation per `(depth, size, phase, solver)`.
pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut keys: Vec<(usize, usize, Phase, String)> = Vec::new();
    for r in records {
        let k = (r.depth, r.actions, r.phase, r.solver.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(d, n, phase, solver)| {
            let rows: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.depth == d && r.actions == n && r.phase == phase && r.solver == solver)
                .collect();
            let secs: Vec<f64> = rows.iter().map(|r| r.wall_seconds).collect();
            let speedups: Vec<f64> = rows
                .iter()
                .filter_map(|r| {
                    records
                        .iter()
                        .find(|b| b.game_id == r.game_id && b.phase == phase && b.solver == baseline(phase))
                        .map(|b| b.wall_seconds / r.wall_seconds)
                })
                .collect();
            let (mean_seconds, std_seconds) = mean_std(&secs);
            let (mean_speedup, std_speedup) = if speedups.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                mean_std(&speedups)
            };
            BenchSummary {
                depth: d,
                actions: n,
                phase,
                solver,
                trials: rows.len(),
                mean_seconds,
                std_seconds,
                mean_speedup,
                std_speedup,
            }
        })
        .collect()
}
