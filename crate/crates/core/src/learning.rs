//! Learning rationality parameters from observed play.
//!
//! The model is `lambda_h = w_{g(h)} . f + eps` for feature vector `f`, where
//! `g` maps infosets to weight-tied groups. Each training step solves the game
//! for every distinct feature vector in the minibatch, differentiates the log
//! loss through the equilibrium and applies SGD or Adam to `w`.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backward::BackwardProblem;
use crate::efg::{sample_play, Node, SequenceForm};
use crate::error::{Error, Result};
use crate::game::{Game, LambdaGroups, RationalityParams};
use crate::grad::{grad_lambda_log, log_loss, ActionRecord, LambdaGradient, ObservedPlay};
use crate::solution::{EquilibriumSolution, SolverKind};
use crate::solve::{solve, solve_backward, BackwardOptions, SolveOptions};

pub const DEFAULT_EPSILON: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaModel {
    /// One weight vector per group.
    pub weights: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub groups: LambdaGroups,
}

impl LambdaModel {
    /// Every weight set to `init`.
    pub fn constant(groups: LambdaGroups, num_features: usize, init: f64, epsilon: f64) -> Self {
        LambdaModel {
            weights: vec![vec![init; num_features]; groups.num_groups()],
            epsilon,
            groups,
        }
    }

    pub fn num_features(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn flat(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }

    fn set_flat(&mut self, w: &[f64]) {
        let k = self.num_features();
        for (g, row) in self.weights.iter_mut().enumerate() {
            row.copy_from_slice(&w[g * k..(g + 1) * k]);
        }
    }

    /// `w . f + eps` per group.
    pub fn group_lambdas(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.num_features() {
            return Err(Error::DimensionMismatch {
                what: "features",
                expected: self.num_features(),
                found: features.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .map(|w| w.iter().zip(features).map(|(a, b)| a * b).sum::<f64>() + self.epsilon)
            .collect())
    }
}

/// Per-infoset `lambda` for one feature vector. Fails if any value is not positive.
pub fn lambda_forward(m: &LambdaModel, features: &[f64]) -> Result<RationalityParams> {
    let per_group = m.group_lambdas(features)?;
    if let Some(g) = per_group.iter().position(|l| !(*l > 0.0)) {
        return Err(Error::NonPositive {
            what: "lambda of group",
            index: g,
            value: per_group[g],
        });
    }
    Ok(RationalityParams {
        u: m.groups.u.iter().map(|&g| per_group[g]).collect(),
        v: m.groups.v.iter().map(|&g| per_group[g]).collect(),
    })
}

/// `dL/dw_g = sum_{h in g} (dL/dlambda_h) f`.
pub fn lambda_chain_rule(m: &LambdaModel, features: &[f64], d_lambda: &LambdaGradient) -> Vec<Vec<f64>> {
    let mut per_group = vec![0.0; m.weights.len()];
    for (&g, d) in m.groups.u.iter().zip(&d_lambda.u).chain(m.groups.v.iter().zip(&d_lambda.v)) {
        per_group[g] += d;
    }
    per_group
        .iter()
        .map(|d| features.iter().map(|f| d * f).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Adam moments with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params`.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) {
    state.t += 1;
    let c1 = 1.0 - AdamState::BETA1.powi(state.t as i32);
    let c2 = 1.0 - AdamState::BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = AdamState::BETA1 * state.m[i] + (1.0 - AdamState::BETA1) * grad[i];
        state.v[i] = AdamState::BETA2 * state.v[i] + (1.0 - AdamState::BETA2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + AdamState::EPS);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub forward: SolveOptions,
    pub backward: BackwardOptions,
    /// Duality gap used when reporting losses.
    pub eval_gap_tol: f64,
    pub seed: u64,
    /// Worker threads for the per-batch solves; 0 or 1 runs sequentially.
    pub threads: usize,
    /// Abort when a batch's mean loss exceeds this.
    pub max_loss: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            learning_rate: 1e-4,
            epochs: 50,
            optimizer: Optimizer::Adam,
            forward: SolveOptions::fom(0.01, 1e-10),
            // Both first-order steps must stay on the scale of the smallest
            // lambda; 0.01 is stable down to lambda = 0.001.
            backward: BackwardOptions {
                solver: SolverKind::Fom,
                tau: 0.01,
                ..Default::default()
            },
            eval_gap_tol: 1e-9,
            seed: 0,
            threads: 1,
            max_loss: 1e6,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || !(self.eval_gap_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "batch size, learning rate and evaluation tolerance must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Options used for reported losses: the training solver at the
    /// evaluation tolerance (Newton gets a residual target two orders tighter).
    pub fn eval_options(&self) -> SolveOptions {
        SolveOptions {
            gap_tol: self.eval_gap_tol,
            residual_tol: self.forward.residual_tol.min(self.eval_gap_tol * 0.1),
            ..self.forward.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    /// Seconds since training started.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: LambdaModel,
    pub history: Vec<EpochRecord>,
    /// Batch items skipped because their solve or loss failed.
    pub skipped: usize,
}

fn feature_key(f: &[f64]) -> Vec<u64> {
    f.iter().map(|x| x.to_bits()).collect()
}

/// Groups item indices by bitwise-identical features, in first-appearance order.
fn group_by_features(data: &[ObservedPlay], items: &[usize]) -> Vec<Vec<usize>> {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in items {
        let slot = *index.entry(feature_key(&data[i].features)).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[slot].push(i);
    }
    groups
}

fn run_parallel<T: Send, F: Fn(&Vec<usize>) -> T + Sync + Send>(threads: usize, groups: &[Vec<usize>], f: F) -> Result<Vec<T>> {
    if threads <= 1 {
        return Ok(groups.iter().map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(pool.install(|| groups.par_iter().map(f).collect()))
}

struct GroupResult {
    loss: f64,
    count: usize,
    grad: Vec<Vec<f64>>,
    skipped: usize,
}

/// Loss and weight gradient summed over items sharing one feature vector.
fn group_gradient(
    game: &Game,
    model: &LambdaModel,
    data: &[ObservedPlay],
    items: &[usize],
    cfg: &TrainConfig,
) -> GroupResult {
    let skip = |e: Error| {
        log::warn!("skipping {} batch item(s): {e}", items.len());
        GroupResult {
            loss: 0.0,
            count: 0,
            grad: Vec::new(),
            skipped: items.len(),
        }
    };
    let f = &data[items[0]].features;
    let lambda = match lambda_forward(model, f) {
        Ok(l) => l,
        Err(e) => return skip(e),
    };
    let sol = match solve(game, &lambda, &cfg.forward) {
        Ok(s) => s,
        Err(e) => return skip(e),
    };
    let mut gu = vec![0.0; sol.u.len()];
    let mut gv = vec![0.0; sol.v.len()];
    let mut loss = 0.0;
    let mut count = 0;
    let mut skipped = 0;
    for &i in items {
        match log_loss(game, &sol.u, &sol.v, &data[i]) {
            Ok(l) => {
                loss += l.loss;
                count += 1;
                for (a, b) in gu.iter_mut().zip(&l.grad_u) {
                    *a += b;
                }
                for (a, b) in gv.iter_mut().zip(&l.grad_v) {
                    *a += b;
                }
            }
            Err(e) => {
                log::warn!("skipping batch item {i}: {e}");
                skipped += 1;
            }
        }
    }
    let bp = match BackwardProblem::new(game, &lambda, &sol, gu, gv) {
        Ok(b) => b,
        Err(e) => return skip(e),
    };
    let y = match solve_backward(&bp, game, &cfg.backward) {
        Ok(y) => y,
        Err(e) => return skip(e),
    };
    let dl = grad_lambda_log(game, &sol.log_behavior_u, &sol.log_behavior_v, &y.y_u, &y.y_v);
    let grad = lambda_chain_rule(model, f, &dl);
    if let Some(i) = grad.iter().flatten().position(|g| !g.is_finite()) {
        return skip(Error::NonFinite {
            what: "weight gradient",
            index: i,
        });
    }
    GroupResult {
        loss,
        count,
        grad,
        skipped,
    }
}

/// Mean per-trajectory log loss with the evaluation tolerance.
pub fn evaluate_loss(game: &Game, model: &LambdaModel, data: &[ObservedPlay], cfg: &TrainConfig) -> Result<f64> {
    let per = evaluate_records(game, model, data, &cfg.eval_options(), cfg.threads)?;
    let total: f64 = per.iter().map(|(_, l)| l).sum();
    Ok(total / data.len().max(1) as f64)
}

/// `-log` probability of every observed record under the model's equilibria.
pub fn evaluate_records(
    game: &Game,
    model: &LambdaModel,
    data: &[ObservedPlay],
    opts: &SolveOptions,
    threads: usize,
) -> Result<Vec<(ActionRecord, f64)>> {
    let items: Vec<usize> = (0..data.len()).collect();
    let groups = group_by_features(data, &items);
    let results = run_parallel(threads, &groups, |g| -> Result<Vec<(usize, Vec<(ActionRecord, f64)>)>> {
        let lambda = lambda_forward(model, &data[g[0]].features)?;
        let sol = solve(game, &lambda, opts)?;
        g.iter()
            .map(|&i| {
                data[i].validate(game)?;
                let recs = data[i]
                    .records
                    .iter()
                    .map(|r| Ok((*r, record_loss(game, &sol, r)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok((i, recs))
            })
            .collect()
    })?;
    let mut by_item: Vec<Vec<(ActionRecord, f64)>> = vec![Vec::new(); data.len()];
    for r in results {
        for (i, recs) in r? {
            by_item[i] = recs;
        }
    }
    Ok(by_item.into_iter().flatten().collect())
}

fn record_loss(game: &Game, sol: &EquilibriumSolution, r: &ActionRecord) -> Result<f64> {
    let (t, lb) = match r.player {
        crate::game::Player::Min => (game.treeplex_u(), &sol.log_behavior_u),
        crate::game::Player::Max => (game.treeplex_v(), &sol.log_behavior_v),
    };
    let a = t.actions(r.infoset)[r.action];
    let l = -lb[a];
    if !l.is_finite() {
        return Err(Error::InfiniteLoss {
            infoset: r.infoset,
            action: r.action,
        });
    }
    Ok(l)
}

/// Keeps `w_g . f >= -eps / 2` for every training feature vector by
/// repeated projection onto the violated halfspaces.
fn project_weights(model: &mut LambdaModel, features: &[Vec<f64>]) {
    let bound = -model.epsilon / 2.0;
    for w in model.weights.iter_mut() {
        for _ in 0..100 {
            let mut worst: Option<(f64, &Vec<f64>)> = None;
            for f in features {
                let s: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
                if s < bound && worst.is_none_or(|(ws, _)| s < ws) {
                    worst = Some((s, f));
                }
            }
            let Some((s, f)) = worst else { break };
            let nf: f64 = f.iter().map(|x| x * x).sum();
            if nf == 0.0 {
                break;
            }
            // Land on the bound with a relative margin so rounding cannot undo it.
            let shift = (bound - s) / nf * (1.0 + 1e-9);
            for (a, b) in w.iter_mut().zip(f) {
                *a += shift * b;
            }
        }
    }
}

/// Minibatch training. Row 0 of the history reports the initial model
/// evaluated on both sets; later rows report the mean training loss over the
/// epoch's batches (each measured before its update) and the test loss of
/// the model at the end of the epoch.
pub fn train(
    game: &Game,
    init: LambdaModel,
    train_data: &[ObservedPlay],
    test_data: &[ObservedPlay],
    cfg: &TrainConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if train_data.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    for obs in train_data.iter().chain(test_data) {
        obs.validate(game)?;
    }
    let start = Instant::now();
    let mut model = init;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.weights.len() * model.num_features());
    let mut unique: Vec<Vec<f64>> = Vec::new();
    {
        let mut seen = std::collections::HashSet::new();
        for obs in train_data {
            if seen.insert(feature_key(&obs.features)) {
                unique.push(obs.features.clone());
            }
        }
    }
    let test_loss = |m: &LambdaModel| -> Result<f64> {
        if test_data.is_empty() {
            Ok(f64::NAN)
        } else {
            evaluate_loss(game, m, test_data, cfg)
        }
    };
    let tr = evaluate_loss(game, &model, train_data, cfg)?;
    let te = test_loss(&model)?;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: tr,
        test_loss: te,
        wall_seconds: start.elapsed().as_secs_f64(),
    }];
    log::info!("epoch 0: train {tr:.6} test {te:.6}");
    let mut skipped = 0;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_count = 0;
        for batch in order.chunks(cfg.batch_size) {
            let groups = group_by_features(train_data, batch);
            let results = run_parallel(cfg.threads, &groups, |g| group_gradient(game, &model, train_data, g, cfg))?;
            let mut loss = 0.0;
            let mut count = 0;
            let mut grad = vec![0.0; model.weights.len() * model.num_features()];
            for r in results {
                skipped += r.skipped;
                loss += r.loss;
                count += r.count;
                for (a, b) in grad.iter_mut().zip(r.grad.iter().flatten()) {
                    *a += b;
                }
            }
            if count == 0 {
                continue;
            }
            let mean = loss / count as f64;
            if !mean.is_finite() || mean > cfg.max_loss {
                return Err(Error::TrainingAborted(format!(
                    "batch loss {mean} in epoch {epoch} exceeds {}",
                    cfg.max_loss
                )));
            }
            epoch_loss += loss;
            epoch_count += count;
            for g in &mut grad {
                *g /= count as f64;
            }
            let mut w = model.flat();
            match cfg.optimizer {
                Optimizer::Adam => adam_step(&mut adam, &mut w, &grad, cfg.learning_rate),
                Optimizer::Sgd => {
                    for (a, g) in w.iter_mut().zip(&grad) {
                        *a -= cfg.learning_rate * g;
                    }
                }
            }
            model.set_flat(&w);
            project_weights(&mut model, &unique);
        }
        let tr = epoch_loss / epoch_count.max(1) as f64;
        let te = test_loss(&model)?;
        log::info!("epoch {epoch}: train {tr:.6} test {te:.6}");
        history.push(EpochRecord {
            epoch,
            train_loss: tr,
            test_loss: te,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainOutput {
        model,
        history,
        skipped,
    })
}

/// Samples `n` trajectories: for each, draw features, solve the game at the
/// model's `lambda` and walk the tree with the equilibrium strategies.
/// Solves are shared between samples with identical features.
pub fn sample_dataset(
    tree: &Node,
    form: &SequenceForm,
    model: &LambdaModel,
    mut features: impl FnMut(&mut ChaCha8Rng) -> Vec<f64>,
    n: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<ObservedPlay>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: HashMap<Vec<u64>, EquilibriumSolution> = HashMap::new();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let f = features(&mut rng);
        let key = feature_key(&f);
        if !cache.contains_key(&key) {
            let lambda = lambda_forward(model, &f)?;
            cache.insert(key.clone(), solve(&form.game, &lambda, opts)?);
        }
        let sol = &cache[&key];
        out.push(sample_play(tree, form, &sol.log_behavior_u, &sol.log_behavior_v, f, &mut rng));
    }
    Ok(out)
}
