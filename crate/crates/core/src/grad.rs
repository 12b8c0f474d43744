//! Observed-action log loss and parameter gradients from the backward pass.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, Player};
use crate::payoff::Triplet;

/// One decision: `action` indexes into the infoset's action list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRecord {
    pub player: Player,
    pub infoset: usize,
    pub action: usize,
}

/// One observed trajectory and the features of its context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedPlay {
    #[serde(default)]
    pub features: Vec<f64>,
    pub records: Vec<ActionRecord>,
}

impl ObservedPlay {
    /// Each infoset at most once and every action legal.
    pub fn validate(&self, game: &Game) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            let t = game.treeplex(r.player);
            if r.infoset >= t.num_infosets() {
                return Err(Error::InvalidObservation(format!(
                    "infoset {} out of range for player {:?}",
                    r.infoset, r.player
                )));
            }
            if r.action >= t.actions(r.infoset).len() {
                return Err(Error::InvalidObservation(format!(
                    "action {} out of range at infoset {}",
                    r.action, r.infoset
                )));
            }
            if !seen.insert((r.player, r.infoset)) {
                return Err(Error::InvalidObservation(format!(
                    "infoset {} of player {:?} observed twice",
                    r.infoset, r.player
                )));
            }
        }
        Ok(())
    }
}

/// Reads one JSON trajectory per non-empty line.
pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<ObservedPlay>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn write_observations(path: impl AsRef<Path>, data: &[ObservedPlay]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for obs in data {
        serde_json::to_writer(&mut w, obs)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Loss value and its gradient in sequence-form coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
}

/// `-sum log(u_a / u_{p_a})` over the observed records of both players.
///
/// An observed action of zero probability is an error, never clamped.
pub fn log_loss(game: &Game, u: &[f64], v: &[f64], obs: &ObservedPlay) -> Result<LossGradient> {
    game.treeplex_u().check_len(u, "u")?;
    game.treeplex_v().check_len(v, "v")?;
    obs.validate(game)?;
    let mut grad_u = vec![0.0; u.len()];
    let mut grad_v = vec![0.0; v.len()];
    let mut loss = 0.0;
    for r in &obs.records {
        let (t, x, g) = match r.player {
            Player::Min => (game.treeplex_u(), u, &mut grad_u),
            Player::Max => (game.treeplex_v(), v, &mut grad_v),
        };
        let a = t.actions(r.infoset)[r.action];
        let p = t.parent_of_infoset(r.infoset);
        if !(x[a] > 0.0) || !(x[p] > 0.0) {
            return Err(Error::InfiniteLoss {
                infoset: r.infoset,
                action: r.action,
            });
        }
        loss -= (x[a] / x[p]).ln();
        g[a] -= 1.0 / x[a];
        g[p] += 1.0 / x[p];
    }
    Ok(LossGradient { loss, grad_u, grad_v })
}

/// `dL/dP_ij = y_u[i] v_j + u_i y_v[j]` on the requested entries only.
pub fn grad_payoff(
    y_u: &[f64],
    y_v: &[f64],
    u: &[f64],
    v: &[f64],
    pattern: &[(usize, usize)],
) -> Result<Vec<Triplet>> {
    for (what, a, b) in [("y_u", y_u.len(), u.len()), ("y_v", y_v.len(), v.len())] {
        if a != b {
            return Err(Error::DimensionMismatch {
                what,
                expected: b,
                found: a,
            });
        }
    }
    pattern
        .iter()
        .map(|&(i, j)| {
            if i >= u.len() || j >= v.len() {
                return Err(Error::PayoffOutOfRange {
                    row: i,
                    col: j,
                    rows: u.len(),
                    cols: v.len(),
                });
            }
            Ok((i, j, y_u[i] * v[j] + u[i] * y_v[j]))
        })
        .collect()
}

/// Per-infoset `dL/dlambda_h` for both players.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGradient {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `kappa_h^T y` where `(kappa_h)_a = 1 + log(u_a / u_{p_h})` for `a in A_h`
/// and `-1` at `p_h`.
fn kappa_dot(t: &crate::treeplex::Treeplex, log_behavior: &[f64], y: &[f64]) -> Vec<f64> {
    t.infosets()
        .iter()
        .map(|info| {
            let s: f64 = info.actions.iter().map(|&a| (1.0 + log_behavior[a]) * y[a]).sum();
            s - y[info.parent]
        })
        .collect()
}

/// `dL/dlambda_h = kappa_h^T y_u` for the min player and `-K_h^T y_v` for the max player.
pub fn grad_lambda(game: &Game, u: &[f64], v: &[f64], y_u: &[f64], y_v: &[f64]) -> Result<LambdaGradient> {
    let (tu, tv) = (game.treeplex_u(), game.treeplex_v());
    tu.check_len(y_u, "y_u")?;
    tv.check_len(y_v, "y_v")?;
    let lbu = tu.log_behavior_of(u)?;
    let lbv = tv.log_behavior_of(v)?;
    Ok(grad_lambda_log(game, &lbu, &lbv, y_u, y_v))
}

/// [`grad_lambda`] from log-behavioral strategies.
pub fn grad_lambda_log(game: &Game, lbu: &[f64], lbv: &[f64], y_u: &[f64], y_v: &[f64]) -> LambdaGradient {
    LambdaGradient {
        u: kappa_dot(game.treeplex_u(), lbu, y_u),
        v: kappa_dot(game.treeplex_v(), lbv, y_v).into_iter().map(|x| -x).collect(),
    }
}

/// Dense `kappa_h` for one infoset of one player, for inspection.
pub fn kappa(game: &Game, player: Player, log_behavior: &[f64], h: usize) -> Vec<f64> {
    let t = game.treeplex(player);
    let mut k = vec![0.0; t.num_sequences()];
    let info = &t.infosets()[h];
    for &a in &info.actions {
        k[a] = 1.0 + log_behavior[a];
    }
    k[info.parent] -= 1.0;
    k
}

/// Gradients of the loss with respect to the game parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub d_payoff: Vec<Triplet>,
    pub d_lambda: LambdaGradient,
}
