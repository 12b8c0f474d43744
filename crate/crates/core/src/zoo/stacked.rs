//! Random stacked games: `d` simultaneous-move subgames played in succession,
//! each player observing the joint actions of earlier stages.
//!
//! Level-`k` infosets of either player are keyed by the joint history
//! `H_{k-1}`, so each player has `n^(2(k-1))` infosets at level `k`, and the
//! level-`k` sequence for history `H` and own action `a` sits at
//! `offset_k + idx(H) * n + a`. Only the last level carries payoffs, one per
//! joint terminal history.
//!
//! Draws come from `ChaCha8Rng::seed_from_u64(seed)` in a fixed order: min
//! player's `lambda` by infoset index, max player's `lambda`, then payoffs by
//! `(idx(H_{d-1}), a_u, a_v)` in lexicographic order. All draws are uniform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{Game, RationalityParams};
use crate::payoff::SparsePayoff;
use crate::treeplex::{InfosetDef, Treeplex, TreeplexDef};

/// Refuse to build games with more sequences per player than this.
pub const MAX_SEQUENCES: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedGameSpec {
    pub depth: usize,
    pub actions: usize,
    #[serde(default = "default_low")]
    pub payoff_low: f64,
    #[serde(default = "default_high")]
    pub payoff_high: f64,
    #[serde(default = "default_lambda_low")]
    pub lambda_low: f64,
    #[serde(default = "default_lambda_high")]
    pub lambda_high: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_low() -> f64 {
    -10.0
}
fn default_high() -> f64 {
    10.0
}
fn default_lambda_low() -> f64 {
    0.9
}
fn default_lambda_high() -> f64 {
    1.1
}

impl StackedGameSpec {
    pub fn new(depth: usize, actions: usize, seed: u64) -> Self {
        StackedGameSpec {
            depth,
            actions,
            payoff_low: default_low(),
            payoff_high: default_high(),
            lambda_low: default_lambda_low(),
            lambda_high: default_lambda_high(),
            seed,
        }
    }

    /// Sequences per player, `1 + sum_k n^(2k - 1)`, or `None` on overflow.
    pub fn sequences_per_player(&self) -> Option<u128> {
        let n = self.actions as u128;
        let mut total: u128 = 1;
        for k in 1..=self.depth as u32 {
            total = total.checked_add(n.checked_pow(2 * k - 1)?)?;
        }
        Some(total)
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.actions < 2 {
            return Err(Error::InvalidConfig(format!(
                "stacked game needs depth >= 1 and at least 2 actions, got d={} n={}",
                self.depth, self.actions
            )));
        }
        if !(self.payoff_low <= self.payoff_high) || !(self.lambda_low > 0.0 && self.lambda_low <= self.lambda_high) {
            return Err(Error::InvalidConfig("empty payoff or lambda range".into()));
        }
        match self.sequences_per_player() {
            Some(s) if s <= MAX_SEQUENCES => Ok(()),
            s => Err(Error::SizeOverflow {
                sequences: s.unwrap_or(u128::MAX),
                limit: MAX_SEQUENCES,
            }),
        }
    }
}

fn stacked_treeplex(d: usize, n: usize) -> Treeplex {
    let mut infosets = Vec::new();
    // seq_offset[k]: first sequence index of level k (1-based levels).
    let mut seq_offset = vec![0usize; d + 2];
    seq_offset[1] = 1;
    for k in 1..=d {
        seq_offset[k + 1] = seq_offset[k] + n.pow(2 * k as u32 - 1);
    }
    for k in 1..=d {
        let histories = n.pow(2 * (k as u32 - 1));
        for hist in 0..histories {
            let parent = if k == 1 {
                0
            } else {
                // hist = prefix * n^2 + a_u * n + a_v
                let prefix = hist / (n * n);
                let own = (hist / n) % n;
                seq_offset[k - 1] + prefix * n + own
            };
            let first = seq_offset[k] + hist * n;
            infosets.push(InfosetDef {
                parent,
                actions: (first..first + n).collect(),
            });
        }
    }
    Treeplex::new(TreeplexDef {
        num_sequences: seq_offset[d + 1],
        infosets,
    })
    .expect("stacked construction is a valid treeplex")
}

/// Builds the game with `lambda` attached.
pub fn gen_stacked(spec: &StackedGameSpec) -> Result<Game> {
    spec.validate()?;
    let (d, n) = (spec.depth, spec.actions);
    let t = stacked_treeplex(d, n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = t.num_infosets();
    let mut draw_lambda = || {
        (0..m)
            .map(|_| {
                if spec.lambda_low == spec.lambda_high {
                    spec.lambda_low
                } else {
                    rng.random_range(spec.lambda_low..spec.lambda_high)
                }
            })
            .collect::<Vec<f64>>()
    };
    let lu = draw_lambda();
    let lv = draw_lambda();
    let last = t.num_sequences() - n.pow(2 * d as u32 - 1);
    let prefixes = n.pow(2 * (d as u32 - 1));
    let mut trip = Vec::with_capacity(prefixes * n * n);
    for hist in 0..prefixes {
        for au in 0..n {
            for av in 0..n {
                let x = if spec.payoff_low == spec.payoff_high {
                    spec.payoff_low
                } else {
                    rng.random_range(spec.payoff_low..spec.payoff_high)
                };
                trip.push((last + hist * n + au, last + hist * n + av, x));
            }
        }
    }
    let p = SparsePayoff::new(t.num_sequences(), t.num_sequences(), trip)?;
    Game::new(t.clone(), t, p)?.with_lambda(RationalityParams { u: lu, v: lv })
}
