//! Two-player zero-sum game in sequence form and its JSON file format.
//!
//! ```json
//! {
//!   "treeplex_u": {"num_sequences": 4, "infosets": [{"parent": 0, "actions": [1, 2, 3]}]},
//!   "treeplex_v": {"num_sequences": 4, "infosets": [{"parent": 0, "actions": [1, 2, 3]}]},
//!   "payoffs": [[1, 2, 1.0], [1, 3, -1.0]],
//!   "lambda": {"u": [1.0], "v": [1.0]}
//! }
//! ```
//!
//! The min player `u` minimizes `u^T P v`; chance probabilities are folded into
//! the entries of `P`. Indices are 0-based. `lambda` and `lambda_groups` are
//! optional on input.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entropy::dilated_entropy;
use crate::error::{Error, Result};
use crate::payoff::{SparsePayoff, Triplet};
use crate::treeplex::Treeplex;

/// Which side of the zero-sum game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    /// The minimizing player, strategy `u`.
    #[serde(rename = "u")]
    Min,
    /// The maximizing player, strategy `v`.
    #[serde(rename = "v")]
    Max,
}

/// One `lambda_h > 0` per infoset of each player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalityParams {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl RationalityParams {
    pub fn constant(game: &Game, lambda: f64) -> Self {
        RationalityParams {
            u: vec![lambda; game.treeplex_u().num_infosets()],
            v: vec![lambda; game.treeplex_v().num_infosets()],
        }
    }

    pub fn for_player(&self, p: Player) -> &[f64] {
        match p {
            Player::Min => &self.u,
            Player::Max => &self.v,
        }
    }

    pub fn for_player_mut(&mut self, p: Player) -> &mut Vec<f64> {
        match p {
            Player::Min => &mut self.u,
            Player::Max => &mut self.v,
        }
    }

    /// Checks lengths against the game and that every entry is positive.
    pub fn validate(&self, game: &Game) -> Result<()> {
        game.treeplex_u().check_lambda(&self.u)?;
        game.treeplex_v().check_lambda(&self.v)
    }
}

/// Weight-tying map from infosets to learnable parameter groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LambdaGroups {
    pub u: Vec<usize>,
    pub v: Vec<usize>,
}

impl LambdaGroups {
    /// One group per infoset, min player's infosets first.
    pub fn untied(game: &Game) -> Self {
        let mu = game.treeplex_u().num_infosets();
        let mv = game.treeplex_v().num_infosets();
        LambdaGroups {
            u: (0..mu).collect(),
            v: (mu..mu + mv).collect(),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.u.iter().chain(&self.v).map(|g| g + 1).max().unwrap_or(0)
    }

    pub fn for_player(&self, p: Player) -> &[usize] {
        match p {
            Player::Min => &self.u,
            Player::Max => &self.v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    treeplex_u: Treeplex,
    treeplex_v: Treeplex,
    payoff: SparsePayoff,
    lambda: Option<RationalityParams>,
    lambda_groups: Option<LambdaGroups>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    treeplex_u: Treeplex,
    treeplex_v: Treeplex,
    payoffs: Vec<Triplet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<RationalityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_groups: Option<LambdaGroups>,
}

impl Game {
    pub fn new(treeplex_u: Treeplex, treeplex_v: Treeplex, payoff: SparsePayoff) -> Result<Self> {
        if payoff.rows() != treeplex_u.num_sequences() {
            return Err(Error::DimensionMismatch {
                what: "payoff rows",
                expected: treeplex_u.num_sequences(),
                found: payoff.rows(),
            });
        }
        if payoff.cols() != treeplex_v.num_sequences() {
            return Err(Error::DimensionMismatch {
                what: "payoff columns",
                expected: treeplex_v.num_sequences(),
                found: payoff.cols(),
            });
        }
        Ok(Game {
            treeplex_u,
            treeplex_v,
            payoff,
            lambda: None,
            lambda_groups: None,
        })
    }

    /// One-player game: the opponent is the root-only treeplex and `P` is a
    /// column of costs for the min player.
    pub fn one_player(treeplex: Treeplex, costs: &[f64]) -> Result<Self> {
        treeplex.check_len(costs, "one-player costs")?;
        let trip = costs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(a, &c)| (a, 0, c))
            .collect();
        let p = SparsePayoff::new(treeplex.num_sequences(), 1, trip)?;
        Game::new(treeplex, Treeplex::trivial(), p)
    }

    pub fn with_lambda(mut self, lambda: RationalityParams) -> Result<Self> {
        lambda.validate(&self)?;
        self.lambda = Some(lambda);
        Ok(self)
    }

    pub fn with_lambda_groups(mut self, groups: LambdaGroups) -> Result<Self> {
        self.check_groups(&groups)?;
        self.lambda_groups = Some(groups);
        Ok(self)
    }

    fn check_groups(&self, groups: &LambdaGroups) -> Result<()> {
        let (mu, mv) = (self.treeplex_u.num_infosets(), self.treeplex_v.num_infosets());
        if groups.u.len() != mu || groups.v.len() != mv {
            return Err(Error::DimensionMismatch {
                what: "lambda groups",
                expected: mu + mv,
                found: groups.u.len() + groups.v.len(),
            });
        }
        Ok(())
    }

    pub fn treeplex_u(&self) -> &Treeplex {
        &self.treeplex_u
    }

    pub fn treeplex_v(&self) -> &Treeplex {
        &self.treeplex_v
    }

    pub fn treeplex(&self, p: Player) -> &Treeplex {
        match p {
            Player::Min => &self.treeplex_u,
            Player::Max => &self.treeplex_v,
        }
    }

    pub fn payoff(&self) -> &SparsePayoff {
        &self.payoff
    }

    /// Rationality parameters stored with the game, if any.
    pub fn lambda(&self) -> Option<&RationalityParams> {
        self.lambda.as_ref()
    }

    /// Weight-tying groups; untied when the game does not define any.
    pub fn lambda_groups(&self) -> LambdaGroups {
        self.lambda_groups
            .clone()
            .unwrap_or_else(|| LambdaGroups::untied(self))
    }

    pub fn is_one_player(&self) -> bool {
        self.treeplex_v.num_infosets() == 0
    }

    /// Same game with `P` replaced.
    pub fn with_payoff(&self, payoff: SparsePayoff) -> Result<Game> {
        let mut g = Game::new(self.treeplex_u.clone(), self.treeplex_v.clone(), payoff)?;
        g.lambda = self.lambda.clone();
        g.lambda_groups = self.lambda_groups.clone();
        Ok(g)
    }

    /// Expected payoff `u^T P v` to the max player.
    pub fn value(&self, u: &[f64], v: &[f64]) -> f64 {
        self.payoff.bilinear(u, v)
    }

    /// Regularized objective `u^T P v + Psi_u(u) - Psi_v(v)` at interior plans.
    pub fn objective(&self, lambda: &RationalityParams, u: &[f64], v: &[f64]) -> Result<f64> {
        let lbu = self.treeplex_u.log_behavior_of(u)?;
        let lbv = self.treeplex_v.log_behavior_of(v)?;
        Ok(self.value(u, v) + dilated_entropy(&self.treeplex_u, &lambda.u, u, &lbu)
            - dilated_entropy(&self.treeplex_v, &lambda.v, v, &lbv))
    }

    /// The game seen with roles exchanged: the former max player minimizes `-P^T`.
    pub fn swap_roles(&self) -> Game {
        Game {
            treeplex_u: self.treeplex_v.clone(),
            treeplex_v: self.treeplex_u.clone(),
            payoff: self.payoff.negated_transpose(),
            lambda: self.lambda.as_ref().map(|l| RationalityParams {
                u: l.v.clone(),
                v: l.u.clone(),
            }),
            lambda_groups: self.lambda_groups.as_ref().map(|g| LambdaGroups {
                u: g.v.clone(),
                v: g.u.clone(),
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GameFile {
            treeplex_u: self.treeplex_u.clone(),
            treeplex_v: self.treeplex_v.clone(),
            payoffs: self.payoff.triplets().to_vec(),
            lambda: self.lambda.clone(),
            lambda_groups: self.lambda_groups.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(s)?;
        let payoff = SparsePayoff::new(
            file.treeplex_u.num_sequences(),
            file.treeplex_v.num_sequences(),
            file.payoffs,
        )?;
        let mut game = Game::new(file.treeplex_u, file.treeplex_v, payoff)?;
        if let Some(l) = file.lambda {
            game = game.with_lambda(l)?;
        }
        if let Some(g) = file.lambda_groups {
            game = game.with_lambda_groups(g)?;
        }
        Ok(game)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Game::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
