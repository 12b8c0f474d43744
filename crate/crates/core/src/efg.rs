//! Explicit game trees and their conversion to sequence form.
//!
//! Used by the poker and information-gathering generators. Chance nodes are
//! folded into the payoff matrix; decision nodes sharing an infoset key must be
//! reached through the same own-action history (perfect recall).

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{Game, Player};
use crate::grad::{ActionRecord, ObservedPlay};
use crate::payoff::SparsePayoff;
use crate::treeplex::{InfosetDef, Treeplex, TreeplexDef};

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Leaf with the payoff to the max player.
    Terminal(f64),
    /// Outcomes with their probabilities.
    Chance(Vec<(f64, Node)>),
    Decision {
        player: Player,
        infoset: String,
        children: Vec<Node>,
    },
}

/// Sequence-form game plus the infoset keys in index order.
#[derive(Debug, Clone)]
pub struct SequenceForm {
    pub game: Game,
    pub infosets_u: Vec<String>,
    pub infosets_v: Vec<String>,
    index: HashMap<(Player, String), usize>,
}

impl SequenceForm {
    pub fn infoset_index(&self, player: Player, key: &str) -> Option<usize> {
        self.index.get(&(player, key.to_string())).copied()
    }

    pub fn infoset_keys(&self, player: Player) -> &[String] {
        match player {
            Player::Min => &self.infosets_u,
            Player::Max => &self.infosets_v,
        }
    }
}

#[derive(Default)]
struct Builder {
    infosets: [Vec<InfosetDef>; 2],
    keys: [Vec<String>; 2],
    num_sequences: [usize; 2],
    index: HashMap<(Player, String), usize>,
    payoff: HashMap<(usize, usize), f64>,
}

fn slot(p: Player) -> usize {
    match p {
        Player::Min => 0,
        Player::Max => 1,
    }
}

impl Builder {
    fn walk(&mut self, node: &Node, seq: [usize; 2], reach: f64) -> Result<()> {
        match node {
            Node::Terminal(x) => {
                if *x != 0.0 && reach > 0.0 {
                    *self.payoff.entry((seq[0], seq[1])).or_insert(0.0) += reach * x;
                }
            }
            Node::Chance(outcomes) => {
                let total: f64 = outcomes.iter().map(|(p, _)| p).sum();
                if outcomes.iter().any(|(p, _)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(format!("chance probabilities sum to {total}")));
                }
                for (p, child) in outcomes {
                    self.walk(child, seq, reach * p)?;
                }
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                let s = slot(*player);
                let key = (*player, infoset.clone());
                let h = match self.index.get(&key) {
                    Some(&h) => {
                        let def = &self.infosets[s][h];
                        if def.parent != seq[s] || def.actions.len() != children.len() {
                            return Err(Error::InvalidConfig(format!(
                                "infoset {infoset:?} violates perfect recall or changes its action count"
                            )));
                        }
                        h
                    }
                    None => {
                        let first = self.num_sequences[s] + 1;
                        self.num_sequences[s] += children.len();
                        let h = self.infosets[s].len();
                        self.infosets[s].push(InfosetDef {
                            parent: seq[s],
                            actions: (first..first + children.len()).collect(),
                        });
                        self.keys[s].push(infoset.clone());
                        self.index.insert(key, h);
                        h
                    }
                };
                let actions = self.infosets[s][h].actions.clone();
                for (a, child) in actions.into_iter().zip(children) {
                    let mut next = seq;
                    next[s] = a;
                    self.walk(child, next, reach)?;
                }
            }
        }
        Ok(())
    }
}

/// Converts a tree to sequence form. Infosets and sequences are numbered in
/// depth-first discovery order, which is topological.
pub fn to_sequence_form(root: &Node) -> Result<SequenceForm> {
    let mut b = Builder::default();
    b.walk(root, [0, 0], 1.0)?;
    let [iu, iv] = b.infosets;
    let tu = Treeplex::new(TreeplexDef {
        num_sequences: b.num_sequences[0] + 1,
        infosets: iu,
    })?;
    let tv = Treeplex::new(TreeplexDef {
        num_sequences: b.num_sequences[1] + 1,
        infosets: iv,
    })?;
    let mut trip: Vec<_> = b
        .payoff
        .into_iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|((r, c), v)| (r, c, v))
        .collect();
    trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let p = SparsePayoff::new(tu.num_sequences(), tv.num_sequences(), trip)?;
    let [ku, kv] = b.keys;
    Ok(SequenceForm {
        game: Game::new(tu, tv, p)?,
        infosets_u: ku,
        infosets_v: kv,
        index: b.index,
    })
}

fn draw(rng: &mut impl Rng, weights: impl Iterator<Item = f64>) -> usize {
    let w: Vec<f64> = weights.collect();
    let total: f64 = w.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, wi) in w.iter().enumerate() {
        if x < *wi {
            return i;
        }
        x -= wi;
    }
    w.iter().rposition(|wi| *wi > 0.0).unwrap_or(0)
}

/// Walks the tree once, sampling chance outcomes and both players' actions
/// from their log-behavioral strategies.
pub fn sample_trajectory(
    root: &Node,
    sf: &SequenceForm,
    log_behavior_u: &[f64],
    log_behavior_v: &[f64],
    rng: &mut impl Rng,
) -> Vec<ActionRecord> {
    let mut records = Vec::new();
    let mut node = root;
    loop {
        match node {
            Node::Terminal(_) => return records,
            Node::Chance(outcomes) => {
                let i = draw(rng, outcomes.iter().map(|(p, _)| *p));
                node = &outcomes[i].1;
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                let h = sf.infoset_index(*player, infoset).expect("infoset of the converted tree");
                let (t, lb) = match player {
                    Player::Min => (sf.game.treeplex_u(), log_behavior_u),
                    Player::Max => (sf.game.treeplex_v(), log_behavior_v),
                };
                let i = draw(rng, t.actions(h).iter().map(|&a| lb[a].exp()));
                records.push(ActionRecord {
                    player: *player,
                    infoset: h,
                    action: i,
                });
                node = &children[i];
            }
        }
    }
}

/// [`sample_trajectory`] packaged with its features.
pub fn sample_play(
    root: &Node,
    sf: &SequenceForm,
    log_behavior_u: &[f64],
    log_behavior_v: &[f64],
    features: Vec<f64>,
    rng: &mut impl Rng,
) -> ObservedPlay {
    ObservedPlay {
        features,
        records: sample_trajectory(root, sf, log_behavior_u, log_behavior_v, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decision(player: Player, key: &str, children: Vec<Node>) -> Node {
        Node::Decision {
            player,
            infoset: key.into(),
            children,
        }
    }

    #[test]
    fn matching_pennies_tree() {
        // Max player moves without seeing the min player's choice.
        let leaf = |x: f64| Node::Terminal(x);
        let root = decision(
            Player::Min,
            "u",
            vec![
                decision(Player::Max, "v", vec![leaf(1.0), leaf(-1.0)]),
                decision(Player::Max, "v", vec![leaf(-1.0), leaf(1.0)]),
            ],
        );
        let sf = to_sequence_form(&root).unwrap();
        assert_eq!(sf.game.treeplex_u().num_sequences(), 3);
        assert_eq!(sf.game.treeplex_v().num_sequences(), 3);
        assert_eq!(sf.game.payoff().get(1, 1), 1.0);
        assert_eq!(sf.game.payoff().get(2, 1), -1.0);
    }

    #[test]
    fn chance_weights_fold_into_payoffs() {
        let root = Node::Chance(vec![
            (0.25, decision(Player::Min, "a", vec![Node::Terminal(4.0), Node::Terminal(0.0)])),
            (0.75, decision(Player::Min, "a", vec![Node::Terminal(2.0), Node::Terminal(1.0)])),
        ]);
        let sf = to_sequence_form(&root).unwrap();
        assert!(sf.game.is_one_player());
        assert_eq!(sf.game.payoff().get(1, 0), 2.5);
        assert_eq!(sf.game.payoff().get(2, 0), 0.75);
    }

    #[test]
    fn imperfect_recall_is_rejected() {
        let root = decision(
            Player::Min,
            "a",
            vec![
                decision(Player::Min, "b", vec![Node::Terminal(0.0), Node::Terminal(1.0)]),
                decision(Player::Min, "b", vec![Node::Terminal(0.0), Node::Terminal(1.0)]),
            ],
        );
        assert!(to_sequence_form(&root).is_err());
    }
}
