//! One-card poker: Kuhn poker with an arbitrary deck.
//!
//! Each player antes, receives one card without replacement, then player 1
//! checks or bets; a check lets player 2 check or bet, and a bet is answered by
//! fold or call. Player 1 is the min player `u`; payoffs are player 2's
//! winnings. Rationality parameters are tied by public history into four
//! groups: player 1 first move, player 2 after a check, player 2 after a bet,
//! player 1 facing a bet.

use serde::{Deserialize, Serialize};

use crate::efg::{to_sequence_form, Node, SequenceForm};
use crate::error::{Error, Result};
use crate::game::{Game, LambdaGroups, Player};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PokerSpec {
    /// Card ranks; repeated ranks are allowed.
    pub deck: Vec<u32>,
    #[serde(default = "one")]
    pub ante: f64,
    #[serde(default = "one")]
    pub bet: f64,
}

fn one() -> f64 {
    1.0
}

impl PokerSpec {
    /// Deck `1..=n` with unit ante and bet.
    pub fn with_cards(n: u32) -> Self {
        PokerSpec {
            deck: (1..=n).collect(),
            ante: 1.0,
            bet: 1.0,
        }
    }
}

/// Public histories in group order.
pub const HISTORIES: [&str; 4] = ["", "c", "b", "cb"];

#[derive(Debug, Clone)]
pub struct PokerGame {
    pub spec: PokerSpec,
    pub tree: Node,
    pub form: SequenceForm,
}

impl PokerGame {
    pub fn game(&self) -> &Game {
        &self.form.game
    }
}

fn key(card: u32, history: &str) -> String {
    format!("{card}:{history}")
}

/// Player 1's winnings at showdown for stake `s`.
fn showdown(c1: u32, c2: u32, s: f64) -> f64 {
    match c1.cmp(&c2) {
        std::cmp::Ordering::Greater => s,
        std::cmp::Ordering::Less => -s,
        std::cmp::Ordering::Equal => 0.0,
    }
}

fn betting(c1: u32, c2: u32, ante: f64, bet: f64) -> Node {
    // Terminals carry player 2's winnings, the negation of player 1's.
    let t = |p1: f64| Node::Terminal(-p1);
    let dec = |player, h: &str, children| Node::Decision {
        player,
        infoset: match player {
            Player::Min => key(c1, h),
            Player::Max => key(c2, h),
        },
        children,
    };
    let after_check = dec(
        Player::Max,
        "c",
        vec![
            t(showdown(c1, c2, ante)),
            dec(
                Player::Min,
                "cb",
                vec![t(-ante), t(showdown(c1, c2, ante + bet))],
            ),
        ],
    );
    let after_bet = dec(Player::Max, "b", vec![t(ante), t(showdown(c1, c2, ante + bet))]);
    dec(Player::Min, "", vec![after_check, after_bet])
}

/// Builds the tree, its sequence form and the four lambda groups.
pub fn gen_one_card_poker(spec: &PokerSpec) -> Result<PokerGame> {
    let n = spec.deck.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("deck needs at least 2 cards, got {n}")));
    }
    if !(spec.ante >= 0.0 && spec.bet >= 0.0) {
        return Err(Error::InvalidConfig("ante and bet must be nonnegative".into()));
    }
    let p = 1.0 / (n * (n - 1)) as f64;
    let mut deals = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                deals.push((p, betting(spec.deck[i], spec.deck[j], spec.ante, spec.bet)));
            }
        }
    }
    let tree = Node::Chance(deals);
    let form = to_sequence_form(&tree)?;
    let group_of = |k: &String| {
        let h = k.split_once(':').map_or("", |(_, h)| h);
        HISTORIES.iter().position(|x| *x == h).expect("known history")
    };
    let groups = LambdaGroups {
        u: form.infosets_u.iter().map(group_of).collect(),
        v: form.infosets_v.iter().map(group_of).collect(),
    };
    let mut form = form;
    form.game = form.game.with_lambda_groups(groups)?;
    Ok(PokerGame {
        spec: spec.clone(),
        tree,
        form,
    })
}
