//! Game generators: random stacked games, one-card poker, the
//! information-gathering game, and small random games for testing.

pub mod info_gathering;
pub mod poker;
pub mod stacked;

use rand::Rng;

use crate::game::{Game, RationalityParams};
use crate::payoff::SparsePayoff;
use crate::treeplex::{InfosetDef, Treeplex, TreeplexDef};

pub use info_gathering::{dp_optimal_policy, gen_info_gathering, ingest_info_gathering_csv, InfoGatherSpec, InfoGathering};
pub use poker::{gen_one_card_poker, PokerGame, PokerSpec};
pub use stacked::{gen_stacked, StackedGameSpec};

/// Random treeplex with at most `max_sequences` sequences: infosets of 2 to
/// 4 actions hang off uniformly chosen existing sequences.
pub fn random_treeplex(rng: &mut impl Rng, max_sequences: usize) -> Treeplex {
    let mut n = 1;
    let mut infosets = Vec::new();
    loop {
        let k = rng.random_range(2..=4);
        if n + k > max_sequences {
            break;
        }
        let parent = rng.random_range(0..n);
        infosets.push(InfosetDef {
            parent,
            actions: (n..n + k).collect(),
        });
        n += k;
    }
    Treeplex::new(TreeplexDef {
        num_sequences: n,
        infosets,
    })
    .expect("generated treeplex is valid")
}

/// Random game on random treeplexes with payoffs in `[-scale, scale]` on a
/// fraction `density` of coordinates and `lambda` drawn from `[0.5, 1.5]`.
pub fn random_game(rng: &mut impl Rng, max_sequences: usize, density: f64, scale: f64) -> Game {
    let tu = random_treeplex(rng, max_sequences);
    let tv = random_treeplex(rng, max_sequences);
    let mut trip = Vec::new();
    for i in 0..tu.num_sequences() {
        for j in 0..tv.num_sequences() {
            if rng.random_bool(density) {
                trip.push((i, j, rng.random_range(-scale..scale)));
            }
        }
    }
    let p = SparsePayoff::new(tu.num_sequences(), tv.num_sequences(), trip).expect("valid payoffs");
    let lu = (0..tu.num_infosets()).map(|_| rng.random_range(0.5..1.5)).collect();
    let lv = (0..tv.num_infosets()).map(|_| rng.random_range(0.5..1.5)).collect();
    Game::new(tu, tv, p)
        .and_then(|g| g.with_lambda(RationalityParams { u: lu, v: lv }))
        .expect("consistent dimensions")
}
