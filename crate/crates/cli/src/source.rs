//! `--game` values: a generator spec or a path to a game JSON file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nlqre::efg::{Node, SequenceForm};
use nlqre::treeplex::{InfosetDef, TreeplexDef};
use nlqre::zoo::{gen_info_gathering, gen_one_card_poker, gen_stacked, InfoGatherSpec, PokerSpec, StackedGameSpec};
use nlqre::{Game, SparsePayoff, Treeplex};

/// Generators understood by `--game`. Anything else is read as a file.
pub const GENERATORS: &str = "rps, poker:<cards>, stacked:<depth>:<actions>, info-gathering[:<reveal cost>]";

#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    Rps,
    Poker(u32),
    Stacked { depth: usize, actions: usize },
    InfoGathering { reveal_cost: Option<f64> },
    File(String),
}

/// A loaded game, plus its explicit tree when it came from a generator that
/// has one (needed to sample play).
pub struct LoadedGame {
    pub game: Game,
    pub tree: Option<(Node, SequenceForm)>,
    pub info_gathering: Option<nlqre::zoo::info_gathering::InfoGathering>,
}

fn number<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().ok().with_context(|| format!("bad {what} {s:?} in game spec"))
}

impl GameSource {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        Ok(match parts.as_slice() {
            ["rps"] => GameSource::Rps,
            ["poker", n] => GameSource::Poker(number(n, "card count")?),
            ["stacked", d, n] => GameSource::Stacked {
                depth: number(d, "depth")?,
                actions: number(n, "action count")?,
            },
            ["info-gathering"] => GameSource::InfoGathering { reveal_cost: None },
            ["info-gathering", c] => GameSource::InfoGathering {
                reveal_cost: Some(number(c, "reveal cost")?),
            },
            ["poker" | "stacked" | "info-gathering" | "rps", ..] => bail!("malformed game spec {s:?}; expected one of {GENERATORS}"),
            _ => GameSource::File(s.to_string()),
        })
    }

    pub fn load(&self, seed: u64) -> Result<LoadedGame> {
        let plain = |game| LoadedGame {
            game,
            tree: None,
            info_gathering: None,
        };
        Ok(match self {
            GameSource::Rps => plain(rps()?),
            GameSource::Poker(n) => {
                let pg = gen_one_card_poker(&PokerSpec::with_cards(*n))?;
                LoadedGame {
                    game: pg.form.game.clone(),
                    tree: Some((pg.tree, pg.form)),
                    info_gathering: None,
                }
            }
            GameSource::Stacked { depth, actions } => plain(gen_stacked(&StackedGameSpec::new(*depth, *actions, seed))?),
            GameSource::InfoGathering { reveal_cost } => {
                let spec = match reveal_cost {
                    Some(c) => InfoGatherSpec::with_reveal_cost(*c),
                    None => InfoGatherSpec::default(),
                };
                let ig = gen_info_gathering(&spec)?;
                LoadedGame {
                    game: ig.form.game.clone(),
                    tree: Some((ig.tree.clone(), ig.form.clone())),
                    info_gathering: Some(ig),
                }
            }
            GameSource::File(path) => {
                if !Path::new(path).exists() {
                    bail!("game file {path} does not exist (generators: {GENERATORS})");
                }
                plain(Game::load(path).with_context(|| format!("reading game {path}"))?)
            }
        })
    }
}

/// Rock-paper-scissors as a one-shot matrix game.
pub fn rps() -> Result<Game> {
    let simplex = || {
        Treeplex::new(TreeplexDef {
            num_sequences: 4,
            infosets: vec![InfosetDef {
                parent: 0,
                actions: vec![1, 2, 3],
            }],
        })
    };
    let m = [[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]];
    let mut trip = Vec::new();
    for (i, row) in m.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if x != 0.0 {
                trip.push((i + 1, j + 1, x));
            }
        }
    }
    Ok(Game::new(simplex()?, simplex()?, SparsePayoff::new(4, 4, trip)?)?)
}
