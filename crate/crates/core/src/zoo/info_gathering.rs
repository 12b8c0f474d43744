//! One-player information-gathering game.
//!
//! Four face-down cards valued 1 to 10 lie on a 2x2 grid. At each of four
//! stages the player guesses which row has the larger sum or pays to reveal
//! the next card, in the fixed order top-left, top-right, bottom-left,
//! bottom-right. Stage 4 allows only the two guesses. A guess ends the
//! episode; a tie counts as correct for either row.
//!
//! The game is built as a tree over all `10^4` boards and converted to
//! sequence form: 1111 infosets and 2334 sequences with default settings.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::efg::{to_sequence_form, Node, SequenceForm};
use crate::error::{Error, Result};
use crate::game::{Game, LambdaGroups, Player};
use crate::grad::{ActionRecord, ObservedPlay};

pub const STAGES: usize = 4;
pub const GUESS_TOP: usize = 0;
pub const GUESS_BOTTOM: usize = 1;
pub const REVEAL: usize = 2;
pub const ACTION_NAMES: [&str; 3] = ["guess_top", "guess_bottom", "reveal"];
pub const AGE_BINS: usize = 8;
pub const EDUCATION: [&str; 4] = ["GCSE", "A-levels", "Undergraduate", "Graduate"];
/// One-hot age bin followed by one-hot education.
pub const FEATURE_DIM: usize = AGE_BINS + 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoGatherSpec {
    /// Cost of the reveal available at stages 1, 2 and 3.
    #[serde(default = "default_costs")]
    pub reveal_costs: [f64; 3],
    #[serde(default = "default_correct")]
    pub reward_correct: f64,
    #[serde(default = "default_incorrect")]
    pub reward_incorrect: f64,
    #[serde(default = "default_max_card")]
    pub max_card: u32,
}

fn default_costs() -> [f64; 3] {
    [1.0; 3]
}
fn default_correct() -> f64 {
    60.0
}
fn default_incorrect() -> f64 {
    -50.0
}
fn default_max_card() -> u32 {
    10
}

impl Default for InfoGatherSpec {
    fn default() -> Self {
        InfoGatherSpec {
            reveal_costs: default_costs(),
            reward_correct: default_correct(),
            reward_incorrect: default_incorrect(),
            max_card: default_max_card(),
        }
    }
}

impl InfoGatherSpec {
    pub fn with_reveal_cost(cost: f64) -> Self {
        InfoGatherSpec {
            reveal_costs: [cost; 3],
            ..Default::default()
        }
    }

    fn reward(&self, board: &[u32; 4], guess: usize) -> f64 {
        let top = board[0] + board[1];
        let bottom = board[2] + board[3];
        let correct = match guess {
            GUESS_TOP => top >= bottom,
            _ => bottom >= top,
        };
        if correct {
            self.reward_correct
        } else {
            self.reward_incorrect
        }
    }
}

/// Infoset key for a stage (1-based) and the values revealed so far.
pub fn infoset_key(stage: usize, revealed: &[u32]) -> String {
    let vals: Vec<String> = revealed.iter().map(|v| v.to_string()).collect();
    format!("s{stage}:{}", vals.join(";"))
}

fn parse_key(key: &str) -> (usize, Vec<u32>) {
    let (s, rest) = key.split_once(':').expect("well-formed key");
    let stage = s[1..].parse().expect("stage number");
    let revealed = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(';').map(|v| v.parse().expect("card value")).collect()
    };
    (stage, revealed)
}

#[derive(Debug, Clone)]
pub struct InfoGathering {
    pub spec: InfoGatherSpec,
    pub tree: Node,
    pub form: SequenceForm,
    /// Stage (1-based) of each infoset.
    pub stage_of: Vec<usize>,
}

impl InfoGathering {
    pub fn game(&self) -> &Game {
        &self.form.game
    }

    pub fn num_boards(&self) -> usize {
        (self.spec.max_card as usize).pow(4)
    }

    pub fn infoset(&self, stage: usize, revealed: &[u32]) -> Option<usize> {
        self.form.infoset_index(Player::Min, &infoset_key(stage, revealed))
    }

    /// Stage and revealed values of an infoset.
    pub fn describe(&self, h: usize) -> (usize, Vec<u32>) {
        parse_key(&self.form.infosets_u[h])
    }
}

fn stage_node(spec: &InfoGatherSpec, board: &[u32; 4], stage: usize, paid: f64) -> Node {
    // Terminal entries are the player's cost, the negated net score.
    let guess = |g| Node::Terminal(-(spec.reward(board, g) - paid));
    let mut children = vec![guess(GUESS_TOP), guess(GUESS_BOTTOM)];
    if stage < STAGES {
        children.push(stage_node(spec, board, stage + 1, paid + spec.reveal_costs[stage - 1]));
    }
    Node::Decision {
        player: Player::Min,
        infoset: infoset_key(stage, &board[..stage - 1]),
        children,
    }
}

pub fn gen_info_gathering(spec: &InfoGatherSpec) -> Result<InfoGathering> {
    if spec.max_card == 0 || spec.reveal_costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidConfig("card range must be nonempty and costs finite".into()));
    }
    let m = spec.max_card;
    let p = 1.0 / (m as f64).powi(4);
    let mut boards = Vec::with_capacity((m as usize).pow(4));
    for a in 1..=m {
        for b in 1..=m {
            for c in 1..=m {
                for d in 1..=m {
                    boards.push((p, stage_node(spec, &[a, b, c, d], 1, 0.0)));
                }
            }
        }
    }
    let tree = Node::Chance(boards);
    let mut form = to_sequence_form(&tree)?;
    let stage_of: Vec<usize> = form.infosets_u.iter().map(|k| parse_key(k).0).collect();
    let groups = LambdaGroups {
        u: stage_of.iter().map(|s| s - 1).collect(),
        v: Vec::new(),
    };
    form.game = form.game.with_lambda_groups(groups)?;
    Ok(InfoGathering {
        spec: spec.clone(),
        tree,
        form,
        stage_of,
    })
}

/// Optimal expected net score and the optimal action per infoset.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub value: f64,
    pub policy: Vec<usize>,
    /// Expected net score from each infoset onward under optimal play,
    /// excluding costs already paid.
    pub infoset_values: Vec<f64>,
}

/// Backward induction over revealed-card states.
pub fn dp_optimal_policy(g: &InfoGathering) -> DpSolution {
    let spec = &g.spec;
    let m = spec.max_card;
    let nh = g.form.infosets_u.len();
    let mut policy = vec![0; nh];
    let mut values = vec![0.0; nh];
    // Infoset indices are topological, so reverse order visits later stages first.
    for h in (0..nh).rev() {
        let (stage, revealed) = g.describe(h);
        let hidden = 4 - revealed.len();
        let count = (m as f64).powi(hidden as i32);
        let mut exp = [0.0; 2];
        let mut board = [0u32; 4];
        board[..revealed.len()].copy_from_slice(&revealed);
        for code in 0..(m as usize).pow(hidden as u32) {
            let mut c = code;
            for slot in board.iter_mut().skip(revealed.len()) {
                *slot = (c % m as usize) as u32 + 1;
                c /= m as usize;
            }
            exp[0] += spec.reward(&board, GUESS_TOP);
            exp[1] += spec.reward(&board, GUESS_BOTTOM);
        }
        let mut best = (exp[0] / count, GUESS_TOP);
        if exp[1] / count > best.0 {
            best = (exp[1] / count, GUESS_BOTTOM);
        }
        if stage < STAGES {
            let mut cont = 0.0;
            for v in 1..=m {
                let mut next = revealed.clone();
                next.push(v);
                let hn = g.infoset(stage + 1, &next).expect("next-stage infoset");
                cont += values[hn];
            }
            let reveal = cont / m as f64 - spec.reveal_costs[stage - 1];
            if reveal > best.0 {
                best = (reveal, REVEAL);
            }
        }
        values[h] = best.0;
        policy[h] = best.1;
    }
    DpSolution {
        value: values[0],
        policy,
        infoset_values: values,
    }
}

/// Result of reading a decision-level CSV: the trajectories plus one message
/// per skipped row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub data: Vec<ObservedPlay>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CsvRow {
    subject: String,
    episode: String,
    age_bin: String,
    education: String,
    stage: String,
    revealed: String,
    action: String,
}

pub const CSV_HEADER: [&str; 7] = ["subject", "episode", "age_bin", "education", "stage", "revealed", "action"];

/// One-hot age bin and education level.
pub fn encode_features(age_bin: usize, education: usize) -> Vec<f64> {
    let mut f = vec![0.0; FEATURE_DIM];
    f[age_bin] = 1.0;
    f[AGE_BINS + education] = 1.0;
    f
}

fn decode_features(f: &[f64]) -> Option<(usize, usize)> {
    if f.len() != FEATURE_DIM {
        return None;
    }
    let age = f[..AGE_BINS].iter().position(|x| *x == 1.0)?;
    let edu = f[AGE_BINS..].iter().position(|x| *x == 1.0)?;
    Some((age, edu))
}

fn parse_row(g: &InfoGathering, row: &CsvRow) -> std::result::Result<(Vec<f64>, ActionRecord), String> {
    let age: usize = row
        .age_bin
        .trim()
        .parse()
        .ok()
        .filter(|a| *a < AGE_BINS)
        .ok_or_else(|| format!("age bin {:?} is not in 0..{AGE_BINS}", row.age_bin))?;
    let edu = EDUCATION
        .iter()
        .position(|e| *e == row.education.trim())
        .ok_or_else(|| format!("unknown education level {:?}", row.education))?;
    let stage: usize = row
        .stage
        .trim()
        .parse()
        .ok()
        .filter(|s| (1..=STAGES).contains(s))
        .ok_or_else(|| format!("stage {:?} is not in 1..={STAGES}", row.stage))?;
    let revealed: Vec<u32> = if row.revealed.trim().is_empty() {
        Vec::new()
    } else {
        row.revealed
            .split(';')
            .map(|v| v.trim().parse::<u32>().map_err(|_| format!("bad card value {v:?}")))
            .collect::<std::result::Result<_, _>>()?
    };
    if revealed.len() != stage - 1 {
        return Err(format!("stage {stage} needs {} revealed cards, got {}", stage - 1, revealed.len()));
    }
    let action = ACTION_NAMES
        .iter()
        .position(|a| *a == row.action.trim())
        .ok_or_else(|| format!("unknown action {:?}", row.action))?;
    if stage == STAGES && action == REVEAL {
        return Err("reveal is not available at the last stage".into());
    }
    let infoset = g
        .infoset(stage, &revealed)
        .ok_or_else(|| format!("no infoset for stage {stage} with revealed {revealed:?}"))?;
    Ok((
        encode_features(age, edu),
        ActionRecord {
            player: Player::Min,
            infoset,
            action,
        },
    ))
}

/// Reads per-decision rows and groups them into trajectories by subject and
/// episode, in order of first appearance. Malformed rows are skipped and
/// reported.
pub fn ingest_info_gathering_csv(g: &InfoGathering, path: impl AsRef<Path>) -> Result<IngestReport> {
    let text = std::fs::read_to_string(path)?;
    ingest_info_gathering_str(g, &text)
}

pub fn ingest_info_gathering_str(g: &InfoGathering, text: &str) -> Result<IngestReport> {
    let mut report = IngestReport::default();
    if text.trim().is_empty() {
        return Ok(report);
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidObservation(format!(
            "expected header {}, found {}",
            CSV_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    for (i, rec) in reader.deserialize::<CsvRow>().enumerate() {
        let line = i + 2;
        let row = match rec {
            Ok(r) => r,
            Err(e) => {
                report.errors.push(format!("line {line}: {e}"));
                continue;
            }
        };
        match parse_row(g, &row) {
            Ok((features, record)) => {
                let key = (row.subject.clone(), row.episode.clone());
                let slot = *index.entry(key).or_insert_with(|| {
                    report.data.push(ObservedPlay {
                        features,
                        records: Vec::new(),
                    });
                    report.data.len() - 1
                });
                report.data[slot].records.push(record);
            }
            Err(msg) => report.errors.push(format!("line {line}: {msg}")),
        }
    }
    for msg in &report.errors {
        log::warn!("skipped row: {msg}");
    }
    Ok(report)
}

/// Writes trajectories with one-hot features in the ingest format; trajectory
/// `i` becomes subject `i`, episode 0.
pub fn write_info_gathering_csv(g: &InfoGathering, data: &[ObservedPlay], out: impl Write) -> Result<()> {
    // The header is written by hand so that an empty dataset still gets one.
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (i, obs) in data.iter().enumerate() {
        let (age, edu) = decode_features(&obs.features)
            .ok_or_else(|| Error::InvalidObservation(format!("trajectory {i} lacks one-hot features")))?;
        for r in &obs.records {
            let (stage, revealed) = g.describe(r.infoset);
            let vals: Vec<String> = revealed.iter().map(|v| v.to_string()).collect();
            w.serialize(CsvRow {
                subject: i.to_string(),
                episode: "0".into(),
                age_bin: age.to_string(),
                education: EDUCATION[edu].into(),
                stage: stage.to_string(),
                revealed: vals.join(";"),
                action: ACTION_NAMES[r.action].into(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}
