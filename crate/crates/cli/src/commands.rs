use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nlqre::bench::{run_suite, summarize, BenchRecord, BenchSuite, BenchSummary, Phase};
use nlqre::learning::{sample_dataset, EpochRecord};
use nlqre::solution::SolveDiagnostics;
use nlqre::zoo::info_gathering::{encode_features, ingest_info_gathering_csv, write_info_gathering_csv, AGE_BINS};
use nlqre::zoo::info_gathering::EDUCATION;
use nlqre::{
    solve as solve_game, Game, LambdaModel, ObservedPlay, RationalityParams, SolveOptions, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::output::{config_hash, write_csv, write_json};
use crate::source::GameSource;
use crate::{Global, SolverFlags};

impl SolverFlags {
    fn apply(&self, mut opts: SolveOptions) -> SolveOptions {
        if let Some(s) = self.solver {
            opts.solver = s.into();
        }
        if let Some(t) = self.tau {
            opts.tau = t;
        }
        if let Some(t) = self.gap_tol {
            opts.gap_tol = t;
        }
        if let Some(t) = self.residual_tol {
            opts.residual_tol = t;
        }
        opts
    }
}

fn resolve_lambda(game: &Game, arg: Option<&str>) -> Result<RationalityParams> {
    match arg {
        Some(s) => match s.parse::<f64>() {
            Ok(x) => Ok(RationalityParams::constant(game, x)),
            Err(_) => {
                let text = fs::read_to_string(s).with_context(|| format!("reading lambda file {s}"))?;
                let l: RationalityParams = serde_json::from_str(&text).with_context(|| format!("parsing {s}"))?;
                l.validate(game)?;
                Ok(l)
            }
        },
        None => Ok(game.lambda().cloned().unwrap_or_else(|| RationalityParams::constant(game, 1.0))),
    }
}

#[derive(Serialize)]
struct SolveConfig<'a> {
    game: &'a str,
    seed: u64,
    lambda: &'a RationalityParams,
    options: &'a SolveOptions,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    game: &'a str,
    seed: u64,
    config_hash: String,
    solver: &'static str,
    value: f64,
    behavioral_u: Vec<Vec<f64>>,
    behavioral_v: Vec<Vec<f64>>,
    u: &'a [f64],
    v: &'a [f64],
    diagnostics: SolveDiagnostics,
}

pub fn solve(g: &Global, game_arg: &str, lambda: Option<&str>, flags: &SolverFlags) -> Result<()> {
    let game = GameSource::parse(game_arg)?.load(g.seed)?.game;
    let lambda = resolve_lambda(&game, lambda)?;
    let opts = flags.apply(SolveOptions::default());
    let hash = config_hash(&SolveConfig {
        game: game_arg,
        seed: g.seed,
        lambda: &lambda,
        options: &opts,
    })?;
    let sol = solve_game(&game, &lambda, &opts).context("solving")?;
    let mut diagnostics = sol.diagnostics.clone();
    diagnostics.trace.clear();
    write_json(
        g.out.as_deref(),
        &SolveOutput {
            game: game_arg,
            seed: g.seed,
            config_hash: hash,
            solver: opts.solver.name(),
            value: sol.value(&game),
            behavioral_u: sol.behavioral_u(&game),
            behavioral_v: sol.behavioral_v(&game),
            u: &sol.u,
            v: &sol.v,
            diagnostics,
        },
    )
}

pub struct BenchFlags {
    pub suite: Option<PathBuf>,
    pub depths: Option<Vec<usize>>,
    pub sizes: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub tau: Option<f64>,
    pub summary: Option<PathBuf>,
    pub skip_forward: bool,
    pub skip_backward: bool,
}

#[derive(Serialize)]
struct BenchRow {
    game_id: String,
    depth: usize,
    actions: usize,
    trial: usize,
    solver: String,
    phase: Phase,
    wall_seconds: f64,
    iterations: usize,
    achieved: f64,
    target: f64,
    sequences_u: usize,
    sequences_v: usize,
    seed: u64,
    config_hash: String,
}

impl BenchRow {
    fn new(r: BenchRecord, hash: &str) -> Self {
        BenchRow {
            game_id: r.game_id,
            depth: r.depth,
            actions: r.actions,
            trial: r.trial,
            solver: r.solver,
            phase: r.phase,
            wall_seconds: r.wall_seconds,
            iterations: r.iterations,
            achieved: r.achieved,
            target: r.target,
            sequences_u: r.sequences_u,
            sequences_v: r.sequences_v,
            seed: r.seed,
            config_hash: hash.to_string(),
        }
    }
}

#[derive(Serialize)]
struct SummaryRow {
    #[serde(flatten)]
    summary: BenchSummary,
    seed: u64,
    config_hash: String,
}

pub fn bench(g: &Global, f: BenchFlags) -> Result<()> {
    let mut suite = match &f.suite {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading suite {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing suite {}", p.display()))?
        }
        None => BenchSuite::default(),
    };
    if let Some(d) = f.depths {
        suite.depths = d;
    }
    if let Some(s) = f.sizes {
        suite.sizes = s;
    }
    if let Some(t) = f.trials {
        suite.trials = t;
    }
    if let Some(t) = f.tau {
        suite.forward_tau = t;
        suite.backward_tau = t;
    }
    if f.suite.is_none() || g.seed != 0 {
        suite.seed = g.seed;
    }
    suite.run_forward &= !f.skip_forward;
    suite.run_backward &= !f.skip_backward;
    let hash = config_hash(&suite)?;
    let (records, skipped) = run_suite(&suite)?;
    for s in &skipped {
        eprintln!("skipped {s}");
    }
    if let Some(p) = &f.summary {
        let rows: Vec<SummaryRow> = summarize(&records)
            .into_iter()
            .map(|summary| SummaryRow {
                summary,
                seed: suite.seed,
                config_hash: hash.clone(),
            })
            .collect();
        write_summary(p, &rows)?;
    }
    let rows: Vec<BenchRow> = records.into_iter().map(|r| BenchRow::new(r, &hash)).collect();
    write_csv(g.out.as_deref(), &rows)
}

// The csv serializer does not support flattened structs, so summary rows
// are written as explicit records.
fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "depth",
        "actions",
        "phase",
        "solver",
        "trials",
        "mean_seconds",
        "std_seconds",
        "mean_speedup",
        "std_speedup",
        "seed",
        "config_hash",
    ])?;
    for r in rows {
        let s = &r.summary;
        w.write_record([
            s.depth.to_string(),
            s.actions.to_string(),
            s.phase.name().to_string(),
            s.solver.clone(),
            s.trials.to_string(),
            s.mean_seconds.to_string(),
            s.std_seconds.to_string(),
            s.mean_speedup.to_string(),
            s.std_speedup.to_string(),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ground-truth model and dataset sizes for training on sampled play.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Synthetic {
    /// Ground-truth weights are drawn uniformly from `[truth_low, truth_high]`.
    pub truth_low: f64,
    pub truth_high: f64,
    pub num_features: usize,
    /// Features are drawn uniformly from `[feature_low, feature_high]`.
    pub feature_low: f64,
    pub feature_high: f64,
    pub train: usize,
    pub test: usize,
}

impl Default for Synthetic {
    fn default() -> Self {
        Synthetic {
            truth_low: 0.0,
            truth_high: 0.01,
            num_features: 1,
            feature_low: 0.0,
            feature_high: 1.0,
            train: 2000,
            test: 1000,
        }
    }
}

/// A training run. Either `synthetic` or both data files must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRun {
    pub game: String,
    pub synthetic: Option<Synthetic>,
    /// Dataset JSON files as written by `gen --samples` or `ingest`.
    pub train_data: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    /// Every initial weight.
    pub init_weight: f64,
    pub epsilon: f64,
    pub train: TrainConfig,
}

impl Default for TrainRun {
    fn default() -> Self {
        TrainRun {
            game: "poker:4".into(),
            synthetic: Some(Synthetic::default()),
            train_data: None,
            test_data: None,
            init_weight: 0.1,
            epsilon: nlqre::learning::DEFAULT_EPSILON,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    train_loss: f64,
    test_loss: f64,
    seed: u64,
    config_hash: String,
}

#[derive(Serialize)]
struct ModelFile<'a> {
    config_hash: &'a str,
    run: &'a TrainRun,
    truth: Option<&'a LambdaModel>,
    model: &'a LambdaModel,
    skipped: usize,
    /// Per-epoch wall-clock seconds; kept out of the loss CSV so reruns
    /// produce identical files.
    epoch_seconds: Vec<f64>,
}

fn read_dataset(path: &Path) -> Result<Vec<ObservedPlay>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading dataset {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing dataset {}", path.display()))
}

pub fn train(
    g: &Global,
    config: Option<&Path>,
    game: Option<String>,
    epochs: Option<usize>,
    flags: &SolverFlags,
) -> Result<()> {
    let mut run: TrainRun = match config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
        }
        None => TrainRun::default(),
    };
    if let Some(game) = game {
        run.game = game;
    }
    if let Some(e) = epochs {
        run.train.epochs = e;
    }
    run.train.seed = g.seed;
    run.train.threads = g.threads;
    run.train.forward = flags.apply(run.train.forward.clone());
    let out = g.out.as_deref().context("train needs --out DIR")?;
    let hash = config_hash(&run)?;

    let loaded = GameSource::parse(&run.game)?.load(g.seed)?;
    let game = &loaded.game;
    let groups = game.lambda_groups();
    let (train_set, test_set, truth) = match (&run.synthetic, &run.train_data) {
        (_, Some(train_path)) => {
            let test = match &run.test_data {
                Some(p) => read_dataset(p)?,
                None => Vec::new(),
            };
            (read_dataset(train_path)?, test, None)
        }
        (Some(syn), None) => {
            let (tree, form) = loaded
                .tree
                .as_ref()
                .context("synthetic data needs a generated game with an explicit tree")?;
            ensure!(syn.truth_low <= syn.truth_high && syn.feature_low <= syn.feature_high, "empty sampling range");
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            let mut truth = LambdaModel::constant(groups.clone(), syn.num_features, 0.0, run.epsilon);
            for w in truth.weights.iter_mut().flatten() {
                *w = rng.random_range(syn.truth_low..=syn.truth_high);
            }
            let (lo, hi, k) = (syn.feature_low, syn.feature_high, syn.num_features);
            let feature = |r: &mut ChaCha8Rng| (0..k).map(|_| r.random_range(lo..=hi)).collect::<Vec<f64>>();
            let opts = &run.train.forward;
            let tr = sample_dataset(tree, form, &truth, feature, syn.train, g.seed.wrapping_add(1), opts)?;
            let te = sample_dataset(tree, form, &truth, feature, syn.test, g.seed.wrapping_add(2), opts)?;
            (tr, te, Some(truth))
        }
        (None, None) => bail!("training needs either `synthetic` or `train_data` in the configuration"),
    };
    let num_features = match (&truth, train_set.first()) {
        (Some(t), _) => t.num_features(),
        (None, Some(o)) => o.features.len(),
        (None, None) => bail!("training set is empty"),
    };
    let init = LambdaModel::constant(groups, num_features, run.init_weight, run.epsilon);
    let result = nlqre::train(game, init, &train_set, &test_set, &run.train)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let rows: Vec<LossRow> = result
        .history
        .iter()
        .map(|h: &EpochRecord| LossRow {
            epoch: h.epoch,
            train_loss: h.train_loss,
            test_loss: h.test_loss,
            seed: g.seed,
            config_hash: hash.clone(),
        })
        .collect();
    write_csv(Some(&out.join("loss.csv")), &rows)?;
    write_json(
        Some(&out.join("model.json")),
        &ModelFile {
            config_hash: &hash,
            run: &run,
            truth: truth.as_ref(),
            model: &result.model,
            skipped: result.skipped,
            epoch_seconds: result.history.iter().map(|h| h.wall_seconds).collect(),
        },
    )
}

pub fn gen(g: &Global, game_arg: &str, samples: Option<usize>, lambda: f64, flags: &SolverFlags) -> Result<()> {
    let loaded = GameSource::parse(game_arg)?.load(g.seed)?;
    let Some(n) = samples else {
        let json = loaded.game.to_json()?;
        return match &g.out {
            Some(p) => fs::write(p, json).with_context(|| format!("writing {}", p.display())),
            None => {
                println!("{json}");
                Ok(())
            }
        };
    };
    ensure!(lambda > 0.0, "--lambda must be positive, got {lambda}");
    let (tree, form) = loaded.tree.as_ref().context("sampling needs a generated game with an explicit tree")?;
    let groups = loaded.game.lambda_groups();
    let opts = flags.apply(SolveOptions::default());
    let data = match &loaded.info_gathering {
        // One-hot age and education features; the two active entries sum to lambda.
        Some(_) => {
            let model = LambdaModel::constant(groups, AGE_BINS + EDUCATION.len(), lambda / 2.0, 0.0);
            let feature = |r: &mut ChaCha8Rng| encode_features(r.random_range(0..AGE_BINS), r.random_range(0..EDUCATION.len()));
            sample_dataset(tree, form, &model, feature, n, g.seed, &opts)?
        }
        None => {
            let model = LambdaModel::constant(groups, 1, lambda, 0.0);
            sample_dataset(tree, form, &model, |_| vec![1.0], n, g.seed, &opts)?
        }
    };
    let csv_out = g.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e == "csv"));
    if csv_out {
        let ig = loaded.info_gathering.as_ref().context("CSV output is only defined for the information-gathering game")?;
        let p = g.out.as_ref().expect("checked above");
        let file = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_info_gathering_csv(ig, &data, file)?;
        return Ok(());
    }
    write_json(g.out.as_deref(), &data)
}

pub fn ingest(g: &Global, input: &Path, game_arg: &str) -> Result<()> {
    let loaded = GameSource::parse(game_arg)?.load(g.seed)?;
    let ig = loaded
        .info_gathering
        .as_ref()
        .context("ingest reads the information-gathering CSV format; use --game info-gathering[:cost]")?;
    ensure!(input.exists(), "input file {} does not exist", input.display());
    let report = ingest_info_gathering_csv(ig, input)?;
    for e in &report.errors {
        eprintln!("skipped: {e}");
    }
    log::info!("{} trajectories, {} rows skipped", report.data.len(), report.errors.len());
    write_json(g.out.as_deref(), &report.data)
}
