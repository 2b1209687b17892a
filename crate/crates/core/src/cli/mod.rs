//! The `active-search` command-line tool.
//!
//! Every subcommand writes its outputs plus one `manifest.json` into the
//! `--out` directory. Exit codes: 0 success, 1 usage, 2 invalid input,
//! 3 runtime failure.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub use manifest::RunManifest;

use crate::bench::{measure_overhead, overhead_scaling};
use crate::classifier::{OracleScorer, Scorer, TableScorer};
use crate::dataio::synthetic::{generate_synthetic, SyntheticConfig};
use crate::dataio::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    curve_from_episodes, evaluate_detections, nms_per_image, plot, regular_checkpoints, run_policy,
    tune_hyperparameters, BudgetCurve, FoldForest, Policy, SearchSetup, TuneConfig, TuneGrid,
};
use crate::export;
use crate::forest::{train_forest, ForestConfig, ForestModel, TreeConfig};
use crate::search::{run_episode_with, Episode, EpisodeOptions, Hyperparameters, IterationCost};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "active-search", version, about = "Active window search for object detection")]
pub struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic train and test datasets.
    Generate(GenerateArgs),
    /// Train the context forest for one class.
    Train(TrainArgs),
    /// Run search episodes and export traces and detections.
    Search(SearchArgs),
    /// Compute AP and AP-versus-budget curves.
    Evaluate(EvaluateArgs),
    /// Cross-validated grid search over the search hyperparameters.
    Tune(TuneArgs),
    /// Measure per-iteration overhead of the forest query and belief update.
    Benchmark(BenchmarkArgs),
    /// Render curves or a belief snapshot as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// TOML generator config; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "object")]
    pub class: String,
    #[arg(long, default_value_t = 10)]
    pub trees: usize,
    #[arg(long, default_value_t = 40)]
    pub images_per_tree: usize,
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
    #[arg(long, default_value_t = 15)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 5)]
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Active,
    Random,
    Exhaustive,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    /// JSON hyperparameters as written by `tune` (overrides the flags).
    #[arg(long)]
    pub theta: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_s: f64,
    #[arg(long, default_value_t = 0.316)]
    pub sigma_c: f64,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Forest model; required by the active policy.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `oracle:<noise>` or `table:<dir>`.
    #[arg(long, default_value = "oracle:0.05")]
    pub scorer: String,
    #[arg(long, default_value = "object")]
    pub class: String,
    #[arg(long, value_enum, default_value_t = PolicyArg::Active)]
    pub policy: PolicyArg,
    #[command(flatten)]
    pub theta: ThetaArgs,
    /// Evaluations per image; all proposals when absent.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Iterations after which belief maps are exported, e.g. `1,10,50`.
    #[arg(long, value_delimiter = ',')]
    pub emit_belief_snapshots: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset holding the ground truth.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "object")]
    pub class: String,
    /// Episode traces from `search`; enables budget curves.
    #[arg(long, conflicts_with = "detections")]
    pub traces: Option<PathBuf>,
    /// Flat detections file; only the final AP is computed.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    /// Checkpoint spacing for budget curves.
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    /// Explicit checkpoints, overriding `--step`.
    #[arg(long, value_delimiter = ',')]
    pub checkpoints: Vec<usize>,
    /// Curve label.
    #[arg(long, default_value = "search")]
    pub label: String,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Shared forest for every fold; without it a forest is trained per
    /// fold on the remaining folds.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "oracle:0.05")]
    pub scorer: String,
    #[arg(long, default_value = "object")]
    pub class: String,
    #[arg(long, default_value_t = 2)]
    pub folds: usize,
    #[arg(long, default_value_t = 125)]
    pub budget: usize,
    #[arg(long, default_value_t = 10)]
    pub step: usize,
    /// Comma-separated λ values (default grid when absent).
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sigma_s: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub sigma_c: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value = "oracle:0.05")]
    pub scorer: String,
    #[arg(long, default_value = "object")]
    pub class: String,
    #[command(flatten)]
    pub theta: ThetaArgs,
    #[arg(long, default_value_t = 350)]
    pub budget: usize,
    /// Images to time (from the start of the dataset).
    #[arg(long, default_value_t = 20)]
    pub images: usize,
    /// Also time synthetic scenes of these proposal counts and fit a line.
    #[arg(long, value_delimiter = ',')]
    pub scaling: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Curve file from `evaluate`.
    #[arg(long)]
    pub curves: Vec<PathBuf>,
    /// Belief snapshot file from `search`.
    #[arg(long, requires_all = ["dataset", "image"])]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub image: Option<String>,
    #[arg(long, default_value = "object")]
    pub class: String,
    #[arg(long, default_value = "AP versus evaluated windows")]
    pub title: String,
}

/// Process entry point; returns the exit code.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::param("jobs", "must be at least 1"));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    fs::create_dir_all(&cli.out)?;
    let started = Instant::now();
    let mut m = match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a)?,
        Command::Train(a) => cmd_train(cli, a)?,
        Command::Search(a) => cmd_search(cli, a)?,
        Command::Evaluate(a) => cmd_evaluate(cli, a)?,
        Command::Tune(a) => cmd_tune(cli, a)?,
        Command::Benchmark(a) => cmd_benchmark(cli, a)?,
        Command::Plot(a) => cmd_plot(cli, a)?,
    };
    m.seeds.insert("master".into(), cli.seed);
    m.wall_clock_s = started.elapsed().as_secs_f64();
    m.write(&cli.out)
}

/// Builds a scorer from `oracle:<noise>` or `table:<dir>`.
pub fn parse_scorer(spec: &str, class: &str, dataset: &Dataset, seed: u64) -> Result<Box<dyn Scorer>> {
    let bad = || {
        Error::param(
            "scorer",
            format!("expected `oracle:<noise>` or `table:<dir>`, got `{spec}`"),
        )
    };
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    match kind {
        "oracle" => {
            let noise: f64 = arg.parse().map_err(|_| bad())?;
            Ok(Box::new(OracleScorer::new(class, noise, seed)?))
        }
        "table" => Ok(Box::new(TableScorer::load_dir(Path::new(arg), dataset)?)),
        _ => Err(bad()),
    }
}

fn load_theta(a: &ThetaArgs, budget: usize) -> Result<Hyperparameters> {
    let theta = match &a.theta {
        Some(p) => {
            let h: Hyperparameters = serde_json::from_str(&fs::read_to_string(p)?)?;
            h.with_budget(budget)
        }
        None => Hyperparameters {
            lambda: a.lambda,
            sigma_s: a.sigma_s,
            sigma_c: a.sigma_c,
            budget,
        },
    };
    theta.validate()?;
    Ok(theta)
}

fn require_class(dataset: &Dataset, class: &str) -> Result<()> {
    if !dataset.has_class(class) {
        return Err(Error::NoTrainingData(class.to_string()));
    }
    Ok(())
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<RunManifest> {
    let mut cfg = match &a.config {
        Some(p) => SyntheticConfig::load(p)?,
        None => SyntheticConfig::default(),
    };
    if a.config.is_none() {
        cfg.seed = cli.seed;
    }
    let data = generate_synthetic(&cfg)?;
    let mut m = RunManifest::new("generate", serde_json::to_value(&cfg)?);
    m.seeds.insert("generator".into(), cfg.seed);
    if let Some(p) = &a.config {
        m.add_input(p);
    }
    let train = cli.out.join("train.jsonl");
    let test = cli.out.join("test.jsonl");
    let config = cli.out.join("config.toml");
    data.train.save(&train)?;
    data.test.save(&test)?;
    fs::write(&config, cfg.to_toml_string())?;
    for p in [&train, &test, &config] {
        m.add_output(p)?;
    }
    println!(
        "generated {} train and {} test scenes in {}",
        data.train.len(),
        data.test.len(),
        cli.out.display()
    );
    Ok(m)
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<RunManifest> {
    let dataset = load_dataset(&a.dataset)?;
    require_class(&dataset, &a.class)?;
    let config = ForestConfig {
        num_trees: a.trees,
        images_per_tree: a.images_per_tree,
        tree: TreeConfig {
            candidates_per_node: a.candidates,
            max_depth: a.max_depth,
            min_leaf: a.min_leaf,
        },
    };
    let model = train_forest(&dataset, &a.class, &config, cli.seed)?;
    let path = cli.out.join("model.json");
    model.save(&path)?;
    let mut m = RunManifest::new("train", json!({ "class": a.class, "forest": config }));
    m.seeds.insert("forest".into(), cli.seed);
    m.add_input(&a.dataset);
    m.add_output(&path)?;
    println!(
        "trained {} trees (max depth {}) for `{}` -> {}",
        model.num_trees(),
        model.trees().iter().map(|t| t.depth()).max().unwrap_or(0),
        a.class,
        path.display()
    );
    Ok(m)
}

fn timing_summary(episodes: &[Episode]) -> serde_json::Value {
    let costs: Vec<&IterationCost> = episodes.iter().flat_map(|e| &e.costs).collect();
    let n = costs.len().max(1) as f64;
    json!({
        "iterations": costs.len(),
        "mean_forest_ns": costs.iter().map(|c| c.forest_ns as f64).sum::<f64>() / n,
        "mean_update_ns": costs.iter().map(|c| c.update_ns as f64).sum::<f64>() / n,
    })
}

fn cmd_search(cli: &Cli, a: &SearchArgs) -> Result<RunManifest> {
    let dataset = load_dataset(&a.dataset)?;
    let scorer = parse_scorer(&a.scorer, &a.class, &dataset, cli.seed)?;
    let max_n = dataset.images().iter().map(|i| i.proposals.len()).max().unwrap_or(0);
    let budget = a.budget.unwrap_or(max_n);
    if budget == 0 {
        return Err(Error::param("budget", "must be at least 1"));
    }
    let mut m = RunManifest::new("search", json!({}));
    m.add_input(&a.dataset);

    let episodes: Vec<Episode> = match a.policy {
        PolicyArg::Active => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| Error::param("model", "the active policy needs --model"))?;
            let forest = ForestModel::load(path)?;
            m.add_input(path);
            let theta = load_theta(&a.theta, budget)?;
            let start = match forest.start_window() {
                Some(w) => w,
                None => crate::search::initial_window(&dataset, &a.class)?,
            };
            let options = EpisodeOptions {
                snapshots: a.emit_belief_snapshots.clone(),
                memo: None,
            };
            m.config = json!({ "policy": "active", "theta": theta, "scorer": a.scorer, "class": a.class,
                               "start_window": start, "snapshots": a.emit_belief_snapshots });
            use rayon::prelude::*;
            dataset
                .images()
                .par_iter()
                .map(|img| run_episode_with(img, &forest, scorer.as_ref(), &theta, &start, &options))
                .collect::<Result<Vec<_>>>()?
        }
        policy => {
            if !a.emit_belief_snapshots.is_empty() {
                return Err(Error::param(
                    "emit_belief_snapshots",
                    "only the active policy keeps beliefs",
                ));
            }
            let p = if policy == PolicyArg::Random {
                Policy::Random { seed: cli.seed }
            } else {
                Policy::Exhaustive
            };
            m.config = json!({ "policy": p, "budget": budget, "scorer": a.scorer, "class": a.class });
            let setup = SearchSetup {
                forest: None,
                scorer: scorer.as_ref(),
                start: crate::geometry::Window::clamped(0.0, 0.0, 1.0, 1.0),
            };
            run_policy(&dataset, &setup, &p, budget)?
        }
    };

    let traces = cli.out.join("traces.tsv");
    let detections = cli.out.join("detections.tsv");
    export::write_traces(&traces, &episodes)?;
    let dets: Vec<_> = episodes.iter().flat_map(|e| e.detections()).collect();
    export::write_detections(&detections, &dets)?;
    m.add_output(&traces)?;
    m.add_output(&detections)?;
    if !a.emit_belief_snapshots.is_empty() {
        let dir = cli.out.join("snapshots");
        fs::create_dir_all(&dir)?;
        for e in &episodes {
            for s in &e.snapshots {
                let p = dir.join(format!("{}.t{}.tsv", e.image_id, s.t));
                export::write_snapshot(&p, s)?;
                m.add_output(&p)?;
            }
        }
    }
    m.timing = Some(timing_summary(&episodes));
    let evals: usize = episodes.iter().map(|e| e.evaluations()).sum();
    println!(
        "{} episodes, {evals} classifier evaluations -> {}",
        episodes.len(),
        cli.out.display()
    );
    Ok(m)
}

fn episodes_from_traces(rows: Vec<(String, Vec<crate::search::TraceStep>)>) -> Vec<Episode> {
    rows.into_iter()
        .map(|(id, trace)| Episode {
            image_id: id,
            theta: None,
            policy: String::new(),
            costs: Vec::new(),
            trace,
            snapshots: Vec::new(),
            final_beliefs: Vec::new(),
        })
        .collect()
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<RunManifest> {
    let dataset = load_dataset(&a.dataset)?;
    let gt = dataset.ground_truth(&a.class);
    let mut m = RunManifest::new("evaluate", json!({ "class": a.class, "label": a.label }));
    m.add_input(&a.dataset);
    let report = cli.out.join("report.json");
    let mut summary = BTreeMap::new();
    if let Some(tp) = &a.traces {
        m.add_input(tp);
        let episodes = episodes_from_traces(export::read_traces(tp)?);
        let longest = episodes.iter().map(|e| e.trace.len()).max().unwrap_or(0);
        let checkpoints = if a.checkpoints.is_empty() {
            regular_checkpoints(a.step, longest)
        } else {
            a.checkpoints.clone()
        };
        let curve = curve_from_episodes(&episodes, &gt, &a.class, &a.label, &checkpoints)?;
        let curve_path = cli.out.join("curve.tsv");
        export::write_curves(&curve_path, std::slice::from_ref(&curve))?;
        m.add_output(&curve_path)?;
        let dets = crate::eval::detections_at(&episodes, usize::MAX);
        summary.insert("ap", json!(evaluate_detections(&dets, &gt)?));
        summary.insert("auc", json!(curve.auc()));
        summary.insert("checkpoints", json!(curve.points.len()));
        println!(
            "AP {:.4}, AUC {:.4} over {} checkpoints",
            summary["ap"],
            curve.auc(),
            curve.points.len()
        );
    } else if let Some(dp) = &a.detections {
        m.add_input(dp);
        let dets = export::read_detections(dp)?;
        let kept = nms_per_image(&dets, crate::eval::NMS_THRESHOLD);
        let ap = evaluate_detections(&dets, &gt)?;
        summary.insert("ap", json!(ap));
        summary.insert("detections", json!(dets.len()));
        summary.insert("after_nms", json!(kept.len()));
        println!("AP {ap:.4} ({} detections, {} after NMS)", dets.len(), kept.len());
    } else {
        return Err(Error::param("traces", "pass --traces or --detections"));
    }
    fs::write(&report, serde_json::to_string_pretty(&summary)?)?;
    m.add_output(&report)?;
    Ok(m)
}

fn cmd_tune(cli: &Cli, a: &TuneArgs) -> Result<RunManifest> {
    let dataset = load_dataset(&a.dataset)?;
    require_class(&dataset, &a.class)?;
    let scorer = parse_scorer(&a.scorer, &a.class, &dataset, cli.seed)?;
    let defaults = TuneGrid::default();
    let pick = |v: &Vec<f64>, d: Vec<f64>| if v.is_empty() { d } else { v.clone() };
    let grid = TuneGrid {
        lambdas: pick(&a.lambdas, defaults.lambdas),
        sigma_s: pick(&a.sigma_s, defaults.sigma_s),
        sigma_c: pick(&a.sigma_c, defaults.sigma_c),
    };
    let config = TuneConfig {
        grid,
        folds: a.folds,
        checkpoints: regular_checkpoints(a.step, a.budget),
        seed: cli.seed,
    };
    let forest_config = ForestConfig::default();
    let mut m = RunManifest::new("tune", json!({ "tune": config, "scorer": a.scorer, "class": a.class }));
    m.add_input(&a.dataset);
    let model;
    let source = match &a.model {
        Some(p) => {
            model = ForestModel::load(p)?;
            m.add_input(p);
            FoldForest::Shared(&model)
        }
        None => FoldForest::Retrain {
            config: &forest_config,
            seed: cli.seed,
        },
    };
    let result = tune_hyperparameters(&dataset, &a.class, source, scorer.as_ref(), &config)?;
    let path = cli.out.join("theta.json");
    fs::write(&path, serde_json::to_string_pretty(&result.best)?)?;
    m.add_output(&path)?;
    m.results = Some(json!({ "best": result.best, "best_auc": result.best_auc, "grid": result.scores }));
    println!(
        "best lambda={} sigma_s={} sigma_c={} (AUC {:.4}) -> {}",
        result.best.lambda,
        result.best.sigma_s,
        result.best.sigma_c,
        result.best_auc,
        path.display()
    );
    Ok(m)
}

fn cmd_benchmark(cli: &Cli, a: &BenchmarkArgs) -> Result<RunManifest> {
    let dataset = load_dataset(&a.dataset)?;
    let forest = ForestModel::load(&a.model)?;
    let scorer = parse_scorer(&a.scorer, &a.class, &dataset, cli.seed)?;
    let theta = load_theta(&a.theta, a.budget)?;
    let start = match forest.start_window() {
        Some(w) => w,
        None => crate::search::initial_window(&dataset, &a.class)?,
    };
    let images = &dataset.images()[..a.images.min(dataset.len())];
    let report = measure_overhead(images, &forest, scorer.as_ref(), &theta, &start)?;
    let mut m = RunManifest::new(
        "benchmark",
        json!({ "theta": theta, "images": images.len(), "scorer": a.scorer }),
    );
    m.add_input(&a.dataset);
    m.add_input(&a.model);
    let scaling = if a.scaling.is_empty() {
        None
    } else {
        Some(overhead_scaling(
            &a.scaling,
            &SyntheticConfig {
                seed: cli.seed,
                ..SyntheticConfig::default()
            },
            5,
            &forest,
            scorer.as_ref(),
            &theta,
            &start,
        )?)
    };
    let out = cli.out.join("benchmark.json");
    let body = json!({ "overhead": report, "scaling": scaling, "scorer_cost": scorer.cost_label() });
    fs::write(&out, serde_json::to_string_pretty(&body)?)?;
    m.add_output(&out)?;
    m.timing = Some(json!({ "mean_ns": report.mean_ns, "median_ns": report.median_ns,
                            "mean_forest_ns": report.mean_forest_ns, "mean_update_ns": report.mean_update_ns }));
    println!(
        "per-iteration overhead: mean {:.1} us, median {:.1} us (forest {:.1} us, update {:.1} us); {:.1} distance evals/iteration",
        report.mean_ns / 1e3,
        report.median_ns / 1e3,
        report.mean_forest_ns / 1e3,
        report.mean_update_ns / 1e3,
        report.mean_distance_evals
    );
    if let Some(s) = &scaling {
        for p in &s.points {
            println!(
                "  N={:>5}: {:.1} us/iteration (fit {:.1})",
                p.proposals,
                p.mean_ns / 1e3,
                p.fitted_ns / 1e3
            );
        }
    }
    Ok(m)
}

fn cmd_plot(cli: &Cli, a: &PlotArgs) -> Result<RunManifest> {
    let mut m = RunManifest::new("plot", json!({ "title": a.title }));
    if a.curves.is_empty() && a.snapshot.is_none() {
        return Err(Error::param("curves", "pass --curves or --snapshot"));
    }
    if !a.curves.is_empty() {
        let mut curves: Vec<BudgetCurve> = Vec::new();
        for p in &a.curves {
            curves.extend(export::read_curves(p)?);
            m.add_input(p);
        }
        let out = cli.out.join("curves.svg");
        fs::write(&out, plot::curves_svg(&curves, &a.title))?;
        m.add_output(&out)?;
    }
    if let (Some(snap), Some(dp), Some(id)) = (&a.snapshot, &a.dataset, &a.image) {
        let dataset = load_dataset(dp)?;
        let img = dataset
            .get(id)
            .ok_or_else(|| Error::param("image", format!("no image `{id}` in the dataset")))?;
        let beliefs = export::read_snapshot(snap)?;
        if beliefs.len() != img.proposals.len() {
            return Err(Error::input(format!(
                "snapshot has {} beliefs, image has {} proposals",
                beliefs.len(),
                img.proposals.len()
            )));
        }
        let windows: Vec<_> = img.proposals.iter().map(|p| p.window).collect();
        let out = cli.out.join("beliefs.svg");
        fs::write(&out, plot::belief_svg(&windows, &beliefs, img.boxes(&a.class), id))?;
        m.add_input(snap);
        m.add_input(dp);
        m.add_output(&out)?;
    }
    Ok(m)
}
