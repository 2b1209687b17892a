//! The full desk-scale benchmark: generate scenes, train the context
//! forest, tune the search hyperparameters on the training split, then
//! compare active search against random subsampling and single-force
//! ablations on the test split.
//!
//! `cargo run --release --example synthetic_benchmark [out_dir]`

use std::path::PathBuf;
use std::time::Instant;

use active_search::classifier::OracleScorer;
use active_search::dataio::synthetic::{generate_synthetic, SyntheticConfig};
use active_search::eval::{
    budget_curve, plot, random_mean_curve, regular_checkpoints, tune_hyperparameters, BudgetCurve, FoldForest, Policy,
    SearchSetup, TuneConfig, TuneGrid,
};
use active_search::export::write_curves;
use active_search::forest::{train_forest, ForestConfig};
use active_search::search::Hyperparameters;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "target/benchmark".into()));
    std::fs::create_dir_all(&out)?;
    let t0 = Instant::now();

    let cfg = SyntheticConfig::default();
    let data = generate_synthetic(&cfg)?;
    let class = cfg.class_name.as_str();
    let n = cfg.proposals_per_image;
    println!(
        "generated {} + {} scenes ({:.1}s)",
        data.train.len(),
        data.test.len(),
        t0.elapsed().as_secs_f64()
    );

    let forest_cfg = ForestConfig::default();
    let forest = train_forest(&data.train, class, &forest_cfg, 11)?;
    println!(
        "trained {} trees, depths {:?} ({:.1}s)",
        forest.num_trees(),
        forest.trees().iter().map(|t| t.depth()).collect::<Vec<_>>(),
        t0.elapsed().as_secs_f64()
    );

    let scorer = OracleScorer::new(class, 0.0, 0)?;
    let budget = n / 4;
    let tune_cfg = TuneConfig {
        grid: TuneGrid::default(),
        folds: 2,
        checkpoints: regular_checkpoints(10, budget),
        seed: 5,
    };
    let tuned = tune_hyperparameters(
        &data.train,
        class,
        FoldForest::Retrain {
            config: &forest_cfg,
            seed: 11,
        },
        &scorer,
        &tune_cfg,
    )?;
    let best = tuned.best;
    println!(
        "tuned: lambda={} sigma_s={:.4} sigma_c={:.4} AUC={:.4} ({:.1}s)",
        best.lambda,
        best.sigma_s,
        best.sigma_c,
        tuned.best_auc,
        t0.elapsed().as_secs_f64()
    );
    let best_at = |lambda: f64| {
        tuned
            .scores
            .iter()
            .filter(|s| s.theta.lambda == lambda)
            .max_by(|a, b| {
                a.auc
                    .total_cmp(&b.auc)
                    .then(b.theta.sigma_c.total_cmp(&a.theta.sigma_c))
            })
            .map(|s| s.theta)
            .expect("grid contains the boundary lambdas")
    };
    for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let b = tuned
            .scores
            .iter()
            .filter(|s| s.theta.lambda == lambda)
            .max_by(|a, b| a.auc.total_cmp(&b.auc))
            .unwrap();
        println!(
            "  best at lambda={lambda}: sigma_s={:.4} sigma_c={:.4} AUC={:.4}",
            b.theta.sigma_s, b.theta.sigma_c, b.auc
        );
    }

    let setup = SearchSetup {
        forest: Some(&forest),
        scorer: &scorer,
        start: forest.start_window().expect("trained forests carry a start window"),
    };
    let checkpoints = regular_checkpoints(10, n);
    let run = |theta: Hyperparameters, label: &str| -> Result<BudgetCurve, active_search::Error> {
        let mut c = budget_curve(&data.test, class, &setup, &Policy::Active(theta), &checkpoints)?;
        c.policy = label.to_string();
        Ok(c)
    };
    let combined = run(best, "combined")?;
    let context = run(best_at(0.0), "context only")?;
    let score = run(best_at(1.0), "score only")?;
    let random = random_mean_curve(&data.test, class, &scorer, &checkpoints, 20, 99)?;
    let exhaustive = combined.points.last().unwrap().1;

    println!("exhaustive AP {exhaustive:.4} ({:.1}s)", t0.elapsed().as_secs_f64());
    println!(
        "{:>8} {:>9} {:>9} {:>9} {:>9}",
        "budget", "combined", "context", "score", "random"
    );
    for (i, &b) in checkpoints.iter().enumerate() {
        if b.is_multiple_of(50) || b == budget {
            println!(
                "{b:>8} {:>9.4} {:>9.4} {:>9.4} {:>9.4}",
                combined.points[i].1, context.points[i].1, score.points[i].1, random.points[i].1
            );
        }
    }
    println!(
        "AUC: combined {:.4}, context {:.4}, score {:.4}, random {:.4}",
        combined.auc(),
        context.auc(),
        score.auc(),
        random.auc()
    );

    let curves = [combined, context, score, random];
    write_curves(&out.join("curves.tsv"), &curves)?;
    std::fs::write(out.join("curves.svg"), plot::curves_svg(&curves, "synthetic benchmark"))?;
    println!("wrote {} ({:.1}s)", out.display(), t0.elapsed().as_secs_f64());
    Ok(())
}
