//! Cross-validated grid search over λ, σ_S and σ_C on a small training set,
//! printing every grid point's mean AUC.
//!
//! `cargo run --release --example tuning_grid`

use active_search::classifier::OracleScorer;
use active_search::dataio::synthetic::{generate_synthetic, SyntheticConfig};
use active_search::eval::{regular_checkpoints, tune_hyperparameters, FoldForest, TuneConfig, TuneGrid};
use active_search::forest::ForestConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_synthetic(&SyntheticConfig {
        train_scenes: 60,
        test_scenes: 0,
        proposals_per_image: 200,
        ..SyntheticConfig::default()
    })?;
    let scorer = OracleScorer::new("object", 0.0, 0)?;
    let config = TuneConfig {
        grid: TuneGrid {
            lambdas: vec![0.0, 0.5, 0.75, 1.0],
            sigma_s: vec![0.01, 0.1],
            sigma_c: vec![0.01, 0.1, 1.0],
        },
        folds: 2,
        checkpoints: regular_checkpoints(10, 50),
        seed: 1,
    };
    let forest_config = ForestConfig::default();
    let result = tune_hyperparameters(
        &data.train,
        "object",
        FoldForest::Retrain {
            config: &forest_config,
            seed: 2,
        },
        &scorer,
        &config,
    )?;

    let mut scores = result.scores.clone();
    scores.sort_by(|a, b| b.auc.total_cmp(&a.auc));
    println!("{:>6} {:>7} {:>7} {:>7}  folds", "lambda", "sigma_s", "sigma_c", "AUC");
    for s in &scores {
        println!(
            "{:>6} {:>7} {:>7} {:>7.4}  {:?}",
            s.theta.lambda,
            s.theta.sigma_s,
            s.theta.sigma_c,
            s.auc,
            s.fold_aucs.iter().map(|a| (a * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
    println!(
        "\nselected lambda={} sigma_s={} sigma_c={}",
        result.best.lambda, result.best.sigma_s, result.best.sigma_c
    );
    Ok(())
}
