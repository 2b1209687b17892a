//! Per-iteration overhead of the search outside the classifier: the forest
//! query and the belief update, on 3200-proposal scenes with a 10-tree
//! forest, plus how the cost grows with the proposal count.
//!
//! `cargo run --release --example overhead_benchmark`

use active_search::bench::{measure_overhead, overhead_scaling};
use active_search::classifier::OracleScorer;
use active_search::dataio::synthetic::{generate_synthetic, SyntheticConfig};
use active_search::forest::{train_forest, ForestConfig};
use active_search::search::Hyperparameters;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = SyntheticConfig {
        train_scenes: 60,
        test_scenes: 0,
        ..SyntheticConfig::default()
    };
    let train = generate_synthetic(&base)?.train;
    let forest = train_forest(&train, "object", &ForestConfig::default(), 3)?;
    let start = forest.start_window().expect("trained forest");
    let scorer = OracleScorer::new("object", 0.05, 1)?;
    let theta = Hyperparameters::new(0.5, 0.1, 0.316, 350)?;

    let big = generate_synthetic(&SyntheticConfig {
        proposals_per_image: 3200,
        train_scenes: 0,
        test_scenes: 5,
        seed: 17,
        ..SyntheticConfig::default()
    })?;
    let r = measure_overhead(big.test.images(), &forest, &scorer, &theta, &start)?;
    println!("N = 3200, J = {}, {} iterations per episode", r.num_trees, theta.budget);
    println!(
        "  per iteration: mean {:.1} us, median {:.1} us",
        r.mean_ns / 1e3,
        r.median_ns / 1e3
    );
    println!(
        "  forest query {:.1} us, belief update {:.1} us",
        r.mean_forest_ns / 1e3,
        r.mean_update_ns / 1e3
    );
    println!(
        "  {:.1} distance evaluations per iteration, longest path {} (max depth {})",
        r.mean_distance_evals,
        r.max_evals_per_tree,
        forest.config().tree.max_depth
    );
    println!("  overhead per 350-iteration episode: {:.3} s", r.episode_overhead_s);

    let s = overhead_scaling(&[500, 1000, 2000], &base, 5, &forest, &scorer, &theta, &start)?;
    println!(
        "scaling (fit: {:.2} ns per proposal + {:.0} ns):",
        s.slope_ns_per_proposal, s.intercept_ns
    );
    for p in &s.points {
        println!(
            "  N = {:>4}: {:>8.1} us measured, {:>8.1} us fitted",
            p.proposals,
            p.mean_ns / 1e3,
            p.fitted_ns / 1e3
        );
    }
    println!("  worst measured/fitted ratio {:.2}", s.worst_ratio);
    Ok(())
}
