//! Runs one active search episode and prints the first selections with the
//! classifier score and the belief each window had when it was picked.
//!
//! `cargo run --release --example search_episode [lambda sigma_s sigma_c]`

use active_search::classifier::OracleScorer;
use active_search::dataio::synthetic::{generate_synthetic, SyntheticConfig};
use active_search::forest::{train_forest, ForestConfig};
use active_search::geometry::iou;
use active_search::search::{run_episode_with, EpisodeOptions, Hyperparameters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_synthetic(&SyntheticConfig {
        train_scenes: 80,
        test_scenes: 1,
        ..SyntheticConfig::default()
    })?;
    let forest = train_forest(&data.train, "object", &ForestConfig::default(), 3)?;
    let img = &data.test.images()[0];
    let gt = img.boxes("object");
    let scorer = OracleScorer::new("object", 0.0, 0)?;
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let [lambda, sigma_s, sigma_c] = match args[..] {
        [l, s, c] => [l, s, c],
        _ => [0.5, 0.1, 0.316],
    };
    let theta = Hyperparameters::new(lambda, sigma_s, sigma_c, 40)?;
    let start = forest.start_window().ok_or("model has no start window")?;
    let options = EpisodeOptions {
        snapshots: vec![1, 10, 40],
        memo: None,
    };
    let e = run_episode_with(img, &forest, &scorer, &theta, &start, &options)?;

    println!(
        "{} proposals, {} objects, budget {}",
        img.proposals.len(),
        gt.len(),
        theta.budget
    );
    println!(
        "{:>3} {:>5} {:>7} {:>10} {:>8}",
        "t", "index", "score", "belief", "best IoU"
    );
    for s in &e.trace {
        let best = gt.iter().map(|g| iou(&s.window, g)).fold(0.0, f64::max);
        let mark = if best >= 0.5 { "  <- hit" } else { "" };
        println!(
            "{:>3} {:>5} {:>7.3} {:>10.2e} {:>8.2}{mark}",
            s.t, s.proposal_index, s.score, s.belief_at_selection, best
        );
    }
    for snap in &e.snapshots {
        let top = snap.beliefs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("after {:>2} steps: highest belief {top:.3}", snap.t);
    }
    let c = &e.costs;
    println!(
        "mean forest query {:.1} us, mean belief update {:.1} us",
        c.iter().map(|c| c.forest_ns as f64).sum::<f64>() / c.len() as f64 / 1e3,
        c.iter().map(|c| c.update_ns as f64).sum::<f64>() / c.len() as f64 / 1e3
    );
    Ok(())
}
