//! Trains the context forest on synthetic scenes and shows where it sends a
//! few test proposals: windows on the object vote for themselves, windows on
//! the context band above vote downwards onto the object.
//!
//! `cargo run --release --example forest_context`

use active_search::dataio::synthetic::{generate_synthetic, ProposalSource, SyntheticConfig};
use active_search::forest::{train_forest, ForestConfig};
use active_search::geometry::iou;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate_synthetic(&SyntheticConfig {
        train_scenes: 80,
        test_scenes: 3,
        proposals_per_image: 200,
        ..SyntheticConfig::default()
    })?;
    let forest = train_forest(&data.train, "object", &ForestConfig::default(), 1)?;
    for (i, t) in forest.trees().iter().enumerate() {
        println!("tree {i}: depth {}, {} leaves", t.depth(), t.num_leaves());
    }

    for img in data.test.images() {
        let gt = img.boxes("object");
        println!("\nimage {} ({} objects)", img.id, gt.len());
        let sources = &data.test_sources[&img.id];
        let mut shown = [false; 3];
        for (p, src) in img.proposals.iter().zip(sources) {
            let kind = match src {
                ProposalSource::Tight { .. } => 0,
                ProposalSource::Region { .. } => 1,
                ProposalSource::Random => 2,
                ProposalSource::Loose { .. } => continue,
            };
            if std::mem::replace(&mut shown[kind], true) {
                continue;
            }
            let votes = forest.extract_context(p);
            let best = |w: &active_search::geometry::Window| gt.iter().map(|g| iou(w, g)).fold(0.0, f64::max);
            let hits = votes.iter().filter(|v| best(v) >= 0.5).count();
            println!(
                "  {:<7} proposal (IoU to object {:.2}): {hits}/{} votes land on an object, mean vote IoU {:.2}",
                ["tight", "region", "random"][kind],
                best(&p.window),
                votes.len(),
                votes.iter().map(best).sum::<f64>() / votes.len() as f64
            );
        }
    }
    Ok(())
}
