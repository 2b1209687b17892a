//! Window overlap, the overlap kernel at several widths, displacements and
//! Hamming distances between appearance codes.
//!
//! `cargo run --example geometry_basics`

use active_search::features::{hamming_distance, AppearanceCode, EmbedderModel, EmbedderParams};
use active_search::geometry::{apply_displacement, displacement_between, iou, kernel, Window};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let anchor = Window::new(0.30, 0.30, 0.20, 0.20)?;
    let shifted: Vec<Window> = [0.0, 0.02, 0.05, 0.10, 0.15, 0.25]
        .iter()
        .map(|&dx| Window::new(0.30 + dx, 0.30, 0.20, 0.20))
        .collect::<Result<_, _>>()?;

    println!(
        "{:>6} {:>7} {:>10} {:>10} {:>10}",
        "dx", "IoU", "K(0.01)", "K(0.1)", "K(1.0)"
    );
    for w in &shifted {
        println!(
            "{:>6.2} {:>7.3} {:>10.3e} {:>10.3e} {:>10.3e}",
            w.x() - anchor.x(),
            iou(&anchor, w),
            kernel(&anchor, w, 0.01)?,
            kernel(&anchor, w, 0.1)?,
            kernel(&anchor, w, 1.0)?
        );
    }

    // a displacement is stored relative to the source window's size, so the
    // same offset scales with the window it is applied to
    let object = Window::new(0.40, 0.55, 0.12, 0.18)?;
    let d = displacement_between(&anchor, &object);
    println!("\ndisplacement anchor -> object: {:?}", d.to_array());
    println!(
        "applied to the anchor:         {:?}",
        apply_displacement(&anchor, &d).to_array()
    );
    let small = Window::new(0.10, 0.10, 0.10, 0.10)?;
    println!(
        "applied to a smaller window:   {:?}",
        apply_displacement(&small, &d).to_array()
    );

    let a = AppearanceCode::from_hex("f0f0a5a5")?;
    let b = AppearanceCode::from_hex("f0f0a5a4")?;
    println!("\nhamming(a, b) = {}", hamming_distance(&a, &b)?);
    println!("hamming(a, !a) = {}", hamming_distance(&a, &a.complement())?);

    // random-hyperplane codes of nearby descriptors agree on most bits
    let emb = EmbedderModel::new(EmbedderParams {
        input_dim: 4,
        bits: 256,
        seed: 1,
        offset_scale: 0.0,
    })?;
    let base = [1.0, 0.5, -0.3, 0.2];
    for eps in [0.0, 0.05, 0.3, 1.0] {
        let other = [1.0 + eps, 0.5, -0.3 - eps, 0.2];
        let d = hamming_distance(&emb.embed(&base)?, &emb.embed(&other)?)?;
        println!("descriptor offset {eps:>4}: code distance {d:.3}");
    }
    Ok(())
}
