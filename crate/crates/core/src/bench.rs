//! Overhead accounting: the time spent per iteration outside the
//! classifier, split into the forest query and the belief update.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::Scorer;
use crate::dataio::synthetic::{generate_synthetic, SyntheticConfig};
use crate::dataio::ImageRecord;
use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::geometry::Window;
use crate::search::{run_episode, Hyperparameters, IterationCost};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub episodes: usize,
    pub iterations: usize,
    pub proposals_per_image_mean: f64,
    pub mean_ns: f64,
    pub median_ns: f64,
    pub mean_forest_ns: f64,
    pub median_forest_ns: f64,
    pub mean_update_ns: f64,
    pub median_update_ns: f64,
    /// Mean total overhead of one episode, in seconds.
    pub episode_overhead_s: f64,
    /// Node-test distance evaluations per iteration, over all trees.
    pub mean_distance_evals: f64,
    /// Longest root-to-leaf path seen in any single tree query.
    pub max_evals_per_tree: usize,
    pub num_trees: usize,
    /// Wall-clock time of the whole measurement including classifier calls.
    pub wall_clock_s: f64,
}

fn median(v: &mut [u64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] as f64 + v[m] as f64) / 2.0
    }
}

fn mean(v: &[u64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
    }
}

/// Runs one active episode per image, sequentially so timings are not
/// disturbed by other episodes.
pub fn measure_overhead(
    images: &[ImageRecord],
    forest: &ForestModel,
    scorer: &dyn Scorer,
    theta: &Hyperparameters,
    start: &Window,
) -> Result<OverheadReport> {
    if images.is_empty() {
        return Err(Error::input("no images to benchmark"));
    }
    let t0 = Instant::now();
    let mut costs: Vec<IterationCost> = Vec::new();
    let mut max_path = 0usize;
    let mut episode_totals = Vec::with_capacity(images.len());
    for img in images {
        let ep = run_episode(img, forest, scorer, theta, start)?;
        episode_totals.push(ep.costs.iter().map(|c| c.forest_ns + c.update_ns).sum::<u64>());
        for s in ep.trace.iter().take(50) {
            for t in forest.trees() {
                max_path = max_path.max(t.route_counted(&img.proposals[s.proposal_index]).1);
            }
        }
        costs.extend(ep.costs);
    }
    let wall = t0.elapsed().as_secs_f64();
    let mut total: Vec<u64> = costs.iter().map(|c| c.forest_ns + c.update_ns).collect();
    let mut forest_ns: Vec<u64> = costs.iter().map(|c| c.forest_ns).collect();
    let mut update_ns: Vec<u64> = costs.iter().map(|c| c.update_ns).collect();
    let evals: Vec<u64> = costs.iter().map(|c| c.distance_evals as u64).collect();
    Ok(OverheadReport {
        episodes: images.len(),
        iterations: costs.len(),
        proposals_per_image_mean: images.iter().map(|i| i.proposals.len() as f64).sum::<f64>() / images.len() as f64,
        mean_ns: mean(&total),
        median_ns: median(&mut total),
        mean_forest_ns: mean(&forest_ns),
        median_forest_ns: median(&mut forest_ns),
        mean_update_ns: mean(&update_ns),
        median_update_ns: median(&mut update_ns),
        episode_overhead_s: mean(&episode_totals) * 1e-9,
        mean_distance_evals: mean(&evals),
        max_evals_per_tree: max_path,
        num_trees: forest.num_trees(),
        wall_clock_s: wall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub proposals: usize,
    pub mean_ns: f64,
    /// Value of the least-squares line at this size.
    pub fitted_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    pub slope_ns_per_proposal: f64,
    pub intercept_ns: f64,
    /// Largest `max(measured/fitted, fitted/measured)` over the sizes.
    pub worst_ratio: f64,
}

/// Least-squares line through `(x, y)` pairs.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Mean per-iteration overhead on synthetic scenes of each proposal count,
/// reusing `base` for everything except the size.
pub fn overhead_scaling(
    sizes: &[usize],
    base: &SyntheticConfig,
    scenes: usize,
    forest: &ForestModel,
    scorer: &dyn Scorer,
    theta: &Hyperparameters,
    start: &Window,
) -> Result<ScalingReport> {
    if sizes.len() < 2 {
        return Err(Error::param("sizes", "need at least two proposal counts"));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let cfg = SyntheticConfig {
            proposals_per_image: n,
            train_scenes: 0,
            test_scenes: scenes,
            code_bits: forest.code_bits(),
            ..base.clone()
        };
        let data = generate_synthetic(&cfg)?;
        let report = measure_overhead(data.test.images(), forest, scorer, theta, start)?;
        points.push(ScalingPoint {
            proposals: n,
            mean_ns: report.mean_ns,
            fitted_ns: 0.0,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.proposals as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_ns).collect();
    let (slope, intercept) = fit_line(&xs, &ys);
    let mut worst: f64 = 1.0;
    for p in &mut points {
        p.fitted_ns = slope * p.proposals as f64 + intercept;
        let r = if p.fitted_ns > 0.0 && p.mean_ns > 0.0 {
            (p.mean_ns / p.fitted_ns).max(p.fitted_ns / p.mean_ns)
        } else {
            f64::INFINITY
        };
        worst = worst.max(r);
    }
    Ok(ScalingReport {
        points,
        slope_ns_per_proposal: slope,
        intercept_ns: intercept,
        worst_ratio: worst,
    })
}
