//! Search policies and AP-versus-budget curves.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Scorer;
use crate::dataio::{Dataset, GroundTruth, ImageRecord};
use crate::error::{Error, Result};
use crate::eval::metrics::{average_precision, nms_per_image, Detection, MATCH_IOU, NMS_THRESHOLD};
use crate::forest::ForestModel;
use crate::geometry::Window;
use crate::rng::{derive_seed, stable_hash, stream_rng};
use crate::search::{run_episode, Episode, Hyperparameters, IterationCost, TraceStep};

/// How proposals are ordered for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum Policy {
    /// Belief-driven active search.
    Active(Hyperparameters),
    /// Uniformly random order, seeded per image.
    Random { seed: u64 },
    /// Every proposal in index order.
    Exhaustive,
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Active(h) => format!(
                "active(lambda={},sigma_s={},sigma_c={})",
                h.lambda, h.sigma_s, h.sigma_c
            ),
            Policy::Random { seed } => format!("random(seed={seed})"),
            Policy::Exhaustive => "exhaustive".to_string(),
        }
    }
}

fn scored_episode(image: &ImageRecord, scorer: &dyn Scorer, order: &[usize], policy: &str) -> Result<Episode> {
    let mut trace = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        trace.push(TraceStep {
            t: k + 1,
            proposal_index: i,
            window: image.proposals[i].window,
            score: scorer.score(image, i)?,
            belief_at_selection: 0.0,
        });
    }
    Ok(Episode {
        image_id: image.id.clone(),
        theta: None,
        policy: policy.to_string(),
        costs: vec![IterationCost::default(); trace.len()],
        trace,
        snapshots: Vec::new(),
        final_beliefs: Vec::new(),
    })
}

/// Evaluates a uniformly random prefix of `budget` proposals.
pub fn subsampling_baseline(image: &ImageRecord, scorer: &dyn Scorer, budget: usize, seed: u64) -> Result<Episode> {
    if budget == 0 {
        return Err(Error::param("budget", "must be at least 1"));
    }
    let mut order: Vec<usize> = (0..image.proposals.len()).collect();
    let mut rng = stream_rng(seed, stable_hash(&image.id));
    order.shuffle(&mut rng);
    order.truncate(budget);
    scored_episode(image, scorer, &order, "random")
}

/// Scores every proposal independently, in index order.
pub fn exhaustive_episode(image: &ImageRecord, scorer: &dyn Scorer) -> Result<Episode> {
    let order: Vec<usize> = (0..image.proposals.len()).collect();
    scored_episode(image, scorer, &order, "exhaustive")
}

/// What a policy needs besides the dataset.
#[derive(Debug, Clone, Copy)]
pub struct SearchSetup<'a> {
    pub forest: Option<&'a ForestModel>,
    pub scorer: &'a dyn Scorer,
    /// Starting window of active search.
    pub start: Window,
}

/// Runs `policy` on every image with the given budget. Episodes come back in
/// dataset order.
pub fn run_policy(dataset: &Dataset, setup: &SearchSetup, policy: &Policy, budget: usize) -> Result<Vec<Episode>> {
    dataset
        .images()
        .par_iter()
        .map(|img| match policy {
            Policy::Active(theta) => {
                let forest = setup
                    .forest
                    .ok_or_else(|| Error::input("active search needs a forest model"))?;
                run_episode(img, forest, setup.scorer, &theta.with_budget(budget), &setup.start)
            }
            Policy::Random { seed } => subsampling_baseline(img, setup.scorer, budget, *seed),
            Policy::Exhaustive => {
                let mut e = exhaustive_episode(img, setup.scorer)?;
                e.trace.truncate(budget);
                e.costs.truncate(budget);
                Ok(e)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetCurve {
    pub class: String,
    pub policy: String,
    /// `(budget, AP)` with strictly increasing budgets.
    pub points: Vec<(usize, f64)>,
}

impl BudgetCurve {
    pub fn max_budget(&self) -> usize {
        self.points.last().map_or(0, |p| p.0)
    }

    pub fn ap_at(&self, budget: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == budget).map(|p| p.1)
    }

    /// Trapezoidal area under the curve, divided by the largest budget.
    pub fn auc(&self) -> f64 {
        self.partial_auc(self.max_budget())
    }

    /// Area over the points with budget `<= up_to`, divided by `up_to`.
    pub fn partial_auc(&self, up_to: usize) -> f64 {
        if up_to == 0 {
            return 0.0;
        }
        let pts: Vec<&(usize, f64)> = self.points.iter().take_while(|p| p.0 <= up_to).collect();
        let area: f64 = pts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) as f64 * (w[0].1 + w[1].1) / 2.0)
            .sum();
        area / up_to as f64
    }
}

/// Pointwise mean of curves sharing the same budgets.
pub fn mean_curve(curves: &[BudgetCurve], policy: &str) -> Result<BudgetCurve> {
    let first = curves.first().ok_or_else(|| Error::input("no curves to average"))?;
    let mut points = first.points.clone();
    for c in &curves[1..] {
        if c.points.len() != points.len() || c.points.iter().zip(&points).any(|(a, b)| a.0 != b.0) {
            return Err(Error::input("curves have different budgets"));
        }
        for (p, q) in points.iter_mut().zip(&c.points) {
            p.1 += q.1;
        }
    }
    for p in &mut points {
        p.1 /= curves.len() as f64;
    }
    Ok(BudgetCurve {
        class: first.class.clone(),
        policy: policy.to_string(),
        points,
    })
}

pub fn check_checkpoints(checkpoints: &[usize]) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::param("checkpoints", "need at least one budget"));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("checkpoints", "budgets must be strictly increasing"));
    }
    Ok(())
}

/// `0, step, 2·step, …` up to and including `max`.
pub fn regular_checkpoints(step: usize, max: usize) -> Vec<usize> {
    let step = step.max(1);
    let mut v: Vec<usize> = (0..=max).step_by(step).collect();
    if v.last() != Some(&max) {
        v.push(max);
    }
    v
}

/// Detections of all episodes truncated to `budget` evaluations.
pub fn detections_at(episodes: &[Episode], budget: usize) -> Vec<Detection> {
    episodes.iter().flat_map(|e| e.detections_at(budget)).collect()
}

/// NMS followed by AP over the detections of all images.
pub fn evaluate_detections(detections: &[Detection], ground_truth: &GroundTruth) -> Result<f64> {
    let kept = nms_per_image(detections, NMS_THRESHOLD);
    average_precision(&kept, ground_truth, MATCH_IOU)
        .ok_or_else(|| Error::input("no ground-truth boxes: AP is undefined"))
}

/// AP after truncating every episode to each checkpoint. Episodes of
/// images absent from `ground_truth` count as false positives only.
pub fn curve_from_episodes(
    episodes: &[Episode],
    ground_truth: &GroundTruth,
    class: &str,
    policy: &str,
    checkpoints: &[usize],
) -> Result<BudgetCurve> {
    check_checkpoints(checkpoints)?;
    let points = checkpoints
        .par_iter()
        .map(|&b| Ok((b, evaluate_detections(&detections_at(episodes, b), ground_truth)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BudgetCurve {
        class: class.to_string(),
        policy: policy.to_string(),
        points,
    })
}

/// Runs `policy` once at the largest checkpoint and reads every smaller
/// checkpoint off trace prefixes; the visit order does not depend on the
/// budget.
pub fn budget_curve(
    dataset: &Dataset,
    class: &str,
    setup: &SearchSetup,
    policy: &Policy,
    checkpoints: &[usize],
) -> Result<BudgetCurve> {
    check_checkpoints(checkpoints)?;
    let max_n = dataset.images().iter().map(|i| i.proposals.len()).max().unwrap_or(0);
    let top = *checkpoints.last().expect("checked non-empty");
    if top > max_n {
        return Err(Error::param(
            "checkpoints",
            format!("largest budget {top} exceeds the largest proposal count {max_n}"),
        ));
    }
    let episodes = run_policy(dataset, setup, policy, top.max(1))?;
    curve_from_episodes(
        &episodes,
        &dataset.ground_truth(class),
        class,
        &policy.label(),
        checkpoints,
    )
}

/// Mean random-order curve over several seeds derived from `seed`.
pub fn random_mean_curve(
    dataset: &Dataset,
    class: &str,
    scorer: &dyn Scorer,
    checkpoints: &[usize],
    seeds: usize,
    seed: u64,
) -> Result<BudgetCurve> {
    let setup = SearchSetup {
        forest: None,
        scorer,
        start: Window::clamped(0.0, 0.0, 1.0, 1.0),
    };
    let curves = (0..seeds)
        .map(|s| {
            let policy = Policy::Random {
                seed: derive_seed(seed, s as u64),
            };
            budget_curve(dataset, class, &setup, &policy, checkpoints)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_curve(&curves, &format!("random(mean of {seeds})"))
}
