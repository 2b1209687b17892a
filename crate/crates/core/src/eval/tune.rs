//! Cross-validated grid search over `(λ, σ_S, σ_C)`.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classifier::Scorer;
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use rayon::prelude::*;

use crate::eval::curve::{check_checkpoints, curve_from_episodes, Policy};
use crate::forest::{train_forest, ForestConfig, ForestModel};
use crate::rng::{derive_seed, stream_rng};
use crate::search::{initial_window, run_episode_with, ContextMemo, EpisodeOptions, Hyperparameters};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub lambdas: Vec<f64>,
    pub sigma_s: Vec<f64>,
    pub sigma_c: Vec<f64>,
}

impl Default for TuneGrid {
    /// λ in steps of 0.25; σ on five log-spaced values from 0.01 to 1.
    fn default() -> Self {
        let sigmas: Vec<f64> = (0..5).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
        TuneGrid {
            lambdas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            sigma_s: sigmas.clone(),
            sigma_c: sigmas,
        }
    }
}

impl TuneGrid {
    pub fn single(lambda: f64, sigma_s: f64, sigma_c: f64) -> Self {
        TuneGrid {
            lambdas: vec![lambda],
            sigma_s: vec![sigma_s],
            sigma_c: vec![sigma_c],
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len() * self.sigma_s.len() * self.sigma_c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every grid point, as `(λ, σ_S, σ_C)` in nested order.
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.len());
        for &l in &self.lambdas {
            for &s in &self.sigma_s {
                for &c in &self.sigma_c {
                    out.push((l, s, c));
                }
            }
        }
        out
    }
}

/// Where each fold's context extractor comes from.
#[derive(Debug, Clone, Copy)]
pub enum FoldForest<'a> {
    /// One forest for every fold.
    Shared(&'a ForestModel),
    /// A forest per fold, trained on the remaining folds.
    Retrain { config: &'a ForestConfig, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneConfig {
    pub grid: TuneGrid,
    pub folds: usize,
    /// Budgets at which AP is measured; the last one is the episode budget.
    pub checkpoints: Vec<usize>,
    /// Seeds the assignment of images to folds.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub theta: Hyperparameters,
    /// Mean over folds of the normalized area under the AP curve.
    pub auc: f64,
    pub fold_aucs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Hyperparameters,
    pub best_auc: f64,
    /// Every grid point in grid order.
    pub scores: Vec<GridScore>,
}

/// Key used to skip grid points whose episodes are provably identical to an
/// earlier point's: the score force vanishes at λ = 0 and the context force
/// at λ = 1.
fn effective_key(l: f64, s: f64, c: f64) -> (u64, u64, u64) {
    let s = if l == 0.0 { 0.0 } else { s };
    let c = if l == 1.0 { 0.0 } else { c };
    (l.to_bits(), s.to_bits(), c.to_bits())
}

/// Splits image ids into `k` folds after a seeded shuffle of the sorted ids.
pub fn assign_folds(dataset: &Dataset, k: usize, seed: u64) -> Vec<Vec<String>> {
    let mut ids: Vec<String> = dataset.images().iter().map(|i| i.id.clone()).collect();
    ids.sort();
    ids.shuffle(&mut stream_rng(seed, 0));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    folds
}

/// Picks the grid point maximizing the mean held-out AUC. Ties go to the
/// smaller λ, then the smaller σ_C, then the smaller σ_S.
pub fn tune_hyperparameters(
    training: &Dataset,
    class: &str,
    forest: FoldForest,
    scorer: &dyn Scorer,
    config: &TuneConfig,
) -> Result<TuneResult> {
    if config.grid.is_empty() {
        return Err(Error::input("hyperparameter grid is empty"));
    }
    check_checkpoints(&config.checkpoints)?;
    if config.folds == 0 || config.folds > training.len() {
        return Err(Error::param(
            "folds",
            format!("need 1 <= folds <= {} images", training.len()),
        ));
    }
    let budget = *config.checkpoints.last().expect("checked");
    for (l, s, c) in config.grid.points() {
        Hyperparameters::new(l, s, c, budget.max(1))?;
    }

    let folds = assign_folds(training, config.folds, config.seed);
    let mut fold_data = Vec::with_capacity(folds.len());
    for (f, ids) in folds.iter().enumerate() {
        let held: HashSet<&str> = ids.iter().map(String::as_str).collect();
        let test = training.subset(&held);
        let rest_ids: HashSet<&str> = training
            .images()
            .iter()
            .map(|i| i.id.as_str())
            .filter(|id| !held.contains(id))
            .collect();
        let rest = training.subset(&rest_ids);
        // single fold: evaluate on the training set itself
        let fit = if config.folds == 1 { &test } else { &rest };
        let model = match forest {
            FoldForest::Shared(m) => m.clone(),
            FoldForest::Retrain { config: fc, seed } => train_forest(fit, class, fc, derive_seed(seed, f as u64))?,
        };
        let start = initial_window(fit, class)?;
        let memos: Vec<ContextMemo> = test
            .images()
            .iter()
            .map(|i| ContextMemo::new(i.proposals.len()))
            .collect();
        let truth = test.ground_truth(class);
        fold_data.push((test, model, start, memos, truth));
    }

    let mut cache: BTreeMap<(u64, u64, u64), Vec<f64>> = BTreeMap::new();
    let mut scores = Vec::with_capacity(config.grid.len());
    for (l, s, c) in config.grid.points() {
        let theta = Hyperparameters::new(l, s, c, budget.max(1))?;
        let key = effective_key(l, s, c);
        let fold_aucs = match cache.get(&key) {
            Some(v) => v.clone(),
            None => {
                let mut v = Vec::with_capacity(fold_data.len());
                for (test, model, start, memos, truth) in &fold_data {
                    let episodes = test
                        .images()
                        .par_iter()
                        .zip(memos.par_iter())
                        .map(|(img, memo)| {
                            let options = EpisodeOptions {
                                snapshots: Vec::new(),
                                memo: Some(memo),
                            };
                            run_episode_with(img, model, scorer, &theta, start, &options)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let label = Policy::Active(theta).label();
                    let curve = curve_from_episodes(&episodes, truth, class, &label, &config.checkpoints)?;
                    v.push(curve.auc());
                }
                cache.insert(key, v.clone());
                v
            }
        };
        let auc = fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64;
        scores.push(GridScore { theta, auc, fold_aucs });
    }

    let best = scores
        .iter()
        .min_by(|a, b| {
            b.auc
                .total_cmp(&a.auc)
                .then(a.theta.lambda.total_cmp(&b.theta.lambda))
                .then(a.theta.sigma_c.total_cmp(&b.theta.sigma_c))
                .then(a.theta.sigma_s.total_cmp(&b.theta.sigma_s))
        })
        .expect("non-empty grid");
    Ok(TuneResult {
        best: best.theta,
        best_auc: best.auc,
        scores,
    })
}
