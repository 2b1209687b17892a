//! The active search loop.
//!
//! Every proposal of an image carries a belief value, initially zero. Each
//! iteration evaluates the unvisited proposal with the highest belief, then
//! adds to every belief a mix of two forces:
//!
//! * the score force `K(o_i, o_t; σ_S) · (φ(o_t) - 0.5)`, which attracts the
//!   search around well-scored observations and repels it from poor ones;
//! * the context force `Σ_j K(w_j, o_i; σ_C)` over the windows `w_j` the
//!   forest predicts from the observation's appearance and location.
//!
//! `b_i += λ · score + (1 - λ) · context`.

use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::Scorer;
use crate::dataio::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::eval::Detection;
use crate::forest::ForestModel;
use crate::geometry::{check_sigma, iou, kernel, KernelScale, KernelScratch, Window, WindowArray};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Weight of the score force; `1 - lambda` weighs the context force.
    pub lambda: f64,
    pub sigma_s: f64,
    pub sigma_c: f64,
    /// Maximum number of classifier evaluations per image.
    pub budget: usize,
}

impl Hyperparameters {
    pub fn new(lambda: f64, sigma_s: f64, sigma_c: f64, budget: usize) -> Result<Self> {
        let h = Hyperparameters {
            lambda,
            sigma_s,
            sigma_c,
            budget,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param(
                "lambda",
                format!("must lie in [0, 1], got {}", self.lambda),
            ));
        }
        check_sigma("sigma_s", self.sigma_s)?;
        check_sigma("sigma_c", self.sigma_c)?;
        if self.budget == 0 {
            return Err(Error::param("budget", "must be at least 1"));
        }
        Ok(())
    }

    pub fn with_budget(self, budget: usize) -> Self {
        Hyperparameters { budget, ..self }
    }
}

/// Componentwise mean of every ground-truth box of `class` in the dataset.
pub fn initial_window(dataset: &Dataset, class: &str) -> Result<Window> {
    let mut sum = [0.0f64; 4];
    let mut n = 0usize;
    for img in dataset.images() {
        for b in img.boxes(class) {
            for (s, v) in sum.iter_mut().zip(b.to_array()) {
                *s += v;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoTrainingData(class.to_string()));
    }
    let m = sum.map(|s| s / n as f64);
    Window::new(m[0], m[1], m[2], m[3])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub index: usize,
    pub score: f64,
}

/// Beliefs and visit history of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    beliefs: Vec<f64>,
    visited: Vec<Visit>,
    is_visited: Vec<bool>,
    t: usize,
}

impl BeliefState {
    pub fn new(num_proposals: usize) -> Self {
        BeliefState {
            beliefs: vec![0.0; num_proposals],
            visited: Vec::new(),
            is_visited: vec![false; num_proposals],
            t: 0,
        }
    }

    /// A state with given beliefs after `t` updates and nothing visited.
    pub fn with_beliefs(beliefs: Vec<f64>, t: usize) -> Self {
        let n = beliefs.len();
        BeliefState {
            beliefs,
            visited: Vec::new(),
            is_visited: vec![false; n],
            t,
        }
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn visited(&self) -> &[Visit] {
        &self.visited
    }

    pub fn is_visited(&self, i: usize) -> bool {
        self.is_visited[i]
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// Marks `index` visited with its score. Panics on a repeat visit.
    pub fn mark_visited(&mut self, index: usize, score: f64) {
        assert!(!self.is_visited[index], "proposal {index} visited twice");
        self.is_visited[index] = true;
        self.visited.push(Visit { index, score });
    }
}

/// Picks the next proposal to evaluate.
///
/// Before any update the search starts from the proposal overlapping
/// `start` the most (nearest center on ties). Afterwards it takes the
/// unvisited proposal of highest belief; ties go to the lowest index.
pub fn select_next(state: &BeliefState, proposals: &[Window], start: &Window) -> Result<usize> {
    debug_assert_eq!(proposals.len(), state.len());
    if state.t == 0 {
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, w) in proposals.iter().enumerate() {
            if state.is_visited[i] {
                continue;
            }
            let o = iou(w, start);
            let c = w.center_distance_sq(start);
            if best.is_none_or(|(_, bo, bc)| o > bo || (o == bo && c < bc)) {
                best = Some((i, o, c));
            }
        }
        return best.map(|b| b.0).ok_or(Error::EpisodeExhausted);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &b) in state.beliefs.iter().enumerate() {
        if !state.is_visited[i] && best.is_none_or(|(_, bb)| b > bb) {
            best = Some((i, b));
        }
    }
    best.map(|b| b.0).ok_or(Error::EpisodeExhausted)
}

/// `K(o_i, o_t; σ_S) · (φ_t - 0.5)`.
pub fn score_force(o_i: &Window, o_t: &Window, phi_t: f64, sigma_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&phi_t) {
        return Err(Error::param("phi_t", format!("score {phi_t} outside [0, 1]")));
    }
    Ok(kernel(o_i, o_t, sigma_s)? * (phi_t - 0.5))
}

/// `Σ_j K(w_j, o_i; σ_C)` over the predicted context windows.
pub fn context_force(o_i: &Window, gamma: &[Window], sigma_c: f64) -> Result<f64> {
    if gamma.is_empty() {
        return Err(Error::input("context force needs at least one predicted window"));
    }
    check_sigma("sigma_c", sigma_c)?;
    let scale = KernelScale::new(sigma_c);
    Ok(gamma.iter().map(|w| scale.eval(iou(w, o_i))).sum())
}

/// Reusable buffers for belief updates over one image's proposals.
#[derive(Debug, Clone)]
pub struct BeliefUpdater {
    windows: WindowArray,
    score_buf: Vec<f64>,
    context_buf: Vec<f64>,
    scratch: KernelScratch,
}

impl BeliefUpdater {
    pub fn new(proposals: &[Window]) -> Self {
        let n = proposals.len();
        BeliefUpdater {
            windows: WindowArray::new(proposals),
            score_buf: vec![0.0; n],
            context_buf: vec![0.0; n],
            scratch: KernelScratch::default(),
        }
    }

    /// Applies one iteration's forces to every proposal, visited ones
    /// included, and advances the iteration counter. `o_t` must already be
    /// marked visited.
    pub fn update(
        &mut self,
        state: &mut BeliefState,
        o_t: &Window,
        phi_t: f64,
        gamma: &[Window],
        theta: &Hyperparameters,
    ) {
        debug_assert_eq!(state.len(), self.windows.len());
        let lambda = theta.lambda;
        self.score_buf.fill(0.0);
        self.context_buf.fill(0.0);
        if lambda > 0.0 {
            let scale = KernelScale::new(theta.sigma_s);
            self.windows
                .accumulate_kernel(o_t, &scale, phi_t - 0.5, &mut self.scratch, &mut self.score_buf);
        }
        if lambda < 1.0 {
            let scale = KernelScale::new(theta.sigma_c);
            for w in gamma {
                self.windows
                    .accumulate_kernel(w, &scale, 1.0, &mut self.scratch, &mut self.context_buf);
            }
        }
        for ((b, s), c) in state.beliefs.iter_mut().zip(&self.score_buf).zip(&self.context_buf) {
            *b += lambda * s + (1.0 - lambda) * c;
        }
        state.t += 1;
    }
}

/// One-shot form of [`BeliefUpdater::update`].
pub fn update_beliefs(
    state: &mut BeliefState,
    proposals: &[Window],
    o_t: &Window,
    phi_t: f64,
    gamma: &[Window],
    theta: &Hyperparameters,
) {
    BeliefUpdater::new(proposals).update(state, o_t, phi_t, gamma, theta);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// 1-based iteration number.
    pub t: usize,
    pub proposal_index: usize,
    pub window: Window,
    pub score: f64,
    /// Belief of the proposal when it was selected (the belief-map maximum
    /// over unvisited proposals).
    pub belief_at_selection: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSnapshot {
    /// Taken after this many iterations.
    pub t: usize,
    pub beliefs: Vec<f64>,
}

/// Cost of one iteration outside the classifier.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IterationCost {
    pub forest_ns: u64,
    pub update_ns: u64,
    /// Node-test distance evaluations summed over all trees.
    pub distance_evals: usize,
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub image_id: String,
    pub theta: Option<Hyperparameters>,
    pub policy: String,
    pub trace: Vec<TraceStep>,
    pub snapshots: Vec<BeliefSnapshot>,
    pub costs: Vec<IterationCost>,
    pub final_beliefs: Vec<f64>,
}

impl Episode {
    /// Every visited window with its score, ordered by proposal index.
    pub fn detections(&self) -> Vec<Detection> {
        self.detections_at(self.trace.len())
    }

    /// Detections from the first `budget` iterations only, ordered by
    /// proposal index.
    pub fn detections_at(&self, budget: usize) -> Vec<Detection> {
        let mut steps: Vec<&TraceStep> = self.trace.iter().take(budget).collect();
        steps.sort_by_key(|s| s.proposal_index);
        steps
            .into_iter()
            .map(|s| Detection {
                image_id: self.image_id.clone(),
                window: s.window,
                score: s.score,
            })
            .collect()
    }

    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

/// Forest outputs for the proposals of one image, filled on first use.
/// Episodes that share a memo skip forest queries already made on the same
/// image, e.g. when sweeping hyperparameters.
#[derive(Debug, Default)]
pub struct ContextMemo {
    slots: Vec<OnceLock<(Vec<Window>, usize)>>,
}

impl ContextMemo {
    pub fn new(proposals: usize) -> Self {
        ContextMemo {
            slots: (0..proposals).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Proposals whose context has been computed so far.
    pub fn filled(&self) -> usize {
        self.slots.iter().filter(|s| s.get().is_some()).count()
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions<'a> {
    /// Iteration counts after which to copy the belief map.
    pub snapshots: Vec<usize>,
    /// Must come from the same image and forest as the episode.
    pub memo: Option<&'a ContextMemo>,
}

/// Runs the search on one image for `theta.budget` iterations or until every
/// proposal has been evaluated.
pub fn run_episode(
    image: &ImageRecord,
    forest: &ForestModel,
    scorer: &dyn Scorer,
    theta: &Hyperparameters,
    start: &Window,
) -> Result<Episode> {
    run_episode_with(image, forest, scorer, theta, start, &EpisodeOptions::default())
}

pub fn run_episode_with(
    image: &ImageRecord,
    forest: &ForestModel,
    scorer: &dyn Scorer,
    theta: &Hyperparameters,
    start: &Window,
    options: &EpisodeOptions<'_>,
) -> Result<Episode> {
    theta.validate()?;
    let n = image.proposals.len();
    if n == 0 {
        return Err(Error::input(format!("image `{}` has no proposals", image.id)));
    }
    if theta.lambda < 1.0 && image.proposals[0].code.len() != forest.code_bits() {
        return Err(Error::input(format!(
            "image `{}` uses {}-bit codes but the forest was trained on {}-bit codes",
            image.id,
            image.proposals[0].code.len(),
            forest.code_bits()
        )));
    }
    if let Some(m) = options.memo {
        if m.slots.len() != n {
            return Err(Error::input(format!(
                "context memo holds {} proposals but image `{}` has {n}",
                m.slots.len(),
                image.id
            )));
        }
    }
    let windows: Vec<Window> = image.proposals.iter().map(|p| p.window).collect();
    let mut updater = BeliefUpdater::new(&windows);
    let mut state = BeliefState::new(n);
    let steps = theta.budget.min(n);
    let mut trace = Vec::with_capacity(steps);
    let mut costs = Vec::with_capacity(steps);
    let mut snapshots = Vec::new();

    for _ in 0..steps {
        let idx = select_next(&state, &windows, start)?;
        let belief = state.beliefs[idx];
        let phi = scorer.score(image, idx)?;
        if !(0.0..=1.0).contains(&phi) {
            return Err(Error::input(format!(
                "scorer returned {phi} for proposal {idx} of image `{}`",
                image.id
            )));
        }

        let t0 = Instant::now();
        let fresh;
        let (gamma, evals): (&[Window], usize) = if theta.lambda == 1.0 {
            (&[], 0)
        } else if let Some(m) = options.memo {
            let (g, e) = m.slots[idx].get_or_init(|| forest.extract_context_counted(&image.proposals[idx]));
            (g, *e)
        } else {
            fresh = forest.extract_context_counted(&image.proposals[idx]);
            (&fresh.0, fresh.1)
        };
        let t1 = Instant::now();
        state.mark_visited(idx, phi);
        updater.update(&mut state, &windows[idx], phi, gamma, theta);
        let t2 = Instant::now();

        costs.push(IterationCost {
            forest_ns: (t1 - t0).as_nanos() as u64,
            update_ns: (t2 - t1).as_nanos() as u64,
            distance_evals: evals,
        });
        trace.push(TraceStep {
            t: state.t,
            proposal_index: idx,
            window: windows[idx],
            score: phi,
            belief_at_selection: belief,
        });
        if options.snapshots.contains(&state.t) {
            snapshots.push(BeliefSnapshot {
                t: state.t,
                beliefs: state.beliefs.clone(),
            });
        }
    }

    Ok(Episode {
        image_id: image.id.clone(),
        theta: Some(*theta),
        policy: "active".to_string(),
        trace,
        snapshots,
        costs,
        final_beliefs: state.beliefs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(x: f64, y: f64, s: f64) -> Window {
        Window::new(x, y, s, s).unwrap()
    }

    #[test]
    fn initial_selection_uses_start_window() {
        let props = [w(0.0, 0.0, 0.2), w(0.4, 0.4, 0.2), w(0.7, 0.7, 0.2)];
        let state = BeliefState::new(3);
        assert_eq!(select_next(&state, &props, &w(0.45, 0.45, 0.2)).unwrap(), 1);
        // no overlap with anything: nearest center
        assert_eq!(select_next(&state, &props, &w(0.8, 0.1, 0.05)).unwrap(), 1);
    }

    #[test]
    fn argmax_ties_and_exclusions() {
        let props = [w(0.0, 0.0, 0.2), w(0.4, 0.4, 0.2), w(0.7, 0.7, 0.2)];
        let start = w(0.7, 0.7, 0.2);
        let state = BeliefState::with_beliefs(vec![0.1, 0.9, 0.9], 1);
        assert_eq!(select_next(&state, &props, &start).unwrap(), 1);

        let mut state = BeliefState::with_beliefs(vec![0.1, 0.9, 0.3], 1);
        state.mark_visited(1, 0.2);
        assert_eq!(select_next(&state, &props, &start).unwrap(), 2);
        state.mark_visited(2, 0.2);
        state.mark_visited(0, 0.2);
        assert!(matches!(
            select_next(&state, &props, &start),
            Err(Error::EpisodeExhausted)
        ));
    }

    #[test]
    fn score_force_examples() {
        let a = w(0.1, 0.1, 0.2);
        let b = w(0.5, 0.5, 0.3);
        assert_eq!(score_force(&b, &a, 0.5, 0.2).unwrap(), 0.0);
        assert_eq!(score_force(&a, &a, 1.0, 0.2).unwrap(), 0.5);
        assert_eq!(score_force(&a, &a, 0.0, 0.2).unwrap(), -0.5);
        assert!(score_force(&a, &a, 1.5, 0.2).is_err());
    }

    #[test]
    fn context_force_examples() {
        let o = w(0.1, 0.1, 0.2);
        assert_eq!(context_force(&o, &[o; 10], 0.3).unwrap(), 10.0);
        let far = [w(0.6, 0.6, 0.1), w(0.8, 0.1, 0.1), w(0.5, 0.0, 0.05)];
        let v = context_force(&o, &far, 1.0).unwrap();
        assert!((v - 3.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!(context_force(&o, &[], 1.0).is_err());
    }

    #[test]
    fn lambda_boundaries_isolate_forces() {
        let props = [w(0.1, 0.1, 0.2), w(0.15, 0.1, 0.2), w(0.6, 0.6, 0.2)];
        let o_t = props[0];
        let gamma = [w(0.6, 0.55, 0.2), w(0.55, 0.6, 0.2)];

        let theta = Hyperparameters::new(1.0, 0.3, 0.4, 10).unwrap();
        let mut s = BeliefState::new(3);
        update_beliefs(&mut s, &props, &o_t, 0.2, &gamma, &theta);
        for (i, p) in props.iter().enumerate() {
            assert_eq!(s.beliefs()[i], score_force(p, &o_t, 0.2, 0.3).unwrap());
        }

        let theta = Hyperparameters::new(0.0, 0.3, 0.4, 10).unwrap();
        let mut s = BeliefState::new(3);
        update_beliefs(&mut s, &props, &o_t, 0.2, &gamma, &theta);
        for (i, p) in props.iter().enumerate() {
            assert!((s.beliefs()[i] - context_force(p, &gamma, 0.4).unwrap()).abs() < 1e-15);
            assert!(s.beliefs()[i] > 0.0);
        }
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(Hyperparameters::new(1.5, 0.1, 0.1, 1).is_err());
        assert!(Hyperparameters::new(0.5, 0.0, 0.1, 1).is_err());
        assert!(Hyperparameters::new(0.5, 0.1, -1.0, 1).is_err());
        assert!(Hyperparameters::new(0.5, 0.1, 0.1, 0).is_err());
    }
}
