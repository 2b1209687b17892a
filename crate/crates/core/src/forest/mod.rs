//! The context extractor: a random forest of distance-test trees that maps an
//! observed proposal to `J` displaced windows where objects are expected.
//!
//! Training pairs every proposal of a training image with the displacement
//! that carries it onto the closest ground-truth box. Each tree sees the
//! proposals of its own random subset of training images.

pub mod split;
pub mod tree;

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use split::{entropy, information_gain, medoid, HISTOGRAM_BINS};
pub use tree::{train_tree, train_tree_traced, LeafMembership, Node, NodeTest, TrainingSample, Tree, TreeConfig};

use crate::dataio::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::features::{EmbedderModel, Proposal};
use crate::geometry::{apply_displacement, displacement_between, iou, Window};
use crate::rng::{derive_seed, stream_rng};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub num_trees: usize,
    /// Training images drawn (without replacement) for each tree.
    pub images_per_tree: usize,
    #[serde(flatten)]
    pub tree: TreeConfig,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            num_trees: 10,
            images_per_tree: 40,
            tree: TreeConfig::default(),
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::param("num_trees", "must be at least 1"));
        }
        if self.images_per_tree == 0 {
            return Err(Error::param("images_per_tree", "must be at least 1"));
        }
        if self.tree.candidates_per_node == 0 {
            return Err(Error::param("candidates_per_node", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    format_version: u32,
    class_name: String,
    config: ForestConfig,
    seed: u64,
    code_bits: usize,
    /// Present when appearance codes come from real-valued features.
    embedder: Option<EmbedderModel>,
    /// Mean ground-truth box of the training images, where search starts.
    #[serde(default)]
    start_window: Option<Window>,
    trees: Vec<Tree>,
}

/// Index of the ground-truth box closest to `w`: highest IoU, with ties and
/// the all-disjoint case settled by the smallest center distance, then by
/// the lowest index.
pub fn closest_ground_truth(w: &Window, boxes: &[Window]) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, b) in boxes.iter().enumerate() {
        let o = iou(w, b);
        let c = w.center_distance_sq(b);
        let better = match best {
            None => true,
            Some((_, bo, bc)) => o > bo || (o == bo && c < bc),
        };
        if better {
            best = Some((i, o, c));
        }
    }
    best.map(|(i, _, _)| i)
}

/// Training pairs for every proposal of the given images that has at least
/// one ground-truth box of `class`.
pub fn training_samples<'a>(images: &[&'a ImageRecord], class: &str) -> Vec<TrainingSample<'a>> {
    let mut out = Vec::new();
    for img in images {
        let boxes = img.boxes(class);
        if boxes.is_empty() {
            continue;
        }
        for p in &img.proposals {
            let g = closest_ground_truth(&p.window, boxes).expect("non-empty box list");
            out.push(TrainingSample {
                proposal: p,
                displacement: displacement_between(&p.window, &boxes[g]),
                image_id: &img.id,
            });
        }
    }
    out
}

/// Trains one forest for `class`. Tree `j` draws its images and its split
/// candidates from streams derived from `(seed, j)`, so the result does not
/// depend on how many threads train trees concurrently.
pub fn train_forest(dataset: &Dataset, class: &str, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    config.validate()?;
    let eligible: Vec<&ImageRecord> = dataset.images().iter().filter(|i| !i.boxes(class).is_empty()).collect();
    if eligible.is_empty() {
        return Err(Error::NoTrainingData(class.to_string()));
    }
    let per_tree = config.images_per_tree.min(eligible.len());
    let trees = (0..config.num_trees)
        .into_par_iter()
        .map(|j| {
            let tree_seed = derive_seed(seed, j as u64);
            let mut rng = stream_rng(tree_seed, 1);
            let mut picked = sample(&mut rng, eligible.len(), per_tree).into_vec();
            picked.sort_unstable();
            let images: Vec<&ImageRecord> = picked.iter().map(|&k| eligible[k]).collect();
            let samples = training_samples(&images, class);
            train_tree(&samples, &config.tree, tree_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        class_name: class.to_string(),
        config: *config,
        seed,
        code_bits: dataset.code_bits(),
        embedder: None,
        start_window: Some(crate::search::initial_window(dataset, class)?),
        trees,
    })
}

impl ForestModel {
    /// Wraps pre-built trees, e.g. hand-constructed ones in tests.
    pub fn from_trees(class_name: &str, code_bits: usize, config: ForestConfig, trees: Vec<Tree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::input("a forest needs at least one tree"));
        }
        Ok(ForestModel {
            format_version: MODEL_FORMAT_VERSION,
            class_name: class_name.to_string(),
            config: ForestConfig {
                num_trees: trees.len(),
                ..config
            },
            seed: 0,
            code_bits,
            embedder: None,
            start_window: None,
            trees,
        })
    }

    pub fn with_embedder(mut self, embedder: EmbedderModel) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn start_window(&self) -> Option<Window> {
        self.start_window
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn code_bits(&self) -> usize {
        self.code_bits
    }

    pub fn embedder(&self) -> Option<&EmbedderModel> {
        self.embedder.as_ref()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    /// Displacement predicted by every tree, in tree order.
    pub fn displacements(&self, o: &Proposal) -> Vec<crate::geometry::Displacement> {
        self.trees.iter().map(|t| t.route(o)).collect()
    }

    /// The `J` displaced windows `o + Δv_j`, clamped into the image.
    /// Duplicates are kept.
    pub fn extract_context(&self, o: &Proposal) -> Vec<Window> {
        self.extract_context_counted(o).0
    }

    /// [`ForestModel::extract_context`] plus the total number of node-test
    /// distance evaluations over all trees.
    pub fn extract_context_counted(&self, o: &Proposal) -> (Vec<Window>, usize) {
        let mut evals = 0;
        let windows = self
            .trees
            .iter()
            .map(|t| {
                let (d, n) = t.route_counted(o);
                evals += n;
                apply_displacement(&o.window, &d)
            })
            .collect();
        (windows, evals)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let out = BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer(out, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ForestModel> {
        let value: serde_json::Value = serde_json::from_reader(BufReader::new(fs::File::open(path)?))?;
        let version = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::parse(path, 1, "model lacks `format_version`"))?;
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                found: version as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let model: ForestModel = serde_json::from_value(value)?;
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::input("model has no trees"));
        }
        for t in &self.trees {
            for n in t.nodes() {
                if let Node::Split { test, .. } = n {
                    if test.pivot.code.len() != self.code_bits {
                        return Err(Error::input(format!(
                            "pivot code has {} bits, model declares {}",
                            test.pivot.code.len(),
                            self.code_bits
                        )));
                    }
                }
            }
        }
        if let Some(e) = &self.embedder {
            if e.bits() != self.code_bits {
                return Err(Error::input("embedder bit count differs from model code length"));
            }
        }
        Ok(())
    }
}
