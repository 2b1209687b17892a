//! Window scorers. The search treats the classifier as a black box returning
//! a calibrated score in `[0, 1]` for a proposal of an image.

use std::collections::HashMap;
use std::fmt::Debug;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::dataio::columnar::{self, ColumnarWriter};
use crate::dataio::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::rng::{derive_seed, stable_hash, stream_rng};

/// A deterministic window classifier.
pub trait Scorer: Send + Sync + Debug {
    /// Score of proposal `index` of `image`, in `[0, 1]`.
    fn score(&self, image: &ImageRecord, index: usize) -> Result<f64>;

    /// Short label describing the per-call cost, reported by benchmarks.
    fn cost_label(&self) -> &str;
}

fn check_score(v: f64, what: impl FnOnce() -> String) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::input(format!("{} = {v} is outside [0, 1]", what())))
    }
}

fn check_index(image: &ImageRecord, index: usize) -> Result<()> {
    if index >= image.proposals.len() {
        return Err(Error::input(format!(
            "proposal index {index} out of range for image `{}` with {} proposals",
            image.id,
            image.proposals.len()
        )));
    }
    Ok(())
}

/// Synthetic stand-in for a trained classifier: the best overlap with any
/// ground-truth box of the class, raised to `gamma`, plus seeded uniform
/// noise, clamped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct OracleScorer {
    class: String,
    gamma: f64,
    noise: f64,
    seed: u64,
}

impl OracleScorer {
    /// `noise` is the half-width of the uniform noise; `0` gives exact IoU
    /// scores.
    pub fn new(class: &str, noise: f64, seed: u64) -> Result<Self> {
        OracleScorer::with_gamma(class, noise, 1.0, seed)
    }

    pub fn with_gamma(class: &str, noise: f64, gamma: f64, seed: u64) -> Result<Self> {
        if !(noise.is_finite() && (0.0..=1.0).contains(&noise)) {
            return Err(Error::param("noise", format!("must lie in [0, 1], got {noise}")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
        }
        Ok(OracleScorer {
            class: class.to_string(),
            gamma,
            noise,
            seed,
        })
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }
}

/// Noise-free oracle score of one proposal window against a box list.
pub fn oracle_score(window: &crate::geometry::Window, ground_truth: &[crate::geometry::Window], gamma: f64) -> f64 {
    let base = ground_truth.iter().map(|g| iou(window, g)).fold(0.0, f64::max);
    base.powf(gamma).clamp(0.0, 1.0)
}

impl Scorer for OracleScorer {
    fn score(&self, image: &ImageRecord, index: usize) -> Result<f64> {
        check_index(image, index)?;
        let window = &image.proposals[index].window;
        let base = oracle_score(window, image.boxes(&self.class), self.gamma);
        let eps = if self.noise > 0.0 {
            let stream = derive_seed(stable_hash(&image.id), index as u64);
            let mut rng = stream_rng(self.seed, stream);
            rng.random_range(-self.noise..=self.noise)
        } else {
            0.0
        };
        Ok((base + eps).clamp(0.0, 1.0))
    }

    fn cost_label(&self) -> &str {
        "oracle-iou"
    }
}

/// Scores of one image, aligned with its proposal indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    scores: Vec<f64>,
}

pub const SCORE_TABLE_KIND: &str = "score-table";
const SCORE_COLUMNS: [&str; 2] = ["proposal_index", "score"];

impl ScoreTable {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        for (i, &s) in scores.iter().enumerate() {
            check_score(s, || format!("score[{i}]"))?;
        }
        Ok(ScoreTable { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, index: usize) -> Result<f64> {
        self.scores.get(index).copied().ok_or_else(|| {
            Error::input(format!(
                "score table has no entry {index} (length {})",
                self.scores.len()
            ))
        })
    }

    /// Reads a score table. Row `k` must carry proposal index `k`.
    pub fn load(path: &Path) -> Result<Self> {
        let rows = columnar::read(path, SCORE_TABLE_KIND, &SCORE_COLUMNS)?;
        let mut scores = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let idx: usize = row.parse(path, 0, "proposal_index")?;
            if idx != k {
                return Err(Error::parse(
                    path,
                    row.line,
                    format!("expected proposal_index {k}, found {idx}"),
                ));
            }
            let s: f64 = row.parse(path, 1, "score")?;
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::parse(path, row.line, format!("score {s} is outside [0, 1]")));
            }
            scores.push(s);
        }
        Ok(ScoreTable { scores })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ColumnarWriter::new(SCORE_TABLE_KIND, &SCORE_COLUMNS);
        for (i, s) in self.scores.iter().enumerate() {
            w.row(&[&i, s]);
        }
        w.write(path)
    }
}

/// Looks up stored scores.
pub fn table_score(table: &ScoreTable, index: usize) -> Result<f64> {
    table.get(index)
}

/// File name of an image's score table inside a table directory.
pub fn score_table_path(dir: &Path, image_id: &str) -> PathBuf {
    dir.join(format!("{image_id}.scores.tsv"))
}

/// Replays externally computed scores, one table per image.
#[derive(Debug, Clone, Default)]
pub struct TableScorer {
    tables: HashMap<String, ScoreTable>,
}

impl TableScorer {
    pub fn new(tables: HashMap<String, ScoreTable>) -> Self {
        TableScorer { tables }
    }

    /// Loads `<dir>/<image_id>.scores.tsv` for every image of the dataset and
    /// checks each table's length against the proposal count.
    pub fn load_dir(dir: &Path, dataset: &Dataset) -> Result<Self> {
        let mut tables = HashMap::new();
        for img in dataset.images() {
            let path = score_table_path(dir, &img.id);
            let table = ScoreTable::load(&path)?;
            if table.len() != img.proposals.len() {
                return Err(Error::Validation {
                    image: img.id.clone(),
                    field: "score table".into(),
                    reason: format!(
                        "{} has {} rows but the image has {} proposals",
                        path.display(),
                        table.len(),
                        img.proposals.len()
                    ),
                });
            }
            tables.insert(img.id.clone(), table);
        }
        Ok(TableScorer { tables })
    }

    /// Precomputes a table for every image using another scorer.
    pub fn tabulate(dataset: &Dataset, scorer: &dyn Scorer) -> Result<Self> {
        let mut tables = HashMap::new();
        for img in dataset.images() {
            let scores = (0..img.proposals.len())
                .map(|i| scorer.score(img, i))
                .collect::<Result<Vec<_>>>()?;
            tables.insert(img.id.clone(), ScoreTable::new(scores)?);
        }
        Ok(TableScorer { tables })
    }

    pub fn table(&self, image_id: &str) -> Option<&ScoreTable> {
        self.tables.get(image_id)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        for (id, t) in &self.tables {
            t.save(&score_table_path(dir, id))?;
        }
        Ok(())
    }
}

impl Scorer for TableScorer {
    fn score(&self, image: &ImageRecord, index: usize) -> Result<f64> {
        let table = self
            .tables
            .get(&image.id)
            .ok_or_else(|| Error::input(format!("no score table for image `{}`", image.id)))?;
        table.get(index)
    }

    fn cost_label(&self) -> &str {
        "table-lookup"
    }
}

/// A scorer returning the same value everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(f64);

impl ConstantScorer {
    pub fn new(v: f64) -> Result<Self> {
        check_score(v, || "constant score".into()).map(ConstantScorer)
    }
}

impl Scorer for ConstantScorer {
    fn score(&self, image: &ImageRecord, index: usize) -> Result<f64> {
        check_index(image, index)?;
        Ok(self.0)
    }

    fn cost_label(&self) -> &str {
        "constant"
    }
}
