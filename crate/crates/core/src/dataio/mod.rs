//! Dataset records, the line-delimited dataset file format and the synthetic
//! scene generator.
//!
//! A dataset file is JSON Lines. The first line is a header object carrying
//! `schema_version`; every following line is one [`ImageRecord`]:
//!
//! ```text
//! {"schema_version":1,"format":"active-search/dataset","code_bits":512,"images":2}
//! {"id":"img-0","width":640,"height":480,"proposals":[[0.1,0.2,0.3,0.3,"a5..."]],"ground_truth":{"object":[[0.1,0.2,0.3,0.3]]}}
//! ```

pub mod columnar;
pub mod synthetic;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Proposal;
use crate::geometry::Window;

pub const DATASET_SCHEMA_VERSION: u32 = 1;
const DATASET_FORMAT: &str = "active-search/dataset";

/// Ground-truth boxes of one class, keyed by image id. Images without boxes
/// of the class map to an empty list.
pub type GroundTruth = BTreeMap<String, Vec<Window>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    /// Pixel size, kept for provenance only.
    pub width: u32,
    pub height: u32,
    pub proposals: Vec<Proposal>,
    #[serde(default)]
    pub ground_truth: BTreeMap<String, Vec<Window>>,
}

impl ImageRecord {
    pub fn boxes(&self, class: &str) -> &[Window] {
        self.ground_truth.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    fn invalid(&self, field: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::Validation {
            image: self.id.clone(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Checks the record invariants. `code_bits` is the dataset-wide code
    /// length every proposal must match.
    pub fn validate(&self, code_bits: usize) -> Result<()> {
        if self.id.is_empty() {
            return Err(self.invalid("id", "empty image id"));
        }
        if self.proposals.is_empty() {
            return Err(self.invalid("proposals", "image has no proposals"));
        }
        for (i, p) in self.proposals.iter().enumerate() {
            if !p.window.is_inside_image() {
                return Err(self.invalid(
                    format!("proposals[{i}]"),
                    format!("window {:?} extends outside the image", p.window.to_array()),
                ));
            }
            if p.code.len() != code_bits {
                return Err(self.invalid(
                    format!("proposals[{i}].code"),
                    format!("code has {} bits, dataset uses {code_bits}", p.code.len()),
                ));
            }
        }
        for (class, boxes) in &self.ground_truth {
            for (i, b) in boxes.iter().enumerate() {
                if !b.is_inside_image() {
                    return Err(self.invalid(
                        format!("ground_truth.{class}[{i}]"),
                        format!("box {:?} extends outside the image", b.to_array()),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    code_bits: usize,
    images: Vec<ImageRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema_version: u32,
    format: String,
    code_bits: usize,
    images: usize,
}

impl Dataset {
    /// Validates every record and rejects duplicate ids.
    pub fn new(code_bits: usize, images: Vec<ImageRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for img in &images {
            img.validate(code_bits)?;
            if !seen.insert(img.id.as_str()) {
                return Err(img.invalid("id", "duplicate image id"));
            }
        }
        Ok(Dataset { code_bits, images })
    }

    pub fn code_bits(&self) -> usize {
        self.code_bits
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|i| i.id == id)
    }

    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .images
            .iter()
            .flat_map(|i| i.ground_truth.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.images.iter().any(|i| !i.boxes(class).is_empty())
    }

    pub fn ground_truth(&self, class: &str) -> GroundTruth {
        self.images
            .iter()
            .map(|i| (i.id.clone(), i.boxes(class).to_vec()))
            .collect()
    }

    /// Records whose ids are in `ids`, in dataset order.
    pub fn subset(&self, ids: &HashSet<&str>) -> Dataset {
        Dataset {
            code_bits: self.code_bits,
            images: self
                .images
                .iter()
                .filter(|i| ids.contains(i.id.as_str()))
                .cloned()
                .collect(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut out = BufWriter::new(fs::File::create(path)?);
        let header = Header {
            schema_version: DATASET_SCHEMA_VERSION,
            format: DATASET_FORMAT.to_string(),
            code_bits: self.code_bits,
            images: self.images.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for img in &self.images {
            serde_json::to_writer(&mut out, img)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Loads and validates a dataset file.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty dataset file"))??;
    let header: serde_json::Value = serde_json::from_str(&first).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let version = header
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse(path, 1, "header lacks `schema_version`"))?;
    if version != DATASET_SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: version as u32,
            expected: DATASET_SCHEMA_VERSION,
        });
    }
    let header: Header = serde_json::from_value(header).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if header.format != DATASET_FORMAT {
        return Err(Error::parse(path, 1, format!("unknown format `{}`", header.format)));
    }

    let mut images = Vec::with_capacity(header.images);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let img: ImageRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 2, e.to_string()))?;
        images.push(img);
    }
    if images.len() != header.images {
        return Err(Error::parse(
            path,
            1,
            format!("header declares {} images, file has {}", header.images, images.len()),
        ));
    }
    Dataset::new(header.code_bits, images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::AppearanceCode;

    fn record(id: &str) -> ImageRecord {
        let code = AppearanceCode::from_hex("0f").unwrap();
        ImageRecord {
            id: id.to_string(),
            width: 100,
            height: 80,
            proposals: vec![
                Proposal::new(Window::new(0.1, 0.1, 0.2, 0.2).unwrap(), code.clone()),
                Proposal::new(Window::new(0.5, 0.5, 0.3, 0.2).unwrap(), code),
            ],
            ground_truth: BTreeMap::from([("object".to_string(), vec![Window::new(0.1, 0.1, 0.2, 0.2).unwrap()])]),
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = Dataset::new(8, vec![record("a"), record("b")]).unwrap();
        ds.save(&path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back, ds);
    }

    #[test]
    fn rejects_duplicate_ids() {
        let err = Dataset::new(8, vec![record("a"), record("a")]).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "id"));
    }

    #[test]
    fn rejects_zero_width_proposal_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let ds = Dataset::new(8, vec![record("a")]).unwrap();
        ds.save(&path).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("[0.5,0.5,0.3,0.2", "[0.5,0.5,0.0,0.2");
        fs::write(&path, text).unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_out_of_image_and_mixed_code_lengths() {
        let mut r = record("a");
        r.proposals[1].window = Window::new(0.9, 0.5, 0.3, 0.2).unwrap();
        let err = Dataset::new(8, vec![r]).unwrap_err();
        assert!(err.to_string().contains("proposals[1]"), "{err}");

        let mut r = record("a");
        r.proposals[0].code = AppearanceCode::zeros(16).unwrap();
        assert!(Dataset::new(8, vec![r]).is_err());
    }

    #[test]
    fn rejects_newer_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        fs::write(
            &path,
            "{\"schema_version\":2,\"format\":\"active-search/dataset\",\"code_bits\":8,\"images\":0}\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(Error::SchemaVersion { found: 2, .. })
        ));
    }
}
