//! Synthetic scenes whose appearance statistics tie context regions to
//! object locations.
//!
//! Each scene is a stack of horizontal background bands. Objects sit in the
//! lower part of the image; next to every object, at a fixed offset per
//! region type, lies a context region of the object's size (the default
//! "above" region sits right over the object, like sky over a road). Every
//! region type, object and band type owns a random signature code. A
//! proposal takes the signature of whatever contains its center (objects
//! first, then context regions, then bands) with bits flipped independently
//! at the noise rate.
//!
//! Proposals mix tight and loose boxes around objects, jittered copies of
//! the context regions and random boxes, shuffled per scene.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, ImageRecord};
use crate::error::{Error, Result};
use crate::features::{AppearanceCode, Proposal};
use crate::geometry::{iou, Window};
use crate::rng::{derive_seed, stream_rng};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// A context region type: a box of the object's size, shifted by
/// `(dx, dy)` from the object's top-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionType {
    pub name: String,
    pub dx: f64,
    pub dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub class_name: String,
    pub train_scenes: usize,
    pub test_scenes: usize,
    pub proposals_per_image: usize,
    pub code_bits: usize,
    /// Probability of flipping each signature bit.
    pub noise_rate: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub image_width: u32,
    pub image_height: u32,
    pub background_bands: usize,
    pub object_width: [f64; 2],
    pub object_height: [f64; 2],
    /// Proposals with IoU >= 0.6 to each object.
    pub tight_per_object: usize,
    /// Proposals with IoU in [0.05, 0.5] to each object.
    pub loose_per_object: usize,
    /// Jittered copies of each context region.
    pub proposals_per_region: usize,
    /// Maximum jitter of region copies, as a fraction of the region size.
    pub region_jitter: f64,
    pub regions: Vec<RegionType>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 7,
            class_name: "object".to_string(),
            train_scenes: 200,
            test_scenes: 200,
            proposals_per_image: 500,
            code_bits: 512,
            noise_rate: 0.1,
            min_objects: 1,
            max_objects: 2,
            image_width: 640,
            image_height: 480,
            background_bands: 3,
            object_width: [0.08, 0.16],
            object_height: [0.10, 0.20],
            tight_per_object: 3,
            loose_per_object: 8,
            proposals_per_region: 12,
            region_jitter: 0.08,
            regions: vec![RegionType {
                name: "above".to_string(),
                dx: 0.0,
                dy: -0.3,
            }],
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl SyntheticConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_integer()) {
            Some(v) if v == CONFIG_SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(config_err(
                    "schema_version",
                    format!("unsupported version {v}, expected {CONFIG_SCHEMA_VERSION}"),
                ))
            }
            None => return Err(config_err("schema_version", "missing")),
        }
        let cfg: SyntheticConfig =
            toml::from_str(text).map_err(|e| config_err("<document>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        SyntheticConfig::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.proposals_per_image < 10 {
            return Err(config_err("proposals_per_image", "must be at least 10"));
        }
        if !(0.0..0.5).contains(&self.noise_rate) {
            return Err(config_err("noise_rate", "must lie in [0, 0.5)"));
        }
        if self.code_bits == 0 || !self.code_bits.is_multiple_of(8) {
            return Err(config_err("code_bits", "must be a positive multiple of 8"));
        }
        if self.class_name.is_empty() {
            return Err(config_err("class_name", "must not be empty"));
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return Err(config_err("min_objects", "need 1 <= min_objects <= max_objects"));
        }
        if self.background_bands == 0 {
            return Err(config_err("background_bands", "must be at least 1"));
        }
        for (name, r) in [
            ("object_width", self.object_width),
            ("object_height", self.object_height),
        ] {
            if !(r[0] > 0.0 && r[0] <= r[1] && r[1] <= 0.5) {
                return Err(config_err(name, "need 0 < min <= max <= 0.5"));
            }
        }
        if !(0.0..0.5).contains(&self.region_jitter) {
            return Err(config_err("region_jitter", "must lie in [0, 0.5)"));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if !(r.dx.abs() < 1.0 && r.dy.abs() < 1.0) {
                return Err(config_err(&format!("regions[{i}]"), "offsets must lie in (-1, 1)"));
            }
            let clear_x = r.dx.abs() >= self.object_width[1];
            let clear_y = r.dy.abs() >= self.object_height[1];
            if !(clear_x || clear_y) {
                return Err(config_err(&format!("regions[{i}]"), "region would overlap its object"));
            }
        }
        if self.train_scenes + self.test_scenes == 0 {
            return Err(config_err("train_scenes", "need at least one scene"));
        }
        Ok(())
    }
}

/// Signature codes shared by both splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Signatures {
    pub object: AppearanceCode,
    /// One per configured region type, in config order.
    pub regions: Vec<AppearanceCode>,
    /// One per background band, top to bottom.
    pub bands: Vec<AppearanceCode>,
}

/// What a proposal was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProposalSource {
    Tight { object: usize },
    Loose { object: usize },
    Region { object: usize, region: usize },
    Random,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub config: SyntheticConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub signatures: Signatures,
    /// Generation source of every proposal of every test image, keyed by
    /// image id.
    pub test_sources: BTreeMap<String, Vec<ProposalSource>>,
}

fn random_code(rng: &mut ChaCha8Rng, bits: usize) -> AppearanceCode {
    let mut c = AppearanceCode::zeros(bits).expect("validated bit count");
    for i in 0..bits {
        if rng.random_bool(0.5) {
            c.set(i, true);
        }
    }
    c
}

fn noisy(sig: &AppearanceCode, rate: f64, rng: &mut ChaCha8Rng) -> AppearanceCode {
    let mut c = sig.clone();
    if rate > 0.0 {
        for i in 0..c.len() {
            if rng.random_bool(rate) {
                c.flip(i);
            }
        }
    }
    c
}

pub fn make_signatures(config: &SyntheticConfig) -> Signatures {
    let mut rng = stream_rng(config.seed, 0);
    Signatures {
        object: random_code(&mut rng, config.code_bits),
        regions: config
            .regions
            .iter()
            .map(|_| random_code(&mut rng, config.code_bits))
            .collect(),
        bands: (0..config.background_bands)
            .map(|_| random_code(&mut rng, config.code_bits))
            .collect(),
    }
}

struct Layout {
    objects: Vec<Window>,
    /// `regions[k][r]`: region `r` of object `k`.
    regions: Vec<Vec<Window>>,
    /// Lower edges of all bands but the last, ascending.
    band_edges: Vec<f64>,
}

fn contains_point(w: &Window, (px, py): (f64, f64)) -> bool {
    px >= w.x() && px < w.x() + w.w() && py >= w.y() && py < w.y() + w.h()
}

fn overlaps(a: &Window, b: &Window, margin: f64) -> bool {
    a.x() < b.x() + b.w() + margin
        && b.x() < a.x() + a.w() + margin
        && a.y() < b.y() + b.h() + margin
        && b.y() < a.y() + a.h() + margin
}

fn place_objects(config: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Layout {
    let target = rng.random_range(config.min_objects..=config.max_objects);
    let mut objects: Vec<Window> = Vec::new();
    let mut regions: Vec<Vec<Window>> = Vec::new();
    let min_dx = config.regions.iter().map(|r| r.dx).fold(0.0, f64::min);
    let max_dx = config.regions.iter().map(|r| r.dx).fold(0.0, f64::max);
    let min_dy = config.regions.iter().map(|r| r.dy).fold(0.0, f64::min);
    let max_dy = config.regions.iter().map(|r| r.dy).fold(0.0, f64::max);

    'attempts: for _ in 0..2000 {
        if objects.len() == target {
            break;
        }
        let w = rng.random_range(config.object_width[0]..=config.object_width[1]);
        let h = rng.random_range(config.object_height[0]..=config.object_height[1]);
        // objects live in the lower 60% of the image
        let x_lo = -min_dx;
        let x_hi = 1.0 - w - max_dx;
        let y_lo = (-min_dy).max(0.4);
        let y_hi = 1.0 - h - max_dy;
        if x_lo > x_hi || y_lo > y_hi {
            continue;
        }
        let x = rng.random_range(x_lo..=x_hi);
        let y = rng.random_range(y_lo..=y_hi);
        let obj = Window::clamped(x, y, w, h);
        let regs: Vec<Window> = config
            .regions
            .iter()
            .map(|r| Window::clamped(x + r.dx, y + r.dy, w, h))
            .collect();
        let mut mine = vec![obj];
        mine.extend(regs.iter().copied());
        for (k, o) in objects.iter().enumerate() {
            let mut theirs = vec![*o];
            theirs.extend(regions[k].iter().copied());
            for a in &mine {
                for b in &theirs {
                    if overlaps(a, b, 0.02) {
                        continue 'attempts;
                    }
                }
            }
            // every region must stay nearer its own object than any other
            for r in &regs {
                if r.center_distance_sq(o) <= r.center_distance_sq(&obj) * 1.5 {
                    continue 'attempts;
                }
            }
            for r in &regions[k] {
                if r.center_distance_sq(&obj) <= r.center_distance_sq(o) * 1.5 {
                    continue 'attempts;
                }
            }
        }
        objects.push(obj);
        regions.push(regs);
    }

    let mut band_edges: Vec<f64> = (1..config.background_bands)
        .map(|_| rng.random_range(0.15..0.85))
        .collect();
    band_edges.sort_by(f64::total_cmp);
    Layout {
        objects,
        regions,
        band_edges,
    }
}

fn jitter(rng: &mut ChaCha8Rng, base: &Window, amount: f64) -> Window {
    let (w, h) = (base.w(), base.h());
    let mut j = || rng.random_range(-amount..=amount);
    Window::clamped(base.x() + j() * w, base.y() + j() * h, w * (1.0 + j()), h * (1.0 + j()))
}

fn random_window(rng: &mut ChaCha8Rng) -> Window {
    let (lo, hi) = (0.04f64.ln(), 0.5f64.ln());
    let w = rng.random_range(lo..hi).exp();
    let h = rng.random_range(lo..hi).exp();
    let x = rng.random_range(0.0..=1.0 - w);
    let y = rng.random_range(0.0..=1.0 - h);
    Window::clamped(x, y, w, h)
}

/// Samples `base` jitters until one has IoU in `[lo, hi]` with `base`.
fn jitter_in_band(rng: &mut ChaCha8Rng, base: &Window, amount: f64, lo: f64, hi: f64) -> Window {
    let mut last = *base;
    for _ in 0..200 {
        let c = jitter(rng, base, amount);
        let o = iou(&c, base);
        if (lo..=hi).contains(&o) {
            return c;
        }
        last = c;
    }
    last
}

fn loose_window(rng: &mut ChaCha8Rng, obj: &Window) -> Window {
    let mut last = *obj;
    for _ in 0..200 {
        let s = rng.random_range(0.6..2.0);
        let w = obj.w() * s * rng.random_range(0.7..1.4);
        let h = obj.h() * s * rng.random_range(0.7..1.4);
        let (cx, cy) = obj.center();
        let x = cx + rng.random_range(-1.2..1.2) * obj.w() - w / 2.0;
        let y = cy + rng.random_range(-1.2..1.2) * obj.h() - h / 2.0;
        let c = Window::clamped(x, y, w, h);
        let o = iou(&c, obj);
        if (0.05..=0.5).contains(&o) {
            return c;
        }
        last = c;
    }
    last
}

fn scene(config: &SyntheticConfig, sigs: &Signatures, id: String, seed: u64) -> (ImageRecord, Vec<ProposalSource>) {
    let mut rng = stream_rng(seed, 0);
    let layout = place_objects(config, &mut rng);

    let mut items: Vec<(Window, ProposalSource)> = Vec::new();
    for (k, obj) in layout.objects.iter().enumerate() {
        for _ in 0..config.tight_per_object {
            items.push((
                jitter_in_band(&mut rng, obj, 0.12, 0.6, 1.0),
                ProposalSource::Tight { object: k },
            ));
        }
        for _ in 0..config.loose_per_object {
            items.push((loose_window(&mut rng, obj), ProposalSource::Loose { object: k }));
        }
        for (r, reg) in layout.regions[k].iter().enumerate() {
            for _ in 0..config.proposals_per_region {
                let wdw = jitter_in_band(&mut rng, reg, config.region_jitter, 0.5, 1.0);
                items.push((wdw, ProposalSource::Region { object: k, region: r }));
            }
        }
    }
    items.truncate(config.proposals_per_image);
    while items.len() < config.proposals_per_image {
        items.push((random_window(&mut rng), ProposalSource::Random));
    }
    items.shuffle(&mut rng);

    let mut proposals = Vec::with_capacity(items.len());
    let mut sources = Vec::with_capacity(items.len());
    for (wdw, src) in items {
        let c = wdw.center();
        let sig = if layout.objects.iter().any(|o| contains_point(o, c)) {
            &sigs.object
        } else if let Some(r) = layout
            .regions
            .iter()
            .flat_map(|regs| regs.iter().enumerate())
            .find(|(_, reg)| contains_point(reg, c))
            .map(|(r, _)| r)
        {
            &sigs.regions[r]
        } else {
            let band = layout.band_edges.iter().filter(|&&e| c.1 >= e).count();
            &sigs.bands[band]
        };
        proposals.push(Proposal::new(wdw, noisy(sig, config.noise_rate, &mut rng)));
        sources.push(src);
    }

    let record = ImageRecord {
        id,
        width: config.image_width,
        height: config.image_height,
        proposals,
        ground_truth: BTreeMap::from([(config.class_name.clone(), layout.objects)]),
    };
    (record, sources)
}

/// Generates both splits. Scene `i` of a split draws from its own seed
/// stream, so output does not depend on thread count.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let sigs = make_signatures(config);
    let split = |prefix: &str, count: usize, stream: u64| -> Vec<(ImageRecord, Vec<ProposalSource>)> {
        let base = derive_seed(config.seed, stream);
        (0..count)
            .into_par_iter()
            .map(|i| scene(config, &sigs, format!("{prefix}-{i:04}"), derive_seed(base, i as u64)))
            .collect()
    };
    let train: Vec<ImageRecord> = split("train", config.train_scenes, 1)
        .into_iter()
        .map(|s| s.0)
        .collect();
    let (test, sources): (Vec<ImageRecord>, Vec<Vec<ProposalSource>>) =
        split("test", config.test_scenes, 2).into_iter().unzip();
    let test_sources = test.iter().map(|r| r.id.clone()).zip(sources).collect();
    Ok(SyntheticDataset {
        config: config.clone(),
        train: Dataset::new(config.code_bits, train)?,
        test: Dataset::new(config.code_bits, test)?,
        signatures: sigs,
        test_sources,
    })
}
