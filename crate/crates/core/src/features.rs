//! Appearance codes, the random-hyperplane embedder and the two distances
//! available to forest node tests.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, Window};

/// Default appearance code length in bits.
pub const DEFAULT_CODE_BITS: usize = 512;

/// A fixed-length binary appearance descriptor.
///
/// Bit `i` is stored in word `i / 64` at position `i % 64`. In hex form the
/// string reads bit 0 first: byte `k` holds bits `8k..8k+8`, most significant
/// bit first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct AppearanceCode {
    words: Vec<u64>,
    bits: usize,
}

impl AppearanceCode {
    /// All-zero code. `bits` must be a positive multiple of 8.
    pub fn zeros(bits: usize) -> Result<Self> {
        if bits == 0 || !bits.is_multiple_of(8) {
            return Err(Error::input(format!(
                "appearance code length must be a positive multiple of 8, got {bits}"
            )));
        }
        Ok(AppearanceCode {
            words: vec![0; bits.div_ceil(64)],
            bits,
        })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let mut code = AppearanceCode::zeros(bits.len())?;
        for (i, &b) in bits.iter().enumerate() {
            code.set(i, b);
        }
        Ok(code)
    }

    pub fn len(&self) -> usize {
        self.bits
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.bits, "bit {i} out of range for {}-bit code", self.bits);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.bits, "bit {i} out of range for {}-bit code", self.bits);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.bits, "bit {i} out of range for {}-bit code", self.bits);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn complement(&self) -> AppearanceCode {
        let mut out = self.clone();
        for w in out.words.iter_mut() {
            *w = !*w;
        }
        out.clear_padding();
        out
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    fn clear_padding(&mut self) {
        let tail = self.bits % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    /// Number of differing bits; the caller guarantees equal lengths.
    #[inline]
    pub(crate) fn xor_count(&self, other: &AppearanceCode) -> u32 {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        if s.bytes().any(|b| b.is_ascii_uppercase()) {
            return Err(Error::input("appearance code hex must be lowercase"));
        }
        let bytes = hex::decode(s).map_err(|e| Error::input(format!("bad appearance code hex: {e}")))?;
        let mut code = AppearanceCode::zeros(bytes.len() * 8)?;
        for (k, byte) in bytes.iter().enumerate() {
            for j in 0..8 {
                if byte & (0x80 >> j) != 0 {
                    code.set(8 * k + j, true);
                }
            }
        }
        Ok(code)
    }

    fn to_bytes(&self) -> Vec<u8> {
        (0..self.bits / 8)
            .map(|k| (0..8).fold(0u8, |acc, j| if self.get(8 * k + j) { acc | (0x80 >> j) } else { acc }))
            .collect()
    }
}

impl fmt::Debug for AppearanceCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AppearanceCode({}b:{})", self.bits, self.to_hex())
    }
}

impl Serialize for AppearanceCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for AppearanceCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AppearanceCode::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Which distance a forest node test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Location,
    Appearance,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 2] = [DistanceKind::Location, DistanceKind::Appearance];
}

/// `1 - IoU(a, b)`.
#[inline]
pub fn location_distance(a: &Window, b: &Window) -> f64 {
    1.0 - iou(a, b)
}

/// Normalized Hamming distance: differing bits over code length.
pub fn hamming_distance(a: &AppearanceCode, b: &AppearanceCode) -> Result<f64> {
    if a.bits != b.bits {
        return Err(Error::input(format!(
            "appearance code lengths differ: {} vs {}",
            a.bits, b.bits
        )));
    }
    Ok(a.xor_count(b) as f64 / a.bits as f64)
}

/// A candidate window together with its appearance code. Its index within
/// the owning image's proposal list identifies it during a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProposalRepr", into = "ProposalRepr")]
pub struct Proposal {
    pub window: Window,
    pub code: AppearanceCode,
}

impl Proposal {
    pub fn new(window: Window, code: AppearanceCode) -> Self {
        Proposal { window, code }
    }

    /// Distance of the given kind to another proposal. Appearance codes must
    /// have equal length (checked in debug builds only; datasets validate it
    /// on load).
    #[inline]
    pub fn distance(&self, other: &Proposal, kind: DistanceKind) -> f64 {
        match kind {
            DistanceKind::Location => location_distance(&self.window, &other.window),
            DistanceKind::Appearance => {
                debug_assert_eq!(self.code.bits, other.code.bits);
                self.code.xor_count(&other.code) as f64 / self.code.bits as f64
            }
        }
    }
}

/// On-disk layout of a proposal: `[x, y, w, h, "hex"]`.
#[derive(Serialize, Deserialize)]
struct ProposalRepr(f64, f64, f64, f64, AppearanceCode);

impl TryFrom<ProposalRepr> for Proposal {
    type Error = Error;

    fn try_from(r: ProposalRepr) -> Result<Self> {
        Ok(Proposal::new(Window::new(r.0, r.1, r.2, r.3)?, r.4))
    }
}

impl From<Proposal> for ProposalRepr {
    fn from(p: Proposal) -> Self {
        let [x, y, w, h] = p.window.to_array();
        ProposalRepr(x, y, w, h, p.code)
    }
}

/// Serialized form of an embedder: the hyperplanes are regenerated from the
/// seed, so only the parameters are stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedderParams {
    pub input_dim: usize,
    pub bits: usize,
    pub seed: u64,
    /// Standard deviation of the per-bit offsets; 0 gives pure sign hashing.
    pub offset_scale: f64,
}

/// Seeded random-hyperplane sign hashing from real vectors to appearance codes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "EmbedderParams", into = "EmbedderParams")]
pub struct EmbedderModel {
    params: EmbedderParams,
    /// `bits × input_dim`, row-major.
    hyperplanes: Vec<f64>,
    offsets: Vec<f64>,
}

impl PartialEq for EmbedderModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl EmbedderModel {
    pub fn new(params: EmbedderParams) -> Result<Self> {
        if params.input_dim == 0 {
            return Err(Error::param("input_dim", "must be positive"));
        }
        // validates the code length
        AppearanceCode::zeros(params.bits)?;
        if !(params.offset_scale.is_finite() && params.offset_scale >= 0.0) {
            return Err(Error::param("offset_scale", "must be a non-negative real"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let hyperplanes: Vec<f64> = (0..params.bits * params.input_dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let offsets = (0..params.bits)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * params.offset_scale
            })
            .collect();
        Ok(EmbedderModel {
            params,
            hyperplanes,
            offsets,
        })
    }

    pub fn params(&self) -> &EmbedderParams {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    pub fn bits(&self) -> usize {
        self.params.bits
    }

    /// Bit `i` is set iff `dot(v, hyperplane_i) + offset_i > 0`.
    pub fn embed(&self, vector: &[f64]) -> Result<AppearanceCode> {
        let dim = self.params.input_dim;
        if vector.len() != dim {
            return Err(Error::input(format!(
                "embedder expects dimension {dim}, got {}",
                vector.len()
            )));
        }
        let mut code = AppearanceCode::zeros(self.params.bits)?;
        for (i, row) in self.hyperplanes.chunks_exact(dim).enumerate() {
            let dot: f64 = row.iter().zip(vector).map(|(a, b)| a * b).sum();
            if dot + self.offsets[i] > 0.0 {
                code.set(i, true);
            }
        }
        Ok(code)
    }
}

impl TryFrom<EmbedderParams> for EmbedderModel {
    type Error = Error;

    fn try_from(p: EmbedderParams) -> Result<Self> {
        EmbedderModel::new(p)
    }
}

impl From<EmbedderModel> for EmbedderParams {
    fn from(m: EmbedderModel) -> Self {
        m.params
    }
}

/// Free-function form of [`EmbedderModel::embed`].
pub fn embed(vector: &[f64], embedder: &EmbedderModel) -> Result<AppearanceCode> {
    embedder.embed(vector)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_examples() {
        let a = AppearanceCode::from_hex(&"a5".repeat(64)).unwrap();
        assert_eq!(a.len(), 512);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming_distance(&a, &a.complement()).unwrap(), 1.0);
        let mut b = a.clone();
        b.flip(137);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 1.0 / 512.0);
    }

    #[test]
    fn hamming_length_mismatch() {
        let a = AppearanceCode::zeros(8).unwrap();
        let b = AppearanceCode::zeros(16).unwrap();
        assert!(matches!(hamming_distance(&a, &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hex_layout_is_msb_first() {
        let mut c = AppearanceCode::zeros(16).unwrap();
        c.set(0, true);
        c.set(15, true);
        assert_eq!(c.to_hex(), "8001");
        assert_eq!(AppearanceCode::from_hex("8001").unwrap(), c);
        assert!(AppearanceCode::from_hex("8G").is_err());
        assert!(AppearanceCode::from_hex("AB").is_err());
        assert!(AppearanceCode::from_hex("").is_err());
    }

    #[test]
    fn complement_keeps_padding_clear() {
        let c = AppearanceCode::zeros(72).unwrap().complement();
        assert_eq!(c.count_ones(), 72);
    }

    #[test]
    fn embed_zero_vector_is_all_zeros() {
        let m = EmbedderModel::new(EmbedderParams {
            input_dim: 16,
            bits: 64,
            seed: 3,
            offset_scale: 0.0,
        })
        .unwrap();
        let code = m.embed(&[0.0; 16]).unwrap();
        assert_eq!(code.count_ones(), 0);
        assert!(m.embed(&[0.0; 15]).is_err());
    }

    #[test]
    fn embed_is_deterministic() {
        let p = EmbedderParams {
            input_dim: 8,
            bits: 128,
            seed: 11,
            offset_scale: 0.1,
        };
        let v = [0.3, -1.0, 2.0, 0.0, 0.5, 0.25, -0.75, 1.5];
        let a = EmbedderModel::new(p).unwrap().embed(&v).unwrap();
        let b = EmbedderModel::new(p).unwrap().embed(&v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn location_distance_is_inverse_overlap() {
        let a = Window::new(0.1, 0.1, 0.3, 0.3).unwrap();
        let b = Window::new(0.6, 0.6, 0.3, 0.3).unwrap();
        assert_eq!(location_distance(&a, &a), 0.0);
        assert_eq!(location_distance(&a, &b), 1.0);
    }
}
