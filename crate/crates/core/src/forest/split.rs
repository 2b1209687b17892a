//! Split scoring for displacement regression: per-dimension histogram
//! entropy, information gain and leaf medoids.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::Displacement;

/// Equal-width bins per displacement dimension over `[-1, 1]`.
pub const HISTOGRAM_BINS: usize = 20;

/// Bin of one displacement component; values outside `[-1, 1]` land in the
/// edge bins.
#[inline]
pub fn bin_of(v: f64) -> usize {
    let b = ((v + 1.0) * 0.5 * HISTOGRAM_BINS as f64).floor();
    if b.is_nan() || b < 0.0 {
        0
    } else {
        (b as usize).min(HISTOGRAM_BINS - 1)
    }
}

#[inline]
pub(crate) fn bins_of(d: &Displacement) -> [u8; 4] {
    let a = d.to_array();
    [
        bin_of(a[0]) as u8,
        bin_of(a[1]) as u8,
        bin_of(a[2]) as u8,
        bin_of(a[3]) as u8,
    ]
}

/// Four independent histograms, one per displacement dimension.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Histogram4 {
    counts: [[u32; HISTOGRAM_BINS]; 4],
    total: u32,
}

impl Histogram4 {
    pub(crate) fn new() -> Self {
        Histogram4 {
            counts: [[0; HISTOGRAM_BINS]; 4],
            total: 0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, bins: &[u8; 4]) {
        for (dim, &b) in bins.iter().enumerate() {
            self.counts[dim][b as usize] += 1;
        }
        self.total += 1;
    }

    pub(crate) fn total(&self) -> u32 {
        self.total
    }

    /// `self - other`, where `other` counts a subset of `self`.
    pub(crate) fn minus(&self, other: &Histogram4) -> Histogram4 {
        let mut out = self.clone();
        for dim in 0..4 {
            for b in 0..HISTOGRAM_BINS {
                out.counts[dim][b] -= other.counts[dim][b];
            }
        }
        out.total -= other.total;
        out
    }

    /// Sum over dimensions of the Shannon entropy (bits) of each histogram.
    pub(crate) fn entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let n = self.total as f64;
        let mut h = 0.0;
        for dim in &self.counts {
            for &c in dim {
                if c > 0 {
                    let p = c as f64 / n;
                    h -= p * p.log2();
                }
            }
        }
        h
    }
}

/// Information gain of splitting `parent` into `left` and `right`, from
/// histograms whose totals satisfy `left + right = parent`.
pub(crate) fn gain(parent: &Histogram4, left: &Histogram4, right: &Histogram4) -> f64 {
    let n = parent.total as f64;
    parent.entropy() - left.total as f64 / n * left.entropy() - right.total as f64 / n * right.entropy()
}

fn histogram(ds: &[Displacement]) -> Histogram4 {
    let mut h = Histogram4::new();
    for d in ds {
        h.add(&bins_of(d));
    }
    h
}

/// Approximate entropy of a set of displacement vectors: the sum of the
/// entropies of the four per-dimension histograms.
pub fn entropy(displacements: &[Displacement]) -> Result<f64> {
    if displacements.is_empty() {
        return Err(Error::input("entropy of an empty displacement set"));
    }
    Ok(histogram(displacements).entropy())
}

/// `H(S) - |L|/|S| H(L) - |R|/|S| H(R)`.
///
/// `left` and `right` must both be non-empty and together form `parent` as a
/// multiset.
pub fn information_gain(parent: &[Displacement], left: &[Displacement], right: &[Displacement]) -> Result<f64> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::input("a split needs two non-empty sides"));
    }
    if left.len() + right.len() != parent.len() {
        return Err(Error::input(format!(
            "split sizes {} + {} do not add up to parent size {}",
            left.len(),
            right.len(),
            parent.len()
        )));
    }
    let key = |d: &Displacement| d.to_array().map(f64::to_bits);
    let mut p: Vec<_> = parent.iter().map(key).collect();
    let mut c: Vec<_> = left.iter().chain(right).map(key).collect();
    p.sort_unstable();
    c.sort_unstable();
    if p != c {
        return Err(Error::input("left and right do not partition the parent set"));
    }
    Ok(gain(&histogram(parent), &histogram(left), &histogram(right)))
}

/// Index of the medoid: the element minimizing the summed Euclidean distance
/// to all others. Ties go to the lowest index.
pub fn medoid(displacements: &[Displacement]) -> Result<usize> {
    if displacements.is_empty() {
        return Err(Error::input("medoid of an empty set"));
    }
    // Equal vectors have equal sums, so work on distinct values weighted by
    // multiplicity, each represented by its first index.
    let mut first_index: HashMap<[u64; 4], usize> = HashMap::new();
    let mut distinct: Vec<(usize, u32)> = Vec::new();
    for (i, d) in displacements.iter().enumerate() {
        let k = d.to_array().map(f64::to_bits);
        match first_index.get(&k) {
            Some(&slot) => distinct[slot].1 += 1,
            None => {
                first_index.insert(k, distinct.len());
                distinct.push((i, 1));
            }
        }
    }
    let mut best = (f64::INFINITY, usize::MAX);
    for &(i, _) in &distinct {
        let u = &displacements[i];
        let sum: f64 = distinct
            .iter()
            .map(|&(j, count)| count as f64 * u.distance(&displacements[j]))
            .sum();
        if sum < best.0 || (sum == best.0 && i < best.1) {
            best = (sum, i);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(v: f64) -> Displacement {
        Displacement::new(v, v, v, v)
    }

    #[test]
    fn bins_cover_closed_range() {
        assert_eq!(bin_of(-1.0), 0);
        assert_eq!(bin_of(1.0), HISTOGRAM_BINS - 1);
        assert_eq!(bin_of(0.0), 10);
        assert_eq!(bin_of(-0.95), 0);
        assert_eq!(bin_of(-0.85), 1);
        assert_eq!(bin_of(-7.0), 0);
    }

    #[test]
    fn entropy_identical_is_zero() {
        assert_eq!(entropy(&[d(0.3); 17]).unwrap(), 0.0);
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn entropy_uniform_over_all_bins() {
        let ds: Vec<Displacement> = (0..HISTOGRAM_BINS).map(|b| d(-1.0 + 0.1 * b as f64 + 0.05)).collect();
        let h = entropy(&ds).unwrap();
        assert!((h - 4.0 * (HISTOGRAM_BINS as f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn entropy_two_clusters_by_hand() {
        // 3 samples in one bin, 1 in another, in every dimension
        let ds = [d(0.01), d(0.02), d(0.03), d(-0.5)];
        let per_dim = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((entropy(&ds).unwrap() - 4.0 * per_dim).abs() < 1e-12);
    }

    #[test]
    fn gain_of_perfect_split_equals_parent_entropy() {
        let left = vec![d(0.5); 4];
        let right = vec![d(-0.5); 6];
        let parent: Vec<_> = left.iter().chain(&right).copied().collect();
        let ig = information_gain(&parent, &left, &right).unwrap();
        let h = entropy(&parent).unwrap();
        assert!(h > 0.0);
        assert!((ig - h).abs() < 1e-12);
    }

    #[test]
    fn gain_rejects_bad_partitions() {
        let p = vec![d(0.1), d(0.2)];
        assert!(information_gain(&p, &p, &[]).is_err());
        assert!(information_gain(&p, &[d(0.1)], &[d(0.3)]).is_err());
        assert!(information_gain(&p, &[d(0.1)], &[d(0.2), d(0.2)]).is_err());
    }

    #[test]
    fn medoid_tie_breaks_low_index() {
        assert_eq!(medoid(&[d(0.0), d(1.0)]).unwrap(), 0);
        assert_eq!(medoid(&[d(0.9), d(0.1), d(0.0), d(0.1)]).unwrap(), 1);
        assert!(medoid(&[]).is_err());
    }
}
