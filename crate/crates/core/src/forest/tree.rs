//! Distance-test regression trees.
//!
//! An internal node stores a pivot proposal, a distance kind and a threshold:
//! a query whose distance to the pivot is `>= threshold` goes left, otherwise
//! right. Leaves store one displacement vector, the medoid of the training
//! samples that reached them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{bins_of, gain, medoid, Histogram4};
use crate::error::{Error, Result};
use crate::features::{DistanceKind, Proposal};
use crate::geometry::Displacement;
use crate::rng::stream_rng;

/// Splits whose gain does not exceed this are treated as zero gain.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTest {
    pub pivot: Proposal,
    pub kind: DistanceKind,
    pub threshold: f64,
}

impl NodeTest {
    /// True when the query goes to the left child.
    #[inline]
    pub fn goes_left(&self, o: &Proposal) -> bool {
        o.distance(&self.pivot, self.kind) >= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum Node {
    Split {
        test: NodeTest,
        left: usize,
        right: usize,
    },
    Leaf {
        displacement: Displacement,
        /// Number of training samples that reached the leaf.
        support: usize,
    },
}

/// A binary tree in a flat node array; node 0 is the root and children
/// always have larger indices than their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Node>", into = "Vec<Node>")]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(displacement: Displacement) -> Tree {
        Tree {
            nodes: vec![Node::Leaf {
                displacement,
                support: 1,
            }],
        }
    }

    /// Assembles a tree from raw nodes, checking the layout invariants.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Tree> {
        if nodes.is_empty() {
            return Err(Error::input("tree has no nodes"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            match n {
                Node::Split { test, left, right } => {
                    for &c in [left, right] {
                        if c <= i || c >= nodes.len() {
                            return Err(Error::input(format!("node {i} has invalid child index {c}")));
                        }
                        parents[c] += 1;
                    }
                    if !(0.0..=1.0).contains(&test.threshold) {
                        return Err(Error::input(format!(
                            "node {i} threshold {} outside [0, 1]",
                            test.threshold
                        )));
                    }
                }
                Node::Leaf { support, .. } => {
                    if *support == 0 {
                        return Err(Error::input(format!("leaf {i} has zero support")));
                    }
                }
            }
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return Err(Error::input("tree nodes do not form a single rooted tree"));
        }
        Ok(Tree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Walks from the root to a leaf and returns its displacement.
    pub fn route(&self, o: &Proposal) -> Displacement {
        self.route_counted(o).0
    }

    /// Like [`Tree::route`], also returning the number of distance
    /// evaluations performed (one per internal node on the path).
    pub fn route_counted(&self, o: &Proposal) -> (Displacement, usize) {
        let mut at = 0;
        let mut evals = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { test, left, right } => {
                    evals += 1;
                    at = if test.goes_left(o) { *left } else { *right };
                }
                Node::Leaf { displacement, .. } => return (*displacement, evals),
            }
        }
    }

    /// Number of internal nodes on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

impl TryFrom<Vec<Node>> for Tree {
    type Error = Error;

    fn try_from(nodes: Vec<Node>) -> Result<Self> {
        Tree::from_nodes(nodes)
    }
}

impl From<Tree> for Vec<Node> {
    fn from(t: Tree) -> Self {
        t.nodes
    }
}

/// One training pair: a proposal and the displacement carrying it onto the
/// closest ground-truth box of its image.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSample<'a> {
    pub proposal: &'a Proposal,
    pub displacement: Displacement,
    pub image_id: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Random candidate tests drawn per node.
    pub candidates_per_node: usize,
    pub max_depth: usize,
    /// Nodes with this many samples or fewer become leaves.
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            candidates_per_node: 100,
            max_depth: 15,
            min_leaf: 5,
        }
    }
}

/// The sample indices that ended in each leaf, for inspection in tests.
#[derive(Debug, Clone)]
pub struct LeafMembership {
    pub node: usize,
    pub samples: Vec<usize>,
}

pub fn train_tree(samples: &[TrainingSample<'_>], config: &TreeConfig, seed: u64) -> Result<Tree> {
    train_tree_traced(samples, config, seed).map(|(t, _)| t)
}

/// Trains a tree and reports which samples reached each leaf.
pub fn train_tree_traced(
    samples: &[TrainingSample<'_>],
    config: &TreeConfig,
    seed: u64,
) -> Result<(Tree, Vec<LeafMembership>)> {
    if samples.is_empty() {
        return Err(Error::input("cannot train a tree on zero samples"));
    }
    if config.candidates_per_node == 0 {
        return Err(Error::param("candidates_per_node", "must be positive"));
    }
    let mut builder = Builder {
        samples,
        bins: samples.iter().map(|s| bins_of(&s.displacement)).collect(),
        config,
        rng: stream_rng(seed, 0),
        nodes: Vec::new(),
        leaves: Vec::new(),
        distances: vec![0.0; samples.len()],
    };
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    builder.build(&mut idx, 0);
    Ok((Tree { nodes: builder.nodes }, builder.leaves))
}

struct Builder<'s, 'a> {
    samples: &'s [TrainingSample<'a>],
    bins: Vec<[u8; 4]>,
    config: &'s TreeConfig,
    rng: rand_chacha::ChaCha8Rng,
    nodes: Vec<Node>,
    leaves: Vec<LeafMembership>,
    distances: Vec<f64>,
}

struct Candidate {
    pivot: usize,
    kind: DistanceKind,
    threshold: f64,
    gain: f64,
}

impl Builder<'_, '_> {
    fn histogram(&self, idx: &[usize]) -> Histogram4 {
        let mut h = Histogram4::new();
        for &i in idx {
            h.add(&self.bins[i]);
        }
        h
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        // placeholder, overwritten below
        self.nodes.push(Node::Leaf {
            displacement: Displacement::ZERO,
            support: 1,
        });

        let parent = self.histogram(idx);
        let splittable = depth < self.config.max_depth && idx.len() > self.config.min_leaf && parent.entropy() > 0.0;
        let best = if splittable {
            self.best_split(idx, &parent)
        } else {
            None
        };

        match best {
            Some(c) => {
                let pivot = self.samples[c.pivot].proposal;
                // stable partition: left (distance >= threshold) first
                let (mut left, mut right): (Vec<usize>, Vec<usize>) = idx
                    .iter()
                    .copied()
                    .partition(|&i| self.samples[i].proposal.distance(pivot, c.kind) >= c.threshold);
                debug_assert!(!left.is_empty() && !right.is_empty());
                debug_assert!(c.gain >= 0.0);
                let l = self.build(&mut left, depth + 1);
                let r = self.build(&mut right, depth + 1);
                self.nodes[id] = Node::Split {
                    test: NodeTest {
                        pivot: pivot.clone(),
                        kind: c.kind,
                        threshold: c.threshold,
                    },
                    left: l,
                    right: r,
                };
            }
            None => {
                idx.sort_unstable();
                let ds: Vec<Displacement> = idx.iter().map(|&i| self.samples[i].displacement).collect();
                let m = medoid(&ds).expect("leaf holds at least one sample");
                self.nodes[id] = Node::Leaf {
                    displacement: ds[m],
                    support: idx.len(),
                };
                self.leaves.push(LeafMembership {
                    node: id,
                    samples: idx.to_vec(),
                });
            }
        }
        id
    }

    /// Draws random (pivot, kind, threshold) triplets and keeps the one with
    /// the highest gain among those that leave both children non-empty.
    fn best_split(&mut self, idx: &[usize], parent: &Histogram4) -> Option<Candidate> {
        let n = idx.len();
        let mut best: Option<Candidate> = None;
        for _ in 0..self.config.candidates_per_node {
            let pivot = idx[self.rng.random_range(0..n)];
            let kind = if self.rng.random_bool(0.5) {
                DistanceKind::Location
            } else {
                DistanceKind::Appearance
            };
            let pivot_p = self.samples[pivot].proposal;
            for (slot, &i) in self.distances[..n].iter_mut().zip(idx.iter()) {
                *slot = self.samples[i].proposal.distance(pivot_p, kind);
            }
            let threshold = self.distances[self.rng.random_range(0..n)];

            let mut left = Histogram4::new();
            for (k, &i) in idx.iter().enumerate() {
                if self.distances[k] >= threshold {
                    left.add(&self.bins[i]);
                }
            }
            if left.total() == 0 || left.total() as usize == n {
                continue;
            }
            let right = parent.minus(&left);
            let g = gain(parent, &left, &right);
            if best.as_ref().is_none_or(|b| g > b.gain) {
                best = Some(Candidate {
                    pivot,
                    kind,
                    threshold,
                    gain: g,
                });
            }
        }
        best.filter(|c| c.gain > MIN_GAIN)
    }
}
