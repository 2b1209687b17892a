//! Active window search for object class detection.
//!
//! Instead of scoring every object proposal of an image, the search keeps a
//! belief value per proposal and repeatedly evaluates the most promising
//! unvisited one. Two forces update the beliefs after each evaluation: the
//! classifier score pulls the search toward (or pushes it away from) the
//! observed window, and a random forest predicts from the window's
//! appearance and location where objects should be.
//!
//! Modules, bottom up:
//!
//! * [`geometry`]: windows, IoU, the overlap kernel, displacements.
//! * [`features`]: binary appearance codes and the two proposal distances.
//! * [`forest`]: the distance-test regression forest.
//! * [`search`]: belief state, forces and the episode loop.
//! * [`eval`]: NMS, AP, budget curves, baselines and tuning.
//! * [`dataio`]: dataset files and the synthetic scene generator.
//! * [`cli`]: the `active-search` command-line tool.

pub mod bench;
pub mod classifier;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod export;
pub mod features;
pub mod forest;
pub mod geometry;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
