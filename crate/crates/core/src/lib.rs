//! Timestamp-supervised temporal action segmentation as a clustering
//! problem.
//!
//! Given per-frame features and one annotated frame per action segment, the
//! pipeline is:
//!
//! 1. [`boundary`] — three algorithms that each turn features plus timestamps
//!    into a full contiguous partition: an energy-function split, constrained
//!    k-medoids, and temporal agglomerative clustering.
//! 2. [`ensemble`] — intersect the resulting label sequences; frames where
//!    the algorithms disagree become ambiguous and carry no label.
//! 3. [`ic`] — train a small frame encoder ([`encoder`], [`losses`]) while
//!    per epoch propagating labels into the ambiguous intervals by distance
//!    to the surrounding segment centers.
//! 4. [`metrics`] — frame accuracy, segmental edit score, and segmental F1
//!    at overlap thresholds.
//!
//! [`synth`] generates seeded piecewise-stationary datasets so the whole
//! pipeline is verifiable at desk scale, and [`io`] pins the on-disk formats.

pub mod boundary;
pub mod encoder;
pub mod ensemble;
pub mod error;
pub mod ic;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    partition_to_labels, validate_pseudo_labels, ClassId, FeatureSequence, HiddenSequence,
    LabeledRun, ProbSequence, PseudoLabelSequence, SegmentPartition, TimestampAnnotation,
};
