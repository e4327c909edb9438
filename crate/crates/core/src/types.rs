//! Domain types shared by every stage of the pipeline: per-frame feature
//! matrices, sparse timestamp annotations, contiguous segment partitions, and
//! pseudo-label sequences that may contain ambiguous (unlabeled) frames.
//!
//! Frames are 0-indexed and all segment ranges are half-open `[start, end)`.
//! Every type is an immutable value after construction; constructors validate
//! the documented invariants so downstream code can rely on them.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Dense class identifier. Names live in a sidecar table (see the io module).
pub type ClassId = usize;

/// A T x D matrix of per-frame visual features, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f32>,
    frames: usize,
    dim: usize,
}

impl FeatureSequence {
    /// Builds a feature sequence from row-major data. Requires `frames >= 1`,
    /// `dim >= 1`, matching data length, and finite entries.
    pub fn new(frames: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if frames == 0 || dim == 0 {
            return Err(Error::Validation(format!(
                "feature sequence must have frames >= 1 and dim >= 1, got {frames} x {dim}"
            )));
        }
        if data.len() != frames * dim {
            return Err(Error::Validation(format!(
                "feature data length {} does not match {frames} x {dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature sequence at frame {}, column {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { data, frames, dim })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Feature row of frame `t`.
    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// A copy restricted to the given column range, used for feature views
    /// such as separate descriptor halves of a concatenated feature.
    pub fn select_columns(&self, cols: Range<usize>) -> Result<Self> {
        if cols.start >= cols.end || cols.end > self.dim {
            return Err(Error::Validation(format!(
                "column range {}..{} invalid for dim {}",
                cols.start, cols.end, self.dim
            )));
        }
        let width = cols.end - cols.start;
        let mut data = Vec::with_capacity(self.frames * width);
        for t in 0..self.frames {
            data.extend_from_slice(&self.row(t)[cols.start..cols.end]);
        }
        Ok(Self {
            data,
            frames: self.frames,
            dim: width,
        })
    }

    /// Euclidean distance between the features of frames `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ra, rb) = (self.row(a), self.row(b));
        ra.iter()
            .zip(rb)
            .map(|(&x, &y)| {
                let d = x as f64 - y as f64;
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Ordered sparse supervision: one annotated frame per action segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimestampAnnotation {
    entries: Vec<(usize, ClassId)>,
    num_classes: usize,
}

impl TimestampAnnotation {
    /// Validates ordering, class range, and the no-adjacent-duplicate rule
    /// (two consecutive segments never share a class).
    pub fn new(entries: Vec<(usize, ClassId)>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Validation("num_classes must be >= 1".into()));
        }
        for window in entries.windows(2) {
            let (f0, c0) = window[0];
            let (f1, c1) = window[1];
            if f1 <= f0 {
                return Err(Error::Validation(format!(
                    "timestamp frames must be strictly increasing, got {f0} then {f1}"
                )));
            }
            if c0 == c1 {
                return Err(Error::Validation(format!(
                    "adjacent timestamps at frames {f0} and {f1} share class {c0}"
                )));
            }
        }
        if let Some(&(frame, class)) = entries.iter().find(|&&(_, c)| c >= num_classes) {
            return Err(Error::Validation(format!(
                "timestamp at frame {frame} has class {class}, outside [0, {num_classes})"
            )));
        }
        Ok(Self {
            entries,
            num_classes,
        })
    }

    /// Number of timestamps (equals the number of action segments).
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn entries(&self) -> &[(usize, ClassId)] {
        &self.entries
    }

    pub fn frame(&self, n: usize) -> usize {
        self.entries[n].0
    }

    pub fn class(&self, n: usize) -> ClassId {
        self.entries[n].1
    }

    /// Checks that every timestamp frame lies within a sequence of `frames`
    /// frames.
    pub fn check_frames(&self, frames: usize) -> Result<()> {
        if let Some(&(f, _)) = self.entries.last() {
            if f >= frames {
                return Err(Error::Validation(format!(
                    "timestamp frame {f} outside sequence of {frames} frames"
                )));
            }
        }
        Ok(())
    }
}

/// Boundaries of a full contiguous partition: `b_0 = 0 < b_1 < ... < b_N = T`.
/// Segment `n` occupies `[b_n, b_{n+1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPartition {
    boundaries: Vec<usize>,
}

impl SegmentPartition {
    pub fn new(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::Validation(
                "a partition needs at least two boundaries".into(),
            ));
        }
        if boundaries[0] != 0 {
            return Err(Error::Validation(format!(
                "first boundary must be 0, got {}",
                boundaries[0]
            )));
        }
        if let Some(w) = boundaries.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "boundaries must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    pub fn num_segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn total_frames(&self) -> usize {
        *self.boundaries.last().unwrap()
    }

    pub fn segment(&self, n: usize) -> Range<usize> {
        self.boundaries[n]..self.boundaries[n + 1]
    }

    /// Checks that the partition has one segment per timestamp and that each
    /// timestamp falls inside its own segment.
    pub fn validate_against(&self, ts: &TimestampAnnotation) -> Result<()> {
        if self.num_segments() != ts.len() {
            return Err(Error::Validation(format!(
                "partition has {} segments but annotation has {} timestamps",
                self.num_segments(),
                ts.len()
            )));
        }
        ts.check_frames(self.total_frames())?;
        for n in 0..ts.len() {
            let seg = self.segment(n);
            let tau = ts.frame(n);
            if !seg.contains(&tau) {
                return Err(Error::Validation(format!(
                    "timestamp {n} at frame {tau} outside its segment {}..{}",
                    seg.start, seg.end
                )));
            }
        }
        Ok(())
    }
}

/// One maximal run of labeled frames: class over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledRun {
    pub class: ClassId,
    pub start: usize,
    pub end: usize,
}

impl LabeledRun {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// A violated pseudo-label invariant: the first one found, with the frame
/// where it was detected when one exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelViolation {
    pub frame: Option<usize>,
    pub message: String,
}

impl fmt::Display for LabelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(t) => write!(f, "frame {t}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn violation(frame: impl Into<Option<usize>>, message: impl Into<String>) -> LabelViolation {
    LabelViolation {
        frame: frame.into(),
        message: message.into(),
    }
}

/// Checks every pseudo-label invariant against the annotation and returns the
/// labeled runs in timestamp order, or the first violation found.
///
/// The invariants: labeled frames form exactly N maximal runs, one per
/// timestamp and in timestamp order; run n carries the class of timestamp n;
/// each timestamp frame is labeled and lies inside its own run.
pub fn validate_pseudo_labels(
    labels: &[Option<ClassId>],
    ts: &TimestampAnnotation,
) -> std::result::Result<Vec<LabeledRun>, LabelViolation> {
    if labels.is_empty() {
        return Err(violation(None, "label sequence is empty"));
    }
    if let Err(e) = ts.check_frames(labels.len()) {
        return Err(violation(None, e.to_string()));
    }

    let mut runs: Vec<LabeledRun> = Vec::with_capacity(ts.len());
    let mut t = 0;
    while t < labels.len() {
        match labels[t] {
            None => t += 1,
            Some(class) => {
                let start = t;
                while t < labels.len() && labels[t] == Some(class) {
                    t += 1;
                }
                runs.push(LabeledRun {
                    class,
                    start,
                    end: t,
                });
            }
        }
    }

    for (n, run) in runs.iter().enumerate() {
        if n >= ts.len() {
            return Err(violation(
                run.start,
                format!("found more labeled runs than the {} timestamps", ts.len()),
            ));
        }
        if run.class != ts.class(n) {
            return Err(violation(
                run.start,
                format!(
                    "run {n} has class {} but timestamp {n} has class {}",
                    run.class,
                    ts.class(n)
                ),
            ));
        }
        let tau = ts.frame(n);
        if tau < run.start || tau >= run.end {
            return Err(violation(
                tau,
                format!(
                    "timestamp {n} at frame {tau} outside its run {}..{}",
                    run.start, run.end
                ),
            ));
        }
    }
    if runs.len() < ts.len() {
        return Err(violation(
            None,
            format!("found {} labeled runs, expected {}", runs.len(), ts.len()),
        ));
    }
    Ok(runs)
}

/// Per-frame labels where `None` marks an ambiguous frame, together with the
/// run view `(l_n, r_n, class)` derived at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabelSequence {
    labels: Vec<Option<ClassId>>,
    runs: Vec<LabeledRun>,
}

impl PseudoLabelSequence {
    /// Validates the labels against the annotation (see
    /// [`validate_pseudo_labels`]).
    pub fn new(labels: Vec<Option<ClassId>>, ts: &TimestampAnnotation) -> Result<Self> {
        match validate_pseudo_labels(&labels, ts) {
            Ok(runs) => Ok(Self { labels, runs }),
            Err(v) => Err(Error::Validation(format!("pseudo-labels: {v}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, t: usize) -> Option<ClassId> {
        self.labels[t]
    }

    pub fn labels(&self) -> &[Option<ClassId>] {
        &self.labels
    }

    /// Labeled runs in timestamp order.
    pub fn runs(&self) -> &[LabeledRun] {
        &self.runs
    }

    pub fn num_labeled(&self) -> usize {
        self.runs.iter().map(LabeledRun::len).sum()
    }

    /// Fraction of frames carrying a label, in [0, 1].
    pub fn label_rate(&self) -> f64 {
        self.num_labeled() as f64 / self.len() as f64
    }

    pub fn is_full(&self) -> bool {
        self.num_labeled() == self.len()
    }

    /// The boundary view of a full sequence; `None` when any frame is
    /// ambiguous.
    pub fn to_partition(&self) -> Option<SegmentPartition> {
        if !self.is_full() {
            return None;
        }
        let mut boundaries: Vec<usize> = self.runs.iter().map(|r| r.start).collect();
        boundaries.push(self.len());
        Some(SegmentPartition { boundaries })
    }
}

/// Expands a partition into a full pseudo-label sequence: every frame of
/// segment n receives the class of timestamp n.
pub fn partition_to_labels(
    partition: &SegmentPartition,
    ts: &TimestampAnnotation,
) -> Result<PseudoLabelSequence> {
    partition.validate_against(ts)?;
    let total = partition.total_frames();
    let mut labels = vec![None; total];
    for n in 0..ts.len() {
        let class = ts.class(n);
        for t in partition.segment(n) {
            labels[t] = Some(class);
        }
    }
    PseudoLabelSequence::new(labels, ts)
}

/// Encoder hidden features, T x D_h.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSequence {
    data: Vec<f64>,
    frames: usize,
    dim: usize,
}

impl HiddenSequence {
    pub fn new(frames: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), frames * dim);
        Self { data, frames, dim }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-frame class probabilities, T x C, with the matching log-probabilities
/// kept alongside so losses never re-derive logs from rounded probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSequence {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    frames: usize,
    classes: usize,
}

impl ProbSequence {
    /// Constructs from log-probabilities (each row a normalized log-softmax).
    pub fn from_log_probs(frames: usize, classes: usize, log_probs: Vec<f64>) -> Self {
        assert_eq!(log_probs.len(), frames * classes);
        let probs = log_probs.iter().map(|&lp| lp.exp()).collect();
        Self {
            probs,
            log_probs,
            frames,
            classes,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.classes..(t + 1) * self.classes]
    }

    pub fn log_row(&self, t: usize) -> &[f64] {
        &self.log_probs[t * self.classes..(t + 1) * self.classes]
    }

    pub fn prob(&self, t: usize, c: ClassId) -> f64 {
        self.probs[t * self.classes + c]
    }

    pub fn log_prob(&self, t: usize, c: ClassId) -> f64 {
        self.log_probs[t * self.classes + c]
    }

    /// Per-frame argmax labels, ties toward the smaller class id.
    pub fn argmax_labels(&self) -> Vec<ClassId> {
        (0..self.frames)
            .map(|t| {
                let row = self.row(t);
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}
