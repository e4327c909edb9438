//! Evaluation metrics: frame accuracy, segmental edit score (normalized
//! Levenshtein over segment class strings), segmental F1 at an IoU overlap
//! threshold, and pseudo-label quality (labeled-set accuracy and label rate).
//! All scores are percentages in [0, 100].

use crate::error::{Error, Result};
use crate::types::{ClassId, PseudoLabelSequence};

/// Standard overlap thresholds for the segmental F1 score.
pub const F1_THRESHOLDS: [f64; 3] = [0.10, 0.25, 0.50];

/// A maximal run of equal labels over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub class: ClassId,
    pub start: usize,
    pub end: usize,
}

/// Collapses consecutive equal labels into segments covering `[0, T)`.
pub fn segments_of(labels: &[ClassId]) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut t = 0;
    while t < labels.len() {
        let class = labels[t];
        let start = t;
        while t < labels.len() && labels[t] == class {
            t += 1;
        }
        segments.push(Segment { class, start, end: t });
    }
    segments
}

fn check_lengths(pred: &[ClassId], gt: &[ClassId]) -> Result<()> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::Validation(format!(
            "prediction covers {} frames but ground truth covers {}",
            pred.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Percentage of frames whose predicted class matches the ground truth.
pub fn frame_accuracy(pred: &[ClassId], gt: &[ClassId]) -> Result<f64> {
    check_lengths(pred, gt)?;
    let correct = pred.iter().zip(gt).filter(|(a, b)| a == b).count();
    Ok(100.0 * correct as f64 / gt.len() as f64)
}

fn levenshtein(a: &[ClassId], b: &[ClassId]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let subst = prev[j] + usize::from(x != y);
            cur[j + 1] = subst.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized Levenshtein similarity between the two segment class strings:
/// `100 * (1 - distance / max(#pred segments, #gt segments))`, floored at 0.
pub fn edit_score(pred: &[ClassId], gt: &[ClassId]) -> Result<f64> {
    check_lengths(pred, gt)?;
    let p: Vec<ClassId> = segments_of(pred).iter().map(|s| s.class).collect();
    let g: Vec<ClassId> = segments_of(gt).iter().map(|s| s.class).collect();
    let distance = levenshtein(&p, &g) as f64;
    let norm = p.len().max(g.len()) as f64;
    Ok((100.0 * (1.0 - distance / norm)).max(0.0))
}

fn iou(a: &Segment, b: &Segment) -> f64 {
    let inter = a.end.min(b.end).saturating_sub(a.start.max(b.start)) as f64;
    let union = (a.end - a.start + b.end - b.start) as f64 - inter;
    inter / union
}

/// Segmental F1: each predicted segment greedily matches the unmatched
/// ground-truth segment of the same class with the highest IoU (ties toward
/// the earlier one) and counts as a true positive iff that IoU reaches the
/// threshold, inclusively. F1 is 0 when precision + recall is 0.
pub fn f1_at_overlap(pred: &[ClassId], gt: &[ClassId], threshold: f64) -> Result<f64> {
    check_lengths(pred, gt)?;
    let pred_segments = segments_of(pred);
    let gt_segments = segments_of(gt);
    let mut matched = vec![false; gt_segments.len()];
    let mut tp = 0usize;
    for p in &pred_segments {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in gt_segments.iter().enumerate() {
            if matched[j] || g.class != p.class {
                continue;
            }
            let overlap = iou(p, g);
            if best.map_or(true, |(_, b)| overlap > b) {
                best = Some((j, overlap));
            }
        }
        if let Some((j, overlap)) = best {
            if overlap >= threshold {
                matched[j] = true;
                tp += 1;
            }
        }
    }
    let precision = tp as f64 / pred_segments.len() as f64;
    let recall = tp as f64 / gt_segments.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Accuracy over the labeled frames only (absent when nothing is labeled)
/// and the label rate, both as percentages.
pub fn pseudo_label_quality(
    pl: &PseudoLabelSequence,
    gt: &[ClassId],
) -> Result<(Option<f64>, f64)> {
    if pl.len() != gt.len() {
        return Err(Error::Validation(format!(
            "pseudo-labels cover {} frames but ground truth covers {}",
            pl.len(),
            gt.len()
        )));
    }
    let labeled = pl.num_labeled();
    let rate = 100.0 * labeled as f64 / gt.len() as f64;
    if labeled == 0 {
        return Ok((None, rate));
    }
    let mut correct = 0usize;
    for run in pl.runs() {
        for t in run.start..run.end {
            if gt[t] == run.class {
                correct += 1;
            }
        }
    }
    Ok((Some(100.0 * correct as f64 / labeled as f64), rate))
}

/// Per-video scores at the three standard thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoScores {
    pub f1: [f64; 3],
    pub edit: f64,
    pub accuracy: f64,
}

/// Scores one video against its ground truth.
pub fn score_video(pred: &[ClassId], gt: &[ClassId]) -> Result<VideoScores> {
    Ok(VideoScores {
        f1: [
            f1_at_overlap(pred, gt, F1_THRESHOLDS[0])?,
            f1_at_overlap(pred, gt, F1_THRESHOLDS[1])?,
            f1_at_overlap(pred, gt, F1_THRESHOLDS[2])?,
        ],
        edit: edit_score(pred, gt)?,
        accuracy: frame_accuracy(pred, gt)?,
    })
}

/// Dataset-level aggregation: Edit and F1 are unweighted means over videos;
/// accuracy is reported both frame pooled (the headline number) and as the
/// mean of per-video accuracies.
#[derive(Debug, Clone, Default)]
pub struct DatasetEval {
    scores: Vec<VideoScores>,
    correct_frames: usize,
    total_frames: usize,
}

/// Mean scores of a dataset; `None` when no videos were added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetSummary {
    pub f1: [f64; 3],
    pub edit: f64,
    pub frame_pooled_accuracy: f64,
    pub video_mean_accuracy: f64,
}

impl DatasetEval {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, pred: &[ClassId], gt: &[ClassId]) -> Result<VideoScores> {
        let scores = score_video(pred, gt)?;
        self.scores.push(scores);
        self.correct_frames += pred.iter().zip(gt).filter(|(a, b)| a == b).count();
        self.total_frames += gt.len();
        Ok(scores)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn summary(&self) -> Option<DatasetSummary> {
        if self.scores.is_empty() {
            return None;
        }
        let inv = 1.0 / self.scores.len() as f64;
        let mut f1 = [0.0; 3];
        let mut edit = 0.0;
        let mut acc = 0.0;
        for s in &self.scores {
            for (slot, v) in f1.iter_mut().zip(s.f1) {
                *slot += v;
            }
            edit += s.edit;
            acc += s.accuracy;
        }
        Some(DatasetSummary {
            f1: f1.map(|v| v * inv),
            edit: edit * inv,
            frame_pooled_accuracy: 100.0 * self.correct_frames as f64 / self.total_frames as f64,
            video_mean_accuracy: acc * inv,
        })
    }
}
