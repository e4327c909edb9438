//! Iterative clustering: per-epoch cluster centers over labeled segments,
//! bidirectional label propagation into the ambiguous intervals between
//! segments, and the outer training loop (a warmup phase on timestamp-only
//! labels followed by propagation-interleaved epochs).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoder::{
    adam_step, backward, forward_pass, init_params, EncoderConfig, EncoderParams, OptimizerState,
};
use crate::error::{Error, Result};
use crate::losses::{total_loss, LossWeights};
use crate::types::{
    ClassId, FeatureSequence, HiddenSequence, PseudoLabelSequence, TimestampAnnotation,
};

/// Per-segment mean of hidden features over the labeled frames, N x D_h.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCenters {
    data: Vec<f64>,
    count: usize,
    dim: usize,
}

impl ClusterCenters {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }
}

/// Mean of the hidden rows over each labeled run `[l_n, r_n)`.
pub fn compute_centers(hidden: &HiddenSequence, pl: &PseudoLabelSequence) -> Result<ClusterCenters> {
    if hidden.frames() != pl.len() {
        return Err(Error::Validation(format!(
            "hidden features cover {} frames but pseudo-labels cover {}",
            hidden.frames(),
            pl.len()
        )));
    }
    let dim = hidden.dim();
    let mut data = vec![0.0f64; pl.runs().len() * dim];
    for (n, run) in pl.runs().iter().enumerate() {
        let out = &mut data[n * dim..(n + 1) * dim];
        for t in run.start..run.end {
            for (acc, &h) in out.iter_mut().zip(hidden.row(t)) {
                *acc += h;
            }
        }
        let inv = 1.0 / run.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(ClusterCenters {
        data,
        count: pl.runs().len(),
        dim,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Grows each labeled run into its neighboring ambiguous interval. For every
/// gap, a left-to-right pass extends the left run over frames strictly closer
/// to its center than to the right one, then a right-to-left pass pulls the
/// right run's start over frames strictly closer to the right center, never
/// crossing the (already advanced) left run. Tie frames stay ambiguous and
/// stop the pass. Centers are never recomputed here, every previously labeled
/// frame keeps its label, and the result is idempotent under re-application
/// with the same hidden features and centers.
pub fn propagate(
    hidden: &HiddenSequence,
    pl: &PseudoLabelSequence,
    centers: &ClusterCenters,
    ts: &TimestampAnnotation,
) -> Result<PseudoLabelSequence> {
    if centers.count() != pl.runs().len() {
        return Err(Error::Validation(format!(
            "{} centers for {} labeled runs",
            centers.count(),
            pl.runs().len()
        )));
    }
    if hidden.frames() != pl.len() || hidden.dim() != centers.dim() {
        return Err(Error::Validation(
            "hidden feature shape does not match labels or centers".into(),
        ));
    }

    let mut bounds: Vec<(usize, usize)> =
        pl.runs().iter().map(|run| (run.start, run.end)).collect();
    for gap in 0..bounds.len().saturating_sub(1) {
        let left_center = centers.row(gap);
        let right_center = centers.row(gap + 1);
        while bounds[gap].1 < bounds[gap + 1].0 {
            let t = bounds[gap].1;
            let row = hidden.row(t);
            if squared_distance(row, left_center) < squared_distance(row, right_center) {
                bounds[gap].1 += 1;
            } else {
                break;
            }
        }
        while bounds[gap + 1].0 > bounds[gap].1 {
            let t = bounds[gap + 1].0 - 1;
            let row = hidden.row(t);
            if squared_distance(row, right_center) < squared_distance(row, left_center) {
                bounds[gap + 1].0 -= 1;
            } else {
                break;
            }
        }
    }

    let mut labels: Vec<Option<ClassId>> = vec![None; pl.len()];
    for (run, &(start, end)) in pl.runs().iter().zip(&bounds) {
        for slot in &mut labels[start..end] {
            *slot = Some(run.class);
        }
    }
    PseudoLabelSequence::new(labels, ts)
}

/// One video of a training corpus: features, its timestamp annotation, and
/// optionally the ground-truth labels used only for history bookkeeping.
#[derive(Debug, Clone)]
pub struct VideoSample {
    pub id: String,
    pub features: FeatureSequence,
    pub ts: TimestampAnnotation,
    pub gt: Option<Vec<ClassId>>,
}

/// The training schedule: a warmup phase on timestamp-only supervision
/// followed by propagation-interleaved epochs.
#[derive(Debug, Clone)]
pub struct TrainSchedule {
    pub warmup_epochs: usize,
    pub ic_epochs: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            warmup_epochs: 50,
            ic_epochs: 20,
            learning_rate: 5e-4,
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

/// Which phase an epoch belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    IterativeClustering,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::IterativeClustering => "ic",
        }
    }
}

/// Loss components (means over videos), label rate, and pseudo-label accuracy
/// recorded after each epoch. Rates and accuracies are percentages.
#[derive(Debug, Clone)]
pub struct EpochStats {
    pub epoch: usize,
    pub phase: Phase,
    pub total: f64,
    pub classification: f64,
    pub smoothing: f64,
    pub confidence: f64,
    pub clustering: f64,
    pub label_rate: f64,
    pub pl_accuracy: Option<f64>,
    /// Labeled frame count per video, for monotonicity checks.
    pub per_video_labeled: Vec<usize>,
}

/// Everything a training run produces.
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub history: Vec<EpochStats>,
    /// Final pseudo-label state per video, in input order.
    pub final_labels: Vec<PseudoLabelSequence>,
}

/// A pseudo-label sequence carrying only the annotated timestamp frames.
pub fn timestamp_only_labels(
    ts: &TimestampAnnotation,
    frames: usize,
) -> Result<PseudoLabelSequence> {
    let mut labels = vec![None; frames];
    for &(frame, class) in ts.entries() {
        if frame >= frames {
            return Err(Error::Validation(format!(
                "timestamp frame {frame} outside sequence of {frames} frames"
            )));
        }
        labels[frame] = Some(class);
    }
    PseudoLabelSequence::new(labels, ts)
}

fn corpus_stats(
    videos: &[VideoSample],
    labels: &[PseudoLabelSequence],
) -> (f64, Option<f64>, Vec<usize>) {
    let mut frames = 0usize;
    let mut labeled = 0usize;
    let mut correct = 0usize;
    let mut checked = 0usize;
    let mut per_video = Vec::with_capacity(labels.len());
    for (video, pl) in videos.iter().zip(labels) {
        frames += pl.len();
        labeled += pl.num_labeled();
        per_video.push(pl.num_labeled());
        if let Some(gt) = &video.gt {
            for run in pl.runs() {
                for t in run.start..run.end {
                    checked += 1;
                    if gt[t] == run.class {
                        correct += 1;
                    }
                }
            }
        }
    }
    let rate = 100.0 * labeled as f64 / frames as f64;
    let accuracy = (checked > 0).then(|| 100.0 * correct as f64 / checked as f64);
    (rate, accuracy, per_video)
}

/// Trains the encoder: `warmup_epochs` epochs on timestamp-only labels with
/// the clustering term disabled, then `ic_epochs` epochs that each forward
/// every video, compute centers from the current pseudo-labels, propagate
/// them into the ambiguous intervals, and run one optimization epoch on the
/// updated labels with the full weighted loss. Pseudo-label boundaries
/// persist across epochs, so each video's labeled set only grows.
pub fn train_ic(
    videos: &[VideoSample],
    initial_labels: &[PseudoLabelSequence],
    schedule: &TrainSchedule,
    encoder_cfg: &EncoderConfig,
) -> Result<TrainOutcome> {
    if videos.is_empty() {
        return Err(Error::Validation("training corpus is empty".into()));
    }
    if videos.len() != initial_labels.len() {
        return Err(Error::Validation(format!(
            "{} videos but {} initial pseudo-label sequences",
            videos.len(),
            initial_labels.len()
        )));
    }
    schedule.weights.validate()?;
    for (video, pl) in videos.iter().zip(initial_labels) {
        if pl.len() != video.features.frames() {
            return Err(Error::Validation(format!(
                "video '{}': pseudo-labels cover {} frames, features {}",
                video.id,
                pl.len(),
                video.features.frames()
            )));
        }
        if let Some(gt) = &video.gt {
            if gt.len() != video.features.frames() {
                return Err(Error::Validation(format!(
                    "video '{}': ground truth covers {} frames, features {}",
                    video.id,
                    gt.len(),
                    video.features.frames()
                )));
            }
        }
    }

    let mut params = init_params(encoder_cfg)?;
    let mut optimizer = OptimizerState::new(params.len(), schedule.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
    let mut labels: Vec<PseudoLabelSequence> = initial_labels.to_vec();
    let mut history = Vec::with_capacity(schedule.warmup_epochs + schedule.ic_epochs);

    let warmup_labels: Vec<PseudoLabelSequence> = videos
        .iter()
        .map(|v| timestamp_only_labels(&v.ts, v.features.frames()))
        .collect::<Result<_>>()?;
    let warmup_weights = LossWeights {
        gamma: 0.0,
        ..schedule.weights
    };

    let mut epoch = 0usize;
    for _ in 0..schedule.warmup_epochs {
        let stats = train_epoch(
            videos,
            &warmup_labels,
            &labels,
            &mut params,
            &mut optimizer,
            &mut rng,
            &warmup_weights,
            epoch,
            Phase::Warmup,
        )?;
        history.push(stats);
        epoch += 1;
    }

    for _ in 0..schedule.ic_epochs {
        // centers from the current model and labels, then propagation
        let updated: Vec<PseudoLabelSequence> = videos
            .par_iter()
            .zip(labels.par_iter())
            .map(|(video, pl)| {
                let pass = forward_pass(&params, &video.features)?;
                let centers = compute_centers(pass.hidden(), pl)?;
                propagate(pass.hidden(), pl, &centers, &video.ts)
            })
            .collect::<Result<_>>()?;
        for (old, new) in labels.iter().zip(&updated) {
            debug_assert!(new.num_labeled() >= old.num_labeled());
        }
        labels = updated;

        let stats = train_epoch(
            videos,
            &labels,
            &labels,
            &mut params,
            &mut optimizer,
            &mut rng,
            &schedule.weights,
            epoch,
            Phase::IterativeClustering,
        )?;
        history.push(stats);
        epoch += 1;
    }

    Ok(TrainOutcome {
        params,
        history,
        final_labels: labels,
    })
}

/// One optimization epoch over all videos in a freshly shuffled order.
/// `train_labels` drive the loss; `state_labels` are the maintained
/// pseudo-label state recorded in the stats.
#[allow(clippy::too_many_arguments)]
fn train_epoch(
    videos: &[VideoSample],
    train_labels: &[PseudoLabelSequence],
    state_labels: &[PseudoLabelSequence],
    params: &mut EncoderParams,
    optimizer: &mut OptimizerState,
    rng: &mut ChaCha8Rng,
    weights: &LossWeights,
    epoch: usize,
    phase: Phase,
) -> Result<EpochStats> {
    let mut order: Vec<usize> = (0..videos.len()).collect();
    order.shuffle(rng);

    let mut sums = [0.0f64; 5];
    for &v in &order {
        let video = &videos[v];
        let pass = forward_pass(params, &video.features)?;
        let breakdown = total_loss(
            pass.probs(),
            pass.hidden(),
            &train_labels[v],
            &video.ts,
            weights,
        )
        .map_err(|e| Error::Train {
            epoch,
            video: video.id.clone(),
            message: e.to_string(),
        })?;
        if !breakdown.total.is_finite() {
            return Err(Error::Train {
                epoch,
                video: video.id.clone(),
                message: format!("non-finite loss (total = {})", breakdown.total),
            });
        }
        let grads = backward(params, &pass, &breakdown.grad_hidden, &breakdown.grad_logits)?;
        adam_step(optimizer, params, &grads).map_err(|e| Error::Train {
            epoch,
            video: video.id.clone(),
            message: e.to_string(),
        })?;
        sums[0] += breakdown.total;
        sums[1] += breakdown.classification;
        sums[2] += breakdown.smoothing;
        sums[3] += breakdown.confidence;
        sums[4] += breakdown.clustering;
    }

    let inv = 1.0 / videos.len() as f64;
    let (label_rate, pl_accuracy, per_video_labeled) = corpus_stats(videos, state_labels);
    Ok(EpochStats {
        epoch,
        phase,
        total: sums[0] * inv,
        classification: sums[1] * inv,
        smoothing: sums[2] * inv,
        confidence: sums[3] * inv,
        clustering: sums[4] * inv,
        label_rate,
        pl_accuracy,
        per_video_labeled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(entries: &[(usize, usize)], classes: usize) -> TimestampAnnotation {
        TimestampAnnotation::new(entries.to_vec(), classes).unwrap()
    }

    fn pl(labels: &[Option<usize>], annotation: &TimestampAnnotation) -> PseudoLabelSequence {
        PseudoLabelSequence::new(labels.to_vec(), annotation).unwrap()
    }

    #[test]
    fn centers_are_segment_means() {
        let hidden = HiddenSequence::new(3, 1, vec![0.0, 2.0, 4.0]);
        let annotation = ts(&[(1, 0)], 1);
        let labels = pl(&[Some(0), Some(0), Some(0)], &annotation);
        let centers = compute_centers(&hidden, &labels).unwrap();
        assert_eq!(centers.row(0), &[2.0]);

        let singleton = pl(&[None, Some(0), None], &annotation);
        let centers = compute_centers(&hidden, &singleton).unwrap();
        assert_eq!(centers.row(0), &[2.0]);

        let constant = HiddenSequence::new(3, 2, vec![0.5, -1.0, 0.5, -1.0, 0.5, -1.0]);
        let centers = compute_centers(&constant, &labels).unwrap();
        assert_eq!(centers.row(0), &[0.5, -1.0]);
    }

    #[test]
    fn propagate_leaves_empty_gap_alone() {
        let hidden = HiddenSequence::new(4, 1, vec![0.0, 0.0, 10.0, 10.0]);
        let annotation = ts(&[(0, 0), (2, 1)], 2);
        let labels = pl(&[Some(0), Some(0), Some(1), Some(1)], &annotation);
        let centers = compute_centers(&hidden, &labels).unwrap();
        let out = propagate(&hidden, &labels, &centers, &annotation).unwrap();
        assert_eq!(out.labels(), labels.labels());
    }

    #[test]
    fn propagate_absorbs_center_matches_left() {
        let hidden = HiddenSequence::new(3, 1, vec![0.0, 0.0, 10.0]);
        let annotation = ts(&[(0, 0), (2, 1)], 2);
        let labels = pl(&[Some(0), None, Some(1)], &annotation);
        let centers = compute_centers(&hidden, &labels).unwrap();
        let out = propagate(&hidden, &labels, &centers, &annotation).unwrap();
        assert_eq!(out.labels(), &[Some(0), Some(0), Some(1)]);
    }

    #[test]
    fn propagate_hand_trace_closes_gap() {
        // centers 0 and 10; gap values 1, 2, 9: the first two join the left
        // segment, the last joins the right one
        let hidden = HiddenSequence::new(7, 1, vec![0.0, 0.0, 1.0, 2.0, 9.0, 10.0, 10.0]);
        let annotation = ts(&[(0, 0), (6, 1)], 2);
        let labels = pl(
            &[Some(0), Some(0), None, None, None, Some(1), Some(1)],
            &annotation,
        );
        let centers = compute_centers(&hidden, &labels).unwrap();
        assert_eq!(centers.row(0), &[0.0]);
        assert_eq!(centers.row(1), &[10.0]);
        let out = propagate(&hidden, &labels, &centers, &annotation).unwrap();
        assert_eq!(
            out.labels(),
            &[Some(0), Some(0), Some(0), Some(0), Some(1), Some(1), Some(1)]
        );
        assert!(out.is_full());
    }

    #[test]
    fn propagate_tie_frame_stays_ambiguous_and_blocks() {
        // the frame at 5 is equidistant from both centers, so it stays
        // ambiguous and the right pass cannot reach past it
        let hidden = HiddenSequence::new(5, 1, vec![0.0, 1.0, 5.0, 9.0, 10.0]);
        let annotation = ts(&[(0, 0), (4, 1)], 2);
        let labels = pl(&[Some(0), None, None, None, Some(1)], &annotation);
        let centers = compute_centers(&hidden, &labels).unwrap();
        let out = propagate(&hidden, &labels, &centers, &annotation).unwrap();
        assert_eq!(
            out.labels(),
            &[Some(0), Some(0), None, Some(1), Some(1)]
        );
    }

    #[test]
    fn propagate_is_idempotent_and_grows_only() {
        use rand::Rng;
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t_len = 24;
            let dim = 3;
            let data: Vec<f64> = (0..t_len * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let hidden = HiddenSequence::new(t_len, dim, data);
            let annotation = ts(&[(2, 0), (11, 1), (20, 2)], 3);
            let mut labels = vec![None; t_len];
            labels[1] = Some(0);
            labels[2] = Some(0);
            labels[11] = Some(1);
            labels[19] = Some(2);
            labels[20] = Some(2);
            let labels = pl(&labels, &annotation);
            let centers = compute_centers(&hidden, &labels).unwrap();
            let once = propagate(&hidden, &labels, &centers, &annotation).unwrap();
            for t in 0..t_len {
                if let Some(c) = labels.label(t) {
                    assert_eq!(once.label(t), Some(c), "seed {seed} frame {t}");
                }
            }
            let twice = propagate(&hidden, &once, &centers, &annotation).unwrap();
            assert_eq!(once.labels(), twice.labels(), "seed {seed}");
        }
    }

    #[test]
    fn propagate_invariant_to_rigid_motion() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t_len = 16;
        let dim = 2;
        let data: Vec<f64> = (0..t_len * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let annotation = ts(&[(1, 0), (13, 1)], 2);
        let mut raw = vec![None; t_len];
        raw[0] = Some(0);
        raw[1] = Some(0);
        raw[13] = Some(1);
        raw[14] = Some(1);
        let labels = pl(&raw, &annotation);

        let (sin, cos) = (0.6f64.sin(), 0.6f64.cos());
        let shift = [3.25, -1.5];
        let rotated: Vec<f64> = data
            .chunks(2)
            .flat_map(|p| {
                [
                    cos * p[0] - sin * p[1] + shift[0],
                    sin * p[0] + cos * p[1] + shift[1],
                ]
            })
            .collect();

        let hidden = HiddenSequence::new(t_len, dim, data);
        let hidden_rot = HiddenSequence::new(t_len, dim, rotated);
        let centers = compute_centers(&hidden, &labels).unwrap();
        let centers_rot = compute_centers(&hidden_rot, &labels).unwrap();
        let a = propagate(&hidden, &labels, &centers, &annotation).unwrap();
        let b = propagate(&hidden_rot, &labels, &centers_rot, &annotation).unwrap();
        assert_eq!(a.labels(), b.labels());
    }

    fn tiny_corpus(seed: u64) -> (Vec<VideoSample>, Vec<PseudoLabelSequence>) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut videos = Vec::new();
        let mut labels = Vec::new();
        for v in 0..3 {
            let t_len = 30;
            let dim = 4;
            let mut data = Vec::with_capacity(t_len * dim);
            let gt: Vec<usize> = (0..t_len).map(|t| usize::from(t >= 14)).collect();
            for &c in &gt {
                let base = if c == 0 { -1.0 } else { 1.0 };
                for _ in 0..dim {
                    data.push(base + rng.random_range(-0.3..0.3));
                }
            }
            let features = FeatureSequence::new(t_len, dim, data).unwrap();
            let annotation = ts(&[(6, 0), (22, 1)], 2);
            let mut raw = vec![None; t_len];
            for t in 0..10 {
                raw[t] = Some(0);
            }
            for t in 20..t_len {
                raw[t] = Some(1);
            }
            labels.push(pl(&raw, &annotation));
            videos.push(VideoSample {
                id: format!("v{v}"),
                features,
                ts: annotation,
                gt: Some(gt),
            });
        }
        (videos, labels)
    }

    #[test]
    fn zero_ic_epochs_returns_warmup_model_with_labels_unchanged() {
        let (videos, labels) = tiny_corpus(5);
        let schedule = TrainSchedule {
            warmup_epochs: 2,
            ic_epochs: 0,
            learning_rate: 1e-3,
            weights: LossWeights::default(),
            seed: 1,
        };
        let cfg = EncoderConfig {
            input_dim: 4,
            hidden_dim: 8,
            layers: 2,
            kernel: 3,
            classes: 2,
            seed: 1,
        };
        let outcome = train_ic(&videos, &labels, &schedule, &cfg).unwrap();
        assert_eq!(outcome.history.len(), 2);
        for (a, b) in outcome.final_labels.iter().zip(&labels) {
            assert_eq!(a.labels(), b.labels());
        }
    }

    #[test]
    fn label_rate_monotone_over_ic_epochs() {
        let (videos, labels) = tiny_corpus(6);
        let schedule = TrainSchedule {
            warmup_epochs: 3,
            ic_epochs: 4,
            learning_rate: 1e-3,
            weights: LossWeights::default(),
            seed: 2,
        };
        let cfg = EncoderConfig {
            input_dim: 4,
            hidden_dim: 8,
            layers: 2,
            kernel: 3,
            classes: 2,
            seed: 2,
        };
        let outcome = train_ic(&videos, &labels, &schedule, &cfg).unwrap();
        let ic_rows: Vec<_> = outcome
            .history
            .iter()
            .filter(|s| s.phase == Phase::IterativeClustering)
            .collect();
        assert_eq!(ic_rows.len(), 4);
        for pair in ic_rows.windows(2) {
            for (a, b) in pair[0].per_video_labeled.iter().zip(&pair[1].per_video_labeled) {
                assert!(b >= a);
            }
        }
        let initial_rate = 100.0 * labels.iter().map(|l| l.num_labeled()).sum::<usize>() as f64
            / labels.iter().map(|l| l.len()).sum::<usize>() as f64;
        assert!(ic_rows.last().unwrap().label_rate >= initial_rate);
    }
}
