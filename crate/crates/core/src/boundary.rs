//! The three segment-boundary algorithms. Each one turns frame features plus
//! timestamp supervision into a full contiguous partition with exactly one
//! timestamp per segment:
//!
//! * [`energy_function_boundaries`] places each boundary between two
//!   consecutive timestamps at the split minimizing within-side squared
//!   deviation from the side means.
//! * [`constrained_kmedoids`] alternates medoid updates and boundary updates
//!   on temporally contiguous clusters.
//! * [`temporal_agnes`] is bottom-up average-linkage clustering that only
//!   merges temporally adjacent clusters and never merges across a timestamp
//!   pair.
//!
//! All argmin ties break toward the smallest index so results are
//! deterministic. Distances are Euclidean throughout.

use crate::error::{Error, Result};
use crate::types::{FeatureSequence, SegmentPartition, TimestampAnnotation};

fn check_inputs(f: &FeatureSequence, ts: &TimestampAnnotation) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::Validation(
            "at least one timestamp is required".into(),
        ));
    }
    ts.check_frames(f.frames())
}

/// Prefix sums of per-frame features and squared norms, for O(1) evaluation
/// of the within-range sum of squared deviations from the range mean.
struct PrefixStats {
    dim: usize,

    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl PrefixStats {
    fn new(f: &FeatureSequence) -> Self {
        let (t_len, dim) = (f.frames(), f.dim());
        let mut sum = vec![0.0; (t_len + 1) * dim];
        let mut sumsq = vec![0.0; t_len + 1];
        for t in 0..t_len {
            let row = f.row(t);
            let (prev, next) = sum.split_at_mut((t + 1) * dim);
            let prev = &prev[t * dim..];
            let next = &mut next[..dim];
            let mut sq = 0.0;
            for d in 0..dim {
                let v = row[d] as f64;
                next[d] = prev[d] + v;
                sq += v * v;
            }
            sumsq[t + 1] = sumsq[t] + sq;
        }
        Self { dim, sum, sumsq }
    }

    /// Sum over `t` in `[a, b)` of the squared distance of `x_t` to the mean
    /// of that range. Empty ranges give 0.
    fn sse(&self, a: usize, b: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let count = (b - a) as f64;
        let sa = &self.sum[a * self.dim..(a + 1) * self.dim];
        let sb = &self.sum[b * self.dim..(b + 1) * self.dim];
        let mut norm_sq = 0.0;
        for d in 0..self.dim {
            let s = sb[d] - sa[d];
            norm_sq += s * s;
        }
        self.sumsq[b] - self.sumsq[a] - norm_sq / count
    }
}

/// Places each boundary `b` between consecutive timestamps `(tau_n,
/// tau_{n+1})` at the split in `(tau_n, tau_{n+1}]` minimizing
///
/// ```text
/// E(b) = sum_{t in [tau_n, b)} ||x_t - mean_left||^2
///      + sum_{t in [b, tau_{n+1}]} ||x_t - mean_right||^2
/// ```
///
/// evaluated exactly with prefix sums in O(T * D) overall.
pub fn energy_function_boundaries(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
) -> Result<SegmentPartition> {
    check_inputs(f, ts)?;
    let stats = PrefixStats::new(f);
    let mut boundaries = Vec::with_capacity(ts.len() + 1);
    boundaries.push(0);
    for n in 0..ts.len() - 1 {
        let lo = ts.frame(n);
        let hi = ts.frame(n + 1);
        let mut best = lo + 1;
        let mut best_energy = f64::INFINITY;
        for b in lo + 1..=hi {
            let e = stats.sse(lo, b) + stats.sse(b, hi + 1);
            if e < best_energy {
                best_energy = e;
                best = b;
            }
        }
        boundaries.push(best);
    }
    boundaries.push(f.frames());
    SegmentPartition::new(boundaries)
}

/// Constrained k-medoids over temporally contiguous clusters. Alternates a
/// medoid update (the in-cluster frame minimizing summed distance to its
/// cluster) with a boundary update (each boundary moved to the split between
/// adjacent medoids minimizing the distance of reassigned frames to their
/// side's medoid). Boundaries start at timestamp midpoints. Stops when
/// neither medoids nor boundaries change, or after `max_iters` alternations.
pub fn constrained_kmedoids(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    max_iters: usize,
) -> Result<SegmentPartition> {
    constrained_kmedoids_trace(f, ts, max_iters).map(|(p, _)| p)
}

/// Same as [`constrained_kmedoids`] but also returns the objective (total
/// distance of every frame to its cluster medoid) recorded after each half
/// step; the sequence is non-increasing by construction.
pub fn constrained_kmedoids_trace(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    max_iters: usize,
) -> Result<(SegmentPartition, Vec<f64>)> {
    check_inputs(f, ts)?;
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be >= 1".into()));
    }
    let n = ts.len();
    let t_len = f.frames();

    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(0);
    for i in 0..n.saturating_sub(1) {
        bounds.push((ts.frame(i) + ts.frame(i + 1) + 1) / 2);
    }
    bounds.push(t_len);

    let mut medoids: Option<Vec<usize>> = None;
    let mut objectives = Vec::new();
    for _ in 0..max_iters {
        let new_medoids = update_medoids(f, &bounds, n);
        objectives.push(kmedoids_objective(f, &bounds, &new_medoids));
        let new_bounds = update_boundaries(f, ts, &bounds, &new_medoids);
        objectives.push(kmedoids_objective(f, &new_bounds, &new_medoids));
        let converged = medoids.as_ref() == Some(&new_medoids) && new_bounds == bounds;
        medoids = Some(new_medoids);
        bounds = new_bounds;
        if converged {
            break;
        }
    }
    debug_assert!(objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    Ok((SegmentPartition::new(bounds)?, objectives))
}

fn update_medoids(f: &FeatureSequence, bounds: &[usize], n: usize) -> Vec<usize> {
    let mut medoids = Vec::with_capacity(n);
    for seg in 0..n {
        let (a, b) = (bounds[seg], bounds[seg + 1]);
        let mut best = a;
        let mut best_cost = f64::INFINITY;
        for i in a..b {
            let cost: f64 = (a..b).map(|j| f.distance(i, j)).sum();
            if cost < best_cost {
                best_cost = cost;
                best = i;
            }
        }
        medoids.push(best);
    }
    medoids
}

fn update_boundaries(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    bounds: &[usize],
    medoids: &[usize],
) -> Vec<usize> {
    let n = medoids.len();
    let mut out = bounds.to_vec();
    for gap in 0..n.saturating_sub(1) {
        // Keep the left medoid and timestamp on the left side and the right
        // pair on the right side; the current boundary always qualifies, so
        // the candidate range is never empty and the objective cannot rise.
        let lo = medoids[gap].max(ts.frame(gap));
        let hi = medoids[gap + 1].min(ts.frame(gap + 1));
        let (ml, mr) = (medoids[gap], medoids[gap + 1]);
        let mut best = lo + 1;
        let mut best_cost = f64::INFINITY;
        for b in lo + 1..=hi {
            let left: f64 = (ml + 1..b).map(|t| f.distance(t, ml)).sum();
            let right: f64 = (b..mr).map(|t| f.distance(t, mr)).sum();
            let cost = left + right;
            if cost < best_cost {
                best_cost = cost;
                best = b;
            }
        }
        out[gap + 1] = best;
    }
    out
}

fn kmedoids_objective(f: &FeatureSequence, bounds: &[usize], medoids: &[usize]) -> f64 {
    let mut total = 0.0;
    for (seg, &m) in medoids.iter().enumerate() {
        for t in bounds[seg]..bounds[seg + 1] {
            total += f.distance(t, m);
        }
    }
    total
}

/// Options for [`temporal_agnes_with`].
#[derive(Debug, Clone)]
pub struct AgnesOptions {
    /// Hard cap on the frame count; the distance matrix and its prefix table
    /// take O(T^2) memory. Inputs above the cap are rejected.
    pub max_frames: usize,
    /// Optional temporal downsampling factor. Clustering runs on every k-th
    /// frame and the resulting boundaries are mapped back to the full grid,
    /// which is an explicit approximation and is logged when used.
    pub downsample: Option<usize>,
}

impl Default for AgnesOptions {
    fn default() -> Self {
        Self {
            max_frames: 20_000,
            downsample: None,
        }
    }
}

/// Bottom-up average-linkage clustering over temporally adjacent clusters,
/// with default options. Every frame starts as its own cluster; the pair of
/// adjacent clusters with the smallest average inter-cluster distance merges
/// until exactly one cluster per timestamp remains. Any candidate merge whose
/// clusters both contain a timestamp has infinite linkage, so timestamps
/// never share a segment.
pub fn temporal_agnes(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
) -> Result<SegmentPartition> {
    temporal_agnes_with(f, ts, &AgnesOptions::default())
}

/// See [`temporal_agnes`]; `options` controls the frame cap and optional
/// downsampling.
pub fn temporal_agnes_with(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    options: &AgnesOptions,
) -> Result<SegmentPartition> {
    check_inputs(f, ts)?;
    if f.frames() < ts.len() {
        return Err(Error::Validation(format!(
            "need at least as many frames as timestamps, got {} frames for {} timestamps",
            f.frames(),
            ts.len()
        )));
    }
    match options.downsample {
        None | Some(0) | Some(1) => {
            if f.frames() > options.max_frames {
                return Err(Error::TooManyFrames {
                    frames: f.frames(),
                    cap: options.max_frames,
                });
            }
            let mut ws = AgnesWorkspace::new(f, ts);
            ws.run(ts.len());
            SegmentPartition::new(ws.into_boundaries())
        }
        Some(factor) => agnes_downsampled(f, ts, options, factor),
    }
}

fn agnes_downsampled(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    options: &AgnesOptions,
    factor: usize,
) -> Result<SegmentPartition> {
    let t_len = f.frames();
    let sub_frames = t_len.div_ceil(factor);
    log::info!(
        "temporal agnes: downsampling {t_len} frames by {factor} to {sub_frames} (approximate)"
    );
    let mut data = Vec::with_capacity(sub_frames * f.dim());
    for i in 0..sub_frames {
        data.extend_from_slice(f.row(i * factor));
    }
    let sub_f = FeatureSequence::new(sub_frames, f.dim(), data)?;
    let sub_entries: Vec<(usize, usize)> = ts
        .entries()
        .iter()
        .map(|&(frame, class)| (frame / factor, class))
        .collect();
    for w in sub_entries.windows(2) {
        if w[0].0 >= w[1].0 {
            return Err(Error::Config(format!(
                "downsample factor {factor} too coarse: timestamps collide on the subsampled grid"
            )));
        }
    }
    let sub_ts = TimestampAnnotation::new(sub_entries, ts.num_classes())?;
    let sub_options = AgnesOptions {
        max_frames: options.max_frames,
        downsample: None,
    };
    let sub_partition = temporal_agnes_with(&sub_f, &sub_ts, &sub_options)?;

    // Map boundaries back to the full grid, clamping each one into the valid
    // range between its surrounding timestamps.
    let mut boundaries = vec![0];
    for n in 0..ts.len() - 1 {
        let mapped = sub_partition.boundaries()[n + 1] * factor;
        boundaries.push(mapped.clamp(ts.frame(n) + 1, ts.frame(n + 1)));
    }
    boundaries.push(t_len);
    SegmentPartition::new(boundaries)
}

/// Merge state for temporal agglomerative clustering: the pairwise distance
/// matrix, its 2-D prefix-sum table for O(1) block pair sums, the current
/// cluster start frames, and the adjacent-pair average linkages.
struct AgnesWorkspace {
    dim_t: usize,
    /// Prefix table over the distance matrix: entry `(i, j)` holds the sum of
    /// distances over all frame pairs with row < i and column < j.
    prefix: Vec<f64>,
    /// Count of timestamp frames before frame t, per t in 0..=T.
    ts_prefix: Vec<usize>,
    /// Cluster start frames plus a trailing sentinel T; cluster i spans
    /// `[starts[i], starts[i+1])`.
    starts: Vec<usize>,
    /// Average linkage between clusters i and i+1, infinite when both sides
    /// contain a timestamp.
    linkage: Vec<f64>,
    q: usize,
}

impl AgnesWorkspace {
    fn new(f: &FeatureSequence, ts: &TimestampAnnotation) -> Self {
        let t_len = f.frames();
        let mut dist = vec![0.0f64; t_len * t_len];
        for i in 0..t_len {
            for j in i + 1..t_len {
                let d = f.distance(i, j);
                dist[i * t_len + j] = d;
                dist[j * t_len + i] = d;
            }
        }

        let mut prefix = vec![0.0f64; (t_len + 1) * (t_len + 1)];
        for i in 0..t_len {
            let mut row_sum = 0.0;
            for j in 0..t_len {
                row_sum += dist[i * t_len + j];
                prefix[(i + 1) * (t_len + 1) + (j + 1)] =
                    prefix[i * (t_len + 1) + (j + 1)] + row_sum;
            }
        }

        let mut ts_prefix = vec![0usize; t_len + 1];
        let mut stamp = 0;
        for t in 0..t_len {
            if stamp < ts.len() && ts.frame(stamp) == t {
                stamp += 1;
            }
            ts_prefix[t + 1] = stamp;
        }

        let mut starts: Vec<usize> = (0..t_len).collect();
        starts.push(t_len);

        let mut ws = Self {
            dim_t: t_len,
            prefix,
            ts_prefix,
            starts,
            linkage: Vec::new(),
            q: t_len,
        };
        ws.linkage = (0..t_len - 1).map(|i| ws.compute_linkage(i)).collect();
        ws
    }

    fn block_sum(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
        let w = self.dim_t + 1;
        self.prefix[rows.end * w + cols.end] - self.prefix[rows.start * w + cols.end]
            - self.prefix[rows.end * w + cols.start]
            + self.prefix[rows.start * w + cols.start]
    }

    fn cluster_has_timestamp(&self, i: usize) -> bool {
        self.ts_prefix[self.starts[i + 1]] > self.ts_prefix[self.starts[i]]
    }

    /// Average linkage between clusters i and i+1. When both clusters contain
    /// a timestamp, the block pair straddles a consecutive timestamp pair
    /// whose distance is the infinity sentinel, so the linkage is infinite.
    fn compute_linkage(&self, i: usize) -> f64 {
        if self.cluster_has_timestamp(i) && self.cluster_has_timestamp(i + 1) {
            return f64::INFINITY;
        }
        let a = self.starts[i]..self.starts[i + 1];
        let b = self.starts[i + 1]..self.starts[i + 2];
        let size = (a.len() * b.len()) as f64;
        self.block_sum(a, b) / size
    }

    fn run(&mut self, n: usize) {
        while self.q > n {
            let mut best = 0;
            for i in 1..self.linkage.len() {
                if self.linkage[i] < self.linkage[best] {
                    best = i;
                }
            }
            debug_assert!(self.linkage[best].is_finite());
            self.starts.remove(best + 1);
            self.linkage.remove(best);
            self.q -= 1;
            if best > 0 {
                self.linkage[best - 1] = self.compute_linkage(best - 1);
            }
            if best < self.linkage.len() {
                self.linkage[best] = self.compute_linkage(best);
            }
        }
    }

    fn into_boundaries(self) -> Vec<usize> {
        self.starts
    }
}
