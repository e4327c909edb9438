//! Independent reference implementations used as oracles by the integration
//! tests. Everything here recomputes from definitions, deliberately avoiding
//! the optimized code paths under test.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tseg_core::{FeatureSequence, TimestampAnnotation};

pub fn euclid(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Two-sided within-segment squared deviation, computed the slow way: means
/// first, then deviations.
pub fn direct_energy(f: &FeatureSequence, left: std::ops::Range<usize>, right: std::ops::Range<usize>) -> f64 {
    let sse = |range: std::ops::Range<usize>| -> f64 {
        if range.is_empty() {
            return 0.0;
        }
        let dim = f.dim();
        let mut mean = vec![0.0f64; dim];
        for t in range.clone() {
            for (m, &v) in mean.iter_mut().zip(f.row(t)) {
                *m += v as f64;
            }
        }
        let inv = 1.0 / range.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        let mut acc = 0.0;
        for t in range {
            for (m, &v) in mean.iter().zip(f.row(t)) {
                let d = v as f64 - m;
                acc += d * d;
            }
        }
        acc
    };
    sse(left) + sse(right)
}

/// Exhaustive minimization of the boundary energy for every consecutive
/// timestamp pair.
pub fn brute_force_energy(f: &FeatureSequence, ts: &TimestampAnnotation) -> Vec<usize> {
    let mut boundaries = vec![0];
    for n in 0..ts.len() - 1 {
        let (lo, hi) = (ts.frame(n), ts.frame(n + 1));
        let mut best = lo + 1;
        let mut best_energy = f64::INFINITY;
        for b in lo + 1..=hi {
            let e = direct_energy(f, lo..b, b..hi + 1);
            if e < best_energy {
                best_energy = e;
                best = b;
            }
        }
        boundaries.push(best);
    }
    boundaries.push(f.frames());
    boundaries
}

/// Cost of one contiguous segment under its best medoid.
pub fn best_medoid_cost(f: &FeatureSequence, range: std::ops::Range<usize>) -> f64 {
    let mut best = f64::INFINITY;
    for i in range.clone() {
        let cost: f64 = range.clone().map(|j| euclid(f.row(i), f.row(j))).sum();
        if cost < best {
            best = cost;
        }
    }
    best
}

/// Scores a full partition by summing every segment's best-medoid cost.
pub fn partition_medoid_objective(f: &FeatureSequence, boundaries: &[usize]) -> f64 {
    boundaries
        .windows(2)
        .map(|w| best_medoid_cost(f, w[0]..w[1]))
        .sum()
}

/// Exhaustive search over every contiguous partition with one timestamp per
/// segment, scored by the best-medoid objective. Returns the minimal
/// objective value.
pub fn exhaustive_kmedoids_objective(f: &FeatureSequence, ts: &TimestampAnnotation) -> f64 {
    let n = ts.len();
    let mut boundaries = vec![0usize; n + 1];
    boundaries[n] = f.frames();
    fn recurse(
        f: &FeatureSequence,
        ts: &TimestampAnnotation,
        boundaries: &mut Vec<usize>,
        gap: usize,
        best: &mut f64,
    ) {
        let n = ts.len();
        if gap == n - 1 {
            let obj = partition_medoid_objective(f, boundaries);
            if obj < *best {
                *best = obj;
            }
            return;
        }
        for b in ts.frame(gap) + 1..=ts.frame(gap + 1) {
            boundaries[gap + 1] = b;
            recurse(f, ts, boundaries, gap + 1, best);
        }
    }
    let mut best = f64::INFINITY;
    if n == 1 {
        return partition_medoid_objective(f, &boundaries);
    }
    recurse(f, ts, &mut boundaries, 0, &mut best);
    best
}

/// From-scratch temporal average-linkage reference: a real distance matrix
/// with infinity between consecutive timestamp frames, linkages recomputed by
/// direct summation at every step, smallest-index tie breaking, merging until
/// one cluster per timestamp remains.
pub fn naive_agnes(f: &FeatureSequence, ts: &TimestampAnnotation) -> Vec<usize> {
    let t_len = f.frames();
    let mut dist = vec![vec![0.0f64; t_len]; t_len];
    for i in 0..t_len {
        for j in 0..t_len {
            dist[i][j] = euclid(f.row(i), f.row(j));
        }
    }
    for n in 0..ts.len().saturating_sub(1) {
        let (a, b) = (ts.frame(n), ts.frame(n + 1));
        dist[a][b] = f64::INFINITY;
        dist[b][a] = f64::INFINITY;
    }

    let mut starts: Vec<usize> = (0..t_len).collect();
    starts.push(t_len);
    let mut q = t_len;
    while q > ts.len() {
        let linkage = |i: usize| -> f64 {
            let (a0, a1, b1) = (starts[i], starts[i + 1], starts[i + 2]);
            let mut sum = 0.0;
            for a in a0..a1 {
                for b in a1..b1 {
                    sum += dist[a][b];
                }
            }
            sum / ((a1 - a0) * (b1 - a1)) as f64
        };
        let mut best = 0;
        let mut best_value = linkage(0);
        for i in 1..q - 1 {
            let v = linkage(i);
            if v < best_value {
                best_value = v;
                best = i;
            }
        }
        starts.remove(best + 1);
        q -= 1;
    }
    starts
}

/// Unstructured instance: iid uniform features, random strictly increasing
/// timestamps with distinct adjacent classes.
pub fn random_instance(
    seed: u64,
    max_frames: usize,
    max_dim: usize,
    max_stamps: usize,
) -> (FeatureSequence, TimestampAnnotation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_stamps);
    let t_len = rng.random_range(n.max(2)..=max_frames.max(n));
    let dim = rng.random_range(1..=max_dim);
    let data: Vec<f32> = (0..t_len * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let f = FeatureSequence::new(t_len, dim, data).unwrap();
    let ts = random_timestamps(&mut rng, t_len, n);
    (f, ts)
}

/// Segment-structured instance: piecewise-constant class means plus noise,
/// one timestamp inside each true segment.
pub fn structured_instance(
    seed: u64,
    max_frames: usize,
    max_dim: usize,
    max_stamps: usize,
    noise: f64,
) -> (FeatureSequence, TimestampAnnotation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_stamps);
    let t_len = rng.random_range((3 * n).max(4)..=max_frames.max(3 * n + 1));
    let dim = rng.random_range(1..=max_dim);

    // segment borders: n-1 distinct interior cut points
    let mut cuts: Vec<usize> = rand::seq::index::sample(&mut rng, t_len - 1, n - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut borders = vec![0];
    borders.extend(cuts);
    borders.push(t_len);

    let mut classes = Vec::with_capacity(n);
    for i in 0..n {
        let c = if i == 0 {
            rng.random_range(0..n.max(2))
        } else {
            let prev: usize = classes[i - 1];
            let pick = rng.random_range(0..n.max(2) - 1);
            if pick >= prev {
                pick + 1
            } else {
                pick
            }
        };
        classes.push(c);
    }
    let means: Vec<Vec<f64>> = (0..n.max(2))
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();

    let mut data = Vec::with_capacity(t_len * dim);
    let mut entries = Vec::with_capacity(n);
    for (seg, w) in borders.windows(2).enumerate() {
        for _ in w[0]..w[1] {
            for d in 0..dim {
                data.push((means[classes[seg]][d] + rng.random_range(-noise..noise)) as f32);
            }
        }
        entries.push((rng.random_range(w[0]..w[1]), classes[seg]));
    }
    let f = FeatureSequence::new(t_len, dim, data).unwrap();
    let ts = TimestampAnnotation::new(entries, n.max(2)).unwrap();
    (f, ts)
}

fn random_timestamps(rng: &mut ChaCha8Rng, t_len: usize, n: usize) -> TimestampAnnotation {
    let mut frames: Vec<usize> = rand::seq::index::sample(rng, t_len, n).into_iter().collect();
    frames.sort_unstable();
    let classes_needed = n.max(2);
    let mut entries = Vec::with_capacity(n);
    let mut prev: Option<usize> = None;
    for frame in frames {
        let class = match prev {
            None => rng.random_range(0..classes_needed),
            Some(p) => {
                let pick = rng.random_range(0..classes_needed - 1);
                if pick >= p {
                    pick + 1
                } else {
                    pick
                }
            }
        };
        entries.push((frame, class));
        prev = Some(class);
    }
    TimestampAnnotation::new(entries, classes_needed).unwrap()
}

/// Relative-error gradient check: `|a - b| <= abs_tol + rel_tol * max(|a|, |b|)`.
pub fn grad_close(analytic: f64, numeric: f64, rel_tol: f64, abs_tol: f64) -> bool {
    (analytic - numeric).abs() <= abs_tol + rel_tol * analytic.abs().max(numeric.abs())
}
