//! Synthetic piecewise-stationary sequences with class structure: per-class
//! mean vectors on a sphere, per-frame isotropic noise, segment lengths drawn
//! uniformly over the compositions respecting a minimum length, and derived
//! timestamp annotations. Everything is deterministic given the seed.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{ClassId, FeatureSequence, TimestampAnnotation};

/// How to pick the one annotated frame of each ground-truth segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimestampMode {
    /// The middle frame, `(start + end - 1) / 2` of the half-open range.
    #[default]
    Middle,
    /// Uniformly random within the segment, from a seeded generator.
    UniformRandom,
}

impl std::str::FromStr for TimestampMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "middle" => Ok(TimestampMode::Middle),
            "random" => Ok(TimestampMode::UniformRandom),
            other => Err(Error::Config(format!(
                "unknown timestamp mode '{other}', expected middle or random"
            ))),
        }
    }
}

/// Generator configuration. Ranges are inclusive.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub videos: usize,
    pub frames: (usize, usize),
    pub segments: (usize, usize),
    pub feature_dim: usize,
    pub classes: usize,
    /// Radius of the sphere the per-class mean vectors are drawn on.
    pub mean_scale: f64,
    /// Standard deviation of the isotropic per-frame noise.
    pub noise_sigma: f64,
    pub min_segment_len: usize,
    pub timestamp_mode: TimestampMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// The desk-scale corpus used throughout the test suite: 20 videos of
    /// 400..=800 frames, 6..=12 segments, 16-dim features over 8 classes.
    fn default() -> Self {
        Self {
            videos: 20,
            frames: (400, 800),
            segments: (6, 12),
            feature_dim: 16,
            classes: 8,
            mean_scale: 4.0,
            noise_sigma: 1.0,
            min_segment_len: 10,
            timestamp_mode: TimestampMode::Middle,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.videos == 0 {
            return Err(Error::Config("videos must be >= 1".into()));
        }
        if self.frames.0 > self.frames.1 || self.segments.0 > self.segments.1 {
            return Err(Error::Config("ranges must satisfy min <= max".into()));
        }
        if self.segments.0 == 0 || self.min_segment_len == 0 {
            return Err(Error::Config(
                "segment count and minimum length must be >= 1".into(),
            ));
        }
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be >= 1".into()));
        }
        if self.classes < 2 && self.segments.1 > 1 {
            return Err(Error::Config(
                "at least two classes are needed for adjacent segments to differ".into(),
            ));
        }
        if self.min_segment_len * self.segments.1 > self.frames.0 {
            return Err(Error::Config(format!(
                "infeasible lengths: {} segments of at least {} frames cannot fit in {} frames",
                self.segments.1, self.min_segment_len, self.frames.0
            )));
        }
        if self.mean_scale <= 0.0 || self.noise_sigma < 0.0 {
            return Err(Error::Config(
                "mean_scale must be positive and noise_sigma non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One generated video, fully in memory.
#[derive(Debug, Clone)]
pub struct GeneratedVideo {
    pub id: String,
    pub features: FeatureSequence,
    pub ground_truth: Vec<ClassId>,
    pub timestamps: TimestampAnnotation,
}

/// A generated dataset plus its class-name table.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub class_names: Vec<String>,
    pub videos: Vec<GeneratedVideo>,
}

/// Segment lengths summing to `total`, each at least `min_len`, uniform over
/// all such compositions.
fn sample_composition(
    rng: &mut ChaCha8Rng,
    total: usize,
    parts: usize,
    min_len: usize,
) -> Vec<usize> {
    debug_assert!(parts * min_len <= total);
    if parts == 1 {
        return vec![total];
    }
    let extra = total - parts * min_len;
    // stars and bars: place parts-1 bars among extra + parts - 1 slots
    let mut bars: Vec<usize> = sample(rng, extra + parts - 1, parts - 1).into_vec();
    bars.sort_unstable();
    let mut lengths = Vec::with_capacity(parts);
    let mut prev = 0usize;
    for &bar in &bars {
        lengths.push(min_len + (bar - prev));
        prev = bar + 1;
    }
    lengths.push(min_len + (extra + parts - 1 - prev));
    debug_assert_eq!(lengths.iter().sum::<usize>(), total);
    lengths
}

fn sample_class_sequence(rng: &mut ChaCha8Rng, classes: usize, parts: usize) -> Vec<ClassId> {
    let mut out = Vec::with_capacity(parts);
    let mut prev: Option<ClassId> = None;
    for _ in 0..parts {
        let c = match prev {
            None => rng.random_range(0..classes),
            Some(p) => {
                let pick = rng.random_range(0..classes - 1);
                if pick >= p {
                    pick + 1
                } else {
                    pick
                }
            }
        };
        out.push(c);
        prev = Some(c);
    }
    out
}

fn derive_with_rng(
    gt: &[ClassId],
    classes: usize,
    mode: TimestampMode,
    rng: &mut ChaCha8Rng,
) -> Result<TimestampAnnotation> {
    let mut entries = Vec::new();
    let mut t = 0;
    while t < gt.len() {
        let class = gt[t];
        let start = t;
        while t < gt.len() && gt[t] == class {
            t += 1;
        }
        let frame = match mode {
            TimestampMode::Middle => (start + t - 1) / 2,
            TimestampMode::UniformRandom => rng.random_range(start..t),
        };
        entries.push((frame, class));
    }
    TimestampAnnotation::new(entries, classes)
}

/// Picks one annotated frame per ground-truth segment. The seed only matters
/// in random mode.
pub fn derive_timestamps(
    gt: &[ClassId],
    classes: usize,
    mode: TimestampMode,
    seed: u64,
) -> Result<TimestampAnnotation> {
    if gt.is_empty() {
        return Err(Error::Validation("ground truth is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    derive_with_rng(gt, classes, mode, &mut rng)
}

/// Generates the dataset in memory. Class means are drawn once on a sphere of
/// radius `mean_scale`; each frame is its class mean plus isotropic noise.
pub fn generate(cfg: &SynthConfig) -> Result<GeneratedDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut means = vec![0.0f64; cfg.classes * cfg.feature_dim];
    for class in 0..cfg.classes {
        let row = &mut means[class * cfg.feature_dim..(class + 1) * cfg.feature_dim];
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-9 {
                let scale = cfg.mean_scale / norm;
                row.iter_mut().for_each(|v| *v *= scale);
                break;
            }
        }
    }

    let digits = (cfg.videos.max(1) - 1).to_string().len().max(2);
    let mut videos = Vec::with_capacity(cfg.videos);
    for index in 0..cfg.videos {
        let frames = rng.random_range(cfg.frames.0..=cfg.frames.1);
        let parts = rng.random_range(cfg.segments.0..=cfg.segments.1);
        let classes = sample_class_sequence(&mut rng, cfg.classes, parts);
        let lengths = sample_composition(&mut rng, frames, parts, cfg.min_segment_len);

        let mut ground_truth = Vec::with_capacity(frames);
        for (&class, &len) in classes.iter().zip(&lengths) {
            ground_truth.extend(std::iter::repeat_n(class, len));
        }

        let mut data = Vec::with_capacity(frames * cfg.feature_dim);
        for &class in &ground_truth {
            let mean = &means[class * cfg.feature_dim..(class + 1) * cfg.feature_dim];
            for &m in mean {
                let noise: f64 = rng.sample(StandardNormal);
                data.push((m + cfg.noise_sigma * noise) as f32);
            }
        }
        let features = FeatureSequence::new(frames, cfg.feature_dim, data)?;
        let timestamps = derive_with_rng(&ground_truth, cfg.classes, cfg.timestamp_mode, &mut rng)?;

        videos.push(GeneratedVideo {
            id: format!("v{index:0digits$}"),
            features,
            ground_truth,
            timestamps,
        });
    }

    Ok(GeneratedDataset {
        class_names: (0..cfg.classes).map(|c| format!("c{c}")).collect(),
        videos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            videos: 3,
            frames: (30, 60),
            segments: (2, 4),
            feature_dim: 3,
            classes: 4,
            min_segment_len: 5,
            ..SynthConfig::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        for (x, y) in a.videos.iter().zip(&b.videos) {
            assert_eq!(x.features.data(), y.features.data());
            assert_eq!(x.ground_truth, y.ground_truth);
            assert_eq!(x.timestamps, y.timestamps);
        }
    }

    #[test]
    fn zero_noise_frames_equal_class_means() {
        let cfg = SynthConfig {
            videos: 2,
            frames: (20, 30),
            segments: (2, 3),
            feature_dim: 4,
            classes: 3,
            noise_sigma: 0.0,
            min_segment_len: 4,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        for video in &data.videos {
            // every frame of a class must equal every other frame of it
            for (t, &c) in video.ground_truth.iter().enumerate() {
                let first = video
                    .ground_truth
                    .iter()
                    .position(|&x| x == c)
                    .unwrap();
                assert_eq!(video.features.row(t), video.features.row(first));
            }
            // and all three boundary algorithms recover the exact truth
            let expected: Vec<usize> = {
                let mut b = vec![0];
                for t in 1..video.ground_truth.len() {
                    if video.ground_truth[t] != video.ground_truth[t - 1] {
                        b.push(t);
                    }
                }
                b.push(video.ground_truth.len());
                b
            };
            let energy =
                crate::boundary::energy_function_boundaries(&video.features, &video.timestamps)
                    .unwrap();
            assert_eq!(energy.boundaries(), &expected[..]);
            let kmed =
                crate::boundary::constrained_kmedoids(&video.features, &video.timestamps, 50)
                    .unwrap();
            assert_eq!(kmed.boundaries(), &expected[..]);
            let agnes =
                crate::boundary::temporal_agnes(&video.features, &video.timestamps).unwrap();
            assert_eq!(agnes.boundaries(), &expected[..]);
        }
    }

    #[test]
    fn segment_structure_respects_config() {
        let cfg = SynthConfig {
            videos: 8,
            frames: (40, 80),
            segments: (3, 5),
            feature_dim: 2,
            classes: 5,
            min_segment_len: 6,
            ..SynthConfig::default()
        };
        let data = generate(&cfg).unwrap();
        assert_eq!(data.videos.len(), 8);
        for video in &data.videos {
            let t = video.ground_truth.len();
            assert!((40..=80).contains(&t));
            let segs = crate::metrics::segments_of(&video.ground_truth);
            assert!((3..=5).contains(&segs.len()));
            for s in &segs {
                assert!(s.end - s.start >= 6);
            }
            for pair in segs.windows(2) {
                assert_ne!(pair[0].class, pair[1].class);
            }
            assert_eq!(video.timestamps.len(), segs.len());
        }
    }

    #[test]
    fn middle_timestamp_formula() {
        // segments [0, 2) and [2, 4): middle frames 0 and 2
        let ts = derive_timestamps(&[0, 0, 1, 1], 2, TimestampMode::Middle, 0).unwrap();
        assert_eq!(ts.entries(), &[(0, 0), (2, 1)]);
        // single-frame segment keeps its only frame
        let ts = derive_timestamps(&[0, 1, 0], 2, TimestampMode::Middle, 0).unwrap();
        assert_eq!(ts.entries(), &[(0, 0), (1, 1), (2, 0)]);
    }

    #[test]
    fn random_timestamps_reproducible_and_in_range() {
        let gt = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 2, 2];
        let a = derive_timestamps(&gt, 3, TimestampMode::UniformRandom, 42).unwrap();
        let b = derive_timestamps(&gt, 3, TimestampMode::UniformRandom, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.frame(0) < 4);
        assert!((4..7).contains(&a.frame(1)));
        assert!((7..12).contains(&a.frame(2)));
    }

    #[test]
    fn infeasible_lengths_rejected() {
        let cfg = SynthConfig {
            videos: 1,
            frames: (10, 20),
            segments: (3, 4),
            min_segment_len: 5,
            ..SynthConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn composition_sampling_is_uniformish_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let lengths = sample_composition(&mut rng, 23, 4, 3);
            assert_eq!(lengths.len(), 4);
            assert_eq!(lengths.iter().sum::<usize>(), 23);
            assert!(lengths.iter().all(|&l| l >= 3));
        }
    }
}
