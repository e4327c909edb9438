//! File formats: binary feature sequences, line-oriented label and timestamp
//! files with a class-name table, the dataset manifest, encoder checkpoints,
//! and the comma-separated report tables. All writers are deterministic and
//! all loaders reject malformed input with a located error.
//!
//! Formats, bit exact:
//!
//! * Features: magic `TSEG`, version byte 1, little-endian u32 frame count T
//!   and dimension D, then T*D little-endian f32 values, frame major.
//! * Labels: one token per line, a class name or `-` for an ambiguous frame.
//! * Timestamps: `frame class_name` per line, ordered.
//! * Manifest: `classes <name>...` then one `video <id> <features> <labels>
//!   <timestamps>` line per video, paths relative to the manifest.
//! * Checkpoint: magic `TSCK`, version byte 1, little-endian u32 tensor
//!   count, then per tensor a u8 name length, the name, a u8 rank, and
//!   little-endian u32 dims; then every tensor's values as little-endian f32
//!   in header order.

use std::fs;
use std::path::{Path, PathBuf};

use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::ic::EpochStats;
use crate::metrics::{DatasetSummary, VideoScores};
use crate::synth::{GeneratedDataset, SynthConfig};
use crate::types::{ClassId, FeatureSequence, TimestampAnnotation};

const FEATURE_MAGIC: &[u8; 4] = b"TSEG";
const CHECKPOINT_MAGIC: &[u8; 4] = b"TSCK";
const FORMAT_VERSION: u8 = 1;

/// Dense class ids with their sidecar names, in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    names: Vec<String>,
}

impl ClassTable {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Validation("class table is empty".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || name == "-" || name.split_whitespace().count() != 1 {
                return Err(Error::Validation(format!(
                    "class name '{name}' is not a single non-reserved token"
                )));
            }
            if names[..i].contains(name) {
                return Err(Error::Validation(format!("duplicate class name '{name}'")));
            }
        }
        Ok(Self { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes a feature sequence in the binary format above.
pub fn save_features(path: &Path, f: &FeatureSequence) -> Result<()> {
    let mut bytes = Vec::with_capacity(4 + 1 + 8 + 4 * f.data().len());
    bytes.extend_from_slice(FEATURE_MAGIC);
    bytes.push(FORMAT_VERSION);
    bytes.extend_from_slice(&(f.frames() as u32).to_le_bytes());
    bytes.extend_from_slice(&(f.dim() as u32).to_le_bytes());
    for &v in f.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path, &bytes)
}

/// Reads a feature sequence, checking magic, version, byte count, and
/// finiteness.
pub fn load_features(path: &Path) -> Result<FeatureSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 13 || &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::parse(path, None, "not a feature file (bad magic)"));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(Error::parse(
            path,
            None,
            format!("unsupported feature format version {}", bytes[4]),
        ));
    }
    let frames = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let expected = 13 + 4 * frames * dim;
    if bytes.len() != expected {
        return Err(Error::parse(
            path,
            None,
            format!("expected {expected} bytes for {frames} x {dim}, found {}", bytes.len()),
        ));
    }
    let data: Vec<f32> = bytes[13..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureSequence::new(frames, dim, data)
        .map_err(|e| Error::parse(path, None, e.to_string()))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim_end_matches('\r').to_string())
        .collect())
}

/// Writes labels one name per line, `-` for ambiguous frames.
pub fn save_labels(path: &Path, labels: &[Option<ClassId>], table: &ClassTable) -> Result<()> {
    let mut out = String::new();
    for &label in labels {
        match label {
            Some(c) => out.push_str(table.name(c)),
            None => out.push('-'),
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Reads a label file; `-` lines become ambiguous frames. CRLF and LF inputs
/// parse identically. Unknown names and empty files are errors.
pub fn load_labels(path: &Path, table: &ClassTable) -> Result<Vec<Option<ClassId>>> {
    let lines = read_lines(path)?;
    let mut labels = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let token = line.trim();
        if token.is_empty() {
            return Err(Error::parse(path, Some(i + 1), "empty label line"));
        }
        if token == "-" {
            labels.push(None);
        } else {
            match table.id(token) {
                Some(c) => labels.push(Some(c)),
                None => {
                    return Err(Error::parse(
                        path,
                        Some(i + 1),
                        format!("unknown class name '{token}'"),
                    ))
                }
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::parse(path, None, "label file is empty"));
    }
    Ok(labels)
}

/// Loads a label file that must not contain ambiguous frames.
pub fn load_full_labels(path: &Path, table: &ClassTable) -> Result<Vec<ClassId>> {
    let labels = load_labels(path, table)?;
    labels
        .iter()
        .enumerate()
        .map(|(t, l)| {
            l.ok_or_else(|| {
                Error::parse(path, Some(t + 1), "ambiguous frame in a full label file")
            })
        })
        .collect()
}

pub fn save_timestamps(path: &Path, ts: &TimestampAnnotation, table: &ClassTable) -> Result<()> {
    let mut out = String::new();
    for &(frame, class) in ts.entries() {
        out.push_str(&format!("{frame} {}\n", table.name(class)));
    }
    write_file(path, out.as_bytes())
}

pub fn load_timestamps(path: &Path, table: &ClassTable) -> Result<TimestampAnnotation> {
    let lines = read_lines(path)?;
    let mut entries = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (frame, name) = match (parts.next(), parts.next(), parts.next()) {
            (Some(f), Some(n), None) => (f, n),
            _ => {
                return Err(Error::parse(
                    path,
                    Some(i + 1),
                    "expected 'frame class_name'",
                ))
            }
        };
        let frame: usize = frame.parse().map_err(|_| {
            Error::parse(path, Some(i + 1), format!("bad frame index '{frame}'"))
        })?;
        let class = table.id(name).ok_or_else(|| {
            Error::parse(path, Some(i + 1), format!("unknown class name '{name}'"))
        })?;
        entries.push((frame, class));
    }
    TimestampAnnotation::new(entries, table.len())
        .map_err(|e| Error::parse(path, None, e.to_string()))
}

/// One manifest entry; paths are relative to the manifest file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoEntry {
    pub id: String,
    pub features: PathBuf,
    pub ground_truth: PathBuf,
    pub timestamps: PathBuf,
}

/// The line-oriented dataset index: the class table plus per-video paths.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    root: PathBuf,
    pub classes: ClassTable,
    pub videos: Vec<VideoEntry>,
}

impl DatasetManifest {
    /// Directory that relative entry paths resolve against.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn resolve(&self, relative: &Path) -> PathBuf {
        self.root.join(relative)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::from("# dataset manifest\n");
        out.push_str("classes");
        for name in self.classes.names() {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
        for v in &self.videos {
            out.push_str(&format!(
                "video {} {} {} {}\n",
                v.id,
                v.features.display(),
                v.ground_truth.display(),
                v.timestamps.display()
            ));
        }
        write_file(path, out.as_bytes())
    }

    /// Parses a manifest and checks that every referenced file exists.
    pub fn load(path: &Path) -> Result<Self> {
        let root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let lines = read_lines(path)?;
        let mut classes: Option<ClassTable> = None;
        let mut videos = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("classes") => {
                    let names: Vec<String> = parts.map(str::to_string).collect();
                    classes = Some(
                        ClassTable::new(names)
                            .map_err(|e| Error::parse(path, Some(i + 1), e.to_string()))?,
                    );
                }
                Some("video") => {
                    let fields: Vec<&str> = parts.collect();
                    if fields.len() != 4 {
                        return Err(Error::parse(
                            path,
                            Some(i + 1),
                            "expected 'video <id> <features> <labels> <timestamps>'",
                        ));
                    }
                    videos.push(VideoEntry {
                        id: fields[0].to_string(),
                        features: PathBuf::from(fields[1]),
                        ground_truth: PathBuf::from(fields[2]),
                        timestamps: PathBuf::from(fields[3]),
                    });
                }
                Some(other) => {
                    return Err(Error::parse(
                        path,
                        Some(i + 1),
                        format!("unknown manifest directive '{other}'"),
                    ))
                }
                None => {}
            }
        }
        let classes = classes
            .ok_or_else(|| Error::parse(path, None, "manifest has no classes line"))?;
        let manifest = Self {
            root,
            classes,
            videos,
        };
        for v in &manifest.videos {
            for p in [&v.features, &v.ground_truth, &v.timestamps] {
                let full = manifest.resolve(p);
                if !full.exists() {
                    return Err(Error::parse(
                        path,
                        None,
                        format!("video '{}' references missing file {}", v.id, full.display()),
                    ));
                }
            }
        }
        Ok(manifest)
    }
}

/// Writes a generated dataset under `dir` and returns the saved manifest.
/// Layout: `<dir>/manifest.txt`, `<dir>/<id>.feat`, `<dir>/<id>.gt.txt`,
/// `<dir>/<id>.ts.txt`.
pub fn write_dataset(dir: &Path, dataset: &GeneratedDataset) -> Result<DatasetManifest> {
    let classes = ClassTable::new(dataset.class_names.clone())?;
    let mut videos = Vec::with_capacity(dataset.videos.len());
    for video in &dataset.videos {
        let features = PathBuf::from(format!("{}.feat", video.id));
        let ground_truth = PathBuf::from(format!("{}.gt.txt", video.id));
        let timestamps = PathBuf::from(format!("{}.ts.txt", video.id));
        save_features(&dir.join(&features), &video.features)?;
        let gt_labels: Vec<Option<ClassId>> = video.ground_truth.iter().map(|&c| Some(c)).collect();
        save_labels(&dir.join(&ground_truth), &gt_labels, &classes)?;
        save_timestamps(&dir.join(&timestamps), &video.timestamps, &classes)?;
        videos.push(VideoEntry {
            id: video.id.clone(),
            features,
            ground_truth,
            timestamps,
        });
    }
    let manifest = DatasetManifest {
        root: dir.to_path_buf(),
        classes,
        videos,
    };
    manifest.save(&dir.join("manifest.txt"))?;
    Ok(manifest)
}

/// Generates a synthetic dataset (see [`crate::synth::generate`]) and writes
/// it under `dir`.
pub fn synth_generate(cfg: &SynthConfig, dir: &Path) -> Result<DatasetManifest> {
    let dataset = crate::synth::generate(cfg)?;
    write_dataset(dir, &dataset)
}

/// Saves encoder parameters: named tensor headers followed by all values as
/// little-endian f32.
pub fn save_checkpoint(path: &Path, params: &EncoderParams) -> Result<()> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.push(FORMAT_VERSION);
    bytes.extend_from_slice(&(params.specs().len() as u32).to_le_bytes());
    for spec in params.specs() {
        let name = spec.name.as_bytes();
        bytes.push(name.len() as u8);
        bytes.extend_from_slice(name);
        bytes.push(spec.shape.len() as u8);
        for &d in &spec.shape {
            bytes.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for &v in params.flat() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_file(path, &bytes)
}

/// Loads a checkpoint and validates every tensor name and shape against the
/// given config.
pub fn load_checkpoint(path: &Path, cfg: &EncoderConfig) -> Result<EncoderParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::parse(path, None, msg);
    if bytes.len() < 9 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file (bad magic)".into()));
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {}", bytes[4])));
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let mut pos = 9usize;
    let mut headers: Vec<(String, Vec<usize>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = *bytes.get(pos).ok_or_else(|| bad("truncated header".into()))? as usize;
        pos += 1;
        let name = std::str::from_utf8(
            bytes
                .get(pos..pos + name_len)
                .ok_or_else(|| bad("truncated header".into()))?,
        )
        .map_err(|_| bad("tensor name is not UTF-8".into()))?
        .to_string();
        pos += name_len;
        let rank = *bytes.get(pos).ok_or_else(|| bad("truncated header".into()))? as usize;
        pos += 1;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let dim = bytes
                .get(pos..pos + 4)
                .ok_or_else(|| bad("truncated header".into()))?;
            shape.push(u32::from_le_bytes(dim.try_into().unwrap()) as usize);
            pos += 4;
        }
        headers.push((name, shape));
    }
    let total: usize = headers.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    let expected = pos + 4 * total;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let mut tensors = Vec::with_capacity(count);
    for (name, shape) in headers {
        let len: usize = shape.iter().product();
        let values: Vec<f64> = bytes[pos..pos + 4 * len]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        pos += 4 * len;
        tensors.push((name, shape, values));
    }
    EncoderParams::from_tensors(cfg.clone(), &tensors)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row of the per-video report.
#[derive(Debug, Clone)]
pub struct ReportRow {
    pub id: String,
    pub scores: VideoScores,
    pub label_rate: Option<f64>,
    pub pl_accuracy: Option<f64>,
}

/// Writes the per-video score table plus two summary rows: `summary` with the
/// frame-pooled accuracy and `summary_videomean` with the per-video mean
/// accuracy. With no rows, only the header is written.
pub fn write_report(
    path: &Path,
    rows: &[ReportRow],
    summary: Option<(&DatasetSummary, Option<f64>, Option<f64>)>,
) -> Result<()> {
    let mut out = String::from("video,f1_10,f1_25,f1_50,edit,acc,label_rate,pl_acc\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            row.id,
            row.scores.f1[0],
            row.scores.f1[1],
            row.scores.f1[2],
            row.scores.edit,
            row.scores.accuracy,
            fmt_opt(row.label_rate),
            fmt_opt(row.pl_accuracy),
        ));
    }
    if let Some((s, label_rate, pl_acc)) = summary {
        out.push_str(&format!(
            "summary,{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            s.f1[0],
            s.f1[1],
            s.f1[2],
            s.edit,
            s.frame_pooled_accuracy,
            fmt_opt(label_rate),
            fmt_opt(pl_acc),
        ));
        out.push_str(&format!(
            "summary_videomean,{:.6},{:.6},{:.6},{:.6},{:.6},{},{}\n",
            s.f1[0],
            s.f1[1],
            s.f1[2],
            s.edit,
            s.video_mean_accuracy,
            fmt_opt(label_rate),
            fmt_opt(pl_acc),
        ));
    }
    write_file(path, out.as_bytes())
}

/// Writes the per-epoch training history table.
pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut out =
        String::from("epoch,phase,total,classification,smoothing,confidence,clustering,label_rate,pl_acc\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            row.epoch,
            row.phase.as_str(),
            row.total,
            row.classification,
            row.smoothing,
            row.confidence,
            row.clustering,
            row.label_rate,
            fmt_opt(row.pl_accuracy),
        ));
    }
    write_file(path, out.as_bytes())
}

/// One row of the pseudo-label quality table (per source, per video, or the
/// pooled `all` row).
#[derive(Debug, Clone)]
pub struct QualityRow {
    pub source: String,
    pub video: String,
    pub accuracy: Option<f64>,
    pub label_rate: f64,
}

/// Writes the pseudo-label quality table produced by the ple command.
pub fn write_quality(path: &Path, rows: &[QualityRow]) -> Result<()> {
    let mut out = String::from("source,video,acc,label_rate\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            row.source,
            row.video,
            fmt_opt(row.accuracy),
            row.label_rate
        ));
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn features_round_trip_bit_exact() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("x.feat");
        let f = FeatureSequence::new(3, 2, vec![0.5, -1.25, 3.0, 0.1, -0.0, 9.75]).unwrap();
        save_features(&path, &f).unwrap();
        let g = load_features(&path).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn truncated_feature_file_names_byte_counts() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("x.feat");
        let f = FeatureSequence::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        save_features(&path, &f).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        let err = load_features(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 29 bytes") && msg.contains("found 26"), "{msg}");
    }

    #[test]
    fn feature_fixture_parses_to_written_matrix() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("fixture.feat");
        // hand-assembled file: T=2, D=2, values 1.0 2.0 3.0 4.0
        let mut bytes = b"TSEG\x01".to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        for v in [1.0f32, 2.0, 3.0, 4.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let f = load_features(&path).unwrap();
        assert_eq!(f.frames(), 2);
        assert_eq!(f.row(1), &[3.0, 4.0]);

        let not_a_feature = dir.path().join("bad.feat");
        fs::write(&not_a_feature, b"NOPE").unwrap();
        assert!(load_features(&not_a_feature).is_err());
    }

    #[test]
    fn labels_round_trip_with_ambiguous_and_crlf() {
        let dir = TempDir::new().unwrap();
        let table = ClassTable::new(vec!["pour".into(), "stir".into()]).unwrap();
        let labels = vec![Some(0), Some(0), None, Some(1)];
        let path = dir.path().join("labels.txt");
        save_labels(&path, &labels, &table).unwrap();
        assert_eq!(load_labels(&path, &table).unwrap(), labels);

        let crlf = dir.path().join("crlf.txt");
        fs::write(&crlf, "pour\r\npour\r\n-\r\nstir\r\n").unwrap();
        assert_eq!(load_labels(&crlf, &table).unwrap(), labels);
    }

    #[test]
    fn unknown_class_reports_line_number() {
        let dir = TempDir::new().unwrap();
        let table = ClassTable::new(vec!["a".into()]).unwrap();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "a\nb\n").unwrap();
        let err = load_labels(&path, &table).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");

        let empty = dir.path().join("empty.txt");
        fs::write(&empty, "").unwrap();
        assert!(load_labels(&empty, &table).is_err());
    }

    #[test]
    fn manifest_round_trip_and_missing_file_check() {
        let dir = TempDir::new().unwrap();
        let cfg = SynthConfig {
            videos: 2,
            frames: (20, 30),
            segments: (2, 3),
            feature_dim: 3,
            classes: 3,
            min_segment_len: 4,
            ..SynthConfig::default()
        };
        let manifest = synth_generate(&cfg, dir.path()).unwrap();
        let loaded = DatasetManifest::load(&dir.path().join("manifest.txt")).unwrap();
        assert_eq!(loaded.videos, manifest.videos);
        assert_eq!(loaded.classes, manifest.classes);

        // removing a referenced file breaks loading
        fs::remove_file(dir.path().join(&manifest.videos[0].features)).unwrap();
        let err = DatasetManifest::load(&dir.path().join("manifest.txt")).unwrap_err();
        assert!(err.to_string().contains("missing file"), "{err}");
    }

    #[test]
    fn synth_rerun_is_byte_identical() {
        let cfg = SynthConfig {
            videos: 2,
            frames: (20, 30),
            segments: (2, 3),
            feature_dim: 3,
            classes: 3,
            min_segment_len: 4,
            ..SynthConfig::default()
        };
        let dir_a = TempDir::new().unwrap();
        let dir_b = TempDir::new().unwrap();
        let a = synth_generate(&cfg, dir_a.path()).unwrap();
        let _b = synth_generate(&cfg, dir_b.path()).unwrap();
        for v in &a.videos {
            for rel in [&v.features, &v.ground_truth, &v.timestamps] {
                let x = fs::read(dir_a.path().join(rel)).unwrap();
                let y = fs::read(dir_b.path().join(rel)).unwrap();
                assert_eq!(x, y, "{}", rel.display());
            }
        }
        assert_eq!(
            fs::read(dir_a.path().join("manifest.txt")).unwrap(),
            fs::read(dir_b.path().join("manifest.txt")).unwrap()
        );
    }

    #[test]
    fn checkpoint_round_trip_preserves_f32_values() {
        use crate::encoder::init_params;
        let dir = TempDir::new().unwrap();
        let cfg = EncoderConfig {
            input_dim: 3,
            hidden_dim: 4,
            layers: 2,
            kernel: 3,
            classes: 2,
            seed: 5,
        };
        let params = init_params(&cfg).unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params).unwrap();
        let loaded = load_checkpoint(&path, &cfg).unwrap();
        for (a, b) in params.flat().iter().zip(loaded.flat()) {
            assert_eq!(*a as f32, *b as f32);
        }

        // shape mismatch is rejected
        let mut other = cfg.clone();
        other.hidden_dim = 5;
        assert!(load_checkpoint(&path, &other).is_err());
    }

    #[test]
    fn report_empty_rows_gives_header_only() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("report.csv");
        write_report(&path, &[], None).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("video,f1_10"));
    }

    #[test]
    fn quality_table_format() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("quality.csv");
        write_quality(
            &path,
            &[QualityRow {
                source: "energy".into(),
                video: "all".into(),
                accuracy: Some(91.25),
                label_rate: 100.0,
            }],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("energy,all,91.250000,100.000000"));
    }
}
