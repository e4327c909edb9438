//! Pseudo-label ensembling: run several boundary algorithms (optionally on
//! different feature views), expand each partition to a full label sequence,
//! and intersect them. Frames where any member disagrees become ambiguous.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::boundary::{
    constrained_kmedoids, energy_function_boundaries, temporal_agnes_with, AgnesOptions,
};
use crate::error::{Error, Result};
use crate::types::{
    partition_to_labels, ClassId, FeatureSequence, PseudoLabelSequence, TimestampAnnotation,
};

/// One of the three boundary algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Energy,
    Kmedoids,
    Agnes,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Energy => "energy",
            Algorithm::Kmedoids => "kmedoids",
            Algorithm::Agnes => "agnes",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Algorithm::Energy),
            "kmedoids" => Ok(Algorithm::Kmedoids),
            "agnes" => Ok(Algorithm::Agnes),
            other => Err(Error::Config(format!(
                "unknown algorithm '{other}', expected energy, kmedoids, or agnes"
            ))),
        }
    }
}

/// Which feature columns a member sees: everything, or a column range (for
/// example the two descriptor halves of a concatenated feature).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureView {
    Full,
    Columns(Range<usize>),
}

impl fmt::Display for FeatureView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureView::Full => f.write_str("full"),
            FeatureView::Columns(r) => write!(f, "{}..{}", r.start, r.end),
        }
    }
}

/// One ensemble member: an algorithm applied to a feature view. The text form
/// is `algorithm` or `algorithm@start..end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleMember {
    pub algorithm: Algorithm,
    pub view: FeatureView,
}

impl fmt::Display for EnsembleMember {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.view {
            FeatureView::Full => write!(f, "{}", self.algorithm),
            view => write!(f, "{}@{view}", self.algorithm),
        }
    }
}

impl FromStr for EnsembleMember {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (algo, view) = match s.split_once('@') {
            None => (s, FeatureView::Full),
            Some((algo, range)) => {
                let (start, end) = range.split_once("..").ok_or_else(|| {
                    Error::Config(format!("bad feature view '{range}', expected start..end"))
                })?;
                let parse = |v: &str| {
                    v.trim().parse::<usize>().map_err(|_| {
                        Error::Config(format!("bad feature view bound '{v}' in '{s}'"))
                    })
                };
                (algo, FeatureView::Columns(parse(start)?..parse(end)?))
            }
        };
        Ok(EnsembleMember {
            algorithm: algo.trim().parse()?,
            view,
        })
    }
}

/// The member list plus the per-algorithm knobs needed to run them.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub members: Vec<EnsembleMember>,
    pub kmedoids_max_iters: usize,
    pub agnes: AgnesOptions,
}

impl EnsembleSpec {
    pub fn new(members: Vec<EnsembleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("ensemble needs at least one member".into()));
        }
        Ok(Self {
            members,
            kmedoids_max_iters: 50,
            agnes: AgnesOptions::default(),
        })
    }

    /// Parses a comma-separated member list such as
    /// `energy,kmedoids,agnes@0..8`.
    pub fn parse(list: &str) -> Result<Self> {
        let members = list
            .split(',')
            .map(|m| m.trim().parse())
            .collect::<Result<Vec<_>>>()?;
        Self::new(members)
    }

    /// The default three-member ensemble on the full features.
    pub fn default_members() -> Self {
        Self::parse("energy,kmedoids,agnes").unwrap()
    }
}

/// Intersects full pseudo-label sequences: a frame keeps its label only when
/// every input assigns the identical class, otherwise it becomes ambiguous.
/// Inputs must be full sequences of equal length, all valid against `ts`.
pub fn ensemble(
    sequences: &[PseudoLabelSequence],
    ts: &TimestampAnnotation,
) -> Result<PseudoLabelSequence> {
    let first = sequences
        .first()
        .ok_or_else(|| Error::Validation("ensemble of zero sequences".into()))?;
    for (i, seq) in sequences.iter().enumerate() {
        if seq.len() != first.len() {
            return Err(Error::Validation(format!(
                "ensemble input {i} has length {} but input 0 has {}",
                seq.len(),
                first.len()
            )));
        }
        if !seq.is_full() {
            return Err(Error::Validation(format!(
                "ensemble input {i} contains ambiguous frames"
            )));
        }
        // inputs constructed via PseudoLabelSequence are valid against some
        // annotation; re-check against this one
        crate::types::validate_pseudo_labels(seq.labels(), ts)
            .map_err(|v| Error::Validation(format!("ensemble input {i}: {v}")))?;
    }

    let labels: Vec<Option<ClassId>> = (0..first.len())
        .map(|t| {
            let label = first.label(t);
            sequences[1..]
                .iter()
                .all(|s| s.label(t) == label)
                .then(|| label.unwrap())
        })
        .collect();
    PseudoLabelSequence::new(labels, ts)
}

/// Runs every ensemble member on its feature view and intersects the results.
/// Deterministic given its inputs.
pub fn run_ple(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    spec: &EnsembleSpec,
) -> Result<PseudoLabelSequence> {
    let sequences = member_sequences(f, ts, spec)?;
    ensemble(&sequences, ts)
}

/// The full per-member sequences behind [`run_ple`], in member order. Exposed
/// so callers can report per-constituent quality next to the ensemble.
pub fn member_sequences(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    spec: &EnsembleSpec,
) -> Result<Vec<PseudoLabelSequence>> {
    if spec.members.is_empty() {
        return Err(Error::Config("ensemble needs at least one member".into()));
    }
    spec.members
        .iter()
        .map(|member| {
            let viewed;
            let features = match &member.view {
                FeatureView::Full => f,
                FeatureView::Columns(range) => {
                    viewed = f.select_columns(range.clone())?;
                    &viewed
                }
            };
            let partition = match member.algorithm {
                Algorithm::Energy => energy_function_boundaries(features, ts)?,
                Algorithm::Kmedoids => {
                    constrained_kmedoids(features, ts, spec.kmedoids_max_iters)?
                }
                Algorithm::Agnes => temporal_agnes_with(features, ts, &spec.agnes)?,
            };
            partition_to_labels(&partition, ts)
        })
        .collect()
}

/// Fills every ambiguous interval of `pl` by placing a single boundary inside
/// the gap with the energy objective, anchored at the surrounding timestamps.
/// Returns full labels. This is an evaluation aid, not a training path.
pub fn fill_ambiguous_with_energy(
    f: &FeatureSequence,
    ts: &TimestampAnnotation,
    pl: &PseudoLabelSequence,
) -> Result<Vec<ClassId>> {
    ts.check_frames(f.frames())?;
    if pl.len() != f.frames() {
        return Err(Error::Validation(format!(
            "pseudo-labels have {} frames but features have {}",
            pl.len(),
            f.frames()
        )));
    }
    let stats_energy = energy_gap_filler(f);
    let runs = pl.runs();
    let mut labels: Vec<ClassId> = vec![0; pl.len()];
    for (n, run) in runs.iter().enumerate() {
        for t in run.start..run.end {
            labels[t] = run.class;
        }
        if n + 1 < runs.len() {
            let next = &runs[n + 1];
            if run.end < next.start {
                let b = stats_energy(ts.frame(n), ts.frame(n + 1), run.end, next.start);
                for t in run.end..b {
                    labels[t] = run.class;
                }
                for t in b..next.start {
                    labels[t] = next.class;
                }
            }
        }
    }
    // leading/trailing frames outside the first/last run take their classes
    if let Some(first) = runs.first() {
        for t in 0..first.start {
            labels[t] = first.class;
        }
    }
    if let Some(last) = runs.last() {
        for t in last.end..pl.len() {
            labels[t] = last.class;
        }
    }
    Ok(labels)
}

/// Returns a closure choosing the best split inside `[gap_start, gap_end]`
/// for the two-sided squared-deviation energy anchored at two timestamps.
fn energy_gap_filler(f: &FeatureSequence) -> impl Fn(usize, usize, usize, usize) -> usize + '_ {
    let dim = f.dim();
    let t_len = f.frames();
    let mut sum = vec![0.0f64; (t_len + 1) * dim];
    let mut sumsq = vec![0.0f64; t_len + 1];
    for t in 0..t_len {
        let row = f.row(t);
        let mut sq = 0.0;
        for d in 0..dim {
            let v = row[d] as f64;
            sum[(t + 1) * dim + d] = sum[t * dim + d] + v;
            sq += v * v;
        }
        sumsq[t + 1] = sumsq[t] + sq;
    }
    let sse = move |a: usize, b: usize| -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut norm_sq = 0.0;
        for d in 0..dim {
            let s = sum[b * dim + d] - sum[a * dim + d];
            norm_sq += s * s;
        }
        sumsq[b] - sumsq[a] - norm_sq / (b - a) as f64
    };
    move |tau_left, tau_right, gap_start, gap_end| {
        let mut best = gap_start;
        let mut best_energy = f64::INFINITY;
        for b in gap_start..=gap_end {
            let e = sse(tau_left, b) + sse(b, tau_right + 1);
            if e < best_energy {
                best_energy = e;
                best = b;
            }
        }
        best
    }
}
