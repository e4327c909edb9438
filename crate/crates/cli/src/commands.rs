//! The five subcommands behind the `tseg` binary.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use tseg_core::encoder::forward;
use tseg_core::ensemble::{ensemble, fill_ambiguous_with_energy, member_sequences};
use tseg_core::ic::{train_ic, VideoSample};
use tseg_core::io::{
    load_checkpoint, load_features, load_full_labels, load_labels, load_timestamps,
    save_checkpoint, save_labels, synth_generate, write_history, write_quality, write_report,
    ClassTable, DatasetManifest, QualityRow, ReportRow,
};
use tseg_core::metrics::{pseudo_label_quality, DatasetEval};
use tseg_core::{ClassId, FeatureSequence, PseudoLabelSequence, TimestampAnnotation};

use crate::config::RunConfig;

/// A fully loaded video: features, ground truth, timestamps.
struct LoadedVideo {
    id: String,
    features: FeatureSequence,
    ground_truth: Vec<ClassId>,
    ts: TimestampAnnotation,
}

fn load_corpus(manifest: &DatasetManifest) -> Result<Vec<LoadedVideo>> {
    let videos: Vec<LoadedVideo> = manifest
        .videos
        .par_iter()
        .map(|entry| -> tseg_core::Result<LoadedVideo> {
            let features = load_features(&manifest.resolve(&entry.features))?;
            let ground_truth =
                load_full_labels(&manifest.resolve(&entry.ground_truth), &manifest.classes)?;
            let ts = load_timestamps(&manifest.resolve(&entry.timestamps), &manifest.classes)?;
            ts.check_frames(features.frames())?;
            if ground_truth.len() != features.frames() {
                return Err(tseg_core::Error::Validation(format!(
                    "video '{}': {} ground-truth labels for {} frames",
                    entry.id,
                    ground_truth.len(),
                    features.frames()
                )));
            }
            Ok(LoadedVideo {
                id: entry.id.clone(),
                features,
                ground_truth,
                ts,
            })
        })
        .collect::<tseg_core::Result<_>>()?;
    if videos.is_empty() {
        log::warn!("manifest lists no videos");
    }
    Ok(videos)
}

/// Generates the synthetic dataset under `<out>/dataset` and prints the
/// manifest path.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let synth_cfg = cfg.synth_config()?;
    let dir = cfg.out.join("dataset");
    let manifest = synth_generate(&synth_cfg, &dir)?;
    let path = dir.join("manifest.txt");
    println!("{}", path.display());
    log::info!(
        "wrote {} videos, {} classes to {}",
        manifest.videos.len(),
        manifest.classes.len(),
        dir.display()
    );
    Ok(())
}

fn quality_rows_for(
    source: &str,
    per_video: &[(String, PseudoLabelSequence)],
    ground_truth: &[Vec<ClassId>],
) -> Result<Vec<QualityRow>> {
    let mut rows = Vec::new();
    let mut labeled = 0usize;
    let mut correct = 0usize;
    let mut frames = 0usize;
    for ((video, pl), gt) in per_video.iter().zip(ground_truth) {
        let (acc, rate) = pseudo_label_quality(pl, gt)?;
        rows.push(QualityRow {
            source: source.to_string(),
            video: video.clone(),
            accuracy: acc,
            label_rate: rate,
        });
        frames += pl.len();
        labeled += pl.num_labeled();
        for run in pl.runs() {
            correct += (run.start..run.end).filter(|&t| gt[t] == run.class).count();
        }
    }
    rows.push(QualityRow {
        source: source.to_string(),
        video: "all".into(),
        accuracy: (labeled > 0).then(|| 100.0 * correct as f64 / labeled as f64),
        label_rate: 100.0 * labeled as f64 / frames as f64,
    });
    Ok(rows)
}

/// Runs pseudo-label ensembling over the whole dataset, caches the ensembled
/// sequences under `<out>/ple/`, and writes the per-constituent quality table.
pub fn cmd_ple(cfg: &RunConfig, fill_energy: bool) -> Result<()> {
    let manifest = DatasetManifest::load(cfg.manifest_path()?)?;
    let videos = load_corpus(&manifest)?;
    let spec = cfg.ensemble_spec()?;

    let results: Vec<(Vec<PseudoLabelSequence>, PseudoLabelSequence)> = videos
        .par_iter()
        .map(|v| -> tseg_core::Result<_> {
            let members = member_sequences(&v.features, &v.ts, &spec)?;
            let combined = ensemble(&members, &v.ts)?;
            Ok((members, combined))
        })
        .collect::<tseg_core::Result<_>>()?;

    let ple_dir = cfg.out.join("ple");
    for (video, (_, combined)) in videos.iter().zip(&results) {
        save_labels(
            &ple_dir.join(format!("{}.txt", video.id)),
            combined.labels(),
            &manifest.classes,
        )?;
    }

    let ground_truth: Vec<Vec<ClassId>> =
        videos.iter().map(|v| v.ground_truth.clone()).collect();
    let mut rows = Vec::new();
    for (m, member) in spec.members.iter().enumerate() {
        let per_video: Vec<(String, PseudoLabelSequence)> = videos
            .iter()
            .zip(&results)
            .map(|(v, (members, _))| (v.id.clone(), members[m].clone()))
            .collect();
        rows.extend(quality_rows_for(&member.to_string(), &per_video, &ground_truth)?);
    }
    let ensembled: Vec<(String, PseudoLabelSequence)> = videos
        .iter()
        .zip(&results)
        .map(|(v, (_, combined))| (v.id.clone(), combined.clone()))
        .collect();
    rows.extend(quality_rows_for("ensemble", &ensembled, &ground_truth)?);

    if fill_energy {
        let filled: Vec<(String, PseudoLabelSequence)> = videos
            .iter()
            .zip(&results)
            .map(|(v, (_, combined))| -> tseg_core::Result<_> {
                let full = fill_ambiguous_with_energy(&v.features, &v.ts, combined)?;
                let labels = full.into_iter().map(Some).collect();
                Ok((v.id.clone(), PseudoLabelSequence::new(labels, &v.ts)?))
            })
            .collect::<tseg_core::Result<_>>()?;
        rows.extend(quality_rows_for("ensemble_energy_fill", &filled, &ground_truth)?);
    }

    let table_path = cfg.out.join("ple_quality.csv");
    write_quality(&table_path, &rows)?;
    println!("{}", table_path.display());
    Ok(())
}

fn load_cached_labels(
    dir: &Path,
    videos: &[LoadedVideo],
    classes: &ClassTable,
) -> Result<Vec<PseudoLabelSequence>> {
    videos
        .iter()
        .map(|v| {
            let path = dir.join(format!("{}.txt", v.id));
            let labels = load_labels(&path, classes)?;
            Ok(PseudoLabelSequence::new(labels, &v.ts)?)
        })
        .collect()
}

/// Warmup plus iterative-clustering training; writes the checkpoint, the
/// per-epoch history table, and the pseudo-label caches it trained from.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let manifest = DatasetManifest::load(cfg.manifest_path()?)?;
    let videos = load_corpus(&manifest)?;
    if videos.is_empty() {
        bail!("cannot train on an empty manifest");
    }
    let input_dim = videos[0].features.dim();
    for v in &videos {
        if v.features.dim() != input_dim {
            bail!("video '{}' has dim {}, expected {input_dim}", v.id, v.features.dim());
        }
    }

    let initial: Vec<PseudoLabelSequence> = match &cfg.ple_dir {
        Some(dir) => load_cached_labels(dir, &videos, &manifest.classes)?,
        None => {
            let spec = cfg.ensemble_spec()?;
            let computed: Vec<PseudoLabelSequence> = videos
                .par_iter()
                .map(|v| tseg_core::ensemble::run_ple(&v.features, &v.ts, &spec))
                .collect::<tseg_core::Result<_>>()?;
            let ple_dir = cfg.out.join("ple");
            for (video, pl) in videos.iter().zip(&computed) {
                save_labels(
                    &ple_dir.join(format!("{}.txt", video.id)),
                    pl.labels(),
                    &manifest.classes,
                )?;
            }
            computed
        }
    };

    let samples: Vec<VideoSample> = videos
        .iter()
        .map(|v| VideoSample {
            id: v.id.clone(),
            features: v.features.clone(),
            ts: v.ts.clone(),
            gt: Some(v.ground_truth.clone()),
        })
        .collect();
    let encoder_cfg = cfg.encoder_config(input_dim, manifest.classes.len())?;
    let schedule = cfg.schedule()?;
    let outcome = train_ic(&samples, &initial, &schedule, &encoder_cfg)?;

    let checkpoint = cfg.out.join("checkpoint.bin");
    save_checkpoint(&checkpoint, &outcome.params)?;
    write_history(&cfg.out.join("history.csv"), &outcome.history)?;
    let final_dir = cfg.out.join("final_labels");
    for (video, pl) in videos.iter().zip(&outcome.final_labels) {
        save_labels(
            &final_dir.join(format!("{}.txt", video.id)),
            pl.labels(),
            &manifest.classes,
        )?;
    }
    if let Some(last) = outcome.history.last() {
        log::info!(
            "final epoch {}: loss {:.4}, label rate {:.2}%, pl acc {}",
            last.epoch,
            last.total,
            last.label_rate,
            last.pl_accuracy
                .map(|a| format!("{a:.2}%"))
                .unwrap_or_else(|| "n/a".into())
        );
    }
    println!("{}", checkpoint.display());
    Ok(())
}

/// Loads a checkpoint, predicts every video by per-frame argmax, writes the
/// prediction files and the metric report.
pub fn cmd_eval(cfg: &RunConfig, checkpoint_flag: Option<&Path>) -> Result<()> {
    let manifest = DatasetManifest::load(cfg.manifest_path()?)?;
    let videos = load_corpus(&manifest)?;
    let checkpoint_path = checkpoint_flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.checkpoint.clone())
        .ok_or_else(|| anyhow!("no checkpoint given; pass --checkpoint or set 'checkpoint'"))?;

    let mut eval = DatasetEval::new();
    let mut rows = Vec::new();
    if let Some(first) = videos.first() {
        let encoder_cfg = cfg.encoder_config(first.features.dim(), manifest.classes.len())?;
        let params = load_checkpoint(&checkpoint_path, &encoder_cfg)?;
        let predictions: Vec<Vec<ClassId>> = videos
            .par_iter()
            .map(|v| -> tseg_core::Result<_> {
                let (_, probs) = forward(&params, &v.features)?;
                Ok(probs.argmax_labels())
            })
            .collect::<tseg_core::Result<_>>()?;
        let pred_dir = cfg.out.join("predictions");
        for (video, pred) in videos.iter().zip(&predictions) {
            let as_options: Vec<Option<ClassId>> = pred.iter().map(|&c| Some(c)).collect();
            save_labels(
                &pred_dir.join(format!("{}.txt", video.id)),
                &as_options,
                &manifest.classes,
            )?;
            let scores = eval.add(pred, &video.ground_truth)?;
            rows.push(ReportRow {
                id: video.id.clone(),
                scores,
                label_rate: None,
                pl_accuracy: None,
            });
        }
    }
    let report = cfg.out.join("report.csv");
    let summary = eval.summary();
    write_report(&report, &rows, summary.as_ref().map(|s| (s, None, None)))?;
    if let Some(s) = &summary {
        println!(
            "F1@10 {:.2}  F1@25 {:.2}  F1@50 {:.2}  Edit {:.2}  Acc {:.2}",
            s.f1[0], s.f1[1], s.f1[2], s.edit, s.frame_pooled_accuracy
        );
    }
    println!("{}", report.display());
    Ok(())
}

/// Scores precomputed label files (`<pred>/<video-id>.txt`) against the
/// manifest's ground truth.
pub fn cmd_report(cfg: &RunConfig, pred_flag: Option<&Path>) -> Result<()> {
    let manifest = DatasetManifest::load(cfg.manifest_path()?)?;
    let videos = load_corpus(&manifest)?;
    let pred_dir = pred_flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.pred_dir.clone())
        .ok_or_else(|| anyhow!("no prediction directory; pass --pred or set 'pred_dir'"))?;

    let mut eval = DatasetEval::new();
    let mut rows = Vec::new();
    for video in &videos {
        let path: PathBuf = pred_dir.join(format!("{}.txt", video.id));
        let pred = load_full_labels(&path, &manifest.classes)
            .with_context(|| format!("prediction for video '{}'", video.id))?;
        let scores = eval.add(&pred, &video.ground_truth)?;
        rows.push(ReportRow {
            id: video.id.clone(),
            scores,
            label_rate: None,
            pl_accuracy: None,
        });
    }
    let report = cfg.out.join("report.csv");
    let summary = eval.summary();
    write_report(&report, &rows, summary.as_ref().map(|s| (s, None, None)))?;
    println!("{}", report.display());
    Ok(())
}
