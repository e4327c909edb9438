//! The four training losses and their analytic gradients. Classification,
//! smoothing, and confidence losses differentiate with respect to the
//! classifier logits (the softmax is folded into the gradient); the
//! clustering loss differentiates with respect to the hidden features.
//!
//! Two stop-gradient conventions matter here and are documented per loss: the
//! smoothing loss treats the previous frame's probabilities as constant, and
//! the clustering loss treats segment centers as constant.

use crate::error::{Error, Result};
use crate::types::{HiddenSequence, ProbSequence, PseudoLabelSequence, TimestampAnnotation};

/// How the smoothing loss treats per-step log-probability changes larger
/// than the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmoothingVariant {
    /// Clamp the absolute change from above at theta before squaring, so a
    /// constant prediction costs nothing and big jumps saturate.
    #[default]
    ClampAbove,
    /// Square `max(|change|, theta)` instead, which charges every step at
    /// least theta^2. Kept for comparison runs.
    LiteralMax,
}

impl std::str::FromStr for SmoothingVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamp" => Ok(SmoothingVariant::ClampAbove),
            "max" => Ok(SmoothingVariant::LiteralMax),
            other => Err(Error::Config(format!(
                "unknown smoothing variant '{other}', expected clamp or max"
            ))),
        }
    }
}

/// Weights of the combined loss plus the smoothing threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub smoothing: SmoothingVariant,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 0.15,
            beta: 0.075,
            gamma: 0.15,
            theta: 4.0,
            smoothing: SmoothingVariant::ClampAbove,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || self.beta < 0.0 || self.gamma < 0.0 || self.theta < 0.0 {
            return Err(Error::Config(
                "loss weights and theta must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Converts a gradient with respect to log-probabilities into a gradient with
/// respect to logits, in place, row by row:
/// `g_logit[c] = g_log[c] - y[c] * sum(g_log)`.
fn log_grad_to_logit_grad(probs: &ProbSequence, grad: &mut [f64]) {
    let c = probs.classes();
    for t in 0..probs.frames() {
        let row = &mut grad[t * c..(t + 1) * c];
        let total: f64 = row.iter().sum();
        if total == 0.0 {
            continue;
        }
        let y = probs.row(t);
        for (g, &p) in row.iter_mut().zip(y) {
            *g -= p * total;
        }
    }
}

/// Cross-entropy over labeled frames only, averaged by the labeled count.
/// Ambiguous frames contribute nothing and get zero gradient. Returns the
/// value and the gradient with respect to logits (T x C).
pub fn classification_loss(
    probs: &ProbSequence,
    pl: &PseudoLabelSequence,
) -> Result<(f64, Vec<f64>)> {
    if probs.frames() != pl.len() {
        return Err(Error::Validation(format!(
            "probs cover {} frames but pseudo-labels cover {}",
            probs.frames(),
            pl.len()
        )));
    }
    let count = pl.num_labeled();
    if count == 0 {
        return Err(Error::Validation(
            "classification loss needs at least one labeled frame".into(),
        ));
    }
    let c = probs.classes();
    let scale = 1.0 / count as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0f64; probs.frames() * c];
    for run in pl.runs() {
        for t in run.start..run.end {
            value -= probs.log_prob(t, run.class) * scale;
            grad[t * c + run.class] -= scale;
        }
    }
    log_grad_to_logit_grad(probs, &mut grad);
    Ok((value, grad))
}

/// Truncated squared difference of consecutive log-probabilities, normalized
/// by T * C. No gradient flows into the previous frame's probabilities, and
/// saturated terms have zero gradient.
pub fn smoothing_loss(
    probs: &ProbSequence,
    theta: f64,
    variant: SmoothingVariant,
) -> Result<(f64, Vec<f64>)> {
    let (t_len, c) = (probs.frames(), probs.classes());
    if t_len < 2 {
        return Err(Error::Validation(
            "smoothing loss needs at least two frames".into(),
        ));
    }
    let scale = 1.0 / (t_len * c) as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0f64; t_len * c];
    for t in 1..t_len {
        let cur = probs.log_row(t);
        let prev = probs.log_row(t - 1);
        let grow = &mut grad[t * c..(t + 1) * c];
        for cls in 0..c {
            let delta = cur[cls] - prev[cls];
            let magnitude = delta.abs();
            match variant {
                SmoothingVariant::ClampAbove => {
                    if magnitude < theta {
                        value += delta * delta * scale;
                        grow[cls] += 2.0 * delta * scale;
                    } else {
                        value += theta * theta * scale;
                    }
                }
                SmoothingVariant::LiteralMax => {
                    if magnitude > theta {
                        value += delta * delta * scale;
                        grow[cls] += 2.0 * delta * scale;
                    } else {
                        value += theta * theta * scale;
                    }
                }
            }
        }
    }
    log_grad_to_logit_grad(probs, &mut grad);
    Ok((value, grad))
}

/// Hinge penalty on log-probability steps of each timestamp's class inside
/// the window between its neighboring timestamps: after the stamp, increases
/// are penalized; before it, decreases are. Normalized by
/// `2 * (tau_last - tau_first)`. With fewer than two timestamps the loss is
/// defined as zero and a warning is logged. Gradient flows into both frames
/// of every active hinge.
pub fn confidence_loss(
    probs: &ProbSequence,
    ts: &TimestampAnnotation,
) -> Result<(f64, Vec<f64>)> {
    let (t_len, c) = (probs.frames(), probs.classes());
    ts.check_frames(t_len)?;
    let n = ts.len();
    let mut grad = vec![0.0f64; t_len * c];
    if n < 2 {
        log::warn!("confidence loss needs >= 2 timestamps, got {n}; returning 0");
        return Ok((0.0, grad));
    }
    let span = (ts.frame(n - 1) - ts.frame(0)) as f64;
    let scale = 1.0 / (2.0 * span);
    let mut value = 0.0;
    for stamp in 0..n {
        let class = ts.class(stamp);
        let tau = ts.frame(stamp);
        let start = if stamp == 0 { 0 } else { ts.frame(stamp - 1) };
        let end = if stamp + 1 == n {
            t_len - 1
        } else {
            ts.frame(stamp + 1)
        };
        for t in start.max(1)..=end {
            let step = probs.log_prob(t, class) - probs.log_prob(t - 1, class);
            let hinge = if t >= tau { step } else { -step };
            if hinge > 0.0 {
                value += hinge * scale;
                let sign = if t >= tau { 1.0 } else { -1.0 };
                grad[t * c + class] += sign * scale;
                grad[(t - 1) * c + class] -= sign * scale;
            }
        }
    }
    log_grad_to_logit_grad(probs, &mut grad);
    Ok((value, grad))
}

/// Mean squared distance of each labeled frame's hidden feature to its
/// segment center, the center being the mean over that segment's labeled
/// frames. Centers are treated as constants for differentiation, so the
/// gradient at a labeled frame is `2 (h_t - m_n) / count` and zero at
/// ambiguous frames. Returns the value and the gradient with respect to the
/// hidden features (T x D_h).
pub fn clustering_loss(
    hidden: &HiddenSequence,
    pl: &PseudoLabelSequence,
) -> Result<(f64, Vec<f64>)> {
    if hidden.frames() != pl.len() {
        return Err(Error::Validation(format!(
            "hidden features cover {} frames but pseudo-labels cover {}",
            hidden.frames(),
            pl.len()
        )));
    }
    let count = pl.num_labeled();
    if count == 0 {
        return Err(Error::Validation(
            "clustering loss needs at least one labeled frame".into(),
        ));
    }
    let dim = hidden.dim();
    let scale = 1.0 / count as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0f64; hidden.frames() * dim];
    let mut center = vec![0.0f64; dim];
    for run in pl.runs() {
        center.iter_mut().for_each(|v| *v = 0.0);
        for t in run.start..run.end {
            for (acc, &h) in center.iter_mut().zip(hidden.row(t)) {
                *acc += h;
            }
        }
        let inv_len = 1.0 / run.len() as f64;
        center.iter_mut().for_each(|v| *v *= inv_len);
        for t in run.start..run.end {
            let grow = &mut grad[t * dim..(t + 1) * dim];
            for ((g, &h), &m) in grow.iter_mut().zip(hidden.row(t)).zip(center.iter()) {
                let diff = h - m;
                value += diff * diff * scale;
                *g = 2.0 * diff * scale;
            }
        }
    }
    Ok((value, grad))
}

/// Combined loss value, per-component values for logging, and the summed
/// gradients with respect to logits and hidden features.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: f64,
    pub classification: f64,
    pub smoothing: f64,
    pub confidence: f64,
    pub clustering: f64,
    pub grad_logits: Vec<f64>,
    pub grad_hidden: Vec<f64>,
}

/// Weighted sum of the four losses:
/// `classification + lambda * smoothing + beta * confidence + gamma * clustering`.
/// A zero gamma skips the clustering term entirely.
pub fn total_loss(
    probs: &ProbSequence,
    hidden: &HiddenSequence,
    pl: &PseudoLabelSequence,
    ts: &TimestampAnnotation,
    w: &LossWeights,
) -> Result<LossBreakdown> {
    w.validate()?;
    let (cls_value, cls_grad) = classification_loss(probs, pl)?;
    let (smo_value, smo_grad) = smoothing_loss(probs, w.theta, w.smoothing)?;
    let (conf_value, conf_grad) = confidence_loss(probs, ts)?;

    let mut grad_logits = cls_grad;
    for (g, (&s, &cf)) in grad_logits.iter_mut().zip(smo_grad.iter().zip(&conf_grad)) {
        *g += w.lambda * s + w.beta * cf;
    }

    let (clu_value, grad_hidden) = if w.gamma > 0.0 {
        let (value, mut grad) = clustering_loss(hidden, pl)?;
        grad.iter_mut().for_each(|g| *g *= w.gamma);
        (value, grad)
    } else {
        (0.0, vec![0.0; hidden.frames() * hidden.dim()])
    };

    Ok(LossBreakdown {
        total: cls_value + w.lambda * smo_value + w.beta * conf_value + w.gamma * clu_value,
        classification: cls_value,
        smoothing: smo_value,
        confidence: conf_value,
        clustering: clu_value,
        grad_logits,
        grad_hidden,
    })
}
