//! A small trainable frame encoder: a 1x1 input projection, a stack of
//! residual blocks (dilated temporal convolution, ReLU, 1x1 convolution,
//! residual add) with doubling dilations and zero padding at the sequence
//! edges, and a linear classifier with softmax on top. Gradients are
//! hand-derived reverse mode for exactly this architecture; there is no
//! general autodiff here. All arithmetic is f64.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{FeatureSequence, HiddenSequence, ProbSequence};

/// Shape of the encoder. Dilation of block `l` is `2^l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub kernel: usize,
    pub classes: usize,
    pub seed: u64,
}

impl EncoderConfig {
    /// Defaults: 64 hidden channels, 4 blocks, kernel width 3.
    pub fn new(input_dim: usize, classes: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_dim: 64,
            layers: 4,
            kernel: 3,
            classes,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.layers == 0 || self.classes == 0 {
            return Err(Error::Config(
                "encoder dimensions and layer count must be >= 1".into(),
            ));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel width must be odd, got {}",
                self.kernel
            )));
        }
        Ok(())
    }

    pub fn dilation(&self, layer: usize) -> usize {
        1 << layer
    }

    /// One-sided receptive field reach: the farthest input frame that can
    /// influence an output frame, `(kernel-1)/2 * (2^layers - 1)` frames away.
    pub fn receptive_reach(&self) -> usize {
        let half = (self.kernel - 1) / 2;
        half * ((1 << self.layers) - 1)
    }
}

/// Name, shape, and flat offset of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn build_specs(cfg: &EncoderConfig) -> Vec<ParamSpec> {
    let (h, d, c, k) = (cfg.hidden_dim, cfg.input_dim, cfg.classes, cfg.kernel);
    let mut specs = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, shape: Vec<usize>| {
        let len: usize = shape.iter().product();
        specs.push(ParamSpec {
            name,
            shape,
            offset,
        });
        offset += len;
    };
    push("w_in".into(), vec![h, d]);
    push("b_in".into(), vec![h]);
    for l in 0..cfg.layers {
        push(format!("block{l}.w_conv"), vec![k, h, h]);
        push(format!("block{l}.b_conv"), vec![h]);
        push(format!("block{l}.w_point"), vec![h, h]);
        push(format!("block{l}.b_point"), vec![h]);
    }
    push("w_out".into(), vec![c, h]);
    push("b_out".into(), vec![c]);
    specs
}

/// All encoder parameters in one flat buffer, addressed through
/// [`ParamSpec`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    cfg: EncoderConfig,
    specs: Vec<ParamSpec>,
    data: Vec<f64>,
}

impl EncoderParams {
    pub fn cfg(&self) -> &EncoderConfig {
        &self.cfg
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn tensor(&self, index: usize) -> &[f64] {
        let spec = &self.specs[index];
        &self.data[spec.offset..spec.offset + spec.len()]
    }

    /// Name of the parameter tensor owning a flat index.
    pub fn name_at(&self, flat_index: usize) -> &str {
        let i = self
            .specs
            .partition_point(|s| s.offset <= flat_index)
            .saturating_sub(1);
        &self.specs[i].name
    }

    /// Rebuilds parameters from named tensors, checking names and shapes
    /// against the config. Used by the checkpoint loader.
    pub fn from_tensors(
        cfg: EncoderConfig,
        tensors: &[(String, Vec<usize>, Vec<f64>)],
    ) -> Result<Self> {
        cfg.validate()?;
        let specs = build_specs(&cfg);
        if tensors.len() != specs.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} tensors but the config expects {}",
                tensors.len(),
                specs.len()
            )));
        }
        let total = specs.iter().map(ParamSpec::len).sum();
        let mut data = vec![0.0; total];
        for (spec, (name, shape, values)) in specs.iter().zip(tensors) {
            if name != &spec.name || shape != &spec.shape {
                return Err(Error::Config(format!(
                    "checkpoint tensor '{name}' with shape {shape:?} does not match \
                     expected '{}' with shape {:?}",
                    spec.name, spec.shape
                )));
            }
            data[spec.offset..spec.offset + spec.len()].copy_from_slice(values);
        }
        Ok(Self { cfg, specs, data })
    }
}

/// Deterministic initialization: weights uniform in `(-s, s)` with
/// `s = 1/sqrt(fan_in)`, biases zero.
pub fn init_params(cfg: &EncoderConfig) -> Result<EncoderParams> {
    cfg.validate()?;
    let specs = build_specs(cfg);
    let total = specs.iter().map(ParamSpec::len).sum();
    let mut data = vec![0.0f64; total];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for spec in &specs {
        if spec.shape.len() == 1 {
            continue; // biases stay zero
        }
        // fan-in: kernel * in-channels for conv tensors, in-dim for 1x1 maps
        let fan_in = match spec.shape.len() {
            3 => spec.shape[0] * spec.shape[2],
            _ => spec.shape[1],
        } as f64;
        let scale = 1.0 / fan_in.sqrt();
        for v in &mut data[spec.offset..spec.offset + spec.len()] {
            *v = rng.random_range(-scale..scale);
        }
    }
    Ok(EncoderParams {
        cfg: cfg.clone(),
        specs,
        data,
    })
}

/// Gradient buffer with the same flat layout as [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct Gradients {
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            data: vec![0.0; params.len()],
        }
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    /// Adds `scale * other` elementwise.
    pub fn accumulate(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }
}

/// Intermediate activations kept from a forward pass so that [`backward`]
/// can run without recomputation.
pub struct ForwardPass {
    frames: usize,
    input: Vec<f64>,
    /// Residual-stream input of each block, length `layers`.
    layer_inputs: Vec<Vec<f64>>,
    /// Pre-ReLU activations of each block's dilated convolution.
    pre_acts: Vec<Vec<f64>>,
    hidden: HiddenSequence,
    probs: ProbSequence,
}

impl ForwardPass {
    pub fn hidden(&self) -> &HiddenSequence {
        &self.hidden
    }

    pub fn probs(&self) -> &ProbSequence {
        &self.probs
    }

    pub fn into_outputs(self) -> (HiddenSequence, ProbSequence) {
        (self.hidden, self.probs)
    }
}

/// Runs the encoder, returning hidden features and class probabilities.
pub fn forward(params: &EncoderParams, f: &FeatureSequence) -> Result<(HiddenSequence, ProbSequence)> {
    forward_pass(params, f).map(ForwardPass::into_outputs)
}

/// Runs the encoder, keeping the activations needed for [`backward`].
pub fn forward_pass(params: &EncoderParams, f: &FeatureSequence) -> Result<ForwardPass> {
    let cfg = &params.cfg;
    if f.dim() != cfg.input_dim {
        return Err(Error::Validation(format!(
            "features have dim {} but the encoder expects {}",
            f.dim(),
            cfg.input_dim
        )));
    }
    let (t_len, h, c, k) = (f.frames(), cfg.hidden_dim, cfg.classes, cfg.kernel);
    let half = (k - 1) as isize / 2;
    let input: Vec<f64> = f.data().iter().map(|&v| v as f64).collect();

    // 1x1 input projection
    let w_in = params.tensor(0);
    let b_in = params.tensor(1);
    let mut stream = vec![0.0f64; t_len * h];
    for t in 0..t_len {
        let x = &input[t * cfg.input_dim..(t + 1) * cfg.input_dim];
        let out = &mut stream[t * h..(t + 1) * h];
        for (o, slot) in out.iter_mut().enumerate() {
            let w = &w_in[o * cfg.input_dim..(o + 1) * cfg.input_dim];
            *slot = b_in[o] + dot(w, x);
        }
    }

    let mut layer_inputs = Vec::with_capacity(cfg.layers);
    let mut pre_acts = Vec::with_capacity(cfg.layers);
    for l in 0..cfg.layers {
        let w_conv = params.tensor(2 + 4 * l);
        let b_conv = params.tensor(3 + 4 * l);
        let w_point = params.tensor(4 + 4 * l);
        let b_point = params.tensor(5 + 4 * l);
        let dil = cfg.dilation(l) as isize;

        let mut pre = vec![0.0f64; t_len * h];
        for t in 0..t_len {
            let out = &mut pre[t * h..(t + 1) * h];
            out.copy_from_slice(b_conv);
            for tap in 0..k {
                let src = t as isize + (tap as isize - half) * dil;
                if src < 0 || src >= t_len as isize {
                    continue; // zero padding
                }
                let z = &stream[src as usize * h..(src as usize + 1) * h];
                let w_tap = &w_conv[tap * h * h..(tap + 1) * h * h];
                for (o, slot) in out.iter_mut().enumerate() {
                    *slot += dot(&w_tap[o * h..(o + 1) * h], z);
                }
            }
        }

        let mut next = stream.clone();
        for t in 0..t_len {
            let pre_row = &pre[t * h..(t + 1) * h];
            let out = &mut next[t * h..(t + 1) * h];
            for o in 0..h {
                let w = &w_point[o * h..(o + 1) * h];
                let mut acc = b_point[o];
                for (i, &wv) in w.iter().enumerate() {
                    acc += wv * pre_row[i].max(0.0);
                }
                out[o] += acc;
            }
        }

        layer_inputs.push(std::mem::replace(&mut stream, next));
        pre_acts.push(pre);
    }

    // classifier and stable log-softmax
    let w_out = params.tensor(params.specs.len() - 2);
    let b_out = params.tensor(params.specs.len() - 1);
    let mut log_probs = vec![0.0f64; t_len * c];
    for t in 0..t_len {
        let hrow = &stream[t * h..(t + 1) * h];
        let row = &mut log_probs[t * c..(t + 1) * c];
        for (cls, slot) in row.iter_mut().enumerate() {
            *slot = b_out[cls] + dot(&w_out[cls * h..(cls + 1) * h], hrow);
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }

    Ok(ForwardPass {
        frames: t_len,
        input,
        layer_inputs,
        pre_acts,
        hidden: HiddenSequence::new(t_len, h, stream),
        probs: ProbSequence::from_log_probs(t_len, c, log_probs),
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exact reverse-mode gradients of the forward computation. Accepts upstream
/// gradients on the hidden features (T x D_h) and on the classifier logits
/// (T x C); either may be all zeros.
pub fn backward(
    params: &EncoderParams,
    pass: &ForwardPass,
    grad_hidden: &[f64],
    grad_logits: &[f64],
) -> Result<Gradients> {
    let cfg = &params.cfg;
    let (t_len, h, c, k) = (pass.frames, cfg.hidden_dim, cfg.classes, cfg.kernel);
    let half = (k - 1) as isize / 2;
    if grad_hidden.len() != t_len * h || grad_logits.len() != t_len * c {
        return Err(Error::Validation(format!(
            "upstream gradient shapes {} / {} do not match {t_len} x {h} / {t_len} x {c}",
            grad_hidden.len(),
            grad_logits.len()
        )));
    }

    let mut grads = Gradients::zeros_like(params);
    let range_of = |idx: usize| -> std::ops::Range<usize> {
        let s = &params.specs[idx];
        s.offset..s.offset + s.len()
    };

    // classifier
    let w_out_idx = params.specs.len() - 2;
    let b_out_idx = params.specs.len() - 1;
    let hidden = pass.hidden.data();
    let mut gstream = grad_hidden.to_vec();
    {
        let w_out = params.tensor(w_out_idx);
        let (wr, br) = (range_of(w_out_idx), range_of(b_out_idx));
        for t in 0..t_len {
            let hrow = &hidden[t * h..(t + 1) * h];
            let grow = &grad_logits[t * c..(t + 1) * c];
            for (cls, &gl) in grow.iter().enumerate() {
                if gl == 0.0 {
                    continue;
                }
                let gw = &mut grads.data[wr.clone()];
                for (i, &hv) in hrow.iter().enumerate() {
                    gw[cls * h + i] += gl * hv;
                }
                grads.data[br.clone()][cls] += gl;
                let w = &w_out[cls * h..(cls + 1) * h];
                let gs = &mut gstream[t * h..(t + 1) * h];
                for (i, &wv) in w.iter().enumerate() {
                    gs[i] += gl * wv;
                }
            }
        }
    }

    // residual blocks, reverse order
    for l in (0..cfg.layers).rev() {
        let w_conv = params.tensor(2 + 4 * l);
        let w_point = params.tensor(4 + 4 * l);
        let dil = cfg.dilation(l) as isize;
        let pre = &pass.pre_acts[l];
        let z_in = &pass.layer_inputs[l];

        // back through the 1x1 conv into the ReLU output
        let mut g_act = vec![0.0f64; t_len * h];
        {
            let wp_range = range_of(4 + 4 * l);
            let bp_range = range_of(5 + 4 * l);
            for t in 0..t_len {
                let gv = &gstream[t * h..(t + 1) * h];
                let pre_row = &pre[t * h..(t + 1) * h];
                for (o, &g) in gv.iter().enumerate() {
                    grads.data[bp_range.clone()][o] += g;
                    let w = &w_point[o * h..(o + 1) * h];
                    let gw = &mut grads.data[wp_range.clone()];
                    let ga = &mut g_act[t * h..(t + 1) * h];
                    for i in 0..h {
                        let u = pre_row[i].max(0.0);
                        gw[o * h + i] += g * u;
                        if pre_row[i] > 0.0 {
                            ga[i] += g * w[i];
                        }
                    }
                }
            }
        }

        // back through the dilated conv; the residual path keeps gstream
        {
            let wc_range = range_of(2 + 4 * l);
            let bc_range = range_of(3 + 4 * l);
            let mut g_z = vec![0.0f64; t_len * h];
            for t in 0..t_len {
                let ga = &g_act[t * h..(t + 1) * h];
                for (o, &g) in ga.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    grads.data[bc_range.clone()][o] += g;
                }
                for tap in 0..k {
                    let src = t as isize + (tap as isize - half) * dil;
                    if src < 0 || src >= t_len as isize {
                        continue;
                    }
                    let src = src as usize;
                    let z = &z_in[src * h..(src + 1) * h];
                    let w_tap = &w_conv[tap * h * h..(tap + 1) * h * h];
                    let gw = &mut grads.data[wc_range.clone()];
                    let gz = &mut g_z[src * h..(src + 1) * h];
                    for (o, &g) in ga.iter().enumerate() {
                        if g == 0.0 {
                            continue;
                        }
                        let w = &w_tap[o * h..(o + 1) * h];
                        let gw_tap = &mut gw[tap * h * h + o * h..tap * h * h + (o + 1) * h];
                        for i in 0..h {
                            gw_tap[i] += g * z[i];
                            gz[i] += g * w[i];
                        }
                    }
                }
            }
            for (a, b) in gstream.iter_mut().zip(&g_z) {
                *a += b;
            }
        }
    }

    // input projection
    {
        let d = cfg.input_dim;
        let w_in_range = range_of(0);
        let b_in_range = range_of(1);
        for t in 0..t_len {
            let gz = &gstream[t * h..(t + 1) * h];
            let x = &pass.input[t * d..(t + 1) * d];
            for (o, &g) in gz.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads.data[b_in_range.clone()][o] += g;
                let gw = &mut grads.data[w_in_range.clone()];
                for (i, &xv) in x.iter().enumerate() {
                    gw[o * d + i] += g * xv;
                }
            }
        }
    }

    Ok(grads)
}

/// Adam state: first and second moment accumulators, step count, and the
/// update hyper-parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One Adam update with bias correction. Rejects non-finite gradients with
/// the offending parameter's name.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut EncoderParams,
    grads: &Gradients,
) -> Result<()> {
    assert_eq!(state.m.len(), params.len());
    assert_eq!(grads.data.len(), params.len());
    if let Some(i) = grads.data.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient of parameter '{}'",
            params.name_at(i)
        )));
    }
    state.step += 1;
    let bc1 = 1.0 - state.beta1.powi(state.step as i32);
    let bc2 = 1.0 - state.beta2.powi(state.step as i32);
    let data = params.flat_mut();
    for i in 0..data.len() {
        let g = grads.data[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        data[i] -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> EncoderConfig {
        EncoderConfig {
            input_dim: 2,
            hidden_dim: 3,
            layers: 2,
            kernel: 3,
            classes: 2,
            seed: 9,
        }
    }

    fn random_features(t_len: usize, dim: usize, seed: u64) -> FeatureSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..t_len * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        FeatureSequence::new(t_len, dim, data).unwrap()
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = small_cfg();
        let a = init_params(&cfg).unwrap();
        let b = init_params(&cfg).unwrap();
        assert_eq!(a.flat(), b.flat());
        let mut cfg2 = cfg.clone();
        cfg2.seed = 10;
        let c = init_params(&cfg2).unwrap();
        assert_ne!(a.flat(), c.flat());
    }

    #[test]
    fn param_count_matches_shape_arithmetic() {
        let cfg = EncoderConfig {
            input_dim: 2,
            hidden_dim: 1,
            layers: 1,
            kernel: 3,
            classes: 2,
            seed: 0,
        };
        let p = init_params(&cfg).unwrap();
        // w_in 1x2 + b_in 1 + w_conv 3x1x1 + b_conv 1 + w_point 1x1 + b_point 1
        // + w_out 2x1 + b_out 2
        assert_eq!(p.len(), 2 + 1 + 3 + 1 + 1 + 1 + 2 + 2);
    }

    #[test]
    fn zero_classifier_gives_uniform_probs() {
        let cfg = small_cfg();
        let mut p = init_params(&cfg).unwrap();
        let n_out = cfg.classes * cfg.hidden_dim + cfg.classes;
        let len = p.len();
        for v in &mut p.flat_mut()[len - n_out..] {
            *v = 0.0;
        }
        let f = random_features(5, cfg.input_dim, 3);
        let (_, probs) = forward(&p, &f).unwrap();
        for t in 0..5 {
            for c in 0..cfg.classes {
                assert!((probs.prob(t, c) - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn output_shapes_and_row_sums() {
        let cfg = small_cfg();
        let p = init_params(&cfg).unwrap();
        for t_len in [1, 2, 7] {
            let f = random_features(t_len, cfg.input_dim, t_len as u64);
            let (hidden, probs) = forward(&p, &f).unwrap();
            assert_eq!(hidden.frames(), t_len);
            assert_eq!(hidden.dim(), cfg.hidden_dim);
            assert_eq!(probs.frames(), t_len);
            assert_eq!(probs.classes(), cfg.classes);
            for t in 0..t_len {
                let s: f64 = probs.row(t).iter().sum();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cfg = small_cfg();
        let p = init_params(&cfg).unwrap();
        let f = random_features(4, cfg.input_dim + 1, 0);
        assert!(forward(&p, &f).is_err());
    }

    #[test]
    fn perturbation_stays_within_receptive_field() {
        let cfg = EncoderConfig {
            input_dim: 2,
            hidden_dim: 4,
            layers: 3,
            kernel: 3,
            classes: 3,
            seed: 21,
        };
        let p = init_params(&cfg).unwrap();
        let t_len = 40;
        let f = random_features(t_len, cfg.input_dim, 5);
        let (_, base) = forward(&p, &f).unwrap();

        let center = 20;
        let mut data = f.data().to_vec();
        data[center * cfg.input_dim] += 1.0;
        let g = FeatureSequence::new(t_len, cfg.input_dim, data).unwrap();
        let (_, bumped) = forward(&p, &g).unwrap();

        let reach = cfg.receptive_reach();
        assert_eq!(reach, 7);
        let mut changed_somewhere = false;
        for t in 0..t_len {
            let delta: f64 = (0..cfg.classes)
                .map(|c| (base.prob(t, c) - bumped.prob(t, c)).abs())
                .sum();
            if t + reach < center || t > center + reach {
                assert_eq!(delta, 0.0, "frame {t} outside reach changed");
            } else if delta > 0.0 {
                changed_somewhere = true;
            }
        }
        assert!(changed_somewhere);
    }

    #[test]
    fn zero_upstream_gives_zero_grads_and_linearity_holds() {
        let cfg = small_cfg();
        let p = init_params(&cfg).unwrap();
        let f = random_features(6, cfg.input_dim, 77);
        let pass = forward_pass(&p, &f).unwrap();
        let t_len = 6;

        let zeros_h = vec![0.0; t_len * cfg.hidden_dim];
        let zeros_l = vec![0.0; t_len * cfg.classes];
        let g0 = backward(&p, &pass, &zeros_h, &zeros_l).unwrap();
        assert!(g0.flat().iter().all(|&g| g == 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gh1: Vec<f64> = (0..t_len * cfg.hidden_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let gl1: Vec<f64> = (0..t_len * cfg.classes)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let gh2: Vec<f64> = (0..t_len * cfg.hidden_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let gl2: Vec<f64> = (0..t_len * cfg.classes)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let sum_h: Vec<f64> = gh1.iter().zip(&gh2).map(|(a, b)| a + b).collect();
        let sum_l: Vec<f64> = gl1.iter().zip(&gl2).map(|(a, b)| a + b).collect();

        let g1 = backward(&p, &pass, &gh1, &gl1).unwrap();
        let g2 = backward(&p, &pass, &gh2, &gl2).unwrap();
        let g12 = backward(&p, &pass, &sum_h, &sum_l).unwrap();
        for i in 0..p.len() {
            assert!((g12.flat()[i] - g1.flat()[i] - g2.flat()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn adam_zero_grad_keeps_params() {
        let cfg = small_cfg();
        let mut p = init_params(&cfg).unwrap();
        let before = p.flat().to_vec();
        let mut state = OptimizerState::new(p.len(), 0.01);
        let grads = Gradients::zeros_like(&p);
        adam_step(&mut state, &mut p, &grads).unwrap();
        assert_eq!(p.flat(), &before[..]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr_against_gradient_sign() {
        let cfg = small_cfg();
        let mut p = init_params(&cfg).unwrap();
        let before = p.flat().to_vec();
        let lr = 0.05;
        let mut state = OptimizerState::new(p.len(), lr);
        let mut grads = Gradients::zeros_like(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for g in &mut grads.data {
            *g = rng.random_range(0.5..2.0) * if rng.random_range(0.0..1.0) < 0.5 { -1.0 } else { 1.0 };
        }
        adam_step(&mut state, &mut p, &grads).unwrap();
        for i in 0..p.len() {
            let moved = p.flat()[i] - before[i];
            let expected = -lr * grads.data[i].signum();
            assert!((moved - expected).abs() < lr * 1e-6, "index {i}");
        }
    }

    #[test]
    fn adam_descends_a_quadratic() {
        // minimize (w - 3)^2 over a single fake parameter
        let cfg = EncoderConfig {
            input_dim: 1,
            hidden_dim: 1,
            layers: 1,
            kernel: 1,
            classes: 1,
            seed: 0,
        };
        let mut p = init_params(&cfg).unwrap();
        let mut state = OptimizerState::new(p.len(), 0.1);
        let objective = |w: f64| (w - 3.0) * (w - 3.0);
        let mut last = objective(p.flat()[0]);
        for _ in 0..3 {
            let mut grads = Gradients::zeros_like(&p);
            grads.data[0] = 2.0 * (p.flat()[0] - 3.0);
            adam_step(&mut state, &mut p, &grads).unwrap();
        }
        let now = objective(p.flat()[0]);
        assert!(now < last);
        last = now;
        let _ = last;
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let cfg = small_cfg();
        let mut p = init_params(&cfg).unwrap();
        let mut state = OptimizerState::new(p.len(), 0.01);
        let mut grads = Gradients::zeros_like(&p);
        let idx = p.specs()[2].offset; // first conv weight
        grads.data[idx] = f64::NAN;
        let err = adam_step(&mut state, &mut p, &grads).unwrap_err();
        assert!(err.to_string().contains("block0.w_conv"), "{err}");
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = small_cfg();
        let p = init_params(&cfg).unwrap();
        let f = random_features(9, cfg.input_dim, 8);
        let (h1, p1) = forward(&p, &f).unwrap();
        let (h2, p2) = forward(&p, &f).unwrap();
        assert_eq!(h1.data(), h2.data());
        assert_eq!(p1.row(3), p2.row(3));
    }
}
