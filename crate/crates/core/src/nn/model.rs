use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::graph::{Conv2d, Graph, Var};
use super::tensor::Tensor;
use super::NnError;
use crate::arch::{sequence_length, FullModelSpec, LayerSpec, Stage};
use crate::grammar::{Token, TokenSequence, VOCAB_SIZE};

/// Inference and training switches that do not change the parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeConfig {
    /// Dropout probability on attention and feed-forward outputs while training.
    pub dropout: f64,
    /// Per-channel image normalization `(x - mean) / std`.
    pub mean: f64,
    pub std: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            dropout: 0.0,
            mean: 0.5,
            std: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Init {
    /// Uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Ones,
    Zeros,
}

/// Named parameter tensors in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    fn from_parts(parts: Vec<(String, Tensor)>) -> Self {
        let index = parts
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), i))
            .collect();
        let (names, tensors) = parts.into_iter().unzip();
        Self {
            names,
            tensors,
            index,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ParamStore {
        let mut out = self.clone();
        for t in &mut out.tensors {
            *t = t.map(&f);
        }
        out
    }

    /// Like [`ParamStore::map`] but the function also sees the tensor name.
    pub fn map_named(&self, f: impl Fn(&str, f64) -> f64) -> ParamStore {
        let mut out = self.clone();
        for (name, t) in out.names.iter().zip(&mut out.tensors) {
            *t = t.map(|x| f(name, x));
        }
        out
    }
}

type Decl = Vec<(String, Vec<usize>, Init)>;

fn declare_linear(out: &mut Decl, prefix: &str, inp: usize, outp: usize, bias: bool) {
    out.push((format!("{prefix}.weight"), vec![inp, outp], Init::FanIn(inp)));
    if bias {
        out.push((format!("{prefix}.bias"), vec![outp], Init::FanIn(inp)));
    }
}

fn declare_norm(out: &mut Decl, prefix: &str, d: usize) {
    out.push((format!("{prefix}.gamma"), vec![d], Init::Ones));
    out.push((format!("{prefix}.beta"), vec![d], Init::Zeros));
}

fn declare_attention(out: &mut Decl, prefix: &str, d: usize) {
    for p in ["q", "k", "v", "o"] {
        declare_linear(out, &format!("{prefix}.{p}"), d, d, true);
    }
}

fn declare_ffn(out: &mut Decl, prefix: &str, d: usize, ff: usize) {
    declare_linear(out, &format!("{prefix}.1"), d, ff, true);
    declare_linear(out, &format!("{prefix}.2"), ff, d, true);
}

pub(crate) fn declare_spatial(out: &mut Decl, prefix: &str, layer: &LayerSpec) {
    match layer {
        LayerSpec::Conv(c) => {
            let fan = c.in_channels * c.kernel * c.kernel;
            let shape = vec![c.out_channels, c.in_channels, c.kernel, c.kernel];
            out.push((format!("{prefix}.weight"), shape, Init::FanIn(fan)));
            if c.bias {
                out.push((format!("{prefix}.bias"), vec![c.out_channels], Init::FanIn(fan)));
            }
            if c.batch_norm {
                declare_norm(out, &format!("{prefix}.bn"), c.out_channels);
            }
        }
        LayerSpec::Patchify {
            patch,
            in_channels,
            out_channels,
        } => {
            let fan = in_channels * patch * patch;
            let shape = vec![*out_channels, *in_channels, *patch, *patch];
            out.push((format!("{prefix}.weight"), shape, Init::FanIn(fan)));
            out.push((format!("{prefix}.bias"), vec![*out_channels], Init::FanIn(fan)));
        }
        LayerSpec::Pointwise {
            in_features,
            out_features,
            bias,
        } => {
            let shape = vec![*out_features, *in_features, 1, 1];
            out.push((format!("{prefix}.weight"), shape, Init::FanIn(*in_features)));
            if *bias {
                out.push((
                    format!("{prefix}.bias"),
                    vec![*out_features],
                    Init::FanIn(*in_features),
                ));
            }
        }
        LayerSpec::Residual(r) => {
            for (j, l) in r.main.iter().enumerate() {
                declare_spatial(out, &format!("{prefix}.main.{j}"), l);
            }
            for (j, l) in r.shortcut.iter().enumerate() {
                declare_spatial(out, &format!("{prefix}.shortcut.{j}"), l);
            }
        }
        _ => {}
    }
}

/// Every parameter tensor the model owns, with shape and initializer.
pub(crate) fn declare(spec: &FullModelSpec) -> Decl {
    let mut out = Vec::new();
    let (d, ff) = (spec.d_model, spec.d_ff);
    let (mut vis, mut enc, mut dec) = (0, 0, 0);
    for (stage, layer) in spec.layers() {
        match (&layer, stage) {
            (_, Stage::VisualEncoder) => {
                declare_spatial(&mut out, &format!("visual.{vis}"), &layer);
                vis += 1;
            }
            (LayerSpec::TransformerEncoder(_), _) => {
                let p = format!("encoder.{enc}");
                declare_attention(&mut out, &format!("{p}.attn"), d);
                declare_norm(&mut out, &format!("{p}.norm1"), d);
                declare_ffn(&mut out, &format!("{p}.ffn"), d, ff);
                declare_norm(&mut out, &format!("{p}.norm2"), d);
                enc += 1;
            }
            (LayerSpec::TransformerDecoder(_), _) => {
                let p = format!("decoder.{dec}");
                declare_attention(&mut out, &format!("{p}.self_attn"), d);
                declare_norm(&mut out, &format!("{p}.norm1"), d);
                declare_attention(&mut out, &format!("{p}.cross_attn"), d);
                declare_norm(&mut out, &format!("{p}.norm2"), d);
                declare_ffn(&mut out, &format!("{p}.ffn"), d, ff);
                declare_norm(&mut out, &format!("{p}.norm3"), d);
                dec += 1;
            }
            (LayerSpec::LayerNorm { dim }, Stage::TransformerEncoder) => {
                declare_norm(&mut out, "encoder.norm", *dim)
            }
            (LayerSpec::LayerNorm { dim }, _) => declare_norm(&mut out, "decoder.norm", *dim),
            (LayerSpec::Embedding { vocab, dim }, _) => {
                out.push(("embedding".to_string(), vec![*vocab, *dim], Init::FanIn(1)))
            }
            (
                LayerSpec::Pointwise {
                    in_features,
                    out_features,
                    bias,
                },
                _,
            ) => declare_linear(&mut out, "head", *in_features, *out_features, *bias),
            _ => unreachable!("layer {layer:?} outside the visual stage"),
        }
    }
    out
}

/// Names and shapes of every tensor a [`ModelInstance`] of `spec` allocates,
/// in allocation order. Cheap even for full-size models.
pub fn parameter_shapes(spec: &FullModelSpec) -> Vec<(String, Vec<usize>)> {
    declare(spec).into_iter().map(|(n, s, _)| (n, s)).collect()
}

pub(crate) fn initialize(decl: Decl, rng: &mut ChaCha8Rng) -> ParamStore {
    let parts = decl
        .into_iter()
        .map(|(name, shape, init)| {
            let n = shape.iter().product();
            let data = match init {
                Init::FanIn(fan) => {
                    let b = 1.0 / (fan as f64).sqrt();
                    (0..n).map(|_| rng.gen_range(-b..=b)).collect()
                }
                Init::Ones => vec![1.0; n],
                Init::Zeros => vec![0.0; n],
            };
            (name, Tensor::new(shape, data))
        })
        .collect();
    ParamStore::from_parts(parts)
}

/// 1D sinusoidal encoding of `len` positions in `dim` channels.
pub fn sinusoid(len: usize, dim: usize) -> Tensor {
    let mut out = vec![0.0; len * dim];
    for pos in 0..len {
        for i in 0..dim {
            let freq = 10_000f64.powf(-((i / 2 * 2) as f64) / dim as f64);
            let a = pos as f64 * freq;
            out[pos * dim + i] = if i % 2 == 0 { a.sin() } else { a.cos() };
        }
    }
    Tensor::new(vec![len, dim], out)
}

/// 2D encoding of an `h x w` grid: row encoding in the first `d/2`
/// channels, column encoding in the rest. Positions are row-major.
pub fn sinusoid_2d(h: usize, w: usize, d: usize) -> Tensor {
    let half = d / 2;
    let rows = sinusoid(h, half);
    let cols = sinusoid(w, half);
    let mut out = Vec::with_capacity(h * w * d);
    for r in 0..h {
        for c in 0..w {
            out.extend_from_slice(rows.row(r));
            out.extend_from_slice(cols.row(c));
        }
    }
    Tensor::new(vec![h * w, d], out)
}

/// A graph under construction bound to one parameter set.
pub(crate) struct Forward<'a> {
    pub g: Graph,
    params: &'a ParamStore,
    vars: HashMap<&'a str, Var>,
    trainable: bool,
    dropout: Option<(f64, ChaCha8Rng)>,
}

impl<'a> Forward<'a> {
    pub fn new(params: &'a ParamStore, trainable: bool) -> Self {
        Self {
            g: Graph::new(),
            params,
            vars: HashMap::new(),
            trainable,
            dropout: None,
        }
    }

    pub fn with_dropout(mut self, p: f64, rng: ChaCha8Rng) -> Self {
        if p > 0.0 {
            self.dropout = Some((p, rng));
        }
        self
    }

    fn has(&self, name: &str) -> bool {
        self.params.get(name).is_some()
    }

    pub fn p(&mut self, name: &str) -> Var {
        let i = self
            .params
            .position(name)
            .unwrap_or_else(|| panic!("missing parameter {name}"));
        let key = self.params.names[i].as_str();
        if let Some(&v) = self.vars.get(key) {
            return v;
        }
        let t = self.params.tensors[i].clone();
        let v = if self.trainable {
            self.g.param(t)
        } else {
            self.g.constant(t)
        };
        self.vars.insert(key, v);
        v
    }

    /// Parameter gradients after `backward(root)`, aligned with the store;
    /// unused parameters get zeros.
    pub fn param_grads(&self, root: Var) -> Vec<Tensor> {
        let mut grads = self.g.backward(root);
        self.params
            .iter()
            .map(|(name, t)| {
                self.vars
                    .get(name)
                    .and_then(|&v| grads.take(v))
                    .unwrap_or_else(|| Tensor::zeros(t.shape()))
            })
            .collect()
    }

    fn dropout(&mut self, x: Var) -> Var {
        let Some((p, rng)) = self.dropout.as_mut() else {
            return x;
        };
        let keep = 1.0 - *p;
        let n = self.g.value(x).len();
        let mask = (0..n)
            .map(|_| if rng.gen_bool(keep) { 1.0 / keep } else { 0.0 })
            .collect();
        self.g.mask(x, mask)
    }

    fn linear(&mut self, x: Var, prefix: &str) -> Var {
        let w = self.p(&format!("{prefix}.weight"));
        let y = self.g.matmul(x, w);
        let b = format!("{prefix}.bias");
        if self.has(&b) {
            let b = self.p(&b);
            self.g.add_bias(y, b)
        } else {
            y
        }
    }

    fn norm(&mut self, x: Var, prefix: &str) -> Var {
        let gamma = self.p(&format!("{prefix}.gamma"));
        let beta = self.p(&format!("{prefix}.beta"));
        self.g.layer_norm(x, gamma, beta)
    }

    fn attention(&mut self, q_in: Var, kv_in: Var, prefix: &str, heads: usize, causal: bool) -> Var {
        let q = self.linear(q_in, &format!("{prefix}.q"));
        let k = self.linear(kv_in, &format!("{prefix}.k"));
        let v = self.linear(kv_in, &format!("{prefix}.v"));
        let d = self.g.value(q).dims2().1;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = self.g.slice_cols(q, h * dh, dh);
            let kh = self.g.slice_cols(k, h * dh, dh);
            let vh = self.g.slice_cols(v, h * dh, dh);
            let kt = self.g.transpose(kh);
            let s = self.g.matmul(qh, kt);
            let s = self.g.scale(s, scale);
            let a = self.g.softmax(s, causal);
            outs.push(self.g.matmul(a, vh));
        }
        let o = self.g.concat_cols(&outs);
        self.linear(o, &format!("{prefix}.o"))
    }

    fn ffn(&mut self, x: Var, prefix: &str) -> Var {
        let h = self.linear(x, &format!("{prefix}.1"));
        let h = self.g.relu(h);
        self.linear(h, &format!("{prefix}.2"))
    }

    pub fn spatial(&mut self, x: Var, prefix: &str, layer: &LayerSpec) -> Var {
        match layer {
            LayerSpec::Conv(c) => {
                let geom = Conv2d {
                    kernel: c.kernel,
                    stride: c.stride,
                    padding: c.padding,
                    dilation: c.dilation,
                };
                let w = self.p(&format!("{prefix}.weight"));
                let b = c.bias.then(|| self.p(&format!("{prefix}.bias")));
                let mut y = self.g.conv2d(x, w, b, geom);
                if c.batch_norm {
                    let gamma = self.p(&format!("{prefix}.bn.gamma"));
                    let beta = self.p(&format!("{prefix}.bn.beta"));
                    y = self.g.channel_affine(y, gamma, beta);
                }
                if c.relu {
                    y = self.g.relu(y);
                }
                y
            }
            LayerSpec::Patchify { patch, .. } => {
                let geom = Conv2d {
                    kernel: *patch,
                    stride: *patch,
                    padding: 0,
                    dilation: 1,
                };
                let w = self.p(&format!("{prefix}.weight"));
                let b = self.p(&format!("{prefix}.bias"));
                self.g.conv2d(x, w, Some(b), geom)
            }
            LayerSpec::Pointwise { bias, .. } => {
                let geom = Conv2d {
                    kernel: 1,
                    stride: 1,
                    padding: 0,
                    dilation: 1,
                };
                let w = self.p(&format!("{prefix}.weight"));
                let b = bias.then(|| self.p(&format!("{prefix}.bias")));
                self.g.conv2d(x, w, b, geom)
            }
            LayerSpec::MaxPool(p) => {
                let geom = Conv2d {
                    kernel: p.kernel,
                    stride: p.stride,
                    padding: p.padding,
                    dilation: 1,
                };
                self.g.max_pool(x, geom)
            }
            LayerSpec::Residual(r) => {
                let mut main = x;
                for (j, l) in r.main.iter().enumerate() {
                    main = self.spatial(main, &format!("{prefix}.main.{j}"), l);
                }
                let mut short = x;
                for (j, l) in r.shortcut.iter().enumerate() {
                    short = self.spatial(short, &format!("{prefix}.shortcut.{j}"), l);
                }
                let y = self.g.add(main, short);
                if r.relu {
                    self.g.relu(y)
                } else {
                    y
                }
            }
            other => panic!("{other:?} is not a spatial layer"),
        }
    }

    /// Visual stack output as a `[C,h,w]` feature map.
    pub fn visual(&mut self, x: Var, layers: &[LayerSpec]) -> Var {
        let mut y = x;
        for (i, l) in layers.iter().enumerate() {
            y = self.spatial(y, &format!("visual.{i}"), l);
        }
        y
    }

    /// Encoder memory `[N, d]` for a normalized image.
    pub fn encode(&mut self, spec: &FullModelSpec, x: Var) -> Var {
        let fmap = self.visual(x, &spec.encoder.layers);
        let (_, h, w) = self.g.value(fmap).dims3();
        let seq = self.g.to_sequence(fmap);
        let pos = self.g.constant(sinusoid_2d(h, w, spec.d_model));
        let mut y = self.g.add(seq, pos);
        for l in 0..spec.n_encoder_layers {
            let p = format!("encoder.{l}");
            let n = self.norm(y, &format!("{p}.norm1"));
            let a = self.attention(n, n, &format!("{p}.attn"), spec.heads, false);
            let a = self.dropout(a);
            y = self.g.add(y, a);
            let n = self.norm(y, &format!("{p}.norm2"));
            let f = self.ffn(n, &format!("{p}.ffn"));
            let f = self.dropout(f);
            y = self.g.add(y, f);
        }
        if spec.n_encoder_layers > 0 {
            y = self.norm(y, "encoder.norm");
        }
        y
    }

    /// Next-token logits `[len, V]` for every prefix of `ids`.
    pub fn decode(&mut self, spec: &FullModelSpec, memory: Var, ids: &[usize]) -> Var {
        let table = self.p("embedding");
        let emb = self.g.embedding(table, ids);
        let pos = self.g.constant(sinusoid(ids.len(), spec.d_model));
        let mut y = self.g.add(emb, pos);
        for l in 0..spec.n_decoder_layers {
            let p = format!("decoder.{l}");
            let n = self.norm(y, &format!("{p}.norm1"));
            let a = self.attention(n, n, &format!("{p}.self_attn"), spec.heads, true);
            let a = self.dropout(a);
            y = self.g.add(y, a);
            let n = self.norm(y, &format!("{p}.norm2"));
            let a = self.attention(n, memory, &format!("{p}.cross_attn"), spec.heads, false);
            let a = self.dropout(a);
            y = self.g.add(y, a);
            let n = self.norm(y, &format!("{p}.norm3"));
            let f = self.ffn(n, &format!("{p}.ffn"));
            let f = self.dropout(f);
            y = self.g.add(y, f);
        }
        let y = self.norm(y, "decoder.norm");
        self.linear(y, "head")
    }
}

/// A concrete, seeded parameterization of a [`FullModelSpec`].
#[derive(Debug, Clone)]
pub struct ModelInstance {
    spec: FullModelSpec,
    params: ParamStore,
    seed: u64,
    pub config: RuntimeConfig,
}

/// Teacher-forcing split of a target sequence: decoder inputs and targets.
fn teacher_forcing(
    spec: &FullModelSpec,
    gt: &TokenSequence,
) -> Result<(Vec<usize>, Vec<Option<usize>>), NnError> {
    let t = gt.tokens();
    if t.len() < 2 {
        return Err(NnError::EmptySequence);
    }
    if t[0] != Token::Sos {
        return Err(NnError::MissingStart);
    }
    if t.len() > spec.max_len {
        return Err(NnError::LengthExceeded {
            len: t.len(),
            max: spec.max_len,
        });
    }
    let inputs = t[..t.len() - 1].iter().map(|x| x.id() as usize).collect();
    let targets: Vec<Option<usize>> = t[1..]
        .iter()
        .map(|x| (*x != Token::Pad).then_some(x.id() as usize))
        .collect();
    if targets.iter().all(Option::is_none) {
        return Err(NnError::EmptySequence);
    }
    Ok((inputs, targets))
}

impl ModelInstance {
    pub fn new(spec: FullModelSpec, seed: u64) -> Result<Self, NnError> {
        spec.validate()?;
        sequence_length(&spec.encoder)?;
        if spec.vocab != VOCAB_SIZE {
            return Err(NnError::InvalidSpec(format!(
                "vocabulary of {} tokens does not match the {VOCAB_SIZE}-token grammar",
                spec.vocab
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = initialize(declare(&spec), &mut rng);
        Ok(Self {
            spec,
            params,
            seed,
            config: RuntimeConfig::default(),
        })
    }

    pub fn spec(&self) -> &FullModelSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn scalar_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Replaces one parameter tensor; the shape must not change.
    pub fn set_param(&mut self, name: &str, t: Tensor) -> Result<(), NnError> {
        let i = self
            .params
            .position(name)
            .ok_or_else(|| NnError::InvalidSpec(format!("no parameter named {name}")))?;
        if self.params.tensors[i].shape() != t.shape() {
            return Err(NnError::ShapeMismatch {
                expected: self.params.tensors[i].shape().to_vec(),
                found: t.shape().to_vec(),
            });
        }
        self.params.tensors[i] = t;
        Ok(())
    }

    /// Zeroes the output projection so every step predicts the uniform distribution.
    pub fn zero_head(&mut self) {
        for name in ["head.weight", "head.bias"] {
            if let Some(i) = self.params.position(name) {
                let shape = self.params.tensors[i].shape().to_vec();
                self.params.tensors[i] = Tensor::zeros(&shape);
            }
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        let (h, w) = self.spec.encoder.input_size;
        [self.spec.encoder.in_channels, h, w]
    }

    fn check_image(&self, image: &Tensor) -> Result<(), NnError> {
        let expected = self.input_shape();
        if image.shape() != expected {
            return Err(NnError::ShapeMismatch {
                expected: expected.to_vec(),
                found: image.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn normalized(&self, image: &Tensor) -> Tensor {
        let (m, s) = (self.config.mean, self.config.std);
        image.map(|x| (x - m) / s)
    }

    /// Visual feature map `[C, h, w]` before positional encoding.
    pub fn visual_features(&self, image: &Tensor) -> Result<Tensor, NnError> {
        self.check_image(image)?;
        let mut f = Forward::new(&self.params, false);
        let x = f.g.constant(self.normalized(image));
        let y = f.visual(x, &self.spec.encoder.layers);
        Ok(f.g.value(y).clone())
    }

    /// Encoder memory `[N, d_model]`.
    pub fn forward_encode(&self, image: &Tensor) -> Result<Tensor, NnError> {
        self.check_image(image)?;
        let mut f = Forward::new(&self.params, false);
        let x = f.g.constant(self.normalized(image));
        let y = f.encode(&self.spec, x);
        Ok(f.g.value(y).clone())
    }

    /// Teacher-forced logits `[n-1, V]` for a sequence starting with `<sos>`.
    pub fn logits(&self, image: &Tensor, tokens: &[Token]) -> Result<Tensor, NnError> {
        self.check_image(image)?;
        let ids: Vec<usize> = tokens.iter().map(|t| t.id() as usize).collect();
        let mut f = Forward::new(&self.params, false);
        let x = f.g.constant(self.normalized(image));
        let mem = f.encode(&self.spec, x);
        let y = f.decode(&self.spec, mem, &ids);
        Ok(f.g.value(y).clone())
    }

    /// Mean negative log-likelihood of `gt[1..]` given the image and the
    /// preceding tokens; `<pad>` targets are excluded.
    pub fn loss(&self, image: &Tensor, gt: &TokenSequence) -> Result<f64, NnError> {
        self.check_image(image)?;
        let (inputs, targets) = teacher_forcing(&self.spec, gt)?;
        let mut f = Forward::new(&self.params, false);
        let x = f.g.constant(self.normalized(image));
        let mem = f.encode(&self.spec, x);
        let logits = f.decode(&self.spec, mem, &inputs);
        let l = f.g.cross_entropy(logits, &targets);
        Ok(f.g.value(l).data()[0])
    }

    /// Loss and its gradient with respect to every parameter tensor. Dropout
    /// is active when `rng` is given and the configured rate is positive.
    pub fn loss_and_grads(
        &self,
        image: &Tensor,
        gt: &TokenSequence,
        rng: Option<ChaCha8Rng>,
    ) -> Result<(f64, Vec<Tensor>), NnError> {
        self.check_image(image)?;
        let (inputs, targets) = teacher_forcing(&self.spec, gt)?;
        let mut f = Forward::new(&self.params, true);
        if let Some(rng) = rng {
            f = f.with_dropout(self.config.dropout, rng);
        }
        let x = f.g.constant(self.normalized(image));
        let mem = f.encode(&self.spec, x);
        let logits = f.decode(&self.spec, mem, &inputs);
        let l = f.g.cross_entropy(logits, &targets);
        let loss = f.g.value(l).data()[0];
        Ok((loss, f.param_grads(l)))
    }

    /// Argmax decoding from `<sos>` until `<eos>` or `max_len` tokens.
    pub fn greedy_decode(&self, image: &Tensor, max_len: usize) -> Result<TokenSequence, NnError> {
        self.check_image(image)?;
        let max_len = max_len.min(self.spec.max_len);
        let memory = self.forward_encode(image)?;
        let mut tokens = vec![Token::Sos];
        while tokens.len() < max_len {
            let ids: Vec<usize> = tokens.iter().map(|t| t.id() as usize).collect();
            let mut f = Forward::new(&self.params, false);
            let mem = f.g.constant(memory.clone());
            let logits = f.decode(&self.spec, mem, &ids);
            let last = f.g.value(logits).row(ids.len() - 1);
            let best = last
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
                )
                .0;
            let t = Token::from_id(best as u32).expect("logit index inside the vocabulary");
            tokens.push(t);
            if t == Token::Eos {
                break;
            }
        }
        Ok(TokenSequence::with_bound(tokens, max_len.max(1))?)
    }
}
