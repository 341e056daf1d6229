use serde::Serialize;

/// Square 2D convolution, optionally followed by batch norm and ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub bias: bool,
    pub batch_norm: bool,
    pub relu: bool,
}

impl ConvSpec {
    pub fn new(
        kernel: usize,
        stride: usize,
        padding: usize,
        in_channels: usize,
        out_channels: usize,
    ) -> Self {
        Self {
            kernel,
            stride,
            padding,
            dilation: 1,
            in_channels,
            out_channels,
            bias: true,
            batch_norm: false,
            relu: false,
        }
    }

    pub fn dilated(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self
    }

    /// Conv without bias, followed by batch norm (and ReLU when `relu`).
    pub fn bn(mut self, relu: bool) -> Self {
        self.bias = false;
        self.batch_norm = true;
        self.relu = relu;
        self
    }

    pub fn relu(mut self) -> Self {
        self.relu = true;
        self
    }

    pub fn weight_count(&self) -> usize {
        self.kernel * self.kernel * self.in_channels * self.out_channels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PoolSpec {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Residual block: `relu?(main(x) + shortcut(x))`; an empty shortcut is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidualSpec {
    pub main: Vec<LayerSpec>,
    pub shortcut: Vec<LayerSpec>,
    pub relu: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransformerDims {
    pub d_model: usize,
    pub d_ff: usize,
    pub heads: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LayerSpec {
    Conv(ConvSpec),
    MaxPool(PoolSpec),
    /// Non-overlapping `patch x patch` projection with bias: a convolution with
    /// kernel = stride = `patch` and no padding.
    Patchify {
        patch: usize,
        in_channels: usize,
        out_channels: usize,
    },
    /// Per-position linear map.
    Pointwise {
        in_features: usize,
        out_features: usize,
        bias: bool,
    },
    Residual(ResidualSpec),
    LayerNorm {
        dim: usize,
    },
    TransformerEncoder(TransformerDims),
    TransformerDecoder(TransformerDims),
    Embedding {
        vocab: usize,
        dim: usize,
    },
}

/// Sliding-window geometry of a spatial layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Window {
    pub const IDENTITY: Window = Window {
        kernel: 1,
        stride: 1,
        padding: 0,
        dilation: 1,
    };

    /// Span of the kernel footprint on the input grid.
    pub fn extent(&self) -> usize {
        self.dilation * (self.kernel - 1) + 1
    }

    pub fn output_len(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        (padded >= self.extent()).then(|| (padded - self.extent()) / self.stride + 1)
    }
}

impl LayerSpec {
    pub fn is_spatial(&self) -> bool {
        matches!(
            self,
            LayerSpec::Conv(_)
                | LayerSpec::MaxPool(_)
                | LayerSpec::Patchify { .. }
                | LayerSpec::Pointwise { .. }
                | LayerSpec::Residual(_)
        )
    }

    /// Window of a single spatial layer; `None` for residual blocks and
    /// non-spatial layers.
    pub fn window(&self) -> Option<Window> {
        match *self {
            LayerSpec::Conv(c) => Some(Window {
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
                dilation: c.dilation,
            }),
            LayerSpec::MaxPool(p) => Some(Window {
                kernel: p.kernel,
                stride: p.stride,
                padding: p.padding,
                dilation: 1,
            }),
            LayerSpec::Patchify { patch, .. } => Some(Window {
                kernel: patch,
                stride: patch,
                padding: 0,
                dilation: 1,
            }),
            LayerSpec::Pointwise { .. } => Some(Window::IDENTITY),
            _ => None,
        }
    }

    /// Learnable scalars in this layer.
    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Conv(c) => {
                c.weight_count()
                    + if c.bias { c.out_channels } else { 0 }
                    + if c.batch_norm { 2 * c.out_channels } else { 0 }
            }
            LayerSpec::MaxPool(_) => 0,
            LayerSpec::Patchify {
                patch,
                in_channels,
                out_channels,
            } => patch * patch * in_channels * out_channels + out_channels,
            LayerSpec::Pointwise {
                in_features,
                out_features,
                bias,
            } => in_features * out_features + if *bias { *out_features } else { 0 },
            LayerSpec::Residual(r) => r.main.iter().chain(&r.shortcut).map(LayerSpec::param_count).sum(),
            LayerSpec::LayerNorm { dim } => 2 * dim,
            LayerSpec::TransformerEncoder(t) => {
                attention_params(t.d_model) + ffn_params(t) + 2 * 2 * t.d_model
            }
            LayerSpec::TransformerDecoder(t) => {
                2 * attention_params(t.d_model) + ffn_params(t) + 3 * 2 * t.d_model
            }
            LayerSpec::Embedding { vocab, dim } => vocab * dim,
        }
    }

    /// Whether the layer counts toward the convolution total: main-path
    /// convolutions and patch projections. Shortcut projections do not count.
    pub fn conv_count(&self) -> usize {
        match self {
            LayerSpec::Conv(_) | LayerSpec::Patchify { .. } => 1,
            LayerSpec::Residual(r) => r.main.iter().map(LayerSpec::conv_count).sum(),
            _ => 0,
        }
    }

    /// Kernel sizes of counted convolutions, 1x1 excluded.
    pub fn spatial_kernels(&self, out: &mut Vec<usize>) {
        match self {
            LayerSpec::Conv(c) if c.kernel > 1 => out.push(c.kernel),
            LayerSpec::Patchify { patch, .. } if *patch > 1 => out.push(*patch),
            LayerSpec::Residual(r) => r.main.iter().for_each(|l| l.spatial_kernels(out)),
            _ => {}
        }
    }
}

/// Q, K, V and output projections with biases.
pub fn attention_params(d: usize) -> usize {
    4 * d * d + 4 * d
}

pub fn ffn_params(t: &TransformerDims) -> usize {
    2 * t.d_model * t.d_ff + t.d_ff + t.d_model
}
