use serde::Serialize;

use super::layer::{LayerSpec, TransformerDims};
use super::AnalysisError;

/// Spatial layer stack of a visual encoder applied to an `(H, W)` image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncoderSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub input_size: (usize, usize),
    pub in_channels: usize,
}

impl EncoderSpec {
    pub const DEFAULT_INPUT: (usize, usize) = (448, 448);

    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Self {
        Self {
            name: name.into(),
            layers,
            input_size: Self::DEFAULT_INPUT,
            in_channels: 3,
        }
    }

    pub fn with_input(mut self, h: usize, w: usize) -> Self {
        self.input_size = (h, w);
        self
    }

    pub fn with_channels(mut self, c: usize) -> Self {
        self.in_channels = c;
        self
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for (i, l) in self.layers.iter().enumerate() {
            if !l.is_spatial() {
                return Err(AnalysisError::NotSpatial { layer: i });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    VisualEncoder,
    TransformerEncoder,
    TransformerDecoder,
    Embeddings,
    OutputHead,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::VisualEncoder,
        Stage::TransformerEncoder,
        Stage::TransformerDecoder,
        Stage::Embeddings,
        Stage::OutputHead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::VisualEncoder => "visual_encoder",
            Stage::TransformerEncoder => "transformer_encoder",
            Stage::TransformerDecoder => "transformer_decoder",
            Stage::Embeddings => "embeddings",
            Stage::OutputHead => "output_head",
        }
    }
}

/// Visual encoder plus the transformer encoder/decoder that reads its features.
///
/// Transformer layers are pre-norm; each transformer stack ends with a
/// LayerNorm. Positional encodings are fixed sinusoids and hold no parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FullModelSpec {
    pub encoder: EncoderSpec,
    pub n_encoder_layers: usize,
    pub n_decoder_layers: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub heads: usize,
    pub vocab: usize,
    pub max_len: usize,
    /// Decoder length used for MAC counting (one teacher-forced pass).
    pub decode_len: usize,
}

impl FullModelSpec {
    /// Full-size transformer: d 512, FFN 1024, 8 heads, 4 decoder layers,
    /// vocabulary 32, sequences up to 512.
    pub fn full_size(encoder: EncoderSpec, n_encoder_layers: usize) -> Self {
        Self {
            encoder,
            n_encoder_layers,
            n_decoder_layers: 4,
            d_model: 512,
            d_ff: 1024,
            heads: 8,
            vocab: 32,
            max_len: 512,
            decode_len: 512,
        }
    }

    /// Desk-scale transformer: d 64, FFN 128, 4 heads, 2 + 2 layers.
    pub fn toy(encoder: EncoderSpec, max_len: usize) -> Self {
        Self {
            encoder,
            n_encoder_layers: 2,
            n_decoder_layers: 2,
            d_model: 64,
            d_ff: 128,
            heads: 4,
            vocab: 32,
            max_len,
            decode_len: max_len,
        }
    }

    pub fn name(&self) -> &str {
        &self.encoder.name
    }

    pub fn with_input_size(mut self, h: usize, w: usize) -> Self {
        self.encoder.input_size = (h, w);
        self
    }

    pub fn dims(&self) -> TransformerDims {
        TransformerDims {
            d_model: self.d_model,
            d_ff: self.d_ff,
            heads: self.heads,
        }
    }

    /// Every layer of the model in execution order, tagged with its stage.
    pub fn layers(&self) -> Vec<(Stage, LayerSpec)> {
        let dims = self.dims();
        let mut out: Vec<(Stage, LayerSpec)> = self
            .encoder
            .layers
            .iter()
            .map(|l| (Stage::VisualEncoder, l.clone()))
            .collect();
        for _ in 0..self.n_encoder_layers {
            out.push((Stage::TransformerEncoder, LayerSpec::TransformerEncoder(dims)));
        }
        if self.n_encoder_layers > 0 {
            out.push((
                Stage::TransformerEncoder,
                LayerSpec::LayerNorm { dim: self.d_model },
            ));
        }
        out.push((
            Stage::Embeddings,
            LayerSpec::Embedding {
                vocab: self.vocab,
                dim: self.d_model,
            },
        ));
        for _ in 0..self.n_decoder_layers {
            out.push((Stage::TransformerDecoder, LayerSpec::TransformerDecoder(dims)));
        }
        out.push((
            Stage::TransformerDecoder,
            LayerSpec::LayerNorm { dim: self.d_model },
        ));
        out.push((
            Stage::OutputHead,
            LayerSpec::Pointwise {
                in_features: self.d_model,
                out_features: self.vocab,
                bias: true,
            },
        ));
        out
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        self.encoder.validate()?;
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(AnalysisError::InvalidDims {
                reason: format!(
                    "d_model {} is not divisible by {} heads",
                    self.d_model, self.heads
                ),
            });
        }
        if !self.d_model.is_multiple_of(4) {
            return Err(AnalysisError::InvalidDims {
                reason: format!(
                    "d_model {} must be a multiple of 4 for 2D positional encodings",
                    self.d_model
                ),
            });
        }
        Ok(())
    }
}
