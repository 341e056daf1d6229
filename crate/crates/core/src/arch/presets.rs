//! Named model configurations.
//!
//! ResNets follow the torchvision layouts with output stride 16: the max-pool
//! keeps stride 1 and every later 3x3 convolution is dilated by 2, so the
//! theoretical receptive field equals that of the stride-32 network.
//! ConvStems are stride-2 conv-BN-ReLU stages (widths 48, 96, 192, ...,
//! padding 1) followed by a 1x1 projection to `d_model`.

use super::layer::{ConvSpec, LayerSpec, PoolSpec, ResidualSpec};
use super::spec::{EncoderSpec, FullModelSpec};
use super::AnalysisError;

pub const FULL_PRESETS: [&str; 15] = [
    "resnet18",
    "resnet34",
    "resnet50",
    "linearproj-14",
    "linearproj-16",
    "linearproj-28",
    "linearproj-56",
    "linearproj-112",
    "convstem",
    "convstem-r1",
    "convstem-r2",
    "convstem-r3",
    "convstem-n1",
    "convstem-n2",
    "convstem-n3",
];

pub const TOY_PRESETS: [&str; 6] = [
    "toy-linearproj-4",
    "toy-linearproj-8",
    "toy-linearproj-16",
    "toy-convstem",
    "toy-convstem-k5",
    "toy-resnet",
];

/// Side length of toy input images.
pub const TOY_INPUT: usize = 32;
/// Longest token sequence toy models decode.
pub const TOY_MAX_LEN: usize = 64;

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    FULL_PRESETS.iter().chain(TOY_PRESETS.iter()).copied()
}

pub fn preset(name: &str) -> Result<FullModelSpec, AnalysisError> {
    let d = 512;
    let spec = match name {
        "resnet18" => FullModelSpec::full_size(resnet(name, Block::Basic, [2, 2, 2, 2], d), 2),
        "resnet34" => FullModelSpec::full_size(resnet(name, Block::Basic, [3, 4, 6, 3], d), 2),
        "resnet50" => FullModelSpec::full_size(resnet(name, Block::Bottleneck, [3, 4, 6, 3], d), 2),
        "convstem" => FullModelSpec::full_size(conv_stem(name, 5, 4, 48, d).with_input(448, 448), 4),
        "convstem-r1" => FullModelSpec::full_size(conv_stem(name, 3, 4, 48, d).with_input(448, 448), 4),
        "convstem-r2" => FullModelSpec::full_size(conv_stem(name, 5, 4, 48, d).with_input(476, 476), 4),
        "convstem-r3" => FullModelSpec::full_size(conv_stem(name, 5, 3, 48, d).with_input(224, 224), 4),
        "convstem-n1" => FullModelSpec::full_size(conv_stem(name, 3, 4, 48, d).with_input(252, 252), 4),
        "convstem-n2" => FullModelSpec::full_size(conv_stem(name, 5, 4, 48, d).with_input(392, 392), 4),
        "convstem-n3" => FullModelSpec::full_size(conv_stem(name, 5, 4, 48, d).with_input(504, 504), 4),
        "toy-convstem" => toy(conv_stem(name, 3, 2, 16, 64)),
        "toy-convstem-k5" => toy(conv_stem(name, 5, 2, 16, 64)),
        "toy-resnet" => toy(toy_resnet(name, 64)),
        _ => {
            if let Some(p) = name.strip_prefix("linearproj-") {
                let p = parse_patch(p, &[14, 16, 28, 56, 112], name)?;
                FullModelSpec::full_size(linear_proj(name, p, d), 4)
            } else if let Some(p) = name.strip_prefix("toy-linearproj-") {
                let p = parse_patch(p, &[4, 8, 16], name)?;
                toy(linear_proj(name, p, 64))
            } else {
                return Err(AnalysisError::UnknownPreset(name.to_string()));
            }
        }
    };
    Ok(spec)
}

fn parse_patch(s: &str, allowed: &[usize], name: &str) -> Result<usize, AnalysisError> {
    s.parse()
        .ok()
        .filter(|p| allowed.contains(p))
        .ok_or_else(|| AnalysisError::UnknownPreset(name.to_string()))
}

fn toy(enc: EncoderSpec) -> FullModelSpec {
    FullModelSpec::toy(enc.with_input(TOY_INPUT, TOY_INPUT), TOY_MAX_LEN)
}

pub fn linear_proj(name: &str, patch: usize, d_model: usize) -> EncoderSpec {
    EncoderSpec::new(
        name,
        vec![LayerSpec::Patchify {
            patch,
            in_channels: 3,
            out_channels: d_model,
        }],
    )
}

/// `stages` stride-2 convolutions of size `kernel`, widths doubling from
/// `width`, then a 1x1 convolution to `d_model`.
pub fn conv_stem(name: &str, kernel: usize, stages: usize, width: usize, d_model: usize) -> EncoderSpec {
    let mut layers = Vec::with_capacity(stages + 1);
    let mut c_in = 3;
    for i in 0..stages {
        let c_out = width << i;
        layers.push(LayerSpec::Conv(ConvSpec::new(kernel, 2, 1, c_in, c_out).bn(true)));
        c_in = c_out;
    }
    layers.push(LayerSpec::Conv(ConvSpec::new(1, 1, 0, c_in, d_model)));
    EncoderSpec::new(name, layers)
}

#[derive(Clone, Copy)]
enum Block {
    Basic,
    Bottleneck,
}

fn conv3(c_in: usize, c_out: usize, stride: usize, dilation: usize, relu: bool) -> LayerSpec {
    LayerSpec::Conv(
        ConvSpec::new(3, stride, dilation, c_in, c_out)
            .dilated(dilation)
            .bn(relu),
    )
}

fn conv1(c_in: usize, c_out: usize, stride: usize, relu: bool) -> LayerSpec {
    LayerSpec::Conv(ConvSpec::new(1, stride, 0, c_in, c_out).bn(relu))
}

fn block(kind: Block, c_in: usize, width: usize, stride: usize, dilation: usize) -> (LayerSpec, usize) {
    let (main, c_out) = match kind {
        Block::Basic => (
            vec![
                conv3(c_in, width, stride, dilation, true),
                conv3(width, width, 1, dilation, false),
            ],
            width,
        ),
        Block::Bottleneck => (
            vec![
                conv1(c_in, width, 1, true),
                conv3(width, width, stride, dilation, true),
                conv1(width, 4 * width, 1, false),
            ],
            4 * width,
        ),
    };
    let shortcut = if stride != 1 || c_in != c_out {
        vec![conv1(c_in, c_out, stride, false)]
    } else {
        Vec::new()
    };
    let spec = ResidualSpec {
        main,
        shortcut,
        relu: true,
    };
    (LayerSpec::Residual(spec), c_out)
}

fn resnet(name: &str, kind: Block, depths: [usize; 4], d_model: usize) -> EncoderSpec {
    let mut layers = vec![
        LayerSpec::Conv(ConvSpec::new(7, 2, 3, 3, 64).bn(true)),
        LayerSpec::MaxPool(PoolSpec {
            kernel: 3,
            stride: 1,
            padding: 1,
        }),
    ];
    let mut c = 64;
    for (stage, &n) in depths.iter().enumerate() {
        let width = 64 << stage;
        for i in 0..n {
            let stride = if stage > 0 && i == 0 { 2 } else { 1 };
            let (b, c_out) = block(kind, c, width, stride, 2);
            layers.push(b);
            c = c_out;
        }
    }
    layers.push(LayerSpec::Pointwise {
        in_features: c,
        out_features: d_model,
        bias: true,
    });
    EncoderSpec::new(name, layers)
}

/// Stem conv and two basic blocks, the second one downsampling; output
/// stride 4.
fn toy_resnet(name: &str, d_model: usize) -> EncoderSpec {
    let stem = LayerSpec::Conv(ConvSpec::new(3, 2, 1, 3, 16).bn(true));
    let (b1, c1) = block(Block::Basic, 16, 16, 1, 1);
    let (b2, c2) = block(Block::Basic, c1, 32, 2, 1);
    EncoderSpec::new(
        name,
        vec![
            stem,
            b1,
            b2,
            LayerSpec::Pointwise {
                in_features: c2,
                out_features: d_model,
                bias: true,
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves_and_validates() {
        for name in preset_names() {
            let spec = preset(name).unwrap();
            assert_eq!(spec.name(), name);
            spec.validate().unwrap();
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        for bad in [
            "resnet101",
            "linearproj-32",
            "toy-linearproj-28",
            "",
            "convstem-x",
        ] {
            assert!(
                matches!(preset(bad), Err(AnalysisError::UnknownPreset(_))),
                "{bad}"
            );
        }
    }
}
