use crate::error::{PdhError, Result};

/// Shape of one input sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputShape {
    Flat(usize),
    /// Height, width, channels; stored interleaved (HWC).
    Image { height: usize, width: usize, channels: usize },
}

impl InputShape {
    pub fn numel(&self) -> usize {
        match *self {
            InputShape::Flat(m) => m,
            InputShape::Image { height, width, channels } => height * width * channels,
        }
    }

    pub(crate) fn dims(&self) -> Dims {
        match *self {
            InputShape::Flat(m) => Dims { h: 1, w: 1, c: m },
            InputShape::Image { height, width, channels } => Dims { h: height, w: width, c: channels },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    /// Valid (unpadded) 2-D convolution.
    Conv { kernel: usize, out_channels: usize, stride: usize },
    /// 2x2 max pooling with stride 2, remainder rows/columns dropped.
    MaxPool,
    Dense { out_dim: usize },
    Relu,
}

impl Layer {
    pub fn has_params(&self) -> bool {
        matches!(self, Layer::Conv { .. } | Layer::Dense { .. })
    }
}

/// Activation shape between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Dims {
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Dims {
    pub fn numel(&self) -> usize {
        self.h * self.w * self.c
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub input: InputShape,
    pub layers: Vec<Layer>,
    pub code_bits: usize,
}

impl ModelConfig {
    /// `dense 64, relu, dense n` over a flat input.
    pub fn mlp_small(input_dim: usize, code_bits: usize) -> Self {
        Self {
            input: InputShape::Flat(input_dim),
            layers: vec![Layer::Dense { out_dim: 64 }, Layer::Relu, Layer::Dense { out_dim: code_bits }],
            code_bits,
        }
    }

    /// Two conv/relu/pool stages (5x5x8, 5x5x16), `dense 64, relu, dense n`.
    /// Sized for 28x28 grayscale.
    pub fn conv_small(input: InputShape, code_bits: usize) -> Self {
        Self {
            input,
            layers: vec![
                Layer::Conv { kernel: 5, out_channels: 8, stride: 1 },
                Layer::Relu,
                Layer::MaxPool,
                Layer::Conv { kernel: 5, out_channels: 16, stride: 1 },
                Layer::Relu,
                Layer::MaxPool,
                Layer::Dense { out_dim: 64 },
                Layer::Relu,
                Layer::Dense { out_dim: code_bits },
            ],
            code_bits,
        }
    }

    /// Preset lookup by name (`mlp-small`, `conv-small`).
    pub fn preset(name: &str, input: InputShape, code_bits: usize) -> Result<Self> {
        let cfg = match name {
            // dense layers flatten their input, so image samples work too
            "mlp-small" => Self { input, ..Self::mlp_small(input.numel(), code_bits) },
            "conv-small" => Self::conv_small(input, code_bits),
            other => {
                return Err(PdhError::InvalidConfig(format!(
                    "unknown architecture {other:?} (expected mlp-small or conv-small)"
                )))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks layer compatibility and returns the activation shape entering
    /// each layer, followed by the output shape.
    pub(crate) fn shapes(&self) -> Result<Vec<Dims>> {
        let bad = |msg: String| Err(PdhError::InvalidConfig(msg));
        if self.layers.is_empty() {
            return bad("model has no layers".into());
        }
        if self.code_bits == 0 {
            return bad("code length must be >= 1".into());
        }
        let mut cur = self.input.dims();
        if cur.numel() == 0 {
            return bad("input has zero size".into());
        }
        let mut shapes = vec![cur];
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match *layer {
                Layer::Conv { kernel, out_channels, stride } => {
                    if kernel == 0 || out_channels == 0 || stride == 0 {
                        return bad(format!("layer {i}: conv fields must be positive"));
                    }
                    if kernel > cur.h || kernel > cur.w {
                        return bad(format!(
                            "layer {i}: {kernel}x{kernel} kernel does not fit {}x{} input",
                            cur.h, cur.w
                        ));
                    }
                    Dims {
                        h: (cur.h - kernel) / stride + 1,
                        w: (cur.w - kernel) / stride + 1,
                        c: out_channels,
                    }
                }
                Layer::MaxPool => {
                    if cur.h < 2 || cur.w < 2 {
                        return bad(format!("layer {i}: cannot pool a {}x{} map", cur.h, cur.w));
                    }
                    Dims { h: cur.h / 2, w: cur.w / 2, c: cur.c }
                }
                Layer::Dense { out_dim } => {
                    if out_dim == 0 {
                        return bad(format!("layer {i}: dense out_dim must be positive"));
                    }
                    Dims { h: 1, w: 1, c: out_dim }
                }
                Layer::Relu => cur,
            };
            shapes.push(cur);
        }
        match self.layers.last() {
            Some(Layer::Dense { out_dim }) if *out_dim == self.code_bits => Ok(shapes),
            _ => bad(format!(
                "final layer must be dense with out_dim = code length {}",
                self.code_bits
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shapes().map(|_| ())
    }

    /// Shapes of weight and bias matrices in declaration order.
    pub fn param_shapes(&self) -> Result<Vec<(usize, usize)>> {
        let shapes = self.shapes()?;
        let mut out = Vec::new();
        for (layer, input) in self.layers.iter().zip(&shapes) {
            match *layer {
                Layer::Conv { kernel, out_channels, .. } => {
                    out.push((out_channels, kernel * kernel * input.c));
                    out.push((1, out_channels));
                }
                Layer::Dense { out_dim } => {
                    out.push((out_dim, input.numel()));
                    out.push((1, out_dim));
                }
                _ => {}
            }
        }
        Ok(out)
    }

    pub fn param_count(&self) -> Result<usize> {
        Ok(self.param_shapes()?.iter().map(|(r, c)| r * c).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_consistent() {
        let mlp = ModelConfig::mlp_small(2, 12);
        assert_eq!(mlp.param_shapes().unwrap(), vec![(64, 2), (1, 64), (12, 64), (1, 12)]);
        let conv = ModelConfig::conv_small(InputShape::Image { height: 28, width: 28, channels: 1 }, 12);
        let shapes = conv.shapes().unwrap();
        assert_eq!(shapes[3], Dims { h: 12, w: 12, c: 8 });
        assert_eq!(shapes[6], Dims { h: 4, w: 4, c: 16 });
        assert_eq!(conv.param_shapes().unwrap()[4], (64, 256));
    }

    #[test]
    fn mlp_preset_accepts_images() {
        let image = InputShape::Image { height: 2, width: 3, channels: 1 };
        let cfg = ModelConfig::preset("mlp-small", image, 8).unwrap();
        assert_eq!(cfg.input, image);
        assert_eq!(cfg.param_shapes().unwrap()[0], (64, 6));
        assert!(ModelConfig::preset("resnet", image, 8).is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = ModelConfig { input: InputShape::Flat(4), layers: vec![], code_bits: 2 };
        assert!(empty.validate().is_err());
        let wrong_head = ModelConfig { input: InputShape::Flat(4), layers: vec![Layer::Dense { out_dim: 3 }], code_bits: 2 };
        assert!(wrong_head.validate().is_err());
        let relu_last = ModelConfig {
            input: InputShape::Flat(4),
            layers: vec![Layer::Dense { out_dim: 2 }, Layer::Relu],
            code_bits: 2,
        };
        assert!(relu_last.validate().is_err());
        let tiny = ModelConfig::conv_small(InputShape::Image { height: 8, width: 8, channels: 1 }, 4);
        assert!(tiny.validate().is_err());
        assert!(ModelConfig::preset("resnet-50", InputShape::Flat(2), 4).is_err());
    }
}
