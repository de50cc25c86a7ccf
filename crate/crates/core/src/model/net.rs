use crate::error::{PdhError, Result};
use crate::model::config::{Dims, Layer, ModelConfig};
use crate::model::LogitVector;
use crate::numerics::{Matrix, Rng};

/// Weights and biases for every parametric layer, in declaration order
/// (`weight, bias, weight, bias, ...`).
///
/// Dense weights are `out x in`; conv weights are `out_channels x (k*k*in_c)`
/// with column index `(ky * k + kx) * in_c + ic`. Biases are `1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    config: ModelConfig,
    tensors: Vec<Matrix>,
}

impl Parameters {
    pub fn from_tensors(config: ModelConfig, tensors: Vec<Matrix>) -> Result<Self> {
        let shapes = config.param_shapes()?;
        if shapes.len() != tensors.len() {
            return Err(PdhError::DimensionMismatch(format!(
                "config needs {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (i, (want, t)) in shapes.iter().zip(&tensors).enumerate() {
            if *want != t.shape() {
                return Err(PdhError::DimensionMismatch(format!(
                    "tensor {i}: expected {want:?}, got {:?}",
                    t.shape()
                )));
            }
            if !t.is_finite() {
                return Err(PdhError::NonFinite(format!("tensor {i}")));
            }
        }
        Ok(Self { config, tensors })
    }

    /// All-zero parameters.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        let tensors = config.param_shapes()?.into_iter().map(|(r, c)| Matrix::zeros(r, c)).collect();
        Ok(Self { config, tensors })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    /// All parameter values concatenated in declaration order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.as_slice().iter().copied()).collect()
    }

    /// Inverse of [`Parameters::flatten`].
    pub fn with_flat(&self, values: &[f64]) -> Result<Parameters> {
        if values.len() != self.num_values() {
            return Err(PdhError::LengthMismatch { left: values.len(), right: self.num_values() });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for t in &mut out.tensors {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        if out.tensors.iter().any(|t| !t.is_finite()) {
            return Err(PdhError::NonFinite("parameter vector".into()));
        }
        Ok(out)
    }
}

/// Fan-in scaled uniform init: weights in `[-s, s]`, `s = sqrt(6 / fan_in)`,
/// biases zero. Draws weights layer by layer in row-major order.
pub fn init_params(config: &ModelConfig, rng: &mut Rng) -> Result<Parameters> {
    let shapes = config.param_shapes()?;
    let tensors = shapes
        .iter()
        .enumerate()
        .map(|(i, &(rows, cols))| {
            if i % 2 == 1 {
                return Matrix::zeros(rows, cols);
            }
            let s = (6.0 / cols as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| rng.uniform(-s, s))
        })
        .collect();
    Ok(Parameters { config: config.clone(), tensors })
}

#[derive(Debug, Clone)]
enum Cache {
    Conv { patches: Vec<f64>, positions: usize },
    Pool { argmax: Vec<usize> },
    Dense,
    Relu,
}

/// Per-layer state from one forward pass, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    inputs: Vec<Vec<f64>>,
    dims: Vec<Dims>,
    caches: Vec<Cache>,
}

impl ForwardTrace {
    /// ReLU on/off flags and pool argmax positions of this pass. Two inputs
    /// with equal patterns lie in the same linear region of the network.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (input, cache) in self.inputs.iter().zip(&self.caches) {
            match cache {
                Cache::Relu => out.extend(input.iter().map(|&v| usize::from(v > 0.0))),
                Cache::Pool { argmax } => out.extend_from_slice(argmax),
                _ => {}
            }
        }
        out
    }
}

fn check_input(params: &Parameters, input: &[f64]) -> Result<Vec<Dims>> {
    let dims = params.config.shapes()?;
    if input.len() != dims[0].numel() {
        return Err(PdhError::DimensionMismatch(format!(
            "input has {} values, model expects {}",
            input.len(),
            dims[0].numel()
        )));
    }
    if let Some(pos) = input.iter().position(|v| !v.is_finite()) {
        return Err(PdhError::NonFinite(format!("input value {pos} is {}", input[pos])));
    }
    Ok(dims)
}

fn im2col(input: &[f64], d: Dims, kernel: usize, stride: usize, out: Dims) -> Vec<f64> {
    let width = kernel * kernel * d.c;
    let mut patches = Vec::with_capacity(out.h * out.w * width);
    for oy in 0..out.h {
        for ox in 0..out.w {
            for ky in 0..kernel {
                let row = (oy * stride + ky) * d.w;
                for kx in 0..kernel {
                    let base = (row + ox * stride + kx) * d.c;
                    patches.extend_from_slice(&input[base..base + d.c]);
                }
            }
        }
    }
    patches
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

fn run(params: &Parameters, input: &[f64], keep: bool) -> Result<(LogitVector, Option<ForwardTrace>)> {
    let dims = check_input(params, input)?;
    let mut cur = input.to_vec();
    let mut tensors = params.tensors.iter();
    let mut trace = ForwardTrace { inputs: Vec::new(), dims: dims.clone(), caches: Vec::new() };

    for (i, layer) in params.config.layers.iter().enumerate() {
        let (din, dout) = (dims[i], dims[i + 1]);
        let (next, cache) = match *layer {
            Layer::Conv { kernel, out_channels, stride } => {
                let w = tensors.next().expect("conv weight");
                let b = tensors.next().expect("conv bias");
                let patches = im2col(&cur, din, kernel, stride, dout);
                let width = kernel * kernel * din.c;
                let positions = dout.h * dout.w;
                let mut out = Vec::with_capacity(positions * out_channels);
                for patch in patches.chunks_exact(width) {
                    for oc in 0..out_channels {
                        out.push(dot(patch, w.row(oc)) + b.get(0, oc));
                    }
                }
                (out, Cache::Conv { patches, positions })
            }
            Layer::MaxPool => {
                let mut out = Vec::with_capacity(dout.numel());
                let mut argmax = Vec::with_capacity(dout.numel());
                for oy in 0..dout.h {
                    for ox in 0..dout.w {
                        for c in 0..din.c {
                            let mut best = usize::MAX;
                            for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                                let idx = ((2 * oy + dy) * din.w + 2 * ox + dx) * din.c + c;
                                if best == usize::MAX || cur[idx] > cur[best] {
                                    best = idx;
                                }
                            }
                            out.push(cur[best]);
                            argmax.push(best);
                        }
                    }
                }
                (out, Cache::Pool { argmax })
            }
            Layer::Dense { out_dim } => {
                let w = tensors.next().expect("dense weight");
                let b = tensors.next().expect("dense bias");
                let out = (0..out_dim).map(|o| dot(w.row(o), &cur) + b.get(0, o)).collect();
                (out, Cache::Dense)
            }
            Layer::Relu => (cur.iter().map(|&v| v.max(0.0)).collect(), Cache::Relu),
        };
        if keep {
            trace.inputs.push(std::mem::replace(&mut cur, next));
            trace.caches.push(cache);
        } else {
            cur = next;
        }
    }
    if let Some(pos) = cur.iter().position(|v| !v.is_finite()) {
        return Err(PdhError::NonFinite(format!("logit {pos} is {}", cur[pos])));
    }
    Ok((LogitVector(cur), keep.then_some(trace)))
}

/// Logits plus the trace needed for [`backward`].
pub fn forward(params: &Parameters, input: &[f64]) -> Result<(LogitVector, ForwardTrace)> {
    let (x, trace) = run(params, input, true)?;
    Ok((x, trace.expect("trace requested")))
}

/// Logits only; skips trace bookkeeping.
pub fn logits(params: &Parameters, input: &[f64]) -> Result<LogitVector> {
    Ok(run(params, input, false)?.0)
}

/// Parameter gradients of `<grad_wrt_logits, logits(params, input)>`.
pub fn backward(params: &Parameters, trace: &ForwardTrace, grad_wrt_logits: &[f64]) -> Result<Vec<Matrix>> {
    let mut grads: Vec<Matrix> = params.tensors.iter().map(|t| Matrix::zeros(t.rows(), t.cols())).collect();
    backward_accumulate(params, trace, grad_wrt_logits, &mut grads)?;
    Ok(grads)
}

/// Like [`backward`] but adds into existing gradient buffers.
pub fn backward_accumulate(
    params: &Parameters,
    trace: &ForwardTrace,
    grad_wrt_logits: &[f64],
    grads: &mut [Matrix],
) -> Result<()> {
    let layers = &params.config.layers;
    if trace.caches.len() != layers.len() || trace.dims != params.config.shapes()? {
        return Err(PdhError::TraceMismatch);
    }
    if grad_wrt_logits.len() != params.config.code_bits {
        return Err(PdhError::LengthMismatch { left: grad_wrt_logits.len(), right: params.config.code_bits });
    }
    if grads.len() != params.tensors.len()
        || grads.iter().zip(&params.tensors).any(|(g, t)| g.shape() != t.shape())
    {
        return Err(PdhError::DimensionMismatch("gradient buffers do not match parameters".into()));
    }

    let mut g = grad_wrt_logits.to_vec();
    let mut tensor_idx = params.tensors.len();
    for i in (0..layers.len()).rev() {
        let (din, dout) = (trace.dims[i], trace.dims[i + 1]);
        let input = &trace.inputs[i];
        let need_input_grad = i > 0;
        g = match (layers[i], &trace.caches[i]) {
            (Layer::Conv { kernel, out_channels, stride }, Cache::Conv { patches, positions }) => {
                tensor_idx -= 2;
                let w = &params.tensors[tensor_idx];
                let width = kernel * kernel * din.c;
                {
                    let (gw, gb) = grads[tensor_idx..tensor_idx + 2].split_at_mut(1);
                    let gw = gw[0].as_mut_slice();
                    let gb = gb[0].as_mut_slice();
                    for pos in 0..*positions {
                        let patch = &patches[pos * width..(pos + 1) * width];
                        for oc in 0..out_channels {
                            let go = g[pos * out_channels + oc];
                            if go == 0.0 {
                                continue;
                            }
                            gb[oc] += go;
                            for (acc, &p) in gw[oc * width..(oc + 1) * width].iter_mut().zip(patch) {
                                *acc += go * p;
                            }
                        }
                    }
                }
                if need_input_grad {
                    let mut gin = vec![0.0; din.numel()];
                    for oy in 0..dout.h {
                        for ox in 0..dout.w {
                            let pos = oy * dout.w + ox;
                            for oc in 0..out_channels {
                                let go = g[pos * out_channels + oc];
                                if go == 0.0 {
                                    continue;
                                }
                                let wrow = w.row(oc);
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let base = ((oy * stride + ky) * din.w + ox * stride + kx) * din.c;
                                        let wbase = (ky * kernel + kx) * din.c;
                                        for ic in 0..din.c {
                                            gin[base + ic] += go * wrow[wbase + ic];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    gin
                } else {
                    Vec::new()
                }
            }
            (Layer::MaxPool, Cache::Pool { argmax }) => {
                let mut gin = vec![0.0; din.numel()];
                for (&src, &go) in argmax.iter().zip(&g) {
                    gin[src] += go;
                }
                gin
            }
            (Layer::Dense { out_dim }, Cache::Dense) => {
                tensor_idx -= 2;
                let w = &params.tensors[tensor_idx];
                let fan_in = input.len();
                {
                    let (gw, gb) = grads[tensor_idx..tensor_idx + 2].split_at_mut(1);
                    let gw = gw[0].as_mut_slice();
                    let gb = gb[0].as_mut_slice();
                    for o in 0..out_dim {
                        let go = g[o];
                        gb[o] += go;
                        for (acc, &x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                            *acc += go * x;
                        }
                    }
                }
                if need_input_grad {
                    let mut gin = vec![0.0; fan_in];
                    for o in 0..out_dim {
                        let go = g[o];
                        for (acc, &wv) in gin.iter_mut().zip(w.row(o)) {
                            *acc += go * wv;
                        }
                    }
                    gin
                } else {
                    Vec::new()
                }
            }
            (Layer::Relu, Cache::Relu) => {
                input.iter().zip(&g).map(|(&x, &go)| if x > 0.0 { go } else { 0.0 }).collect()
            }
            _ => return Err(PdhError::TraceMismatch),
        };
    }
    Ok(())
}
