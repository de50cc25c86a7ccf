//! Reference forward pass and N-pair loss in double-double arithmetic.
//!
//! Written independently of the library's network code (direct loops, no
//! im2col, no traces) and used as a higher-precision finite-difference
//! oracle for loss gradients.

#![allow(clippy::needless_range_loop)]

use pdh::{InputShape, Layer, Parameters};
use twofloat::TwoFloat;

type D = TwoFloat;

fn d(v: f64) -> D {
    TwoFloat::from(v)
}

fn forward(params: &Parameters, tensors: &[Vec<D>], input: &[f64]) -> Vec<D> {
    let cfg = params.config();
    let (mut h, mut w, mut c) = match cfg.input {
        InputShape::Flat(m) => (1, 1, m),
        InputShape::Image { height, width, channels } => (height, width, channels),
    };
    let mut cur: Vec<D> = input.iter().map(|&v| d(v)).collect();
    let mut t = 0;
    for layer in &cfg.layers {
        match *layer {
            Layer::Conv { kernel, out_channels, stride } => {
                let (wt, b) = (&tensors[t], &tensors[t + 1]);
                t += 2;
                let (oh, ow) = ((h - kernel) / stride + 1, (w - kernel) / stride + 1);
                let mut out = vec![d(0.0); oh * ow * out_channels];
                for oy in 0..oh {
                    for ox in 0..ow {
                        for o in 0..out_channels {
                            let mut acc = b[o];
                            for ky in 0..kernel {
                                for kx in 0..kernel {
                                    for ic in 0..c {
                                        let weight = wt[o * kernel * kernel * c + (ky * kernel + kx) * c + ic];
                                        acc += weight * cur[((oy * stride + ky) * w + ox * stride + kx) * c + ic];
                                    }
                                }
                            }
                            out[(oy * ow + ox) * out_channels + o] = acc;
                        }
                    }
                }
                (h, w, c, cur) = (oh, ow, out_channels, out);
            }
            Layer::MaxPool => {
                let (oh, ow) = (h / 2, w / 2);
                let mut out = Vec::with_capacity(oh * ow * c);
                for oy in 0..oh {
                    for ox in 0..ow {
                        for ch in 0..c {
                            let at = |y: usize, x: usize| cur[(y * w + x) * c + ch];
                            let mut m = at(2 * oy, 2 * ox);
                            for (y, x) in [(2 * oy, 2 * ox + 1), (2 * oy + 1, 2 * ox), (2 * oy + 1, 2 * ox + 1)] {
                                if at(y, x) > m {
                                    m = at(y, x);
                                }
                            }
                            out.push(m);
                        }
                    }
                }
                (h, w, cur) = (oh, ow, out);
            }
            Layer::Dense { out_dim } => {
                let (wt, b) = (&tensors[t], &tensors[t + 1]);
                t += 2;
                let fan_in = cur.len();
                let out = (0..out_dim)
                    .map(|o| (0..fan_in).fold(b[o], |acc, k| acc + wt[o * fan_in + k] * cur[k]))
                    .collect();
                (h, w, c, cur) = (1, 1, out_dim, out);
            }
            Layer::Relu => {
                for v in &mut cur {
                    if *v < d(0.0) {
                        *v = d(0.0);
                    }
                }
            }
        }
    }
    cur
}

fn loss(params: &Parameters, tensors: &[Vec<D>], anchors: &[Vec<f64>], positives: &[Vec<f64>]) -> D {
    let n = params.config().code_bits;
    let post = |x: &[f64]| -> Vec<D> { forward(params, tensors, x).into_iter().map(|v| d(1.0) / (d(1.0) + v.exp())).collect() };
    let a: Vec<Vec<D>> = anchors.iter().map(|x| post(x)).collect();
    let p: Vec<Vec<D>> = positives.iter().map(|x| post(x)).collect();
    let dist = |u: &[D], v: &[D]| u.iter().zip(v).fold(d(0.0), |acc, (&x, &y)| acc + x * (d(1.0) - y) + (d(1.0) - x) * y);
    let half = d(n as f64 / 2.0);
    let mut total = d(0.0);
    for i in 0..a.len() {
        let e = dist(&a[i], &p[i]);
        total += e * e;
        for r in 0..p.len() {
            if r != i {
                let gap = half - dist(&a[i], &p[r]);
                if gap > d(0.0) {
                    total += gap * gap;
                }
            }
        }
    }
    total
}

fn tensors_dd(params: &Parameters) -> Vec<Vec<D>> {
    params.tensors().iter().map(|t| t.as_slice().iter().map(|&v| d(v)).collect()).collect()
}

/// Loss at the given parameters, for cross-checking the library's `f64` loss.
pub fn reference_loss(params: &Parameters, anchors: &[Vec<f64>], positives: &[Vec<f64>]) -> f64 {
    f64::from(loss(params, &tensors_dd(params), anchors, positives))
}

/// `(L(theta + h e_c) - L(theta - h e_c)) / 2h` with the perturbation and the
/// loss both in double-double precision.
pub fn central_difference(
    params: &Parameters,
    anchors: &[Vec<f64>],
    positives: &[Vec<f64>],
    coord: usize,
    h: f64,
) -> f64 {
    let base = tensors_dd(params);
    let (mut tensor, mut offset) = (0, coord);
    while offset >= base[tensor].len() {
        offset -= base[tensor].len();
        tensor += 1;
    }
    let at = |delta: f64| {
        let mut t = base.clone();
        t[tensor][offset] += d(delta);
        loss(params, &t, anchors, positives)
    };
    f64::from((at(h) - at(-h)) / d(2.0 * h))
}
