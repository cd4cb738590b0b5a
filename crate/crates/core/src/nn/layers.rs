//! Single-sample forward and backward kernels. Activations are CHW, row-major.

use super::arch::{resolve_padding, Activation, ArchitectureDescriptor, Layer, Shape};
use super::model::WeightTensor;

/// Everything the backward pass needs from a forward pass.
pub(crate) struct Trace {
    /// `acts[0]` is the input; `acts[i + 1]` is the post-activation output of layer `i`.
    pub acts: Vec<Vec<f32>>,
    /// Argmax input offsets for each max-pool output; empty for other layers.
    pool_argmax: Vec<Vec<u32>>,
}

impl Trace {
    pub fn output(&self) -> &[f32] {
        self.acts.last().expect("trace holds at least the input")
    }
}

fn spatial(s: Shape) -> (usize, usize, usize) {
    match s {
        Shape::Spatial { c, h, w } => (c, h, w),
        Shape::Flat(_) => unreachable!("shape checked at construction"),
    }
}

/// Output columns `ox` whose input column `ox * stride + k - pad` lies in `[0, w)`.
fn valid_range(k: usize, pad: usize, stride: usize, w: usize, out_w: usize) -> (usize, usize) {
    let lo = if pad > k {
        (pad - k).div_ceil(stride)
    } else {
        0
    };
    let hi = if w + pad > k {
        ((w + pad - k - 1) / stride + 1).min(out_w)
    } else {
        0
    };
    (lo.min(hi), hi)
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    oc: usize,
    oh: usize,
    ow: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    ph: usize,
    pw: usize,
}

fn conv_geom(layer: &Layer, input: Shape, output: Shape) -> ConvGeom {
    let Layer::Conv2d {
        kernel: (kh, kw),
        stride,
        padding,
        ..
    } = *layer
    else {
        unreachable!()
    };
    let (c, h, w) = spatial(input);
    let (oc, oh, ow) = spatial(output);
    ConvGeom {
        c,
        h,
        w,
        oc,
        oh,
        ow,
        kh,
        kw,
        stride,
        ph: resolve_padding(padding, kh),
        pw: resolve_padding(padding, kw),
    }
}

fn conv_forward(g: &ConvGeom, input: &[f32], weight: &[f32], bias: &[f32], out: &mut [f32]) {
    let plane_out = g.oh * g.ow;
    let plane_in = g.h * g.w;
    for o in 0..g.oc {
        let oplane = &mut out[o * plane_out..(o + 1) * plane_out];
        oplane.fill(bias[o]);
        for ci in 0..g.c {
            let iplane = &input[ci * plane_in..(ci + 1) * plane_in];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let wv = weight[((o * g.c + ci) * g.kh + ky) * g.kw + kx];
                    let (ox0, ox1) = valid_range(kx, g.pw, g.stride, g.w, g.ow);
                    if ox0 >= ox1 {
                        continue;
                    }
                    for oy in 0..g.oh {
                        let iy = oy * g.stride + ky;
                        if iy < g.ph || iy - g.ph >= g.h {
                            continue;
                        }
                        let row = &iplane[(iy - g.ph) * g.w..(iy - g.ph + 1) * g.w];
                        let orow = &mut oplane[oy * g.ow..(oy + 1) * g.ow];
                        if g.stride == 1 {
                            let base = ox0 + kx - g.pw;
                            for (o_, i_) in orow[ox0..ox1].iter_mut().zip(&row[base..]) {
                                *o_ += wv * i_;
                            }
                        } else {
                            for ox in ox0..ox1 {
                                orow[ox] += wv * row[ox * g.stride + kx - g.pw];
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    g: &ConvGeom,
    input: &[f32],
    weight: &[f32],
    dout: &[f32],
    gw: &mut [f32],
    gb: &mut [f32],
    mut din: Option<&mut [f32]>,
) {
    let plane_out = g.oh * g.ow;
    let plane_in = g.h * g.w;
    for o in 0..g.oc {
        let dplane = &dout[o * plane_out..(o + 1) * plane_out];
        gb[o] += dplane.iter().sum::<f32>();
        for ci in 0..g.c {
            let iplane = &input[ci * plane_in..(ci + 1) * plane_in];
            for ky in 0..g.kh {
                for kx in 0..g.kw {
                    let widx = ((o * g.c + ci) * g.kh + ky) * g.kw + kx;
                    let wv = weight[widx];
                    let (ox0, ox1) = valid_range(kx, g.pw, g.stride, g.w, g.ow);
                    if ox0 >= ox1 {
                        continue;
                    }
                    let mut acc = 0.0f32;
                    for oy in 0..g.oh {
                        let iy = oy * g.stride + ky;
                        if iy < g.ph || iy - g.ph >= g.h {
                            continue;
                        }
                        let row_start = ci * plane_in + (iy - g.ph) * g.w;
                        let drow = &dplane[oy * g.ow..(oy + 1) * g.ow];
                        for (ox, &dv) in drow.iter().enumerate().take(ox1).skip(ox0) {
                            let ix = ox * g.stride + kx - g.pw;
                            acc += dv * iplane[(iy - g.ph) * g.w + ix];
                            if let Some(din) = din.as_deref_mut() {
                                din[row_start + ix] += wv * dv;
                            }
                        }
                    }
                    gw[widx] += acc;
                }
            }
        }
    }
}

fn pool_forward(
    input: Shape,
    output: Shape,
    pool: (usize, usize),
    stride: usize,
    x: &[f32],
    out: &mut [f32],
    argmax: &mut [u32],
) {
    let (c, h, w) = spatial(input);
    let (_, oh, ow) = spatial(output);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_idx = ch * h * w + (oy * stride) * w + ox * stride;
                let mut best = x[best_idx];
                for py in 0..pool.0 {
                    for px in 0..pool.1 {
                        let idx = ch * h * w + (oy * stride + py) * w + ox * stride + px;
                        if x[idx] > best {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
}

fn dense_forward(x: &[f32], weight: &[f32], bias: &[f32], out: &mut [f32]) {
    let n_in = x.len();
    for (o, y) in out.iter_mut().enumerate() {
        let row = &weight[o * n_in..(o + 1) * n_in];
        *y = bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f32>();
    }
}

fn apply_activation(act: Activation, v: &mut [f32]) {
    if act == Activation::Relu {
        for x in v {
            // NaN stays NaN: comparisons with NaN are false.
            if *x < 0.0 {
                *x = 0.0;
            }
        }
    }
}

/// Runs the network on one input, keeping every intermediate activation.
pub(crate) fn forward_trace(
    arch: &ArchitectureDescriptor,
    tensors: &[WeightTensor],
    input: &[f32],
) -> Trace {
    let shapes = arch.shapes();
    let mut acts = Vec::with_capacity(shapes.len());
    let mut pool_argmax = Vec::with_capacity(arch.layers().len());
    acts.push(input.to_vec());
    let mut p = 0;
    for (i, layer) in arch.layers().iter().enumerate() {
        let x = &acts[i];
        let mut out = vec![0.0f32; shapes[i + 1].len()];
        let mut argmax = Vec::new();
        match *layer {
            Layer::Conv2d { activation, .. } => {
                let g = conv_geom(layer, shapes[i], shapes[i + 1]);
                conv_forward(&g, x, &tensors[p].values, &tensors[p + 1].values, &mut out);
                apply_activation(activation, &mut out);
                p += 2;
            }
            Layer::Dense { activation, .. } => {
                dense_forward(x, &tensors[p].values, &tensors[p + 1].values, &mut out);
                apply_activation(activation, &mut out);
                p += 2;
            }
            Layer::MaxPool2d { pool, stride } => {
                argmax = vec![0u32; out.len()];
                pool_forward(
                    shapes[i],
                    shapes[i + 1],
                    pool,
                    stride,
                    x,
                    &mut out,
                    &mut argmax,
                );
            }
            Layer::Flatten => out.copy_from_slice(x),
        }
        acts.push(out);
        pool_argmax.push(argmax);
    }
    Trace { acts, pool_argmax }
}

/// Accumulates parameter gradients of a scalar loss into `grads`, given the
/// loss gradient with respect to the logits.
pub(crate) fn backward(
    arch: &ArchitectureDescriptor,
    tensors: &[WeightTensor],
    trace: &Trace,
    dlogits: Vec<f32>,
    grads: &mut [Vec<f32>],
) {
    let shapes = arch.shapes();
    let layers = arch.layers();
    let mut p = tensors.len();
    let mut delta = dlogits;
    for i in (0..layers.len()).rev() {
        let x = &trace.acts[i];
        let y = &trace.acts[i + 1];
        let need_din = i > 0;
        match layers[i] {
            Layer::Conv2d { activation, .. } | Layer::Dense { activation, .. } => {
                p -= 2;
                if activation == Activation::Relu {
                    for (d, &v) in delta.iter_mut().zip(y) {
                        // NaN pre-activations pass no gradient either.
                        if v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                            *d = 0.0;
                        }
                    }
                }
                let weight = &tensors[p].values;
                let (gw_slot, gb_slot) = grads[p..p + 2].split_at_mut(1);
                let (gw, gb) = (&mut gw_slot[0], &mut gb_slot[0]);
                let mut din = if need_din {
                    vec![0.0f32; x.len()]
                } else {
                    Vec::new()
                };
                if let Layer::Conv2d { .. } = layers[i] {
                    let g = conv_geom(&layers[i], shapes[i], shapes[i + 1]);
                    conv_backward(
                        &g,
                        x,
                        weight,
                        &delta,
                        gw,
                        gb,
                        need_din.then_some(din.as_mut_slice()),
                    );
                } else {
                    let n_in = x.len();
                    for (o, &d) in delta.iter().enumerate() {
                        gb[o] += d;
                        let grow = &mut gw[o * n_in..(o + 1) * n_in];
                        for (g, xv) in grow.iter_mut().zip(x) {
                            *g += d * xv;
                        }
                        if need_din {
                            let wrow = &weight[o * n_in..(o + 1) * n_in];
                            for (di, wv) in din.iter_mut().zip(wrow) {
                                *di += wv * d;
                            }
                        }
                    }
                }
                delta = din;
            }
            Layer::MaxPool2d { .. } => {
                let mut din = vec![0.0f32; x.len()];
                for (d, &idx) in delta.iter().zip(&trace.pool_argmax[i]) {
                    din[idx as usize] += d;
                }
                delta = din;
            }
            Layer::Flatten => {}
        }
        if delta.is_empty() {
            break;
        }
    }
}

/// Mean-free softmax cross-entropy for one sample: `(loss, d loss / d logits)`.
pub(crate) fn softmax_xent(logits: &[f32], label: usize) -> (f32, Vec<f32>) {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let mut grad: Vec<f32> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}
