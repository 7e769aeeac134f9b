//! Layer forward maps and their gradients. Every function works on a whole
//! batch; the trainer calls them on single-sample batches.

use crate::tensor::Tensor;
use crate::{ConvnetError, Result};

/// Valid cross-correlation, stride 1. `weights` is `(out, in, k, k)`.
pub fn conv_forward(input: &Tensor, weights: &Tensor, bias: &[f64]) -> Result<Tensor> {
    let [b, c, h, w] = input.shape();
    let [o, wc, k, kk] = weights.shape();
    if wc != c || k != kk || bias.len() != o {
        return Err(ConvnetError::ShapeMismatch(format!(
            "conv weights {:?} / bias {} against input {:?}",
            weights.shape(),
            bias.len(),
            input.shape()
        )));
    }
    if k == 0 || k > h || k > w {
        return Err(ConvnetError::ShapeMismatch(format!("kernel {k} does not fit {h}x{w}")));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = Tensor::zeros([b, o, oh, ow]);
    let inp = input.data();
    let wd = weights.data();
    let od = out.data_mut();
    for bi in 0..b {
        for oc in 0..o {
            let obase = (bi * o + oc) * oh * ow;
            let plane = &mut od[obase..obase + oh * ow];
            plane.fill(bias[oc]);
            for ic in 0..c {
                let ibase = (bi * c + ic) * h * w;
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wd[((oc * c + ic) * k + ky) * k + kx];
                        for y in 0..oh {
                            let row = &inp[ibase + (y + ky) * w + kx..ibase + (y + ky) * w + kx + ow];
                            for (acc, &v) in plane[y * ow..(y + 1) * ow].iter_mut().zip(row) {
                                *acc += wv * v;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

/// Gradients of [`conv_forward`] given the upstream gradient `grad_out`.
pub fn conv_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<ConvGrads> {
    let [b, c, h, w] = input.shape();
    let [o, _, k, _] = weights.shape();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    if grad_out.shape() != [b, o, oh, ow] {
        return Err(ConvnetError::ShapeMismatch(format!("conv upstream {:?}", grad_out.shape())));
    }
    let mut gi = Tensor::zeros(input.shape());
    let mut gw = Tensor::zeros(weights.shape());
    let mut gb = vec![0.0; o];
    let inp = input.data();
    let wd = weights.data();
    let gd = grad_out.data();
    {
        let gid = gi.data_mut();
        let gwd = gw.data_mut();
        for bi in 0..b {
            for oc in 0..o {
                let obase = (bi * o + oc) * oh * ow;
                let g = &gd[obase..obase + oh * ow];
                gb[oc] += g.iter().sum::<f64>();
                for ic in 0..c {
                    let ibase = (bi * c + ic) * h * w;
                    for ky in 0..k {
                        for kx in 0..k {
                            let widx = ((oc * c + ic) * k + ky) * k + kx;
                            let wv = wd[widx];
                            let mut acc = 0.0;
                            for y in 0..oh {
                                let start = ibase + (y + ky) * w + kx;
                                let grow = &g[y * ow..(y + 1) * ow];
                                for (&gv, &iv) in grow.iter().zip(&inp[start..start + ow]) {
                                    acc += gv * iv;
                                }
                                for (dst, &gv) in gid[start..start + ow].iter_mut().zip(grow) {
                                    *dst += wv * gv;
                                }
                            }
                            gwd[widx] += acc;
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads { input: gi, weights: gw, bias: gb })
}

/// Max pooling with trailing partial windows dropped. Returns the output
/// and, per output element, the flat input index that won (first index on
/// ties, scanning row-major within the window).
pub fn maxpool_forward(input: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>)> {
    let [b, c, h, w] = input.shape();
    if window == 0 || stride == 0 || window > h || window > w {
        return Err(ConvnetError::ShapeMismatch(format!("pool {window}/{stride} on {h}x{w}")));
    }
    let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
    let mut out = Tensor::zeros([b, c, oh, ow]);
    let mut arg = Vec::with_capacity(out.len());
    let inp = input.data();
    let od = out.data_mut();
    let mut n = 0;
    for plane in 0..b * c {
        let base = plane * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best = base + y * stride * w + x * stride;
                for dy in 0..window {
                    for dx in 0..window {
                        let i = base + (y * stride + dy) * w + x * stride + dx;
                        if inp[i] > inp[best] {
                            best = i;
                        }
                    }
                }
                od[n] = inp[best];
                arg.push(best);
                n += 1;
            }
        }
    }
    Ok((out, arg))
}

pub fn maxpool_backward(input_shape: [usize; 4], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    if argmax.len() != grad_out.len() {
        return Err(ConvnetError::ShapeMismatch("pool upstream does not match forward".into()));
    }
    let mut gi = Tensor::zeros(input_shape);
    let gid = gi.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        gid[i] += g;
    }
    Ok(gi)
}

pub fn relu_forward(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Passes the gradient where the input was strictly positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut gi = grad_out.clone();
    for (g, &x) in gi.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    gi
}

/// Per-channel spatial mean, `(b, c, h, w) -> (b, c, 1, 1)`.
pub fn gap_forward(input: &Tensor) -> Tensor {
    let [b, c, h, w] = input.shape();
    let n = (h * w) as f64;
    let data = input.data().chunks(h * w).map(|p| p.iter().sum::<f64>() / n).collect();
    Tensor::new([b, c, 1, 1], data).unwrap()
}

pub fn gap_backward(input_shape: [usize; 4], grad_out: &Tensor) -> Tensor {
    let [b, c, h, w] = input_shape;
    let n = (h * w) as f64;
    let mut gi = Tensor::zeros([b, c, h, w]);
    for (p, &g) in gi.data_mut().chunks_mut(h * w).zip(grad_out.data()) {
        p.fill(g / n);
    }
    gi
}

/// Mean cross-entropy of the softmax of `logits` (`(b, classes, 1, 1)`)
/// and its gradient `(p - onehot) / b`.
pub fn softmax_xent(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [b, k, h, w] = logits.shape();
    if h * w != 1 || labels.len() != b {
        return Err(ConvnetError::ShapeMismatch(format!("logits {:?} with {} labels", logits.shape(), labels.len())));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= k) {
        return Err(ConvnetError::LabelOutOfRange { label, classes: k });
    }
    let mut grad = Tensor::zeros([b, k, 1, 1]);
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let row = &logits.data()[i * k..(i + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_sum = sum.ln();
        loss += log_sum - (row[label] - max);
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        for (j, gj) in g.iter_mut().enumerate() {
            let p = (row[j] - max).exp() / sum;
            *gj = (p - if j == label { 1.0 } else { 0.0 }) / b as f64;
        }
    }
    Ok((loss / b as f64, grad))
}
