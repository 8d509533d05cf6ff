//! Forward pass, loss, analytic gradients, and a finite-difference oracle.
//!
//! Parameters are stored in 32-bit floats, but every forward/backward pass
//! runs in 64-bit arithmetic. The finite-difference check at eps = 1e-4 needs
//! roughly nine significant digits of loss to resolve gradients to the 1e-4
//! relative tolerance, which single-precision activations cannot provide.

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::arch::{LayerSpec, Shape};
use crate::nn::model::Model;

/// Batched activation tensor: `n` rows of `shape.numel()` values.
#[derive(Debug, Clone)]
struct Tensor {
    n: usize,
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    fn row(&self, i: usize) -> &[f64] {
        let w = self.shape.numel();
        &self.data[i * w..(i + 1) * w]
    }
}

/// Logits for a batch: one row of `classes` values per example.
#[derive(Debug, Clone)]
pub struct Logits {
    pub n: usize,
    pub classes: usize,
    data: Vec<f64>,
}

impl Logits {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    /// Predicted class: argmax with ties resolved to the lowest index.
    pub fn argmax(&self, i: usize) -> usize {
        let row = self.row(i);
        let mut best = 0usize;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        best
    }

    /// Softmax probabilities of example `i`.
    pub fn softmax(&self, i: usize) -> Vec<f64> {
        softmax_row(self.row(i))
    }
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

/// Training losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// Softmax cross-entropy over class logits.
    CrossEntropy,
    /// Sum of squared differences to the one-hot target. Single-output
    /// models treat the integer label as a numeric regression target.
    Squared,
}

/// Loss configuration shared by training, scoring, and the finite-difference
/// oracle.
#[derive(Debug, Clone, Copy)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Coefficient of the L1 penalty on all parameters; the subgradient of
    /// `|x|` at 0 is taken as 0.
    pub l1_lambda: f64,
}

impl LossSpec {
    pub fn cross_entropy() -> LossSpec {
        LossSpec {
            kind: LossKind::CrossEntropy,
            l1_lambda: 0.0,
        }
    }

    pub fn squared() -> LossSpec {
        LossSpec {
            kind: LossKind::Squared,
            l1_lambda: 0.0,
        }
    }

    pub fn with_l1(mut self, lambda: f64) -> LossSpec {
        self.l1_lambda = lambda;
        self
    }
}

struct ForwardTrace {
    /// Input tensor of each layer, aligned with `arch.layers`.
    layer_inputs: Vec<Tensor>,
    output: Tensor,
}

fn materialize_params(model: &Model, perturb: Option<(usize, f64)>) -> Vec<f64> {
    let mut theta: Vec<f64> = model.params().iter().map(|&x| x as f64).collect();
    if let Some((j, v)) = perturb {
        theta[j] = v;
    }
    theta
}

fn input_tensor(model: &Model, batch: &Batch) -> Result<Tensor> {
    let want = model.arch().input.numel();
    if batch.is_empty() {
        return Err(Error::Empty("forward pass on empty batch".into()));
    }
    if batch.feature_len != want {
        return Err(Error::Dimension(format!(
            "batch features have length {}, model input needs {want}",
            batch.feature_len
        )));
    }
    Ok(Tensor {
        n: batch.len(),
        shape: model.arch().input,
        data: batch.features.iter().map(|&x| x as f64).collect(),
    })
}

fn run_forward(model: &Model, theta: &[f64], batch: &Batch) -> Result<ForwardTrace> {
    let mut current = input_tensor(model, batch)?;
    let mut layer_inputs = Vec::with_capacity(model.arch().layers.len());
    for (li, layer) in model.arch().layers.iter().enumerate() {
        let next = apply_layer(layer, &current, theta, model.layer_range(li).start)?;
        layer_inputs.push(current);
        current = next;
    }
    if current.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericOverflow(
            "non-finite activation in forward pass".into(),
        ));
    }
    Ok(ForwardTrace {
        layer_inputs,
        output: current,
    })
}

fn apply_layer(layer: &LayerSpec, input: &Tensor, theta: &[f64], base: usize) -> Result<Tensor> {
    let out_shape = layer.output_shape(input.shape)?;
    let n = input.n;
    let mut out = vec![0.0f64; n * out_shape.numel()];
    match *layer {
        LayerSpec::Dense {
            in_features,
            out_features,
            bias,
        } => {
            let group = in_features + usize::from(bias);
            for b in 0..n {
                let x = input.row(b);
                let y = &mut out[b * out_features..(b + 1) * out_features];
                for (o, y_o) in y.iter_mut().enumerate() {
                    let w = &theta[base + o * group..base + o * group + in_features];
                    let mut acc = if bias { theta[base + o * group + in_features] } else { 0.0 };
                    for (wi, xi) in w.iter().zip(x) {
                        acc += wi * xi;
                    }
                    *y_o = acc;
                }
            }
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            bias,
        } => {
            let (_, h, w) = match input.shape {
                Shape::Chw(c, h, w) => (c, h, w),
                _ => unreachable!("output_shape validated input"),
            };
            let (oh, ow) = (h - kernel + 1, w - kernel + 1);
            let group = in_channels * kernel * kernel + usize::from(bias);
            for b in 0..n {
                let x = input.row(b);
                let y = &mut out[b * out_channels * oh * ow..(b + 1) * out_channels * oh * ow];
                for c in 0..out_channels {
                    let wbase = base + c * group;
                    let b_c = if bias {
                        theta[wbase + in_channels * kernel * kernel]
                    } else {
                        0.0
                    };
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = b_c;
                            for ci in 0..in_channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let wv = theta
                                            [wbase + (ci * kernel + ky) * kernel + kx];
                                        let xv = x[ci * h * w + (oy + ky) * w + (ox + kx)];
                                        acc += wv * xv;
                                    }
                                }
                            }
                            y[c * oh * ow + oy * ow + ox] = acc;
                        }
                    }
                }
            }
        }
        LayerSpec::Relu => {
            for (o, &v) in out.iter_mut().zip(&input.data) {
                *o = if v > 0.0 { v } else { 0.0 };
            }
        }
        LayerSpec::Flatten => {
            out.copy_from_slice(&input.data);
        }
    }
    Ok(Tensor {
        n,
        shape: out_shape,
        data: out,
    })
}

/// Run the network on a batch and return per-example logits.
pub fn forward(model: &Model, batch: &Batch) -> Result<Logits> {
    let theta = materialize_params(model, None);
    let trace = run_forward(model, &theta, batch)?;
    Ok(Logits {
        n: trace.output.n,
        classes: trace.output.shape.numel(),
        data: trace.output.data,
    })
}

fn check_labels(batch: &Batch, classes: usize) -> Result<()> {
    if let Some(&bad) = batch.labels.iter().find(|&&l| l as usize >= classes) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Batch-mean loss and its gradient at the logits.
fn loss_at_logits(
    logits: &Tensor,
    labels: &[u32],
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    let n = logits.n;
    let classes = logits.shape.numel();
    let inv_n = 1.0 / n as f64;
    let mut total = 0.0f64;
    let mut grad = vec![0.0f64; logits.data.len()];
    for b in 0..n {
        let row = logits.row(b);
        let y = labels[b] as usize;
        match kind {
            LossKind::CrossEntropy => {
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
                total += lse - row[y];
                for (c, &v) in row.iter().enumerate() {
                    let p = (v - lse).exp();
                    let t = if c == y { 1.0 } else { 0.0 };
                    grad[b * classes + c] = (p - t) * inv_n;
                }
            }
            LossKind::Squared => {
                for (c, &v) in row.iter().enumerate() {
                    let t = if classes == 1 {
                        f64::from(labels[b])
                    } else if c == y {
                        1.0
                    } else {
                        0.0
                    };
                    total += (v - t) * (v - t);
                    grad[b * classes + c] = 2.0 * (v - t) * inv_n;
                }
            }
        }
    }
    let loss = total * inv_n;
    if !loss.is_finite() {
        return Err(Error::NumericOverflow("non-finite loss".into()));
    }
    Ok((loss, grad))
}

fn backward(
    model: &Model,
    theta: &[f64],
    trace: &ForwardTrace,
    mut delta: Vec<f64>,
) -> Vec<f64> {
    let mut grads = vec![0.0f64; theta.len()];
    for (li, layer) in model.arch().layers.iter().enumerate().rev() {
        let input = &trace.layer_inputs[li];
        let base = model.layer_range(li).start;
        delta = backward_layer(layer, input, theta, base, &delta, &mut grads);
    }
    grads
}

/// Propagate `delta` (gradient at the layer output) back through one layer,
/// accumulating parameter gradients and returning the gradient at the input.
fn backward_layer(
    layer: &LayerSpec,
    input: &Tensor,
    theta: &[f64],
    base: usize,
    delta: &[f64],
    grads: &mut [f64],
) -> Vec<f64> {
    let n = input.n;
    let mut dx = vec![0.0f64; input.data.len()];
    match *layer {
        LayerSpec::Dense {
            in_features,
            out_features,
            bias,
        } => {
            let group = in_features + usize::from(bias);
            for b in 0..n {
                let x = input.row(b);
                let d = &delta[b * out_features..(b + 1) * out_features];
                let dxr = &mut dx[b * in_features..(b + 1) * in_features];
                for (o, &d_o) in d.iter().enumerate() {
                    let wrow = base + o * group;
                    for i in 0..in_features {
                        grads[wrow + i] += d_o * x[i];
                        dxr[i] += d_o * theta[wrow + i];
                    }
                    if bias {
                        grads[wrow + in_features] += d_o;
                    }
                }
            }
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            bias,
        } => {
            let (_, h, w) = match input.shape {
                Shape::Chw(c, h, w) => (c, h, w),
                _ => unreachable!(),
            };
            let (oh, ow) = (h - kernel + 1, w - kernel + 1);
            let group = in_channels * kernel * kernel + usize::from(bias);
            for b in 0..n {
                let x = input.row(b);
                let d = &delta[b * out_channels * oh * ow..(b + 1) * out_channels * oh * ow];
                let dxr = &mut dx[b * in_channels * h * w..(b + 1) * in_channels * h * w];
                for c in 0..out_channels {
                    let wbase = base + c * group;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let d_o = d[c * oh * ow + oy * ow + ox];
                            if d_o == 0.0 {
                                continue;
                            }
                            for ci in 0..in_channels {
                                for ky in 0..kernel {
                                    for kx in 0..kernel {
                                        let widx = wbase + (ci * kernel + ky) * kernel + kx;
                                        let xidx = ci * h * w + (oy + ky) * w + (ox + kx);
                                        grads[widx] += d_o * x[xidx];
                                        dxr[xidx] += d_o * theta[widx];
                                    }
                                }
                            }
                            if bias {
                                grads[wbase + in_channels * kernel * kernel] += d_o;
                            }
                        }
                    }
                }
            }
        }
        LayerSpec::Relu => {
            for (i, (&d, &x)) in delta.iter().zip(&input.data).enumerate() {
                dx[i] = if x > 0.0 { d } else { 0.0 };
            }
        }
        LayerSpec::Flatten => {
            dx.copy_from_slice(delta);
        }
    }
    dx
}

fn loss_given_theta(
    model: &Model,
    theta: &[f64],
    batch: &Batch,
    loss: &LossSpec,
) -> Result<f64> {
    let trace = run_forward(model, theta, batch)?;
    let (data_loss, _) = loss_at_logits(&trace.output, &batch.labels, loss.kind)?;
    let l1: f64 = if loss.l1_lambda > 0.0 {
        loss.l1_lambda * theta.iter().map(|v| v.abs()).sum::<f64>()
    } else {
        0.0
    };
    Ok(data_loss + l1)
}

/// Loss value and full parameter gradient for one batch.
///
/// The returned loss includes the L1 penalty. When `negate` is set the
/// gradient (but not the reported loss) is flipped elementwise, which turns
/// a descent step into an ascent step.
pub fn loss_and_grads(
    model: &Model,
    batch: &Batch,
    loss: &LossSpec,
    negate: bool,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Empty("loss_and_grads on empty batch".into()));
    }
    check_labels(batch, model.num_classes().max(1))?;
    let theta = materialize_params(model, None);
    let trace = run_forward(model, &theta, batch)?;
    let (data_loss, delta) = loss_at_logits(&trace.output, &batch.labels, loss.kind)?;
    let mut grads = backward(model, &theta, &trace, delta);
    let mut total = data_loss;
    if loss.l1_lambda > 0.0 {
        let mut l1 = 0.0f64;
        for (g, &t) in grads.iter_mut().zip(&theta) {
            l1 += t.abs();
            *g += loss.l1_lambda * sign(t);
        }
        total += loss.l1_lambda * l1;
    }
    if negate {
        for g in &mut grads {
            *g = -*g;
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NumericOverflow("non-finite gradient".into()));
    }
    Ok((total, grads))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss with parameter `j` shifted by `delta` in 64-bit arithmetic, leaving
/// the model untouched. This is the evaluation primitive behind
/// [`finite_diff_grad`]; exposed so verification code can form one-sided
/// differences too (central differences are blind to relu kinks).
pub fn perturbed_loss(
    model: &Model,
    batch: &Batch,
    loss: &LossSpec,
    j: usize,
    delta: f64,
) -> Result<f64> {
    let base = model.params()[j] as f64;
    let theta = materialize_params(model, Some((j, base + delta)));
    loss_given_theta(model, &theta, batch, loss)
}

/// Central finite difference of the loss along parameter `j`:
/// `(L(theta + eps e_j) - L(theta - eps e_j)) / (2 eps)`.
pub fn finite_diff_grad(
    model: &Model,
    batch: &Batch,
    loss: &LossSpec,
    j: usize,
    eps: f64,
) -> Result<f64> {
    assert!(eps > 0.0, "eps must be positive");
    let base = model.params()[j] as f64;
    let plus = {
        let theta = materialize_params(model, Some((j, base + eps)));
        loss_given_theta(model, &theta, batch, loss)?
    };
    let minus = {
        let theta = materialize_params(model, Some((j, base - eps)));
        loss_given_theta(model, &theta, batch, loss)?
    };
    Ok((plus - minus) / (2.0 * eps))
}
