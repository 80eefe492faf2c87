use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy_in_place, dot_slices, RealMatrix, RealVector};
use crate::rng::RngStream;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Architecture of a fully connected classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default)]
    pub activation: Activation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Weight,
    Bias,
}

/// One contiguous slice of the flat parameter vector.
///
/// Weights are stored input-major (`rows = fan_in`, `cols = fan_out`) so the
/// forward pass is a sequence of contiguous axpy updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub layer: usize,
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

impl ModelSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Result<Self> {
        let spec = Self {
            input_dim,
            hidden_dims,
            num_classes,
            activation: Activation::Relu,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::invalid("model needs at least 2 classes"));
        }
        Ok(())
    }

    /// `[input, hidden..., classes]`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.num_classes);
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    pub fn layout(&self) -> Vec<ParamBlock> {
        let dims = self.layer_dims();
        let mut offset = 0;
        let mut blocks = Vec::with_capacity(2 * self.num_layers());
        for (layer, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            blocks.push(ParamBlock {
                layer,
                kind: BlockKind::Weight,
                rows: fan_in,
                cols: fan_out,
                offset,
            });
            offset += fan_in * fan_out;
            blocks.push(ParamBlock {
                layer,
                kind: BlockKind::Bias,
                rows: 1,
                cols: fan_out,
                offset,
            });
            offset += fan_out;
        }
        blocks
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(ParamBlock::len).sum()
    }
}

/// Flat parameter vector θ together with its layer layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: RealVector,
    layout: Vec<ParamBlock>,
}

impl ParamVector {
    pub fn from_values(spec: &ModelSpec, values: Vec<f64>) -> Result<Self> {
        let layout = spec.layout();
        let expected: usize = layout.iter().map(ParamBlock::len).sum();
        if values.len() != expected {
            return Err(Error::dim(format!(
                "parameter vector has {} entries, model expects {expected}",
                values.len()
            )));
        }
        Ok(Self {
            values: RealVector::new(values)?,
            layout,
        })
    }

    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        Self::from_values(spec, vec![0.0; spec.param_count()])
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: &ModelSpec, rng: &mut RngStream) -> Result<Self> {
        spec.validate()?;
        let mut values = vec![0.0; spec.param_count()];
        for block in spec.layout() {
            if block.kind == BlockKind::Weight {
                let limit = (6.0 / (block.rows + block.cols) as f64).sqrt();
                for v in &mut values[block.range()] {
                    *v = rng.uniform(-limit, limit)?;
                }
            }
        }
        Self::from_values(spec, values)
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::dim(format!(
                "with_values: {} entries for a {}-parameter layout",
                values.len(),
                self.len()
            )));
        }
        Ok(Self {
            values: RealVector::new(values)?,
            layout: self.layout.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &RealVector {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn block(&self, block: &ParamBlock) -> &[f64] {
        &self.as_slice()[block.range()]
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.values.as_mut_slice()
    }

    pub(crate) fn check(&self, what: &'static str) -> Result<()> {
        self.values.check(what)
    }

    pub fn ensure_same_layout(&self, other: &ParamVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::dim("parameter layouts differ"));
        }
        Ok(())
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.ensure_same_layout(other)?;
        let out = self
            .as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        self.with_values(out)
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &ParamVector) -> Result<ParamVector> {
        self.ensure_same_layout(other)?;
        let mut out = self.as_slice().to_vec();
        axpy_in_place(alpha, other.as_slice(), &mut out);
        self.with_values(out)
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.ensure_same_layout(other)?;
        Ok(dot_slices(self.as_slice(), other.as_slice()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.max_abs()
    }

    pub fn squared_norm(&self) -> f64 {
        crate::linalg::squared_norm(&self.values)
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &ParamVector) -> Result<f64> {
        self.ensure_same_layout(other)?;
        Ok(self
            .as_slice()
            .iter()
            .zip(other.as_slice())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Mini-batch of flattened inputs and integer labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: RealMatrix,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: RealMatrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::dim(format!(
                "batch has {} inputs and {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.inputs.cols() != spec.input_dim {
            return Err(Error::dim(format!(
                "batch inputs have {} features, model expects {}",
                self.inputs.cols(),
                spec.input_dim
            )));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= spec.num_classes) {
            return Err(Error::invalid(format!("label {bad} outside [0, {})", spec.num_classes)));
        }
        Ok(())
    }
}

fn check_params(spec: &ModelSpec, theta: &ParamVector) -> Result<()> {
    if theta.layout != spec.layout() {
        return Err(Error::dim("parameter layout does not match model spec"));
    }
    Ok(())
}

/// Post-activation outputs of every layer; the last entry holds the logits.
struct Trace {
    outputs: Vec<Vec<f64>>,
}

fn dense_forward(input: &[f64], rows: usize, weight: &[f64], bias: &[f64], fan_in: usize, relu: bool) -> Vec<f64> {
    let fan_out = bias.len();
    let mut out = vec![0.0; rows * fan_out];
    for (x, o) in input.chunks_exact(fan_in).zip(out.chunks_exact_mut(fan_out)) {
        o.copy_from_slice(bias);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy_in_place(xk, &weight[k * fan_out..(k + 1) * fan_out], o);
            }
        }
        if relu {
            for v in o.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
    out
}

fn run_forward(spec: &ModelSpec, theta: &ParamVector, inputs: &RealMatrix) -> Trace {
    let layout = theta.layout();
    let rows = inputs.rows();
    let layers = spec.num_layers();
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(layers);
    for layer in 0..layers {
        let (w, b) = (&layout[2 * layer], &layout[2 * layer + 1]);
        let input = if layer == 0 {
            inputs.as_slice()
        } else {
            outputs[layer - 1].as_slice()
        };
        let out = dense_forward(input, rows, theta.block(w), theta.block(b), w.rows, layer + 1 < layers);
        outputs.push(out);
    }
    Trace { outputs }
}

pub fn forward(spec: &ModelSpec, theta: &ParamVector, batch: &Batch) -> Result<RealMatrix> {
    check_params(spec, theta)?;
    batch.validate(spec)?;
    let mut trace = run_forward(spec, theta, &batch.inputs);
    let logits = trace.outputs.pop().expect("at least one layer");
    let m = RealMatrix::new(batch.len(), spec.num_classes, logits)?;
    m.check("forward")?;
    Ok(m)
}

fn row_cross_entropy(z: &[f64], y: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = z.iter().map(|&zi| (zi - max).exp()).sum();
    max + total.ln() - z[y]
}

/// Mean cross-entropy without the backward pass.
pub fn mean_loss(spec: &ModelSpec, theta: &ParamVector, batch: &Batch) -> Result<f64> {
    let logits = forward(spec, theta, batch)?;
    let sum: f64 = batch
        .labels
        .iter()
        .enumerate()
        .map(|(i, &y)| row_cross_entropy(logits.row(i), y))
        .sum();
    let loss = sum * (1.0 / batch.len() as f64);
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss"));
    }
    Ok(loss)
}

/// Mean cross-entropy and its gradient with respect to θ.
pub fn loss_and_grad(spec: &ModelSpec, theta: &ParamVector, batch: &Batch) -> Result<(f64, ParamVector)> {
    check_params(spec, theta)?;
    batch.validate(spec)?;
    let rows = batch.len();
    let classes = spec.num_classes;
    let trace = run_forward(spec, theta, &batch.inputs);
    let logits = trace.outputs.last().expect("at least one layer");

    let scale = 1.0 / rows as f64;
    let mut loss = 0.0;
    // dL/dlogits, already divided by the batch size.
    let mut delta = vec![0.0; rows * classes];
    for ((z, d), &y) in logits
        .chunks_exact(classes)
        .zip(delta.chunks_exact_mut(classes))
        .zip(&batch.labels)
    {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (di, &zi) in d.iter_mut().zip(z) {
            let e = (zi - max).exp();
            *di = e;
            total += e;
        }
        loss += max + total.ln() - z[y];
        for di in d.iter_mut() {
            *di *= scale / total;
        }
        d[y] -= scale;
    }
    loss *= scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss"));
    }

    let layout = theta.layout();
    let mut grad = vec![0.0; theta.len()];
    for layer in (0..spec.num_layers()).rev() {
        let (wb, bb) = (layout[2 * layer], layout[2 * layer + 1]);
        let (fan_in, fan_out) = (wb.rows, wb.cols);
        let input = if layer == 0 {
            batch.inputs.as_slice()
        } else {
            trace.outputs[layer - 1].as_slice()
        };
        {
            let (gw, rest) = grad[wb.offset..].split_at_mut(wb.len());
            let gb = &mut rest[..bb.len()];
            for (x, d) in input.chunks_exact(fan_in).zip(delta.chunks_exact(fan_out)) {
                for (k, &xk) in x.iter().enumerate() {
                    if xk != 0.0 {
                        axpy_in_place(xk, d, &mut gw[k * fan_out..(k + 1) * fan_out]);
                    }
                }
                axpy_in_place(1.0, d, gb);
            }
        }
        if layer > 0 {
            let weight = theta.block(&wb);
            let mut prev = vec![0.0; rows * fan_in];
            for ((x, d), p) in input
                .chunks_exact(fan_in)
                .zip(delta.chunks_exact(fan_out))
                .zip(prev.chunks_exact_mut(fan_in))
            {
                for (k, pk) in p.iter_mut().enumerate() {
                    // ReLU derivative: the stored activation is positive iff the pre-activation was.
                    if x[k] > 0.0 {
                        *pk = dot_slices(&weight[k * fan_out..(k + 1) * fan_out], d);
                    }
                }
            }
            delta = prev;
        }
    }
    let grad = theta.with_values(grad)?;
    grad.check("loss gradient")?;
    Ok((loss, grad))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(spec: &ModelSpec, theta: &ParamVector, batch: &Batch) -> Result<f64> {
    let logits = forward(spec, theta, batch)?;
    let correct = batch
        .labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax(logits.row(i)) == y)
        .count();
    Ok(correct as f64 / batch.len() as f64)
}
