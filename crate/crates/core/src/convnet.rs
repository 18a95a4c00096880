//! 1D convolutional classifier for tabular rows.
//!
//! A row of `d` features is read as a one-channel sequence of length `d` and
//! passed through
//!
//! ```text
//! [Conv1D -> ReLU -> MaxPool1D] x 2 -> Dense(hidden) -> Dropout -> Dense(2) -> Softmax
//! ```
//!
//! The two variants differ only in pooling: `Conv1d1` halves the sequence at
//! each pool (window 2, stride 2), `Conv1d2` keeps its length (stride 1 with
//! same padding). Convolutions are cross-correlations with stride 1 and zero
//! same-padding. Forward and backward passes are written out by hand.

use serde::{Deserialize, Serialize};

use crate::tensor::{rand_uniform, NumArray, Rng};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Conv1d1,
    Conv1d2,
}

impl Variant {
    pub fn pool_mode(self) -> PoolMode {
        match self {
            Variant::Conv1d1 => PoolMode::Reduce,
            Variant::Conv1d2 => PoolMode::Preserve,
        }
    }

    /// Smallest feature count the variant can take.
    pub fn min_features(self) -> usize {
        match self {
            Variant::Conv1d1 => 4,
            Variant::Conv1d2 => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conv1DLayer {
    /// `[out_channels, in_channels, kernel_len]`
    pub kernels: NumArray,
    pub bias: Vec<f64>,
}

impl Conv1DLayer {
    pub fn new(kernels: NumArray, bias: Vec<f64>) -> Result<Self> {
        kernels.expect_rank(3, "Conv1DLayer kernels")?;
        let s = kernels.shape();
        if s[2].is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel length must be odd for symmetric same padding, got {}",
                s[2]
            )));
        }
        if bias.len() != s[0] {
            return Err(Error::Shape(format!(
                "{} output channels but {} biases",
                s[0],
                bias.len()
            )));
        }
        Ok(Conv1DLayer { kernels, bias })
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[2]
    }
}

fn dims3(a: &NumArray, what: &str) -> Result<(usize, usize, usize)> {
    a.expect_rank(3, what)?;
    let s = a.shape();
    Ok((s[0], s[1], s[2]))
}

/// Same-padded stride-1 cross-correlation plus per-channel bias.
pub fn conv1d_forward(input: &NumArray, layer: &Conv1DLayer) -> Result<NumArray> {
    let (batch, in_ch, len) = dims3(input, "conv1d_forward")?;
    if in_ch != layer.in_channels() {
        return Err(Error::Shape(format!(
            "input has {in_ch} channels, layer expects {}",
            layer.in_channels()
        )));
    }
    let (out_ch, k) = (layer.out_channels(), layer.kernel_len());
    let pad = k / 2;
    let x = input.data();
    let w = layer.kernels.data();
    let mut out = vec![0.0; batch * out_ch * len];
    for b in 0..batch {
        for o in 0..out_ch {
            let row = &mut out[(b * out_ch + o) * len..(b * out_ch + o + 1) * len];
            row.fill(layer.bias[o]);
            for i in 0..in_ch {
                let xs = &x[(b * in_ch + i) * len..(b * in_ch + i + 1) * len];
                let ws = &w[(o * in_ch + i) * k..(o * in_ch + i + 1) * k];
                for (t, out_t) in row.iter_mut().enumerate() {
                    for (j, &wj) in ws.iter().enumerate() {
                        // input position t + j - pad, zero outside
                        if let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < len) {
                            *out_t += wj * xs[src];
                        }
                    }
                }
            }
        }
    }
    NumArray::new(vec![batch, out_ch, len], out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads {
    pub input: NumArray,
    pub kernels: NumArray,
    pub bias: Vec<f64>,
}

pub fn conv1d_backward(
    grad_out: &NumArray,
    input: &NumArray,
    layer: &Conv1DLayer,
) -> Result<ConvGrads> {
    let (batch, in_ch, len) = dims3(input, "conv1d_backward input")?;
    let (out_ch, k) = (layer.out_channels(), layer.kernel_len());
    if in_ch != layer.in_channels() || grad_out.shape() != [batch, out_ch, len] {
        return Err(Error::Shape(format!(
            "gradient {:?} does not match forward output [{batch}, {out_ch}, {len}] of input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    let pad = k / 2;
    let (x, g, w) = (input.data(), grad_out.data(), layer.kernels.data());
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let mut db = vec![0.0; out_ch];
    for b in 0..batch {
        for o in 0..out_ch {
            let gs = &g[(b * out_ch + o) * len..(b * out_ch + o + 1) * len];
            db[o] += gs.iter().sum::<f64>();
            for i in 0..in_ch {
                let base_x = (b * in_ch + i) * len;
                let base_w = (o * in_ch + i) * k;
                for (t, &gt) in gs.iter().enumerate() {
                    for j in 0..k {
                        if let Some(src) = (t + j).checked_sub(pad).filter(|&s| s < len) {
                            dw[base_w + j] += gt * x[base_x + src];
                            dx[base_x + src] += gt * w[base_w + j];
                        }
                    }
                }
            }
        }
    }
    Ok(ConvGrads {
        input: NumArray::new(input.shape().to_vec(), dx)?,
        kernels: NumArray::new(layer.kernels.shape().to_vec(), dw)?,
        bias: db,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    /// Window 2, stride 2: output length `floor(len / 2)`.
    Reduce,
    /// Odd window, stride 1, padded so the output keeps the input length.
    Preserve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxPool1DLayer {
    pub pool_len: usize,
    pub stride: usize,
    pub mode: PoolMode,
}

impl MaxPool1DLayer {
    pub fn reduce() -> Self {
        MaxPool1DLayer {
            pool_len: 2,
            stride: 2,
            mode: PoolMode::Reduce,
        }
    }

    pub fn preserve(pool_len: usize) -> Result<Self> {
        if pool_len.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "length-preserving pool window must be odd, got {pool_len}"
            )));
        }
        Ok(MaxPool1DLayer {
            pool_len,
            stride: 1,
            mode: PoolMode::Preserve,
        })
    }

    pub fn output_len(&self, len: usize) -> usize {
        match self.mode {
            PoolMode::Reduce => len / 2,
            PoolMode::Preserve => len,
        }
    }
}

/// Winning input position (flat index) of every pooled output element.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolIndices {
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Windowed maxima. The first maximum in a window wins ties.
pub fn maxpool_forward(
    input: &NumArray,
    layer: &MaxPool1DLayer,
) -> Result<(NumArray, PoolIndices)> {
    let (batch, ch, len) = dims3(input, "maxpool_forward")?;
    if layer.mode == PoolMode::Reduce && len < 2 {
        return Err(Error::Shape(format!(
            "reducing max pool needs length >= 2, got {len}"
        )));
    }
    let out_len = layer.output_len(len);
    let x = input.data();
    let mut out = Vec::with_capacity(batch * ch * out_len);
    let mut argmax = Vec::with_capacity(batch * ch * out_len);
    for series in 0..batch * ch {
        let base = series * len;
        for t in 0..out_len {
            let (lo, hi) = match layer.mode {
                PoolMode::Reduce => (2 * t, 2 * t + 2),
                PoolMode::Preserve => {
                    let half = layer.pool_len / 2;
                    (t.saturating_sub(half), (t + half + 1).min(len))
                }
            };
            let mut best = base + lo;
            for p in base + lo + 1..base + hi {
                if x[p] > x[best] {
                    best = p;
                }
            }
            out.push(x[best]);
            argmax.push(best);
        }
    }
    let output_shape = vec![batch, ch, out_len];
    Ok((
        NumArray::new(output_shape.clone(), out)?,
        PoolIndices {
            input_shape: input.shape().to_vec(),
            output_shape,
            argmax,
        },
    ))
}

/// Routes each output gradient to its argmax; overlapping windows add up.
pub fn maxpool_backward(
    grad_out: &NumArray,
    indices: &PoolIndices,
    input_shape: &[usize],
) -> Result<NumArray> {
    if grad_out.shape() != indices.output_shape.as_slice()
        || input_shape != indices.input_shape.as_slice()
    {
        return Err(Error::Contract(format!(
            "pool indices recorded for {:?} -> {:?}, got gradient {:?} for input {:?}",
            indices.input_shape,
            indices.output_shape,
            grad_out.shape(),
            input_shape
        )));
    }
    let mut dx = NumArray::zeros(input_shape)?;
    let d = dx.data_mut();
    for (&g, &src) in grad_out.data().iter().zip(&indices.argmax) {
        d[src] += g;
    }
    Ok(dx)
}

/// Inverted dropout.
///
/// In train mode each element is zeroed with probability `rate` and survivors
/// are scaled by `1 / (1 - rate)`; the returned mask holds 1 for survivors and
/// 0 for dropped elements. In eval mode the input passes through unchanged
/// with an all-ones mask.
pub fn dropout(
    input: &NumArray,
    rate: f64,
    rng: &mut Rng,
    train_mode: bool,
) -> Result<(NumArray, NumArray)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Param(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    let ones = NumArray::filled(input.shape(), 1.0)?;
    if !train_mode || rate == 0.0 {
        return Ok((input.clone(), ones));
    }
    let mut mask = ones;
    let scale = 1.0 / (1.0 - rate);
    let mut out = input.clone();
    for (m, x) in mask.data_mut().iter_mut().zip(out.data_mut()) {
        if rng.next_f64() < rate {
            *m = 0.0;
            *x = 0.0;
        } else {
            *x *= scale;
        }
    }
    Ok((out, mask))
}

/// Mean cross-entropy of a softmax over two logits per row, and its gradient
/// `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &NumArray, labels: &[u8]) -> Result<(f64, NumArray)> {
    logits.expect_rank(2, "softmax_cross_entropy")?;
    let (batch, classes) = (logits.nrows(), logits.ncols());
    if classes != 2 || labels.len() != batch {
        return Err(Error::Shape(format!(
            "expected [{}, 2] logits, got {:?}",
            labels.len(),
            logits.shape()
        )));
    }
    if !logits.all_finite() {
        return Err(Error::Numeric("non-finite logits".into()));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; batch * 2];
    for (b, (row, &label)) in logits.rows().zip(labels).enumerate() {
        if label > 1 {
            return Err(Error::Contract(format!("label {label} is not 0 or 1")));
        }
        let m = row[0].max(row[1]);
        let e = [(row[0] - m).exp(), (row[1] - m).exp()];
        let z = e[0] + e[1];
        let y = usize::from(label);
        loss += z.ln() - (row[y] - m);
        for c in 0..2 {
            let onehot = if c == y { 1.0 } else { 0.0 };
            grad[b * 2 + c] = (e[c] / z - onehot) / batch as f64;
        }
    }
    Ok((loss / batch as f64, NumArray::new(vec![batch, 2], grad)?))
}

/// Fully connected layer `y = W x + b` with `W` shaped `[out, in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: NumArray,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn forward(&self, x: &NumArray) -> NumArray {
        let (out_dim, in_dim) = (self.weights.shape()[0], self.weights.shape()[1]);
        let w = self.weights.data();
        let mut out = Vec::with_capacity(x.nrows() * out_dim);
        for row in x.rows() {
            for o in 0..out_dim {
                let wr = &w[o * in_dim..(o + 1) * in_dim];
                out.push(self.bias[o] + wr.iter().zip(row).map(|(a, b)| a * b).sum::<f64>());
            }
        }
        NumArray::new(vec![x.nrows(), out_dim], out).expect("dense output shape")
    }

    /// Returns `(grad_input, grad_weights, grad_bias)`.
    pub fn backward(&self, grad_out: &NumArray, x: &NumArray) -> (NumArray, NumArray, Vec<f64>) {
        let (out_dim, in_dim) = (self.weights.shape()[0], self.weights.shape()[1]);
        let w = self.weights.data();
        let mut dx = vec![0.0; x.len()];
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; out_dim];
        for (b, (g, row)) in grad_out.rows().zip(x.rows()).enumerate() {
            let dxr = &mut dx[b * in_dim..(b + 1) * in_dim];
            for o in 0..out_dim {
                db[o] += g[o];
                let wr = &w[o * in_dim..(o + 1) * in_dim];
                let dwr = &mut dw[o * in_dim..(o + 1) * in_dim];
                for i in 0..in_dim {
                    dwr[i] += g[o] * row[i];
                    dxr[i] += g[o] * wr[i];
                }
            }
        }
        (
            NumArray::new(x.shape().to_vec(), dx).expect("dense grad shape"),
            NumArray::new(self.weights.shape().to_vec(), dw).expect("dense grad shape"),
            db,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    /// Output channels of the first and second convolution.
    pub channels: [usize; 2],
    pub kernel_len: usize,
    /// Window of the length-preserving pool.
    pub pool_len: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for CnnTrainConfig {
    fn default() -> Self {
        CnnTrainConfig {
            learning_rate: 0.05,
            epochs: 300,
            dropout_rate: 0.5,
            channels: [8, 16],
            kernel_len: 3,
            pool_len: 3,
            hidden: 32,
            seed: 0,
        }
    }
}

impl CnnTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            ));
        }
        if self.channels.contains(&0) || self.hidden == 0 {
            return bad("channels and hidden must be >= 1".into());
        }
        if self.kernel_len.is_multiple_of(2) || self.pool_len.is_multiple_of(2) {
            return bad(format!(
                "kernel_len and pool_len must be odd, got {} and {}",
                self.kernel_len, self.pool_len
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub variant: Variant,
    pub n_features: usize,
    pub conv1: Conv1DLayer,
    pub pool1: MaxPool1DLayer,
    pub conv2: Conv1DLayer,
    pub pool2: MaxPool1DLayer,
    pub dense1: Dense,
    pub dropout_rate: f64,
    pub dense2: Dense,
    pub train_mode: bool,
    /// Mean training loss per epoch, filled by [`train_cnn`].
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

/// Parameter gradients in the same layout as [`CnnModel::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct CnnGrads {
    pub conv1_kernels: NumArray,
    pub conv1_bias: Vec<f64>,
    pub conv2_kernels: NumArray,
    pub conv2_bias: Vec<f64>,
    pub dense1_weights: NumArray,
    pub dense1_bias: Vec<f64>,
    pub dense2_weights: NumArray,
    pub dense2_bias: Vec<f64>,
}

impl CnnGrads {
    pub fn slices(&self) -> [&[f64]; 8] {
        [
            self.conv1_kernels.data(),
            &self.conv1_bias,
            self.conv2_kernels.data(),
            &self.conv2_bias,
            self.dense1_weights.data(),
            &self.dense1_bias,
            self.dense2_weights.data(),
            &self.dense2_bias,
        ]
    }
}

struct ForwardCache {
    x0: NumArray,
    c1: NumArray,
    r1: NumArray,
    idx1: PoolIndices,
    p1: NumArray,
    c2: NumArray,
    r2: NumArray,
    idx2: PoolIndices,
    flat: NumArray,
    mask: NumArray,
    dropout_scale: f64,
    dropped: NumArray,
}

pub fn relu(a: &NumArray) -> NumArray {
    a.map(|v| v.max(0.0))
}

/// Passes `grad` where the pre-activation was positive.
pub fn relu_backward(grad: &NumArray, pre: &NumArray) -> NumArray {
    let mut g = grad.clone();
    for (gv, &p) in g.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

fn glorot(rng: &mut Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Result<NumArray> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    rand_uniform(rng, shape, -s, s)
}

/// Sequence length entering the first dense layer, per channel.
pub fn pooled_len(variant: Variant, d: usize) -> usize {
    match variant {
        Variant::Conv1d1 => d / 2 / 2,
        Variant::Conv1d2 => d,
    }
}

/// Fresh network for rows of `d` features with Glorot-uniform weights and
/// zero biases.
pub fn build_cnn(
    variant: Variant,
    d: usize,
    cfg: &CnnTrainConfig,
    rng: &mut Rng,
) -> Result<CnnModel> {
    cfg.validate()?;
    if d < variant.min_features() {
        return Err(Error::Config(format!(
            "{variant:?} needs at least {} features, got {d}",
            variant.min_features()
        )));
    }
    let [c1, c2] = cfg.channels;
    let k = cfg.kernel_len;
    let pool = match variant.pool_mode() {
        PoolMode::Reduce => MaxPool1DLayer::reduce(),
        PoolMode::Preserve => MaxPool1DLayer::preserve(cfg.pool_len)?,
    };
    let flat = c2 * pooled_len(variant, d);
    let conv1 = Conv1DLayer::new(glorot(rng, &[c1, 1, k], k, c1 * k)?, vec![0.0; c1])?;
    let conv2 = Conv1DLayer::new(glorot(rng, &[c2, c1, k], c1 * k, c2 * k)?, vec![0.0; c2])?;
    let dense1 = Dense {
        weights: glorot(rng, &[cfg.hidden, flat], flat, cfg.hidden)?,
        bias: vec![0.0; cfg.hidden],
    };
    let dense2 = Dense {
        weights: glorot(rng, &[2, cfg.hidden], cfg.hidden, 2)?,
        bias: vec![0.0; 2],
    };
    Ok(CnnModel {
        variant,
        n_features: d,
        conv1,
        pool1: pool,
        conv2,
        pool2: pool,
        dense1,
        dropout_rate: cfg.dropout_rate,
        dense2,
        train_mode: true,
        loss_history: Vec::new(),
    })
}

impl CnnModel {
    /// Flattened length entering the first dense layer.
    pub fn flat_len(&self) -> usize {
        self.dense1.weights.shape()[1]
    }

    pub fn params(&self) -> [&[f64]; 8] {
        [
            self.conv1.kernels.data(),
            &self.conv1.bias,
            self.conv2.kernels.data(),
            &self.conv2.bias,
            self.dense1.weights.data(),
            &self.dense1.bias,
            self.dense2.weights.data(),
            &self.dense2.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.conv1.kernels.data_mut(),
            &mut self.conv1.bias,
            self.conv2.kernels.data_mut(),
            &mut self.conv2.bias,
            self.dense1.weights.data_mut(),
            &mut self.dense1.bias,
            self.dense2.weights.data_mut(),
            &mut self.dense2.bias,
        ]
    }

    fn as_sequences(&self, features: &NumArray) -> Result<NumArray> {
        features.expect_rank(2, "CNN input")?;
        if features.ncols() != self.n_features {
            return Err(Error::Shape(format!(
                "model expects {} features, batch has {}",
                self.n_features,
                features.ncols()
            )));
        }
        features
            .clone()
            .reshape(vec![features.nrows(), 1, self.n_features])
    }

    /// Forward pass; dropout is applied only when `rng` is given.
    fn forward(
        &self,
        features: &NumArray,
        rng: Option<&mut Rng>,
    ) -> Result<(NumArray, ForwardCache)> {
        let x0 = self.as_sequences(features)?;
        let c1 = conv1d_forward(&x0, &self.conv1)?;
        let r1 = relu(&c1);
        let (p1, idx1) = maxpool_forward(&r1, &self.pool1)?;
        let c2 = conv1d_forward(&p1, &self.conv2)?;
        let r2 = relu(&c2);
        let (p2, idx2) = maxpool_forward(&r2, &self.pool2)?;
        let batch = features.nrows();
        let flat = p2.reshape(vec![batch, self.flat_len()])?;
        let hidden = self.dense1.forward(&flat);
        let train = rng.is_some();
        let (dropped, mask) = match rng {
            Some(rng) => dropout(&hidden, self.dropout_rate, rng, true)?,
            None => dropout(&hidden, self.dropout_rate, &mut Rng::new(0), false)?,
        };
        let dropout_scale = if train {
            1.0 / (1.0 - self.dropout_rate)
        } else {
            1.0
        };
        let logits = self.dense2.forward(&dropped);
        Ok((
            logits,
            ForwardCache {
                x0,
                c1,
                r1,
                idx1,
                p1,
                c2,
                r2,
                idx2,
                flat,
                mask,
                dropout_scale,
                dropped,
            },
        ))
    }

    /// Class-score logits `[batch, 2]` without dropout.
    pub fn logits(&self, features: &NumArray) -> Result<NumArray> {
        Ok(self.forward(features, None)?.0)
    }

    /// Mean cross-entropy and its parameter gradients on a batch. Dropout is
    /// active only when `rng` is supplied.
    pub fn loss_and_grads(
        &self,
        features: &NumArray,
        labels: &[u8],
        rng: Option<&mut Rng>,
    ) -> Result<(f64, CnnGrads)> {
        let (logits, cache) = self.forward(features, rng)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, labels)?;
        let (d_dropped, dw2, db2) = self.dense2.backward(&dlogits, &cache.dropped);

        let mut d_hidden = d_dropped;
        for (g, &m) in d_hidden.data_mut().iter_mut().zip(cache.mask.data()) {
            *g *= m * cache.dropout_scale;
        }
        let (d_flat, dw1, db1) = self.dense1.backward(&d_hidden, &cache.flat);

        let d_p2 = d_flat.reshape(cache.idx2.output_shape.clone())?;
        let d_r2 = maxpool_backward(&d_p2, &cache.idx2, cache.r2.shape())?;
        let d_c2 = relu_backward(&d_r2, &cache.c2);
        let g2 = conv1d_backward(&d_c2, &cache.p1, &self.conv2)?;
        let d_r1 = maxpool_backward(&g2.input, &cache.idx1, cache.r1.shape())?;
        let d_c1 = relu_backward(&d_r1, &cache.c1);
        let g1 = conv1d_backward(&d_c1, &cache.x0, &self.conv1)?;

        Ok((
            loss,
            CnnGrads {
                conv1_kernels: g1.kernels,
                conv1_bias: g1.bias,
                conv2_kernels: g2.kernels,
                conv2_bias: g2.bias,
                dense1_weights: dw1,
                dense1_bias: db1,
                dense2_weights: dw2,
                dense2_bias: db2,
            },
        ))
    }
}

/// Full-batch gradient descent on softmax cross-entropy.
///
/// Dropout draws come from stream 1 of `cfg.seed`. The returned model is in
/// eval mode and carries the per-epoch training loss.
pub fn train_cnn(
    mut model: CnnModel,
    features: &NumArray,
    labels: &[u8],
    cfg: &CnnTrainConfig,
) -> Result<CnnModel> {
    cfg.validate()?;
    if labels.len() != features.nrows() {
        return Err(Error::Shape(format!(
            "{} rows but {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    model.dropout_rate = cfg.dropout_rate;
    model.train_mode = true;
    let mut rng = Rng::with_stream(cfg.seed, 1);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grads) = match model.loss_and_grads(features, labels, Some(&mut rng)) {
            Ok(v) => v,
            Err(Error::Numeric(_)) => {
                return Err(Error::Divergence {
                    epoch,
                    learning_rate: cfg.learning_rate,
                })
            }
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                learning_rate: cfg.learning_rate,
            });
        }
        history.push(loss);
        for (param, grad) in model.params_mut().into_iter().zip(grads.slices()) {
            for (p, g) in param.iter_mut().zip(grad) {
                *p -= cfg.learning_rate * g;
            }
        }
    }
    model.loss_history = history;
    model.train_mode = false;
    Ok(model)
}

/// Argmax of the two class scores; equal scores predict class 1.
pub fn predict_cnn(model: &CnnModel, features: &NumArray) -> Result<Vec<u8>> {
    if model.train_mode {
        return Err(Error::Contract(
            "prediction needs an eval-mode model; dropout would make it stochastic".into(),
        ));
    }
    let logits = model.logits(features)?;
    Ok(logits.rows().map(|r| u8::from(r[1] >= r[0])).collect())
}
