//! Transformer encoder round-winner classifier.
//!
//! Input projection to the model width, additive sinusoidal position
//! encoding, one post-norm encoder layer (multi-head self-attention and a
//! two-layer feed-forward block, each wrapped in dropout, residual, and
//! layer normalization), masked mean pooling, and a linear head. Padded
//! positions are excluded as attention keys and from pooling, so logits on
//! valid rounds do not depend on how much padding a batch carries.

use crate::error::{Error, Result};
use crate::tensor::{masked_softmax, Mask, SeededRng, Tensor};

use super::{Dropout, Linear, MaskedMeanPool, Param, INPUT_SCALE};

/// Sinusoidal position table of shape `[max_len, d_model]`.
///
/// Column pairs (2i, 2i+1) hold sin and cos of pos / 10000^(2i/d_model),
/// so row 0 alternates 0 and 1. `d_model` must be even.
pub fn positional_encoding(max_len: usize, d_model: usize) -> Result<Tensor> {
    if d_model % 2 != 0 {
        return Err(Error::Parameter(format!(
            "positional encoding needs an even model width, got {d_model}"
        )));
    }
    let mut data = vec![0.0; max_len * d_model];
    for pos in 0..max_len {
        for i in 0..d_model / 2 {
            let rate = 1.0 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            let angle = pos as f64 * rate;
            data[pos * d_model + 2 * i] = angle.sin();
            data[pos * d_model + 2 * i + 1] = angle.cos();
        }
    }
    Tensor::from_vec(vec![max_len, d_model], data)
}

/// Layer normalization over the last dimension of `[rows, d]` inputs.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub scale: Param,
    pub shift: Param,
    eps: f64,
    cache: Option<(Tensor, Vec<f64>)>,
}

impl LayerNorm {
    pub fn new(prefix: &str, d: usize) -> Self {
        Self {
            scale: Param::new(format!("{prefix}.scale"), Tensor::filled(vec![d], 1.0)),
            shift: Param::new(format!("{prefix}.shift"), Tensor::zeros(vec![d])),
            eps: 1e-5,
            cache: None,
        }
    }

    fn d(&self) -> usize {
        self.scale.value.shape()[0]
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let d = self.d();
        if x.rank() != 2 || x.shape()[1] != d {
            return Err(Error::Dimension(format!(
                "layer norm {} expects [rows, {d}], got {:?}",
                self.scale.name,
                x.shape()
            )));
        }
        let rows = x.shape()[0];
        let mut out = vec![0.0; rows * d];
        let mut xhat = vec![0.0; rows * d];
        let mut inv_std = vec![0.0; rows];
        let gamma = self.scale.value.data();
        let beta = self.shift.value.data();
        for r in 0..rows {
            let row = &x.data()[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r_std = 1.0 / (var + self.eps).sqrt();
            inv_std[r] = r_std;
            for j in 0..d {
                let xh = (row[j] - mean) * r_std;
                xhat[r * d + j] = xh;
                out[r * d + j] = gamma[j] * xh + beta[j];
            }
        }
        self.cache = Some((Tensor::from_vec(vec![rows, d], xhat)?, inv_std));
        Tensor::from_vec(vec![rows, d], out)
    }

    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let (xhat, inv_std) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("backward before forward on {}", self.scale.name)))?;
        let d = self.d();
        let rows = dy.shape()[0];
        if dy.shape() != xhat.shape() {
            return Err(Error::Dimension(format!(
                "layer norm {} backward on {:?}, cached {:?}",
                self.scale.name,
                dy.shape(),
                xhat.shape()
            )));
        }
        let gamma = self.scale.value.data();
        let dscale = self.scale.grad.data_mut();
        let dshift = self.shift.grad.data_mut();
        let mut dx = vec![0.0; rows * d];
        for r in 0..rows {
            let dy_row = &dy.data()[r * d..(r + 1) * d];
            let xh_row = &xhat.data()[r * d..(r + 1) * d];
            let mut sum_dyh = 0.0;
            let mut sum_dyh_xh = 0.0;
            for j in 0..d {
                dscale[j] += dy_row[j] * xh_row[j];
                dshift[j] += dy_row[j];
                let dyh = dy_row[j] * gamma[j];
                sum_dyh += dyh;
                sum_dyh_xh += dyh * xh_row[j];
            }
            let mean_dyh = sum_dyh / d as f64;
            let mean_dyh_xh = sum_dyh_xh / d as f64;
            for j in 0..d {
                let dyh = dy_row[j] * gamma[j];
                dx[r * d + j] = inv_std[r] * (dyh - mean_dyh - xh_row[j] * mean_dyh_xh);
            }
        }
        Tensor::from_vec(vec![rows, d], dx)
    }
}

#[derive(Debug, Clone)]
struct AttnCache {
    batch: usize,
    time: usize,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Attention weights per head, each `[batch, time, time]`.
    weights: Vec<Tensor>,
}

/// Multi-head scaled dot-product self-attention with a key validity mask.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    wq: Linear,
    wk: Linear,
    wv: Linear,
    wo: Linear,
    heads: usize,
    cache: Option<AttnCache>,
}

impl MultiHeadAttention {
    pub fn new(d_model: usize, heads: usize, rng: &mut SeededRng) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(Error::Parameter(format!(
                "head count {heads} must divide model width {d_model}"
            )));
        }
        Ok(Self {
            wq: Linear::new("attn.wq", d_model, d_model, rng)?,
            wk: Linear::new("attn.wk", d_model, d_model, rng)?,
            wv: Linear::new("attn.wv", d_model, d_model, rng)?,
            wo: Linear::new("attn.wo", d_model, d_model, rng)?,
            heads,
            cache: None,
        })
    }

    fn d_model(&self) -> usize {
        self.wq.in_dim()
    }

    /// `x` is `[batch*time, d_model]` rows in batch-major order.
    pub fn forward(&mut self, x: &Tensor, b: usize, t: usize, mask: &Mask) -> Result<Tensor> {
        let d = self.d_model();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.wq.forward(x)?;
        let k = self.wk.forward(x)?;
        let v = self.wv.forward(x)?;

        let mut ctx = vec![0.0; b * t * d];
        let mut weights = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let off = h * dh;
            let mut scores = vec![0.0; b * t * t];
            for bi in 0..b {
                for qi in 0..t {
                    let q_row = &q.data()[(bi * t + qi) * d + off..(bi * t + qi) * d + off + dh];
                    for kj in 0..t {
                        let k_row =
                            &k.data()[(bi * t + kj) * d + off..(bi * t + kj) * d + off + dh];
                        let mut s = 0.0;
                        for c in 0..dh {
                            s += q_row[c] * k_row[c];
                        }
                        scores[(bi * t + qi) * t + kj] = s * scale;
                    }
                }
            }
            let w = masked_softmax(&Tensor::from_vec(vec![b, t, t], scores)?, mask)?;
            for bi in 0..b {
                for qi in 0..t {
                    let w_row = &w.data()[(bi * t + qi) * t..(bi * t + qi + 1) * t];
                    let out = &mut ctx[(bi * t + qi) * d + off..(bi * t + qi) * d + off + dh];
                    for (kj, &wv_) in w_row.iter().enumerate() {
                        if wv_ == 0.0 {
                            continue;
                        }
                        let v_row =
                            &v.data()[(bi * t + kj) * d + off..(bi * t + kj) * d + off + dh];
                        for c in 0..dh {
                            out[c] += wv_ * v_row[c];
                        }
                    }
                }
            }
            weights.push(w);
        }
        let out = self
            .wo
            .forward(&Tensor::from_vec(vec![b * t, d], ctx)?)?;
        self.cache = Some(AttnCache {
            batch: b,
            time: t,
            q,
            k,
            v,
            weights,
        });
        Ok(out)
    }

    pub fn backward(&mut self, dout: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Contract("attention backward before forward".to_string()))?;
        let (b, t) = (cache.batch, cache.time);
        let d = self.d_model();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();

        let dctx = self.wo.backward(dout)?;
        let mut dq = vec![0.0; b * t * d];
        let mut dk = vec![0.0; b * t * d];
        let mut dv = vec![0.0; b * t * d];
        for h in 0..self.heads {
            let off = h * dh;
            let w = &cache.weights[h];
            for bi in 0..b {
                for qi in 0..t {
                    let w_row = &w.data()[(bi * t + qi) * t..(bi * t + qi + 1) * t];
                    let dctx_row =
                        &dctx.data()[(bi * t + qi) * d + off..(bi * t + qi) * d + off + dh];

                    // dweights and dv for this query row.
                    let mut dw = vec![0.0; t];
                    for kj in 0..t {
                        let v_row =
                            &cache.v.data()[(bi * t + kj) * d + off..(bi * t + kj) * d + off + dh];
                        let mut s = 0.0;
                        for c in 0..dh {
                            s += dctx_row[c] * v_row[c];
                        }
                        dw[kj] = s;
                        if w_row[kj] != 0.0 {
                            let dv_row =
                                &mut dv[(bi * t + kj) * d + off..(bi * t + kj) * d + off + dh];
                            for c in 0..dh {
                                dv_row[c] += w_row[kj] * dctx_row[c];
                            }
                        }
                    }

                    // Softmax backward; rows of zero weight contribute nothing.
                    let dot: f64 = w_row.iter().zip(&dw).map(|(&wv_, &dwv)| wv_ * dwv).sum();
                    for kj in 0..t {
                        let ds = w_row[kj] * (dw[kj] - dot) * scale;
                        if ds == 0.0 {
                            continue;
                        }
                        let k_row = &cache.k.data()
                            [(bi * t + kj) * d + off..(bi * t + kj) * d + off + dh];
                        let q_row = &cache.q.data()
                            [(bi * t + qi) * d + off..(bi * t + qi) * d + off + dh];
                        let dq_row =
                            &mut dq[(bi * t + qi) * d + off..(bi * t + qi) * d + off + dh];
                        for c in 0..dh {
                            dq_row[c] += ds * k_row[c];
                        }
                        let dk_row =
                            &mut dk[(bi * t + kj) * d + off..(bi * t + kj) * d + off + dh];
                        for c in 0..dh {
                            dk_row[c] += ds * q_row[c];
                        }
                    }
                }
            }
        }

        let dxq = self.wq.backward(&Tensor::from_vec(vec![b * t, d], dq)?)?;
        let dxk = self.wk.backward(&Tensor::from_vec(vec![b * t, d], dk)?)?;
        let dxv = self.wv.backward(&Tensor::from_vec(vec![b * t, d], dv)?)?;
        dxq.add(&dxk)?.add(&dxv)
    }

    fn params(&self) -> Vec<&Param> {
        vec![
            &self.wq.w, &self.wq.b, &self.wk.w, &self.wk.b, &self.wv.w, &self.wv.b, &self.wo.w,
            &self.wo.b,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.wq.w,
            &mut self.wq.b,
            &mut self.wk.w,
            &mut self.wk.b,
            &mut self.wv.w,
            &mut self.wv.b,
            &mut self.wo.w,
            &mut self.wo.b,
        ]
    }
}

/// One post-norm encoder layer:
/// `y = LN1(x + Drop(Attn(x)))`, `out = LN2(y + Drop(FFN(y)))`
/// with `FFN(y) = ReLU(y W1 + b1) W2 + b2`.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    attn: MultiHeadAttention,
    drop_attn: Dropout,
    ln1: LayerNorm,
    ffn1: Linear,
    ffn2: Linear,
    drop_ffn: Dropout,
    ln2: LayerNorm,
    relu_pre: Option<Tensor>,
}

impl EncoderLayer {
    pub fn new(d_model: usize, heads: usize, dropout: f64, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            attn: MultiHeadAttention::new(d_model, heads, rng)?,
            drop_attn: Dropout::new(dropout)?,
            ln1: LayerNorm::new("ln1", d_model),
            ffn1: Linear::new("ffn.w1", d_model, d_model, rng)?,
            ffn2: Linear::new("ffn.w2", d_model, d_model, rng)?,
            drop_ffn: Dropout::new(dropout)?,
            ln2: LayerNorm::new("ln2", d_model),
            relu_pre: None,
        })
    }

    pub fn forward(
        &mut self,
        x: &Tensor,
        b: usize,
        t: usize,
        mask: &Mask,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<Tensor> {
        let a = self.attn.forward(x, b, t, mask)?;
        let a = self.drop_attn.forward(&a, rng.as_deref_mut());
        let y = self.ln1.forward(&x.add(&a)?)?;

        let pre = self.ffn1.forward(&y)?;
        let act = pre.map(|v| v.max(0.0));
        self.relu_pre = Some(pre);
        let f = self.ffn2.forward(&act)?;
        let f = self.drop_ffn.forward(&f, rng);
        self.ln2.forward(&y.add(&f)?)
    }

    pub fn backward(&mut self, dout: &Tensor) -> Result<Tensor> {
        let dsum2 = self.ln2.backward(dout)?;
        let df = self.drop_ffn.backward(&dsum2);
        let dact = self.ffn2.backward(&df)?;
        let pre = self
            .relu_pre
            .take()
            .ok_or_else(|| Error::Contract("encoder backward before forward".to_string()))?;
        let mut dpre = dact;
        for (g, &p) in dpre.data_mut().iter_mut().zip(pre.data()) {
            if p <= 0.0 {
                *g = 0.0;
            }
        }
        let dy_ffn = self.ffn1.backward(&dpre)?;
        let dy = dsum2.add(&dy_ffn)?;

        let dsum1 = self.ln1.backward(&dy)?;
        let da = self.drop_attn.backward(&dsum1);
        let dx_attn = self.attn.backward(&da)?;
        dsum1.add(&dx_attn)
    }

    fn params(&self) -> Vec<&Param> {
        let mut p = self.attn.params();
        p.push(&self.ln1.scale);
        p.push(&self.ln1.shift);
        p.push(&self.ffn1.w);
        p.push(&self.ffn1.b);
        p.push(&self.ffn2.w);
        p.push(&self.ffn2.b);
        p.push(&self.ln2.scale);
        p.push(&self.ln2.shift);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.attn.params_mut();
        p.push(&mut self.ln1.scale);
        p.push(&mut self.ln1.shift);
        p.push(&mut self.ffn1.w);
        p.push(&mut self.ffn1.b);
        p.push(&mut self.ffn2.w);
        p.push(&mut self.ffn2.b);
        p.push(&mut self.ln2.scale);
        p.push(&mut self.ln2.shift);
        p
    }
}

#[derive(Debug, Clone)]
pub struct TransformerClassifier {
    input_dim: usize,
    d_model: usize,
    heads: usize,
    max_len: usize,
    proj: Linear,
    pe: Tensor,
    drop_in: Dropout,
    layer: EncoderLayer,
    pool: MaskedMeanPool,
    head: Linear,
    cache_bt: Option<(usize, usize)>,
}

impl TransformerClassifier {
    pub fn new(
        input_dim: usize,
        d_model: usize,
        heads: usize,
        max_len: usize,
        dropout: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if input_dim == 0 || d_model == 0 || max_len == 0 {
            return Err(Error::Parameter(
                "transformer dimensions must be positive".to_string(),
            ));
        }
        Ok(Self {
            input_dim,
            d_model,
            heads,
            max_len,
            proj: Linear::new("proj", input_dim, d_model, rng)?,
            pe: positional_encoding(max_len, d_model)?,
            drop_in: Dropout::new(dropout)?,
            layer: EncoderLayer::new(d_model, heads, dropout, rng)?,
            pool: MaskedMeanPool::default(),
            head: Linear::new("head", d_model, 1, rng)?,
            cache_bt: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn dropout_rate(&self) -> f64 {
        self.drop_in.rate
    }

    pub fn forward(
        &mut self,
        x: &Tensor,
        mask: &Mask,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<Vec<f64>> {
        if x.rank() != 3 || x.shape()[2] != self.input_dim {
            return Err(Error::Dimension(format!(
                "transformer expects input [batch, time, {}], got {:?}",
                self.input_dim,
                x.shape()
            )));
        }
        let (b, t) = (x.shape()[0], x.shape()[1]);
        if mask.shape() != [b, t] {
            return Err(Error::Dimension(format!(
                "mask {:?} does not match input [{b}, {t}]",
                mask.shape()
            )));
        }
        if t > self.max_len {
            return Err(Error::Capacity(format!(
                "sequence length {t} exceeds positional table capacity {}",
                self.max_len
            )));
        }
        if !x.all_finite() {
            return Err(Error::Numeric(
                "non-finite value in transformer input".to_string(),
            ));
        }

        let xs = x.scale(INPUT_SCALE).reshaped(vec![b * t, self.input_dim])?;
        let mut h = self.proj.forward(&xs)?;
        let d = self.d_model;
        for bi in 0..b {
            for ti in 0..t {
                let row = &mut h.data_mut()[(bi * t + ti) * d..(bi * t + ti + 1) * d];
                let pe_row = &self.pe.data()[ti * d..(ti + 1) * d];
                for (hv, &pv) in row.iter_mut().zip(pe_row) {
                    *hv += pv;
                }
            }
        }
        let h = self.drop_in.forward(&h, rng.as_deref_mut());
        let enc = self.layer.forward(&h, b, t, mask, rng)?;
        let pooled = self.pool.forward(&enc.reshaped(vec![b, t, d])?, mask)?;
        let logits = self.head.forward(&pooled)?;
        self.cache_bt = Some((b, t));
        Ok(logits.into_data())
    }

    pub fn backward(&mut self, dlogits: &[f64]) -> Result<()> {
        let (b, t) = self
            .cache_bt
            .take()
            .ok_or_else(|| Error::Contract("transformer backward before forward".to_string()))?;
        if dlogits.len() != b {
            return Err(Error::Dimension(format!(
                "expected {} logit gradients, got {}",
                b,
                dlogits.len()
            )));
        }
        let d = self.d_model;
        let dlogit = Tensor::from_vec(vec![b, 1], dlogits.to_vec())?;
        let dpooled = self.head.backward(&dlogit)?;
        let denc = self.pool.backward(&dpooled, t)?.reshaped(vec![b * t, d])?;
        let dh = self.layer.backward(&denc)?;
        let dh = self.drop_in.backward(&dh);
        self.proj.backward(&dh)?;
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut p = vec![&self.proj.w, &self.proj.b];
        p.extend(self.layer.params());
        p.push(&self.head.w);
        p.push(&self.head.b);
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = vec![&mut self.proj.w, &mut self.proj.b];
        p.extend(self.layer.params_mut());
        p.push(&mut self.head.w);
        p.push(&mut self.head.b);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_encoding_first_row_alternates() {
        let pe = positional_encoding(4, 8).unwrap();
        assert_eq!(&pe.data()[0..8], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn positional_encoding_shape_and_known_value() {
        let pe = positional_encoding(722, 8).unwrap();
        assert_eq!(pe.shape(), &[722, 8]);
        assert!((pe.data()[8] - 1.0f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn positional_encoding_rejects_odd_width() {
        assert!(matches!(positional_encoding(10, 7), Err(Error::Parameter(_))));
    }

    #[test]
    fn positional_encoding_formula_spot_checks() {
        let pe = positional_encoding(10, 8).unwrap();
        let expect_sin = |pos: f64, i: f64| (pos / 10000f64.powf(2.0 * i / 8.0)).sin();
        let expect_cos = |pos: f64, i: f64| (pos / 10000f64.powf(2.0 * i / 8.0)).cos();
        assert!((pe.data()[3 * 8 + 2] - expect_sin(3.0, 1.0)).abs() < 1e-15);
        assert!((pe.data()[3 * 8 + 3] - expect_cos(3.0, 1.0)).abs() < 1e-15);
        assert!((pe.data()[7 * 8 + 6] - expect_sin(7.0, 3.0)).abs() < 1e-15);
        assert!((pe.data()[7 * 8 + 7] - expect_cos(7.0, 3.0)).abs() < 1e-15);
    }

    #[test]
    fn layer_norm_standardizes_rows() {
        let mut ln = LayerNorm::new("t", 4);
        let x = Tensor::from_vec(vec![2, 4], vec![1.0, 2.0, 3.0, 4.0, -5.0, 0.0, 5.0, 10.0])
            .unwrap();
        let y = ln.forward(&x).unwrap();
        for r in 0..2 {
            let row = &y.data()[r * 4..(r + 1) * 4];
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4, "variance {var}");
        }
    }

    #[test]
    fn rejects_sequences_beyond_capacity() {
        let mut rng = SeededRng::new(1);
        let mut m = TransformerClassifier::new(2, 8, 4, 6, 0.3, &mut rng).unwrap();
        let x = Tensor::zeros(vec![1, 7, 2]);
        let mask = Mask::from_vec(vec![1, 7], vec![true; 7]).unwrap();
        match m.forward(&x, &mask, None) {
            Err(Error::Capacity(msg)) => assert!(msg.contains('7') && msg.contains('6')),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn padded_steps_do_not_change_logits() {
        let mut rng = SeededRng::new(21);
        let mut m = TransformerClassifier::new(2, 8, 4, 722, 0.3, &mut rng).unwrap();
        let vals: Vec<f64> = (0..12).map(|v| (v * 9 % 100) as f64).collect();
        let x = Tensor::from_vec(vec![1, 6, 2], vals.clone()).unwrap();
        let mask = Mask::from_vec(vec![1, 6], vec![true; 6]).unwrap();
        let base = m.forward(&x, &mask, None).unwrap();

        let mut padded = vals;
        padded.extend_from_slice(&[-1.0; 8]);
        let xp = Tensor::from_vec(vec![1, 10, 2], padded).unwrap();
        let mut mv = vec![true; 6];
        mv.extend_from_slice(&[false; 4]);
        let mp = Mask::from_vec(vec![1, 10], mv).unwrap();
        let got = m.forward(&xp, &mp, None).unwrap();
        assert!(
            (base[0] - got[0]).abs() < 1e-9,
            "padding shifted logit: {} vs {}",
            base[0],
            got[0]
        );
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let mut rng = SeededRng::new(8);
        let mut m = TransformerClassifier::new(2, 8, 4, 722, 0.3, &mut rng).unwrap();
        let x = Tensor::from_vec(vec![2, 4, 2], (0..16).map(|v| v as f64 * 3.0).collect()).unwrap();
        let mask = Mask::from_vec(vec![2, 4], vec![true; 8]).unwrap();
        let a = m.forward(&x, &mask, None).unwrap();
        let b = m.forward(&x, &mask, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_head_attention_matches_hand_computation() {
        let mut rng = SeededRng::new(2);
        let mut attn = MultiHeadAttention::new(2, 1, &mut rng).unwrap();
        attn.wq.w.value = Tensor::identity(2);
        attn.wq.b.value = Tensor::zeros(vec![2]);
        attn.wk.w.value = Tensor::identity(2);
        attn.wk.b.value = Tensor::zeros(vec![2]);
        attn.wv.w.value = Tensor::identity(2);
        attn.wv.b.value = Tensor::zeros(vec![2]);
        attn.wo.w.value = Tensor::identity(2);
        attn.wo.b.value = Tensor::zeros(vec![2]);

        let x = Tensor::from_vec(vec![2, 2], vec![1.0, 0.0, 0.0, 2.0]).unwrap();
        let mask = Mask::from_vec(vec![1, 2], vec![true, true]).unwrap();
        let out = attn.forward(&x, 1, 2, &mask).unwrap();

        // With identity projections: scores = x x^T / sqrt(2), then
        // softmax rows weight the value rows (= x) directly.
        let s = 1.0 / 2.0f64.sqrt();
        let row0 = [1.0 * s, 0.0];
        let row1 = [0.0, 4.0 * s];
        let soft = |r: [f64; 2]| {
            let m = r[0].max(r[1]);
            let e0 = (r[0] - m).exp();
            let e1 = (r[1] - m).exp();
            [e0 / (e0 + e1), e1 / (e0 + e1)]
        };
        let w0 = soft(row0);
        let w1 = soft(row1);
        let expect = [
            w0[0] * 1.0,
            w0[1] * 2.0,
            w1[0] * 1.0,
            w1[1] * 2.0,
        ];
        for (got, want) in out.data().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn zeroed_sublayers_reduce_to_double_layer_norm() {
        let mut rng = SeededRng::new(6);
        let d = 4;
        let mut layer = EncoderLayer::new(d, 2, 0.3, &mut rng).unwrap();
        for p in layer.attn.params_mut() {
            p.value.data_mut().fill(0.0);
        }
        layer.ffn1.w.value.data_mut().fill(0.0);
        layer.ffn1.b.value.data_mut().fill(0.0);
        layer.ffn2.w.value.data_mut().fill(0.0);
        layer.ffn2.b.value.data_mut().fill(0.0);

        let x = Tensor::from_vec(vec![2, 4], vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.5, 2.0, 8.0])
            .unwrap();
        let mask = Mask::from_vec(vec![1, 2], vec![true, true]).unwrap();
        let got = layer.forward(&x, 1, 2, &mask, None).unwrap();

        let mut ln_a = LayerNorm::new("a", d);
        let mut ln_b = LayerNorm::new("b", d);
        let want = ln_b.forward(&ln_a.forward(&x).unwrap()).unwrap();
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn batch_permutation_permutes_logits() {
        let mut rng = SeededRng::new(13);
        let mut m = TransformerClassifier::new(2, 8, 4, 722, 0.3, &mut rng).unwrap();
        let a: Vec<f64> = (0..8).map(|v| v as f64 * 7.0 % 100.0).collect();
        let b: Vec<f64> = (0..8).map(|v| v as f64 * 13.0 % 100.0).collect();
        let mut ab = a.clone();
        ab.extend_from_slice(&b);
        let mut ba = b.clone();
        ba.extend_from_slice(&a);
        let mask = Mask::from_vec(vec![2, 4], vec![true; 8]).unwrap();
        let x_ab = Tensor::from_vec(vec![2, 4, 2], ab).unwrap();
        let x_ba = Tensor::from_vec(vec![2, 4, 2], ba).unwrap();
        let l_ab = m.forward(&x_ab, &mask, None).unwrap();
        let l_ba = m.forward(&x_ba, &mask, None).unwrap();
        assert_eq!(l_ab[0], l_ba[1]);
        assert_eq!(l_ab[1], l_ba[0]);
    }

    #[test]
    fn attention_weights_are_uniform_with_zero_query_weights() {
        // Zeroing Wq and its bias makes all scores zero, so attention over
        // valid keys must be exactly uniform.
        let mut rng = SeededRng::new(4);
        let mut attn = MultiHeadAttention::new(4, 2, &mut rng).unwrap();
        attn.wq.w.value = Tensor::zeros(vec![4, 4]);
        attn.wq.b.value = Tensor::zeros(vec![4]);
        let x = Tensor::from_vec(vec![3, 4], (0..12).map(|v| v as f64 * 0.1).collect()).unwrap();
        let mask = Mask::from_vec(vec![1, 3], vec![true, true, false]).unwrap();
        attn.forward(&x, 1, 3, &mask).unwrap();
        let cache = attn.cache.as_ref().unwrap();
        for w in &cache.weights {
            for qi in 0..3 {
                let row = &w.data()[qi * 3..(qi + 1) * 3];
                assert!((row[0] - 0.5).abs() < 1e-12);
                assert!((row[1] - 0.5).abs() < 1e-12);
                assert_eq!(row[2], 0.0);
            }
        }
    }
}
