//! LSTM round-winner classifier.
//!
//! A single LSTM layer run over the damage series, dropout on the hidden
//! states, masked mean pooling over valid timesteps, and a linear head
//! producing one logit per round. Padded steps participate in the
//! recurrence (their inputs are the pad value) but are excluded from the
//! pooled average, so they cannot influence the logit.

use crate::error::{Error, Result};
use crate::tensor::{
    matmul_accum_kernel, matmul_kernel, matmul_nt_kernel, matmul_tn_accum_kernel, sigmoid, Mask,
    SeededRng, Tensor,
};

use super::{init_uniform, Dropout, Linear, MaskedMeanPool, Param, INPUT_SCALE};

/// Per-timestep values the backward pass replays.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    batch: usize,
    time: usize,
    steps: Vec<StepCache>,
}

#[derive(Debug, Clone)]
pub struct LstmClassifier {
    input_dim: usize,
    hidden_dim: usize,
    /// Input weights, `[input_dim, 4*hidden]`, gate blocks ordered i, f, g, o.
    w_x: Param,
    /// Recurrent weights, `[hidden, 4*hidden]`, same gate order.
    w_h: Param,
    /// One shared bias per gate unit, `[4*hidden]`.
    bias: Param,
    dropout: Dropout,
    pool: MaskedMeanPool,
    head: Linear,
    cache: Option<ForwardCache>,
}

impl LstmClassifier {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        dropout: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Parameter(
                "lstm dimensions must be positive".to_string(),
            ));
        }
        Ok(Self {
            input_dim,
            hidden_dim,
            w_x: Param::new(
                "lstm.w_x",
                init_uniform(rng, vec![input_dim, 4 * hidden_dim], input_dim)?,
            ),
            w_h: Param::new(
                "lstm.w_h",
                init_uniform(rng, vec![hidden_dim, 4 * hidden_dim], hidden_dim)?,
            ),
            bias: Param::new("lstm.bias", Tensor::zeros(vec![4 * hidden_dim])),
            dropout: Dropout::new(dropout)?,
            pool: MaskedMeanPool::default(),
            head: Linear::new("head", hidden_dim, 1, rng)?,
            cache: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout.rate
    }

    pub fn forward(
        &mut self,
        x: &Tensor,
        mask: &Mask,
        rng: Option<&mut SeededRng>,
    ) -> Result<Vec<f64>> {
        if x.rank() != 3 || x.shape()[2] != self.input_dim {
            return Err(Error::Dimension(format!(
                "lstm expects input [batch, time, {}], got {:?}",
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
        if !x.all_finite() {
            return Err(Error::Numeric("non-finite value in lstm input".to_string()));
        }

        let h = self.hidden_dim;
        let in_dim = self.input_dim;
        let mut h_prev = vec![0.0; b * h];
        let mut c_prev = vec![0.0; b * h];
        let mut h_all = vec![0.0; b * t * h];
        let mut steps = Vec::with_capacity(t);
        let mut x_t = vec![0.0; b * in_dim];
        let mut gates = vec![0.0; b * 4 * h];

        for ti in 0..t {
            for bi in 0..b {
                for d in 0..in_dim {
                    x_t[bi * in_dim + d] = x.data()[(bi * t + ti) * in_dim + d] * INPUT_SCALE;
                }
            }
            matmul_kernel(&x_t, self.w_x.value.data(), b, in_dim, 4 * h, &mut gates);
            matmul_accum_kernel(&h_prev, self.w_h.value.data(), b, h, 4 * h, &mut gates);
            let bias = self.bias.value.data();
            for row in gates.chunks_mut(4 * h) {
                for (v, &bj) in row.iter_mut().zip(bias) {
                    *v += bj;
                }
            }

            let mut step = StepCache {
                x: x_t.clone(),
                h_prev: h_prev.clone(),
                c_prev: c_prev.clone(),
                i: vec![0.0; b * h],
                f: vec![0.0; b * h],
                g: vec![0.0; b * h],
                o: vec![0.0; b * h],
                tanh_c: vec![0.0; b * h],
            };
            for bi in 0..b {
                let row = &gates[bi * 4 * h..(bi + 1) * 4 * h];
                for j in 0..h {
                    let i_g = sigmoid(row[j]);
                    let f_g = sigmoid(row[h + j]);
                    let g_g = row[2 * h + j].tanh();
                    let o_g = sigmoid(row[3 * h + j]);
                    let c = f_g * c_prev[bi * h + j] + i_g * g_g;
                    let tc = c.tanh();
                    step.i[bi * h + j] = i_g;
                    step.f[bi * h + j] = f_g;
                    step.g[bi * h + j] = g_g;
                    step.o[bi * h + j] = o_g;
                    step.tanh_c[bi * h + j] = tc;
                    c_prev[bi * h + j] = c;
                    h_prev[bi * h + j] = o_g * tc;
                    h_all[(bi * t + ti) * h + j] = h_prev[bi * h + j];
                }
            }
            steps.push(step);
        }

        let h_tensor = Tensor::from_vec(vec![b, t, h], h_all)?;
        let dropped = self.dropout.forward(&h_tensor, rng);
        let pooled = self.pool.forward(&dropped, mask)?;
        let logits = self.head.forward(&pooled)?;
        self.cache = Some(ForwardCache {
            batch: b,
            time: t,
            steps,
        });
        Ok(logits.into_data())
    }

    pub fn backward(&mut self, dlogits: &[f64]) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::Contract("lstm backward before forward".to_string()))?;
        let (b, t, h) = (cache.batch, cache.time, self.hidden_dim);
        if dlogits.len() != b {
            return Err(Error::Dimension(format!(
                "expected {} logit gradients, got {}",
                b,
                dlogits.len()
            )));
        }

        let dlogit = Tensor::from_vec(vec![b, 1], dlogits.to_vec())?;
        let dpooled = self.head.backward(&dlogit)?;
        let ddropped = self.pool.backward(&dpooled, t)?;
        let dh_all = self.dropout.backward(&ddropped);

        let in_dim = self.input_dim;
        let mut dh_rec = vec![0.0; b * h];
        let mut dc_rec = vec![0.0; b * h];
        let mut dpre = vec![0.0; b * 4 * h];
        for ti in (0..t).rev() {
            let step = &cache.steps[ti];
            for bi in 0..b {
                for j in 0..h {
                    let k = bi * h + j;
                    let dh = dh_all.data()[(bi * t + ti) * h + j] + dh_rec[k];
                    let tc = step.tanh_c[k];
                    let o = step.o[k];
                    let dc = dh * o * (1.0 - tc * tc) + dc_rec[k];
                    let i_g = step.i[k];
                    let f_g = step.f[k];
                    let g_g = step.g[k];
                    let row = &mut dpre[bi * 4 * h..(bi + 1) * 4 * h];
                    row[j] = dc * g_g * i_g * (1.0 - i_g);
                    row[h + j] = dc * step.c_prev[k] * f_g * (1.0 - f_g);
                    row[2 * h + j] = dc * i_g * (1.0 - g_g * g_g);
                    row[3 * h + j] = dh * tc * o * (1.0 - o);
                    dc_rec[k] = dc * f_g;
                }
            }
            matmul_tn_accum_kernel(&step.x, &dpre, b, in_dim, 4 * h, self.w_x.grad.data_mut());
            matmul_tn_accum_kernel(
                &step.h_prev,
                &dpre,
                b,
                h,
                4 * h,
                self.w_h.grad.data_mut(),
            );
            let db = self.bias.grad.data_mut();
            for row in dpre.chunks(4 * h) {
                for (g, &d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            matmul_nt_kernel(&dpre, self.w_h.value.data(), b, 4 * h, h, &mut dh_rec);
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w_x, &self.w_h, &self.bias, &self.head.w, &self.head.b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_x,
            &mut self.w_h,
            &mut self.bias,
            &mut self.head.w,
            &mut self.head.b,
        ]
    }
}
