//! Neural building blocks and the two round-winner classifiers.
//!
//! Both models consume a batch as a `[batch, time, 2]` tensor of the two
//! players' cumulative damage percentages plus a `[batch, time]` validity
//! mask, and produce one logit per round. Forward passes cache what their
//! backward passes need; gradients accumulate into each [`Param`] until the
//! optimizer consumes and clears them.

pub mod lstm;
pub mod transformer;

use crate::error::{Error, Result};
use crate::tensor::{rng_uniform, Mask, SeededRng, Tensor};

pub use lstm::LstmClassifier;
pub use transformer::TransformerClassifier;

/// Damage percentages arrive in [0, 100]. Under unit-scale initialization
/// the gate and attention nonlinearities saturate at that magnitude, so
/// inputs are mapped onto [0, 1] at the model boundary.
pub(crate) const INPUT_SCALE: f64 = 0.01;

/// A trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }
}

/// Weight initialization used throughout: i.i.d. uniform on
/// (-1/sqrt(fan_in), +1/sqrt(fan_in)). Biases start at zero.
pub(crate) fn init_uniform(
    rng: &mut SeededRng,
    shape: Vec<usize>,
    fan_in: usize,
) -> Result<Tensor> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    rng_uniform(rng, shape, -bound, bound)
}

/// Fully connected layer, `y = x W + b`, over rank-2 inputs `[rows, in]`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
    cache_x: Option<Tensor>,
}

impl Linear {
    pub fn new(prefix: &str, in_dim: usize, out_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(Self {
            w: Param::new(
                format!("{prefix}.weight"),
                init_uniform(rng, vec![in_dim, out_dim], in_dim)?,
            ),
            b: Param::new(format!("{prefix}.bias"), Tensor::zeros(vec![out_dim])),
            cache_x: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.w.value.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.w.value.shape()[1]
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.shape()[1] != self.in_dim() {
            return Err(Error::Dimension(format!(
                "linear {} expects [rows, {}], got {:?}",
                self.w.name,
                self.in_dim(),
                x.shape()
            )));
        }
        let mut y = x.matmul(&self.w.value)?;
        let out_dim = self.out_dim();
        let b = self.b.value.data();
        for row in y.data_mut().chunks_mut(out_dim) {
            for (v, &bj) in row.iter_mut().zip(b) {
                *v += bj;
            }
        }
        self.cache_x = Some(x.clone());
        Ok(y)
    }

    /// Accumulates dW and db, returns dx. Must follow a forward call.
    pub fn backward(&mut self, dy: &Tensor) -> Result<Tensor> {
        let x = self
            .cache_x
            .as_ref()
            .ok_or_else(|| Error::Contract(format!("backward before forward on {}", self.w.name)))?;
        let rows = x.shape()[0];
        let (in_dim, out_dim) = (self.in_dim(), self.out_dim());
        if dy.shape() != [rows, out_dim] {
            return Err(Error::Dimension(format!(
                "linear {} backward expects [{rows}, {out_dim}], got {:?}",
                self.w.name,
                dy.shape()
            )));
        }
        crate::tensor::matmul_tn_accum_kernel(
            x.data(),
            dy.data(),
            rows,
            in_dim,
            out_dim,
            self.w.grad.data_mut(),
        );
        let db = self.b.grad.data_mut();
        for row in dy.data().chunks(out_dim) {
            for (g, &d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; rows * in_dim];
        crate::tensor::matmul_nt_kernel(dy.data(), self.w.value.data(), rows, out_dim, in_dim, &mut dx);
        Tensor::from_vec(vec![rows, in_dim], dx)
    }
}

/// Inverted dropout. In training mode each element is zeroed with
/// probability `rate` and survivors are scaled by 1/(1-rate), so the
/// expected activation matches evaluation mode, where this is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    cache: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        Ok(Self { rate, cache: None })
    }

    /// `rng: None` means evaluation mode (identity, no caching of a mask).
    pub fn forward(&mut self, x: &Tensor, rng: Option<&mut SeededRng>) -> Tensor {
        match rng {
            None => {
                self.cache = None;
                x.clone()
            }
            Some(rng) => {
                let keep_scale = 1.0 / (1.0 - self.rate);
                let mult: Vec<f64> = (0..x.numel())
                    .map(|_| {
                        if rng.next_f64() >= self.rate {
                            keep_scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mut y = x.clone();
                for (v, &m) in y.data_mut().iter_mut().zip(&mult) {
                    *v *= m;
                }
                self.cache = Some(mult);
                y
            }
        }
    }

    pub fn backward(&self, dy: &Tensor) -> Tensor {
        match &self.cache {
            None => dy.clone(),
            Some(mult) => {
                let mut dx = dy.clone();
                for (v, &m) in dx.data_mut().iter_mut().zip(mult) {
                    *v *= m;
                }
                dx
            }
        }
    }
}

/// Mean over valid timesteps: `[b, t, h]` with mask `[b, t]` to `[b, h]`.
#[derive(Debug, Clone, Default)]
pub struct MaskedMeanPool {
    cache: Option<(Mask, Vec<f64>)>,
}

impl MaskedMeanPool {
    pub fn forward(&mut self, x: &Tensor, mask: &Mask) -> Result<Tensor> {
        if x.rank() != 3 || mask.shape() != [x.shape()[0], x.shape()[1]] {
            return Err(Error::Dimension(format!(
                "masked mean pool on x {:?} with mask {:?}",
                x.shape(),
                mask.shape()
            )));
        }
        let (b, t, h) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut out = vec![0.0; b * h];
        let mut counts = vec![0.0; b];
        for bi in 0..b {
            let mut count = 0.0;
            for ti in 0..t {
                if mask.data()[bi * t + ti] {
                    count += 1.0;
                    let row = &x.data()[(bi * t + ti) * h..(bi * t + ti + 1) * h];
                    for (o, &v) in out[bi * h..(bi + 1) * h].iter_mut().zip(row) {
                        *o += v;
                    }
                }
            }
            if count == 0.0 {
                return Err(Error::Contract(format!(
                    "batch row {bi} has no valid timesteps to pool"
                )));
            }
            for o in out[bi * h..(bi + 1) * h].iter_mut() {
                *o /= count;
            }
            counts[bi] = count;
        }
        self.cache = Some((mask.clone(), counts));
        Tensor::from_vec(vec![b, h], out)
    }

    pub fn backward(&self, dpool: &Tensor, t: usize) -> Result<Tensor> {
        let (mask, counts) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Contract("pool backward before forward".to_string()))?;
        let (b, h) = (dpool.shape()[0], dpool.shape()[1]);
        let mut dx = vec![0.0; b * t * h];
        for bi in 0..b {
            let drow = &dpool.data()[bi * h..(bi + 1) * h];
            for ti in 0..t {
                if mask.data()[bi * t + ti] {
                    let out = &mut dx[(bi * t + ti) * h..(bi * t + ti + 1) * h];
                    for (o, &d) in out.iter_mut().zip(drow) {
                        *o = d / counts[bi];
                    }
                }
            }
        }
        Tensor::from_vec(vec![b, t, h], dx)
    }
}

/// Either of the two sequence classifiers behind one interface.
#[derive(Debug, Clone)]
pub enum Model {
    Lstm(LstmClassifier),
    Transformer(TransformerClassifier),
}

impl Model {
    /// LSTM classifier at the published architecture (2 inputs, 8 hidden).
    pub fn lstm(rng: &mut SeededRng, dropout: f64) -> Result<Self> {
        Ok(Model::Lstm(LstmClassifier::new(2, 8, dropout, rng)?))
    }

    /// Transformer classifier at the published architecture
    /// (2 inputs, model width 8, 4 heads, positions up to 722).
    pub fn transformer(rng: &mut SeededRng, dropout: f64) -> Result<Self> {
        Ok(Model::Transformer(TransformerClassifier::new(
            2, 8, 4, 722, dropout, rng,
        )?))
    }

    pub fn architecture(&self) -> &'static str {
        match self {
            Model::Lstm(_) => "lstm",
            Model::Transformer(_) => "transformer",
        }
    }

    /// Padding value the architecture was trained to expect: the LSTM runs
    /// through padded steps so they must carry 0, the transformer masks them
    /// out and marks them with -1.
    pub fn pad_value(&self) -> f64 {
        match self {
            Model::Lstm(_) => 0.0,
            Model::Transformer(_) => -1.0,
        }
    }

    /// One logit per batch row. `rng: Some` enables dropout (training);
    /// `None` is deterministic evaluation.
    pub fn forward(
        &mut self,
        x: &Tensor,
        mask: &Mask,
        rng: Option<&mut SeededRng>,
    ) -> Result<Vec<f64>> {
        match self {
            Model::Lstm(m) => m.forward(x, mask, rng),
            Model::Transformer(m) => m.forward(x, mask, rng),
        }
    }

    /// Accumulates parameter gradients for the most recent forward call.
    pub fn backward(&mut self, dlogits: &[f64]) -> Result<()> {
        match self {
            Model::Lstm(m) => m.backward(dlogits),
            Model::Transformer(m) => m.backward(dlogits),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Model::Lstm(m) => m.params(),
            Model::Transformer(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Model::Lstm(m) => m.params_mut(),
            Model::Transformer(m) => m.params_mut(),
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }
}

/// Worst relative gradient error per parameter tensor.
#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_param: Vec<GradCheckEntry>,
    pub max_rel_err: f64,
}

/// Compares analytic gradients against central finite differences of the
/// BCE loss, with dropout disabled.
///
/// For each parameter tensor the reported figure is the largest absolute
/// disagreement normalized by the larger of the two gradients' magnitudes
/// (floored at 1e-3 so near-zero tensors do not amplify finite-difference
/// noise into spurious failures).
pub fn gradient_check(
    model: &mut Model,
    x: &Tensor,
    mask: &Mask,
    labels: &[f64],
    eps: f64,
) -> Result<GradCheckReport> {
    if eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "finite difference step must be positive, got {eps}"
        )));
    }

    model.zero_grads();
    let logits = model.forward(x, mask, None)?;
    let (_, dlogits) = crate::optim::bce_with_logits(&logits, labels)?;
    model.backward(&dlogits)?;
    let analytic: Vec<(String, Vec<f64>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.grad.data().to_vec()))
        .collect();
    model.zero_grads();

    let mut per_param = Vec::new();
    let mut max_rel_err: f64 = 0.0;
    for (pi, (name, a_grad)) in analytic.iter().enumerate() {
        let n = a_grad.len();
        let mut worst_abs: f64 = 0.0;
        let mut a_scale: f64 = 0.0;
        let mut n_scale: f64 = 0.0;
        for ei in 0..n {
            let orig = model.params()[pi].value.data()[ei];

            model.params_mut()[pi].value.data_mut()[ei] = orig + eps;
            let lp = model.forward(x, mask, None)?;
            let (loss_plus, _) = crate::optim::bce_with_logits(&lp, labels)?;

            model.params_mut()[pi].value.data_mut()[ei] = orig - eps;
            let lm = model.forward(x, mask, None)?;
            let (loss_minus, _) = crate::optim::bce_with_logits(&lm, labels)?;

            model.params_mut()[pi].value.data_mut()[ei] = orig;

            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            worst_abs = worst_abs.max((a_grad[ei] - numeric).abs());
            a_scale = a_scale.max(a_grad[ei].abs());
            n_scale = n_scale.max(numeric.abs());
        }
        let rel_err = worst_abs / a_scale.max(n_scale).max(1e-3);
        max_rel_err = max_rel_err.max(rel_err);
        per_param.push(GradCheckEntry {
            name: name.clone(),
            rel_err,
        });
    }
    Ok(GradCheckReport {
        per_param,
        max_rel_err,
    })
}
