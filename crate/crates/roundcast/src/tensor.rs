//! Dense row-major f64 tensors, the small set of kernels the model layers
//! are built on, and a seeded deterministic RNG.
//!
//! Everything here is plain safe Rust over flat `Vec<f64>` buffers. Shapes
//! are explicit; an operation that cannot reconcile its operand shapes
//! returns [`Error::Dimension`] naming both.

use crate::error::{Error, Result};

/// Dense n-dimensional array of f64 values in row-major order.
///
/// Invariant: `data.len() == shape.iter().product()` at all times.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor from a flat row-major buffer.
    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    /// All-zeros tensor of the given shape.
    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Tensor filled with a constant.
    pub fn filled(shape: Vec<usize>, value: f64) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            data: vec![value; n],
        }
    }

    /// Square identity matrix of side `n`.
    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same buffer under a new shape with the same element count.
    pub fn reshaped(&self, shape: Vec<usize>) -> Result<Self> {
        Self::from_vec(shape, self.data.clone())
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise sum with a same-shaped tensor.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Elementwise difference.
    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Multiplies every element by a scalar.
    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "elementwise op on shapes {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Elementwise numerically stable logistic sigmoid.
    pub fn sigmoid(&self) -> Tensor {
        self.map(sigmoid)
    }

    /// Elementwise tanh.
    pub fn tanh(&self) -> Tensor {
        self.map(f64::tanh)
    }

    /// Transpose of a rank-2 tensor.
    pub fn transposed(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::Dimension(format!(
                "transpose expects rank 2, got shape {:?}",
                self.shape
            )));
        }
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::from_vec(vec![n, m], out)
    }

    /// Matrix product.
    ///
    /// Accepts `[m,k] x [k,n]`, and the batched forms `[b,m,k] x [k,n]` and
    /// `[b,m,k] x [b,k,n]` sharing a leading batch dimension.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let mismatch = || {
            Error::Dimension(format!(
                "matmul on shapes {:?} and {:?}",
                self.shape, other.shape
            ))
        };
        match (self.rank(), other.rank()) {
            (2, 2) => {
                let (m, k) = (self.shape[0], self.shape[1]);
                let (k2, n) = (other.shape[0], other.shape[1]);
                if k != k2 {
                    return Err(mismatch());
                }
                let mut out = vec![0.0; m * n];
                matmul_kernel(&self.data, &other.data, m, k, n, &mut out);
                Tensor::from_vec(vec![m, n], out)
            }
            (3, 2) => {
                let (b, m, k) = (self.shape[0], self.shape[1], self.shape[2]);
                let (k2, n) = (other.shape[0], other.shape[1]);
                if k != k2 {
                    return Err(mismatch());
                }
                let mut out = vec![0.0; b * m * n];
                for bi in 0..b {
                    matmul_kernel(
                        &self.data[bi * m * k..(bi + 1) * m * k],
                        &other.data,
                        m,
                        k,
                        n,
                        &mut out[bi * m * n..(bi + 1) * m * n],
                    );
                }
                Tensor::from_vec(vec![b, m, n], out)
            }
            (3, 3) => {
                let (b, m, k) = (self.shape[0], self.shape[1], self.shape[2]);
                let (b2, k2, n) = (other.shape[0], other.shape[1], other.shape[2]);
                if b != b2 || k != k2 {
                    return Err(mismatch());
                }
                let mut out = vec![0.0; b * m * n];
                for bi in 0..b {
                    matmul_kernel(
                        &self.data[bi * m * k..(bi + 1) * m * k],
                        &other.data[bi * k * n..(bi + 1) * k * n],
                        m,
                        k,
                        n,
                        &mut out[bi * m * n..(bi + 1) * m * n],
                    );
                }
                Tensor::from_vec(vec![b, m, n], out)
            }
            _ => Err(mismatch()),
        }
    }
}

/// `out += a[m,k] * b[k,n]` is NOT what this does: out is overwritten.
/// Inner loops ordered i-k-j so the compiler can vectorize over j.
pub(crate) fn matmul_kernel(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    out.fill(0.0);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for j in 0..n {
                out_row[j] += a_ip * b_row[j];
            }
        }
    }
}

/// `out += a[m,k] * b[k,n]`, accumulating into out.
pub(crate) fn matmul_accum_kernel(
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for j in 0..n {
                out_row[j] += a_ip * b_row[j];
            }
        }
    }
}

/// `out = a[m,k] * b[n,k]^T`, i.e. a times b-transposed. Overwrites out.
pub(crate) fn matmul_nt_kernel(
    a: &[f64],
    b: &[f64],
    m: usize,
    k: usize,
    n: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for p in 0..k {
                s += a_row[p] * b_row[p];
            }
            out[i * n + j] = s;
        }
    }
}

/// `out += a[k,m]^T * b[k,n]`, accumulating into out. Used for weight
/// gradients where contributions from many rows sum into one matrix.
pub(crate) fn matmul_tn_accum_kernel(
    a: &[f64],
    b: &[f64],
    k: usize,
    m: usize,
    n: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let a_pi = a_row[i];
            if a_pi == 0.0 {
                continue;
            }
            let out_row = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                out_row[j] += a_pi * b_row[j];
            }
        }
    }
}

/// Numerically stable logistic sigmoid; never overflows, result in (0,1)
/// for finite input.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Boolean mask with an explicit shape, used alongside [`Tensor`] values.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    shape: Vec<usize>,
    data: Vec<bool>,
}

impl Mask {
    pub fn from_vec(shape: Vec<usize>, data: Vec<bool>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "mask shape {:?} needs {} elements, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }
}

/// Softmax over the last dimension restricted to mask-true positions.
///
/// Masked positions receive exactly zero weight; a row whose mask is all
/// false comes back as all zeros. Accepted mask shapes: identical to
/// `scores`; `[t]` against `[..., t]` (one mask for every row); or `[b, t]`
/// against `[b, q, t]` (per-batch key mask shared across rows).
pub fn masked_softmax(scores: &Tensor, mask: &Mask) -> Result<Tensor> {
    let t = *scores.shape().last().ok_or_else(|| {
        Error::Dimension("masked_softmax on a rank-0 tensor".to_string())
    })?;
    let rows = scores.numel() / t;

    // Resolve each row of scores to a row of the mask.
    let mask_row_for: Box<dyn Fn(usize) -> usize> = if mask.shape() == scores.shape() {
        Box::new(|r| r)
    } else if mask.shape() == [t] {
        Box::new(|_| 0)
    } else if scores.rank() == 3
        && mask.shape().len() == 2
        && mask.shape()[0] == scores.shape()[0]
        && mask.shape()[1] == t
    {
        let q = scores.shape()[1];
        Box::new(move |r| r / q)
    } else {
        return Err(Error::Dimension(format!(
            "mask shape {:?} does not broadcast to scores shape {:?}",
            mask.shape(),
            scores.shape()
        )));
    };

    let mut out = vec![0.0; scores.numel()];
    for r in 0..rows {
        let row = &scores.data()[r * t..(r + 1) * t];
        let mrow = &mask.data()[mask_row_for(r) * t..mask_row_for(r) * t + t];
        let mut max = f64::NEG_INFINITY;
        for (v, &keep) in row.iter().zip(mrow) {
            if keep && *v > max {
                max = *v;
            }
        }
        if max == f64::NEG_INFINITY {
            continue; // all-masked row stays zero
        }
        let out_row = &mut out[r * t..(r + 1) * t];
        let mut sum = 0.0;
        for ((o, v), &keep) in out_row.iter_mut().zip(row).zip(mrow) {
            if keep {
                let e = (v - max).exp();
                *o = e;
                sum += e;
            }
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    Tensor::from_vec(scores.shape().to_vec(), out)
}

/// Deterministic seeded random number generator (SplitMix64).
///
/// The generator is the SplitMix64 finalizer over a 64-bit counter state,
/// advancing by the golden-ratio increment. Identical seeds produce
/// identical draw sequences on every platform; there is no global state.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, state: seed }
    }

    /// The seed this generator was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent generator derived from this one's seed and a stream
    /// tag, without advancing this generator. Used so per-fold and
    /// per-epoch streams do not depend on execution order.
    pub fn derive(&self, stream: u64) -> SeededRng {
        SeededRng::new(splitmix_finalize(
            self.seed ^ stream.wrapping_mul(GOLDEN).rotate_left(17),
        ))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        splitmix_finalize(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Lemire multiply-shift; the bias for n far
    /// below 2^64 is negligible and the result is platform-independent.
    pub fn next_below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Tensor of i.i.d. uniform draws in [lo, hi); advances the generator.
pub fn rng_uniform(rng: &mut SeededRng, shape: Vec<usize>, lo: f64, hi: f64) -> Result<Tensor> {
    // partial_cmp keeps NaN bounds on the error path.
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::Parameter(format!(
            "uniform bounds must satisfy lo < hi, got [{}, {})",
            lo, hi
        )));
    }
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform(lo, hi)).collect();
    Tensor::from_vec(shape, data)
}
