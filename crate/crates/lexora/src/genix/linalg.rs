//! Dense f64 tensors and the handful of kernels the network is built
//! from. Weights are stored `[out, in]` row-major so that every product
//! the forward and backward passes need walks rows contiguously, which
//! the autovectorizer handles well.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Tensor {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Tensor {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * cols);
        for r in rows {
            assert_eq!(r.len(), cols);
            data.extend(r);
        }
        Tensor { rows: n, cols, data }
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }

    /// Append one row; the tensor may start with zero rows.
    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// y += x · wᵀ, with x `[n, k]`, w `[m, k]`, y `[n, m]`.
///
/// This is the forward projection: both operands stream row-wise.
pub fn matmul_nt(x: &Tensor, w: &Tensor, y: &mut Tensor) {
    assert_eq!(x.cols, w.cols, "inner dims");
    assert_eq!((y.rows, y.cols), (x.rows, w.rows), "output shape");
    let k = x.cols;
    for i in 0..x.rows {
        let xi = x.row(i);
        let yi = y.row_mut(i);
        for (j, yij) in yi.iter_mut().enumerate() {
            *yij += dot(xi, &w.data[j * k..(j + 1) * k]);
        }
    }
}

/// Dot product in four parallel accumulators: f64 addition cannot be
/// reordered by the compiler, so a single-accumulator loop serializes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let (a4, a_tail) = a.split_at(a.len() & !3);
    let (b4, b_tail) = b.split_at(a4.len());
    for (ca, cb) in a4.chunks_exact(4).zip(b4.chunks_exact(4)) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut rest = 0.0;
    for (xa, xb) in a_tail.iter().zip(b_tail) {
        rest += xa * xb;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + rest
}

/// c += aᵀ · b, with a `[n, m]`, b `[n, k]`, c `[m, k]`.
///
/// Weight-gradient shape: dw += dyᵀ · x.
pub fn matmul_tn(a: &Tensor, b: &Tensor, c: &mut Tensor) {
    assert_eq!(a.rows, b.rows, "inner dims");
    assert_eq!((c.rows, c.cols), (a.cols, b.cols), "output shape");
    for i in 0..a.rows {
        let ai = a.row(i);
        let bi = b.row(i);
        for (j, &aij) in ai.iter().enumerate() {
            let cj = c.row_mut(j);
            for (ct, &bt) in cj.iter_mut().zip(bi) {
                *ct += aij * bt;
            }
        }
    }
}

/// c += a · b, with a `[n, m]`, b `[m, k]`, c `[n, k]`.
///
/// Input-gradient shape: dx += dy · w.
pub fn matmul_nn(a: &Tensor, b: &Tensor, c: &mut Tensor) {
    assert_eq!(a.cols, b.rows, "inner dims");
    assert_eq!((c.rows, c.cols), (a.rows, b.cols), "output shape");
    for i in 0..a.rows {
        let ai = a.row(i);
        let ci = c.row_mut(i);
        for (j, &aij) in ai.iter().enumerate() {
            let bj = b.row(j);
            for (ct, &bt) in ci.iter_mut().zip(bj) {
                *ct += aij * bt;
            }
        }
    }
}

pub const RMS_EPS: f64 = 1e-6;

/// Row-wise RMS normalization (no learned scale). Returns the normalized
/// tensor and the per-row reciprocal RMS needed by the backward pass.
pub fn rmsnorm(x: &Tensor) -> (Tensor, Vec<f64>) {
    let mut y = Tensor::zeros(x.rows, x.cols);
    let mut recip = Vec::with_capacity(x.rows);
    let n = x.cols as f64;
    for i in 0..x.rows {
        let xi = x.row(i);
        let ms = xi.iter().map(|v| v * v).sum::<f64>() / n;
        let r = 1.0 / (ms + RMS_EPS).sqrt();
        recip.push(r);
        for (yj, &xj) in y.row_mut(i).iter_mut().zip(xi) {
            *yj = xj * r;
        }
    }
    (y, recip)
}

/// dx += d(rmsnorm(x))/dx applied to dy, given the forward input and the
/// saved reciprocal RMS: dx_i += r·dy_i − (r³/n)·(Σ_j dy_j x_j)·x_i.
pub fn rmsnorm_backward(x: &Tensor, recip: &[f64], dy: &Tensor, dx: &mut Tensor) {
    let n = x.cols as f64;
    for i in 0..x.rows {
        let xi = x.row(i);
        let dyi = dy.row(i);
        let r = recip[i];
        let dot: f64 = dyi.iter().zip(xi).map(|(d, v)| d * v).sum();
        let coef = r * r * r * dot / n;
        for ((dxj, &dyj), &xj) in dx.row_mut(i).iter_mut().zip(dyi).zip(xi) {
            *dxj += r * dyj - coef * xj;
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// In-place row-wise softmax.
pub fn softmax_rows(x: &mut Tensor) {
    for i in 0..x.rows {
        softmax_slice(x.row_mut(i));
    }
}

pub fn softmax_slice(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Backward through a row-wise softmax: ds = p ⊙ (dp − Σ_j dp_j p_j).
pub fn softmax_backward(probs: &Tensor, dp: &Tensor) -> Tensor {
    let mut ds = Tensor::zeros(probs.rows, probs.cols);
    for i in 0..probs.rows {
        let p = probs.row(i);
        let d = dp.row(i);
        let dot: f64 = p.iter().zip(d).map(|(pv, dv)| pv * dv).sum();
        for ((s, &pv), &dv) in ds.row_mut(i).iter_mut().zip(p).zip(d) {
            *s = pv * (dv - dot);
        }
    }
    ds
}
