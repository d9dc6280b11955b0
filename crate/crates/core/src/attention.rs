//! Single softmax self-attention layer and its input-to-state Jacobian.
//!
//! The layer computes `h_t = sum_i w(i,t) W_V x_i` where the weights are a
//! softmax over bilinear scores `beta (W_Q x_i)^T (W_K x_t)`, normalized over
//! the admissible source positions `i` (all of them, or `i <= t` under
//! causal masking). The Jacobian `dh_{t+k}/dx_t` is assembled from the
//! softmax derivative and the bilinear score derivatives and is validated
//! against central finite differences.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::matrix::{check_square_finite, SquareMatrix};

/// Which source positions each query position may attend to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Masking {
    /// Every position attends to the whole sequence.
    Full,
    /// Position `t` attends to positions `i <= t`.
    Causal,
}

impl Masking {
    fn admissible(self, t: usize, len: usize) -> std::ops::Range<usize> {
        match self {
            Masking::Full => 0..len,
            Masking::Causal => 0..t + 1,
        }
    }
}

/// Query/key/value maps plus the score scaling factor.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub w_q: SquareMatrix,
    pub w_k: SquareMatrix,
    pub w_v: SquareMatrix,
    /// Score scale; `1/sqrt(d)` by convention. Zero is allowed and yields
    /// uniform weights, which is useful in tests.
    pub beta: f64,
}

impl AttentionParams {
    pub fn new(w_q: SquareMatrix, w_k: SquareMatrix, w_v: SquareMatrix, beta: f64) -> Result<Self> {
        check_square_finite(&w_q, "AttentionParams")?;
        check_square_finite(&w_k, "AttentionParams")?;
        check_square_finite(&w_v, "AttentionParams")?;
        let d = w_q.nrows();
        if w_k.nrows() != d || w_v.nrows() != d {
            return Err(Error::invalid(format!(
                "AttentionParams: query/key/value maps disagree on dimension ({d}, {}, {})",
                w_k.nrows(),
                w_v.nrows()
            )));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::invalid(format!(
                "AttentionParams: beta must be finite and non-negative, got {beta}"
            )));
        }
        Ok(AttentionParams { w_q, w_k, w_v, beta })
    }

    /// The conventional scale for dimension `d`.
    pub fn default_beta(d: usize) -> f64 {
        1.0 / (d as f64).sqrt()
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }
}

/// Attention weights and hidden states for one input sequence.
#[derive(Debug, Clone)]
pub struct AttentionState {
    /// `weights[(i, t)]` is the weight of source `i` for query position `t`;
    /// each column sums to 1 over the admissible `i` and is zero elsewhere.
    pub weights: DMatrix<f64>,
    pub hidden: Vec<DVector<f64>>,
}

fn validate_inputs(inputs: &[DVector<f64>], d: usize) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::invalid("attention: empty input sequence"));
    }
    for (t, x) in inputs.iter().enumerate() {
        if x.len() != d {
            return Err(Error::invalid(format!(
                "attention: input {t} has dimension {}, expected {d}",
                x.len()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid(format!("attention: input {t} is non-finite")));
        }
    }
    Ok(())
}

/// Softmax weights for query position `t`, stabilized by subtracting the
/// largest admissible logit before exponentiation.
fn weight_column(
    logits: &DMatrix<f64>,
    t: usize,
    masking: Masking,
    len: usize,
) -> Vec<f64> {
    let range = masking.admissible(t, len);
    let max = range
        .clone()
        .map(|i| logits[(i, t)])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut col = vec![0.0; len];
    let mut total = 0.0;
    for i in range {
        let w = (logits[(i, t)] - max).exp();
        col[i] = w;
        total += w;
    }
    for w in &mut col {
        *w /= total;
    }
    col
}

/// Runs the attention layer over `inputs` (one `d`-vector per position).
pub fn attention_forward(
    inputs: &[DVector<f64>],
    params: &AttentionParams,
    masking: Masking,
) -> Result<AttentionState> {
    let d = params.dim();
    validate_inputs(inputs, d)?;
    let len = inputs.len();

    let queries: Vec<DVector<f64>> = inputs.iter().map(|x| &params.w_q * x).collect();
    let keys: Vec<DVector<f64>> = inputs.iter().map(|x| &params.w_k * x).collect();
    let values: Vec<DVector<f64>> = inputs.iter().map(|x| &params.w_v * x).collect();

    let mut logits = DMatrix::zeros(len, len);
    for i in 0..len {
        for t in 0..len {
            let l = params.beta * queries[i].dot(&keys[t]);
            if !l.is_finite() {
                return Err(Error::numerical(format!(
                    "attention_forward: non-finite logit at (i={i}, t={t})"
                )));
            }
            logits[(i, t)] = l;
        }
    }

    let mut weights = DMatrix::zeros(len, len);
    let mut hidden = Vec::with_capacity(len);
    for t in 0..len {
        let col = weight_column(&logits, t, masking, len);
        let mut h = DVector::zeros(d);
        for i in 0..len {
            weights[(i, t)] = col[i];
            if col[i] != 0.0 {
                h += &values[i] * col[i];
            }
        }
        hidden.push(h);
    }

    Ok(AttentionState { weights, hidden })
}

/// Closed-form Jacobian `dh_{t+k}/dx_t` (`d x d`, entry `(r, c)` is the
/// derivative of state component `r` with respect to input component `c`).
///
/// Differentiating `h_tau = sum_i w(i,tau) W_V x_i` gives one term from each
/// weight (softmax derivative times the score gradients, which involve `x_t`
/// as a query for `i = t` and as a key when `tau = t`) plus `w(t,tau) W_V`
/// from the value of position `t` itself.
pub fn attention_lrd(
    inputs: &[DVector<f64>],
    params: &AttentionParams,
    masking: Masking,
    t: usize,
    k: usize,
) -> Result<DMatrix<f64>> {
    let len = inputs.len();
    let tau = t.checked_add(k).ok_or_else(|| Error::invalid("attention_lrd: index overflow"))?;
    if t >= len || tau >= len {
        return Err(Error::invalid(format!(
            "attention_lrd: query (t={t}, k={k}) out of range for sequence length {len}"
        )));
    }
    let d = params.dim();
    let state = attention_forward(inputs, params, masking)?;

    let qk = params.w_q.transpose() * &params.w_k;
    let values: Vec<DVector<f64>> = inputs.iter().map(|x| &params.w_v * x).collect();
    let range = masking.admissible(tau, len);

    // Score gradients g_i = dL(i, tau)/dx_t as column vectors.
    let grad = |i: usize| -> DVector<f64> {
        let mut g = DVector::zeros(d);
        if i == t {
            g += &qk * &inputs[tau] * params.beta;
        }
        if tau == t {
            g += qk.transpose() * &inputs[i] * params.beta;
        }
        g
    };

    let mut mean_grad = DVector::zeros(d);
    for i in range.clone() {
        mean_grad += grad(i) * state.weights[(i, tau)];
    }

    let mut jac = DMatrix::zeros(d, d);
    for i in range {
        let w = state.weights[(i, tau)];
        let dw = (grad(i) - &mean_grad) * w;
        jac += &values[i] * dw.transpose();
    }
    // t is always admissible for tau >= t.
    jac += &params.w_v * state.weights[(t, tau)];
    Ok(jac)
}
