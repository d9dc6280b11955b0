//! Long-range dependency analysis.
//!
//! The influence of input `x_t` on a later hidden state `h_{t+k}` is the
//! derivative `d h_{t+k} / d x_t`. This module provides that derivative
//! three ways: a central finite-difference oracle that works for every
//! model, closed forms for the state-space and interaction recurrences, and
//! per-gap norm profiles with an exponential decay-bound check for the
//! state-space case. The finite-difference route is the arbiter: every
//! closed form is required to match it.
//!
//! Indices are 0-based throughout: `t` is an input position and `k >= 0` the
//! gap, with `t + k` inside the sequence.

use nalgebra::{DMatrix, DVector};

use crate::attention::{attention_lrd, AttentionParams, Masking};
use crate::error::{Error, Result};
use crate::interaction::{interaction_scan, InteractionParams};
use crate::ssm::{ContinuousSsm, DiscretizedStep, StepPolicy};

/// A model whose hidden states can be differentiated with respect to one
/// input position.
#[derive(Debug, Clone, Copy)]
pub enum LrdModel<'a> {
    Ssm {
        model: &'a ContinuousSsm,
        inputs: &'a [f64],
        h0: &'a DVector<f64>,
    },
    Interaction {
        params: &'a InteractionParams,
        inputs: &'a [f64],
        h0: &'a DVector<f64>,
    },
    Attention {
        params: &'a AttentionParams,
        masking: Masking,
        inputs: &'a [DVector<f64>],
    },
}

impl LrdModel<'_> {
    pub fn sequence_len(&self) -> usize {
        match self {
            LrdModel::Ssm { inputs, .. } | LrdModel::Interaction { inputs, .. } => inputs.len(),
            LrdModel::Attention { inputs, .. } => inputs.len(),
        }
    }
}

/// One derivative request: which model, which input position, which gap.
#[derive(Debug, Clone, Copy)]
pub struct LrdQuery<'a> {
    pub model: LrdModel<'a>,
    pub t: usize,
    pub k: usize,
}

impl LrdQuery<'_> {
    fn validate(&self) -> Result<usize> {
        let len = self.model.sequence_len();
        let target = self
            .t
            .checked_add(self.k)
            .ok_or_else(|| Error::invalid("lrd: index overflow"))?;
        if self.t >= len || target >= len {
            return Err(Error::invalid(format!(
                "lrd: query (t={}, k={}) out of range for sequence length {len}",
                self.t, self.k
            )));
        }
        Ok(target)
    }
}

/// Derivative of one hidden state with respect to one input: a vector for
/// scalar-input models, a Jacobian for attention.
#[derive(Debug, Clone)]
pub enum LrdValue {
    Vector(DVector<f64>),
    Jacobian(DMatrix<f64>),
}

impl LrdValue {
    /// L2 norm (Frobenius for Jacobians).
    pub fn norm(&self) -> f64 {
        match self {
            LrdValue::Vector(v) => v.norm(),
            LrdValue::Jacobian(m) => m.norm(),
        }
    }

    /// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
    pub fn relative_deviation(&self, other: &LrdValue) -> f64 {
        match (self, other) {
            (LrdValue::Vector(a), LrdValue::Vector(b)) => relative_deviation(a, b),
            (LrdValue::Jacobian(a), LrdValue::Jacobian(b)) => relative_deviation(a, b),
            _ => f64::INFINITY,
        }
    }
}

/// `||a - b|| / max(||a||, ||b||)`, 0 when both vanish.
pub fn relative_deviation<R, C, S>(
    a: &nalgebra::Matrix<f64, R, C, S>,
    b: &nalgebra::Matrix<f64, R, C, S>,
) -> f64
where
    R: nalgebra::Dim,
    C: nalgebra::Dim,
    S: nalgebra::Storage<f64, R, C>,
{
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return 0.0;
    }
    let diff: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / scale
}

/// Default finite-difference step, scaled by the input magnitude at the
/// probed position.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central difference of a vector-valued function of one scalar.
pub fn central_difference<F>(f: F, x: f64, step: f64) -> Result<DVector<f64>>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("central_difference: bad step {step}")));
    }
    let plus = f(x + step)?;
    let minus = f(x - step)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Central-difference Jacobian of a vector-valued function of a vector,
/// one coordinate at a time; column `j` holds `d f / d x_j`.
pub fn central_difference_jacobian<F>(
    f: F,
    x: &DVector<f64>,
    step: f64,
) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        let mut probe = x.clone();
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        columns.push((plus - minus) / (2.0 * h));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, x.len(), |r, c| columns[c][r]))
}

/// Finite-difference derivative of `h_{t+k}` with respect to `x_t`: the
/// independent oracle every closed form is checked against. `step` is scaled
/// by `max(1, |x_t|)` for scalar inputs and per coordinate for attention.
pub fn lrd_finite_difference(query: &LrdQuery, step: f64) -> Result<LrdValue> {
    let target = query.validate()?;
    match query.model {
        LrdModel::Ssm { model, inputs, h0 } => {
            let h = step * inputs[query.t].abs().max(1.0);
            let d = central_difference(
                |x| {
                    let mut probe = inputs.to_vec();
                    probe[query.t] = x;
                    Ok(model.scan(&probe, h0)?.states[target].clone())
                },
                inputs[query.t],
                h,
            )?;
            Ok(LrdValue::Vector(d))
        }
        LrdModel::Interaction { params, inputs, h0 } => {
            let h = step * inputs[query.t].abs().max(1.0);
            let d = central_difference(
                |x| {
                    let mut probe = inputs.to_vec();
                    probe[query.t] = x;
                    Ok(interaction_scan(params, &probe, h0)?.states[target].clone())
                },
                inputs[query.t],
                h,
            )?;
            Ok(LrdValue::Vector(d))
        }
        LrdModel::Attention {
            params,
            masking,
            inputs,
        } => {
            let jac = central_difference_jacobian(
                |x| {
                    let mut probe = inputs.to_vec();
                    probe[query.t] = x.clone();
                    Ok(crate::attention::attention_forward(&probe, params, masking)?.hidden
                        [target]
                        .clone())
                },
                &inputs[query.t],
                step,
            )?;
            Ok(LrdValue::Jacobian(jac))
        }
    }
}

/// Closed-form derivative for the state-space recurrence:
/// the product of the transitions after `t` applied to the forcing at `t`,
/// `(prod_{j=t+1..t+k} a_bar_j) b_bar_t`. The empty product (`k = 0`) is the
/// identity.
///
/// Under a selective step policy this evaluates the same product formula,
/// ignoring the dependence of `b_bar_t` on `x_t`; it then differs from the
/// finite-difference derivative by exactly that omitted term.
pub fn lrd_ssm_closed_form(steps: &[DiscretizedStep], t: usize, k: usize) -> Result<DVector<f64>> {
    let target = t
        .checked_add(k)
        .ok_or_else(|| Error::invalid("lrd_ssm_closed_form: index overflow"))?;
    if target >= steps.len() {
        return Err(Error::invalid(format!(
            "lrd_ssm_closed_form: (t={t}, k={k}) out of range for {} steps",
            steps.len()
        )));
    }
    let mut v = steps[t].b_bar.clone();
    for step in &steps[t + 1..=target] {
        v = &step.a_bar * v;
    }
    Ok(v)
}

/// The three pieces of the interaction model's closed-form derivative; their
/// sum is the derivative itself. Splitting them keeps the initial-state
/// contribution separately testable.
struct InteractionLrdTerms {
    from_initial_state: DVector<f64>,
    from_earlier_inputs: DVector<f64>,
    from_probed_input: DVector<f64>,
}

fn interaction_lrd_terms(
    params: &InteractionParams,
    inputs: &[f64],
    h0: &DVector<f64>,
    t: usize,
    k: usize,
) -> Result<InteractionLrdTerms> {
    if !matches!(params.base.step_policy, StepPolicy::Fixed(_)) {
        return Err(Error::invalid(
            "lrd_interaction_closed_form: requires a fixed step policy",
        ));
    }
    let target = t
        .checked_add(k)
        .ok_or_else(|| Error::invalid("lrd_interaction_closed_form: index overflow"))?;
    if t >= inputs.len() || target >= inputs.len() {
        return Err(Error::invalid(format!(
            "lrd_interaction_closed_form: (t={t}, k={k}) out of range for {} inputs",
            inputs.len()
        )));
    }
    let steps = params.base.discretize_sequence(inputs)?;

    // Prefix pieces: the initial state propagated through the transitions
    // before t, and the forcing terms accumulated over the same range.
    let mut homogeneous = h0.clone();
    let mut forced = DVector::zeros(params.dim());
    for i in 0..t {
        let m = params.transition(&steps[i].a_bar, inputs[i]);
        homogeneous = &m * homogeneous;
        forced = &m * forced + &steps[i].b_bar * inputs[i];
    }

    // Suffix products applied to the two vectors they act on.
    let mut suffix_g = params.g.clone();
    let mut suffix_b = steps[t].b_bar.clone();
    for j in t + 1..=target {
        let m = params.transition(&steps[j].a_bar, inputs[j]);
        suffix_g = &m * suffix_g;
        suffix_b = &m * suffix_b;
    }

    let gain = 2.0 * inputs[t];
    Ok(InteractionLrdTerms {
        from_initial_state: &suffix_g * (gain * params.w.dot(&homogeneous)),
        from_earlier_inputs: &suffix_g * (gain * params.w.dot(&forced)),
        from_probed_input: suffix_b,
    })
}

/// Closed-form derivative for the interaction recurrence (fixed step only).
///
/// Differentiating the unrolled form with respect to `x_t` yields three
/// pieces: the rank-1 transition derivative `2 x_t g w^T` sandwiched between
/// the suffix products and (a) the propagated initial state, (b) each
/// forcing term from inputs before `t`, plus (c) the suffix products applied
/// to the forcing at `t` itself.
pub fn lrd_interaction_closed_form(
    params: &InteractionParams,
    inputs: &[f64],
    h0: &DVector<f64>,
    t: usize,
    k: usize,
) -> Result<DVector<f64>> {
    let terms = interaction_lrd_terms(params, inputs, h0, t, k)?;
    Ok(terms.from_initial_state + terms.from_earlier_inputs + terms.from_probed_input)
}

/// Norms of the derivative of `h_{t+k}` with respect to `x_t` for
/// `k = 0..=k_max`.
#[derive(Debug, Clone)]
pub struct LrdProfile {
    pub t: usize,
    /// `norms[k]` is the norm at gap `k`.
    pub norms: Vec<f64>,
    /// The derivatives themselves, when requested.
    pub raw: Option<Vec<LrdValue>>,
}

/// Closed-form derivative profile over gaps `k = 0..=k_max`.
///
/// Scalar-input models use one incremental suffix-product pass, so the whole
/// profile costs one matrix-vector product per gap.
pub fn lrd_profile(model: &LrdModel, t: usize, k_max: usize, keep_raw: bool) -> Result<LrdProfile> {
    LrdQuery { model: *model, t, k: k_max }.validate()?;
    let mut raw = keep_raw.then(Vec::new);
    let mut norms = Vec::with_capacity(k_max + 1);
    match model {
        LrdModel::Ssm { model, inputs, .. } => {
            let steps = model.discretize_sequence(inputs)?;
            let mut v = steps[t].b_bar.clone();
            for k in 0..=k_max {
                if k > 0 {
                    v = &steps[t + k].a_bar * v;
                }
                norms.push(v.norm());
                if let Some(raw) = raw.as_mut() {
                    raw.push(LrdValue::Vector(v.clone()));
                }
            }
        }
        LrdModel::Interaction { params, inputs, h0 } => {
            let terms = interaction_lrd_terms(params, inputs, h0, t, 0)?;
            let steps = params.base.discretize_sequence(inputs)?;
            let mut v =
                terms.from_initial_state + terms.from_earlier_inputs + terms.from_probed_input;
            for k in 0..=k_max {
                if k > 0 {
                    let m = params.transition(&steps[t + k].a_bar, inputs[t + k]);
                    v = &m * v;
                }
                norms.push(v.norm());
                if let Some(raw) = raw.as_mut() {
                    raw.push(LrdValue::Vector(v.clone()));
                }
            }
        }
        LrdModel::Attention {
            params,
            masking,
            inputs,
        } => {
            for k in 0..=k_max {
                let jac = attention_lrd(inputs, params, *masking, t, k)?;
                norms.push(jac.norm());
                if let Some(raw) = raw.as_mut() {
                    raw.push(LrdValue::Jacobian(jac));
                }
            }
        }
    }
    Ok(LrdProfile { t, norms, raw })
}

/// Index of an interior local maximum of `norms` at position `> min_k`,
/// if any: a gap whose norm strictly exceeds both neighbors.
pub fn interior_local_max(norms: &[f64], min_k: usize) -> Option<usize> {
    (min_k.max(1)..norms.len().saturating_sub(1))
        .find(|&k| norms[k] > norms[k - 1] && norms[k] > norms[k + 1])
}

/// One row of a decay-bound report.
#[derive(Debug, Clone, Copy)]
pub struct DecayCheckRow {
    pub k: usize,
    /// Norm at gap `k + 1`.
    pub lhs: f64,
    /// `exp(lambda1 * delta_{t+k+1})` times the norm at gap `k`, plus slack.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks the per-step decay inequality of the state-space derivative,
/// `||LRD(t+k+1, t)|| <= exp(lambda1 * delta_{t+k+1}) ||LRD(t+k, t)||`,
/// for `k = 0..k_max`, with a relative slack of `1e-9` for rounding.
/// `lambda1` is the largest eigenvalue of the shared generator.
pub fn check_decay_bound(
    steps: &[DiscretizedStep],
    t: usize,
    k_max: usize,
    lambda1: f64,
) -> Result<Vec<DecayCheckRow>> {
    let last = t
        .checked_add(k_max)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| Error::invalid("check_decay_bound: index overflow"))?;
    if last >= steps.len() {
        return Err(Error::invalid(format!(
            "check_decay_bound: need steps through index {last}, have {}",
            steps.len()
        )));
    }
    let mut rows = Vec::with_capacity(k_max + 1);
    let mut v = steps[t].b_bar.clone();
    let mut prev_norm = v.norm();
    for k in 0..=k_max {
        let step = &steps[t + k + 1];
        v = &step.a_bar * v;
        let lhs = v.norm();
        let rhs = (lambda1 * step.delta).exp() * prev_norm + 1e-9 * prev_norm;
        rows.push(DecayCheckRow {
            k,
            lhs,
            rhs,
            holds: lhs <= rhs,
        });
        prev_norm = lhs;
    }
    Ok(rows)
}
