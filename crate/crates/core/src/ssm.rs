//! Linear state-space recurrence with zero-order-hold discretization.
//!
//! The continuous system `dh/dt = A h + B x` is advanced over a step `delta`
//! by `h_t = a_bar h_{t-1} + b_bar x_t` with `a_bar = exp(delta A)`. The step
//! size is either fixed or an input-dependent softplus, which makes the
//! discretized matrices time-varying.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::matrix::{check_square_finite, matrix_exp, SquareMatrix};

/// Step-size policy for discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepPolicy {
    /// Constant step `delta` for every input (the time-invariant case).
    Fixed(f64),
    /// Input-dependent step `delta_t = softplus(a * x_t + c)`, positive for
    /// every finite input.
    Selective { a: f64, c: f64 },
}

/// Numerically stable `ln(1 + e^z)`.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Continuous single-input single-output state-space system.
#[derive(Debug, Clone)]
pub struct ContinuousSsm {
    /// State transition generator (H x H), units of one over time.
    pub a: SquareMatrix,
    /// Input map (H).
    pub b: DVector<f64>,
    /// Output map, acting as a row (H).
    pub c: DVector<f64>,
    pub step_policy: StepPolicy,
}

impl ContinuousSsm {
    pub fn new(
        a: SquareMatrix,
        b: DVector<f64>,
        c: DVector<f64>,
        step_policy: StepPolicy,
    ) -> Result<Self> {
        check_square_finite(&a, "ContinuousSsm")?;
        let h = a.nrows();
        if b.len() != h || c.len() != h {
            return Err(Error::invalid(format!(
                "ContinuousSsm: A is {h}x{h} but B has length {} and C length {}",
                b.len(),
                c.len()
            )));
        }
        if !b.iter().chain(c.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("ContinuousSsm: B or C has non-finite entries"));
        }
        if let StepPolicy::Fixed(delta) = step_policy {
            if !(delta.is_finite() && delta > 0.0) {
                return Err(Error::invalid(format!(
                    "ContinuousSsm: fixed step must be positive, got {delta}"
                )));
            }
        }
        Ok(ContinuousSsm {
            a,
            b,
            c,
            step_policy,
        })
    }

    /// State dimension H.
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Per-input step sizes under the configured policy.
    pub fn step_sizes(&self, inputs: &[f64]) -> Vec<f64> {
        match self.step_policy {
            StepPolicy::Fixed(delta) => vec![delta; inputs.len()],
            StepPolicy::Selective { a, c } => {
                inputs.iter().map(|&x| softplus(a * x + c)).collect()
            }
        }
    }

    /// Zero-order-hold discretization over one step.
    ///
    /// `a_bar = exp(delta A)`. `b_bar` is read off the top-right block of the
    /// exponential of the augmented matrix `[[delta A, delta B], [0, 0]]`,
    /// which equals `(delta A)^{-1} (exp(delta A) - I) delta B` when `A` is
    /// invertible and remains well defined when it is not.
    pub fn discretize_zoh(&self, delta: f64) -> Result<DiscretizedStep> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(format!(
                "discretize_zoh: step must be positive, got {delta}"
            )));
        }
        let h = self.dim();
        let scaled_a = &self.a * delta;
        let a_bar = matrix_exp(&scaled_a)?;

        let mut augmented = SquareMatrix::zeros(h + 1, h + 1);
        augmented.view_mut((0, 0), (h, h)).copy_from(&scaled_a);
        for i in 0..h {
            augmented[(i, h)] = delta * self.b[i];
        }
        let aug_exp = matrix_exp(&augmented)?;
        let b_bar = DVector::from_fn(h, |i, _| aug_exp[(i, h)]);

        if !(a_bar.iter().all(|x| x.is_finite()) && b_bar.iter().all(|x| x.is_finite())) {
            return Err(Error::numerical(format!(
                "discretize_zoh: non-finite discretization at delta {delta}"
            )));
        }
        Ok(DiscretizedStep { a_bar, b_bar, delta })
    }

    /// Discretized steps for a whole input sequence, one per input.
    pub fn discretize_sequence(&self, inputs: &[f64]) -> Result<Vec<DiscretizedStep>> {
        match self.step_policy {
            StepPolicy::Fixed(delta) => {
                let step = self.discretize_zoh(delta)?;
                Ok(vec![step; inputs.len()])
            }
            StepPolicy::Selective { .. } => self
                .step_sizes(inputs)
                .iter()
                .map(|&delta| self.discretize_zoh(delta))
                .collect(),
        }
    }

    /// Runs the recurrence `h_t = a_bar_t h_{t-1} + b_bar_t x_t` from `h0`.
    pub fn scan(&self, inputs: &[f64], h0: &DVector<f64>) -> Result<HiddenTrajectory> {
        let steps = self.prepare(inputs, h0)?;
        let mut h = h0.clone();
        let mut states = Vec::with_capacity(inputs.len());
        for (t, (&x, step)) in inputs.iter().zip(&steps).enumerate() {
            h = &step.a_bar * h + &step.b_bar * x;
            if !h.iter().all(|v| v.is_finite()) {
                return Err(Error::numerical(format!(
                    "scan: state became non-finite at step {}",
                    t + 1
                )));
            }
            states.push(h.clone());
        }
        Ok(HiddenTrajectory::from_states(h0.clone(), states, &self.c))
    }

    /// Evaluates the unrolled form of the recurrence,
    ///
    /// `h_t = (prod_{i=1..t} a_bar_i) h0
    ///        + sum_{i=1..t} (prod_{j=i+1..t} a_bar_j) b_bar_i x_i`,
    ///
    /// with empty products equal to the identity. Products are accumulated
    /// explicitly (suffix products grown right to left), which makes this an
    /// independent evaluation route from [`ContinuousSsm::scan`].
    pub fn unroll_closed_form(
        &self,
        inputs: &[f64],
        h0: &DVector<f64>,
    ) -> Result<HiddenTrajectory> {
        let steps = self.prepare(inputs, h0)?;
        let states = unroll_states(
            inputs,
            h0,
            |t| steps[t].a_bar.clone(),
            |t| &steps[t].b_bar,
        )?;
        Ok(HiddenTrajectory::from_states(h0.clone(), states, &self.c))
    }

    fn prepare(&self, inputs: &[f64], h0: &DVector<f64>) -> Result<Vec<DiscretizedStep>> {
        if h0.len() != self.dim() {
            return Err(Error::invalid(format!(
                "initial state has length {}, expected {}",
                h0.len(),
                self.dim()
            )));
        }
        if !inputs.iter().all(|x| x.is_finite()) || !h0.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("inputs and initial state must be finite"));
        }
        self.discretize_sequence(inputs)
    }
}

/// Per-step discretized pair.
#[derive(Debug, Clone)]
pub struct DiscretizedStep {
    pub a_bar: SquareMatrix,
    pub b_bar: DVector<f64>,
    pub delta: f64,
}

/// Hidden states and outputs of one recurrence run.
#[derive(Debug, Clone)]
pub struct HiddenTrajectory {
    pub initial: DVector<f64>,
    /// `states[t]` is the hidden state after consuming input `t` (0-based).
    pub states: Vec<DVector<f64>>,
    /// `outputs[t] = c . states[t]`.
    pub outputs: Vec<f64>,
}

impl HiddenTrajectory {
    pub(crate) fn from_states(
        initial: DVector<f64>,
        states: Vec<DVector<f64>>,
        c: &DVector<f64>,
    ) -> Self {
        let outputs = states.iter().map(|h| c.dot(h)).collect();
        HiddenTrajectory {
            initial,
            states,
            outputs,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Shared unrolled-form evaluator: for each `t`, accumulates suffix products
/// of the per-step transition matrices from the right and applies them to
/// the forcing terms. `transition(t)` is the matrix applied at step `t`
/// (0-based), `forcing(t)` the vector added at step `t` before scaling by
/// the input.
pub(crate) fn unroll_states<'a, M, F>(
    inputs: &[f64],
    h0: &DVector<f64>,
    transition: M,
    forcing: F,
) -> Result<Vec<DVector<f64>>>
where
    M: Fn(usize) -> SquareMatrix,
    F: Fn(usize) -> &'a DVector<f64>,
{
    let h = h0.len();
    let mut states = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        // suffix = prod_{j=i+1..t} M_j, grown as i walks down from t.
        let mut suffix = SquareMatrix::identity(h, h);
        let mut acc = DVector::zeros(h);
        for i in (0..=t).rev() {
            acc += &suffix * (forcing(i) * inputs[i]);
            suffix *= transition(i);
        }
        let state = &suffix * h0 + acc;
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!(
                "unroll: state became non-finite at step {}",
                t + 1
            )));
        }
        states.push(state);
    }
    Ok(states)
}
