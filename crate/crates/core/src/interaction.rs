//! State-space recurrence with a rank-1 input/state interaction term.
//!
//! The transition matrix picks up an input-dependent update,
//! `h_t = (a_bar_t + x_t^2 g w^T) h_{t-1} + b_bar_t x_t`: the state is
//! shifted along `g` in proportion to the similarity `w . h_{t-1}` scaled by
//! the squared input. Setting `g = 0` recovers the plain recurrence.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::matrix::{check_square_finite, SquareMatrix};
use crate::ssm::{unroll_states, ContinuousSsm, HiddenTrajectory};

/// Interaction model: a base state-space system plus the shift direction `g`
/// and interaction projection `w`.
#[derive(Debug, Clone)]
pub struct InteractionParams {
    pub base: ContinuousSsm,
    pub g: DVector<f64>,
    pub w: DVector<f64>,
}

impl InteractionParams {
    pub fn new(base: ContinuousSsm, g: DVector<f64>, w: DVector<f64>) -> Result<Self> {
        let h = base.dim();
        if g.len() != h || w.len() != h {
            return Err(Error::invalid(format!(
                "InteractionParams: g has length {}, w length {}, expected {h}",
                g.len(),
                w.len()
            )));
        }
        if !g.iter().chain(w.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid("InteractionParams: g or w has non-finite entries"));
        }
        Ok(InteractionParams { base, g, w })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Transition matrix for one step: `a_bar + x^2 g w^T`.
    pub fn transition(&self, a_bar: &SquareMatrix, x: f64) -> SquareMatrix {
        interaction_transition(a_bar, x, self)
    }
}

/// `a_bar + x^2 g w^T`, the per-step transition of the interaction model.
pub fn interaction_transition(
    a_bar: &SquareMatrix,
    x: f64,
    params: &InteractionParams,
) -> SquareMatrix {
    a_bar + &params.g * params.w.transpose() * (x * x)
}

fn prepare(
    params: &InteractionParams,
    inputs: &[f64],
    h0: &DVector<f64>,
) -> Result<Vec<crate::ssm::DiscretizedStep>> {
    if h0.len() != params.dim() {
        return Err(Error::invalid(format!(
            "interaction: initial state has length {}, expected {}",
            h0.len(),
            params.dim()
        )));
    }
    if !inputs.iter().all(|x| x.is_finite()) || !h0.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("interaction: inputs and initial state must be finite"));
    }
    params.base.discretize_sequence(inputs)
}

/// Runs the interaction recurrence from `h0`.
///
/// A non-finite state aborts with the step index; with this model that is
/// the signal of a stability violation rather than a bug.
pub fn interaction_scan(
    params: &InteractionParams,
    inputs: &[f64],
    h0: &DVector<f64>,
) -> Result<HiddenTrajectory> {
    let steps = prepare(params, inputs, h0)?;
    let mut h = h0.clone();
    let mut states = Vec::with_capacity(inputs.len());
    for (t, (&x, step)) in inputs.iter().zip(&steps).enumerate() {
        // g (w . h) x^2 + a_bar h + b_bar x, without forming the rank-1 matrix.
        h = &step.a_bar * &h + &params.g * (params.w.dot(&h) * x * x) + &step.b_bar * x;
        if !h.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!(
                "interaction_scan: state became non-finite at step {}",
                t + 1
            )));
        }
        states.push(h.clone());
    }
    Ok(HiddenTrajectory::from_states(h0.clone(), states, &params.base.c))
}

/// Evaluates the unrolled form
///
/// `h_t = (prod_{i=1..t} M_i) h0 + sum_{i=1..t} (prod_{j=i+1..t} M_j) b_bar_i x_i`
///
/// with `M_i = a_bar_i + x_i^2 g w^T`, accumulating explicit suffix products
/// as an independent route from [`interaction_scan`].
pub fn interaction_unroll(
    params: &InteractionParams,
    inputs: &[f64],
    h0: &DVector<f64>,
) -> Result<HiddenTrajectory> {
    let steps = prepare(params, inputs, h0)?;
    let states = unroll_states(
        inputs,
        h0,
        |t| params.transition(&steps[t].a_bar, inputs[t]),
        |t| &steps[t].b_bar,
    )?;
    Ok(HiddenTrajectory::from_states(h0.clone(), states, &params.base.c))
}

/// Interaction model in the eigenbasis of the discretized transition.
///
/// When `g` and `w` are scalings of the same eigenvector of `a_bar` (taken
/// here to be the last column of `basis`), the interaction only moves the
/// matching eigenvalue: channel `i < H` evolves by `lambda_i` per step while
/// channel `H` evolves by `lambda_H + gamma x^2`.
#[derive(Debug, Clone)]
pub struct EigenAlignedConfig {
    /// Eigenvalues of the discretized transition `a_bar` (not the generator).
    pub eigenvalues: Vec<f64>,
    /// Product of the scaling factors of `g` and `w`.
    pub gamma: f64,
    /// Orthogonal eigenbasis; column `H-1` is the interacting direction.
    pub basis: SquareMatrix,
}

impl EigenAlignedConfig {
    pub fn new(eigenvalues: Vec<f64>, gamma: f64, basis: SquareMatrix) -> Result<Self> {
        check_square_finite(&basis, "EigenAlignedConfig")?;
        let h = basis.nrows();
        if eigenvalues.len() != h {
            return Err(Error::invalid(format!(
                "EigenAlignedConfig: {} eigenvalues for a {h}x{h} basis",
                eigenvalues.len()
            )));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "EigenAlignedConfig: gamma must be non-negative, got {gamma}"
            )));
        }
        let last = eigenvalues[h - 1];
        if !(last.is_finite() && last > 0.0) {
            return Err(Error::invalid(format!(
                "EigenAlignedConfig: the interacting eigenvalue must be strictly positive, got {last}"
            )));
        }
        let ortho_dev = (basis.transpose() * &basis - SquareMatrix::identity(h, h)).norm();
        if ortho_dev > 1e-10 {
            return Err(Error::invalid(format!(
                "EigenAlignedConfig: basis is not orthogonal (deviation {ortho_dev:.3e})"
            )));
        }
        Ok(EigenAlignedConfig {
            eigenvalues,
            gamma,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }
}

/// Runs the interaction recurrence entirely in the eigenbasis: per-channel
/// scalar updates, mapped back through the basis at every step.
///
/// No output map is part of the eigen-aligned configuration, so trajectory
/// outputs are zero.
pub fn eigen_aligned_scan(
    config: &EigenAlignedConfig,
    b_bar: &DVector<f64>,
    inputs: &[f64],
    h0: &DVector<f64>,
) -> Result<HiddenTrajectory> {
    let h = config.dim();
    if b_bar.len() != h || h0.len() != h {
        return Err(Error::invalid(format!(
            "eigen_aligned_scan: b_bar has length {}, h0 length {}, expected {h}",
            b_bar.len(),
            h0.len()
        )));
    }
    if !inputs.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("eigen_aligned_scan: inputs must be finite"));
    }

    let b_eig = config.basis.transpose() * b_bar;
    let mut state = config.basis.transpose() * h0;
    let mut states = Vec::with_capacity(inputs.len());
    for (t, &x) in inputs.iter().enumerate() {
        for i in 0..h {
            let rate = if i == h - 1 {
                config.eigenvalues[i] + config.gamma * x * x
            } else {
                config.eigenvalues[i]
            };
            state[i] = rate * state[i] + b_eig[i] * x;
        }
        if !state.iter().all(|v| v.is_finite()) {
            return Err(Error::numerical(format!(
                "eigen_aligned_scan: state became non-finite at step {}",
                t + 1
            )));
        }
        states.push(&config.basis * &state);
    }
    let zero_c = DVector::zeros(h);
    Ok(HiddenTrajectory::from_states(h0.clone(), states, &zero_c))
}
