//! Gauss-Hermite quadrature (physicists' convention) for expectations of
//! smooth functions of a standard normal variable.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default node count. Generous for the log-moment and moment-generating
/// integrands used here, which are smooth with sub-Gaussian tails.
pub const DEFAULT_ORDER: usize = 96;

/// Nodes and weights for integrating `e^{-x^2} f(x)` over the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds the rule by the Golub-Welsch algorithm: the nodes are the
    /// eigenvalues of the symmetric tridiagonal Jacobi matrix with
    /// off-diagonal `sqrt(k/2)`, and the weights come from the first row of
    /// the eigenvectors. Nodes are then sorted and symmetrized about 0,
    /// which the recurrence guarantees in exact arithmetic.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("gauss_hermite: order must be >= 1"));
        }
        let mut jacobi = DMatrix::<f64>::zeros(order, order);
        for k in 1..order {
            let off = (k as f64 / 2.0).sqrt();
            jacobi[(k - 1, k)] = off;
            jacobi[(k, k - 1)] = off;
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(jacobi);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|j| {
                let v0 = eig.eigenvectors[(0, j)];
                (eig.eigenvalues[j], v0 * v0 * sqrt_pi)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        // Enforce exact symmetry by averaging mirrored pairs.
        let n = pairs.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let node = 0.5 * (pairs[j].0 - pairs[i].0);
            let weight = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-node, weight);
            pairs[j] = (node, weight);
        }
        if n % 2 == 1 {
            pairs[n / 2].0 = 0.0;
        }

        Ok(QuadratureRule {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `e^{-x^2} f(x)` over the real line.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// `E[f(X)]` for `X ~ N(0,1)`: substituting `x = sqrt(2) u` turns the
/// Gaussian expectation into `sum_i w_i f(sqrt(2) x_i) / sqrt(pi)`.
///
/// Fails if `f` evaluates to a non-finite value at any node, naming the node.
pub fn gauss_hermite_expectation<F: Fn(f64) -> f64>(f: F, rule: &QuadratureRule) -> Result<f64> {
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut acc = 0.0;
    for (i, (x, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let value = f(sqrt2 * x);
        if !value.is_finite() {
            return Err(Error::numerical(format!(
                "gauss_hermite_expectation: integrand is {value} at node {i} (x = {:.6})",
                sqrt2 * x
            )));
        }
        acc += w * value;
    }
    Ok(acc / std::f64::consts::PI.sqrt())
}
