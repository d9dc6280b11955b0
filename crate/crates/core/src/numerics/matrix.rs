//! Dense square-matrix primitives: the matrix exponential, spectral
//! queries, and random stable matrices with a known eigenbasis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::rng::RandomStream;

/// Dense real square matrix, row-major semantics via `nalgebra`.
pub type SquareMatrix = DMatrix<f64>;

pub(crate) fn check_square_finite(m: &SquareMatrix, op: &str) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "{op}: expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid(format!("{op}: matrix has non-finite entries")));
    }
    Ok(())
}

// Pade coefficient tables and 1-norm thresholds from Higham, "The scaling
// and squaring method for the matrix exponential revisited" (2005).
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Evaluates the odd/even split (U, V) of a diagonal Pade approximant with
/// coefficients `b` given the needed even powers of `a`.
fn pade_u_v(a: &SquareMatrix, even_powers: &[&SquareMatrix], b: &[f64]) -> (SquareMatrix, SquareMatrix) {
    let n = a.nrows();
    let id = SquareMatrix::identity(n, n);
    let mut odd = &id * b[1];
    let mut even = &id * b[0];
    for (p, pow) in even_powers.iter().enumerate() {
        odd += *pow * b[2 * p + 3];
        even += *pow * b[2 * p + 2];
    }
    (a * odd, even)
}

/// Degree-13 evaluation reuses A^6 to keep the multiplication count down.
fn pade13_u_v(
    a: &SquareMatrix,
    a2: &SquareMatrix,
    a4: &SquareMatrix,
    a6: &SquareMatrix,
) -> (SquareMatrix, SquareMatrix) {
    let n = a.nrows();
    let id = SquareMatrix::identity(n, n);
    let u_inner = a6 * (a6 * B13[13] + a4 * B13[11] + a2 * B13[9])
        + a6 * B13[7]
        + a4 * B13[5]
        + a2 * B13[3]
        + &id * B13[1];
    let v = a6 * (a6 * B13[12] + a4 * B13[10] + a2 * B13[8])
        + a6 * B13[6]
        + a4 * B13[4]
        + a2 * B13[2]
        + &id * B13[0];
    (a * u_inner, v)
}

/// Matrix exponential by scaling and squaring with diagonal Pade
/// approximants (degrees 3/5/7/9/13 selected by the 1-norm).
pub fn matrix_exp(m: &SquareMatrix) -> Result<SquareMatrix> {
    check_square_finite(m, "matrix_exp")?;

    let norm = one_norm(m);
    let (u, v, squarings) = if norm <= THETA_9 {
        let a2 = m * m;
        if norm <= THETA_3 {
            let (u, v) = pade_u_v(m, &[&a2], &B3);
            (u, v, 0u32)
        } else if norm <= THETA_5 {
            let a4 = &a2 * &a2;
            let (u, v) = pade_u_v(m, &[&a2, &a4], &B5);
            (u, v, 0)
        } else if norm <= THETA_7 {
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            let (u, v) = pade_u_v(m, &[&a2, &a4, &a6], &B7);
            (u, v, 0)
        } else {
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            let a8 = &a6 * &a2;
            let (u, v) = pade_u_v(m, &[&a2, &a4, &a6, &a8], &B9);
            (u, v, 0)
        }
    } else {
        let squarings = (norm / THETA_13).log2().ceil().max(0.0) as u32;
        let scaled = m / 2f64.powi(squarings as i32);
        let a2 = &scaled * &scaled;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let (u, v) = pade13_u_v(&scaled, &a2, &a4, &a6);
        (u, v, squarings)
    };

    // r = (V - U)^{-1} (V + U), then undo the scaling by repeated squaring.
    let numer = &v + &u;
    let denom = v - u;
    let lu = denom.lu();
    let mut r = lu
        .solve(&numer)
        .ok_or_else(|| Error::numerical("matrix_exp: Pade denominator is singular".to_string()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }

    if !r.iter().all(|x| x.is_finite()) {
        return Err(Error::numerical(format!(
            "matrix_exp: result overflowed (input 1-norm {norm:.3e})"
        )));
    }
    Ok(r)
}

fn one_norm(m: &SquareMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest real part among the eigenvalues of `m`.
///
/// Uses the real Schur form; fails with iteration diagnostics when the QR
/// iteration does not converge.
pub fn largest_eigenvalue_real(m: &SquareMatrix) -> Result<f64> {
    check_square_finite(m, "largest_eigenvalue_real")?;
    const MAX_ITER: usize = 10_000;
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, MAX_ITER)
        .ok_or_else(|| {
            Error::numerical(format!(
                "largest_eigenvalue_real: Schur iteration did not converge within {MAX_ITER} iterations for a {}x{} matrix",
                m.nrows(),
                m.ncols()
            ))
        })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// A randomly generated symmetric stable matrix together with the eigenpairs
/// it was built from, so downstream analyses never have to recover them
/// numerically.
#[derive(Debug, Clone)]
pub struct StableMatrix {
    /// `basis * diag(eigenvalues) * basis^T`.
    pub matrix: SquareMatrix,
    /// Eigenvalues, one per column of `basis`, in draw order (unsorted).
    pub eigenvalues: Vec<f64>,
    /// Orthogonal eigenbasis.
    pub basis: SquareMatrix,
}

/// Draws `P diag(lambda) P^T` with eigenvalues uniform in `eig_range`
/// (an interval with non-positive upper bound) and `P` Haar-orthogonal,
/// obtained from the QR factorization of a Gaussian matrix with the sign of
/// each R diagonal entry fixed.
pub fn random_stable_matrix(
    dim: usize,
    eig_range: (f64, f64),
    stream: RandomStream,
) -> Result<StableMatrix> {
    let (lo, hi) = eig_range;
    if dim == 0 {
        return Err(Error::invalid("random_stable_matrix: dim must be >= 1"));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::invalid(format!(
            "random_stable_matrix: empty or non-finite eigenvalue interval [{lo}, {hi}]"
        )));
    }
    if hi > 0.0 {
        return Err(Error::invalid(format!(
            "random_stable_matrix: eigenvalue interval must lie in (-inf, 0], got upper bound {hi}"
        )));
    }

    let mut sampler = stream.sampler();
    let eigenvalues: Vec<f64> = (0..dim).map(|_| sampler.uniform_in(lo, hi)).collect();

    let gaussian = SquareMatrix::from_fn(dim, dim, |_, _| sampler.normal());
    let qr = gaussian.qr();
    let r = qr.r();
    let mut basis = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                basis[(i, j)] = -basis[(i, j)];
            }
        }
    }

    let diag = SquareMatrix::from_diagonal(&DVector::from_vec(eigenvalues.clone()));
    let mut matrix = &basis * diag * basis.transpose();
    // Symmetrize away rounding noise so the spectrum stays real.
    let sym = (&matrix + matrix.transpose()) * 0.5;
    matrix = sym;

    Ok(StableMatrix {
        matrix,
        eigenvalues,
        basis,
    })
}
