//! Small density matrices and von Neumann quantities, all in bits.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statlab::dist::shannon_bits;

pub const MAX_DIM: usize = 64;
const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-EIGEN_CLAMP, 0)` are round-off and clamped to zero.
const EIGEN_CLAMP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || dim != matrix.ncols() {
            return Err(Error::InvalidDensityMatrix(format!("shape {}x{}", matrix.nrows(), matrix.ncols())));
        }
        if dim > MAX_DIM {
            return Err(Error::InvalidDensityMatrix(format!("dimension {dim} exceeds {MAX_DIM}")));
        }
        for i in 0..dim {
            for j in 0..=i {
                if (matrix[(i, j)] - matrix[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidDensityMatrix(format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let trace = matrix.trace();
        if (trace - Complex64::new(1.0, 0.0)).norm() > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {trace}")));
        }
        let rho = Self { matrix };
        rho.spectrum()?;
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(state: &[Complex64]) -> Result<Self> {
        check_normalized(state)?;
        let v = nalgebra::DVector::from_column_slice(state);
        Self::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        let scale = Complex64::new(1.0 / dim as f64, 0.0);
        Self::new(DMatrix::identity(dim, dim) * scale)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// Convex combination `(1 - lambda) self + lambda other`.
    pub fn mix(&self, other: &DensityMatrix, lambda: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), actual: other.dim() });
        }
        let a = Complex64::new(1.0 - lambda, 0.0);
        let b = Complex64::new(lambda, 0.0);
        Self::new(&self.matrix * a + &other.matrix * b)
    }

    /// Eigenvalues with round-off negatives clamped; larger negatives are errors.
    pub fn spectrum(&self) -> Result<Vec<f64>> {
        hermitian_spectrum(&self.matrix)
    }

    /// Partial trace keeping the listed subsystems (in their original order).
    pub fn partial_trace(&self, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
        DensityMatrix::new(partial_trace(&self.matrix, dims, keep)?)
    }
}

fn check_normalized(state: &[Complex64]) -> Result<()> {
    let norm: f64 = state.iter().map(|z| z.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("state has squared norm {norm}")));
    }
    Ok(())
}

pub(crate) fn hermitian_spectrum(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let eig = m.clone().symmetric_eigenvalues();
    eig.iter()
        .map(|&l| {
            if l < -EIGEN_CLAMP {
                Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {l}")))
            } else {
                Ok(l.max(0.0))
            }
        })
        .collect()
}

/// Von Neumann entropy `H(ρ)` in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(shannon_bits(&rho.spectrum()?))
}

fn partial_trace(m: &DMatrix<Complex64>, dims: &[usize], keep: &[usize]) -> Result<DMatrix<Complex64>> {
    let total: usize = dims.iter().product();
    if total != m.nrows() {
        return Err(Error::LengthMismatch { expected: m.nrows(), actual: total });
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidParameter(format!("bad subsystem list {keep:?}")));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let keep_dim: usize = keep.iter().map(|&i| dims[i]).product();
    let trace_dim: usize = traced.iter().map(|&i| dims[i]).product();

    // Row-major multi-index: subsystem 0 is the most significant digit.
    let compose = |keep_idx: usize, trace_idx: usize| -> usize {
        let mut digits = vec![0usize; dims.len()];
        let mut k = keep_idx;
        for &s in keep.iter().rev() {
            digits[s] = k % dims[s];
            k /= dims[s];
        }
        let mut t = trace_idx;
        for &s in traced.iter().rev() {
            digits[s] = t % dims[s];
            t /= dims[s];
        }
        digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
    };

    let mut out = DMatrix::from_element(keep_dim, keep_dim, Complex64::new(0.0, 0.0));
    for i in 0..keep_dim {
        for j in 0..keep_dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..trace_dim {
                acc += m[(compose(i, t), compose(j, t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// `H(A|B) = H(AB) - H(B)` for a bipartite state on `dim_a ⊗ dim_b`.
pub fn von_neumann_conditional(rho: &DensityMatrix, split: (usize, usize)) -> Result<f64> {
    let (da, db) = split;
    if da * db != rho.dim() {
        return Err(Error::LengthMismatch { expected: rho.dim(), actual: da * db });
    }
    let h_ab = von_neumann_entropy(rho)?;
    let h_b = von_neumann_entropy(&rho.partial_trace(&[da, db], &[1])?)?;
    Ok(h_ab - h_b)
}

/// Holevo information of any complete projective measurement on the first
/// factor of a bipartite pure state: the Shannon entropy of its Schmidt
/// coefficients `λ_i = σ_i²`, where `σ_i` are the singular values of the
/// `dim_a × dim_b` reshaping.
pub fn holevo_from_schmidt(state: &[Complex64], dims: (usize, usize)) -> Result<f64> {
    Ok(shannon_bits(&schmidt_coefficients(state, dims)?))
}

pub fn schmidt_coefficients(state: &[Complex64], dims: (usize, usize)) -> Result<Vec<f64>> {
    let (da, db) = dims;
    if da * db != state.len() {
        return Err(Error::LengthMismatch { expected: da * db, actual: state.len() });
    }
    check_normalized(state)?;
    let m = DMatrix::from_row_slice(da, db, state);
    let sv = m.singular_values();
    Ok(sv.iter().map(|s| s * s).collect())
}
