//! Dense tensor-algebra primitives: operators and density matrices over a
//! tensor-product Hilbert space, subsystem embedding, partial traces, the
//! Lindblad dissipator and the realignment map.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::QopsError;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn total_dim(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// A square operator tagged with the subsystem dimensions it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    dims: Vec<usize>,
    data: CMatrix,
}

impl LinearOperator {
    pub fn new(dims: Vec<usize>, data: CMatrix) -> Result<Self, QopsError> {
        let d = total_dim(&dims);
        if dims.is_empty() || data.nrows() != d || data.ncols() != d {
            return Err(QopsError::DimensionMismatch {
                expected: d,
                found: data.nrows(),
            });
        }
        Ok(Self { dims, data })
    }

    /// Single-subsystem operator.
    pub fn single(data: CMatrix) -> Self {
        let d = data.nrows();
        assert_eq!(d, data.ncols(), "operator must be square");
        Self {
            dims: vec![d],
            data,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn dagger(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.adjoint(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dims: self.dims.clone(),
            data: self.data.map(|z| z * factor),
        }
    }
}

/// Hermitian, positive operator over a tensor-product space. The trace is
/// not forced to one so that reduced blocks can be represented too.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dims: Vec<usize>,
    data: CMatrix,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-10;

    pub fn new(dims: Vec<usize>, data: CMatrix) -> Result<Self, QopsError> {
        let d = total_dim(&dims);
        if dims.is_empty() || data.nrows() != d || data.ncols() != d {
            return Err(QopsError::DimensionMismatch {
                expected: d,
                found: data.nrows(),
            });
        }
        let dev = hermiticity_defect(&data);
        if dev > Self::HERMITICITY_TOL {
            return Err(QopsError::NotHermitian(dev));
        }
        Ok(Self { dims, data })
    }

    /// Builds a density matrix and symmetrizes it, accepting small
    /// non-Hermitian noise from numerical pipelines.
    pub fn from_matrix_symmetrized(dims: Vec<usize>, data: CMatrix) -> Result<Self, QopsError> {
        let data = hermitian_part(&data);
        Self::new(dims, data)
    }

    pub fn from_pure(dims: Vec<usize>, psi: &CVector) -> Result<Self, QopsError> {
        let d = total_dim(&dims);
        if psi.len() != d {
            return Err(QopsError::DimensionMismatch {
                expected: d,
                found: psi.len(),
            });
        }
        Ok(Self {
            dims,
            data: psi * psi.adjoint(),
        })
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d = total_dim(&dims);
        Self {
            dims,
            data: CMatrix::identity(d, d).map(|z| z / d as f64),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.data[(i, i)].re).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.data)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn purity(&self) -> f64 {
        (&self.data * &self.data).trace().re
    }

    /// Conjugates the state with a unitary acting on the full space.
    pub fn transformed(&self, u: &CMatrix) -> Self {
        Self {
            dims: self.dims.clone(),
            data: hermitian_part(&(u * &self.data * u.adjoint())),
        }
    }

    /// Expectation value Tr[O ρ].
    pub fn expectation(&self, op: &CMatrix) -> C64 {
        (op * &self.data).trace()
    }
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let h = hermitian_part(m);
    h.symmetric_eigenvalues().iter().copied().collect()
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Truncated bosonic lowering operator with `d` levels.
pub fn annihilation(d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    a
}

/// `|i⟩⟨j|` in dimension `d`.
pub fn ket_bra(d: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(i, j)] = ONE;
    m
}

pub fn projector(d: usize, i: usize) -> CMatrix {
    ket_bra(d, i, i)
}

pub fn basis_ket(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = ONE;
    v
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_all(ops: &[CMatrix]) -> CMatrix {
    ops.iter()
        .skip(1)
        .fold(ops[0].clone(), |acc, op| acc.kronecker(op))
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

/// Places `op` at position `slot` of the tensor product described by `dims`.
pub fn embed(op: &LinearOperator, slot: usize, dims: &[usize]) -> Result<LinearOperator, QopsError> {
    if slot >= dims.len() {
        return Err(QopsError::InvalidSubsystems(format!(
            "slot {slot} out of range for {} subsystems",
            dims.len()
        )));
    }
    if op.dim() != dims[slot] {
        return Err(QopsError::DimensionMismatch {
            expected: dims[slot],
            found: op.dim(),
        });
    }
    let factors: Vec<CMatrix> = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| if k == slot { op.matrix().clone() } else { identity(d) })
        .collect();
    LinearOperator::new(dims.to_vec(), kron_all(&factors))
}

/// Embedding shorthand for a bare matrix.
pub fn embed_matrix(op: &CMatrix, slot: usize, dims: &[usize]) -> Result<CMatrix, QopsError> {
    embed(&LinearOperator::single(op.clone()), slot, dims).map(LinearOperator::into_matrix)
}

fn multi_index(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

/// Reduced state over the subsystems listed in `keep` (kept in ascending
/// order regardless of the order given).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix, QopsError> {
    let dims = rho.dims();
    if keep.is_empty() {
        return Err(QopsError::InvalidSubsystems("keep set is empty".into()));
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != keep.len() || kept.iter().any(|&k| k >= dims.len()) {
        return Err(QopsError::InvalidSubsystems(format!(
            "invalid keep set {keep:?} for {} subsystems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let dk = total_dim(&kept_dims);
    let n = rho.dim();
    let m = rho.matrix();
    let mut out = CMatrix::zeros(dk, dk);
    let mut ri = vec![0usize; dims.len()];
    let mut ci = vec![0usize; dims.len()];
    for r in 0..n {
        multi_index(r, dims, &mut ri);
        for col in 0..n {
            multi_index(col, dims, &mut ci);
            if traced.iter().any(|&k| ri[k] != ci[k]) {
                continue;
            }
            let (mut a, mut b) = (0usize, 0usize);
            for &k in &kept {
                a = a * dims[k] + ri[k];
                b = b * dims[k] + ci[k];
            }
            out[(a, b)] += m[(r, col)];
        }
    }
    Ok(DensityMatrix {
        dims: kept_dims,
        data: out,
    })
}

/// `D[O]ρ = OρO† − {O†O, ρ}/2`.
pub fn dissipator(op: &LinearOperator, rho: &DensityMatrix) -> Result<CMatrix, QopsError> {
    if op.dim() != rho.dim() {
        return Err(QopsError::DimensionMismatch {
            expected: rho.dim(),
            found: op.dim(),
        });
    }
    let o = op.matrix();
    let od = o.adjoint();
    let odo = &od * o;
    let r = rho.matrix();
    Ok(o * r * &od - (&odo * r + r * &odo).map(|z| z * 0.5))
}

/// Index reshuffle `ρ[(i_A i_B),(j_A j_B)] → R[(i_A j_A),(i_B j_B)]`.
/// The singular values of the result are the operator-Schmidt coefficients.
pub fn realign(rho: &DensityMatrix) -> Result<CMatrix, QopsError> {
    match rho.dims() {
        &[da, db] => Ok(realign_matrix(rho.matrix(), da, db)),
        other => Err(QopsError::NotBipartite(other.len())),
    }
}

pub fn realign_matrix(m: &CMatrix, da: usize, db: usize) -> CMatrix {
    let mut out = CMatrix::zeros(da * da, db * db);
    for ia in 0..da {
        for ib in 0..db {
            for ja in 0..da {
                for jb in 0..db {
                    out[(ia * da + ja, ib * db + jb)] = m[(ia * db + ib, ja * db + jb)];
                }
            }
        }
    }
    out
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.clone().singular_values().iter().copied().collect()
}

/// Matrix exponential of `-i θ/2 · G` for a Hermitian generator `G`,
/// computed from its spectral decomposition.
pub fn unitary_from_generator(generator: &CMatrix, theta: f64) -> CMatrix {
    let h = hermitian_part(generator);
    let eig = h.clone().symmetric_eigen();
    let d = h.nrows();
    let mut phases = CMatrix::zeros(d, d);
    for k in 0..d {
        phases[(k, k)] = C64::from_polar(1.0, -0.5 * theta * eig.eigenvalues[k]);
    }
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}
