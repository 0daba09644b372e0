//! Fidelities, distances, the qutrit-to-qubit reduction, concurrence, the
//! realignment witness and operator expectation tables.

use serde::{Deserialize, Serialize};

use crate::error::MetricsError;
use crate::qops::{hermitian_eigenvalues, hermitian_part, kron, realign_matrix, CMatrix, CVector, DensityMatrix, C64, I, ONE, ZERO};

/// Indices of `|gg⟩, |ge⟩, |eg⟩, |ee⟩` inside a two-qutrit space.
pub const QUBIT_BLOCK: [usize; 4] = [0, 1, 3, 4];

fn check_square(m: &CMatrix, d: usize) -> Result<(), MetricsError> {
    if m.nrows() != d || m.ncols() != d {
        return Err(MetricsError::DimensionMismatch {
            expected: d,
            found: m.nrows(),
        });
    }
    Ok(())
}

/// `⟨ψ|ρ|ψ⟩`.
pub fn state_fidelity(rho: &CMatrix, psi: &CVector) -> Result<f64, MetricsError> {
    check_square(rho, psi.len())?;
    let norm2 = psi.norm_squared();
    if (norm2 - 1.0).abs() > 1e-9 {
        return Err(MetricsError::NotNormalized(norm2));
    }
    Ok((psi.adjoint() * rho * psi)[(0, 0)].re)
}

/// `Re Tr(χ χ_ideal)`.
pub fn process_fidelity(chi: &CMatrix, chi_ideal: &CMatrix) -> f64 {
    (chi * chi_ideal).trace().re
}

/// `√Tr[(X − Y)(X − Y)†]`, which is `√Tr[(X − Y)²]` for Hermitian inputs.
pub fn hs_distance(x: &CMatrix, y: &CMatrix) -> f64 {
    (x - y).norm()
}

/// `½‖X − Y‖₁` for Hermitian inputs.
pub fn trace_distance(x: &CMatrix, y: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(x - y)).iter().map(|v| v.abs()).sum::<f64>()
}

/// Two-qubit block of a two-qutrit state on `span{gg, ge, eg, ee}`. Not
/// renormalized: its trace is one minus the population outside the block.
pub fn qubit_reduction(rho: &CMatrix) -> Result<CMatrix, MetricsError> {
    check_square(rho, 9)?;
    Ok(CMatrix::from_fn(4, 4, |i, j| rho[(QUBIT_BLOCK[i], QUBIT_BLOCK[j])]))
}

/// Embeds a two-qubit vector into the two-qutrit space.
pub fn embed_qubit_vector(psi: &CVector) -> CVector {
    let mut out = CVector::zeros(9);
    for (k, &idx) in QUBIT_BLOCK.iter().enumerate() {
        out[idx] = psi[k];
    }
    out
}

fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let eig = hermitian_part(m).symmetric_eigen();
    let d = m.nrows();
    let mut diag = CMatrix::zeros(d, d);
    for k in 0..d {
        diag[(k, k)] = C64::new(eig.eigenvalues[k].max(0.0).sqrt(), 0.0);
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Wootters concurrence of a two-qubit matrix, without renormalizing a
/// trace-deficient input. The `√λ` are taken from the Hermitian
/// `√ρ ρ̃ √ρ`, which shares its spectrum with `ρ ρ̃`.
pub fn concurrence(rho: &CMatrix) -> Result<f64, MetricsError> {
    check_square(rho, 4)?;
    let rho = hermitian_part(rho);
    let min = hermitian_eigenvalues(&rho).into_iter().fold(f64::INFINITY, f64::min);
    if min < -1e-8 {
        return Err(MetricsError::NotPositive(min));
    }
    let sy = CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
    let yy = kron(&sy, &sy);
    let tilde = &yy * rho.conjugate() * &yy;
    let s = psd_sqrt(&rho);
    let mut l: Vec<f64> = hermitian_eigenvalues(&(&s * tilde * &s))
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).max(0.0))
}

/// Concurrence of `ρ / Tr ρ`.
pub fn concurrence_normalized(rho: &CMatrix) -> Result<f64, MetricsError> {
    let tr = rho.trace().re;
    if tr <= 0.0 {
        return Ok(0.0);
    }
    concurrence(&rho.map(|z| z / tr))
}

/// Sum of the singular values of the realigned matrix; above one only for
/// entangled states.
pub fn ccnr(rho: &DensityMatrix) -> Result<f64, MetricsError> {
    match rho.dims() {
        &[da, db] => Ok(ccnr_matrix(rho.matrix(), da, db)),
        other => Err(MetricsError::DimensionMismatch {
            expected: 2,
            found: other.len(),
        }),
    }
}

pub fn ccnr_matrix(m: &CMatrix, da: usize, db: usize) -> f64 {
    realign_matrix(m, da, db).singular_values().iter().sum()
}

/// Operator basis for expectation tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorBasis {
    Pauli,
    GellMann,
}

impl std::str::FromStr for OperatorBasis {
    type Err = MetricsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pauli" => Ok(Self::Pauli),
            "gellmann" | "gell-mann" => Ok(Self::GellMann),
            _ => Err(MetricsError::UnknownBasis(s.to_string())),
        }
    }
}

/// `I, X, Y, Z` with `Z = |g⟩⟨g| − |e⟩⟨e|`.
pub fn pauli_basis() -> Vec<(String, CMatrix)> {
    let m = |a: [C64; 4]| CMatrix::from_row_slice(2, 2, &a);
    vec![
        ("I".into(), m([ONE, ZERO, ZERO, ONE])),
        ("X".into(), m([ZERO, ONE, ONE, ZERO])),
        ("Y".into(), m([ZERO, -I, I, ZERO])),
        ("Z".into(), m([ONE, ZERO, ZERO, -ONE])),
    ]
}

/// `λ0 = I`; `λ1..3` the ge Paulis; `λ4,5` x and y on gf; `λ6,7` x and y
/// on ef; `λ8 = diag(1, 1, −2)/√3`.
pub fn gellmann_basis() -> Vec<(String, CMatrix)> {
    let pair = |i: usize, j: usize, y: bool| {
        let mut m = CMatrix::zeros(3, 3);
        if y {
            m[(i, j)] = -I;
            m[(j, i)] = I;
        } else {
            m[(i, j)] = ONE;
            m[(j, i)] = ONE;
        }
        m
    };
    let mut z = CMatrix::zeros(3, 3);
    z[(0, 0)] = ONE;
    z[(1, 1)] = -ONE;
    let s = 1.0 / 3f64.sqrt();
    let l8 = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-2.0 * s, 0.0)]));
    let ops = [
        CMatrix::identity(3, 3),
        pair(0, 1, false),
        pair(0, 1, true),
        z,
        pair(0, 2, false),
        pair(0, 2, true),
        pair(1, 2, false),
        pair(1, 2, true),
        l8,
    ];
    ops.into_iter().enumerate().map(|(k, m)| (format!("L{k}"), m)).collect()
}

/// Labeled `⟨G_j ⊗ G_k⟩` for all pairs of the basis, the identity pair
/// first. Values are real parts; the imaginary parts vanish for Hermitian
/// `ρ`.
pub fn operator_expectations(rho: &CMatrix, basis: OperatorBasis) -> Result<Vec<(String, f64)>, MetricsError> {
    let (ops, d) = match basis {
        OperatorBasis::Pauli => (pauli_basis(), 4),
        OperatorBasis::GellMann => (gellmann_basis(), 9),
    };
    check_square(rho, d)?;
    let mut out = Vec::with_capacity(ops.len() * ops.len());
    for (la, a) in &ops {
        for (lb, b) in &ops {
            let v = (rho * kron(a, b)).trace().re;
            out.push((format!("{la}{lb}"), v));
        }
    }
    Ok(out)
}

/// CSV with columns `label, value`.
pub fn expectations_csv(table: &[(String, f64)]) -> String {
    let mut out = String::from("label,value\n");
    for (l, v) in table {
        out.push_str(&format!("{l},{}\n", crate::io::fmt9(*v)));
    }
    out
}

/// `(|eg⟩ + |ge⟩)/√2` on two qutrits.
pub fn bell_target() -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = CVector::zeros(9);
    v[1] = C64::new(s, 0.0);
    v[3] = C64::new(s, 0.0);
    v
}

/// Headline numbers for a two-qutrit output state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub state_fidelity: f64,
    pub process_fidelity: Option<f64>,
    /// Of the unnormalized two-qubit block.
    pub concurrence: f64,
    pub concurrence_normalized: f64,
    pub ccnr: f64,
    /// Distance to a reference state, when one is given.
    pub hs_distance: Option<f64>,
    /// `Tr ρ_m`.
    pub qubit_block_trace: f64,
    /// Total |f⟩ population of both transmons.
    pub residual_f_population: f64,
    pub pauli_expectations: Vec<(String, f64)>,
    pub gellmann_expectations: Vec<(String, f64)>,
}

impl MetricsBundle {
    pub fn for_two_qutrit(rho: &DensityMatrix, target: &CVector, reference: Option<&CMatrix>) -> Result<Self, MetricsError> {
        let m = rho.matrix();
        check_square(m, 9)?;
        let rho_m = qubit_reduction(m)?;
        let pops = rho.populations();
        // f on A: indices 6..9; f on B: index % 3 == 2
        let residual_f = (0..9).filter(|&k| k / 3 == 2 || k % 3 == 2).map(|k| pops[k]).sum();
        let mut pauli = operator_expectations(&rho_m, OperatorBasis::Pauli)?;
        pauli.remove(0);
        let mut gm = operator_expectations(m, OperatorBasis::GellMann)?;
        gm.remove(0);
        Ok(Self {
            state_fidelity: state_fidelity(m, target)?,
            process_fidelity: None,
            concurrence: concurrence(&rho_m)?,
            concurrence_normalized: concurrence_normalized(&rho_m)?,
            ccnr: ccnr_matrix(m, 3, 3),
            hs_distance: reference.map(|r| hs_distance(m, r)),
            qubit_block_trace: rho_m.trace().re,
            residual_f_population: residual_f,
            pauli_expectations: pauli,
            gellmann_expectations: gm,
        })
    }
}
