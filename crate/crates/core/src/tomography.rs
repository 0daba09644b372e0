//! Qutrit state tomography by maximum likelihood and qubit process
//! tomography by linear inversion.

use serde::{Deserialize, Serialize};

use crate::error::TomographyError;
use crate::qops::{hermitian_part, kron, CMatrix, CVector, DensityMatrix, C64, I, ONE, ZERO};

/// Transition addressed by a qutrit rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transition {
    Ge,
    Ef,
}

/// `exp(−iθ/2 (cos φ σx + sin φ σy))` on the chosen two-level subspace of a
/// qutrit. `φ = 0` rotates about x, `φ = π/2` about y.
pub fn rotation(transition: Transition, theta: f64, phi: f64) -> CMatrix {
    let (lo, hi) = match transition {
        Transition::Ge => (0, 1),
        Transition::Ef => (1, 2),
    };
    let (s, c) = (0.5 * theta).sin_cos();
    let mut u = CMatrix::identity(3, 3);
    u[(lo, lo)] = C64::new(c, 0.0);
    u[(hi, hi)] = C64::new(c, 0.0);
    // −i sin(θ/2) (cos φ σx + sin φ σy)
    u[(lo, hi)] = -I * s * C64::from_polar(1.0, -phi);
    u[(hi, lo)] = -I * s * C64::from_polar(1.0, phi);
    u
}

/// A named pre-measurement rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographySetting {
    pub id: String,
    pub unitary: CMatrix,
}

/// Which gate set to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateSetKind {
    Single,
    Pair,
}

const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
const PI: f64 = std::f64::consts::PI;

/// The nine single-qutrit settings. Parenthesised pairs are applied left to
/// right in time, so `(R^π_ge R^{π/2}_ef)` has unitary `R_ef · R_ge`.
fn single_settings() -> Vec<TomographySetting> {
    let ge = |theta, phi| rotation(Transition::Ge, theta, phi);
    let ef = |theta, phi| rotation(Transition::Ef, theta, phi);
    let list = [
        ("xR0_ge", CMatrix::identity(3, 3)),
        ("xR90_ge", ge(HALF_PI, 0.0)),
        ("yR90_ge", ge(HALF_PI, HALF_PI)),
        ("xR180_ge", ge(PI, 0.0)),
        ("xR90_ef", ef(HALF_PI, 0.0)),
        ("yR90_ef", ef(HALF_PI, HALF_PI)),
        ("xR180_ge+xR90_ef", ef(HALF_PI, 0.0) * ge(PI, 0.0)),
        ("xR180_ge+yR90_ef", ef(HALF_PI, HALF_PI) * ge(PI, 0.0)),
        ("xR180_ge+xR180_ef", ef(PI, 0.0) * ge(PI, 0.0)),
    ];
    list.into_iter()
        .map(|(id, unitary)| TomographySetting {
            id: id.to_string(),
            unitary,
        })
        .collect()
}

pub fn gate_set(kind: GateSetKind) -> Vec<TomographySetting> {
    let single = single_settings();
    match kind {
        GateSetKind::Single => single,
        GateSetKind::Pair => {
            let mut out = Vec::with_capacity(81);
            for a in &single {
                for b in &single {
                    out.push(TomographySetting {
                        id: format!("{}|{}", a.id, b.id),
                        unitary: kron(&a.unitary, &b.unitary),
                    });
                }
            }
            out
        }
    }
}

/// `diag(U ρ U†)`.
pub fn born_probabilities(rho: &CMatrix, setting: &TomographySetting) -> Vec<f64> {
    let u = &setting.unitary;
    let r = u * rho * u.adjoint();
    (0..r.nrows()).map(|k| r[(k, k)].re).collect()
}

/// Outcome of [`qst_mle`].
#[derive(Clone, Debug)]
pub struct MleResult {
    pub state: DensityMatrix,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// `‖R − I‖_F` at the final iterate.
    pub gradient_norm: f64,
}

pub const MLE_MAX_ITERATIONS: usize = 5000;
const MLE_TOLERANCE: f64 = 1e-10;
const MLE_DILUTION: f64 = 0.5;

/// Rows `⟨k|U · |i⟩⟨j| · U†|k⟩` of the linear map from `vec(ρ)` to outcome
/// probabilities.
fn design_matrix(settings: &[TomographySetting], d: usize) -> CMatrix {
    let rows = settings.len() * d;
    let mut a = CMatrix::zeros(rows, d * d);
    for (s, setting) in settings.iter().enumerate() {
        let u = &setting.unitary;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    a[(s * d + k, i * d + j)] = u[(k, i)] * u[(k, j)].conj();
                }
            }
        }
    }
    a
}

/// Least-squares inversion of the probability map, projected to the closest
/// unit-trace positive matrix.
pub fn linear_inversion_state(
    populations: &[Vec<f64>],
    settings: &[TomographySetting],
    d: usize,
) -> Result<CMatrix, TomographyError> {
    let a = design_matrix(settings, d);
    let b = CVector::from_iterator(
        settings.len() * d,
        populations.iter().flat_map(|p| p.iter().map(|&x| C64::new(x, 0.0))),
    );
    let svd = a.svd(true, true);
    let x = svd
        .solve(&b, 1e-10)
        .map_err(|_| TomographyError::RankDeficient(0))?;
    let rho = hermitian_part(&CMatrix::from_fn(d, d, |i, j| x[i * d + j]));
    Ok(project_to_state(&rho))
}

/// Clips negative eigenvalues and renormalizes the trace.
pub fn project_to_state(m: &CMatrix) -> CMatrix {
    let eig = hermitian_part(m).symmetric_eigen();
    let d = m.nrows();
    let vals: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let vals: Vec<f64> = if total > 0.0 {
        vals.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / d as f64; d]
    };
    let mut diag = CMatrix::zeros(d, d);
    for k in 0..d {
        diag[(k, k)] = C64::new(vals[k], 0.0);
    }
    hermitian_part(&(&eig.eigenvectors * diag * eig.eigenvectors.adjoint()))
}

fn check_shapes(populations: &[Vec<f64>], settings: &[TomographySetting], d: usize) -> Result<(), TomographyError> {
    if populations.len() != settings.len() {
        return Err(TomographyError::IncompleteSettings {
            expected: settings.len(),
            found: populations.len(),
        });
    }
    if let Some(p) = populations.iter().find(|p| p.len() != d) {
        return Err(TomographyError::DimensionMismatch {
            expected: d,
            found: p.len(),
        });
    }
    if let Some(s) = settings.iter().find(|s| s.unitary.nrows() != d) {
        return Err(TomographyError::DimensionMismatch {
            expected: d,
            found: s.unitary.nrows(),
        });
    }
    Ok(())
}

/// Maximum-likelihood state from measured (possibly mitigated) outcome
/// populations, one vector per setting of the complete gate set for `dims`.
///
/// Uses the diluted `RρR` fixed-point iteration started from the positive
/// projection of the linear-inversion estimate.
pub fn qst_mle(populations: &[Vec<f64>], dims: &[usize]) -> Result<MleResult, TomographyError> {
    let settings = match dims {
        [3] => gate_set(GateSetKind::Single),
        [3, 3] => gate_set(GateSetKind::Pair),
        _ => {
            return Err(TomographyError::DimensionMismatch {
                expected: 3,
                found: dims.iter().product(),
            })
        }
    };
    qst_mle_with(populations, &settings, dims)
}

pub fn qst_mle_with(
    populations: &[Vec<f64>],
    settings: &[TomographySetting],
    dims: &[usize],
) -> Result<MleResult, TomographyError> {
    let d: usize = dims.iter().product();
    check_shapes(populations, settings, d)?;
    // clip and renormalize frequencies per setting
    let freqs: Vec<Vec<f64>> = populations
        .iter()
        .map(|p| {
            let clipped: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
            let total: f64 = clipped.iter().sum();
            if total > 0.0 {
                clipped.iter().map(|x| x / total).collect()
            } else {
                vec![1.0 / d as f64; d]
            }
        })
        .collect();
    let start = linear_inversion_state(&freqs, settings, d)?;
    let mix = 1e-6;
    let mut rho = start.map(|z| z * (1.0 - mix)) + CMatrix::identity(d, d).map(|z| z * (mix / d as f64));
    let udag: Vec<CMatrix> = settings.iter().map(|s| s.unitary.adjoint()).collect();
    let n_settings = settings.len() as f64;
    let eval = |rho: &CMatrix| -> (f64, CMatrix) {
        let mut r = CMatrix::zeros(d, d);
        let mut log_l = 0.0;
        for (s, setting) in settings.iter().enumerate() {
            let u = &setting.unitary;
            let rotated = u * rho * &udag[s];
            let mut weights = CMatrix::zeros(d, d);
            for k in 0..d {
                let p = rotated[(k, k)].re.max(1e-300);
                let f = freqs[s][k];
                if f > 0.0 {
                    log_l += f * p.ln();
                    weights[(k, k)] = C64::new(f / p, 0.0);
                }
            }
            r += &udag[s] * weights * u;
        }
        (log_l, r.map(|z| z / n_settings))
    };
    let identity = CMatrix::identity(d, d);
    let (mut log_l, mut r) = eval(&rho);
    let mut iterations = 0;
    while iterations < MLE_MAX_ITERATIONS {
        iterations += 1;
        let step = (&identity + r.map(|z| z * MLE_DILUTION)).map(|z| z / (1.0 + MLE_DILUTION));
        let next = &step * &rho * step.adjoint();
        let tr = next.trace().re;
        rho = hermitian_part(&next.map(|z| z / tr));
        let (next_log_l, next_r) = eval(&rho);
        let gain = next_log_l - log_l;
        log_l = next_log_l;
        r = next_r;
        if gain.abs() < MLE_TOLERANCE {
            break;
        }
    }
    let gradient_norm = (&r - &identity).norm();
    if iterations >= MLE_MAX_ITERATIONS && gradient_norm > 1e-3 {
        return Err(TomographyError::NotConverged {
            iterations,
            gradient_norm,
        });
    }
    Ok(MleResult {
        state: DensityMatrix::from_matrix_symmetrized(dims.to_vec(), rho)?,
        iterations,
        log_likelihood: log_l,
        gradient_norm,
    })
}

/// Exact outcome populations of `rho` for every setting of the matching
/// gate set.
pub fn exact_populations(rho: &DensityMatrix) -> Result<Vec<Vec<f64>>, TomographyError> {
    let kind = match rho.dims() {
        [3] => GateSetKind::Single,
        [3, 3] => GateSetKind::Pair,
        _ => {
            return Err(TomographyError::DimensionMismatch {
                expected: 3,
                found: rho.dim(),
            })
        }
    };
    Ok(gate_set(kind)
        .iter()
        .map(|s| born_probabilities(rho.matrix(), s))
        .collect())
}

/// χ matrix of a qubit channel in the basis `{I, σx, σy, σz}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMatrix {
    pub chi: CMatrix,
}

impl ProcessMatrix {
    pub fn identity_process() -> Self {
        let mut chi = CMatrix::zeros(4, 4);
        chi[(0, 0)] = ONE;
        Self { chi }
    }

    /// Applies `E(ρ) = Σ χ_mn P_m ρ P_n`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let p = paulis();
        let mut out = CMatrix::zeros(2, 2);
        for m in 0..4 {
            for n in 0..4 {
                if self.chi[(m, n)] != ZERO {
                    out += (&p[m] * rho * &p[n]).map(|z| z * self.chi[(m, n)]);
                }
            }
        }
        out
    }
}

/// `I, σx, σy, σz` with `σz = |g⟩⟨g| − |e⟩⟨e|`.
pub fn paulis() -> [CMatrix; 4] {
    let m = |a: [C64; 4]| CMatrix::from_row_slice(2, 2, &a);
    [
        m([ONE, ZERO, ZERO, ONE]),
        m([ZERO, ONE, ONE, ZERO]),
        m([ZERO, -I, I, ZERO]),
        m([ONE, ZERO, ZERO, -ONE]),
    ]
}

/// The six input states `|g⟩, |e⟩, (|g⟩±|e⟩)/√2, (|g⟩±i|e⟩)/√2`.
pub fn mutually_unbiased_inputs() -> Vec<CVector> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = |a: C64, b: C64| CVector::from_vec(vec![a, b]);
    vec![
        v(ONE, ZERO),
        v(ZERO, ONE),
        v(C64::new(s, 0.0), C64::new(s, 0.0)),
        v(C64::new(s, 0.0), C64::new(-s, 0.0)),
        v(C64::new(s, 0.0), C64::new(0.0, s)),
        v(C64::new(s, 0.0), C64::new(0.0, -s)),
    ]
}

/// Least-squares χ from input and output qubit density matrices (outputs
/// need not have unit trace). The result is Hermitized.
pub fn qpt_linear_inversion(inputs: &[CMatrix], outputs: &[CMatrix]) -> Result<ProcessMatrix, TomographyError> {
    if inputs.len() != outputs.len() {
        return Err(TomographyError::IncompleteSettings {
            expected: inputs.len(),
            found: outputs.len(),
        });
    }
    if let Some(m) = inputs.iter().chain(outputs).find(|m| m.nrows() != 2 || m.ncols() != 2) {
        return Err(TomographyError::DimensionMismatch {
            expected: 2,
            found: m.nrows(),
        });
    }
    let p = paulis();
    let rows = 4 * inputs.len();
    let mut a = CMatrix::zeros(rows, 16);
    let mut b = CVector::zeros(rows);
    for (j, (rin, rout)) in inputs.iter().zip(outputs).enumerate() {
        for m in 0..4 {
            for n in 0..4 {
                let term = &p[m] * rin * &p[n];
                for e in 0..4 {
                    a[(4 * j + e, 4 * m + n)] = term[(e / 2, e % 2)];
                }
            }
        }
        for e in 0..4 {
            b[4 * j + e] = rout[(e / 2, e % 2)];
        }
    }
    let svd = a.svd(true, true);
    let rank = svd.rank(1e-9);
    if rank < 16 {
        return Err(TomographyError::RankDeficient(rank));
    }
    let x = svd.solve(&b, 1e-12).map_err(|_| TomographyError::RankDeficient(rank))?;
    let chi = hermitian_part(&CMatrix::from_fn(4, 4, |m, n| x[4 * m + n]));
    Ok(ProcessMatrix { chi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qops::{basis_ket, projector};
    use rand::{Rng, SeedableRng};

    fn random_state(d: usize, rank: usize, seed: u64) -> CMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(d, rank, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &g * g.adjoint();
        let tr = m.trace();
        m.map(|z| z / tr)
    }

    fn is_unitary(u: &CMatrix) -> bool {
        (u * u.adjoint() - CMatrix::identity(u.nrows(), u.nrows()))
            .iter()
            .all(|z| z.norm() < 1e-12)
    }

    #[test]
    fn gate_sets_have_expected_sizes() {
        let single = gate_set(GateSetKind::Single);
        assert_eq!(single.len(), 9);
        assert_eq!(single[0].unitary, CMatrix::identity(3, 3));
        assert!(single.iter().all(|s| is_unitary(&s.unitary)));
        let pair = gate_set(GateSetKind::Pair);
        assert_eq!(pair.len(), 81);
        assert!(pair.iter().all(|s| is_unitary(&s.unitary)));
    }

    #[test]
    fn single_gate_set_is_complete() {
        let a = design_matrix(&gate_set(GateSetKind::Single), 3);
        assert_eq!(a.svd(false, false).rank(1e-9), 9);
    }

    #[test]
    fn pi_rotation_swaps_populations() {
        let u = rotation(Transition::Ge, PI, 0.0);
        let e = projector(3, 1);
        let out = &u * e * u.adjoint();
        assert!((out[(0, 0)].re - 1.0).abs() < 1e-15);
        let setting = &gate_set(GateSetKind::Single)[3];
        let p = born_probabilities(&projector(3, 1), setting);
        assert!((p[0] - 1.0).abs() < 1e-15);
        let p0 = born_probabilities(&projector(3, 0), &gate_set(GateSetKind::Single)[0]);
        assert_eq!(p0, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn rotation_axis_convention() {
        // R^{π/2}_y|g⟩ = (|g⟩ + |e⟩)/√2
        let u = rotation(Transition::Ge, HALF_PI, HALF_PI);
        let out = &u * basis_ket(3, 0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((out[0] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((out[1] - C64::new(s, 0.0)).norm() < 1e-15);
        // R^π_x|g⟩ = −i|e⟩
        let out = rotation(Transition::Ge, PI, 0.0) * basis_ket(3, 0);
        assert!((out[1] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for seed in 0..5 {
            let rho = random_state(9, 9, seed);
            for s in gate_set(GateSetKind::Pair).iter().step_by(7) {
                let sum: f64 = born_probabilities(&rho, s).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
        0.5 * crate::qops::hermitian_eigenvalues(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
    }

    #[test]
    fn mle_round_trip_pure_qutrit() {
        for seed in 0..4 {
            let rho = random_state(3, 1, 100 + seed);
            let state = DensityMatrix::new(vec![3], rho.clone()).unwrap();
            let pops = exact_populations(&state).unwrap();
            let fit = qst_mle(&pops, &[3]).unwrap();
            assert!(trace_distance(fit.state.matrix(), &rho) < 1e-4);
        }
    }

    #[test]
    fn mle_round_trip_mixed_two_qutrit() {
        let rho = random_state(9, 3, 7);
        let state = DensityMatrix::new(vec![3, 3], rho.clone()).unwrap();
        let pops = exact_populations(&state).unwrap();
        let fit = qst_mle(&pops, &[3, 3]).unwrap();
        let hs = (fit.state.matrix() - &rho).norm();
        assert!(hs < 1e-3, "{hs}");
        assert!(fit.state.min_eigenvalue() >= -1e-10);
        assert!((fit.state.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mle_maximally_mixed() {
        let pops = vec![vec![1.0 / 3.0; 3]; 9];
        let fit = qst_mle(&pops, &[3]).unwrap();
        let target = CMatrix::identity(3, 3).map(|z| z / 3.0);
        assert!((fit.state.matrix() - target).norm() < 1e-8);
        let pops = vec![vec![1.0 / 9.0; 9]; 81];
        let fit = qst_mle(&pops, &[3, 3]).unwrap();
        let target = CMatrix::identity(9, 9).map(|z| z / 9.0);
        assert!((fit.state.matrix() - target).norm() < 1e-8);
    }

    #[test]
    fn mle_returns_physical_state_for_unphysical_data() {
        let mut pops = exact_populations(&DensityMatrix::new(vec![3], random_state(3, 1, 3)).unwrap()).unwrap();
        pops[2][0] -= 0.05;
        pops[2][1] += 0.08;
        pops[5][2] = -0.02;
        let fit = qst_mle(&pops, &[3]).unwrap();
        assert!(fit.state.min_eigenvalue() >= -1e-10);
        assert!((fit.state.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mle_rejects_incomplete_data() {
        let pops = vec![vec![1.0, 0.0, 0.0]; 8];
        assert!(matches!(
            qst_mle(&pops, &[3]),
            Err(TomographyError::IncompleteSettings { .. })
        ));
    }

    fn outputs_of(channel: impl Fn(&CMatrix) -> CMatrix) -> (Vec<CMatrix>, Vec<CMatrix>) {
        let inputs: Vec<CMatrix> = mutually_unbiased_inputs().iter().map(|v| v * v.adjoint()).collect();
        let outputs = inputs.iter().map(&channel).collect();
        (inputs, outputs)
    }

    #[test]
    fn qpt_identity_channel() {
        let (i, o) = outputs_of(|r| r.clone());
        let chi = qpt_linear_inversion(&i, &o).unwrap().chi;
        assert!((chi - ProcessMatrix::identity_process().chi).norm() < 1e-12);
    }

    #[test]
    fn qpt_depolarizing_channel() {
        let (i, o) = outputs_of(|r| CMatrix::identity(2, 2).map(|z| z * (r.trace() / 2.0)));
        let chi = qpt_linear_inversion(&i, &o).unwrap().chi;
        let target = CMatrix::identity(4, 4).map(|z| z / 4.0);
        assert!((chi - target).norm() < 1e-12);
    }

    #[test]
    fn qpt_amplitude_damping_matches_kraus() {
        let gamma: f64 = 0.3;
        let k0 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, C64::new((1.0 - gamma).sqrt(), 0.0)]);
        let k1 = CMatrix::from_row_slice(2, 2, &[ZERO, C64::new(gamma.sqrt(), 0.0), ZERO, ZERO]);
        let (i, o) = outputs_of(|r| &k0 * r * k0.adjoint() + &k1 * r * k1.adjoint());
        let chi = qpt_linear_inversion(&i, &o).unwrap().chi;
        // Kraus → χ: expand each K in the Pauli basis, c_m = Tr(P_m K)/2
        let p = paulis();
        let mut oracle = CMatrix::zeros(4, 4);
        for k in [&k0, &k1] {
            let c: Vec<C64> = p.iter().map(|pm| (pm * k).trace() / 2.0).collect();
            for m in 0..4 {
                for n in 0..4 {
                    oracle[(m, n)] += c[m] * c[n].conj();
                }
            }
        }
        assert!((chi - oracle).norm() < 1e-6);
    }

    #[test]
    fn qpt_unitary_channel_has_rank_one() {
        let u = rotation(Transition::Ge, 0.7, 0.3).view((0, 0), (2, 2)).into_owned();
        let (i, o) = outputs_of(|r| &u * r * u.adjoint());
        let chi = qpt_linear_inversion(&i, &o).unwrap().chi;
        let mut ev = crate::qops::hermitian_eigenvalues(&chi);
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(ev[1].abs() < 1e-6);
        let pm = ProcessMatrix { chi };
        let rho = &i[4];
        assert!((pm.apply(rho) - &u * rho * u.adjoint()).norm() < 1e-9);
    }

    #[test]
    fn qpt_rejects_too_few_inputs() {
        let (i, o) = outputs_of(|r| r.clone());
        assert!(matches!(
            qpt_linear_inversion(&i[..3], &o[..3]),
            Err(TomographyError::RankDeficient(_))
        ));
    }
}
