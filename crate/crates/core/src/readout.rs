//! Synthetic single-shot qutrit readout: Gaussian clusters in the u–v plane,
//! MAP classification, assignment matrices and `R⁻¹` mitigation.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::ReadoutError;

pub const LEVEL_LABELS: [&str; 3] = ["g", "e", "f"];

/// Shots per prepared state used for calibration runs.
pub const DEFAULT_SHOTS: usize = 25_000;

/// Cluster separation (in units of the cluster width) of the synthetic
/// default models. Large enough that cluster overlap is well below every
/// measured misassignment entry.
pub const DEFAULT_SEPARATION: f64 = 7.0;

pub type Shot = [f64; 2];

/// Three Gaussian clusters with a shared covariance.
///
/// `transitions[k][s]` is the probability that a qutrit prepared in `s`
/// ends up in cluster `k` during the measurement (relaxation and
/// excitation while integrating). Columns sum to one. The fitted model of
/// [`fit_mixture`] always has identity transitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: [f64; 3],
    pub means: [[f64; 2]; 3],
    pub covariance: [[f64; 2]; 2],
    pub transitions: [[f64; 3]; 3],
}

const IDENTITY3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_probabilities(p: &[f64], len: usize) -> Result<(), ReadoutError> {
    if p.len() != len {
        return Err(ReadoutError::DimensionMismatch {
            expected: len,
            found: p.len(),
        });
    }
    if p.iter().any(|&x| !x.is_finite() || x < -1e-12) {
        return Err(ReadoutError::InvalidProbabilities(format!("{p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(ReadoutError::InvalidProbabilities(format!("sum {sum}")));
    }
    Ok(())
}

fn draw_index(rng: &mut impl Rng, p: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &w) in p.iter().enumerate() {
        acc += w.max(0.0);
        if u < acc {
            return k;
        }
    }
    // rounding: fall back to the last nonzero entry
    p.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

impl MixtureModel {
    pub fn new(weights: [f64; 3], means: [[f64; 2]; 3], covariance: [[f64; 2]; 2]) -> Result<Self, ReadoutError> {
        let model = Self {
            weights,
            means,
            covariance,
            transitions: IDENTITY3,
        };
        model.validate()?;
        Ok(model)
    }

    /// Equal weights, unit isotropic covariance and means on an equilateral
    /// triangle with side `separation`.
    pub fn symmetric(separation: f64) -> Self {
        let r = separation / 3f64.sqrt();
        let means = std::array::from_fn(|k| {
            let phi = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            [r * phi.cos(), r * phi.sin()]
        });
        Self {
            weights: [1.0 / 3.0; 3],
            means,
            covariance: [[1.0, 0.0], [0.0, 1.0]],
            transitions: IDENTITY3,
        }
    }

    /// Symmetric clusters plus the transition matrix that makes the analytic
    /// assignment matrix equal `target`.
    pub fn calibrated(target: &AssignmentMatrix, separation: f64) -> Result<Self, ReadoutError> {
        if target.dim() != 3 {
            return Err(ReadoutError::DimensionMismatch {
                expected: 3,
                found: target.dim(),
            });
        }
        let mut model = Self::symmetric(separation);
        let q = model.cluster_overlap();
        let q_inv = q.try_inverse().ok_or(ReadoutError::SingularMatrix)?;
        let t = q_inv * target.to_matrix();
        for k in 0..3 {
            for s in 0..3 {
                if t[(k, s)] < -1e-9 {
                    return Err(ReadoutError::InvalidProbabilities(format!(
                        "cluster overlap at separation {separation} exceeds target misassignment"
                    )));
                }
            }
        }
        for s in 0..3 {
            let col: Vec<f64> = (0..3).map(|k| t[(k, s)].max(0.0)).collect();
            let sum: f64 = col.iter().sum();
            for k in 0..3 {
                model.transitions[k][s] = col[k] / sum;
            }
        }
        Ok(model)
    }

    /// Default synthetic model for node A.
    pub fn node_a() -> Self {
        Self::calibrated(&AssignmentMatrix::measured_node_a(), DEFAULT_SEPARATION).expect("reference table is calibratable")
    }

    pub fn node_b() -> Self {
        Self::calibrated(&AssignmentMatrix::measured_node_b(), DEFAULT_SEPARATION).expect("reference table is calibratable")
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        if self.weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(ReadoutError::InvalidProbabilities(format!("{:?}", self.weights)));
        }
        let c = self.cov();
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-12 || c.cholesky().is_none() || !(c.determinant() > 1e-300) {
            return Err(ReadoutError::DegenerateCovariance);
        }
        for s in 0..3 {
            let col: Vec<f64> = (0..3).map(|k| self.transitions[k][s]).collect();
            check_probabilities(&col, 3)?;
        }
        Ok(())
    }

    fn cov(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.covariance[0][0],
            self.covariance[0][1],
            self.covariance[1][0],
            self.covariance[1][1],
        )
    }

    fn mean(&self, k: usize) -> Vector2<f64> {
        Vector2::new(self.means[k][0], self.means[k][1])
    }

    /// `ln(A_k N(x; μ_k, Σ))`.
    pub fn log_component(&self, x: Shot, k: usize) -> f64 {
        let c = self.cov();
        let inv = c.try_inverse().unwrap_or_else(Matrix2::zeros);
        let d = Vector2::new(x[0], x[1]) - self.mean(k);
        let q = (d.transpose() * inv * d)[(0, 0)];
        self.weights[k].ln() - 0.5 * q - (2.0 * std::f64::consts::PI).ln() - 0.5 * c.determinant().ln()
    }

    /// Log of the mixture density at `x`.
    pub fn log_density(&self, x: Shot) -> f64 {
        let l: Vec<f64> = (0..3).map(|k| self.log_component(x, k)).collect();
        let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    }

    /// Maximum-a-posteriori label. Exact ties go to the lower level.
    pub fn classify(&self, x: Shot) -> usize {
        let mut best = 0;
        let mut best_score = self.log_component(x, 0);
        for k in 1..3 {
            let s = self.log_component(x, k);
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        best
    }

    /// `Q[(k', k)] = P(label k' | shot drawn from cluster k)`, by quadrature
    /// over the whitened plane: an erf for the inner coordinate and Simpson's
    /// rule for the outer one.
    pub fn cluster_overlap(&self) -> DMatrix<f64> {
        let c = self.cov();
        let inv = c.try_inverse().unwrap_or_else(Matrix2::zeros);
        let chol = c.cholesky().map(|ch| ch.l()).unwrap_or_else(Matrix2::identity);
        // The whitened density is isotropic, so the frame may be rotated
        // freely. Pick the angle that keeps every boundary far from parallel
        // to the inner axis; a boundary along it would make the outer
        // integrand jump.
        let boundary_tilt = |l: &Matrix2<f64>| {
            let w: Vec<Vector2<f64>> = (0..3).map(|j| l.transpose() * inv * self.mean(j)).collect();
            [(0, 1), (0, 2), (1, 2)]
                .iter()
                .map(|&(i, j)| {
                    let d = w[j] - w[i];
                    d[1].abs() / d.norm().max(1e-300)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let l = (0..24)
            .map(|n| {
                let a = 0.1 + std::f64::consts::PI * n as f64 / 24.0;
                chol * Matrix2::new(a.cos(), -a.sin(), a.sin(), a.cos())
            })
            .max_by(|x, y| boundary_tilt(x).total_cmp(&boundary_tilt(y)))
            .unwrap_or(chol);
        let mut q = DMatrix::zeros(3, 3);
        const N: usize = 4001;
        const HALF_WIDTH: f64 = 10.0;
        let h = 2.0 * HALF_WIDTH / (N - 1) as f64;
        for k in 0..3 {
            // scores in whitened coordinates z with x = μ_k + L z
            let w: Vec<Vector2<f64>> = (0..3).map(|j| l.transpose() * inv * self.mean(j)).collect();
            let b: Vec<f64> = (0..3)
                .map(|j| {
                    let mj = self.mean(j);
                    self.weights[j].ln() - 0.5 * (mj.transpose() * inv * mj)[(0, 0)]
                        + (mj.transpose() * inv * self.mean(k))[(0, 0)]
                })
                .collect();
            for j in 0..3 {
                let mut acc = 0.0;
                for n in 0..N {
                    let t = -HALF_WIDTH + h * n as f64;
                    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                    let mut empty = false;
                    for i in (0..3).filter(|&i| i != j) {
                        let dw = w[j] - w[i];
                        let cst = dw[0] * t + b[j] - b[i];
                        if dw[1].abs() < 1e-14 {
                            empty |= cst < 0.0;
                        } else if dw[1] > 0.0 {
                            lo = lo.max(-cst / dw[1]);
                        } else {
                            hi = hi.min(-cst / dw[1]);
                        }
                    }
                    if empty || hi <= lo {
                        continue;
                    }
                    let inner = std_normal_cdf(hi) - std_normal_cdf(lo);
                    let simpson = if n == 0 || n == N - 1 {
                        1.0
                    } else if n % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    let phi = (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
                    acc += simpson * phi * inner;
                }
                q[(j, k)] = acc * h / 3.0;
            }
        }
        q
    }

    pub fn transition_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, 3, |k, s| self.transitions[k][s])
    }

    /// Analytic assignment matrix `Q · T` of this model.
    pub fn analytic_assignment(&self) -> AssignmentMatrix {
        AssignmentMatrix::from_matrix(&(self.cluster_overlap() * self.transition_matrix()))
    }

    fn draw_shot(&self, rng: &mut impl Rng, level: usize, chol: &Matrix2<f64>) -> Shot {
        let col: Vec<f64> = (0..3).map(|k| self.transitions[k][level]).collect();
        let k = draw_index(rng, &col);
        let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let x = self.mean(k) + chol * z;
        [x[0], x[1]]
    }

    fn chol(&self) -> Matrix2<f64> {
        self.cov().cholesky().map(|c| c.l()).unwrap_or_else(Matrix2::identity)
    }

    /// Draws `n` shots with levels distributed as `rho_diag`; returns the
    /// shots together with the level each one was prepared in.
    pub fn sample_labeled(&self, rho_diag: &[f64], n: usize, rng: &mut impl Rng) -> Result<Vec<(Shot, usize)>, ReadoutError> {
        check_probabilities(rho_diag, 3)?;
        let chol = self.chol();
        Ok((0..n)
            .map(|_| {
                let s = draw_index(rng, rho_diag);
                (self.draw_shot(rng, s, &chol), s)
            })
            .collect())
    }

    /// Assigned-label counts for `n` shots of a qutrit with populations `p`.
    pub fn sample_counts(&self, p: &[f64], n: usize, rng: &mut impl Rng) -> Result<[u64; 3], ReadoutError> {
        let mut counts = [0u64; 3];
        for (shot, _) in self.sample_labeled(p, n, rng)? {
            counts[self.classify(shot)] += 1;
        }
        Ok(counts)
    }
}

/// `n` shots drawn from `model` with level probabilities `rho_diag`.
pub fn sample_shots(rho_diag: &[f64], model: &MixtureModel, n: usize, seed: u64) -> Result<Vec<Shot>, ReadoutError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(model
        .sample_labeled(rho_diag, n, &mut rng)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

pub fn classify(shot: Shot, model: &MixtureModel) -> usize {
    model.classify(shot)
}

/// Joint assigned-label counts (index `3·a + b`) for two independently
/// read-out qutrits with joint populations `p` over the same index.
pub fn sample_two_node_counts(
    p: &[f64],
    model_a: &MixtureModel,
    model_b: &MixtureModel,
    n: usize,
    rng: &mut impl Rng,
) -> Result<[u64; 9], ReadoutError> {
    check_probabilities(p, 9)?;
    let (ca, cb) = (model_a.chol(), model_b.chol());
    let mut counts = [0u64; 9];
    for _ in 0..n {
        let joint = draw_index(rng, p);
        let sa = model_a.draw_shot(rng, joint / 3, &ca);
        let sb = model_b.draw_shot(rng, joint % 3, &cb);
        counts[3 * model_a.classify(sa) + model_b.classify(sb)] += 1;
    }
    Ok(counts)
}

/// Maximum-likelihood three-component mixture with shared covariance,
/// fitted by expectation maximization over all shots. Components are
/// seeded from the per-preparation means so labels follow the prepared
/// level.
pub fn fit_mixture(shots_by_prepared: &[Vec<Shot>]) -> Result<MixtureModel, ReadoutError> {
    if shots_by_prepared.len() != 3 {
        return Err(ReadoutError::DimensionMismatch {
            expected: 3,
            found: shots_by_prepared.len(),
        });
    }
    if let Some(few) = shots_by_prepared.iter().find(|s| s.len() < 3) {
        return Err(ReadoutError::TooFewShots { need: 3, got: few.len() });
    }
    let to_v = |s: &Shot| Vector2::new(s[0], s[1]);
    let mut means: Vec<Vector2<f64>> = shots_by_prepared
        .iter()
        .map(|set| set.iter().map(to_v).sum::<Vector2<f64>>() / set.len() as f64)
        .collect();
    let total: usize = shots_by_prepared.iter().map(Vec::len).sum();
    let mut cov = Matrix2::zeros();
    for (set, m) in shots_by_prepared.iter().zip(&means) {
        for s in set {
            let d = to_v(s) - m;
            cov += d * d.transpose();
        }
    }
    cov /= total as f64;
    let all: Vec<Vector2<f64>> = shots_by_prepared.iter().flatten().map(to_v).collect();
    let mut weights = [1.0 / 3.0; 3];
    let mut prev = f64::NEG_INFINITY;
    let mut resp = vec![[0.0; 3]; all.len()];
    for _ in 0..500 {
        if !(cov.determinant() > 1e-300) || cov.cholesky().is_none() {
            return Err(ReadoutError::DegenerateCovariance);
        }
        let model = MixtureModel {
            weights,
            means: std::array::from_fn(|k| [means[k][0], means[k][1]]),
            covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
            transitions: IDENTITY3,
        };
        let mut log_l = 0.0;
        for (x, r) in all.iter().zip(resp.iter_mut()) {
            let l: [f64; 3] = std::array::from_fn(|k| model.log_component([x[0], x[1]], k));
            let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: [f64; 3] = std::array::from_fn(|k| (l[k] - m).exp());
            let z: f64 = e.iter().sum();
            log_l += m + z.ln();
            *r = std::array::from_fn(|k| e[k] / z);
        }
        if log_l - prev < 1e-9 * all.len() as f64 {
            return Ok(model);
        }
        prev = log_l;
        let nk: [f64; 3] = std::array::from_fn(|k| resp.iter().map(|r| r[k]).sum());
        weights = std::array::from_fn(|k| nk[k] / all.len() as f64);
        for k in 0..3 {
            if nk[k] > 0.0 {
                means[k] = all.iter().zip(&resp).map(|(x, r)| x * r[k]).sum::<Vector2<f64>>() / nk[k];
            }
        }
        cov = Matrix2::zeros();
        for (x, r) in all.iter().zip(&resp) {
            for k in 0..3 {
                let d = x - means[k];
                cov += d * d.transpose() * r[k];
            }
        }
        cov /= all.len() as f64;
    }
    let model = MixtureModel {
        weights,
        means: std::array::from_fn(|k| [means[k][0], means[k][1]]),
        covariance: [[cov[(0, 0)], cov[(0, 1)]], [cov[(1, 0)], cov[(1, 1)]]],
        transitions: IDENTITY3,
    };
    model.validate()?;
    Ok(model)
}

/// Sum of `ln f(x)` over `shots`.
pub fn log_likelihood(model: &MixtureModel, shots: &[Shot]) -> f64 {
    shots.iter().map(|&s| model.log_density(s)).sum()
}

/// `R[(assigned, prepared)]`: columns index the prepared state and sum to
/// one, so that measured frequencies are `M = R · p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    /// Row-major entries, `rows[assigned][prepared]`.
    pub rows: Vec<Vec<f64>>,
}

impl AssignmentMatrix {
    pub fn identity(d: usize) -> Self {
        Self::from_matrix(&DMatrix::identity(d, d))
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self {
            rows: (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| self.rows[i][j])
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, assigned: usize, prepared: usize) -> f64 {
        self.rows[assigned][prepared]
    }

    /// Empirical conditional frequencies from `counts[prepared][assigned]`.
    pub fn from_counts(counts: &[Vec<u64>]) -> Result<Self, ReadoutError> {
        let d = counts.len();
        let mut m = DMatrix::zeros(d, d);
        for (s, row) in counts.iter().enumerate() {
            if row.len() != d {
                return Err(ReadoutError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            let n: u64 = row.iter().sum();
            if n == 0 {
                return Err(ReadoutError::EmptyColumn(s));
            }
            for (k, &c) in row.iter().enumerate() {
                m[(k, s)] = c as f64 / n as f64;
            }
        }
        Ok(Self::from_matrix(&m))
    }

    /// From a table of percentages laid out with prepared states as columns;
    /// each column is renormalized to absorb rounding.
    pub fn from_percent_rows(rows: &[[f64; 3]; 3]) -> Self {
        let mut m = DMatrix::from_fn(3, 3, |i, j| rows[i][j]);
        for j in 0..3 {
            let s: f64 = m.column(j).sum();
            m.column_mut(j).scale_mut(1.0 / s);
        }
        Self::from_matrix(&m)
    }

    /// Measured single-shot assignment of qutrit A.
    pub fn measured_node_a() -> Self {
        Self::from_percent_rows(&[[98.2, 5.0, 1.3], [1.0, 93.3, 4.8], [0.8, 1.7, 94.0]])
    }

    pub fn measured_node_b() -> Self {
        Self::from_percent_rows(&[[98.5, 3.9, 1.2], [0.9, 93.5, 6.1], [0.6, 2.5, 92.7]])
    }

    /// Joint assignment of two independently read-out qutrits, index
    /// `3·s_A + s_B` on both axes.
    pub fn two_node(a: &Self, b: &Self) -> Self {
        Self::from_matrix(&a.to_matrix().kronecker(&b.to_matrix()))
    }

    /// `‖I − R‖₁ / (2d)` with the entrywise 1-norm: the mean probability of
    /// misassigning a prepared basis state.
    pub fn error_probability(&self) -> f64 {
        let d = self.dim();
        let diff = DMatrix::identity(d, d) - self.to_matrix();
        diff.iter().map(|x| x.abs()).sum::<f64>() / (2.0 * d as f64)
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.to_matrix().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    pub fn max_column_defect(&self) -> f64 {
        let m = self.to_matrix();
        (0..self.dim()).map(|j| (m.column(j).sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Output of [`mitigate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mitigation {
    /// `R⁻¹ M`, not clipped.
    pub populations: Vec<f64>,
    pub condition_number: f64,
    pub error_probability: f64,
    pub warnings: Vec<String>,
}

pub fn mitigate(measured: &[f64], r: &AssignmentMatrix) -> Result<Mitigation, ReadoutError> {
    let d = r.dim();
    if measured.len() != d {
        return Err(ReadoutError::DimensionMismatch {
            expected: d,
            found: measured.len(),
        });
    }
    let cond = r.condition_number();
    if !cond.is_finite() || cond > 1e12 {
        return Err(ReadoutError::SingularMatrix);
    }
    let p = r
        .to_matrix()
        .lu()
        .solve(&DVector::from_column_slice(measured))
        .ok_or(ReadoutError::SingularMatrix)?;
    let warnings = p
        .iter()
        .enumerate()
        .filter(|(_, &x)| !(-0.02..=1.02).contains(&x))
        .map(|(k, x)| format!("mitigated population {k} = {x:.4} outside [-0.02, 1.02]"))
        .collect();
    Ok(Mitigation {
        populations: p.iter().cloned().collect(),
        condition_number: cond,
        error_probability: r.error_probability(),
        warnings,
    })
}

/// Frequencies from counts.
pub fn frequencies(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

/// Simulates the calibration experiment: `shots` repetitions of each
/// basis state, classified by `model`, returns `counts[prepared][assigned]`.
pub fn calibration_counts(model: &MixtureModel, shots: usize, seed: u64) -> Result<Vec<Vec<u64>>, ReadoutError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..3)
        .map(|s| {
            let mut p = [0.0; 3];
            p[s] = 1.0;
            model.sample_counts(&p, shots, &mut rng).map(|c| c.to_vec())
        })
        .collect()
}

/// CSV with columns `u, v, prepared, assigned`.
pub fn shots_csv(shots: &[(Shot, usize)], model: &MixtureModel) -> String {
    let mut out = String::from("u,v,prepared,assigned\n");
    for (s, p) in shots {
        out.push_str(&format!(
            "{},{},{},{}\n",
            crate::io::fmt9(s[0]),
            crate::io::fmt9(s[1]),
            LEVEL_LABELS[*p],
            LEVEL_LABELS[model.classify(*s)]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial_sigma(p: f64, n: usize) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn pure_ground_state_uses_component_g() {
        let m = MixtureModel::symmetric(12.0);
        let shots = sample_shots(&[1.0, 0.0, 0.0], &m, 2000, 1).unwrap();
        assert!(shots.iter().all(|&s| m.classify(s) == 0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = MixtureModel::node_a();
        let a = sample_shots(&[0.2, 0.5, 0.3], &m, 500, 42).unwrap();
        let b = sample_shots(&[0.2, 0.5, 0.3], &m, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_shots(&[0.2, 0.5, 0.3], &m, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_mean_converges() {
        let m = MixtureModel::symmetric(5.0);
        let p = [0.5, 0.3, 0.2];
        let expected: f64 = (0..3).map(|k| p[k] * m.means[k][0]).sum();
        for n in [1000usize, 100_000] {
            let shots = sample_shots(&p, &m, n, 3).unwrap();
            let mean: f64 = shots.iter().map(|s| s[0]).sum::<f64>() / n as f64;
            // spread of u is dominated by the cluster positions, a few units
            assert!((mean - expected).abs() < 5.0 * 3.0 / (n as f64).sqrt(), "{n}: {mean} vs {expected}");
        }
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let m = MixtureModel::symmetric(5.0);
        assert!(sample_shots(&[0.5, 0.6, 0.0], &m, 10, 0).is_err());
        assert!(sample_shots(&[1.1, -0.1, 0.0], &m, 10, 0).is_err());
        assert!(sample_shots(&[0.5, 0.5], &m, 10, 0).is_err());
    }

    #[test]
    fn classify_ties_break_to_lower_level() {
        let m = MixtureModel::symmetric(4.0);
        assert_eq!(m.classify(m.means[0]), 0);
        assert_eq!(m.classify(m.means[2]), 2);
        let mid = [
            0.5 * (m.means[0][0] + m.means[1][0]),
            0.5 * (m.means[0][1] + m.means[1][1]),
        ];
        // make the tie exact
        let mut m2 = m.clone();
        m2.means = [[-1.0, 0.0], [1.0, 0.0], [0.0, 10.0]];
        assert_eq!(m2.classify([0.0, 0.0]), 0);
        let l = m.classify(mid);
        assert!(l == 0 || l == 1);
    }

    #[test]
    fn overlap_matches_one_dimensional_closed_form() {
        // two clusters far from the third: pairwise error is Φ(−d/2)
        let mut m = MixtureModel::symmetric(4.0);
        m.means = [[-1.5, 0.0], [1.5, 0.0], [0.0, 200.0]];
        let q = m.cluster_overlap();
        let exact = std_normal_cdf(-1.5);
        assert!((q[(1, 0)] - exact).abs() < 1e-9, "{} vs {exact}", q[(1, 0)]);
        assert!((q[(0, 0)] - (1.0 - exact)).abs() < 1e-9);
        for k in 0..3 {
            assert!((q.column(k).sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn overlap_agrees_with_monte_carlo() {
        let mut m = MixtureModel::symmetric(3.0);
        m.covariance = [[1.3, 0.4], [0.4, 0.8]];
        m.weights = [0.5, 0.3, 0.2];
        let q = m.cluster_overlap();
        let n = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..3 {
            let mut p = [0.0; 3];
            p[k] = 1.0;
            let c = m.sample_counts(&p, n, &mut rng).unwrap();
            for j in 0..3 {
                let f = c[j] as f64 / n as f64;
                assert!((f - q[(j, k)]).abs() < 4.0 * binomial_sigma(q[(j, k)], n) + 1e-6);
            }
        }
    }

    #[test]
    fn calibrated_models_reproduce_reference_tables_analytically() {
        for (model, table) in [
            (MixtureModel::node_a(), AssignmentMatrix::measured_node_a()),
            (MixtureModel::node_b(), AssignmentMatrix::measured_node_b()),
        ] {
            model.validate().unwrap();
            let r = model.analytic_assignment();
            assert!((r.to_matrix() - table.to_matrix()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn too_small_separation_cannot_calibrate() {
        assert!(MixtureModel::calibrated(&AssignmentMatrix::measured_node_a(), 2.0).is_err());
    }

    #[test]
    fn reference_tables_are_column_stochastic() {
        let a = AssignmentMatrix::measured_node_a();
        assert!(a.max_column_defect() < 1e-12);
        assert!((a.get(0, 0) - 0.982).abs() < 1e-12);
        assert!((a.get(1, 0) - 0.010).abs() < 1e-12);
        assert!((a.error_probability() - 0.0484).abs() < 0.002);
    }

    #[test]
    fn two_node_is_outer_product() {
        let a = AssignmentMatrix::measured_node_a();
        let b = AssignmentMatrix::measured_node_b();
        let r = AssignmentMatrix::two_node(&a, &b);
        assert_eq!(r.dim(), 9);
        for sa in 0..3 {
            for sb in 0..3 {
                for ta in 0..3 {
                    for tb in 0..3 {
                        let v = r.get(3 * ta + tb, 3 * sa + sb);
                        assert!((v - a.get(ta, sa) * b.get(tb, sb)).abs() < 1e-12);
                    }
                }
            }
        }
        assert!((r.get(0, 0) - 0.982 * 0.985).abs() < 1e-12);
        let id = AssignmentMatrix::two_node(&AssignmentMatrix::identity(3), &AssignmentMatrix::identity(3));
        assert_eq!(id, AssignmentMatrix::identity(9));
    }

    #[test]
    fn from_counts_and_empty_column() {
        let r = AssignmentMatrix::from_counts(&[vec![9, 1, 0], vec![0, 10, 0], vec![0, 5, 5]]).unwrap();
        assert!((r.get(1, 0) - 0.1).abs() < 1e-15);
        assert!((r.get(1, 2) - 0.5).abs() < 1e-15);
        assert!(matches!(
            AssignmentMatrix::from_counts(&[vec![1, 0, 0], vec![0, 0, 0], vec![0, 0, 1]]),
            Err(ReadoutError::EmptyColumn(1))
        ));
    }

    #[test]
    fn mitigate_inverts_exactly() {
        let r = AssignmentMatrix::measured_node_b();
        let p = DVector::from_vec(vec![0.5, 0.3, 0.2]);
        let m = r.to_matrix() * &p;
        let out = mitigate(m.as_slice(), &r).unwrap();
        for k in 0..3 {
            assert!((out.populations[k] - p[k]).abs() < 1e-12);
        }
        assert!(out.warnings.is_empty());
        let same = mitigate(&[0.2, 0.3, 0.5], &AssignmentMatrix::identity(3)).unwrap();
        assert_eq!(same.populations, vec![0.2, 0.3, 0.5]);
        let singular = AssignmentMatrix::from_percent_rows(&[[50.0, 50.0, 0.0], [50.0, 50.0, 0.0], [0.0, 0.0, 100.0]]);
        assert!(matches!(mitigate(&[0.3, 0.3, 0.4], &singular), Err(ReadoutError::SingularMatrix)));
    }

    #[test]
    fn mitigate_flags_unphysical_output() {
        let r = AssignmentMatrix::from_percent_rows(&[[80.0, 10.0, 10.0], [10.0, 80.0, 10.0], [10.0, 10.0, 80.0]]);
        let out = mitigate(&[1.0, 0.0, 0.0], &r).unwrap();
        assert!(!out.warnings.is_empty());
    }

    #[test]
    fn fit_recovers_means() {
        let truth = MixtureModel::symmetric(6.0);
        let n = 3000;
        let sets: Vec<Vec<Shot>> = (0..3)
            .map(|k| {
                let mut p = [0.0; 3];
                p[k] = 1.0;
                sample_shots(&p, &truth, n, 10 + k as u64).unwrap()
            })
            .collect();
        let fit = fit_mixture(&sets).unwrap();
        for k in 0..3 {
            for c in 0..2 {
                assert!((fit.means[k][c] - truth.means[k][c]).abs() < 3.0 / (n as f64).sqrt() * 1.5);
            }
        }
        let pooled: Vec<Shot> = sets.iter().flatten().cloned().collect();
        assert!(log_likelihood(&fit, &pooled) >= log_likelihood(&truth, &pooled));
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        let sets = vec![vec![[1.0, 1.0]; 5], vec![[2.0, 1.0]; 5], vec![[3.0, 1.0]; 5]];
        assert!(matches!(fit_mixture(&sets), Err(ReadoutError::DegenerateCovariance)));
        let short = vec![vec![[1.0, 1.0]; 2], vec![[2.0, 1.0]; 5], vec![[3.0, 1.0]; 5]];
        assert!(matches!(fit_mixture(&short), Err(ReadoutError::TooFewShots { .. })));
    }

    #[test]
    fn mitigation_error_shrinks_with_shots() {
        let model = MixtureModel::node_a();
        let r = AssignmentMatrix::measured_node_a();
        let p = [0.5, 0.3, 0.2];
        let mut errors = Vec::new();
        for (i, n) in [1_000usize, 10_000, 100_000].into_iter().enumerate() {
            // average over a few seeds to tame the noise of a single draw
            let mut acc = 0.0;
            for s in 0..8 {
                let mut rng = ChaCha8Rng::seed_from_u64(100 * i as u64 + s);
                let c = model.sample_counts(&p, n, &mut rng).unwrap();
                let out = mitigate(&frequencies(&c), &r).unwrap();
                acc += (0..3).map(|k| (out.populations[k] - p[k]).powi(2)).sum::<f64>().sqrt();
            }
            errors.push(acc / 8.0);
        }
        assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
        assert!(errors[2] < 0.01);
    }

    #[test]
    fn shots_csv_has_header() {
        let m = MixtureModel::symmetric(6.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let shots = m.sample_labeled(&[1.0, 0.0, 0.0], 3, &mut rng).unwrap();
        let csv = shots_csv(&shots, &m);
        assert!(csv.starts_with("u,v,prepared,assigned\n"));
        assert_eq!(csv.lines().count(), 4);
    }
}
