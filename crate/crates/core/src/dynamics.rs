//! Master-equation integration, the two-level emission model and derived
//! field observables.

use serde::{Deserialize, Serialize};

use crate::device::{Channel, CollapseOperator, Hamiltonian, TermKind};
use crate::error::DynamicsError;
use crate::io::{csv_table, fmt9};
use crate::pulse::DriveEnvelope;
use crate::qops::{CMatrix, DensityMatrix, C64, I, ZERO};

/// Compressed sparse rows of a square complex matrix.
#[derive(Clone, Debug)]
struct Csr {
    d: usize,
    row_ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<C64>,
}

impl Csr {
    fn from_dense(m: &CMatrix) -> Self {
        let d = m.nrows();
        let mut row_ptr = Vec::with_capacity(d + 1);
        let mut col = Vec::new();
        let mut val = Vec::new();
        row_ptr.push(0);
        for i in 0..d {
            for j in 0..d {
                let v = m[(i, j)];
                if v != ZERO {
                    col.push(j);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Self { d, row_ptr, col, val }
    }

    fn is_diagonal(&self) -> bool {
        (0..self.d).all(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).all(|k| self.col[k] == i))
    }

    fn diagonal(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.d];
        for i in 0..self.d {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col[k] == i {
                    out[i] += self.val[k];
                }
            }
        }
        out
    }

    /// `out += scale · A · x` for row-major `d×d` dense `x`.
    fn mul_add(&self, scale: C64, x: &[C64], out: &mut [C64]) {
        let d = self.d;
        for i in 0..d {
            let row_out = &mut out[i * d..(i + 1) * d];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.val[k] * scale;
                let row_x = &x[self.col[k] * d..(self.col[k] + 1) * d];
                for (o, &xv) in row_out.iter_mut().zip(row_x) {
                    *o += v * xv;
                }
            }
        }
    }

    /// `Tr(A·x)`.
    fn trace_with(&self, x: &[C64]) -> C64 {
        let d = self.d;
        let mut acc = ZERO;
        for i in 0..d {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.val[k] * x[self.col[k] * d + i];
            }
        }
        acc
    }
}

enum DriveOp {
    Coupling { op: Csr, op_dag: Csr },
    Real { op: Csr },
}

/// Precomputed generator of the Lindblad equation.
struct Generator<'a> {
    d: usize,
    /// `H_static − (i/2) Σ L†L`
    heff: Csr,
    drives: Vec<(DriveOp, &'a crate::device::DriveTerm)>,
    jumps: Vec<Csr>,
    /// `Σ_L l_i l_j*` over diagonal jump operators.
    diag_jump: Option<Vec<C64>>,
}

impl<'a> Generator<'a> {
    fn new(h: &'a Hamiltonian, collapse: &[CollapseOperator]) -> Self {
        let d = h.dim();
        let mut heff = h.static_part.clone();
        let mut jumps = Vec::new();
        let mut diag_jump: Option<Vec<C64>> = None;
        for c in collapse {
            let ldl = c.op.adjoint() * &c.op;
            heff -= ldl.map(|z| z * (0.5 * I));
            let sparse = Csr::from_dense(&c.op);
            if sparse.is_diagonal() {
                let l = sparse.diagonal();
                let m = diag_jump.get_or_insert_with(|| vec![ZERO; d * d]);
                for i in 0..d {
                    for j in 0..d {
                        m[i * d + j] += l[i] * l[j].conj();
                    }
                }
            } else {
                jumps.push(sparse);
            }
        }
        let drives = h
            .terms
            .iter()
            .map(|term| {
                let op = Csr::from_dense(&term.op);
                let kind = match term.kind {
                    TermKind::Coupling => DriveOp::Coupling {
                        op_dag: Csr::from_dense(&term.op.adjoint()),
                        op,
                    },
                    TermKind::StarkShift(_) => DriveOp::Real { op },
                };
                (kind, term)
            })
            .collect();
        Self {
            d,
            heff: Csr::from_dense(&heff),
            drives,
            jumps,
            diag_jump,
        }
    }

    fn rhs(&self, t: f64, rho: &[C64], out: &mut [C64], y: &mut [C64], w: &mut [C64]) {
        let d = self.d;
        y.fill(ZERO);
        self.heff.mul_add(C64::new(1.0, 0.0), rho, y);
        for (kind, term) in &self.drives {
            let coef = term.coefficient(t);
            if coef == ZERO {
                continue;
            }
            match kind {
                DriveOp::Coupling { op, op_dag } => {
                    op.mul_add(coef, rho, y);
                    op_dag.mul_add(coef.conj(), rho, y);
                }
                DriveOp::Real { op } => op.mul_add(coef, rho, y),
            }
        }
        // −i Y + i Y†
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = -I * y[i * d + j] + I * y[j * d + i].conj();
            }
        }
        if let Some(m) = &self.diag_jump {
            for k in 0..d * d {
                out[k] += m[k] * rho[k];
            }
        }
        // L ρ L† = L (L ρ)† for Hermitian ρ
        for l in &self.jumps {
            y.fill(ZERO);
            l.mul_add(C64::new(1.0, 0.0), rho, y);
            for i in 0..d {
                for j in 0..d {
                    w[i * d + j] = y[j * d + i].conj();
                }
            }
            l.mul_add(C64::new(1.0, 0.0), w, out);
        }
    }
}

/// Knobs of [`integrate_me_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    /// Abort when `|Tr ρ − Tr ρ₀|` exceeds this.
    pub trace_tolerance: f64,
    /// Compute the minimum eigenvalue of `ρ` every this many steps (0 = never).
    pub positivity_every: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            trace_tolerance: 1e-6,
            positivity_every: 0,
        }
    }
}

/// Time series recorded during an integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    /// `P_g, P_e, P_f` of the transmon in subsystem 0.
    pub pops_a: Vec<[f64; 3]>,
    /// `P_g, P_e, P_f` of the transmon in subsystem 2 (empty if absent).
    pub pops_b: Vec<[f64; 3]>,
    /// `⟨a_out⟩` in units of `1/√ns`.
    pub a_mean_out: Vec<C64>,
    /// `⟨a_out† a_out⟩` in photons/ns.
    pub flux_out: Vec<f64>,
    /// Photon flux into the loss channel (photons/ns).
    pub loss_flux: Vec<f64>,
    /// `∫ flux_out dt`.
    pub photon_integral: f64,
    pub max_trace_error: f64,
    /// Smallest eigenvalue seen at the checked steps (`+∞` if unchecked).
    pub min_eigenvalue: f64,
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    (1..t.len()).map(|i| 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1])).sum()
}

impl Trajectory {
    fn empty() -> Self {
        Self {
            t: Vec::new(),
            pops_a: Vec::new(),
            pops_b: Vec::new(),
            a_mean_out: Vec::new(),
            flux_out: Vec::new(),
            loss_flux: Vec::new(),
            photon_integral: 0.0,
            max_trace_error: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `|⟨a_out(t)⟩|²`.
    pub fn mean_field_power(&self) -> Vec<f64> {
        self.a_mean_out.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `∫ |⟨a_out⟩|² dt`.
    pub fn mean_field_integral(&self) -> f64 {
        trapezoid(&self.t, &self.mean_field_power())
    }

    pub fn loss_integral(&self) -> f64 {
        trapezoid(&self.t, &self.loss_flux)
    }

    /// Appends a later segment, dropping its first sample when it repeats
    /// the current last time.
    pub fn append(&mut self, other: &Trajectory) {
        let skip = match (self.t.last(), other.t.first()) {
            (Some(a), Some(b)) if (a - b).abs() < 1e-9 => 1,
            _ => 0,
        };
        self.t.extend_from_slice(&other.t[skip..]);
        self.pops_a.extend_from_slice(&other.pops_a[skip.min(other.pops_a.len())..]);
        self.pops_b.extend_from_slice(&other.pops_b[skip.min(other.pops_b.len())..]);
        self.a_mean_out.extend_from_slice(&other.a_mean_out[skip..]);
        self.flux_out.extend_from_slice(&other.flux_out[skip..]);
        self.loss_flux.extend_from_slice(&other.loss_flux[skip..]);
        self.photon_integral = trapezoid(&self.t, &self.flux_out);
        self.max_trace_error = self.max_trace_error.max(other.max_trace_error);
        self.min_eigenvalue = self.min_eigenvalue.min(other.min_eigenvalue);
    }

    /// CSV with columns `t_ns, Pg_A, Pe_A, Pf_A, Pg_B, Pe_B, Pf_B, re_aout,
    /// im_aout, flux`.
    pub fn to_csv(&self) -> String {
        let rows = (0..self.t.len()).map(|i| {
            let a = self.pops_a.get(i).copied().unwrap_or([0.0; 3]);
            let b = self.pops_b.get(i).copied().unwrap_or([0.0; 3]);
            vec![
                self.t[i],
                a[0],
                a[1],
                a[2],
                b[0],
                b[1],
                b[2],
                self.a_mean_out[i].re,
                self.a_mean_out[i].im,
                self.flux_out[i],
            ]
        });
        csv_table(
            &["t_ns", "Pg_A", "Pe_A", "Pf_A", "Pg_B", "Pe_B", "Pf_B", "re_aout", "im_aout", "flux"],
            rows,
        )
    }
}

/// Flattened index maps used to read populations off the diagonal.
struct Recorder {
    d: usize,
    level_a: Vec<usize>,
    level_b: Option<Vec<usize>>,
    out_op: Option<Csr>,
    out_number: Option<Csr>,
    loss_number: Option<Csr>,
}

fn level_map(dims: &[usize], slot: usize) -> Vec<usize> {
    let d: usize = dims.iter().product();
    let inner: usize = dims[slot + 1..].iter().product();
    (0..d).map(|i| (i / inner) % dims[slot]).collect()
}

impl Recorder {
    fn new(h: &Hamiltonian, collapse: &[CollapseOperator]) -> Self {
        let dims = &h.dims;
        let number = |c: &CollapseOperator| Csr::from_dense(&(c.op.adjoint() * &c.op));
        let output = collapse.iter().find(|c| c.channel == Channel::Output);
        let loss = collapse.iter().find(|c| c.channel == Channel::Loss);
        Self {
            d: h.dim(),
            level_a: level_map(dims, 0),
            level_b: (dims.len() > 2).then(|| level_map(dims, 2)),
            out_op: output.map(|c| Csr::from_dense(&c.op)),
            out_number: output.map(number),
            loss_number: loss.map(number),
        }
    }

    fn record(&self, t: f64, rho: &[C64], traj: &mut Trajectory) {
        let d = self.d;
        let mut pa = [0.0; 3];
        let mut pb = [0.0; 3];
        for i in 0..d {
            let p = rho[i * d + i].re;
            if let Some(slot) = pa.get_mut(self.level_a[i]) {
                *slot += p;
            }
            if let Some(levels) = &self.level_b {
                if let Some(slot) = pb.get_mut(levels[i]) {
                    *slot += p;
                }
            }
        }
        traj.t.push(t);
        traj.pops_a.push(pa);
        if self.level_b.is_some() {
            traj.pops_b.push(pb);
        }
        traj.a_mean_out
            .push(self.out_op.as_ref().map_or(ZERO, |op| op.trace_with(rho)));
        traj.flux_out
            .push(self.out_number.as_ref().map_or(0.0, |op| op.trace_with(rho).re));
        traj.loss_flux
            .push(self.loss_number.as_ref().map_or(0.0, |op| op.trace_with(rho).re));
    }
}

fn to_flat(m: &CMatrix) -> Vec<C64> {
    let d = m.nrows();
    let mut v = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            v[i * d + j] = m[(i, j)];
        }
    }
    v
}

fn from_flat(v: &[C64], d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

pub fn integrate_me(
    h: &Hamiltonian,
    collapse: &[CollapseOperator],
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<(Trajectory, DensityMatrix), DynamicsError> {
    integrate_me_with(h, collapse, rho0, t_grid, &IntegrationOptions::default())
}

/// Fourth-order Runge–Kutta integration of
/// `dρ/dt = −i[H(t), ρ] + Σ_L D[L]ρ` over `t_grid`, one step per grid
/// interval. `ρ` is re-symmetrized after every step.
pub fn integrate_me_with(
    h: &Hamiltonian,
    collapse: &[CollapseOperator],
    rho0: &DensityMatrix,
    t_grid: &[f64],
    options: &IntegrationOptions,
) -> Result<(Trajectory, DensityMatrix), DynamicsError> {
    let d = h.dim();
    if rho0.dim() != d {
        return Err(crate::error::QopsError::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        }
        .into());
    }
    if let Some(c) = collapse.iter().find(|c| c.op.nrows() != d) {
        return Err(crate::error::QopsError::DimensionMismatch {
            expected: d,
            found: c.op.nrows(),
        }
        .into());
    }
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::BadGrid);
    }
    let gen = Generator::new(h, collapse);
    let rec = Recorder::new(h, collapse);
    let n2 = d * d;
    let mut rho = to_flat(rho0.matrix());
    let trace0 = rho0.trace();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![ZERO; n2], vec![ZERO; n2], vec![ZERO; n2], vec![ZERO; n2]);
    let (mut tmp, mut y, mut w) = (vec![ZERO; n2], vec![ZERO; n2], vec![ZERO; n2]);
    let mut traj = Trajectory::empty();
    rec.record(t_grid[0], &rho, &mut traj);
    for step in 0..t_grid.len() - 1 {
        let t = t_grid[step];
        let dt = t_grid[step + 1] - t;
        gen.rhs(t, &rho, &mut k1, &mut y, &mut w);
        for k in 0..n2 {
            tmp[k] = rho[k] + k1[k] * (0.5 * dt);
        }
        gen.rhs(t + 0.5 * dt, &tmp, &mut k2, &mut y, &mut w);
        for k in 0..n2 {
            tmp[k] = rho[k] + k2[k] * (0.5 * dt);
        }
        gen.rhs(t + 0.5 * dt, &tmp, &mut k3, &mut y, &mut w);
        for k in 0..n2 {
            tmp[k] = rho[k] + k3[k] * dt;
        }
        gen.rhs(t + dt, &tmp, &mut k4, &mut y, &mut w);
        for k in 0..n2 {
            rho[k] += (k1[k] + (k2[k] + k3[k]) * 2.0 + k4[k]) * (dt / 6.0);
        }
        for i in 0..d {
            rho[i * d + i].im = 0.0;
            for j in i + 1..d {
                let avg = 0.5 * (rho[i * d + j] + rho[j * d + i].conj());
                rho[i * d + j] = avg;
                rho[j * d + i] = avg.conj();
            }
        }
        let trace: f64 = (0..d).map(|i| rho[i * d + i].re).sum();
        let drift = (trace - trace0).abs();
        if !drift.is_finite() || drift > options.trace_tolerance {
            return Err(DynamicsError::TraceDrift {
                time: t_grid[step + 1],
                trace,
            });
        }
        traj.max_trace_error = traj.max_trace_error.max(drift);
        if options.positivity_every > 0 && (step + 1) % options.positivity_every == 0 {
            let m = from_flat(&rho, d);
            let low = m.symmetric_eigenvalues().min();
            traj.min_eigenvalue = traj.min_eigenvalue.min(low);
        }
        rec.record(t_grid[step + 1], &rho, &mut traj);
    }
    traj.photon_integral = trapezoid(&traj.t, &traj.flux_out);
    let final_state = DensityMatrix::from_matrix_symmetrized(rho0.dims().to_vec(), from_flat(&rho, d))?;
    Ok((traj, final_state))
}

/// Solution of the two-level emission model.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleTrajectory {
    pub t: Vec<f64>,
    /// Amplitude of `|f,0⟩`.
    pub c_f0: Vec<C64>,
    /// Amplitude of `|g,1⟩`.
    pub c_g1: Vec<C64>,
    /// `κ|c_g1|²`
    pub flux: Vec<f64>,
    /// `1 − |c|²` at the final time.
    pub emitted: f64,
}

pub fn two_level_oracle(g_env: &DriveEnvelope, kappa: f64) -> OracleTrajectory {
    two_level_oracle_from(g_env, kappa, [C64::new(1.0, 0.0), ZERO])
}

/// Integrates `i ċ = H c` with `H = [[0, g̃], [g̃*, −iκ/2]]` in the basis
/// `(|f,0⟩, |g,1⟩)` on the envelope grid.
pub fn two_level_oracle_from(g_env: &DriveEnvelope, kappa: f64, c0: [C64; 2]) -> OracleTrajectory {
    let deriv = |t: f64, c: [C64; 2]| -> [C64; 2] {
        let g = g_env.value_at(t);
        [-I * g * c[1], -I * g.conj() * c[0] - c[1] * (0.5 * kappa)]
    };
    let t = g_env.t.clone();
    let mut c = c0;
    let mut c_f0 = vec![c[0]];
    let mut c_g1 = vec![c[1]];
    for i in 0..t.len().saturating_sub(1) {
        let (t0, h) = (t[i], t[i + 1] - t[i]);
        let add = |c: [C64; 2], k: [C64; 2], s: f64| [c[0] + k[0] * s, c[1] + k[1] * s];
        let k1 = deriv(t0, c);
        let k2 = deriv(t0 + 0.5 * h, add(c, k1, 0.5 * h));
        let k3 = deriv(t0 + 0.5 * h, add(c, k2, 0.5 * h));
        let k4 = deriv(t0 + h, add(c, k3, h));
        for j in 0..2 {
            c[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (h / 6.0);
        }
        c_f0.push(c[0]);
        c_g1.push(c[1]);
    }
    let flux = c_g1.iter().map(|a| kappa * a.norm_sqr()).collect();
    let norm0 = c0[0].norm_sqr() + c0[1].norm_sqr();
    let emitted = norm0 - c[0].norm_sqr() - c[1].norm_sqr();
    OracleTrajectory {
        t,
        c_f0,
        c_g1,
        flux,
        emitted,
    }
}

/// `⟨a_out⟩` and `⟨a_out†a_out⟩` for `a_out = √κ_B a_B + √(κ_A η_c) a_A`
/// evaluated on a sequence of two-node states (resonators in subsystems 1
/// and 3). Rates in rad/ns.
pub fn output_observables(
    states: &[DensityMatrix],
    kappa_t_b: f64,
    eta_c: f64,
    kappa_t_a: f64,
) -> Result<(Vec<C64>, Vec<f64>), DynamicsError> {
    let mut means = Vec::with_capacity(states.len());
    let mut fluxes = Vec::with_capacity(states.len());
    for rho in states {
        let dims = rho.dims();
        if dims.len() != 4 {
            return Err(crate::error::QopsError::InvalidSubsystems(format!(
                "expected 4 subsystems, got {}",
                dims.len()
            ))
            .into());
        }
        let aa = crate::qops::embed_matrix(&crate::qops::annihilation(dims[1]), 1, dims)?;
        let ab = crate::qops::embed_matrix(&crate::qops::annihilation(dims[3]), 3, dims)?;
        let out = ab.map(|z| z * kappa_t_b.sqrt()) + aa.map(|z| z * (kappa_t_a * eta_c).sqrt());
        means.push((&out * rho.matrix()).trace());
        fluxes.push((out.adjoint() * &out * rho.matrix()).trace().re);
    }
    Ok((means, fluxes))
}

/// Headline numbers of the excitation-transfer experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Efficiencies {
    /// Final `P_e` of node B after mapping `|f⟩ → |e⟩`.
    pub transfer: f64,
    /// Time from the start of the trajectory until 99% of `transfer` is
    /// first reached (ns).
    pub saturation_time: f64,
    pub absorption: f64,
    pub loss: f64,
}

fn ratio(num: f64, den: f64) -> Result<f64, DynamicsError> {
    if den.abs() < 1e-12 {
        return Err(DynamicsError::DegenerateRatio(den));
    }
    Ok(num / den)
}

fn same_grid(a: &Trajectory, b: &Trajectory) -> bool {
    a.t.len() == b.t.len() && a.t.iter().zip(&b.t).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Transfer, absorption and loss figures from four runs.
///
/// * `with_absorption` / `without_absorption`: Fock-state transfer A → B
///   with and without the absorbing drive on B. `P_f` of node B before the
///   final map equals `P_e` after it; the absorption efficiency is
///   `1 − ∫flux(with) / ∫flux(without)`.
/// * `emit_a` / `emit_b`: superposition-state emission from each node; the
///   loss is `1 − ∫|⟨a_out⟩|²(A) / ∫|⟨a_out⟩|²(B)`.
pub fn efficiencies(
    with_absorption: &Trajectory,
    without_absorption: &Trajectory,
    emit_a: &Trajectory,
    emit_b: &Trajectory,
) -> Result<Efficiencies, DynamicsError> {
    if !same_grid(with_absorption, without_absorption) {
        return Err(DynamicsError::MismatchedGrids);
    }
    let pf: Vec<f64> = with_absorption.pops_b.iter().map(|p| p[2]).collect();
    let transfer = *pf.last().ok_or(DynamicsError::BadGrid)?;
    let idx = pf.iter().position(|&p| p >= 0.99 * transfer).unwrap_or(pf.len() - 1);
    let saturation_time = with_absorption.t[idx] - with_absorption.t[0];
    let absorption = 1.0 - ratio(with_absorption.photon_integral, without_absorption.photon_integral)?;
    let loss = 1.0 - ratio(emit_a.mean_field_integral(), emit_b.mean_field_integral())?;
    Ok(Efficiencies {
        transfer,
        saturation_time,
        absorption,
        loss,
    })
}

/// One-line summary used in logs.
pub fn describe(eff: &Efficiencies) -> String {
    format!(
        "transfer {} (t99 {} ns), absorption {}, loss {}",
        fmt9(eff.transfer),
        fmt9(eff.saturation_time),
        fmt9(eff.absorption),
        fmt9(eff.loss)
    )
}

/// Coherence time (µs) between levels `a` and `b` of an undriven qutrit
/// with the node's collapse operators, read off the decay of
/// `|ρ_ab|` after 1 µs.
pub fn ramsey_coherence_time(node: &crate::device::NodeParams, a: usize, b: usize) -> Result<f64, DynamicsError> {
    let h = Hamiltonian::zero(vec![3]);
    let ops = crate::device::transmon_collapse_ops(node, 0, &[3], "q")?;
    let psi = (crate::qops::basis_ket(3, a) + crate::qops::basis_ket(3, b)).map(|z| z * std::f64::consts::FRAC_1_SQRT_2);
    let rho = DensityMatrix::from_pure(vec![3], &psi)?;
    let tend = 1000.0;
    let (_, fin) = integrate_me(&h, &ops, &rho, &crate::pulse::uniform_grid(0.0, tend, 1.0))?;
    let rate = -(2.0 * fin.matrix()[(a, b)].norm()).ln() / tend;
    Ok(1.0 / rate / 1e3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{
        build_collapse_ops_with, build_hamiltonian_with, DeviceParams, Frame,
        HamiltonianOptions, LinkParams, NodeParams,
    };
    use crate::pulse::{emission_drive, uniform_grid};
    use crate::qops::{basis_ket, ket_bra, DensityMatrix};
    use crate::units::mhz_to_angular;

    fn qutrit(p: [f64; 3]) -> DensityMatrix {
        let mut m = CMatrix::zeros(3, 3);
        for i in 0..3 {
            m[(i, i)] = C64::new(p[i], 0.0);
        }
        DensityMatrix::new(vec![3], m).unwrap()
    }

    #[test]
    fn frozen_without_generator() {
        let h = Hamiltonian::zero(vec![3]);
        let mut m = CMatrix::zeros(3, 3);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(1, 1)] = C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.2, 0.3);
        m[(1, 0)] = C64::new(0.2, -0.3);
        let rho = DensityMatrix::new(vec![3], m.clone()).unwrap();
        let (traj, fin) = integrate_me(&h, &[], &rho, &uniform_grid(0.0, 50.0, 0.5)).unwrap();
        assert_eq!(fin.matrix(), &m);
        assert!(traj.pops_b.is_empty());
        assert_eq!(traj.pops_a.last().unwrap(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn relaxation_follows_exponential() {
        let t1: f64 = 4.9;
        let h = Hamiltonian::zero(vec![3]);
        let rate = 1.0 / (t1 * 1e3);
        let ops = vec![CollapseOperator {
            label: "g1".into(),
            channel: Channel::Relaxation,
            op: ket_bra(3, 0, 1).map(|z| z * rate.sqrt()),
        }];
        let grid = uniform_grid(0.0, 2000.0, 1.0);
        let (traj, _) = integrate_me(&h, &ops, &qutrit([0.0, 1.0, 0.0]), &grid).unwrap();
        for (i, &t) in grid.iter().enumerate().step_by(250) {
            let expected = (-t * rate).exp();
            assert!((traj.pops_a[i][1] / expected - 1.0).abs() < 1e-4);
        }
    }

    fn synthetic(pf: &[f64], integral: f64, field: f64) -> Trajectory {
        let mut t = Trajectory::empty();
        t.t = (0..pf.len()).map(|k| 10.0 * k as f64 - 20.0).collect();
        t.pops_b = pf.iter().map(|&p| [1.0 - p, 0.0, p]).collect();
        t.pops_a = t.pops_b.clone();
        t.a_mean_out = vec![C64::new(field, 0.0); pf.len()];
        t.photon_integral = integral;
        t
    }

    #[test]
    fn efficiency_figures() {
        let with = synthetic(&[0.0, 0.3, 0.6, 0.695, 0.7], 0.02, 0.0);
        let without = synthetic(&[0.0; 5], 0.8, 0.0);
        let a = synthetic(&[0.0; 5], 0.0, 0.5);
        let b = synthetic(&[0.0; 5], 0.0, 1.0);
        let e = efficiencies(&with, &without, &a, &b).unwrap();
        assert_eq!(e.transfer, 0.7);
        assert_eq!(e.saturation_time, 30.0);
        assert!((e.absorption - 0.975).abs() < 1e-12);
        assert!((e.loss - 0.75).abs() < 1e-12);
        let short = synthetic(&[0.0; 3], 0.8, 0.0);
        assert!(matches!(efficiencies(&with, &short, &a, &b), Err(DynamicsError::MismatchedGrids)));
        let dark = synthetic(&[0.0; 5], 0.0, 0.0);
        assert!(efficiencies(&with, &dark, &a, &b).is_err());
    }

    #[test]
    fn ramsey_reproduces_coherence_times() {
        for node in [NodeParams::table_a(), NodeParams::table_b()] {
            let ge = ramsey_coherence_time(&node, 0, 1).unwrap();
            let ef = ramsey_coherence_time(&node, 1, 2).unwrap();
            assert!((ge / node.t2_ge - 1.0).abs() < 0.01, "T2ge {ge}");
            assert!((ef / node.t2_ef - 1.0).abs() < 0.01, "T2ef {ef}");
        }
    }

    #[test]
    fn oracle_without_drive_is_frozen() {
        let env = DriveEnvelope::zero(uniform_grid(-50.0, 50.0, 0.1), 0.06, 0.06);
        let o = two_level_oracle(&env, 0.06);
        assert!(o.flux.iter().all(|&f| f == 0.0));
        assert_eq!(o.c_f0.last().unwrap(), &C64::new(1.0, 0.0));
        assert_eq!(o.emitted, 0.0);
    }

    #[test]
    fn oracle_matches_sech_flux() {
        for ratio in [1.0, 0.77, 0.5] {
            let kt = mhz_to_angular(10.4);
            let ke = kt * ratio;
            let w = 12.0 / ke;
            let env = emission_drive(&uniform_grid(-w, w, 0.05), ke, kt).unwrap();
            let o = two_level_oracle(&env, kt);
            let target: Vec<f64> = o.t.iter().map(|&t| crate::pulse::photon_envelope(t, ke).powi(2)).collect();
            let num: f64 = o.flux.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = target.iter().map(|b| b * b).sum();
            assert!((num / den).sqrt() < 1e-3, "ratio {ratio}: {}", (num / den).sqrt());
            assert!(o.emitted > 0.999);
        }
    }

    #[test]
    fn oracle_constant_drive_rabi() {
        // constant g ≫ κ: eigenvalues ≈ ±g − iκ/4, so the |g,1⟩ weight
        // oscillates as sin²(g t)·e^{−κ t/2}
        let (g, kappa) = (0.5, 0.01);
        let grid = uniform_grid(0.0, 40.0, 0.01);
        let env = DriveEnvelope {
            g_mag: vec![g; grid.len()],
            phase: vec![0.0; grid.len()],
            t: grid.clone(),
            kappa_eff: kappa,
            kappa_t: kappa,
        };
        let o = two_level_oracle(&env, kappa);
        let omega = (g * g - kappa * kappa / 16.0).sqrt();
        for i in (0..grid.len()).step_by(397) {
            let t = grid[i];
            let expected = (omega * t).sin().powi(2) * g * g / (omega * omega) * (-kappa * t / 2.0).exp();
            assert!((o.c_g1[i].norm_sqr() - expected).abs() < 2e-3);
        }
    }

    fn noiseless_matched() -> (NodeParams, NodeParams, LinkParams) {
        let a = NodeParams::table_a();
        let mut b = NodeParams::table_b();
        b.kappa_t = a.kappa_t;
        (a, b, LinkParams { eta_c: 1.0, time_offset: 0.0 })
    }

    fn f_state(fock: usize, node_b: bool) -> DensityMatrix {
        let dims = crate::device::two_node_dims(fock);
        let d: usize = dims.iter().product();
        let idx = if node_b { 2 * fock } else { 2 * fock * 3 * fock };
        let psi = basis_ket(d, idx);
        DensityMatrix::from_pure(dims, &psi).unwrap()
    }

    #[test]
    fn full_model_matches_oracle_when_noiseless() {
        let (a, b, link) = noiseless_matched();
        let k = a.kappa_t_angular();
        let w = 8.0 / k;
        let grid = uniform_grid(-w, w, 0.1);
        let env = emission_drive(&grid, k, k).unwrap();
        let zero = DriveEnvelope::zero(grid.clone(), k, k);
        let opts = HamiltonianOptions {
            frame: Frame::Qutrit,
            ..Default::default()
        };
        // node B emits into the output port with nothing downstream
        let h = build_hamiltonian_with(&a, &b, &link, &zero, &env, 3, &opts).unwrap();
        let ops = build_collapse_ops_with(&a, &b, &link, 3, false).unwrap();
        let (traj, _) = integrate_me(&h, &ops, &f_state(3, true), &grid).unwrap();
        let o = two_level_oracle(&env, k);
        for i in 0..grid.len() {
            assert!((traj.pops_b[i][2] - o.c_f0[i].norm_sqr()).abs() < 1e-3);
            assert!((traj.flux_out[i] - o.flux[i]).abs() < 1e-3 * k);
        }
    }

    #[test]
    fn excitation_bookkeeping() {
        let p = DeviceParams::default();
        let k = p.node_a.kappa_t_angular();
        let w = 8.0 / k;
        let grid = uniform_grid(-w, w, 0.1);
        let env = emission_drive(&grid, k, k).unwrap();
        let zero = DriveEnvelope::zero(grid.clone(), k, k);
        let opts = HamiltonianOptions {
            frame: Frame::Qutrit,
            ..Default::default()
        };
        let h = build_hamiltonian_with(&p.node_a, &p.node_b, &p.link, &env, &zero, 3, &opts).unwrap();
        let ops = build_collapse_ops_with(&p.node_a, &p.node_b, &p.link, 3, false).unwrap();
        let rho0 = f_state(3, false);
        let (traj, fin) = integrate_me(&h, &ops, &rho0, &grid).unwrap();
        // f counts as one excitation of the f0g1 ladder
        let dims = crate::device::two_node_dims(3);
        let na = crate::qops::embed_matrix(&(crate::qops::annihilation(3).adjoint() * crate::qops::annihilation(3)), 1, &dims).unwrap();
        let nb = crate::qops::embed_matrix(&(crate::qops::annihilation(3).adjoint() * crate::qops::annihilation(3)), 3, &dims).unwrap();
        let left = fin.expectation(&na).re
            + fin.expectation(&nb).re
            + traj.pops_a.last().unwrap()[2]
            + traj.pops_b.last().unwrap()[2]
            + traj.photon_integral
            + traj.loss_integral();
        assert!((left - 1.0).abs() < 1e-4, "{left}");
    }

    #[test]
    fn output_observables_agree_with_recorded_field() {
        let p = DeviceParams::default();
        let k = p.node_b.kappa_t_angular();
        let ke = mhz_to_angular(10.6);
        let grid = uniform_grid(-60.0, 60.0, 0.1);
        let env = emission_drive(&grid, ke, k).unwrap();
        let zero = DriveEnvelope::zero(grid.clone(), ke, k);
        let h = build_hamiltonian_with(&p.node_a, &p.node_b, &p.link, &zero, &env, 3, &HamiltonianOptions::default()).unwrap();
        let ops = build_collapse_ops_with(&p.node_a, &p.node_b, &p.link, 3, true).unwrap();
        let dims = crate::device::two_node_dims(3);
        let d: usize = dims.iter().product();
        let psi = (basis_ket(d, 0) + basis_ket(d, 6)).map(|z| z * std::f64::consts::FRAC_1_SQRT_2);
        let rho0 = DensityMatrix::from_pure(dims, &psi).unwrap();
        let (traj, fin) = integrate_me(&h, &ops, &rho0, &grid).unwrap();
        let (means, flux) = output_observables(
            &[fin],
            p.node_b.kappa_t_angular(),
            p.link.eta_c,
            p.node_a.kappa_t_angular(),
        )
        .unwrap();
        assert!((means[0] - *traj.a_mean_out.last().unwrap()).norm() < 1e-12);
        assert!((flux[0] - *traj.flux_out.last().unwrap()).abs() < 1e-12);
        let vac = DensityMatrix::from_pure(crate::device::two_node_dims(3), &basis_ket(d, 0)).unwrap();
        let (m0, f0) = output_observables(&[vac], 0.1, 0.5, 0.1).unwrap();
        assert_eq!((m0[0], f0[0]), (ZERO, 0.0));
    }

    #[test]
    fn trace_drift_aborts() {
        // an anti-Hermitian part leaks probability
        let mut h = Hamiltonian::zero(vec![3]);
        h.static_part[(1, 1)] = C64::new(0.0, -0.01);
        let err = integrate_me(&h, &[], &qutrit([0.0, 1.0, 0.0]), &uniform_grid(0.0, 10.0, 0.1)).unwrap_err();
        assert!(matches!(err, DynamicsError::TraceDrift { .. }));
    }

    #[test]
    fn step_halving_converges() {
        let p = DeviceParams::default();
        let k = p.node_a.kappa_t_angular();
        let run = |dt: f64| {
            let grid = uniform_grid(-80.0, 80.0, dt);
            let env = emission_drive(&grid, k, k).unwrap();
            let zero = DriveEnvelope::zero(grid.clone(), k, k);
            let h = build_hamiltonian_with(&p.node_a, &p.node_b, &p.link, &env, &zero, 3, &HamiltonianOptions::default()).unwrap();
            let ops = build_collapse_ops_with(&p.node_a, &p.node_b, &p.link, 3, true).unwrap();
            integrate_me(&h, &ops, &f_state(3, false), &grid).unwrap().0
        };
        let coarse = run(0.1);
        let fine = run(0.05);
        let a = coarse.pops_a.last().unwrap()[0];
        let b = fine.pops_a.last().unwrap()[0];
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn append_joins_segments() {
        let h = Hamiltonian::zero(vec![3]);
        let rho = qutrit([1.0, 0.0, 0.0]);
        let (mut a, _) = integrate_me(&h, &[], &rho, &uniform_grid(0.0, 1.0, 0.5)).unwrap();
        let (b, _) = integrate_me(&h, &[], &rho, &uniform_grid(1.0, 2.0, 0.5)).unwrap();
        a.append(&b);
        assert_eq!(a.t, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(a.pops_a.len(), 5);
        let csv = a.to_csv();
        assert!(csv.starts_with("t_ns,Pg_A,Pe_A,Pf_A,Pg_B,Pe_B,Pf_B,re_aout,im_aout,flux\n"));
        assert_eq!(csv.lines().count(), 6);
    }
}
