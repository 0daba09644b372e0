//! Emission, transfer, state-transfer process tomography and remote
//! entanglement runs on the cascaded two-node model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{
    build_collapse_ops_with, build_hamiltonian_with, two_node_dims, DeviceParams, Frame, HamiltonianOptions, TRANSMON_A,
    TRANSMON_B,
};
use crate::dynamics::{efficiencies, integrate_me_with, Efficiencies, IntegrationOptions, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::{bell_target, process_fidelity, state_fidelity, MetricsBundle};
use crate::pulse::{absorption_drive, emission_drive, truncate, DriveEnvelope};
use crate::qops::{basis_ket, embed_matrix, kron, kron_vec, partial_trace, CMatrix, CVector, DensityMatrix, C64};
use crate::readout::{frequencies, mitigate, sample_two_node_counts, AssignmentMatrix, MixtureModel};
use crate::tomography::{
    born_probabilities, gate_set, mutually_unbiased_inputs, qpt_linear_inversion, qst_mle, rotation, GateSetKind,
    ProcessMatrix, Transition,
};
use crate::units::mhz_to_angular;

/// Half-width of the simulated window in units of `1/κ_eff`.
pub const DEFAULT_WINDOW: f64 = 7.65;
/// Photon bandwidth of transfers and of emission from A (MHz).
pub const DEFAULT_KAPPA_EFF_A: f64 = 10.4;
/// Photon bandwidth of emission from B (MHz).
pub const DEFAULT_KAPPA_EFF_B: f64 = 10.6;
pub const DEFAULT_DT: f64 = 0.1;
/// Search range of the time-offset fit (ns).
pub const OFFSET_FIT_RANGE: f64 = 5.0;

/// How output states are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomographyMode {
    /// Born probabilities taken straight from the simulated state.
    Exact,
    /// Finite shots through the synthetic readout, mitigated with `R⁻¹`.
    Sampled { shots: usize },
}

/// Everything a protocol run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub device: DeviceParams,
    /// MHz
    pub kappa_eff_a: f64,
    /// MHz
    pub kappa_eff_b: f64,
    /// Half-width of the simulated window in units of `1/κ_eff`.
    pub window: f64,
    pub fock: usize,
    /// Integration step (ns).
    pub dt: f64,
    /// Transmon relaxation/dephasing and internal resonator loss.
    pub decoherence: bool,
    pub tomography: TomographyMode,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            kappa_eff_a: DEFAULT_KAPPA_EFF_A,
            kappa_eff_b: DEFAULT_KAPPA_EFF_B,
            window: DEFAULT_WINDOW,
            fock: crate::device::DEFAULT_FOCK,
            dt: DEFAULT_DT,
            decoherence: true,
            tomography: TomographyMode::Exact,
            seed: 0,
        }
    }
}

/// Emitting or absorbing node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    A,
    B,
}

impl std::str::FromStr for Node {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Node::A),
            "B" | "b" => Ok(Node::B),
            _ => Err(Error::Config(format!("unknown node `{s}`"))),
        }
    }
}

/// Initial transmon state of an emission run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionInput {
    /// `|f⟩`
    Excited,
    /// `(|g⟩ + |f⟩)/√2` up to the phase of `|f⟩`
    Superposition,
}

/// A single ideal qutrit rotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub transition: Transition,
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
}

impl Rotation {
    pub fn x(transition: Transition, theta: f64) -> Self {
        Self {
            transition,
            theta,
            phi: 0.0,
        }
    }

    pub fn y(transition: Transition, theta: f64) -> Self {
        Self {
            transition,
            theta,
            phi: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn unitary(&self) -> CMatrix {
        rotation(self.transition, self.theta, self.phi)
    }
}

/// Product of a rotation list applied left to right in time.
pub fn sequence_unitary(seq: &[Rotation]) -> CMatrix {
    seq.iter().fold(CMatrix::identity(3, 3), |acc, r| r.unitary() * acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveRole {
    Off,
    Emit,
    /// Time-reversed drive catching the photon emitted by A.
    Absorb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Trajectory,
    /// Two-qutrit state tomography of the transmons after the run.
    StateTomography,
}

/// Declarative description of a single run: preparation pulses, drives,
/// the final map on B and what to measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: String,
    #[serde(default)]
    pub prep_a: Vec<Rotation>,
    #[serde(default)]
    pub prep_b: Vec<Rotation>,
    pub drive_a: DriveRole,
    pub drive_b: DriveRole,
    /// `R^π_ef` on B after the drives, mapping `|f⟩` back to `|e⟩`.
    #[serde(default)]
    pub final_map_b: bool,
    /// Switches the emitting drive off at this time (ns).
    #[serde(default)]
    pub truncate_at: Option<f64>,
    pub measurement: Measurement,
    #[serde(default)]
    pub seed: u64,
}

impl ProtocolSpec {
    pub fn validate(&self) -> Result<()> {
        let pi = std::f64::consts::PI;
        for r in self.prep_a.iter().chain(&self.prep_b) {
            if !(r.theta.abs() <= pi + 1e-12) || !(r.phi.abs() <= pi + 1e-12) {
                return Err(Error::Config(format!(
                    "{}: rotation angles must lie in [-π, π], got θ = {}, φ = {}",
                    self.name, r.theta, r.phi
                )));
            }
        }
        if self.drive_a == DriveRole::Absorb {
            return Err(Error::Config(format!("{}: node A cannot absorb", self.name)));
        }
        if self.drive_a == DriveRole::Emit && self.drive_b == DriveRole::Emit {
            return Err(Error::Config(format!("{}: only one node may emit", self.name)));
        }
        Ok(())
    }

    fn emitter(&self) -> Node {
        if self.drive_b == DriveRole::Emit {
            Node::B
        } else {
            Node::A
        }
    }
}

/// Output of [`ProtocolConfig::execute`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    /// Full four-mode state after the final map.
    pub final_state: DensityMatrix,
    pub drive_a: DriveEnvelope,
    pub drive_b: DriveEnvelope,
    /// Reconstructed transmon state when tomography was requested.
    pub tomography: Option<DensityMatrix>,
}

impl RunOutput {
    /// Transmon populations of node B after the final map.
    pub fn final_pops_b(&self) -> Result<[f64; 3]> {
        let b = partial_trace(&self.final_state, &[TRANSMON_B])?;
        let p = b.populations();
        Ok([p[0], p[1], p[2]])
    }

    /// Two-qutrit transmon state.
    pub fn transmons(&self) -> Result<DensityMatrix> {
        Ok(partial_trace(&self.final_state, &[TRANSMON_A, TRANSMON_B])?)
    }
}

/// Reference emission, transfer and loss figures.
#[derive(Clone, Debug)]
pub struct TransferReport {
    pub efficiencies: Efficiencies,
    pub with_absorption: RunOutput,
    pub without_absorption: RunOutput,
    pub emit_a: RunOutput,
    pub emit_b: RunOutput,
    /// `P_g, P_e, P_f` of B after the final map of the absorbing run.
    pub final_pops_b: [f64; 3],
    /// `1 − ∫|⟨a_out⟩|²` ratio of the superposition runs with and without
    /// absorption (diagnostic alongside the flux-based figure).
    pub absorption_mean_field: f64,
}

#[derive(Clone, Debug)]
pub struct QptResult {
    pub process: ProcessMatrix,
    pub process_fidelity: f64,
    /// Virtual-Z angle applied to B's `|e⟩`.
    pub phase_correction: f64,
    /// Reconstructed, phase-corrected `g/e` blocks of B, one per input.
    pub outputs: Vec<CMatrix>,
    /// Same blocks taken from the simulated states directly.
    pub direct_outputs: Vec<CMatrix>,
    /// Mean `⟨ψ_in|ρ_out|ψ_in⟩` over the six inputs, from the direct states.
    pub average_state_fidelity: f64,
}

#[derive(Clone, Debug)]
pub struct EntanglementResult {
    pub trajectory: Trajectory,
    /// Simulated transmon state, phase corrected.
    pub direct: DensityMatrix,
    /// Tomographic reconstruction, phase corrected.
    pub reconstructed: DensityMatrix,
    pub phase_correction: f64,
    /// Computed on the reconstruction; `hs_distance` is to `direct`.
    pub metrics: MetricsBundle,
}

/// Fidelities of the entanglement run with error sources switched off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub full: f64,
    pub loss_off: f64,
    pub decoherence_off: f64,
    pub both_off: f64,
    /// Infidelity caused by loss alone: `both_off − decoherence_off`.
    pub loss_contribution: f64,
    /// Infidelity caused by decoherence alone: `both_off − loss_off`.
    pub decoherence_contribution: f64,
    /// `loss_off − full`
    pub loss_off_gain: f64,
    /// `decoherence_off − full`
    pub decoherence_off_gain: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetFit {
    pub offset: f64,
    pub transfer: f64,
}

/// One point of a drive-truncation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationPoint {
    pub tau: f64,
    /// Populations at `tau`.
    pub pops_at_tau: [f64; 3],
    /// Populations at the end of the window.
    pub pops_final: [f64; 3],
    pub photon_integral: f64,
}

fn seed_for(base: u64, k: u64) -> u64 {
    base ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn ground_then(seq: &[Rotation]) -> CVector {
    sequence_unitary(seq) * basis_ket(3, 0)
}

/// `diag(1, e^{iθ}, 1)` on B.
fn virtual_z(theta: f64) -> CMatrix {
    let mut z = CMatrix::identity(3, 3);
    z[(1, 1)] = C64::from_polar(1.0, theta);
    z
}

fn apply(rho: &DensityMatrix, u: &CMatrix) -> DensityMatrix {
    rho.transformed(u)
}

fn ge_block(rho: &CMatrix) -> CMatrix {
    rho.view((0, 0), (2, 2)).into_owned()
}


/// Rotation lists preparing the six process-tomography inputs from `|g⟩`,
/// in the order of [`mutually_unbiased_inputs`] (equal up to global phase).
pub fn qpt_input_sequences() -> Vec<Vec<Rotation>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let ge = Transition::Ge;
    vec![
        vec![],
        vec![Rotation::x(ge, PI)],
        vec![Rotation::y(ge, FRAC_PI_2)],
        vec![Rotation::y(ge, -FRAC_PI_2)],
        vec![Rotation::x(ge, -FRAC_PI_2)],
        vec![Rotation::x(ge, FRAC_PI_2)],
    ]
}

fn normalized_probabilities(p: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = p.iter().map(|&x| x.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    clipped.iter().map(|x| x / s).collect()
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.window > 0.0 && self.window <= 20.0) {
            return bad(format!("window {} outside (0, 20]", self.window));
        }
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return bad(format!("dt {} ns outside (0, 1]", self.dt));
        }
        if !(2..=8).contains(&self.fock) {
            return bad(format!("fock truncation {} outside [2, 8]", self.fock));
        }
        for (name, k, kt) in [
            ("kappa_eff_a", self.kappa_eff_a, self.device.node_a.kappa_t),
            ("kappa_eff_a (absorption at B)", self.kappa_eff_a, self.device.node_b.kappa_t),
            ("kappa_eff_b", self.kappa_eff_b, self.device.node_b.kappa_t),
        ] {
            if !(k > 0.0 && k <= kt) {
                return bad(format!("{name} = {k} MHz must lie in (0, {kt}]"));
            }
        }
        if let TomographyMode::Sampled { shots } = self.tomography {
            if shots == 0 {
                return bad("sampled tomography needs at least one shot".into());
            }
        }
        Ok(())
    }

    /// Both nodes with the longer coherence times of the upgrade study and
    /// 12% channel loss.
    pub fn upgraded(&self) -> Self {
        let mut c = self.clone();
        c.device.node_a = c.device.node_a.with_coherence(30.0, 20.0, 30.0, 20.0);
        c.device.node_b = c.device.node_b.with_coherence(30.0, 20.0, 30.0, 20.0);
        c.device.link.eta_c = 0.88;
        c
    }

    pub fn with_eta_c(&self, eta_c: f64) -> Self {
        let mut c = self.clone();
        c.device.link.eta_c = eta_c;
        c
    }

    pub fn with_coherence_scale(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.device.node_a = c.device.node_a.with_coherence_scaled(factor);
        c.device.node_b = c.device.node_b.with_coherence_scaled(factor);
        c
    }

    fn kappa_eff(&self, emitter: Node) -> f64 {
        match emitter {
            Node::A => mhz_to_angular(self.kappa_eff_a),
            Node::B => mhz_to_angular(self.kappa_eff_b),
        }
    }

    fn half_window(&self, emitter: Node) -> f64 {
        self.window / self.kappa_eff(emitter)
    }

    fn steps(&self, emitter: Node) -> usize {
        (2.0 * self.half_window(emitter) / self.dt).ceil() as usize
    }

    /// Integration grid `[−w/κ_eff, −w/κ_eff + n·dt]` of a run emitted by
    /// `emitter`.
    pub fn time_grid(&self, emitter: Node) -> Vec<f64> {
        let t0 = -self.half_window(emitter);
        (0..=self.steps(emitter)).map(|k| t0 + k as f64 * self.dt).collect()
    }

    /// Envelope samples at half steps so that the RK4 midpoints are exact.
    fn envelope_grid(&self, emitter: Node) -> Vec<f64> {
        let t0 = -self.half_window(emitter);
        let h = 0.5 * self.dt;
        (0..=2 * self.steps(emitter)).map(|k| t0 + k as f64 * h).collect()
    }

    pub fn emission_envelope(&self, node: Node) -> Result<DriveEnvelope> {
        let kt = match node {
            Node::A => self.device.node_a.kappa_t_angular(),
            Node::B => self.device.node_b.kappa_t_angular(),
        };
        Ok(emission_drive(&self.envelope_grid(node), self.kappa_eff(node), kt)?)
    }

    /// B's drive catching A's photon: the time reverse of an emission of
    /// bandwidth `κ_eff^A` through B's resonator, delayed by the link's time
    /// offset.
    pub fn absorption_envelope(&self) -> Result<DriveEnvelope> {
        let grid = self.envelope_grid(Node::A);
        let offset = self.device.link.time_offset;
        let mirror: Vec<f64> = grid.iter().rev().map(|&t| offset - t).collect();
        let em = emission_drive(&mirror, self.kappa_eff(Node::A), self.device.node_b.kappa_t_angular())?;
        Ok(absorption_drive(&em).shifted(offset))
    }

    fn zero_envelope(&self, emitter: Node) -> DriveEnvelope {
        let k = self.kappa_eff(emitter);
        DriveEnvelope::zero(self.envelope_grid(emitter), k, k)
    }

    fn drive(&self, role: DriveRole, node: Node, emitter: Node, tau: Option<f64>) -> Result<DriveEnvelope> {
        let env = match role {
            DriveRole::Off => return Ok(self.zero_envelope(emitter)),
            DriveRole::Emit => self.emission_envelope(node)?,
            DriveRole::Absorb => self.absorption_envelope()?,
        };
        match (role, tau) {
            (DriveRole::Emit, Some(tau)) if tau <= env.start() => Ok(self.zero_envelope(emitter)),
            (DriveRole::Emit, Some(tau)) if tau >= env.end() => Ok(env),
            (DriveRole::Emit, Some(tau)) => Ok(truncate(&env, tau)?),
            _ => Ok(env),
        }
    }

    /// Runs one protocol.
    pub fn execute(&self, spec: &ProtocolSpec) -> Result<RunOutput> {
        self.validate()?;
        spec.validate()?;
        let emitter = spec.emitter();
        let g_a = self.drive(spec.drive_a, Node::A, emitter, spec.truncate_at)?;
        let g_b = self.drive(spec.drive_b, Node::B, emitter, spec.truncate_at)?;
        let dev = &self.device;
        let options = HamiltonianOptions {
            frame: Frame::Qutrit,
            ..Default::default()
        };
        let h = build_hamiltonian_with(&dev.node_a, &dev.node_b, &dev.link, &g_a, &g_b, self.fock, &options)?;
        let collapse = build_collapse_ops_with(&dev.node_a, &dev.node_b, &dev.link, self.fock, self.decoherence)?;
        let vac = basis_ket(self.fock, 0);
        let psi = kron_vec(
            &kron_vec(&kron_vec(&ground_then(&spec.prep_a), &vac), &ground_then(&spec.prep_b)),
            &vac,
        );
        let dims = two_node_dims(self.fock);
        let rho0 = DensityMatrix::from_pure(dims.clone(), &psi)?;
        let (trajectory, mut final_state) =
            integrate_me_with(&h, &collapse, &rho0, &self.time_grid(emitter), &IntegrationOptions::default())?;
        if spec.final_map_b {
            let u = embed_matrix(&rotation(Transition::Ef, std::f64::consts::PI, 0.0), TRANSMON_B, &dims)?;
            final_state = apply(&final_state, &u);
        }
        let mut out = RunOutput {
            trajectory,
            final_state,
            drive_a: g_a,
            drive_b: g_b,
            tomography: None,
        };
        if spec.measurement == Measurement::StateTomography {
            let seed = seed_for(self.seed ^ spec.seed, 0);
            out.tomography = Some(self.tomograph(&out.transmons()?, seed)?);
        }
        Ok(out)
    }

    /// Reconstructs a one-qutrit (node B) or two-qutrit state from exact or
    /// sampled tomography data.
    pub fn tomograph(&self, rho: &DensityMatrix, seed: u64) -> Result<DensityMatrix> {
        let kind = match rho.dims() {
            [3] => GateSetKind::Single,
            [3, 3] => GateSetKind::Pair,
            other => return Err(Error::Config(format!("cannot tomograph dims {other:?}"))),
        };
        let settings = gate_set(kind);
        let exact: Vec<Vec<f64>> = settings
            .iter()
            .map(|s| normalized_probabilities(&born_probabilities(rho.matrix(), s)))
            .collect();
        let pops = match self.tomography {
            TomographyMode::Exact => exact,
            TomographyMode::Sampled { shots } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (ma, mb) = (MixtureModel::node_a(), MixtureModel::node_b());
                let r = match kind {
                    GateSetKind::Single => mb.analytic_assignment(),
                    GateSetKind::Pair => AssignmentMatrix::two_node(&ma.analytic_assignment(), &mb.analytic_assignment()),
                };
                let mut out = Vec::with_capacity(exact.len());
                for p in &exact {
                    let freq = match kind {
                        GateSetKind::Single => frequencies(&mb.sample_counts(p, shots, &mut rng)?),
                        GateSetKind::Pair => frequencies(&sample_two_node_counts(p, &ma, &mb, shots, &mut rng)?),
                    };
                    out.push(mitigate(&freq, &r)?.populations);
                }
                out
            }
        };
        Ok(qst_mle(&pops, rho.dims())?.state)
    }

    fn emission_spec(node: Node, input: EmissionInput, tau: Option<f64>) -> ProtocolSpec {
        use std::f64::consts::{FRAC_PI_2, PI};
        let prep = match input {
            EmissionInput::Excited => vec![Rotation::x(Transition::Ge, PI), Rotation::x(Transition::Ef, PI)],
            EmissionInput::Superposition => vec![Rotation::y(Transition::Ge, FRAC_PI_2), Rotation::x(Transition::Ef, PI)],
        };
        let (prep_a, prep_b, drive_a, drive_b) = match node {
            Node::A => (prep, vec![], DriveRole::Emit, DriveRole::Off),
            Node::B => (vec![], prep, DriveRole::Off, DriveRole::Emit),
        };
        ProtocolSpec {
            name: format!("emit-{node:?}").to_lowercase(),
            prep_a,
            prep_b,
            drive_a,
            drive_b,
            final_map_b: false,
            truncate_at: tau,
            measurement: Measurement::Trajectory,
            seed: 0,
        }
    }

    /// Photon emission from one node with the other idle.
    pub fn run_emission(&self, node: Node, input: EmissionInput, tau: Option<f64>) -> Result<RunOutput> {
        self.execute(&Self::emission_spec(node, input, tau))
    }

    /// Populations at `tau` and at the window end for drives truncated at
    /// each `tau`.
    pub fn truncation_sweep(&self, node: Node, taus: &[f64]) -> Result<Vec<TruncationPoint>> {
        taus.par_iter()
            .map(|&tau| {
                let run = self.run_emission(node, EmissionInput::Excited, Some(tau))?;
                let traj = &run.trajectory;
                let pops = match node {
                    Node::A => &traj.pops_a,
                    Node::B => &traj.pops_b,
                };
                let idx = traj.t.iter().position(|&t| t >= tau - 1e-9).unwrap_or(traj.t.len() - 1);
                Ok(TruncationPoint {
                    tau,
                    pops_at_tau: pops[idx],
                    pops_final: *pops.last().expect("non-empty trajectory"),
                    photon_integral: traj.photon_integral,
                })
            })
            .collect()
    }

    /// A prepared with `prep` in its `g/e` subspace, mapped to `g/f`,
    /// emitted and (optionally) absorbed at B, then mapped back on B.
    pub fn transfer_spec(prep: &[Rotation], absorb: bool) -> ProtocolSpec {
        let mut prep_a = prep.to_vec();
        prep_a.push(Rotation::x(Transition::Ef, std::f64::consts::PI));
        ProtocolSpec {
            name: "transfer".into(),
            prep_a,
            prep_b: vec![],
            drive_a: DriveRole::Emit,
            drive_b: if absorb { DriveRole::Absorb } else { DriveRole::Off },
            final_map_b: true,
            truncate_at: None,
            measurement: Measurement::Trajectory,
            seed: 0,
        }
    }

    pub fn run_transfer(&self, prep: &[Rotation]) -> Result<RunOutput> {
        self.execute(&Self::transfer_spec(prep, true))
    }

    /// Fock-state transfer with and without absorption plus superposition
    /// emission from each node, run in parallel.
    pub fn run_transfer_report(&self) -> Result<TransferReport> {
        use std::f64::consts::{FRAC_PI_2, PI};
        let excite = [Rotation::x(Transition::Ge, PI)];
        let sup = [Rotation::y(Transition::Ge, FRAC_PI_2)];
        let specs = vec![
            Self::transfer_spec(&excite, true),
            Self::transfer_spec(&excite, false),
            Self::emission_spec(Node::A, EmissionInput::Superposition, None),
            Self::emission_spec(Node::B, EmissionInput::Superposition, None),
            Self::transfer_spec(&sup, true),
            Self::transfer_spec(&sup, false),
        ];
        let mut runs: Vec<RunOutput> = specs.par_iter().map(|s| self.execute(s)).collect::<Result<_>>()?;
        let sup_without = runs.pop().expect("six runs");
        let sup_with = runs.pop().expect("six runs");
        let emit_b = runs.pop().expect("six runs");
        let emit_a = runs.pop().expect("six runs");
        let without_absorption = runs.pop().expect("six runs");
        let with_absorption = runs.pop().expect("six runs");
        let eff = efficiencies(
            &with_absorption.trajectory,
            &without_absorption.trajectory,
            &emit_a.trajectory,
            &emit_b.trajectory,
        )?;
        let absorption_mean_field =
            1.0 - sup_with.trajectory.mean_field_integral() / sup_without.trajectory.mean_field_integral();
        Ok(TransferReport {
            efficiencies: eff,
            final_pops_b: with_absorption.final_pops_b()?,
            with_absorption,
            without_absorption,
            emit_a,
            emit_b,
            absorption_mean_field,
        })
    }

    /// Grid search over `±5 ns` followed by golden-section refinement of the
    /// absorption delay maximizing the transfer efficiency.
    pub fn fit_time_offset(&self) -> Result<OffsetFit> {
        let excite = [Rotation::x(Transition::Ge, std::f64::consts::PI)];
        let eval = |offset: f64| -> Result<f64> {
            let mut c = self.clone();
            c.device.link.time_offset = offset;
            Ok(c.run_transfer(&excite)?.final_pops_b()?[1])
        };
        let coarse: Vec<f64> = (-5..=5).map(|k| k as f64 * OFFSET_FIT_RANGE / 5.0).collect();
        let values: Vec<f64> = coarse.par_iter().map(|&o| eval(o)).collect::<Result<_>>()?;
        let best = (0..coarse.len())
            .max_by(|&i, &j| values[i].total_cmp(&values[j]))
            .unwrap_or(0);
        let step = OFFSET_FIT_RANGE / 5.0;
        let (mut lo, mut hi) = (
            (coarse[best] - step).max(-OFFSET_FIT_RANGE),
            (coarse[best] + step).min(OFFSET_FIT_RANGE),
        );
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
        while hi - lo > 0.05 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = eval(x2)?;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = eval(x1)?;
            }
        }
        let (offset, transfer) = [(coarse[best], values[best]), (x1, f1), (x2, f2)]
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("three candidates");
        Ok(OffsetFit { offset, transfer })
    }

    /// Transfers the six qubit inputs and assembles `χ` by linear inversion.
    pub fn run_state_transfer_qpt(&self) -> Result<QptResult> {
        let seqs = qpt_input_sequences();
        let runs: Vec<(CMatrix, CMatrix)> = seqs
            .par_iter()
            .enumerate()
            .map(|(k, prep)| {
                let run = self.execute(&Self::transfer_spec(prep, true))?;
                let b = partial_trace(&run.final_state, &[TRANSMON_B])?;
                let rec = self.tomograph(&b, seed_for(self.seed, 100 + k as u64))?;
                Ok((rec.matrix().clone(), b.matrix().clone()))
            })
            .collect::<Result<_>>()?;
        // virtual Z on B fixing the phase of the |+⟩ output
        let theta = runs[2].0[(0, 1)].arg();
        let z = virtual_z(theta);
        let fix = |m: &CMatrix| ge_block(&(&z * m * z.adjoint()));
        let outputs: Vec<CMatrix> = runs.iter().map(|(r, _)| fix(r)).collect();
        let direct_outputs: Vec<CMatrix> = runs.iter().map(|(_, d)| fix(d)).collect();
        let inputs: Vec<CVector> = mutually_unbiased_inputs();
        let in_rho: Vec<CMatrix> = inputs.iter().map(|v| v * v.adjoint()).collect();
        let process = qpt_linear_inversion(&in_rho, &outputs)?;
        let fp = process_fidelity(&process.chi, &ProcessMatrix::identity_process().chi);
        let mut avg = 0.0;
        for (v, out) in inputs.iter().zip(&direct_outputs) {
            avg += state_fidelity(out, v)?;
        }
        Ok(QptResult {
            process,
            process_fidelity: fp,
            phase_correction: theta,
            outputs,
            direct_outputs,
            average_state_fidelity: avg / inputs.len() as f64,
        })
    }

    pub fn entanglement_spec() -> ProtocolSpec {
        use std::f64::consts::{FRAC_PI_2, PI};
        ProtocolSpec {
            name: "entangle".into(),
            // |g⟩ → |e⟩ → (|e⟩ + |f⟩)/√2
            prep_a: vec![Rotation::x(Transition::Ge, PI), Rotation::y(Transition::Ef, FRAC_PI_2)],
            prep_b: vec![],
            drive_a: DriveRole::Emit,
            drive_b: DriveRole::Absorb,
            final_map_b: true,
            truncate_at: None,
            measurement: Measurement::StateTomography,
            seed: 0,
        }
    }

    /// Remote entanglement: A's `f` branch is emitted and absorbed at B,
    /// leaving `(|eg⟩ + |ge⟩)/√2` after the final map.
    pub fn run_entanglement(&self) -> Result<EntanglementResult> {
        let run = self.execute(&Self::entanglement_spec())?;
        let direct = run.transmons()?;
        let reconstructed = run.tomography.clone().expect("tomography requested");
        // virtual Z on B making ρ[eg, ge] real and positive
        let theta = reconstructed.matrix()[(3, 1)].arg();
        let z = kron(&CMatrix::identity(3, 3), &virtual_z(theta));
        let direct = apply(&direct, &z);
        let reconstructed = apply(&reconstructed, &z);
        let metrics = MetricsBundle::for_two_qutrit(&reconstructed, &bell_target(), Some(direct.matrix()))?;
        Ok(EntanglementResult {
            trajectory: run.trajectory,
            direct,
            reconstructed,
            phase_correction: theta,
            metrics,
        })
    }

    /// Entanglement with the longer coherence times and lower loss.
    pub fn run_upgrade_scenario(&self) -> Result<EntanglementResult> {
        self.upgraded().run_entanglement()
    }

    /// Bell fidelity with loss and/or decoherence switched off.
    pub fn error_budget(&self) -> Result<ErrorBudget> {
        let mut variants = vec![self.clone(), self.with_eta_c(1.0), self.clone(), self.with_eta_c(1.0)];
        variants[2].decoherence = false;
        variants[3].decoherence = false;
        let f: Vec<f64> = variants
            .par_iter()
            .map(|c| c.run_entanglement().map(|r| r.metrics.state_fidelity))
            .collect::<Result<_>>()?;
        Ok(ErrorBudget {
            full: f[0],
            loss_off: f[1],
            decoherence_off: f[2],
            both_off: f[3],
            loss_contribution: f[3] - f[2],
            decoherence_contribution: f[3] - f[1],
            loss_off_gain: f[1] - f[0],
            decoherence_off_gain: f[2] - f[0],
        })
    }
}

/// Process fidelity of a two-qubit-block output against the identity, for
/// callers that already hold a `χ`.
pub fn identity_process_fidelity(chi: &CMatrix) -> f64 {
    process_fidelity(chi, &ProcessMatrix::identity_process().chi)
}

/// `|ψ⟩` embedded as a qutrit with zero `f` amplitude.
pub fn qubit_as_qutrit(psi: &CVector) -> CVector {
    CVector::from_vec(vec![psi[0], psi[1], C64::new(0.0, 0.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ProtocolConfig {
        ProtocolConfig {
            window: 5.0,
            dt: 0.2,
            ..Default::default()
        }
    }

    fn noiseless_matched() -> ProtocolConfig {
        let mut c = quick();
        c.decoherence = false;
        c.device.link.eta_c = 1.0;
        c.device.node_b.kappa_t = c.device.node_a.kappa_t;
        c.device.node_a.chi_t = 0.0;
        c.device.node_b.chi_t = 0.0;
        c.device.node_a.k = 0.0;
        c.device.node_b.k = 0.0;
        c.kappa_eff_b = c.kappa_eff_a;
        c.window = 8.0;
        c
    }

    #[test]
    fn qpt_sequences_prepare_the_listed_inputs() {
        for (seq, target) in qpt_input_sequences().iter().zip(mutually_unbiased_inputs()) {
            let psi = ground_then(seq);
            let overlap = (qubit_as_qutrit(&target).adjoint() * &psi)[(0, 0)].norm();
            assert!((overlap - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn emission_preparations() {
        let f = ground_then(&ProtocolConfig::emission_spec(Node::B, EmissionInput::Excited, None).prep_b);
        assert!((f[2].norm() - 1.0).abs() < 1e-12);
        let s = ground_then(&ProtocolConfig::emission_spec(Node::B, EmissionInput::Superposition, None).prep_b);
        assert!((s[0].norm_sqr() - 0.5).abs() < 1e-12);
        assert!((s[2].norm_sqr() - 0.5).abs() < 1e-12);
        let e = ground_then(&ProtocolConfig::entanglement_spec().prep_a);
        assert!((e[1].norm_sqr() - 0.5).abs() < 1e-12 && (e[2].norm_sqr() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut s = ProtocolConfig::entanglement_spec();
        s.prep_a[0].theta = 4.0;
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = ProtocolConfig::entanglement_spec();
        s.drive_a = DriveRole::Absorb;
        assert!(s.validate().is_err());
        let json = serde_json::to_string(&ProtocolConfig::entanglement_spec()).unwrap();
        let back: ProtocolSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ProtocolConfig::entanglement_spec());
    }

    #[test]
    fn config_validation() {
        let mut c = quick();
        c.kappa_eff_a = 20.0;
        assert!(c.validate().is_err());
        let mut c = quick();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = quick();
        c.fock = 1;
        assert!(c.validate().is_err());
        assert!(quick().validate().is_ok());
    }

    #[test]
    fn grids_align() {
        let c = quick();
        let t = c.time_grid(Node::A);
        let env = c.absorption_envelope().unwrap();
        assert_eq!(env.len(), 2 * t.len() - 1);
        assert!((env.t[0] - t[0]).abs() < 1e-9);
        assert!((env.t[env.len() - 1] - t[t.len() - 1]).abs() < 1e-9);
        // time reverse of an emission with the same bandwidth through B
        let em = emission_drive(&[29.0, 30.0, 31.0], mhz_to_angular(c.kappa_eff_a), c.device.node_b.kappa_t_angular())
            .unwrap();
        assert!((env.value_at(-30.0).norm() - em.g_mag[1]).abs() < 1e-6);
    }

    #[test]
    fn ground_state_stays_put() {
        let c = quick();
        let spec = ProtocolConfig::transfer_spec(&[], true);
        let run = c.execute(&spec).unwrap();
        let p = run.final_pops_b().unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9);
        assert!(run.trajectory.photon_integral < 1e-12);
    }

    #[test]
    fn no_drive_leaves_only_decay() {
        let c = quick();
        let run = c.run_emission(Node::B, EmissionInput::Excited, Some(f64::NEG_INFINITY)).unwrap();
        let t = &run.trajectory;
        let duration = t.t[t.len() - 1] - t.t[0];
        let pf = t.pops_b.last().unwrap()[2];
        let gamma = 1.0 / (c.device.node_b.t1_ef * 1e3);
        assert!((pf - (-gamma * duration).exp()).abs() < 1e-6);
        assert!(t.photon_integral < 1e-12);
    }

    #[test]
    fn noiseless_transfer_is_nearly_perfect() {
        let c = noiseless_matched();
        let run = c.run_transfer(&[Rotation::x(Transition::Ge, std::f64::consts::PI)]).unwrap();
        let p = run.final_pops_b().unwrap();
        assert!(p[1] > 0.99, "{p:?}");
    }

    #[test]
    fn noiseless_entanglement_is_a_bell_state() {
        let c = noiseless_matched();
        let r = c.run_entanglement().unwrap();
        assert!(r.metrics.state_fidelity > 0.99, "{}", r.metrics.state_fidelity);
        assert!(r.metrics.concurrence > 0.98);
        assert!(r.metrics.hs_distance.unwrap() < 1e-3);
    }

    #[test]
    fn runs_are_deterministic() {
        let mut c = quick();
        c.tomography = TomographyMode::Sampled { shots: 500 };
        c.seed = 7;
        let a = c.run_entanglement().unwrap();
        let b = c.run_entanglement().unwrap();
        assert_eq!(a.reconstructed.matrix(), b.reconstructed.matrix());
        assert_eq!(a.trajectory, b.trajectory);
    }

    #[test]
    fn truncation_sweep_is_causal() {
        let c = quick();
        let full = c.run_emission(Node::B, EmissionInput::Excited, None).unwrap();
        let pts = c.truncation_sweep(Node::B, &[-20.0, 0.0, 20.0]).unwrap();
        // identical up to the last step before the cut
        for &tau in &[0.0, 20.0] {
            let cut = c.run_emission(Node::B, EmissionInput::Excited, Some(tau)).unwrap();
            let idx = full.trajectory.t.iter().position(|&t| t >= tau - 1e-9).unwrap() - 1;
            for k in 0..3 {
                assert!((cut.trajectory.pops_b[idx][k] - full.trajectory.pops_b[idx][k]).abs() < 1e-12);
            }
        }
        assert!(pts[0].photon_integral < pts[2].photon_integral);
    }
}
