//! Node and link parameters, the effective two-node Hamiltonian and the
//! collapse operators of the cascaded master equation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::DeviceError;
use crate::pulse::{DriveEnvelope, StarkModel};
use crate::qops::{annihilation, embed_matrix, hermiticity_defect, identity, ket_bra, projector, CMatrix, C64, I};
use crate::units::{mhz_to_angular, rate_from_us};

/// Subsystem order of the two-node Hilbert space.
pub const TRANSMON_A: usize = 0;
pub const RESONATOR_A: usize = 1;
pub const TRANSMON_B: usize = 2;
pub const RESONATOR_B: usize = 3;

pub const TRANSMON_LEVELS: usize = 3;
pub const DEFAULT_FOCK: usize = 3;

/// Readout resonator block. Never enters the dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// GHz
    #[serde(rename = "nu_R")]
    pub nu_r: f64,
    /// MHz
    #[serde(rename = "kappa_R")]
    pub kappa_r: f64,
    /// MHz
    #[serde(rename = "chi_R")]
    pub chi_r: f64,
}

/// Physical constants of one node. Frequencies in GHz, linewidths and shifts
/// as `x/2π` in MHz, times in µs.
///
/// `chi_T` and `K` are signed as they appear in the dressed Hamiltonian
/// (`χ_T = −E_C cos²Λ sin²Λ`, `K = χ_T²/α`), so both are negative for a
/// transmon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    pub nu_ge: f64,
    pub alpha: f64,
    #[serde(rename = "nu_T")]
    pub nu_t: f64,
    #[serde(rename = "kappa_T")]
    pub kappa_t: f64,
    #[serde(rename = "chi_T")]
    pub chi_t: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub kappa_int: f64,
    #[serde(rename = "T1ge")]
    pub t1_ge: f64,
    #[serde(rename = "T1ef")]
    pub t1_ef: f64,
    #[serde(rename = "T2ge")]
    pub t2_ge: f64,
    #[serde(rename = "T2ef")]
    pub t2_ef: f64,
    pub readout: ReadoutParams,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> DeviceError {
    DeviceError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl NodeParams {
    pub fn table_a() -> Self {
        let (alpha, chi) = (-265.0, -6.3);
        Self {
            nu_ge: 6.343,
            alpha,
            nu_t: 8.4005,
            kappa_t: 10.4,
            chi_t: chi,
            k: chi * chi / alpha,
            kappa_int: 0.0,
            t1_ge: 4.9,
            t1_ef: 1.6,
            t2_ge: 3.4,
            t2_ef: 2.1,
            readout: ReadoutParams {
                nu_r: 4.787,
                kappa_r: 12.6,
                chi_r: 5.8,
            },
        }
    }

    pub fn table_b() -> Self {
        let (alpha, chi) = (-308.0, -4.7);
        Self {
            nu_ge: 6.096,
            alpha,
            nu_t: 8.4003,
            kappa_t: 13.5,
            chi_t: chi,
            k: chi * chi / alpha,
            kappa_int: 0.0,
            t1_ge: 4.6,
            t1_ef: 1.4,
            t2_ge: 2.6,
            t2_ef: 0.9,
            readout: ReadoutParams {
                nu_r: 4.780,
                kappa_r: 27.1,
                chi_r: 11.6,
            },
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let finite = [
            ("nu_ge", self.nu_ge),
            ("alpha", self.alpha),
            ("nu_T", self.nu_t),
            ("kappa_T", self.kappa_t),
            ("chi_T", self.chi_t),
            ("K", self.k),
            ("kappa_int", self.kappa_int),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        if self.kappa_t <= 0.0 {
            return Err(invalid("kappa_T", "must be positive"));
        }
        if self.alpha >= 0.0 {
            return Err(invalid("alpha", "must be negative"));
        }
        if self.kappa_int < 0.0 {
            return Err(invalid("kappa_int", "must be non-negative"));
        }
        for (name, v) in [
            ("T1ge", self.t1_ge),
            ("T1ef", self.t1_ef),
            ("T2ge", self.t2_ge),
            ("T2ef", self.t2_ef),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if self.t2_ge > 2.0 * self.t1_ge * (1.0 + 1e-12) {
            return Err(invalid("T2ge", "exceeds 2·T1ge"));
        }
        if self.t2_ef > 2.0 * self.t1_ef * (1.0 + 1e-12) {
            return Err(invalid("T2ef", "exceeds 2·T1ef"));
        }
        Ok(())
    }

    /// All coherence times multiplied by `factor`.
    pub fn with_coherence_scaled(mut self, factor: f64) -> Self {
        self.t1_ge *= factor;
        self.t1_ef *= factor;
        self.t2_ge *= factor;
        self.t2_ef *= factor;
        self
    }

    pub fn with_coherence(mut self, t1_ge: f64, t1_ef: f64, t2_ge: f64, t2_ef: f64) -> Self {
        self.t1_ge = t1_ge;
        self.t1_ef = t1_ef;
        self.t2_ge = t2_ge;
        self.t2_ef = t2_ef;
        self
    }

    pub fn kappa_t_angular(&self) -> f64 {
        mhz_to_angular(self.kappa_t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Power transmission of the channel between the nodes.
    pub eta_c: f64,
    /// Shift of the absorption drive relative to the emission drive (ns).
    #[serde(default)]
    pub time_offset: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            eta_c: 0.77,
            time_offset: 0.0,
        }
    }
}

impl LinkParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(0.0..=1.0).contains(&self.eta_c) {
            return Err(invalid("eta_c", format!("{} not in [0, 1]", self.eta_c)));
        }
        if !self.time_offset.is_finite() {
            return Err(invalid("time_offset", "must be finite"));
        }
        Ok(())
    }
}

/// Contents of a device parameter file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub node_a: NodeParams,
    pub node_b: NodeParams,
    pub link: LinkParams,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            node_a: NodeParams::table_a(),
            node_b: NodeParams::table_b(),
            link: LinkParams::default(),
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<(), DeviceError> {
        self.node_a.validate()?;
        self.node_b.validate()?;
        self.link.validate()
    }

    pub fn from_json(text: &str) -> crate::Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("device parameters serialize")
    }
}

/// Relaxation and pure-dephasing rates (1/ns) of one transmon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRates {
    pub gamma1_ge: f64,
    pub gamma1_ef: f64,
    pub gamma_phi_ge: f64,
    pub gamma_phi_ef: f64,
}

impl DecoherenceRates {
    /// Dephasing rates chosen so that the `ge` and `ef` coherences decay at
    /// exactly `1/T2ge` and `1/T2ef`. With the operators
    /// `√γφge(|e⟩⟨e|−|g⟩⟨g|)` and `√γφef(|f⟩⟨f|−|e⟩⟨e|)` the coherence decay
    /// rates are
    ///
    /// `Γge = γ1ge/2 + 2γφge + γφef/2`,
    /// `Γef = (γ1ge+γ1ef)/2 + γφge/2 + 2γφef`,
    ///
    /// a 2×2 linear system solved here.
    pub fn from_node(node: &NodeParams) -> Result<Self, DeviceError> {
        let g1 = rate_from_us(node.t1_ge);
        let g2 = rate_from_us(node.t1_ef);
        let c1 = rate_from_us(node.t2_ge) - 0.5 * g1;
        let c2 = rate_from_us(node.t2_ef) - 0.5 * (g1 + g2);
        let phi_ge = (2.0 * c1 - 0.5 * c2) / 3.75;
        let phi_ef = (2.0 * c2 - 0.5 * c1) / 3.75;
        // tolerate round-off around zero
        let tol = 1e-15;
        if phi_ge < -tol {
            return Err(DeviceError::NegativeRate {
                name: "gamma_phi_ge",
                value: phi_ge,
            });
        }
        if phi_ef < -tol {
            return Err(DeviceError::NegativeRate {
                name: "gamma_phi_ef",
                value: phi_ef,
            });
        }
        Ok(Self {
            gamma1_ge: g1,
            gamma1_ef: g2,
            gamma_phi_ge: phi_ge.max(0.0),
            gamma_phi_ef: phi_ef.max(0.0),
        })
    }

    /// Decay rate of the `g–e` coherence.
    pub fn coherence_rate_ge(&self) -> f64 {
        0.5 * self.gamma1_ge + 2.0 * self.gamma_phi_ge + 0.5 * self.gamma_phi_ef
    }

    /// Decay rate of the `e–f` coherence.
    pub fn coherence_rate_ef(&self) -> f64 {
        0.5 * (self.gamma1_ge + self.gamma1_ef) + 0.5 * self.gamma_phi_ge + 2.0 * self.gamma_phi_ef
    }

    /// Decay rate of the `g–f` coherence.
    pub fn coherence_rate_gf(&self) -> f64 {
        0.5 * self.gamma1_ef + 0.5 * self.gamma_phi_ge + 0.5 * self.gamma_phi_ef
    }
}

/// Undressed circuit parameters (angular frequencies in rad/ns).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BareParams {
    pub omega_t: f64,
    pub omega_ge: f64,
    pub e_c: f64,
    pub g_t: f64,
    /// Transmon displacement amplitude induced by the drive.
    pub beta: f64,
    pub omega_d: f64,
}

/// Parameters of the dressed, displaced frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedParams {
    pub lambda: f64,
    pub alpha: f64,
    pub k: f64,
    pub chi_t: f64,
    pub delta_t: f64,
    pub delta_eg: f64,
    pub g_tilde: f64,
}

impl BareParams {
    /// Bogoliubov angle `Λ` with `tan 2Λ = −2g_T/(ω_T − ω_ge + 2E_C|β|)`.
    pub fn lambda(&self) -> Result<f64, DeviceError> {
        let den = self.omega_t - self.omega_ge + 2.0 * self.e_c * self.beta.abs();
        let ratio = 2.0 * self.g_t / den;
        if !ratio.is_finite() || ratio.abs() >= 1.0 {
            return Err(DeviceError::NonDispersive(ratio.abs()));
        }
        Ok(0.5 * (-ratio).atan())
    }
}

pub fn dressed_from_bare(bare: &BareParams) -> Result<DressedParams, DeviceError> {
    let lambda = bare.lambda()?;
    let (s, c) = lambda.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let e_c = bare.e_c;
    let shifted_ge = bare.omega_ge - 2.0 * e_c * bare.beta * bare.beta;
    let sin2 = (2.0 * lambda).sin();
    Ok(DressedParams {
        lambda,
        alpha: -e_c * c2 * c2,
        k: -e_c * s2 * s2,
        chi_t: -e_c * c2 * s2,
        delta_t: bare.omega_t * c2 + shifted_ge * s2 - bare.g_t * sin2 - bare.omega_d,
        delta_eg: shifted_ge * c2 + bare.omega_t * s2 + bare.g_t * sin2 - bare.omega_d,
        g_tilde: -e_c * bare.beta * std::f64::consts::SQRT_2 * c2 * s,
    })
}

/// Rotating frame of the transmon terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    /// Keeps `−(α/2)b†b + (α/2)b†b†bb`, which places `|e⟩` at `−α/2`
    /// relative to the degenerate `|g⟩` and `|f⟩`.
    #[default]
    Rotating,
    /// Drops the anharmonic transmon terms. They commute with every other
    /// term of the generator (drives and dissipators only connect `g`, `e`,
    /// `f` through operators that are invariant under the corresponding
    /// phase rotation), so this frame differs from [`Frame::Rotating`] only by
    /// a deterministic phase on `|e⟩`.
    Qutrit,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct HamiltonianOptions {
    pub frame: Frame,
    /// Adds the drive-induced ac Stark shift `Δ(|g̃(t)|)·|f⟩⟨f|` per node.
    pub stark: Option<[StarkModel; 2]>,
    /// Static detuning of the `f0–g1` transition per node (rad/ns) on `|f⟩`.
    pub detuning: [f64; 2],
}

/// How a drive term's envelope enters the Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub enum TermKind {
    /// `g̃(t)·op + g̃*(t)·op†`
    Coupling,
    /// `Δ(|g̃(t)|)·op` with `op` Hermitian.
    StarkShift(StarkModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriveTerm {
    pub op: CMatrix,
    pub envelope: DriveEnvelope,
    pub kind: TermKind,
}

impl DriveTerm {
    pub fn coefficient(&self, t: f64) -> C64 {
        let g = self.envelope.value_at(t);
        match &self.kind {
            TermKind::Coupling => g,
            TermKind::StarkShift(model) => C64::new(model.shift(g.norm()), 0.0),
        }
    }
}

/// Time-dependent Hamiltonian `H(t) = H_static + Σ_k terms_k(t)` in rad/ns.
#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub dims: Vec<usize>,
    pub static_part: CMatrix,
    pub terms: Vec<DriveTerm>,
}

impl Hamiltonian {
    pub fn zero(dims: Vec<usize>) -> Self {
        let d = dims.iter().product();
        Self {
            dims,
            static_part: CMatrix::zeros(d, d),
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    /// Dense `H(t)`.
    pub fn at(&self, t: f64) -> CMatrix {
        let mut h = self.static_part.clone();
        for term in &self.terms {
            let coef = term.coefficient(t);
            match term.kind {
                TermKind::Coupling => {
                    h += term.op.map(|z| z * coef);
                    h += term.op.adjoint().map(|z| z * coef.conj());
                }
                TermKind::StarkShift(_) => h += term.op.map(|z| z * coef),
            }
        }
        h
    }
}

pub fn two_node_dims(fock: usize) -> Vec<usize> {
    vec![TRANSMON_LEVELS, fock, TRANSMON_LEVELS, fock]
}

fn uniform_step(t: &[f64]) -> Option<f64> {
    if t.len() < 2 {
        return None;
    }
    let h = t[1] - t[0];
    let uniform = t
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    uniform.then_some(h)
}

struct NodeOps {
    b: CMatrix,
    a: CMatrix,
}

fn node_ops(transmon: usize, resonator: usize, dims: &[usize]) -> Result<NodeOps, DeviceError> {
    Ok(NodeOps {
        b: embed_matrix(&annihilation(dims[transmon]), transmon, dims)?,
        a: embed_matrix(&annihilation(dims[resonator]), resonator, dims)?,
    })
}

pub fn build_hamiltonian(
    a: &NodeParams,
    b: &NodeParams,
    link: &LinkParams,
    g_a: &DriveEnvelope,
    g_b: &DriveEnvelope,
    fock: usize,
) -> Result<Hamiltonian, DeviceError> {
    build_hamiltonian_with(a, b, link, g_a, g_b, fock, &HamiltonianOptions::default())
}

/// Effective Hamiltonian of the two nodes in the dressed, displaced frame:
/// per node `−(α/2)b†b + (α/2)b†b†bb + (K/2)a†a†aa + 2χ_T a†a b†b +
/// (g̃ b†b†a + g̃* a†bb)/√2`, plus the cascade coupling
/// `−i(√(κ_A κ_B η_c)/2)(a_A a_B† − a_A† a_B)`.
pub fn build_hamiltonian_with(
    a: &NodeParams,
    b: &NodeParams,
    link: &LinkParams,
    g_a: &DriveEnvelope,
    g_b: &DriveEnvelope,
    fock: usize,
    options: &HamiltonianOptions,
) -> Result<Hamiltonian, DeviceError> {
    if fock < 2 {
        return Err(DeviceError::InvalidTruncation(fock));
    }
    a.validate()?;
    b.validate()?;
    link.validate()?;
    match (uniform_step(&g_a.t), uniform_step(&g_b.t)) {
        (Some(ha), Some(hb)) if (ha - hb).abs() <= 1e-9 * ha.abs().max(1.0) => {}
        _ => return Err(DeviceError::MismatchedGrids),
    }
    let dims = two_node_dims(fock);
    let d: usize = dims.iter().product();
    let mut h = CMatrix::zeros(d, d);
    let mut terms = Vec::new();
    let nodes = [(a, g_a, TRANSMON_A, RESONATOR_A), (b, g_b, TRANSMON_B, RESONATOR_B)];
    let mut ladders = Vec::new();
    for (k, (node, env, tslot, rslot)) in nodes.into_iter().enumerate() {
        let ops = node_ops(tslot, rslot, &dims)?;
        let (bd, ad) = (ops.b.adjoint(), ops.a.adjoint());
        let nb = &bd * &ops.b;
        let na = &ad * &ops.a;
        if options.frame == Frame::Rotating {
            let alpha = mhz_to_angular(node.alpha);
            h += nb.map(|z| z * (-0.5 * alpha));
            h += (&bd * &bd * &ops.b * &ops.b).map(|z| z * (0.5 * alpha));
        }
        let kerr = mhz_to_angular(node.k);
        h += (&ad * &ad * &ops.a * &ops.a).map(|z| z * (0.5 * kerr));
        h += (&na * &nb).map(|z| z * (2.0 * mhz_to_angular(node.chi_t)));
        let f_proj = embed_matrix(&projector(TRANSMON_LEVELS, 2), tslot, &dims)?;
        if options.detuning[k] != 0.0 {
            h += f_proj.map(|z| z * options.detuning[k]);
        }
        let coupling = (&bd * &bd * &ops.a).map(|z| z * std::f64::consts::FRAC_1_SQRT_2);
        terms.push(DriveTerm {
            op: coupling,
            envelope: env.clone(),
            kind: TermKind::Coupling,
        });
        if let Some(models) = &options.stark {
            terms.push(DriveTerm {
                op: f_proj,
                envelope: env.clone(),
                kind: TermKind::StarkShift(models[k]),
            });
        }
        ladders.push(ops.a);
    }
    let strength = (a.kappa_t_angular() * b.kappa_t_angular() * link.eta_c).sqrt() / 2.0;
    let (aa, ab) = (&ladders[0], &ladders[1]);
    let cascade = aa * ab.adjoint() - aa.adjoint() * ab;
    h += cascade.map(|z| -I * strength * z);
    debug_assert!(hermiticity_defect(&h) < 1e-12);
    Ok(Hamiltonian {
        dims,
        static_part: h,
        terms,
    })
}

/// Role of a collapse operator, used to pick out output and loss fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Emitter field lost before reaching node B.
    Loss,
    /// Collective field leaving node B towards the detector.
    Output,
    Internal,
    Relaxation,
    Dephasing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOperator {
    pub label: String,
    pub channel: Channel,
    /// Rate-weighted operator (rates in 1/ns).
    pub op: CMatrix,
}

/// Relaxation and dephasing operators of a transmon at `slot`.
pub fn transmon_collapse_ops(
    node: &NodeParams,
    slot: usize,
    dims: &[usize],
    tag: &str,
) -> Result<Vec<CollapseOperator>, DeviceError> {
    let r = DecoherenceRates::from_node(node)?;
    let n = TRANSMON_LEVELS;
    let entries = [
        ("gamma1_ge", Channel::Relaxation, r.gamma1_ge, ket_bra(n, 0, 1)),
        ("gamma1_ef", Channel::Relaxation, r.gamma1_ef, ket_bra(n, 1, 2)),
        (
            "gamma_phi_ge",
            Channel::Dephasing,
            r.gamma_phi_ge,
            projector(n, 1) - projector(n, 0),
        ),
        (
            "gamma_phi_ef",
            Channel::Dephasing,
            r.gamma_phi_ef,
            projector(n, 2) - projector(n, 1),
        ),
    ];
    let mut out = Vec::new();
    for (name, channel, rate, op) in entries {
        if rate > 0.0 {
            out.push(CollapseOperator {
                label: format!("{name}_{tag}"),
                channel,
                op: embed_matrix(&op, slot, dims)?.map(|z| z * rate.sqrt()),
            });
        }
    }
    Ok(out)
}

/// Collapse operators of the cascaded system. Zero-rate operators are
/// omitted except the collective output operator, which is always first
/// among the field operators.
pub fn build_collapse_ops(
    a: &NodeParams,
    b: &NodeParams,
    link: &LinkParams,
    fock: usize,
) -> Result<Vec<CollapseOperator>, DeviceError> {
    build_collapse_ops_with(a, b, link, fock, true)
}

/// As [`build_collapse_ops`]; `decoherence = false` drops transmon
/// relaxation, dephasing and internal resonator loss.
pub fn build_collapse_ops_with(
    a: &NodeParams,
    b: &NodeParams,
    link: &LinkParams,
    fock: usize,
    decoherence: bool,
) -> Result<Vec<CollapseOperator>, DeviceError> {
    if fock < 2 {
        return Err(DeviceError::InvalidTruncation(fock));
    }
    a.validate()?;
    b.validate()?;
    link.validate()?;
    let dims = two_node_dims(fock);
    let aa = embed_matrix(&annihilation(fock), RESONATOR_A, &dims)?;
    let ab = embed_matrix(&annihilation(fock), RESONATOR_B, &dims)?;
    let (ka, kb) = (a.kappa_t_angular(), b.kappa_t_angular());
    let mut out = Vec::new();
    out.push(CollapseOperator {
        label: "output".into(),
        channel: Channel::Output,
        op: aa.map(|z| z * (ka * link.eta_c).sqrt()) + ab.map(|z| z * kb.sqrt()),
    });
    let loss = ka * (1.0 - link.eta_c);
    if loss > 0.0 {
        out.push(CollapseOperator {
            label: "loss_A".into(),
            channel: Channel::Loss,
            op: aa.map(|z| z * loss.sqrt()),
        });
    }
    if decoherence {
        for (node, op, tag) in [(a, &aa, "A"), (b, &ab, "B")] {
            let kint = mhz_to_angular(node.kappa_int);
            if kint > 0.0 {
                out.push(CollapseOperator {
                    label: format!("kappa_int_{tag}"),
                    channel: Channel::Internal,
                    op: op.map(|z| z * kint.sqrt()),
                });
            }
        }
        out.extend(transmon_collapse_ops(a, TRANSMON_A, &dims, "A")?);
        out.extend(transmon_collapse_ops(b, TRANSMON_B, &dims, "B")?);
    }
    Ok(out)
}

/// Identity on the two-node space (convenience for tests and callers).
pub fn two_node_identity(fock: usize) -> CMatrix {
    identity(two_node_dims(fock).iter().product())
}
