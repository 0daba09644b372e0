//! Scenario runners. Each returns the artifacts in memory; nothing touches
//! the disk until the whole run has succeeded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use qlink_core::io::{csv_table, MatrixJson};
use qlink_core::metrics::expectations_csv;
use qlink_core::protocols::{EmissionInput, EntanglementResult, Node, ProtocolConfig};
use qlink_core::readout::{calibration_counts, shots_csv, AssignmentMatrix, MixtureModel};
use qlink_core::Result;

use crate::config::{RunConfig, Scenario};

/// Files of one run, written in order by a single writer.
#[derive(Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub summary: serde_json::Map<String, Value>,
}

impl Artifacts {
    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, s);
        Ok(())
    }

    fn put<T: Serialize>(&mut self, key: &str, value: T) -> Result<()> {
        self.summary.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }
}

/// Number of truncation times in an emission sweep.
const TRUNCATION_POINTS: usize = 41;
/// Shots per prepared state kept in the readout scatter CSV.
const SCATTER_SHOTS: usize = 2000;

pub fn run(rc: &RunConfig) -> Result<Artifacts> {
    let mut cfg = rc.protocol_config()?;
    let mut out = Artifacts::default();
    out.put("scenario", rc.scenario.name())?;
    if rc.overrides.fit_offset {
        let fit = cfg.fit_time_offset()?;
        cfg.device.link.time_offset = fit.offset;
        out.put("fitted_time_offset_ns", fit.offset)?;
    }
    match rc.scenario {
        Scenario::EmitA => emission(&cfg, Node::A, rc.truncate_sweep, &mut out)?,
        Scenario::EmitB => emission(&cfg, Node::B, rc.truncate_sweep, &mut out)?,
        Scenario::Transfer => transfer(&cfg, &mut out)?,
        Scenario::Qpt => qpt(&cfg, &mut out)?,
        Scenario::Entangle => {
            let r = cfg.run_entanglement()?;
            entanglement(&r, &mut out)?
        }
        Scenario::Upgrade => {
            let r = cfg.run_upgrade_scenario()?;
            entanglement(&r, &mut out)?
        }
        Scenario::Budget => {
            let b = cfg.error_budget()?;
            for (k, v) in serde_json::to_value(&b)?.as_object().expect("struct").iter() {
                out.summary.insert(k.clone(), v.clone());
            }
        }
        Scenario::ReadoutSim => readout(rc, &mut out)?,
        Scenario::Sweep => sweep(rc, &mut out)?,
    }
    Ok(out)
}

fn emission(cfg: &ProtocolConfig, node: Node, truncate_sweep: bool, out: &mut Artifacts) -> Result<()> {
    let fock = cfg.run_emission(node, EmissionInput::Excited, None)?;
    let sup = cfg.run_emission(node, EmissionInput::Superposition, None)?;
    let traj = &fock.trajectory;
    let pops = match node {
        Node::A => traj.pops_a.last(),
        Node::B => traj.pops_b.last(),
    }
    .copied()
    .unwrap_or([0.0; 3]);
    out.text("trajectory.csv", traj.to_csv());
    out.text("superposition_trajectory.csv", sup.trajectory.to_csv());
    let drive = match node {
        Node::A => &fock.drive_a,
        Node::B => &fock.drive_b,
    };
    out.text("drive.csv", drive.to_csv());
    out.put("final_populations", pops)?;
    out.put("photon_integral", traj.photon_integral)?;
    out.put("field_power_integral", sup.trajectory.mean_field_integral())?;
    out.put("max_trace_error", traj.max_trace_error)?;
    if truncate_sweep {
        let t = cfg.time_grid(node);
        let (t0, t1) = (t[0], t[t.len() - 1]);
        let taus: Vec<f64> = (0..TRUNCATION_POINTS)
            .map(|k| t0 + (t1 - t0) * k as f64 / (TRUNCATION_POINTS - 1) as f64)
            .collect();
        let pts = cfg.truncation_sweep(node, &taus)?;
        let rows = pts.iter().map(|p| {
            vec![
                p.tau,
                p.pops_at_tau[0],
                p.pops_at_tau[1],
                p.pops_at_tau[2],
                p.pops_final[0],
                p.pops_final[1],
                p.pops_final[2],
                p.photon_integral,
            ]
        });
        out.text(
            "truncation.csv",
            csv_table(
                &["tau_ns", "Pg_tau", "Pe_tau", "Pf_tau", "Pg_end", "Pe_end", "Pf_end", "photon_integral"],
                rows,
            ),
        );
        out.put("truncation_points", pts.len())?;
    }
    Ok(())
}

fn transfer(cfg: &ProtocolConfig, out: &mut Artifacts) -> Result<()> {
    let r = cfg.run_transfer_report()?;
    out.text("trajectory_with_absorption.csv", r.with_absorption.trajectory.to_csv());
    out.text("trajectory_without_absorption.csv", r.without_absorption.trajectory.to_csv());
    out.text("emission_a.csv", r.emit_a.trajectory.to_csv());
    out.text("emission_b.csv", r.emit_b.trajectory.to_csv());
    out.text("drive_a.csv", r.with_absorption.drive_a.to_csv());
    out.text("drive_b.csv", r.with_absorption.drive_b.to_csv());
    let e = &r.efficiencies;
    out.put("transfer_efficiency", e.transfer)?;
    out.put("saturation_time_ns", e.saturation_time)?;
    out.put("absorption_efficiency", e.absorption)?;
    out.put("absorption_efficiency_field", r.absorption_mean_field)?;
    out.put("loss", e.loss)?;
    out.put("field_power_ratio_a_over_b", 1.0 - e.loss)?;
    out.put(
        "photon_flux_ratio_a_over_b",
        r.emit_a.trajectory.photon_integral / r.emit_b.trajectory.photon_integral,
    )?;
    out.put("final_populations_b", r.final_pops_b)?;
    out.put("time_offset_ns", cfg.device.link.time_offset)?;
    Ok(())
}

fn qpt(cfg: &ProtocolConfig, out: &mut Artifacts) -> Result<()> {
    let q = cfg.run_state_transfer_qpt()?;
    out.json("chi.json", &MatrixJson::from_matrix(&q.process.chi))?;
    let outputs: Vec<MatrixJson> = q.outputs.iter().map(MatrixJson::from_matrix).collect();
    out.json("output_states.json", &json!({
        "inputs": ["g", "e", "+", "-", "+i", "-i"],
        "reconstructed": outputs,
        "direct": q.direct_outputs.iter().map(MatrixJson::from_matrix).collect::<Vec<_>>(),
    }))?;
    out.put("process_fidelity", q.process_fidelity)?;
    out.put("average_state_fidelity", q.average_state_fidelity)?;
    out.put("phase_correction_rad", q.phase_correction)?;
    Ok(())
}

fn entanglement(r: &EntanglementResult, out: &mut Artifacts) -> Result<()> {
    let m = &r.metrics;
    out.text("trajectory.csv", r.trajectory.to_csv());
    out.json("density_matrix.json", &json!({
        "reconstructed": MatrixJson::from_matrix(r.reconstructed.matrix()),
        "direct": MatrixJson::from_matrix(r.direct.matrix()),
    }))?;
    out.text("pauli.csv", expectations_csv(&m.pauli_expectations));
    out.text("gellmann.csv", expectations_csv(&m.gellmann_expectations));
    out.put("fidelity", m.state_fidelity)?;
    out.put("concurrence", m.concurrence)?;
    out.put("concurrence_normalized", m.concurrence_normalized)?;
    out.put("ccnr", m.ccnr)?;
    out.put("residual_f_population", m.residual_f_population)?;
    out.put("qubit_block_trace", m.qubit_block_trace)?;
    out.put("hs_distance_to_direct", m.hs_distance)?;
    out.put("phase_correction_rad", r.phase_correction)?;
    Ok(())
}

fn readout(rc: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let mut sims = Vec::new();
    for (k, (label, model, table)) in [
        ("a", MixtureModel::node_a(), AssignmentMatrix::measured_node_a()),
        ("b", MixtureModel::node_b(), AssignmentMatrix::measured_node_b()),
    ]
    .into_iter()
    .enumerate()
    {
        let seed = rc.seed.wrapping_add(k as u64);
        let counts = calibration_counts(&model, rc.shots, seed)?;
        let sim = AssignmentMatrix::from_counts(&counts)?;
        let mut worst: f64 = 0.0;
        for a in 0..3 {
            for s in 0..3 {
                worst = worst.max((sim.get(a, s) - table.get(a, s)).abs());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut shots = Vec::new();
        for s in 0..3 {
            let mut p = [0.0; 3];
            p[s] = 1.0;
            shots.extend(model.sample_labeled(&p, SCATTER_SHOTS.min(rc.shots), &mut rng)?);
        }
        out.text(&format!("shots_{label}.csv"), shots_csv(&shots, &model));
        out.json(&format!("model_{label}.json"), &model)?;
        out.json(&format!("assignment_{label}.json"), &sim)?;
        out.put(&format!("error_probability_{label}"), sim.error_probability())?;
        out.put(&format!("condition_number_{label}"), sim.condition_number())?;
        out.put(&format!("max_deviation_from_reference_{label}"), worst)?;
        sims.push(sim);
    }
    out.json("assignment_two_node.json", &AssignmentMatrix::two_node(&sims[0], &sims[1]))?;
    out.put("shots_per_state", rc.shots)?;
    Ok(())
}

fn sweep(rc: &RunConfig, out: &mut Artifacts) -> Result<()> {
    let plan = rc.sweep.as_ref().expect("validated sweep plan");
    let mut rows = Vec::with_capacity(plan.values.len());
    for &v in &plan.values {
        let cfg = rc.with_param(plan.parameter, v)?.protocol_config()?;
        let m = cfg.run_entanglement()?.metrics;
        rows.push(vec![v, m.state_fidelity, m.concurrence, m.ccnr, m.residual_f_population]);
    }
    out.put("parameter", plan.parameter)?;
    out.put("values", &plan.values)?;
    out.put("fidelity", rows.iter().map(|r| r[1]).collect::<Vec<_>>())?;
    out.text(
        "sweep.csv",
        csv_table(&["value", "fidelity", "concurrence", "ccnr", "residual_f"], rows),
    );
    Ok(())
}
