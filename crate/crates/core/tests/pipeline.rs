//! End-to-end paths through several modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlink_core::device::DeviceParams;
use qlink_core::metrics::{hs_distance, state_fidelity};
use qlink_core::protocols::{ProtocolConfig, TomographyMode};
use qlink_core::qops::{basis_ket, CVector, DensityMatrix, C64};
use qlink_core::readout::{frequencies, mitigate, MixtureModel};
use qlink_core::tomography::{born_probabilities, gate_set, qst_mle, GateSetKind};

fn ideal_link() -> ProtocolConfig {
    let mut c = ProtocolConfig {
        window: 8.0,
        dt: 0.2,
        decoherence: false,
        ..Default::default()
    };
    c.device.link.eta_c = 1.0;
    c.device.node_b.kappa_t = c.device.node_a.kappa_t;
    for n in [&mut c.device.node_a, &mut c.device.node_b] {
        n.chi_t = 0.0;
        n.k = 0.0;
    }
    c.kappa_eff_b = c.kappa_eff_a;
    c
}

#[test]
fn lossless_link_transfers_the_identity() {
    let q = ideal_link().run_state_transfer_qpt().unwrap();
    assert!(q.process_fidelity > 0.98, "{}", q.process_fidelity);
    assert!(q.average_state_fidelity > 0.98);
}

#[test]
fn sampled_single_qutrit_tomography_through_readout() {
    let psi = CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.64), C64::new(0.48, 0.0)]);
    let rho = DensityMatrix::from_pure(vec![3], &psi).unwrap();
    let model = MixtureModel::node_b();
    let r = model.analytic_assignment();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pops: Vec<Vec<f64>> = gate_set(GateSetKind::Single)
        .iter()
        .map(|s| {
            let p = born_probabilities(rho.matrix(), s);
            let counts = model.sample_counts(&p, 25_000, &mut rng).unwrap();
            mitigate(&frequencies(&counts), &r).unwrap().populations
        })
        .collect();
    let rec = qst_mle(&pops, &[3]).unwrap().state;
    assert!(state_fidelity(rec.matrix(), &psi).unwrap() > 0.98);
}

#[test]
fn sampled_and_exact_entanglement_agree() {
    let base = ProtocolConfig {
        window: 6.0,
        dt: 0.4,
        ..Default::default()
    };
    let exact = base.run_entanglement().unwrap();
    let sampled = ProtocolConfig {
        tomography: TomographyMode::Sampled { shots: 25_000 },
        seed: 1,
        ..base
    }
    .run_entanglement()
    .unwrap();
    assert!(hs_distance(exact.reconstructed.matrix(), sampled.reconstructed.matrix()) < 0.05);
    assert!((exact.metrics.state_fidelity - sampled.metrics.state_fidelity).abs() < 0.02);
}

#[test]
fn device_file_round_trip() {
    let d = DeviceParams::default();
    let back = DeviceParams::from_json(&d.to_json()).unwrap();
    assert_eq!(back, d);
    assert!(DeviceParams::from_json("{\"node_a\": 3}").is_err());
}

#[test]
fn ground_state_input_never_excites_b() {
    let c = ProtocolConfig {
        window: 5.0,
        dt: 0.4,
        ..Default::default()
    };
    let run = c.run_transfer(&[]).unwrap();
    assert!((run.final_pops_b().unwrap()[0] - 1.0).abs() < 1e-9);
    let b = run.transmons().unwrap();
    let gg = basis_ket(9, 0);
    assert!((state_fidelity(b.matrix(), &gg).unwrap() - 1.0).abs() < 1e-9);
}
