//! Resolved run configuration. Everything a run depends on lives here, so
//! the manifest written next to the artifacts is enough to repeat it.

use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use qlink_core::device::DeviceParams;
use qlink_core::protocols::{ProtocolConfig, TomographyMode};
use qlink_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    EmitA,
    EmitB,
    Transfer,
    Qpt,
    Entangle,
    Upgrade,
    Budget,
    ReadoutSim,
    Sweep,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::EmitA => "emit-a",
            Scenario::EmitB => "emit-b",
            Scenario::Transfer => "transfer",
            Scenario::Qpt => "qpt",
            Scenario::Entangle => "entangle",
            Scenario::Upgrade => "upgrade",
            Scenario::Budget => "budget",
            Scenario::ReadoutSim => "readout-sim",
            Scenario::Sweep => "sweep",
        }
    }
}

/// Overrides a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    EtaC,
    CoherenceScale,
    KappaEff,
    TimeOffset,
    Fock,
    Dt,
    Window,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub eta_c: Option<f64>,
    /// Factor applied to all T1/T2 of both nodes.
    pub coherence_scale: Option<f64>,
    /// Photon bandwidth (MHz) used for every emission.
    pub kappa_eff: Option<f64>,
    /// Delay of B's absorption drive (ns).
    pub time_offset: Option<f64>,
    /// Fit the delay maximizing transfer before running.
    pub fit_offset: bool,
    pub fock: Option<usize>,
    pub dt: Option<f64>,
    pub window: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub device: DeviceParams,
    #[serde(default)]
    pub overrides: Overrides,
    pub tomography: TomographyMode,
    /// Shots per prepared state of the readout simulation.
    pub shots: usize,
    pub seed: u64,
    #[serde(default)]
    pub truncate_sweep: bool,
    #[serde(default)]
    pub sweep: Option<SweepPlan>,
}

impl RunConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            device: DeviceParams::default(),
            overrides: Overrides::default(),
            tomography: TomographyMode::Exact,
            shots: qlink_core::readout::DEFAULT_SHOTS,
            seed: 0,
            truncate_sweep: false,
            sweep: None,
        }
    }

    /// Reads either a bare run config or a manifest holding one under
    /// `config`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let inner = match value.get("config") {
            Some(c) if value.get("tool").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Protocol settings with all overrides applied (except the offset fit,
    /// which needs a simulation).
    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        let mut c = ProtocolConfig {
            device: self.device,
            tomography: self.tomography,
            seed: self.seed,
            ..Default::default()
        };
        let o = &self.overrides;
        if let Some(x) = o.eta_c {
            c.device.link.eta_c = x;
        }
        if let Some(s) = o.coherence_scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("coherence scale {s} must be positive")));
            }
            c = c.with_coherence_scale(s);
        }
        if let Some(k) = o.kappa_eff {
            c.kappa_eff_a = k;
            c.kappa_eff_b = k;
        }
        if let Some(t) = o.time_offset {
            c.device.link.time_offset = t;
        }
        if let Some(n) = o.fock {
            c.fock = n;
        }
        if let Some(dt) = o.dt {
            c.dt = dt;
        }
        if let Some(w) = o.window {
            c.window = w;
        }
        c.validate()?;
        Ok(c)
    }

    /// Copy with one sweep parameter replaced.
    pub fn with_param(&self, p: SweepParam, value: f64) -> Result<Self> {
        let mut c = self.clone();
        let o = &mut c.overrides;
        match p {
            SweepParam::EtaC => o.eta_c = Some(value),
            SweepParam::CoherenceScale => o.coherence_scale = Some(value),
            SweepParam::KappaEff => o.kappa_eff = Some(value),
            SweepParam::TimeOffset => o.time_offset = Some(value),
            SweepParam::Fock => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::Config(format!("fock truncation must be an integer, got {value}")));
                }
                o.fock = Some(value as usize);
            }
            SweepParam::Dt => o.dt = Some(value),
            SweepParam::Window => o.window = Some(value),
        }
        Ok(c)
    }

    /// Checks everything that can be checked without simulating.
    pub fn validate(&self) -> Result<()> {
        self.protocol_config()?;
        if self.shots == 0 {
            return Err(Error::Config("shots must be positive".into()));
        }
        if self.truncate_sweep && !matches!(self.scenario, Scenario::EmitA | Scenario::EmitB) {
            return Err(Error::Config("--truncate-sweep applies to emit-a and emit-b only".into()));
        }
        match (&self.sweep, self.scenario) {
            (None, Scenario::Sweep) => Err(Error::Config("sweep needs --param and --values".into())),
            (Some(_), s) if s != Scenario::Sweep => {
                Err(Error::Config(format!("--param/--values are not used by scenario {}", s.name())))
            }
            (Some(plan), _) => {
                if plan.values.is_empty() {
                    return Err(Error::Config("sweep value list is empty".into()));
                }
                for &v in &plan.values {
                    self.with_param(plan.parameter, v)?.protocol_config()?;
                }
                Ok(())
            }
            (None, _) => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let mut rc = RunConfig::new(Scenario::Entangle);
        rc.overrides.eta_c = Some(0.9);
        rc.overrides.kappa_eff = Some(8.0);
        rc.overrides.fock = Some(4);
        let c = rc.protocol_config().unwrap();
        assert_eq!(c.device.link.eta_c, 0.9);
        assert_eq!((c.kappa_eff_a, c.kappa_eff_b), (8.0, 8.0));
        assert_eq!(c.fock, 4);
    }

    #[test]
    fn invalid_overrides_are_config_errors() {
        let mut rc = RunConfig::new(Scenario::Entangle);
        rc.overrides.eta_c = Some(1.5);
        assert!(matches!(rc.validate(), Err(Error::Device(_)) | Err(Error::Config(_))));
        let mut rc = RunConfig::new(Scenario::Sweep);
        assert!(rc.validate().is_err());
        rc.sweep = Some(SweepPlan {
            parameter: SweepParam::EtaC,
            values: vec![],
        });
        assert!(rc.validate().is_err());
        rc.sweep = Some(SweepPlan {
            parameter: SweepParam::Fock,
            values: vec![3.5],
        });
        assert!(rc.validate().is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let mut rc = RunConfig::new(Scenario::Qpt);
        rc.tomography = TomographyMode::Sampled { shots: 100 };
        let dir = std::env::temp_dir().join(format!("qlink-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("m.json");
        let manifest = serde_json::json!({"tool": "qlink", "config": rc});
        std::fs::write(&path, manifest.to_string()).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap(), rc);
        std::fs::write(&path, serde_json::to_string(&rc).unwrap()).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap(), rc);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
