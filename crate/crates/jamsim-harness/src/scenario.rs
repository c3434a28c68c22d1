//! Scenario files.

use std::path::Path;

use jamsim::geometry::{ScenarioTopology, Target, TopologyDoc};
use jamsim::jammer::{InvalidateMode, Placement, StrategyConfig};
use jamsim::radar::{CfarConfig, Window};
use jamsim::sync::SyncConfig;
use jamsim::OfdmConfig;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// CFO-difference regions in ppm: `(lo, hi]`, the low region closed at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfoRegions {
    pub low: (f64, f64),
    pub med: (f64, f64),
    pub high: (f64, f64),
}

impl Default for CfoRegions {
    fn default() -> Self {
        Self { low: (0.0, 1.0), med: (1.0, 4.0), high: (4.0, 8.0) }
    }
}

impl CfoRegions {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        match name {
            "low" => Some(self.low),
            "med" => Some(self.med),
            "high" => Some(self.high),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub ofdm: OfdmConfig,
    pub topology: TopologyDoc,
    /// Alice's direct path over noise, per demodulated subcarrier.
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub alice_cfo_hz: f64,
    #[serde(default = "default_training_seed")]
    pub training_seed: u64,
    #[serde(default)]
    pub sync: SyncConfig,
    #[serde(default)]
    pub cfar: CfarConfig,
    #[serde(default)]
    pub window: Window,
    /// FFT window lead inside the prefix, samples. Defaults to half the prefix.
    #[serde(default)]
    pub backoff: Option<usize>,
    /// Association gate, (range, Doppler) bins.
    #[serde(default = "default_tolerance")]
    pub tolerance: (usize, usize),
    #[serde(default)]
    pub jammer: Option<StrategyConfig>,
    #[serde(default)]
    pub cfo_regions: CfoRegions,
}

fn default_snr() -> f64 {
    30.0
}

fn default_training_seed() -> u64 {
    1
}

fn default_tolerance() -> (usize, usize) {
    (1, 1)
}

impl Scenario {
    /// Alice 10 m from Bob, one moving target, Eve across from it, overcrowding with forced sync at 10 dB.
    pub fn reference() -> Self {
        let mut jammer = StrategyConfig::new(10.0);
        jammer.artificial = vec![Placement { range_m: 10.0, speed_mps: 5.0, gain_db: -10.0, phase_rad: 0.0 }];
        Self {
            ofdm: OfdmConfig::default(),
            topology: TopologyDoc {
                alice: [10.0, 0.0],
                bob: [0.0, 0.0],
                eve: [-5.0, 10.0],
                targets: vec![Target { pos: [5.0, 10.0], vel: [-3.0, -3.0], rcs: 0.1 }],
                eve_power_gain_db: 0.0,
            },
            snr_db: default_snr(),
            alice_cfo_hz: 0.0,
            training_seed: default_training_seed(),
            sync: SyncConfig::default(),
            cfar: CfarConfig::default(),
            window: Window::Blackman,
            backoff: None,
            tolerance: default_tolerance(),
            jammer: Some(jammer),
            cfo_regions: CfoRegions::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let bad = |e: serde_json::Error| HarnessError::Config(format!("{}: {e}", path.display()));
        let value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
        // A bare topology document runs with the reference settings.
        let s = if value.get("topology").is_none() && value.get("alice").is_some() {
            Self { topology: serde_json::from_value(value).map_err(bad)?, ..Self::reference() }
        } else {
            serde_json::from_value(value).map_err(bad)?
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |s: String| Err(HarnessError::Config(s));
        self.ofdm.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        ScenarioTopology::from_doc(&self.topology)?;
        self.cfar.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if !self.snr_db.is_finite() || !self.alice_cfo_hz.is_finite() {
            return bad("snr_db and alice_cfo_hz must be finite".into());
        }
        if self.backoff() > self.ofdm.q_cp {
            return bad(format!("backoff {} exceeds the {}-sample prefix", self.backoff(), self.ofdm.q_cp));
        }
        if let Some(j) = &self.jammer {
            j.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            for p in &j.artificial {
                let a = p.target(&self.ofdm);
                if !(a.delay > 0.0 && a.delay < self.ofdm.q as f64 * self.ofdm.t()) {
                    return bad(format!("artificial target at {} m is outside the unaliased range", p.range_m));
                }
            }
        }
        for (name, (lo, hi)) in [("low", self.cfo_regions.low), ("med", self.cfo_regions.med), ("high", self.cfo_regions.high)] {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return bad(format!("cfo region {name} = ({lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn backoff(&self) -> usize {
        self.backoff.unwrap_or(self.ofdm.q_cp / 2)
    }

    pub fn topology(&self) -> Result<ScenarioTopology, HarnessError> {
        Ok(ScenarioTopology::from_doc(&self.topology)?)
    }

    pub fn strategy(&self) -> Result<&StrategyConfig, HarnessError> {
        self.jammer.as_ref().ok_or_else(|| HarnessError::Config("scenario has no \"jammer\" section".into()))
    }

    pub fn strategy_mut(&mut self) -> Result<&mut StrategyConfig, HarnessError> {
        self.jammer.as_mut().ok_or_else(|| HarnessError::Config("scenario has no \"jammer\" section".into()))
    }

    /// Splits a CFO difference of `delta_hz` symmetrically between Alice and Eve.
    pub fn set_cfo_difference(&mut self, delta_hz: f64, sign: f64) -> Result<(), HarnessError> {
        self.alice_cfo_hz = -sign * delta_hz / 2.0;
        self.strategy_mut()?.eve_cfo_hz = sign * delta_hz / 2.0;
        Ok(())
    }

    pub fn is_preceding(&self) -> bool {
        self.jammer.as_ref().is_some_and(|j| j.invalidate_mode == InvalidateMode::PrecedingB1)
    }
}
