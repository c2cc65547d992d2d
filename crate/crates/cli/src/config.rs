//! Run configuration: one JSON document per invocation.

use std::path::{Path, PathBuf};

use resonant_core::dynamics::SimulationConfig;
use resonant_core::jc::{DressedLabel, DriveOperatorKind, SystemParams};
use resonant_core::optimizer::OptimizerOptions;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub simulation: SimulationConfig,
    pub seed: Option<u64>,
    /// Result file; stdout when absent.
    pub out: Option<PathBuf>,
    /// Trajectory CSV.
    pub trajectory: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fock: Option<FockBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replay: Option<ReplayBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qudit: Option<QuditBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noon: Option<NoonBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateBlock>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumBlock {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockBlock {
    #[serde(rename = "N")]
    pub n: usize,
    /// Chain strength of the analytic pulse (MHz).
    pub omega0: f64,
    /// Optimization result whose pulse replaces the analytic one.
    pub pulse_file: Option<PathBuf>,
}

impl Default for FockBlock {
    fn default() -> Self {
        Self {
            n: 4,
            omega0: 1.0,
            pulse_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeBlock {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub channel: DriveOperatorKind,
    pub initial_state: DressedLabel,
    pub options: OptimizerOptions,
}

impl Default for OptimizeBlock {
    fn default() -> Self {
        Self {
            n: 4,
            duration: 50.0,
            m: 1,
            channel: DriveOperatorKind::QubitTransverse,
            initial_state: DressedLabel::Ground,
            options: OptimizerOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayBlock {
    /// A pulse, an optimization result, or a bundled table.
    pub pulse_file: Option<PathBuf>,
    /// Table row; picked by duration when absent.
    pub row: Option<usize>,
    /// Target level; defaults to the number of tones.
    #[serde(rename = "N")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuditBlock {
    pub d: usize,
    pub j: usize,
    pub k: usize,
    pub theta: f64,
    pub initial: usize,
    pub omega0: f64,
    /// Replace π-rotation pulses by optimized ones.
    pub optimize: Option<StageOptimization>,
}

impl Default for QuditBlock {
    fn default() -> Self {
        Self {
            d: 5,
            j: 0,
            k: 4,
            theta: std::f64::consts::PI,
            initial: 0,
            omega0: 1.0,
            optimize: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageOptimization {
    #[serde(rename = "T")]
    pub duration: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub options: OptimizerOptions,
}

impl Default for StageOptimization {
    fn default() -> Self {
        Self {
            duration: 300.0,
            m: 1,
            options: OptimizerOptions {
                restarts: 2,
                max_iterations: 600,
                ..OptimizerOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoonBlock {
    #[serde(rename = "N")]
    pub n: usize,
    pub omega0: f64,
    /// Second resonator; same as `system` when absent.
    pub system_b: Option<SystemParams>,
    /// Also propagate the joint two-resonator state.
    pub joint_check: bool,
}

impl Default for NoonBlock {
    fn default() -> Self {
        Self {
            n: 2,
            omega0: 5.0,
            system_b: None,
            joint_check: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateBlock {
    pub plan_file: Option<PathBuf>,
    /// One entry per plan system; `system` is repeated when empty.
    pub systems: Vec<SystemParams>,
}

/// Command blocks that can appear in a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Spectrum,
    Fock,
    Optimize,
    Replay,
    Qudit,
    Noon,
    Simulate,
}

impl Block {
    pub fn key(self) -> &'static str {
        match self {
            Block::Spectrum => "spectrum",
            Block::Fock => "fock",
            Block::Optimize => "optimize",
            Block::Replay => "replay",
            Block::Qudit => "qudit",
            Block::Noon => "noon",
            Block::Simulate => "simulate",
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    fn present(&self) -> Vec<Block> {
        let mut v = Vec::new();
        let mut push = |b, on: bool| {
            if on {
                v.push(b)
            }
        };
        push(Block::Spectrum, self.spectrum.is_some());
        push(Block::Fock, self.fock.is_some());
        push(Block::Optimize, self.optimize.is_some());
        push(Block::Replay, self.replay.is_some());
        push(Block::Qudit, self.qudit.is_some());
        push(Block::Noon, self.noon.is_some());
        push(Block::Simulate, self.simulate.is_some());
        v
    }

    /// Checks that no block other than `active` is set and fills `active`
    /// with defaults when missing.
    pub fn activate(&mut self, active: Block) -> CliResult<()> {
        if let Some(other) = self.present().into_iter().find(|&b| b != active) {
            return Err(CliError::Config(format!(
                "config holds a '{}' block but the command is '{}'",
                other.key(),
                active.key()
            )));
        }
        match active {
            Block::Spectrum => {
                self.spectrum.get_or_insert_with(Default::default);
            }
            Block::Fock => {
                self.fock.get_or_insert_with(Default::default);
            }
            Block::Optimize => {
                self.optimize.get_or_insert_with(Default::default);
            }
            Block::Replay => {
                self.replay.get_or_insert_with(Default::default);
            }
            Block::Qudit => {
                self.qudit.get_or_insert_with(Default::default);
            }
            Block::Noon => {
                self.noon.get_or_insert_with(Default::default);
            }
            Block::Simulate => {
                self.simulate.get_or_insert_with(Default::default);
            }
        }
        self.system.validate()?;
        self.simulation.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.system.g, 180.0);
    }

    #[test]
    fn second_block_rejected() {
        let mut c: RunConfig =
            serde_json::from_str(r#"{"fock": {"N": 2}, "noon": {}}"#).unwrap();
        assert!(c.activate(Block::Fock).is_err());
        let mut c: RunConfig = serde_json::from_str(r#"{"fock": {"N": 2}}"#).unwrap();
        c.activate(Block::Fock).unwrap();
        assert_eq!(c.fock.unwrap().n, 2);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sytem": {}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.activate(Block::Optimize).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }
}
