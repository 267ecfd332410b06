use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{InitRule, StepSchedule};
use crate::error::{Error, Result};
use crate::games::Regularization;
use crate::geometry::RegularizerKind;
use crate::topology::GraphKind;

/// Full description of an experiment. Every table and key has a default;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameConfig,
    pub topology: TopologyConfig,
    pub run: RunConfig,
    pub output: OutputConfig,
    pub bounds: BoundsConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    /// Actions of network 1 (and of network 2 unless `actions2` is set).
    pub actions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actions2: Option<usize>,
    pub n1: usize,
    pub n2: usize,
    pub noise_half_width: f64,
    pub regularization: Regularization,
    pub seed: u64,
    /// Explicit expected cost matrices of the `n1` network-1 agents, as
    /// rows. When given they replace the seeded draw, and the action counts
    /// are read from their shape.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<f64>>>>,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            actions: 20,
            actions2: None,
            n1: 12,
            n2: 12,
            noise_half_width: 0.5,
            regularization: Regularization::None,
            seed: 1,
            matrices: None,
        }
    }
}

impl GameConfig {
    pub fn actions1(&self) -> usize {
        match &self.matrices {
            Some(m) => m.first().map_or(0, Vec::len),
            None => self.actions,
        }
    }

    pub fn actions2(&self) -> usize {
        match &self.matrices {
            Some(m) => m.first().and_then(|a| a.first()).map_or(0, Vec::len),
            None => self.actions2.unwrap_or(self.actions),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BipartiteKind {
    /// Every agent reads the plain mean of the other network.
    Uniform,
    /// Agent `i` reads agent `i` of the other network (`n1 = n2`).
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub network1: GraphKind,
    pub network2: GraphKind,
    pub edge_probability: f64,
    pub seed: u64,
    /// Number of edge subsets cycled through; 1 keeps the graph fixed.
    pub switching_period1: usize,
    pub switching_period2: usize,
    pub bipartite: BipartiteKind,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            network1: GraphKind::Random,
            network2: GraphKind::Complete,
            edge_probability: crate::topology::DEFAULT_EDGE_PROBABILITY,
            seed: 7,
            switching_period1: 1,
            switching_period2: 1,
            bipartite: BipartiteKind::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Power,
    StronglyConvex,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub schedule: ScheduleKind,
    pub exponent: f64,
    pub modulus: f64,
    pub step: f64,
    pub paths: usize,
    /// Path `p` runs with seed `seed + p`.
    pub seed: u64,
    pub init: InitRule,
    pub regularizer: RegularizerKind,
    pub track_all_agents: bool,
    pub interior_floor: f64,
    pub ne_tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 500,
            schedule: ScheduleKind::Power,
            exponent: 0.5,
            modulus: 1.0,
            step: 0.1,
            paths: 50,
            seed: 1000,
            init: InitRule::Uniform,
            regularizer: RegularizerKind::Entropic,
            track_all_agents: false,
            interior_floor: crate::metrics::DEFAULT_INTERIOR_FLOOR,
            ne_tolerance: 1e-10,
        }
    }
}

impl RunConfig {
    pub fn step_schedule(&self) -> StepSchedule {
        match self.schedule {
            ScheduleKind::Power => StepSchedule::Power { exponent: self.exponent },
            ScheduleKind::StronglyConvex => StepSchedule::StronglyConvex { modulus: self.modulus },
            ScheduleKind::Constant => StepSchedule::Constant { step: self.step },
        }
    }

    pub fn path_seeds(&self) -> Vec<u64> {
        (0..self.paths as u64).map(|p| self.seed.wrapping_add(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Series are recorded at `t = 1`, every multiple of `thin`, and `T`.
    pub thin: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("results"), formats: vec![OutputFormat::Csv, OutputFormat::Json], thin: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Multiplies the Lipschitz constant fed to every envelope.
    pub lipschitz_scale: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { lipschitz_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub exponents: Vec<f64>,
    pub topologies: Vec<GraphKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            exponents: vec![0.5, 2.0 / 3.0, 0.75],
            topologies: vec![GraphKind::Cycle, GraphKind::Random, GraphKind::Complete],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Checks every field and reports all offending ones at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let g = &self.game;
        if g.actions1() == 0 || g.actions2() == 0 {
            errs.push("game.actions: must be at least 1".to_string());
        }
        if let Some(m) = &g.matrices {
            if m.len() != g.n1 {
                errs.push(format!("game.matrices: {} matrices given for n1 = {}", m.len(), g.n1));
            }
            let (k1, k2) = (g.actions1(), g.actions2());
            if m.iter().any(|a| a.len() != k1 || a.iter().any(|row| row.len() != k2)) {
                errs.push("game.matrices: all matrices must share one rectangular shape".to_string());
            }
            if m.iter().flatten().flatten().any(|v| !v.is_finite()) {
                errs.push("game.matrices: entries must be finite".to_string());
            }
        }
        if g.n1 == 0 {
            errs.push("game.n1: must be at least 1".to_string());
        }
        if g.n2 == 0 {
            errs.push("game.n2: must be at least 1".to_string());
        }
        if !(g.noise_half_width >= 0.0 && g.noise_half_width.is_finite()) {
            errs.push(format!("game.noise_half_width: {} must be finite and >= 0", g.noise_half_width));
        }
        let t = &self.topology;
        if !(t.edge_probability > 0.0 && t.edge_probability <= 1.0) {
            errs.push(format!("topology.edge_probability: {} outside (0, 1]", t.edge_probability));
        }
        for (name, kind, n) in [("network1", t.network1, g.n1), ("network2", t.network2, g.n2)] {
            if kind == GraphKind::Cycle && n < 2 {
                errs.push(format!("topology.{name}: a cycle needs at least two agents"));
            }
        }
        if t.switching_period1 == 0 {
            errs.push("topology.switching_period1: must be at least 1".to_string());
        }
        if t.switching_period2 == 0 {
            errs.push("topology.switching_period2: must be at least 1".to_string());
        }
        if t.bipartite == BipartiteKind::Identity && g.n1 != g.n2 {
            errs.push("topology.bipartite: identity weights need n1 = n2".to_string());
        }
        let r = &self.run;
        if r.horizon == 0 {
            errs.push("run.horizon: must be at least 1".to_string());
        }
        if r.paths == 0 {
            errs.push("run.paths: must be at least 1".to_string());
        }
        if let Err(e) = r.step_schedule().validate() {
            errs.push(format!("run.schedule: {e}"));
        }
        let k_max = g.actions1().max(g.actions2()).max(1) as f64;
        if !(r.interior_floor > 0.0 && r.interior_floor < 1.0 / k_max) {
            errs.push(format!("run.interior_floor: {} outside (0, 1/K)", r.interior_floor));
        }
        if !(r.ne_tolerance > 0.0 && r.ne_tolerance.is_finite()) {
            errs.push(format!("run.ne_tolerance: {} must be positive", r.ne_tolerance));
        }
        if g.regularization == Regularization::Entropic && r.regularizer == RegularizerKind::Euclidean {
            errs.push("run.regularizer: the entropic game needs the entropic regularizer".to_string());
        }
        if self.output.thin == 0 {
            errs.push("output.thin: must be at least 1".to_string());
        }
        if self.output.formats.is_empty() {
            errs.push("output.formats: list at least one format".to_string());
        }
        if !(self.bounds.lipschitz_scale > 0.0 && self.bounds.lipschitz_scale.is_finite()) {
            errs.push(format!("bounds.lipschitz_scale: {} must be positive", self.bounds.lipschitz_scale));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// Short digest of everything that influences the numbers in a report.
    /// Output location, formats and sweep lists are left out.
    pub fn config_hash(&self) -> String {
        let mut view = self.clone();
        view.output.dir = PathBuf::new();
        view.output.formats = Vec::new();
        view.sweep = SweepConfig { exponents: Vec::new(), topologies: Vec::new() };
        let bytes = serde_json::to_vec(&view).unwrap_or_default();
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_experiments() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!((cfg.game.actions, cfg.game.n1, cfg.game.n2), (20, 12, 12));
        assert_eq!((cfg.run.horizon, cfg.run.paths), (500, 50));
        assert_eq!(cfg.run.step_schedule(), StepSchedule::Power { exponent: 0.5 });
        assert_eq!(cfg.topology.network1, GraphKind::Random);
        assert_eq!(cfg.topology.network2, GraphKind::Complete);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.game.actions2 = Some(4);
        cfg.run.schedule = ScheduleKind::StronglyConvex;
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_fail_closed() {
        assert!(matches!(ExperimentConfig::from_toml_str("[game]\nactionz = 3\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml_str("[gmae]\n"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_toml_str("[run]\nhorizon = \"x\"\n"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_lists_every_bad_field() {
        let text = "[game]\nn1 = 0\nnoise_half_width = -1.0\n[run]\nhorizon = 0\npaths = 0\nexponent = 2.0\n";
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config(errs)) => {
                for key in ["game.n1", "game.noise_half_width", "run.horizon", "run.paths", "run.schedule"] {
                    assert!(errs.iter().any(|e| e.starts_with(key)), "{key} missing from {errs:?}");
                }
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let text = "[game]\nregularization = \"entropic\"\n[run]\nregularizer = \"euclidean\"\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
        let text = "[game]\nn1 = 2\nmatrices = [[[1.0, 2.0]], [[1.0]]]\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
        let text = "[game]\nn1 = 1\nmatrices = [[[1.0, 2.0]], [[1.0, 0.0]]]\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn explicit_matrices_set_the_shape() {
        let text = "[game]\nn1 = 2\nn2 = 2\nmatrices = [[[1.0, 2.0, 3.0]], [[0.0, 0.0, 1.0]]]\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!((cfg.game.actions1(), cfg.game.actions2()), (1, 3));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("/elsewhere");
        b.output.formats = vec![OutputFormat::Csv];
        assert_eq!(a.config_hash(), b.config_hash());
        b.run.seed += 1;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }
}
