use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, ChannelParams};
use crate::error::{Error, Result};
use crate::loadbalance::surrogate::SurrogateConfig;
use crate::loadbalance::LbConfig;
use crate::mobility::MobilityConfig;
use crate::msnn::CollectionConfig;
use crate::neural::TrainConfig;
use crate::runtime::{LagConfig, LagMode, SimConfig};
use crate::scenario::PopulationConfig;
use crate::topology::{build_grid_topology, Classification, NetworkTopology, RoomGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub room_length_m: f64,
    pub room_width_m: f64,
    pub room_height_m: f64,
    /// LiFi APs per axis.
    pub grid_n: usize,
    pub lifi_separation_m: f64,
    pub wifi_height_m: f64,
    pub classification: Classification,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            room_length_m: 10.0,
            room_width_m: 10.0,
            room_height_m: 3.0,
            grid_n: 4,
            lifi_separation_m: 2.5,
            wifi_height_m: 0.5,
            classification: Classification::Symmetric,
        }
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Result<NetworkTopology> {
        let room = RoomGeometry::new(self.room_length_m, self.room_width_m, self.room_height_m)?;
        build_grid_topology(room, self.grid_n, self.lifi_separation_m, self.wifi_height_m, self.classification)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub hidden: Vec<usize>,
    pub msnn: TrainConfig,
    pub train_surrogate: bool,
    pub surrogate_samples: usize,
    pub surrogate: SurrogateConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 4],
            msnn: TrainConfig::default(),
            train_surrogate: false,
            surrogate_samples: 500,
            surrogate: SurrogateConfig::default(),
        }
    }
}

/// Schemes the simulate command can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Per-UE decisions at intervals predicted by the interval model.
    MsAtcnn,
    /// Per-UE decisions every 10 ms.
    Ideal10ms,
    /// Per-UE decisions at a fixed interval equal to the MS mean.
    FixedMean,
    /// Per-UE decisions at a speed-linear interval.
    SpeedLinear,
    /// Network-wide GT at the MS mean interval, no lag.
    GtIdeal,
    /// Network-wide GT at the MS mean interval with solver lag.
    GtPractical,
    SssTtt,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Self::MsAtcnn,
        Self::Ideal10ms,
        Self::FixedMean,
        Self::SpeedLinear,
        Self::GtIdeal,
        Self::GtPractical,
        Self::SssTtt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MsAtcnn => "ms_atcnn",
            Self::Ideal10ms => "ideal_10ms",
            Self::FixedMean => "fixed_mean",
            Self::SpeedLinear => "speed_linear",
            Self::GtIdeal => "gt_ideal",
            Self::GtPractical => "gt_practical",
            Self::SssTtt => "sss_ttt",
        }
    }

    /// Whether the scheme needs the MS run's mean interval first.
    pub fn needs_ms_mean(self) -> bool {
        matches!(self, Self::FixedMean | Self::GtIdeal | Self::GtPractical)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Parse(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Exact best response.
    #[default]
    Oracle,
    /// The trained AP-selection network (limited to its UE capacity).
    Surrogate,
}

/// One grid of operating points: every speed crossed with every UE count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub speeds_mps: Vec<f64>,
    pub n_ues: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub schemes: Vec<Scheme>,
    pub replications: usize,
    pub engine: EngineKind,
    pub ttt_s: f64,
    /// UEs per MS run whose decisions are scored against the 10 ms reference.
    pub track_gaps: usize,
    /// Speed-linear interval reference points as (speed m/s, interval s).
    pub speed_linear_points: [(f64, f64); 2],
    pub timing: SimConfig,
    pub sweep: Vec<Sweep>,
    /// UE counts for the runtime table; empty skips it.
    pub runtime_n_ues: Vec<usize>,
    pub runtime_reps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            replications: 20,
            engine: EngineKind::Oracle,
            ttt_s: 0.16,
            track_gaps: 0,
            speed_linear_points: [(1.0, 2.0), (10.0, 0.01)],
            timing: SimConfig::default(),
            sweep: vec![
                Sweep { speeds_mps: vec![1.0, 2.0, 3.0, 4.0, 5.0], n_ues: vec![50] },
                Sweep { speeds_mps: vec![5.0], n_ues: (1..=10).map(|k| 10 * k).collect() },
            ],
            runtime_n_ues: (1..=10).map(|k| 10 * k).collect(),
            runtime_reps: 100,
        }
    }
}

impl SimulationConfig {
    /// Distinct (speed, UE count) points in sweep order.
    pub fn points(&self) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for s in &self.sweep {
            for &v in &s.speeds_mps {
                for &n in &s.n_ues {
                    if !out.iter().any(|&(v2, n2)| v2 == v && n2 == n) {
                        out.push((v, n));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.timing.validate()?;
        if self.replications == 0 {
            return Err(Error::Config("simulation.replications must be >= 1".into()));
        }
        if !(self.ttt_s >= 0.0) {
            return Err(Error::Config("simulation.ttt_s must be >= 0".into()));
        }
        let [(v1, t1), (v2, t2)] = self.speed_linear_points;
        if v1 == v2 || !(t1 > 0.0 && t2 > 0.0) {
            return Err(Error::Config(
                "simulation.speed_linear_points need distinct speeds and positive intervals".into(),
            ));
        }
        for s in &self.sweep {
            if s.speeds_mps.iter().any(|&v| !(v > 0.0)) || s.n_ues.contains(&0) {
                return Err(Error::Config("sweep speeds and UE counts must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Named scale presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 2x2 LiFi grid, 200 samples per type, 20 replications.
    #[default]
    Smoke,
    /// 4x4 LiFi grid and the full sample and replication counts.
    Full,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoke" => Ok(Self::Smoke),
            "full" => Ok(Self::Full),
            _ => Err(Error::Parse(format!("unknown scale preset {s:?} (smoke|full)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub topology: TopologyConfig,
    pub channel: ChannelParams,
    pub mobility: MobilityConfig,
    pub population: PopulationConfig,
    pub lb: LbConfig,
    pub collection: CollectionConfig,
    pub training: TrainingConfig,
    pub simulation: SimulationConfig,
    pub lag: LagConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Full)
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let full = Self {
            seed: 1,
            topology: TopologyConfig::default(),
            channel: ChannelParams::default(),
            mobility: MobilityConfig::default(),
            population: PopulationConfig::default(),
            lb: LbConfig::default(),
            collection: CollectionConfig::default(),
            training: TrainingConfig::default(),
            simulation: SimulationConfig::default(),
            lag: LagConfig::default(),
        };
        match preset {
            Preset::Full => full,
            Preset::Smoke => {
                let mut c = full;
                c.topology.grid_n = 2;
                c.topology.lifi_separation_m = 2.5;
                c.topology.room_length_m = 5.0;
                c.topology.room_width_m = 5.0;
                c.population.n_ues_min = 5;
                c.population.n_ues_max = 20;
                c.collection.samples_per_type = 200;
                c.simulation.replications = 20;
                c.simulation.timing.horizon_s = 2.0;
                c.simulation.sweep = vec![
                    Sweep { speeds_mps: vec![1.0, 3.0, 5.0], n_ues: vec![10] },
                    Sweep { speeds_mps: vec![5.0], n_ues: vec![5, 20] },
                ];
                c.simulation.runtime_n_ues = vec![5, 10, 20];
                c.simulation.runtime_reps = 20;
                c
            }
        }
    }

    /// Parses TOML on top of a preset: keys present in `text` override the
    /// preset, everything else keeps the preset value.
    pub fn from_toml(text: &str, base: Preset) -> Result<Self> {
        let overrides: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut merged = toml::Table::try_from(Self::preset(base)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, overrides);
        let cfg: Self = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, base: Preset) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.build()?;
        self.channel.validate()?;
        self.mobility.validate()?;
        self.population.validate()?;
        self.collection.validate()?;
        self.training.msnn.validate()?;
        if self.training.hidden.contains(&0) {
            return Err(Error::Config("training.hidden widths must be positive".into()));
        }
        self.simulation.validate()?;
        self.lag.validate()?;
        Ok(())
    }

    pub fn with_lag_mode(mut self, mode: LagMode) -> Self {
        self.lag.mode = mode;
        self
    }

    /// Hash of everything that shapes the datasets and hence the trained
    /// models. Simulation and lag settings are left out so a bank can be
    /// reused across simulation runs, and so is the sample count: sample `i`
    /// does not depend on it, which lets a collection be extended.
    pub fn dataset_hash(&self) -> Result<String> {
        let collection = CollectionConfig { samples_per_type: 0, ..self.collection.clone() };
        #[derive(Serialize)]
        struct Part<'a> {
            seed: u64,
            topology: &'a TopologyConfig,
            channel: &'a ChannelParams,
            mobility: &'a MobilityConfig,
            population: &'a PopulationConfig,
            lb: &'a LbConfig,
            collection: &'a CollectionConfig,
        }
        let part = Part {
            seed: self.seed,
            topology: &self.topology,
            channel: &self.channel,
            mobility: &self.mobility,
            population: &self.population,
            lb: &self.lb,
            collection: &collection,
        };
        hash_toml(&part)
    }

    /// Hash of the whole configuration.
    pub fn config_hash(&self) -> Result<String> {
        hash_toml(self)
    }

    pub fn environment(&self) -> Result<Environment> {
        let topology = self.topology.build()?;
        let model = ChannelModel::new(&topology, self.channel.clone())?;
        Ok(Environment { topology, model })
    }
}

/// Topology and channel model built from a config.
pub struct Environment {
    pub topology: NetworkTopology,
    pub model: ChannelModel,
}

fn hash_toml<T: Serialize>(value: &T) -> Result<String> {
    let text = toml::to_string(value).map_err(|e| Error::Config(e.to_string()))?;
    Ok(hex::encode(&Sha256::digest(text.as_bytes())[..8]))
}

fn merge(base: &mut toml::Table, overrides: toml::Table) {
    for (k, v) in overrides {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for p in [Preset::Smoke, Preset::Full] {
            let c = ExperimentConfig::preset(p);
            c.validate().unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap(), p).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn overrides_keep_the_rest_of_the_preset() {
        let c = ExperimentConfig::from_toml("seed = 9\n[channel.lifi]\nbandwidth_hz = 4e7\n", Preset::Smoke).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.channel.lifi.bandwidth_hz, 4e7);
        assert_eq!(c.topology.grid_n, 2);
        assert_eq!(c.channel.lifi.responsivity_a_per_w, ChannelParams::default().lifi.responsivity_a_per_w);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let e = ExperimentConfig::from_toml("[mobility]\nmean_speed = 3\n", Preset::Smoke).unwrap_err();
        assert!(e.is_config(), "{e}");
        let e = ExperimentConfig::from_toml("[collection]\nsamples_per_type = -1\n", Preset::Smoke).unwrap_err();
        assert!(e.is_config());
        let e = ExperimentConfig::from_toml("[topology]\ngrid_n = 9\n", Preset::Smoke).unwrap_err();
        assert!(e.is_config());
    }

    #[test]
    fn dataset_hash_ignores_simulation_settings() {
        let a = ExperimentConfig::preset(Preset::Smoke);
        let mut b = a.clone();
        b.simulation.replications = 3;
        b.lag.mode = LagMode::Fixed;
        assert_eq!(a.dataset_hash().unwrap(), b.dataset_hash().unwrap());
        assert_ne!(a.config_hash().unwrap(), b.config_hash().unwrap());
        b.collection.samples_per_type += 1;
        assert_eq!(a.dataset_hash().unwrap(), b.dataset_hash().unwrap());
        b.collection.degradation_budget = 0.04;
        assert_ne!(a.dataset_hash().unwrap(), b.dataset_hash().unwrap());
    }

    #[test]
    fn sweep_points_are_deduplicated() {
        let s = SimulationConfig::default();
        let p = s.points();
        assert_eq!(p.len(), 5 + 9);
        assert_eq!(p.iter().filter(|&&(v, n)| v == 5.0 && n == 50).count(), 1);
    }
}
