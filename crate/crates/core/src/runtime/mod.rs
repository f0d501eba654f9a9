//! Tick-driven network simulation of the user-centric scheme (per-UE
//! decisions at self-scheduled instants) and the baselines (network-wide
//! periodic solves, SSS with time-to-trigger).

mod sim;
mod timing;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use sim::{run_ms_atcnn, run_network_centric, run_sss_ttt, MsOptions, SimContext};
pub use timing::{measure_runtime, median, RuntimeRow};

use crate::channel::LinkTable;
use crate::error::{Error, Result};
use crate::loadbalance::surrogate::{surrogate_infer, SurrogateModel, UeFeatures};
use crate::loadbalance::{best_response, gt_best_response_solve, Assignment, LbConfig};
use crate::mobility::{MobilityConfig, MotionState};
use crate::msnn::{MsnnBank, MsnnInput};
use crate::rng::{rng_for, SimRng};
use crate::scenario::{Population, PopulationConfig};
use crate::topology::{ApType, RoomGeometry};

const TAG_SCENARIO: u64 = 0x7363_656e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub tick_s: f64,
    pub horizon_s: f64,
    /// Zero-throughput period after every handover.
    pub handover_outage_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { tick_s: 0.001, horizon_s: 10.0, handover_outage_s: 0.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tick_s > 0.0 && self.horizon_s >= self.tick_s && self.handover_outage_s >= 0.0) {
            return Err(Error::Config(format!("bad simulation timing {self:?}")));
        }
        Ok(())
    }

    pub fn n_ticks(&self) -> usize {
        (self.horizon_s / self.tick_s).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagMode {
    #[default]
    None,
    Fixed,
    Measured,
}

impl std::str::FromStr for LagMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LagMode::None),
            "fixed" => Ok(LagMode::Fixed),
            "measured" => Ok(LagMode::Measured),
            _ => Err(Error::Config(format!("unknown lag mode {s:?} (none, fixed, measured)"))),
        }
    }
}

/// Delay between computing a decision and applying it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lag {
    None,
    Fixed(f64),
    /// The decision's own wall-clock time on this machine.
    Measured,
}

impl Lag {
    pub fn seconds(self, measured: Duration) -> f64 {
        match self {
            Lag::None => 0.0,
            Lag::Fixed(s) => s,
            Lag::Measured => measured.as_secs_f64(),
        }
    }
}

/// Runtime in seconds as a function of the UE count, interpolated as a
/// power law between the listed points and extended from the end segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagTable {
    pub points: Vec<(f64, f64)>,
}

impl LagTable {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("lag table is empty".into()));
        }
        if self.points.iter().any(|&(n, s)| !(n > 0.0 && s > 0.0)) {
            return Err(Error::Config("lag table entries must be positive".into()));
        }
        if self.points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Config("lag table UE counts must increase".into()));
        }
        Ok(())
    }

    pub fn at(&self, n_ues: usize) -> f64 {
        let n = n_ues.max(1) as f64;
        let p = &self.points;
        if p.len() == 1 {
            return p[0].1;
        }
        let i = p.windows(2).position(|w| n <= w[1].0).unwrap_or(p.len() - 2);
        let ((n0, s0), (n1, s1)) = (p[i], p[i + 1]);
        let slope = (s1 / s0).ln() / (n1 / n0).ln();
        s0 * (n / n0).powf(slope)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LagConfig {
    pub mode: LagMode,
    /// Network-wide GT solve time.
    pub gt: LagTable,
    /// Per-UE AP-selection inference time.
    pub decision: LagTable,
    /// Interval-model inference time.
    pub interval_model_s: f64,
}

impl Default for LagConfig {
    fn default() -> Self {
        Self {
            mode: LagMode::None,
            gt: LagTable { points: vec![(10.0, 0.010), (100.0, 0.700)] },
            decision: LagTable { points: vec![(10.0, 120e-6), (100.0, 184e-6)] },
            interval_model_s: 2e-6,
        }
    }
}

impl LagConfig {
    pub fn validate(&self) -> Result<()> {
        self.gt.validate()?;
        self.decision.validate()?;
        if !(self.interval_model_s >= 0.0) {
            return Err(Error::Config("interval_model_s must be >= 0".into()));
        }
        Ok(())
    }

    pub fn gt_lag(&self, n_ues: usize) -> Lag {
        match self.mode {
            LagMode::None => Lag::None,
            LagMode::Fixed => Lag::Fixed(self.gt.at(n_ues)),
            LagMode::Measured => Lag::Measured,
        }
    }

    pub fn user_centric_lag(&self, n_ues: usize) -> Lag {
        match self.mode {
            LagMode::None => Lag::None,
            LagMode::Fixed => Lag::Fixed(self.decision.at(n_ues) + self.interval_model_s),
            LagMode::Measured => Lag::Measured,
        }
    }
}

/// Picks the host of one UE given everyone else's current host.
pub trait DecisionEngine: Sync {
    fn decide(&self, table: &LinkTable, rates: &[f64], hosts: &[usize], ue: usize) -> Result<usize>;
}

/// Exact best response.
#[derive(Debug, Clone, Default)]
pub struct OracleEngine {
    pub lb: LbConfig,
}

impl DecisionEngine for OracleEngine {
    fn decide(&self, table: &LinkTable, rates: &[f64], hosts: &[usize], ue: usize) -> Result<usize> {
        Ok(best_response(table, rates, hosts, ue, &self.lb))
    }
}

/// Learned AP selection.
#[derive(Debug, Clone)]
pub struct SurrogateEngine<'a> {
    pub model: &'a SurrogateModel,
}

impl DecisionEngine for SurrogateEngine<'_> {
    fn decide(&self, table: &LinkTable, rates: &[f64], hosts: &[usize], ue: usize) -> Result<usize> {
        let target = UeFeatures::from_table(table, ue, rates[ue], None);
        let conditions: Vec<UeFeatures> = (0..rates.len())
            .filter(|&k| k != ue)
            .map(|k| UeFeatures::from_table(table, k, rates[k], Some(hosts[k])))
            .collect();
        surrogate_infer(self.model, &target, &conditions)
    }
}

/// Recomputes every UE's host at once.
pub trait NetworkSolver: Sync {
    fn solve(&self, table: &LinkTable, rates: &[f64], current: &[usize]) -> Result<Vec<usize>>;
}

/// Best-response iteration warm-started from the current attachment.
#[derive(Debug, Clone, Default)]
pub struct GtSolver {
    pub lb: LbConfig,
}

impl NetworkSolver for GtSolver {
    fn solve(&self, table: &LinkTable, rates: &[f64], current: &[usize]) -> Result<Vec<usize>> {
        let (a, _, _) = gt_best_response_solve(table, rates, &Assignment::new(current.to_vec()), &self.lb)?;
        Ok(a.hosts().to_vec())
    }
}

/// Time until a UE's next decision.
pub trait IntervalPolicy: Sync {
    fn interval(&self, ap_type: ApType, input: &MsnnInput) -> Result<f64>;
}

impl IntervalPolicy for MsnnBank {
    fn interval(&self, ap_type: ApType, input: &MsnnInput) -> Result<f64> {
        self.predict_interval(ap_type, input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedInterval(pub f64);

impl IntervalPolicy for FixedInterval {
    fn interval(&self, _: ApType, _: &MsnnInput) -> Result<f64> {
        Ok(self.0)
    }
}

/// Interval linear in speed through two (speed, interval) points, clamped to
/// the range spanned by the two intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedLinear {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl IntervalPolicy for SpeedLinear {
    fn interval(&self, _: ApType, input: &MsnnInput) -> Result<f64> {
        let ((v0, t0), (v1, t1)) = (self.a, self.b);
        let t = t0 + (input.speed_mps - v0) * (t1 - t0) / (v1 - v0);
        Ok(t.clamp(t0.min(t1), t0.max(t1)))
    }
}

/// UEs of one simulation run with their private mobility streams.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub population: Population,
    pub rngs: Vec<SimRng>,
}

impl Scenario {
    /// Replication `index` of a scenario family; identical across schemes.
    pub fn spawn(
        n_ues: usize,
        population: &PopulationConfig,
        mobility: &MobilityConfig,
        room: &RoomGeometry,
        shadowing_sigma_db: f64,
        seed: u64,
        index: u64,
    ) -> Self {
        let mut rng = rng_for(seed, &[TAG_SCENARIO, n_ues as u64, index]);
        let population = Population::spawn(n_ues, population, mobility, room, shadowing_sigma_db, &mut rng);
        let rngs = (0..n_ues).map(|k| rng_for(seed, &[TAG_SCENARIO, n_ues as u64, index, 1 + k as u64])).collect();
        Self { population, rngs }
    }

    /// Motionless UEs at fixed spots.
    pub fn stationary(points: &[(f64, f64)], rates: &[f64]) -> Self {
        let motion = points.iter().map(|&(x, y)| MotionState::stationary(x, y)).collect();
        let population = Population { motion, rates: rates.to_vec(), shadows_db: vec![0.0; rates.len()] };
        let rngs = (0..rates.len()).map(|k| rng_for(0, &[k as u64])).collect();
        Self { population, rngs }
    }

    pub fn len(&self) -> usize {
        self.population.len()
    }

    pub fn is_empty(&self) -> bool {
        self.population.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimMetrics {
    /// Time-averaged throughput of every UE.
    pub per_ue_throughput_bps: Vec<f64>,
    pub network_throughput_bps: f64,
    pub hho: usize,
    pub vho: usize,
    /// Instants at which each UE received a decision.
    pub update_times_s: Vec<Vec<f64>>,
    /// Interval scheduled at each of those decisions.
    pub intervals_s: Vec<Vec<f64>>,
    /// Wall-clock time of every engine or solver call. Not deterministic.
    pub solver_runtime_s: Vec<f64>,
    /// Held-versus-reference comparison of every tracked decision.
    pub gap_windows: Vec<GapWindow>,
    /// Largest deviation from 1 of any occupied AP's summed time shares,
    /// over every tick.
    pub max_share_error: f64,
}

/// One tracked decision window: average throughput of the held decision and
/// of the 10 ms reference over the scheduled interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapWindow {
    pub ue: usize,
    pub duration_s: f64,
    pub held_bps: f64,
    pub ideal_bps: f64,
}

impl GapWindow {
    pub fn gap(&self) -> f64 {
        if self.ideal_bps > 0.0 {
            1.0 - self.held_bps / self.ideal_bps
        } else {
            0.0
        }
    }
}

impl SimMetrics {
    pub fn handovers(&self) -> usize {
        self.hho + self.vho
    }

    pub fn total_updates(&self) -> usize {
        self.update_times_s.iter().map(Vec::len).sum()
    }

    /// Mean scheduled interval over all decisions.
    pub fn mean_update_interval_s(&self) -> f64 {
        let n: usize = self.intervals_s.iter().map(Vec::len).sum();
        self.intervals_s.iter().flatten().sum::<f64>() / n as f64
    }

    /// Gap of every tracked decision window.
    pub fn window_gaps(&self) -> Vec<f64> {
        self.gap_windows.iter().map(GapWindow::gap).collect()
    }

    /// Gap of each tracked UE over the whole run: delivered bits of its held
    /// decisions against the reference's bits over the same windows.
    pub fn ue_gaps(&self) -> Vec<f64> {
        let mut sums: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for w in &self.gap_windows {
            let e = sums.entry(w.ue).or_default();
            e.0 += w.held_bps * w.duration_s;
            e.1 += w.ideal_bps * w.duration_s;
        }
        sums.values().map(|&(h, i)| if i > 0.0 { 1.0 - h / i } else { 0.0 }).collect()
    }

    /// Copy with the wall-clock samples removed, for determinism checks.
    pub fn without_timing(&self) -> Self {
        Self { solver_runtime_s: Vec::new(), ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lag_table_hits_endpoints_and_grows() {
        let t = LagConfig::default().gt;
        assert_relative_eq!(t.at(10), 0.010, max_relative = 1e-12);
        assert_relative_eq!(t.at(100), 0.700, max_relative = 1e-12);
        let mut prev = 0.0;
        for n in 10..=100 {
            assert!(t.at(n) > prev);
            prev = t.at(n);
        }
    }

    #[test]
    fn speed_linear_clamps() {
        let p = SpeedLinear { a: (1.0, 2.0), b: (10.0, 0.01) };
        let at = |v: f64| p.interval(ApType(1), &MsnnInput { snr_db: 0.0, theta_rad: 0.0, speed_mps: v }).unwrap();
        assert_eq!(at(0.5), 2.0);
        assert_eq!(at(12.0), 0.01);
        assert_relative_eq!(at(5.5), 1.005, max_relative = 1e-12);
    }

    #[test]
    fn lag_modes_parse() {
        assert_eq!("fixed".parse::<LagMode>().unwrap(), LagMode::Fixed);
        assert!("slow".parse::<LagMode>().is_err());
    }
}
