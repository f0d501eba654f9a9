//! Labeled interval samples: random scenario, GT attachment at a random
//! instant, then the held-versus-reference scan for one target UE.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::window::{evaluate_window, scan_label, MovingUe, ScanRule, WindowSpec, WindowTrace};
use crate::channel::{ChannelModel, LinkTable};
use crate::error::{Error, Result};
use crate::loadbalance::{gt_best_response_solve, sss_assignment, BrContext, LbConfig};
use crate::mobility::{heading_angle_to_ap, MobilityConfig, MotionState};
use crate::neural::{ColumnBounds, Dataset};
use crate::par::{try_map_range, Exec};
use crate::rng::{rng_for, SimRng};
use crate::scenario::{Population, PopulationConfig};
use crate::topology::{ApType, NetworkTopology};

const TAG_COLLECT: u64 = 0x636f_6c6c;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollectionConfig {
    /// Allowed throughput shortfall against the reference, as a fraction.
    pub degradation_budget: f64,
    pub ideal_dt_s: f64,
    pub tick_s: f64,
    /// Scenario length; the decision instant falls early enough to leave a
    /// full `max_interval_s` window.
    pub sample_duration_s: f64,
    pub samples_per_type: usize,
    pub min_interval_s: f64,
    pub max_interval_s: f64,
    pub scan: ScanRule,
    pub mean_speed_mps: f64,
    /// Scenario redraws allowed when no UE is hosted by the requested type.
    pub max_attempts: usize,
}

impl Default for CollectionConfig {
    fn default() -> Self {
        Self {
            degradation_budget: 0.05,
            ideal_dt_s: 0.01,
            tick_s: 0.001,
            sample_duration_s: 10.0,
            samples_per_type: 2000,
            min_interval_s: 0.01,
            max_interval_s: 2.0,
            scan: ScanRule::FirstViolation,
            mean_speed_mps: 5.0,
            max_attempts: 64,
        }
    }
}

fn is_multiple(x: f64, of: f64) -> bool {
    let r = x / of;
    (r - r.round()).abs() < 1e-6 && r.round() >= 1.0
}

impl CollectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.05).contains(&self.degradation_budget) {
            return Err(Error::Config(format!(
                "degradation_budget must be in [0, 0.05], got {}",
                self.degradation_budget
            )));
        }
        self.window_spec().validate()?;
        if !is_multiple(self.min_interval_s, self.ideal_dt_s) || !is_multiple(self.max_interval_s, self.ideal_dt_s) {
            return Err(Error::Config("interval bounds must be multiples of ideal_dt_s".into()));
        }
        if self.min_interval_s > self.max_interval_s {
            return Err(Error::Config("min_interval_s exceeds max_interval_s".into()));
        }
        if self.sample_duration_s < self.max_interval_s {
            return Err(Error::Config("sample_duration_s is shorter than max_interval_s".into()));
        }
        if self.samples_per_type == 0 || self.max_attempts == 0 {
            return Err(Error::Config("samples_per_type and max_attempts must be >= 1".into()));
        }
        if !(self.mean_speed_mps > 0.0) {
            return Err(Error::Config("mean_speed_mps must be positive".into()));
        }
        Ok(())
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec { tick_s: self.tick_s, ideal_dt_s: self.ideal_dt_s, horizon_s: self.max_interval_s }
    }

    /// Candidate labels, smallest first.
    pub fn candidate_grid(&self) -> Vec<f64> {
        let first = (self.min_interval_s / self.ideal_dt_s).round() as usize;
        let last = (self.max_interval_s / self.ideal_dt_s).round() as usize;
        (first..=last).map(|g| g as f64 * self.ideal_dt_s).collect()
    }
}

/// Interval-model input of one UE towards its host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsnnInput {
    pub snr_db: f64,
    /// Angle between travel direction and the direction to the host, in [0, pi].
    pub theta_rad: f64,
    pub speed_mps: f64,
}

impl MsnnInput {
    pub const WIDTH: usize = 3;
    pub const SNR: usize = 0;
    pub const THETA: usize = 1;
    pub const SPEED: usize = 2;

    pub fn observe(topology: &NetworkTopology, table: &LinkTable, ue: usize, host: usize, state: &MotionState) -> Self {
        Self {
            snr_db: table.snr_db(host, ue),
            theta_rad: heading_angle_to_ap(state, &topology.aps[host].position),
            speed_mps: state.speed,
        }
    }

    pub fn to_row(self) -> [f64; 3] {
        [self.snr_db, self.theta_rad, self.speed_mps]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsnnSample {
    pub ap_type: ApType,
    pub input: MsnnInput,
    pub interval_s: f64,
}

/// A sample together with what is needed to re-check its label.
#[derive(Debug, Clone)]
pub struct CollectedSample {
    pub sample: MsnnSample,
    pub trace: WindowTrace,
    pub n_ues: usize,
    pub t0_s: f64,
    pub host: usize,
}

/// Shared, read-only inputs of sample collection.
#[derive(Debug, Clone, Copy)]
pub struct SampleEnv<'a> {
    pub topology: &'a NetworkTopology,
    pub model: &'a ChannelModel,
    pub population: &'a PopulationConfig,
    pub mobility: &'a MobilityConfig,
    pub lb: &'a LbConfig,
}

/// Sample `index` for `ap_type`. Each (seed, type, index) owns its random
/// streams, so samples can be produced in any order or in parallel.
pub fn collect_sample(
    env: &SampleEnv<'_>,
    config: &CollectionConfig,
    seed: u64,
    ap_type: ApType,
    index: usize,
) -> Result<CollectedSample> {
    let mobility = env.mobility.with_mean_speed(config.mean_speed_mps);
    let room = &env.topology.room;
    let height = mobility.ue_height_m;
    let types: Vec<ApType> = env.topology.aps.iter().map(|ap| ap.ap_type).collect();
    let shadow_sigma = env.model.params.wifi.shadowing_sigma_db;
    let burn_in_steps = ((config.sample_duration_s - config.max_interval_s) / config.ideal_dt_s).round() as usize;

    for attempt in 0..config.max_attempts {
        let key = [TAG_COLLECT, u64::from(ap_type.0), index as u64, attempt as u64];
        let mut rng = rng_for(seed, &key);
        let n = env.population.draw_count(&mut rng);
        let mut pop = Population::spawn(n, env.population, &mobility, room, shadow_sigma, &mut rng);
        let steps = rng.gen_range(0..=burn_in_steps);
        let mut ue_rngs: Vec<SimRng> =
            (0..n).map(|k| rng_for(seed, &[key[0], key[1], key[2], key[3], 1 + k as u64])).collect();
        for _ in 0..steps {
            for (m, r) in pop.motion.iter_mut().zip(ue_rngs.iter_mut()) {
                m.advance(config.ideal_dt_s, &mobility, room, r);
            }
        }
        let table = pop.link_table(env.model, height);
        let (assignment, _, _) = gt_best_response_solve(&table, &pop.rates, &sss_assignment(&table), env.lb)?;
        let hosts = assignment.hosts();
        let candidates: Vec<usize> = (0..n).filter(|&k| types[hosts[k]] == ap_type).collect();
        if candidates.is_empty() {
            continue;
        }
        let target = candidates[rng.gen_range(0..candidates.len())];
        let context = BrContext::new(&table, &pop.rates, hosts, target, env.lb);
        let caps: Vec<f64> = table.row(target).iter().map(|s| s.capacity_bps).collect();
        let host = context.decide(&caps, hosts[target]);
        if types[host] != ap_type {
            continue;
        }
        let input = MsnnInput::observe(env.topology, &table, target, host, &pop.motion[target]);
        let mut ue = MovingUe::new(
            env.model,
            &mobility,
            room,
            pop.shadows_db[target],
            pop.motion[target],
            ue_rngs.swap_remove(target),
        );
        let trace = evaluate_window(&mut ue, &context, env.model.n_aps(), host, config.window_spec())?;
        let interval_s =
            scan_label(&trace, config.degradation_budget, config.min_interval_s, config.max_interval_s, config.scan);
        return Ok(CollectedSample {
            sample: MsnnSample { ap_type, input, interval_s },
            trace,
            n_ues: n,
            t0_s: steps as f64 * config.ideal_dt_s,
            host,
        });
    }
    Err(Error::Domain(format!("no UE attached to a type {ap_type} AP after {} scenario draws", config.max_attempts)))
}

/// Samples `range` of one AP type.
pub fn collect_range(
    env: &SampleEnv<'_>,
    config: &CollectionConfig,
    seed: u64,
    ap_type: ApType,
    range: Range<usize>,
    exec: Exec,
) -> Result<Vec<MsnnSample>> {
    config.validate()?;
    let start = range.start;
    try_map_range(exec, range.len(), |i| collect_sample(env, config, seed, ap_type, start + i).map(|c| c.sample))
}

/// The labeled samples of one AP type plus the normalization ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDataset {
    pub ap_type: ApType,
    pub config_hash: String,
    pub v_max_mps: f64,
    pub interval_min_s: f64,
    pub interval_max_s: f64,
    pub samples: Vec<MsnnSample>,
}

const DATASET_MAGIC: &str = "# hlwnet-msnn-dataset 1";
const COLUMNS: &str = "ap_type,snr_db,theta_rad,speed_mps,interval_s";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    ap_type: String,
    snr_db: f64,
    theta_rad: f64,
    speed_mps: f64,
    interval_s: f64,
}

impl TypeDataset {
    pub fn new(ap_type: ApType, config_hash: &str, v_max_mps: f64, config: &CollectionConfig) -> Self {
        Self {
            ap_type,
            config_hash: config_hash.to_string(),
            v_max_mps,
            interval_min_s: config.min_interval_s,
            interval_max_s: config.max_interval_s,
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// SNR over the observed range, angle over [0, pi], speed over [0, v_max].
    pub fn input_bounds(&self) -> Result<ColumnBounds> {
        let snr: Vec<Vec<f64>> = self.samples.iter().map(|s| vec![s.input.snr_db]).collect();
        let snr = ColumnBounds::fit(&snr)?;
        ColumnBounds::new(vec![snr.lo[0], 0.0, 0.0], vec![snr.hi[0], PI, self.v_max_mps])
    }

    pub fn interval_bounds(&self) -> Result<ColumnBounds> {
        ColumnBounds::new(vec![self.interval_min_s], vec![self.interval_max_s])
    }

    pub fn to_dataset(&self) -> Result<Dataset> {
        Dataset::new(
            self.samples.iter().map(|s| s.input.to_row().to_vec()).collect(),
            self.samples.iter().map(|s| vec![s.interval_s]).collect(),
            self.input_bounds()?,
            self.interval_bounds()?,
        )
    }

    pub fn mean_interval(&self) -> f64 {
        self.samples.iter().map(|s| s.interval_s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut out = String::new();
        let w = &mut out;
        let _ = writeln!(w, "{DATASET_MAGIC}");
        let _ = writeln!(w, "# config_hash {}", self.config_hash);
        let _ = writeln!(w, "# ap_type {}", self.ap_type);
        let _ = writeln!(w, "# v_max_mps {:e}", self.v_max_mps);
        let _ = writeln!(w, "# interval_s {:e} {:e}", self.interval_min_s, self.interval_max_s);
        if let Ok(b) = self.input_bounds() {
            for (c, name) in ["snr_db", "theta_rad", "speed_mps"].iter().enumerate() {
                let _ = writeln!(w, "# bounds {name} {:e} {:e}", b.lo[c], b.hi[c]);
            }
        }
        let mut csv = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
        if self.samples.is_empty() {
            csv.write_record(COLUMNS.split(',')).map_err(csv_err)?;
        }
        for s in &self.samples {
            csv.serialize(Row {
                ap_type: s.ap_type.to_string(),
                snr_db: s.input.snr_db,
                theta_rad: s.input.theta_rad,
                speed_mps: s.input.speed_mps,
                interval_s: s.interval_s,
            })
            .map_err(csv_err)?;
        }
        let body = csv.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).map_err(|e| Error::Parse(e.to_string()))?);
        Ok(out)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(DATASET_MAGIC) {
            return Err(Error::Parse("missing dataset header".into()));
        }
        let mut hash = None;
        let mut ap_type = None;
        let mut v_max = None;
        let mut interval = None;
        for line in text.lines().filter_map(|l| l.strip_prefix("# ")) {
            let mut it = line.split_whitespace();
            let key = it.next().unwrap_or_default();
            let rest: Vec<&str> = it.collect();
            let num = |i: usize| -> Result<f64> {
                rest.get(i)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))
            };
            match key {
                "config_hash" => hash = rest.first().map(|s| s.to_string()),
                "ap_type" => ap_type = Some(rest.first().copied().unwrap_or_default().parse::<ApType>()?),
                "v_max_mps" => v_max = Some(num(0)?),
                "interval_s" => interval = Some((num(0)?, num(1)?)),
                _ => {}
            }
        }
        let missing = |what: &str| Error::Parse(format!("dataset header lacks {what}"));
        let ap_type = ap_type.ok_or_else(|| missing("ap_type"))?;
        let (interval_min_s, interval_max_s) = interval.ok_or_else(|| missing("interval_s"))?;
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let mut samples = Vec::new();
        for row in reader.deserialize::<Row>() {
            let row = row.map_err(csv_err)?;
            let t: ApType = row.ap_type.parse()?;
            if t != ap_type {
                return Err(Error::Parse(format!("row of type {t} in a type {ap_type} dataset")));
            }
            samples.push(MsnnSample {
                ap_type: t,
                input: MsnnInput { snr_db: row.snr_db, theta_rad: row.theta_rad, speed_mps: row.speed_mps },
                interval_s: row.interval_s,
            });
        }
        Ok(Self {
            ap_type,
            config_hash: hash.ok_or_else(|| missing("config_hash"))?,
            v_max_mps: v_max.ok_or_else(|| missing("v_max_mps"))?,
            interval_min_s,
            interval_max_s,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_csv()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_csv(&text)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// `samples_per_type` samples for every AP type of the topology.
pub fn build_dataset(
    env: &SampleEnv<'_>,
    config: &CollectionConfig,
    seed: u64,
    config_hash: &str,
    exec: Exec,
) -> Result<Vec<TypeDataset>> {
    let v_max = env.mobility.with_mean_speed(config.mean_speed_mps).v_max();
    (0..env.topology.num_types())
        .map(|t| {
            let ap_type = ApType::from_index(t);
            let mut ds = TypeDataset::new(ap_type, config_hash, v_max, config);
            ds.samples = collect_range(env, config, seed, ap_type, 0..config.samples_per_type, exec)?;
            Ok(ds)
        })
        .collect()
}
