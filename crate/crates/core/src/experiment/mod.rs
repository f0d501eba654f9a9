//! Experiment orchestration: TOML configs, on-disk artifacts and the
//! collect, train, simulate, ablate and report stages. Every artifact
//! carries the hash of the config that produced it.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    EngineKind, Environment, ExperimentConfig, Preset, Scheme, SimulationConfig, Sweep, TopologyConfig, TrainingConfig,
};
pub use report::{report, summarize, ReportTables, SummaryRow};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::loadbalance::surrogate::{oracle_samples, surrogate_train, SurrogateModel};
use crate::msnn::{ablation_variants, collect_range, train_bank, AblationResult, MsnnBank, SampleEnv, TypeDataset};
use crate::neural::LossCurve;
use crate::par::{try_map_range, Exec};
use crate::runtime::{
    measure_runtime, run_ms_atcnn, run_network_centric, run_sss_ttt, DecisionEngine, FixedInterval, GtSolver,
    MsOptions, OracleEngine, RuntimeRow, Scenario, SimContext, SimMetrics, SpeedLinear, SurrogateEngine,
};
use crate::topology::ApType;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const BANK_FILE: &str = "msnn_bank.txt";
pub const SURROGATE_FILE: &str = "surrogate.txt";
pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNTIME_FILE: &str = "runtime.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const ABLATION_CURVES_FILE: &str = "ablation_curves.csv";

/// Samples collected between checkpoints of a dataset file.
const CHUNK: usize = 100;

pub fn dataset_file(ap_type: ApType) -> String {
    format!("dataset_type_{ap_type}.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub ap_type: String,
    pub file: String,
    pub samples: usize,
    pub mean_interval_s: f64,
}

/// Index of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_hash: String,
    pub seed: u64,
    pub datasets: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))?;
        write_atomic(&dir.join(MANIFEST_FILE), text.as_bytes())
    }

    /// Loads every listed dataset and checks that each carries the manifest hash.
    pub fn load_datasets(&self, dir: &Path) -> Result<Vec<TypeDataset>> {
        self.datasets
            .iter()
            .map(|e| {
                let ds = TypeDataset::load(&dir.join(&e.file))?;
                check_hash(&format!("dataset {}", e.file), &self.config_hash, &ds.config_hash)?;
                Ok(ds)
            })
            .collect()
    }
}

fn check_hash(what: &str, expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::HashMismatch { what: what.into(), expected: expected.into(), found: found.into() });
    }
    Ok(())
}

/// Collects `samples_per_type` labelled samples for every AP type into
/// `out`. Files are checkpointed every few samples; an interrupted or
/// shorter collection with the same hash is extended rather than redone.
pub fn collect(cfg: &ExperimentConfig, out: &Path, exec: Exec) -> Result<DatasetManifest> {
    let env = cfg.environment()?;
    let hash = cfg.dataset_hash()?;
    let senv = SampleEnv {
        topology: &env.topology,
        model: &env.model,
        population: &cfg.population,
        mobility: &cfg.mobility,
        lb: &cfg.lb,
    };
    let v_max = cfg.mobility.with_mean_speed(cfg.collection.mean_speed_mps).v_max();
    let target = cfg.collection.samples_per_type;
    let mut manifest = DatasetManifest { config_hash: hash.clone(), seed: cfg.seed, datasets: Vec::new() };
    for t in 0..env.topology.num_types() {
        let ap_type = ApType::from_index(t);
        let file = dataset_file(ap_type);
        let path = out.join(&file);
        let mut ds = if path.exists() {
            let ds = TypeDataset::load(&path)?;
            check_hash(&format!("existing {file}"), &hash, &ds.config_hash)?;
            ds
        } else {
            TypeDataset::new(ap_type, &hash, v_max, &cfg.collection)
        };
        if ds.samples.len() > target {
            ds.samples.truncate(target);
            ds.save(&path)?;
        }
        while ds.samples.len() < target {
            let start = ds.samples.len();
            let end = (start + CHUNK).min(target);
            ds.samples.extend(collect_range(&senv, &cfg.collection, cfg.seed, ap_type, start..end, exec)?);
            ds.save(&path)?;
        }
        if !path.exists() {
            ds.save(&path)?;
        }
        manifest.datasets.push(ManifestEntry {
            ap_type: ap_type.to_string(),
            file,
            samples: ds.samples.len(),
            mean_interval_s: if ds.samples.is_empty() { 0.0 } else { ds.mean_interval() },
        });
    }
    manifest.save(out)?;
    Ok(manifest)
}

fn write_curve_csv(path: &Path, curve: &LossCurve) -> Result<()> {
    let mut s = String::from("epoch,train_loss,validation_loss\n");
    for (e, (t, v)) in curve.train.iter().zip(&curve.validation).enumerate() {
        s.push_str(&format!("{e},{t},{v}\n"));
    }
    write_atomic(path, s.as_bytes())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bank: MsnnBank,
    pub curves: BTreeMap<ApType, LossCurve>,
    pub surrogate_accuracy: Option<f64>,
}

/// Trains the interval-model bank (and optionally the AP-selection
/// surrogate) from a dataset directory. Refuses datasets whose hash differs
/// from the config's.
pub fn train(cfg: &ExperimentConfig, dataset_dir: &Path, out: &Path, exec: Exec) -> Result<TrainOutcome> {
    let manifest = DatasetManifest::load(dataset_dir)?;
    check_hash("dataset manifest", &cfg.dataset_hash()?, &manifest.config_hash)?;
    let datasets = manifest.load_datasets(dataset_dir)?;
    let (bank, curves) = train_bank(&datasets, &cfg.training.hidden, &cfg.training.msnn, cfg.seed, exec)?;
    bank.save(&out.join(BANK_FILE))?;
    for (t, c) in &curves {
        write_curve_csv(&out.join(format!("loss_type_{t}.csv")), c)?;
    }
    let mut surrogate_accuracy = None;
    if cfg.training.train_surrogate {
        let env = cfg.environment()?;
        let tc = &cfg.training.surrogate;
        let samples = oracle_samples(
            &env.topology,
            &env.model,
            &cfg.population,
            &cfg.lb,
            tc.capacity,
            cfg.mobility.ue_height_m,
            cfg.training.surrogate_samples,
            cfg.seed,
        )?;
        let kinds = env.topology.aps.iter().map(|ap| ap.kind).collect();
        let (model, rep) = surrogate_train(&samples, kinds, cfg.channel.snr_floor_db, tc)?;
        model.save(&out.join(SURROGATE_FILE))?;
        let curve = LossCurve { train: rep.train_loss.clone(), validation: rep.validation_loss.clone(), best_epoch: 0 };
        write_curve_csv(&out.join("loss_surrogate.csv"), &curve)?;
        surrogate_accuracy = Some(rep.validation_accuracy);
    }
    Ok(TrainOutcome { bank, curves, surrogate_accuracy })
}

/// One simulated (scheme, scenario) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: Scheme,
    pub n_ues: usize,
    pub mean_speed_mps: f64,
    pub seed: u64,
    pub replication: u64,
    pub config_hash: String,
    pub network_throughput_bps: f64,
    pub mean_update_interval_s: f64,
    pub updates: usize,
    pub hho: usize,
    pub vho: usize,
    /// Mean per-UE gap against the 10 ms reference, when tracked.
    pub mean_gap: Option<f64>,
}

pub fn write_rows(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|row| row.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))).collect()
}

fn row(cfg_hash: &str, scheme: Scheme, n: usize, v: f64, seed: u64, rep: u64, m: &SimMetrics) -> ReportRow {
    let gaps = m.ue_gaps();
    ReportRow {
        scheme,
        n_ues: n,
        mean_speed_mps: v,
        seed,
        replication: rep,
        config_hash: cfg_hash.to_string(),
        network_throughput_bps: m.network_throughput_bps,
        mean_update_interval_s: m.mean_update_interval_s(),
        updates: m.total_updates(),
        hho: m.hho,
        vho: m.vho,
        mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
    }
}

/// Runs every configured scheme on one scenario. Schemes that borrow the
/// MS run's mean interval trigger an MS run even if it is not listed.
#[allow(clippy::too_many_arguments)]
pub fn simulate_point(
    cfg: &ExperimentConfig,
    env: &Environment,
    bank: &MsnnBank,
    engine: &dyn DecisionEngine,
    mean_speed_mps: f64,
    n_ues: usize,
    replication: u64,
    config_hash: &str,
) -> Result<Vec<ReportRow>> {
    let sim = &cfg.simulation;
    let mobility = cfg.mobility.with_mean_speed(mean_speed_mps);
    let cx =
        SimContext { topology: &env.topology, model: &env.model, mobility: &mobility, lb: &cfg.lb, sim: &sim.timing };
    let scenario = Scenario::spawn(
        n_ues,
        &cfg.population,
        &mobility,
        &env.topology.room,
        cfg.channel.wifi.shadowing_sigma_db,
        cfg.seed,
        replication,
    );
    let make_row = |scheme, m: &SimMetrics| row(config_hash, scheme, n_ues, mean_speed_mps, cfg.seed, replication, m);
    let uc_lag = cfg.lag.user_centric_lag(n_ues);
    let mut ms: Option<SimMetrics> = None;
    let mut ms_metrics = || -> Result<SimMetrics> {
        if ms.is_none() {
            let opts = MsOptions { lag: uc_lag, track_gaps: sim.track_gaps.min(n_ues), ..MsOptions::default() };
            ms = Some(run_ms_atcnn(cx, &scenario, engine, bank, opts)?);
        }
        Ok(ms.clone().expect("just set"))
    };
    let mut rows = Vec::new();
    let solver = GtSolver { lb: cfg.lb.clone() };
    for &scheme in &sim.schemes {
        let plain = MsOptions { lag: uc_lag, ..MsOptions::default() };
        let m = match scheme {
            Scheme::MsAtcnn => ms_metrics()?,
            Scheme::Ideal10ms => run_ms_atcnn(cx, &scenario, engine, &FixedInterval(0.01), plain)?,
            Scheme::FixedMean => {
                let t = ms_metrics()?.mean_update_interval_s();
                run_ms_atcnn(cx, &scenario, engine, &FixedInterval(t), plain)?
            }
            Scheme::SpeedLinear => {
                let [a, b] = sim.speed_linear_points;
                run_ms_atcnn(cx, &scenario, engine, &SpeedLinear { a, b }, plain)?
            }
            Scheme::GtIdeal => {
                let t = ms_metrics()?.mean_update_interval_s();
                run_network_centric(cx, &scenario, &solver, t, crate::runtime::Lag::None)?
            }
            Scheme::GtPractical => {
                let t = ms_metrics()?.mean_update_interval_s();
                run_network_centric(cx, &scenario, &solver, t, cfg.lag.gt_lag(n_ues))?
            }
            Scheme::SssTtt => run_sss_ttt(cx, &scenario, sim.ttt_s)?,
        };
        rows.push(make_row(scheme, &m));
    }
    Ok(rows)
}

pub fn load_bank(cfg: &ExperimentConfig, model_dir: &Path, n_types: usize) -> Result<MsnnBank> {
    let bank = MsnnBank::load(&model_dir.join(BANK_FILE))?;
    check_hash("model bank", &cfg.dataset_hash()?, &bank.config_hash)?;
    bank.check_complete(n_types)?;
    Ok(bank)
}

#[derive(Debug, Clone)]
pub struct SimulateOutcome {
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryRow>,
    pub runtime: Vec<RuntimeRow>,
}

/// Runs schemes x sweep points x replications, writing the per-run rows, a
/// summary of means and standard errors, and (when configured) the
/// wall-clock runtime table.
pub fn simulate(cfg: &ExperimentConfig, model_dir: &Path, out: &Path, exec: Exec) -> Result<SimulateOutcome> {
    let env = cfg.environment()?;
    let bank = load_bank(cfg, model_dir, env.topology.num_types())?;
    let surrogate = match cfg.simulation.engine {
        EngineKind::Surrogate => Some(SurrogateModel::load(&model_dir.join(SURROGATE_FILE))?),
        EngineKind::Oracle => None,
    };
    if let Some(model) = &surrogate {
        let max_n = cfg.simulation.points().iter().map(|p| p.1).max().unwrap_or(0);
        if max_n > model.capacity {
            return Err(Error::Capacity { n_ues: max_n, capacity: model.capacity });
        }
    }
    let oracle = OracleEngine { lb: cfg.lb.clone() };
    let learned = surrogate.as_ref().map(|model| SurrogateEngine { model });
    let engine: &dyn DecisionEngine = match &learned {
        Some(e) => e,
        None => &oracle,
    };
    let hash = cfg.config_hash()?;
    let points = cfg.simulation.points();
    let reps = cfg.simulation.replications;
    let jobs = try_map_range(exec, points.len() * reps, |j| {
        let (v, n) = points[j / reps];
        simulate_point(cfg, &env, &bank, engine, v, n, (j % reps) as u64, &hash)
    })?;
    let rows: Vec<ReportRow> = jobs.into_iter().flatten().collect();
    write_rows(&out.join(ROWS_FILE), &rows)?;
    let summary = summarize(&rows);
    report::write_summary(&out.join(SUMMARY_FILE), &summary)?;

    let mut runtime = Vec::new();
    if !cfg.simulation.runtime_n_ues.is_empty() {
        runtime = measure_runtime(
            &env.topology,
            &env.model,
            &cfg.lb,
            &bank,
            surrogate.as_ref(),
            &cfg.simulation.runtime_n_ues,
            cfg.simulation.runtime_reps,
            cfg.seed,
        )?;
        report::write_runtime(&out.join(RUNTIME_FILE), &runtime)?;
    }
    Ok(SimulateOutcome { rows, summary, runtime })
}

/// Retrains every ablation variant and writes the error table and the loss
/// curves.
pub fn ablate(cfg: &ExperimentConfig, dataset_dir: &Path, out: &Path, exec: Exec) -> Result<Vec<AblationResult>> {
    let manifest = DatasetManifest::load(dataset_dir)?;
    check_hash("dataset manifest", &cfg.dataset_hash()?, &manifest.config_hash)?;
    let datasets = manifest.load_datasets(dataset_dir)?;
    let results = ablation_variants(&datasets, &cfg.training.hidden, &cfg.training.msnn, cfg.seed, exec)?;
    let mut table =
        String::from("variant,error_variance_s2,mean_error_s,ci80_low_s,ci80_high_s,loss_ratio,n_validation\n");
    let mut curves = String::from("variant,model,epoch,train_loss,validation_loss\n");
    for r in &results {
        table.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.variant, r.error_variance, r.mean_error_s, r.ci80_s.0, r.ci80_s.1, r.loss_ratio, r.n_validation
        ));
        for (m, c) in r.curves.iter().enumerate() {
            for (e, (t, v)) in c.train.iter().zip(&c.validation).enumerate() {
                curves.push_str(&format!("{},{m},{e},{t},{v}\n", r.variant));
            }
        }
    }
    write_atomic(&out.join(ABLATION_FILE), table.as_bytes())?;
    write_atomic(&out.join(ABLATION_CURVES_FILE), curves.as_bytes())?;
    Ok(results)
}

/// Files under `dir` named `name`, searched one level deep as well.
pub fn find_files(dir: &Path, name: &str) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let direct = dir.join(name);
    if direct.is_file() {
        out.push(direct);
    }
    if let Ok(entries) = fs::read_dir(dir) {
        let mut subdirs: Vec<PathBuf> = entries.flatten().map(|e| e.path()).filter(|p| p.is_dir()).collect();
        subdirs.sort();
        out.extend(subdirs.into_iter().map(|d| d.join(name)).filter(|p| p.is_file()));
    }
    out
}
