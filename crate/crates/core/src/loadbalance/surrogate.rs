//! Learned per-target AP selector. Every AP gets a score from three shared
//! networks: a target encoder over the target UE's link to that AP, a
//! condition encoder over the load the other UEs put on it, and a head that
//! combines both. A softmax over APs gives the decision distribution.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{best_response, gt_best_response_solve, sss_assignment, LbConfig};
use crate::channel::{ChannelModel, LinkTable};
use crate::error::{Error, Result};
use crate::mobility::uniform_point;
use crate::neural::{Activation, AdamConfig, AdamState, LossKind, Mlp, MlpSpec, ModelBundle, TrainConfig};
use crate::rng::rng_for;
use crate::scenario::PopulationConfig;
use crate::topology::{ApKind, NetworkTopology, Point3};

const TARGET_INPUTS: usize = 3;
const CONDITION_INPUTS: usize = 2;
const RATE_REF_BPS: f64 = 1e6;
const LOAD_REF_BPS: f64 = 1e8;

/// SNR vector plus required rate of one UE; condition UEs also carry their
/// current host.
#[derive(Debug, Clone, PartialEq)]
pub struct UeFeatures {
    pub snr_db: Vec<f64>,
    pub rate_bps: f64,
    pub host: Option<usize>,
}

impl UeFeatures {
    pub fn from_table(table: &LinkTable, ue: usize, rate_bps: f64, host: Option<usize>) -> Self {
        Self { snr_db: table.row(ue).iter().map(|s| s.snr_db).collect(), rate_bps, host }
    }

    fn best_snr(&self) -> f64 {
        self.snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        other
            .best_snr()
            .total_cmp(&self.best_snr())
            .then_with(|| {
                self.snr_db
                    .iter()
                    .zip(&other.snr_db)
                    .map(|(a, b)| b.total_cmp(a))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| other.rate_bps.total_cmp(&self.rate_bps))
            .then_with(|| self.host.cmp(&other.host))
    }
}

/// Target row plus exactly `M - 1` condition rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBlock {
    pub target: UeFeatures,
    pub conditions: Vec<UeFeatures>,
    pub n_real: usize,
}

/// Orders condition UEs by descending best SNR and pads with sentinel UEs
/// (floor SNRs, zero rate, no host) up to `m - 1` rows.
pub fn map_to_preset_count(
    target: &UeFeatures,
    conditions: &[UeFeatures],
    m: usize,
    floor_db: f64,
) -> Result<PaddedBlock> {
    let n_ues = conditions.len() + 1;
    if n_ues > m {
        return Err(Error::Capacity { n_ues, capacity: m });
    }
    let width = target.snr_db.len();
    if let Some(c) = conditions.iter().find(|c| c.snr_db.len() != width) {
        return Err(Error::Shape { expected: width, got: c.snr_db.len() });
    }
    let mut rows = conditions.to_vec();
    rows.sort_by(UeFeatures::canonical_cmp);
    rows.resize(m - 1, UeFeatures { snr_db: vec![floor_db; width], rate_bps: 0.0, host: None });
    Ok(PaddedBlock { target: target.clone(), conditions: rows, n_real: conditions.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    /// Preset UE capacity M.
    pub capacity: usize,
    pub target_hidden: usize,
    pub condition_hidden: usize,
    pub head_hidden: usize,
    pub train: TrainConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            capacity: 20,
            target_hidden: 16,
            condition_hidden: 8,
            head_hidden: 16,
            train: TrainConfig {
                epochs: 300,
                batch_size: 16,
                learning_rate: 3e-3,
                patience: 60,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub capacity: usize,
    pub kinds: Vec<ApKind>,
    pub snr_floor_db: f64,
    target_enc: Mlp,
    condition_enc: Mlp,
    head: Mlp,
    trained: bool,
}

/// One oracle decision: the padded block and the oracle's AP index.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub block: PaddedBlock,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateReport {
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    pub train_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
}

struct ApInputs {
    target: Vec<[f64; TARGET_INPUTS]>,
    condition: Vec<[f64; CONDITION_INPUTS]>,
}

impl SurrogateModel {
    pub fn new<R: Rng + ?Sized>(
        kinds: Vec<ApKind>,
        snr_floor_db: f64,
        config: &SurrogateConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if config.capacity < 1 {
            return Err(Error::Config("surrogate capacity must be >= 1".into()));
        }
        let enc = |i, h| MlpSpec::new(vec![i, h], vec![Activation::Relu], LossKind::Mse);
        let head = MlpSpec::relu_stack(
            vec![config.target_hidden + config.condition_hidden, config.head_hidden, 1],
            Activation::Identity,
            LossKind::Mse,
        )?;
        Ok(Self {
            capacity: config.capacity,
            kinds,
            snr_floor_db,
            target_enc: Mlp::new(enc(TARGET_INPUTS, config.target_hidden)?, rng)?,
            condition_enc: Mlp::new(enc(CONDITION_INPUTS, config.condition_hidden)?, rng)?,
            head: Mlp::new(head, rng)?,
            trained: false,
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn n_aps(&self) -> usize {
        self.kinds.len()
    }

    fn inputs(&self, block: &PaddedBlock) -> ApInputs {
        let n = self.n_aps();
        let mut count = vec![0.0f64; n];
        let mut load = vec![0.0f64; n];
        for c in &block.conditions {
            if let Some(h) = c.host {
                count[h] += 1.0;
                load[h] += c.rate_bps;
            }
        }
        let span = 80.0 - self.snr_floor_db;
        let rate = (block.target.rate_bps.max(RATE_REF_BPS) / RATE_REF_BPS).ln() / 7.0;
        let cap = ((self.capacity as f64) + 1.0).ln();
        ApInputs {
            target: (0..n)
                .map(|i| {
                    let wifi = if self.kinds[i] == ApKind::WiFi { 1.0 } else { 0.0 };
                    [(block.target.snr_db[i] - self.snr_floor_db) / span, wifi, rate]
                })
                .collect(),
            condition: (0..n)
                .map(|i| [(1.0 + count[i]).ln() / cap, (1.0 + load[i] / LOAD_REF_BPS).ln() / 3.0])
                .collect(),
        }
    }

    fn check_block(&self, block: &PaddedBlock) -> Result<()> {
        if block.conditions.len() + 1 != self.capacity {
            return Err(Error::Shape { expected: self.capacity - 1, got: block.conditions.len() });
        }
        if block.target.snr_db.len() != self.n_aps() {
            return Err(Error::Shape { expected: self.n_aps(), got: block.target.snr_db.len() });
        }
        Ok(())
    }

    /// Unnormalized per-AP scores.
    pub fn scores(&self, block: &PaddedBlock) -> Result<Vec<f64>> {
        self.check_block(block)?;
        let inputs = self.inputs(block);
        (0..self.n_aps())
            .map(|i| {
                let mut h = self.target_enc.forward(&inputs.target[i])?;
                h.extend(self.condition_enc.forward(&inputs.condition[i])?);
                Ok(self.head.forward(&h)?[0])
            })
            .collect()
    }

    pub fn probabilities(&self, block: &PaddedBlock) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(block)?))
    }

    /// AP index with the highest score; ties go to the lowest index.
    pub fn infer(&self, block: &PaddedBlock) -> Result<usize> {
        if !self.trained {
            return Err(Error::Untrained);
        }
        let s = self.scores(block)?;
        Ok(argmax(&s))
    }

    /// Cross-entropy of one sample; accumulates gradients when `grads` is given.
    fn sample_loss(&self, sample: &OracleSample, grads: Option<&mut [Vec<f64>; 3]>) -> Result<(f64, usize)> {
        let inputs = self.inputs(&sample.block);
        let n = self.n_aps();
        let mut traces = Vec::with_capacity(n);
        let mut scores = Vec::with_capacity(n);
        for i in 0..n {
            let t = self.target_enc.forward_trace(&inputs.target[i])?;
            let c = self.condition_enc.forward_trace(&inputs.condition[i])?;
            let mut h = t.output().to_vec();
            h.extend_from_slice(c.output());
            let hd = self.head.forward_trace(&h)?;
            scores.push(hd.output()[0]);
            traces.push((t, c, hd));
        }
        let p = softmax(&scores);
        let loss = -p[sample.label].max(1e-300).ln();
        if let Some(g) = grads {
            let th = self.target_enc.spec().output_width();
            for (i, (t, c, hd)) in traces.iter().enumerate() {
                let d = p[i] - if i == sample.label { 1.0 } else { 0.0 };
                let dh = self.head.backward_output(hd, &[d], &mut g[2]);
                self.target_enc.backward_output(t, &dh[..th], &mut g[0]);
                self.condition_enc.backward_output(c, &dh[th..], &mut g[1]);
            }
        }
        Ok((loss, argmax(&scores)))
    }

    fn evaluate(&self, samples: &[OracleSample]) -> Result<(f64, f64)> {
        if samples.is_empty() {
            return Ok((f64::NAN, f64::NAN));
        }
        let mut loss = 0.0;
        let mut hits = 0usize;
        for s in samples {
            let (l, pred) = self.sample_loss(s, None)?;
            loss += l;
            hits += usize::from(pred == s.label);
        }
        Ok((loss / samples.len() as f64, hits as f64 / samples.len() as f64))
    }

    /// Fraction of samples where the surrogate picks the oracle's AP.
    pub fn agreement(&self, samples: &[OracleSample]) -> Result<f64> {
        Ok(self.evaluate(samples)?.1)
    }

    pub fn to_bundle(&self) -> ModelBundle {
        let mut b = ModelBundle::default();
        b.meta.insert("kind".into(), "surrogate".into());
        b.meta.insert("capacity".into(), self.capacity.to_string());
        b.meta.insert("snr_floor_db".into(), format!("{:e}", self.snr_floor_db));
        let kinds: Vec<&str> = self.kinds.iter().map(|k| if *k == ApKind::WiFi { "wifi" } else { "lifi" }).collect();
        b.meta.insert("ap_kinds".into(), kinds.join(","));
        b.models.insert("target".into(), self.target_enc.clone());
        b.models.insert("condition".into(), self.condition_enc.clone());
        b.models.insert("head".into(), self.head.clone());
        b
    }

    pub fn from_bundle(mut b: ModelBundle) -> Result<Self> {
        let meta =
            |k: &str| b.meta.get(k).cloned().ok_or_else(|| Error::Parse(format!("surrogate file lacks meta {k}")));
        let capacity = meta("capacity")?.parse().map_err(|_| Error::Parse("bad capacity".into()))?;
        let snr_floor_db = meta("snr_floor_db")?.parse().map_err(|_| Error::Parse("bad snr floor".into()))?;
        let kinds = meta("ap_kinds")?
            .split(',')
            .map(|k| match k {
                "wifi" => Ok(ApKind::WiFi),
                "lifi" => Ok(ApKind::LiFi),
                _ => Err(Error::Parse(format!("bad AP kind {k:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut take =
            |k: &str| b.models.remove(k).ok_or_else(|| Error::Parse(format!("surrogate file lacks network {k}")));
        Ok(Self {
            capacity,
            kinds,
            snr_floor_db,
            target_enc: take("target")?,
            condition_enc: take("condition")?,
            head: take("head")?,
            trained: true,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_bundle().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bundle(ModelBundle::load(path)?)
    }
}

fn softmax(s: &[f64]) -> Vec<f64> {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in s.iter().enumerate() {
        if *v > s[best] {
            best = i;
        }
    }
    best
}

/// Pads the features and runs the model.
pub fn surrogate_infer(model: &SurrogateModel, target: &UeFeatures, conditions: &[UeFeatures]) -> Result<usize> {
    if !model.trained {
        return Err(Error::Untrained);
    }
    model.infer(&map_to_preset_count(target, conditions, model.capacity, model.snr_floor_db)?)
}

/// Trains a fresh surrogate on oracle decisions; the tail of `samples`
/// validates.
pub fn surrogate_train(
    samples: &[OracleSample],
    kinds: Vec<ApKind>,
    snr_floor_db: f64,
    config: &SurrogateConfig,
) -> Result<(SurrogateModel, SurrogateReport)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let tc = &config.train;
    tc.validate()?;
    let mut rng = rng_for(tc.seed, &[0x5355_5252]);
    let mut model = SurrogateModel::new(kinds, snr_floor_db, config, &mut rng)?;
    let split = crate::neural::split_index(samples.len(), tc.validation_fraction).max(1);
    let (train, val) = samples.split_at(split);
    let adam_cfg = AdamConfig { learning_rate: tc.learning_rate, ..AdamConfig::default() };
    let sizes = [model.target_enc.params().len(), model.condition_enc.params().len(), model.head.params().len()];
    let mut adams = sizes.map(|n| AdamState::new(n, adam_cfg));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = if tc.batch_size == 0 { train.len() } else { tc.batch_size.min(train.len()) };
    let mut report =
        SurrogateReport { train_accuracy: 0.0, validation_accuracy: 0.0, train_loss: vec![], validation_loss: vec![] };
    let mut best = (f64::INFINITY, model.clone());
    let mut since_best = 0;
    for _ in 0..tc.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grads = sizes.map(|n| vec![0.0; n]);
            for &i in chunk {
                model.sample_loss(&train[i], Some(&mut grads))?;
            }
            let scale = 1.0 / chunk.len() as f64;
            for g in grads.iter_mut() {
                g.iter_mut().for_each(|v| *v *= scale);
            }
            adams[0].step(model.target_enc.params_mut(), &grads[0]);
            adams[1].step(model.condition_enc.params_mut(), &grads[1]);
            adams[2].step(model.head.params_mut(), &grads[2]);
        }
        let (tl, _) = model.evaluate(train)?;
        let (vl, _) = if val.is_empty() { (tl, 0.0) } else { model.evaluate(val)? };
        report.train_loss.push(tl);
        report.validation_loss.push(vl);
        if vl < best.0 {
            best = (vl, model.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if tc.patience > 0 && since_best >= tc.patience {
                break;
            }
        }
    }
    if tc.restore_best {
        model = best.1;
    }
    model.trained = true;
    report.train_accuracy = model.evaluate(train)?.1;
    report.validation_accuracy = if val.is_empty() { report.train_accuracy } else { model.evaluate(val)?.1 };
    Ok((model, report))
}

/// Oracle decisions on random static scenarios: UEs are placed uniformly,
/// the network is balanced by best response from SSS, then one target UE is
/// optionally moved to a fresh position and labelled with its best response.
#[allow(clippy::too_many_arguments)]
pub fn oracle_samples(
    topology: &NetworkTopology,
    model: &ChannelModel,
    population: &PopulationConfig,
    lb: &LbConfig,
    capacity: usize,
    ue_height: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<OracleSample>> {
    let floor = model.params.snr_floor_db;
    let max_ues = population.n_ues_max.min(capacity);
    let min_ues = population.n_ues_min.min(max_ues);
    (0..n)
        .map(|i| {
            let mut rng = rng_for(seed, &[0x4f52_4143, i as u64]);
            let n_ues = rng.gen_range(min_ues..=max_ues);
            let mut pos: Vec<Point3> = (0..n_ues)
                .map(|_| {
                    let (x, y) = uniform_point(&topology.room, &mut rng);
                    Point3::new(x, y, ue_height)
                })
                .collect();
            let rates = population.draw_rates(n_ues, &mut rng);
            let shadows = vec![0.0; n_ues];
            let table = LinkTable::compute(model, &pos, &shadows);
            let (assign, _, _) = gt_best_response_solve(&table, &rates, &sss_assignment(&table), lb)?;
            let target = rng.gen_range(0..n_ues);
            let table = if rng.gen_bool(0.5) {
                let (x, y) = uniform_point(&topology.room, &mut rng);
                pos[target] = Point3::new(x, y, ue_height);
                LinkTable::compute(model, &pos, &shadows)
            } else {
                table
            };
            let label = best_response(&table, &rates, assign.hosts(), target, lb);
            let target_f = UeFeatures::from_table(&table, target, rates[target], None);
            let conditions: Vec<UeFeatures> = (0..n_ues)
                .filter(|&j| j != target)
                .map(|j| UeFeatures::from_table(&table, j, rates[j], Some(assign.host(j))))
                .collect();
            Ok(OracleSample { block: map_to_preset_count(&target_f, &conditions, capacity, floor)?, label })
        })
        .collect()
}
