//! Input-drop and merged-type retraining, scored on the held-out tail.

use std::fmt;

use super::bank::interval_spec;
use super::collect::{MsnnInput, TypeDataset};
use crate::error::{Error, Result};
use crate::neural::{split_index, train, Dataset, LossCurve, Mlp, TrainConfig};
use crate::par::{map, Exec};
use crate::rng::rng_for;

const TAG_ABLATE: u64 = 0x6162_6c74;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AblationVariant {
    Baseline,
    DropSnr,
    DropTheta,
    DropSpeed,
    /// One model over all AP types.
    MergedTypes,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 5] =
        [Self::Baseline, Self::DropSnr, Self::DropTheta, Self::DropSpeed, Self::MergedTypes];

    pub fn columns(self) -> Vec<usize> {
        let drop = match self {
            Self::DropSnr => Some(MsnnInput::SNR),
            Self::DropTheta => Some(MsnnInput::THETA),
            Self::DropSpeed => Some(MsnnInput::SPEED),
            Self::Baseline | Self::MergedTypes => None,
        };
        (0..MsnnInput::WIDTH).filter(|&c| Some(c) != drop).collect()
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Baseline => "baseline",
            Self::DropSnr => "drop_snr",
            Self::DropTheta => "drop_theta",
            Self::DropSpeed => "drop_speed",
            Self::MergedTypes => "merged_types",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub variant: AblationVariant,
    /// Sample variance of (predicted - label) in seconds squared, pooled over
    /// the validation rows of every model in the variant.
    pub error_variance: f64,
    pub mean_error_s: f64,
    /// 10th and 90th percentile of the error.
    pub ci80_s: (f64, f64),
    /// Largest validation/training loss ratio at the kept epoch over the
    /// variant's models.
    pub loss_ratio: f64,
    pub n_validation: usize,
    pub curves: Vec<LossCurve>,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Trains on the normalized dataset and returns validation errors in
/// seconds together with the loss curve.
fn fit_and_score(data: &Dataset, hidden: &[usize], config: &TrainConfig, seed: u64) -> Result<(Vec<f64>, LossCurve)> {
    let (x, y) = data.normalized();
    let mut mlp = Mlp::new(interval_spec(data.input_bounds.width(), hidden)?, &mut rng_for(seed, &[]))?;
    let curve = train(&mut mlp, &x, &y, config)?;
    let split = split_index(x.len(), config.validation_fraction).max(1);
    let mut errors = Vec::with_capacity(x.len() - split);
    for (xi, row) in x[split..].iter().zip(&data.targets[split..]) {
        let pred = data.target_bounds.denormalize_value(0, mlp.forward(xi)?[0]);
        errors.push(pred - row[0]);
    }
    Ok((errors, curve))
}

fn summarize(variant: AblationVariant, errors: Vec<f64>, curves: Vec<LossCurve>) -> AblationResult {
    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let variance = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
    let mut sorted = errors;
    sorted.sort_by(f64::total_cmp);
    let loss_ratio = curves.iter().map(|c| c.best_validation() / c.best_train()).fold(f64::NEG_INFINITY, f64::max);
    AblationResult {
        variant,
        error_variance: variance,
        mean_error_s: mean,
        ci80_s: (quantile(&sorted, 0.1), quantile(&sorted, 0.9)),
        loss_ratio,
        n_validation: n,
        curves,
    }
}

pub fn run_variant(
    datasets: &[TypeDataset],
    variant: AblationVariant,
    hidden: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<AblationResult> {
    let first = datasets.first().ok_or(Error::EmptyDataset)?;
    let seed = crate::rng::derive(seed, &[TAG_ABLATE]);
    let mut errors = Vec::new();
    let mut curves = Vec::new();
    if variant == AblationVariant::MergedTypes {
        let mut merged = first.to_dataset()?;
        for ds in &datasets[1..] {
            merged = merged.concat(&ds.to_dataset()?)?;
        }
        let (e, c) = fit_and_score(&merged, hidden, config, seed)?;
        errors = e;
        curves.push(c);
    } else {
        let cols = variant.columns();
        for ds in datasets {
            let data = ds.to_dataset()?.select_inputs(&cols);
            let (e, c) = fit_and_score(&data, hidden, config, crate::rng::derive(seed, &[u64::from(ds.ap_type.0)]))?;
            errors.extend(e);
            curves.push(c);
        }
    }
    if errors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(summarize(variant, errors, curves))
}

/// Every variant in [`AblationVariant::ALL`] order.
pub fn ablation_variants(
    datasets: &[TypeDataset],
    hidden: &[usize],
    config: &TrainConfig,
    seed: u64,
    exec: Exec,
) -> Result<Vec<AblationResult>> {
    map(exec, &AblationVariant::ALL, |&v| run_variant(datasets, v, hidden, config, seed)).into_iter().collect()
}
