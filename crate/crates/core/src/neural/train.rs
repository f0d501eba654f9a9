use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::mlp::{Mlp, Trace};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// 0 means full batch.
    pub batch_size: usize,
    /// Fraction of rows, taken from the end, held out for validation.
    pub validation_fraction: f64,
    pub learning_rate: f64,
    /// Stop after this many epochs without a validation improvement; 0 disables.
    pub patience: usize,
    pub restore_best: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            validation_fraction: 0.2,
            learning_rate: 1e-3,
            patience: 30,
            restore_best: true,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    /// Epoch (0-based) whose weights were kept.
    pub best_epoch: usize,
}

impl LossCurve {
    pub fn best_train(&self) -> f64 {
        self.train.get(self.best_epoch).copied().unwrap_or(f64::NAN)
    }

    pub fn best_validation(&self) -> f64 {
        self.validation.get(self.best_epoch).copied().unwrap_or(f64::NAN)
    }
}

/// Rows before `split` train, the rest validate.
pub fn split_index(n: usize, validation_fraction: f64) -> usize {
    n - ((n as f64) * validation_fraction).round() as usize
}

/// Mean per-sample loss over the given rows.
pub fn mean_loss(model: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if inputs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        total += model.loss(&model.forward(x)?, y);
    }
    Ok(total / inputs.len() as f64)
}

/// Minibatch Adam on already-normalized rows. Deterministic for a given seed.
pub fn train(model: &mut Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>], config: &TrainConfig) -> Result<LossCurve> {
    config.validate()?;
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape { expected: inputs.len(), got: targets.len() });
    }
    let split = split_index(inputs.len(), config.validation_fraction).max(1);
    let (train_x, val_x) = inputs.split_at(split);
    let (train_y, val_y) = targets.split_at(split);
    let batch = if config.batch_size == 0 { train_x.len() } else { config.batch_size.min(train_x.len()) };

    let mut adam =
        AdamState::new(model.params().len(), AdamConfig { learning_rate: config.learning_rate, ..Default::default() });
    let mut rng = rng_for(config.seed, &[0x7472_6169_6e]);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut grads = vec![0.0; model.params().len()];
    let mut trace = Trace::default();
    let mut curve = LossCurve::default();
    let mut best = (f64::INFINITY, model.params().to_vec());
    let mut since_best = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                model.forward_trace_into(&train_x[i], &mut trace)?;
                model.backward(&trace, &train_y[i], &mut grads)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(model.params_mut(), &grads);
        }
        let train_loss = mean_loss(model, train_x, train_y)?;
        let val_loss = if val_x.is_empty() { train_loss } else { mean_loss(model, val_x, val_y)? };
        curve.train.push(train_loss);
        curve.validation.push(val_loss);
        if val_loss < best.0 {
            best = (val_loss, model.params().to_vec());
            curve.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if config.patience > 0 && since_best >= config.patience {
                break;
            }
        }
    }
    if config.restore_best {
        model.params_mut().copy_from_slice(&best.1);
    } else {
        curve.best_epoch = curve.train.len() - 1;
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::mlp::{Activation, LossKind, MlpSpec};

    fn model(seed: u64) -> Mlp {
        let spec = MlpSpec::relu_stack(vec![2, 8, 1], Activation::Sigmoid, LossKind::Mse).unwrap();
        Mlp::new(spec, &mut rng_for(seed, &[])).unwrap()
    }

    #[test]
    fn constant_label_is_learned() {
        let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 17) as f64 / 17.0, (i % 5) as f64 / 5.0]).collect();
        let ys = vec![vec![0.3]; 200];
        let mut m = model(1);
        let curve =
            train(&mut m, &xs, &ys, &TrainConfig { epochs: 150, learning_rate: 1e-2, ..Default::default() }).unwrap();
        assert!(curve.best_validation() < 1e-4, "{}", curve.best_validation());
    }

    #[test]
    fn training_is_deterministic() {
        let xs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 100.0, 1.0 - i as f64 / 100.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0] * x[0]]).collect();
        let cfg = TrainConfig { epochs: 20, ..Default::default() };
        let (mut a, mut b) = (model(3), model(3));
        let ca = train(&mut a, &xs, &ys, &cfg).unwrap();
        let cb = train(&mut b, &xs, &ys, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(train(&mut model(0), &[], &[], &TrainConfig::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn tail_split() {
        assert_eq!(split_index(2000, 0.2), 1600);
        assert_eq!(split_index(10, 0.0), 10);
    }
}
