use std::cell::RefCell;
use std::collections::BTreeMap;
use std::path::Path;

use super::collect::{MsnnInput, TypeDataset};
use crate::error::{Error, Result};
use crate::neural::{
    train, Activation, ColumnBounds, LossCurve, LossKind, Mlp, MlpSpec, ModelBundle, Trace, TrainConfig,
};
use crate::par::{map, Exec};
use crate::rng::rng_for;
use crate::topology::ApType;

const TAG_BANK: u64 = 0x6261_6e6b;

thread_local! {
    static SCRATCH: RefCell<Trace> = RefCell::new(Trace::default());
}

/// One interval model with the ranges it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalModel {
    pub mlp: Mlp,
    pub input_bounds: ColumnBounds,
    pub interval_min_s: f64,
    pub interval_max_s: f64,
}

impl IntervalModel {
    /// Inputs outside the training range are clamped to it.
    pub fn predict(&self, input: &MsnnInput) -> Result<f64> {
        let mut x = input.to_row();
        for (c, v) in x.iter_mut().enumerate() {
            *v = self.input_bounds.normalize_value(c, *v).clamp(0.0, 1.0);
        }
        // Called per UE per decision; a reused trace keeps it off the heap.
        let y = SCRATCH.with(|t| -> Result<f64> {
            let mut t = t.borrow_mut();
            self.mlp.forward_trace_into(&x, &mut t)?;
            Ok(t.output()[0])
        })?;
        Ok(self.interval_min_s + y * (self.interval_max_s - self.interval_min_s))
    }
}

/// Hidden widths of the interval MLP; output is a single sigmoid unit.
pub fn interval_spec(input_width: usize, hidden: &[usize]) -> Result<MlpSpec> {
    let mut widths = vec![input_width];
    widths.extend_from_slice(hidden);
    widths.push(1);
    MlpSpec::relu_stack(widths, Activation::Sigmoid, LossKind::Mse)
}

/// One interval model per AP type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MsnnBank {
    pub config_hash: String,
    pub models: BTreeMap<ApType, IntervalModel>,
}

impl MsnnBank {
    pub fn model(&self, ap_type: ApType) -> Result<&IntervalModel> {
        self.models.get(&ap_type).ok_or_else(|| Error::Domain(format!("no interval model for AP type {ap_type}")))
    }

    /// Next update interval in seconds for a UE hosted by an AP of `ap_type`.
    pub fn predict_interval(&self, ap_type: ApType, input: &MsnnInput) -> Result<f64> {
        self.model(ap_type)?.predict(input)
    }

    /// Errors unless every type in `0..n_types` has a model.
    pub fn check_complete(&self, n_types: usize) -> Result<()> {
        for t in 0..n_types {
            self.model(ApType::from_index(t))?;
        }
        Ok(())
    }

    pub fn to_bundle(&self) -> ModelBundle {
        let mut b = ModelBundle::default();
        b.meta.insert("kind".into(), "msnn-bank".into());
        b.meta.insert("config_hash".into(), self.config_hash.clone());
        for (t, m) in &self.models {
            b.models.insert(format!("type_{t}"), m.mlp.clone());
            b.bounds.insert(format!("input_{t}"), m.input_bounds.clone());
            b.bounds.insert(
                format!("interval_{t}"),
                ColumnBounds { lo: vec![m.interval_min_s], hi: vec![m.interval_max_s] },
            );
        }
        b
    }

    pub fn from_bundle(mut b: ModelBundle) -> Result<Self> {
        if b.meta.get("kind").map(String::as_str) != Some("msnn-bank") {
            return Err(Error::Parse("not an interval model bank".into()));
        }
        let config_hash = b.meta.remove("config_hash").unwrap_or_default();
        let mut models = BTreeMap::new();
        for (name, mlp) in std::mem::take(&mut b.models) {
            let t: ApType =
                name.strip_prefix("type_").ok_or_else(|| Error::Parse(format!("model {name:?}")))?.parse()?;
            let missing = |what: &str| Error::Parse(format!("bank lacks {what} bounds for type {t}"));
            let input_bounds = b.bounds.remove(&format!("input_{t}")).ok_or_else(|| missing("input"))?;
            let interval = b.bounds.remove(&format!("interval_{t}")).ok_or_else(|| missing("interval"))?;
            if interval.width() != 1 || input_bounds.width() != mlp.spec().input_width() {
                return Err(Error::Parse(format!("bounds of type {t} do not match its model")));
            }
            models.insert(
                t,
                IntervalModel { mlp, input_bounds, interval_min_s: interval.lo[0], interval_max_s: interval.hi[0] },
            );
        }
        Ok(Self { config_hash, models })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_bundle().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bundle(ModelBundle::load(path)?)
    }
}

/// Trains a model on `ds`, optionally restricted to some input columns.
pub fn train_interval_model(
    ds: &TypeDataset,
    hidden: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<(IntervalModel, LossCurve)> {
    let data = ds.to_dataset()?;
    let (x, y) = data.normalized();
    let mut mlp =
        Mlp::new(interval_spec(MsnnInput::WIDTH, hidden)?, &mut rng_for(seed, &[TAG_BANK, u64::from(ds.ap_type.0)]))?;
    let curve = train(&mut mlp, &x, &y, config)?;
    let model = IntervalModel {
        mlp,
        input_bounds: data.input_bounds,
        interval_min_s: ds.interval_min_s,
        interval_max_s: ds.interval_max_s,
    };
    Ok((model, curve))
}

/// Trains one model per dataset. The datasets must share a config hash.
pub fn train_bank(
    datasets: &[TypeDataset],
    hidden: &[usize],
    config: &TrainConfig,
    seed: u64,
    exec: Exec,
) -> Result<(MsnnBank, BTreeMap<ApType, LossCurve>)> {
    let first = datasets.first().ok_or(Error::EmptyDataset)?;
    if let Some(d) = datasets.iter().find(|d| d.config_hash != first.config_hash) {
        return Err(Error::HashMismatch {
            what: format!("type {} dataset", d.ap_type),
            expected: first.config_hash.clone(),
            found: d.config_hash.clone(),
        });
    }
    let trained = map(exec, datasets, |ds| train_interval_model(ds, hidden, config, seed));
    let mut bank = MsnnBank { config_hash: first.config_hash.clone(), models: BTreeMap::new() };
    let mut curves = BTreeMap::new();
    for (ds, r) in datasets.iter().zip(trained) {
        let (m, c) = r?;
        bank.models.insert(ds.ap_type, m);
        curves.insert(ds.ap_type, c);
    }
    Ok((bank, curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn zero_model() -> IntervalModel {
        IntervalModel {
            mlp: Mlp::zeros(interval_spec(3, &[16, 4]).unwrap()).unwrap(),
            input_bounds: ColumnBounds::new(vec![-20.0, 0.0, 0.0], vec![60.0, 3.2, 10.0]).unwrap(),
            interval_min_s: 0.01,
            interval_max_s: 2.0,
        }
    }

    #[test]
    fn zero_weights_predict_midpoint() {
        let input = MsnnInput { snr_db: 10.0, theta_rad: 1.0, speed_mps: 3.0 };
        assert_relative_eq!(zero_model().predict(&input).unwrap(), 1.005, max_relative = 1e-12);
    }

    #[test]
    fn missing_type_is_an_error() {
        let mut bank = MsnnBank::default();
        bank.models.insert(ApType(1), zero_model());
        let input = MsnnInput { snr_db: 0.0, theta_rad: 0.0, speed_mps: 1.0 };
        assert!(bank.predict_interval(ApType(1), &input).is_ok());
        assert!(bank.predict_interval(ApType(2), &input).is_err());
        assert!(bank.check_complete(2).is_err());
    }

    #[test]
    fn bank_round_trip() {
        let mut bank = MsnnBank { config_hash: "abc".into(), models: BTreeMap::new() };
        let mut m = zero_model();
        m.mlp = Mlp::new(m.mlp.spec().clone(), &mut rng_for(1, &[])).unwrap();
        bank.models.insert(ApType(4), m);
        let back = MsnnBank::from_bundle(ModelBundle::from_text(&bank.to_bundle().to_text()).unwrap()).unwrap();
        assert_eq!(back, bank);
    }
}
