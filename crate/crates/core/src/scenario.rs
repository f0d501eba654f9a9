//! Random UE populations: counts, required rates and initial motion states.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, LinkTable};
use crate::error::{Error, Result};
use crate::mobility::{MobilityConfig, MotionState};
use crate::topology::{Point3, RoomGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PopulationConfig {
    pub n_ues_min: usize,
    pub n_ues_max: usize,
    pub mean_rate_bps: f64,
    pub gamma_shape: f64,
    /// Draws below this are redrawn.
    pub min_rate_bps: f64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self { n_ues_min: 10, n_ues_max: 100, mean_rate_bps: 100e6, gamma_shape: 1.0, min_rate_bps: 1e6 }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ues_min == 0 || self.n_ues_min > self.n_ues_max {
            return Err(Error::Config(format!("bad UE count range [{}, {}]", self.n_ues_min, self.n_ues_max)));
        }
        if !(self.mean_rate_bps > 0.0 && self.gamma_shape > 0.0 && self.min_rate_bps >= 0.0) {
            return Err(Error::Config("rate distribution parameters must be positive".into()));
        }
        if self.min_rate_bps >= 10.0 * self.mean_rate_bps {
            return Err(Error::Config("min_rate_bps is too large for the mean rate".into()));
        }
        Ok(())
    }

    pub fn draw_count<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.gen_range(self.n_ues_min..=self.n_ues_max)
    }

    /// Gamma-distributed required rates, truncated below by redrawing.
    pub fn draw_rates<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let gamma =
            Gamma::new(self.gamma_shape, self.mean_rate_bps / self.gamma_shape).expect("validated gamma parameters");
        (0..n)
            .map(|_| loop {
                let r: f64 = gamma.sample(rng);
                if r >= self.min_rate_bps {
                    break r;
                }
            })
            .collect()
    }
}

/// UEs with their motion state, required rate and (optional) shadowing.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub motion: Vec<MotionState>,
    pub rates: Vec<f64>,
    pub shadows_db: Vec<f64>,
}

impl Population {
    pub fn spawn<R: Rng + ?Sized>(
        n: usize,
        population: &PopulationConfig,
        mobility: &MobilityConfig,
        room: &RoomGeometry,
        shadowing_sigma_db: f64,
        rng: &mut R,
    ) -> Self {
        let motion = (0..n).map(|_| MotionState::spawn(mobility, room, rng)).collect();
        let rates = population.draw_rates(n, rng);
        let shadows_db = (0..n)
            .map(|_| {
                if shadowing_sigma_db > 0.0 {
                    shadowing_sigma_db * rng.sample::<f64, _>(rand_distr::StandardNormal)
                } else {
                    0.0
                }
            })
            .collect();
        Self { motion, rates, shadows_db }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn positions(&self, ue_height: f64) -> Vec<Point3> {
        self.motion.iter().map(|m| m.position(ue_height)).collect()
    }

    pub fn link_table(&self, model: &ChannelModel, ue_height: f64) -> LinkTable {
        LinkTable::compute(model, &self.positions(ue_height), &self.shadows_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;

    #[test]
    fn rates_are_truncated_with_right_mean() {
        let cfg = PopulationConfig::default();
        let rates = cfg.draw_rates(200_000, &mut rng_for(2, &[]));
        assert!(rates.iter().all(|r| *r >= 1e6));
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        // Exponential truncated at 1 Mbps has mean 101 Mbps.
        assert!((mean / 101e6 - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn counts_within_range() {
        let cfg = PopulationConfig { n_ues_min: 3, n_ues_max: 5, ..Default::default() };
        let mut rng = rng_for(1, &[]);
        assert!((0..100).map(|_| cfg.draw_count(&mut rng)).all(|n| (3..=5).contains(&n)));
        assert!(PopulationConfig { n_ues_min: 6, n_ues_max: 5, ..Default::default() }.validate().is_err());
    }
}
