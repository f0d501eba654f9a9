use std::hint::black_box;
use std::time::Instant;

use rand::Rng;

use crate::channel::{ChannelModel, LinkTable};
use crate::error::Result;
use crate::loadbalance::surrogate::{map_to_preset_count, SurrogateModel, UeFeatures};
use crate::loadbalance::{gt_best_response_solve, sss_assignment, LbConfig};
use crate::mobility::uniform_point;
use crate::msnn::{MsnnBank, MsnnInput};
use crate::rng::{rng_for, SimRng};
use crate::scenario::PopulationConfig;
use crate::topology::{NetworkTopology, Point3};

/// Median wall-clock seconds per call at one UE count.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeRow {
    pub n_ues: usize,
    pub msnn_s: f64,
    /// Absent when the surrogate's capacity is below the UE count.
    pub surrogate_s: Option<f64>,
    pub gt_s: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => values[n / 2],
        _ => 0.5 * (values[n / 2 - 1] + values[n / 2]),
    }
}

/// Calls per timing sample for sub-microsecond operations.
const BLOCK: usize = 1024;

fn time_block(mut f: impl FnMut()) -> f64 {
    f();
    let start = Instant::now();
    for _ in 0..BLOCK {
        f();
    }
    start.elapsed().as_secs_f64() / BLOCK as f64
}

/// Times the interval model, the surrogate and the GT solve on random static
/// instances of every size, one fresh instance per repetition.
#[allow(clippy::too_many_arguments)]
pub fn measure_runtime(
    topology: &NetworkTopology,
    model: &ChannelModel,
    lb: &LbConfig,
    bank: &MsnnBank,
    surrogate: Option<&SurrogateModel>,
    sizes: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<RuntimeRow>> {
    let population = PopulationConfig::default();
    let instance = |rng: &mut SimRng, n: usize| {
        let positions: Vec<Point3> = (0..n)
            .map(|_| {
                let (x, y) = uniform_point(&topology.room, rng);
                Point3::new(x, y, 1.0)
            })
            .collect();
        let rates = population.draw_rates(n, rng);
        let table = LinkTable::compute(model, &positions, &vec![0.0; n]);
        let initial = sss_assignment(&table);
        (table, rates, initial)
    };
    let reps = reps.max(1);
    let mut cases = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut rng = rng_for(seed, &[0x7469_6d65, n as u64]);
        // Solve time depends on the instance as much as on its size, so
        // every repetition draws a fresh one.
        let instances: Vec<_> = (0..reps).map(|_| instance(&mut rng, n)).collect();
        let (table, _, initial) = &instances[0];
        let host = initial.host(0);
        let input = MsnnInput { snr_db: table.snr_db(host, 0), theta_rad: rng.gen::<f64>() * 3.0, speed_mps: 2.0 };
        let ap_type = topology.aps[host].ap_type;
        bank.model(ap_type)?;
        let surrogate = surrogate.filter(|s| s.capacity >= n);
        cases.push((n, instances, ap_type, input, surrogate));
    }

    // Slow drift in the machine would otherwise land on whichever sizes ran
    // during it. Round-robin over the sizes spreads it evenly.
    let mut samples = vec![[Vec::with_capacity(reps), Vec::with_capacity(reps), Vec::with_capacity(reps)]; cases.len()];
    for rep in 0..reps {
        for ((n, instances, ap_type, input, surrogate), [msnn, sur, gt]) in cases.iter().zip(&mut samples) {
            let (table, rates, initial) = &instances[rep];
            msnn.push(time_block(|| drop(black_box(bank.predict_interval(*ap_type, black_box(input))))));
            if let Some(s) = surrogate {
                let start = Instant::now();
                let target = UeFeatures::from_table(table, 0, rates[0], None);
                let conditions: Vec<UeFeatures> =
                    (1..*n).map(|k| UeFeatures::from_table(table, k, rates[k], Some(initial.host(k)))).collect();
                let block = map_to_preset_count(&target, &conditions, s.capacity, s.snr_floor_db)?;
                black_box(s.scores(&block)?);
                sur.push(start.elapsed().as_secs_f64());
            }
            let start = Instant::now();
            black_box(gt_best_response_solve(table, rates, initial, lb)?);
            gt.push(start.elapsed().as_secs_f64());
        }
    }
    Ok(cases
        .iter()
        .zip(&mut samples)
        .map(|((n, _, _, _, surrogate), [msnn, sur, gt])| RuntimeRow {
            n_ues: *n,
            msnn_s: median(msnn),
            surrogate_s: surrogate.map(|_| median(sur)),
            gt_s: median(gt),
        })
        .collect())
}
