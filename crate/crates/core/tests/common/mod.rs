//! Oracles shared by the integration suites. Written against the model
//! definitions, not the library code paths.
#![allow(dead_code)]

use hlwnet::channel::LinkTable;
use hlwnet::rng::rng_for;
use rand::Rng;

/// Demand-weighted log utility computed straight from the definition.
pub fn utility(caps: &[Vec<f64>], rates: &[f64], hosts: &[usize]) -> f64 {
    let n_aps = caps[0].len();
    let mut load = vec![0.0; n_aps];
    for (&h, &r) in hosts.iter().zip(rates) {
        load[h] += r;
    }
    hosts.iter().zip(rates).enumerate().map(|(j, (&h, &r))| (r / load[h] * caps[j][h]).max(1.0).ln()).sum()
}

/// Best utility over all n_aps^n_ues assignments.
pub fn brute_force(caps: &[Vec<f64>], rates: &[f64]) -> f64 {
    let (n, m) = (caps.len(), caps[0].len());
    let mut best = f64::NEG_INFINITY;
    let mut hosts = vec![0; n];
    for code in 0..m.pow(n as u32) {
        let mut c = code;
        for h in hosts.iter_mut() {
            *h = c % m;
            c /= m;
        }
        best = best.max(utility(caps, rates, &hosts));
    }
    best
}

/// Random small instance: capacities 1 Mbps to 1 Gbps, some links dead.
pub fn instance(seed: u64, n_ues: usize, n_aps: usize) -> (Vec<Vec<f64>>, Vec<f64>, LinkTable) {
    let mut rng = rng_for(seed, &[0x5eed]);
    let caps: Vec<Vec<f64>> = (0..n_ues)
        .map(|_| {
            (0..n_aps).map(|_| if rng.gen_bool(0.15) { 0.0 } else { 10f64.powf(rng.gen_range(6.0..9.0)) }).collect()
        })
        .collect();
    let rates: Vec<f64> = (0..n_ues).map(|_| rng.gen_range(1e6..3e8)).collect();
    let table = LinkTable::from_capacities(&caps);
    (caps, rates, table)
}

/// Instance from the channel model: `n_aps - 1` LiFi APs of a 2x2 grid plus
/// the WiFi AP, UEs uniform in a 5 x 5 m room, default rate distribution.
pub fn physical_instance(seed: u64, n_ues: usize, n_aps: usize) -> (Vec<Vec<f64>>, Vec<f64>, LinkTable) {
    use hlwnet::channel::{ChannelModel, ChannelParams};
    use hlwnet::scenario::PopulationConfig;
    use hlwnet::topology::*;
    let room = RoomGeometry::new(5.0, 5.0, 3.0).unwrap();
    let full = build_grid_topology(room, 2, 2.5, 0.5, Classification::Symmetric).unwrap();
    let mut aps: Vec<AccessPoint> = full.aps[..n_aps - 1].to_vec();
    aps.push(full.aps[4].clone());
    let topo = NetworkTopology { aps, ..full };
    let model = ChannelModel::new(&topo, ChannelParams::default()).unwrap();
    let mut rng = rng_for(seed, &[0x9e75]);
    let pos: Vec<Point3> =
        (0..n_ues).map(|_| Point3::new(rng.gen_range(0.0..5.0), rng.gen_range(0.0..5.0), 1.0)).collect();
    let table = LinkTable::compute(&model, &pos, &vec![0.0; n_ues]);
    let rates = PopulationConfig::default().draw_rates(n_ues, &mut rng);
    let caps = (0..n_ues).map(|j| (0..n_aps).map(|i| table.capacity(i, j)).collect()).collect();
    (caps, rates, table)
}

/// Per-UE throughput under demand-weighted time sharing.
pub fn delivered(caps: &[Vec<f64>], rates: &[f64], hosts: &[usize]) -> Vec<f64> {
    let mut load = vec![0.0; caps[0].len()];
    for (&h, &r) in hosts.iter().zip(rates) {
        load[h] += r;
    }
    hosts.iter().zip(rates).enumerate().map(|(j, (&h, &r))| r / load[h] * caps[j][h]).collect()
}
