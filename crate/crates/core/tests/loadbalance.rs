mod common;

use hlwnet::experiment::{ExperimentConfig, Preset};
use hlwnet::loadbalance::surrogate::{oracle_samples, surrogate_train, SurrogateConfig};
use hlwnet::loadbalance::*;
use hlwnet::scenario::PopulationConfig;
use proptest::prelude::*;

fn lb() -> LbConfig {
    LbConfig::default()
}

fn check_against_enumeration(caps: &[Vec<f64>], rates: &[f64], table: &hlwnet::channel::LinkTable) -> f64 {
    let n_aps = caps[0].len();
    let (a, alloc, stats) = gt_best_response_solve(table, rates, &sss_assignment(table), &lb()).unwrap();
    assert!(stats.converged && stats.iterations >= 1);
    let u_gt = common::utility(caps, rates, a.hosts());
    assert!((u_gt - stats.utility).abs() < 1e-9);
    let u_opt = common::brute_force(caps, rates);
    let (ex, u_ex) = exhaustive_solve(table, rates, &lb()).unwrap();
    assert!((u_ex - u_opt).abs() < 1e-9);
    assert!((common::utility(caps, rates, ex.hosts()) - u_opt).abs() < 1e-9);
    assert!(u_ex >= u_gt - 1e-9);
    // Shares at the solution form a simplex per occupied AP.
    let mut per_ap = vec![0.0; n_aps];
    for (&h, &s) in a.hosts().iter().zip(alloc.shares()) {
        per_ap[h] += s;
    }
    assert!(per_ap.iter().all(|&s| s == 0.0 || (s - 1.0).abs() < 1e-9));
    (u_gt - u_opt).exp()
}

// Local search can stall in multi-move optima, so this bounds how often,
// not whether. The strict every-instance bound lives in the acceptance suite.
#[test]
fn solver_is_near_optimal_on_most_small_instances() {
    for physical in [false, true] {
        let ratios: Vec<f64> = (0..1000u64)
            .map(|seed| {
                let (n_ues, n_aps) = (1 + seed as usize % 4, 2 + (seed as usize / 4) % 3);
                let (caps, rates, table) = if physical {
                    common::physical_instance(seed, n_ues, n_aps)
                } else {
                    common::instance(seed, n_ues, n_aps)
                };
                check_against_enumeration(&caps, &rates, &table)
            })
            .collect();
        let near = ratios.iter().filter(|&&r| r >= 0.99).count();
        assert!(near >= 985, "{near} of 1000 within 1% (physical: {physical})");
    }
}

#[test]
fn single_ue_best_response_is_the_capacity_argmax() {
    for seed in 0..50 {
        let (caps, rates, table) = common::instance(seed, 1, 4);
        let (a, _, stats) = gt_best_response_solve(&table, &rates, &Assignment::uniform(1, 0), &lb()).unwrap();
        let argmax = (0..4).fold(0, |b, i| if caps[0][i] > caps[0][b] { i } else { b });
        assert_eq!(caps[0][a.host(0)], caps[0][argmax]);
        assert!(stats.iterations <= 2);
    }
}

fn hosts_strategy(n_ues: usize, n_aps: usize) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(0..n_aps, n_ues)
}

proptest! {
    #[test]
    fn shares_form_a_simplex(
        hosts in hosts_strategy(12, 5),
        rates in proptest::collection::vec(1e6f64..1e9, 12),
        equal in any::<bool>(),
    ) {
        let rule = if equal { ShareRule::Equal } else { ShareRule::DemandWeighted };
        let a = Assignment::new(hosts);
        let alloc = Allocation::compute(&a, &rates, 5, rule);
        let m = alloc.to_matrix(&a, 5);
        for (ap, row) in m.iter().enumerate() {
            let total: f64 = row.iter().sum();
            let occupied = a.hosts().contains(&ap);
            let ok = if occupied { (total - 1.0).abs() < 1e-9 } else { total == 0.0 };
            prop_assert!(ok, "AP {} sums to {}", ap, total);
            for (ue, &rho) in row.iter().enumerate() {
                prop_assert!(rho >= 0.0);
                prop_assert!(rho == 0.0 || a.host(ue) == ap);
            }
        }
    }

    #[test]
    fn a_best_response_move_never_lowers_utility(seed in any::<u64>(), ue in 0usize..6, start in hosts_strategy(6, 4)) {
        let (caps, rates, table) = common::instance(seed, 6, 4);
        let before = common::utility(&caps, &rates, &start);
        let mut after = start.clone();
        after[ue] = best_response(&table, &rates, &start, ue, &lb());
        prop_assert!(common::utility(&caps, &rates, &after) >= before - 1e-9);
    }

    #[test]
    fn solver_output_never_worse_than_its_start(seed in any::<u64>(), start in hosts_strategy(7, 4)) {
        let (caps, rates, table) = common::instance(seed, 7, 4);
        let (a, _, _) = gt_best_response_solve(&table, &rates, &Assignment::new(start.clone()), &lb()).unwrap();
        prop_assert!(common::utility(&caps, &rates, a.hosts()) >= common::utility(&caps, &rates, &start) - 1e-9);
    }

    #[test]
    fn sss_ignores_a_common_power_scale(powers in proptest::collection::vec(1e-12f64..1e-3, 1..20), k in 1e-6f64..1e6) {
        let db = |p: &[f64]| p.iter().map(|v| 10.0 * v.log10()).collect::<Vec<_>>();
        let scaled: Vec<f64> = powers.iter().map(|p| p * k).collect();
        let a = sss_select(&db(&powers));
        let b = sss_select(&db(&scaled));
        // Scaling can only tie or untie values that were equal to rounding.
        prop_assert!(a == b || (powers[a] - powers[b]).abs() <= 1e-12 * powers[a]);
    }
}

#[test]
fn sss_tie_rule() {
    assert_eq!(sss_select(&[3.0, 9.0, 1.0]), 1);
    assert_eq!(sss_select(&[5.0; 6]), 0);
}

fn surrogate_setup(
    population: PopulationConfig,
) -> (Vec<surrogate::OracleSample>, Vec<surrogate::OracleSample>, SurrogateConfig, Vec<hlwnet::topology::ApKind>, f64) {
    let cfg = ExperimentConfig::preset(Preset::Full);
    let env = cfg.environment().unwrap();
    let sc = SurrogateConfig::default();
    let h = cfg.mobility.ue_height_m;
    let train = oracle_samples(&env.topology, &env.model, &population, &cfg.lb, sc.capacity, h, 500, 1).unwrap();
    let held = oracle_samples(&env.topology, &env.model, &population, &cfg.lb, sc.capacity, h, 300, 2).unwrap();
    let kinds = env.topology.aps.iter().map(|ap| ap.kind).collect();
    (train, held, sc, kinds, cfg.channel.snr_floor_db)
}

#[test]
fn surrogate_learns_the_oracle() {
    let (train, held, sc, kinds, floor) = surrogate_setup(PopulationConfig::default());
    let (model, report) = surrogate_train(&train, kinds, floor, &sc).unwrap();
    let acc = model.agreement(&held).unwrap();
    println!("surrogate agreement {acc:.3} (train {:.3})", report.train_accuracy);
    assert!(acc >= 0.9, "held-out agreement {acc}");
    // Deterministic inference.
    assert_eq!(model.infer(&held[0].block).unwrap(), model.infer(&held[0].block).unwrap());
}

#[test]
fn surrogate_matches_argmax_for_a_lone_ue() {
    let lone = PopulationConfig { n_ues_min: 1, n_ues_max: 1, ..PopulationConfig::default() };
    let (train, held, sc, kinds, floor) = surrogate_setup(lone);
    let (model, _) = surrogate_train(&train, kinds, floor, &sc).unwrap();
    let acc = model.agreement(&held).unwrap();
    assert!(acc >= 0.95, "held-out agreement {acc}");
}
