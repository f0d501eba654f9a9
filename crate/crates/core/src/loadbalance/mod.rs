//! AP selection and TDMA time allocation: SSS, the proportional-fair
//! objective, the best-response (GT) solver and the learned surrogate.

mod solver;
pub mod surrogate;

use serde::{Deserialize, Serialize};

pub use solver::{best_response, exhaustive_solve, gt_best_response_solve, BrContext, SolverStats};

use crate::channel::LinkTable;
use crate::error::{Error, Result};

/// Throughput floor inside the log utility, in bit/s.
pub const UTILITY_FLOOR_BPS: f64 = 1.0;

/// Host AP (0-based index) of every UE.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Assignment(Vec<usize>);

impl Assignment {
    pub fn new(hosts: Vec<usize>) -> Self {
        Self(hosts)
    }

    pub fn uniform(n_ues: usize, ap: usize) -> Self {
        Self(vec![ap; n_ues])
    }

    pub fn hosts(&self) -> &[usize] {
        &self.0
    }

    pub fn host(&self, ue: usize) -> usize {
        self.0[ue]
    }

    pub fn set(&mut self, ue: usize, ap: usize) {
        self.0[ue] = ap;
    }

    pub fn n_ues(&self) -> usize {
        self.0.len()
    }

    pub fn validate(&self, n_aps: usize) -> Result<()> {
        match self.0.iter().find(|&&ap| ap >= n_aps) {
            Some(ap) => Err(Error::Domain(format!("host index {ap} out of range for {n_aps} APs"))),
            None => Ok(()),
        }
    }

    /// Binary connection matrix `chi[ap][ue]`.
    pub fn to_matrix(&self, n_aps: usize) -> Vec<Vec<bool>> {
        let mut m = vec![vec![false; self.0.len()]; n_aps];
        for (ue, &ap) in self.0.iter().enumerate() {
            m[ap][ue] = true;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShareRule {
    /// Time share proportional to the required rate.
    #[default]
    DemandWeighted,
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityForm {
    /// Sum of log throughputs.
    #[default]
    Log,
    /// Sum of log(throughput / required rate).
    RateNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbConfig {
    pub share_rule: ShareRule,
    pub utility: UtilityForm,
    pub max_iters: usize,
    pub exhaustive_budget: u64,
}

impl Default for LbConfig {
    fn default() -> Self {
        Self {
            share_rule: ShareRule::DemandWeighted,
            utility: UtilityForm::Log,
            max_iters: 100,
            exhaustive_budget: 1_000_000,
        }
    }
}

/// Time shares of UEs attached to the same AP.
pub fn allocate_time_shares(rates: &[f64], rule: ShareRule) -> Vec<f64> {
    match rule {
        ShareRule::DemandWeighted => {
            let total: f64 = rates.iter().sum();
            rates.iter().map(|r| r / total).collect()
        }
        ShareRule::Equal => vec![1.0 / rates.len() as f64; rates.len()],
    }
}

/// Per-UE time share at its host; zero at every other AP.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn compute(assignment: &Assignment, rates: &[f64], n_aps: usize, rule: ShareRule) -> Self {
        let mut shares = Vec::new();
        let mut loads = Vec::new();
        shares_into(assignment.hosts(), rates, n_aps, rule, &mut loads, &mut shares);
        Self(shares)
    }

    pub fn shares(&self) -> &[f64] {
        &self.0
    }

    pub fn share(&self, ue: usize) -> f64 {
        self.0[ue]
    }

    /// Time-share matrix `rho[ap][ue]`.
    pub fn to_matrix(&self, assignment: &Assignment, n_aps: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.0.len()]; n_aps];
        for (ue, (&ap, &rho)) in assignment.hosts().iter().zip(&self.0).enumerate() {
            m[ap][ue] = rho;
        }
        m
    }
}

/// Writes each UE's time share into `shares`, using `loads` as per-AP scratch.
pub fn shares_into(
    hosts: &[usize],
    rates: &[f64],
    n_aps: usize,
    rule: ShareRule,
    loads: &mut Vec<f64>,
    shares: &mut Vec<f64>,
) {
    loads.clear();
    loads.resize(n_aps, 0.0);
    for (&ap, &r) in hosts.iter().zip(rates) {
        loads[ap] += match rule {
            ShareRule::DemandWeighted => r,
            ShareRule::Equal => 1.0,
        };
    }
    shares.clear();
    shares.extend(hosts.iter().zip(rates).map(|(&ap, &r)| match rule {
        ShareRule::DemandWeighted => r / loads[ap],
        ShareRule::Equal => 1.0 / loads[ap],
    }));
}

pub fn throughputs(assignment: &Assignment, allocation: &Allocation, table: &LinkTable) -> Vec<f64> {
    assignment
        .hosts()
        .iter()
        .zip(allocation.shares())
        .enumerate()
        .map(|(ue, (&ap, &rho))| rho * table.capacity(ap, ue))
        .collect()
}

#[inline]
fn utility_term(throughput: f64, rate: f64, form: UtilityForm) -> f64 {
    let t = throughput.max(UTILITY_FLOOR_BPS).ln();
    match form {
        UtilityForm::Log => t,
        UtilityForm::RateNormalized => t - rate.ln(),
    }
}

/// Proportional-fair utility of an assignment under the configured share rule.
pub fn pf_utility(assignment: &Assignment, table: &LinkTable, rates: &[f64], config: &LbConfig) -> f64 {
    let mut loads = Vec::new();
    pf_utility_with(assignment.hosts(), table, rates, config, &mut loads)
}

pub(crate) fn pf_utility_with(
    hosts: &[usize],
    table: &LinkTable,
    rates: &[f64],
    config: &LbConfig,
    loads: &mut Vec<f64>,
) -> f64 {
    loads.clear();
    loads.resize(table.n_aps(), 0.0);
    for (&ap, &r) in hosts.iter().zip(rates) {
        loads[ap] += match config.share_rule {
            ShareRule::DemandWeighted => r,
            ShareRule::Equal => 1.0,
        };
    }
    hosts
        .iter()
        .zip(rates)
        .enumerate()
        .map(|(ue, (&ap, &r))| {
            let rho = match config.share_rule {
                ShareRule::DemandWeighted => r / loads[ap],
                ShareRule::Equal => 1.0 / loads[ap],
            };
            utility_term(rho * table.capacity(ap, ue), r, config.utility)
        })
        .sum()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn sss_select(snr: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in snr.iter().enumerate().skip(1) {
        if *v > snr[best] {
            best = i;
        }
    }
    best
}

/// SSS host of every UE in the table.
pub fn sss_assignment(table: &LinkTable) -> Assignment {
    Assignment((0..table.n_ues()).map(|ue| sss_select_row(table, ue)).collect())
}

pub(crate) fn sss_select_row(table: &LinkTable, ue: usize) -> usize {
    let row = table.row(ue);
    let mut best = 0;
    for (i, s) in row.iter().enumerate().skip(1) {
        if s.snr_db > row[best].snr_db {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sss_examples() {
        let mut v = vec![1.0; 17];
        v[6] = 9.0;
        assert_eq!(sss_select(&v) + 1, 7);
        assert_eq!(sss_select(&[3.0; 17]), 0);
    }

    #[test]
    fn time_share_examples() {
        assert_eq!(allocate_time_shares(&[5e6], ShareRule::DemandWeighted), vec![1.0]);
        assert_eq!(allocate_time_shares(&[100.0, 300.0], ShareRule::DemandWeighted), vec![0.25, 0.75]);
        for s in allocate_time_shares(&[7.0; 4], ShareRule::DemandWeighted) {
            assert_relative_eq!(s, 0.25);
        }
        assert_eq!(allocate_time_shares(&[1.0, 9.0], ShareRule::Equal), vec![0.5, 0.5]);
    }

    #[test]
    fn single_ue_utility_is_log_capacity() {
        let t = LinkTable::from_capacities(&[vec![5e7, 2e7]]);
        let a = Assignment::new(vec![0]);
        assert_relative_eq!(pf_utility(&a, &t, &[1e6], &LbConfig::default()), 5e7f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn three_ue_hand_computed_utility() {
        // Capacities (bit/s) of UEs 0..3 to APs 0..2.
        let t = LinkTable::from_capacities(&[vec![100.0, 40.0], vec![80.0, 60.0], vec![10.0, 90.0]]);
        let a = Assignment::new(vec![0, 0, 1]);
        let rates = [1.0, 3.0, 2.0];
        // AP 0 splits 1:3, AP 1 serves UE 2 alone.
        let expected = (100.0f64 * 0.25).ln() + (80.0f64 * 0.75).ln() + 90.0f64.ln();
        assert_relative_eq!(pf_utility(&a, &t, &rates, &LbConfig::default()), expected, max_relative = 1e-14);
        let eq = LbConfig { share_rule: ShareRule::Equal, ..LbConfig::default() };
        let expected_eq = 50.0f64.ln() + 40.0f64.ln() + 90.0f64.ln();
        assert_relative_eq!(pf_utility(&a, &t, &rates, &eq), expected_eq, max_relative = 1e-14);
        let norm = LbConfig { utility: UtilityForm::RateNormalized, ..LbConfig::default() };
        let expected_norm = 25.0f64.ln() + (60.0f64 / 3.0).ln() + (90.0f64 / 2.0).ln();
        assert_relative_eq!(pf_utility(&a, &t, &rates, &norm), expected_norm, max_relative = 1e-14);
    }

    #[test]
    fn moving_to_idle_ap_increases_utility() {
        let t = LinkTable::from_capacities(&[vec![1e8, 1e8], vec![1e8, 1e8], vec![1e8, 1e8]]);
        let rates = [1e6; 3];
        let crowded = Assignment::new(vec![0, 0, 0]);
        let spread = Assignment::new(vec![0, 0, 1]);
        let cfg = LbConfig::default();
        assert!(pf_utility(&spread, &t, &rates, &cfg) > pf_utility(&crowded, &t, &rates, &cfg));
    }

    #[test]
    fn zero_capacity_hits_floor() {
        let t = LinkTable::from_capacities(&[vec![0.0]]);
        let u = pf_utility(&Assignment::new(vec![0]), &t, &[1.0], &LbConfig::default());
        assert_eq!(u, UTILITY_FLOOR_BPS.ln());
    }

    #[test]
    fn allocation_matrix_rows_sum_to_one() {
        let a = Assignment::new(vec![2, 0, 2, 2]);
        let rates = [1.0, 2.0, 3.0, 4.0];
        let alloc = Allocation::compute(&a, &rates, 3, ShareRule::DemandWeighted);
        let m = alloc.to_matrix(&a, 3);
        assert_relative_eq!(m[0].iter().sum::<f64>(), 1.0);
        assert_eq!(m[1].iter().sum::<f64>(), 0.0);
        assert_relative_eq!(m[2].iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }
}
