use std::time::{Duration, Instant};

use super::{pf_utility_with, utility_term, Allocation, Assignment, LbConfig, ShareRule};
use crate::channel::LinkTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    /// Full round-robin passes over the UEs.
    pub iterations: usize,
    pub runtime: Duration,
    pub utility: f64,
    pub converged: bool,
}

fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-12 * incumbent.abs().max(1.0)
}

fn check_shapes(table: &LinkTable, rates: &[f64]) -> Result<()> {
    if rates.len() != table.n_ues() {
        return Err(Error::Shape { expected: table.n_ues(), got: rates.len() });
    }
    if rates.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("required rates must be positive".into()));
    }
    Ok(())
}

/// Round-robin best response: UEs in ascending order each move to the AP
/// that maximizes the global utility with everyone else held fixed, and only
/// when that is a strict improvement. Once a pass makes no move, one
/// ejection pass runs (see [`ejection_pass`]). Stops after a pass in which
/// neither kind of change happens, or after `config.max_iters` passes.
pub fn gt_best_response_solve(
    table: &LinkTable,
    rates: &[f64],
    initial: &Assignment,
    config: &LbConfig,
) -> Result<(Assignment, Allocation, SolverStats)> {
    check_shapes(table, rates)?;
    if initial.n_ues() != table.n_ues() {
        return Err(Error::Shape { expected: table.n_ues(), got: initial.n_ues() });
    }
    initial.validate(table.n_aps())?;
    if config.max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let start = Instant::now();
    let n_aps = table.n_aps();
    let mut hosts = initial.hosts().to_vec();
    let mut loads = Vec::with_capacity(n_aps);
    let mut utility = pf_utility_with(&hosts, table, rates, config, &mut loads);
    let mut iterations = 0;
    let mut converged = hosts.is_empty();
    while !converged && iterations < config.max_iters {
        iterations += 1;
        let mut changed = false;
        for ue in 0..hosts.len() {
            let current = hosts[ue];
            let (mut best, mut best_u) = (current, utility);
            for ap in (0..n_aps).filter(|&ap| ap != current) {
                hosts[ue] = ap;
                let u = pf_utility_with(&hosts, table, rates, config, &mut loads);
                if improves(u, best_u) {
                    best = ap;
                    best_u = u;
                }
            }
            hosts[ue] = best;
            if best != current {
                changed = true;
                utility = best_u;
            }
        }
        if !changed && ejection_pass(&mut hosts, table, rates, config, utility) {
            changed = true;
            utility = pf_utility_with(&hosts, table, rates, config, &mut loads);
        }
        converged = !changed;
    }
    let assignment = Assignment::new(hosts);
    let allocation = Allocation::compute(&assignment, rates, n_aps, config.share_rule);
    let stats = SolverStats { iterations, runtime: start.elapsed(), utility, converged };
    Ok((assignment, allocation, stats))
}

/// Incremental utility bookkeeping for compound moves.
struct Moves<'a> {
    table: &'a LinkTable,
    rates: &'a [f64],
    config: &'a LbConfig,
    loads: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl<'a> Moves<'a> {
    fn new(hosts: &[usize], table: &'a LinkTable, rates: &'a [f64], config: &'a LbConfig) -> Self {
        let mut m =
            Self { table, rates, config, loads: vec![0.0; table.n_aps()], members: vec![Vec::new(); table.n_aps()] };
        for (k, &ap) in hosts.iter().enumerate() {
            m.loads[ap] += m.weight(k);
            m.members[ap].push(k);
        }
        m
    }

    fn weight(&self, k: usize) -> f64 {
        match self.config.share_rule {
            ShareRule::DemandWeighted => self.rates[k],
            ShareRule::Equal => 1.0,
        }
    }

    fn term(&self, k: usize, ap: usize, load: f64) -> f64 {
        utility_term(self.weight(k) / load * self.table.capacity(ap, k), self.rates[k], self.config.utility)
    }

    /// Utility change if every `(ue, from, to)` in `moves` happens at once.
    fn delta(&self, moves: &[(usize, usize, usize)]) -> f64 {
        let mut touched = [usize::MAX; 4];
        let mut n = 0;
        for &(_, from, to) in moves {
            for ap in [from, to] {
                if !touched[..n].contains(&ap) {
                    touched[n] = ap;
                    n += 1;
                }
            }
        }
        let mut d = 0.0;
        for &ap in &touched[..n] {
            let mut load = self.loads[ap];
            for &(k, from, to) in moves {
                if from == ap {
                    load -= self.weight(k);
                }
                if to == ap {
                    load += self.weight(k);
                }
            }
            for &i in &self.members[ap] {
                d -= self.term(i, ap, self.loads[ap]);
                if !moves.iter().any(|m| m.0 == i) {
                    d += self.term(i, ap, load);
                }
            }
            for &(k, _, to) in moves {
                if to == ap {
                    d += self.term(k, ap, load);
                }
            }
        }
        d
    }

    fn apply(&mut self, hosts: &mut [usize], moves: &[(usize, usize, usize)]) {
        for &(k, from, to) in moves {
            let w = self.weight(k);
            self.loads[from] -= w;
            self.loads[to] += w;
            self.members[from].retain(|&i| i != k);
            self.members[to].push(k);
            hosts[k] = to;
        }
    }
}

/// Ejection pass: UE `j` moves to AP `b` and one UE already on `b` is
/// re-homed anywhere else (back to `j`'s AP makes a swap). Per UE the best
/// such pair is taken when it strictly raises the utility. Unilateral moves
/// alone stall when a cell is held by the wrong UE.
fn ejection_pass(hosts: &mut [usize], table: &LinkTable, rates: &[f64], config: &LbConfig, utility: f64) -> bool {
    let n_aps = table.n_aps();
    let mut m = Moves::new(hosts, table, rates, config);
    let mut changed = false;
    for j in 0..hosts.len() {
        let a = hosts[j];
        let mut best: Option<([(usize, usize, usize); 2], f64)> = None;
        for b in (0..n_aps).filter(|&b| b != a) {
            for &k in &m.members[b] {
                for c in (0..n_aps).filter(|&c| c != b) {
                    let moves = [(j, a, b), (k, b, c)];
                    let d = m.delta(&moves);
                    // Same tolerance as a unilateral move at this utility.
                    if improves(utility + d, utility + best.map_or(0.0, |x| x.1)) {
                        best = Some((moves, d));
                    }
                }
            }
        }
        if let Some((moves, _)) = best {
            m.apply(hosts, &moves);
            changed = true;
        }
    }
    changed
}

/// Globally optimal assignment by enumeration; refuses instances with more
/// than `config.exhaustive_budget` assignments.
pub fn exhaustive_solve(table: &LinkTable, rates: &[f64], config: &LbConfig) -> Result<(Assignment, f64)> {
    check_shapes(table, rates)?;
    let (n_aps, n_ues) = (table.n_aps(), table.n_ues());
    let size = (n_aps as f64).powi(n_ues as i32);
    if size > config.exhaustive_budget as f64 || n_aps == 0 {
        return Err(Error::Budget { size, budget: config.exhaustive_budget });
    }
    let mut hosts = vec![0; n_ues];
    let mut loads = Vec::with_capacity(n_aps);
    let mut best = (hosts.clone(), pf_utility_with(&hosts, table, rates, config, &mut loads));
    loop {
        // Odometer increment, last UE fastest.
        let mut k = n_ues;
        loop {
            if k == 0 {
                return Ok((Assignment::new(best.0), best.1));
            }
            k -= 1;
            hosts[k] += 1;
            if hosts[k] < n_aps {
                break;
            }
            hosts[k] = 0;
        }
        let u = pf_utility_with(&hosts, table, rates, config, &mut loads);
        if u > best.1 {
            best = (hosts.clone(), u);
        }
    }
}

/// Best AP for one UE with every other UE's host fixed, evaluated through
/// per-AP utility differences. Equivalent to maximizing `pf_utility` over the
/// UE's host; stays on the current host unless another AP is strictly better.
pub fn best_response(table: &LinkTable, rates: &[f64], hosts: &[usize], ue: usize, config: &LbConfig) -> usize {
    let caps: Vec<f64> = table.row(ue).iter().map(|s| s.capacity_bps).collect();
    BrContext::new(table, rates, hosts, ue, config).decide(&caps, hosts[ue])
}

/// Best-response state of one UE against a fixed background: the other
/// UEs' hosts, rates and link capacities. Only the UE's own capacities vary
/// between calls to `decide`.
#[derive(Debug, Clone)]
pub struct BrContext {
    rate: f64,
    weight: f64,
    form: super::UtilityForm,
    /// Load of every AP after the UE joins it.
    after: Vec<f64>,
    /// Utility change of the UE's co-users if it joins each AP.
    background: Vec<f64>,
}

impl BrContext {
    pub fn new(table: &LinkTable, rates: &[f64], hosts: &[usize], ue: usize, config: &LbConfig) -> Self {
        let n_aps = table.n_aps();
        let weight = |k: usize| match config.share_rule {
            ShareRule::DemandWeighted => rates[k],
            ShareRule::Equal => 1.0,
        };
        let mut loads = vec![0.0; n_aps];
        for (k, &ap) in hosts.iter().enumerate() {
            if k != ue {
                loads[ap] += weight(k);
            }
        }
        let w = weight(ue);
        let mut background = vec![0.0; n_aps];
        for (k, &ap) in hosts.iter().enumerate() {
            if k == ue {
                continue;
            }
            let (before, after) = (loads[ap], loads[ap] + w);
            let c = weight(k) * table.capacity(ap, k);
            background[ap] +=
                utility_term(c / after, rates[k], config.utility) - utility_term(c / before, rates[k], config.utility);
        }
        Self {
            rate: rates[ue],
            weight: w,
            form: config.utility,
            after: loads.iter().map(|l| l + w).collect(),
            background,
        }
    }

    /// Time share the UE would get at `ap`.
    pub fn share(&self, ap: usize) -> f64 {
        self.weight / self.after[ap]
    }

    /// Best AP given the UE's capacities to every AP.
    pub fn decide(&self, capacities: &[f64], current: usize) -> usize {
        let gain =
            |ap: usize| self.background[ap] + utility_term(self.share(ap) * capacities[ap], self.rate, self.form);
        let mut best = current;
        let mut best_gain = gain(current);
        for ap in 0..self.after.len() {
            if ap == current {
                continue;
            }
            let g = gain(ap);
            if improves(g, best_gain) {
                best = ap;
                best_gain = g;
            }
        }
        best
    }
}
