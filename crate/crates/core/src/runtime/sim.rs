use std::time::Instant;

use super::{DecisionEngine, GapWindow, IntervalPolicy, Lag, NetworkSolver, Scenario, SimConfig, SimMetrics};
use crate::channel::{ChannelModel, LinkTable};
use crate::error::{Error, Result};
use crate::loadbalance::{gt_best_response_solve, shares_into, sss_assignment, BrContext, LbConfig};
use crate::mobility::{MobilityConfig, MotionState};
use crate::msnn::{evaluate_window, MovingUe, MsnnInput, WindowSpec};
use crate::rng::SimRng;
use crate::topology::NetworkTopology;

/// Read-only inputs shared by every run.
#[derive(Debug, Clone, Copy)]
pub struct SimContext<'a> {
    pub topology: &'a NetworkTopology,
    pub model: &'a ChannelModel,
    pub mobility: &'a MobilityConfig,
    pub lb: &'a LbConfig,
    pub sim: &'a SimConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsOptions {
    pub lag: Lag,
    /// Decisions of UEs `0..track_gaps` are scored against the ideal reference.
    pub track_gaps: usize,
    pub ideal_dt_s: f64,
}

impl Default for MsOptions {
    fn default() -> Self {
        Self { lag: Lag::None, track_gaps: 0, ideal_dt_s: 0.01 }
    }
}

enum Pending {
    Ue(usize, usize),
    All(Vec<usize>),
}

struct Sim<'a> {
    cx: SimContext<'a>,
    motion: Vec<MotionState>,
    rngs: Vec<SimRng>,
    rates: Vec<f64>,
    shadows: Vec<f64>,
    table: LinkTable,
    hosts: Vec<usize>,
    outage_until: Vec<f64>,
    bits: Vec<f64>,
    loads: Vec<f64>,
    shares: Vec<f64>,
    per_ap: Vec<f64>,
    /// Decisions waiting for their lag to elapse, ordered by apply time.
    pending: Vec<(f64, Pending)>,
    metrics: SimMetrics,
    tick: usize,
}

impl<'a> Sim<'a> {
    /// Starts every scheme from one network-wide solve at t = 0.
    fn new(cx: SimContext<'a>, scenario: &Scenario) -> Result<Self> {
        cx.sim.validate()?;
        if scenario.is_empty() {
            return Err(Error::Domain("scenario has no UEs".into()));
        }
        let p = &scenario.population;
        let n = p.len();
        let table = p.link_table(cx.model, cx.mobility.ue_height_m);
        let start = Instant::now();
        let (a, _, _) = gt_best_response_solve(&table, &p.rates, &sss_assignment(&table), cx.lb)?;
        let metrics = SimMetrics {
            per_ue_throughput_bps: vec![0.0; n],
            update_times_s: vec![Vec::new(); n],
            intervals_s: vec![Vec::new(); n],
            solver_runtime_s: vec![start.elapsed().as_secs_f64()],
            ..SimMetrics::default()
        };
        Ok(Self {
            cx,
            motion: p.motion.clone(),
            rngs: scenario.rngs.clone(),
            rates: p.rates.clone(),
            shadows: p.shadows_db.clone(),
            table,
            hosts: a.hosts().to_vec(),
            outage_until: vec![f64::NEG_INFINITY; n],
            bits: vec![0.0; n],
            loads: Vec::new(),
            shares: Vec::new(),
            per_ap: Vec::new(),
            pending: Vec::new(),
            metrics,
            tick: 0,
        })
    }

    fn n_ues(&self) -> usize {
        self.rates.len()
    }

    fn now(&self) -> f64 {
        self.tick as f64 * self.cx.sim.tick_s
    }

    fn eps(&self) -> f64 {
        0.5 * self.cx.sim.tick_s
    }

    fn refresh(&mut self) {
        let h = self.cx.mobility.ue_height_m;
        let positions: Vec<_> = self.motion.iter().map(|m| m.position(h)).collect();
        self.table.refresh(self.cx.model, &positions, &self.shadows);
    }

    fn set_host(&mut self, ue: usize, ap: usize) {
        let old = self.hosts[ue];
        if old == ap {
            return;
        }
        if self.cx.model.kind(old) == self.cx.model.kind(ap) {
            self.metrics.hho += 1;
        } else {
            self.metrics.vho += 1;
        }
        self.hosts[ue] = ap;
        self.outage_until[ue] = self.now() + self.cx.sim.handover_outage_s;
    }

    fn apply(&mut self, p: Pending) {
        match p {
            Pending::Ue(ue, ap) => self.set_host(ue, ap),
            Pending::All(hosts) => {
                for (ue, ap) in hosts.into_iter().enumerate() {
                    self.set_host(ue, ap);
                }
            }
        }
    }

    fn schedule(&mut self, delay_s: f64, p: Pending) {
        if delay_s <= 0.0 {
            self.apply(p);
            return;
        }
        let at = self.now() + delay_s;
        let i = self.pending.partition_point(|e| e.0 <= at);
        self.pending.insert(i, (at, p));
    }

    fn apply_due(&mut self) {
        let limit = self.now() + self.eps();
        let due = self.pending.partition_point(|e| e.0 <= limit);
        let ready: Vec<_> = self.pending.drain(..due).collect();
        for (_, p) in ready {
            self.apply(p);
        }
    }

    /// Adds one tick of throughput under the current attachment.
    fn accumulate(&mut self) {
        let n_aps = self.table.n_aps();
        shares_into(&self.hosts, &self.rates, n_aps, self.cx.lb.share_rule, &mut self.loads, &mut self.shares);
        self.per_ap.clear();
        self.per_ap.resize(n_aps, 0.0);
        for (&ap, &s) in self.hosts.iter().zip(&self.shares) {
            self.per_ap[ap] += s;
        }
        for &s in &self.per_ap {
            if s != 0.0 {
                self.metrics.max_share_error = self.metrics.max_share_error.max((s - 1.0).abs());
            }
        }
        let t = self.now();
        let dt = self.cx.sim.tick_s;
        for ue in 0..self.n_ues() {
            if t + self.eps() < self.outage_until[ue] {
                continue;
            }
            self.bits[ue] += self.shares[ue] * self.table.capacity(self.hosts[ue], ue) * dt;
        }
    }

    fn advance(&mut self) {
        let (dt, mob, room) = (self.cx.sim.tick_s, self.cx.mobility, &self.cx.topology.room);
        for (m, r) in self.motion.iter_mut().zip(self.rngs.iter_mut()) {
            m.advance(dt, mob, room, r);
        }
        self.tick += 1;
    }

    /// Gap of UE `ue` holding `decision` for `interval_s` against re-deciding
    /// every `ideal_dt_s`, everyone else frozen.
    fn window_gap(&self, ue: usize, decision: usize, interval_s: f64, ideal_dt_s: f64) -> Result<GapWindow> {
        let context = BrContext::new(&self.table, &self.rates, &self.hosts, ue, self.cx.lb);
        let mut traj = MovingUe::new(
            self.cx.model,
            self.cx.mobility,
            &self.cx.topology.room,
            self.shadows[ue],
            self.motion[ue],
            self.rngs[ue].clone(),
        );
        let tick = self.cx.sim.tick_s;
        let horizon = ((interval_s / tick - 1e-9).ceil() * tick).max(ideal_dt_s);
        let spec = WindowSpec { tick_s: tick, ideal_dt_s, horizon_s: horizon };
        let trace = evaluate_window(&mut traj, &context, self.table.n_aps(), decision, spec)?;
        Ok(GapWindow {
            ue,
            duration_s: interval_s,
            held_bps: trace.held_average(interval_s),
            ideal_bps: trace.ideal_average(interval_s),
        })
    }

    fn finish(mut self) -> SimMetrics {
        let horizon = self.tick as f64 * self.cx.sim.tick_s;
        self.metrics.per_ue_throughput_bps = self.bits.iter().map(|b| b / horizon).collect();
        self.metrics.network_throughput_bps = self.metrics.per_ue_throughput_bps.iter().sum();
        self.metrics
    }
}

/// User-centric loop: each UE is re-decided at its own next-update instant
/// and schedules the following one from the interval policy, evaluated
/// against its new host.
pub fn run_ms_atcnn(
    cx: SimContext<'_>,
    scenario: &Scenario,
    engine: &dyn DecisionEngine,
    policy: &dyn IntervalPolicy,
    options: MsOptions,
) -> Result<SimMetrics> {
    let mut sim = Sim::new(cx, scenario)?;
    let n = sim.n_ues();
    let mut next = vec![0.0; n];
    for _ in 0..cx.sim.n_ticks() {
        sim.refresh();
        sim.apply_due();
        let t = sim.now();
        for ue in 0..n {
            if next[ue] > t + sim.eps() {
                continue;
            }
            let start = Instant::now();
            let host = engine.decide(&sim.table, &sim.rates, &sim.hosts, ue)?;
            let ap = &cx.topology.aps[host];
            let input = MsnnInput::observe(cx.topology, &sim.table, ue, host, &sim.motion[ue]);
            let interval = policy.interval(ap.ap_type, &input)?;
            let elapsed = start.elapsed();
            if !(interval >= cx.sim.tick_s) {
                return Err(Error::Domain(format!("interval {interval} s is shorter than one tick")));
            }
            sim.metrics.solver_runtime_s.push(elapsed.as_secs_f64());
            sim.metrics.update_times_s[ue].push(t);
            sim.metrics.intervals_s[ue].push(interval);
            if ue < options.track_gaps {
                let window = sim.window_gap(ue, host, interval, options.ideal_dt_s)?;
                sim.metrics.gap_windows.push(window);
            }
            next[ue] += interval;
            sim.schedule(options.lag.seconds(elapsed), Pending::Ue(ue, host));
        }
        sim.accumulate();
        sim.advance();
    }
    Ok(sim.finish())
}

/// Network-wide solve every `interval_s`, the whole batch delayed by `lag`.
pub fn run_network_centric(
    cx: SimContext<'_>,
    scenario: &Scenario,
    solver: &dyn NetworkSolver,
    interval_s: f64,
    lag: Lag,
) -> Result<SimMetrics> {
    if !(interval_s >= cx.sim.tick_s) {
        return Err(Error::Config(format!("update interval {interval_s} s is shorter than one tick")));
    }
    let mut sim = Sim::new(cx, scenario)?;
    let n = sim.n_ues();
    for ue in 0..n {
        sim.metrics.update_times_s[ue].push(0.0);
        sim.metrics.intervals_s[ue].push(interval_s);
    }
    let mut next = interval_s;
    for _ in 0..cx.sim.n_ticks() {
        sim.refresh();
        sim.apply_due();
        let t = sim.now();
        if next <= t + sim.eps() {
            let start = Instant::now();
            let hosts = solver.solve(&sim.table, &sim.rates, &sim.hosts)?;
            let elapsed = start.elapsed();
            sim.metrics.solver_runtime_s.push(elapsed.as_secs_f64());
            for ue in 0..n {
                sim.metrics.update_times_s[ue].push(t);
                sim.metrics.intervals_s[ue].push(interval_s);
            }
            next += interval_s;
            sim.schedule(lag.seconds(elapsed), Pending::All(hosts));
        }
        sim.accumulate();
        sim.advance();
    }
    Ok(sim.finish())
}

/// Strongest-signal attachment with time-to-trigger: a handover executes
/// once the strongest AP has differed from the host for `ttt_s` without
/// interruption.
pub fn run_sss_ttt(cx: SimContext<'_>, scenario: &Scenario, ttt_s: f64) -> Result<SimMetrics> {
    if !(ttt_s >= 0.0) {
        return Err(Error::Config(format!("ttt must be >= 0, got {ttt_s}")));
    }
    let mut sim = Sim::new(cx, scenario)?;
    let n = sim.n_ues();
    let mut candidate: Vec<Option<(usize, f64)>> = vec![None; n];
    for _ in 0..cx.sim.n_ticks() {
        sim.refresh();
        let t = sim.now();
        for ue in 0..n {
            let row = sim.table.row(ue);
            let best = (1..row.len()).fold(0, |b, i| if row[i].snr_db > row[b].snr_db { i } else { b });
            if best == sim.hosts[ue] {
                candidate[ue] = None;
                continue;
            }
            let since = match candidate[ue] {
                Some((c, since)) if c == best => since,
                _ => {
                    candidate[ue] = Some((best, t));
                    t
                }
            };
            if t - since + sim.eps() >= ttt_s {
                sim.set_host(ue, best);
                candidate[ue] = None;
            }
        }
        sim.accumulate();
        sim.advance();
    }
    Ok(sim.finish())
}
