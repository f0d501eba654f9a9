//! Held-decision versus ideal-reference throughput over one decision window.
//!
//! Everything except the target UE is frozen for the window: the other UEs
//! keep their hosts, so the target's time share at any AP is fixed, and only
//! the target's own channel varies as it moves.

use rand::Rng;

use crate::channel::{ChannelModel, LinkState};
use crate::error::{Error, Result};
use crate::loadbalance::BrContext;
use crate::mobility::{MobilityConfig, MotionState};
use crate::topology::RoomGeometry;

/// A UE whose capacity to every AP can be sampled as it moves.
pub trait Trajectory {
    fn capacities(&mut self, out: &mut [f64]);
    fn advance(&mut self, dt: f64);
}

/// A UE moving under a mobility model in a channel model.
pub struct MovingUe<'a, R> {
    pub model: &'a ChannelModel,
    pub mobility: &'a MobilityConfig,
    pub room: &'a RoomGeometry,
    pub shadow_db: f64,
    pub state: MotionState,
    pub rng: R,
    row: Vec<LinkState>,
}

impl<'a, R: Rng> MovingUe<'a, R> {
    pub fn new(
        model: &'a ChannelModel,
        mobility: &'a MobilityConfig,
        room: &'a RoomGeometry,
        shadow_db: f64,
        state: MotionState,
        rng: R,
    ) -> Self {
        Self { model, mobility, room, shadow_db, state, rng, row: vec![LinkState::default(); model.n_aps()] }
    }
}

impl<R: Rng> Trajectory for MovingUe<'_, R> {
    fn capacities(&mut self, out: &mut [f64]) {
        self.model.link_row(&self.state.position(self.mobility.ue_height_m), self.shadow_db, &mut self.row);
        for (o, s) in out.iter_mut().zip(&self.row) {
            *o = s.capacity_bps;
        }
    }

    fn advance(&mut self, dt: f64) {
        self.state.advance(dt, self.mobility, self.room, &mut self.rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub tick_s: f64,
    /// Re-decision period of the ideal reference.
    pub ideal_dt_s: f64,
    pub horizon_s: f64,
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tick_s > 0.0 && self.ideal_dt_s >= self.tick_s && self.horizon_s >= self.ideal_dt_s) {
            return Err(Error::Config(format!("need 0 < tick <= ideal_dt <= horizon, got {self:?}")));
        }
        let r = self.ideal_dt_s / self.tick_s;
        if (r - r.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "ideal_dt_s {} is not a multiple of tick_s {}",
                self.ideal_dt_s, self.tick_s
            )));
        }
        Ok(())
    }

    fn ticks(&self, t: f64) -> usize {
        (t / self.tick_s).round() as usize
    }
}

/// Cumulative delivered bits of the held decision and of the ideal
/// reference, one entry per tick boundary (entry 0 is the window start).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowTrace {
    pub spec: WindowSpec,
    held: Vec<f64>,
    ideal: Vec<f64>,
    /// Ideal host chosen at the start of every reference window.
    pub ideal_hosts: Vec<usize>,
}

impl WindowTrace {
    fn ticks_per_window(&self) -> usize {
        self.spec.ticks(self.spec.ideal_dt_s)
    }

    fn checked_ticks(&self, n: usize) -> usize {
        assert!(n < self.held.len(), "window of {n} ticks exceeds the simulated horizon");
        n
    }

    /// Average throughput of the decision held over `[0, t]`.
    pub fn held_average(&self, t: f64) -> f64 {
        let n = self.checked_ticks(self.spec.ticks(t));
        self.held[n] / (n as f64 * self.spec.tick_s)
    }

    /// Number of whole reference windows inside `t`.
    pub fn reference_windows(&self, t: f64) -> usize {
        ((t / self.spec.ideal_dt_s) + 1e-9).floor() as usize
    }

    /// Mean over the first `t / ideal_dt` (integer division) reference windows.
    pub fn ideal_average(&self, t: f64) -> f64 {
        let n = self.checked_ticks(self.reference_windows(t) * self.ticks_per_window());
        self.ideal[n] / (n as f64 * self.spec.tick_s)
    }

    /// Whether holding the decision for `t` keeps throughput within the
    /// degradation budget of the reference.
    pub fn satisfies(&self, t: f64, budget: f64) -> bool {
        self.held_average(t) >= (1.0 - budget) * self.ideal_average(t)
    }

    /// Relative shortfall of the held decision; negative when it beats the reference.
    pub fn gap(&self, t: f64) -> f64 {
        let ideal = self.ideal_average(t);
        if ideal > 0.0 {
            1.0 - self.held_average(t) / ideal
        } else {
            0.0
        }
    }
}

/// Simulates a window starting with the target attached to `decision`.
/// `context` carries the frozen background; the ideal reference re-decides
/// with it every `ideal_dt_s`.
pub fn evaluate_window(
    trajectory: &mut impl Trajectory,
    context: &BrContext,
    n_aps: usize,
    decision: usize,
    spec: WindowSpec,
) -> Result<WindowTrace> {
    spec.validate()?;
    let n_ticks = spec.ticks(spec.horizon_s);
    let per_window = spec.ticks(spec.ideal_dt_s);
    let mut caps = vec![0.0; n_aps];
    let mut held = Vec::with_capacity(n_ticks + 1);
    let mut ideal = Vec::with_capacity(n_ticks + 1);
    let mut ideal_hosts = Vec::with_capacity(n_ticks / per_window + 1);
    held.push(0.0);
    ideal.push(0.0);
    let held_share = context.share(decision);
    let mut host = decision;
    for n in 0..n_ticks {
        trajectory.capacities(&mut caps);
        if n % per_window == 0 {
            host = context.decide(&caps, host);
            ideal_hosts.push(host);
        }
        held.push(held[n] + held_share * caps[decision] * spec.tick_s);
        ideal.push(ideal[n] + context.share(host) * caps[host] * spec.tick_s);
        trajectory.advance(spec.tick_s);
    }
    Ok(WindowTrace { spec, held, ideal, ideal_hosts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanRule {
    /// Largest grid point before the first violation.
    #[default]
    FirstViolation,
    /// Largest grid point that satisfies the budget anywhere on the grid.
    GlobalMax,
}

/// Interval label from a window trace: candidates are multiples of the
/// reference period from `min_s` to `max_s`.
pub fn scan_label(trace: &WindowTrace, budget: f64, min_s: f64, max_s: f64, rule: ScanRule) -> f64 {
    let dt = trace.spec.ideal_dt_s;
    let first = (min_s / dt).round().max(1.0) as usize;
    let last = (max_s / dt).round() as usize;
    let mut label = first;
    for g in first..=last {
        let ok = trace.satisfies(g as f64 * dt, budget);
        match rule {
            ScanRule::FirstViolation if !ok => break,
            _ if ok => label = g,
            _ => {}
        }
    }
    label as f64 * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkTable;
    use crate::loadbalance::LbConfig;
    use approx::assert_relative_eq;

    /// Capacities given as a function of time.
    struct Scripted<F> {
        t: f64,
        f: F,
    }

    impl<F: Fn(f64, &mut [f64])> Trajectory for Scripted<F> {
        fn capacities(&mut self, out: &mut [f64]) {
            (self.f)(self.t, out)
        }
        fn advance(&mut self, dt: f64) {
            self.t += dt;
        }
    }

    fn lone_context(n_aps: usize) -> BrContext {
        let table = LinkTable::from_capacities(&[vec![0.0; n_aps]]);
        BrContext::new(&table, &[1e7], &[0], 0, &LbConfig::default())
    }

    fn spec(horizon_s: f64) -> WindowSpec {
        WindowSpec { tick_s: 1e-3, ideal_dt_s: 1e-2, horizon_s }
    }

    #[test]
    fn constant_channel_gives_instantaneous_throughput() {
        let mut tr = Scripted { t: 0.0, f: |_: f64, o: &mut [f64]| o.copy_from_slice(&[5e7, 1e7]) };
        let w = evaluate_window(&mut tr, &lone_context(2), 2, 0, spec(2.0)).unwrap();
        assert_relative_eq!(w.held_average(0.73), 5e7, max_relative = 1e-12);
        assert_relative_eq!(w.ideal_average(2.0), 5e7, max_relative = 1e-12);
        assert_eq!(scan_label(&w, 0.05, 0.01, 2.0, ScanRule::FirstViolation), 2.0);
    }

    #[test]
    fn ramp_averages_to_half() {
        let mut tr = Scripted { t: 0.0, f: |t: f64, o: &mut [f64]| o[0] = 8e7 * t };
        let w = evaluate_window(&mut tr, &lone_context(1), 1, 0, spec(1.0)).unwrap();
        assert_relative_eq!(w.held_average(1.0), 4e7, max_relative = 2e-3);
    }

    #[test]
    fn reference_uses_whole_windows() {
        let mut tr = Scripted { t: 0.0, f: |_: f64, o: &mut [f64]| o[0] = 1.0 };
        let w = evaluate_window(&mut tr, &lone_context(1), 1, 0, spec(0.2)).unwrap();
        assert_eq!(w.reference_windows(0.095), 9);
        assert_eq!(w.reference_windows(0.1), 10);
    }

    #[test]
    fn crossing_is_caught_by_reference() {
        // AP 0 fades out, AP 1 fades in at t = 0.3 s.
        let f = |t: f64, o: &mut [f64]| {
            o[0] = if t < 0.3 { 1e8 } else { 1e6 };
            o[1] = if t < 0.3 { 1e6 } else { 1e8 };
        };
        let mut tr = Scripted { t: 0.0, f };
        let w = evaluate_window(&mut tr, &lone_context(2), 2, 0, spec(2.0)).unwrap();
        assert_eq!(w.ideal_hosts[0], 0);
        assert_eq!(*w.ideal_hosts.last().unwrap(), 1);
        let label = scan_label(&w, 0.05, 0.01, 2.0, ScanRule::FirstViolation);
        // Held average drops below 95% of the reference shortly after 0.3 s.
        assert!((0.3..0.33).contains(&label), "{label}");
        assert!(w.gap(1.0) > 0.5);
    }

    #[test]
    fn global_max_can_exceed_first_violation() {
        // Short dip on the held AP, later recovery.
        let f = |t: f64, o: &mut [f64]| {
            o[0] = if (0.1..0.2).contains(&t) { 1e6 } else { 1e8 };
            o[1] = 5e7;
        };
        let mut tr = Scripted { t: 0.0, f };
        let w = evaluate_window(&mut tr, &lone_context(2), 2, 0, spec(2.0)).unwrap();
        let first = scan_label(&w, 0.05, 0.01, 2.0, ScanRule::FirstViolation);
        let global = scan_label(&w, 0.05, 0.01, 2.0, ScanRule::GlobalMax);
        assert!(first < 0.2 && global == 2.0, "{first} {global}");
    }

    #[test]
    fn bad_spec_rejected() {
        let ctx = lone_context(1);
        let mut tr = Scripted { t: 0.0, f: |_: f64, o: &mut [f64]| o[0] = 1.0 };
        let s = WindowSpec { tick_s: 3e-3, ideal_dt_s: 1e-2, horizon_s: 1.0 };
        assert!(evaluate_window(&mut tr, &ctx, 1, 0, s).is_err());
    }
}
