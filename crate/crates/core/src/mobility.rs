//! UE motion: random waypoint, Gauss-Markov and random walk on the room
//! footprint, plus the kinematic MSNN inputs (heading angle to the host AP,
//! speed).

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Point3, RoomGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilityModel {
    #[default]
    RandomWaypoint,
    GaussMarkov,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    pub model: MobilityModel,
    /// Mean speed. Random waypoint draws speeds uniformly on (0, 2 * mean].
    pub mean_speed_mps: f64,
    /// Gauss-Markov direction randomness: 0 keeps the previous velocity,
    /// 1 makes every update memoryless.
    pub gm_randomness: f64,
    pub gm_speed_variance: f64,
    pub gm_update_period_s: f64,
    pub rw_flight_length_m: f64,
    pub ue_height_m: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            model: MobilityModel::RandomWaypoint,
            mean_speed_mps: 2.0,
            gm_randomness: 0.8,
            gm_speed_variance: 1.0,
            gm_update_period_s: 1.0,
            rw_flight_length_m: 20.0,
            ue_height_m: 1.0,
        }
    }
}

impl MobilityConfig {
    pub fn v_max(&self) -> f64 {
        2.0 * self.mean_speed_mps
    }

    pub fn with_mean_speed(&self, mean_speed_mps: f64) -> Self {
        Self { mean_speed_mps, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_speed_mps.is_finite() && self.mean_speed_mps > 0.0) {
            return Err(Error::Config(format!("mean_speed_mps must be positive, got {}", self.mean_speed_mps)));
        }
        if !(0.0..=1.0).contains(&self.gm_randomness) {
            return Err(Error::Config(format!("gm_randomness must be in [0, 1], got {}", self.gm_randomness)));
        }
        if !(self.gm_speed_variance >= 0.0) || !(self.gm_update_period_s > 0.0) {
            return Err(Error::Config("Gauss-Markov variance must be >= 0 and update period > 0".into()));
        }
        if !(self.rw_flight_length_m > 0.0) {
            return Err(Error::Config(format!("rw_flight_length_m must be positive, got {}", self.rw_flight_length_m)));
        }
        if !(self.ue_height_m >= 0.0) {
            return Err(Error::Config(format!("ue_height_m must be >= 0, got {}", self.ue_height_m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotionState {
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    /// Direction of travel in [0, 2pi), counter-clockwise from +x.
    pub heading: f64,
    pub waypoint: (f64, f64),
    /// Gauss-Markov mean direction and time until the next velocity update.
    pub mean_heading: f64,
    pub until_update_s: f64,
    /// Random walk distance left in the current flight.
    pub flight_left_m: f64,
    /// Never moves.
    pub frozen: bool,
}

impl MotionState {
    /// Uniform initial position with model-specific initial velocity.
    pub fn spawn<R: Rng + ?Sized>(config: &MobilityConfig, room: &RoomGeometry, rng: &mut R) -> Self {
        let (x, y) = uniform_point(room, rng);
        let mut s = Self { x, y, ..Self::default() };
        match config.model {
            MobilityModel::RandomWaypoint => {
                s.speed = draw_rwp_speed(config.v_max(), rng);
                s.waypoint = uniform_point(room, rng);
                s.heading = bearing((x, y), s.waypoint);
            }
            MobilityModel::GaussMarkov => {
                s.speed = config.mean_speed_mps;
                s.heading = rng.gen::<f64>() * TAU;
                s.mean_heading = s.heading;
                s.until_update_s = config.gm_update_period_s;
            }
            MobilityModel::RandomWalk => {
                s.speed = config.mean_speed_mps;
                s.heading = rng.gen::<f64>() * TAU;
                s.flight_left_m = config.rw_flight_length_m;
            }
        }
        s
    }

    /// A motionless UE at the given position.
    pub fn stationary(x: f64, y: f64) -> Self {
        Self { x, y, waypoint: (x, y), frozen: true, ..Self::default() }
    }

    pub fn position(&self, height: f64) -> Point3 {
        Point3::new(self.x, self.y, height)
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, config: &MobilityConfig, room: &RoomGeometry, rng: &mut R) {
        if self.frozen {
            return;
        }
        match config.model {
            MobilityModel::RandomWaypoint => rwp_advance(self, dt, config.v_max(), room, rng),
            MobilityModel::GaussMarkov => gauss_markov_advance(self, dt, config, room, rng),
            MobilityModel::RandomWalk => random_walk_advance(self, dt, config, room, rng),
        }
    }
}

pub fn uniform_point<R: Rng + ?Sized>(room: &RoomGeometry, rng: &mut R) -> (f64, f64) {
    (rng.gen::<f64>() * room.length_m, rng.gen::<f64>() * room.width_m)
}

fn draw_rwp_speed<R: Rng + ?Sized>(v_max: f64, rng: &mut R) -> f64 {
    // gen() is in [0, 1), so this is in (0, v_max].
    v_max * (1.0 - rng.gen::<f64>())
}

fn bearing(from: (f64, f64), to: (f64, f64)) -> f64 {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        wrap_tau(dy.atan2(dx))
    }
}

fn wrap_tau(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

pub fn rwp_advance<R: Rng + ?Sized>(s: &mut MotionState, dt: f64, v_max: f64, room: &RoomGeometry, rng: &mut R) {
    let (dx, dy) = (s.waypoint.0 - s.x, s.waypoint.1 - s.y);
    let remaining = dx.hypot(dy);
    let step = s.speed * dt;
    if step >= remaining {
        s.x = s.waypoint.0;
        s.y = s.waypoint.1;
        s.waypoint = uniform_point(room, rng);
        s.speed = draw_rwp_speed(v_max, rng);
        s.heading = bearing((s.x, s.y), s.waypoint);
    } else {
        s.x += step * dx / remaining;
        s.y += step * dy / remaining;
    }
}

/// One Gauss-Markov velocity update (speed and direction), without moving.
pub fn gauss_markov_update<R: Rng + ?Sized>(s: &mut MotionState, config: &MobilityConfig, rng: &mut R) {
    let alpha = 1.0 - config.gm_randomness;
    let noise_scale = (1.0 - alpha * alpha).sqrt() * config.gm_speed_variance.sqrt();
    let n_speed: f64 = StandardNormal.sample(rng);
    let n_dir: f64 = StandardNormal.sample(rng);
    let speed = alpha * s.speed + (1.0 - alpha) * config.mean_speed_mps + noise_scale * n_speed;
    s.speed = speed.abs();
    // Direction is tracked unwrapped relative to the mean so the recursion is linear.
    let offset = angle_diff(s.heading, s.mean_heading);
    s.heading = wrap_tau(s.mean_heading + alpha * offset + noise_scale * n_dir);
}

/// Signed difference a - b wrapped to (-pi, pi].
fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

pub fn gauss_markov_advance<R: Rng + ?Sized>(
    s: &mut MotionState,
    dt: f64,
    config: &MobilityConfig,
    room: &RoomGeometry,
    rng: &mut R,
) {
    s.until_update_s -= dt;
    if s.until_update_s <= 1e-12 {
        gauss_markov_update(s, config, rng);
        s.until_update_s += config.gm_update_period_s;
    }
    move_and_reflect(s, s.speed * dt, room);
}

pub fn random_walk_advance<R: Rng + ?Sized>(
    s: &mut MotionState,
    dt: f64,
    config: &MobilityConfig,
    room: &RoomGeometry,
    rng: &mut R,
) {
    let step = (s.speed * dt).min(s.flight_left_m);
    move_and_reflect(s, step, room);
    s.flight_left_m -= step;
    if s.flight_left_m <= 1e-12 {
        s.heading = rng.gen::<f64>() * TAU;
        s.flight_left_m = config.rw_flight_length_m;
    }
}

/// Moves `distance` along the heading with specular reflection at the walls.
/// The Gauss-Markov mean direction is mirrored along with the heading.
fn move_and_reflect(s: &mut MotionState, distance: f64, room: &RoomGeometry) {
    let (mut vx, mut vy) = (s.heading.cos(), s.heading.sin());
    let (mut mx, mut my) = (s.mean_heading.cos(), s.mean_heading.sin());
    let mut x = s.x + distance * vx;
    let mut y = s.y + distance * vy;
    let (l, w) = (room.length_m, room.width_m);
    let mut flipped = false;
    for _ in 0..8 {
        if x < 0.0 {
            x = -x;
        } else if x > l {
            x = 2.0 * l - x;
        } else {
            break;
        }
        vx = -vx;
        mx = -mx;
        flipped = true;
    }
    for _ in 0..8 {
        if y < 0.0 {
            y = -y;
        } else if y > w {
            y = 2.0 * w - y;
        } else {
            break;
        }
        vy = -vy;
        my = -my;
        flipped = true;
    }
    s.x = x.clamp(0.0, l);
    s.y = y.clamp(0.0, w);
    if flipped {
        s.heading = wrap_tau(vy.atan2(vx));
        s.mean_heading = wrap_tau(my.atan2(mx));
    }
}

/// Angle in [0, pi] between the direction of travel and the horizontal line
/// from the UE to the AP. Zero when the UE is horizontally at the AP.
pub fn heading_angle_to_ap(state: &MotionState, ap: &Point3) -> f64 {
    let (dx, dy) = (ap.x - state.x, ap.y - state.y);
    if dx.hypot(dy) < 1e-12 {
        return 0.0;
    }
    angle_diff(state.heading, dy.atan2(dx)).abs()
}
