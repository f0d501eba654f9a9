//! LiFi/WiFi link models: Lambertian LoS gain (with an optional fractional
//! NLoS uplift), a breakpoint log-distance WiFi path loss, LiFi SINR with
//! interference from every other LiFi AP, WiFi SNR, and link capacity.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{ApKind, NetworkTopology, Point3};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiFiParams {
    pub bandwidth_hz: f64,
    pub noise_psd_a2_per_hz: f64,
    pub responsivity_a_per_w: f64,
    pub modulated_power_w: f64,
    pub lambertian_order: f64,
    pub pd_area_m2: f64,
    pub fov_semiangle_deg: f64,
    pub optics_gain: f64,
    pub nlos_enabled: bool,
    pub nlos_gain_fraction: f64,
}

impl Default for LiFiParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            noise_psd_a2_per_hz: 1e-21,
            responsivity_a_per_w: 0.53,
            modulated_power_w: 3.0,
            lambertian_order: 1.0,
            pd_area_m2: 1e-4,
            fov_semiangle_deg: 45.0,
            optics_gain: 1.0,
            nlos_enabled: false,
            nlos_gain_fraction: 0.0,
        }
    }
}

impl LiFiParams {
    pub fn fov_semiangle_rad(&self) -> f64 {
        self.fov_semiangle_deg.to_radians()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_psd_a2_per_hz * self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_psd_a2_per_hz", self.noise_psd_a2_per_hz),
            ("responsivity_a_per_w", self.responsivity_a_per_w),
            ("modulated_power_w", self.modulated_power_w),
            ("lambertian_order", self.lambertian_order),
            ("pd_area_m2", self.pd_area_m2),
            ("optics_gain", self.optics_gain),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("lifi.{name} must be positive, got {v}")));
            }
        }
        if !(self.fov_semiangle_deg > 0.0 && self.fov_semiangle_deg <= 90.0) {
            return Err(Error::Config(format!(
                "lifi.fov_semiangle_deg must be in (0, 90], got {}",
                self.fov_semiangle_deg
            )));
        }
        if !(0.0..1.0).contains(&self.nlos_gain_fraction) {
            return Err(Error::Config(format!(
                "lifi.nlos_gain_fraction must be in [0, 1), got {}",
                self.nlos_gain_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WiFiParams {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub tx_power_dbm: f64,
    pub carrier_freq_hz: f64,
    pub breakpoint_distance_m: f64,
    pub pathloss_exp_before: f64,
    pub pathloss_exp_after: f64,
    pub shadowing_sigma_db: f64,
}

impl Default for WiFiParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 20e6,
            noise_psd_dbm_per_hz: -174.0,
            tx_power_dbm: 20.0,
            carrier_freq_hz: 2.4e9,
            breakpoint_distance_m: 5.0,
            pathloss_exp_before: 2.0,
            pathloss_exp_after: 3.5,
            shadowing_sigma_db: 0.0,
        }
    }
}

fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl WiFiParams {
    pub fn tx_power_w(&self) -> f64 {
        dbm_to_w(self.tx_power_dbm)
    }

    pub fn noise_psd_w_per_hz(&self) -> f64 {
        dbm_to_w(self.noise_psd_dbm_per_hz)
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_psd_w_per_hz() * self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("breakpoint_distance_m", self.breakpoint_distance_m),
            ("pathloss_exp_before", self.pathloss_exp_before),
            ("pathloss_exp_after", self.pathloss_exp_after),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("wifi.{name} must be positive, got {v}")));
            }
        }
        if !(self.tx_power_dbm.is_finite() && self.noise_psd_dbm_per_hz.is_finite()) {
            return Err(Error::Config("wifi power levels must be finite".into()));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(Error::Config(format!(
                "wifi.shadowing_sigma_db must be >= 0, got {}",
                self.shadowing_sigma_db
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub snr_floor_db: f64,
    pub lifi: LiFiParams,
    pub wifi: WiFiParams,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self { snr_floor_db: -20.0, lifi: LiFiParams::default(), wifi: WiFiParams::default() }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        self.lifi.validate()?;
        self.wifi.validate()?;
        if !self.snr_floor_db.is_finite() {
            return Err(Error::Config("snr_floor_db must be finite".into()));
        }
        Ok(())
    }
}

/// LoS DC gain of an upward-facing receiver under a downward-facing
/// Lambertian emitter. Returns 0 outside the receiver field of view.
pub fn lifi_channel_gain(ap: &Point3, ue: &Point3, params: &LiFiParams) -> Result<f64> {
    let d = ap.distance(ue);
    if d == 0.0 {
        return Err(Error::Domain("LiFi gain undefined for coincident AP and UE".into()));
    }
    let cos_fov = params.fov_semiangle_rad().cos();
    Ok(lambertian_gain(ap, ue, params, cos_fov))
}

#[inline]
fn lambertian_gain(ap: &Point3, ue: &Point3, params: &LiFiParams, cos_fov: f64) -> f64 {
    let dz = ap.z - ue.z;
    if dz <= 0.0 {
        return 0.0;
    }
    let (dx, dy) = (ap.x - ue.x, ap.y - ue.y);
    let d2 = dx * dx + dy * dy + dz * dz;
    // Emitter and receiver are parallel, so irradiance and incidence angles coincide.
    let cos = dz / d2.sqrt();
    // Guard against rounding at exactly 90 degrees.
    if cos < cos_fov && params.fov_semiangle_deg < 90.0 {
        return 0.0;
    }
    let m = params.lambertian_order;
    let cos_m = if m.fract() == 0.0 && m.abs() < 64.0 { cos.powi(m as i32) } else { cos.powf(m) };
    let los = (m + 1.0) * params.pd_area_m2 / (2.0 * PI * d2) * cos_m * params.optics_gain * cos;
    if params.nlos_enabled {
        los * (1.0 + params.nlos_gain_fraction)
    } else {
        los
    }
}

/// Path loss in dB: free space up to 1 m, then the first exponent up to the
/// breakpoint and the second exponent beyond it.
pub fn wifi_path_loss_db(distance_m: f64, params: &WiFiParams) -> f64 {
    let fspl_1m = 20.0 * (4.0 * PI * params.carrier_freq_hz / SPEED_OF_LIGHT).log10();
    let bp = params.breakpoint_distance_m;
    if distance_m <= bp {
        fspl_1m + 10.0 * params.pathloss_exp_before * distance_m.log10()
    } else {
        fspl_1m
            + 10.0 * params.pathloss_exp_before * bp.log10()
            + 10.0 * params.pathloss_exp_after * (distance_m / bp).log10()
    }
}

/// Channel power gain |H|^2 of the WiFi link; `shadow_db` is an extra loss.
pub fn wifi_channel_gain(ap: &Point3, ue: &Point3, params: &WiFiParams, shadow_db: f64) -> Result<f64> {
    let d = ap.distance(ue);
    if d == 0.0 {
        return Err(Error::Domain("WiFi gain undefined for coincident AP and UE".into()));
    }
    Ok(10f64.powf(-(wifi_path_loss_db(d, params) + shadow_db) / 10.0))
}

/// Electrical signal power (R_pd H P_mod)^2 of a LiFi link.
#[inline]
pub fn lifi_signal_power(gain: f64, params: &LiFiParams) -> f64 {
    let i = params.responsivity_a_per_w * gain * params.modulated_power_w;
    i * i
}

pub fn wifi_snr(power_gain: f64, params: &WiFiParams) -> f64 {
    power_gain * params.tx_power_w() / params.noise_power()
}

pub fn link_capacity(kind: ApKind, sinr: f64, params: &ChannelParams) -> f64 {
    let sinr = sinr.max(0.0);
    match kind {
        ApKind::LiFi => params.lifi.bandwidth_hz / 2.0 * (1.0 + E / (2.0 * PI) * sinr).log2(),
        ApKind::WiFi => params.wifi.bandwidth_hz * (1.0 + sinr).log2(),
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dB value with the configured floor applied (zero maps to the floor).
pub fn floored_db(linear: f64, floor_db: f64) -> f64 {
    if linear > 0.0 {
        to_db(linear).max(floor_db)
    } else {
        floor_db
    }
}

/// Per-pair channel gains `H[ap][ue]`: LiFi DC gain or WiFi power gain.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    n_aps: usize,
    n_ues: usize,
    values: Vec<f64>,
}

impl LinkGains {
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_aps = rows.len();
        let n_ues = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_ues) {
            return Err(Error::Shape { expected: n_ues, got: bad.len() });
        }
        if rows.iter().flatten().any(|g| !(*g >= 0.0)) {
            return Err(Error::Domain("channel gains must be non-negative".into()));
        }
        Ok(Self { n_aps, n_ues, values: rows.into_iter().flatten().collect() })
    }

    pub fn compute(
        topology: &NetworkTopology,
        ue_positions: &[Point3],
        shadows_db: &[f64],
        params: &ChannelParams,
    ) -> Result<Self> {
        if shadows_db.len() != ue_positions.len() {
            return Err(Error::Shape { expected: ue_positions.len(), got: shadows_db.len() });
        }
        let mut values = Vec::with_capacity(topology.num_aps() * ue_positions.len());
        for ap in &topology.aps {
            for (ue, shadow) in ue_positions.iter().zip(shadows_db) {
                values.push(match ap.kind {
                    ApKind::LiFi => lifi_channel_gain(&ap.position, ue, &params.lifi)?,
                    ApKind::WiFi => wifi_channel_gain(&ap.position, ue, &params.wifi, *shadow)?,
                });
            }
        }
        Ok(Self { n_aps: topology.num_aps(), n_ues: ue_positions.len(), values })
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    /// Gain between 0-based AP index and UE index.
    pub fn get(&self, ap: usize, ue: usize) -> f64 {
        self.values[ap * self.n_ues + ue]
    }
}

/// SINR of the LiFi link from 0-based AP index `target_ap` to `ue`; every
/// other LiFi AP interferes.
pub fn lifi_sinr(
    topology: &NetworkTopology,
    target_ap: usize,
    ue: usize,
    gains: &LinkGains,
    params: &LiFiParams,
) -> Result<f64> {
    match topology.aps.get(target_ap) {
        Some(ap) if ap.kind == ApKind::LiFi => {}
        _ => return Err(Error::Domain(format!("AP index {target_ap} is not a LiFi AP"))),
    }
    let signal = lifi_signal_power(gains.get(target_ap, ue), params);
    let interference: f64 =
        topology.lifi_indices().filter(|&i| i != target_ap).map(|i| lifi_signal_power(gains.get(i, ue), params)).sum();
    Ok(signal / (params.noise_power() + interference))
}

/// SNR of `ue` towards the single WiFi AP.
pub fn wifi_snr_for(topology: &NetworkTopology, ue: usize, gains: &LinkGains, params: &WiFiParams) -> Result<f64> {
    let wifi = topology.wifi_index().ok_or_else(|| Error::Domain("topology has no WiFi AP".into()))?;
    Ok(wifi_snr(gains.get(wifi, ue), params))
}

/// Link quality of `ue` towards every AP in dB (SINR for LiFi, SNR for WiFi),
/// floored at `params.snr_floor_db`.
pub fn snr_vector(
    topology: &NetworkTopology,
    ue: usize,
    gains: &LinkGains,
    params: &ChannelParams,
) -> Result<Vec<f64>> {
    topology
        .aps
        .iter()
        .enumerate()
        .map(|(i, ap)| {
            let linear = match ap.kind {
                ApKind::LiFi => lifi_sinr(topology, i, ue, gains, &params.lifi)?,
                ApKind::WiFi => wifi_snr(gains.get(i, ue), &params.wifi),
            };
            Ok(floored_db(linear, params.snr_floor_db))
        })
        .collect()
}

/// Precomputed channel evaluator used in the simulation hot loops. Produces
/// the same numbers as the free functions above.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub params: ChannelParams,
    positions: Vec<Point3>,
    kinds: Vec<ApKind>,
    cos_fov: f64,
    lifi_noise: f64,
    wifi_tx_over_noise: f64,
}

impl ChannelModel {
    pub fn new(topology: &NetworkTopology, params: ChannelParams) -> Result<Self> {
        params.validate()?;
        if topology.aps.iter().filter(|ap| ap.kind == ApKind::WiFi).count() > 1 {
            return Err(Error::Config("at most one WiFi AP is supported".into()));
        }
        Ok(Self {
            positions: topology.aps.iter().map(|ap| ap.position).collect(),
            kinds: topology.aps.iter().map(|ap| ap.kind).collect(),
            cos_fov: params.lifi.fov_semiangle_rad().cos(),
            lifi_noise: params.lifi.noise_power(),
            wifi_tx_over_noise: params.wifi.tx_power_w() / params.wifi.noise_power(),
            params,
        })
    }

    pub fn n_aps(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, ap: usize) -> ApKind {
        self.kinds[ap]
    }

    /// Fills `row` with the link state of a UE at `ue` towards every AP.
    pub fn link_row(&self, ue: &Point3, shadow_db: f64, row: &mut [LinkState]) {
        debug_assert_eq!(row.len(), self.kinds.len());
        let mut total_lifi = 0.0;
        for (i, kind) in self.kinds.iter().enumerate() {
            let ap = &self.positions[i];
            row[i].signal = match kind {
                ApKind::LiFi => {
                    let s =
                        lifi_signal_power(lambertian_gain(ap, ue, &self.params.lifi, self.cos_fov), &self.params.lifi);
                    total_lifi += s;
                    s
                }
                ApKind::WiFi => {
                    let d = ap.distance(ue).max(1e-9);
                    10f64.powf(-(wifi_path_loss_db(d, &self.params.wifi) + shadow_db) / 10.0)
                }
            };
        }
        for (i, kind) in self.kinds.iter().enumerate() {
            let s = row[i].signal;
            let sinr = match kind {
                ApKind::LiFi => s / (self.lifi_noise + (total_lifi - s).max(0.0)),
                ApKind::WiFi => s * self.wifi_tx_over_noise,
            };
            row[i].sinr = sinr;
            row[i].snr_db = floored_db(sinr, self.params.snr_floor_db);
            row[i].capacity_bps = link_capacity(*kind, sinr, &self.params);
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinkState {
    /// LiFi electrical signal power or WiFi channel power gain.
    pub signal: f64,
    pub sinr: f64,
    pub snr_db: f64,
    pub capacity_bps: f64,
}

/// Link states of every UE towards every AP, UE-major.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkTable {
    n_aps: usize,
    rows: Vec<LinkState>,
}

impl LinkTable {
    pub fn new(n_aps: usize) -> Self {
        Self { n_aps, rows: Vec::new() }
    }

    pub fn compute(model: &ChannelModel, positions: &[Point3], shadows_db: &[f64]) -> Self {
        let mut table = Self::new(model.n_aps());
        table.refresh(model, positions, shadows_db);
        table
    }

    pub fn refresh(&mut self, model: &ChannelModel, positions: &[Point3], shadows_db: &[f64]) {
        self.n_aps = model.n_aps();
        self.rows.resize(positions.len() * self.n_aps, LinkState::default());
        for (j, pos) in positions.iter().enumerate() {
            let shadow = shadows_db.get(j).copied().unwrap_or(0.0);
            model.link_row(pos, shadow, &mut self.rows[j * self.n_aps..(j + 1) * self.n_aps]);
        }
    }

    /// Builds a table directly from capacities (`caps[ue][ap]`), for solver tests.
    pub fn from_capacities(caps: &[Vec<f64>]) -> Self {
        let n_aps = caps.first().map_or(0, Vec::len);
        let rows = caps
            .iter()
            .flat_map(|row| {
                row.iter().map(|&c| LinkState { signal: c, sinr: c, snr_db: floored_db(c, -20.0), capacity_bps: c })
            })
            .collect();
        Self { n_aps, rows }
    }

    pub fn n_aps(&self) -> usize {
        self.n_aps
    }

    pub fn n_ues(&self) -> usize {
        if self.n_aps == 0 {
            0
        } else {
            self.rows.len() / self.n_aps
        }
    }

    pub fn row(&self, ue: usize) -> &[LinkState] {
        &self.rows[ue * self.n_aps..(ue + 1) * self.n_aps]
    }

    pub fn capacity(&self, ap: usize, ue: usize) -> f64 {
        self.rows[ue * self.n_aps + ap].capacity_bps
    }

    pub fn snr_db(&self, ap: usize, ue: usize) -> f64 {
        self.rows[ue * self.n_aps + ap].snr_db
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_grid_topology, Classification, RoomGeometry};
    use approx::assert_relative_eq;

    fn topo(grid_n: usize, sep: f64) -> NetworkTopology {
        build_grid_topology(RoomGeometry::new(10.0, 10.0, 3.0).unwrap(), grid_n, sep, 0.5, Classification::Symmetric)
            .unwrap()
    }

    #[test]
    fn gain_directly_beneath() {
        let p = LiFiParams::default();
        let d = 2.0;
        let g = lifi_channel_gain(&Point3::new(5.0, 5.0, 3.0), &Point3::new(5.0, 5.0, 3.0 - d), &p).unwrap();
        assert_relative_eq!(g, 2.0 * p.pd_area_m2 * p.optics_gain / (2.0 * PI * d * d), max_relative = 1e-14);
    }

    #[test]
    fn gain_hand_evaluated() {
        // About 60 degrees off axis, so widen the field of view.
        let wide = LiFiParams { fov_semiangle_deg: 90.0, ..LiFiParams::default() };
        let g = lifi_channel_gain(&Point3::new(1.25, 1.25, 3.0), &Point3::new(3.75, 3.75, 1.0), &wide).unwrap();
        // d^2 = 2.5^2 + 2.5^2 + 2^2 = 16.5, cos = 2 / sqrt(16.5), m = 1.
        let expected = 2.0 * 1e-4 / (2.0 * PI * 16.5) * (4.0 / 16.5);
        assert_relative_eq!(g, expected, max_relative = 1e-12);
    }

    #[test]
    fn gain_outside_fov_is_zero() {
        let p = LiFiParams { fov_semiangle_deg: 30.0, ..LiFiParams::default() };
        // 45 degree incidence.
        let g = lifi_channel_gain(&Point3::new(0.0, 0.0, 3.0), &Point3::new(2.0, 0.0, 1.0), &p).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn coincident_positions_error() {
        let p = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(lifi_channel_gain(&p, &p, &LiFiParams::default()), Err(Error::Domain(_))));
        assert!(wifi_channel_gain(&p, &p, &WiFiParams::default(), 0.0).is_err());
    }

    #[test]
    fn nlos_uplift() {
        let base = LiFiParams::default();
        let uplift = LiFiParams { nlos_enabled: true, nlos_gain_fraction: 0.25, ..base.clone() };
        let (a, u) = (Point3::new(0.0, 0.0, 3.0), Point3::new(1.0, 0.5, 1.0));
        let g0 = lifi_channel_gain(&a, &u, &base).unwrap();
        let g1 = lifi_channel_gain(&a, &u, &uplift).unwrap();
        assert_relative_eq!(g1, 1.25 * g0, max_relative = 1e-14);
    }

    #[test]
    fn sinr_single_ap_has_no_interference() {
        let t = topo(1, 0.0);
        let params = ChannelParams::default();
        let gains = LinkGains::compute(&t, &[Point3::new(4.0, 4.0, 1.0)], &[0.0], &params).unwrap();
        let sinr = lifi_sinr(&t, 0, 0, &gains, &params.lifi).unwrap();
        let snr = lifi_signal_power(gains.get(0, 0), &params.lifi) / params.lifi.noise_power();
        assert_relative_eq!(sinr, snr, max_relative = 1e-14);
    }

    #[test]
    fn sinr_zero_gains() {
        let t = topo(2, 2.5);
        let gains = LinkGains::from_matrix(vec![vec![0.0]; 5]).unwrap();
        assert_eq!(lifi_sinr(&t, 0, 0, &gains, &LiFiParams::default()).unwrap(), 0.0);
        assert_eq!(wifi_snr(0.0, &WiFiParams::default()), 0.0);
    }

    #[test]
    fn sinr_two_equal_aps() {
        let t = build_grid_topology(RoomGeometry::new(10.0, 5.0, 3.0).unwrap(), 1, 0.0, 0.5, Classification::Symmetric)
            .unwrap();
        // Manufacture a two-LiFi topology by duplicating the LiFi AP.
        let mut t2 = t.clone();
        t2.aps.insert(1, t.aps[0].clone());
        let g = 3e-6;
        let gains = LinkGains::from_matrix(vec![vec![g], vec![g], vec![0.0]]).unwrap();
        let p = LiFiParams::default();
        let s = (0.53 * g * 3.0f64).powi(2);
        let n = 1e-21 * 20e6;
        assert_relative_eq!(lifi_sinr(&t2, 0, 0, &gains, &p).unwrap(), s / (n + s), max_relative = 1e-12);
    }

    #[test]
    fn lifi_sinr_rejects_wifi_target() {
        let t = topo(2, 2.5);
        let gains = LinkGains::from_matrix(vec![vec![1e-6]; 5]).unwrap();
        assert!(lifi_sinr(&t, 4, 0, &gains, &LiFiParams::default()).is_err());
    }

    #[test]
    fn wifi_snr_unit() {
        let p = WiFiParams::default();
        let h2 = p.noise_power() / p.tx_power_w();
        assert_relative_eq!(wifi_snr(h2, &p), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn wifi_snr_at_three_meters() {
        let p = WiFiParams::default();
        let g = wifi_channel_gain(&Point3::new(0.0, 0.0, 0.0), &Point3::new(3.0, 0.0, 0.0), &p, 0.0).unwrap();
        // Free space at 2.4 GHz, 3 m: 20 log10(4 pi 3 f / c).
        let pl = 20.0 * (4.0 * PI * 3.0 * 2.4e9 / 299_792_458.0f64).log10();
        let snr_db = 20.0 - pl - (-174.0 + 10.0 * 20e6f64.log10());
        assert_relative_eq!(to_db(wifi_snr(g, &p)), snr_db, max_relative = 1e-10);
    }

    #[test]
    fn breakpoint_continuity_and_slope() {
        let p = WiFiParams::default();
        let at = wifi_path_loss_db(5.0, &p);
        assert_relative_eq!(wifi_path_loss_db(5.0 + 1e-9, &p), at, epsilon = 1e-6);
        assert_relative_eq!(wifi_path_loss_db(50.0, &p) - at, 35.0, max_relative = 1e-12);
    }

    #[test]
    fn capacity_examples() {
        let p = ChannelParams::default();
        assert_eq!(link_capacity(ApKind::LiFi, 0.0, &p), 0.0);
        assert_eq!(link_capacity(ApKind::WiFi, 0.0, &p), 0.0);
        assert_relative_eq!(link_capacity(ApKind::WiFi, 1.0, &p), 20e6, max_relative = 1e-14);
        assert_relative_eq!(
            link_capacity(ApKind::LiFi, 2.0 * PI / E, &p),
            p.lifi.bandwidth_hz / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn snr_vector_shape_and_floor() {
        let t = topo(4, 2.5);
        let params = ChannelParams {
            lifi: LiFiParams { fov_semiangle_deg: 40.0, ..LiFiParams::default() },
            ..Default::default()
        };
        let gains = LinkGains::compute(&t, &[Point3::new(1.25, 1.25, 1.0)], &[0.0], &params).unwrap();
        let v = snr_vector(&t, 0, &gains, &params).unwrap();
        assert_eq!(v.len(), 17);
        // AP 16 at (8.75, 8.75) is far outside a 40 degree FOV.
        assert_eq!(v[15], params.snr_floor_db);
    }

    #[test]
    fn wifi_entry_at_room_center_is_height_only() {
        let t = topo(4, 2.5);
        let params = ChannelParams::default();
        let gains = LinkGains::compute(&t, &[Point3::new(5.0, 5.0, 1.0)], &[0.0], &params).unwrap();
        let v = snr_vector(&t, 0, &gains, &params).unwrap();
        let d: f64 = 0.5;
        let pl = 20.0 * (4.0 * PI * d * 2.4e9 / 299_792_458.0f64).log10();
        let expected = 20.0 - pl - (-174.0 + 10.0 * 20e6f64.log10());
        assert_relative_eq!(v[16], expected, max_relative = 1e-10);
    }

    #[test]
    fn fast_path_matches_free_functions() {
        let t = topo(4, 2.5);
        let params = ChannelParams::default();
        let model = ChannelModel::new(&t, params.clone()).unwrap();
        let positions = [Point3::new(2.0, 7.3, 1.0), Point3::new(9.9, 0.1, 1.0)];
        let table = LinkTable::compute(&model, &positions, &[0.0, 0.0]);
        let gains = LinkGains::compute(&t, &positions, &[0.0, 0.0], &params).unwrap();
        for ue in 0..2 {
            let v = snr_vector(&t, ue, &gains, &params).unwrap();
            for ap in 0..17 {
                assert_relative_eq!(table.snr_db(ap, ue), v[ap], max_relative = 1e-10);
            }
        }
    }
}
