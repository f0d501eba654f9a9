//! Indoor HLWNet layout: a square grid of ceiling-mounted LiFi APs plus a
//! single WiFi AP, and the symmetry-based AP type classification used to pick
//! an interval model per AP.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point in room coordinates (meters). Origin at one floor corner, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoomGeometry {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl RoomGeometry {
    pub fn new(length_m: f64, width_m: f64, height_m: f64) -> Result<Self> {
        let room = Self { length_m, width_m, height_m };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.length_m, self.width_m, self.height_m];
        if dims.iter().all(|d| d.is_finite() && *d > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("room dimensions must be positive, got {dims:?}")))
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.length_m / 2.0, self.width_m / 2.0)
    }

    pub fn contains_footprint(&self, x: f64, y: f64) -> bool {
        (0.0..=self.length_m).contains(&x) && (0.0..=self.width_m).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ApKind {
    LiFi,
    WiFi,
}

/// AP type used to select an interval model. LiFi classes are numbered from 1
/// outward from the room center; the WiFi AP always takes the last index, so
/// in the default 4x4 layout the types are I, II, III (LiFi) and IV (WiFi).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ApType(pub u16);

impl ApType {
    pub fn index(self) -> usize {
        usize::from(self.0) - 1
    }

    pub fn from_index(index: usize) -> Self {
        ApType(u16::try_from(index + 1).expect("AP type index fits in u16"))
    }
}

impl fmt::Display for ApType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const ROMAN: [(u16, &str); 9] =
            [(100, "C"), (90, "XC"), (50, "L"), (40, "XL"), (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I")];
        let mut n = self.0;
        if n == 0 || n >= 400 {
            return write!(f, "{n}");
        }
        for (value, glyph) in ROMAN {
            while n >= value {
                f.write_str(glyph)?;
                n -= value;
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for ApType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(n) = s.parse::<u16>() {
            return if n >= 1 { Ok(ApType(n)) } else { Err(Error::Parse(format!("AP type {s:?}"))) };
        }
        let value = |c: char| match c {
            'I' => Some(1),
            'V' => Some(5),
            'X' => Some(10),
            'L' => Some(50),
            'C' => Some(100),
            _ => None,
        };
        let digits: Option<Vec<u16>> = s.chars().map(value).collect();
        let digits = digits.filter(|d| !d.is_empty()).ok_or_else(|| Error::Parse(format!("AP type {s:?}")))?;
        let mut total = 0u16;
        for (i, d) in digits.iter().enumerate() {
            match digits.get(i + 1) {
                Some(next) if next > d => total = total.wrapping_sub(*d),
                _ => total = total.wrapping_add(*d),
            }
        }
        let parsed = ApType(total);
        if total == 0 || parsed.to_string() != s {
            return Err(Error::Parse(format!("AP type {s:?}")));
        }
        Ok(parsed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    /// 1-based id.
    pub id: usize,
    pub kind: ApKind,
    pub position: Point3,
    pub ap_type: ApType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Group LiFi APs by distance from the room center.
    #[default]
    Symmetric,
    /// Every AP is its own type.
    Individual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub room: RoomGeometry,
    pub aps: Vec<AccessPoint>,
    pub lifi_separation_m: f64,
}

/// Builds a `grid_n x grid_n` LiFi grid centered in the room at ceiling height
/// plus one WiFi AP at the room center. APs are numbered row by row (y then x)
/// starting at 1; the WiFi AP gets id `grid_n^2 + 1`.
pub fn build_grid_topology(
    room: RoomGeometry,
    grid_n: usize,
    separation: f64,
    wifi_height: f64,
    classification: Classification,
) -> Result<NetworkTopology> {
    room.validate()?;
    if grid_n == 0 {
        return Err(Error::Config("LiFi grid needs at least one AP per axis".into()));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Config(format!("LiFi separation must be non-negative, got {separation}")));
    }
    let span = grid_n as f64 * separation;
    if span > room.length_m + 1e-9 || span > room.width_m + 1e-9 {
        return Err(Error::Config(format!(
            "LiFi grid of {grid_n} x {separation} m = {span} m exceeds room footprint {} x {} m",
            room.length_m, room.width_m
        )));
    }
    if !(0.0..=room.height_m).contains(&wifi_height) {
        return Err(Error::Config(format!("WiFi height {wifi_height} m outside room")));
    }

    let (cx, cy) = room.center();
    let offset = (grid_n as f64 - 1.0) / 2.0;
    let mut aps = Vec::with_capacity(grid_n * grid_n + 1);
    for row in 0..grid_n {
        for col in 0..grid_n {
            let x = cx + (col as f64 - offset) * separation;
            let y = cy + (row as f64 - offset) * separation;
            aps.push(AccessPoint {
                id: aps.len() + 1,
                kind: ApKind::LiFi,
                position: Point3::new(x, y, room.height_m),
                ap_type: ApType(0),
            });
        }
    }
    aps.push(AccessPoint {
        id: aps.len() + 1,
        kind: ApKind::WiFi,
        position: Point3::new(cx, cy, wifi_height),
        ap_type: ApType(0),
    });

    let mut topology = NetworkTopology { room, aps, lifi_separation_m: separation };
    topology.assign_types(classification);
    Ok(topology)
}

impl NetworkTopology {
    pub fn num_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn ap(&self, id: usize) -> Result<&AccessPoint> {
        id.checked_sub(1)
            .and_then(|i| self.aps.get(i))
            .ok_or_else(|| Error::Domain(format!("AP id {id} not in 1..={}", self.aps.len())))
    }

    pub fn lifi_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.aps.iter().enumerate().filter(|(_, ap)| ap.kind == ApKind::LiFi).map(|(i, _)| i)
    }

    pub fn wifi_index(&self) -> Option<usize> {
        self.aps.iter().position(|ap| ap.kind == ApKind::WiFi)
    }

    pub fn num_types(&self) -> usize {
        self.aps.iter().map(|ap| ap.ap_type.index() + 1).max().unwrap_or(0)
    }

    /// AP ids belonging to each type, ordered by type.
    pub fn type_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_types()];
        for ap in &self.aps {
            members[ap.ap_type.index()].push(ap.id);
        }
        members
    }

    fn assign_types(&mut self, classification: Classification) {
        match classification {
            Classification::Individual => {
                for (i, ap) in self.aps.iter_mut().enumerate() {
                    ap.ap_type = ApType::from_index(i);
                }
            }
            Classification::Symmetric => {
                let (cx, cy) = self.room.center();
                let center = Point3::new(cx, cy, 0.0);
                let scale = self.room.length_m.max(self.room.width_m);
                let mut classes: Vec<f64> = Vec::new();
                let radii: Vec<Option<f64>> = self
                    .aps
                    .iter()
                    .map(|ap| (ap.kind == ApKind::LiFi).then(|| ap.position.horizontal_distance(&center)))
                    .collect();
                for r in radii.iter().flatten() {
                    if !classes.iter().any(|c| (c - r).abs() <= 1e-9 * scale) {
                        classes.push(*r);
                    }
                }
                classes.sort_by(f64::total_cmp);
                let n_lifi_types = classes.len();
                for (ap, radius) in self.aps.iter_mut().zip(radii) {
                    ap.ap_type = match radius {
                        Some(r) => {
                            let rank = classes.iter().position(|c| (c - r).abs() <= 1e-9 * scale).unwrap_or(0);
                            ApType::from_index(rank)
                        }
                        None => ApType::from_index(n_lifi_types),
                    };
                }
            }
        }
    }
}

/// AP type of the AP with 1-based id `ap_id`.
pub fn classify_ap(topology: &NetworkTopology, ap_id: usize) -> Result<ApType> {
    topology.ap(ap_id).map(|ap| ap.ap_type)
}
