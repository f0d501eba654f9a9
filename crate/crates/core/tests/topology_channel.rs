use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use approx::assert_relative_eq;
use hlwnet::channel::*;
use hlwnet::topology::*;
use proptest::prelude::*;

fn grid(n: usize, sep: f64, side: f64) -> NetworkTopology {
    build_grid_topology(RoomGeometry::new(side, side, 3.0).unwrap(), n, sep, 0.5, Classification::Symmetric).unwrap()
}

fn default_topology() -> NetworkTopology {
    grid(4, 2.5, 10.0)
}

#[test]
fn default_type_multiplicities() {
    let topo = default_topology();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for id in 1..=topo.num_aps() {
        *counts.entry(classify_ap(&topo, id).unwrap().to_string()).or_default() += 1;
    }
    let expected: BTreeMap<String, usize> =
        [("I", 4), ("II", 8), ("III", 4), ("IV", 1)].into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    assert_eq!(counts, expected);
    // Every id lands in exactly one member list.
    let members = topo.type_members();
    let mut all: Vec<usize> = members.concat();
    all.sort_unstable();
    assert_eq!(all, (1..=17).collect::<Vec<_>>());
}

#[test]
fn named_aps_have_their_types() {
    let topo = default_topology();
    for (id, ty) in
        [(6, "I"), (7, "I"), (10, "I"), (11, "I"), (1, "III"), (4, "III"), (13, "III"), (16, "III"), (17, "IV")]
    {
        assert_eq!(classify_ap(&topo, id).unwrap().to_string(), ty, "AP {id}");
    }
    assert_eq!(classify_ap(&topo, 2).unwrap().to_string(), "II");
}

fn find_at(topo: &NetworkTopology, x: f64, y: f64) -> &AccessPoint {
    topo.aps
        .iter()
        .filter(|ap| ap.kind == ApKind::LiFi)
        .find(|ap| (ap.position.x - x).abs() < 1e-9 && (ap.position.y - y).abs() < 1e-9)
        .expect("image of a grid point is a grid point")
}

proptest! {
    #[test]
    fn classification_has_dihedral_symmetry(n in 1usize..7, sep in 0.5f64..1.6) {
        let side = n as f64 * sep + 1.0;
        let topo = grid(n, sep, side);
        let c = side / 2.0;
        for ap in topo.aps.iter().filter(|ap| ap.kind == ApKind::LiFi) {
            let (dx, dy) = (ap.position.x - c, ap.position.y - c);
            // Rotations by 90 degrees and the reflections generate the group.
            for (ix, iy) in [(-dy, dx), (-dx, -dy), (dy, -dx), (dx, -dy), (-dx, dy), (dy, dx), (-dy, -dx)] {
                prop_assert_eq!(find_at(&topo, c + ix, c + iy).ap_type, ap.ap_type);
            }
        }
    }

    #[test]
    fn capacity_is_monotone_in_sinr(a in 0.0f64..1e6, b in 0.0f64..1e6) {
        let p = ChannelParams::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for kind in [ApKind::LiFi, ApKind::WiFi] {
            prop_assert!(link_capacity(kind, lo, &p) <= link_capacity(kind, hi, &p));
        }
    }

    #[test]
    fn lifi_gain_falls_with_horizontal_distance(r1 in 0.0f64..6.0, r2 in 0.0f64..6.0, bearing in 0.0f64..(2.0 * PI)) {
        let p = LiFiParams::default();
        let ap = Point3::new(5.0, 5.0, 3.0);
        let at = |r: f64| Point3::new(5.0 + r * bearing.cos(), 5.0 + r * bearing.sin(), 1.0);
        let (near, far) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(lifi_channel_gain(&ap, &at(near), &p).unwrap() >= lifi_channel_gain(&ap, &at(far), &p).unwrap());
    }

    #[test]
    fn sinr_never_exceeds_interference_free_snr(x in 0.0f64..10.0, y in 0.0f64..10.0) {
        let topo = default_topology();
        let params = ChannelParams::default();
        let gains = LinkGains::compute(&topo, &[Point3::new(x, y, 1.0)], &[0.0], &params).unwrap();
        for ap in topo.lifi_indices() {
            let sinr = lifi_sinr(&topo, ap, 0, &gains, &params.lifi).unwrap();
            let snr = lifi_signal_power(gains.get(ap, 0), &params.lifi) / params.lifi.noise_power();
            prop_assert!(sinr <= snr * (1.0 + 1e-12));
        }
    }

    #[test]
    fn channel_is_a_function_of_geometry(x in 0.0f64..10.0, y in 0.0f64..10.0) {
        let topo = default_topology();
        let params = ChannelParams::default();
        let model = ChannelModel::new(&topo, params.clone()).unwrap();
        let ue = [Point3::new(x, y, 1.0)];
        let a = LinkTable::compute(&model, &ue, &[0.0]);
        let b = LinkTable::compute(&model, &ue, &[0.0]);
        prop_assert_eq!(&a, &b);
        // The hot-loop table agrees with the free functions.
        let gains = LinkGains::compute(&topo, &ue, &[0.0], &params).unwrap();
        let snr = snr_vector(&topo, 0, &gains, &params).unwrap();
        for (ap, want) in snr.iter().enumerate() {
            prop_assert!((a.snr_db(ap, 0) - want).abs() < 1e-9);
        }
    }
}

#[test]
fn two_equal_lifi_aps_hand_evaluated() {
    // Only the first two LiFi APs reach the UE, with equal gains.
    let topo = grid(2, 1.0, 4.0);
    let p = LiFiParams::default();
    let g = 3e-6;
    let rows: Vec<Vec<f64>> = (0..topo.num_aps()).map(|i| if i < 2 { vec![g] } else { vec![0.0] }).collect();
    let gains = LinkGains::from_matrix(rows).unwrap();
    let s = (p.responsivity_a_per_w * g * p.modulated_power_w).powi(2);
    let n = p.noise_psd_a2_per_hz * p.bandwidth_hz;
    assert_relative_eq!(lifi_sinr(&topo, 0, 0, &gains, &p).unwrap(), s / (n + s), max_relative = 1e-12);
}

#[test]
fn capacity_identities() {
    let p = ChannelParams::default();
    assert_eq!(link_capacity(ApKind::LiFi, 0.0, &p), 0.0);
    assert_eq!(link_capacity(ApKind::WiFi, 0.0, &p), 0.0);
    assert_relative_eq!(link_capacity(ApKind::WiFi, 1.0, &p), 20e6, max_relative = 1e-12);
    assert_relative_eq!(link_capacity(ApKind::LiFi, 2.0 * PI / E, &p), p.lifi.bandwidth_hz / 2.0, max_relative = 1e-12);
}

#[test]
fn snr_vector_floors_out_of_view_aps() {
    let topo = default_topology();
    let params = ChannelParams::default();
    // Under AP 1 in the corner; the far corner AP 16 is well outside 45 degrees.
    let gains = LinkGains::compute(&topo, &[Point3::new(1.25, 1.25, 1.0)], &[0.0], &params).unwrap();
    let v = snr_vector(&topo, 0, &gains, &params).unwrap();
    assert_eq!(v.len(), 17);
    assert_eq!(v[15], params.snr_floor_db);
    assert!(v[0] > v[15]);
}
