//! Aggregation of per-run rows into the summary and the plotting tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::{read_rows, ReportRow, Scheme};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::runtime::RuntimeRow;

/// Mean and standard error of one scheme at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub n_ues: usize,
    pub mean_speed_mps: f64,
    pub runs: usize,
    pub throughput_bps: f64,
    pub throughput_se_bps: f64,
    pub interval_s: f64,
    pub interval_se_s: f64,
    pub handovers: f64,
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Operating-point key with a total order on the speed.
type Key = (usize, u64, Scheme);

fn key(r: &ReportRow) -> Key {
    (r.n_ues, r.mean_speed_mps.to_bits(), r.scheme)
}

pub fn summarize(rows: &[ReportRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<Key, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, v, scheme), rs)| {
            let thr: Vec<f64> = rs.iter().map(|r| r.network_throughput_bps).collect();
            let iv: Vec<f64> = rs.iter().map(|r| r.mean_update_interval_s).collect();
            let (throughput_bps, throughput_se_bps) = mean_se(&thr);
            let (interval_s, interval_se_s) = mean_se(&iv);
            SummaryRow {
                scheme,
                n_ues: n,
                mean_speed_mps: f64::from_bits(v),
                runs: rs.len(),
                throughput_bps,
                throughput_se_bps,
                interval_s,
                interval_se_s,
                handovers: rs.iter().map(|r| (r.hho + r.vho) as f64).sum::<f64>() / rs.len() as f64,
            }
        })
        .collect()
}

pub(super) fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut s = String::from(
        "scheme,n_ues,mean_speed_mps,runs,throughput_bps,throughput_se_bps,interval_s,interval_se_s,handovers\n",
    );
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.n_ues,
            r.mean_speed_mps,
            r.runs,
            r.throughput_bps,
            r.throughput_se_bps,
            r.interval_s,
            r.interval_se_s,
            r.handovers
        ));
    }
    write_atomic(path, s.as_bytes())
}

pub(super) fn write_runtime(path: &Path, rows: &[RuntimeRow]) -> Result<()> {
    let mut s = String::from("n_ues,msnn_s,surrogate_s,gt_s\n");
    for r in rows {
        let sur = r.surrogate_s.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", r.n_ues, r.msnn_s, sur, r.gt_s));
    }
    write_atomic(path, s.as_bytes())
}

fn read_runtime(path: &Path) -> Result<Vec<RuntimeRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    let bad = |line: &str| Error::Parse(format!("{}: bad runtime row {line:?}", path.display()));
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            Ok(RuntimeRow {
                n_ues: f[0].parse().map_err(|_| bad(line))?,
                msnn_s: num(f[1])?,
                surrogate_s: if f[2].is_empty() { None } else { Some(num(f[2])?) },
                gt_s: num(f[3])?,
            })
        })
        .collect()
}

/// Paths of the tables written by [`report`].
#[derive(Debug, Clone, Default)]
pub struct ReportTables {
    pub written: Vec<PathBuf>,
}

/// Wide table: one line per (fixed, varying) pair, one column per scheme.
fn wide_table(
    summary: &[SummaryRow],
    header: &str,
    fixed: impl Fn(&SummaryRow) -> String,
    x: impl Fn(&SummaryRow) -> String,
    order: impl Fn(&SummaryRow) -> (u64, u64),
    value: impl Fn(&SummaryRow) -> f64,
    keep: impl Fn(&SummaryRow) -> bool,
) -> Option<String> {
    let schemes: BTreeSet<Scheme> = summary.iter().filter(|r| keep(r)).map(|r| r.scheme).collect();
    if schemes.is_empty() {
        return None;
    }
    let mut lines: BTreeMap<(u64, u64), (String, String, BTreeMap<Scheme, f64>)> = BTreeMap::new();
    for r in summary.iter().filter(|r| keep(r)) {
        lines.entry(order(r)).or_insert_with(|| (fixed(r), x(r), BTreeMap::new())).2.insert(r.scheme, value(r));
    }
    let mut s = header.to_string();
    for sc in &schemes {
        s.push(',');
        s.push_str(sc.name());
    }
    s.push('\n');
    for (f, xv, vals) in lines.values() {
        s.push_str(&format!("{f},{xv}"));
        for sc in &schemes {
            s.push(',');
            if let Some(v) = vals.get(sc) {
                s.push_str(&v.to_string());
            }
        }
        s.push('\n');
    }
    Some(s)
}

/// Aggregates row files (and optional runtime files) into
/// throughput-vs-speed, throughput-vs-N_u, interval-vs-speed and
/// runtime-vs-N_u tables under `out`.
pub fn report(row_files: &[PathBuf], runtime_files: &[PathBuf], out: &Path) -> Result<ReportTables> {
    if row_files.is_empty() {
        return Err(Error::Config("report needs at least one rows file".into()));
    }
    let mut rows = Vec::new();
    for f in row_files {
        rows.extend(read_rows(f)?);
    }
    let summary = summarize(&rows);
    let mut tables = ReportTables::default();
    let mut emit = |name: &str, body: Option<String>| -> Result<()> {
        if let Some(body) = body {
            let path = out.join(name);
            write_atomic(&path, body.as_bytes())?;
            tables.written.push(path);
        }
        Ok(())
    };

    let speeds_per_n = count_distinct(&summary, |r| r.n_ues as u64, |r| r.mean_speed_mps.to_bits());
    let ns_per_speed = count_distinct(&summary, |r| r.mean_speed_mps.to_bits(), |r| r.n_ues as u64);
    let by_speed = |r: &SummaryRow| speeds_per_n.get(&(r.n_ues as u64)).copied().unwrap_or(0) >= 2;
    let by_n = |r: &SummaryRow| ns_per_speed.get(&r.mean_speed_mps.to_bits()).copied().unwrap_or(0) >= 2;
    let speed_order = |r: &SummaryRow| (r.n_ues as u64, ordered(r.mean_speed_mps));
    let n_order = |r: &SummaryRow| (ordered(r.mean_speed_mps), r.n_ues as u64);

    emit(
        "throughput_vs_speed.csv",
        wide_table(
            &summary,
            "n_ues,mean_speed_mps",
            |r| r.n_ues.to_string(),
            |r| r.mean_speed_mps.to_string(),
            speed_order,
            |r| r.throughput_bps,
            by_speed,
        ),
    )?;
    emit(
        "throughput_vs_nues.csv",
        wide_table(
            &summary,
            "mean_speed_mps,n_ues",
            |r| r.mean_speed_mps.to_string(),
            |r| r.n_ues.to_string(),
            n_order,
            |r| r.throughput_bps,
            by_n,
        ),
    )?;
    emit(
        "interval_vs_speed.csv",
        wide_table(
            &summary,
            "n_ues,mean_speed_mps",
            |r| r.n_ues.to_string(),
            |r| r.mean_speed_mps.to_string(),
            speed_order,
            |r| r.interval_s,
            |r| by_speed(r) && matches!(r.scheme, Scheme::MsAtcnn | Scheme::SpeedLinear),
        ),
    )?;

    if !runtime_files.is_empty() {
        let mut by_n: BTreeMap<usize, Vec<RuntimeRow>> = BTreeMap::new();
        for f in runtime_files {
            for r in read_runtime(f)? {
                by_n.entry(r.n_ues).or_default().push(r);
            }
        }
        let mut s = String::from("n_ues,msnn_s,surrogate_s,gt_s,gt_over_msnn\n");
        for (n, rs) in by_n {
            let mut msnn: Vec<f64> = rs.iter().map(|r| r.msnn_s).collect();
            let mut gt: Vec<f64> = rs.iter().map(|r| r.gt_s).collect();
            let mut sur: Vec<f64> = rs.iter().filter_map(|r| r.surrogate_s).collect();
            let (m, g) = (crate::runtime::median(&mut msnn), crate::runtime::median(&mut gt));
            let sur = if sur.is_empty() { String::new() } else { crate::runtime::median(&mut sur).to_string() };
            s.push_str(&format!("{n},{m},{sur},{g},{}\n", g / m));
        }
        emit("runtime_vs_nues.csv", Some(s))?;
    }
    Ok(tables)
}

/// Sort key for non-negative speeds.
fn ordered(v: f64) -> u64 {
    v.to_bits()
}

fn count_distinct(
    summary: &[SummaryRow],
    group: impl Fn(&SummaryRow) -> u64,
    item: impl Fn(&SummaryRow) -> u64,
) -> BTreeMap<u64, usize> {
    let mut sets: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for r in summary {
        sets.entry(group(r)).or_default().insert(item(r));
    }
    sets.into_iter().map(|(k, s)| (k, s.len())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(scheme: Scheme, n: usize, v: f64, thr: f64) -> ReportRow {
        ReportRow {
            scheme,
            n_ues: n,
            mean_speed_mps: v,
            seed: 1,
            replication: 0,
            config_hash: "h".into(),
            network_throughput_bps: thr,
            mean_update_interval_s: 1.0 / v,
            updates: 1,
            hho: 1,
            vho: 0,
            mean_gap: None,
        }
    }

    #[test]
    fn mean_and_standard_error() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (1.6666666666666667f64 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_se(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn summary_groups_by_point_and_scheme() {
        let rows = vec![
            r(Scheme::MsAtcnn, 50, 2.0, 10.0),
            r(Scheme::MsAtcnn, 50, 2.0, 20.0),
            r(Scheme::SssTtt, 50, 2.0, 5.0),
            r(Scheme::MsAtcnn, 50, 1.0, 30.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].mean_speed_mps, s[0].scheme, s[0].throughput_bps), (1.0, Scheme::MsAtcnn, 30.0));
        assert_eq!((s[1].runs, s[1].throughput_bps), (2, 15.0));
    }

    #[test]
    fn speeds_sort_numerically() {
        assert!(ordered(2.0) < ordered(10.0));
        assert!(ordered(0.5) < ordered(1.0));
    }
}
