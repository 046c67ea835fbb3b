//! On-disk formats: the collapse event log, snapshot files, the run manifest
//! and CSV exports for plotting.
//!
//! Event log lines look like
//! `{"traj":0,"k":1,"t":…,"i":1,"X":[…],"Z":[…],"C":…,"mode":"grwp"}` with
//! 1-based particle labels and every float written with 17 significant
//! digits.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::Deserialize;

use crate::ensemble::EnsembleResult;
use crate::error::{Error, Result};
use crate::params::Mode;
use crate::stats::EmpiricalDistribution;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let mut s = String::from("[");
    for (k, x) in v.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        s.push_str(&fmt_f64(*x));
    }
    s.push(']');
    s
}

/// One parsed event-log record.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct EventLine {
    pub traj: usize,
    pub k: usize,
    pub t: f64,
    /// 1-based.
    pub i: usize,
    #[serde(rename = "X")]
    pub x: Vec<f64>,
    #[serde(rename = "Z")]
    pub z: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub mode: Mode,
}

/// Writes every collapse of every trajectory in trajectory order.
pub fn write_event_log<W: Write>(result: &EnsembleResult, mut w: W) -> Result<()> {
    let mut line = String::new();
    for rec in &result.records {
        for e in &rec.events {
            line.clear();
            write!(
                line,
                "{{\"traj\":{},\"k\":{},\"t\":{},\"i\":{},\"X\":{},\"Z\":{},\"C\":{},\"mode\":\"{}\"}}",
                rec.index,
                e.k,
                fmt_f64(e.time),
                e.particle + 1,
                fmt_vec(&e.center),
                fmt_vec(&e.offset),
                fmt_f64(e.c),
                e.mode
            )
            .expect("string write");
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

pub fn event_log_string(result: &EnsembleResult) -> String {
    let mut buf = Vec::new();
    write_event_log(result, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("ascii output")
}

/// Parses an event log; malformed lines are reported with their 1-based
/// line number.
pub fn read_event_log<R: BufRead>(r: R) -> Result<Vec<EventLine>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ev: EventLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?;
        if ev.i == 0 || ev.x.len() != ev.z.len() {
            return Err(Error::Parse {
                line: k + 1,
                msg: "particle label must be 1-based and X, Z must have equal length".into(),
            });
        }
        out.push(ev);
    }
    Ok(out)
}

/// One parsed snapshot record.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct SnapshotLine {
    pub traj: usize,
    pub t: f64,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
}

/// `{"traj":…,"t":…,"Q":[…]}` per snapshot, trajectory-major, time-ordered.
pub fn write_snapshots<W: Write>(result: &EnsembleResult, mut w: W) -> Result<()> {
    for rec in &result.records {
        for s in &rec.snapshots {
            writeln!(
                w,
                "{{\"traj\":{},\"t\":{},\"Q\":{}}}",
                rec.index,
                fmt_f64(s.time),
                fmt_vec(&s.positions)
            )?;
        }
    }
    Ok(())
}

pub fn read_snapshots<R: BufRead>(r: R) -> Result<Vec<SnapshotLine>> {
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_manifest<W: Write>(result: &EnsembleResult, w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, &result.manifest)?;
    Ok(())
}

/// `bin_edge_low,bin_edge_high,count` rows.
pub fn histogram_csv(dist: &EmpiricalDistribution) -> String {
    let mut s = String::from("bin_edge_low,bin_edge_high,count\n");
    if let EmpiricalDistribution::Histogram { edges, counts } = dist {
        for (k, c) in counts.iter().enumerate() {
            writeln!(s, "{},{},{}", fmt_f64(edges[k]), fmt_f64(edges[k + 1]), c).expect("string write");
        }
    }
    s
}

/// `x,F` rows of the empirical CDF.
pub fn cdf_csv(dist: &EmpiricalDistribution) -> String {
    let mut s = String::from("x,F\n");
    for (x, f) in dist.cdf_points() {
        writeln!(s, "{},{}", fmt_f64(x), fmt_f64(f)).expect("string write");
    }
    s
}

/// `t,q1,…` rows for one trajectory, time-ordered.
pub fn trajectory_csv(snapshots: &[SnapshotLine], traj: usize) -> String {
    let mut rows: Vec<&SnapshotLine> = snapshots.iter().filter(|s| s.traj == traj).collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    let dim = rows.first().map_or(0, |r| r.q.len());
    let mut s = String::from("t");
    for k in 1..=dim {
        write!(s, ",q{k}").expect("string write");
    }
    s.push('\n');
    for r in rows {
        s.push_str(&fmt_f64(r.t));
        for x in &r.q {
            s.push(',');
            s.push_str(&fmt_f64(*x));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
            let v: f64 = serde_json::from_str(&s).unwrap();
            assert_eq!(v.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let good = r#"{"traj":0,"k":1,"t":1.0e0,"i":1,"X":[0.5],"Z":[0.1],"C":0.3,"mode":"grwp"}"#;
        let text = format!("{good}\n{{not json\n");
        match read_event_log(text.as_bytes()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        assert_eq!(read_event_log(good.as_bytes()).unwrap()[0].i, 1);
    }
}
