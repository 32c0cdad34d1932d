//! Per-episode score rows shared by the baseline and evaluation stages.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};

use microgrid_fl::metrics::ScoreSummary;

use crate::config::Role;

pub const REPORTS_CSV_HEADER: &str =
    "arm,split,household_id,microgrid_id,day,day_fingerprint,price_score,emission_score,reward,imported_energy";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub arm: String,
    pub split: Role,
    pub day: usize,
    pub summary: ScoreSummary,
    /// Energy drawn from the grid over the episode; the weight used by
    /// energy-weighted aggregation.
    pub imported_energy: f64,
}

/// Values use the shortest representation that parses back to the same
/// `f64`, so reading a report file loses nothing.
pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORTS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let s = &r.summary;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:016x},{},{},{},{}",
            r.arm,
            r.split.name(),
            s.household_id,
            s.microgrid_id,
            r.day,
            s.day_fingerprint,
            s.price_score,
            s.emission_score,
            s.reward,
            r.imported_energy
        );
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORTS_CSV_HEADER) {
        bail!("unexpected report header");
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                bail!("report row has {} fields: '{line}'", f.len());
            }
            let num = |i: usize| -> Result<f64> { f[i].parse().with_context(|| format!("field {i} of '{line}'")) };
            Ok(ReportRow {
                arm: f[0].to_string(),
                split: Role::parse(f[1]).ok_or_else(|| anyhow!("unknown split in '{line}'"))?,
                day: f[4].parse().with_context(|| format!("day in '{line}'"))?,
                summary: ScoreSummary {
                    household_id: f[2].parse().with_context(|| format!("household in '{line}'"))?,
                    microgrid_id: f[3].parse().with_context(|| format!("microgrid in '{line}'"))?,
                    day_fingerprint: u64::from_str_radix(f[5], 16)
                        .with_context(|| format!("fingerprint in '{line}'"))?,
                    price_score: num(6)?,
                    emission_score: num(7)?,
                    reward: num(8)?,
                },
                imported_energy: num(9)?,
            })
        })
        .collect()
}

/// Summaries of `arm` on `split`, in file order.
pub fn select(rows: &[ReportRow], arm: &str, split: Role) -> Vec<ScoreSummary> {
    rows.iter().filter(|r| r.arm == arm && r.split == split).map(|r| r.summary).collect()
}
