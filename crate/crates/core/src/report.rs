//! Serialized forms of allocations and session reports.
//!
//! Quality values are written as exact decimal strings.

use crate::allocator::Allocation;
use crate::scene::{Bps, PriorityClass, Quality};
use crate::simulator::SessionReport;
use serde::{Deserialize, Serialize};
use std::io;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub id: String,
    pub class: PriorityClass,
    pub level: usize,
    pub bitrate_bps: Bps,
    pub quality: Quality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub budget_bps: Bps,
    pub w_min_bps: Bps,
    pub total_bitrate_bps: Bps,
    pub residual_bps: Bps,
    pub total_quality: Quality,
    pub boundary_index: usize,
    pub w_sequence_bps: Vec<Bps>,
    pub models: Vec<AllocationRow>,
}

impl From<&Allocation<'_>> for AllocationReport {
    fn from(a: &Allocation<'_>) -> Self {
        Self {
            budget_bps: a.budget,
            w_min_bps: a.trail.w_min,
            total_bitrate_bps: a.total_bitrate,
            residual_bps: a.residual_budget,
            total_quality: a.total_quality,
            boundary_index: a.trail.boundary_index,
            w_sequence_bps: a.trail.w_sequence.clone(),
            models: a
                .entries
                .iter()
                .map(|e| AllocationRow {
                    id: e.id().to_string(),
                    class: e.class,
                    level: e.level,
                    bitrate_bps: e.bitrate,
                    quality: e.quality,
                })
                .collect(),
        }
    }
}

impl AllocationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per model: `id,class,level,bitrate_bps,quality`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.models {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub interval_index: usize,
    pub duration_s: f64,
    pub budget_bps: Bps,
    pub feasible: bool,
    pub w_min_bps: Bps,
    pub total_bitrate_bps: Option<Bps>,
    pub total_quality: Option<Quality>,
    pub residual_bps: Option<Bps>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub intervals: usize,
    pub infeasible_intervals: usize,
    pub quality_sum: Quality,
    pub time_weighted_mean_quality: Option<Quality>,
    pub class_mean_bitrate_bps: Vec<(PriorityClass, f64)>,
    pub level_switches: Vec<(String, usize)>,
    pub per_interval: Vec<IntervalSummary>,
}

impl From<&SessionReport<'_>> for SessionSummary {
    fn from(r: &SessionReport<'_>) -> Self {
        Self {
            intervals: r.intervals.len(),
            infeasible_intervals: r.infeasible_intervals,
            quality_sum: r.quality_sum,
            time_weighted_mean_quality: r.time_weighted_mean_quality,
            class_mean_bitrate_bps: r.class_mean_bitrate.iter().map(|(c, b)| (*c, *b)).collect(),
            level_switches: r.level_switches.clone(),
            per_interval: r
                .intervals
                .iter()
                .enumerate()
                .map(|(i, iv)| {
                    let ok = iv.result.as_ref().ok();
                    IntervalSummary {
                        interval_index: i,
                        duration_s: iv.duration_s,
                        budget_bps: iv.budget,
                        feasible: ok.is_some(),
                        w_min_bps: match &iv.result {
                            Ok(a) => a.trail.w_min,
                            Err(e) => e.w_min,
                        },
                        total_bitrate_bps: ok.map(|a| a.total_bitrate),
                        total_quality: ok.map(|a| a.total_quality),
                        residual_bps: ok.map(|a| a.residual_budget),
                    }
                })
                .collect(),
        }
    }
}

impl SessionSummary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write_intervals_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.per_interval {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SessionAllocationRow<'a> {
    interval_index: usize,
    id: &'a str,
    class: PriorityClass,
    level: usize,
    bitrate_bps: Bps,
    quality: Quality,
}

/// Every (interval, model) choice of a session, one row each, feasible
/// intervals only.
pub fn write_session_allocations_csv<W: io::Write>(
    report: &SessionReport,
    out: W,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    // Header must exist even when nothing was feasible.
    w.write_record([
        "interval_index",
        "id",
        "class",
        "level",
        "bitrate_bps",
        "quality",
    ])?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(w.into_inner().map_err(|e| e.into_error())?);
    for (i, iv) in report.intervals.iter().enumerate() {
        if let Ok(a) = &iv.result {
            for e in &a.entries {
                w.serialize(SessionAllocationRow {
                    interval_index: i,
                    id: e.id(),
                    class: e.class,
                    level: e.level,
                    bitrate_bps: e.bitrate,
                    quality: e.quality,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
