//! Trace-driven session replay.
//!
//! Each interval of a trace carries its own budget and camera pose. The
//! scene is re-prioritized and re-allocated per interval; intervals never
//! share state, so unused budget does not roll over.

use crate::allocator::{allocate, Allocation, Infeasible};
use crate::geometry::Vec3;
use crate::prioritizer::{prioritize, PrioritizationConfig};
use crate::scene::{Bps, PriorityClass, Quality, Scene, ViewError, ViewState};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceInterval {
    pub duration_s: f64,
    pub budget: Bps,
    pub view: ViewState,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace has no intervals")]
    Empty,
    #[error("interval {index}: duration must be finite and at least 1 µs, got {duration}")]
    Duration { index: usize, duration: f64 },
    #[error("trace row {row}: {source}")]
    Csv {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("trace row {row}: interval_index {found} does not follow {previous}")]
    Order {
        row: usize,
        previous: u64,
        found: u64,
    },
    #[error("trace row {row}: no near_threshold in the trace and none configured")]
    MissingNear { row: usize },
    #[error("trace row {row}: {source}")]
    View {
        row: usize,
        #[source]
        source: ViewError,
    },
}

/// Budgets and camera poses over consecutive intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    intervals: Vec<TraceInterval>,
}

/// One row of the delimited trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub interval_index: u64,
    pub duration_s: f64,
    pub budget_bps: Bps,
    pub cam_x: f64,
    pub cam_y: f64,
    pub cam_z: f64,
    pub fwd_x: f64,
    pub fwd_y: f64,
    pub fwd_z: f64,
    pub fov_half_deg: f64,
    /// Empty falls back to the configured threshold.
    pub near_threshold: Option<f64>,
}

impl SessionTrace {
    pub fn new(intervals: Vec<TraceInterval>) -> Result<Self, TraceError> {
        if intervals.is_empty() {
            return Err(TraceError::Empty);
        }
        for (index, iv) in intervals.iter().enumerate() {
            if !(iv.duration_s.is_finite() && duration_micros(iv.duration_s) > 0) {
                return Err(TraceError::Duration {
                    index,
                    duration: iv.duration_s,
                });
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[TraceInterval] {
        &self.intervals
    }

    /// Reads a headed CSV trace. Forward vectors are normalized; interval
    /// indices must strictly increase.
    pub fn from_csv<R: io::Read>(reader: R, default_near: Option<f64>) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut intervals = Vec::new();
        let mut previous: Option<u64> = None;
        for (i, rec) in rdr.deserialize::<TraceRecord>().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|source| TraceError::Csv { row, source })?;
            if let Some(prev) = previous.filter(|&p| rec.interval_index <= p) {
                return Err(TraceError::Order {
                    row,
                    previous: prev,
                    found: rec.interval_index,
                });
            }
            previous = Some(rec.interval_index);
            let near = rec
                .near_threshold
                .or(default_near)
                .ok_or(TraceError::MissingNear { row })?;
            let view = ViewState::looking(
                Vec3::new(rec.cam_x, rec.cam_y, rec.cam_z),
                Vec3::new(rec.fwd_x, rec.fwd_y, rec.fwd_z),
                rec.fov_half_deg.to_radians(),
                near,
            )
            .map_err(|source| TraceError::View { row, source })?;
            intervals.push(TraceInterval {
                duration_s: rec.duration_s,
                budget: rec.budget_bps,
                view,
            });
        }
        Self::new(intervals)
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (i, iv) in self.intervals.iter().enumerate() {
            let (p, f) = (iv.view.position(), iv.view.forward());
            w.serialize(TraceRecord {
                interval_index: i as u64,
                duration_s: iv.duration_s,
                budget_bps: iv.budget,
                cam_x: p.x,
                cam_y: p.y,
                cam_z: p.z,
                fwd_x: f.x,
                fwd_y: f.y,
                fwd_z: f.z,
                fov_half_deg: iv.view.fov_half_angle().to_degrees(),
                near_threshold: Some(iv.view.near_distance_threshold()),
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Interval length in whole microseconds, the unit all time weighting uses.
pub fn duration_micros(duration_s: f64) -> u128 {
    (duration_s * 1e6).round() as u128
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalOutcome<'a> {
    pub duration_s: f64,
    pub budget: Bps,
    pub result: Result<Allocation<'a>, Infeasible>,
}

impl IntervalOutcome<'_> {
    pub fn quality(&self) -> Option<Quality> {
        self.result.as_ref().ok().map(|a| a.total_quality)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport<'a> {
    pub intervals: Vec<IntervalOutcome<'a>>,
    /// Σ per-interval quality over feasible intervals.
    pub quality_sum: Quality,
    /// Σ(duration × quality) / Σ duration over feasible intervals, with
    /// durations in whole microseconds, rounded down to the quality unit.
    pub time_weighted_mean_quality: Option<Quality>,
    /// Duration-weighted mean chosen bitrate (bps) over every
    /// (interval, model) pair in the class. Classes that never occur are
    /// absent.
    pub class_mean_bitrate: BTreeMap<PriorityClass, f64>,
    /// Per model, in scene order: consecutive feasible interval pairs whose
    /// chosen level differs.
    pub level_switches: Vec<(String, usize)>,
    pub infeasible_intervals: usize,
}

impl<'a> SessionReport<'a> {
    /// Derives every aggregate from the per-interval outcomes.
    pub fn from_outcomes(scene: &Scene, intervals: Vec<IntervalOutcome<'a>>) -> Self {
        let mut quality_sum = Quality::ZERO;
        let (mut weighted, mut time) = (0u128, 0u128);
        let mut class_acc: BTreeMap<PriorityClass, (u128, u128)> = BTreeMap::new();
        let ids: HashMap<&str, usize> = scene
            .models()
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id.as_str(), i))
            .collect();
        let mut switches = vec![0usize; scene.len()];
        let mut last_levels: Option<Vec<usize>> = None;
        let mut infeasible = 0;

        for iv in &intervals {
            let Ok(alloc) = &iv.result else {
                infeasible += 1;
                continue;
            };
            let us = duration_micros(iv.duration_s);
            quality_sum = quality_sum + alloc.total_quality;
            weighted += us * alloc.total_quality.micros();
            time += us;
            let mut levels = vec![0usize; scene.len()];
            for e in &alloc.entries {
                levels[ids[e.id()]] = e.level;
                let acc = class_acc.entry(e.class).or_default();
                acc.0 += us * u128::from(e.bitrate);
                acc.1 += us;
            }
            if let Some(prev) = &last_levels {
                for (s, (a, b)) in switches.iter_mut().zip(prev.iter().zip(&levels)) {
                    *s += usize::from(a != b);
                }
            }
            last_levels = Some(levels);
        }

        Self {
            intervals,
            quality_sum,
            time_weighted_mean_quality: (time > 0).then(|| Quality::from_micros(weighted / time)),
            class_mean_bitrate: class_acc
                .into_iter()
                .map(|(c, (sum, t))| (c, exact_ratio(sum, t)))
                .collect(),
            level_switches: scene
                .models()
                .iter()
                .map(|m| m.id.clone())
                .zip(switches)
                .collect(),
            infeasible_intervals: infeasible,
        }
    }
}

/// `num / den` rounded once: the integer part is exact.
fn exact_ratio(num: u128, den: u128) -> f64 {
    (num / den) as f64 + (num % den) as f64 / den as f64
}

/// Prioritizes and allocates every interval of `trace` independently.
/// Infeasible intervals are recorded, not fatal.
pub fn run_session<'a>(
    scene: &'a Scene,
    trace: &SessionTrace,
    config: &PrioritizationConfig,
) -> SessionReport<'a> {
    let outcomes = trace
        .intervals()
        .par_iter()
        .map(|iv| IntervalOutcome {
            duration_s: iv.duration_s,
            budget: iv.budget,
            result: allocate(&prioritize(scene, &iv.view, config), iv.budget),
        })
        .collect();
    SessionReport::from_outcomes(scene, outcomes)
}
