//! Exact multiple-choice knapsack by exhaustive enumeration.
//!
//! One level per model, maximize `Σ coefficient × bitrate` subject to
//! `Σ bitrate ≤ W`. Branches that cannot fit even with every remaining model
//! at its minimum level are pruned. Only meant for small `n`: the search is
//! `O((L+1)^n)`.

use crate::allocator::{allocate, w_min_of, Infeasible};
use crate::generator::{GeneratorError, GeneratorParams, InstanceGenerator};
use crate::prioritizer::{prioritize, PrioritizationConfig};
use crate::scene::{Bps, PrioritizedModel, Quality};
use rayon::prelude::*;
use std::io;
use thiserror::Error;

pub const DEFAULT_ORACLE_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Infeasible(#[from] Infeasible),
    #[error("exact solver is capped at {cap} models, got {n}")]
    CapExceeded { n: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub optimal_quality: Quality,
    /// Level index per model, in input order.
    pub optimal_levels: Vec<usize>,
    pub optimal_bitrate: Bps,
    /// Feasible complete assignments visited.
    pub enumerated_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactSolver {
    pub cap: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self {
            cap: DEFAULT_ORACLE_CAP,
        }
    }
}

struct Search<'s, 'a> {
    models: &'s [PrioritizedModel<'a>],
    budget: Bps,
    /// `suffix_min[i]` = Σ_{j ≥ i} R_L of model j.
    suffix_min: Vec<Bps>,
    current: Vec<usize>,
    best: Option<(Quality, Vec<usize>, Bps)>,
    count: u64,
}

impl Search<'_, '_> {
    fn descend(&mut self, depth: usize, used: Bps, quality: Quality) {
        if depth == self.models.len() {
            self.count += 1;
            // Strictly better only: enumeration is lexicographic, so the first
            // maximizer found is the lexicographically smallest.
            if self.best.as_ref().is_none_or(|(q, _, _)| quality > *q) {
                self.best = Some((quality, self.current.clone(), used));
            }
            return;
        }
        let p = &self.models[depth];
        let rest = self.suffix_min[depth + 1];
        for (level, &bitrate) in p.ladder().levels().iter().enumerate() {
            let total = used + bitrate;
            if total.saturating_add(rest) > self.budget {
                continue;
            }
            self.current.push(level);
            self.descend(depth + 1, total, quality + p.coefficient.weigh(bitrate));
            self.current.pop();
        }
    }
}

impl ExactSolver {
    pub fn new(cap: usize) -> Self {
        Self { cap }
    }

    pub fn solve(
        &self,
        models: &[PrioritizedModel<'_>],
        budget: Bps,
    ) -> Result<OracleResult, OracleError> {
        if models.len() > self.cap {
            return Err(OracleError::CapExceeded {
                n: models.len(),
                cap: self.cap,
            });
        }
        let w_min = w_min_of(models);
        if budget < w_min {
            return Err(Infeasible { budget, w_min }.into());
        }
        let mut suffix_min = vec![0; models.len() + 1];
        for i in (0..models.len()).rev() {
            suffix_min[i] = suffix_min[i + 1] + models[i].ladder().lowest();
        }
        let mut search = Search {
            models,
            budget,
            suffix_min,
            current: Vec::with_capacity(models.len()),
            best: None,
            count: 0,
        };
        search.descend(0, 0, Quality::ZERO);
        let (optimal_quality, optimal_levels, optimal_bitrate) =
            search.best.expect("all-minimum assignment is feasible");
        Ok(OracleResult {
            optimal_quality,
            optimal_levels,
            optimal_bitrate,
            enumerated_count: search.count,
        })
    }
}

/// [`ExactSolver::solve`] with the default cap.
pub fn solve_exact(
    models: &[PrioritizedModel<'_>],
    budget: Bps,
) -> Result<OracleResult, OracleError> {
    ExactSolver::default().solve(models, budget)
}

/// Heuristic vs. optimum on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub trial: u64,
    pub n: usize,
    /// Minimum-level index `L`.
    pub l: usize,
    pub budget: Bps,
    pub heuristic_q: Quality,
    pub optimal_q: Quality,
    pub baseline_q: Quality,
    pub abs_gap: Quality,
    /// `abs_gap / optimal_q`, 0 when the optimum is 0.
    pub rel_gap: f64,
    /// Slack left after the boundary model's upgrade, see
    /// [`crate::allocator::BudgetTrail::bound_term`].
    pub bound_term: Bps,
}

impl GapRow {
    /// Compares the heuristic against the exact optimum for one prioritized
    /// list.
    pub fn measure(
        trial: u64,
        models: &[PrioritizedModel<'_>],
        budget: Bps,
        solver: &ExactSolver,
    ) -> Result<Self, OracleError> {
        let heuristic = allocate(models, budget)?;
        let exact = solver.solve(models, budget)?;
        let abs_gap = exact
            .optimal_quality
            .saturating_sub(heuristic.total_quality);
        let rel_gap = if exact.optimal_quality == Quality::ZERO {
            0.0
        } else {
            abs_gap.micros() as f64 / exact.optimal_quality.micros() as f64
        };
        Ok(Self {
            trial,
            n: models.len(),
            l: models.first().map_or(0, |p| p.ladder().min_level()),
            budget,
            heuristic_q: heuristic.total_quality,
            optimal_q: exact.optimal_quality,
            baseline_q: crate::allocator::baseline_quality(models),
            abs_gap,
            rel_gap,
            bound_term: heuristic.trail.bound_term(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        (n > 0).then(|| Stats {
            min,
            mean: sum / n as f64,
            max,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// Trials skipped because the drawn budget was below `W_min`.
    pub infeasible_trials: u64,
    pub abs_gap: Option<Stats>,
    pub rel_gap: Option<Stats>,
    /// Rows where the heuristic hit the optimum exactly.
    pub exact_hits: usize,
}

pub const GAP_CSV_HEADER: [&str; 9] = [
    "trial",
    "n",
    "L",
    "W",
    "heuristic_q",
    "optimal_q",
    "abs_gap",
    "rel_gap",
    "bound_term",
];

impl GapReport {
    fn from_rows(rows: Vec<GapRow>, infeasible_trials: u64) -> Self {
        Self {
            abs_gap: Stats::of(rows.iter().map(|r| r.abs_gap.as_f64())),
            rel_gap: Stats::of(rows.iter().map(|r| r.rel_gap)),
            exact_hits: rows.iter().filter(|r| r.abs_gap == Quality::ZERO).count(),
            rows,
            infeasible_trials,
        }
    }

    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(GAP_CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.trial.to_string(),
                r.n.to_string(),
                r.l.to_string(),
                r.budget.to_string(),
                r.heuristic_q.to_string(),
                r.optimal_q.to_string(),
                r.abs_gap.to_string(),
                r.rel_gap.to_string(),
                r.bound_term.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `trials` generated instances through both the heuristic and the
/// exact solver. Trials run in parallel; each draws from its own seeded
/// stream, so the report only depends on `(params, trials, seed)`.
pub fn gap_report(
    params: GeneratorParams,
    config: &PrioritizationConfig,
    trials: u64,
    seed: u64,
    solver: &ExactSolver,
) -> Result<GapReport, GapError> {
    if *params.models.end() > solver.cap {
        return Err(GapError::Cap {
            n: *params.models.end(),
            cap: solver.cap,
        });
    }
    let generator = InstanceGenerator::new(params, seed)?;
    let rows: Vec<Option<GapRow>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let inst = generator.instance(trial);
            let prioritized = prioritize(&inst.scene, &inst.view, config);
            match GapRow::measure(trial, &prioritized, inst.budget, solver) {
                Ok(row) => Some(row),
                Err(OracleError::Infeasible(_)) => None,
                Err(e @ OracleError::CapExceeded { .. }) => unreachable!("{e}"),
            }
        })
        .collect();
    let infeasible = rows.iter().filter(|r| r.is_none()).count() as u64;
    Ok(GapReport::from_rows(
        rows.into_iter().flatten().collect(),
        infeasible,
    ))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GapError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("generator may draw {n} models, above the exact solver cap of {cap}")]
    Cap { n: usize, cap: usize },
}
