//! Greedy view-aware rate allocation.
//!
//! Every model starts at its minimum level `R_L`, which costs `W_min` in
//! total. The slack `W − W_min` is then spent walking the prioritized list:
//! each model is lifted straight to `R_0` while the full upgrade fits. The
//! first model that does not fit (the boundary model) and every model after
//! it gets the highest level whose extra cost still fits in what is left.
//!
//! Budget accounting is by deltas over `R_L`, so the running residual never
//! goes negative and `W_min` is deducted exactly once.

use crate::scene::{
    Bps, Coefficient, PointCloudModel, PrioritizedModel, PriorityClass, Quality, Scene,
};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("infeasible budget: W = {budget} bps is below W_min = {w_min} bps")]
pub struct Infeasible {
    pub budget: Bps,
    pub w_min: Bps,
}

/// Accounting trail of one allocation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetTrail {
    pub w_min: Bps,
    /// `W_0 … W_n`: slack before the first model and after each model, in
    /// priority order.
    pub w_sequence: Vec<Bps>,
    /// Sorted index of the first model not lifted to `R_0`, or `n`.
    pub boundary_index: usize,
}

impl BudgetTrail {
    /// Slack left over after the boundary model took its upgrade, i.e. the
    /// residual before the boundary minus the upgrade taken there. Zero when
    /// every model reached `R_0`.
    ///
    /// The heuristic's quality is within `p_ℓ × bound_term ≤ bound_term` of
    /// the optimum: the fractional relaxation fills the boundary model with
    /// the whole residual, while the heuristic takes the upgrade it can.
    pub fn bound_term(&self) -> Bps {
        let b = self.boundary_index;
        if b + 1 >= self.w_sequence.len() {
            return 0;
        }
        let before = self.w_sequence[b];
        let upgrade = before - self.w_sequence[b + 1];
        before - upgrade
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationEntry<'a> {
    pub model: &'a PointCloudModel,
    pub class: PriorityClass,
    pub coefficient: Coefficient,
    pub level: usize,
    pub bitrate: Bps,
    pub quality: Quality,
}

impl AllocationEntry<'_> {
    pub fn id(&self) -> &str {
        &self.model.id
    }
}

/// Chosen representation per model, in priority order, with totals. Entries
/// borrow their models from the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<'a> {
    pub budget: Bps,
    pub entries: Vec<AllocationEntry<'a>>,
    pub total_bitrate: Bps,
    pub total_quality: Quality,
    pub residual_budget: Bps,
    pub trail: BudgetTrail,
}

impl<'a> Allocation<'a> {
    pub fn levels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.level).collect()
    }

    pub fn entry(&self, id: &str) -> Option<&AllocationEntry<'a>> {
        self.entries.iter().find(|e| e.id() == id)
    }
}

/// Sum of minimum-level bitrates over the scene.
pub fn w_min(scene: &Scene) -> Bps {
    sum_bps(scene.models().iter().map(|m| m.ladder.lowest()))
}

/// Sum of minimum-level bitrates over a prioritized list.
pub fn w_min_of(models: &[PrioritizedModel<'_>]) -> Bps {
    sum_bps(models.iter().map(PrioritizedModel::lowest))
}

/// Saturates at `u64::MAX`, which no budget can reach anyway.
fn sum_bps(it: impl Iterator<Item = Bps>) -> Bps {
    it.fold(0, Bps::saturating_add)
}

/// Runs the heuristic over `prioritized`, which must already be in priority
/// order (see [`crate::prioritizer::prioritize`]).
pub fn allocate<'a>(
    prioritized: &[PrioritizedModel<'a>],
    budget: Bps,
) -> Result<Allocation<'a>, Infeasible> {
    let w_min = w_min_of(prioritized);
    if budget < w_min {
        return Err(Infeasible { budget, w_min });
    }
    let mut residual = budget - w_min;
    let mut w_sequence = Vec::with_capacity(prioritized.len() + 1);
    w_sequence.push(residual);
    let mut boundary = None;
    let mut entries = Vec::with_capacity(prioritized.len());

    for (i, p) in prioritized.iter().enumerate() {
        let floor = p.lowest();
        let (level, bitrate) = if boundary.is_none() && p.highest() - floor <= residual {
            (0, p.highest())
        } else {
            boundary.get_or_insert(i);
            // Lowest index whose bitrate fits; R_L always does.
            let cap = residual + floor;
            p.levels()
                .iter()
                .copied()
                .enumerate()
                .find(|&(_, b)| b <= cap)
                .expect("R_L fits by construction")
        };
        residual -= bitrate - floor;
        w_sequence.push(residual);
        entries.push(AllocationEntry {
            model: p.model,
            class: p.class,
            coefficient: p.coefficient,
            level,
            bitrate,
            quality: p.coefficient.weigh(bitrate),
        });
    }

    let total_bitrate = budget - residual;
    let alloc = Allocation {
        budget,
        total_quality: total_quality_of(&entries),
        entries,
        total_bitrate,
        residual_budget: residual,
        trail: BudgetTrail {
            w_min,
            w_sequence,
            boundary_index: boundary.unwrap_or(prioritized.len()),
        },
    };
    debug_assert_eq!(
        alloc.total_bitrate,
        sum_bps(alloc.entries.iter().map(|e| e.bitrate))
    );
    Ok(alloc)
}

/// Exact `Σ coefficient × chosen bitrate`.
pub fn total_quality(allocation: &Allocation<'_>) -> Quality {
    total_quality_of(&allocation.entries)
}

fn total_quality_of(entries: &[AllocationEntry<'_>]) -> Quality {
    entries.iter().map(|e| e.coefficient.weigh(e.bitrate)).sum()
}

/// Quality of the assignment that keeps every model at `R_L`.
pub fn baseline_quality(prioritized: &[PrioritizedModel<'_>]) -> Quality {
    prioritized
        .iter()
        .map(|p| p.coefficient.weigh(p.lowest()))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::scene::RepresentationLadder;

    fn models(specs: &[(&str, &[Bps])]) -> Vec<PointCloudModel> {
        specs
            .iter()
            .map(|(id, l)| {
                PointCloudModel::new(
                    *id,
                    RepresentationLadder::new(l.to_vec()).unwrap(),
                    Vec3::default(),
                    1.0,
                )
            })
            .collect()
    }

    fn tag<'a>(ms: &'a [PointCloudModel], coefs: &[&str]) -> Vec<PrioritizedModel<'a>> {
        ms.iter()
            .zip(coefs)
            .map(|(m, c)| PrioritizedModel::new(m, PriorityClass::C1, c.parse().unwrap()))
            .collect()
    }

    #[test]
    fn single_level_ladder() {
        let ms = models(&[("A", &[10])]);
        let scene = Scene::new(ms.clone()).unwrap();
        assert_eq!(w_min(&scene), 10);
        let a = allocate(&tag(&ms, &["1"]), 10).unwrap();
        assert_eq!(a.levels(), [0]);
        assert_eq!(a.trail.boundary_index, 1);
        assert_eq!(a.trail.w_sequence, [0, 0]);
        assert!(matches!(
            allocate(&tag(&ms, &["1"]), 9),
            Err(Infeasible {
                budget: 9,
                w_min: 10
            })
        ));
    }

    #[test]
    fn exact_fit_at_boundary_is_accepted() {
        // B's R_1 = 6 equals residual 3 + R_L 3 exactly.
        let ms = models(&[("A", &[10, 6, 3]), ("B", &[10, 6, 3])]);
        let a = allocate(&tag(&ms, &["1", "0.5"]), 16).unwrap();
        assert_eq!(a.levels(), [0, 1]);
        assert_eq!(a.residual_budget, 0);
    }

    #[test]
    fn later_model_can_still_reach_top_level() {
        // B cannot take its 20-unit upgrade, C's 2-unit upgrade still fits.
        let ms = models(&[("A", &[5, 1]), ("B", &[21, 11, 1]), ("C", &[3, 2, 1])]);
        // W_min = 3, W_0 = 16; A takes 4 → 12; B: 20 > 12, R_1 = 11 fits
        // under 12 + 1 → 2; C: full upgrade of 2 fits.
        let a = allocate(&tag(&ms, &["1", "0.6", "0.3"]), 19);
        let a = a.unwrap();
        assert_eq!(a.levels(), [0, 1, 0]);
        assert_eq!(a.trail.boundary_index, 1);
        assert_eq!(a.trail.w_sequence, [16, 12, 2, 0]);
    }

    #[test]
    fn zero_coefficients_give_zero_quality() {
        let ms = models(&[("A", &[10, 6, 3]), ("B", &[10, 6, 3])]);
        let a = allocate(&tag(&ms, &["0", "0"]), 20).unwrap();
        assert_eq!(total_quality(&a), Quality::ZERO);
    }

    #[test]
    fn unit_weight_single_model_quality() {
        let ms = models(&[("A", &[10, 6, 3])]);
        let a = allocate(&tag(&ms, &["1"]), 10).unwrap();
        assert_eq!(total_quality(&a).to_string(), "10");
    }

    #[test]
    fn empty_list_allocates_nothing() {
        let a = allocate(&[], 5).unwrap();
        assert_eq!(a.total_bitrate, 0);
        assert_eq!(a.residual_budget, 5);
        assert_eq!(a.trail.boundary_index, 0);
        assert_eq!(a.trail.bound_term(), 0);
    }

    #[test]
    fn bound_term_is_slack_after_boundary() {
        let ms = models(&[("A", &[10, 6, 3]), ("B", &[10, 6, 3]), ("C", &[10, 6, 3])]);
        let a = allocate(&tag(&ms, &["1", "0.6", "0.3"]), 20).unwrap();
        // W_1 = 4 before B, B takes 3 → bound 1.
        assert_eq!(a.trail.boundary_index, 1);
        assert_eq!(a.trail.bound_term(), 1);
    }
}
