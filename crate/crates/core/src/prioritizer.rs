//! Viewport-driven priority assignment.
//!
//! A model is visible when its bounding sphere intersects the view cone of
//! half-angle `fov_half_angle` around the camera's forward axis. Visible
//! models within the near threshold land in `C1`, visible but distant ones in
//! `C2`, everything else in `C3`.

use crate::geometry::Vec3;
use crate::scene::{
    Bps, PointCloudModel, PrioritizedModel, PriorityClass, PriorityWeights, Scene, ViewError,
    ViewState,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrioritizationConfig {
    pub weights: PriorityWeights,
    /// Copied into every [`ViewState`] built from this config. There is no
    /// default since scene units are arbitrary.
    pub near_distance_threshold: Option<f64>,
}

impl PrioritizationConfig {
    pub fn new(weights: PriorityWeights, near_distance_threshold: f64) -> Self {
        Self {
            weights,
            near_distance_threshold: Some(near_distance_threshold),
        }
    }

    /// Builds a view from a camera pose using this config's near threshold.
    /// `direction` need not be normalized.
    pub fn view(
        &self,
        position: Vec3,
        direction: Vec3,
        fov_half_angle: f64,
    ) -> Result<ViewState, ViewError> {
        let near = self
            .near_distance_threshold
            .ok_or(ViewError::BadNearThreshold(f64::NAN))?;
        ViewState::looking(position, direction, fov_half_angle, near)
    }
}

/// True iff the model's bounding sphere touches the view cone.
pub fn visibility(view: &ViewState, model: &PointCloudModel) -> bool {
    let offset = model.center - view.position();
    let dist = offset.norm();
    if dist <= model.radius {
        return true;
    }
    let cos = (view.forward().dot(offset) / dist).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let angular_radius = (model.radius / dist).min(1.0).asin();
    angle <= view.fov_half_angle() + angular_radius
}

pub fn classify(view: &ViewState, model: &PointCloudModel) -> PriorityClass {
    if !visibility(view, model) {
        PriorityClass::C3
    } else if (model.center - view.position()).norm() <= view.near_distance_threshold() {
        PriorityClass::C1
    } else {
        PriorityClass::C2
    }
}

/// Tags every model with class, coefficient and `q_max`, then sorts by
/// coefficient, `q_max` (both descending) and id.
pub fn prioritize<'a>(
    scene: &'a Scene,
    view: &ViewState,
    config: &PrioritizationConfig,
) -> Vec<PrioritizedModel<'a>> {
    let mut out: Vec<PrioritizedModel<'a>> = scene
        .models()
        .iter()
        .map(|m| {
            let class = classify(view, m);
            PrioritizedModel::new(m, class, config.weights.weight(class))
        })
        .collect();
    sort_by_priority(&mut out);
    out
}

/// The allocator's input order. Ids are unique within a scene, so the order
/// is total and an unstable sort is deterministic.
pub fn sort_by_priority(models: &mut [PrioritizedModel<'_>]) {
    // Sorting small keys and gathering afterwards is much cheaper than moving
    // whole entries around. Within one coefficient, `q_max` orders exactly
    // like `R_0`; a zero coefficient makes every `q_max` equal.
    let mut keys: Vec<(u32, Bps, usize)> = models
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = p.coefficient.micros();
            (c, if c == 0 { 0 } else { p.highest() }, i)
        })
        .collect();
    keys.sort_unstable_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then_with(|| models[a.2].model.id.cmp(&models[b.2].model.id))
    });
    let sorted: Vec<PrioritizedModel<'_>> = keys.iter().map(|k| models[k.2]).collect();
    models.copy_from_slice(&sorted);
}
