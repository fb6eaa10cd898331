//! Seeded synthetic instances for tests, benchmarks and gap studies.
//!
//! Instance `i` of a generator is drawn from its own ChaCha stream
//! (`seed`, stream `i`), so instances can be produced in any order or in
//! parallel and still come out identical.

use crate::geometry::Vec3;
use crate::scene::{Bps, PointCloudModel, RepresentationLadder, Scene, ViewState};
use crate::simulator::{SessionTrace, TraceInterval};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::ops::RangeInclusive;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("model count range {0:?} is empty or starts at 0")]
    Models(RangeInclusive<usize>),
    #[error("level range {0:?} is empty")]
    Levels(RangeInclusive<usize>),
    #[error("bitrate range {0:?} is empty or includes 0")]
    Bitrates(RangeInclusive<Bps>),
    #[error("bitrate range {range:?} cannot supply {needed} distinct bitrates")]
    TooFewBitrates {
        range: RangeInclusive<Bps>,
        needed: u64,
    },
    #[error(
        "geometry bounds must be finite and positive (extent {extent}, max radius {max_radius})"
    )]
    Geometry { extent: f64, max_radius: f64 },
    #[error("infeasible probability must lie in [0, 1], got {0}")]
    Probability(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// Number of models `n`.
    pub models: RangeInclusive<usize>,
    /// Minimum-level index `L`; ladders get `L + 1` levels.
    pub levels: RangeInclusive<usize>,
    pub bitrate: RangeInclusive<Bps>,
    /// Centers and camera positions are drawn from `[-extent, extent]³`.
    pub extent: f64,
    pub max_radius: f64,
    /// Chance that an instance's budget is drawn below `W_min`.
    pub infeasible_probability: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            models: 2..=6,
            levels: 1..=3,
            bitrate: 100_000..=20_000_000,
            extent: 50.0,
            max_radius: 5.0,
            infeasible_probability: 0.0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.models.is_empty() || *self.models.start() == 0 {
            return Err(GeneratorError::Models(self.models.clone()));
        }
        if self.levels.is_empty() {
            return Err(GeneratorError::Levels(self.levels.clone()));
        }
        if self.bitrate.is_empty() || *self.bitrate.start() == 0 {
            return Err(GeneratorError::Bitrates(self.bitrate.clone()));
        }
        let span = self.bitrate.end() - self.bitrate.start();
        let needed = *self.levels.end() as u64 + 1;
        if span < needed - 1 {
            return Err(GeneratorError::TooFewBitrates {
                range: self.bitrate.clone(),
                needed,
            });
        }
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.extent) || !ok(self.max_radius) {
            return Err(GeneratorError::Geometry {
                extent: self.extent,
                max_radius: self.max_radius,
            });
        }
        if !(0.0..=1.0).contains(&self.infeasible_probability) {
            return Err(GeneratorError::Probability(self.infeasible_probability));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub scene: Scene,
    pub view: ViewState,
    pub budget: Bps,
}

#[derive(Debug, Clone)]
pub struct InstanceGenerator {
    params: GeneratorParams,
    seed: u64,
}

impl InstanceGenerator {
    pub fn new(params: GeneratorParams, seed: u64) -> Result<Self, GeneratorError> {
        params.validate()?;
        Ok(Self { params, seed })
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn instance(&self, index: u64) -> Instance {
        let mut rng = self.rng(index);
        let p = &self.params;
        let n = rng.gen_range(p.models.clone());
        let level_count = rng.gen_range(p.levels.clone()) + 1;
        let models = (0..n)
            .map(|i| {
                PointCloudModel::new(
                    format!("m{i}"),
                    sample_ladder(&mut rng, &p.bitrate, level_count),
                    sample_point(&mut rng, p.extent),
                    rng.gen_range(0.0..=p.max_radius),
                )
            })
            .collect();
        let scene = Scene::new(models).expect("generated scenes are valid");
        let view = sample_view(&mut rng, p.extent);
        let budget = sample_budget(&mut rng, &scene, p.infeasible_probability);
        Instance {
            scene,
            view,
            budget,
        }
    }

    /// Instances 0, 1, 2, … without end.
    pub fn iter(&self) -> impl Iterator<Item = Instance> + '_ {
        (0..).map(move |i| self.instance(i))
    }

    /// A trace of `intervals` one-second intervals over `scene`, each with a
    /// fresh camera pose and budget. Uses a stream disjoint from instances.
    pub fn trace(&self, scene: &Scene, intervals: usize) -> SessionTrace {
        let mut rng = self.rng(u64::MAX);
        let intervals = (0..intervals.max(1))
            .map(|_| TraceInterval {
                duration_s: 1.0,
                view: sample_view(&mut rng, self.params.extent),
                budget: sample_budget(&mut rng, scene, self.params.infeasible_probability),
            })
            .collect();
        SessionTrace::new(intervals).expect("generated traces are valid")
    }
}

/// Instances from `params` under `seed`, in index order.
pub fn generate_instances(
    params: GeneratorParams,
    seed: u64,
) -> Result<impl Iterator<Item = Instance>, GeneratorError> {
    let generator = InstanceGenerator::new(params, seed)?;
    Ok((0..).map(move |i| generator.instance(i)))
}

/// `count` distinct bitrates from `range`, sorted descending.
fn sample_ladder(
    rng: &mut ChaCha8Rng,
    range: &RangeInclusive<Bps>,
    count: usize,
) -> RepresentationLadder {
    let span = (range.end() - range.start()).saturating_add(1);
    let mut levels: Vec<Bps> = if let Ok(len) = usize::try_from(span) {
        index::sample(rng, len, count)
            .into_iter()
            .map(|o| range.start() + o as Bps)
            .collect()
    } else {
        // Range wider than usize; collisions are astronomically unlikely but
        // are still rejected.
        let mut v: Vec<Bps> = Vec::with_capacity(count);
        while v.len() < count {
            let b = rng.gen_range(range.clone());
            if !v.contains(&b) {
                v.push(b);
            }
        }
        v
    };
    levels.sort_unstable_by(|a, b| b.cmp(a));
    RepresentationLadder::new(levels).expect("distinct positive bitrates")
}

fn sample_point(rng: &mut ChaCha8Rng, extent: f64) -> Vec3 {
    Vec3::new(
        rng.gen_range(-extent..=extent),
        rng.gen_range(-extent..=extent),
        rng.gen_range(-extent..=extent),
    )
}

fn sample_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = sample_point(rng, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

fn sample_view(rng: &mut ChaCha8Rng, extent: f64) -> ViewState {
    let position = sample_point(rng, extent);
    let forward = sample_direction(rng);
    let fov_half = rng.gen_range(PI / 18.0..=PI * 4.0 / 9.0);
    let near = rng.gen_range(0.25..=1.0) * extent;
    ViewState::looking(position, forward, fov_half, near).expect("sampled view is valid")
}

fn sample_budget(rng: &mut ChaCha8Rng, scene: &Scene, infeasible_probability: f64) -> Bps {
    let w_min = crate::allocator::w_min(scene);
    let w_max = scene
        .models()
        .iter()
        .fold(0u64, |acc, m| acc.saturating_add(m.ladder.highest()));
    if infeasible_probability > 0.0 && rng.gen_bool(infeasible_probability) {
        rng.gen_range(0..w_min)
    } else {
        rng.gen_range(w_min..=w_max)
    }
}
