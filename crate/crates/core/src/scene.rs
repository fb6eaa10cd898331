//! Domain types shared by the prioritizer, allocator, oracle and simulator.
//!
//! Bitrates are integer bits per second and all budget arithmetic is exact.
//! Priority coefficients are fixed-point decimals with six fractional digits,
//! so a quality value `coefficient × bitrate` is an exact integer count of
//! micro-units and compares deterministically.

use crate::geometry::Vec3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;
use thiserror::Error;

/// Bits per second.
pub type Bps = u64;

/// Fixed-point scale shared by [`Coefficient`] and [`Quality`].
pub const MICROS_PER_UNIT: u32 = 1_000_000;

/// An invariant violation found while validating a ladder, scene or view.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("n ≥ 1 required: scene has no models")]
    EmptyScene,
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("model {id}: ladder is empty")]
    EmptyLadder { id: String },
    #[error("model {id}: ladder not strictly decreasing at level {level} ({upper} then {lower})")]
    NotStrictlyDecreasing {
        id: String,
        level: usize,
        upper: Bps,
        lower: Bps,
    },
    #[error("model {id}: bitrate at level {level} must be > 0")]
    ZeroBitrate { id: String, level: usize },
    #[error("model {id}: ladder has {found} levels, scene requires {expected}")]
    LevelCountMismatch {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("model {id}: radius must be finite and ≥ 0, got {radius}")]
    BadRadius { id: String, radius: f64 },
    #[error("model {id}: center must be finite")]
    NonFiniteCenter { id: String },
}

/// Validation failures, all of them, in discovery order.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}", join_errors(.0))]
pub struct ValidationErrors(pub Vec<ValidationError>);

fn join_errors(errs: &[ValidationError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A priority coefficient in `[0, 1]`, stored in millionths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coefficient(u32);

impl Coefficient {
    pub const ZERO: Coefficient = Coefficient(0);
    pub const ONE: Coefficient = Coefficient(MICROS_PER_UNIT);

    /// `micros / 1_000_000`; `None` above one.
    pub fn from_micros(micros: u32) -> Option<Self> {
        (micros <= MICROS_PER_UNIT).then_some(Coefficient(micros))
    }

    pub fn micros(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / f64::from(MICROS_PER_UNIT)
    }

    /// Exact `self × bitrate`.
    pub fn weigh(self, bitrate: Bps) -> Quality {
        Quality(u128::from(self.0) * u128::from(bitrate))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoefficientParseError {
    #[error("coefficient {0:?} is not a decimal number")]
    Syntax(String),
    #[error("coefficient {0:?} has more than 6 fractional digits")]
    TooPrecise(String),
    #[error("coefficient {0:?} is outside [0, 1]")]
    OutOfRange(String),
}

impl FromStr for Coefficient {
    type Err = CoefficientParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if (int.is_empty() && frac.is_empty()) || !digits(int) || !digits(frac) {
            return Err(CoefficientParseError::Syntax(s.to_string()));
        }
        if frac.len() > 6 {
            return Err(CoefficientParseError::TooPrecise(s.to_string()));
        }
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse()
                .map_err(|_| CoefficientParseError::OutOfRange(s.to_string()))?
        };
        let frac_micros: u64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<6}").parse().expect("six ascii digits")
        };
        let micros = int
            .checked_mul(u64::from(MICROS_PER_UNIT))
            .and_then(|v| v.checked_add(frac_micros))
            .filter(|&v| v <= u64::from(MICROS_PER_UNIT))
            .ok_or_else(|| CoefficientParseError::OutOfRange(s.to_string()))?;
        Ok(Coefficient(micros as u32))
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_fixed(f, u128::from(self.0))
    }
}

/// A priority-weighted bitrate, exact, in millionths of a bit per second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Quality(u128);

impl Quality {
    pub const ZERO: Quality = Quality(0);

    pub fn from_micros(micros: u128) -> Self {
        Quality(micros)
    }

    pub fn micros(self) -> u128 {
        self.0
    }

    /// Quality of a plain bitrate at unit weight.
    pub fn from_bps(bps: Bps) -> Self {
        Coefficient::ONE.weigh(bps)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / f64::from(MICROS_PER_UNIT)
    }

    pub fn saturating_sub(self, other: Quality) -> Quality {
        Quality(self.0.saturating_sub(other.0))
    }
}

impl Add for Quality {
    type Output = Quality;
    fn add(self, o: Quality) -> Quality {
        Quality(self.0 + o.0)
    }
}

impl Sum for Quality {
    fn sum<I: Iterator<Item = Quality>>(iter: I) -> Quality {
        iter.fold(Quality::ZERO, Add::add)
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_fixed(f, self.0)
    }
}

impl FromStr for Quality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() || frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("invalid quality {s:?}"));
        }
        let int: u128 = int.parse().map_err(|_| format!("invalid quality {s:?}"))?;
        let frac: u128 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<6}").parse().expect("six ascii digits")
        };
        Ok(Quality(int * u128::from(MICROS_PER_UNIT) + frac))
    }
}

impl Serialize for Quality {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Quality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn write_fixed(f: &mut fmt::Formatter<'_>, micros: u128) -> fmt::Result {
    let scale = u128::from(MICROS_PER_UNIT);
    let (int, frac) = (micros / scale, micros % scale);
    if frac == 0 {
        write!(f, "{int}")
    } else {
        let frac = format!("{frac:06}");
        write!(f, "{int}.{}", frac.trim_end_matches('0'))
    }
}

/// Bitrates of one model's representations, highest (`R_0`) first, down to
/// the minimum acceptable level `R_L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RepresentationLadder {
    levels: Vec<Bps>,
}

impl RepresentationLadder {
    pub fn new(levels: Vec<Bps>) -> Result<Self, ValidationErrors> {
        let errs = Self::check("", &levels);
        if errs.is_empty() {
            Ok(Self { levels })
        } else {
            Err(ValidationErrors(errs))
        }
    }

    /// All ladder invariant violations for `levels`, attributed to model `id`.
    pub fn check(id: &str, levels: &[Bps]) -> Vec<ValidationError> {
        let mut errs = Vec::new();
        if levels.is_empty() {
            errs.push(ValidationError::EmptyLadder { id: id.to_string() });
        }
        for (level, &b) in levels.iter().enumerate() {
            if b == 0 {
                errs.push(ValidationError::ZeroBitrate {
                    id: id.to_string(),
                    level,
                });
            }
        }
        for (level, w) in levels.windows(2).enumerate() {
            if w[0] <= w[1] {
                errs.push(ValidationError::NotStrictlyDecreasing {
                    id: id.to_string(),
                    level: level + 1,
                    upper: w[0],
                    lower: w[1],
                });
            }
        }
        errs
    }

    pub fn levels(&self) -> &[Bps] {
        &self.levels
    }

    /// Number of levels, `L + 1`.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Index of the minimum acceptable level, `L`.
    pub fn min_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn bitrate(&self, level: usize) -> Bps {
        self.levels[level]
    }

    /// `R_0`.
    pub fn highest(&self) -> Bps {
        self.levels[0]
    }

    /// `R_L`.
    pub fn lowest(&self) -> Bps {
        self.levels[self.levels.len() - 1]
    }

    /// Extra bitrate needed to lift the model from `R_L` to `R_0`.
    pub fn full_upgrade(&self) -> Bps {
        self.highest() - self.lowest()
    }
}

/// A streamable point-cloud object with its bounding sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudModel {
    pub id: String,
    pub ladder: RepresentationLadder,
    pub center: Vec3,
    pub radius: f64,
}

impl PointCloudModel {
    pub fn new(
        id: impl Into<String>,
        ladder: RepresentationLadder,
        center: Vec3,
        radius: f64,
    ) -> Self {
        Self {
            id: id.into(),
            ladder,
            center,
            radius,
        }
    }
}

/// A validated set of models sharing one ladder length.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    models: Vec<PointCloudModel>,
    ladder_level_count: usize,
}

impl Scene {
    pub fn new(models: Vec<PointCloudModel>) -> Result<Self, ValidationErrors> {
        validate_scene(&models)?;
        let ladder_level_count = models[0].ladder.len();
        Ok(Self {
            models,
            ladder_level_count,
        })
    }

    pub fn models(&self) -> &[PointCloudModel] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// `L + 1`.
    pub fn ladder_level_count(&self) -> usize {
        self.ladder_level_count
    }

    pub fn into_models(self) -> Vec<PointCloudModel> {
        self.models
    }
}

/// Checks the scene-level invariants of `models`: at least one model, unique
/// ids, a common ladder length and sane geometry. Every violation is
/// reported, not just the first.
pub fn validate_scene(models: &[PointCloudModel]) -> Result<(), ValidationErrors> {
    let mut errs = Vec::new();
    let Some(first) = models.first() else {
        return Err(ValidationErrors(vec![ValidationError::EmptyScene]));
    };
    let expected = first.ladder.len();
    let mut seen = HashSet::with_capacity(models.len());
    let mut reported = HashSet::new();
    for m in models {
        if !seen.insert(m.id.as_str()) && reported.insert(m.id.as_str()) {
            errs.push(ValidationError::DuplicateId(m.id.clone()));
        }
        // Ladders are checked again here since the fields are public.
        errs.extend(RepresentationLadder::check(&m.id, m.ladder.levels()));
        if m.ladder.len() != expected {
            errs.push(ValidationError::LevelCountMismatch {
                id: m.id.clone(),
                expected,
                found: m.ladder.len(),
            });
        }
        if !(m.radius.is_finite() && m.radius >= 0.0) {
            errs.push(ValidationError::BadRadius {
                id: m.id.clone(),
                radius: m.radius,
            });
        }
        if !m.center.is_finite() {
            errs.push(ValidationError::NonFiniteCenter { id: m.id.clone() });
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(errs))
    }
}

/// Priority bucket of a model from the viewer's standpoint. `C1` ranks
/// highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorityClass {
    C1,
    C2,
    C3,
}

impl PriorityClass {
    pub const ALL: [PriorityClass; 3] = [PriorityClass::C1, PriorityClass::C2, PriorityClass::C3];

    fn rank(self) -> u8 {
        match self {
            PriorityClass::C1 => 3,
            PriorityClass::C2 => 2,
            PriorityClass::C3 => 1,
        }
    }
}

impl Ord for PriorityClass {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for PriorityClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PriorityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorityClass::C1 => "C1",
            PriorityClass::C2 => "C2",
            PriorityClass::C3 => "C3",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WeightsError {
    #[error("class weights must satisfy C1 > C2 > C3 > 0, got {0}, {1}, {2}")]
    Ordering(Coefficient, Coefficient, Coefficient),
    #[error("expected three comma-separated weights, got {0:?}")]
    Arity(String),
    #[error(transparent)]
    Parse(#[from] CoefficientParseError),
}

/// Coefficient per priority class, strictly decreasing from `C1` to `C3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorityWeights {
    c1: Coefficient,
    c2: Coefficient,
    c3: Coefficient,
}

impl PriorityWeights {
    pub fn new(c1: Coefficient, c2: Coefficient, c3: Coefficient) -> Result<Self, WeightsError> {
        if c1 > c2 && c2 > c3 && c3 > Coefficient::ZERO {
            Ok(Self { c1, c2, c3 })
        } else {
            Err(WeightsError::Ordering(c1, c2, c3))
        }
    }

    pub fn weight(&self, class: PriorityClass) -> Coefficient {
        match class {
            PriorityClass::C1 => self.c1,
            PriorityClass::C2 => self.c2,
            PriorityClass::C3 => self.c3,
        }
    }
}

impl Default for PriorityWeights {
    /// 1.0 / 0.6 / 0.3.
    fn default() -> Self {
        Self {
            c1: Coefficient::ONE,
            c2: Coefficient(600_000),
            c3: Coefficient(300_000),
        }
    }
}

impl FromStr for PriorityWeights {
    type Err = WeightsError;

    /// Parses `"c1,c2,c3"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(WeightsError::Arity(s.to_string()));
        };
        Self::new(a.parse()?, b.parse()?, c.parse()?)
    }
}

impl fmt::Display for PriorityWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.c1, self.c2, self.c3)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViewError {
    #[error("forward vector must have unit length (|forward| = {0})")]
    ForwardNotUnit(f64),
    #[error("field-of-view half angle must lie in (0, π), got {0}")]
    FovOutOfRange(f64),
    #[error("near distance threshold must be finite and > 0, got {0}")]
    BadNearThreshold(f64),
    #[error("camera position must be finite")]
    NonFinitePosition,
}

/// Camera pose plus the parameters that drive class assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewState {
    position: Vec3,
    forward: Vec3,
    fov_half_angle: f64,
    near_distance_threshold: f64,
}

impl ViewState {
    pub const UNIT_TOLERANCE: f64 = 1e-9;

    pub fn new(
        position: Vec3,
        forward: Vec3,
        fov_half_angle: f64,
        near_distance_threshold: f64,
    ) -> Result<Self, ViewError> {
        if !position.is_finite() {
            return Err(ViewError::NonFinitePosition);
        }
        let norm = forward.norm();
        // NaN norms fail this too.
        if (norm - 1.0).abs().is_nan() || (norm - 1.0).abs() > Self::UNIT_TOLERANCE {
            return Err(ViewError::ForwardNotUnit(norm));
        }
        if !(fov_half_angle > 0.0 && fov_half_angle < std::f64::consts::PI) {
            return Err(ViewError::FovOutOfRange(fov_half_angle));
        }
        if !(near_distance_threshold.is_finite() && near_distance_threshold > 0.0) {
            return Err(ViewError::BadNearThreshold(near_distance_threshold));
        }
        Ok(Self {
            position,
            forward,
            fov_half_angle,
            near_distance_threshold,
        })
    }

    /// Like [`ViewState::new`] but normalizes `direction` first.
    pub fn looking(
        position: Vec3,
        direction: Vec3,
        fov_half_angle: f64,
        near_distance_threshold: f64,
    ) -> Result<Self, ViewError> {
        let forward = direction
            .normalized()
            .ok_or(ViewError::ForwardNotUnit(direction.norm()))?;
        Self::new(position, forward, fov_half_angle, near_distance_threshold)
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    pub fn fov_half_angle(&self) -> f64 {
        self.fov_half_angle
    }

    pub fn near_distance_threshold(&self) -> f64 {
        self.near_distance_threshold
    }
}

/// A model tagged with its class, coefficient and best-case quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrioritizedModel<'a> {
    pub model: &'a PointCloudModel,
    pub class: PriorityClass,
    pub coefficient: Coefficient,
    /// `coefficient × R_0`.
    pub q_max: Quality,
    // Copied out of the model so the allocator's walk in priority order does
    // not chase two pointers per model.
    levels: &'a [Bps],
    highest: Bps,
    lowest: Bps,
}

impl<'a> PrioritizedModel<'a> {
    pub fn new(model: &'a PointCloudModel, class: PriorityClass, coefficient: Coefficient) -> Self {
        let ladder = &model.ladder;
        Self {
            model,
            class,
            coefficient,
            q_max: coefficient.weigh(ladder.highest()),
            levels: ladder.levels(),
            highest: ladder.highest(),
            lowest: ladder.lowest(),
        }
    }

    pub fn ladder(&self) -> &'a RepresentationLadder {
        &self.model.ladder
    }

    /// Ladder bitrates, `R_0` first.
    pub fn levels(&self) -> &'a [Bps] {
        self.levels
    }

    /// `R_0`.
    pub fn highest(&self) -> Bps {
        self.highest
    }

    /// `R_L`.
    pub fn lowest(&self) -> Bps {
        self.lowest
    }
}
