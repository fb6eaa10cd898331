//! JSON adaptation manifest: the list of models and their ladders.
//!
//! ```json
//! { "ladder_levels": 3,
//!   "models": [ { "id": "A", "levels_bps": [10000000, 6000000, 3000000],
//!                 "center": [0.0, 0.0, 5.0], "radius": 1.0 } ] }
//! ```
//!
//! `levels_bps` lists `R_0` first. Unknown keys are rejected.

use crate::geometry::Vec3;
use crate::scene::{
    validate_scene, Bps, PointCloudModel, RepresentationLadder, Scene, ValidationError,
    ValidationErrors,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("manifest schema error: {0}")]
    Schema(String),
    #[error("manifest schema error in model {model}: {message}")]
    ModelSchema { model: String, message: String },
    #[error("invalid manifest: {0}")]
    Invalid(#[from] ValidationErrors),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc<M> {
    ladder_levels: usize,
    models: Vec<M>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    id: String,
    levels_bps: Vec<Bps>,
    center: Vec3,
    radius: f64,
}

/// Parses and validates a manifest document.
pub fn load_manifest(bytes: &[u8]) -> Result<Scene, ManifestError> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| ManifestError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let doc: ManifestDoc<Value> =
        serde_json::from_value(root).map_err(|e| ManifestError::Schema(e.to_string()))?;

    let mut models = Vec::with_capacity(doc.models.len());
    let mut errs = Vec::new();
    for (index, raw) in doc.models.into_iter().enumerate() {
        let label = raw
            .get("id")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("#{index}"));
        let m: ModelDoc = serde_json::from_value(raw).map_err(|e| ManifestError::ModelSchema {
            model: label,
            message: e.to_string(),
        })?;
        let ladder_errs = RepresentationLadder::check(&m.id, &m.levels_bps);
        if !ladder_errs.is_empty() {
            errs.extend(ladder_errs);
            continue;
        }
        if m.levels_bps.len() != doc.ladder_levels {
            errs.push(ValidationError::LevelCountMismatch {
                id: m.id.clone(),
                expected: doc.ladder_levels,
                found: m.levels_bps.len(),
            });
        }
        let ladder = RepresentationLadder::new(m.levels_bps).expect("checked above");
        models.push(PointCloudModel::new(m.id, ladder, m.center, m.radius));
    }
    if models.is_empty() && errs.is_empty() {
        errs.push(ValidationError::EmptyScene);
    } else if let Err(ValidationErrors(scene_errs)) = validate_scene(&models) {
        // Count mismatches are judged against the declared `ladder_levels` above.
        errs.extend(scene_errs.into_iter().filter(|e| {
            !matches!(
                e,
                ValidationError::LevelCountMismatch { .. } | ValidationError::EmptyScene
            )
        }));
    }
    if errs.is_empty() {
        Ok(Scene::new(models)?)
    } else {
        Err(ValidationErrors(errs).into())
    }
}

/// Serializes a scene to the manifest format (pretty-printed, trailing newline).
pub fn serialize_manifest(scene: &Scene) -> String {
    let doc = ManifestDoc {
        ladder_levels: scene.ladder_level_count(),
        models: scene
            .models()
            .iter()
            .map(|m| ModelDoc {
                id: m.id.clone(),
                levels_bps: m.ladder.levels().to_vec(),
                center: m.center,
                radius: m.radius,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    s.push('\n');
    s
}
