use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeSet;
use thiserror::Error;

use crate::scoring::PenaltyWeights;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario document is not valid JSON: {0}")]
    Syntax(String),
    #[error("missing required field `{0}`")]
    MissingField(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("`{field}`: unknown shape kind `{kind}`")]
    UnknownShape { field: String, kind: String },
    #[error("`{field}`: unknown action kind `{kind}`")]
    UnknownAction { field: String, kind: String },
    #[error("`{field}` references unknown object `{object}`")]
    DanglingReference { field: String, object: String },
    #[error("`{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Seconds.
    pub time_budget: f64,
    /// Meters-equivalent.
    pub motion_budget: f64,
    pub force_limit: f64,
    /// Points lost per second over the time budget.
    pub time_slope: f64,
    /// Points lost per meter-equivalent over the motion budget.
    pub motion_slope: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            time_budget: 120.0,
            motion_budget: 3.0,
            force_limit: 3.0,
            time_slope: 0.5,
            motion_slope: 20.0,
        }
    }
}

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
}

impl Region {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let d = p - self.center;
        (0..3).all(|i| d[i].abs() <= self.half_extents[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Box-shaped glass wall of the given thickness, optionally open at the top.
    Shell {
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
        thickness: f64,
        #[serde(default)]
        open_top: bool,
    },
    Ring {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Vertical wire tower standing on `base`.
    Tower {
        base: Vector3<f64>,
        height: f64,
        detach_force: f64,
    },
}

impl Shape {
    pub const KINDS: [&'static str; 4] = ["sphere", "shell", "ring", "tower"];

    /// Reference point used for grasping, aiming and placement.
    pub fn center(&self) -> Vector3<f64> {
        match *self {
            Shape::Sphere { center, .. } | Shape::Shell { center, .. } | Shape::Ring { center, .. } => center,
            Shape::Tower { base, height, .. } => base + Vector3::new(0.0, 0.0, height * 0.5),
        }
    }

    fn validate(&self, field: &str) -> Result<(), ScenarioError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::invalid(
                    format!("{field}.{name}"),
                    "must be positive",
                ))
            }
        };
        match *self {
            Shape::Sphere { radius, .. } | Shape::Ring { radius, .. } => positive("radius", radius),
            Shape::Shell {
                half_extents,
                thickness,
                ..
            } => {
                for i in 0..3 {
                    positive("half_extents", half_extents[i])?;
                }
                positive("thickness", thickness)?;
                if half_extents.iter().any(|h| *h <= thickness) {
                    return Err(ScenarioError::invalid(
                        format!("{field}.thickness"),
                        "must be smaller than every half extent",
                    ));
                }
                Ok(())
            }
            Shape::Tower {
                height, detach_force, ..
            } => {
                positive("height", height)?;
                positive("detach_force", detach_force)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    #[serde(default)]
    pub grabbable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement_target: Option<Region>,
    /// Tower the object starts threaded on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mounted_on: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    /// Tip enters the target sphere.
    Touch,
    /// Tip stays inside the target sphere for `dwell` seconds.
    Place,
    /// Target object released inside its placement target.
    Transfer,
    /// Camera view axis points at the target.
    CameraAim,
}

impl ActionKind {
    pub const NAMES: [&'static str; 4] = ["touch", "place", "transfer", "camera_aim"];
}

pub const DEFAULT_DWELL: f64 = 0.5;
pub const DEFAULT_AIM_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionNode {
    pub kind: ActionKind,
    pub targets: Vec<String>,
    #[serde(default = "one")]
    pub repetitions: u32,
    /// Vertical axis point the per-repetition angles rotate targets about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<Vector3<f64>>,
    /// Per-repetition rotation (radians) of the target about `pivot`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angles: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn one() -> u32 {
    1
}

impl ActionNode {
    /// Object targeted by repetition `rep`; multiple targets are cycled.
    pub fn target_for(&self, rep: u32) -> &str {
        &self.targets[rep as usize % self.targets.len()]
    }

    /// Where the target sits for repetition `rep`.
    pub fn placed_center(&self, base: Vector3<f64>, rep: u32) -> Vector3<f64> {
        match (self.pivot, self.angles.get(rep as usize)) {
            (Some(pivot), Some(&angle)) => {
                let d = base - pivot;
                let (s, c) = (libm::sin(angle), libm::cos(angle));
                pivot + Vector3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z)
            }
            _ => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDefinition {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub instructions: Vec<String>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub weights: PenaltyWeights,
    pub objects: Vec<SceneObject>,
    pub actions: Vec<ActionNode>,
}

impl ScenarioDefinition {
    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn total_repetitions(&self) -> u32 {
        self.actions.iter().map(|a| a.repetitions).sum()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.id.is_empty() {
            return Err(ScenarioError::invalid("id", "must not be empty"));
        }
        let t = &self.thresholds;
        for (name, v) in [
            ("thresholds.time_budget", t.time_budget),
            ("thresholds.motion_budget", t.motion_budget),
            ("thresholds.force_limit", t.force_limit),
            ("thresholds.time_slope", t.time_slope),
            ("thresholds.motion_slope", t.motion_slope),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::invalid(name, "must be positive"));
            }
        }
        self.weights
            .validate()
            .map_err(|e| ScenarioError::invalid("weights", e.to_string()))?;

        let mut ids = BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            let field = format!("objects[{i}]");
            if !ids.insert(o.id.as_str()) {
                return Err(ScenarioError::invalid(
                    format!("{field}.id"),
                    format!("duplicate object id `{}`", o.id),
                ));
            }
            o.shape.validate(&format!("{field}.shape"))?;
            if o.grabbable {
                match o.grasp_radius {
                    Some(r) if r > 0.0 => {}
                    Some(_) => {
                        return Err(ScenarioError::invalid(
                            format!("{field}.grasp_radius"),
                            "must be positive",
                        ))
                    }
                    None => return Err(ScenarioError::MissingField(format!("{field}.grasp_radius"))),
                }
            }
            if let Some(region) = &o.placement_target {
                if region.half_extents.iter().any(|h| !(*h > 0.0)) {
                    return Err(ScenarioError::invalid(
                        format!("{field}.placement_target.half_extents"),
                        "must be positive",
                    ));
                }
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            if let Some(tower) = &o.mounted_on {
                let field = format!("objects[{i}].mounted_on");
                match self.object(tower) {
                    None => {
                        return Err(ScenarioError::DanglingReference {
                            field,
                            object: tower.clone(),
                        })
                    }
                    Some(t) if !matches!(t.shape, Shape::Tower { .. }) => {
                        return Err(ScenarioError::invalid(field, "must reference a tower"))
                    }
                    Some(_) => {}
                }
            }
        }

        if self.actions.is_empty() {
            return Err(ScenarioError::invalid("actions", "must not be empty"));
        }
        for (i, a) in self.actions.iter().enumerate() {
            let field = format!("actions[{i}]");
            if a.repetitions < 1 {
                return Err(ScenarioError::invalid(
                    format!("{field}.repetitions"),
                    "must be at least 1",
                ));
            }
            if a.targets.is_empty() {
                return Err(ScenarioError::invalid(
                    format!("{field}.targets"),
                    "must not be empty",
                ));
            }
            if !a.angles.is_empty() {
                if a.angles.len() != a.repetitions as usize {
                    return Err(ScenarioError::invalid(
                        format!("{field}.angles"),
                        "must have one entry per repetition",
                    ));
                }
                if a.pivot.is_none() {
                    return Err(ScenarioError::MissingField(format!("{field}.pivot")));
                }
            }
            for (name, v) in [("dwell", a.dwell), ("tolerance", a.tolerance)] {
                if let Some(v) = v {
                    if !(v > 0.0) {
                        return Err(ScenarioError::invalid(
                            format!("{field}.{name}"),
                            "must be positive",
                        ));
                    }
                }
            }
            for (k, target) in a.targets.iter().enumerate() {
                let tfield = format!("{field}.targets[{k}]");
                let Some(obj) = self.object(target) else {
                    return Err(ScenarioError::DanglingReference {
                        field: tfield,
                        object: target.clone(),
                    });
                };
                match a.kind {
                    ActionKind::Touch | ActionKind::Place => {
                        if !matches!(obj.shape, Shape::Sphere { .. }) {
                            return Err(ScenarioError::invalid(tfield, "must reference a sphere"));
                        }
                    }
                    ActionKind::Transfer => {
                        if !obj.grabbable || obj.placement_target.is_none() {
                            return Err(ScenarioError::invalid(
                                tfield,
                                "must reference a grabbable object with a placement_target",
                            ));
                        }
                    }
                    ActionKind::CameraAim => {}
                }
            }
        }
        Ok(())
    }
}

const TOP_LEVEL_KEYS: [&str; 7] = [
    "id",
    "title",
    "instructions",
    "thresholds",
    "weights",
    "objects",
    "actions",
];
const REQUIRED_KEYS: [&str; 4] = ["id", "title", "objects", "actions"];

/// Parses and validates a scenario document.
///
/// Structural problems are reported before typed decoding so each one maps
/// to its own error variant.
pub fn load_scenario(document: &str) -> Result<ScenarioDefinition, ScenarioError> {
    let root: Value = serde_json::from_str(document).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| ScenarioError::Syntax("top level must be an object".into()))?;
    for key in obj.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            return Err(ScenarioError::UnknownField(key.clone()));
        }
    }
    for key in REQUIRED_KEYS {
        if !obj.contains_key(key) {
            return Err(ScenarioError::MissingField(key.into()));
        }
    }
    if let Some(objects) = obj.get("objects").and_then(Value::as_array) {
        for (i, o) in objects.iter().enumerate() {
            for key in ["id", "shape"] {
                if o.get(key).is_none() {
                    return Err(ScenarioError::MissingField(format!("objects[{i}].{key}")));
                }
            }
            match o["shape"].get("kind") {
                None => return Err(ScenarioError::MissingField(format!("objects[{i}].shape.kind"))),
                Some(Value::String(k)) if Shape::KINDS.contains(&k.as_str()) => {}
                Some(k) => {
                    return Err(ScenarioError::UnknownShape {
                        field: format!("objects[{i}].shape.kind"),
                        kind: k.as_str().map(str::to_owned).unwrap_or_else(|| k.to_string()),
                    })
                }
            }
        }
    }
    if let Some(actions) = obj.get("actions").and_then(Value::as_array) {
        for (i, a) in actions.iter().enumerate() {
            for key in ["kind", "targets"] {
                if a.get(key).is_none() {
                    return Err(ScenarioError::MissingField(format!("actions[{i}].{key}")));
                }
            }
            match &a["kind"] {
                Value::String(k) if ActionKind::NAMES.contains(&k.as_str()) => {}
                k => {
                    return Err(ScenarioError::UnknownAction {
                        field: format!("actions[{i}].kind"),
                        kind: k.as_str().map(str::to_owned).unwrap_or_else(|| k.to_string()),
                    })
                }
            }
        }
    }

    let def: ScenarioDefinition = serde_json::from_value(root).map_err(|e| {
        let msg = e.to_string();
        match msg.strip_prefix("unknown field `") {
            Some(rest) => ScenarioError::UnknownField(rest.split('`').next().unwrap_or("").into()),
            None => ScenarioError::Syntax(msg),
        }
    })?;
    def.validate()?;
    Ok(def)
}
