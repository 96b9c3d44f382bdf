//! Training scenarios: file format, bundled definitions and the per-tick
//! state machine that turns tool-tip geometry into session events.

mod bundled;
mod definition;
mod runtime;

pub use bundled::{bundled_scenario, bundled_scenario_source, BUNDLED_IDS};
pub use definition::{
    load_scenario, ActionKind, ActionNode, Region, ScenarioDefinition, ScenarioError, SceneObject, Shape,
    Thresholds, DEFAULT_AIM_TOLERANCE, DEFAULT_DWELL,
};
pub use runtime::{
    force_proxy, in_shell_wall, sort_events, view_angle, ArmSample, EventKind, ObjectState, Outcome,
    RuntimeParams, ScenarioRun, SessionEvent, StepInput, FORCE_EPISODE_WINDOW,
};
