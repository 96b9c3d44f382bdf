//! Scenario files shipped with the engine.

use super::definition::{load_scenario, ScenarioDefinition};

/// Recommended training order.
pub const BUNDLED_IDS: [&str; 5] = [
    "wrist_articulation_1",
    "clutch",
    "camera_0",
    "sea_spikes_1",
    "ring_tower_transfer_1",
];

pub fn bundled_scenario_source(id: &str) -> Option<&'static str> {
    Some(match id {
        "wrist_articulation_1" => include_str!("../../scenarios/wrist_articulation_1.json"),
        "clutch" => include_str!("../../scenarios/clutch.json"),
        "camera_0" => include_str!("../../scenarios/camera_0.json"),
        "sea_spikes_1" => include_str!("../../scenarios/sea_spikes_1.json"),
        "ring_tower_transfer_1" => include_str!("../../scenarios/ring_tower_transfer_1.json"),
        _ => return None,
    })
}

pub fn bundled_scenario(id: &str) -> Option<ScenarioDefinition> {
    let source = bundled_scenario_source(id)?;
    Some(load_scenario(source).expect("bundled scenarios are valid"))
}
