//! Fixed-step engine loop, input logs, replay and the live wire protocol.

mod config;
mod driver;
mod engine;
mod input;
pub mod protocol;

pub use config::{
    load_config, ArmsConfig, CameraConfig, ConfigError, EngineConfig, ScoringConfig, ARM_BASE_OFFSET,
    CONFIG_VERSION,
};
pub use driver::{
    replay_frames, run_replay, PushError, ReplayError, ReplayOutcome, SessionDriver, TickOutput,
};
pub use engine::{
    advance, tick, ArmSnapshot, ArmState, ObjectSnapshot, Progress, SessionState, StateSnapshot,
};
pub use input::{
    frame_line, log_header, parse_log, write_log, FrameError, InputFrame, LogError, MasterSample, LOG_FORMAT,
    LOG_VERSION, QUATERNION_TOLERANCE,
};
