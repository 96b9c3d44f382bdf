use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use teletwin_core::scenario::{bundled_scenario, load_scenario, ScenarioDefinition, BUNDLED_IDS};
use teletwin_core::scoring::{FailureReason, Report};
use teletwin_core::session::{load_config, run_replay, EngineConfig, ReplayError};

/// Failure categories; each maps to its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Log(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("report: {0}")]
    Report(String),
    #[error("service: {0}")]
    Service(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Scenario(_) => 4,
            CliError::Log(_) => 5,
            CliError::Io { .. } => 6,
            CliError::Report(_) => 7,
            CliError::Service(_) => 8,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn config_from(path: Option<&Path>) -> Result<EngineConfig, CliError> {
    match path {
        None => Ok(EngineConfig::default()),
        Some(p) => load_config(&read(p)?).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
    }
}

/// Resolves a bundled scenario id, or else reads a scenario file.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioDefinition, CliError> {
    if let Some(def) = bundled_scenario(arg) {
        return Ok(def);
    }
    let path = Path::new(arg);
    if !path.exists() {
        return Err(CliError::Scenario(format!(
            "`{arg}` is neither a file nor a bundled scenario ({})",
            BUNDLED_IDS.join(", ")
        )));
    }
    load_scenario(&read(path)?).map_err(|e| CliError::Scenario(format!("{arg}: {e}")))
}

/// Replays `log` and returns the canonical report text.
pub fn replay(scenario: &str, log: &Path, config: Option<&Path>) -> Result<String, CliError> {
    let cfg = config_from(config)?;
    let def = resolve_scenario(scenario)?;
    let text = read(log)?;
    let outcome = run_replay(&def, &text, &cfg).map_err(|e| match e {
        ReplayError::Log(e) => CliError::Log(format!("{}: {e}", log.display())),
        other => CliError::Log(format!("{}: {other}", log.display())),
    })?;
    Ok(outcome.report.to_canonical_json())
}

pub fn validate(scenario: &str, config: Option<&Path>) -> Result<String, CliError> {
    config_from(config)?;
    let def = resolve_scenario(scenario)?;
    let mut out = format!(
        "{}: ok ({} objects, {} actions, {} repetitions)\n",
        def.id,
        def.objects.len(),
        def.actions.len(),
        def.total_repetitions()
    );
    for line in &def.instructions {
        let _ = writeln!(out, "  - {line}");
    }
    Ok(out)
}

/// Human-readable rendering of a report file.
pub fn render_report(path: &Path) -> Result<String, CliError> {
    let report: Report = serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Report(format!("{}: {e}", path.display())))?;
    Ok(format_report(&report))
}

pub fn format_report(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario   {}", r.scenario_id);
    let status = match &r.failure_reason {
        None => format!("{:?}", r.status).to_lowercase(),
        Some(FailureReason::ImmediateFail(kind)) => {
            format!(
                "failed ({})",
                serde_json::to_value(kind).unwrap().as_str().unwrap_or("?")
            )
        }
        Some(FailureReason::Incomplete) => "failed (incomplete)".to_owned(),
        Some(FailureReason::Disconnected) => "failed (disconnected)".to_owned(),
    };
    let _ = writeln!(out, "status     {status}");
    let _ = writeln!(
        out,
        "duration   {:.2} s over {} ticks",
        (r.ended_at_ms - r.started_at_ms) as f64 / 1000.0,
        r.ticks
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<20} {:>10} {:>10} {:>8}",
        "metric", "value", "budget", "points"
    );
    for (name, m) in [
        ("total time", &r.efficiency.total_time),
        ("economy of motion", &r.efficiency.economy_of_motion),
    ] {
        let _ = writeln!(
            out,
            "{:<20} {:>10.3} {:>10.3} {:>8.2}",
            name, m.value, m.budget, m.points
        );
    }
    if !r.penalties.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<20} {:>10} {:>10} {:>8}",
            "penalty", "count", "weight", "points"
        );
        for p in &r.penalties {
            let kind = serde_json::to_value(p.kind).unwrap();
            let _ = writeln!(
                out,
                "{:<20} {:>10} {:>10.2} {:>8.2}",
                kind.as_str().unwrap_or("?"),
                p.count,
                p.weight,
                -p.deducted
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "total      {:.2}", r.total);
    out
}
