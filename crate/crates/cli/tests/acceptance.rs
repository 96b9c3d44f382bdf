//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teletwin_core::footboard::{PedalId, PedalState};
use teletwin_core::kinematics::*;
use teletwin_core::scenario::{bundled_scenario, EventKind, SessionEvent, Thresholds};
use teletwin_core::scoring::{finalize, EfficiencyState, FailureReason, PenaltyWeights, Report, ScoreStatus};
use teletwin_core::script::{fixture_scenario, wrist_articulation_run, WristRunStyle, FIXTURE_NAMES};
use teletwin_core::session::{replay_frames, run_replay, EngineConfig};
use teletwin_core::teleop::*;

const SEED: u64 = 0x7e1e_7a1e;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

fn random_theta(r: &mut ChaCha8Rng, chain: &KinematicChain) -> JointVector {
    JointVector::from_fn(|i, _| {
        let l = chain.joints[i].limits;
        r.gen_range(l.min..l.max)
    })
}

fn random_rotation(r: &mut ChaCha8Rng) -> Matrix3<f64> {
    loop {
        let axis = Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        if axis.norm() > 1e-3 {
            return axis_angle(&axis, r.gen_range(0.0..std::f64::consts::PI));
        }
    }
}

fn random_pose(r: &mut ChaCha8Rng) -> Pose {
    let rot = random_rotation(r);
    Pose::new(rot, Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0)))
}

fn ik_convergence() -> Outcome {
    let chain = KinematicChain::default();
    let cfg = IkConfig::default();
    let mut r = rng(1);
    let (n, mut ok) = (1000, 0);
    let mut total = Duration::ZERO;
    let mut worst_iters = 0;
    for _ in 0..n {
        let truth = random_theta(&mut r, &chain);
        let target = forward_kinematics(&chain, &truth);
        let seed = truth + JointVector::from_fn(|_, _| r.gen_range(-0.05..0.05));
        let start = Instant::now();
        let res = solve_ik(&chain, &target, &seed, &cfg);
        total += start.elapsed();
        let err = pose_error(&target, &forward_kinematics(&chain, &res.theta));
        if res.status == IkStatus::Converged
            && err.position_norm() < 1e-6
            && err.orientation_norm() < 1e-6
            && res.iterations <= 50
        {
            ok += 1;
            worst_iters = worst_iters.max(res.iterations);
        }
    }
    let rate = ok as f64 / n as f64;
    let mean = total / n;
    outcome(
        rate >= 0.99 && mean < Duration::from_millis(1),
        format!("{ok}/{n} converged, max {worst_iters} iterations, mean solve {mean:?}"),
    )
}

fn jacobian_cross_check() -> Outcome {
    let chain = KinematicChain::default();
    let mut r = rng(2);
    let worst = (0..100)
        .map(|_| {
            let theta = random_theta(&mut r, &chain);
            (geometric_jacobian(&chain, &theta) - numeric_jacobian(&chain, &theta, 1e-6)).amax()
        })
        .fold(0.0, f64::max);
    outcome(
        worst < 1e-5,
        format!("max |geometric - finite difference| = {worst:.3e}"),
    )
}

fn teleop_algebra() -> Outcome {
    let alpha = TeleopConfig::default().motion_scale;
    let mut r = rng(3);
    let (mut identity, mut increment, mut affine) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let m0 = random_pose(&mut r);
        let ee0 = random_pose(&mut r);
        let a = anchor(&m0, &ee0);
        identity = identity.max((desired_orientation(&a, &m0.rotation) - ee0.rotation).amax());

        let delta = random_rotation(&mut r);
        let got = desired_orientation(&a, &(delta * m0.rotation));
        increment = increment.max((got - delta * ee0.rotation).amax());

        let x = Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        let y = Vector3::from_fn(|_, _| r.gen_range(-1.0..1.0));
        let lam: f64 = r.gen_range(0.0..1.0);
        let mixed = desired_position(&a, &(x * lam + y * (1.0 - lam)), alpha);
        let combo = desired_position(&a, &x, alpha) * lam + desired_position(&a, &y, alpha) * (1.0 - lam);
        let scaled = (desired_position(&a, &x, alpha) - ee0.translation) - (x - m0.translation) * alpha;
        affine = affine.max((mixed - combo).amax()).max(scaled.amax());
    }
    let worst = identity.max(increment).max(affine);
    outcome(
        worst < 1e-12,
        format!(
            "1000 trials: identity {identity:.1e}, left increment {increment:.1e}, affinity {affine:.1e}"
        ),
    )
}

fn clutch_invariance() -> Outcome {
    let cfg = TeleopConfig::default();
    let cam = CameraState::new(Pose::identity());
    let mut clutch = PedalState::default();
    clutch.pressed[PedalId::Clutch.index()] = true;
    let free = PedalState::default();
    let mut r = rng(4);
    let (mut moved, mut jump) = (0usize, 0.0f64);
    for _ in 0..200 {
        let m0 = random_pose(&mut r);
        let ee0 = random_pose(&mut r);
        let (mut s, _) = step_teleop(&ArmTeleopState::new(m0, ee0), &cam, &m0, 0.0, &free, &cfg);
        let frozen = s.ee_target;
        for _ in 0..r.gen_range(1..30) {
            let m = random_pose(&mut r);
            s = step_teleop(&s, &cam, &m, r.gen_range(0.0..1.0), &clutch, &cfg).0;
            if s.ee_target != frozen {
                moved += 1;
            }
        }
        let after = random_pose(&mut r);
        let released = step_teleop(&s, &cam, &after, 0.0, &free, &cfg).0;
        jump = jump
            .max((released.ee_target.translation - frozen.translation).norm())
            .max((released.ee_target.rotation - frozen.rotation).amax());
    }
    outcome(
        moved == 0 && jump < 1e-12,
        format!("200 trajectories: {moved} clutched target changes, release jump {jump:.1e}"),
    )
}

/// Straight-line scorer written from the scoring rules: two efficiency
/// metrics worth up to 50 each, fixed per-event deductions, tower detach
/// fails outright, an unfinished run fails.
fn brute_force_score(elapsed: f64, motion: f64, events: &[EventKind], th: &Thresholds) -> (ScoreStatus, f64) {
    if events.contains(&EventKind::TowerDetach) {
        return (ScoreStatus::Failed, 0.0);
    }
    if !events.contains(&EventKind::ScenarioComplete) {
        return (ScoreStatus::Failed, 0.0);
    }
    let metric = |v: f64, budget: f64, slope: f64| {
        if v <= budget {
            50.0
        } else {
            f64::max(0.0, 50.0 - slope * (v - budget))
        }
    };
    let mut deducted = 0.0;
    for e in events {
        deducted += match e {
            EventKind::Drop => 10.0,
            EventKind::ExcessiveForce => 5.0,
            EventKind::GlassBreak => 15.0,
            EventKind::OutOfView => 2.0,
            _ => 0.0,
        };
    }
    let eff =
        metric(elapsed, th.time_budget, th.time_slope) + metric(motion, th.motion_budget, th.motion_slope);
    (ScoreStatus::Completed, f64::max(0.0, eff - deducted))
}

fn scoring_oracle() -> Outcome {
    use EventKind::*;
    let th = bundled_scenario("wrist_articulation_1").unwrap().thresholds;
    let weights = PenaltyWeights::default();
    let kinds = [
        Grasp,
        Release,
        Drop,
        Touch,
        Placed,
        Aimed,
        GlassBreak,
        ExcessiveForce,
        OutOfView,
        IkDiverged,
        ActionComplete,
    ];
    let mut r = rng(5);
    let mut mismatches = Vec::new();
    let (mut failed, mut detached) = (0, 0);
    for i in 0..50 {
        let elapsed = r.gen_range(0.0..2.0 * th.time_budget);
        let motion = r.gen_range(0.0..3.0 * th.motion_budget);
        let mut seq: Vec<EventKind> = (0..r.gen_range(0..12))
            .map(|_| kinds[r.gen_range(0..kinds.len())])
            .collect();
        if i % 10 == 0 {
            let at = r.gen_range(0..=seq.len());
            seq.insert(at, TowerDetach);
        }
        if i % 7 != 3 {
            seq.push(ScenarioComplete);
        }
        let events: Vec<SessionEvent> = seq
            .iter()
            .enumerate()
            .map(|(t, k)| SessionEvent::new(t as u64, *k, None, None))
            .collect();
        let eff = EfficiencyState {
            elapsed,
            motion_accum: motion,
            last_frames: Vec::new(),
        };
        let got = finalize(&eff, &events, &th, &weights);
        let want = brute_force_score(elapsed, motion, &seq, &th);
        if (got.status, got.total) != want {
            mismatches.push(format!(
                "#{i}: got {:?}/{} want {:?}/{}",
                got.status, got.total, want.0, want.1
            ));
        }
        if got.status == ScoreStatus::Failed {
            failed += 1;
        }
        if seq.contains(&TowerDetach) {
            detached += 1;
            if got.failure_reason != Some(FailureReason::ImmediateFail(TowerDetach)) || got.total != 0.0 {
                mismatches.push(format!("#{i}: detach did not fail"));
            }
        }
    }

    let perfect = fixture_report("wrist_articulation_1");
    let detach = fixture_report("ring_tower_transfer_1_detach");
    let perfect_ok = perfect.status == ScoreStatus::Completed && perfect.total == 100.0;
    let detach_ok = detach.status == ScoreStatus::Failed
        && detach.total == 0.0
        && detach.failure_reason == Some(FailureReason::ImmediateFail(TowerDetach));
    outcome(
        mismatches.is_empty() && perfect_ok && detach_ok,
        format!(
            "50 combinations ({failed} failed, {detached} with tower detach), {} mismatches {:?}; perfect run {}; detach run {:?}/{}",
            mismatches.len(),
            mismatches,
            perfect.total,
            detach.status,
            detach.total
        ),
    )
}

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn fixture_replay(name: &str) -> String {
    let def = bundled_scenario(fixture_scenario(name)).unwrap();
    let log = fs::read_to_string(fixtures_dir().join(format!("{name}.jsonl"))).unwrap();
    run_replay(&def, &log, &EngineConfig::default())
        .unwrap()
        .report
        .to_canonical_json()
}

fn fixture_report(name: &str) -> Report {
    serde_json::from_str(&fixture_replay(name)).unwrap()
}

fn replay_determinism() -> Outcome {
    let mut bad = Vec::new();
    for name in FIXTURE_NAMES {
        let golden = fs::read_to_string(fixtures_dir().join(format!("golden/{name}.report.json"))).unwrap();
        let (a, b) = (fixture_replay(name), fixture_replay(name));
        if a != b || a != golden {
            bad.push(name);
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} fixture logs replayed twice, byte-identical to frozen reports; mismatched: {bad:?}",
            FIXTURE_NAMES.len()
        ),
    )
}

fn training_trend() -> Outcome {
    let cfg = EngineConfig::default();
    let def = bundled_scenario("wrist_articulation_1").unwrap();
    let families = [
        WristRunStyle {
            detour: 0.1,
            glass_hits: 2,
        },
        WristRunStyle {
            detour: 0.04,
            glass_hits: 1,
        },
        WristRunStyle {
            detour: 0.0,
            glass_hits: 0,
        },
    ];
    let mut totals = Vec::new();
    let mut motions = Vec::new();
    for style in families {
        let frames = wrist_articulation_run(&cfg, style);
        let out = replay_frames(&cfg, &def, &frames, |_| {}).unwrap();
        totals.push(out.report.total);
        motions.push(out.report.efficiency.economy_of_motion.value);
    }
    let increasing = totals.windows(2).all(|w| w[0] < w[1]);
    let shorter = motions.windows(2).all(|w| w[0] > w[1]);
    outcome(
        increasing && shorter,
        format!("path lengths {motions:.3?} -> totals {totals:.2?}"),
    )
}

fn cli_replay_speed() -> Outcome {
    let name = "sea_spikes_1_long";
    let log = fixtures_dir().join(format!("{name}.jsonl"));
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_teletwin"))
        .args(["replay", fixture_scenario(name), log.to_str().unwrap()])
        .output()
        .expect("binary runs");
    let wall = start.elapsed();
    if !out.status.success() {
        return outcome(false, format!("replay exited with {:?}", out.status.code()));
    }
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    let simulated = (report.ended_at_ms - report.started_at_ms) as f64 / 1000.0;
    outcome(
        wall < Duration::from_secs(5) && simulated >= 120.0,
        format!("{simulated:.1} s simulated replayed in {wall:.2?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("ik_convergence", ik_convergence),
        ("jacobian_cross_check", jacobian_cross_check),
        ("teleop_algebra", teleop_algebra),
        ("clutch_invariance", clutch_invariance),
        ("scoring_oracle", scoring_oracle),
        ("replay_determinism", replay_determinism),
        ("training_trend", training_trend),
        ("cli_replay_speed", cli_replay_speed),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
