use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector2, Vector3};
use proptest::prelude::*;

use teletwin_core::footboard::{detect_pedals, FootSample, PedalLayout, PedalState, Side};
use teletwin_core::kinematics::*;
use teletwin_core::scenario::{EventKind, SessionEvent, Thresholds};
use teletwin_core::scoring::{efficiency_points, finalize, EfficiencyState, PenaltyWeights, ScoreStatus};
use teletwin_core::teleop::*;

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-r..r).prop_map(Vector3::from)
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), 0.0..std::f64::consts::PI).prop_filter_map("zero axis", |(axis, angle)| {
        (axis.norm() > 1e-3).then(|| axis_angle(&axis, angle))
    })
}

fn pose() -> impl Strategy<Value = Pose> {
    (rotation(), vec3(1.0)).prop_map(|(r, t)| Pose::new(r, t))
}

fn joints(bound: f64) -> impl Strategy<Value = JointVector> {
    prop::array::uniform6(-bound..bound).prop_map(JointVector::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // Single targets can fail: a seed a few tenths of a radian from a joint
    // limit may overshoot into the limit and stall there (about 0.15% of
    // draws). The guarantee is the batch rate.
    #[test]
    fn ik_recovers_fk_targets(batch in prop::collection::vec((joints(2.6), joints(0.05)), 1000)) {
        let c = KinematicChain::default();
        let mut solved = 0;
        for (truth, perturb) in &batch {
            let target = forward_kinematics(&c, truth);
            let res = solve_ik(&c, &target, &(truth + perturb), &IkConfig::default());
            let err = pose_error(&target, &forward_kinematics(&c, &res.theta));
            if res.status == IkStatus::Converged && err.position_norm() < 1e-6 && err.orientation_norm() < 1e-6 {
                solved += 1;
            }
            for i in 0..JOINT_COUNT {
                let l = c.joints[i].limits;
                prop_assert!(res.theta[i] >= l.min && res.theta[i] <= l.max);
            }
        }
        prop_assert!(solved >= 990, "{solved}/1000 solved");
    }
}

proptest! {
    #[test]
    fn exp_log_round_trip(axis in vec3(1.0), angle in 0.0..3.1f64) {
        prop_assume!(axis.norm() > 1e-3);
        let omega = axis.normalize() * angle;
        let back = rotation_log(&rotation_exp(&omega));
        prop_assert!((back - omega).norm() < 1e-9);
    }

    #[test]
    fn rotation_matches_quaternion_oracle(a in rotation(), b in rotation()) {
        // nalgebra's quaternion algebra is an independent implementation.
        let q = |m: &Matrix3<f64>| {
            let [w, x, y, z] = rotation_to_quaternion(m);
            UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
        };
        let composed = (q(&a) * q(&b)).to_rotation_matrix().into_inner();
        prop_assert!((composed - a * b).amax() < 1e-12);
        prop_assert!((quaternion_to_rotation(rotation_to_quaternion(&a)) - a).amax() < 1e-12);
    }

    #[test]
    fn composition_stays_orthonormal(poses in prop::collection::vec(pose(), 1..40)) {
        let p = poses.iter().fold(Pose::identity(), |acc, p| acc * *p);
        prop_assert!(p.orthonormality_error() < 1e-12);
        prop_assert!((p.rotation.determinant() - 1.0).abs() < 1e-12);
        let id = p * p.inverse();
        prop_assert!((id.rotation - Matrix3::identity()).amax() < 1e-12);
        prop_assert!(id.translation.norm() < 1e-12);
    }

    #[test]
    fn orthonormalize_projects_noise(r in rotation(), noise in prop::array::uniform9(-1e-6..1e-6f64)) {
        let drifted = r + Matrix3::from_row_slice(&noise);
        let fixed = orthonormalize(&drifted);
        prop_assert!(orthonormality_error(&fixed) < 1e-14);
        prop_assert!((fixed - r).amax() < 1e-5);
    }

    #[test]
    fn wrap_is_idempotent_and_in_range(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        prop_assert_eq!(wrap_angle(w), w);
        let turns = (a - w) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn geometric_jacobian_matches_finite_differences(theta in joints(2.6)) {
        let c = KinematicChain::default();
        let diff = (geometric_jacobian(&c, &theta) - numeric_jacobian(&c, &theta, 1e-6)).amax();
        prop_assert!(diff < 1e-5, "max difference {diff}");
    }

    #[test]
    fn ik_never_leaves_limits(seed in joints(6.0), target in pose()) {
        let c = KinematicChain::default();
        let res = solve_ik(&c, &target, &seed, &IkConfig::default());
        prop_assert!(res.iterations <= IkConfig::default().max_iterations);
        for i in 0..JOINT_COUNT {
            let l = c.joints[i].limits;
            prop_assert!(res.theta[i] >= l.min && res.theta[i] <= l.max);
        }
    }

    #[test]
    fn teleop_orientation_identity_and_left_increment(
        m0 in pose(), ee0 in pose(), delta in rotation()
    ) {
        let a = anchor(&m0, &ee0);
        prop_assert!((desired_orientation(&a, &m0.rotation) - ee0.rotation).amax() < 1e-12);
        let r = desired_orientation(&a, &(delta * m0.rotation));
        prop_assert!((r - delta * ee0.rotation).amax() < 1e-12);
    }

    #[test]
    fn teleop_position_is_affine(
        m0 in pose(), ee0 in pose(), p in vec3(1.0), q in vec3(1.0),
        alpha in 0.01..1.0f64, s in 0.0..1.0f64
    ) {
        let a = anchor(&m0, &ee0);
        let mix = p * s + q * (1.0 - s);
        let lhs = desired_position(&a, &mix, alpha);
        let rhs = desired_position(&a, &p, alpha) * s + desired_position(&a, &q, alpha) * (1.0 - s);
        prop_assert!((lhs - rhs).norm() < 1e-12);
        let d = desired_position(&a, &(m0.translation + p), alpha) - ee0.translation;
        prop_assert!((d - p * alpha).norm() < 1e-12);
    }

    #[test]
    fn clutched_masters_do_not_move_the_target(
        m0 in pose(), ee0 in pose(), path in prop::collection::vec(pose(), 1..30), after in pose()
    ) {
        let cfg = TeleopConfig::default();
        let cam = CameraState::new(Pose::identity());
        let mut clutch = PedalState::default();
        clutch.pressed[teletwin_core::footboard::PedalId::Clutch.index()] = true;
        let (mut s, _) = step_teleop(&ArmTeleopState::new(m0, ee0), &cam, &m0, 0.0, &PedalState::default(), &cfg);
        let frozen = s.ee_target;
        for m in &path {
            s = step_teleop(&s, &cam, m, 0.5, &clutch, &cfg).0;
            prop_assert_eq!(s.ee_target, frozen);
        }
        let released = step_teleop(&s, &cam, &after, 0.0, &PedalState::default(), &cfg).0;
        prop_assert!((released.ee_target.translation - frozen.translation).norm() < 1e-12);
        prop_assert!((released.ee_target.rotation - frozen.rotation).amax() < 1e-12);
    }

    #[test]
    fn pedal_detection_is_a_function_of_its_inputs(
        stream in prop::collection::vec(
            (0.0..0.6f64, 0.0..0.4f64, 0.0..0.05f64, 0.0..0.6f64, 0.0..0.4f64, 0.0..0.05f64),
            1..50,
        )
    ) {
        let layout = PedalLayout::default();
        let feet: Vec<[FootSample; 2]> = stream
            .iter()
            .map(|&(x0, y0, h0, x1, y1, h1)| {
                [FootSample::at(Side::Left, x0, y0, h0), FootSample::at(Side::Right, x1, y1, h1)]
            })
            .collect();
        let run = || {
            let mut prev = PedalState::default();
            let mut out = Vec::new();
            for f in &feet {
                prev = detect_pedals(f, &layout, &prev);
                out.push(prev.clone());
            }
            out
        };
        let a = run();
        prop_assert_eq!(&a, &run());
        for (state, f) in a.iter().zip(&feet) {
            for foot in f {
                let expect = (foot.height < layout.press_height)
                    .then(|| layout.pedal_at(&foot.position))
                    .flatten();
                prop_assert_eq!(state.feet[foot.side.index()], expect);
            }
        }
    }

    #[test]
    fn pedal_lookup_prefers_smallest_id(x in 0.0..0.6f64, y in 0.0..0.4f64) {
        let layout = PedalLayout::default();
        let p = Vector2::new(x, y);
        let hits: Vec<_> = layout.pedals.iter().filter(|r| r.rect.contains(&p)).map(|r| r.id).collect();
        prop_assert_eq!(layout.pedal_at(&p), hits.into_iter().min());
    }

    #[test]
    fn extra_penalties_never_raise_the_total(
        elapsed in 0.0..300.0f64, motion in 0.0..10.0f64,
        base in prop::collection::vec(0usize..4, 0..10), extra in 0usize..4
    ) {
        let kinds = [EventKind::Drop, EventKind::ExcessiveForce, EventKind::GlassBreak, EventKind::OutOfView];
        let mut events: Vec<_> = base.iter().map(|&k| SessionEvent::new(0, kinds[k], None, None)).collect();
        events.push(SessionEvent::new(1, EventKind::ScenarioComplete, None, None));
        let eff = EfficiencyState { elapsed, motion_accum: motion, last_frames: vec![] };
        let t = Thresholds::default();
        let w = PenaltyWeights::default();
        let before = finalize(&eff, &events, &t, &w);
        events.insert(0, SessionEvent::new(0, kinds[extra], None, None));
        let after = finalize(&eff, &events, &t, &w);
        prop_assert!(after.total <= before.total);
        prop_assert_eq!(before.status, ScoreStatus::Completed);
        prop_assert!((0.0..=50.0).contains(&before.efficiency.total_time.points));
    }

    #[test]
    fn more_motion_never_earns_more_points(a in 0.0..20.0f64, b in 0.0..20.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(efficiency_points(hi, 3.0, 20.0) <= efficiency_points(lo, 3.0, 20.0));
    }

    #[test]
    fn tower_detach_always_fails(elapsed in 0.0..100.0f64, n in 0usize..5) {
        let mut events: Vec<_> = (0..n).map(|_| SessionEvent::new(0, EventKind::Drop, None, None)).collect();
        events.push(SessionEvent::new(3, EventKind::TowerDetach, None, None));
        events.push(SessionEvent::new(3, EventKind::ScenarioComplete, None, None));
        let eff = EfficiencyState { elapsed, motion_accum: 0.0, last_frames: vec![] };
        let b = finalize(&eff, &events, &Thresholds::default(), &PenaltyWeights::default());
        prop_assert_eq!(b.status, ScoreStatus::Failed);
        prop_assert_eq!(b.total, 0.0);
    }
}

mod scenario_runtime {
    use super::*;
    use teletwin_core::scenario::{bundled_scenario, ArmSample, RuntimeParams, ScenarioRun, StepInput};

    fn params() -> RuntimeParams {
        RuntimeParams {
            force_stiffness: 500.0,
            grip_close_threshold: 0.8,
            view_half_angle: 0.6,
        }
    }

    fn camera() -> CameraState {
        CameraState::new(Pose::look_at(
            Vector3::new(-0.05, 0.0, 0.55),
            Vector3::new(0.42, 0.0, 0.2),
        ))
    }

    fn arm(p: Vector3<f64>, grip: f64) -> ArmSample {
        ArmSample {
            tip: Pose::from_translation(p),
            target: Pose::from_translation(p),
            grip,
        }
    }

    proptest! {
        #[test]
        fn touches_count_exactly_and_nothing_follows_halt(
            steps in prop::collection::vec((vec3(0.02), any::<bool>()), 1..400)
        ) {
            let def = bundled_scenario("wrist_articulation_1").unwrap();
            let reps = def.actions[0].repetitions as usize;
            let mut run = ScenarioRun::new(def, params());
            let far = Vector3::new(0.3, -0.2, 0.3);
            let mut all = Vec::new();
            for (offset, aim) in steps {
                // Half the steps aim at the current target, half wander.
                let p = match (aim, run.current_target_center()) {
                    (true, Some(c)) => c + offset * 0.3,
                    _ => Vector3::new(0.40, 0.0, 0.2) + offset,
                };
                let halted = run.is_halted();
                let ev = run.step(&StepInput { arms: [arm(p, 0.0), arm(far, 0.0)], camera: camera() }, 0.01);
                if halted {
                    prop_assert!(ev.is_empty());
                }
                all.extend(ev);
            }
            let touches = all.iter().filter(|e| e.kind == EventKind::Touch).count();
            prop_assert!(touches <= reps);
            let complete = all.iter().position(|e| e.kind == EventKind::ActionComplete);
            if let Some(i) = complete {
                prop_assert_eq!(all[..i].iter().filter(|e| e.kind == EventKind::Touch).count(), reps);
                prop_assert_eq!(all.last().map(|e| e.kind), Some(EventKind::ScenarioComplete));
            } else {
                prop_assert!(touches < reps);
            }
            for w in all.windows(2) {
                prop_assert!((w[0].tick, w[0].kind) <= (w[1].tick, w[1].kind));
            }
        }

        #[test]
        fn one_holder_at_most_and_one_detach(
            steps in prop::collection::vec((vec3(0.03), vec3(0.03), 0.0..1.0f64, 0.0..1.0f64), 1..300)
        ) {
            let def = bundled_scenario("ring_tower_transfer_1").unwrap();
            let ring = def.object("ring").unwrap().shape.center();
            let mut run = ScenarioRun::new(def, params());
            let mut detaches = 0;
            for (a, b, ga, gb) in steps {
                let mut input = StepInput { arms: [arm(ring + a, ga), arm(ring + b, gb)], camera: camera() };
                input.arms[0].target = Pose::from_translation(ring + a * 1.2);
                let ev = run.step(&input, 0.01);
                detaches += ev.iter().filter(|e| e.kind == EventKind::TowerDetach).count();
                let holders = run.objects.iter().filter(|o| o.held_by.is_some()).count();
                prop_assert!(holders <= 1);
            }
            prop_assert!(detaches <= 1);
        }
    }
}
