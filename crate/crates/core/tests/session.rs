use ifind_sim::kinematics::{solve_ik, IkOptions, KinematicChain, Pose};
use ifind_sim::session::*;
use ifind_sim::surface::phantom;
use nalgebra::{UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn views() -> Vec<StandardView> {
    standard_views(&phantom())
}

fn view(name: ViewName) -> StandardView {
    views().into_iter().find(|v| v.name == name).unwrap()
}

fn record(operator: Operator, grade: Grade, tick: u64) -> GradeRecord {
    GradeRecord {
        view: ViewName::PancreasTs,
        operator,
        grade,
        position_error: 0.0,
        orientation_error: 0.0,
        normal_force: 10.0,
        tick,
    }
}

/// 162 sonographer records (114 good, 44 acceptable, 4 poor) and
/// 90 robot records (31 good, 42 acceptable, 17 poor).
fn study_records() -> Vec<GradeRecord> {
    let mut out = Vec::new();
    for (op, good, acceptable, poor) in [
        (Operator::Sonographer, 114, 44, 4),
        (Operator::Robot, 31, 42, 17),
    ] {
        for (grade, n) in [(Grade::Good, good), (Grade::Acceptable, acceptable), (Grade::Poor, poor)] {
            for _ in 0..n {
                let tick = out.len() as u64;
                out.push(record(op, grade, tick));
            }
        }
    }
    out
}

#[test]
fn bundled_views_cover_the_seven_standard_views() {
    let views = views();
    assert_eq!(views.len(), 7);
    for name in ViewName::ALL {
        let v = views.iter().find(|v| v.name == name).unwrap();
        v.validate().unwrap();
        assert_eq!(ViewName::parse(name.key()), Some(name));
    }
    let upper = views.iter().filter(|v| v.region == Region::Upper).count();
    assert_eq!(upper, 5);
}

#[test]
fn view_targets_lie_on_the_phantom_and_face_it() {
    let mesh = phantom();
    for v in views() {
        let sp = mesh.closest_point(&v.target.surface_point);
        assert!(sp.distance < 1e-9);
        let pose = v.target.probe_pose();
        assert!((pose.axis() + v.target.normal).norm() < 1e-9);
    }
}

#[test]
fn view_targets_are_reachable_by_the_single_arm() {
    let chain = KinematicChain::preset("ifind-v2").unwrap();
    for v in views() {
        let q = solve_ik(&chain, &v.target.probe_pose(), &chain.home(), &IkOptions::default());
        assert!(q.is_ok(), "{}: {:?}", v.name, q.err());
    }
}

#[test]
fn exact_pose_mid_window_is_good() {
    let v = view(ViewName::PancreasTs);
    let mid = 0.5 * (v.force_window[0] + v.force_window[1]);
    let r = grade_acquisition(&v, &v.target.probe_pose(), mid, Operator::Robot, 7);
    assert_eq!(r.grade, Grade::Good);
    assert_eq!(r.tick, 7);
    assert!(r.position_error < 1e-12 && r.orientation_error < 1e-12);
}

#[test]
fn pose_error_of_nine_tenths_tolerance_is_acceptable() {
    let v = view(ViewName::AortaCoeliacAxis);
    let target = v.target.probe_pose();
    let shifted = Pose::new(
        target.position + Vector3::new(0.9 * v.position_tolerance, 0.0, 0.0),
        target.orientation,
    );
    let r = grade_acquisition(&v, &shifted, 10.0, Operator::Robot, 0);
    assert!((r.position_error - 0.9 * v.position_tolerance).abs() < 1e-12);
    assert_eq!(r.grade, Grade::Acceptable);

    let turned = Pose::new(
        target.position,
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), 0.9 * v.orientation_tolerance) * target.orientation,
    );
    assert_eq!(grade_acquisition(&v, &turned, 10.0, Operator::Robot, 0).grade, Grade::Acceptable);
}

#[test]
fn zero_force_is_poor() {
    let v = view(ViewName::GallbladderLs);
    let r = grade_acquisition(&v, &v.target.probe_pose(), 0.0, Operator::Sonographer, 0);
    assert_eq!(r.grade, Grade::Poor);
}

#[test]
fn rubric_band_edges() {
    let v = view(ViewName::PancreasTs);
    let [lo, hi] = v.force_window;
    let tol = v.position_tolerance;
    assert_eq!(grade_errors(&v, 0.5 * tol, 0.0, lo), Grade::Good);
    assert_eq!(grade_errors(&v, 0.5 * tol, 0.0, hi), Grade::Good);
    assert_eq!(grade_errors(&v, 0.0, 0.0, hi * 1.2), Grade::Acceptable);
    assert_eq!(grade_errors(&v, 0.0, 0.0, lo * 0.8), Grade::Acceptable);
    assert_eq!(grade_errors(&v, 0.0, 0.0, hi * 1.21), Grade::Poor);
    assert_eq!(grade_errors(&v, 0.0, 0.0, lo * 0.79), Grade::Poor);
    assert_eq!(grade_errors(&v, tol, 0.0, 10.0), Grade::Acceptable);
    assert_eq!(grade_errors(&v, tol * 1.0001, 0.0, 10.0), Grade::Poor);
    assert_eq!(grade_errors(&v, 0.0, v.orientation_tolerance * 1.0001, 10.0), Grade::Poor);
}

#[test]
fn study_percentages() {
    let summary = summarize_grades(&study_records());
    let s = summary.get(Operator::Sonographer);
    let r = summary.get(Operator::Robot);
    assert_eq!((s.total, s.adequate()), (162, 158));
    assert_eq!((r.total, r.adequate()), (90, 73));
    // Long division: 158/162 = 0.97530..., 73/90 = 0.81111...
    assert_eq!(format_percent(s.adequate_fraction()), "97.5%");
    assert_eq!(format_percent(r.adequate_fraction()), "81.1%");
    // 114/158 = 0.72151..., 31/73 = 0.42465...
    assert_eq!(format_percent(s.good_fraction()), "72.2%");
    assert_eq!(format_percent(r.good_fraction()), "42.5%");
}

#[test]
fn empty_summary_is_undefined() {
    let summary = summarize_grades(&[]);
    for op in Operator::ALL {
        let c = summary.get(op);
        assert_eq!(c, GradeCounts::default());
        assert_eq!(c.adequate_fraction(), None);
        assert_eq!(format_percent(c.good_fraction()), "n/a");
    }
}

// Exact chi-square values from rational arithmetic on the 2x2 tables:
// 10108/495 and 677048064/35957245. p-values from erfc(sqrt(x/2)) at 30 digits.
const CHI_ADEQUATE: f64 = 20.42020202020202;
const P_ADEQUATE: f64 = 6.217003343451812e-6;
const CHI_GOOD: f64 = 18.829253019801712;
const P_GOOD: f64 = 1.4295762985741524e-5;

#[test]
fn chi_square_matches_hand_oracle() {
    let t = compare_proportions(158, 162, 73, 90).unwrap();
    assert!((t.chi_square - CHI_ADEQUATE).abs() < 1e-6);
    assert!((t.p_value - P_ADEQUATE).abs() / P_ADEQUATE < 1e-6);
    assert!(t.p_value < 1e-4);
    let t = compare_proportions(114, 158, 31, 73).unwrap();
    assert!((t.chi_square - CHI_GOOD).abs() < 1e-6);
    assert!((t.p_value - P_GOOD).abs() / P_GOOD < 1e-6);
    assert!(t.p_value < 1e-4);
}

#[test]
fn identical_proportions_give_zero() {
    let t = compare_proportions(50, 100, 50, 100).unwrap();
    assert_eq!(t.chi_square, 0.0);
    assert_eq!(t.p_value, 1.0);
}

#[test]
fn degenerate_and_invalid_tables() {
    assert_eq!(compare_proportions(10, 10, 5, 5), Err(SessionError::DegenerateTable));
    assert_eq!(compare_proportions(0, 10, 0, 5), Err(SessionError::DegenerateTable));
    assert!(matches!(compare_proportions(5, 4, 1, 2), Err(SessionError::InvalidArgument(_))));
    assert!(matches!(compare_proportions(0, 0, 1, 2), Err(SessionError::InvalidArgument(_))));
}

fn response(id: &str, robot: RobotVersion, answers: [u8; 7]) -> QuestionnaireResponse {
    QuestionnaireResponse {
        volunteer: id.into(),
        robot,
        answers,
    }
}

#[test]
fn all_fours() {
    let rs: Vec<_> = (0..9).map(|i| response(&format!("v{i}"), RobotVersion::V3, [4; 7])).collect();
    let summary = summarize_questionnaire(&rs).unwrap();
    for s in &summary.versions[&RobotVersion::V3] {
        assert_eq!(s.median, 4);
        assert_eq!(s.iqr(), 0);
        assert_eq!(s.counts, [0, 0, 0, 0, 9]);
    }
}

#[test]
fn order_statistics_of_one_to_four() {
    let rs: Vec<_> = (0..5u8)
        .map(|a| response(&format!("v{a}"), RobotVersion::V2, [a, 2, 2, 2, 2, 2, 2]))
        .collect();
    let s = summarize_questionnaire(&rs).unwrap().versions[&RobotVersion::V2][0];
    assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (0, 1, 2, 3, 4));
    assert_eq!(s.counts, [1; 5]);
    // Even count takes the lower median.
    assert_eq!(AnswerStats::of(&[1, 2, 3, 4]).unwrap().median, 2);
    assert_eq!(AnswerStats::of(&[]), None);
}

#[test]
fn v2_cohort_of_twenty() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut rs: Vec<_> = (0..20)
        .map(|i| {
            let mut a = [0u8; 7];
            a.iter_mut().for_each(|v| *v = rng.random_range(0..=4));
            response(&format!("v2-{i:02}"), RobotVersion::V2, a)
        })
        .collect();
    rs.push(response("v3-00", RobotVersion::V3, [3; 7]));
    let summary = summarize_questionnaire(&rs).unwrap();
    let v2 = &summary.versions[&RobotVersion::V2];
    assert_eq!(v2.len(), 7);
    for s in v2 {
        assert_eq!(s.n, 20);
        assert_eq!(s.counts.iter().sum::<usize>(), 20);
    }
    assert_eq!(summary.versions[&RobotVersion::V3][0].n, 1);
}

#[test]
fn out_of_scale_answer_is_rejected() {
    let rs = [response("v9", RobotVersion::V2, [1, 2, 5, 0, 0, 0, 0])];
    assert_eq!(
        summarize_questionnaire(&rs),
        Err(SessionError::InvalidAnswer {
            volunteer: "v9".into(),
            question: 3,
            value: 5
        })
    );
}

#[test]
fn bundled_questionnaire_schema() {
    let schema = QuestionnaireSchema::bundled();
    let ids: Vec<_> = schema.questions.iter().map(|q| q.id.as_str()).collect();
    assert_eq!(ids, ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7"]);
    assert_eq!(schema.scale.first().unwrap().label, "strongly disagree");
    assert_eq!(schema.scale.last().unwrap().label, "strongly agree");
}

fn sample_log() -> SessionLog {
    let mut log = SessionLog::new();
    log.append(SessionEvent::new(0, EventKind::Command, serde_json::json!({"kind": "move_to", "request_id": 1})))
        .unwrap();
    log.append(SessionEvent::new(3, EventKind::Telemetry, serde_json::json!({"tick": 3, "force": 0.1 + 0.2})))
        .unwrap();
    for r in study_records().iter().take(5) {
        let mut r = r.clone();
        r.tick = 4;
        log.append(SessionEvent::grade(&r)).unwrap();
    }
    log.append(SessionEvent::questionnaire(9, &response("v1", RobotVersion::V2, [3, 1, 2, 4, 4, 4, 3])))
        .unwrap();
    log
}

#[test]
fn append_then_load_is_identical() {
    let log = sample_log();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.ndjson");
    log.save(&path).unwrap();
    let loaded = load_session(&path).unwrap();
    assert_eq!(loaded, log);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, loaded.to_ndjson().into_bytes());
}

#[test]
fn earlier_tick_is_rejected() {
    let log = sample_log();
    let err = append_event(log.clone(), SessionEvent::new(8, EventKind::Safety, serde_json::json!({})));
    assert_eq!(err, Err(SessionError::TickRegression { last: 9, got: 8 }));
    let mut w = SessionWriter::new(Vec::new());
    w.append(&SessionEvent::new(5, EventKind::Command, 1)).unwrap();
    assert!(matches!(
        w.append(&SessionEvent::new(4, EventKind::Command, 1)),
        Err(SessionError::TickRegression { .. })
    ));
    assert_eq!(w.count(), 1);
    let text = format!("{}\n{}\n", SessionEvent::new(5, EventKind::Command, 1).to_line(), SessionEvent::new(2, EventKind::Command, 1).to_line());
    assert_eq!(SessionLog::from_ndjson(&text), Err(SessionError::TickRegression { last: 5, got: 2 }));
}

#[test]
fn malformed_line_reports_its_number() {
    let text = format!("{}\nnot json\n", SessionEvent::new(0, EventKind::Command, 1).to_line());
    assert!(matches!(SessionLog::from_ndjson(&text), Err(SessionError::Parse { line: 2, .. })));
}

#[test]
fn ten_thousand_events_one_line_each() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let kinds = [EventKind::Command, EventKind::Telemetry, EventKind::Grade, EventKind::Safety, EventKind::Questionnaire];
    let mut log = SessionLog::new();
    let mut tick = 0;
    for _ in 0..10_000 {
        tick += rng.random_range(0..3u64);
        let kind = kinds[rng.random_range(0..kinds.len())];
        let payload = serde_json::json!({"x": rng.random::<f64>(), "s": "a\nb"});
        log.append(SessionEvent::new(tick, kind, payload)).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.ndjson");
    log.save(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 10_000);
    assert_eq!(load_session(&path).unwrap(), log);
}

#[test]
fn report_shows_study_tables_and_answers() {
    let mut log = SessionLog::new();
    for r in study_records() {
        log.append(SessionEvent::grade(&r)).unwrap();
    }
    let t = log.last_tick().unwrap();
    log.append(SessionEvent::questionnaire(t, &response("vol-01", RobotVersion::V3, [3, 2, 2, 4, 4, 4, 3])))
        .unwrap();
    let report = SessionReport::from_log(&log).unwrap();
    let text = report.render();
    assert!(text.contains("97.5%"), "{text}");
    assert!(text.contains("81.1%"));
    assert!(text.contains("72.2%"));
    assert!(text.contains("42.5%"));
    assert!(text.contains("chi-square 20.420202"));
    assert!(text.contains("vol-01       v3  3 2 2 4 4 4 3"), "{text}");
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["all_views"]["summary"]["operators"]["robot"]["total"], 90);
}

#[test]
fn empty_report_has_zero_count_tables() {
    let report = SessionReport::from_log(&SessionLog::new()).unwrap();
    let text = report.render();
    let rows: Vec<&str> = text.lines().filter(|l| l.trim_start().starts_with("sonographer")).collect();
    assert_eq!(rows.len(), 2, "{text}");
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols, ["sonographer", "0", "0", "0", "0", "n/a", "n/a"]);
    }
    assert!(!text.contains("chi-square"));
}

fn grade_rank(g: Grade) -> u8 {
    match g {
        Grade::Good => 0,
        Grade::Acceptable => 1,
        Grade::Poor => 2,
    }
}

proptest! {
    #[test]
    fn grade_never_improves_with_pose_error(e1 in 0.0f64..0.03, extra in 0.0f64..0.03, r in 0.0f64..0.2, f in 0.0f64..25.0) {
        let v = view(ViewName::PancreasTs);
        let near = grade_errors(&v, e1, r, f);
        let far = grade_errors(&v, e1 + extra, r, f);
        prop_assert!(grade_rank(far) >= grade_rank(near));
    }

    #[test]
    fn summary_counts_partition(grades in prop::collection::vec((0u8..3, any::<bool>()), 0..200)) {
        let records: Vec<_> = grades.iter().enumerate().map(|(i, &(g, robot))| {
            let grade = [Grade::Good, Grade::Acceptable, Grade::Poor][g as usize];
            let op = if robot { Operator::Robot } else { Operator::Sonographer };
            record(op, grade, i as u64)
        }).collect();
        let s = summarize_grades(&records);
        let mut total = 0;
        for op in Operator::ALL {
            let c = s.get(op);
            prop_assert_eq!(c.good + c.acceptable + c.poor, c.total);
            for f in [c.adequate_fraction(), c.good_fraction()].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&f));
            }
            total += c.total;
        }
        prop_assert_eq!(total, records.len());
    }

    #[test]
    fn comparison_is_symmetric(a_t in 1u64..500, b_t in 1u64..500, fa in 0.0f64..1.0, fb in 0.0f64..1.0) {
        let a = (fa * a_t as f64) as u64;
        let b = (fb * b_t as f64) as u64;
        match (compare_proportions(a, a_t, b, b_t), compare_proportions(b, b_t, a, a_t)) {
            (Ok(x), Ok(y)) => {
                prop_assert!((x.chi_square - y.chi_square).abs() <= 1e-12 * x.chi_square.max(1.0));
                prop_assert!((x.p_value - y.p_value).abs() <= 1e-12);
            }
            (Err(x), Err(y)) => prop_assert_eq!(x, y),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn medians_ignore_order(mut answers in prop::collection::vec(0u8..=4, 1..60), seed in any::<u64>()) {
        let before = AnswerStats::of(&answers).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..answers.len()).rev() {
            answers.swap(i, rng.random_range(0..=i));
        }
        prop_assert_eq!(AnswerStats::of(&answers).unwrap(), before);
    }
}
