use dpaudit::corpus::{all_cases, run_matrix, MatrixConfig, Variant};
use dpaudit::validator::ViolationKind;

#[test]
fn full_matrix_matches_manifest() {
    let m = run_matrix(&all_cases(), &MatrixConfig::default());
    println!("{}", m.to_text());
    assert!(m.passed);
    assert_eq!(m.rows.len(), 20);
}

#[test]
fn disabling_a_check_breaks_the_matrix() {
    let mut cfg = MatrixConfig { distributional: false, ..Default::default() };
    cfg.validator.disabled.insert(ViolationKind::SensitivityViolation);
    let m = run_matrix(&all_cases(), &cfg);
    assert!(!m.passed);
    let missed: Vec<_> = m.rows.iter().filter(|r| !r.ok).map(|r| (r.name.as_str(), r.variant)).collect();
    assert!(missed.contains(&("scaled_count", Variant::Buggy)), "{missed:?}");
    assert!(missed.iter().all(|(_, v)| *v == Variant::Buggy));
}
