mod common;

#[test]
fn reverse_mode_matches_central_differences() {
    let worst = common::gradient_check(2024, 208);
    assert!(worst < 1e-4, "worst relative error {worst:e}");
}
