use fesrl_core::oracles::{cma_oracles, gradient_oracles, plant_oracles, OracleReport};

fn assert_all(reports: Vec<OracleReport>) {
    for r in &reports {
        println!(
            "{}: {} (value {:.3e}, limit {:.1e}) {}",
            r.name, r.passed, r.value, r.limit, r.detail
        );
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

#[test]
fn gradients_match_central_differences() {
    assert_all(gradient_oracles());
}

#[test]
fn plant_matches_closed_forms() {
    assert_all(plant_oracles());
}

#[test]
fn cma_es_converges_and_is_rank_based() {
    assert_all(cma_oracles());
}
