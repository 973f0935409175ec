mod common;

use common::suites;

#[test]
fn uncertainty_matches_population_variance_of_mc_passes() {
    suites::variance_suite().unwrap();
}

#[test]
fn mask_matches_threshold_rule() {
    suites::mask_suite().unwrap();
}

#[test]
fn ema_follows_geometric_law() {
    suites::ema_suite().unwrap();
}

#[test]
fn small_loss_selection_matches_sort_and_take() {
    suites::small_loss_suite().unwrap();
}

#[test]
fn bio_round_trips_legal_sequences() {
    suites::bio_suite().unwrap();
}

#[test]
fn span_metrics_match_hand_counts() {
    suites::metric_suite().unwrap();
}
