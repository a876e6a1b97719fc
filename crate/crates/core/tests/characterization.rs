use mechlab::axioms::{
    check_sybil_proofness, expected_failures, independence_matrix, independence_mechanisms, Axiom,
    CheckContext, Verdict, WitnessDetail,
};
use mechlab::theorem::{self, TheoremContext};
use mechlab::{BidProfile, Mechanism, ProfileSampler, SearchGrid};

fn profiles(budget: usize) -> Vec<BidProfile> {
    ProfileSampler::new(2, 5, SearchGrid::default(), 42)
        .unwrap()
        .sample(budget)
}

#[test]
fn independence_pattern_on_a_small_sample() {
    let ctx = CheckContext::default();
    let m = independence_matrix(&independence_mechanisms(0.5, 4.0), &profiles(120), &ctx).unwrap();
    assert!(m.matches_expected, "{}", m.render_table());
    for row in &m.rows {
        assert_eq!(
            Some(row.characterizing_failures()),
            expected_failures(&row.mechanism)
        );
    }
    // paying c per unit of bid can exceed the value of a small share
    assert_eq!(
        m.row("proportional")
            .unwrap()
            .verdict(Axiom::IndividualRationality),
        Some(Verdict::Fail)
    );
}

#[test]
fn unexpected_rows_are_not_asserted() {
    let ctx = CheckContext::default();
    let mechs = vec![Mechanism::second_price(), Mechanism::proportional_myerson()];
    let m = independence_matrix(&mechs, &profiles(40), &ctx).unwrap();
    assert_eq!(
        m.row("proportional-myerson").unwrap().matches_expected,
        None
    );
    assert!(m.matches_expected);
}

#[test]
fn proportional_myerson_loses_to_a_sybil_on_two_bidders() {
    let ctx = CheckContext::default();
    let r =
        check_sybil_proofness(&Mechanism::proportional_myerson(), &profiles(500), &ctx).unwrap();
    assert_eq!(r.verdict, Verdict::Fail);
    let two_distinct = r.witnesses.iter().any(|w| {
        let b: Vec<f64> = w.profile.bids().collect();
        b.len() == 2 && b[0] != b[1] && w.magnitude > 1e-3
    });
    assert!(two_distinct);
    assert!(r
        .witnesses
        .iter()
        .all(|w| matches!(w.detail, WitnessDetail::Sybil { .. })));
}

#[test]
fn non_spa_rules_trip_some_step_of_the_argument() {
    let ctx = TheoremContext::default();
    let induction = BidProfile::from_bids(&[2.0, 7.0, 5.0]).unwrap();
    let spa =
        theorem::localize(&Mechanism::second_price(), 7.0, 3.0, 30, &induction, &ctx).unwrap();
    assert!(!spa.any(), "{spa:?}");
    for m in [Mechanism::lottery(), Mechanism::proportional_myerson()] {
        let loc = theorem::localize(&m, 7.0, 3.0, 30, &induction, &ctx).unwrap();
        assert!(loc.any(), "{}", m.name());
        assert!(loc.induction_witness, "{}", m.name());
    }
}

#[test]
fn proportional_lemma1_trace_matches_formula() {
    let ctx = TheoremContext::default();
    let t = theorem::lemma1_trace(&Mechanism::proportional_myerson(), 7.0, 3.0, 50, &ctx).unwrap();
    for s in &t.samples {
        let n = s.x;
        assert!((s.computed - 7.0 / (7.0 + (n - 1.0) * 3.0)).abs() <= 1e-12);
    }
}
