use tracklab::attractors::Numerics;
use tracklab::classify::{
    gamma_interval, lambda_star, shifted_tracks, switching_classify, CaseLabel, Classifier,
};
use tracklab::presets;
use tracklab::transitions::{MechanismKind, PhaseSign, RateProfile, TransitionMechanism};

fn rate(c: f64) -> TransitionMechanism {
    TransitionMechanism::constant_rate(presets::migration_pulse(), c).unwrap()
}

#[test]
fn allee_labels_split_at_unit_rate() {
    let m = presets::allee_migration();
    let cls = Classifier::new(&m, Numerics::default());
    for c in [0.7, 0.9, 0.98, 0.99] {
        assert_eq!(cls.classify(&rate(c)).unwrap().label, CaseLabel::C2, "c = {c}");
    }
    for c in [1.01, 1.5, 2.0] {
        assert_eq!(cls.classify(&rate(c)).unwrap().label, CaseLabel::A, "c = {c}");
    }
}

#[test]
fn allee_tristability_starts_between_dip_and_limit() {
    let m = presets::allee_migration();
    let num = Numerics::default();
    let iv = gamma_interval(&m, (0.5, 2.5), 9, 1e-3, (-200.0, 200.0), &num).unwrap();
    let lower = iv.lower.expect("left end inside the scan");
    assert!(lower.lo > 0.8 && lower.hi < 1.5, "{lower:?}");
}

#[test]
fn concave_classification_is_tracking_xor_blow_up() {
    let m = presets::concave_logistic();
    let cls = Classifier::new(&m, Numerics::default());
    for c in [0.25, 0.495] {
        let r = cls
            .classify(&TransitionMechanism::constant_rate(presets::arctan_transition(), c).unwrap())
            .unwrap();
        let ev = &r.evidence;
        let tracked = ev.attractive_to_attractive.is_some_and(|d| d < ev.track_tol);
        let blew = ev.forward_blow_up.is_some();
        assert!(tracked != blew, "c = {c}: {ev:?}");
        let expected = if c == 0.25 { CaseLabel::A } else { CaseLabel::C };
        assert_eq!(r.label, expected);
    }
}

#[test]
fn fast_rate_switch_matches_switching_criterion() {
    let m = presets::concave_logistic();
    let cls = Classifier::new(&m, Numerics::default());
    let p = presets::arctan_transition();
    let left = TransitionMechanism::constant_rate(p.clone(), 0.25).unwrap();
    let right = TransitionMechanism::constant_rate(p.clone(), 0.74).unwrap();
    let sw = switching_classify(&cls, &left, &right, 0.0).unwrap();
    assert_eq!(sw.label, CaseLabel::A);
    let delta = RateProfile::new(presets::sigmoid_blend(0.25, 0.74)).unwrap();
    for d in [10.0, 20.0, 40.0] {
        let mech = TransitionMechanism::new(
            MechanismKind::TimeDependentRate { delta: delta.clone(), d },
            p.clone(),
        )
        .unwrap();
        assert_eq!(cls.classify(&mech).unwrap().label, sw.label, "d = {d}");
    }
}

#[test]
fn shifts_beyond_lambda_star_flip_the_label() {
    let m = presets::concave_logistic();
    let num = Numerics::default();
    let p = presets::arctan_transition();
    let tol = 1e-3;
    let ls = lambda_star(&m, &p, 0.495, 0.0, PhaseSign::Minus, (-0.5, 0.5), tol, &num).unwrap();
    assert!(ls.value > 0.0);
    let mech = TransitionMechanism::new(MechanismKind::Phase { c: 0.495, offset: 0.0 }, p).unwrap();
    assert!(shifted_tracks(&m, &mech, ls.value + 10.0 * tol, &num).unwrap());
    assert!(!shifted_tracks(&m, &mech, ls.value - 10.0 * tol, &num).unwrap());
}
