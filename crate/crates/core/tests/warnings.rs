use tracklab::attractors::{pullback_repulsive, Numerics, Role};
use tracklab::classify::{CaseLabel, Classifier};
use tracklab::ews::{
    ews_region, ftle_series, m_curve, reaction_base, reaction_region, reaction_run, safe_no_return, uniform_grid,
    upper_pullback, warning_time, Conclusion, EwsConfig, Outcome, ReactionSettings,
};
use tracklab::presets;
use tracklab::transitions::{Profile, RateProfile, TransitionMechanism};

const L_ALLEE: f64 = -0.4139;

fn rate(c: f64) -> tracklab::Result<TransitionMechanism> {
    TransitionMechanism::constant_rate(presets::migration_pulse(), c)
}

#[test]
fn no_transition_no_warning() {
    let m = presets::allee_migration();
    let cls = Classifier::new(&m, Numerics::default());
    let mech = TransitionMechanism::constant_rate(Profile::Constant { value: 1.5 }, 1.0).unwrap();
    let (u, _) = upper_pullback(&cls, &mech, Some(400.0)).unwrap();
    let s = ftle_series(&m, &mech, &u, 50.0, &uniform_grid(-350.0, 350.0, 0.5), "u").unwrap();
    assert_eq!(warning_time(&s, &EwsConfig::new(0.6, L_ALLEE).unwrap()), None);
}

#[test]
fn near_critical_warning_precedes_extinction() {
    let m = presets::allee_migration();
    let cls = Classifier::new(&m, Numerics::default());
    let mech = rate(0.99).unwrap();
    let (u, h) = upper_pullback(&cls, &mech, Some(400.0)).unwrap();
    let grid = uniform_grid(-400.0, 400.0, 0.1);
    let s = ftle_series(&m, &mech, &u, 50.0, &grid, "u").unwrap();
    let t1 = warning_time(&s, &EwsConfig::new(0.6, L_ALLEE).unwrap()).expect("warning fires");
    let future = cls.limit_structure(1.5, h).unwrap();
    let (up, low) = (future.get(Role::Upper).unwrap(), future.get(Role::Lower).unwrap());
    let extinct = grid
        .iter()
        .copied()
        .find(|&t| {
            let l = low.eval(t).unwrap();
            (u.eval(t).unwrap() - l).abs() < 1e-3 * (up.eval(t).unwrap() - l)
        })
        .expect("u reaches the lower attractor");
    assert!(t1 < extinct, "t1 {t1} extinction {extinct}");
}

#[test]
fn detection_regions_shrink_with_window_and_grow_with_kappa() {
    let m = presets::allee_migration();
    let cls = Classifier::new(&m, Numerics::default());
    let kappas = [0.5, 0.99];
    let rates = [0.02, 0.5, 0.99, 1.01, 2.0];
    let r50 = ews_region(&cls, rate, &kappas, &rates, 50.0, (-400.0, 400.0), 0.1, L_ALLEE).unwrap();
    let r100 = ews_region(&cls, rate, &kappas, &rates, 100.0, (-400.0, 400.0), 0.1, L_ALLEE).unwrap();
    let hit = |g: &tracklab::ews::RegionGrid, i: usize, j: usize| g.cell(i, j).outcome == Outcome::Detected(true);
    assert!(hit(&r50, 0, 2) && hit(&r50, 0, 3), "neighbourhood of the critical rate");
    assert!(hit(&r50, 0, 0), "low-rate band");
    assert!((0..rates.len()).any(|j| hit(&r50, 0, j) && !hit(&r100, 0, j)));
    for j in 0..rates.len() {
        assert!(!hit(&r100, 0, j) || hit(&r50, 0, j), "T=100 inside T=50 at c = {}", rates[j]);
        assert!(!hit(&r50, 0, j) || hit(&r50, 1, j), "smaller kappa inside larger at c = {}", rates[j]);
    }
}

#[test]
fn constant_rate_profile_gives_frozen_repeller() {
    let m = presets::holling_predation();
    let cls = Classifier::new(&m, Numerics::default());
    let c = 25.0;
    let delta = RateProfile::new(Profile::Constant { value: c }).unwrap();
    let grid = uniform_grid(-3.0, 3.0, 0.5);
    let curve = m_curve(&cls, &presets::predation_dip(), &delta, &grid).unwrap();
    let mech = TransitionMechanism::constant_rate(presets::predation_dip(), c).unwrap();
    let h = cls.horizon_for(&mech);
    let fut = cls.limit_structure(0.0, h).unwrap();
    let r = pullback_repulsive(&m, &mech, fut.repeller().unwrap(), h, Some(-3.0), &cls.numerics).unwrap();
    for (t, v) in curve {
        assert!((v - r.eval(t).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn rate_above_critical_cannot_tip() {
    let m = presets::holling_predation();
    let cls = Classifier::new(&m, Numerics::default());
    let delta = RateProfile::new(Profile::Constant { value: 30.0 }).unwrap();
    let rep = safe_no_return(&cls, &presets::predation_dip(), &delta, 19.65, 0.0, &[0.0, 1.0]).unwrap();
    assert_eq!(rep.conclusion, Conclusion::NoTippingPossible);
    assert!(rep.safe.is_empty() && rep.no_return.is_empty() && rep.warning_point.is_none());
}

#[test]
fn null_reaction_keeps_unreacted_outcome() {
    let m = presets::holling_predation();
    let cls = Classifier::new(&m, Numerics::default());
    let delta = presets::reaction_rate_profile(1.0);
    let set = ReactionSettings { b: 1.0, window: 50.0, reference: -0.4545, grid_step: 0.05 };
    let base = reaction_base(&cls, &presets::predation_dip(), &delta, &set).unwrap();
    assert_eq!(base.unreacted, CaseLabel::C2);
    let o = reaction_run(&cls, &base, &delta, 0.0, 0.5, &set).unwrap();
    assert_eq!(o.label, base.unreacted);
    let g = reaction_region(&cls, &presets::predation_dip(), &delta, &[0.0], &[0.5], &set).unwrap();
    assert_eq!(g.cells[0].outcome, Outcome::Case(CaseLabel::C2));
}
