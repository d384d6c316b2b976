use std::collections::BTreeMap;

use proptest::prelude::*;
use tracklab::attractors::{
    anchor_sensitivity, limit_hyperbolic_solutions, pullback_attractive, pullback_repulsive, transition_rhs,
    Numerics, Role,
};
use tracklab::classify::Classifier;
use tracklab::ews::{ftle_series, ftle_with, uniform_grid, warning_time, EwsConfig, FtleSeries};
use tracklab::integrator::{integrate, IntegratorConfig};
use tracklab::models::{make_model, AdditiveShift, CoefficientFunction as C, Family, VectorField, VectorFieldModel};
use tracklab::presets;
use tracklab::transitions::TransitionMechanism;

fn family_models() -> Vec<VectorFieldModel> {
    let build = |family, pairs: Vec<(&str, C)>| {
        let map: BTreeMap<String, C> = pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        make_model(family, &map).unwrap()
    };
    vec![
        presets::allee_migration(),
        presets::concave_logistic(),
        presets::holling_predation(),
        build(Family::Gompertz, vec![("r", C::sin(1.0, 0.5, 1.0)), ("K", C::constant(10.0))]),
        build(Family::BevertonHolt, vec![("r", C::sin2(1.0, 0.5, 0.7)), ("alpha", C::constant(0.2))]),
        build(
            Family::AlleeMultiplicativeCubic,
            vec![("r", C::constant(1.0)), ("K", C::sin(20.0, 2.0, 0.3)), ("S", C::constant(3.0))],
        ),
        build(
            Family::AlleeHolling2,
            vec![("r", C::constant(1.0)), ("K", C::constant(50.0)), ("a", C::constant(8.0)), ("b", C::constant(5.0))],
        ),
    ]
}

fn central(g: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (g(x + h) - g(x - h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivatives_match_finite_differences(
        idx in 0usize..7, t in -50.0f64..50.0, u in 0.02f64..0.98, gamma in 0.0f64..1.5,
    ) {
        let models = family_models();
        let m = &models[idx];
        let (lo, hi) = m.state_box();
        let x = (lo.max(0.0) + 0.5) + u * (hi - lo.max(0.0) - 0.5);
        let fd = central(|y| m.f(t, y, gamma), x);
        let fx = m.fx(t, x, gamma);
        prop_assert!((fx - fd).abs() <= 1e-6 * fx.abs().max(1.0), "{}: fx {} fd {}", m.family().name(), fx, fd);
        if let Some(fxx) = m.fxx(t, x, gamma) {
            let fd2 = central(|y| m.fx(t, y, gamma), x);
            prop_assert!((fxx - fd2).abs() <= 1e-6 * fxx.abs().max(1.0));
        }
    }

    #[test]
    fn solutions_preserve_order(x1 in 1.0f64..100.0, dx in 1e-3f64..50.0, t0 in -60.0f64..20.0) {
        let m = presets::allee_migration();
        let mech = TransitionMechanism::constant_rate(presets::migration_pulse(), 1.01).unwrap();
        let cfg = IntegratorConfig::default();
        let a = integrate(transition_rhs(&m, &mech), t0, x1, t0 + 30.0, &cfg).unwrap();
        let b = integrate(transition_rhs(&m, &mech), t0, x1 + dx, t0 + 30.0, &cfg).unwrap();
        let tol = 1e-8 * (x1 + dx).max(100.0);
        prop_assert!(b.inf_difference(&a, t0, t0 + 30.0).unwrap() >= -tol);
        prop_assert!(b.terminal().1 - a.terminal().1 >= -tol);
    }

    #[test]
    fn larger_rhs_gives_larger_solution(x0 in 1.0f64..100.0, lambda in 1e-3f64..0.5, t0 in -60.0f64..20.0) {
        let m = presets::allee_migration();
        let up = AdditiveShift { inner: &m, lambda };
        let cfg = IntegratorConfig::default();
        let a = integrate(|t, x| m.f(t, x, 1.5), t0, x0, t0 + 30.0, &cfg).unwrap();
        let b = integrate(|t, x| up.f(t, x, 1.5), t0, x0, t0 + 30.0, &cfg).unwrap();
        prop_assert!(b.inf_difference(&a, t0, t0 + 30.0).unwrap() >= -1e-8 * x0.max(100.0));
    }

    #[test]
    fn backward_run_retraces_forward_run(x0 in 1.0f64..100.0, t0 in -40.0f64..40.0, span in 0.5f64..5.0) {
        let m = presets::allee_migration();
        let mech = TransitionMechanism::constant_rate(presets::migration_pulse(), 1.01).unwrap();
        let cfg = IntegratorConfig::default();
        let fwd = integrate(transition_rhs(&m, &mech), t0, x0, t0 + span, &cfg).unwrap();
        let (t1, x1) = fwd.terminal();
        let back = integrate(transition_rhs(&m, &mech), t1, x1, t0, &cfg).unwrap();
        let w = 0.999999 * (t1 - t0);
        let contraction = ftle_series(&m, &mech, &fwd, w, &[t1], "x").unwrap().values[0];
        let tol = 1e-7 * x0.max(1.0) * (-w * contraction).exp().max(1.0);
        prop_assert!((back.terminal().1 - x0).abs() <= tol);
        let mid = t0 + 0.5 * span;
        prop_assert!((back.eval(mid).unwrap() - fwd.eval(mid).unwrap()).abs() <= tol);
    }

    #[test]
    fn ftle_exact_on_linear_fields(
        alpha in -1.0f64..1.0, beta in 0.0f64..1.0, omega in 0.1f64..3.0, phase in 0.0f64..6.0, window in 5.0f64..60.0,
    ) {
        let a = move |t: f64| alpha + beta * (omega * t + phase).sin();
        let traj = integrate(move |t, x| a(t) * x, -100.0, 0.0, 20.0, &IntegratorConfig::default()).unwrap();
        let grid = uniform_grid(-100.0 + window, 20.0, 1.7);
        let s = ftle_with(&traj, &|t, _| a(t), window, &grid, "zero").unwrap();
        for (&t, &v) in s.times.iter().zip(&s.values) {
            let prim = |s: f64| alpha * s - beta / omega * (omega * s + phase).cos();
            let exact = (prim(t) - prim(t - window)) / window;
            prop_assert!((v - exact).abs() <= 1e-8, "t {} got {} exact {}", t, v, exact);
        }
    }

    #[test]
    fn warning_time_nonincreasing_in_kappa(
        values in prop::collection::vec(-1.0f64..0.5, 2..60), reference in -1.0f64..-0.1,
        k1 in 0.0f64..0.99, k2 in 0.0f64..0.99,
    ) {
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let s = FtleSeries {
            window: 1.0,
            times: (0..values.len()).map(|i| i as f64 * 0.5).collect(),
            values,
            role: "u".into(),
        };
        let t_lo = warning_time(&s, &EwsConfig::new(lo, reference).unwrap()).unwrap_or(f64::INFINITY);
        let t_hi = warning_time(&s, &EwsConfig::new(hi, reference).unwrap()).unwrap_or(f64::INFINITY);
        prop_assert!(t_hi <= t_lo + 1e-12);
    }
}

#[test]
fn d_concave_estimates_monotone_in_gamma() {
    let m = presets::allee_migration();
    let num = Numerics::default();
    let win = (-100.0, 100.0);
    let s: Vec<_> = [1.4, 1.5, 1.6]
        .iter()
        .map(|&g| limit_hyperbolic_solutions(&m, g, win, &num).unwrap())
        .collect();
    for pair in s.windows(2) {
        for t in uniform_grid(-100.0, 100.0, 5.0) {
            let at = |k: usize, r: Role| pair[k].get(r).unwrap().eval(t).unwrap();
            assert!(at(1, Role::Upper) > at(0, Role::Upper));
            assert!(at(1, Role::Lower) > at(0, Role::Lower));
            assert!(at(1, Role::Middle) < at(0, Role::Middle));
        }
    }
}

#[test]
fn concave_pair_monotone_in_additive_shift() {
    let m = presets::concave_logistic();
    let num = Numerics::default();
    let win = (-100.0, 100.0);
    let s: Vec<_> = [-0.05, 0.0, 0.05]
        .iter()
        .map(|&l| {
            let sh = AdditiveShift { inner: &m, lambda: l };
            limit_hyperbolic_solutions(&sh, 0.0, win, &num).unwrap()
        })
        .collect();
    for pair in s.windows(2) {
        for t in uniform_grid(-100.0, 100.0, 5.0) {
            let at = |k: usize, r: Role| pair[k].get(r).unwrap().eval(t).unwrap();
            assert!(at(1, Role::Attractive) > at(0, Role::Attractive));
            assert!(at(1, Role::Repulsive) < at(0, Role::Repulsive));
        }
    }
}

fn assert_anchor_insensitive(model: &dyn VectorField, mech: &TransitionMechanism) {
    let cls = Classifier::new(model, Numerics::default());
    let h = cls.horizon_for(mech);
    let (gm, gp) = mech.limits();
    let past = cls.limit_structure(gm, h).unwrap();
    let future = cls.limit_structure(gp, h).unwrap();
    let a = pullback_attractive(model, mech, past.top().unwrap(), h, None, &cls.numerics).unwrap();
    let r = pullback_repulsive(model, mech, future.repeller().unwrap(), h, None, &cls.numerics).unwrap();
    for sol in [&a, &r] {
        let s = anchor_sensitivity(model, mech, sol, &cls.numerics).unwrap();
        assert!(s < 1e-6, "sensitivity {s}");
    }
}

#[test]
fn pullback_solutions_forget_their_anchor() {
    let m = presets::allee_migration();
    assert_anchor_insensitive(&m, &TransitionMechanism::constant_rate(presets::migration_pulse(), 1.01).unwrap());
    assert_anchor_insensitive(&m, &TransitionMechanism::constant_rate(presets::migration_pulse(), 0.98).unwrap());
    let c = presets::concave_logistic();
    assert_anchor_insensitive(&c, &TransitionMechanism::constant_rate(presets::arctan_transition(), 0.74).unwrap());
}
