use conflab::exec::Execution;
use conflab::halfcont::*;
use conflab::Error;
use proptest::prelude::*;

#[test]
fn quadratic_certificate_is_five() {
    let c = check_association(&quadratic()).unwrap();
    assert!((c.bound - 5.0).abs() < 1e-9, "C = {}", c.bound);
    assert!(c.samples >= 10_000);
}

#[test]
fn small_budget_rejected() {
    let q = quadratic().with_samples(100, 0);
    assert!(check_association(&q).is_err());
}

#[test]
fn quadratic_critical_tuple() {
    let q = quadratic();
    let c = check_association(&q).unwrap();
    let r = dichotomy_search(&q, &c, SearchOptions::default());
    match r.outcome {
        Outcome::CriticalTuple { t, ref x, active } => {
            assert!((t - 0.4).abs() < 1e-8);
            assert!((x[0] - 2.0).abs() < 1e-8);
            assert_eq!(active, 0);
        }
        ref o => panic!("unexpected {o:?}"),
    }
    assert_eq!(r.phase, 2);
    assert!(r.residual <= 1e-8);
}

#[test]
fn linear_fixed_point() {
    let l = linear();
    let c = check_association(&l).unwrap();
    let r = dichotomy_search(&l, &c, SearchOptions::default());
    let Outcome::FixedPoint(x) = r.outcome else { panic!("{:?}", r.outcome) };
    assert!((x[0] - 1.0).abs() < 1e-10);
    // (1, x*) is a fixed point of the S-map.
    let (t, y) = smap_eval(&l, 1.0, &x);
    assert_eq!(t, 1.0);
    assert!((y[0] - x[0]).abs() < 1e-10);
}

#[test]
fn search_is_deterministic_across_execution() {
    let q = schaefer(1.5, 3).unwrap();
    let c = check_association(&q).unwrap();
    let seq = dichotomy_search(&q, &c, SearchOptions { exec: Execution::Sequential, ..Default::default() });
    let par = dichotomy_search(&q, &c, SearchOptions { exec: Execution::Parallel, ..Default::default() });
    assert_eq!(seq, par);
    let c2 = check_association_with(&q, Execution::Sequential).unwrap();
    assert_eq!(c, c2);
}

#[test]
fn step_function_witness() {
    let w = half_continuity_witness(&step_map, &[1.0], WitnessOptions::default()).unwrap();
    assert_eq!(w.p, vec![1.0]);
    assert_eq!(w.radius, 0.5);
}

#[test]
fn fixed_point_has_no_witness_query() {
    let f = |y: &[f64]| y.to_vec();
    assert!(matches!(half_continuity_witness(&f, &[0.3], WitnessOptions::default()), Err(Error::Precondition(_))));
}

#[test]
fn gallery_lookup() {
    for name in gallery_names() {
        assert!(gallery(name, 1.0, 2).is_ok());
    }
    assert!(gallery("nope", 1.0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn schaefer_tuple_has_norm_a(a in 0.2f64..5.0, d in 1usize..4) {
        let s = schaefer(a, d).unwrap();
        let c = check_association(&s).unwrap();
        let r = dichotomy_search(&s, &c, SearchOptions::default());
        match r.outcome {
            Outcome::CriticalTuple { t, x, .. } => {
                let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                prop_assert!((nx - a).abs() < 1e-8);
                prop_assert!((t - a / (1.0 + a)).abs() < 1e-8);
            }
            o => prop_assert!(false, "unexpected {:?}", o),
        }
    }

    #[test]
    fn smap_is_total(t in 0.0f64..=1.0, x in -10.0f64..10.0) {
        let q = quadratic();
        let (s, y) = smap_eval(&q, t, &[x]);
        prop_assert!(s == 1.0 || (s == 0.0 && y == vec![0.0]));
        if s == 1.0 {
            prop_assert!(x.abs() <= 2.0);
        }
    }

    #[test]
    fn continuous_maps_have_witness(x in -3.0f64..3.0, c in 0.5f64..2.0) {
        // f(y) = y/2 + c is continuous with a single fixed point at 2c.
        prop_assume!((x - 2.0 * c).abs() > 0.1);
        let f = move |y: &[f64]| vec![0.5 * y[0] + c];
        let w = half_continuity_witness(&f, &[x], WitnessOptions::default()).unwrap();
        let disp = 0.5 * x + c - x;
        prop_assert!(w.p[0] * disp > 0.0);
    }
}
