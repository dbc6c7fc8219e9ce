use cyberswarm::benchfns::{
    local_search, multistart_optimize, verify_minima, Objective, CROSS_IN_TRAY_ARGMIN, CROSS_IN_TRAY_MIN,
    DEFAULT_BUDGET,
};
use cyberswarm::oracles::oracle_grid_minimum;
use proptest::prelude::*;

#[test]
fn cross_in_tray_minimum_from_grid_and_refinement() {
    let f = |p: &[f64]| Objective::CrossInTray.value_unchecked(p);
    // Coarse pass over the whole box, then a 1e-3 pass over the winning quadrant.
    let (coarse, at) = oracle_grid_minimum(f, [-10.0, -10.0], [10.0, 10.0], 2000);
    assert!(at[0].abs() < 2.0 && at[1].abs() < 2.0, "{at:?}");
    let (fine, at) = oracle_grid_minimum(f, [0.0, 0.0], [3.0, 3.0], 3000);
    assert!(fine <= coarse + 1e-12);
    let r = local_search(Objective::CrossInTray, &at, 100_000).unwrap();
    assert!((r.value - CROSS_IN_TRAY_MIN).abs() < 1e-12, "{}", r.value);
    for v in &r.point {
        assert!((v - CROSS_IN_TRAY_ARGMIN).abs() < 1e-5, "{v}");
    }
    assert!((CROSS_IN_TRAY_ARGMIN - 1.34941).abs() < 1e-5);
    assert!((CROSS_IN_TRAY_MIN - -2.06261).abs() < 1e-5);
}

#[test]
fn catalogue_at_strict_tolerance() {
    for obj in Objective::ALL {
        for c in verify_minima(obj, None).unwrap() {
            assert!(c.pass);
            assert!(c.tolerance <= 1e-3);
        }
    }
    for c in verify_minima(Objective::Himmelblau, Some(1e-6)).unwrap() {
        if c.minimum.point != vec![-3.7793, -3.2832] {
            assert!(c.pass);
        }
    }
}

#[test]
fn multistart_reaches_global_minima() {
    for (obj, bound) in [
        (Objective::Rastrigin, 1e-3),
        (Objective::Himmelblau, 1e-6),
        (Objective::Salomon, 1e-3),
    ] {
        let r = multistart_optimize(obj, 2, 100, DEFAULT_BUDGET, 42).unwrap();
        assert!(r.best.value < bound, "{obj}: {}", r.best.value);
    }
}

#[test]
fn multistart_is_deterministic() {
    let a = multistart_optimize(Objective::CrossInTray, 2, 20, 2000, 3).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = one.install(|| multistart_optimize(Objective::CrossInTray, 2, 20, 2000, 3).unwrap());
    assert_eq!(a, b);
    assert_eq!(a.csv_line(), b.csv_line());
}

fn in_box() -> impl Strategy<Value = (f64, f64)> {
    (-10.0..=10.0f64, -10.0..=10.0f64)
}

proptest! {
    #[test]
    fn point_symmetries((x, y) in in_box()) {
        for obj in [Objective::Rastrigin, Objective::Salomon] {
            let a = obj.evaluate(&[x, y]).unwrap();
            let b = obj.evaluate(&[-x, -y]).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
        let c = Objective::CrossInTray;
        let v = c.evaluate(&[x, y]).unwrap();
        prop_assert_eq!(v, c.evaluate(&[-x, y]).unwrap());
        prop_assert_eq!(v, c.evaluate(&[x, -y]).unwrap());
    }

    #[test]
    fn nonnegative_objectives((x, y) in in_box(), bx in -15.0..=-5.0f64, by in -3.0..=3.0f64) {
        prop_assert!(Objective::Rastrigin.evaluate(&[x, y]).unwrap() >= 0.0);
        prop_assert!(Objective::Salomon.evaluate(&[x, y]).unwrap() >= 0.0);
        prop_assert!(Objective::YangN3.evaluate(&[x, y]).unwrap() >= 0.0);
        prop_assert!(Objective::Bukin.evaluate(&[bx, by]).unwrap() >= 0.0);
    }

    #[test]
    fn results_stay_in_domain(seed in 0u64..200) {
        for obj in Objective::ALL {
            let r = multistart_optimize(obj, 2, 2, 300, seed).unwrap();
            prop_assert!(obj.evaluate(&r.best.point).is_ok());
        }
    }
}
