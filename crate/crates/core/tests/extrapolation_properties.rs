use proptest::prelude::*;
use rabi_texp::{cmx_estimate, csm_estimate, e_of_t, series_revert, ConnectedMoments, SeriesCoeffs};

fn moments(v: &[f64]) -> ConnectedMoments {
    ConnectedMoments::new(v.to_vec()).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn short_time_series() {
    let m = moments(&[0.3, 1.0, 0.0, 0.0, 0.0, 0.0]);
    assert_eq!(e_of_t(&m, 0.0), 0.3);
    let t = 1e-3;
    assert!((e_of_t(&m, t) - (0.3 - t)).abs() < 1e-15);
    let eig = moments(&[-2.0, 0.0, 0.0, 0.0]);
    assert_eq!(e_of_t(&eig, 7.0), -2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn csm_matches_closed_forms(
        i1 in -5.0f64..5.0,
        i2 in -5.0f64..5.0,
        i3 in -5.0f64..5.0,
        i4 in -5.0f64..5.0,
    ) {
        let denom4 = i2 * i4 - 3.0 * i3 * i3;
        prop_assume!(i2.abs() >= 1e-3 && i3.abs() >= 1e-3 && denom4.abs() >= 1e-3);
        let m = moments(&[i1, i2, i3, i4]);
        let three = csm_estimate(&m, 3).unwrap().value;
        let four = csm_estimate(&m, 4).unwrap().value;
        prop_assert!(close(three, i1 - i2 * i2 / i3, 1e-10), "m=3: {three}");
        prop_assert!(close(four, i1 + 2.0 * i2 * i2 * i3 / denom4, 1e-10), "m=4: {four}");
    }

    #[test]
    fn cmx_and_csm_agree_at_three_moments(
        i1 in -5.0f64..5.0,
        i2 in -5.0f64..5.0,
        i3 in -5.0f64..5.0,
    ) {
        prop_assume!(i2.abs() >= 1e-3 && i3.abs() >= 1e-3);
        let m = moments(&[i1, i2, i3]);
        prop_assert!(close(cmx_estimate(&m, 3).unwrap().value, csm_estimate(&m, 3).unwrap().value, 1e-12));
    }

    #[test]
    fn estimators_are_shift_equivariant(
        v in prop::collection::vec(-3.0f64..3.0, 6),
        c in -50.0f64..50.0,
    ) {
        let mut v = v;
        v[1] = v[1].abs().max(0.1);
        let base = moments(&v);
        let moved = base.shifted(c);
        for order in [3, 4, 5, 6] {
            if let (Ok(a), Ok(b)) = (csm_estimate(&base, order), csm_estimate(&moved, order)) {
                prop_assert!((b.value - a.value - c).abs() <= 1e-9 * (a.value.abs() + c.abs()).max(1.0), "csm m={order}");
            }
        }
        for order in [3, 5] {
            if let (Ok(a), Ok(b)) = (cmx_estimate(&base, order), cmx_estimate(&moved, order)) {
                prop_assert!((b.value - a.value - c).abs() <= 1e-9 * (a.value.abs() + c.abs()).max(1.0), "cmx m={order}");
            }
        }
    }

    #[test]
    fn reversion_round_trip(
        a1 in 0.1f64..10.0,
        rest in prop::collection::vec(-5.0f64..5.0, 5),
    ) {
        let order = 6;
        let mut coeffs = vec![a1];
        coeffs.extend(rest);
        let a = SeriesCoeffs::new(coeffs.clone());
        let b = series_revert(&a, order).unwrap();
        let identity = a.compose(&b, order);
        // magnitude of the terms that cancel in each coefficient
        let abs_a = SeriesCoeffs::new(coeffs.iter().map(|c| c.abs()).collect());
        let abs_b = SeriesCoeffs::new(b.as_slice().iter().map(|c| c.abs()).collect());
        let scale = abs_a.compose(&abs_b, order);
        for k in 1..=order {
            let want = if k == 1 { 1.0 } else { 0.0 };
            let tol = 1e-10 * scale.get(k).max(1.0);
            prop_assert!((identity.get(k) - want).abs() <= tol, "k={k}: {} (scale {})", identity.get(k), scale.get(k));
        }
    }
}
