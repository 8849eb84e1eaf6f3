use std::process::ExitCode;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rabi_texp::fock::parity_matrix;
use rabi_texp::optimize::Objective;
use rabi_texp::{
    build_hamiltonian, cmx_estimate, connected_from_raw, continue_branch, csm_estimate, estimate_energy, exact_levels,
    raw_moments, series_revert, stationary_points, trial_moments, trial_state, variational_optimum,
    ConnectedMoments, FockConfig, HessianClass, Method, OptimizeConfig, Parity, RabiHamiltonian, RabiParams, SearchBox,
    SeriesCoeffs, TrialKind, TrialSpec,
};

/// Sub-checks of one criterion; the failing ones are kept for the report.
#[derive(Default)]
struct Criterion {
    total: usize,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Criterion {
    fn check(&mut self, ok: bool, label: impl Into<String>) {
        self.total += 1;
        if !ok {
            self.failures.push(label.into());
        }
    }

    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(ok, format!("{label}: got {got:.12} want {want} (|diff| {:.2e} > {tol:.0e})", (got - want).abs()));
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

fn params(w0: f64, w: f64, g: f64) -> RabiParams {
    RabiParams::new(w0, w, g).unwrap()
}

fn oracle(p: &RabiParams, parity: Parity) -> f64 {
    exact_levels(p, 4, 1e-11).unwrap().lowest_with_parity(parity).unwrap()
}

fn energy(p: &RabiParams, kind: TrialKind, method: Method, order: usize) -> Option<f64> {
    estimate_energy(p, kind, method, order, &OptimizeConfig::default()).ok().map(|(e, _)| e.value)
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { failure_persistence: None, ..Config::with_cases(cases) }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn grid(count: usize, stop: f64) -> Vec<f64> {
    (0..count).map(|i| stop * i as f64 / (count - 1) as f64).collect()
}

fn table_one(c: &mut Criterion) {
    let columns = [
        (1.0, [-100.006250000, -100.006265682, -100.006250000, -100.006265686], -100.006265704),
        (2.0, [-50.001250000, -50.001262703, -50.001250000, -50.001262703], -50.001262758),
    ];
    let rows = [
        ("E0(1)", TrialKind::NonSym, Method::Variational, 1),
        ("E0(6)", TrialKind::NonSym, Method::Csm, 6),
        ("E1(1,n)", TrialKind::NegParity, Method::Variational, 1),
        ("E1(6,n)", TrialKind::NegParity, Method::Csm, 6),
    ];
    for (w, want, want_exact) in columns {
        let p = params(1.0, w, 5.0);
        for ((name, kind, method, order), want) in rows.iter().zip(want) {
            let got = energy(&p, *kind, *method, *order).unwrap_or(f64::NAN);
            c.close(&format!("w={w} {name}"), got, want, 1e-6);
        }
        let ground = exact_levels(&p, 4, 1e-11).unwrap().ground();
        c.close(&format!("w={w} E0 exact"), ground, want_exact, 1e-8);
    }
}

fn table_two(c: &mut Criterion) {
    let p = params(1.0, 1.0, 0.2);
    let exact = oracle(&p, Parity::Negative);
    let rows = [
        ("E1(1,n) var", Method::Variational, 1, 0.00324806, 0.39),
        ("E1(5,n) CMX", Method::Cmx, 5, 0.00233753, 0.000335),
        ("E1(6,n) CSM", Method::Csm, 6, 0.00234135, 0.00197),
    ];
    for (name, method, order, want, want_rel) in rows {
        let got = energy(&p, TrialKind::NegParity, method, order).unwrap_or(f64::NAN);
        c.close(name, got, want, 1e-5);
        let rel = ((got - exact) / exact).abs();
        c.check(
            (rel - want_rel).abs() <= 0.1 * want_rel,
            format!("{name} rel. error {rel:.3e} vs {want_rel}"),
        );
    }
    c.close("E1 exact", exact, 0.00233675, 1e-5);
}

fn spot_values(c: &mut Criterion) {
    let g_grid = grid(101, 1.0);
    let cfg = OptimizeConfig::default();
    let out = continue_branch(&params(1.0, 1.0, 0.0), TrialKind::PosParity, Method::Csm, 6, &g_grid, &cfg).unwrap();
    for (i, want, want_exact) in [(30, -0.69761396, -0.69761529), (40, -0.87854267, -0.87854932)] {
        let g = g_grid[i];
        let got = out.physical.points[i].map_or(f64::NAN, |s| s.energy);
        c.close(&format!("g={g} E0(6,p)"), got, want, 1e-6);
        c.close(&format!("g={g} E0 exact"), oracle(&params(1.0, 1.0, g), Parity::Positive), want_exact, 1e-7);
    }
}

/// Largest relative error along a continued branch, skipping oracle values below `floor`.
fn sweep_error(w: f64, kind: TrialKind, floor: f64) -> (f64, f64, usize, Vec<(f64, f64)>) {
    let g_grid = grid(101, 1.0);
    let cfg = OptimizeConfig::default();
    let out = continue_branch(&params(1.0, w, 0.0), kind, Method::Csm, 6, &g_grid, &cfg).unwrap();
    let parity = if kind == TrialKind::NegParity { Parity::Negative } else { Parity::Positive };
    let mut worst = (0.0, 0.0);
    let mut missing = 0;
    for (&g, point) in g_grid.iter().zip(&out.physical.points) {
        let exact = oracle(&params(1.0, w, g), parity);
        if exact.abs() < floor {
            continue;
        }
        match point {
            Some(s) => {
                let rel = ((s.energy - exact) / exact).abs();
                if rel > worst.0 {
                    worst = (rel, g);
                }
            }
            None => missing += 1,
        }
    }
    (worst.0, worst.1, missing, out.gaps)
}

fn envelope(c: &mut Criterion) {
    for w in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0] {
        let (rel, g, missing, gaps) = sweep_error(w, TrialKind::PosParity, 0.0);
        c.check(rel < 1e-4 && missing == 0, format!("E0 w={w}: max rel {rel:.2e} at g={g:.2}, {missing} missing"));
        c.note(format!("w={w} {rel:.1e}{}", if gaps.is_empty() { String::new() } else { format!(" gaps {gaps:?}") }));
    }
    let (rel, g, missing, _) = sweep_error(1.0, TrialKind::NegParity, 1e-6);
    c.check(rel < 1e-2 && missing == 0, format!("E1 w=1: max rel {rel:.2e} at g={g:.2}, {missing} missing"));
    c.note(format!("E1 {rel:.1e}"));
}

fn closed_forms(c: &mut Criterion) {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0);
    let strategy = (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0);
    let result = runner(200).run(&strategy, |(i1, i2, i3, i4)| {
        let denom4 = i2 * i4 - 3.0 * i3 * i3;
        if i2.abs() < 1e-3 || i3.abs() < 1e-3 || denom4.abs() < 1e-3 {
            return Err(TestCaseError::reject("near-singular"));
        }
        let m = ConnectedMoments::new(vec![i1, i2, i3, i4]).unwrap();
        let three = csm_estimate(&m, 3).map_err(|e| TestCaseError::fail(e.to_string()))?.value;
        let four = csm_estimate(&m, 4).map_err(|e| TestCaseError::fail(e.to_string()))?.value;
        prop_assert!(close(three, i1 - i2 * i2 / i3));
        prop_assert!(close(four, i1 + 2.0 * i2 * i2 * i3 / denom4));
        Ok(())
    });
    c.check(result.is_ok(), format!("reversion vs m=3,4 formulas: {result:?}"));

    for w in [0.5, 1.0, 2.0] {
        for g in [0.01, 0.02, 0.05] {
            let want = -0.5 - 4.0 * g * g / (w + 1.0);
            for method in [Method::Csm, Method::Cmx] {
                let got = Objective::new(params(1.0, w, g), TrialKind::NonSym, method, 3)
                    .and_then(|o| o.evaluate(0.0, 0.0))
                    .map_or(f64::NAN, |e| e.value);
                c.close(&format!("{method:?}3 at origin w={w} g={g}"), got, want, 1e-10);
            }
        }
    }
}

fn optimized_point(c: &mut Criterion) {
    let p = params(1.0, 1.0, 5.0);
    let cfg = OptimizeConfig::default();
    let points = stationary_points(&p, TrialKind::NonSym, Method::Csm, 6, &SearchBox::default_for(&p).unwrap(), &cfg)
        .unwrap();
    let nearest = points
        .iter()
        .filter(|s| s.hessian_class == HessianClass::Minimum)
        .map(|s| s.distance_to([9.99997, -0.997364]))
        .fold(f64::INFINITY, f64::min);
    c.check(nearest <= 1e-3, format!("nearest minimum {nearest:.2e} away"));
    c.note(format!("distance {nearest:.1e}"));
}

fn convergence(c: &mut Criterion) {
    let g_grid = grid(21, 1.0);
    let cfg = OptimizeConfig::default();
    let exact = oracle(&params(1.0, 1.0, 1.0), Parity::Positive);
    let mut errors = Vec::new();
    for (method, order) in [(Method::Variational, 1), (Method::Csm, 3), (Method::Csm, 4), (Method::Csm, 5), (Method::Csm, 6)] {
        let out = continue_branch(&params(1.0, 1.0, 0.0), TrialKind::PosParity, method, order, &g_grid, &cfg).unwrap();
        let e = out.physical.points[20].map_or(f64::NAN, |s| s.energy);
        errors.push((e - exact).abs());
    }
    let shown: Vec<String> = errors.iter().map(|e| format!("{:.1e}", e / exact.abs())).collect();
    c.check(errors.windows(2).all(|w| w[1] <= w[0]), format!("errors not non-increasing: {shown:?}"));
    c.check(errors[4] / exact.abs() < 1e-4, format!("m=6 rel. error {:.2e}", errors[4] / exact.abs()));
    c.note(format!("rel. errors m=1,3,4,5,6: {}", shown.join(" ")));
}

fn properties(c: &mut Criterion) {
    let p = params(1.0, 0.8, 1.2);
    let spec = TrialSpec::new(TrialKind::NonSym, 1.7, -0.6);
    let config = FockConfig::for_displacement(spec.x);
    let state = trial_state(&spec, &config).unwrap();
    let h = RabiHamiltonian::new(p, config);
    let plain = connected_from_raw(&raw_moments(&state, &h, 6, 0.0).unwrap());
    let shift_ok = [-3.0, 0.7, plain.energy()].iter().all(|&shift| {
        let moved = connected_from_raw(&raw_moments(&state, &h, 6, shift).unwrap());
        (2..=6).all(|m| (moved.get(m) - plain.get(m)).abs() <= 1e-8 * plain.get(2).abs().powf(m as f64 / 2.0).max(1.0))
    });
    c.check(shift_ok, "shift invariance of I_m, m >= 2");

    let null_ok = [0.5, 1.0, 2.0, 5.0].iter().all(|&g| {
        let m = trial_moments(&params(0.0, 1.0, g), &TrialSpec::new(TrialKind::NonSym, 2.0 * g, -1.0), 6).unwrap();
        let scale = m.energy().abs().max(1.0);
        (2..=6).all(|k| m.get(k).abs() < 1e-8 * scale.powi(k as i32))
    });
    c.check(null_ok, "eigenstate nullity at w0 = 0");

    let cfg = OptimizeConfig::default();
    let mut bound_ok = true;
    for w in [0.5, 1.0, 2.0] {
        for g in [0.1, 0.4, 0.8, 1.5] {
            let p = params(1.0, w, g);
            let e0 = oracle(&p, Parity::Positive);
            for kind in [TrialKind::NonSym, TrialKind::PosParity] {
                bound_ok &= variational_optimum(&p, kind, &cfg).is_ok_and(|v| v.energy >= e0 - 1e-12);
            }
            if w <= 1.0 {
                let e1 = oracle(&p, Parity::Negative);
                bound_ok &= variational_optimum(&p, TrialKind::NegParity, &cfg).is_ok_and(|v| v.energy >= e1 - 1e-12);
            }
        }
    }
    c.check(bound_ok, "variational upper bound");

    let commute_ok = [(1.0, 1.0, 0.4), (1.0, 2.0, 1.3), (0.0, 0.5, 2.0)].iter().all(|&(w0, w, g)| {
        let config = FockConfig::new(40).unwrap();
        let h = build_hamiltonian(&params(w0, w, g), &config);
        let pi = parity_matrix(&config);
        (&h * &pi - &pi * &h).amax() < 1e-12
    });
    c.check(commute_ok, "parity commutes with H");

    let strategy = (0.1f64..10.0, prop::collection::vec(-5.0f64..5.0, 5));
    let round_trip = runner(100).run(&strategy, |(a1, rest)| {
        let mut coeffs = vec![a1];
        coeffs.extend(rest);
        let a = SeriesCoeffs::new(coeffs.clone());
        let b = series_revert(&a, 6).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let identity = a.compose(&b, 6);
        let scale = SeriesCoeffs::new(coeffs.iter().map(|c| c.abs()).collect())
            .compose(&SeriesCoeffs::new(b.as_slice().iter().map(|c| c.abs()).collect()), 6);
        for k in 1..=6 {
            let want = if k == 1 { 1.0 } else { 0.0 };
            prop_assert!((identity.get(k) - want).abs() <= 1e-10 * scale.get(k).max(1.0));
        }
        Ok(())
    });
    c.check(round_trip.is_ok(), format!("reversion round trip: {round_trip:?}"));

    let strategy = (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0);
    let agree = runner(200).run(&strategy, |(i1, i2, i3)| {
        if i2.abs() < 1e-3 || i3.abs() < 1e-3 {
            return Err(TestCaseError::reject("near-singular"));
        }
        let m = ConnectedMoments::new(vec![i1, i2, i3]).unwrap();
        let a = cmx_estimate(&m, 3).map_err(|e| TestCaseError::fail(e.to_string()))?.value;
        let b = csm_estimate(&m, 3).map_err(|e| TestCaseError::fail(e.to_string()))?.value;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        Ok(())
    });
    c.check(agree.is_ok(), format!("CMX = CSM at m=3: {agree:?}"));

    let estimators = [
        (Method::Variational, 1),
        (Method::Cmx, 3),
        (Method::Cmx, 5),
        (Method::Csm, 3),
        (Method::Csm, 4),
        (Method::Csm, 5),
        (Method::Csm, 6),
    ];
    for g in [0.5, 1.0, 2.0, 5.0] {
        let want = -4.0 * g * g;
        for (method, order) in estimators {
            let got = energy(&params(0.0, 1.0, g), TrialKind::NonSym, method, order).unwrap_or(f64::NAN);
            c.check(((got - want) / want).abs() <= 1e-8, format!("w0=0 limit g={g} {method:?}{order}: {got}"));
        }
    }
}

fn weak_coupling(c: &mut Criterion) {
    let mut worst = (0.0, 0.0, 0.0);
    for w in [0.5, 1.0, 2.0] {
        for g in [0.01, 0.02, 0.05] {
            let p = params(1.0, w, g);
            let e0 = oracle(&p, Parity::Positive);
            let rel = ((-0.5 - 4.0 * g * g / (w + 1.0) - e0) / e0).abs();
            c.check(rel < 1e-4, format!("w={w} g={g}: {rel:.3e}"));
            if rel > worst.0 {
                worst = (rel, w, g);
            }
        }
    }
    c.note(format!("worst {:.3e} at w={} g={}", worst.0, worst.1, worst.2));
}

fn family_equivalence(c: &mut Criterion) {
    let cfg = OptimizeConfig::default();
    for g in [0.01, 0.02, 0.05] {
        let p = params(1.0, 1.0, g);
        let var = variational_optimum(&p, TrialKind::PosParity, &cfg).unwrap();
        let third = Objective::new(p, TrialKind::NonSym, Method::Csm, 3).unwrap().evaluate(0.0, 0.0).unwrap();
        let diff = (var.energy - third.value).abs();
        c.check(diff <= 1e-3 * g.powi(3), format!("g={g}: {diff:.3e} > {:.3e}", 1e-3 * g.powi(3)));
        c.note(format!("g={g} diff/g^4 {:.2}", diff / g.powi(4)));
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(&mut Criterion)); 10] = [
        ("table 1 at g=5", table_one),
        ("table 2 at g=0.2", table_two),
        ("spot values at g=0.3, 0.4", spot_values),
        ("error envelope", envelope),
        ("closed-form identities", closed_forms),
        ("optimized point at g=5", optimized_point),
        ("convergence in m", convergence),
        ("property suite", properties),
        ("weak-coupling third-order accuracy", weak_coupling),
        ("trial families agree at weak coupling", family_equivalence),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut c = Criterion::default();
        run(&mut c);
        let passed = c.total - c.failures.len();
        let mut line = format!(
            "{} {}. {name}: {passed}/{} checks [{:.1?}]",
            if c.failures.is_empty() { "PASS" } else { "FAIL" },
            i + 1,
            c.total,
            start.elapsed()
        );
        if !c.notes.is_empty() {
            line += &format!(" ({})", c.notes.join("; "));
        }
        if !c.failures.is_empty() {
            line += &format!(" -- {}", c.failures.join("; "));
            failed.push(i + 1);
        }
        println!("{line}");
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
