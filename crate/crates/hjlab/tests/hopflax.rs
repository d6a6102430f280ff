use hjlab::datum::{Cone, Constant, InitialDatum, Linear, PiecewiseLinear};
use hjlab::hopflax::{
    dynamic_programming_check, epsilon_n, functional_identity_check, lattice_approximant, lattice_error_bound,
    semigroup_check, solve, HopfLax,
};
use hjlab::{Error, GridSpec, HamiltonianModel, LagrangianView};
use proptest::prelude::*;

fn quadratic(d: usize) -> LagrangianView {
    LagrangianView::new(HamiltonianModel::power_norm(1, d).unwrap())
}

/// min_y |y| + (x−y)²/(4t) in closed form.
fn fan(t: f64, x: f64) -> f64 {
    if x.abs() <= 2.0 * t {
        x * x / (4.0 * t)
    } else {
        x.abs() - t
    }
}

/// Brute-force 1-D Hopf-Lax by a dense scan over y, then a second dense scan
/// around the winner.
fn scan_oracle(u0: impl Fn(f64) -> f64, l: impl Fn(f64) -> f64, t: f64, x: f64, reach: f64) -> (f64, f64) {
    let n = 200_000;
    let scan = |lo: f64, hi: f64| {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let y = lo + (hi - lo) * i as f64 / n as f64;
            let v = u0(y) + t * l((x - y) / t);
            if v < best.0 {
                best = (v, y);
            }
        }
        best
    };
    let coarse = scan(x - reach, x + reach);
    let step = 2.0 * reach / n as f64;
    scan(coarse.1 - 2.0 * step, coarse.1 + 2.0 * step)
}

#[test]
fn constant_datum_is_stationary() {
    let view = quadratic(2);
    let datum = Constant { dim: 2, c: 1.5 };
    let hl = HopfLax::new(&datum, &view, 0.7).unwrap();
    let p = hl.value_at(&[0.3, -0.2]).unwrap();
    assert_eq!(p.value, 1.5);
    assert!((p.minimizer[0] - 0.3).abs() < 1e-12 && (p.minimizer[1] + 0.2).abs() < 1e-12);
}

#[test]
fn linear_datum_matches_identity() {
    let view = quadratic(2);
    let a = vec![0.6, -0.3];
    let datum = Linear { a: a.clone(), c: 0.0 };
    let hl = HopfLax::new(&datum, &view, 1.0).unwrap();
    let x = [0.4, 0.9];
    let p = hl.value_at(&x).unwrap();
    let exact = a[0] * x[0] + a[1] * x[1] - (a[0] * a[0] + a[1] * a[1]);
    assert!((p.value - exact).abs() < 1e-9, "{} vs {}", p.value, exact);
}

#[test]
fn fan_value_and_minimizer() {
    let view = quadratic(1);
    let datum = Cone { dim: 1, slope: 1.0 };
    let hl = HopfLax::new(&datum, &view, 1.0).unwrap();
    let p = hl.value_at(&[1.0]).unwrap();
    assert!((p.value - 0.25).abs() < 1e-10);
    assert!(p.minimizer[0].abs() < 1e-6);
    for &x in &[-2.7, -1.3, 0.0, 0.4, 2.2] {
        let got = hl.value_at(&[x]).unwrap();
        let (v, y) = scan_oracle(|y| y.abs(), |q| q * q / 4.0, 1.0, x, 5.0);
        assert!((got.value - fan(1.0, x)).abs() < 1e-9);
        assert!((got.value - v).abs() < 1e-8);
        assert!((got.minimizer[0] - y).abs() < 1e-3);
    }
}

#[test]
fn fan_slopes_on_grid() {
    let view = quadratic(1);
    let datum = Cone { dim: 1, slope: 1.0 };
    let spec = GridSpec::cube(1, -3.0, 3.0, 121).unwrap();
    let res = solve(&datum, &view, 1.0, &spec).unwrap();
    for i in 0..spec.len() {
        let x = spec.point(i)[0];
        let expect = if x.abs() < 2.0 { x } else { 2.0 * x.signum() };
        assert!((res.b.at(i)[0] - expect).abs() < 1e-6, "x={x}: {:?}", res.b.at(i));
    }
    let (defect, checked) = res.consistency_defect(&view, 2.0 * spec.max_spacing(), 10.0);
    assert!(checked > 100);
    assert!(defect <= 2.0 * spec.max_spacing(), "defect {defect}");
}

#[test]
fn quartic_datum_against_scan_oracle() {
    let view = LagrangianView::new(HamiltonianModel::power_norm(2, 1).unwrap());
    let datum = PiecewiseLinear::random(11, 8, 2.0, 0.5, 1.0);
    let hl = HopfLax::new(&datum, &view, 1.0).unwrap();
    let l = |q: f64| 0.75 * (q.abs() / 4.0).powf(1.0 / 3.0) * q.abs();
    for &x in &[-1.1, -0.2, 0.35, 0.9] {
        let got = hl.value_at(&[x]).unwrap();
        let (v, _) = scan_oracle(|y| datum.value(&[y]), l, 1.0, x, 3.0);
        assert!((got.value - v).abs() < 1e-7, "x={x}: {} vs {v}", got.value);
    }
}

#[test]
fn semigroup_and_identity_defects() {
    let view = quadratic(1);
    let spec = GridSpec::cube(1, -3.0, 3.0, 601).unwrap();
    let h = spec.max_spacing();
    let cone = Cone { dim: 1, slope: 1.0 };
    assert!(semigroup_check(&cone, &view, 0.5, 0.5, &spec).unwrap() <= 5.0 * h);
    assert!(functional_identity_check(&cone, &view, 0.5, 1.0, &spec).unwrap() <= 5.0 * h);
    let lin = Linear { a: vec![0.7], c: 0.1 };
    assert!(semigroup_check(&lin, &view, 0.5, 0.5, &spec).unwrap() <= 1e-8);
    assert_eq!(functional_identity_check(&Constant { dim: 1, c: 2.0 }, &view, 0.25, 1.0, &spec).unwrap(), 0.0);
}

#[test]
fn dynamic_programming_on_fan() {
    let view = quadratic(1);
    let cone = Cone { dim: 1, slope: 1.0 };
    assert!(dynamic_programming_check(&cone, &view, 0.5, 1.0, &[1.0]).unwrap());
    assert!(dynamic_programming_check(&cone, &view, 0.5, 1.0, &[2.6]).unwrap());
    let lin = Linear { a: vec![-0.4], c: 0.0 };
    assert!(dynamic_programming_check(&lin, &view, 0.3, 1.0, &[0.2]).unwrap());
}

#[test]
fn epsilon_n_values() {
    let view = quadratic(1);
    let e1 = epsilon_n(1, 1.0, 1.0, &view).unwrap();
    assert!((e1 - 9.0 / 64.0).abs() < 1e-9, "{e1}");
    let mut prev = e1;
    for n in 2..=10 {
        let e = epsilon_n(n, 1.0, 1.0, &view).unwrap();
        assert!(e < prev);
        prev = e;
    }
    assert!(matches!(epsilon_n(0, 1.0, 1.0, &view), Err(Error::Input(_))));
}

#[test]
fn lattice_approximant_converges_within_bound() {
    let view = quadratic(1);
    let cone = Cone { dim: 1, slope: 1.0 };
    let spec = GridSpec::cube(1, -3.0, 3.0, 241).unwrap();
    let exact = solve(&cone, &view, 1.0, &spec).unwrap();
    let approx = lattice_approximant(&cone, &view, 1.0, 8, &spec).unwrap();
    let err = approx.u_n.max_abs_diff(&exact.u).unwrap();
    let bound = lattice_error_bound(&cone, &view, 1.0, 8, 3.0).unwrap();
    assert!(err <= bound, "{err} > {bound}");
    assert!(approx.b_n.max_norm() <= approx.max_speed + approx.pitch);
}

#[test]
fn zero_datum_lattice_is_near_zero() {
    let view = quadratic(1);
    let zero = Constant { dim: 1, c: 0.0 };
    let spec = GridSpec::cube(1, -1.0, 1.0, 51).unwrap();
    let approx = lattice_approximant(&zero, &view, 1.0, 5, &spec).unwrap();
    let pitch: f64 = approx.pitch;
    let tol = (pitch / 2.0).powi(2) / 4.0 + 1e-15;
    assert!(approx.u_n.values.iter().all(|v| *v >= 0.0 && *v <= tol));
}

#[test]
fn rejects_nonpositive_time() {
    let view = quadratic(1);
    let cone = Cone { dim: 1, slope: 1.0 };
    assert!(matches!(HopfLax::new(&cone, &view, 0.0), Err(Error::Precondition(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_is_exact(c in -5.0f64..5.0, x in -2.0f64..2.0, seed in 0u64..1000) {
        let view = quadratic(1);
        let base = PiecewiseLinear::random(seed, 6, 2.0, 0.5, 1.0);
        let shifted = hjlab::datum::Shifted { inner: base.clone(), c };
        let a = HopfLax::new(&base, &view, 0.8).unwrap().value_at(&[x]).unwrap();
        let b = HopfLax::new(&shifted, &view, 0.8).unwrap().value_at(&[x]).unwrap();
        prop_assert!((b.value - (a.value + c)).abs() <= 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn minimizers_respect_speed_bound(x in -2.0f64..2.0, seed in 0u64..1000, t in 0.2f64..2.0) {
        let view = LagrangianView::new(HamiltonianModel::power_norm(2, 1).unwrap());
        let datum = PiecewiseLinear::random(seed, 6, 2.0, 0.5, 1.0);
        let hl = HopfLax::new(&datum, &view, t).unwrap();
        let p = hl.value_at(&[x]).unwrap();
        prop_assert!((x - p.minimizer[0]).abs() <= t * hl.max_speed() * (1.0 + 1e-6));
    }
}
