use hjlab::counterexample::*;
use hjlab::{ConvexityModuli, Error, HamiltonianModel, HopfLax, InitialDatum, LagrangianView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn conj(delta: f64, ell: f64) -> LatticeDatumSpec {
    LatticeDatumSpec::new(delta, ell, LagrangianVariant::Conjugate).unwrap()
}

#[test]
fn gamma_endpoints() {
    for delta in [0.04f64, 0.01, 1e-3] {
        let qb = [delta, delta.powf(2.0 / 3.0)];
        assert!((gamma_curve(qb, 0.0).unwrap() - qb[1]).abs() < 1e-14);
        assert!(gamma_curve(qb, delta).unwrap().abs() < 1e-14);
        let qm = [-delta, qb[1]];
        assert!((gamma_curve(qm, 0.0).unwrap() - qb[1]).abs() < 1e-14);
        assert!(gamma_curve(qm, -delta).unwrap().abs() < 1e-14);
    }
    assert!(matches!(gamma_curve([0.1, 0.0], 0.0), Err(Error::Input(_))));
}

#[test]
fn gamma_is_the_bisector() {
    // Points on the curve are equidistant in L from 0 and q̄.
    let delta: f64 = 0.02;
    for c2 in [1.0, 0.25] {
        let qb = [delta, delta.powf(2.0 / 3.0) / f64::sqrt(c2)];
        let l = |q: [f64; 2]| q[0].abs().powf(4.0 / 3.0) + c2 * q[1] * q[1];
        for i in 0..=10 {
            let s = delta * i as f64 / 10.0;
            let q = [s, weighted_gamma(qb, c2, s).unwrap()];
            assert!((l(q) - l([q[0] - qb[0], q[1] - qb[1]])).abs() < 1e-14);
            assert!(q[1] >= -1e-15 && q[1] <= qb[1] + 1e-15);
        }
    }
}

#[test]
fn arclength_exceeds_height() {
    let delta: f64 = 0.01;
    let qb = [delta, delta.powf(2.0 / 3.0)];
    let chords = arclength(qb, 1.0, 4096).unwrap();
    // Midpoint quadrature of √(1 + γ'²) with the analytic derivative.
    let dg = |s: f64| {
        let a = s - qb[0];
        (4.0 / 3.0) * (a.signum() * a.abs().cbrt() - s.signum() * s.abs().cbrt()) / (2.0 * qb[1])
    };
    let n = 200_000;
    let quad: f64 = (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) * delta / n as f64;
            (1.0 + dg(s).powi(2)).sqrt() * delta / n as f64
        })
        .sum();
    assert!(chords <= quad + 1e-12 && quad - chords < 1e-6, "{chords} vs {quad}");
    assert!(chords > delta.powf(2.0 / 3.0));
    assert!(chords > 0.0464);
    for spec in [conj(0.01, 0.25), LatticeDatumSpec::new(0.01, 0.25, LagrangianVariant::Stated).unwrap()] {
        assert!(spec.pair_jump_mass().unwrap() >= delta.powf(4.0 / 3.0));
    }
}

#[test]
fn cells_are_curvilinear_diamonds() {
    for variant in [LagrangianVariant::Stated, LagrangianVariant::Conjugate] {
        let spec = LatticeDatumSpec::new(0.02, 0.25, variant).unwrap();
        let p = spec.pitch();
        let qb = [p[0], p[1]];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4000 {
            let z = [rng.gen_range(-1.5..1.5) * p[0], rng.gen_range(-1.5..1.5) * p[1]];
            let inside = z[0].abs() < p[0] && z[1].abs() < weighted_gamma(qb, variant.c2(), z[0].abs()).unwrap();
            let margin = (z[1].abs() - weighted_gamma(qb, variant.c2(), z[0].abs().min(p[0])).unwrap()).abs();
            if margin > 1e-9 && (z[0].abs() - p[0]).abs() > 1e-9 {
                assert_eq!(spec.nearest_site(z) == [0, 0], inside, "{z:?}");
            }
        }
    }
}

/// max_x {g₁(x) − L(x − y)} by a dense scan over a box around y.
fn g0_brute(spec: &LatticeDatumSpec, y: [f64; 2]) -> f64 {
    let p = spec.pitch();
    let n = 600;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        for j in 0..=n {
            let x = [y[0] + 3.0 * p[0] * (2.0 * i as f64 / n as f64 - 1.0), y[1] + 3.0 * p[1] * (2.0 * j as f64 / n as f64 - 1.0)];
            best = best.max(spec.g1(x) - spec.lagrangian([x[0] - y[0], x[1] - y[1]]));
        }
    }
    best
}

#[test]
fn dual_datum_matches_brute_force() {
    for variant in [LagrangianVariant::Stated, LagrangianVariant::Conjugate] {
        let spec = LatticeDatumSpec::new(0.01, 0.25, variant).unwrap();
        let p = spec.pitch();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..6 {
            let y = [rng.gen_range(-2.0..2.0) * p[0], rng.gen_range(-2.0..2.0) * p[1]];
            let (exact, brute) = (spec.g0(y), g0_brute(&spec, y));
            assert!(brute <= exact + 1e-12, "{y:?}: {brute} > {exact}");
            // The objective is 2M_δ-Lipschitz in x, so the scan misses the max by at most 2M_δ·(half diagonal).
            let half_diag = (6.0 * p[0] / 600.0).hypot(6.0 * p[1] / 600.0) / 2.0;
            assert!(exact - brute <= 2.0 * spec.m_delta() * half_diag, "{y:?}: {exact} vs {brute}");
            assert!(exact >= spec.g1(y) - 1e-15);
        }
        for site in [[0, 0], [1, 1], [-3, 5]] {
            assert!(spec.g0(spec.site(site)).abs() < 1e-15);
        }
    }
}

#[test]
fn datum_class_and_support() {
    let spec = conj(0.01, 0.25);
    let datum = build_datum(&spec).unwrap();
    let m = datum.m_delta;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut quotient = 0.0f64;
    let mut table_err = 0.0f64;
    for _ in 0..3000 {
        let y = [rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)];
        let r = rng.gen_range(1e-4..0.05);
        let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let z = [y[0] + r * a.cos(), y[1] + r * a.sin()];
        quotient = quotient.max((datum.exact(y) - datum.exact(z)).abs() / r);
        quotient = quotient.max((datum.tabulated(y) - datum.tabulated(z)).abs() / r);
        table_err = table_err.max((datum.tabulated(y) - datum.exact(y)).abs());
        if y[0].abs().max(y[1].abs()) >= 0.5 {
            assert_eq!(datum.tabulated(y), 0.0);
            assert_eq!(datum.exact(y), 0.0);
        }
        if y[0].abs().max(y[1].abs()) <= 0.375 {
            assert_eq!(datum.exact(y), spec.g0(y));
        }
        assert!(datum.exact(y) >= 0.0);
    }
    assert!(quotient <= m * (1.0 + 1e-3), "{quotient} vs M_δ = {m}");
    assert!(table_err <= datum.table_error_bound());
    assert_eq!(datum.lipschitz(), m);
}

#[test]
fn lipschitz_constant_scales_like_cube_root() {
    for variant in [LagrangianVariant::Stated, LagrangianVariant::Conjugate] {
        let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|d: &f64| LatticeDatumSpec::new(*d, 0.5, variant).unwrap().m_delta() / d.cbrt())
            .collect();
        // M_δ/δ^{1/3} → 4/3 as δ → 0.
        for w in ratios.windows(2) {
            assert!(w[1] <= w[0] && w[1] >= 4.0 / 3.0);
        }
        assert!((ratios[3] - 4.0 / 3.0).abs() < 0.01);
    }
}

#[test]
fn admissibility_checks() {
    assert!(matches!(build_datum(&conj(0.01, 0.25).strict()), Err(Error::Precondition(_))));
    assert!(build_datum(&conj(0.02, 0.9).strict()).is_ok());
    assert!(matches!(LatticeDatumSpec::new(0.3, 0.25, LagrangianVariant::Conjugate), Err(Error::Input(_))));
    assert!(matches!(LatticeDatumSpec::new(0.1, 1.0, LagrangianVariant::Conjugate), Err(Error::Input(_))));
    let policy = GridPolicy::default();
    assert!(matches!(blowup_exponent(0.25, &[0.04, 0.02, 0.01], LagrangianVariant::Conjugate, policy), Err(Error::Input(_))));
    assert!(matches!(
        blowup_exponent(0.25, &[0.04, 0.02, 0.01, 0.004], LagrangianVariant::Conjugate, policy),
        Err(Error::Input(_))
    ));
}

#[test]
fn solution_reproduces_cell_structure() {
    assert!(matches!(build_datum(&conj(0.04, 0.15)), Err(Error::Precondition(_))));
    let spec = conj(0.04, 0.25);
    let grid = blowup_grid(&spec, GridPolicy::default()).unwrap();
    let run = solve_and_measure(&spec, &grid).unwrap();
    assert!(run.cells.interior > 100 && run.cells.fraction >= 0.9, "{:?}", run.cells);
    assert!(run.tv_b > 0.0 && run.tv_du > 0.0 && run.tv_jump > 0.0);

    let datum = build_datum(&spec).unwrap();
    let view = LagrangianView::new(spec.variant.model());
    let hl = HopfLax::new(&datum, &view, 1.0).unwrap();
    // b(1, y_ι) = 0 at a site, u(1,·) = g₁ on the window, u(1,·) = 0 beyond the support.
    for site in [[0, 0], [1, 1], [-2, 0]] {
        let y = spec.site(site);
        let p = hl.value_at(&y).unwrap();
        assert!((p.minimizer[0] - y[0]).abs() < 1e-9 && (p.minimizer[1] - y[1]).abs() < 1e-9);
        assert!(p.value.abs() < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = [rng.gen_range(-0.25..0.25), rng.gen_range(-0.25..0.25)];
        assert!((hl.value_at(&x).unwrap().value - spec.g1(x)).abs() <= datum.table_error_bound());
    }
    for x in [[1.1, 0.0], [0.0, -1.05], [0.9, 0.9]] {
        assert!(hl.value_at(&x).unwrap().value.abs() < 1e-12);
    }
}

#[test]
fn quartic_fails_directional_convexity() {
    let quartic = ConvexityModuli::new(HamiltonianModel::quartic2d()).lambda_r(1.0).unwrap();
    let stated = ConvexityModuli::new(LagrangianVariant::Stated.model()).lambda_r(1.0).unwrap();
    let round = ConvexityModuli::new(HamiltonianModel::power_norm(2, 2).unwrap()).lambda_r(1.0).unwrap();
    assert!(quartic < round && stated < round);
}

#[test]
fn stated_variant_model_is_consistent() {
    let view = LagrangianView::new(LagrangianVariant::Stated.model());
    for q in [[0.3, -0.2], [-1.0, 0.5], [0.0, 0.7]] {
        let closed = view.value(&q).unwrap();
        let numeric = view.numeric_conjugate(&q).unwrap().0;
        assert!((closed - numeric).abs() < 1e-7, "{q:?}: {closed} vs {numeric}");
    }
}
