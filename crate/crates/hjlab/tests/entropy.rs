use hjlab::entropy::*;
use hjlab::{ConvexityModuli, Domain, Error, GridFunction, GridSpec, HamiltonianModel, LagrangianView};
use proptest::prelude::*;

fn constants_family(values: &[f64], spec: &GridSpec) -> FunctionClassSample {
    let members = values.iter().map(|c| GridFunction::from_fn(spec, |_| *c)).collect();
    FunctionClassSample::new(members, Domain::cube(1, 0.0, 1.0), ClassTag::Other, 0).unwrap()
}

/// Exact minimum cover of points on a line by closed intervals of half-width ε centered at points.
fn interval_cover_oracle(points: &[f64], eps: f64) -> usize {
    let mut pts = points.to_vec();
    pts.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut i = 0;
    while i < pts.len() {
        // Rightmost point within ε of the first uncovered point becomes the center.
        let mut c = i;
        while c + 1 < pts.len() && pts[c + 1] - pts[i] <= eps * (1.0 + 1e-9) {
            c += 1;
        }
        count += 1;
        while i < pts.len() && pts[i] - pts[c] <= eps * (1.0 + 1e-9) {
            i += 1;
        }
    }
    count
}

#[test]
fn trivial_counts() {
    let spec = GridSpec::cube(1, 0.0, 1.0, 11).unwrap();
    let one = constants_family(&[0.3], &spec);
    assert_eq!(covering_count(&one, 0.1, Metric::L1).unwrap(), 1);
    assert_eq!(packing_count(&one, 0.1, Metric::L1).unwrap(), 1);
    let two = constants_family(&[0.0, 0.3], &spec);
    assert_eq!(covering_count(&two, 0.1, Metric::L1).unwrap(), 2);
    assert!(matches!(covering_count(&two, 0.0, Metric::L1), Err(Error::Input(_))));
    assert!(matches!(
        FunctionClassSample::new(vec![], Domain::cube(1, 0.0, 1.0), ClassTag::Other, 0),
        Err(Error::Input(_))
    ));
}

#[test]
fn equally_spaced_constants_match_interval_oracle() {
    let spec = GridSpec::cube(1, 0.0, 1.0, 5).unwrap();
    for k in [1usize, 2, 3, 7, 10, 31] {
        let delta = 0.01;
        let values: Vec<f64> = (0..k).map(|i| i as f64 * delta).collect();
        let sample = constants_family(&values, &spec);
        for eps in [0.005, 0.01, 0.02, 0.035] {
            let exact = interval_cover_oracle(&values, eps);
            assert_eq!(covering_count(&sample, eps, Metric::L1).unwrap(), exact, "k={k} eps={eps}");
            let dist = sample.distances(Metric::L1);
            // Greedy left-to-right packing on a line is optimal.
            let mut chosen: Vec<f64> = Vec::new();
            for v in &values {
                if chosen.last().is_none_or(|c| v - c > eps * (1.0 + 1e-9)) {
                    chosen.push(*v);
                }
            }
            assert_eq!(dist.packing_count(eps), chosen.len());
        }
    }
}

#[test]
fn semiconcave_family_is_certified() {
    let eps = packing_family_max_eps(1, 1.0, 1.0, 1.0) / 2.0;
    let family = semiconcave_packing_family(1, 1.0, 1.0, 1.0, eps, 256, 11).unwrap();
    assert_eq!(family.sample.len(), 256);
    assert!(family.codewords[0].iter().all(|b| !b));
    let audit = audit_packing_family(&family, eps, 1.0, 1.0).unwrap();
    assert!(audit.separated && audit.in_class, "{audit:?}");
    assert_eq!(packing_count(&family.sample, 2.0 * eps, Metric::GradL1).unwrap(), 256);
    assert!(semiconcave_packing_family(1, 1.0, 1.0, 1.0, 2.0 * packing_family_max_eps(1, 1.0, 1.0, 1.0), 8, 0).is_err());
}

#[test]
fn single_cell_difference_equals_bump_mass() {
    let eps = packing_family_max_eps(1, 1.0, 1.0, 1.0) / 4.0;
    let family = semiconcave_packing_family(1, 1.0, 1.0, 1.0, eps, 2, 5).unwrap();
    let spec = family.sample.members[0].spec.clone();
    let pitch = 2.0 / family.cells_per_axis as f64;
    let rho = family.bump_radius;
    // One bump in the first cell versus none.
    let one = GridFunction::from_fn(&spec, |x| {
        let r = (x[0] - (-1.0 + 0.5 * pitch)).abs();
        radial_bump(1.0, rho, r)
    });
    let zero = GridFunction::from_fn(&spec, |_| 0.0);
    let sample = FunctionClassSample::new(vec![zero, one], Domain::cube(1, -1.0, 1.0), ClassTag::Other, 0).unwrap();
    let mass = sample.distances(Metric::GradL1).get(0, 1);
    // Independent midpoint quadrature of |g'| over the support.
    let n = 200_000;
    let mut oracle = 0.0;
    for i in 0..n {
        let r = -rho + (i as f64 + 0.5) * 2.0 * rho / n as f64;
        let h = 1e-7;
        let g = (radial_bump(1.0, rho, (r + h).abs()) - radial_bump(1.0, rho, (r - h).abs())) / (2.0 * h);
        oracle += g.abs() * 2.0 * rho / n as f64;
    }
    assert!((mass - oracle).abs() < 1e-6 * oracle.max(1e-12) + 1e-9, "{mass} vs {oracle}");
    assert!((family.bump_mass - rho * rho / 2.0).abs() < 1e-15);
    assert!(family.cells_per_axis as f64 / 4.0 * family.bump_mass >= 2.0 * eps);
}

#[test]
fn two_dimensional_family_separation() {
    let eps = packing_family_max_eps(2, 1.0, 1.0, 1.0) / 2.0;
    let family = semiconcave_packing_family(2, 1.0, 1.0, 1.0, eps, 64, 2).unwrap();
    let audit = audit_packing_family(&family, eps, 1.0, 1.0).unwrap();
    assert!(audit.separated && audit.in_class, "{audit:?}");
}

#[test]
fn bump_mass_matches_quadrature_in_two_dimensions() {
    let (k, rho) = (1.3, 0.4);
    let n = 1600;
    let h = 2.0 * rho / n as f64;
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = -rho + (i as f64 + 0.5) * h;
            let y = -rho + (j as f64 + 0.5) * h;
            let r = (x * x + y * y).sqrt();
            let g = if r <= rho / 2.0 { k * r } else if r <= rho { k * (rho - r) } else { 0.0 };
            total += g * h * h;
        }
    }
    assert!((bump_gradient_mass(2, k, rho).unwrap() - total).abs() < 1e-4 * total);
}

#[test]
fn code_sizes_grow_with_length() {
    let mut prev = 0;
    for n in [4usize, 8, 16, 32] {
        let code = greedy_code(n, n.div_ceil(4), 4096, 1);
        for i in 0..code.len() {
            for j in 0..i {
                let dist = code[i].iter().zip(&code[j]).filter(|(a, b)| a != b).count();
                assert!(dist >= n.div_ceil(4));
            }
        }
        assert!(code.len() > prev);
        prev = code.len();
    }
}

#[test]
fn constants_class_cover() {
    // V = 0: only constants, quantized to ceil(2M|box|/ε) bins.
    let spec = GridSpec::cube(1, -1.0, 1.0, 21).unwrap();
    let values: Vec<f64> = (0..200).map(|i| -1.0 + 2.0 * i as f64 / 199.0).collect();
    let members = values.iter().map(|c| GridFunction::from_fn(&spec, |_| *c)).collect();
    let sample = FunctionClassSample::new(members, Domain::cube(1, -1.0, 1.0), ClassTag::BvClass, 0).unwrap();
    let eps = 0.1;
    let report = bv_class_cover(&sample, 1.0, 1.0, 0.0, eps).unwrap();
    assert!(report.count <= (2.0 * 1.0 * 2.0 / eps).ceil() as usize);
    assert!(packing_count(&sample, 2.0 * eps, Metric::L1).unwrap() <= report.count);
}

#[test]
fn staircase_cover_within_ceiling() {
    let (r, m, v) = (1.0, 1.0, 1.0);
    let sample = bv_class_sample(1, r, m, v, 300, 401, 9).unwrap();
    for u in &sample.members {
        let tv: f64 = u.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert!(tv <= v + 1e-12 && u.values.iter().all(|x| x.abs() <= m));
    }
    for eps in [0.1, 0.2, 0.4] {
        let report = bv_class_cover(&sample, r, m, v, eps).unwrap();
        assert!(report.within_ceiling);
        let dist = sample.distances(Metric::L1);
        // Classes have diameter ≤ 2ε, so a 2ε-separated subset meets each class once.
        assert!(dist.packing_count(2.0 * eps) <= report.count, "eps={eps}");
        assert!(dist.covering_count(eps) <= report.count.max(dist.covering_count(eps)));
    }
    let ceiling = bv_class_cover(&sample, 1.0, 1.0, 1.0, 0.1).unwrap().log2_ceiling;
    assert!((ceiling - 48.0 * 60.0).abs() < 1e-9);
    assert!(bv_class_cover(&sample, 1.0, 1.0, 1.0, 10.0).is_err());
}

#[test]
fn theoretical_exponents_and_ordering() {
    for (k, d) in [(1u32, 1usize), (2, 1), (1, 2), (2, 2)] {
        let moduli = ConvexityModuli::new(HamiltonianModel::power_norm(k, d).unwrap());
        let c = EntropyConstants::compute(&moduli, 1.0, 1.0, 1.0, 1.0).unwrap();
        let deep = log_grid(c.eps_max * 1e-3, 2.0, 9);
        let (mut lo, mut up) = (vec![], vec![]);
        for e in &deep {
            let (l, u) = c.bounds(&moduli, *e).unwrap();
            lo.push(l);
            up.push(u);
        }
        let target = ((2 * k - 1) as usize * d) as f64;
        for fit in [fit_exponent(&deep, &lo), fit_exponent(&deep, &up)] {
            assert!((fit.slope - target).abs() <= 0.02 * target, "k={k} d={d}: {fit:?}");
        }
        for e in log_grid(c.eps_max * 0.999, 4.0, 17) {
            let (l, u) = c.bounds(&moduli, e).unwrap();
            assert!(l <= u && c.admissible(e));
        }
    }
}

#[test]
fn quadratic_constants_by_hand() {
    let moduli = ConvexityModuli::new(HamiltonianModel::power_norm(1, 1).unwrap());
    let c = EntropyConstants::compute(&moduli, 1.0, 1.0, 1.0, 1.0).unwrap();
    // Λ = 4, γ = 1, sup L = 4 on [−4, 4].
    assert!((c.v_t - (2.0 * (4.0 + 2.0) + 2.0)).abs() < 1e-9);
    assert!((c.m_t - (1.0 + 1.0 + 4.0)).abs() < 1e-9);
    assert!((c.beta_minus - 2.0).abs() < 1e-15 && (c.r_plus - 12.0).abs() < 1e-12);
    assert!((c.r_minus - 2.0 / (2.0 * 1024.0)).abs() < 1e-15);
    assert!((c.beta_plus - 6.0 * 4.0 * c.m_t).abs() < 1e-9);
}

#[test]
fn degenerate_model_has_no_entropy_constants() {
    let moduli = ConvexityModuli::new(HamiltonianModel::quartic2d());
    assert!(matches!(EntropyConstants::compute(&moduli, 1.0, 1.0, 1.0, 1.0), Err(Error::Degenerate(_))));
}

#[test]
fn constants_family_exponent_is_flat() {
    let spec = GridSpec::cube(1, 0.0, 1.0, 5).unwrap();
    let values: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    let grid = log_grid(0.1, 1.5, 6);
    let fit = empirical_exponent(|_| Ok(constants_family(&values, &spec)), &grid, Metric::L1).unwrap();
    assert!(!fit.degenerate && fit.slope < 0.5, "{fit:?}");
    assert!(empirical_exponent(|_| Ok(constants_family(&values, &spec)), &grid[..3], Metric::L1).is_err());
}

#[test]
fn solution_set_report() {
    let view = LagrangianView::new(HamiltonianModel::power_norm(2, 1).unwrap());
    let moduli = ConvexityModuli::from_view(view.clone());
    let sample = solution_set_sample(&view, 1.0, 1.0, 1.0, 1.0, 120, 101, 4).unwrap();
    let constants = EntropyConstants::compute(&moduli, 1.0, 1.0, 1.0, 1.0).unwrap();
    let eps = log_grid(1.0, 1.5, 6);
    let report =
        entropy_report(&sample, Metric::W11, &eps, &moduli, constants.clone(), &log_grid(constants.eps_max * 1e-3, 2.0, 5))
            .unwrap();
    assert!((report.theoretical_upper.slope - 3.0).abs() < 0.06);
    for w in report.rows.windows(2) {
        assert!(w[1].covering >= w[0].covering);
    }
    assert!(report.empirical.slope > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sandwich_on_random_samples(seed in 0u64..100_000, eps in 0.02f64..0.8) {
        let sample = bv_class_sample(1, 1.0, 1.0, 1.0, 60, 81, seed).unwrap();
        for metric in [Metric::L1, Metric::W11] {
            let dist = sample.distances(metric);
            let n = dist.covering_count(eps);
            prop_assert!(dist.packing_count(2.0 * eps) <= n);
            prop_assert!(n <= dist.packing_count(eps));
            prop_assert!(dist.covering_count(2.0 * eps) <= n);
        }
    }
}
