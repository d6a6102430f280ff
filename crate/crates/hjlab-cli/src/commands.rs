use hjlab::bv::{bv_bound_check, VerdictStatus};
use hjlab::counterexample::{blowup_exponent, GridPolicy};
use hjlab::datum::{MinMaxAffine, PiecewiseLinear};
use hjlab::entropy::{
    audit_packing_family, bv_class_cover, bv_class_sample, entropy_report, log_grid, packing_count,
    semiconcave_packing_family, solution_set_sample, EntropyConstants, FunctionClassSample, Metric,
};
use hjlab::hamiltonian::HamiltonianKind;
use hjlab::{solve, ConvexityModuli, InitialDatum, LagrangianView};
use serde::Serialize;

use crate::config::{datum_from, EntropyClass, RunConfig};
use crate::output::{Cell, Table, Writer};
use crate::CliError;

/// What a command reports back to `main` beyond the files it wrote.
pub enum Outcome {
    Ok,
    /// A verdict failed; files are still written.
    VerdictFailed(String),
}

fn axis_names(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

pub fn solve_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let d = model.dim();
    let view = LagrangianView::new(model);
    let spec = cfg.grid_spec(d)?;
    let datum = cfg.build_datum(d)?;
    let res = solve(datum.as_ref(), &view, cfg.t, &spec)?;

    let mut names = axis_names("x", d);
    names.push("u".into());
    names.extend(axis_names("du", d));
    names.extend(axis_names("b", d));
    names.extend(axis_names("y", d));
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols);
    for k in 0..spec.len() {
        let mut row: Vec<Cell> = spec.point(k).into_iter().map(Cell::from).collect();
        row.push(res.u.values[k].into());
        row.extend(res.grad_u.at(k).iter().map(|v| Cell::from(*v)));
        row.extend(res.b.at(k).iter().map(|v| Cell::from(*v)));
        row.extend(res.minimizers.at(k).iter().map(|v| Cell::from(*v)));
        table.push(row);
    }
    out.table("solve", &table)?;

    #[derive(Serialize)]
    struct Summary {
        datum: String,
        t: f64,
        max_speed: f64,
        points: usize,
        ties: usize,
    }
    let ties = res.tie_gap.iter().filter(|g| g.is_finite() && **g <= 1e-9).count();
    out.summary(
        "solve_summary",
        &Summary { datum: datum.name(), t: res.t, max_speed: res.max_speed, points: spec.len(), ties },
    )?;
    Ok(Outcome::Ok)
}

pub fn bv_check_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<Outcome, CliError> {
    let bvc = cfg.bv_check.clone().ok_or_else(|| CliError::Config("config has no `bv_check` section".into()))?;
    let model = cfg.model()?;
    let d = model.dim();
    let view = LagrangianView::new(model);
    let moduli = ConvexityModuli::from_view(view.clone());
    let spec = cfg.grid_spec(d)?;
    let domain = bvc.domain.domain(d);
    let h_ref = bvc.h_ref.unwrap_or_else(|| spec.max_spacing());
    if !(bvc.lipschitz > 0.0) {
        return Err(CliError::Config("bv_check.lipschitz must be positive".into()));
    }

    let data: Vec<(u64, Box<dyn InitialDatum>)> = match &cfg.datum {
        Some(dc) => vec![(cfg.seed, datum_from(dc, d, cfg.seed)?)],
        None => {
            let reach = spec.lo.iter().chain(&spec.hi).fold(0.0f64, |a, v| a.max(v.abs()));
            let window = reach + 1.1 * cfg.t * moduli.max_speed(bvc.lipschitz)?;
            (0..bvc.count as u64)
                .map(|i| {
                    let s = cfg.seed.wrapping_add(i);
                    let datum: Box<dyn InitialDatum> = if d == 1 {
                        Box::new(PiecewiseLinear::random(s, bvc.pieces, window, bvc.m, bvc.lipschitz))
                    } else {
                        Box::new(MinMaxAffine::random(s, d, 3, 3, bvc.m, bvc.lipschitz))
                    };
                    (s, datum)
                })
                .collect()
        }
    };

    let mut table =
        Table::new(&["seed", "lhs", "rhs", "slack", "status", "holds_strict", "gamma_m", "lambda_m", "hessian_ratio"]);
    let mut failures = 0;
    let mut verdicts = Vec::with_capacity(data.len());
    for (seed, datum) in &data {
        let res = solve(datum.as_ref(), &view, cfg.t, &spec)?;
        let m = if datum.lipschitz() > 0.0 { datum.lipschitz() } else { bvc.lipschitz };
        let v = bv_bound_check(&res, &moduli, m, &domain, h_ref)?;
        if v.status == VerdictStatus::Fails {
            failures += 1;
        }
        table.push(vec![
            (*seed).into(),
            v.lhs.into(),
            v.rhs.into(),
            v.slack.into(),
            v.status.label().into(),
            v.holds_strict.into(),
            v.gamma_m.into(),
            v.lambda_m.into(),
            v.hessian_ratio.into(),
        ]);
        verdicts.push(v);
    }
    out.table("bv_check", &table)?;
    out.summary("bv_check_summary", &verdicts)?;
    Ok(if failures > 0 {
        Outcome::VerdictFailed(format!("{failures} of {} BV verdicts fail", data.len()))
    } else {
        Outcome::Ok
    })
}

fn power_exponent(cfg: &RunConfig) -> Option<f64> {
    let model = cfg.model().ok()?;
    match model.kind() {
        HamiltonianKind::PowerNorm { k } => Some(((2 * k - 1) as usize * model.dim()) as f64),
        _ => None,
    }
}

pub fn entropy_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<Outcome, CliError> {
    let ec = cfg.entropy.clone().ok_or_else(|| CliError::Config("config has no `entropy` section".into()))?;
    if ec.eps.is_empty() {
        return Err(CliError::Config("entropy.eps is empty".into()));
    }
    if ec.count > cfg.budget.max_sample {
        return Err(CliError::Config(format!("sample size {} exceeds the budget {}", ec.count, cfg.budget.max_sample)));
    }
    match ec.class {
        EntropyClass::SolutionSet => {
            let model = cfg.model()?;
            let view = LagrangianView::new(model);
            let moduli = ConvexityModuli::from_view(view.clone());
            let constants = EntropyConstants::compute(&moduli, cfg.t, ec.r, ec.m, ec.lipschitz)?;
            let bound_grid = log_grid(constants.eps_max * ec.bound_top, ec.bound_decades, ec.bound_points);
            let sample = solution_set_sample(&view, cfg.t, ec.r, ec.m, ec.lipschitz, ec.count, ec.points, cfg.seed)?;
            let report = entropy_report(&sample, ec.metric, &ec.eps, &moduli, constants.clone(), &bound_grid)?;

            let mut rows = Table::new(&["epsilon", "covering", "packing", "lower_bound", "upper_bound", "admissible"]);
            for r in &report.rows {
                rows.push(vec![
                    r.epsilon.into(),
                    r.covering.into(),
                    r.packing.into(),
                    r.lower_bound.into(),
                    r.upper_bound.into(),
                    r.admissible.into(),
                ]);
            }
            out.table("entropy_rows", &rows)?;

            let mut sweep = Table::new(&["epsilon", "lower_bound", "upper_bound"]);
            for &e in &bound_grid {
                let (l, u) = constants.bounds(&moduli, e)?;
                sweep.push(vec![e.into(), l.into(), u.into()]);
            }
            out.table("entropy_bounds", &sweep)?;

            let mut exps = Table::new(&["empirical_slope", "theoretical_lower_slope", "theoretical_upper_slope", "theoretical_exponent"]);
            exps.push(vec![
                report.empirical.slope.into(),
                report.theoretical_lower.slope.into(),
                report.theoretical_upper.slope.into(),
                power_exponent(cfg).into(),
            ]);
            out.table("entropy_exponents", &exps)?;
            out.summary("entropy_report", &report)?;
            let ordered = bound_grid.iter().all(|e| constants.bounds(&moduli, *e).is_ok_and(|(l, u)| l <= u));
            Ok(if ordered { Outcome::Ok } else { Outcome::VerdictFailed("lower bound exceeds upper bound".into()) })
        }
        EntropyClass::Bv => {
            let d = cfg.model().map(|m| m.dim()).unwrap_or(1);
            let sample = bv_class_sample(d, ec.r, ec.m, ec.variation, ec.count, ec.points, cfg.seed)?;
            bv_entropy(&sample, &ec.eps, ec.metric, ec.r, ec.m, ec.variation, out)
        }
        EntropyClass::SemiconcaveFamily => {
            let d = cfg.model().map(|m| m.dim()).unwrap_or(1);
            let mut table = Table::new(&[
                "epsilon",
                "members",
                "cells_per_axis",
                "min_hamming",
                "separated",
                "in_class",
                "packing_2eps",
                "log2_members",
            ]);
            let mut audits = Vec::new();
            let mut ok = true;
            for &eps in &ec.eps {
                let family = semiconcave_packing_family(d, ec.r, ec.k, ec.r, eps, ec.count, cfg.seed)?;
                let audit = audit_packing_family(&family, eps, ec.r, ec.k)?;
                let packed = packing_count(&family.sample, 2.0 * eps, Metric::GradL1)?;
                ok &= audit.separated && audit.in_class && packed == family.sample.len();
                table.push(vec![
                    eps.into(),
                    family.sample.len().into(),
                    family.cells_per_axis.into(),
                    family.min_hamming.into(),
                    audit.separated.into(),
                    audit.in_class.into(),
                    packed.into(),
                    (family.sample.len() as f64).log2().into(),
                ]);
                audits.push(audit);
            }
            out.table("packing_family", &table)?;
            out.summary("packing_family_audit", &audits)?;
            Ok(if ok { Outcome::Ok } else { Outcome::VerdictFailed("packing family audit failed".into()) })
        }
    }
}

fn bv_entropy(
    sample: &FunctionClassSample,
    eps: &[f64],
    metric: Metric,
    r: f64,
    m: f64,
    v: f64,
    out: &mut Writer,
) -> Result<Outcome, CliError> {
    let dist = sample.distances(metric);
    let mut table = Table::new(&["epsilon", "covering", "packing", "packing_2eps", "cover_count", "log2_ceiling", "within_ceiling"]);
    let mut reports = Vec::new();
    let mut ok = true;
    for &e in eps {
        let cover = bv_class_cover(sample, r, m, v, e)?;
        let (n, p, p2) = (dist.covering_count(e), dist.packing_count(e), dist.packing_count(2.0 * e));
        ok &= p2 <= n && n <= p && cover.within_ceiling;
        table.push(vec![
            e.into(),
            n.into(),
            p.into(),
            p2.into(),
            cover.count.into(),
            cover.log2_ceiling.into(),
            cover.within_ceiling.into(),
        ]);
        reports.push(cover);
    }
    out.table("bv_entropy", &table)?;
    out.summary("bv_entropy_summary", &reports)?;
    Ok(if ok { Outcome::Ok } else { Outcome::VerdictFailed("covering sandwich or BV ceiling violated".into()) })
}

pub fn counterexample_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<Outcome, CliError> {
    let cc = cfg.counterexample.clone().ok_or_else(|| CliError::Config("config has no `counterexample` section".into()))?;
    let policy = GridPolicy { per_height: cc.per_height, per_width: cc.per_width };
    let report = blowup_exponent(cc.ell, &cc.deltas, cc.variant, policy)?;
    let mut table =
        Table::new(&["delta", "h", "points", "m_delta", "tv_b", "tv_du", "tv_jump", "cell_interior", "cell_fraction"]);
    for r in &report.runs {
        table.push(vec![
            r.delta.into(),
            r.h.into(),
            r.points.into(),
            r.m_delta.into(),
            r.tv_b.into(),
            r.tv_du.into(),
            r.tv_jump.into(),
            r.cells.interior.into(),
            r.cells.fraction.into(),
        ]);
    }
    out.table("counterexample", &table)?;
    out.summary("counterexample_summary", &report)?;
    Ok(if report.flagged {
        Outcome::VerdictFailed("tv_b is not monotone in δ; the grid is likely under-resolved".into())
    } else {
        Outcome::Ok
    })
}

pub fn legendre_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<Outcome, CliError> {
    let lc = cfg.legendre.clone().ok_or_else(|| CliError::Config("config has no `legendre` section".into()))?;
    let model = cfg.model()?;
    let d = model.dim();
    let view = LagrangianView::new(model);
    let mut names = axis_names("q", d);
    names.push("L".into());
    names.extend(axis_names("dL", d));
    names.push("L_numeric".into());
    names.push("abs_diff".into());
    let cols: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut table = Table::new(&cols);
    for q in &lc.q {
        let (value, grad) = view.value_grad(q)?;
        let (numeric, _) = view.numeric_conjugate(q)?;
        let mut row: Vec<Cell> = q.iter().map(|v| Cell::from(*v)).collect();
        row.push(value.into());
        row.extend(grad.iter().map(|v| Cell::from(*v)));
        row.push(numeric.into());
        row.push((value - numeric).abs().into());
        table.push(row);
    }
    out.table("legendre", &table)?;
    Ok(Outcome::Ok)
}

pub fn moduli_cmd(cfg: &RunConfig, out: &mut Writer) -> Result<Outcome, CliError> {
    let mc = cfg.moduli.clone().ok_or_else(|| CliError::Config("config has no `moduli` section".into()))?;
    let model = cfg.model()?;
    let moduli = ConvexityModuli::new(model.clone());
    let mut table = Table::new(&["s", "psi", "phi"]);
    for &s in &mc.s {
        table.push(vec![s.into(), moduli.psi(mc.m, s)?.into(), moduli.phi(mc.m, s)?.into()]);
    }
    out.table("moduli", &table)?;

    #[derive(Serialize)]
    struct Summary {
        model: String,
        m: f64,
        normalized: bool,
        lambda_r_at_m: Option<f64>,
        max_speed: f64,
        gamma_radius: f64,
        gamma_m: Option<f64>,
        hessian_ratio: f64,
    }
    let gamma_radius = moduli.gamma_radius(mc.m)?;
    let summary = Summary {
        model: model.label(),
        m: mc.m,
        normalized: model.is_normalized(),
        lambda_r_at_m: moduli.lambda_r(mc.m).ok(),
        max_speed: moduli.max_speed(mc.m)?,
        gamma_radius,
        gamma_m: moduli.gamma_m(mc.m).ok(),
        hessian_ratio: moduli.hessian_ratio(gamma_radius),
    };
    out.summary("moduli_summary", &summary)?;
    Ok(Outcome::Ok)
}
