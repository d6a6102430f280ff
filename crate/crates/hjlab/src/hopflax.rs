//! The Hopf-Lax semigroup S_t u₀(x) = min_y {u₀(y) + t·L((x−y)/t)} on grids,
//! its backward-characteristic slopes b = (x−y_x)/t, and the lattice
//! approximants uₙ, bₙ.

use rayon::prelude::*;

use crate::datum::{GridDatum, InitialDatum};
use crate::error::{check_dim, Error, Result};
use crate::grid::{GridFunction, GridSpec, VectorField};
use crate::hamiltonian::{dist, norm, sample_directions, ConvexityModuli, LagrangianView};

/// Relative margin of the search ball beyond t·Λ_M.
pub const SEARCH_MARGIN: f64 = 0.1;

/// Result of one Hopf-Lax minimization.
#[derive(Clone, Debug, PartialEq)]
pub struct HopfLaxPoint {
    pub value: f64,
    pub minimizer: Vec<f64>,
    /// Best competing local minimum whose minimizer is distinct from the winner.
    pub runner_up: Option<(f64, Vec<f64>)>,
}

/// Pointwise Hopf-Lax evaluator for one datum, model and time.
pub struct HopfLax<'a> {
    datum: &'a dyn InitialDatum,
    view: &'a LagrangianView,
    t: f64,
    max_speed: f64,
    radius: f64,
    /// Coarse scan resolution: points per half-width per axis.
    pub scan_steps: usize,
    /// Number of coarse local minima refined.
    pub refine_starts: usize,
}

impl<'a> HopfLax<'a> {
    pub fn new(datum: &'a dyn InitialDatum, view: &'a LagrangianView, t: f64) -> Result<Self> {
        let m = datum.lipschitz();
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::Input(format!("datum Lipschitz constant must be finite and nonnegative, got {m}")));
        }
        let speed = if m == 0.0 { 0.0 } else { ConvexityModuli::from_view(view.clone()).max_speed(m)? };
        Self::with_max_speed(datum, view, t, speed)
    }

    /// Uses a precomputed Λ_M.
    pub fn with_max_speed(datum: &'a dyn InitialDatum, view: &'a LagrangianView, t: f64, max_speed: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Precondition(format!("time must be positive, got {t}")));
        }
        check_dim(view.dim(), datum.dim())?;
        let d = view.dim();
        Ok(Self {
            datum,
            view,
            t,
            max_speed,
            radius: (1.0 + SEARCH_MARGIN) * t * max_speed,
            scan_steps: match d {
                1 => 64,
                2 => 32,
                _ => 8,
            },
            refine_starts: 4,
        })
    }

    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    pub fn search_radius(&self) -> f64 {
        self.radius
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn lagrangian(&self, q: &[f64]) -> Result<f64> {
        match self.view.closed_form_value(q) {
            Some(v) => Ok(v),
            None => self.view.value(q),
        }
    }

    fn objective(&self, x: &[f64], y: &[f64], q: &mut [f64]) -> Result<f64> {
        for i in 0..x.len() {
            q[i] = (x[i] - y[i]) / self.t;
        }
        Ok(self.datum.value(y) + self.t * self.lagrangian(q)?)
    }

    /// Per-axis half-widths of {q : L(q) ≤ level}, by bisection along sampled rays.
    fn sublevel_extents(&self, level: f64) -> Result<Vec<f64>> {
        let d = self.view.dim();
        let mut ext = vec![0.0f64; d];
        let mut q = vec![0.0; d];
        for dir in sample_directions(d, 32) {
            let at = |r: f64, q: &mut Vec<f64>| -> Result<f64> {
                for (qi, e) in q.iter_mut().zip(&dir) {
                    *qi = r * e;
                }
                self.lagrangian(q)
            };
            let mut hi = (self.max_speed * 1e-3).max(1e-12);
            let mut grow = 0;
            while at(hi, &mut q)? <= level && grow < 200 {
                hi *= 2.0;
                grow += 1;
            }
            let mut lo = 0.0;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if at(mid, &mut q)? <= level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            for i in 0..d {
                ext[i] = ext[i].max(hi * dir[i].abs());
            }
        }
        Ok(ext)
    }

    /// min_y {u₀(y) + t·L((x−y)/t)} with its minimizer.
    pub fn value_at(&self, x: &[f64]) -> Result<HopfLaxPoint> {
        check_dim(self.view.dim(), x.len())?;
        let d = x.len();
        let mut q = vec![0.0; d];
        if self.radius == 0.0 {
            let value = self.objective(x, x, &mut q)?;
            return Ok(HopfLaxPoint { value, minimizer: x.to_vec(), runner_up: None });
        }

        let mut half = vec![self.radius; d];
        if let (Some(lb), true) = (self.datum.lower_bound(), self.view.model().is_normalized()) {
            // Any minimizer satisfies t·L((x−y)/t) ≤ u₀(x) − inf u₀.
            let level = ((self.datum.value(x) - lb) / self.t).max(0.0);
            let ext = self.sublevel_extents(level)?;
            for i in 0..d {
                half[i] = half[i].min(1.1 * self.t * ext[i] + 1e-12 * self.radius);
            }
        }

        let s = self.scan_steps as i64;
        let side = (2 * s + 1) as usize;
        let steps: Vec<f64> = half.iter().map(|w| w / s as f64).collect();
        let total = side.pow(d as u32);
        let mut grid = vec![f64::INFINITY; total];
        let mut y = vec![0.0; d];
        let mut idx = vec![0usize; d];
        for slot in grid.iter_mut() {
            for a in 0..d {
                y[a] = x[a] + (idx[a] as i64 - s) as f64 * steps[a];
            }
            if dist(&y, x) <= self.radius {
                *slot = self.objective(x, &y, &mut q)?;
            }
            crate::hamiltonian::advance(&mut idx, side);
        }

        let starts = coarse_local_minima(&grid, d, side, self.refine_starts);
        let mut refined: Vec<(f64, Vec<f64>)> = Vec::with_capacity(starts.len());
        for flat in starts {
            let mut rem = flat;
            let mut start = vec![0.0; d];
            for a in (0..d).rev() {
                start[a] = x[a] + ((rem % side) as i64 - s) as f64 * steps[a];
                rem /= side;
            }
            refined.push(self.refine(x, start, grid[flat], &steps)?);
        }
        if refined.is_empty() {
            return Err(Error::Degenerate(format!("no finite objective value near x = {x:?}")));
        }

        let mut best = 0;
        for i in 1..refined.len() {
            let (vb, vi) = (refined[best].0, refined[i].0);
            let tie = (vi - vb).abs() <= 1e-12 * (1.0 + vb.abs());
            if (!tie && vi < vb) || (tie && lex_less(&refined[i].1, &refined[best].1)) {
                best = i;
            }
        }
        let separation = 2.0 * steps.iter().cloned().fold(0.0, f64::max);
        let runner_up = refined
            .iter()
            .enumerate()
            .filter(|(i, c)| *i != best && dist(&c.1, &refined[best].1) > separation)
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(_, c)| c.clone());
        let (value, minimizer) = refined.swap_remove(best);
        if dist(&minimizer, x) >= self.radius * (1.0 - 1e-9) {
            return Err(Error::SearchRadius { x: x.to_vec() });
        }
        Ok(HopfLaxPoint { value, minimizer, runner_up })
    }

    /// Compass search over all 3^d−1 neighbor directions with halving steps.
    fn refine(&self, x: &[f64], start: Vec<f64>, f0: f64, steps: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = x.len();
        let dirs = compass_directions(d);
        let max_step = steps.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-13 * self.radius.max(1.0);
        let mut q = vec![0.0; d];
        let mut y = start;
        let mut f = f0;
        let mut cand = vec![0.0; d];
        let mut scale = 1.0;
        let mut evals = 0usize;
        while scale * max_step > tol && evals < 20_000 {
            let mut moved = false;
            for dir in &dirs {
                for a in 0..d {
                    cand[a] = y[a] + scale * dir[a] * steps[a];
                }
                if dist(&cand, x) > self.radius {
                    continue;
                }
                evals += 1;
                let fc = self.objective(x, &cand, &mut q)?;
                if fc < f {
                    f = fc;
                    y.copy_from_slice(&cand);
                    moved = true;
                    break;
                }
            }
            if !moved {
                scale *= 0.5;
            }
        }
        Ok((f, y))
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

fn compass_directions(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    loop {
        if idx.iter().any(|&i| i != 1) {
            out.push(idx.iter().map(|&i| i as f64 - 1.0).collect());
        }
        if !crate::hamiltonian::advance(&mut idx, 3) {
            break;
        }
    }
    out
}

/// Flat indices of coarse local minima sorted by value then index, at most `limit`.
fn coarse_local_minima(grid: &[f64], d: usize, side: usize, limit: usize) -> Vec<usize> {
    let mut found: Vec<(f64, usize)> = Vec::new();
    let offsets = compass_directions(d);
    let mut multi = vec![0usize; d];
    for flat in 0..grid.len() {
        let v = grid[flat];
        if v.is_finite() {
            let mut rem = flat;
            for a in (0..d).rev() {
                multi[a] = rem % side;
                rem /= side;
            }
            let is_min = offsets.iter().all(|off| {
                let mut nb = 0usize;
                for a in 0..d {
                    let j = multi[a] as i64 + off[a] as i64;
                    if j < 0 || j >= side as i64 {
                        return true;
                    }
                    nb = nb * side + j as usize;
                }
                v <= grid[nb]
            });
            if is_min {
                found.push((v, flat));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    found.truncate(limit.max(1));
    found.into_iter().map(|(_, i)| i).collect()
}

/// u(t,·), its gradient, the slopes b and the minimizers on a grid.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub t: f64,
    pub max_speed: f64,
    pub u: GridFunction,
    pub grad_u: VectorField,
    pub b: VectorField,
    pub minimizers: VectorField,
    /// Value gap to the best distinct competing local minimum (∞ if none).
    pub tie_gap: Vec<f64>,
}

impl SolveResult {
    /// DH(grad u) at every grid point.
    pub fn dual_slope(&self, view: &LagrangianView) -> VectorField {
        let d = self.u.spec.dim();
        let mut data = vec![0.0; self.grad_u.data.len()];
        for (out, g) in data.chunks_mut(d).zip(self.grad_u.data.chunks(d)) {
            view.model().grad_into(g, out);
        }
        VectorField { spec: self.u.spec.clone(), components: d, data }
    }

    /// Max |b − DH(grad u)| over interior points with a unique minimizer whose
    /// neighbors' minimizers stay within `jump_factor`·h, plus the number checked.
    pub fn consistency_defect(&self, view: &LagrangianView, tie_tol: f64, jump_factor: f64) -> (f64, usize) {
        let spec = &self.u.spec;
        let d = spec.dim();
        let dual = self.dual_slope(view);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for i in 0..spec.len() {
            if self.tie_gap[i] <= tie_tol {
                continue;
            }
            let multi = spec.multi(i);
            let regular = (0..d).all(|a| {
                if multi[a] == 0 || multi[a] + 1 == spec.n[a] {
                    return false;
                }
                let s = spec.stride(a);
                let jump = dist(self.minimizers.at(i + s), self.minimizers.at(i - s));
                let gaps_ok = self.tie_gap[i + s] > tie_tol && self.tie_gap[i - s] > tie_tol;
                gaps_ok && jump <= jump_factor * spec.spacing(a)
            });
            if regular {
                checked += 1;
                worst = worst.max(dist(self.b.at(i), dual.at(i)));
            }
        }
        (worst, checked)
    }
}

/// Evaluates S_t u₀ at every grid point.
pub fn solve(datum: &dyn InitialDatum, view: &LagrangianView, t: f64, spec: &GridSpec) -> Result<SolveResult> {
    let hl = HopfLax::new(datum, view, t)?;
    solve_with(&hl, spec)
}

/// Grid solve with a configured evaluator.
pub fn solve_with(hl: &HopfLax<'_>, spec: &GridSpec) -> Result<SolveResult> {
    check_dim(hl.view.dim(), spec.dim())?;
    let d = spec.dim();
    let points: Vec<HopfLaxPoint> =
        (0..spec.len()).into_par_iter().map(|i| hl.value_at(&spec.point(i))).collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(points.len());
    let mut mins = Vec::with_capacity(points.len() * d);
    let mut slopes = Vec::with_capacity(points.len() * d);
    let mut gaps = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let x = spec.point(i);
        values.push(p.value);
        mins.extend_from_slice(&p.minimizer);
        slopes.extend(x.iter().zip(&p.minimizer).map(|(xi, yi)| (xi - yi) / hl.t));
        gaps.push(p.runner_up.as_ref().map_or(f64::INFINITY, |r| r.0 - p.value));
    }
    let u = GridFunction { spec: spec.clone(), values };
    let grad_u = u.gradient();
    Ok(SolveResult {
        t: hl.t,
        max_speed: hl.max_speed,
        u,
        grad_u,
        b: VectorField { spec: spec.clone(), components: d, data: slopes },
        minimizers: VectorField { spec: spec.clone(), components: d, data: mins },
        tie_gap: gaps,
    })
}

/// S_s u₀ solved on a grid padded so that a later S_t search from `spec` stays inside.
fn interpolated_solution(
    datum: &dyn InitialDatum,
    view: &LagrangianView,
    s: f64,
    later: f64,
    spec: &GridSpec,
) -> Result<GridDatum> {
    let speed = HopfLax::new(datum, view, s)?.max_speed();
    let margin = (1.0 + SEARCH_MARGIN) * later * speed + 2.0 * spec.max_spacing();
    let wide = spec.expanded(margin)?;
    let inner = solve(datum, view, s, &wide)?;
    Ok(GridDatum::new(inner.u, datum.lipschitz()))
}

/// max |S_{t+s}u₀ − S_t(S_s u₀)| on the grid, with S_s u₀ multilinearly interpolated.
pub fn semigroup_check(datum: &dyn InitialDatum, view: &LagrangianView, t: f64, s: f64, spec: &GridSpec) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::Precondition(format!("semigroup check needs t, s > 0, got t={t}, s={s}")));
    }
    let mid = interpolated_solution(datum, view, s, t, spec)?;
    let composed = solve(&mid, view, t, spec)?;
    let direct = solve(datum, view, t + s, spec)?;
    direct.u.max_abs_diff(&composed.u)
}

/// max over the grid of |u(t,x) − min_y {u(s,y) + (t−s)L((x−y)/(t−s))}|.
pub fn functional_identity_check(
    datum: &dyn InitialDatum,
    view: &LagrangianView,
    s: f64,
    t: f64,
    spec: &GridSpec,
) -> Result<f64> {
    if !(s >= 0.0 && s < t) {
        return Err(Error::Precondition(format!("functional identity needs 0 <= s < t, got s={s}, t={t}")));
    }
    let direct = solve(datum, view, t, spec)?;
    let from_s = if s == 0.0 {
        solve(datum, view, t, spec)?
    } else {
        let mid = interpolated_solution(datum, view, s, t - s, spec)?;
        solve(&mid, view, t - s, spec)?
    };
    direct.u.max_abs_diff(&from_s.u)
}

/// Checks that the minimizer y at (t,x) also minimizes w ↦ s·L((z−w)/s) + u₀(w)
/// at z = (s/t)x + (1−s/t)y.
pub fn dynamic_programming_check(
    datum: &dyn InitialDatum,
    view: &LagrangianView,
    s: f64,
    t: f64,
    x: &[f64],
) -> Result<bool> {
    if !(s > 0.0 && s < t) {
        return Err(Error::Precondition(format!("dynamic programming needs 0 < s < t, got s={s}, t={t}")));
    }
    let at_t = HopfLax::new(datum, view, t)?;
    let y = at_t.value_at(x)?.minimizer;
    let z: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| s / t * xi + (1.0 - s / t) * yi).collect();
    let at_s = HopfLax::with_max_speed(datum, view, s, at_t.max_speed())?;
    let w = at_s.value_at(&z)?.minimizer;
    let tol = 1e-6 * (1.0 + t * at_t.max_speed());
    Ok(dist(&w, &y) <= tol)
}

/// εₙ = (1/(M·Λ_M))·max_{|q|≤2^{−n}/t} [M|q| + L(q)].
pub fn epsilon_n(n: u32, t: f64, m: f64, view: &LagrangianView) -> Result<f64> {
    if n == 0 || !(t > 0.0) || !(m > 0.0) {
        return Err(Error::Input(format!("epsilon_n needs n >= 1, t > 0, M > 0 (got n={n}, t={t}, M={m})")));
    }
    let speed = ConvexityModuli::from_view(view.clone()).max_speed(m)?;
    let r = 0.5f64.powi(n as i32) / t;
    let d = view.dim();
    // The integrand is convex, so its max over the ball sits on the sphere.
    let mut best = f64::NEG_INFINITY;
    for dir in sample_directions(d, 64) {
        let q: Vec<f64> = dir.iter().map(|e| r * e).collect();
        best = best.max(m * r + view.value(&q)?);
    }
    Ok(best / (m * speed))
}

/// uₙ and bₙ on a grid.
#[derive(Clone, Debug)]
pub struct LatticeApproximant {
    pub n: u32,
    pub eps_n: f64,
    pub pitch: f64,
    pub max_speed: f64,
    pub u_n: GridFunction,
    pub b_n: VectorField,
}

/// uₙ(t,x) = min over y ∈ Zₙ = (2^{−n+1}/√d)ℤ^d of (1−εₙ)u₀(y) + t·L((x−y)/t).
pub fn lattice_approximant(
    datum: &dyn InitialDatum,
    view: &LagrangianView,
    t: f64,
    n: u32,
    spec: &GridSpec,
) -> Result<LatticeApproximant> {
    check_dim(view.dim(), datum.dim())?;
    check_dim(view.dim(), spec.dim())?;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("time must be positive, got {t}")));
    }
    let m = datum.lipschitz();
    let hl = HopfLax::new(datum, view, t)?;
    let speed = hl.max_speed();
    // A constant datum needs no rescaling.
    let eps = if m == 0.0 { 0.0 } else { epsilon_n(n, t, m, view)? };
    let d = spec.dim();
    let pitch = 2.0 * 0.5f64.powi(n as i32) / (d as f64).sqrt();
    let radius = hl.search_radius().max(pitch * (d as f64).sqrt());

    let rows: Vec<(f64, Vec<f64>)> = (0..spec.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, Vec<f64>)> {
            let x = spec.point(i);
            let lo: Vec<i64> = x.iter().map(|xi| ((xi - radius) / pitch).ceil() as i64).collect();
            let counts: Vec<usize> =
                x.iter().zip(&lo).map(|(xi, l)| (((xi + radius) / pitch).floor() as i64 - l + 1).max(0) as usize).collect();
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut y = vec![0.0; d];
            let mut q = vec![0.0; d];
            let mut err = None;
            crate::grid::for_each_multi(&counts, |k| {
                if err.is_some() {
                    return;
                }
                for a in 0..d {
                    y[a] = (lo[a] + k[a] as i64) as f64 * pitch;
                }
                if dist(&y, &x) > radius {
                    return;
                }
                for a in 0..d {
                    q[a] = (x[a] - y[a]) / t;
                }
                match hl.lagrangian(&q) {
                    Ok(l) => {
                        let v = (1.0 - eps) * datum.value(&y) + t * l;
                        if best.as_ref().is_none_or(|b| v < b.0) {
                            best = Some((v, y.clone()));
                        }
                    }
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            let (v, y) = best.ok_or_else(|| Error::Input(format!("no lattice point within the search ball of {x:?}")))?;
            let b: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| (xi - yi) / t).collect();
            let limit = speed * (1.0 + 1e-6) + pitch * (d as f64).sqrt() / t;
            if norm(&b) > limit {
                return Err(Error::Degenerate(format!("lattice slope {} exceeds Lambda_M = {speed}", norm(&b))));
            }
            Ok((v, b))
        })
        .collect::<Result<_>>()?;

    let mut values = Vec::with_capacity(rows.len());
    let mut data = Vec::with_capacity(rows.len() * d);
    for (v, b) in rows {
        values.push(v);
        data.extend(b);
    }
    Ok(LatticeApproximant {
        n,
        eps_n: eps,
        pitch,
        max_speed: speed,
        u_n: GridFunction { spec: spec.clone(), values },
        b_n: VectorField { spec: spec.clone(), components: d, data },
    })
}

/// Uniform error bound for |uₙ(t,x) − u(t,x)| at |x| ≤ `x_norm`:
/// (M + sup_{|q|≤Λ_M+2^{−n}/t}|DL|)·2^{−n} + (|u₀(0)| + M|x| + M·Λ_M·t)·εₙ.
pub fn lattice_error_bound(datum: &dyn InitialDatum, view: &LagrangianView, t: f64, n: u32, x_norm: f64) -> Result<f64> {
    let m = datum.lipschitz();
    let moduli = ConvexityModuli::from_view(view.clone());
    let speed = moduli.max_speed(m)?;
    let step = 0.5f64.powi(n as i32);
    let sup_dl = moduli.max_conjugate_grad(speed + step / t)?;
    let eps = epsilon_n(n, t, m, view)?;
    let u0 = datum.value(&vec![0.0; datum.dim()]).abs();
    Ok((m + sup_dl) * step + (u0 + m * x_norm + m * speed * t) * eps)
}
