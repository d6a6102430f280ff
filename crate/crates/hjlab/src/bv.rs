//! Discrete total variation, divergence, second-difference constants and the
//! BV bound verdict for slope fields.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::grid::{for_each_multi, require_domain, Domain, GridFunction, GridSpec, VectorField};
use crate::hamiltonian::{ConvexityModuli, DEGENERACY_FLOOR};
use crate::hopflax::SolveResult;

const PARALLEL_CHUNK: usize = 4096;

/// Discrete |Df|(Ω) with its per-axis parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TVReport {
    pub domain: Domain,
    pub tv_estimate: f64,
    pub components: Vec<f64>,
    pub spacing: Vec<f64>,
}

/// Sums `f(i)` over `0..n` in fixed-size chunks so the result does not depend on scheduling.
fn stable_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = n.div_ceil(PARALLEL_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * PARALLEL_CHUNK).min(n);
            (c * PARALLEL_CHUNK..end).map(&f).sum()
        })
        .collect();
    partial.iter().sum()
}

/// Anisotropic TV: Σ over grid edges in Ω̄ of the Euclidean norm of the increment
/// times the dual face area. Nodes on a box face perpendicular to the edge carry half weight.
pub fn total_variation(field: &VectorField, domain: &Domain) -> Result<TVReport> {
    let spec = &field.spec;
    require_domain(domain, spec)?;
    let d = spec.dim();
    let c = field.components;
    let tol = 1e-9 * spec.max_spacing();
    let h = spec.spacings();
    let mut components = vec![0.0; d];
    for (a, comp) in components.iter_mut().enumerate() {
        let stride = spec.stride(a);
        let face: f64 = h.iter().enumerate().filter(|(j, _)| *j != a).map(|(_, v)| v).product();
        *comp = stable_sum(spec.len(), |i| {
            let multi = spec.multi(i);
            if multi[a] + 1 >= spec.n[a] {
                return 0.0;
            }
            let x = spec.point(i);
            let mut x2 = x.clone();
            x2[a] = spec.coord(a, multi[a] + 1);
            if !domain.contains(&x, tol) || !domain.contains(&x2, tol) {
                return 0.0;
            }
            let (p, q) = (&field.data[i * c..(i + 1) * c], &field.data[(i + stride) * c..(i + stride + 1) * c]);
            let jump = p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            jump * face * domain.face_weight(&x, Some(a), tol)
        });
    }
    Ok(TVReport {
        domain: domain.clone(),
        tv_estimate: components.iter().sum(),
        components,
        spacing: h,
    })
}

/// Cells of the grid whose midpoint lies in Ω̄, as (first-corner index, midpoint).
pub(crate) fn cells_in(spec: &GridSpec, domain: &Domain) -> Vec<(usize, Vec<f64>)> {
    let d = spec.dim();
    let tol = 1e-9 * spec.max_spacing();
    let counts: Vec<usize> = spec.n.iter().map(|n| n - 1).collect();
    let mut out = Vec::new();
    for_each_multi(&counts, |k| {
        let mid: Vec<f64> = (0..d).map(|a| 0.5 * (spec.coord(a, k[a]) + spec.coord(a, k[a] + 1))).collect();
        if domain.contains(&mid, tol) {
            out.push((spec.flat(k), mid));
        }
    });
    out
}

pub(crate) fn cell_volume(spec: &GridSpec) -> f64 {
    spec.spacings().iter().product()
}

/// Offsets of the 2^d corners of a cell relative to its first corner.
pub(crate) fn corner_offsets(spec: &GridSpec) -> Vec<(usize, Vec<bool>)> {
    let d = spec.dim();
    (0..1usize << d)
        .map(|mask| {
            let bits: Vec<bool> = (0..d).map(|a| mask >> a & 1 == 1).collect();
            let off = (0..d).filter(|&a| bits[a]).map(|a| spec.stride(a)).sum();
            (off, bits)
        })
        .collect()
}

/// Average of a scalar over the cell corners.
pub(crate) fn cell_mean(values: &[f64], base: usize, corners: &[(usize, Vec<bool>)]) -> f64 {
    corners.iter().map(|(o, _)| values[base + o]).sum::<f64>() / corners.len() as f64
}

/// Cell gradient: per axis, the mean of the 2^{d−1} edge differences.
pub(crate) fn cell_gradient(spec: &GridSpec, values: &[f64], base: usize, corners: &[(usize, Vec<bool>)], out: &mut [f64]) {
    let d = spec.dim();
    let half = (corners.len() / 2) as f64;
    for (a, g) in out.iter_mut().enumerate().take(d) {
        let s = spec.stride(a);
        let sum: f64 = corners.iter().filter(|(_, b)| !b[a]).map(|(o, _)| values[base + o + s] - values[base + o]).sum();
        *g = sum / (half * spec.spacing(a));
    }
}

/// |div f − d/t|(Ω) with cell divergences from averaged edge differences.
pub fn divergence_measure(field: &VectorField, domain: &Domain, t: f64) -> Result<f64> {
    let spec = &field.spec;
    require_domain(domain, spec)?;
    check_dim(spec.dim(), field.components)?;
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("divergence measure needs t > 0, got {t}")));
    }
    let d = spec.dim();
    let corners = corner_offsets(spec);
    let cells = cells_in(spec, domain);
    let vol = cell_volume(spec);
    let half = (corners.len() / 2) as f64;
    let total = stable_sum(cells.len(), |ci| {
        let base = cells[ci].0;
        let mut div = 0.0;
        for a in 0..d {
            let s = spec.stride(a);
            let sum: f64 = corners
                .iter()
                .filter(|(_, b)| !b[a])
                .map(|(o, _)| field.data[(base + o + s) * d + a] - field.data[(base + o) * d + a])
                .sum();
            div += sum / (half * spec.spacing(a));
        }
        (div - d as f64 / t).abs() * vol
    });
    Ok(total)
}

/// Whether an inequality verdict applies to the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Holds,
    Fails,
    NotApplicable,
}

impl VerdictStatus {
    pub fn label(&self) -> &'static str {
        match self {
            VerdictStatus::Holds => "holds",
            VerdictStatus::Fails => "fails",
            VerdictStatus::NotApplicable => "not_applicable",
        }
    }
}

/// |Db(t,·)|(Ω) against (1/γ_M)(Λ_M + diam Ω/t)·H^{d−1}(∂Ω) + (√d/t)|Ω|.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BVBoundVerdict {
    pub lhs: f64,
    /// NaN when the bound does not apply.
    pub rhs: f64,
    pub gamma_m: f64,
    pub lambda_m: f64,
    pub hessian_ratio: f64,
    pub diameter: f64,
    pub perimeter: f64,
    pub volume: f64,
    pub t: f64,
    pub m: f64,
    pub slack: f64,
    pub status: VerdictStatus,
    /// lhs ≤ rhs with no slack.
    pub holds_strict: bool,
}

impl BVBoundVerdict {
    pub fn holds(&self) -> bool {
        self.status == VerdictStatus::Holds
    }
}

/// Right-hand side of the BV bound from its constants.
pub fn bv_bound_rhs(gamma_m: f64, lambda_m: f64, domain: &Domain, t: f64) -> f64 {
    let d = domain.dim() as f64;
    (lambda_m + domain.diameter() / t) * domain.perimeter() / gamma_m + d.sqrt() / t * domain.volume()
}

/// Inequality slack 1 + 10·h/h_ref.
pub fn slack_factor(h: f64, h_ref: f64) -> f64 {
    1.0 + 10.0 * h / h_ref
}

/// Measures |Db(t,·)|(Ω) for a solve result and compares it with the BV bound.
///
/// Models whose Hessian eigenvalue ratio or sampled γ_M fall below the degeneracy
/// floor get a not-applicable verdict. `h_ref` is the coarsest spacing of the study.
pub fn bv_bound_check(
    result: &SolveResult,
    moduli: &ConvexityModuli,
    m: f64,
    domain: &Domain,
    h_ref: f64,
) -> Result<BVBoundVerdict> {
    let lhs = total_variation(&result.b, domain)?.tv_estimate;
    let slack = slack_factor(result.u.spec.max_spacing(), h_ref);
    let mut verdict = BVBoundVerdict {
        lhs,
        rhs: f64::NAN,
        gamma_m: f64::NAN,
        lambda_m: f64::NAN,
        hessian_ratio: f64::NAN,
        diameter: domain.diameter(),
        perimeter: domain.perimeter(),
        volume: domain.volume(),
        t: result.t,
        m,
        slack,
        status: VerdictStatus::NotApplicable,
        holds_strict: false,
    };
    if !(m > 0.0) {
        return Err(Error::Input(format!("BV bound needs M > 0, got {m}")));
    }
    verdict.lambda_m = moduli.max_speed(m)?;
    let radius = moduli.gamma_radius(m)?;
    verdict.hessian_ratio = moduli.hessian_ratio(radius);
    if verdict.hessian_ratio < DEGENERACY_FLOOR {
        return Ok(verdict);
    }
    let gamma = match moduli.lambda_r(radius) {
        Ok(g) => g,
        Err(Error::Degenerate(_)) => return Ok(verdict),
        Err(e) => return Err(e),
    };
    verdict.gamma_m = gamma;
    if gamma < DEGENERACY_FLOOR {
        return Ok(verdict);
    }
    verdict.rhs = bv_bound_rhs(gamma, verdict.lambda_m, domain, result.t);
    verdict.holds_strict = lhs <= verdict.rhs;
    verdict.status = if lhs <= verdict.rhs * slack { VerdictStatus::Holds } else { VerdictStatus::Fails };
    Ok(verdict)
}

/// Largest (u(x+h)+u(x−h)−2u(x))/|h|² over nodes in Ω̄ and axis steps of one and two cells.
pub fn semiconcavity_constant(u: &GridFunction, domain: &Domain) -> Result<f64> {
    let spec = &u.spec;
    require_domain(domain, spec)?;
    let tol = 1e-9 * spec.max_spacing();
    let mut best = f64::NEG_INFINITY;
    for i in 0..spec.len() {
        let multi = spec.multi(i);
        let x = spec.point(i);
        if !domain.contains(&x, tol) {
            continue;
        }
        for a in 0..spec.dim() {
            for k in 1..=2usize {
                if multi[a] < k || multi[a] + k >= spec.n[a] {
                    continue;
                }
                let (mut lo, mut hi) = (x.clone(), x.clone());
                lo[a] = spec.coord(a, multi[a] - k);
                hi[a] = spec.coord(a, multi[a] + k);
                if !domain.contains(&lo, tol) || !domain.contains(&hi, tol) {
                    continue;
                }
                let s = k * spec.stride(a);
                let step = k as f64 * spec.spacing(a);
                let q = (u.values[i + s] + u.values[i - s] - 2.0 * u.values[i]) / (step * step);
                best = best.max(q);
            }
        }
    }
    if best.is_infinite() {
        return Err(Error::Input("domain holds no centered second difference".into()));
    }
    Ok(best)
}

/// Smallest second-difference quotient: semiconcavity of −u, negated.
pub fn semiconvexity_constant(u: &GridFunction, domain: &Domain) -> Result<f64> {
    Ok(-semiconcavity_constant(&u.negated(), domain)?)
}

/// ∫_Ω|u − u_Ω| against (diam Ω/2)·|Du|(Ω).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Poincaré inequality with cell-midpoint quadrature and the Euclidean cell gradient.
pub fn poincare_check(u: &GridFunction, domain: &Domain) -> Result<PoincareCheck> {
    let spec = &u.spec;
    require_domain(domain, spec)?;
    let corners = corner_offsets(spec);
    let cells = cells_in(spec, domain);
    if cells.is_empty() {
        return Err(Error::Input("domain contains no grid cell".into()));
    }
    let vol = cell_volume(spec);
    let d = spec.dim();
    let means: Vec<f64> = cells.iter().map(|(b, _)| cell_mean(&u.values, *b, &corners)).collect();
    let avg = means.iter().sum::<f64>() / means.len() as f64;
    let lhs = means.iter().map(|v| (v - avg).abs() * vol).sum::<f64>();
    let mut g = vec![0.0; d];
    let mut tv = 0.0;
    for (b, _) in &cells {
        cell_gradient(spec, &u.values, *b, &corners, &mut g);
        tv += g.iter().map(|v| v * v).sum::<f64>().sqrt() * vol;
    }
    let rhs = 0.5 * domain.diameter() * tv;
    let scale = 1e-12 * (1.0 + rhs.abs());
    Ok(PoincareCheck { lhs, rhs, holds: lhs <= rhs + scale })
}

fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a.same_layout(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch("inputs live on different grids".into()))
    }
}

/// ∫_Ω|u₁ − u₂| by cell-midpoint quadrature.
pub fn l1_scalar_distance(u1: &GridFunction, u2: &GridFunction, domain: &Domain) -> Result<f64> {
    same_grid(&u1.spec, &u2.spec)?;
    require_domain(domain, &u1.spec)?;
    let corners = corner_offsets(&u1.spec);
    let vol = cell_volume(&u1.spec);
    Ok(cells_in(&u1.spec, domain)
        .iter()
        .map(|(b, _)| (cell_mean(&u1.values, *b, &corners) - cell_mean(&u2.values, *b, &corners)).abs() * vol)
        .sum())
}

/// ∫_Ω|Du₁ − Du₂| with cell gradients.
pub fn grad_l1_distance(u1: &GridFunction, u2: &GridFunction, domain: &Domain) -> Result<f64> {
    same_grid(&u1.spec, &u2.spec)?;
    require_domain(domain, &u1.spec)?;
    let spec = &u1.spec;
    let d = spec.dim();
    let corners = corner_offsets(spec);
    let vol = cell_volume(spec);
    let diff: Vec<f64> = u1.values.iter().zip(&u2.values).map(|(a, b)| a - b).collect();
    let mut g = vec![0.0; d];
    let mut total = 0.0;
    for (b, _) in cells_in(spec, domain) {
        cell_gradient(spec, &diff, b, &corners, &mut g);
        total += g.iter().map(|v| v * v).sum::<f64>().sqrt() * vol;
    }
    Ok(total)
}

/// W^{1,1} distance ∫|u₁−u₂| + ∫|Du₁−Du₂|.
pub fn w11_distance(u1: &GridFunction, u2: &GridFunction, domain: &Domain) -> Result<f64> {
    Ok(l1_scalar_distance(u1, u2, domain)? + grad_l1_distance(u1, u2, domain)?)
}

/// ∫_Ω|f₁ − f₂| for vector fields, Euclidean norm of the cell-averaged difference.
pub fn l1_distance(f1: &VectorField, f2: &VectorField, domain: &Domain) -> Result<f64> {
    same_grid(&f1.spec, &f2.spec)?;
    if f1.components != f2.components {
        return Err(Error::GridMismatch("fields have different component counts".into()));
    }
    require_domain(domain, &f1.spec)?;
    let c = f1.components;
    let corners = corner_offsets(&f1.spec);
    let vol = cell_volume(&f1.spec);
    let mut total = 0.0;
    let mut avg = vec![0.0; c];
    for (b, _) in cells_in(&f1.spec, domain) {
        avg.iter_mut().for_each(|v| *v = 0.0);
        for (o, _) in &corners {
            for k in 0..c {
                avg[k] += f1.data[(b + o) * c + k] - f2.data[(b + o) * c + k];
            }
        }
        total += avg.iter().map(|v| v * v).sum::<f64>().sqrt() / corners.len() as f64 * vol;
    }
    Ok(total)
}

/// ‖Du₁−Du₂‖_{L¹(□_R)} against (2^dR^d+1)·Ψ_M^{-1}(‖b₁−b₂‖_{L¹(□_R)}) with bᵢ = DH(Duᵢ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradientStabilityCheck {
    pub lhs: f64,
    pub slope_distance: f64,
    /// NaN when Ψ_M cannot be inverted at the slope distance.
    pub rhs: f64,
    pub status: VerdictStatus,
}

/// Gradient stability of two solutions on the cube □_R, all integrals with cell quadrature.
pub fn gradient_stability_check(
    u1: &SolveResult,
    u2: &SolveResult,
    moduli: &ConvexityModuli,
    m: f64,
    r: f64,
    slack: f64,
) -> Result<GradientStabilityCheck> {
    let spec = &u1.u.spec;
    same_grid(spec, &u2.u.spec)?;
    let d = spec.dim();
    let cube = Domain::cube(d, -r, r);
    require_domain(&cube, spec)?;
    let corners = corner_offsets(spec);
    let vol = cell_volume(spec);
    let diff: Vec<f64> = u1.u.values.iter().zip(&u2.u.values).map(|(a, b)| a - b).collect();
    let mut g1 = vec![0.0; d];
    let mut g2 = vec![0.0; d];
    let mut gd = vec![0.0; d];
    let mut b1 = vec![0.0; d];
    let mut b2 = vec![0.0; d];
    let (mut lhs, mut slope) = (0.0, 0.0);
    for (b, _) in cells_in(spec, &cube) {
        cell_gradient(spec, &diff, b, &corners, &mut gd);
        cell_gradient(spec, &u1.u.values, b, &corners, &mut g1);
        cell_gradient(spec, &u2.u.values, b, &corners, &mut g2);
        moduli.model().grad_into(&g1, &mut b1);
        moduli.model().grad_into(&g2, &mut b2);
        lhs += gd.iter().map(|v| v * v).sum::<f64>().sqrt() * vol;
        slope += b1.iter().zip(&b2).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() * vol;
    }
    let factor = (2.0 * r).powi(d as i32) + 1.0;
    let top = moduli.psi(m, m)?;
    // Past Ψ_M(M) the modulus continues linearly, which keeps Ψ(s)/s nondecreasing.
    let inverse = if slope == 0.0 {
        Ok(0.0)
    } else if slope > top && top > 0.0 {
        Ok(slope * m / top)
    } else {
        moduli.psi_inverse(m, slope)
    };
    match inverse {
        Ok(beta) => {
            let rhs = factor * beta;
            let status = if lhs <= rhs * slack + 1e-12 { VerdictStatus::Holds } else { VerdictStatus::Fails };
            Ok(GradientStabilityCheck { lhs, slope_distance: slope, rhs, status })
        }
        Err(Error::Range { .. }) => {
            Ok(GradientStabilityCheck { lhs, slope_distance: slope, rhs: f64::NAN, status: VerdictStatus::NotApplicable })
        }
        Err(e) => Err(e),
    }
}
