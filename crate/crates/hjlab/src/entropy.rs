//! Empirical ε-entropy of sampled function classes and the explicit two-sided
//! entropy bounds for solution sets.
//!
//! Covering counts use closed ε-balls centered at sample members. Packing counts
//! are sizes of greedy maximal sets with pairwise distance > ε. With these
//! conventions P_{2ε} ≤ N_ε ≤ P_ε holds for every sample.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv::{cell_gradient, cell_mean, cell_volume, cells_in, corner_offsets, semiconcavity_constant};
use crate::datum::{InitialDatum, MinMaxAffine, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::grid::{require_domain, unit_ball_volume, Domain, GridFunction, GridSpec};
use crate::hamiltonian::{ConvexityModuli, LagrangianView, DEGENERACY_FLOOR};
use crate::hopflax::solve;

/// Largest sample for which a distance matrix is built.
pub const MAX_SAMPLE: usize = 4096;

/// Relative tolerance on distance thresholds.
const THRESHOLD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// ∫|u − v|
    L1,
    /// ∫|Du − Dv|
    GradL1,
    /// ∫|u − v| + ∫|Du − Dv|
    W11,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassTag {
    SolutionSet,
    BvClass,
    Semiconcave,
    Other,
}

/// Members of a function class sampled on one grid, measured over `domain`.
#[derive(Clone, Debug)]
pub struct FunctionClassSample {
    pub members: Vec<GridFunction>,
    pub domain: Domain,
    pub tag: ClassTag,
    pub seed: u64,
}

impl FunctionClassSample {
    pub fn new(members: Vec<GridFunction>, domain: Domain, tag: ClassTag, seed: u64) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Input("function class sample is empty".into()))?;
        if members.len() > MAX_SAMPLE {
            return Err(Error::Input(format!("sample of {} members exceeds the cap {MAX_SAMPLE}", members.len())));
        }
        if members.iter().any(|m| !m.spec.same_layout(&first.spec)) {
            return Err(Error::GridMismatch("sample members live on different grids".into()));
        }
        require_domain(&domain, &first.spec)?;
        Ok(Self { members, domain, tag, seed })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Symmetric matrix of pairwise distances, rows filled in parallel.
    pub fn distances(&self, metric: Metric) -> DistanceMatrix {
        let spec = &self.members[0].spec;
        let d = spec.dim();
        let corners = corner_offsets(spec);
        let cells = cells_in(spec, &self.domain);
        let vol = cell_volume(spec);
        let features: Vec<(Vec<f64>, Vec<f64>)> = self
            .members
            .par_iter()
            .map(|u| {
                let means = if metric == Metric::GradL1 {
                    Vec::new()
                } else {
                    cells.iter().map(|(b, _)| cell_mean(&u.values, *b, &corners)).collect()
                };
                let mut grads = Vec::new();
                if metric != Metric::L1 {
                    grads = vec![0.0; cells.len() * d];
                    for (k, (b, _)) in cells.iter().enumerate() {
                        cell_gradient(spec, &u.values, *b, &corners, &mut grads[k * d..(k + 1) * d]);
                    }
                }
                (means, grads)
            })
            .collect();
        let n = self.members.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            return 0.0;
                        }
                        let (a, b) = (&features[i], &features[j]);
                        let l1: f64 = a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()).sum();
                        let grad: f64 = a
                            .1
                            .chunks(d.max(1))
                            .zip(b.1.chunks(d.max(1)))
                            .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                            .sum();
                        (l1 + grad) * vol
                    })
                    .collect()
            })
            .collect();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            data.extend(r);
        }
        // Enforce exact symmetry.
        for i in 0..n {
            for j in 0..i {
                let v = data[i * n + j].max(data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        DistanceMatrix { n, data }
    }
}

/// Pairwise distances of a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                best = best.min(self.get(i, j));
            }
        }
        best
    }

    fn within(&self, i: usize, j: usize, eps: f64) -> bool {
        self.get(i, j) <= eps * (1.0 + THRESHOLD_TOL)
    }

    /// Greedy maximal set with pairwise distance > ε, scanned in index order.
    pub fn packing_set(&self, eps: f64) -> Vec<usize> {
        let mut chosen: Vec<usize> = Vec::new();
        for i in 0..self.n {
            if chosen.iter().all(|&c| !self.within(i, c, eps)) {
                chosen.push(i);
            }
        }
        chosen
    }

    pub fn packing_count(&self, eps: f64) -> usize {
        self.packing_set(eps).len()
    }

    /// Greedy max-coverage cover by closed ε-balls centered at uncovered members,
    /// ties to the lowest index.
    pub fn greedy_cover(&self, eps: f64) -> Vec<usize> {
        let neighbors: Vec<Vec<usize>> =
            (0..self.n).map(|i| (0..self.n).filter(|&j| self.within(i, j, eps)).collect()).collect();
        let mut gain: Vec<usize> = neighbors.iter().map(Vec::len).collect();
        let mut covered = vec![false; self.n];
        let mut remaining = self.n;
        let mut centers = Vec::new();
        while remaining > 0 {
            let mut best: Option<usize> = None;
            for i in (0..self.n).filter(|&i| !covered[i]) {
                if best.is_none_or(|b| gain[i] > gain[b]) {
                    best = Some(i);
                }
            }
            let c = best.expect("an uncovered member remains");
            for &j in &neighbors[c] {
                if !covered[j] {
                    covered[j] = true;
                    remaining -= 1;
                    for &k in &neighbors[j] {
                        gain[k] -= 1;
                    }
                }
            }
            centers.push(c);
        }
        centers
    }

    /// Smaller of the greedy max-coverage cover and the index-order ε-net.
    pub fn covering_count(&self, eps: f64) -> usize {
        self.greedy_cover(eps).len().min(self.packing_count(eps))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("epsilon must be positive, got {eps}")))
    }
}

/// Upper estimate of N_ε for the sampled set.
pub fn covering_count(sample: &FunctionClassSample, eps: f64, metric: Metric) -> Result<usize> {
    check_eps(eps)?;
    Ok(sample.distances(metric).covering_count(eps))
}

/// Size of a greedy maximal ε-separated subset.
pub fn packing_count(sample: &FunctionClassSample, eps: f64, metric: Metric) -> Result<usize> {
    check_eps(eps)?;
    Ok(sample.distances(metric).packing_count(eps))
}

/// Admissible ε bound for the semiconcave packing family: min(r,K)·ω_d R^d/((d+1)2^{d+8}).
pub fn packing_family_max_eps(d: usize, r: f64, k: f64, big_r: f64) -> f64 {
    r.min(k) * unit_ball_volume(d) * big_r.powi(d as i32) / ((d + 1) as f64 * 2f64.powi(d as i32 + 8))
}

/// ∫|∇b| for one radial bump of curvature K and support radius ρ.
pub fn bump_gradient_mass(d: usize, k: f64, rho: f64) -> Result<f64> {
    match d {
        1 => Ok(k * rho * rho / 2.0),
        2 => Ok(std::f64::consts::PI * k * rho.powi(3) / 4.0),
        _ => Err(Error::Input(format!("packing family is implemented for d = 1, 2, got {d}"))),
    }
}

/// C¹ radial bump: Kρ²/4 − Kr²/2 inside ρ/2, K(ρ−r)²/2 out to ρ, zero beyond.
pub fn radial_bump(k: f64, rho: f64, r: f64) -> f64 {
    if r <= 0.5 * rho {
        k * rho * rho / 4.0 - k * r * r / 2.0
    } else if r <= rho {
        k * (rho - r) * (rho - r) / 2.0
    } else {
        0.0
    }
}

/// A 2ε-separated family in ‖D·‖_{L¹(□_R)} of r-Lipschitz, K-semiconcave functions.
#[derive(Clone, Debug)]
pub struct PackingFamily {
    pub sample: FunctionClassSample,
    pub cells_per_axis: usize,
    pub bump_radius: f64,
    pub bump_mass: f64,
    pub min_hamming: usize,
    pub codewords: Vec<Vec<bool>>,
}

/// Sums of bumps on N^d cells of □_R selected by a binary code with pairwise
/// Hamming distance ≥ N^d/4, so codewords differ in gradient mass by ≥ 2ε with margin.
pub fn semiconcave_packing_family(
    d: usize,
    r: f64,
    k: f64,
    big_r: f64,
    eps: f64,
    budget: usize,
    seed: u64,
) -> Result<PackingFamily> {
    check_eps(eps)?;
    if !(r > 0.0 && k > 0.0 && big_r > 0.0) {
        return Err(Error::Input("packing family needs r, K, R > 0".into()));
    }
    let eps_max = packing_family_max_eps(d, r, k, big_r);
    if eps > eps_max {
        return Err(Error::Input(format!("epsilon {eps} exceeds the admissible {eps_max}")));
    }
    // Separation (N^d/4)·m₁(R/N) = c·R^{d+1}/(4N) ≥ 2.2ε.
    let unit_mass = bump_gradient_mass(d, k, 1.0)?;
    let max_cells = (unit_mass * big_r.powi(d as i32 + 1) / (8.8 * eps)).floor() as usize;
    let lip_cells = (k * big_r / (2.0 * r)).ceil() as usize;
    let budget = budget.clamp(1, MAX_SAMPLE);
    // Fewer cells only widen the separation; stop once the code has room for the budget.
    let wanted_bits = 6.0 * (budget as f64).log2() + 16.0;
    let bit_cells = wanted_bits.powf(1.0 / d as f64).ceil() as usize;
    let cells = max_cells.min(bit_cells.max(lip_cells));
    if cells == 0 || cells < lip_cells {
        return Err(Error::Input(format!("no cell count meets both separation and Lipschitz constraints at epsilon {eps}")));
    }
    let rho = big_r / cells as f64;
    let mass = bump_gradient_mass(d, k, rho)?;
    let bits = cells.pow(d as u32);
    let min_hamming = bits.div_ceil(4);

    let codewords = greedy_code(bits, min_hamming, budget, seed);
    let per_cell = if d == 1 { 16 } else { 8 };
    let spec = GridSpec::cube(d, -big_r, big_r, cells * per_cell + 1)?;
    let pitch = 2.0 * big_r / cells as f64;
    let members: Vec<GridFunction> = codewords
        .par_iter()
        .map(|word| {
            GridFunction::from_fn(&spec, |x| {
                let mut cell = 0usize;
                let mut r2 = 0.0;
                for xi in x {
                    let j = (((xi + big_r) / pitch).floor() as usize).min(cells - 1);
                    cell = cell * cells + j;
                    let center = -big_r + (j as f64 + 0.5) * pitch;
                    r2 += (xi - center) * (xi - center);
                }
                if word[cell] {
                    radial_bump(k, rho, r2.sqrt())
                } else {
                    0.0
                }
            })
        })
        .collect();
    let sample = FunctionClassSample::new(members, Domain::cube(d, -big_r, big_r), ClassTag::Semiconcave, seed)?;
    Ok(PackingFamily { sample, cells_per_axis: cells, bump_radius: rho, bump_mass: mass, min_hamming, codewords })
}

/// Greedy code from seeded random words: the zero word first, then every draw at
/// Hamming distance ≥ `min_distance` from all accepted words, until `size` words or
/// 50 000 draws.
pub fn greedy_code(bits: usize, min_distance: usize, size: usize, seed: u64) -> Vec<Vec<bool>> {
    let limbs = bits.div_ceil(64);
    let tail = if bits.is_multiple_of(64) { u64::MAX } else { (1u64 << (bits % 64)) - 1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<Vec<u64>> = vec![vec![0; limbs]];
    let mut draws = 0;
    while words.len() < size && draws < 50_000 {
        draws += 1;
        let mut w: Vec<u64> = (0..limbs).map(|_| rng.gen::<u64>()).collect();
        if let Some(last) = w.last_mut() {
            *last &= tail;
        }
        let far = words
            .iter()
            .all(|c| c.iter().zip(&w).map(|(a, b)| (a ^ b).count_ones() as usize).sum::<usize>() >= min_distance);
        if far {
            words.push(w);
        }
    }
    words.into_iter().map(|w| (0..bits).map(|i| w[i / 64] >> (i % 64) & 1 == 1).collect()).collect()
}

/// Result of the separation and class-membership audits of a packing family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PackingAudit {
    pub members: usize,
    pub min_separation: f64,
    pub max_lipschitz: f64,
    pub max_semiconcavity: f64,
    pub separated: bool,
    pub in_class: bool,
}

/// Full pairwise separation audit in ‖D·‖_{L¹} plus Lipschitz and semiconcavity checks.
pub fn audit_packing_family(family: &PackingFamily, eps: f64, r: f64, k: f64) -> Result<PackingAudit> {
    let dist = family.sample.distances(Metric::GradL1);
    let min_separation = dist.min_separation();
    let mut max_lip = 0.0f64;
    let mut max_sc = f64::NEG_INFINITY;
    for m in &family.sample.members {
        max_lip = max_lip.max(m.lipschitz_estimate());
        max_sc = max_sc.max(semiconcavity_constant(m, &family.sample.domain)?);
    }
    Ok(PackingAudit {
        members: family.sample.len(),
        min_separation,
        max_lipschitz: max_lip,
        max_semiconcavity: max_sc,
        separated: family.sample.len() < 2 || min_separation >= 2.0 * eps,
        in_class: max_lip <= r * (1.0 + 1e-9) && max_sc <= k * (1.0 + 1e-9),
    })
}

/// Random members of {f : ‖f‖_∞ ≤ M, |Df|(□_R) ≤ V}: staircases along a random axis.
pub fn bv_class_sample(
    d: usize,
    big_r: f64,
    m: f64,
    v: f64,
    count: usize,
    points_per_axis: usize,
    seed: u64,
) -> Result<FunctionClassSample> {
    if count == 0 {
        return Err(Error::Input("sample size must be positive".into()));
    }
    let spec = GridSpec::cube(d, -big_r, big_r, points_per_axis)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A jump of height J across a hyperplane costs J·(2R)^{d−1}.
    let face = (2.0 * big_r).powi(d as i32 - 1);
    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let axis = rng.gen_range(0..d);
        let jumps = rng.gen_range(0..=6usize);
        let budget = v / face * rng.gen::<f64>();
        let mut weights: Vec<f64> = (0..jumps).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum::<f64>().max(1e-300);
        weights.iter_mut().for_each(|w| *w *= budget / total);
        let mut steps: Vec<(f64, f64)> = weights
            .iter()
            .map(|w| (rng.gen_range(-big_r..big_r), if rng.gen::<bool>() { *w } else { -*w }))
            .collect();
        steps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let base = if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        // Clamping into [−M, M] never increases the variation.
        let profile = move |s: f64| {
            let mut value = base;
            for (pos, jump) in &steps {
                if s >= *pos {
                    value = (value + jump).clamp(-m, m);
                }
            }
            value
        };
        members.push(GridFunction::from_fn(&spec, |x| profile(x[axis])));
    }
    FunctionClassSample::new(members, Domain::cube(d, -big_r, big_r), ClassTag::BvClass, seed)
}

/// Constructive cover of a BV-class sample by piecewise-constant quantization.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BvCoverReport {
    pub count: usize,
    pub cell_size: f64,
    pub quantum: f64,
    /// log₂ of the entropy ceiling 48√d·(6d√d RV/ε)^d, i.e. the ceiling of log₂ count.
    pub log2_ceiling: f64,
    pub within_ceiling: bool,
}

/// Hypothesis ε < min{6RV²/(3V+2M), 2V(RV/M)^{1/d}} of the BV-class entropy estimate.
pub fn bv_cover_max_eps(d: usize, big_r: f64, m: f64, v: f64) -> f64 {
    let a = 6.0 * big_r * v * v / (3.0 * v + 2.0 * m);
    let b = if m > 0.0 { 2.0 * v * (big_r * v / m).powf(1.0 / d as f64) } else { f64::INFINITY };
    a.min(b)
}

/// Quantizes every member to cell averages over cells of side ε/(√d V) rounded to
/// bins of width ε/(2R)^d, and counts the distinct codes.
///
/// Each code class lies in the L¹ ball of radius ε around its piecewise-constant
/// representative, so the count is the size of an ε-cover of the sample.
/// The constants class V = 0 is exempt from the hypothesis.
pub fn bv_class_cover(sample: &FunctionClassSample, big_r: f64, m: f64, v: f64, eps: f64) -> Result<BvCoverReport> {
    check_eps(eps)?;
    let spec = &sample.members[0].spec;
    let d = spec.dim();
    if v > 0.0 && eps >= bv_cover_max_eps(d, big_r, m, v) {
        return Err(Error::Input(format!("epsilon {eps} violates the BV-class hypothesis")));
    }
    let box_volume = (2.0 * big_r).powi(d as i32);
    let cell_size = if v > 0.0 { (eps / ((d as f64).sqrt() * v)).min(2.0 * big_r) } else { 2.0 * big_r };
    let per_axis = ((2.0 * big_r / cell_size).ceil() as usize).max(1);
    let quantum = eps / box_volume;
    let bins = ((2.0 * m / quantum).ceil() as i64).max(1);
    let corners = corner_offsets(spec);
    let cells = cells_in(spec, &sample.domain);
    let block = 2.0 * big_r / per_axis as f64;
    let block_of: Vec<usize> = cells
        .iter()
        .map(|(_, mid)| {
            mid.iter()
                .fold(0usize, |acc, x| acc * per_axis + (((x + big_r) / block).floor() as usize).min(per_axis - 1))
        })
        .collect();
    let blocks = per_axis.pow(d as u32);
    let mut codes: Vec<Vec<i64>> = sample
        .members
        .iter()
        .map(|u| {
            let mut sums = vec![0.0; blocks];
            let mut counts = vec![0usize; blocks];
            for (k, (b, _)) in cells.iter().enumerate() {
                sums[block_of[k]] += cell_mean(&u.values, *b, &corners);
                counts[block_of[k]] += 1;
            }
            sums.iter()
                .zip(&counts)
                .map(|(s, c)| {
                    let avg = if *c > 0 { s / *c as f64 } else { 0.0 };
                    (((avg + m) / quantum).floor() as i64).clamp(0, bins - 1)
                })
                .collect()
        })
        .collect();
    codes.sort();
    codes.dedup();
    let log2_ceiling = 48.0 * (d as f64).sqrt() * (6.0 * d as f64 * (d as f64).sqrt() * big_r * v / eps).powi(d as i32);
    let count = codes.len();
    Ok(BvCoverReport {
        count,
        cell_size,
        quantum,
        log2_ceiling,
        within_ceiling: (count as f64).log2() <= log2_ceiling || count == 1,
    })
}

/// Solutions u(T,·) on □_R for random Lipschitz-M data with |u₀(0)| ≤ m.
///
/// Data are piecewise linear in one dimension and min-max affine otherwise.
pub fn solution_set_sample(
    view: &LagrangianView,
    t: f64,
    big_r: f64,
    m: f64,
    lip: f64,
    count: usize,
    points_per_axis: usize,
    seed: u64,
) -> Result<FunctionClassSample> {
    if count == 0 {
        return Err(Error::Input("sample size must be positive".into()));
    }
    let d = view.dim();
    let spec = GridSpec::cube(d, -big_r, big_r, points_per_axis)?;
    let mut members = Vec::with_capacity(count);
    for i in 0..count as u64 {
        let s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i);
        let datum: Box<dyn InitialDatum> = if d == 1 {
            Box::new(PiecewiseLinear::random(s, 8, big_r + t * 8.0 * lip.max(1.0), m, lip))
        } else {
            Box::new(MinMaxAffine::random(s, d, 3, 3, m, lip))
        };
        members.push(solve(datum.as_ref(), view, t, &spec)?.u);
    }
    FunctionClassSample::new(members, Domain::cube(d, -big_r, big_r), ClassTag::SolutionSet, seed)
}

/// Constants of the two-sided entropy estimate for S_T^R(U_{[m,M]}) in W^{1,1}(□_R).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyConstants {
    pub d: usize,
    pub t: f64,
    pub r: f64,
    pub m: f64,
    pub big_m: f64,
    pub omega_d: f64,
    /// λ_R at R = M.
    pub lambda_udc: f64,
    pub gamma_m: f64,
    pub max_speed: f64,
    pub sup_l: f64,
    pub v_t: f64,
    pub m_t: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    /// Upper end of the admissible ε window.
    pub eps_max: f64,
}

impl EntropyConstants {
    pub fn compute(moduli: &ConvexityModuli, t: f64, big_r: f64, m: f64, big_m: f64) -> Result<Self> {
        if !(t > 0.0 && big_r > 0.0 && m >= 0.0 && big_m > 0.0) {
            return Err(Error::Input("entropy constants need T, R, M > 0 and m >= 0".into()));
        }
        let d = moduli.model().dim();
        let df = d as f64;
        let sd = df.sqrt();
        let speed = moduli.max_speed(big_m)?;
        let radius = moduli.gamma_radius(big_m)?;
        if moduli.hessian_ratio(radius.max(big_m)) < DEGENERACY_FLOOR {
            return Err(Error::Degenerate("Hessian eigenvalue ratio below the degeneracy floor".into()));
        }
        let gamma_m = moduli.lambda_r(radius)?;
        let lambda_udc = moduli.lambda_r(big_m)?;
        let sup_l = moduli.max_conjugate(speed)?;
        let two_d = 2f64.powi(d as i32);
        let rd = big_r.powi(d as i32);
        let v_t = df * two_d * big_r.powi(d as i32 - 1) / gamma_m * (speed + 2.0 * sd * big_r / t) + sd * two_d * rd / t;
        let m_t = m + sd * big_m * big_r + t * sup_l;
        let omega_d = unit_ball_volume(d);
        let mut c = Self {
            d,
            t,
            r: big_r,
            m,
            big_m,
            omega_d,
            lambda_udc,
            gamma_m,
            max_speed: speed,
            sup_l,
            v_t,
            m_t,
            beta_minus: two_d * rd * m,
            beta_plus: (2.0 * two_d * rd + 2.0) * (3.0 + sd * big_r) * m_t,
            r_minus: omega_d * rd / ((df + 1.0) * 2f64.powi(d as i32 + 9)),
            r_plus: (two_d * rd + 1.0) * (3.0 + sd * big_r),
            gamma_minus: (8.0 * big_r * lambda_udc / (3.0 * t)).powi(d as i32) / (8.0 * std::f64::consts::LN_2),
            gamma_plus: 48.0 * sd * (12.0 * df * sd * big_r * v_t).powi(d as i32),
            eps_max: 0.0,
        };
        // Arguments beyond the modulus range are clamped to s = M.
        let clamp_inverse = |table: crate::hamiltonian::ModulusTable, y: f64| -> Result<f64> {
            if y >= table.max_value() {
                Ok(big_m)
            } else {
                table.inverse(y)
            }
        };
        let psi_arg = (12.0 * big_r * v_t * v_t / (3.0 * v_t + 2.0 * speed))
            .min(4.0 * v_t * (big_r * v_t / speed).powf(1.0 / df));
        let upper_window = c.r_plus * clamp_inverse(moduli.psi_table(big_m)?, psi_arg)?;
        let lower_window = c.r_minus * clamp_inverse(moduli.phi_table(big_m)?, lambda_udc / (2.0 * t))?;
        c.eps_max = upper_window.min(lower_window);
        Ok(c)
    }

    pub fn admissible(&self, eps: f64) -> bool {
        eps > 0.0 && eps < self.eps_max
    }

    /// (lower, upper) from the two-sided estimate at ε.
    ///
    /// A vanishing ⌊β⁻/ε⌋ contributes 0 to the lower bound.
    pub fn bounds(&self, moduli: &ConvexityModuli, eps: f64) -> Result<(f64, f64)> {
        check_eps(eps)?;
        let d = self.d as i32;
        let floor = (self.beta_minus / eps).floor();
        let log_lower = if floor >= 1.0 { floor.log2() } else { 0.0 };
        let lower = log_lower + self.gamma_minus * moduli.phi(self.big_m, eps / self.r_minus)?.powi(-d);
        let upper = (self.beta_plus / eps).log2() + self.gamma_plus * moduli.psi(self.big_m, eps / self.r_plus)?.powi(-d);
        Ok((lower, upper))
    }
}

/// Two-sided entropy bound at one ε, with the admissibility flag.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoreticalBounds {
    pub lower: f64,
    pub upper: f64,
    pub admissible: bool,
    pub constants: EntropyConstants,
}

pub fn theoretical_bounds(
    moduli: &ConvexityModuli,
    t: f64,
    big_r: f64,
    m: f64,
    big_m: f64,
    eps: f64,
) -> Result<TheoreticalBounds> {
    let constants = EntropyConstants::compute(moduli, t, big_r, m, big_m)?;
    let (lower, upper) = constants.bounds(moduli, eps)?;
    Ok(TheoreticalBounds { lower, upper, admissible: constants.admissible(eps), constants })
}

/// Least-squares slope of log y against log(1/ε).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub residual: f64,
    pub points_used: usize,
    /// Fewer than two usable points or no spread in y.
    pub degenerate: bool,
}

pub fn fit_exponent(eps: &[f64], values: &[f64]) -> ExponentFit {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .filter(|(e, v)| **e > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(e, v)| ((1.0 / e).ln(), v.ln()))
        .collect();
    let n = pts.len();
    let flat = pts.windows(2).all(|w| w[0].1 == w[1].1);
    if n < 2 || flat {
        return ExponentFit { slope: 0.0, residual: 0.0, points_used: n, degenerate: true };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let residual = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / n as f64).sqrt();
    ExponentFit { slope, residual, points_used: n, degenerate: false }
}

/// Fitted growth exponent of H_ε = log₂N_ε in 1/ε, with the sample drawn per ε by
/// `generator`; points with N_ε ≤ 1 are dropped.
pub fn empirical_exponent(
    generator: impl Fn(f64) -> Result<FunctionClassSample>,
    eps_grid: &[f64],
    metric: Metric,
) -> Result<ExponentFit> {
    if eps_grid.len() < 4 {
        return Err(Error::Input("exponent fit needs at least four epsilon values".into()));
    }
    let (lo, hi) = eps_grid.iter().fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
    if hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(Error::Input("epsilon grid must span at least one decade".into()));
    }
    let mut entropies = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        check_eps(eps)?;
        entropies.push((covering_count(&generator(eps)?, eps, metric)? as f64).log2());
    }
    Ok(fit_exponent(eps_grid, &entropies))
}

/// One row of an entropy report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyRow {
    pub epsilon: f64,
    pub covering: usize,
    pub packing: usize,
    /// `None` outside the admissible window.
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub admissible: bool,
}

/// Empirical counts next to the theoretical two-sided bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub metric: Metric,
    pub sample_size: usize,
    /// Sampled counts are lower evidence for the entropy of the full class.
    pub note: String,
    pub rows: Vec<EntropyRow>,
    pub empirical: ExponentFit,
    pub theoretical_lower: ExponentFit,
    pub theoretical_upper: ExponentFit,
    pub constants: EntropyConstants,
}

/// Builds the report for a sample on an ε grid; theoretical bounds are evaluated
/// on the separate `bound_grid`, which may lie deeper in the admissible window.
pub fn entropy_report(
    sample: &FunctionClassSample,
    metric: Metric,
    eps_grid: &[f64],
    moduli: &ConvexityModuli,
    constants: EntropyConstants,
    bound_grid: &[f64],
) -> Result<EntropyReport> {
    if eps_grid.is_empty() {
        return Err(Error::Input("epsilon grid is empty".into()));
    }
    eps_grid.iter().chain(bound_grid).try_for_each(|e| check_eps(*e))?;
    let dist = sample.distances(metric);
    let mut rows = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let admissible = constants.admissible(eps);
        let (lower, upper) = if admissible { constants.bounds(moduli, eps).ok().unzip() } else { (None, None) };
        rows.push(EntropyRow {
            epsilon: eps,
            covering: dist.covering_count(eps),
            packing: dist.packing_count(eps),
            lower_bound: lower,
            upper_bound: upper,
            admissible,
        });
    }
    let empirical = if eps_grid.len() >= 4 {
        let h: Vec<f64> = rows.iter().map(|r| (r.covering as f64).log2()).collect();
        fit_exponent(eps_grid, &h)
    } else {
        ExponentFit { slope: 0.0, residual: 0.0, points_used: 0, degenerate: true }
    };
    let mut lows = Vec::with_capacity(bound_grid.len());
    let mut ups = Vec::with_capacity(bound_grid.len());
    for &eps in bound_grid {
        let (l, u) = constants.bounds(moduli, eps)?;
        lows.push(l);
        ups.push(u);
    }
    Ok(EntropyReport {
        metric,
        sample_size: sample.len(),
        note: "empirical counts come from a finite sample and are lower evidence only".into(),
        rows,
        empirical,
        theoretical_lower: fit_exponent(bound_grid, &lows),
        theoretical_upper: fit_exponent(bound_grid, &ups),
        constants,
    })
}

/// `count` log-spaced values from `hi` down to `hi/10^decades`.
pub fn log_grid(hi: f64, decades: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![hi];
    }
    (0..count).map(|i| hi * 10f64.powf(-decades * i as f64 / (count - 1) as f64)).collect()
}
