//! A degenerate quartic Hamiltonian whose slope field loses BV regularity.
//!
//! The initial datum is the dual of a lattice of anisotropic Voronoi cells: at
//! t = 1 the solution equals L(x − y_ι) on the cell of each site y_ι, so the
//! slope field b(1,·) jumps across every cell boundary. Refining the lattice
//! pitch δ makes the total jump mass on a fixed window grow like δ^{-1/3}.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bv::total_variation;
use crate::datum::InitialDatum;
use crate::entropy::fit_exponent;
use crate::error::{Error, Result};
use crate::grid::{Domain, GridSpec};
use crate::hamiltonian::{CustomHamiltonian, HamiltonianModel, LagrangianView, QUARTIC_COEFF};
use crate::hopflax::{solve_with, HopfLax};

/// Samples per period axis in the tabulated dual datum.
const TABLE_NODES: usize = 128;
/// Lattice neighborhood (in index units) searched when maximizing over cells.
const CELL_REACH: i64 = 2;
/// Coarse scan half-steps and refinement starts for the Hopf-Lax solve. The
/// minimizers sit on isolated lattice sites, so a light scan suffices; the cell
/// audit checks every run.
const SCAN_STEPS: usize = 12;
const REFINE_STARTS: usize = 2;

fn pow43(x: f64) -> f64 {
    x.abs().powf(4.0 / 3.0)
}

/// Which Lagrangian drives the construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangianVariant {
    /// L(q) = |q₁|^{4/3} + q₂², paired with its own Hamiltonian (27/256)p₁⁴ + p₂²/4.
    Stated,
    /// The quartic model (27/256)p₁⁴ + p₂² with its exact conjugate |q₁|^{4/3} + q₂²/4.
    Conjugate,
}

impl LagrangianVariant {
    /// Coefficient c₂ in L(q) = |q₁|^{4/3} + c₂q₂².
    pub fn c2(self) -> f64 {
        match self {
            LagrangianVariant::Stated => 1.0,
            LagrangianVariant::Conjugate => 0.25,
        }
    }

    pub fn model(self) -> HamiltonianModel {
        match self {
            LagrangianVariant::Conjugate => HamiltonianModel::quartic2d(),
            LagrangianVariant::Stated => {
                let custom = CustomHamiltonian::new("quartic-stated", |p: &[f64]| QUARTIC_COEFF * p[0].powi(4) + 0.25 * p[1] * p[1])
                    .with_gradient(|p: &[f64], g: &mut [f64]| {
                        g[0] = 4.0 * QUARTIC_COEFF * p[0].powi(3);
                        g[1] = 0.5 * p[1];
                    })
                    .with_conjugate(
                        |q: &[f64]| pow43(q[0]) + q[1] * q[1],
                        |q: &[f64], g: &mut [f64]| {
                            g[0] = 4.0 / 3.0 * q[0].signum() * q[0].abs().cbrt();
                            g[1] = 2.0 * q[1];
                        },
                    );
                HamiltonianModel::custom(2, custom).expect("two-dimensional custom model")
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LagrangianVariant::Stated => "stated",
            LagrangianVariant::Conjugate => "conjugate",
        }
    }
}

/// How the admissibility of (δ, ℓ) is checked before building the datum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeCheck {
    /// Require M_δ ≤ ℓ/2.
    Strict,
    /// Require only the window certificate (see [`LatticeDatum::window_margin`]).
    Relaxed,
}

/// γ_q̄(s) = (|s − q̄₁|^{4/3} − |s|^{4/3}) / (2q̄₂) + q̄₂/2.
pub fn gamma_curve(qbar: [f64; 2], s: f64) -> Result<f64> {
    weighted_gamma(qbar, 1.0, s)
}

/// The L-bisector of 0 and q̄ for L(q) = |q₁|^{4/3} + c₂q₂², as a graph over q₁.
pub fn weighted_gamma(qbar: [f64; 2], c2: f64, s: f64) -> Result<f64> {
    if qbar[1] == 0.0 || !qbar[1].is_finite() {
        return Err(Error::Input("γ needs q̄₂ ≠ 0".into()));
    }
    Ok((pow43(s - qbar[0]) - pow43(s)) / (2.0 * c2 * qbar[1]) + qbar[1] / 2.0)
}

/// Polygonal length of {(s, γ(s)) : s between 0 and q̄₁} with `segments` chords.
/// Chords underestimate, so this is a lower bound for the arclength.
pub fn arclength(qbar: [f64; 2], c2: f64, segments: usize) -> Result<f64> {
    let n = segments.max(1);
    let mut total = 0.0;
    let mut prev = (0.0, weighted_gamma(qbar, c2, 0.0)?);
    for i in 1..=n {
        let s = qbar[0] * i as f64 / n as f64;
        let cur = (s, weighted_gamma(qbar, c2, s)?);
        total += (cur.0 - prev.0).hypot(cur.1 - prev.1);
        prev = cur;
    }
    Ok(total)
}

/// Lattice y_ι = (ι₁δ, ι₂κ) over ι₁ + ι₂ even, with κ = δ^{2/3}/√c₂ so that the
/// cells are the curvilinear diamonds bounded by the γ-curves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeDatumSpec {
    pub delta: f64,
    pub ell: f64,
    pub variant: LagrangianVariant,
    pub check: RangeCheck,
}

impl LatticeDatumSpec {
    pub fn new(delta: f64, ell: f64, variant: LagrangianVariant) -> Result<Self> {
        if !(delta > 0.0 && delta < ell && ell < 1.0) {
            return Err(Error::Input(format!("lattice needs 0 < δ < ℓ < 1, got δ={delta}, ℓ={ell}")));
        }
        Ok(Self { delta, ell, variant, check: RangeCheck::Relaxed })
    }

    pub fn strict(mut self) -> Self {
        self.check = RangeCheck::Strict;
        self
    }

    /// Site spacing (δ, κ) along the two axes.
    pub fn pitch(&self) -> [f64; 2] {
        [self.delta, self.delta.powf(2.0 / 3.0) / self.variant.c2().sqrt()]
    }

    pub fn site(&self, i: [i64; 2]) -> [f64; 2] {
        let p = self.pitch();
        [i[0] as f64 * p[0], i[1] as f64 * p[1]]
    }

    pub fn lagrangian(&self, q: [f64; 2]) -> f64 {
        pow43(q[0]) + self.variant.c2() * q[1] * q[1]
    }

    fn sites_near(&self, x: [f64; 2], reach: i64) -> impl Iterator<Item = [i64; 2]> {
        let p = self.pitch();
        let c = [(x[0] / p[0]).round() as i64, (x[1] / p[1]).round() as i64];
        (-reach..=reach)
            .flat_map(move |a| (-reach..=reach).map(move |b| [c[0] + a, c[1] + b]))
            .filter(|i| (i[0] + i[1]).rem_euclid(2) == 0)
    }

    /// The site whose cell contains x (lowest index on ties).
    pub fn nearest_site(&self, x: [f64; 2]) -> [i64; 2] {
        let mut best = ([0, 0], f64::INFINITY);
        for i in self.sites_near(x, CELL_REACH) {
            let y = self.site(i);
            let v = self.lagrangian([x[0] - y[0], x[1] - y[1]]);
            if v < best.1 || (v == best.1 && i < best.0) {
                best = (i, v);
            }
        }
        best.0
    }

    /// g₁(x) = min_ι L(x − y_ι), the solution at t = 1.
    pub fn g1(&self, x: [f64; 2]) -> f64 {
        let y = self.site(self.nearest_site(x));
        self.lagrangian([x[0] - y[0], x[1] - y[1]])
    }

    /// Upper boundary of the cell at the origin over |z₁| ≤ δ.
    fn cell_height(&self, z1: f64) -> f64 {
        let p = self.pitch();
        let s = z1.abs().min(p[0]);
        (pow43(p[0] - s) - pow43(s)) / (2.0 * self.variant.c2() * p[1]) + p[1] / 2.0
    }

    /// max over z in the origin cell of L(z) − L(z − w). Linear in z₂, so each
    /// column is maximized at a boundary point; the column index is searched in 1-D.
    fn cell_gain(&self, w: [f64; 2]) -> f64 {
        let c2 = self.variant.c2();
        let delta = self.delta;
        let f = |z1: f64| pow43(z1) - pow43(z1 - w[0]) + 2.0 * c2 * w[1].abs() * self.cell_height(z1) - c2 * w[1] * w[1];
        let n = 64;
        let step = 2.0 * delta / n as f64;
        let mut best = (f64::NEG_INFINITY, 0.0);
        let candidates = (0..=n).map(|i| -delta + i as f64 * step).chain([0.0, w[0].clamp(-delta, delta)]);
        for z in candidates {
            let v = f(z);
            if v > best.0 {
                best = (v, z);
            }
        }
        // Golden-section polish around the best scan point.
        let (mut a, mut b) = ((best.1 - step).max(-delta), (best.1 + step).min(delta));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        best.0.max(fc).max(fd)
    }

    /// g₀(y) = max_x {g₁(x) − L(x − y)}, evaluated cell by cell.
    pub fn g0(&self, y: [f64; 2]) -> f64 {
        self.sites_near(y, CELL_REACH)
            .map(|i| {
                let s = self.site(i);
                self.cell_gain([y[0] - s[0], y[1] - s[1]])
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// M_δ = sup |DL| over [−δ, δ] × [−κ, κ], by grid scan.
    pub fn m_delta(&self) -> f64 {
        let p = self.pitch();
        let c2 = self.variant.c2();
        let n = 64;
        let mut best = 0.0f64;
        for i in 0..=n {
            for j in 0..=n {
                let q1 = -p[0] + 2.0 * p[0] * i as f64 / n as f64;
                let q2 = -p[1] + 2.0 * p[1] * j as f64 / n as f64;
                let g = [4.0 / 3.0 * q1.signum() * q1.abs().cbrt(), 2.0 * c2 * q2];
                best = best.max(g[0].hypot(g[1]));
            }
        }
        best
    }

    /// max g₁, attained on the cell boundary; by scan over one period plus the cell vertices.
    pub fn g1_max(&self) -> f64 {
        let p = self.pitch();
        let n = 256;
        let mut best = self.delta.powf(4.0 / 3.0);
        for i in 0..n {
            for j in 0..n {
                best = best.max(self.g1([2.0 * p[0] * i as f64 / n as f64, 2.0 * p[1] * j as f64 / n as f64]));
            }
        }
        best
    }

    /// Jump mass across one shared boundary: |y_ι − y_ι'| times a lower bound on its length.
    pub fn pair_jump_mass(&self) -> Result<f64> {
        let p = self.pitch();
        Ok(p[0].hypot(p[1]) * arclength(p, self.variant.c2(), 256)?)
    }
}

/// g₀ sampled over one period [0, 2δ) × [0, 2κ), read back bilinearly.
#[derive(Clone, Debug)]
struct PeriodicTable {
    period: [f64; 2],
    values: Vec<f64>,
}

impl PeriodicTable {
    fn build(spec: &LatticeDatumSpec) -> Self {
        let p = spec.pitch();
        let period = [2.0 * p[0], 2.0 * p[1]];
        let n = TABLE_NODES;
        let values = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n, k % n);
                spec.g0([period[0] * i as f64 / n as f64, period[1] * j as f64 / n as f64])
            })
            .collect();
        Self { period, values }
    }

    fn eval(&self, y: [f64; 2]) -> f64 {
        let n = TABLE_NODES;
        let mut idx = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..2 {
            let s = (y[a] / self.period[a]).rem_euclid(1.0) * n as f64;
            let f = s.floor();
            idx[a] = (f as usize) % n;
            frac[a] = s - f;
        }
        let at = |i: usize, j: usize| self.values[(i % n) * n + (j % n)];
        let (i, j) = (idx[0], idx[1]);
        let (fx, fy) = (frac[0], frac[1]);
        (1.0 - fx) * ((1.0 - fy) * at(i, j) + fy * at(i, j + 1)) + fx * ((1.0 - fy) * at(i + 1, j) + fy * at(i + 1, j + 1))
    }

    fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// ū = min(g₀, M_δ·(2ℓ − |y|_∞))₊: equal to g₀ on the core and zero outside [−2ℓ, 2ℓ]².
#[derive(Clone, Debug)]
pub struct LatticeDatum {
    pub spec: LatticeDatumSpec,
    pub m_delta: f64,
    /// max g₀; the clamp is inactive where M_δ(2ℓ − |y|_∞) ≥ this.
    pub g0_max: f64,
    pub g1_max: f64,
    /// Lower bound on ū(y) + L(x − y) − g₁(x) over x in [−ℓ, ℓ]² and y where the clamp is active.
    /// Nonnegative means u(1,·) = g₁ on the window.
    pub window_margin: f64,
    table: PeriodicTable,
}

impl LatticeDatum {
    /// ū through the tabulated g₀, used by the solver.
    pub fn tabulated(&self, y: [f64; 2]) -> f64 {
        self.clamp(y, self.table.eval(y))
    }

    /// ū through a direct evaluation of g₀.
    pub fn exact(&self, y: [f64; 2]) -> f64 {
        self.clamp(y, self.spec.g0(y))
    }

    fn clamp(&self, y: [f64; 2], g0: f64) -> f64 {
        let r = y[0].abs().max(y[1].abs());
        g0.min(self.m_delta * (2.0 * self.spec.ell - r)).max(0.0)
    }

    /// Bilinear reading of an M_δ-Lipschitz function is off by at most M_δ times the table cell diagonal.
    pub fn table_error_bound(&self) -> f64 {
        let n = TABLE_NODES as f64;
        self.m_delta * (self.table.period[0] / n).hypot(self.table.period[1] / n)
    }

    /// Half-width of the square on which ū = g₀.
    pub fn core_half_width(&self) -> f64 {
        2.0 * self.spec.ell - self.g0_max / self.m_delta
    }
}

impl InitialDatum for LatticeDatum {
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, y: &[f64]) -> f64 {
        self.tabulated([y[0], y[1]])
    }
    fn lipschitz(&self) -> f64 {
        self.m_delta
    }
    fn bound(&self) -> f64 {
        self.tabulated([0.0, 0.0]).abs()
    }
    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }
    fn name(&self) -> String {
        format!("lattice(δ={}, ℓ={}, {})", self.spec.delta, self.spec.ell, self.spec.variant.label())
    }
}

pub fn build_datum(spec: &LatticeDatumSpec) -> Result<LatticeDatum> {
    let m_delta = spec.m_delta();
    if spec.check == RangeCheck::Strict && m_delta > spec.ell / 2.0 {
        return Err(Error::Precondition(format!("M_δ = {m_delta:.4} exceeds ℓ/2 = {}", spec.ell / 2.0)));
    }
    let table = PeriodicTable::build(spec);
    let g0_max = table.max();
    let g1_max = spec.g1_max();
    let mut datum = LatticeDatum { spec: spec.clone(), m_delta, g0_max, g1_max, window_margin: 0.0, table };
    let core = datum.core_half_width();
    if core < 1.5 * spec.ell {
        return Err(Error::Precondition(format!(
            "clamp reaches into [−3ℓ/2, 3ℓ/2]²: max g₀ = {g0_max:.4e} > M_δℓ/2 = {:.4e}",
            m_delta * spec.ell / 2.0
        )));
    }
    // Where the clamp is active, |y|_∞ = r > core, ū(y) = M_δ(2ℓ − r)₊ and |x − y|_∞ ≥ r − ℓ.
    let c2 = spec.variant.c2();
    let ell = spec.ell;
    let n = 4096;
    let escape = (0..=n)
        .map(|i| {
            let r = core + (2.0 * ell - core) * i as f64 / n as f64;
            let a = r - ell;
            m_delta * (2.0 * ell - r).max(0.0) + pow43(a).min(c2 * a * a)
        })
        .fold(f64::INFINITY, f64::min);
    datum.window_margin = escape - g1_max;
    if datum.window_margin < 0.0 {
        return Err(Error::Precondition(format!(
            "rays from [−ℓ, ℓ]² can reach the clamped region: escape cost {escape:.4e} < max g₁ = {g1_max:.4e}"
        )));
    }
    Ok(datum)
}

/// Agreement of b(1,·) with x − y_ι away from cell boundaries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellAudit {
    /// Grid points whose 5×5 stencil of spacing h lies in a single cell.
    pub interior: usize,
    /// Interior points with |b − (x − y_ι)| ≤ 5h.
    pub matched: usize,
    pub fraction: f64,
    pub max_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleRun {
    pub delta: f64,
    pub ell: f64,
    pub variant: LagrangianVariant,
    pub h: f64,
    pub points: usize,
    pub m_delta: f64,
    pub max_speed: f64,
    /// TV of b(1,·) on [−ℓ, ℓ]².
    pub tv_b: f64,
    /// TV of the discrete gradient of u(1,·) on [−ℓ, ℓ]².
    pub tv_du: f64,
    /// TV of the minimizer field y_x, i.e. the jump part of Db.
    pub tv_jump: f64,
    pub cells: CellAudit,
}

/// Grid spacing h = min(δ^{2/3}/per_height, δ/per_width).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPolicy {
    pub per_height: f64,
    pub per_width: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { per_height: 12.0, per_width: 8.0 }
    }
}

impl GridPolicy {
    pub fn spacing(&self, delta: f64) -> Result<f64> {
        if !(self.per_height > 0.0 && self.per_width > 0.0) {
            return Err(Error::Input("grid policy needs positive refinements".into()));
        }
        Ok((delta.powf(2.0 / 3.0) / self.per_height).min(delta / self.per_width))
    }
}

/// Grid on [−ℓ, ℓ]² at the policy spacing.
pub fn blowup_grid(spec: &LatticeDatumSpec, policy: GridPolicy) -> Result<GridSpec> {
    let h = policy.spacing(spec.delta)?;
    let n = (2.0 * spec.ell / h).ceil() as usize + 1;
    GridSpec::cube(2, -spec.ell, spec.ell, n)
}

pub fn solve_and_measure(spec: &LatticeDatumSpec, grid: &GridSpec) -> Result<CounterexampleRun> {
    if grid.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: grid.dim() });
    }
    let datum = build_datum(spec)?;
    let view = LagrangianView::new(spec.variant.model());
    let mut hl = HopfLax::new(&datum, &view, 1.0)?;
    hl.scan_steps = SCAN_STEPS;
    hl.refine_starts = REFINE_STARTS;
    let result = solve_with(&hl, grid)?;
    let window = Domain::cube(2, -spec.ell, spec.ell);
    let tv_b = total_variation(&result.b, &window)?.tv_estimate;
    let tv_du = total_variation(&result.grad_u, &window)?.tv_estimate;
    let tv_jump = total_variation(&result.minimizers, &window)?.tv_estimate;

    let h = grid.max_spacing();
    let audits: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point(k);
            let x = [x[0], x[1]];
            let site = spec.nearest_site(x);
            let interior = (-2..=2).all(|a| {
                (-2..=2).all(|c| spec.nearest_site([x[0] + a as f64 * h, x[1] + c as f64 * h]) == site)
            });
            interior.then(|| {
                let y = spec.site(site);
                let b = result.b.at(k);
                (b[0] - (x[0] - y[0])).hypot(b[1] - (x[1] - y[1]))
            })
        })
        .collect();
    let errors: Vec<f64> = audits.into_iter().flatten().collect();
    let matched = errors.iter().filter(|e| **e <= 5.0 * h).count();
    let cells = CellAudit {
        interior: errors.len(),
        matched,
        fraction: if errors.is_empty() { 0.0 } else { matched as f64 / errors.len() as f64 },
        max_error: errors.iter().cloned().fold(0.0, f64::max),
    };

    Ok(CounterexampleRun {
        delta: spec.delta,
        ell: spec.ell,
        variant: spec.variant,
        h,
        points: grid.len(),
        m_delta: datum.m_delta,
        max_speed: result.max_speed,
        tv_b,
        tv_du,
        tv_jump,
        cells,
    })
}

/// Least-squares slope with a two-standard-error band.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub band: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupReport {
    pub runs: Vec<CounterexampleRun>,
    /// Slope of log tv_b against log(1/δ).
    pub tv_b: ScalingFit,
    pub tv_du: ScalingFit,
    pub tv_jump: ScalingFit,
    /// tv_b strictly increases as δ decreases.
    pub monotone: bool,
    /// Set when tv_b is not monotone, which points at an under-resolved grid.
    pub flagged: bool,
}

fn scaling_fit(deltas: &[f64], values: &[f64]) -> ScalingFit {
    let slope = fit_exponent(deltas, values).slope;
    let xs: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let se = if n > 2.0 && sxx > 0.0 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    ScalingFit { slope, band: [slope - 2.0 * se, slope + 2.0 * se] }
}

/// Runs one δ per job and fits the TV growth exponents.
pub fn blowup_exponent(ell: f64, deltas: &[f64], variant: LagrangianVariant, policy: GridPolicy) -> Result<BlowupReport> {
    if deltas.len() < 4 {
        return Err(Error::Input(format!("blow-up fit needs at least 4 values of δ, got {}", deltas.len())));
    }
    for w in deltas.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::Input(format!("δ values must halve successively, got {} then {}", w[0], w[1])));
        }
    }
    let mut runs = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let spec = LatticeDatumSpec::new(delta, ell, variant)?;
        let grid = blowup_grid(&spec, policy)?;
        runs.push(solve_and_measure(&spec, &grid)?);
    }
    let pick = |f: fn(&CounterexampleRun) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
    let (tv_b, tv_du, tv_jump) = (pick(|r| r.tv_b), pick(|r| r.tv_du), pick(|r| r.tv_jump));
    let monotone = tv_b.windows(2).all(|w| w[1] > w[0]);
    Ok(BlowupReport {
        tv_b: scaling_fit(deltas, &tv_b),
        tv_du: scaling_fit(deltas, &tv_du),
        tv_jump: scaling_fit(deltas, &tv_jump),
        monotone,
        flagged: !monotone,
        runs,
    })
}
