//! Lipschitz initial data u₀ for the Hopf-Lax semigroup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::hamiltonian::{dot, norm};

/// An initial datum with declared class constants: Lip[u₀] ≤ M and |u₀(0)| ≤ m.
pub trait InitialDatum: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &[f64]) -> f64;
    /// Declared Lipschitz constant M.
    fn lipschitz(&self) -> f64;
    /// Declared bound m ≥ |u₀(0)|.
    fn bound(&self) -> f64;
    /// A known lower bound of u₀, if any. Lets the solver shrink its search region.
    fn lower_bound(&self) -> Option<f64> {
        None
    }
    fn name(&self) -> String;
}

impl<T: InitialDatum + ?Sized> InitialDatum for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, y: &[f64]) -> f64 {
        (**self).value(y)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn bound(&self) -> f64 {
        (**self).bound()
    }
    fn lower_bound(&self) -> Option<f64> {
        (**self).lower_bound()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

impl<T: InitialDatum + ?Sized> InitialDatum for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, y: &[f64]) -> f64 {
        (**self).value(y)
    }
    fn lipschitz(&self) -> f64 {
        (**self).lipschitz()
    }
    fn bound(&self) -> f64 {
        (**self).bound()
    }
    fn lower_bound(&self) -> Option<f64> {
        (**self).lower_bound()
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

/// Outcome of the U_{[m,M]} membership audit.
#[derive(Clone, Debug, PartialEq)]
pub struct DatumAudit {
    pub sampled_lipschitz: f64,
    pub value_at_origin: f64,
    pub lipschitz_ok: bool,
    pub bound_ok: bool,
}

impl DatumAudit {
    pub fn passes(&self) -> bool {
        self.lipschitz_ok && self.bound_ok
    }
}

/// Samples the datum on a grid and checks Lip ≤ M(1+1e−6) and |u₀(0)| ≤ m.
pub fn audit(datum: &dyn InitialDatum, spec: &GridSpec) -> Result<DatumAudit> {
    if spec.dim() != datum.dim() {
        return Err(Error::Dimension { expected: datum.dim(), got: spec.dim() });
    }
    let sampled = GridFunction::from_fn(spec, |x| datum.value(x)).lipschitz_estimate();
    let v0 = datum.value(&vec![0.0; datum.dim()]);
    Ok(DatumAudit {
        sampled_lipschitz: sampled,
        value_at_origin: v0,
        lipschitz_ok: sampled <= datum.lipschitz() * (1.0 + 1e-6) + 1e-12,
        bound_ok: v0.abs() <= datum.bound() * (1.0 + 1e-12) + 1e-12,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constant {
    pub dim: usize,
    pub c: f64,
}

impl InitialDatum for Constant {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64]) -> f64 {
        self.c
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn bound(&self) -> f64 {
        self.c.abs()
    }
    fn lower_bound(&self) -> Option<f64> {
        Some(self.c)
    }
    fn name(&self) -> String {
        format!("constant({})", self.c)
    }
}

/// u₀(x) = ⟨a,x⟩ + c
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub a: Vec<f64>,
    pub c: f64,
}

impl InitialDatum for Linear {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn value(&self, y: &[f64]) -> f64 {
        dot(&self.a, y) + self.c
    }
    fn lipschitz(&self) -> f64 {
        norm(&self.a)
    }
    fn bound(&self) -> f64 {
        self.c.abs()
    }
    fn name(&self) -> String {
        format!("linear({:?}, {})", self.a, self.c)
    }
}

/// u₀(x) = s·|x|
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    pub dim: usize,
    pub slope: f64,
}

impl InitialDatum for Cone {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &[f64]) -> f64 {
        self.slope * norm(y)
    }
    fn lipschitz(&self) -> f64 {
        self.slope.abs()
    }
    fn bound(&self) -> f64 {
        0.0
    }
    fn lower_bound(&self) -> Option<f64> {
        (self.slope >= 0.0).then_some(0.0)
    }
    fn name(&self) -> String {
        format!("cone({})", self.slope)
    }
}

/// Piecewise-linear interpolation of (knot, value) pairs in one dimension,
/// extended by constants outside the knots.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
    lipschitz: f64,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::Input("piecewise-linear datum needs at least two knots and matching values".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("knots must be strictly increasing".into()));
        }
        let lipschitz = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(k, v)| ((v[1] - v[0]) / (k[1] - k[0])).abs())
            .fold(0.0, f64::max);
        Ok(Self { knots, values, lipschitz })
    }

    /// Random breakpoints in [−w, w], slopes uniform in [−M, M], u₀(0) uniform in [−m, m].
    pub fn random(seed: u64, pieces: usize, window: f64, m: f64, lip: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut knots: Vec<f64> = (0..pieces.max(1) + 1).map(|_| rng.gen_range(-window..window)).collect();
        knots.push(-window);
        knots.push(window);
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut values = vec![0.0];
        for w in knots.windows(2) {
            let slope = rng.gen_range(-lip..=lip);
            values.push(values.last().unwrap() + slope * (w[1] - w[0]));
        }
        let target = if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
        let mut datum = Self::new(knots, values).expect("sorted knots");
        let shift = target - datum.value(&[0.0]);
        datum.values.iter_mut().for_each(|v| *v += shift);
        datum.lipschitz = lip.max(datum.lipschitz);
        datum
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }
}

impl InitialDatum for PiecewiseLinear {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, y: &[f64]) -> f64 {
        let x = y[0];
        let n = self.knots.len();
        if x <= self.knots[0] {
            return self.values[0];
        }
        if x >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let j = self.knots.partition_point(|&k| k <= x).clamp(1, n - 1);
        let (k0, k1) = (self.knots[j - 1], self.knots[j]);
        let w = (x - k0) / (k1 - k0);
        self.values[j - 1] + w * (self.values[j] - self.values[j - 1])
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn bound(&self) -> f64 {
        self.value(&[0.0]).abs()
    }
    fn lower_bound(&self) -> Option<f64> {
        Some(self.values.iter().cloned().fold(f64::INFINITY, f64::min))
    }
    fn name(&self) -> String {
        format!("piecewise_linear({} knots)", self.knots.len())
    }
}

/// u₀(x) = min over groups of the max of affine pieces ⟨a,x⟩+c, a general
/// piecewise-linear function in any dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxAffine {
    dim: usize,
    groups: Vec<Vec<(Vec<f64>, f64)>>,
    lipschitz: f64,
    bound: f64,
}

impl MinMaxAffine {
    pub fn new(dim: usize, groups: Vec<Vec<(Vec<f64>, f64)>>) -> Result<Self> {
        if groups.is_empty() || groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Input("min-max datum needs nonempty groups".into()));
        }
        if groups.iter().flatten().any(|(a, _)| a.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: 0 });
        }
        let lipschitz = groups.iter().flatten().map(|(a, _)| norm(a)).fold(0.0, f64::max);
        let mut datum = Self { dim, groups, lipschitz, bound: 0.0 };
        datum.bound = datum.value(&vec![0.0; dim]).abs();
        Ok(datum)
    }

    /// Random slopes in the closed M-ball and offsets in [−m, m].
    pub fn random(seed: u64, dim: usize, groups: usize, pieces: usize, m: f64, lip: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut all = Vec::new();
        for _ in 0..groups.max(1) {
            let mut group = Vec::new();
            for _ in 0..pieces.max(1) {
                let a = loop {
                    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                    if norm(&v) <= 1.0 {
                        break v.into_iter().map(|x| x * lip).collect::<Vec<_>>();
                    }
                };
                let c = if m > 0.0 { rng.gen_range(-m..=m) } else { 0.0 };
                group.push((a, c));
            }
            all.push(group);
        }
        let mut datum = Self::new(dim, all).expect("consistent dimensions");
        datum.lipschitz = lip.max(datum.lipschitz);
        datum
    }
}

impl InitialDatum for MinMaxAffine {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, y: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|(a, c)| dot(a, y) + c).fold(f64::NEG_INFINITY, f64::max))
            .fold(f64::INFINITY, f64::min)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn bound(&self) -> f64 {
        self.bound
    }
    fn name(&self) -> String {
        format!("min_max_affine({} groups)", self.groups.len())
    }
}

/// u₀(x) = ⟨p̄,x⟩ + A·exp(−|x|²/σ²), whose semiconvexity constant is 2A/σ².
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBump {
    pub slope: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

impl GaussianBump {
    /// K with u₀(x+h)+u₀(x−h)−2u₀(x) ≥ −K|h|².
    pub fn semiconvexity(&self) -> f64 {
        2.0 * self.amplitude.max(0.0) / (self.width * self.width)
    }

    /// Radius of the ball around p̄ containing every gradient of u₀.
    pub fn gradient_spread(&self) -> f64 {
        self.amplitude.abs() * (2.0f64 / std::f64::consts::E).sqrt() / self.width
    }
}

impl InitialDatum for GaussianBump {
    fn dim(&self) -> usize {
        self.slope.len()
    }
    fn value(&self, y: &[f64]) -> f64 {
        dot(&self.slope, y) + self.amplitude * (-crate::hamiltonian::norm_sq(y) / (self.width * self.width)).exp()
    }
    fn lipschitz(&self) -> f64 {
        norm(&self.slope) + self.gradient_spread()
    }
    fn bound(&self) -> f64 {
        self.amplitude.abs()
    }
    fn name(&self) -> String {
        format!("gaussian_bump(A={}, sigma={})", self.amplitude, self.width)
    }
}

/// u₀ + c
#[derive(Clone, Debug)]
pub struct Shifted<D> {
    pub inner: D,
    pub c: f64,
}

impl<D: InitialDatum> InitialDatum for Shifted<D> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, y: &[f64]) -> f64 {
        self.inner.value(y) + self.c
    }
    fn lipschitz(&self) -> f64 {
        self.inner.lipschitz()
    }
    fn bound(&self) -> f64 {
        self.inner.bound() + self.c.abs()
    }
    fn lower_bound(&self) -> Option<f64> {
        self.inner.lower_bound().map(|l| l + self.c)
    }
    fn name(&self) -> String {
        format!("{} + {}", self.inner.name(), self.c)
    }
}

/// A grid function read back as a datum through multilinear interpolation,
/// constant along normals outside the grid box.
#[derive(Clone, Debug)]
pub struct GridDatum {
    pub field: GridFunction,
    pub lipschitz: f64,
    pub bound: f64,
    pub lower: Option<f64>,
}

impl GridDatum {
    pub fn new(field: GridFunction, lipschitz: f64) -> Self {
        let origin = vec![0.0; field.spec.dim()];
        let bound = field.interpolate(&origin).abs();
        let lower = Some(field.values.iter().cloned().fold(f64::INFINITY, f64::min));
        Self { field, lipschitz, bound, lower }
    }
}

impl InitialDatum for GridDatum {
    fn dim(&self) -> usize {
        self.field.spec.dim()
    }
    fn value(&self, y: &[f64]) -> f64 {
        self.field.interpolate(y)
    }
    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn bound(&self) -> f64 {
        self.bound
    }
    fn lower_bound(&self) -> Option<f64> {
        self.lower
    }
    fn name(&self) -> String {
        "grid".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_piecewise_linear_respects_class() {
        for seed in 0..20 {
            let d = PiecewiseLinear::random(seed, 6, 3.0, 0.5, 1.0);
            let spec = GridSpec::cube(1, -4.0, 4.0, 801).unwrap();
            let audit = audit(&d, &spec).unwrap();
            assert!(audit.passes(), "seed {seed}: {audit:?}");
            assert!(d.value(&[0.0]).abs() <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn min_max_affine_is_lipschitz() {
        let d = MinMaxAffine::random(3, 2, 3, 3, 0.5, 1.0);
        let spec = GridSpec::cube(2, -2.0, 2.0, 81).unwrap();
        assert!(audit(&d, &spec).unwrap().passes());
    }

    #[test]
    fn piecewise_linear_interpolates_knots() {
        let d = PiecewiseLinear::new(vec![-1.0, 0.0, 2.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.value(&[-1.0]), 1.0);
        assert_eq!(d.value(&[1.0]), 0.5);
        assert_eq!(d.value(&[5.0]), 1.0);
        assert_eq!(d.lipschitz(), 1.0);
    }
}
