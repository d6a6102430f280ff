//! Uniform axis-aligned grids and the fields sampled on them.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Points per grid unless a caller configures otherwise.
pub const DEFAULT_POINT_BUDGET: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, n: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() != n.len() {
            return Err(Error::Input("grid lo/hi/n must be nonempty and of equal length".into()));
        }
        for i in 0..lo.len() {
            if n[i] < 2 {
                return Err(Error::Input(format!("grid axis {i} needs at least 2 points")));
            }
            if !(hi[i] > lo[i]) || !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::Input(format!("grid axis {i} has an empty or non-finite range")));
            }
        }
        Ok(Self { lo, hi, n })
    }

    /// Same range and point count on every axis.
    pub fn cube(d: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d], vec![n; d])
    }

    /// Grid over [lo, hi]^d with spacing as close to `h` as an integer point count allows.
    pub fn with_spacing(lo: &[f64], hi: &[f64], h: f64) -> Result<Self> {
        let n = lo.iter().zip(hi).map(|(a, b)| ((b - a) / h).round().max(1.0) as usize + 1).collect();
        Self::new(lo.to_vec(), hi.to_vec(), n)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.n[axis] - 1) as f64
    }

    pub fn spacings(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.spacing(i)).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacings().into_iter().fold(0.0, f64::max)
    }

    pub fn check_budget(&self, budget: usize) -> Result<()> {
        if self.len() > budget {
            return Err(Error::Input(format!("grid has {} points, budget is {budget}", self.len())));
        }
        Ok(())
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let n1 = (self.n[axis] - 1) as f64;
        self.lo[axis] + (self.hi[axis] - self.lo[axis]) * (i as f64 / n1)
    }

    /// Flat index, last axis fastest.
    pub fn flat(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.n).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn multi(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            out[axis] = flat % self.n[axis];
            flat /= self.n[axis];
        }
        out
    }

    /// Offset of one step along `axis` in flat indexing.
    pub fn stride(&self, axis: usize) -> usize {
        self.n[axis + 1..].iter().product()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let multi = self.multi(flat);
        (0..self.dim()).map(|a| self.coord(a, multi[a])).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    pub fn same_layout(&self, other: &GridSpec) -> bool {
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        self.n == other.n && close(&self.lo, &other.lo) && close(&self.hi, &other.hi)
    }

    /// Grid widened by `margin` on every side with the original spacing kept.
    pub fn expanded(&self, margin: f64) -> Result<GridSpec> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut n = Vec::new();
        for a in 0..self.dim() {
            let h = self.spacing(a);
            let extra = (margin / h).ceil() as usize;
            lo.push(self.lo[a] - extra as f64 * h);
            hi.push(self.hi[a] + extra as f64 * h);
            n.push(self.n[a] + 2 * extra);
        }
        GridSpec::new(lo, hi, n)
    }

    /// Multilinear interpolation weights for `x`, coordinates clamped to the box.
    fn stencil(&self, x: &[f64], corner: &mut [usize], weight: &mut [f64]) {
        for a in 0..self.dim() {
            let h = self.spacing(a);
            let t = ((x[a] - self.lo[a]) / h).clamp(0.0, (self.n[a] - 1) as f64);
            let i = (t.floor() as usize).min(self.n[a] - 2);
            corner[a] = i;
            weight[a] = t - i as f64;
        }
    }

    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> f64 {
        let d = self.dim();
        let mut corner = vec![0; d];
        let mut weight = vec![0.0; d];
        self.stencil(x, &mut corner, &mut weight);
        let mut total = 0.0;
        for mask in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..d {
                let up = mask >> (d - 1 - a) & 1;
                w *= if up == 1 { weight[a] } else { 1.0 - weight[a] };
                flat = flat * self.n[a] + corner[a] + up;
            }
            if w != 0.0 {
                total += w * values[flat];
            }
        }
        total
    }
}

/// A scalar field on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch(format!("{} values for {} grid points", values.len(), spec.len())));
        }
        Ok(Self { spec, values })
    }

    pub fn from_fn(spec: &GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = spec.points().map(|x| f(&x)).collect();
        Self { spec: spec.clone(), values }
    }

    pub fn interpolate(&self, x: &[f64]) -> f64 {
        self.spec.interpolate(&self.values, x)
    }

    /// Largest adjacent difference divided by the spacing, over all axes.
    pub fn lipschitz_estimate(&self) -> f64 {
        let mut best = 0.0f64;
        for a in 0..self.spec.dim() {
            let stride = self.spec.stride(a);
            let h = self.spec.spacing(a);
            for i in 0..self.values.len() {
                if self.spec.multi(i)[a] + 1 < self.spec.n[a] {
                    best = best.max((self.values[i + stride] - self.values[i]).abs() / h);
                }
            }
        }
        best
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64> {
        if !self.spec.same_layout(&other.spec) {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn negated(&self) -> GridFunction {
        GridFunction { spec: self.spec.clone(), values: self.values.iter().map(|v| -v).collect() }
    }

    /// Central differences inside, one-sided at the box boundary.
    pub fn gradient(&self) -> VectorField {
        let d = self.spec.dim();
        let mut data = vec![0.0; self.values.len() * d];
        for i in 0..self.values.len() {
            let multi = self.spec.multi(i);
            for a in 0..d {
                let s = self.spec.stride(a);
                let h = self.spec.spacing(a);
                let (lo, hi, span) = if multi[a] == 0 {
                    (i, i + s, h)
                } else if multi[a] + 1 == self.spec.n[a] {
                    (i - s, i, h)
                } else {
                    (i - s, i + s, 2.0 * h)
                };
                data[i * d + a] = (self.values[hi] - self.values[lo]) / span;
            }
        }
        VectorField { spec: self.spec.clone(), components: d, data }
    }
}

/// A field with a fixed number of components per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub spec: GridSpec,
    pub components: usize,
    pub data: Vec<f64>,
}

impl VectorField {
    pub fn new(spec: GridSpec, components: usize, data: Vec<f64>) -> Result<Self> {
        if components == 0 || data.len() != spec.len() * components {
            return Err(Error::GridMismatch(format!(
                "{} entries do not fit {} points with {components} components",
                data.len(),
                spec.len()
            )));
        }
        Ok(Self { spec, components, data })
    }

    pub fn from_fn(spec: &GridSpec, components: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut data = Vec::with_capacity(spec.len() * components);
        for x in spec.points() {
            let v = f(&x);
            assert_eq!(v.len(), components, "field closure returned the wrong component count");
            data.extend(v);
        }
        Self { spec: spec.clone(), components, data }
    }

    /// One-component field holding a scalar function.
    pub fn from_scalar(u: &GridFunction) -> Self {
        Self { spec: u.spec.clone(), components: 1, data: u.values.clone() }
    }

    pub fn at(&self, flat: usize) -> &[f64] {
        &self.data[flat * self.components..(flat + 1) * self.components]
    }

    pub fn max_norm(&self) -> f64 {
        self.data.chunks(self.components).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &VectorField) -> Result<f64> {
        if !self.spec.same_layout(&other.spec) || self.components != other.components {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        if !self.spec.same_layout(&other.spec) || self.components != other.components {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(VectorField { spec: self.spec.clone(), components: self.components, data })
    }
}

/// Ω for the BV and entropy diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Domain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn cube(d: usize, lo: f64, hi: f64) -> Self {
        Domain::Box { lo: vec![lo; d], hi: vec![hi; d] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return Err(Error::Input("domain box needs lo < hi on every axis".into()));
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return Err(Error::Input("domain ball needs a center and a positive radius".into()));
                }
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Domain::Ball { center, radius } => unit_ball_volume(center.len()) * radius.powi(center.len() as i32),
        }
    }

    /// H^{d−1}(∂Ω); in one dimension the boundary is two points.
    pub fn perimeter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => {
                let sides: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
                (0..sides.len())
                    .map(|i| 2.0 * sides.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, s)| s).product::<f64>())
                    .sum()
            }
            Domain::Ball { center, radius } => {
                let d = center.len();
                d as f64 * unit_ball_volume(d) * radius.powi(d as i32 - 1)
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= a - tol && *v <= b + tol),
            Domain::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= radius + tol
            }
        }
    }

    /// Whether the closure of Ω lies inside the grid box.
    pub fn inside_grid(&self, spec: &GridSpec) -> bool {
        let tol = 1e-9 * spec.max_spacing();
        let (lo, hi) = match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius } => {
                (center.iter().map(|c| c - radius).collect(), center.iter().map(|c| c + radius).collect())
            }
        };
        lo.len() == spec.dim()
            && (0..spec.dim()).all(|a| lo[a] >= spec.lo[a] - tol && hi[a] <= spec.hi[a] + tol)
    }

    /// Weight of a grid node in perpendicular quadrature: nodes on a box face count half.
    pub(crate) fn face_weight(&self, x: &[f64], axis_skip: Option<usize>, tol: f64) -> f64 {
        match self {
            Domain::Box { lo, hi } => {
                let mut w = 1.0;
                for a in 0..x.len() {
                    if Some(a) == axis_skip {
                        continue;
                    }
                    if (x[a] - lo[a]).abs() <= tol || (x[a] - hi[a]).abs() <= tol {
                        w *= 0.5;
                    }
                }
                w
            }
            Domain::Ball { .. } => 1.0,
        }
    }
}

/// Volume ω_d of the unit ball in ℝ^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

pub(crate) fn require_domain(domain: &Domain, spec: &GridSpec) -> Result<()> {
    domain.validate()?;
    check_dim(spec.dim(), domain.dim())?;
    if !domain.inside_grid(spec) {
        return Err(Error::Input("domain is not inside the grid box".into()));
    }
    Ok(())
}

/// Iterates multi-indices of a grid in lexicographic order.
pub(crate) fn for_each_multi(n: &[usize], mut f: impl FnMut(&[usize])) {
    if n.contains(&0) {
        return;
    }
    let mut idx = vec![0usize; n.len()];
    loop {
        f(&idx);
        let mut axis = n.len();
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < n[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_and_multi_round_trip() {
        let spec = GridSpec::new(vec![0.0, 0.0], vec![1.0, 2.0], vec![3, 5]).unwrap();
        for i in 0..spec.len() {
            assert_eq!(spec.flat(&spec.multi(i)), i);
        }
        assert_eq!(spec.stride(0), 5);
        assert_eq!(spec.point(7), vec![0.5, 1.0]);
    }

    #[test]
    fn interpolation_is_exact_on_bilinear_functions() {
        let spec = GridSpec::cube(2, -1.0, 1.0, 5).unwrap();
        let f = GridFunction::from_fn(&spec, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
        let x = [0.3, -0.7];
        let exact = 1.0 + 0.6 + 0.7 - 0.5 * 0.21;
        assert!((f.interpolate(&x) - exact).abs() < 1e-14);
    }

    #[test]
    fn box_geometry() {
        let dom = Domain::cube(2, -1.0, 1.0);
        assert_eq!(dom.perimeter(), 8.0);
        assert_eq!(dom.volume(), 4.0);
        assert!((dom.diameter() - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(Domain::cube(1, -1.0, 1.0).perimeter(), 2.0);
    }

    #[test]
    fn unit_ball_volumes() {
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
    }
}
