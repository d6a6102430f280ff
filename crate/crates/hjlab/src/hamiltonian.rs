//! Hamiltonians, their Legendre conjugates and the convexity constants built from them.
//!
//! Built-in models carry closed-form gradients, Hessians and conjugates. Custom
//! models may supply any subset of these; missing pieces fall back to finite
//! differences and to a numeric Legendre maximization.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Coefficient of p₁⁴ in the quartic model.
pub const QUARTIC_COEFF: f64 = 27.0 / 256.0;

/// Pairs whose gradient difference is below this are skipped when sampling λ_R.
pub const GRADIENT_TIE_FLOOR: f64 = 1e-10;

/// Below this, λ_R or the Hessian eigenvalue ratio marks a model as violating
/// uniform directional convexity.
pub const DEGENERACY_FLOOR: f64 = 1e-3;

/// A closed-form Legendre conjugate and its gradient.
#[derive(Clone)]
pub struct Conjugate {
    pub value: ScalarFn,
    pub grad: VectorFn,
}

/// A user-supplied Hamiltonian.
#[derive(Clone)]
pub struct CustomHamiltonian {
    pub name: String,
    pub value: ScalarFn,
    pub grad: Option<VectorFn>,
    pub conjugate: Option<Conjugate>,
}

impl CustomHamiltonian {
    pub fn new(name: impl Into<String>, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), value: Arc::new(value), grad: None, conjugate: None }
    }

    pub fn with_gradient(mut self, grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_conjugate(
        mut self,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.conjugate = Some(Conjugate { value: Arc::new(value), grad: Arc::new(grad) });
        self
    }
}

#[derive(Clone)]
pub enum HamiltonianKind {
    /// H(p) = |p|^{2k}
    PowerNorm { k: u32 },
    /// H(p) = (27/256)p₁⁴ + p₂²
    Quartic2D,
    Custom(CustomHamiltonian),
}

impl fmt::Debug for HamiltonianKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HamiltonianKind::PowerNorm { k } => write!(f, "PowerNorm {{ k: {k} }}"),
            HamiltonianKind::Quartic2D => write!(f, "Quartic2D"),
            HamiltonianKind::Custom(c) => write!(f, "Custom({:?})", c.name),
        }
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    kind: HamiltonianKind,
    dim: usize,
    normalized: bool,
}

impl HamiltonianModel {
    pub fn power_norm(k: u32, dim: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Input("power_norm needs k >= 1".into()));
        }
        if dim == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        Ok(Self { kind: HamiltonianKind::PowerNorm { k }, dim, normalized: true })
    }

    pub fn quartic2d() -> Self {
        Self { kind: HamiltonianKind::Quartic2D, dim: 2, normalized: true }
    }

    pub fn custom(dim: usize, custom: CustomHamiltonian) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("dimension must be positive".into()));
        }
        let mut model = Self { kind: HamiltonianKind::Custom(custom), dim, normalized: false };
        let zero = vec![0.0; dim];
        let h0 = model.value_unchecked(&zero);
        let mut g0 = vec![0.0; dim];
        model.grad_into(&zero, &mut g0);
        model.normalized = h0.abs() <= 1e-12 && norm(&g0) <= 1e-6;
        Ok(model)
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn label(&self) -> String {
        match &self.kind {
            HamiltonianKind::PowerNorm { k } => format!("power_norm(k={k}, d={})", self.dim),
            HamiltonianKind::Quartic2D => "quartic2d".to_string(),
            HamiltonianKind::Custom(c) => format!("custom({}, d={})", c.name, self.dim),
        }
    }

    /// H(p).
    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.dim, p.len())?;
        Ok(self.value_unchecked(p))
    }

    /// DH(p).
    pub fn grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, p.len())?;
        let mut out = vec![0.0; self.dim];
        self.grad_into(p, &mut out);
        Ok(out)
    }

    /// Central-difference gradient, used to audit analytic gradients.
    pub fn numeric_grad(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, p.len())?;
        let mut out = vec![0.0; self.dim];
        self.central_difference_into(p, &mut out);
        Ok(out)
    }

    /// D²H(p) in row-major order.
    pub fn hessian(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, p.len())?;
        Ok(self.hessian_unchecked(p))
    }

    /// Operator norm of D²H(p).
    pub fn hessian_norm(&self, p: &[f64]) -> Result<f64> {
        check_dim(self.dim, p.len())?;
        Ok(self.hessian_norm_unchecked(p))
    }

    /// Removes the affine part at the origin: H(p) − H(0) − ⟨DH(0), p⟩.
    pub fn normalize(&self) -> HamiltonianModel {
        let custom = match &self.kind {
            HamiltonianKind::Custom(c) => c,
            _ => return self.clone(),
        };
        let zero = vec![0.0; self.dim];
        let h0 = self.value_unchecked(&zero);
        let mut g0 = vec![0.0; self.dim];
        self.grad_into(&zero, &mut g0);

        let base = self.clone();
        let g = g0.clone();
        let value = move |p: &[f64]| base.value_unchecked(p) - h0 - dot(&g, p);
        let base = self.clone();
        let g = g0.clone();
        let grad = move |p: &[f64], out: &mut [f64]| {
            base.grad_into(p, out);
            for (o, gi) in out.iter_mut().zip(&g) {
                *o -= gi;
            }
        };
        let mut normalized = CustomHamiltonian::new(format!("{}-normalized", custom.name), value).with_gradient(grad);
        if let Some(conj) = &custom.conjugate {
            let (lv, lg) = (conj.value.clone(), conj.grad.clone());
            let g = g0.clone();
            let shift = move |q: &[f64]| q.iter().zip(&g).map(|(a, b)| a + b).collect::<Vec<_>>();
            let shift2 = shift.clone();
            normalized =
                normalized.with_conjugate(move |q| lv(&shift(q)) + h0, move |q, out| lg(&shift2(q), out));
        }
        HamiltonianModel { kind: HamiltonianKind::Custom(normalized), dim: self.dim, normalized: true }
    }

    pub(crate) fn value_unchecked(&self, p: &[f64]) -> f64 {
        match &self.kind {
            HamiltonianKind::PowerNorm { k } => norm_sq(p).powi(*k as i32),
            HamiltonianKind::Quartic2D => QUARTIC_COEFF * p[0].powi(4) + p[1] * p[1],
            HamiltonianKind::Custom(c) => (c.value)(p),
        }
    }

    pub(crate) fn grad_into(&self, p: &[f64], out: &mut [f64]) {
        match &self.kind {
            HamiltonianKind::PowerNorm { k } => {
                let c = 2.0 * *k as f64 * norm_sq(p).powi(*k as i32 - 1);
                for (o, pi) in out.iter_mut().zip(p) {
                    *o = c * pi;
                }
            }
            HamiltonianKind::Quartic2D => {
                out[0] = 4.0 * QUARTIC_COEFF * p[0].powi(3);
                out[1] = 2.0 * p[1];
            }
            HamiltonianKind::Custom(c) => match &c.grad {
                Some(g) => g(p, out),
                None => self.central_difference_into(p, out),
            },
        }
    }

    fn central_difference_into(&self, p: &[f64], out: &mut [f64]) {
        let h = 1e-5 * norm(p).max(1.0);
        let mut x = p.to_vec();
        for i in 0..self.dim {
            x[i] = p[i] + h;
            let fp = self.value_unchecked(&x);
            x[i] = p[i] - h;
            let fm = self.value_unchecked(&x);
            x[i] = p[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    fn hessian_unchecked(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut hess = vec![0.0; d * d];
        match &self.kind {
            HamiltonianKind::PowerNorm { k } => {
                let k = *k as f64;
                let r2 = norm_sq(p);
                let diag = 2.0 * k * r2.powf(k - 1.0);
                let outer = if k > 1.0 { 2.0 * k * (2.0 * k - 2.0) * r2.powf(k - 2.0) } else { 0.0 };
                for i in 0..d {
                    for j in 0..d {
                        hess[i * d + j] = outer * p[i] * p[j] + if i == j { diag } else { 0.0 };
                    }
                }
            }
            HamiltonianKind::Quartic2D => {
                hess[0] = 12.0 * QUARTIC_COEFF * p[0] * p[0];
                hess[3] = 2.0;
            }
            HamiltonianKind::Custom(_) => {
                let h = 1e-4 * norm(p).max(1.0);
                let mut x = p.to_vec();
                let (mut gp, mut gm) = (vec![0.0; d], vec![0.0; d]);
                for i in 0..d {
                    x[i] = p[i] + h;
                    self.grad_into(&x, &mut gp);
                    x[i] = p[i] - h;
                    self.grad_into(&x, &mut gm);
                    x[i] = p[i];
                    for j in 0..d {
                        hess[i * d + j] = (gp[j] - gm[j]) / (2.0 * h);
                    }
                }
                for i in 0..d {
                    for j in 0..i {
                        let m = 0.5 * (hess[i * d + j] + hess[j * d + i]);
                        hess[i * d + j] = m;
                        hess[j * d + i] = m;
                    }
                }
            }
        }
        hess
    }

    fn hessian_norm_unchecked(&self, p: &[f64]) -> f64 {
        match &self.kind {
            HamiltonianKind::PowerNorm { k } => {
                let k = *k as f64;
                2.0 * k * (2.0 * k - 1.0) * norm_sq(p).powf(k - 1.0)
            }
            HamiltonianKind::Quartic2D => (12.0 * QUARTIC_COEFF * p[0] * p[0]).max(2.0),
            HamiltonianKind::Custom(_) => {
                let (lo, hi) = eigen_range(&self.hessian_unchecked(p), self.dim);
                lo.abs().max(hi.abs())
            }
        }
    }
}

/// Smallest and largest eigenvalue of a symmetric row-major matrix.
fn eigen_range(m: &[f64], d: usize) -> (f64, f64) {
    if d == 1 {
        return (m[0], m[0]);
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, m));
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// The Legendre conjugate L(q) = max_p {⟨p,q⟩ − H(p)} of a model.
#[derive(Clone, Debug)]
pub struct LagrangianView {
    model: HamiltonianModel,
    /// Absolute tolerance on L values.
    pub tol: f64,
    /// Coarse scan points per axis over the p-ball.
    pub scan_points: usize,
    /// Projected gradient ascent iterations after the scan.
    pub ascent_iters: usize,
    numeric_only: bool,
}

impl LagrangianView {
    pub fn new(model: HamiltonianModel) -> Self {
        Self { model, tol: 1e-8, scan_points: 33, ascent_iters: 40, numeric_only: false }
    }

    /// A view that ignores closed forms and always maximizes numerically.
    pub fn numeric(model: HamiltonianModel) -> Self {
        Self { numeric_only: true, ..Self::new(model) }
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn has_closed_form(&self) -> bool {
        !self.numeric_only
            && match &self.model.kind {
                HamiltonianKind::Custom(c) => c.conjugate.is_some(),
                _ => true,
            }
    }

    /// L(q).
    pub fn value(&self, q: &[f64]) -> Result<f64> {
        check_dim(self.model.dim, q.len())?;
        if let Some(v) = self.closed_form_value(q) {
            return Ok(v);
        }
        Ok(self.numeric_conjugate(q)?.0)
    }

    /// DL(q), the maximizer of p ↦ ⟨p,q⟩ − H(p).
    pub fn grad(&self, q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_grad(q)?.1)
    }

    pub fn value_grad(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.model.dim, q.len())?;
        if let Some(v) = self.closed_form_value(q) {
            let mut g = vec![0.0; q.len()];
            self.closed_form_grad(q, &mut g);
            return Ok((v, g));
        }
        self.numeric_conjugate(q)
    }

    /// Numeric conjugate with automatic enlargement of the p-ball.
    pub fn numeric_conjugate(&self, q: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.model.dim, q.len())?;
        let mut radius = self.search_radius(q);
        let mut last = None;
        for _ in 0..12 {
            match self.legendre_in_ball(q, radius) {
                Err(e @ Error::RadiusTooSmall { .. }) => {
                    last = Some(e);
                    radius *= 2.0;
                }
                other => return other,
            }
        }
        Err(last.expect("loop ran at least once"))
    }

    /// Radius at which |DH| first exceeds 2|q| along sampled rays, doubled.
    pub fn search_radius(&self, q: &[f64]) -> f64 {
        let target = (2.0 * norm(q)).max(1e-12);
        let mut grad = vec![0.0; self.model.dim];
        let mut radius = 0.0f64;
        for dir in sample_directions(self.model.dim, 16) {
            let mut r = 1e-6;
            for _ in 0..200 {
                let p: Vec<f64> = dir.iter().map(|e| e * r).collect();
                self.model.grad_into(&p, &mut grad);
                if norm(&grad) > target {
                    break;
                }
                r *= 2.0;
            }
            radius = radius.max(r);
        }
        2.0 * radius
    }

    /// Maximizes ⟨p,q⟩ − H(p) over |p| ≤ radius: coarse scan then projected ascent.
    pub fn legendre_in_ball(&self, q: &[f64], radius: f64) -> Result<(f64, Vec<f64>)> {
        check_dim(self.model.dim, q.len())?;
        let d = self.model.dim;
        let objective = |p: &[f64]| dot(p, q) - self.model.value_unchecked(p);

        // Keep the scan affordable in higher dimension.
        let mut n = self.scan_points.max(3);
        while (n as f64).powi(d as i32) > 2.0e5 && n > 5 {
            n -= 2;
        }
        let step = 2.0 * radius / (n - 1) as f64;
        let mut best_p = vec![0.0; d];
        let mut best = f64::NEG_INFINITY;
        let mut idx = vec![0usize; d];
        let mut p = vec![0.0; d];
        loop {
            for i in 0..d {
                p[i] = -radius + step * idx[i] as f64;
            }
            if norm(&p) <= radius {
                let v = objective(&p);
                if v > best {
                    best = v;
                    best_p.copy_from_slice(&p);
                }
            }
            if !advance(&mut idx, n) {
                break;
            }
        }

        let mut grad = vec![0.0; d];
        let mut alpha = 1.0;
        let mut trial = vec![0.0; d];
        for _ in 0..self.ascent_iters {
            self.model.grad_into(&best_p, &mut grad);
            for (g, qi) in grad.iter_mut().zip(q) {
                *g = qi - *g;
            }
            if norm(&grad) == 0.0 {
                break;
            }
            let mut accepted = false;
            for _ in 0..80 {
                for i in 0..d {
                    trial[i] = best_p[i] + alpha * grad[i];
                }
                project_to_ball(&mut trial, radius);
                let gain: f64 = trial.iter().zip(&best_p).zip(&grad).map(|((t, b), g)| (t - b) * g).sum();
                let v = objective(&trial);
                if v >= best + 1e-4 * gain && v >= best {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
            let moved = trial.iter().zip(&best_p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            best = objective(&trial);
            best_p.copy_from_slice(&trial);
            alpha *= 2.0;
            if moved < 1e-16 * radius.max(1.0) {
                break;
            }
        }

        if norm(&best_p) >= radius * (1.0 - 1e-6) {
            return Err(Error::RadiusTooSmall { radius, q: q.to_vec() });
        }
        Ok((best, best_p))
    }

    pub(crate) fn closed_form_value(&self, q: &[f64]) -> Option<f64> {
        if self.numeric_only {
            return None;
        }
        match &self.model.kind {
            HamiltonianKind::PowerNorm { k } => {
                if *k == 1 {
                    return Some(0.25 * norm_sq(q));
                }
                let rho = norm(q);
                let k = *k as f64;
                let r = (rho / (2.0 * k)).powf(1.0 / (2.0 * k - 1.0));
                Some(r * rho * (1.0 - 1.0 / (2.0 * k)))
            }
            HamiltonianKind::Quartic2D => Some(q[0].abs().powf(4.0 / 3.0) + 0.25 * q[1] * q[1]),
            HamiltonianKind::Custom(c) => c.conjugate.as_ref().map(|conj| (conj.value)(q)),
        }
    }

    fn closed_form_grad(&self, q: &[f64], out: &mut [f64]) {
        match &self.model.kind {
            HamiltonianKind::PowerNorm { k } => {
                let rho = norm(q);
                let scale = if *k == 1 {
                    0.5
                } else if rho == 0.0 {
                    0.0
                } else {
                    let k = *k as f64;
                    (rho / (2.0 * k)).powf(1.0 / (2.0 * k - 1.0)) / rho
                };
                for (o, qi) in out.iter_mut().zip(q) {
                    *o = scale * qi;
                }
            }
            HamiltonianKind::Quartic2D => {
                out[0] = 4.0 / 3.0 * q[0].signum() * q[0].abs().cbrt();
                out[1] = 0.5 * q[1];
            }
            HamiltonianKind::Custom(c) => {
                if let Some(conj) = &c.conjugate {
                    (conj.grad)(q, out)
                }
            }
        }
    }
}

/// A nondecreasing table s ↦ v(s) with linear interpolation and inversion.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusTable {
    pub s: Vec<f64>,
    pub values: Vec<f64>,
}

impl ModulusTable {
    /// Builds a table and replaces values by their running maximum.
    pub fn monotone(s: Vec<f64>, mut values: Vec<f64>) -> Self {
        for i in 1..values.len() {
            if values[i] < values[i - 1] {
                values[i] = values[i - 1];
            }
        }
        Self { s, values }
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let (lo, hi) = (self.s[0], *self.s.last().unwrap());
        if !(lo..=hi).contains(&s) {
            return Err(Error::Range { value: s, lo, hi });
        }
        let j = self.s.partition_point(|&x| x < s).max(1);
        let (s0, s1) = (self.s[j - 1], self.s[j]);
        let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        Ok(self.values[j - 1] + w * (self.values[j] - self.values[j - 1]))
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        let (lo, hi) = (self.values[0], self.max_value());
        if !(y >= lo && y <= hi * (1.0 + 1e-12)) {
            return Err(Error::Range { value: y, lo, hi });
        }
        let y = y.min(hi);
        let j = self.values.partition_point(|&v| v < y);
        if j == 0 {
            return Ok(self.s[0]);
        }
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        let w = if v1 > v0 { (y - v0) / (v1 - v0) } else { 1.0 };
        Ok(self.s[j - 1] + w * (self.s[j] - self.s[j - 1]))
    }
}

/// Convexity constants of a model: λ_R, Λ_M, γ_M and the moduli Ψ_M, Φ_M.
#[derive(Clone, Debug)]
pub struct ConvexityModuli {
    view: LagrangianView,
    /// Sample points per unit length per axis.
    pub sample_density: f64,
    /// Cap on sample points per axis for pair scans.
    pub max_axis_samples: usize,
    /// Number of directions sampled in two dimensions.
    pub directions: usize,
}

impl ConvexityModuli {
    pub fn new(model: HamiltonianModel) -> Self {
        Self::from_view(LagrangianView::new(model))
    }

    pub fn from_view(view: LagrangianView) -> Self {
        Self { view, sample_density: 64.0, max_axis_samples: 128, directions: 64 }
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.sample_density = density;
        self
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.view.model
    }

    pub fn view(&self) -> &LagrangianView {
        &self.view
    }

    fn pitch(&self, radius: f64) -> f64 {
        (1.0 / self.sample_density).max(2.0 * radius / self.max_axis_samples as f64).min(radius / 8.0)
    }

    /// Sampled inf over pairs in the closed R-ball of the cosine between DH(p)−DH(q) and p−q.
    pub fn lambda_r(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::Input(format!("lambda_r needs R > 0, got {radius}")));
        }
        let d = self.model().dim;
        let points = ball_lattice(d, radius, self.pitch(radius));
        let n = points.len() / d;
        let mut grads = vec![0.0; points.len()];
        for i in 0..n {
            self.model().grad_into(&points[i * d..(i + 1) * d], &mut grads[i * d..(i + 1) * d]);
        }
        let mut best = f64::INFINITY;
        for i in 0..n {
            let (pi, gi) = (&points[i * d..(i + 1) * d], &grads[i * d..(i + 1) * d]);
            for j in (i + 1)..n {
                let (pj, gj) = (&points[j * d..(j + 1) * d], &grads[j * d..(j + 1) * d]);
                let (mut dg2, mut dp2, mut cross) = (0.0, 0.0, 0.0);
                for k in 0..d {
                    let dg = gi[k] - gj[k];
                    let dp = pi[k] - pj[k];
                    dg2 += dg * dg;
                    dp2 += dp * dp;
                    cross += dg * dp;
                }
                if dg2 < GRADIENT_TIE_FLOOR * GRADIENT_TIE_FLOOR {
                    continue;
                }
                let c = cross / (dg2 * dp2).sqrt();
                if c < best {
                    best = c;
                }
            }
        }
        if best.is_infinite() {
            return Err(Error::Degenerate(format!("every sampled pair in the {radius}-ball has tied gradients")));
        }
        Ok(best.min(1.0))
    }

    /// Minimum over the sampled R-ball of λ_min(D²H)/λ_max(D²H), skipping vanishing Hessians.
    ///
    /// A zero ratio at a point with nonzero Hessian forces λ_R = 0, so this detects
    /// violations of uniform directional convexity that finite pair sampling only
    /// approaches slowly.
    pub fn hessian_ratio(&self, radius: f64) -> f64 {
        let d = self.model().dim;
        let points = ball_lattice(d, radius, self.pitch(radius));
        let mut ratio = 1.0f64;
        for p in points.chunks(d) {
            let (lo, hi) = eigen_range(&self.model().hessian_unchecked(p), d);
            if hi > 1e-12 {
                ratio = ratio.min(lo / hi);
            }
        }
        ratio
    }

    /// Λ_M = max{|q| : L(q) ≤ M|q|}, by bisection along sampled directions.
    pub fn max_speed(&self, m: f64) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::Input(format!("Lambda_M needs M > 0, got {m}")));
        }
        let d = self.model().dim;
        let mut best = 0.0f64;
        let mut q = vec![0.0; d];
        for dir in sample_directions(d, self.directions) {
            let inside = |r: f64, q: &mut Vec<f64>| -> Result<bool> {
                for (qi, e) in q.iter_mut().zip(&dir) {
                    *qi = r * e;
                }
                Ok(self.view.value(q)? <= m * r)
            };
            let mut hi = 1.0;
            let mut grew = 0;
            while inside(hi, &mut q)? {
                hi *= 2.0;
                grew += 1;
                if grew > 200 {
                    return Err(Error::Degenerate("L(q) <= M|q| on an unbounded ray".into()));
                }
            }
            let mut lo = 0.0;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if inside(mid, &mut q)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            best = best.max(lo);
        }
        Ok(best)
    }

    /// Sampled max of |DL| over the closed ball of the given radius.
    pub fn max_conjugate_grad(&self, radius: f64) -> Result<f64> {
        let d = self.model().dim;
        let mut best = 0.0f64;
        let mut q = vec![0.0; d];
        for dir in sample_directions(d, self.directions) {
            for i in 1..=32 {
                let r = radius * i as f64 / 32.0;
                for (qi, e) in q.iter_mut().zip(&dir) {
                    *qi = r * e;
                }
                best = best.max(norm(&self.view.grad(&q)?));
            }
        }
        Ok(best)
    }

    /// Sampled max of L over the sphere of the given radius (L is convex, so this is the ball max).
    pub fn max_conjugate(&self, radius: f64) -> Result<f64> {
        let d = self.model().dim;
        let mut best = 0.0f64;
        let mut q = vec![0.0; d];
        for dir in sample_directions(d, self.directions) {
            for (qi, e) in q.iter_mut().zip(&dir) {
                *qi = radius * e;
            }
            best = best.max(self.view.value(&q)?);
        }
        Ok(best)
    }

    /// Radius max_{|q|≤Λ_M}|DL(q)| at which γ_M evaluates λ.
    pub fn gamma_radius(&self, m: f64) -> Result<f64> {
        self.max_conjugate_grad(self.max_speed(m)?)
    }

    /// γ_M = λ_R at R = max_{|q|≤Λ_M}|DL(q)|.
    pub fn gamma_m(&self, m: f64) -> Result<f64> {
        self.lambda_r(self.gamma_radius(m)?)
    }

    /// Ψ_M(s) = s·min{|DH(p)−DH(q)|/|p−q| : p,q ∈ B̄(0,M), |p−q| ≥ s}.
    pub fn psi(&self, m: f64, s: f64) -> Result<f64> {
        check_modulus_args(m, s)?;
        match self.closed_form_psi(m, s) {
            Some(v) => Ok(v),
            None => self.sampled_psi_table(m)?.eval(s),
        }
    }

    /// Φ_M(s) = s·min_{p∈B̄(0,M−s/2)} max_{q∈B̄(p,s/2)} ‖D²H(q)‖.
    pub fn phi(&self, m: f64, s: f64) -> Result<f64> {
        check_modulus_args(m, s)?;
        match self.closed_form_phi(m, s) {
            Some(v) => Ok(v),
            None => self.sampled_phi_table(m)?.eval(s),
        }
    }

    pub fn psi_table(&self, m: f64) -> Result<ModulusTable> {
        if self.closed_form_psi(m, m).is_some() {
            Ok(closed_form_table(m, |s| self.closed_form_psi(m, s).unwrap()))
        } else {
            self.sampled_psi_table(m)
        }
    }

    pub fn phi_table(&self, m: f64) -> Result<ModulusTable> {
        if self.closed_form_phi(m, m).is_some() {
            Ok(closed_form_table(m, |s| self.closed_form_phi(m, s).unwrap()))
        } else {
            self.sampled_phi_table(m)
        }
    }

    pub fn psi_inverse(&self, m: f64, y: f64) -> Result<f64> {
        self.psi_table(m)?.inverse(y)
    }

    pub fn phi_inverse(&self, m: f64, y: f64) -> Result<f64> {
        self.phi_table(m)?.inverse(y)
    }

    fn closed_form_psi(&self, m: f64, s: f64) -> Option<f64> {
        match self.model().kind {
            HamiltonianKind::PowerNorm { k } => Some(s * 2.0 * k as f64 * (0.5 * s).powi(2 * k as i32 - 2)),
            // Valid while the p₁-direction pairs stay the minimizers.
            HamiltonianKind::Quartic2D if m <= 3.0 => Some(s * (QUARTIC_COEFF * s * s).min(2.0)),
            _ => None,
        }
    }

    fn closed_form_phi(&self, _m: f64, s: f64) -> Option<f64> {
        match self.model().kind {
            HamiltonianKind::PowerNorm { k } => {
                let k = k as f64;
                Some(s * 2.0 * k * (2.0 * k - 1.0) * (0.5 * s).powf(2.0 * k - 2.0))
            }
            HamiltonianKind::Quartic2D => Some(s * (3.0 * QUARTIC_COEFF * s * s).max(2.0)),
            HamiltonianKind::Custom(_) => None,
        }
    }

    /// Ψ_M from a pair scan on the sample lattice, binned by pair distance.
    pub fn sampled_psi_table(&self, m: f64) -> Result<ModulusTable> {
        check_modulus_args(m, m)?;
        let d = self.model().dim;
        let points = ball_lattice(d, m, self.pitch(m));
        let n = points.len() / d;
        let mut grads = vec![0.0; points.len()];
        for i in 0..n {
            self.model().grad_into(&points[i * d..(i + 1) * d], &mut grads[i * d..(i + 1) * d]);
        }
        let bins = 64usize;
        let width = m / bins as f64;
        let mut bin_min = vec![f64::INFINITY; bins + 1];
        for i in 0..n {
            for j in (i + 1)..n {
                let (mut dg2, mut dp2) = (0.0, 0.0);
                for k in 0..d {
                    let dg = grads[i * d + k] - grads[j * d + k];
                    let dp = points[i * d + k] - points[j * d + k];
                    dg2 += dg * dg;
                    dp2 += dp * dp;
                }
                let dist = dp2.sqrt();
                let b = ((dist / width).floor() as usize).min(bins);
                let quotient = (dg2 / dp2).sqrt();
                if quotient < bin_min[b] {
                    bin_min[b] = quotient;
                }
            }
        }
        for b in (0..bins).rev() {
            bin_min[b] = bin_min[b].min(bin_min[b + 1]);
        }
        let mut s = vec![0.0];
        let mut v = vec![0.0];
        for b in 1..=bins {
            let sb = width * b as f64;
            if bin_min[b].is_finite() {
                s.push(sb);
                v.push(sb * bin_min[b]);
            }
        }
        if s.len() < 2 {
            return Err(Error::Degenerate("pair scan produced no usable distances".into()));
        }
        Ok(ModulusTable::monotone(s, v))
    }

    /// Φ_M from Hessian norms on the sample lattice.
    pub fn sampled_phi_table(&self, m: f64) -> Result<ModulusTable> {
        check_modulus_args(m, m)?;
        let d = self.model().dim;
        // The windowed max is quadratic in the point count, so use a coarser pitch.
        let pitch = (1.0 / self.sample_density).max(2.0 * m / 64.0);
        let points = ball_lattice(d, m, pitch);
        let n = points.len() / d;
        let norms: Vec<f64> = points.chunks(d).map(|p| self.model().hessian_norm_unchecked(p)).collect();
        let steps = 32usize;
        let mut s = vec![0.0];
        let mut v = vec![0.0];
        for b in 1..=steps {
            let sb = m * b as f64 / steps as f64;
            let mut best = f64::INFINITY;
            for i in 0..n {
                let p = &points[i * d..(i + 1) * d];
                if norm(p) > m - 0.5 * sb + 1e-12 {
                    continue;
                }
                let mut local = 0.0f64;
                for j in 0..n {
                    let q = &points[j * d..(j + 1) * d];
                    if dist(p, q) <= 0.5 * sb + 1e-12 {
                        local = local.max(norms[j]);
                    }
                }
                best = best.min(local);
            }
            if best.is_finite() {
                s.push(sb);
                v.push(sb * best);
            }
        }
        Ok(ModulusTable::monotone(s, v))
    }
}

fn check_modulus_args(m: f64, s: f64) -> Result<()> {
    if !(m > 0.0) {
        return Err(Error::Input(format!("modulus needs M > 0, got {m}")));
    }
    if !(s > 0.0 && s <= m) {
        return Err(Error::Input(format!("modulus argument s = {s} outside (0, {m}]")));
    }
    Ok(())
}

/// Geometric s-grid over (0, M] with s = 0 prepended, fine enough for inversion near 0.
fn closed_form_table(m: f64, f: impl Fn(f64) -> f64) -> ModulusTable {
    let n = 4097;
    let mut s = vec![0.0];
    let mut v = vec![0.0];
    for i in 0..n {
        let si = m * 10f64.powf(-12.0 + 12.0 * i as f64 / (n - 1) as f64);
        s.push(si);
        v.push(f(si));
    }
    *s.last_mut().unwrap() = m;
    *v.last_mut().unwrap() = f(m);
    ModulusTable::monotone(s, v)
}

/// Unit directions: ±1 in one dimension, evenly spaced angles in two,
/// axes and cube diagonals above that.
pub fn sample_directions(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut dirs = Vec::new();
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[i] = sign;
                    dirs.push(e);
                }
            }
            let scale = 1.0 / (d as f64).sqrt();
            for mask in 0..(1usize << d) {
                dirs.push((0..d).map(|i| if mask >> i & 1 == 1 { -scale } else { scale }).collect());
            }
            dirs
        }
    }
}

/// Points of pitch·ℤ^d in the closed ball of the given radius, flattened.
pub fn ball_lattice(d: usize, radius: f64, pitch: f64) -> Vec<f64> {
    let n = (radius / pitch).floor() as i64;
    let side = (2 * n + 1) as usize;
    let mut out = Vec::new();
    let mut idx = vec![0usize; d];
    let mut p = vec![0.0; d];
    loop {
        for i in 0..d {
            p[i] = (idx[i] as i64 - n) as f64 * pitch;
        }
        if norm(&p) <= radius * (1.0 + 1e-12) {
            out.extend_from_slice(&p);
        }
        if !advance(&mut idx, side) {
            break;
        }
    }
    out
}

/// Lexicographic odometer over {0..n}^d; returns false after the last index.
pub(crate) fn advance(idx: &mut [usize], n: usize) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < n {
            return true;
        }
        idx[i] = 0;
    }
    false
}

fn project_to_ball(p: &mut [f64], radius: f64) {
    let r = norm(p);
    if r > radius {
        for x in p.iter_mut() {
            *x *= radius / r;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
