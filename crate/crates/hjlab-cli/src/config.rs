//! The single JSON document that drives every subcommand.

use std::path::Path;

use hjlab::counterexample::LagrangianVariant;
use hjlab::datum::{Cone, Constant, GaussianBump, Linear, MinMaxAffine, PiecewiseLinear};
use hjlab::entropy::Metric;
use hjlab::{Domain, GridSpec, HamiltonianModel, InitialDatum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianConfig>,
    #[serde(default)]
    pub datum: Option<DatumConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub bv_check: Option<BvCheckConfig>,
    #[serde(default)]
    pub entropy: Option<EntropyConfig>,
    #[serde(default)]
    pub counterexample: Option<CounterexampleConfig>,
    #[serde(default)]
    pub legendre: Option<LegendreConfig>,
    #[serde(default)]
    pub moduli: Option<ModuliConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    PowerNorm { k: u32, dim: usize },
    Quartic2d,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumConfig {
    Constant { c: f64 },
    Linear { a: Vec<f64>, #[serde(default)] c: f64 },
    Cone { slope: f64 },
    PiecewiseLinear { pieces: usize, window: f64, m: f64, lipschitz: f64 },
    MinMaxAffine { groups: usize, pieces: usize, m: f64, lipschitz: f64 },
    GaussianBump { slope: Vec<f64>, amplitude: f64, width: f64 },
}

/// Cube [lo, hi]^d with `points` nodes per axis.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_grid_points")]
    pub max_grid_points: usize,
    #[serde(default = "default_sample")]
    pub max_sample: usize,
}

fn default_grid_points() -> usize {
    4_000_000
}

fn default_sample() -> usize {
    hjlab::entropy::MAX_SAMPLE
}

impl Default for Budget {
    fn default() -> Self {
        Self { max_grid_points: default_grid_points(), max_sample: default_sample() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: f64,
    pub hi: f64,
}

/// Batch of random Lipschitz data, or the configured datum alone when one is given.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvCheckConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "one")]
    pub lipschitz: f64,
    #[serde(default = "half")]
    pub m: f64,
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    #[serde(default = "unit_box")]
    pub domain: BoxConfig,
    /// Coarsest spacing of the study; defaults to this grid's spacing.
    #[serde(default)]
    pub h_ref: Option<f64>,
}

fn default_count() -> usize {
    50
}

fn half() -> f64 {
    0.5
}

fn default_pieces() -> usize {
    6
}

fn unit_box() -> BoxConfig {
    BoxConfig { lo: -1.0, hi: 1.0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyClass {
    SolutionSet,
    Bv,
    SemiconcaveFamily,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub class: EntropyClass,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    pub eps: Vec<f64>,
    /// Half-width R of the cube □_R.
    #[serde(default = "one")]
    pub r: f64,
    /// Bound m on |u₀(0)|.
    #[serde(default = "one")]
    pub m: f64,
    /// Lipschitz bound M on the data.
    #[serde(default = "one")]
    pub lipschitz: f64,
    /// Total-variation bound V of the BV class.
    #[serde(default = "one")]
    pub variation: f64,
    /// Semiconcavity constant K of the packing family.
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "default_entropy_count")]
    pub count: usize,
    #[serde(default = "default_entropy_points")]
    pub points: usize,
    /// Depth below ε_max of the theoretical sweep, as a fraction of ε_max.
    #[serde(default = "default_bound_top")]
    pub bound_top: f64,
    #[serde(default = "two")]
    pub bound_decades: f64,
    #[serde(default = "default_bound_points")]
    pub bound_points: usize,
}

fn default_metric() -> Metric {
    Metric::W11
}

fn default_entropy_count() -> usize {
    200
}

fn default_entropy_points() -> usize {
    101
}

fn default_bound_top() -> f64 {
    1e-3
}

fn two() -> f64 {
    2.0
}

fn default_bound_points() -> usize {
    9
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    #[serde(default = "default_ell")]
    pub ell: f64,
    pub deltas: Vec<f64>,
    #[serde(default = "default_variant")]
    pub variant: LagrangianVariant,
    #[serde(default = "default_per_height")]
    pub per_height: f64,
    #[serde(default = "default_per_width")]
    pub per_width: f64,
}

fn default_ell() -> f64 {
    0.25
}

fn default_variant() -> LagrangianVariant {
    LagrangianVariant::Conjugate
}

fn default_per_height() -> f64 {
    12.0
}

fn default_per_width() -> f64 {
    8.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegendreConfig {
    pub q: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuliConfig {
    pub m: f64,
    pub s: Vec<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the resolved config in its canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model(&self) -> Result<HamiltonianModel, CliError> {
        match self.hamiltonian.as_ref().ok_or_else(|| missing("hamiltonian"))? {
            HamiltonianConfig::PowerNorm { k, dim } => Ok(HamiltonianModel::power_norm(*k, *dim)?),
            HamiltonianConfig::Quartic2d => Ok(HamiltonianModel::quartic2d()),
        }
    }

    pub fn grid_spec(&self, dim: usize) -> Result<GridSpec, CliError> {
        let g = self.grid.as_ref().ok_or_else(|| missing("grid"))?;
        let spec = GridSpec::cube(dim, g.lo, g.hi, g.points)?;
        spec.check_budget(self.budget.max_grid_points)?;
        Ok(spec)
    }

    pub fn build_datum(&self, dim: usize) -> Result<Box<dyn InitialDatum>, CliError> {
        let cfg = self.datum.as_ref().ok_or_else(|| missing("datum"))?;
        datum_from(cfg, dim, self.seed)
    }
}

pub fn datum_from(cfg: &DatumConfig, dim: usize, seed: u64) -> Result<Box<dyn InitialDatum>, CliError> {
    let one_d = |name: &str| {
        if dim == 1 {
            Ok(())
        } else {
            Err(CliError::Config(format!("{name} data are one-dimensional, the model has d = {dim}")))
        }
    };
    Ok(match cfg {
        DatumConfig::Constant { c } => Box::new(Constant { dim, c: *c }),
        DatumConfig::Linear { a, c } => {
            if a.len() != dim {
                return Err(CliError::Config(format!("linear datum has {} coefficients, the model has d = {dim}", a.len())));
            }
            Box::new(Linear { a: a.clone(), c: *c })
        }
        DatumConfig::Cone { slope } => Box::new(Cone { dim, slope: *slope }),
        DatumConfig::PiecewiseLinear { pieces, window, m, lipschitz } => {
            one_d("piecewise_linear")?;
            Box::new(PiecewiseLinear::random(seed, *pieces, *window, *m, *lipschitz))
        }
        DatumConfig::MinMaxAffine { groups, pieces, m, lipschitz } => {
            Box::new(MinMaxAffine::random(seed, dim, *groups, *pieces, *m, *lipschitz))
        }
        DatumConfig::GaussianBump { slope, amplitude, width } => {
            if slope.len() != dim {
                return Err(CliError::Config(format!("bump slope has {} entries, the model has d = {dim}", slope.len())));
            }
            Box::new(GaussianBump { slope: slope.clone(), amplitude: *amplitude, width: *width })
        }
    })
}

impl BoxConfig {
    pub fn domain(&self, dim: usize) -> Domain {
        Domain::cube(dim, self.lo, self.hi)
    }
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("config has no `{section}` section"))
}
