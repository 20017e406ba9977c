use nalgebra::DMatrix;
use schemars::{schema_for, JsonSchema};
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{ConfigError, Error};
use crate::estimate::cutoff::{make_cutoff, Cutoff};
use crate::geometry::cost::{CostKind, CostModel, DerivativeMode, Monomial};
use crate::geometry::density::{Density, DensityKind, DensityPair};
use crate::geometry::domain::BoxDomain;
use crate::geometry::jet::DEFAULT_STENCIL_H;
use crate::geometry::mtw::KappaOptions;
use crate::geometry::Geometry;
use crate::graph::identity::{Directions, IdentityOptions};
use crate::transport::sinkhorn::SinkhornOptions;

/// Environment variable that replaces the scenario seed.
pub const SEED_ENV: &str = "OTGEO_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Bilinear,
    Quadratic,
    LogDistance,
    SqrtOnePlus,
    CustomTable { terms: Vec<Monomial> },
}

impl CostSpec {
    pub fn kind(&self) -> CostKind {
        match self {
            CostSpec::Bilinear => CostKind::Bilinear,
            CostSpec::Quadratic => CostKind::Quadratic,
            CostSpec::LogDistance => CostKind::LogDistance,
            CostSpec::SqrtOnePlus => CostKind::SqrtOnePlus,
            CostSpec::CustomTable { terms } => CostKind::CustomTable(terms.clone()),
        }
    }
}

/// One side of the transport problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SideSpec {
    /// `[lo, hi]` per axis.
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default = "uniform_density")]
    pub density: DensityKind,
}

fn uniform_density() -> DensityKind {
    DensityKind::Uniform
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DerivativeSpec {
    #[default]
    Analytic,
    Fd {
        base: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct StencilSpec {
    /// Step of the ambient curvature stencils.
    pub h: f64,
}

impl Default for StencilSpec {
    fn default() -> Self {
        Self { h: DEFAULT_STENCIL_H }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Exact,
    Sinkhorn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: SolverMethod,
    /// Final epsilon is `alpha * step^2 * |det c_{x xbar}|^{1/n}` unless a schedule is given.
    pub alpha: f64,
    pub eps_schedule: Option<Vec<f64>>,
    pub tol: f64,
    pub stage_tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SinkhornOptions::default();
        Self {
            method: SolverMethod::Exact,
            alpha: 1.0,
            eps_schedule: None,
            tol: s.tol,
            stage_tol: s.stage_tol,
            max_iters: s.max_iters,
        }
    }
}

impl SolverSpec {
    pub fn sinkhorn_options(&self) -> SinkhornOptions {
        SinkhornOptions { tol: self.tol, stage_tol: self.stage_tol, max_iters: self.max_iters }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct KappaSpec {
    pub grid: usize,
    pub rotations: usize,
}

impl Default for KappaSpec {
    fn default() -> Self {
        let k = KappaOptions::default();
        Self { grid: k.grid, rotations: k.rotations }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct CutoffSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub report: Option<String>,
    /// Solution file per grid; `{res}` is replaced by the resolution.
    pub solution: Option<String>,
    /// Field dump CSV.
    pub dump: Option<String>,
    /// Samples per axis of the product grid for the field dump.
    pub dump_grid: usize,
    /// Record wall-clock stage timings; off by default so reports stay byte-stable.
    pub timings: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { report: None, solution: None, dump: None, dump_grid: 4, timings: false }
    }
}

/// A complete pipeline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub cost: CostSpec,
    pub source: SideSpec,
    pub target: SideSpec,
    /// Reference metric on the source, row-major; identity when absent.
    #[serde(default)]
    pub reference_metric: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub derivatives: DerivativeSpec,
    #[serde(default)]
    pub stencil: StencilSpec,
    /// Grid resolutions per axis, solved in order.
    pub grids: Vec<usize>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub kappa: KappaSpec,
    #[serde(default)]
    pub cutoff: Option<CutoffSpec>,
    /// Source-grid node indices for the graph stage; every node when absent.
    #[serde(default)]
    pub probes: Option<Vec<usize>>,
    #[serde(default)]
    pub identity: IdentityOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(ConfigError::Invalid(msg.into()))
}

/// JSON schema of the scenario file.
pub fn scenario_schema() -> serde_json::Value {
    serde_json::to_value(schema_for!(Scenario)).expect("schema serializes")
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(ConfigError::Parse(e.to_string())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &str) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies `OTGEO_SEED` when it is set.
    pub fn with_env_seed(mut self) -> Result<Self, Error> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed =
                v.trim().parse().map_err(|_| invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.source.bounds.len()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let n = self.dim();
        if n == 0 {
            return Err(invalid("source box has no axes"));
        }
        if self.target.bounds.len() != n {
            return Err(invalid(format!("source box has {n} axes, target box {}", self.target.bounds.len())));
        }
        for side in [&self.source, &self.target] {
            if side.bounds.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
                return Err(invalid("every box axis needs finite lo < hi"));
            }
        }
        if self.grids.is_empty() {
            return Err(invalid("at least one grid resolution is required"));
        }
        if let Some(r) = self.grids.iter().find(|&&r| r < 2) {
            return Err(invalid(format!("grid resolution {r} is below 2")));
        }
        if !(self.stencil.h > 0.0 && self.stencil.h.is_finite()) {
            return Err(invalid("stencil.h must be positive"));
        }
        if let DerivativeSpec::Fd { base } = self.derivatives {
            if !(base > 0.0 && base.is_finite()) {
                return Err(invalid("derivatives.base must be positive"));
            }
        }
        let s = &self.solver;
        if !(s.alpha > 0.0 && s.tol > 0.0 && s.stage_tol > 0.0 && s.max_iters > 0) {
            return Err(invalid("solver alpha, tolerances and max_iters must be positive"));
        }
        if let Some(sched) = &s.eps_schedule {
            if sched.is_empty() || sched.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(invalid("eps_schedule entries must be positive"));
            }
            if sched.windows(2).any(|w| w[1] > w[0]) {
                return Err(invalid("eps_schedule must be non-increasing"));
            }
        }
        if self.output.dump_grid < 1 {
            return Err(invalid("output.dump_grid must be at least 1"));
        }
        if self.kappa.grid < 1 {
            return Err(invalid("kappa.grid must be at least 1"));
        }
        if let Some(c) = &self.cutoff {
            if c.center.len() != n {
                return Err(invalid("cutoff center has the wrong dimension"));
            }
        }
        if let Some(h) = &self.reference_metric {
            if h.len() != n || h.iter().any(|r| r.len() != n) {
                return Err(invalid("reference_metric must be n x n"));
            }
        }
        if !directions_fit(&self.identity, n) {
            return Err(invalid("identity directions do not match the dimension"));
        }
        self.build_geometry()?;
        Ok(())
    }

    pub fn source_box(&self) -> Result<BoxDomain, Error> {
        BoxDomain::from_pairs(&self.source.bounds).map_err(|e| invalid(e.to_string()))
    }

    pub fn target_box(&self) -> Result<BoxDomain, Error> {
        BoxDomain::from_pairs(&self.target.bounds).map_err(|e| invalid(e.to_string()))
    }

    pub fn build_geometry(&self) -> Result<Geometry, Error> {
        let (x, xb) = (self.source_box()?, self.target_box()?);
        let mut model = CostModel::new(self.cost.kind(), x.clone(), xb.clone()).map_err(|e| invalid(e.to_string()))?;
        if let Some(rows) = &self.reference_metric {
            let n = rows.len();
            let h = DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied());
            model = model.with_h(h).map_err(|e| invalid(e.to_string()))?;
        }
        if let DerivativeSpec::Fd { base } = self.derivatives {
            model = model.with_mode(DerivativeMode::FiniteDifference { base });
        }
        let rho = Density::new(self.source.density.clone(), x).map_err(|e| invalid(format!("source density: {e}")))?;
        let rho_bar =
            Density::new(self.target.density.clone(), xb).map_err(|e| invalid(format!("target density: {e}")))?;
        Ok(Geometry::new(model, DensityPair::new(rho, rho_bar)).with_stencil(self.stencil.h))
    }

    /// The declared cutoff, or the largest ball at the source center shrunk by 0.8.
    pub fn build_cutoff(&self) -> Result<Cutoff, Error> {
        self.cutoff_from(self.cutoff.as_ref())
    }

    /// Cutoff from an explicit spec, falling back to the default ball.
    pub fn cutoff_from(&self, spec: Option<&CutoffSpec>) -> Result<Cutoff, Error> {
        let x = self.source_box()?;
        let (center, radius) = match spec {
            Some(c) => (c.center.clone(), c.radius),
            None => {
                let c = x.center();
                let r = 0.8 * x.inradius_at(&c);
                (c, r)
            }
        };
        make_cutoff(center, radius, &x).map_err(|e| invalid(e.to_string()))
    }

    pub fn kappa_options(&self) -> KappaOptions {
        KappaOptions {
            grid: self.kappa.grid,
            stencil_h: self.stencil.h,
            rotations: self.kappa.rotations,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical scenario text.
    pub fn config_hash(&self) -> String {
        canonical::sha256(&serde_json::to_value(self).expect("scenario serializes"))
    }
}

fn directions_fit(opts: &IdentityOptions, n: usize) -> bool {
    match &opts.directions {
        Directions::TopEigen => true,
        Directions::Frame(k, l) => *k < n && *l < n,
        Directions::Chart(x, y) => x.len() == n && y.len() == n,
    }
}
