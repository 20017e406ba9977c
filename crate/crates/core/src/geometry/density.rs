//! Probability densities on boxes, normalized to unit mass.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::geometry::domain::BoxDomain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityKind {
    Uniform,
    /// Product Gaussian restricted to the box.
    GaussianClipped {
        mean: Vec<f64>,
        sigma: Vec<f64>,
    },
    /// Node values on a regular grid spanning the box, interpolated multilinearly.
    /// `values` is row-major with the last axis fastest.
    Table {
        shape: Vec<usize>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub kind: DensityKind,
    pub domain: BoxDomain,
    /// Multiplier applied to the raw profile; `1 / mass` after normalization.
    pub scale: f64,
}

impl Density {
    /// Builds the density and rescales it to unit mass on its box.
    pub fn new(kind: DensityKind, domain: BoxDomain) -> Result<Self, GeometryError> {
        let mut d = Self::unnormalized(kind, domain)?;
        let mass = d.raw_mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(GeometryError::InvalidInput(format!("density has mass {mass}")));
        }
        d.scale = 1.0 / mass;
        Ok(d)
    }

    /// Builds the raw profile without renormalization (`scale = 1`).
    pub fn unnormalized(kind: DensityKind, domain: BoxDomain) -> Result<Self, GeometryError> {
        let n = domain.dim();
        match &kind {
            DensityKind::Uniform => {}
            DensityKind::GaussianClipped { mean, sigma } => {
                if mean.len() != n || sigma.len() != n {
                    return Err(GeometryError::InvalidInput(
                        "gaussian mean/sigma length must match the box dimension".into(),
                    ));
                }
                if sigma.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                    return Err(GeometryError::InvalidInput("gaussian sigma must be positive".into()));
                }
            }
            DensityKind::Table { shape, values } => {
                if shape.len() != n || shape.iter().any(|&s| s < 2) {
                    return Err(GeometryError::InvalidInput(
                        "table shape needs at least two nodes on every axis".into(),
                    ));
                }
                if values.len() != shape.iter().product::<usize>() {
                    return Err(GeometryError::InvalidInput("table value count does not match shape".into()));
                }
                if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                    return Err(GeometryError::NonpositiveDensity { point: vec![], value: *v });
                }
            }
        }
        Ok(Self { kind, domain, scale: 1.0 })
    }

    /// Multiplies the density by `factor` without renormalizing.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { scale: self.scale * factor, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Chart density at `x`. Formulas extend smoothly past the box so that
    /// finite-difference stencils near the boundary stay well defined.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.scale * self.raw(x)
    }

    pub fn log_value(&self, x: &[f64]) -> f64 {
        self.value(x).ln()
    }

    /// Mass of the unscaled profile over the box, in closed form.
    pub fn raw_mass(&self) -> f64 {
        match &self.kind {
            DensityKind::Uniform => self.domain.volume(),
            DensityKind::GaussianClipped { mean, sigma } => (0..self.dim())
                .map(|i| {
                    let s2 = sigma[i] * std::f64::consts::SQRT_2;
                    let a = (self.domain.lo[i] - mean[i]) / s2;
                    let b = (self.domain.hi[i] - mean[i]) / s2;
                    0.5 * s2 * std::f64::consts::PI.sqrt() * (libm::erf(b) - libm::erf(a))
                })
                .product(),
            DensityKind::Table { shape, values } => {
                // The multilinear interpolant integrates exactly under the tensor trapezoid rule.
                let widths = self.domain.widths();
                let mut total = 0.0;
                for (flat, v) in values.iter().enumerate() {
                    let mut w = 1.0;
                    let mut rem = flat;
                    for axis in (0..shape.len()).rev() {
                        let k = rem % shape[axis];
                        rem /= shape[axis];
                        let hstep = widths[axis] / (shape[axis] - 1) as f64;
                        w *= if k == 0 || k == shape[axis] - 1 { 0.5 * hstep } else { hstep };
                    }
                    total += w * v;
                }
                total
            }
        }
    }

    fn raw(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::GaussianClipped { mean, sigma } => {
                let q: f64 = (0..self.dim())
                    .map(|i| {
                        let t = (x[i] - mean[i]) / sigma[i];
                        t * t
                    })
                    .sum();
                (-0.5 * q).exp()
            }
            DensityKind::Table { shape, values } => {
                let n = shape.len();
                let mut base = vec![0usize; n];
                let mut frac = vec![0.0; n];
                for axis in 0..n {
                    let cells = (shape[axis] - 1) as f64;
                    let t = (x[axis] - self.domain.lo[axis]) / (self.domain.hi[axis] - self.domain.lo[axis]) * cells;
                    let t = t.clamp(0.0, cells);
                    let k = (t.floor() as usize).min(shape[axis] - 2);
                    base[axis] = k;
                    frac[axis] = t - k as f64;
                }
                let mut total = 0.0;
                for corner in 0..(1usize << n) {
                    let mut w = 1.0;
                    let mut flat = 0;
                    for axis in 0..n {
                        let up = corner >> (n - 1 - axis) & 1;
                        w *= if up == 1 { frac[axis] } else { 1.0 - frac[axis] };
                        flat = flat * shape[axis] + base[axis] + up;
                    }
                    total += w * values[flat];
                }
                total
            }
        }
    }

    /// Fails with `NonpositiveDensity` unless the density is positive at `x`.
    pub fn check_positive(&self, x: &[f64]) -> Result<f64, GeometryError> {
        let v = self.value(x);
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(GeometryError::NonpositiveDensity { point: x.to_vec(), value: v })
        }
    }
}

/// Source density `rho` on `X` and target density `rho_bar` on `Xbar`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPair {
    pub rho: Density,
    pub rho_bar: Density,
}

impl DensityPair {
    pub fn new(rho: Density, rho_bar: Density) -> Self {
        Self { rho, rho_bar }
    }

    pub fn uniform(x: &BoxDomain, xbar: &BoxDomain) -> Self {
        Self {
            rho: Density::new(DensityKind::Uniform, x.clone()).expect("uniform density"),
            rho_bar: Density::new(DensityKind::Uniform, xbar.clone()).expect("uniform density"),
        }
    }

    pub fn swapped(&self) -> Self {
        Self { rho: self.rho_bar.clone(), rho_bar: self.rho.clone() }
    }
}
