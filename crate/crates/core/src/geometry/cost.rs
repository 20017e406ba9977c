//! Transport costs on a product of boxes, with derivative access up to order four.
//!
//! Indices into a product point `z = (x, xbar)` run over `0..2n`: the first
//! `n` address `x`, the remaining `n` address `xbar`.

use nalgebra::{DMatrix, DVector};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::geometry::domain::BoxDomain;

/// Highest total derivative order the models provide.
pub const MAX_ORDER: usize = 4;

/// One term `coeff * prod_k z_k^{powers_k}` of a polynomial cost table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    /// `-<x, xbar>`
    Bilinear,
    /// `|x - xbar|^2 / 2`
    Quadratic,
    /// `-log |x - xbar|`
    LogDistance,
    /// `sqrt(1 + |x - xbar|^2)`
    SqrtOnePlus,
    /// Polynomial in `(x, xbar)` given by a monomial table.
    CustomTable(Vec<Monomial>),
}

impl CostKind {
    pub fn name(&self) -> &'static str {
        match self {
            CostKind::Bilinear => "bilinear",
            CostKind::Quadratic => "quadratic",
            CostKind::LogDistance => "log_distance",
            CostKind::SqrtOnePlus => "sqrt_one_plus",
            CostKind::CustomTable(_) => "custom_table",
        }
    }

    /// Derivatives `Phi^{(m)}(s)`, `m = 0..=4`, for costs of the form `Phi(|x - xbar|^2)`.
    fn radial_profile(&self, s: f64) -> Option<[f64; MAX_ORDER + 1]> {
        match self {
            CostKind::Quadratic => Some([0.5 * s, 0.5, 0.0, 0.0, 0.0]),
            CostKind::LogDistance => {
                let r = 1.0 / s;
                Some([-0.5 * s.ln(), -0.5 * r, 0.5 * r * r, -r * r * r, 3.0 * r * r * r * r])
            }
            CostKind::SqrtOnePlus => {
                let t = 1.0 + s;
                let q = t.sqrt();
                Some([q, 0.5 / q, -0.25 / (q * t), 0.375 / (q * t * t), -0.9375 / (q * t * t * t)])
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DerivativeMode {
    #[default]
    Analytic,
    /// Tensor-product central differences with step `base * 10^{k/4}` for order `k`,
    /// followed by one Richardson step.
    FiniteDifference { base: f64 },
}

#[derive(Debug, Clone)]
pub struct CostModel {
    pub dim: usize,
    pub domain_x: BoxDomain,
    pub domain_xbar: BoxDomain,
    pub kind: CostKind,
    pub mode: DerivativeMode,
    /// Reference metric on `X`, constant and positive definite.
    pub h: DMatrix<f64>,
    pub a2_tol: f64,
}

impl CostModel {
    pub fn new(kind: CostKind, domain_x: BoxDomain, domain_xbar: BoxDomain) -> Result<Self, GeometryError> {
        let dim = domain_x.dim();
        if domain_xbar.dim() != dim {
            return Err(GeometryError::InvalidInput(format!(
                "source box has dimension {dim}, target box {}",
                domain_xbar.dim()
            )));
        }
        if let CostKind::CustomTable(terms) = &kind {
            if terms.is_empty() {
                return Err(GeometryError::InvalidInput("custom cost table is empty".into()));
            }
            if let Some(t) = terms.iter().find(|t| t.powers.len() != 2 * dim) {
                return Err(GeometryError::InvalidInput(format!(
                    "monomial has {} powers, expected {}",
                    t.powers.len(),
                    2 * dim
                )));
            }
        }
        Ok(Self {
            dim,
            domain_x,
            domain_xbar,
            kind,
            mode: DerivativeMode::Analytic,
            h: DMatrix::identity(dim, dim),
            a2_tol: 1e-10,
        })
    }

    pub fn with_h(mut self, h: DMatrix<f64>) -> Result<Self, GeometryError> {
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(GeometryError::InvalidInput("reference metric has wrong shape".into()));
        }
        if (&h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) || h.clone().cholesky().is_none() {
            return Err(GeometryError::InvalidInput("reference metric h must be symmetric positive definite".into()));
        }
        self.h = h;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_a2_tol(mut self, tol: f64) -> Self {
        self.a2_tol = tol;
        self
    }

    /// The cost with its arguments exchanged, `(xbar, x) -> c(x, xbar)`.
    ///
    /// The reference metric is reset to the identity; callers choose the
    /// metric for the exchanged problem.
    pub fn swapped(&self) -> CostModel {
        let n = self.dim;
        let kind = match &self.kind {
            CostKind::CustomTable(terms) => CostKind::CustomTable(
                terms
                    .iter()
                    .map(|t| {
                        let mut powers = t.powers[n..].to_vec();
                        powers.extend_from_slice(&t.powers[..n]);
                        Monomial { coeff: t.coeff, powers }
                    })
                    .collect(),
            ),
            other => other.clone(),
        };
        CostModel {
            dim: n,
            domain_x: self.domain_xbar.clone(),
            domain_xbar: self.domain_x.clone(),
            kind,
            mode: self.mode,
            h: DMatrix::identity(n, n),
            a2_tol: self.a2_tol,
        }
    }

    pub fn is_quadratic_like(&self) -> bool {
        matches!(self.kind, CostKind::Bilinear | CostKind::Quadratic)
    }

    /// Verifies dimensions, box membership, and that the cost is finite at `(x, xbar)`.
    pub fn check_point(&self, x: &[f64], xbar: &[f64]) -> Result<(), GeometryError> {
        let outside = || {
            let mut point = x.to_vec();
            point.extend_from_slice(xbar);
            GeometryError::Domain { point }
        };
        if x.len() != self.dim || xbar.len() != self.dim {
            return Err(outside());
        }
        if !self.domain_x.contains(x) || !self.domain_xbar.contains(xbar) {
            return Err(outside());
        }
        if !self.value(x, xbar).is_finite() {
            return Err(outside());
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64], xbar: &[f64]) -> f64 {
        match &self.kind {
            CostKind::Bilinear => -x.iter().zip(xbar).map(|(a, b)| a * b).sum::<f64>(),
            CostKind::CustomTable(terms) => {
                let z: Vec<f64> = x.iter().chain(xbar).copied().collect();
                terms
                    .iter()
                    .map(|t| t.coeff * t.powers.iter().zip(&z).map(|(&p, v)| v.powi(p as i32)).product::<f64>())
                    .sum()
            }
            kind => {
                let s = sq_dist(x, xbar);
                kind.radial_profile(s).map_or(f64::NAN, |p| p[0])
            }
        }
    }

    /// Partial derivative of `c` along the product-chart indices in `idx`.
    ///
    /// # Panics
    /// If `idx` has more than [`MAX_ORDER`] entries or an index is `>= 2n`.
    pub fn partial(&self, x: &[f64], xbar: &[f64], idx: &[usize]) -> f64 {
        assert!(idx.len() <= MAX_ORDER, "derivative order {} exceeds {MAX_ORDER}", idx.len());
        assert!(idx.iter().all(|&i| i < 2 * self.dim), "derivative index out of range");
        match self.mode {
            DerivativeMode::Analytic => self.partial_analytic(x, xbar, idx),
            DerivativeMode::FiniteDifference { base } => self.partial_fd(x, xbar, idx, base),
        }
    }

    fn partial_analytic(&self, x: &[f64], xbar: &[f64], idx: &[usize]) -> f64 {
        let n = self.dim;
        if idx.is_empty() {
            return self.value(x, xbar);
        }
        match &self.kind {
            CostKind::Bilinear => match idx {
                [i] if *i < n => -xbar[*i],
                [i] => -x[*i - n],
                [i, j] if (*i < n) != (*j < n) && i % n == j % n => -1.0,
                _ => 0.0,
            },
            CostKind::CustomTable(terms) => {
                let z: Vec<f64> = x.iter().chain(xbar).copied().collect();
                let mut mult = vec![0u32; 2 * n];
                for &i in idx {
                    mult[i] += 1;
                }
                terms
                    .iter()
                    .map(|t| {
                        let mut v = t.coeff;
                        for k in 0..2 * n {
                            let (p, m) = (t.powers[k], mult[k]);
                            if m > p {
                                return 0.0;
                            }
                            v *= falling_factorial(p, m) * z[k].powi((p - m) as i32);
                        }
                        v
                    })
                    .sum()
            }
            kind => {
                let d: Vec<f64> = x.iter().zip(xbar).map(|(a, b)| a - b).collect();
                let s = d.iter().map(|v| v * v).sum::<f64>();
                let profile = kind.radial_profile(s).expect("radial cost");
                let comps: Vec<usize> = idx.iter().map(|&i| i % n).collect();
                let n_bar = idx.iter().filter(|&&i| i >= n).count();
                let sign = if n_bar % 2 == 0 { 1.0 } else { -1.0 };
                sign * radial_partial(&profile, &d, &comps)
            }
        }
    }

    fn partial_fd(&self, x: &[f64], xbar: &[f64], idx: &[usize], base: f64) -> f64 {
        let k = idx.len();
        if k == 0 {
            return self.value(x, xbar);
        }
        let step = base * 10f64.powf(k as f64 / 4.0);
        let coarse = self.tensor_difference(x, xbar, idx, step);
        let fine = self.tensor_difference(x, xbar, idx, 0.5 * step);
        (4.0 * fine - coarse) / 3.0
    }

    fn tensor_difference(&self, x: &[f64], xbar: &[f64], idx: &[usize], step: f64) -> f64 {
        let n = self.dim;
        let k = idx.len();
        let mut z: Vec<f64> = x.iter().chain(xbar).copied().collect();
        let z0 = z.clone();
        let mut total = 0.0;
        for mask in 0..(1usize << k) {
            z.copy_from_slice(&z0);
            let mut sign = 1.0;
            for (bit, &i) in idx.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    z[i] -= step;
                    sign = -sign;
                } else {
                    z[i] += step;
                }
            }
            total += sign * self.value(&z[..n], &z[n..]);
        }
        total / (2.0 * step).powi(k as i32)
    }

    /// `dc/dx` at `(x, xbar)`.
    pub fn grad_x(&self, x: &[f64], xbar: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.dim, |i, _| self.partial(x, xbar, &[i]))
    }

    /// `d^2 c / dx dx` at `(x, xbar)`.
    pub fn hess_xx(&self, x: &[f64], xbar: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.partial(x, xbar, &[i, j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Mixed Hessian `C_{ik} = d^2 c / dx^i dxbar^k` without any checks.
    pub fn cross_matrix(&self, x: &[f64], xbar: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |i, k| self.partial(x, xbar, &[i, n + k]))
    }
}

pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn falling_factorial(p: u32, m: u32) -> f64 {
    (0..m).map(|j| (p - j) as f64).product()
}

/// `d^k Phi(|d|^2) / d d_{c_1} ... d d_{c_k}` by summing over partitions of the
/// index list into singletons and pairs.
fn radial_partial(profile: &[f64; MAX_ORDER + 1], d: &[f64], comps: &[usize]) -> f64 {
    fn walk(
        profile: &[f64; MAX_ORDER + 1],
        d: &[f64],
        comps: &[usize],
        used: &mut Vec<bool>,
        blocks: usize,
        weight: f64,
    ) -> f64 {
        let Some(first) = used.iter().position(|u| !u) else {
            return profile[blocks] * weight;
        };
        used[first] = true;
        let mut total = walk(profile, d, comps, used, blocks + 1, weight * 2.0 * d[comps[first]]);
        for other in first + 1..comps.len() {
            if !used[other] && comps[first] == comps[other] {
                used[other] = true;
                total += walk(profile, d, comps, used, blocks + 1, weight * 2.0);
                used[other] = false;
            }
        }
        used[first] = false;
        total
    }
    let mut used = vec![false; comps.len()];
    walk(profile, d, comps, &mut used, 0, 1.0)
}

/// Mixed Hessian `d^2 c / dx dxbar`, checked for domain membership and (A2).
pub fn cross_hessian(model: &CostModel, x: &[f64], xbar: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
    model.check_point(x, xbar)?;
    let c = model.cross_matrix(x, xbar);
    let det = c.determinant();
    if !(det.abs() >= model.a2_tol) {
        let mut point = x.to_vec();
        point.extend_from_slice(xbar);
        return Err(GeometryError::DegenerateCost { point, det: det.abs(), tol: model.a2_tol });
    }
    Ok(c)
}
