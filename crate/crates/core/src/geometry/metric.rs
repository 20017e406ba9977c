//! The conformal factor, the pseudo-metric on the product, and the companion
//! Riemannian metric `S = h + hbar`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::GeometryError;
use crate::geometry::cost::{cross_hessian, CostModel};
use crate::geometry::density::DensityPair;
use crate::geometry::domain::BoxDomain;
use crate::linalg::sym_eigen_ascending;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricLabel {
    GHat,
    SHat,
    HBar,
    Induced,
    Custom,
}

impl MetricLabel {
    pub fn name(&self) -> &'static str {
        match self {
            MetricLabel::GHat => "g_hat",
            MetricLabel::SHat => "s_hat",
            MetricLabel::HBar => "h_bar",
            MetricLabel::Induced => "induced",
            MetricLabel::Custom => "custom",
        }
    }
}

pub type MatrixFn = Arc<dyn Fn(&[f64]) -> Result<DMatrix<f64>, GeometryError> + Send + Sync>;

/// A symmetric bilinear form field in the standard product chart.
#[derive(Clone)]
pub struct MetricField {
    /// Size of the matrix returned by [`MetricField::eval`].
    pub dim: usize,
    /// Number of coordinates of an evaluation point.
    pub point_dim: usize,
    /// `(plus_count, minus_count)`.
    pub signature: (usize, usize),
    pub label: MetricLabel,
    /// Where finite-difference stencils may sample the field.
    pub domain: Option<BoxDomain>,
    eval: MatrixFn,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("dim", &self.dim)
            .field("point_dim", &self.point_dim)
            .field("signature", &self.signature)
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl MetricField {
    pub fn new(
        label: MetricLabel,
        dim: usize,
        point_dim: usize,
        signature: (usize, usize),
        domain: Option<BoxDomain>,
        eval: MatrixFn,
    ) -> Self {
        Self { dim, point_dim, signature, label, domain, eval }
    }

    /// Convenience constructor for fields given by an infallible closure.
    pub fn from_fn<F>(label: MetricLabel, point_dim: usize, signature: (usize, usize), f: F) -> Self
    where
        F: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let dim = signature.0 + signature.1;
        Self::new(label, dim, point_dim, signature, None, Arc::new(move |p| Ok(f(p))))
    }

    pub fn constant(label: MetricLabel, matrix: DMatrix<f64>, signature: (usize, usize)) -> Self {
        let point_dim = matrix.nrows();
        Self::from_fn(label, point_dim, signature, move |_| matrix.clone())
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
        if p.len() != self.point_dim {
            return Err(GeometryError::InvalidInput(format!(
                "field expects points with {} coordinates, got {}",
                self.point_dim,
                p.len()
            )));
        }
        (self.eval)(p)
    }

    /// Whether a stencil point may be sampled.
    pub fn admits(&self, p: &[f64]) -> bool {
        self.domain.as_ref().is_none_or(|d| d.contains(p))
    }

    /// Counts of positive and negative eigenvalues at `p`.
    pub fn signature_at(&self, p: &[f64]) -> Result<(usize, usize), GeometryError> {
        let m = self.eval(p)?;
        let (vals, _) = sym_eigen_ascending(&m);
        let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
        Ok((vals.iter().filter(|v| **v > tol).count(), vals.iter().filter(|v| **v < -tol).count()))
    }

    pub fn check_signature(&self, p: &[f64]) -> Result<bool, GeometryError> {
        Ok(self.signature_at(p)? == self.signature)
    }

    /// The field multiplied by a positive constant.
    pub fn scaled(&self, factor: f64) -> MetricField {
        let inner = self.eval.clone();
        MetricField { eval: Arc::new(move |p| Ok(inner(p)? * factor)), ..self.clone() }
    }
}

/// `C = d^2 c / dx dxbar` and `chi` at a point, without the box check.
///
/// Stencils may step slightly past the boxes, so box membership is left to
/// the caller; finiteness, (A2) and density positivity are still enforced.
fn local_data(
    model: &CostModel,
    dens: &DensityPair,
    x: &[f64],
    xbar: &[f64],
) -> Result<(DMatrix<f64>, f64), GeometryError> {
    let n = model.dim;
    let point = || x.iter().chain(xbar).copied().collect::<Vec<f64>>();
    if !model.value(x, xbar).is_finite() {
        return Err(GeometryError::Domain { point: point() });
    }
    let c = model.cross_matrix(x, xbar);
    let det = c.determinant().abs();
    if !(det >= model.a2_tol) {
        return Err(GeometryError::DegenerateCost { point: point(), det, tol: model.a2_tol });
    }
    let rho = dens.rho.check_positive(x)?;
    let rho_bar = dens.rho_bar.check_positive(xbar)?;
    Ok((c, (rho * rho_bar / det).powf(1.0 / n as f64)))
}

/// Conformal factor `chi > 0` with `chi^n |det C| = rho(x) rho_bar(xbar)`.
pub fn chi(model: &CostModel, dens: &DensityPair, x: &[f64], xbar: &[f64]) -> Result<f64, GeometryError> {
    cross_hessian(model, x, xbar)?;
    Ok(local_data(model, dens, x, xbar)?.1)
}

fn kmw_from(c: &DMatrix<f64>, chi: f64) -> DMatrix<f64> {
    let n = c.nrows();
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    let block = c * (-chi);
    g.view_mut((0, n), (n, n)).copy_from(&block);
    g.view_mut((n, 0), (n, n)).copy_from(&block.transpose());
    g
}

fn h_bar_from(model: &CostModel, c: &DMatrix<f64>, chi: f64) -> DMatrix<f64> {
    let h_inv = model.h.clone().cholesky().expect("h is positive definite").inverse();
    let m = c.transpose() * h_inv * c * (chi * chi);
    (&m + m.transpose()) * 0.5
}

fn s_hat_from(model: &CostModel, c: &DMatrix<f64>, chi: f64) -> DMatrix<f64> {
    let n = model.dim;
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(&model.h);
    s.view_mut((n, n), (n, n)).copy_from(&h_bar_from(model, c, chi));
    s
}

/// Components of the pseudo-metric at `(x, xbar)`.
pub fn kmw_matrix(
    model: &CostModel,
    dens: &DensityPair,
    x: &[f64],
    xbar: &[f64],
) -> Result<DMatrix<f64>, GeometryError> {
    model.check_point(x, xbar)?;
    let (c, chi) = local_data(model, dens, x, xbar)?;
    Ok(kmw_from(&c, chi))
}

/// `hbar_{kl} = chi^2 h^{pq} C_{pk} C_{ql}` at `(x, xbar)`.
pub fn h_bar(model: &CostModel, dens: &DensityPair, x: &[f64], xbar: &[f64]) -> Result<DMatrix<f64>, GeometryError> {
    model.check_point(x, xbar)?;
    let (c, chi) = local_data(model, dens, x, xbar)?;
    Ok(h_bar_from(model, &c, chi))
}

/// `S = h + hbar` at `(x, xbar)`.
pub fn s_hat_matrix(
    model: &CostModel,
    dens: &DensityPair,
    x: &[f64],
    xbar: &[f64],
) -> Result<DMatrix<f64>, GeometryError> {
    model.check_point(x, xbar)?;
    let (c, chi) = local_data(model, dens, x, xbar)?;
    Ok(s_hat_from(model, &c, chi))
}

fn split(model: &CostModel, p: &[f64]) -> Result<(Vec<f64>, Vec<f64>), GeometryError> {
    let n = model.dim;
    if p.len() != 2 * n {
        return Err(GeometryError::InvalidInput(format!("expected a point in R^{}", 2 * n)));
    }
    Ok((p[..n].to_vec(), p[n..].to_vec()))
}

/// The pseudo-metric as a field of signature `(n, n)` on the product of the boxes.
pub fn kmw_metric(model: &CostModel, dens: &DensityPair) -> MetricField {
    let n = model.dim;
    let (m, d) = (model.clone(), dens.clone());
    MetricField::new(
        MetricLabel::GHat,
        2 * n,
        2 * n,
        (n, n),
        Some(model.domain_x.product(&model.domain_xbar)),
        Arc::new(move |p| {
            let (x, xbar) = split(&m, p)?;
            let (c, chi) = local_data(&m, &d, &x, &xbar)?;
            Ok(kmw_from(&c, chi))
        }),
    )
}

/// `S = h + hbar` as a positive definite field on the product of the boxes.
pub fn s_hat_metric(model: &CostModel, dens: &DensityPair) -> MetricField {
    let n = model.dim;
    let (m, d) = (model.clone(), dens.clone());
    MetricField::new(
        MetricLabel::SHat,
        2 * n,
        2 * n,
        (2 * n, 0),
        Some(model.domain_x.product(&model.domain_xbar)),
        Arc::new(move |p| {
            let (x, xbar) = split(&m, p)?;
            let (c, chi) = local_data(&m, &d, &x, &xbar)?;
            Ok(s_hat_from(&m, &c, chi))
        }),
    )
}

/// `hbar` as an `n x n` field over product points.
pub fn h_bar_metric(model: &CostModel, dens: &DensityPair) -> MetricField {
    let n = model.dim;
    let (m, d) = (model.clone(), dens.clone());
    MetricField::new(
        MetricLabel::HBar,
        n,
        2 * n,
        (n, 0),
        Some(model.domain_x.product(&model.domain_xbar)),
        Arc::new(move |p| {
            let (x, xbar) = split(&m, p)?;
            let (c, chi) = local_data(&m, &d, &x, &xbar)?;
            Ok(h_bar_from(&m, &c, chi))
        }),
    )
}

/// `(sqrt|det g_hat|, sqrt det S_hat, rho * rho_bar)` at `(x, xbar)`.
pub fn volume_forms(
    model: &CostModel,
    dens: &DensityPair,
    x: &[f64],
    xbar: &[f64],
) -> Result<(f64, f64, f64), GeometryError> {
    let g = kmw_matrix(model, dens, x, xbar)?;
    let s = s_hat_matrix(model, dens, x, xbar)?;
    let target = dens.rho.value(x) * dens.rho_bar.value(xbar);
    Ok((g.determinant().abs().sqrt(), s.determinant().sqrt(), target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cost::CostKind;
    use crate::geometry::density::{Density, DensityKind};

    fn bilinear_2d() -> (CostModel, DensityPair) {
        let b = BoxDomain::unit(2);
        let m = CostModel::new(CostKind::Bilinear, b.clone(), b.clone()).unwrap();
        (m, DensityPair::uniform(&b, &b))
    }

    #[test]
    fn bilinear_uniform_is_standard_split_metric() {
        let (m, d) = bilinear_2d();
        assert_eq!(chi(&m, &d, &[0.2, 0.3], &[0.7, 0.1]).unwrap(), 1.0);
        let g = kmw_matrix(&m, &d, &[0.2, 0.3], &[0.7, 0.1]).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        for i in 0..2 {
            expected[(i, i + 2)] = 1.0;
            expected[(i + 2, i)] = 1.0;
        }
        assert_eq!(g, expected);
        let s = s_hat_matrix(&m, &d, &[0.2, 0.3], &[0.7, 0.1]).unwrap();
        assert_eq!(s, DMatrix::identity(4, 4));
        let field = kmw_metric(&m, &d);
        assert_eq!(field.signature_at(&[0.2, 0.3, 0.7, 0.1]).unwrap(), (2, 2));
    }

    #[test]
    fn rescaling_case_chi_and_hbar() {
        let x = BoxDomain::from_pairs(&[[0.0, 1.0]]).unwrap();
        let xb = BoxDomain::from_pairs(&[[0.0, 2.0]]).unwrap();
        let m = CostModel::new(CostKind::Quadratic, x.clone(), xb.clone()).unwrap();
        let d = DensityPair::uniform(&x, &xb);
        assert_eq!(chi(&m, &d, &[0.3], &[0.6]).unwrap(), 0.5);
        assert_eq!(h_bar(&m, &d, &[0.3], &[0.6]).unwrap()[(0, 0)], 0.25);
    }

    #[test]
    fn doubling_rho_scales_chi() {
        let (m, d) = bilinear_2d();
        let doubled = DensityPair::new(d.rho.scaled(2.0), d.rho_bar.clone());
        let a = chi(&m, &d, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let b = chi(&m, &doubled, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn volume_forms_agree_for_log_cost() {
        let x = BoxDomain::unit(2);
        let xb = BoxDomain::from_pairs(&[[2.0, 3.0], [0.0, 1.0]]).unwrap();
        let m = CostModel::new(CostKind::LogDistance, x.clone(), xb.clone()).unwrap();
        let rho =
            Density::new(DensityKind::GaussianClipped { mean: vec![0.5, 0.5], sigma: vec![0.3, 0.4] }, x).unwrap();
        let d = DensityPair::new(rho, Density::new(DensityKind::Uniform, xb).unwrap());
        let (g, s, t) = volume_forms(&m, &d, &[0.2, 0.7], &[2.4, 0.1]).unwrap();
        assert!((g - t).abs() < 1e-12 * t && (s - t).abs() < 1e-12 * t);
    }
}
