//! The cross-curvature `R(xi + 0, 0 + xibar, xi + 0, 0 + xibar)` on null pairs
//! and its uniform lower bound over a region.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::GeometryError;
use crate::geometry::cost::{cross_hessian, CostModel};
use crate::geometry::curvature::{riemann_curvature, CurvatureSample};
use crate::geometry::density::DensityPair;
use crate::geometry::domain::BoxDomain;
use crate::geometry::jet::DEFAULT_STENCIL_H;
use crate::geometry::metric::{chi, h_bar, kmw_metric};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtwOptions {
    pub stencil_h: f64,
    pub orth_tol: f64,
    /// Replace `xibar` by its `hbar`-orthogonal projection onto the null complement of `xi`.
    pub project: bool,
}

impl Default for MtwOptions {
    fn default() -> Self {
        Self { stencil_h: DEFAULT_STENCIL_H, orth_tol: 1e-8, project: false }
    }
}

/// Local data needed to form and normalize null pairs at `(x, xbar)`.
#[derive(Debug, Clone)]
pub struct PairFrame {
    pub c: DMatrix<f64>,
    pub chi: f64,
    pub h: DMatrix<f64>,
    pub h_bar: DMatrix<f64>,
}

impl PairFrame {
    pub fn at(model: &CostModel, dens: &DensityPair, x: &[f64], xbar: &[f64]) -> Result<Self, GeometryError> {
        let c = cross_hessian(model, x, xbar)?;
        Ok(Self { c, chi: chi(model, dens, x, xbar)?, h: model.h.clone(), h_bar: h_bar(model, dens, x, xbar)? })
    }

    /// `g_hat(xi + 0, 0 + xibar) = -chi xi^T C xibar`.
    pub fn pairing(&self, xi: &DVector<f64>, xibar: &DVector<f64>) -> f64 {
        -self.chi * (xi.transpose() * &self.c * xibar)[(0, 0)]
    }

    /// Pairing divided by `|xi|_h |xibar|_hbar`.
    pub fn normalized_pairing(&self, xi: &DVector<f64>, xibar: &DVector<f64>) -> f64 {
        let nx = (xi.transpose() * &self.h * xi)[(0, 0)].sqrt();
        let nb = (xibar.transpose() * &self.h_bar * xibar)[(0, 0)].sqrt();
        self.pairing(xi, xibar).abs() / (nx * nb)
    }

    /// `hbar`-orthogonal projection of `xibar` onto `{v : g_hat(xi + 0, 0 + v) = 0}`.
    pub fn project(&self, xi: &DVector<f64>, xibar: &DVector<f64>) -> DVector<f64> {
        let a = self.c.transpose() * xi;
        let hb_inv_a = self.h_bar.clone().cholesky().expect("hbar is positive definite").solve(&a);
        let denom = a.dot(&hb_inv_a);
        if denom == 0.0 {
            return xibar.clone();
        }
        xibar - hb_inv_a * (a.dot(xibar) / denom)
    }

    /// Null pairs `(xi_i, xibar_j)`, `i != j`, built from an `h`-orthonormal
    /// basis rotated by `q`, with `xibar_j` rescaled to unit `hbar`-length.
    pub fn pairs(&self, q: &DMatrix<f64>) -> Vec<(DVector<f64>, DVector<f64>)> {
        let n = self.c.nrows();
        let l = self.h.clone().cholesky().expect("h is positive definite").l();
        let xi_basis = l.transpose().try_inverse().expect("triangular factor") * q;
        let xi_dual = xi_basis.transpose().try_inverse().expect("basis");
        let xibar_basis = (&self.c * (-self.chi)).try_inverse().expect("(A2) checked") * xi_dual;
        let mut out = Vec::with_capacity(n * n.saturating_sub(1));
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let xi = xi_basis.column(i).into_owned();
                let xb = xibar_basis.column(j).into_owned();
                let norm = (xb.transpose() * &self.h_bar * &xb)[(0, 0)].sqrt();
                out.push((xi, xb / norm));
            }
        }
        out
    }
}

fn lift(n: usize, xi: &DVector<f64>, xibar: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; 2 * n];
    let mut w = vec![0.0; 2 * n];
    v[..n].copy_from_slice(xi.as_slice());
    w[n..].copy_from_slice(xibar.as_slice());
    (v, w)
}

/// `R(xi + 0, 0 + xibar, xi + 0, 0 + xibar)` from a precomputed curvature sample.
pub fn mtw_from_sample(sample: &CurvatureSample, xi: &DVector<f64>, xibar: &DVector<f64>) -> f64 {
    let (v, w) = lift(xi.len(), xi, xibar);
    sample.apply(&v, &w, &v, &w)
}

/// Cross-curvature of the pseudo-metric on the pair `(xi, xibar)` at `(x, xbar)`.
pub fn mtw_sectional(
    model: &CostModel,
    dens: &DensityPair,
    x: &[f64],
    xbar: &[f64],
    xi: &[f64],
    xibar: &[f64],
    opts: &MtwOptions,
) -> Result<f64, GeometryError> {
    let n = model.dim;
    if xi.len() != n || xibar.len() != n {
        return Err(GeometryError::InvalidInput("tangent vectors must have n components".into()));
    }
    let xi = DVector::from_column_slice(xi);
    let mut xibar = DVector::from_column_slice(xibar);
    if xi.norm() == 0.0 || xibar.norm() == 0.0 {
        return Err(GeometryError::InvalidInput("tangent vectors must be nonzero".into()));
    }
    let frame = PairFrame::at(model, dens, x, xbar)?;
    if opts.project {
        xibar = frame.project(&xi, &xibar);
        if xibar.norm() <= 1e-14 * xi.norm() {
            return Err(GeometryError::InvalidInput("projection annihilated xibar".into()));
        }
    } else {
        let residual = frame.normalized_pairing(&xi, &xibar);
        if residual > opts.orth_tol {
            return Err(GeometryError::NotOrthogonal { residual, tol: opts.orth_tol });
        }
    }
    let mut p = x.to_vec();
    p.extend_from_slice(xbar);
    let sample = riemann_curvature(&kmw_metric(model, dens), &p, opts.stencil_h)?;
    Ok(mtw_from_sample(&sample, &xi, &xibar))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaOptions {
    /// Cell-midpoint samples per axis of the product region.
    pub grid: usize,
    pub stencil_h: f64,
    /// Pseudo-random rotations added to the unrotated basis.
    pub rotations: usize,
    pub seed: u64,
}

impl Default for KappaOptions {
    fn default() -> Self {
        Self { grid: 4, stencil_h: DEFAULT_STENCIL_H, rotations: 8, seed: 0x6b_6170_7061 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaEstimate {
    /// Floored lower bound; `None` when the condition is vacuous (`n = 1`).
    pub kappa: Option<f64>,
    /// Unfloored sampled minimum of the normalized cross-curvature.
    pub raw_min: Option<f64>,
    pub mtw_violated: bool,
    pub argmin: Option<Vec<f64>>,
    pub grid: usize,
    pub points: usize,
    pub pairs_per_point: usize,
}

/// `rotations` orthogonal matrices preceded by the identity, reproducible from `seed`.
pub fn rotation_set(n: usize, rotations: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![DMatrix::identity(n, n)];
    while out.len() < rotations + 1 {
        let m: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        if m.determinant().abs() < 1e-3 {
            continue;
        }
        out.push(m.qr().q());
    }
    out
}

/// Sampled lower bound of `R(xi+0, 0+xibar, xi+0, 0+xibar) / (h(xi,xi) hbar(xibar,xibar))`
/// over null pairs and grid points of `region_x x region_xbar`.
pub fn estimate_kappa(
    model: &CostModel,
    dens: &DensityPair,
    region_x: &BoxDomain,
    region_xbar: &BoxDomain,
    opts: &KappaOptions,
) -> Result<KappaEstimate, GeometryError> {
    let n = model.dim;
    if opts.grid < 1 {
        return Err(GeometryError::InvalidInput("kappa grid needs at least one point per axis".into()));
    }
    let points = region_x.product(region_xbar).midpoint_grid(opts.grid);
    if n == 1 {
        return Ok(KappaEstimate {
            kappa: None,
            raw_min: None,
            mtw_violated: false,
            argmin: None,
            grid: opts.grid,
            points: points.len(),
            pairs_per_point: 0,
        });
    }
    let rotations = rotation_set(n, opts.rotations, opts.seed);
    let field = kmw_metric(model, dens);
    let per_point: Vec<(f64, usize)> = points
        .par_iter()
        .enumerate()
        .map(|(idx, p)| -> Result<(f64, usize), GeometryError> {
            let frame = PairFrame::at(model, dens, &p[..n], &p[n..])?;
            let sample = riemann_curvature(&field, p, opts.stencil_h)?;
            let mut best = f64::INFINITY;
            for q in &rotations {
                for (xi, xb) in frame.pairs(q) {
                    best = best.min(mtw_from_sample(&sample, &xi, &xb));
                }
            }
            Ok((best, idx))
        })
        .collect::<Result<_, _>>()?;
    let (raw, idx) =
        per_point.into_iter().min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))).expect("nonempty grid");
    Ok(KappaEstimate {
        kappa: Some(raw.max(0.0)),
        raw_min: Some(raw),
        mtw_violated: raw <= 0.0,
        argmin: Some(points[idx].clone()),
        grid: opts.grid,
        points: points.len(),
        pairs_per_point: rotations.len() * n * (n - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cost::CostKind;

    fn log_model() -> (CostModel, DensityPair) {
        let x = BoxDomain::unit(2);
        let xb = BoxDomain::from_pairs(&[[2.0, 3.0], [0.0, 1.0]]).unwrap();
        let m = CostModel::new(CostKind::LogDistance, x.clone(), xb.clone()).unwrap();
        (m, DensityPair::uniform(&x, &xb))
    }

    #[test]
    fn pairs_are_null_and_unit() {
        let (m, d) = log_model();
        let f = PairFrame::at(&m, &d, &[0.3, 0.6], &[2.2, 0.9]).unwrap();
        for q in rotation_set(2, 3, 1) {
            for (xi, xb) in f.pairs(&q) {
                assert!(f.pairing(&xi, &xb).abs() < 1e-12);
                assert!(((xi.transpose() * &f.h * &xi)[(0, 0)] - 1.0).abs() < 1e-12);
                assert!(((xb.transpose() * &f.h_bar * &xb)[(0, 0)] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_orthogonal_pair_is_rejected_unless_projected() {
        let (m, d) = log_model();
        let (x, xb) = ([0.5, 0.5], [2.5, 0.5]);
        let err = mtw_sectional(&m, &d, &x, &xb, &[1.0, 0.0], &[1.0, 1.0], &MtwOptions::default());
        assert!(matches!(err, Err(GeometryError::NotOrthogonal { .. })));
        let opts = MtwOptions { project: true, ..Default::default() };
        assert!(mtw_sectional(&m, &d, &x, &xb, &[1.0, 0.0], &[1.0, 1.0], &opts).unwrap() > 0.0);
    }

    #[test]
    fn one_dimensional_kappa_is_undefined() {
        let b = BoxDomain::unit(1);
        let m = CostModel::new(CostKind::Quadratic, b.clone(), b.clone()).unwrap();
        let k = estimate_kappa(&m, &DensityPair::uniform(&b, &b), &b, &b, &KappaOptions::default()).unwrap();
        assert!(k.kappa.is_none());
    }
}
