#![allow(dead_code)]

use nalgebra::DMatrix;
use otgeo_core::geometry::cost::{CostKind, CostModel};
use otgeo_core::geometry::density::DensityPair;
use otgeo_core::geometry::domain::BoxDomain;
use otgeo_core::geometry::metric::{MetricField, MetricLabel};
use otgeo_core::geometry::{Ambient, Geometry};
use otgeo_core::graph::*;
use otgeo_core::transport::*;

pub fn split_flat(n: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        g[(i, n + i)] = 1.0;
        g[(n + i, i)] = 1.0;
    }
    g
}

pub fn flat_ambient(s_hat: MetricField) -> Ambient {
    Ambient::new(MetricField::constant(MetricLabel::GHat, split_flat(2), (2, 2)), s_hat)
}

/// `(1 + 0.05 |z|^4) I + 0.1 z z^T`.
pub fn quartic_s() -> MetricField {
    MetricField::from_fn(MetricLabel::SHat, 4, (4, 0), |z| {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let v = nalgebra::DVector::from_column_slice(z);
        DMatrix::identity(4, 4) * (1.0 + 0.05 * r2 * r2) + &v * v.transpose() * 0.1
    })
}

/// Gradient of `x^2 / (2y) + y^3 / 6`, whose Hessian has unit determinant.
pub fn maximal_chart(step: f64) -> GraphChart {
    let dom = BoxDomain::from_pairs(&[[-0.5, 0.5], [0.5, 1.5]]).unwrap();
    GraphChart::analytic(dom, step, |p| {
        let (x, y) = (p[0], p[1]);
        let f = vec![x / y, -x * x / (2.0 * y * y) + y * y / 2.0];
        let jac = DMatrix::from_row_slice(2, 2, &[1.0 / y, -x / (y * y), -x / (y * y), x * x / y.powi(3) + y]);
        let h0 = DMatrix::from_row_slice(2, 2, &[0.0, -1.0 / (y * y), -1.0 / (y * y), 2.0 * x / y.powi(3)]);
        let h1 = DMatrix::from_row_slice(
            2,
            2,
            &[-1.0 / (y * y), 2.0 * x / y.powi(3), 2.0 * x / y.powi(3), -3.0 * x * x / y.powi(4) + 1.0],
        );
        (f, jac, vec![h0, h1])
    })
}

pub fn quadratic_geometry(x: BoxDomain, xb: BoxDomain) -> Geometry {
    let model = CostModel::new(CostKind::Quadratic, x.clone(), xb.clone()).unwrap();
    Geometry::new(model, DensityPair::uniform(&x, &xb))
}

pub fn interval(lo: f64, hi: f64) -> BoxDomain {
    BoxDomain::from_pairs(&[[lo, hi]]).unwrap()
}

pub struct LogStudy {
    pub rms_h: f64,
    pub rms_identity: f64,
    pub step: f64,
}

/// Unit square to its translate by `(2, 0)` under `-log |x - xbar|`, sampled within 0.3 of the center.
pub fn log_cost_study(res: usize) -> LogStudy {
    let x = BoxDomain::unit(2);
    let xb = BoxDomain::from_pairs(&[[2.0, 3.0], [0.0, 1.0]]).unwrap();
    let model = CostModel::new(CostKind::LogDistance, x.clone(), xb.clone()).unwrap();
    let geo = Geometry::new(model, DensityPair::uniform(&x, &xb));
    let gx = GridSpec::uniform(x, res).unwrap();
    let mu = discretize(&geo.dens.rho, &gx).unwrap();
    let nu = discretize(&geo.dens.rho_bar, &GridSpec::uniform(xb, res).unwrap()).unwrap();
    let c = cost_matrix(&geo.model, &mu, &nu);
    let eps = default_final_eps(&geo.model, gx.max_step(), 1.0);
    let sol = solve_sinkhorn(&c, &mu, &nu, &default_schedule(&c, eps), &SinkhornOptions::default()).unwrap();
    let chart = GraphChart::from_solution(&sol).unwrap();
    let (mut h2, mut id2, mut count) = (0.0, 0.0, 0usize);
    for i in 0..mu.len() {
        let p = &mu.points[i];
        if ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt() > 0.3 {
            continue;
        }
        let mc = mean_curvature_residual(&chart, &geo.ambient, &Probe::Node(i)).unwrap();
        h2 += mc.norm * mc.norm;
        let rep =
            elliptic_identity_residual(&chart, &geo.ambient, &Probe::Node(i), &IdentityOptions::default()).unwrap();
        id2 += rep.residual * rep.residual;
        count += 1;
    }
    LogStudy { rms_h: (h2 / count as f64).sqrt(), rms_identity: (id2 / count as f64).sqrt(), step: gx.max_step() }
}
