use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::GraphError;
use crate::geometry::metric::h_bar;
use crate::geometry::{Ambient, Geometry};
use crate::graph::chart::{ChartPoint, GraphChart, Probe};
use crate::linalg::{generalized_sym_eigen, max_abs, sym_eigen_ascending};
use crate::transport::second_order::from_jacobian;

/// Smallest admissible `-g(v, v)` pivot in the normal Gram-Schmidt.
pub const PIVOT_TOL: f64 = 1e-10;

/// Largest violations of the frame algebra.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct FrameResiduals {
    /// `|g(e_k, e_l) - delta|`.
    pub tangent: f64,
    /// `|g(e_k, e_p^perp)|`.
    pub mixed: f64,
    /// `|g(e_p^perp, e_q^perp) + delta|`.
    pub normal: f64,
    /// `|S(e_k, e_l) - mu_k delta|`.
    pub s_diagonal: f64,
    /// `|g^{-1} - (E E^T - N N^T)|`.
    pub completeness: f64,
    /// `|g(xi_i + 0, 0 + xibar_j) - delta|`, induced frame only.
    pub xi_pairing: f64,
    /// `|h(xi, xi) - 1|` and `|hbar(xibar, xibar) - 1|`, induced frame only.
    pub xi_unit: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        [self.tangent, self.mixed, self.normal, self.s_diagonal, self.completeness, self.xi_pairing, self.xi_unit]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Tangent and normal frames of a graph at one point.
#[derive(Debug, Clone)]
pub struct GraphFrame {
    pub chart: ChartPoint,
    /// `(x, F(x))`.
    pub point: Vec<f64>,
    pub g_hat: DMatrix<f64>,
    pub s_hat: DMatrix<f64>,
    /// Tangent basis `T` (columns `d_a + dF d_a`).
    pub basis: DMatrix<f64>,
    /// Induced metric in the chart, `T^T g_hat T`.
    pub g: DMatrix<f64>,
    /// Restricted tensor in the chart, `T^T S_hat T`.
    pub s: DMatrix<f64>,
    /// Orthonormal tangent vectors as ambient columns.
    pub e: DMatrix<f64>,
    /// The same vectors as chart coefficients, `e = T e_chart`.
    pub e_chart: DMatrix<f64>,
    /// Normal vectors with `g_hat(e_p^perp, e_q^perp) = -delta`.
    pub e_perp: DMatrix<f64>,
    /// Eigenvalues of `S` relative to `g`, ascending.
    pub mus: Vec<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub xi: Option<DMatrix<f64>>,
    pub xibar: Option<DMatrix<f64>>,
    pub residuals: FrameResiduals,
}

impl GraphFrame {
    pub fn n(&self) -> usize {
        self.chart.dim()
    }

    /// `T u` for chart coefficients `u`.
    pub fn tangent(&self, u: &[f64]) -> Vec<f64> {
        (&self.basis * DVector::from_column_slice(u)).as_slice().to_vec()
    }

    pub fn e_vec(&self, k: usize) -> Vec<f64> {
        self.e.column(k).iter().copied().collect()
    }

    pub fn e_chart_vec(&self, k: usize) -> Vec<f64> {
        self.e_chart.column(k).iter().copied().collect()
    }

    /// `w - T g^{-1} T^T g_hat w`.
    pub fn normal_part(&self, w: &[f64]) -> Vec<f64> {
        let w = DVector::from_column_slice(w);
        let g_inv = self.g.clone().try_inverse().expect("induced metric is invertible");
        let tangential = &self.basis * (g_inv * (self.basis.transpose() * (&self.g_hat * &w)));
        (w - tangential).as_slice().to_vec()
    }

    pub fn g_hat_apply(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.g_hat, u, v)
    }

    pub fn s_hat_apply(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.s_hat, u, v)
    }
}

pub(crate) fn bilinear(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for a in 0..u.len() {
        if u[a] == 0.0 {
            continue;
        }
        for b in 0..v.len() {
            s += u[a] * m[(a, b)] * v[b];
        }
    }
    s
}

struct Base {
    chart: ChartPoint,
    point: Vec<f64>,
    g_hat: DMatrix<f64>,
    s_hat: DMatrix<f64>,
    basis: DMatrix<f64>,
    g: DMatrix<f64>,
    s: DMatrix<f64>,
}

fn base(chart: &GraphChart, ambient: &Ambient, probe: &Probe) -> Result<Base, GraphError> {
    let cp = chart.point(probe)?;
    let point = cp.lift();
    let g_hat = ambient.g_hat.eval(&point)?;
    let s_hat = ambient.s_hat.eval(&point)?;
    let basis = cp.tangent_basis();
    let g = crate::linalg::symmetrize(&(basis.transpose() * &g_hat * &basis));
    let s = crate::linalg::symmetrize(&(basis.transpose() * &s_hat * &basis));
    let (vals, _) = sym_eigen_ascending(&g);
    let scale = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if !(vals[0] > 1e-12 * scale) {
        return Err(GraphError::NotSpacelike { min_eigenvalue: vals[0] });
    }
    Ok(Base { chart: cp, point, g_hat, s_hat, basis, g, s })
}

/// Hyperbolic Gram-Schmidt on the normal space, pivoting on the most negative norm.
fn normal_frame(b: &Base, seeds: Vec<DVector<f64>>) -> Result<DMatrix<f64>, GraphError> {
    let n = b.chart.dim();
    let g_inv = b.g.clone().try_inverse().ok_or(GraphError::NotSpacelike { min_eigenvalue: 0.0 })?;
    let project = |w: &DVector<f64>| w - &b.basis * (&g_inv * (b.basis.transpose() * (&b.g_hat * w)));
    let mut candidates: Vec<DVector<f64>> = seeds
        .iter()
        .map(project)
        .filter_map(|v| {
            let norm = v.norm();
            (norm > 1e-12).then(|| v / norm)
        })
        .collect();
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in candidates.iter_mut().enumerate() {
            for q in &chosen {
                let proj = (c.transpose() * &b.g_hat * q)[(0, 0)];
                *c += q * proj;
            }
            let nn = (c.transpose() * &b.g_hat * &*c)[(0, 0)];
            if best.is_none_or(|(_, v)| nn < v) {
                best = Some((k, nn));
            }
        }
        let (k, pivot) = best.ok_or(GraphError::FrameDegeneracy { pivot: 0.0 })?;
        if !(pivot < -PIVOT_TOL) {
            return Err(GraphError::FrameDegeneracy { pivot });
        }
        let v = candidates.swap_remove(k) / (-pivot).sqrt();
        chosen.push(v);
    }
    Ok(DMatrix::from_columns(&chosen))
}

fn residuals(b: &Base, e: &DMatrix<f64>, e_perp: &DMatrix<f64>, mus: &[f64]) -> FrameResiduals {
    let n = b.chart.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let tangent = max_abs(&(e.transpose() * &b.g_hat * e - &id));
    let mixed = max_abs(&(e.transpose() * &b.g_hat * e_perp));
    let normal = max_abs(&(e_perp.transpose() * &b.g_hat * e_perp + &id));
    let s_diagonal =
        max_abs(&(e.transpose() * &b.s_hat * e - DMatrix::from_diagonal(&DVector::from_column_slice(mus))));
    let completeness = match b.g_hat.clone().try_inverse() {
        Some(gi) => max_abs(&(gi - (e * e.transpose() - e_perp * e_perp.transpose()))),
        None => f64::INFINITY,
    };
    FrameResiduals { tangent, mixed, normal, s_diagonal, completeness, xi_pairing: 0.0, xi_unit: 0.0 }
}

/// Orthonormal frame diagonalizing `S`, for any ambient pair.
///
/// The frame solves `S v = mu g v` in the chart, so `mu` is ascending and
/// `e_n` carries the largest eigenvalue.
pub fn orthonormal_frame(chart: &GraphChart, ambient: &Ambient, probe: &Probe) -> Result<GraphFrame, GraphError> {
    let b = base(chart, ambient, probe)?;
    let n = b.chart.dim();
    let (mus, e_chart) = generalized_sym_eigen(&b.s, &b.g).ok_or(GraphError::NotSpacelike { min_eigenvalue: 0.0 })?;
    let e = &b.basis * &e_chart;
    let seeds = (0..2 * n).map(|a| DVector::from_fn(2 * n, |i, _| if i == a { 1.0 } else { 0.0 })).collect();
    let e_perp = normal_frame(&b, seeds)?;
    let residuals = residuals(&b, &e, &e_perp, &mus);
    Ok(GraphFrame {
        chart: b.chart,
        point: b.point,
        g_hat: b.g_hat,
        s_hat: b.s_hat,
        basis: b.basis,
        g: b.g,
        s: b.s,
        e,
        e_chart,
        e_perp,
        mus,
        lambdas: None,
        xi: None,
        xibar: None,
        residuals,
    })
}

/// The frame built from the eigen-decomposition of `A = chi B` against `h`:
/// `e_i = (2 lambda_i)^{-1/2} (xi_i + dF xi_i)` with `xibar_i = dF xi_i / lambda_i`.
///
/// Columns are ordered by `mu_i = (lambda_i + 1/lambda_i) / 2` ascending, so
/// `e_n` carries the largest eigenvalue of `S`.
pub fn induced_frame(chart: &GraphChart, geometry: &Geometry, probe: &Probe) -> Result<GraphFrame, GraphError> {
    let b = base(chart, &geometry.ambient, probe)?;
    let n = b.chart.dim();
    let index = match probe {
        Probe::Node(i) => *i,
        Probe::Point(_) => 0,
    };
    let sod = from_jacobian(&geometry.model, &geometry.dens, &b.chart.x, &b.chart.fx, b.chart.jac.clone(), index)?;
    if let Some(&bad) = sod.lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(GraphError::NotSpacelike { min_eigenvalue: bad });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mu_of = |l: f64| 0.5 * (l + 1.0 / l);
    order.sort_by(|&i, &j| {
        mu_of(sod.lambdas[i]).total_cmp(&mu_of(sod.lambdas[j])).then(sod.lambdas[i].total_cmp(&sod.lambdas[j]))
    });
    let lambdas: Vec<f64> = order.iter().map(|&i| sod.lambdas[i]).collect();
    let xi = DMatrix::from_columns(&order.iter().map(|&i| sod.eigvecs.column(i).into_owned()).collect::<Vec<_>>());
    let jac = &b.chart.jac;
    let mut xibar = jac * &xi;
    let mut e_chart = xi.clone();
    for (k, &l) in lambdas.iter().enumerate() {
        xibar.column_mut(k).scale_mut(1.0 / l);
        e_chart.column_mut(k).scale_mut((2.0 * l).powf(-0.5));
    }
    let e = &b.basis * &e_chart;
    let mut seeds = Vec::with_capacity(3 * n);
    for (k, &l) in lambdas.iter().enumerate() {
        let v = xi.column(k);
        let w = jac * v;
        let mut s = DVector::zeros(2 * n);
        s.rows_mut(0, n).copy_from(&v);
        s.rows_mut(n, n).copy_from(&(-w));
        seeds.push(s * (2.0 * l).powf(-0.5));
    }
    seeds.extend((0..2 * n).map(|a| DVector::from_fn(2 * n, |i, _| if i == a { 1.0 } else { 0.0 })));
    let e_perp = normal_frame(&b, seeds)?;
    let mus: Vec<f64> = lambdas.iter().map(|&l| mu_of(l)).collect();
    let mut res = residuals(&b, &e, &e_perp, &mus);

    let hb = h_bar(&geometry.model, &geometry.dens, &b.chart.x, &b.chart.fx)?;
    let mut pairing: f64 = 0.0;
    let mut unit: f64 = 0.0;
    for i in 0..n {
        let mut xi_lift = vec![0.0; 2 * n];
        xi_lift[..n].copy_from_slice(xi.column(i).as_slice());
        for j in 0..n {
            let mut xb_lift = vec![0.0; 2 * n];
            xb_lift[n..].copy_from_slice(xibar.column(j).as_slice());
            let target = if i == j { 1.0 } else { 0.0 };
            pairing = pairing.max((bilinear(&b.g_hat, &xi_lift, &xb_lift) - target).abs());
        }
        let v = xi.column(i).into_owned();
        let w = xibar.column(i).into_owned();
        unit = unit
            .max((crate::linalg::bilinear(&geometry.model.h, &v, &v) - 1.0).abs())
            .max((crate::linalg::bilinear(&hb, &w, &w) - 1.0).abs());
    }
    res.xi_pairing = pairing;
    res.xi_unit = unit;
    Ok(GraphFrame {
        chart: b.chart,
        point: b.point,
        g_hat: b.g_hat,
        s_hat: b.s_hat,
        basis: b.basis,
        g: b.g,
        s: b.s,
        e,
        e_chart,
        e_perp,
        mus,
        lambdas: Some(lambdas),
        xi: Some(xi),
        xibar: Some(xibar),
        residuals: res,
    })
}
