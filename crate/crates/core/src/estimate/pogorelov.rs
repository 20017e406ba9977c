use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{EstimateError, GraphError};
use crate::estimate::cutoff::Cutoff;
use crate::estimate::maxpoint::{check_max_point_inequality, locate_max_point, MaxPointCheck};
use crate::geometry::jet::FieldJet;
use crate::geometry::metric::h_bar;
use crate::geometry::mtw::KappaEstimate;
use crate::geometry::Geometry;
use crate::graph::chart::{GraphChart, Probe};
use crate::graph::frame::induced_frame;
use crate::graph::second_fundamental::AmbientJet;

/// Safety factor applied to the sampled curvature bound before use.
pub const KAPPA_DEFLATION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PogorelovRow {
    pub index: Option<usize>,
    pub x: Vec<f64>,
    pub phi: f64,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    /// `lambda_i + 1 / lambda_i`.
    pub lambda_sums: Vec<f64>,
    /// `kappa^{n-1} phi^{2n-2} mu_n`, absent without a positive `kappa`.
    pub scaled_top: Option<f64>,
    /// Whether `lambda_i + 1/lambda_i <= C' kappa^{1-n} phi^{2-2n}` holds for every `i`.
    pub eigen_bound_holds: Option<bool>,
}

/// The intermediate lower bound at the maximum point, with the smallest
/// constant `C` for which `sum_{i<n} R(e_i, e_n, e_i, e_n) >= (kappa/C) mu_n^{n/(n-1)} - C mu_n` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyEstimate {
    pub curvature_sum: f64,
    pub mu_n: f64,
    pub implied_c: f64,
}

/// Sizes of the data the constant is allowed to depend on, at the maximum point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DependencyNorms {
    pub g_hat: f64,
    pub g_hat_inv: f64,
    pub s_hat: f64,
    pub cutoff: f64,
    /// `max |log(rho / vol_h)|` over the sampled support.
    pub log_density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxPointSummary {
    pub index: Option<usize>,
    pub x: Vec<f64>,
    pub phi: f64,
    pub mu_n: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PogorelovReport {
    pub dim: usize,
    /// Deflated curvature bound; `None` when undefined (`n = 1`).
    pub kappa: Option<f64>,
    pub kappa_nonpositive: bool,
    pub max_point: MaxPointSummary,
    pub c_maxpoint: Option<MaxPointCheck>,
    pub c_bound: Option<f64>,
    pub c_bound_prime: Option<f64>,
    pub key_estimate: Option<KeyEstimate>,
    pub norms: Option<DependencyNorms>,
    pub eigen_bound_holds: Option<bool>,
    pub rows: Vec<PogorelovRow>,
    pub skipped: usize,
}

fn g_inv_c2_norm(jet: &FieldJet) -> Option<f64> {
    let gi = jet.value.clone().try_inverse()?;
    let d = jet.point_dim();
    let mut norm = gi.amax();
    for a in 0..d {
        norm = norm.max((-(&gi * &jet.d1[a] * &gi)).amax());
        for b in 0..d {
            let t: DMatrix<f64> =
                &gi * (&jet.d1[a] * &gi * &jet.d1[b] + &jet.d1[b] * &gi * &jet.d1[a] - &jet.d2[a][b]) * &gi;
            norm = norm.max(t.amax());
        }
    }
    Some(norm)
}

fn probe_index(p: &Probe) -> Option<usize> {
    match p {
        Probe::Node(i) => Some(*i),
        Probe::Point(_) => None,
    }
}

/// Scans the probes for the scaled top eigenvalue of `S` and reports the
/// observed constants of the interior estimate.
pub fn check_pogorelov_bound(
    chart: &GraphChart,
    geometry: &Geometry,
    cutoff: &Cutoff,
    kappa: &KappaEstimate,
    probes: &[Probe],
) -> Result<PogorelovReport, EstimateError> {
    let n = chart.dim;
    let kappa_used = kappa.kappa.map(|k| k * KAPPA_DEFLATION);
    let kappa_positive = kappa_used.filter(|k| *k > 0.0);
    let weight = |phi: f64| kappa_positive.map(|k| k.powi(n as i32 - 1) * phi.powi(2 * n as i32 - 2));

    let mut rows = Vec::new();
    let mut skipped = 0;
    let mut log_density: f64 = 0.0;
    let vol_h = geometry.model.h.determinant().sqrt();
    for probe in probes {
        let x = chart.base_point(probe)?;
        let phi = cutoff.value(&x);
        if phi <= 0.0 {
            continue;
        }
        let frame = match induced_frame(chart, geometry, probe) {
            Ok(f) => f,
            Err(GraphError::Solver(_)) | Err(GraphError::Geometry(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        log_density = log_density.max((geometry.dens.rho.value(&x) / vol_h).ln().abs());
        let lambdas = frame.lambdas.clone().unwrap_or_default();
        let lambda_sums = lambdas.iter().map(|l| l + 1.0 / l).collect();
        let scaled_top = weight(phi).map(|w| w * frame.mus[n - 1]);
        rows.push(PogorelovRow {
            index: probe_index(probe),
            x,
            phi,
            lambdas,
            mus: frame.mus.clone(),
            lambda_sums,
            scaled_top,
            eigen_bound_holds: None,
        });
    }
    let c_bound =
        if kappa_positive.is_some() { rows.iter().filter_map(|r| r.scaled_top).reduce(f64::max) } else { None };
    let c_bound_prime = c_bound.map(|c| 2.0 * c);
    if let (Some(cp), Some(k)) = (c_bound_prime, kappa_positive) {
        for r in &mut rows {
            let rhs = cp * k.powi(1 - n as i32) * r.phi.powi(2 - 2 * n as i32);
            r.eigen_bound_holds = Some(r.lambda_sums.iter().all(|s| *s <= rhs * (1.0 + 1e-12)));
        }
    }
    let eigen_bound_holds = c_bound_prime.map(|_| rows.iter().all(|r| r.eigen_bound_holds == Some(true)));

    let mp = locate_max_point(chart, &geometry.ambient, cutoff, probes)?;
    let max_point =
        MaxPointSummary { index: probe_index(&mp.probe), x: mp.x.clone(), phi: mp.phi, mu_n: mp.mu_n, value: mp.value };
    let jet = AmbientJet::compute(&geometry.ambient, &mp.frame.point).map_err(GraphError::from)?;
    let c_maxpoint =
        if n >= 2 { Some(check_max_point_inequality(&mp.frame, &geometry.ambient, cutoff)?) } else { None };
    let key_estimate = match (kappa_positive, n >= 2) {
        (Some(k), true) => {
            let f = induced_frame(chart, geometry, &mp.probe)?;
            let en = f.e_vec(n - 1);
            let sum: f64 = (0..n - 1)
                .map(|i| {
                    let ei = f.e_vec(i);
                    jet.riemann(&ei, &en, &ei, &en)
                })
                .sum();
            let mu = f.mus[n - 1];
            let p = n as f64 / (n as f64 - 1.0);
            let implied_c = (-sum + (sum * sum + 4.0 * mu * k * mu.powf(p)).sqrt()) / (2.0 * mu);
            Some(KeyEstimate { curvature_sum: sum, mu_n: mu, implied_c })
        }
        _ => None,
    };
    let norms = Some(DependencyNorms {
        g_hat: jet.metric.jet.c2_norm(),
        g_hat_inv: g_inv_c2_norm(&jet.metric.jet).unwrap_or(f64::INFINITY),
        s_hat: jet.s.c2_norm(),
        cutoff: cutoff.c2_norm(),
        log_density,
    });
    Ok(PogorelovReport {
        dim: n,
        kappa: kappa_used,
        kappa_nonpositive: kappa_used.is_some_and(|k| k <= 0.0),
        max_point,
        c_maxpoint,
        c_bound,
        c_bound_prime,
        key_estimate,
        norms,
        eigen_bound_holds,
        rows,
        skipped,
    })
}

/// The transport problem in the opposite direction.
///
/// The target carries the constant reference metric `hbar` taken at the
/// centers of the two boxes, so the eigenvalues become the reciprocals of the
/// forward ones wherever `hbar` is constant.
pub fn inverse_geometry(geometry: &Geometry) -> Result<Geometry, EstimateError> {
    let m = &geometry.model;
    let hb = h_bar(m, &geometry.dens, &m.domain_x.center(), &m.domain_xbar.center())?;
    let model = m.swapped().with_h(crate::linalg::symmetrize(&hb))?;
    Ok(Geometry::new(model, geometry.dens.swapped()).with_stencil(geometry.ambient.stencil_h))
}
