use serde::Serialize;

use crate::error::{EstimateError, GraphError};
use crate::estimate::cutoff::Cutoff;
use crate::geometry::Ambient;
use crate::graph::chart::{ChartSource, GraphChart, Probe};
use crate::graph::frame::{orthonormal_frame, GraphFrame};
use crate::graph::second_fundamental::AmbientJet;
use crate::linalg::Tensor4;

/// Relative margin a later sample must clear to displace the current maximum.
const TIE_TOL: f64 = 1e-12;

/// Every node of a grid chart in lexicographic order; empty for analytic charts.
pub fn grid_probes(chart: &GraphChart) -> Vec<Probe> {
    match &chart.source {
        ChartSource::Grid { grid, .. } => (0..grid.len()).map(Probe::Node).collect(),
        ChartSource::Analytic { .. } => Vec::new(),
    }
}

#[derive(Debug, Clone)]
pub struct MaxPoint {
    pub probe: Probe,
    pub x: Vec<f64>,
    pub phi: f64,
    /// Top eigenvalue of `S` relative to `g`.
    pub mu_n: f64,
    /// `phi^{2n-2} mu_n`.
    pub value: f64,
    pub frame: GraphFrame,
    pub samples: usize,
}

/// Argmax of `phi^{2n-2} mu_n` over the probes where the frame exists and `phi > 0`.
///
/// Ties go to the larger cutoff value, then to the earliest probe, which for
/// grid probes is the smallest lexicographic index.
pub fn locate_max_point(
    chart: &GraphChart,
    ambient: &Ambient,
    cutoff: &Cutoff,
    probes: &[Probe],
) -> Result<MaxPoint, EstimateError> {
    let n = chart.dim;
    let mut best: Option<MaxPoint> = None;
    let mut samples = 0;
    for probe in probes {
        let x = chart.base_point(probe)?;
        let phi = cutoff.value(&x);
        if phi <= 0.0 {
            continue;
        }
        let frame = match orthonormal_frame(chart, ambient, probe) {
            Ok(f) => f,
            Err(GraphError::Solver(_)) | Err(GraphError::Geometry(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        samples += 1;
        let mu_n = frame.mus[n - 1];
        let value = phi.powi(2 * n as i32 - 2) * mu_n;
        let better = best.as_ref().is_none_or(|b| {
            let tol = TIE_TOL * b.value.abs();
            value > b.value + tol || (value >= b.value - tol && phi > b.phi * (1.0 + TIE_TOL))
        });
        if better {
            best = Some(MaxPoint { probe: probe.clone(), x, phi, mu_n, value, frame, samples: 0 });
        }
    }
    let mut best = best.ok_or(EstimateError::EmptySupport)?;
    best.samples = samples;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPointCheck {
    /// `sum_l R_hat(e_l, e_n, e_l, e_n)`.
    pub curvature_sum: f64,
    pub phi: f64,
    pub s_nn: f64,
    /// `curvature_sum * phi^2 / S(e_n, e_n)`.
    pub ratio: f64,
}

/// The ratio whose boundedness expresses the maximum-point inequality,
/// for an explicitly supplied curvature tensor.
pub fn max_point_ratio(frame: &GraphFrame, riemann: &Tensor4, phi: f64) -> MaxPointCheck {
    let n = frame.n();
    let en = frame.e_vec(n - 1);
    let curvature_sum: f64 = (0..n)
        .map(|l| {
            let el = frame.e_vec(l);
            riemann.contract(&el, &en, &el, &en)
        })
        .sum();
    let s_nn = frame.s_hat_apply(&en, &en);
    MaxPointCheck { curvature_sum, phi, s_nn, ratio: curvature_sum * phi * phi / s_nn }
}

pub fn check_max_point_inequality(
    frame: &GraphFrame,
    ambient: &Ambient,
    cutoff: &Cutoff,
) -> Result<MaxPointCheck, EstimateError> {
    let jet = AmbientJet::compute(ambient, &frame.point).map_err(GraphError::from)?;
    Ok(max_point_ratio(frame, &jet.metric.riemann, cutoff.value(&frame.chart.x)))
}
