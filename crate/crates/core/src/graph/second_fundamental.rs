use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeometryError, GraphError};
use crate::geometry::jet::{CovariantJet, FieldJet, MetricJet};
use crate::geometry::Ambient;
use crate::graph::chart::{GraphChart, Probe};
use crate::graph::frame::{bilinear, orthonormal_frame, GraphFrame};

/// Ambient jets of `g_hat` and `S_hat` at one point of the product.
#[derive(Debug, Clone)]
pub struct AmbientJet {
    pub metric: MetricJet,
    pub s: FieldJet,
    /// Covariant derivatives of `S_hat` under the connection of `g_hat`.
    pub cov: CovariantJet,
}

impl AmbientJet {
    pub fn compute(ambient: &Ambient, z: &[f64]) -> Result<Self, GeometryError> {
        let metric = MetricJet::compute(&ambient.g_hat, z, ambient.stencil_h)?;
        let s = FieldJet::compute(&ambient.s_hat, z, ambient.stencil_h)?;
        Ok(Self::from_jets(metric, s))
    }

    pub fn from_jets(metric: MetricJet, s: FieldJet) -> Self {
        let cov = CovariantJet::compute(&s, &metric);
        Self { metric, s, cov }
    }

    /// `R_hat(u, v, w, z)`.
    pub fn riemann(&self, u: &[f64], v: &[f64], w: &[f64], z: &[f64]) -> f64 {
        self.metric.riemann.contract(u, v, w, z)
    }
}

/// `II(T u, T v)` for chart coefficients `u, v`.
///
/// The ambient derivative of `T v` along `T u` is `(0, d^2F(u, v)) + Gamma_hat(T u, T v)`;
/// its normal part is the second fundamental form.
pub fn ii_apply(frame: &GraphFrame, jet: &AmbientJet, u: &[f64], v: &[f64]) -> Result<Vec<f64>, GraphError> {
    let flat = frame
        .chart
        .second_derivative(u, v)
        .ok_or_else(|| GraphError::Geometry(GeometryError::StencilOutOfDomain { point: frame.chart.x.clone() }))?;
    let tu = frame.tangent(u);
    let tv = frame.tangent(v);
    let gamma = jet.metric.gamma_apply(&tu, &tv);
    let w: Vec<f64> = flat.iter().zip(&gamma).map(|(a, b)| a + b).collect();
    Ok(frame.normal_part(&w))
}

/// Second fundamental form on the orthonormal frame.
#[derive(Debug, Clone)]
pub struct SecondFundamentalForm {
    /// `ii[k][l] = II(e_k, e_l)` as ambient vectors.
    pub ii: Vec<Vec<Vec<f64>>>,
    /// `coeffs[p][(k, l)]` with `II(e_k, e_l) = sum_p coeffs[p] e_p^perp`.
    pub coeffs: Vec<DMatrix<f64>>,
    /// `H = sum_l II(e_l, e_l)`.
    pub mean: Vec<f64>,
    /// `sqrt(S_hat(H, H))`.
    pub mean_norm: f64,
    /// Largest `|II(e_k, e_l) - II(e_l, e_k)|`.
    pub symmetry: f64,
    /// Largest `|g_hat(II(e_k, e_l), e_m)|`.
    pub tangential: f64,
}

impl SecondFundamentalForm {
    pub fn compute(frame: &GraphFrame, jet: &AmbientJet) -> Result<Self, GraphError> {
        let n = frame.n();
        let mut ii = vec![vec![Vec::new(); n]; n];
        for k in 0..n {
            for l in 0..n {
                ii[k][l] = ii_apply(frame, jet, &frame.e_chart_vec(k), &frame.e_chart_vec(l))?;
            }
        }
        let mut coeffs = vec![DMatrix::zeros(n, n); n];
        let mut symmetry: f64 = 0.0;
        let mut tangential: f64 = 0.0;
        for k in 0..n {
            for l in 0..n {
                for (p, c) in coeffs.iter_mut().enumerate() {
                    let ep: Vec<f64> = frame.e_perp.column(p).iter().copied().collect();
                    c[(k, l)] = -frame.g_hat_apply(&ii[k][l], &ep);
                }
                let diff = ii[k][l].iter().zip(&ii[l][k]).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                symmetry = symmetry.max(diff);
                for m in 0..n {
                    tangential = tangential.max(frame.g_hat_apply(&ii[k][l], &frame.e_vec(m)).abs());
                }
            }
        }
        let mut mean = vec![0.0; 2 * n];
        for (l, row) in ii.iter().enumerate() {
            for (h, v) in mean.iter_mut().zip(&row[l]) {
                *h += v;
            }
        }
        let mean_norm = bilinear(&frame.s_hat, &mean, &mean).max(0.0).sqrt();
        Ok(Self { ii, coeffs, mean, mean_norm, symmetry, tangential })
    }
}

/// Mean curvature data of the graph at a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCurvature {
    /// `|H|` measured with `S_hat`.
    pub norm: f64,
    pub symmetry: f64,
    pub tangential: f64,
    pub step: f64,
}

pub fn second_fundamental_form(
    chart: &GraphChart,
    ambient: &Ambient,
    probe: &Probe,
) -> Result<(GraphFrame, AmbientJet, SecondFundamentalForm), GraphError> {
    let frame = orthonormal_frame(chart, ambient, probe)?;
    let jet = AmbientJet::compute(ambient, &frame.point)?;
    let form = SecondFundamentalForm::compute(&frame, &jet)?;
    Ok((frame, jet, form))
}

/// `|sum_l II(e_l, e_l)|` in the `S_hat` norm.
pub fn mean_curvature_residual(
    chart: &GraphChart,
    ambient: &Ambient,
    probe: &Probe,
) -> Result<MeanCurvature, GraphError> {
    let (_, _, form) = second_fundamental_form(chart, ambient, probe)?;
    Ok(MeanCurvature {
        norm: form.mean_norm,
        symmetry: form.symmetry,
        tangential: form.tangential,
        step: chart.max_step(),
    })
}

/// `g_hat^{-1} S_hat w`.
pub(crate) fn raise_s(frame: &GraphFrame, jet: &AmbientJet, w: &[f64]) -> Vec<f64> {
    let v = &jet.metric.g_inv * (&frame.s_hat * DVector::from_column_slice(w));
    v.as_slice().to_vec()
}
