use nalgebra::DMatrix;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, GraphError};
use crate::geometry::jet::{CovariantJet, FieldJet, MetricJet};
use crate::geometry::Ambient;
use crate::graph::chart::{GraphChart, Probe};
use crate::graph::frame::{bilinear, orthonormal_frame, GraphFrame};
use crate::graph::second_fundamental::{ii_apply, raise_s, AmbientJet, SecondFundamentalForm};

pub const TERM_NAMES: [&str; 8] = [
    "hessian_s",
    "ds_ii_left",
    "ds_ii_right",
    "s_ii_ii",
    "g_ii_ii_s_left",
    "g_ii_ii_s_right",
    "curvature_raised",
    "curvature_tangential",
];

/// The eight groups on the right-hand side of the identity for `(Delta S)(X, Y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RhsTerms {
    /// `sum_l (D^2_{e_l, e_l} S_hat)(X, Y)`.
    pub hessian_s: f64,
    /// `2 sum_l (D_{e_l} S_hat)(II(e_l, X), Y)`.
    pub ds_ii_left: f64,
    /// `2 sum_l (D_{e_l} S_hat)(X, II(e_l, Y))`.
    pub ds_ii_right: f64,
    /// `2 sum_l S_hat(II(e_l, X), II(e_l, Y))`.
    pub s_ii_ii: f64,
    /// `-sum_{k,l} g_hat(II(e_l, X), II(e_l, e_k)) S(e_k, Y)`.
    pub g_ii_ii_s_left: f64,
    /// `-sum_{k,l} g_hat(II(e_l, Y), II(e_l, e_k)) S(X, e_k)`.
    pub g_ii_ii_s_right: f64,
    /// `-sum_l [R_hat(e_l, X, e_l, g_hat^{-1} S_hat Y) + R_hat(e_l, Y, e_l, g_hat^{-1} S_hat X)]`.
    pub curvature_raised: f64,
    /// `sum_{k,l} [R_hat(e_l, X, e_l, e_k) S(e_k, Y) + R_hat(e_l, Y, e_l, e_k) S(X, e_k)]`.
    pub curvature_tangential: f64,
}

impl RhsTerms {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.hessian_s,
            self.ds_ii_left,
            self.ds_ii_right,
            self.s_ii_ii,
            self.g_ii_ii_s_left,
            self.g_ii_ii_s_right,
            self.curvature_raised,
            self.curvature_tangential,
        ]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    pub fn masked_total(&self, mask: &[bool; 8]) -> f64 {
        self.as_array().iter().zip(mask).filter(|(_, &on)| on).map(|(v, _)| v).sum()
    }
}

/// Right-hand side groups for tangent directions given in chart coefficients.
pub fn rhs_terms(frame: &GraphFrame, jet: &AmbientJet, x: &[f64], y: &[f64]) -> Result<RhsTerms, GraphError> {
    let n = frame.n();
    let tx = frame.tangent(x);
    let ty = frame.tangent(y);
    let e: Vec<Vec<f64>> = (0..n).map(|k| frame.e_vec(k)).collect();
    let ec: Vec<Vec<f64>> = (0..n).map(|k| frame.e_chart_vec(k)).collect();
    let s = &frame.s_hat;
    let ii_x: Vec<Vec<f64>> = ec.iter().map(|el| ii_apply(frame, jet, el, x)).collect::<Result<_, _>>()?;
    let ii_y: Vec<Vec<f64>> = ec.iter().map(|el| ii_apply(frame, jet, el, y)).collect::<Result<_, _>>()?;
    let mut ii_e = vec![vec![Vec::new(); n]; n];
    for l in 0..n {
        for k in 0..n {
            ii_e[l][k] = ii_apply(frame, jet, &ec[l], &ec[k])?;
        }
    }
    let sx = raise_s(frame, jet, &tx);
    let sy = raise_s(frame, jet, &ty);
    let mut t = RhsTerms::default();
    for l in 0..n {
        t.hessian_s += jet.cov.second_apply(&e[l], &e[l], &tx, &ty);
        t.ds_ii_left += 2.0 * jet.cov.first_apply(&e[l], &ii_x[l], &ty);
        t.ds_ii_right += 2.0 * jet.cov.first_apply(&e[l], &tx, &ii_y[l]);
        t.s_ii_ii += 2.0 * bilinear(s, &ii_x[l], &ii_y[l]);
        t.curvature_raised -= jet.riemann(&e[l], &tx, &e[l], &sy) + jet.riemann(&e[l], &ty, &e[l], &sx);
        for k in 0..n {
            let s_ky = bilinear(s, &e[k], &ty);
            let s_xk = bilinear(s, &tx, &e[k]);
            t.g_ii_ii_s_left -= frame.g_hat_apply(&ii_x[l], &ii_e[l][k]) * s_ky;
            t.g_ii_ii_s_right -= frame.g_hat_apply(&ii_y[l], &ii_e[l][k]) * s_xk;
            t.curvature_tangential +=
                jet.riemann(&e[l], &tx, &e[l], &e[k]) * s_ky + jet.riemann(&e[l], &ty, &e[l], &e[k]) * s_xk;
        }
    }
    Ok(t)
}

/// Jets of the induced metric and restricted tensor in the x-chart, by
/// three-point differences with the chart steps.
pub fn chart_jets(chart: &GraphChart, ambient: &Ambient, probe: &Probe) -> Result<(FieldJet, FieldJet), GraphError> {
    let n = chart.dim;
    let pull = |offset: &[i64]| -> Result<(DMatrix<f64>, DMatrix<f64>), GraphError> {
        let cp = chart.neighbor(probe, offset)?;
        let z = cp.lift();
        let t = cp.tangent_basis();
        let g = t.transpose() * ambient.g_hat.eval(&z)? * &t;
        let s = t.transpose() * ambient.s_hat.eval(&z)? * &t;
        Ok((g, s))
    };
    let mut off = vec![0i64; n];
    let (g0, s0) = pull(&off)?;
    let mut gd1 = vec![DMatrix::zeros(n, n); n];
    let mut sd1 = gd1.clone();
    let mut gd2 = vec![vec![DMatrix::zeros(n, n); n]; n];
    let mut sd2 = gd2.clone();
    let h = &chart.steps;
    for a in 0..n {
        off[a] = 1;
        let (gp, sp) = pull(&off)?;
        off[a] = -1;
        let (gm, sm) = pull(&off)?;
        off[a] = 0;
        gd1[a] = (&gp - &gm) / (2.0 * h[a]);
        sd1[a] = (&sp - &sm) / (2.0 * h[a]);
        gd2[a][a] = (&gp - &g0 * 2.0 + &gm) / (h[a] * h[a]);
        sd2[a][a] = (&sp - &s0 * 2.0 + &sm) / (h[a] * h[a]);
        for b in (a + 1)..n {
            let corner = |sa: i64, sb: i64| {
                let mut o = vec![0i64; n];
                o[a] = sa;
                o[b] = sb;
                pull(&o)
            };
            let (gpp, spp) = corner(1, 1)?;
            let (gpm, spm) = corner(1, -1)?;
            let (gmp, smp) = corner(-1, 1)?;
            let (gmm, smm) = corner(-1, -1)?;
            let denom = 4.0 * h[a] * h[b];
            gd2[a][b] = (gpp - gpm - gmp + gmm) / denom;
            sd2[a][b] = (spp - spm - smp + smm) / denom;
            gd2[b][a] = gd2[a][b].clone();
            sd2[b][a] = sd2[a][b].clone();
        }
    }
    let x = chart.point(probe)?.x;
    let step = chart.max_step();
    Ok((FieldJet::from_parts(x.clone(), g0, gd1, gd2, step), FieldJet::from_parts(x, s0, sd1, sd2, step)))
}

/// `(Delta S)(X, Y) = g^{dc} (D^2_{d,c} S)(X, Y)` in the x-chart.
pub fn intrinsic_laplacian(
    chart: &GraphChart,
    ambient: &Ambient,
    probe: &Probe,
    x: &[f64],
    y: &[f64],
) -> Result<f64, GraphError> {
    let (gj, sj) = chart_jets(chart, ambient, probe)?;
    let metric = MetricJet::from_jet(gj).map_err(GraphError::Geometry)?;
    let cov = CovariantJet::compute(&sj, &metric);
    let n = chart.dim;
    let mut lap = 0.0;
    for d in 0..n {
        for c in 0..n {
            let gi = metric.g_inv[(d, c)];
            if gi == 0.0 {
                continue;
            }
            let mut inner = 0.0;
            for a in 0..n {
                for b in 0..n {
                    inner += cov.second.get(d, c, a, b) * x[a] * y[b];
                }
            }
            lap += gi * inner;
        }
    }
    Ok(lap)
}

/// Tangent directions for the identity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    /// `X = Y = e_n`, the top eigendirection of `S`.
    TopEigen,
    /// `X = e_k, Y = e_l` in the frame.
    Frame(usize, usize),
    /// Chart coefficients.
    Chart(Vec<f64>, Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct IdentityOptions {
    pub directions: Directions,
    /// Which right-hand groups enter the residual.
    pub terms: [bool; 8],
    /// The identity is applied only when `|H| <= mean_curvature_factor * step`.
    pub mean_curvature_factor: f64,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self { directions: Directions::TopEigen, terms: [true; 8], mean_curvature_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub point: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lhs: f64,
    pub rhs_terms: RhsTerms,
    pub rhs: f64,
    pub residual: f64,
    pub grid_step: f64,
    pub mean_curvature: f64,
    /// `residual / step^0.8`.
    pub constant: f64,
}

/// Compares the chart Laplacian of `S` with the eight ambient groups.
pub fn elliptic_identity_residual(
    chart: &GraphChart,
    ambient: &Ambient,
    probe: &Probe,
    opts: &IdentityOptions,
) -> Result<IdentityReport, GraphError> {
    let frame = orthonormal_frame(chart, ambient, probe)?;
    let jet = AmbientJet::compute(ambient, &frame.point)?;
    let form = SecondFundamentalForm::compute(&frame, &jet)?;
    let step = chart.max_step();
    let threshold = opts.mean_curvature_factor * step;
    if form.mean_norm > threshold {
        return Err(GraphError::MeanCurvatureTooLarge { norm: form.mean_norm, threshold });
    }
    let n = frame.n();
    let (x, y) = match &opts.directions {
        Directions::TopEigen => (frame.e_chart_vec(n - 1), frame.e_chart_vec(n - 1)),
        Directions::Frame(k, l) if *k < n && *l < n => (frame.e_chart_vec(*k), frame.e_chart_vec(*l)),
        Directions::Chart(x, y) if x.len() == n && y.len() == n => (x.clone(), y.clone()),
        _ => {
            return Err(GraphError::Geometry(GeometryError::InvalidInput(
                "identity directions do not fit the chart".into(),
            )))
        }
    };
    let rhs_terms = rhs_terms(&frame, &jet, &x, &y)?;
    let lhs = intrinsic_laplacian(chart, ambient, probe, &x, &y)?;
    let rhs = rhs_terms.masked_total(&opts.terms);
    let residual = (lhs - rhs).abs();
    Ok(IdentityReport {
        point: frame.point.clone(),
        x,
        y,
        lhs,
        rhs_terms,
        rhs,
        residual,
        grid_step: step,
        mean_curvature: form.mean_norm,
        constant: if step > 0.0 { residual / step.powf(0.8) } else { f64::NAN },
    })
}
