//! Individual pipeline stages, shared by the full run and the single-stage commands.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, GraphError};
use crate::estimate::cutoff::Cutoff;
use crate::estimate::maxpoint::grid_probes;
use crate::estimate::pogorelov::{check_pogorelov_bound, PogorelovReport};
use crate::geometry::metric::{chi, volume_forms};
use crate::geometry::mtw::{estimate_kappa, KappaEstimate};
use crate::geometry::{BoxDomain, Geometry};
use crate::graph::chart::{GraphChart, Probe};
use crate::graph::hessian_metric::hessian_metric_check;
use crate::graph::identity::{elliptic_identity_residual, IdentityOptions, IdentityReport};
use crate::graph::second_fundamental::{second_fundamental_form, MeanCurvature};
use crate::pipeline::scenario::{Scenario, SolverMethod};
use crate::transport::measure::{cost_matrix, discretize, GridSpec};
use crate::transport::second_order::{check_det_identity, second_order_data};
use crate::transport::sinkhorn::{default_final_eps, default_schedule, solve_sinkhorn};
use crate::transport::solution::TransportSolution;
use crate::transport::solve_exact;

/// Largest and root-mean-square value of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub max: f64,
    pub rms: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (mut count, mut max, mut sq) = (0usize, f64::NEG_INFINITY, 0.0);
        for v in values {
            count += 1;
            max = max.max(v);
            sq += v * v;
        }
        (count > 0).then(|| Stats { count, max, rms: (sq / count as f64).sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeCheck {
    pub samples: usize,
    /// Largest relative gap between `sqrt|det g_hat|` and `rho rho_bar`.
    pub g_hat: f64,
    /// Largest relative gap between `sqrt det S_hat` and `rho rho_bar`.
    pub s_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySummary {
    pub dim: usize,
    pub cost: String,
    pub chi_at_centers: f64,
    pub volume: VolumeCheck,
    pub signature_ok: bool,
}

/// Samples per axis of the product grid used for the volume and signature checks.
const VOLUME_GRID: usize = 3;

pub fn geometry_summary(geo: &Geometry) -> Result<GeometrySummary, Error> {
    let m = &geo.model;
    let n = m.dim;
    let chi_at_centers = chi(m, &geo.dens, &m.domain_x.center(), &m.domain_xbar.center())?;
    let points = m.domain_x.product(&m.domain_xbar).midpoint_grid(VOLUME_GRID);
    let (mut g_gap, mut s_gap): (f64, f64) = (0.0, 0.0);
    let mut signature_ok = true;
    for p in &points {
        let (g, s, target) = volume_forms(m, &geo.dens, &p[..n], &p[n..])?;
        g_gap = g_gap.max((g - target).abs() / target);
        s_gap = s_gap.max((s - target).abs() / target);
        signature_ok &= geo.ambient.g_hat.check_signature(p)? && geo.ambient.s_hat.check_signature(p)?;
    }
    Ok(GeometrySummary {
        dim: n,
        cost: m.kind.name().to_string(),
        chi_at_centers,
        volume: VolumeCheck { samples: points.len(), g_hat: g_gap, s_hat: s_gap },
        signature_ok,
    })
}

/// Bounding box of the cutoff support, clipped to the source box.
pub fn cutoff_region(cutoff: &Cutoff, source: &BoxDomain) -> BoxDomain {
    let r = cutoff.radius;
    let lo = cutoff.center.iter().zip(&source.lo).map(|(c, l)| (c - r).max(*l)).collect();
    let hi = cutoff.center.iter().zip(&source.hi).map(|(c, h)| (c + r).min(*h)).collect();
    BoxDomain { lo, hi }
}

/// Sampled curvature bound over the cutoff region times the target box.
pub fn kappa_stage(scenario: &Scenario, geo: &Geometry, cutoff: &Cutoff) -> Result<KappaEstimate, Error> {
    let region = cutoff_region(cutoff, &geo.model.domain_x);
    Ok(estimate_kappa(&geo.model, &geo.dens, &region, &geo.model.domain_xbar, &scenario.kappa_options())?)
}

pub fn solve_stage(
    scenario: &Scenario,
    geo: &Geometry,
    res: usize,
    method: SolverMethod,
) -> Result<TransportSolution, Error> {
    let m = &geo.model;
    let gx = GridSpec::uniform(m.domain_x.clone(), res)?;
    let mu = discretize(&geo.dens.rho, &gx)?;
    let nu = discretize(&geo.dens.rho_bar, &GridSpec::uniform(m.domain_xbar.clone(), res)?)?;
    let cost = cost_matrix(m, &mu, &nu);
    let sol = match method {
        SolverMethod::Exact => solve_exact(&cost, &mu, &nu)?,
        SolverMethod::Sinkhorn => {
            let spec = &scenario.solver;
            let schedule = match &spec.eps_schedule {
                Some(s) => s.clone(),
                None => default_schedule(&cost, default_final_eps(m, gx.max_step(), spec.alpha)),
            };
            solve_sinkhorn(&cost, &mu, &nu, &schedule, &spec.sinkhorn_options())?
        }
    };
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub atoms: usize,
    pub method: crate::transport::solution::Method,
    pub primal: f64,
    pub dual: f64,
    pub duality_gap: f64,
    pub dual_bound: f64,
    pub marginal_residual: f64,
    pub min_slack: f64,
    pub support_slack: f64,
    pub sharp_fraction: f64,
}

pub fn solve_summary(sol: &TransportSolution) -> SolveSummary {
    SolveSummary {
        atoms: sol.mu.len(),
        method: sol.method.clone(),
        primal: sol.primal,
        dual: sol.dual,
        duality_gap: sol.duality_gap(),
        dual_bound: sol.dual_bound,
        marginal_residual: sol.marginal_residual,
        min_slack: sol.min_slack,
        support_slack: sol.support_slack,
        sharp_fraction: sol.sharp.iter().filter(|&&s| s).count() as f64 / sol.sharp.len() as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondOrderSummary {
    pub evaluated: usize,
    pub skipped: usize,
    /// Relative gap `|det A - (rho / vol_h)^2| / (rho / vol_h)^2`.
    pub det_identity: Option<Stats>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub b_asymmetry: Option<f64>,
}

pub fn second_order_stage(geo: &Geometry, sol: &TransportSolution) -> SecondOrderSummary {
    let data: Vec<_> = (0..sol.mu.len()).map(|i| second_order_data(&geo.model, &geo.dens, sol, i).ok()).collect();
    let ok: Vec<_> = data.iter().flatten().collect();
    let lambdas = ok.iter().flat_map(|d| d.lambdas.iter().copied());
    SecondOrderSummary {
        evaluated: ok.len(),
        skipped: data.len() - ok.len(),
        det_identity: Stats::of(ok.iter().map(|d| check_det_identity(d, &geo.dens, &geo.model.h))),
        lambda_min: lambdas.clone().reduce(f64::min),
        lambda_max: lambdas.reduce(f64::max),
        b_asymmetry: ok.iter().map(|d| d.b_asymmetry).reduce(f64::max),
    }
}

/// Graph quantities at one probe; `error` explains a missing part.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphRow {
    pub index: usize,
    pub x: Vec<f64>,
    pub mean_curvature: Option<MeanCurvature>,
    pub frame_residual: Option<f64>,
    pub identity: Option<IdentityReport>,
    pub identity_refused: bool,
    pub hessian_metric: Option<f64>,
    pub error: Option<String>,
}

pub fn graph_rows(
    chart: &GraphChart,
    geo: &Geometry,
    sol: &TransportSolution,
    probes: &[usize],
    opts: &IdentityOptions,
) -> Vec<GraphRow> {
    let quadratic = geo.model.is_quadratic_like();
    probes
        .par_iter()
        .map(|&index| {
            let probe = Probe::Node(index);
            let mut row = GraphRow {
                index,
                x: sol.mu.points.get(index).cloned().unwrap_or_default(),
                mean_curvature: None,
                frame_residual: None,
                identity: None,
                identity_refused: false,
                hessian_metric: None,
                error: None,
            };
            match second_fundamental_form(chart, &geo.ambient, &probe) {
                Ok((frame, _, form)) => {
                    row.frame_residual = Some(frame.residuals.max());
                    row.mean_curvature = Some(MeanCurvature {
                        norm: form.mean_norm,
                        symmetry: form.symmetry,
                        tangential: form.tangential,
                        step: chart.max_step(),
                    });
                }
                Err(e) => {
                    row.error = Some(e.to_string());
                    return row;
                }
            }
            match elliptic_identity_residual(chart, &geo.ambient, &probe, opts) {
                Ok(rep) => row.identity = Some(rep),
                Err(GraphError::MeanCurvatureTooLarge { .. }) => row.identity_refused = true,
                Err(e) => row.error = Some(e.to_string()),
            }
            if quadratic {
                row.hessian_metric = hessian_metric_check(chart, geo, sol, index).ok().map(|c| c.residual);
            }
            row
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySummary {
    pub evaluated: usize,
    pub refused: usize,
    pub residual: Option<Stats>,
    /// `rms residual / step^0.8`.
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub probes: usize,
    pub evaluated: usize,
    pub step: f64,
    pub mean_curvature: Option<Stats>,
    pub ii_symmetry: Option<f64>,
    pub ii_tangential: Option<f64>,
    pub frame_residual: Option<f64>,
    pub identity: IdentitySummary,
    pub hessian_metric: Option<Stats>,
}

pub fn graph_summary(rows: &[GraphRow], step: f64) -> GraphSummary {
    let mc: Vec<&MeanCurvature> = rows.iter().filter_map(|r| r.mean_curvature.as_ref()).collect();
    let residual = Stats::of(rows.iter().filter_map(|r| r.identity.as_ref().map(|i| i.residual)));
    GraphSummary {
        probes: rows.len(),
        evaluated: mc.len(),
        step,
        mean_curvature: Stats::of(mc.iter().map(|m| m.norm)),
        ii_symmetry: mc.iter().map(|m| m.symmetry).reduce(f64::max),
        ii_tangential: mc.iter().map(|m| m.tangential).reduce(f64::max),
        frame_residual: rows.iter().filter_map(|r| r.frame_residual).reduce(f64::max),
        identity: IdentitySummary {
            evaluated: residual.map_or(0, |s| s.count),
            refused: rows.iter().filter(|r| r.identity_refused).count(),
            residual,
            constant: residual.map(|s| s.rms / step.powf(0.8)),
        },
        hessian_metric: Stats::of(rows.iter().filter_map(|r| r.hessian_metric)),
    }
}

/// Probe list for the graph stage: the declared nodes, or every node of the grid.
pub fn graph_probes(scenario: &Scenario, sol: &TransportSolution) -> Result<Vec<usize>, Error> {
    match &scenario.probes {
        Some(p) => {
            if let Some(bad) = p.iter().find(|&&i| i >= sol.mu.len()) {
                return Err(crate::error::ConfigError::Invalid(format!(
                    "probe index {bad} exceeds the {} source atoms",
                    sol.mu.len()
                ))
                .into());
            }
            Ok(p.clone())
        }
        None => Ok((0..sol.mu.len()).collect()),
    }
}

/// `lambda_i + 1/lambda_i` per sample, the form that survives without a positive `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantRow {
    pub index: Option<usize>,
    pub x: Vec<f64>,
    pub phi: f64,
    pub lambdas: Vec<f64>,
    pub lambda_sums: Vec<f64>,
}

pub fn quant_rows(report: &PogorelovReport) -> Vec<QuantRow> {
    report
        .rows
        .iter()
        .map(|r| QuantRow {
            index: r.index,
            x: r.x.clone(),
            phi: r.phi,
            lambdas: r.lambdas.clone(),
            lambda_sums: r.lambda_sums.clone(),
        })
        .collect()
}

pub fn verify_stage(
    chart: &GraphChart,
    geo: &Geometry,
    cutoff: &Cutoff,
    kappa: &KappaEstimate,
) -> Result<PogorelovReport, Error> {
    Ok(check_pogorelov_bound(chart, geo, cutoff, kappa, &grid_probes(chart))?)
}

/// Output of the stand-alone curvature scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub config_hash: String,
    pub geometry: GeometrySummary,
    pub cutoff: Cutoff,
    pub kappa: KappaEstimate,
}

pub fn scan_report(scenario: &Scenario) -> Result<ScanReport, Error> {
    let geo = scenario.build_geometry()?;
    let cutoff = scenario.build_cutoff()?;
    Ok(ScanReport {
        config_hash: scenario.config_hash(),
        geometry: geometry_summary(&geo)?,
        kappa: kappa_stage(scenario, &geo, &cutoff)?,
        cutoff,
    })
}

/// Checks that a stored solution belongs to the scenario's boxes.
pub fn check_solution(scenario: &Scenario, sol: &TransportSolution) -> Result<(), Error> {
    let (x, xb) = (scenario.source_box()?, scenario.target_box()?);
    let fits = sol.mu.grid.is_some()
        && sol.mu.points.iter().all(|p| p.len() == x.dim() && x.contains(p))
        && sol.nu.points.iter().all(|p| p.len() == xb.dim() && xb.contains(p));
    if fits {
        Ok(())
    } else {
        Err(crate::error::ConfigError::Invalid(
            "solution atoms do not lie on the scenario's source grid and target box".into(),
        )
        .into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphReport {
    pub config_hash: String,
    pub atoms: usize,
    pub step: f64,
    pub summary: GraphSummary,
    pub rows: Vec<GraphRow>,
}

/// Graph quantities at the given nodes, or at every node when `probes` is `None`.
pub fn graph_report(
    scenario: &Scenario,
    sol: &TransportSolution,
    probes: Option<Vec<usize>>,
) -> Result<GraphReport, Error> {
    check_solution(scenario, sol)?;
    let geo = scenario.build_geometry()?;
    let chart = GraphChart::from_solution(sol)?;
    let probes = match probes {
        Some(p) => {
            let mut s = scenario.clone();
            s.probes = Some(p);
            graph_probes(&s, sol)?
        }
        None => graph_probes(scenario, sol)?,
    };
    let rows = graph_rows(&chart, &geo, sol, &probes, &scenario.identity);
    Ok(GraphReport {
        config_hash: scenario.config_hash(),
        atoms: sol.mu.len(),
        step: chart.max_step(),
        summary: graph_summary(&rows, chart.max_step()),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub config_hash: String,
    pub cutoff: Cutoff,
    pub kappa: KappaEstimate,
    /// Present only with a positive curvature bound.
    pub pogorelov: Option<PogorelovReport>,
    pub quant: Vec<QuantRow>,
}

pub fn verify_report(scenario: &Scenario, sol: &TransportSolution, cutoff: Cutoff) -> Result<VerifyReport, Error> {
    check_solution(scenario, sol)?;
    let geo = scenario.build_geometry()?;
    let chart = GraphChart::from_solution(sol)?;
    let kappa = kappa_stage(scenario, &geo, &cutoff)?;
    let report = verify_stage(&chart, &geo, &cutoff, &kappa)?;
    let quant = quant_rows(&report);
    let positive = matches!(kappa.kappa, Some(k) if k > 0.0);
    Ok(VerifyReport {
        config_hash: scenario.config_hash(),
        cutoff,
        kappa,
        pogorelov: positive.then_some(report),
        quant,
    })
}
