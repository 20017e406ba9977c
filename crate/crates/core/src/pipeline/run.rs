use std::time::Instant;

use serde::Serialize;

use crate::error::Error;
use crate::estimate::pogorelov::PogorelovReport;
use crate::geometry::mtw::KappaEstimate;
use crate::graph::chart::GraphChart;
use crate::pipeline::dump::dump_fields;
use crate::pipeline::scenario::Scenario;
use crate::pipeline::stages::*;

/// Relative spread of the bound across grids above which it is flagged.
pub const C_BOUND_SPREAD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    /// Completed with a nonfatal flag.
    Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub grid: Option<usize>,
    pub status: StageStatus,
    pub detail: Option<String>,
    pub seconds: Option<f64>,
}

/// Nonfatal conditions under which later stages are adjusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    /// The sampled cross-curvature is not positive.
    MtwViolated,
    /// No positive curvature bound; the interior bound is replaced by the eigenvalue table.
    KappaNonpositive,
    /// One dimension, where the cross-curvature condition is vacuous.
    KappaUndefined,
    /// Some probes were too far from zero mean curvature for the identity.
    MeanCurvatureTooLarge,
    /// The observed bound moved by more than the allowed spread across grids.
    CBoundUnstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridReport {
    pub res: usize,
    pub step: f64,
    pub solve: SolveSummary,
    pub second_order: SecondOrderSummary,
    pub graph: GraphSummary,
    pub pogorelov: Option<PogorelovReport>,
    pub quant: Vec<QuantRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub steps: Vec<f64>,
    pub mean_curvature_rms: Vec<Option<f64>>,
    /// `log(H_first / H_last) / log(step_first / step_last)`.
    pub mean_curvature_order: Option<f64>,
    pub identity_rms: Vec<Option<f64>>,
    pub det_identity_max: Vec<Option<f64>>,
    pub c_bound: Vec<Option<f64>>,
    /// `max / min - 1` over the grids.
    pub c_bound_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub software: Software,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
    pub flags: Vec<Flag>,
    pub geometry: GeometrySummary,
    pub cutoff: crate::estimate::cutoff::Cutoff,
    pub kappa: KappaEstimate,
    pub grids: Vec<GridReport>,
    pub convergence: Convergence,
}

struct Recorder {
    timings: bool,
    stages: Vec<StageRecord>,
}

impl Recorder {
    fn run<T>(
        &mut self,
        name: &str,
        grid: Option<usize>,
        f: impl FnOnce() -> Result<T, Error>,
    ) -> Result<(T, usize), Error> {
        let start = Instant::now();
        let out = f().map_err(|e| Error::stage(name, e))?;
        let seconds = self.timings.then(|| start.elapsed().as_secs_f64());
        self.stages.push(StageRecord { name: name.into(), grid, status: StageStatus::Ok, detail: None, seconds });
        Ok((out, self.stages.len() - 1))
    }

    fn mark(&mut self, slot: usize, status: StageStatus, detail: impl Into<String>) {
        self.stages[slot].status = status;
        self.stages[slot].detail = Some(detail.into());
    }
}

/// Runs geometry, curvature bound, and per grid: solve, second order, graph, estimate.
///
/// Fatal errors abort with the stage name; flags adjust later stages instead.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport, Error> {
    scenario.validate()?;
    let mut rec = Recorder { timings: scenario.output.timings, stages: Vec::new() };
    let mut flags = Vec::new();

    let (geo, _) = rec.run("geometry", None, || scenario.build_geometry())?;
    let (geometry, _) = rec.run("geometry_checks", None, || geometry_summary(&geo))?;
    let cutoff = scenario.build_cutoff()?;
    let (kappa, slot) = rec.run("mtw_scan", None, || kappa_stage(scenario, &geo, &cutoff))?;
    let positive = matches!(kappa.kappa, Some(k) if k > 0.0);
    if kappa.kappa.is_none() {
        flags.push(Flag::KappaUndefined);
        rec.mark(slot, StageStatus::Flagged, "curvature bound undefined in one dimension");
    } else if !positive {
        flags.extend([Flag::MtwViolated, Flag::KappaNonpositive]);
        rec.mark(slot, StageStatus::Flagged, format!("sampled minimum {:e}", kappa.raw_min.unwrap_or(f64::NAN)));
    }
    if let Some(dir) = &scenario.output.dump {
        rec.run("dump", None, || dump_fields(&geo, scenario.output.dump_grid, dir))?;
    }

    let mut grids = Vec::new();
    for &res in &scenario.grids {
        let g = Some(res);
        let (sol, _) = rec.run("solve", g, || solve_stage(scenario, &geo, res, scenario.solver.method))?;
        if let Some(path) = &scenario.output.solution {
            let path = path.replace("{res}", &res.to_string());
            std::fs::write(&path, sol.to_json()).map_err(|e| Error::io(path, e))?;
        }
        let (second_order, _) = rec.run("second_order", g, || Ok(second_order_stage(&geo, &sol)))?;
        let chart = GraphChart::from_solution(&sol).map_err(|e| Error::stage("graph", e))?;
        let (rows, slot) = rec.run("graph", g, || {
            let probes = graph_probes(scenario, &sol)?;
            Ok(graph_rows(&chart, &geo, &sol, &probes, &scenario.identity))
        })?;
        let graph = graph_summary(&rows, chart.max_step());
        if graph.identity.refused > 0 {
            rec.mark(slot, StageStatus::Flagged, format!("identity refused at {} probes", graph.identity.refused));
            if !flags.contains(&Flag::MeanCurvatureTooLarge) {
                flags.push(Flag::MeanCurvatureTooLarge);
            }
        }
        let (report, slot) = rec.run("verify", g, || verify_stage(&chart, &geo, &cutoff, &kappa))?;
        let quant = quant_rows(&report);
        let pogorelov = if positive {
            Some(report)
        } else {
            rec.mark(slot, StageStatus::Flagged, "no positive curvature bound; eigenvalue table only");
            None
        };
        grids.push(GridReport {
            res,
            step: chart.max_step(),
            solve: solve_summary(&sol),
            second_order,
            graph,
            pogorelov,
            quant,
        });
    }

    let convergence = convergence(&grids);
    if convergence.c_bound_spread.is_some_and(|s| !(s < C_BOUND_SPREAD)) {
        flags.push(Flag::CBoundUnstable);
    }
    flags.sort();
    Ok(RunReport {
        software: Software { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() },
        scenario: scenario.name.clone(),
        config_hash: scenario.config_hash(),
        seed: scenario.seed,
        stages: rec.stages,
        flags,
        geometry,
        cutoff,
        kappa,
        grids,
        convergence,
    })
}

fn convergence(grids: &[GridReport]) -> Convergence {
    let steps: Vec<f64> = grids.iter().map(|g| g.step).collect();
    let mean_curvature_rms: Vec<Option<f64>> = grids.iter().map(|g| g.graph.mean_curvature.map(|s| s.rms)).collect();
    let mean_curvature_order = match (mean_curvature_rms.first(), mean_curvature_rms.last()) {
        (Some(Some(a)), Some(Some(b))) if grids.len() > 1 && *a > 0.0 && *b > 0.0 => {
            Some((a / b).ln() / (steps[0] / steps[steps.len() - 1]).ln())
        }
        _ => None,
    };
    let c_bound: Vec<Option<f64>> = grids.iter().map(|g| g.pogorelov.as_ref().and_then(|p| p.c_bound)).collect();
    let c_bound_spread = if grids.len() > 1 && c_bound.iter().all(|c| c.is_some_and(|v| v.is_finite() && v > 0.0)) {
        let v: Vec<f64> = c_bound.iter().flatten().copied().collect();
        let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &x| (l.min(x), h.max(x)));
        Some(hi / lo - 1.0)
    } else {
        None
    };
    Convergence {
        steps,
        mean_curvature_rms,
        mean_curvature_order,
        identity_rms: grids.iter().map(|g| g.graph.identity.residual.map(|s| s.rms)).collect(),
        det_identity_max: grids.iter().map(|g| g.second_order.det_identity.map(|s| s.max)).collect(),
        c_bound,
        c_bound_spread,
    }
}
