//! Entropic transport by stabilized Sinkhorn scaling with epsilon scaling.
//!
//! The plan is `a_i b_j s_i K_ij t_j` with `K_ij = exp((f_i + g_j - c_ij) / eps)`.
//! Large scalings are absorbed into `(f, g)`, and each stage opens with a
//! log-domain sweep so no row of `K` underflows entirely.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::cost::CostModel;
use crate::transport::measure::DiscreteMeasure;
use crate::transport::solution::{Method, TransportSolution};

const ABSORB_LOG: f64 = 50.0;
const PLAN_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinkhornOptions {
    /// Target L1 error of the row marginal at the final stage.
    pub tol: f64,
    /// Looser target for intermediate stages.
    pub stage_tol: f64,
    pub max_iters: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { tol: 1e-7, stage_tol: 1e-4, max_iters: 200_000 }
    }
}

/// Geometric schedule from `start` down to exactly `end`, dividing by `factor` per stage.
pub fn eps_schedule(start: f64, end: f64, factor: f64) -> Vec<f64> {
    assert!(end > 0.0 && factor > 1.0);
    let mut out = Vec::new();
    let mut eps = start.max(end);
    while eps > end * (1.0 + 1e-12) {
        out.push(eps);
        eps /= factor;
    }
    out.push(end);
    out
}

/// Final epsilon tied to the grid step: `alpha * step^2 * |det c_{x xbar}|^{1/n}`
/// at the centers of the two boxes.
pub fn default_final_eps(model: &CostModel, step: f64, alpha: f64) -> f64 {
    let x = model.domain_x.center();
    let xb = model.domain_xbar.center();
    let det = model.cross_matrix(&x, &xb).determinant().abs();
    let scale = if det.is_finite() && det > 0.0 { det.powf(1.0 / model.dim as f64) } else { 1.0 };
    alpha * step * step * scale
}

/// Default schedule: start at the cost spread and halve down to the final value.
pub fn default_schedule(cost: &[f64], final_eps: f64) -> Vec<f64> {
    let (lo, hi) = cost.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &c| (l.min(c), h.max(c)));
    eps_schedule((hi - lo).max(final_eps), final_eps, 2.0)
}

struct State<'a> {
    cost: &'a [f64],
    a: &'a [f64],
    b: &'a [f64],
    m: usize,
    n: usize,
    eps: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    k: Vec<f64>,
    kt: Vec<f64>,
}

impl State<'_> {
    fn rebuild_kernel(&mut self) {
        let (m, n) = (self.m, self.n);
        for i in 0..m {
            for j in 0..n {
                let v = ((self.f[i] + self.g[j] - self.cost[i * n + j]) / self.eps).exp();
                self.k[i * n + j] = v;
                self.kt[j * m + i] = v;
            }
        }
    }

    fn absorb(&mut self) {
        for (f, s) in self.f.iter_mut().zip(&mut self.s) {
            *f += self.eps * s.ln();
            *s = 1.0;
        }
        for (g, t) in self.g.iter_mut().zip(&mut self.t) {
            *g += self.eps * t.ln();
            *t = 1.0;
        }
    }

    /// Exact log-sum-exp update of `f` then `g`.
    fn log_sweep(&mut self) {
        let (m, n, eps) = (self.m, self.n, self.eps);
        for i in 0..m {
            let row = &self.cost[i * n..(i + 1) * n];
            let lse = log_sum_exp((0..n).map(|j| self.b[j].ln() + (self.g[j] - row[j]) / eps));
            self.f[i] = -eps * lse;
        }
        for j in 0..n {
            let lse = log_sum_exp((0..m).map(|i| self.a[i].ln() + (self.f[i] - self.cost[i * n + j]) / eps));
            self.g[j] = -eps * lse;
        }
        self.s.iter_mut().for_each(|v| *v = 1.0);
        self.t.iter_mut().for_each(|v| *v = 1.0);
        self.rebuild_kernel();
    }

    /// One scaling iteration; `false` if a sum underflowed or overflowed.
    fn iterate(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        for i in 0..m {
            let row = &self.k[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * self.b[j] * self.t[j];
            }
            self.s[i] = 1.0 / acc;
        }
        for j in 0..n {
            let col = &self.kt[j * m..(j + 1) * m];
            let mut acc = 0.0;
            for i in 0..m {
                acc += col[i] * self.a[i] * self.s[i];
            }
            self.t[j] = 1.0 / acc;
        }
        self.s.iter().chain(&self.t).all(|v| v.is_finite() && *v > 0.0)
    }

    fn needs_absorb(&self) -> bool {
        self.s.iter().chain(&self.t).any(|v| v.ln().abs() > ABSORB_LOG)
    }

    /// L1 error of the row marginal (columns are exact right after an update).
    fn row_error(&self) -> f64 {
        let (m, n) = (self.m, self.n);
        let mut err = 0.0;
        for i in 0..m {
            let row = &self.k[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for j in 0..n {
                acc += row[j] * self.b[j] * self.t[j];
            }
            err += (self.a[i] * self.s[i] * acc - self.a[i]).abs();
        }
        err
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Entropic plan for a decreasing epsilon schedule.
pub fn solve_sinkhorn(
    cost: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    schedule: &[f64],
    opts: &SinkhornOptions,
) -> Result<TransportSolution, SolverError> {
    let (m, n) = (mu.len(), nu.len());
    if cost.len() != m * n {
        return Err(SolverError::InvalidInput("cost matrix shape does not match the measures".into()));
    }
    if schedule.is_empty() || schedule.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(SolverError::InvalidInput("epsilon schedule must be finite and positive".into()));
    }
    if schedule.windows(2).any(|w| w[1] > w[0]) {
        return Err(SolverError::InvalidInput("epsilon schedule must be non-increasing".into()));
    }
    let (sm, sn) = (mu.total_mass(), nu.total_mass());
    if (sm - sn).abs() > 1e-12 * sm.max(sn) {
        return Err(SolverError::InfeasibleMarginals { source_mass: sm, target_mass: sn });
    }
    let mut st = State {
        cost,
        a: &mu.weights,
        b: &nu.weights,
        m,
        n,
        eps: schedule[0],
        f: vec![0.0; m],
        g: vec![0.0; n],
        s: vec![1.0; m],
        t: vec![1.0; n],
        k: vec![0.0; m * n],
        kt: vec![0.0; m * n],
    };
    let mut total_iters = 0usize;
    let mut residual = f64::INFINITY;
    for (stage, &eps) in schedule.iter().enumerate() {
        let last = stage + 1 == schedule.len();
        let tol = if last { opts.tol } else { opts.stage_tol.max(opts.tol) };
        st.absorb();
        st.eps = eps;
        st.log_sweep();
        let mut iters = 0usize;
        loop {
            if !st.iterate() {
                // Underflow in the scaling form; drop the scalings and redo the step in the log domain.
                st.log_sweep();
                if !st.iterate() {
                    return Err(SolverError::NumericalOverflow { epsilon: eps });
                }
            }
            iters += 1;
            total_iters += 1;
            if st.needs_absorb() {
                st.absorb();
                st.rebuild_kernel();
            }
            if iters.is_multiple_of(10) || iters == 1 {
                residual = st.row_error();
                if !residual.is_finite() {
                    return Err(SolverError::NumericalOverflow { epsilon: eps });
                }
                if residual < tol {
                    break;
                }
            }
            if iters >= opts.max_iters {
                if last {
                    return Err(SolverError::NoConvergence { iterations: total_iters, residual });
                }
                break;
            }
        }
    }
    st.absorb();
    st.rebuild_kernel();
    let mut plan = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let w = mu.weights[i] * nu.weights[j] * st.k[i * n + j];
            if w >= PLAN_FLOOR {
                plan.push((i, j, w));
            }
        }
    }
    let u = st.f.iter().map(|v| -v).collect();
    let u_bar = st.g.iter().map(|v| -v).collect();
    Ok(TransportSolution::assemble(
        Method::Sinkhorn { eps_schedule: schedule.to_vec(), iterations: total_iters },
        cost,
        mu,
        nu,
        plan,
        u,
        u_bar,
    ))
}
