use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::transport::measure::DiscreteMeasure;

/// How a solution was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact { algorithm: String },
    Sinkhorn { eps_schedule: Vec<f64>, iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
}

/// Discrete transport plan with potentials `u + ubar + c >= 0` and map samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    pub method: Method,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub plan: Vec<PlanEntry>,
    pub u: Vec<f64>,
    pub u_bar: Vec<f64>,
    /// Row barycenter of the plan; the image atom for permutation plans.
    pub map: Vec<Vec<f64>>,
    /// Entropy of each conditional row distribution.
    pub row_entropy: Vec<f64>,
    pub sharp: Vec<bool>,
    /// Row-major `dF` by centered differences where the source grid allows it.
    pub jacobians: Vec<Option<Vec<f64>>>,
    pub primal: f64,
    /// Dual objective of the returned potentials.
    pub dual: f64,
    /// Dual objective after a c-transform, a certified lower bound on the optimum.
    pub dual_bound: f64,
    /// Sum of absolute marginal errors on both sides.
    pub marginal_residual: f64,
    /// `min u_i + ubar_j + c_ij` over all pairs.
    pub min_slack: f64,
    /// `max |u_i + ubar_j + c_ij|` over the plan support.
    pub support_slack: f64,
}

/// Rows whose entropy exceeds the median by more than this are unsharp.
pub const SHARPNESS_MARGIN: f64 = std::f64::consts::LN_2 * 2.0;

impl TransportSolution {
    pub(crate) fn assemble(
        method: Method,
        cost: &[f64],
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        plan: Vec<(usize, usize, f64)>,
        u: Vec<f64>,
        u_bar: Vec<f64>,
    ) -> Self {
        let (m, n) = (mu.len(), nu.len());
        let dim = nu.points[0].len();
        let mut row_mass = vec![0.0; m];
        let mut col_mass = vec![0.0; n];
        let mut bary = vec![vec![0.0; dim]; m];
        let mut primal = 0.0;
        let mut support_slack: f64 = 0.0;
        for &(i, j, w) in &plan {
            row_mass[i] += w;
            col_mass[j] += w;
            primal += w * cost[i * n + j];
            for (b, y) in bary[i].iter_mut().zip(&nu.points[j]) {
                *b += w * y;
            }
            support_slack = support_slack.max((u[i] + u_bar[j] + cost[i * n + j]).abs());
        }
        let mut row_entropy = vec![0.0; m];
        for &(i, _, w) in &plan {
            let p = w / row_mass[i];
            if p > 0.0 {
                row_entropy[i] -= p * p.ln();
            }
        }
        let map: Vec<Vec<f64>> =
            bary.into_iter().zip(&row_mass).map(|(b, &r)| b.into_iter().map(|v| v / r).collect()).collect();
        let marginal_residual = row_mass.iter().zip(&mu.weights).map(|(a, b)| (a - b).abs()).sum::<f64>()
            + col_mass.iter().zip(&nu.weights).map(|(a, b)| (a - b).abs()).sum::<f64>();

        let mut min_slack = f64::INFINITY;
        let mut phi_ct = vec![f64::INFINITY; m];
        for i in 0..m {
            for j in 0..n {
                let c = cost[i * n + j];
                min_slack = min_slack.min(u[i] + u_bar[j] + c);
                phi_ct[i] = phi_ct[i].min(c + u_bar[j]);
            }
        }
        let dual = -(dot(&mu.weights, &u) + dot(&nu.weights, &u_bar));
        let dual_bound = dot(&mu.weights, &phi_ct) - dot(&nu.weights, &u_bar);

        let median = median(&row_entropy);
        let sharp = row_entropy.iter().map(|&h| h <= median + SHARPNESS_MARGIN).collect();

        let mut sol = TransportSolution {
            method,
            mu: mu.clone(),
            nu: nu.clone(),
            plan: plan.into_iter().map(|(i, j, mass)| PlanEntry { i, j, mass }).collect(),
            u,
            u_bar,
            map,
            row_entropy,
            sharp,
            jacobians: vec![None; m],
            primal,
            dual,
            dual_bound,
            marginal_residual,
            min_slack,
            support_slack,
        };
        sol.jacobians = (0..m).map(|i| sol.map_jacobian(i).ok().map(|j| j.as_slice().to_vec())).collect();
        sol
    }

    pub fn duality_gap(&self) -> f64 {
        self.primal - self.dual
    }

    pub fn dim(&self) -> usize {
        self.map[0].len()
    }

    /// Centered-difference Jacobian of the map at source atom `index`.
    /// Stored column-major as nalgebra does.
    pub fn map_jacobian(&self, index: usize) -> Result<DMatrix<f64>, SolverError> {
        let grid = self.mu.grid.as_ref().ok_or(SolverError::NotInterior { index })?;
        let idx = grid.multi_index(index);
        if !grid.is_interior(&idx, 1) {
            return Err(SolverError::NotInterior { index });
        }
        let steps = grid.steps();
        let n = grid.dim();
        let mut jac = DMatrix::zeros(self.dim(), n);
        for a in 0..n {
            let mut e = vec![0i64; n];
            e[a] = 1;
            let plus = grid.offset(&idx, &e).ok_or(SolverError::NotInterior { index })?;
            e[a] = -1;
            let minus = grid.offset(&idx, &e).ok_or(SolverError::NotInterior { index })?;
            for k in 0..self.dim() {
                jac[(k, a)] = (self.map[plus][k] - self.map[minus][k]) / (2.0 * steps[a]);
            }
        }
        Ok(jac)
    }

    pub fn stored_jacobian(&self, index: usize) -> Option<DMatrix<f64>> {
        let d = self.dim();
        self.jacobians.get(index)?.as_ref().map(|v| DMatrix::from_column_slice(d, d, v))
    }

    /// Canonical JSON text (sorted keys, 17 significant digits).
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("solution is serializable");
        crate::canonical::to_string(&value)
    }

    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        serde_json::from_str(text).map_err(|e| SolverError::InvalidInput(format!("solution file: {e}")))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}
