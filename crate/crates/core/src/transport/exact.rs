//! Exact discrete transport.
//!
//! Equal-weight square instances go through the Hungarian algorithm; anything
//! else through the transportation simplex. Both return potentials `(phi, psi)`
//! with `phi_i + psi_j <= c_ij`, which the caller flips to the `u + ubar + c >= 0`
//! convention.

use crate::error::SolverError;
use crate::transport::measure::DiscreteMeasure;
use crate::transport::solution::{Method, TransportSolution};

const MASS_TOL: f64 = 1e-12;

/// Optimal plan as `(i, j, mass)` triplets plus potentials `phi`, `psi`.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub plan: Vec<(usize, usize, f64)>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Min-cost perfect matching on a square matrix. Returns the column assigned to
/// each row and potentials with `phi_i + psi_j <= c_ij`.
pub fn hungarian(cost: &[f64], n: usize) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based shortest augmenting path formulation.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            let row = (i0 - 1) * n;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[row + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize, f64)>,
}

impl Basis {
    fn northwest(a: &[f64], b: &[f64]) -> Self {
        let (m, n) = (a.len(), b.len());
        let mut cells = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        let (mut sa, mut sb) = (a[0], b[0]);
        loop {
            let x = sa.min(sb).max(0.0);
            cells.push((i, j, x));
            sa -= x;
            sb -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            // Advance exactly one index so the basis stays a spanning tree.
            if j == n - 1 || (i < m - 1 && sa <= sb) {
                i += 1;
                sa = a[i];
            } else {
                j += 1;
                sb = b[j];
            }
        }
        Basis { m, n, cells }
    }

    /// Adjacency over nodes `0..m` (rows) and `m..m+n` (columns); entries are cell indices.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j, _)) in self.cells.iter().enumerate() {
            adj[i].push(k);
            adj[self.m + j].push(k);
        }
        adj
    }

    fn other(&self, k: usize, node: usize) -> usize {
        let (i, j, _) = self.cells[k];
        if node == i {
            self.m + j
        } else {
            i
        }
    }

    fn potentials(&self, cost: &[f64], adj: &[Vec<usize>]) -> (Vec<f64>, Vec<f64>) {
        let (m, n) = (self.m, self.n);
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &k in &adj[node] {
                let next = self.other(k, node);
                if pot[next].is_nan() {
                    let (i, j, _) = self.cells[k];
                    let c = cost[i * n + j];
                    pot[next] = c - pot[node];
                    stack.push(next);
                }
            }
        }
        (pot[..m].to_vec(), pot[m..].to_vec())
    }

    /// Cells on the tree path between two nodes, in order from `from`.
    fn path(&self, adj: &[Vec<usize>], from: usize, to: usize) -> Vec<usize> {
        let mut parent = vec![usize::MAX; self.m + self.n];
        let mut via = vec![usize::MAX; self.m + self.n];
        parent[from] = from;
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &k in &adj[node] {
                let next = self.other(k, node);
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    via[next] = k;
                    queue.push_back(next);
                }
            }
        }
        let mut out = Vec::new();
        let mut node = to;
        while node != from {
            out.push(via[node]);
            node = parent[node];
        }
        out.reverse();
        out
    }
}

/// Transportation simplex from a northwest-corner start with Dantzig pricing.
/// Falls back to first-improving pricing after a run of degenerate pivots.
pub fn transport_simplex(cost: &[f64], a: &[f64], b: &[f64]) -> Result<RawSolution, SolverError> {
    let (m, n) = (a.len(), b.len());
    let scale = cost.iter().fold(1.0f64, |s, c| s.max(c.abs()));
    let tol = 1e-12 * scale;
    let max_iters = 50 * (m + n) * (m + n).max(16);
    let mut basis = Basis::northwest(a, b);
    let mut degenerate_run = 0usize;
    let mut iters = 0usize;
    loop {
        let adj = basis.adjacency();
        let (phi, psi) = basis.potentials(cost, &adj);
        let bland = degenerate_run > m + n;
        let mut enter = None;
        let mut best = -tol;
        'pricing: for i in 0..m {
            for j in 0..n {
                let r = cost[i * n + j] - phi[i] - psi[j];
                if r < best {
                    enter = Some((i, j));
                    best = r;
                    if bland {
                        break 'pricing;
                    }
                }
            }
        }
        let Some((ei, ej)) = enter else {
            let plan = basis.cells.iter().copied().filter(|c| c.2 > 0.0).collect();
            return Ok(RawSolution { plan, phi, psi });
        };
        iters += 1;
        if iters > max_iters {
            return Err(SolverError::SolverStall { iterations: iters });
        }
        // Cycle: entering cell (+), then alternating signs along the tree path.
        let path = basis.path(&adj, m + ej, ei);
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let x = basis.cells[k].2;
                if x < theta || (x == theta && k < leave) {
                    theta = x;
                    leave = k;
                }
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.cells[k].2 = (basis.cells[k].2 - theta).max(0.0);
            } else {
                basis.cells[k].2 += theta;
            }
        }
        basis.cells[leave] = (ei, ej, theta);
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
    }
}

/// Re-centers a feasible potential pair inside the set of optimal duals.
///
/// Feasible duals form the solutions of the difference constraints
/// `pi_{m+j} - pi_i <= c_ij` with the reverse inequality on the support. With
/// `pi_0` pinned, each `pi_v` ranges over an interval given by shortest-path
/// distances to and from row 0; the result is the midpoint of every interval.
pub fn center_duals(cost: &[f64], m: usize, n: usize, plan: &[(usize, usize, f64)], phi: &mut [f64], psi: &mut [f64]) {
    // pi_i = -phi_i, pi_{m+j} = psi_j, so edge weights stay nonnegative once reduced.
    let v = m + n;
    let mut pi = Vec::with_capacity(v);
    pi.extend(phi.iter().map(|x| -x));
    pi.extend(psi.iter().copied());
    let mut support = vec![Vec::new(); n];
    for &(i, j, _) in plan {
        support[j].push(i);
    }
    let reduced = |from: usize, to: usize, w: f64| (w + pi[from] - pi[to]).max(0.0);
    let forward = dijkstra(v, 0, |node, relax| {
        if node < m {
            for j in 0..n {
                relax(m + j, reduced(node, m + j, cost[node * n + j]));
            }
        } else {
            let j = node - m;
            for &i in &support[j] {
                relax(i, reduced(node, i, -cost[i * n + j]));
            }
        }
    });
    let backward = dijkstra(v, 0, |node, relax| {
        // Reverse graph: edges into `node` become edges out of it.
        if node < m {
            for j in 0..n {
                if support[j].contains(&node) {
                    relax(m + j, reduced(m + j, node, -cost[node * n + j]));
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                relax(i, reduced(i, node, cost[i * n + j]));
            }
        }
    });
    for k in 0..v {
        let shift = 0.5 * (forward[k] - backward[k]);
        if shift.is_finite() {
            pi[k] += shift;
        }
    }
    for i in 0..m {
        phi[i] = -pi[i];
    }
    psi[..n].copy_from_slice(&pi[m..m + n]);
}

fn dijkstra<F>(v: usize, root: usize, mut edges: F) -> Vec<f64>
where
    F: FnMut(usize, &mut dyn FnMut(usize, f64)),
{
    let mut dist = vec![f64::INFINITY; v];
    let mut done = vec![false; v];
    dist[root] = 0.0;
    for _ in 0..v {
        let mut best = usize::MAX;
        for k in 0..v {
            if !done[k] && dist[k].is_finite() && (best == usize::MAX || dist[k] < dist[best]) {
                best = k;
            }
        }
        if best == usize::MAX {
            break;
        }
        done[best] = true;
        let base = dist[best];
        edges(best, &mut |to, w| {
            if base + w < dist[to] {
                dist[to] = base + w;
            }
        });
    }
    dist
}

/// Exact optimal plan between two discrete measures.
pub fn solve_exact(cost: &[f64], mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportSolution, SolverError> {
    let (m, n) = (mu.len(), nu.len());
    if cost.len() != m * n {
        return Err(SolverError::InvalidInput("cost matrix shape does not match the measures".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(SolverError::InvalidInput("cost matrix has non-finite entries".into()));
    }
    let (sm, sn) = (mu.total_mass(), nu.total_mass());
    if (sm - sn).abs() > MASS_TOL * sm.max(sn) {
        return Err(SolverError::InfeasibleMarginals { source_mass: sm, target_mass: sn });
    }
    let assignment = m == n && mu.has_equal_weights() && nu.has_equal_weights();
    let (mut raw, algorithm) = if assignment {
        let (assign, phi, psi) = hungarian(cost, n);
        let w = sm / n as f64;
        let plan = assign.iter().enumerate().map(|(i, &j)| (i, j, w)).collect();
        // Potentials of the assignment problem are duals of the weighted one as well.
        (RawSolution { plan, phi, psi }, "hungarian")
    } else {
        // Rescale the target so both sides carry the same mass to the last bit.
        let b: Vec<f64> = nu.weights.iter().map(|w| w * sm / sn).collect();
        (transport_simplex(cost, &mu.weights, &b)?, "transport_simplex")
    };
    center_duals(cost, m, n, &raw.plan, &mut raw.phi, &mut raw.psi);
    let u = raw.phi.iter().map(|p| -p).collect();
    let u_bar = raw.psi.iter().map(|p| -p).collect();
    Ok(TransportSolution::assemble(
        Method::Exact { algorithm: algorithm.to_string() },
        cost,
        mu,
        nu,
        raw.plan,
        u,
        u_bar,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(cost: &[f64], n: usize) -> f64 {
        fn rec(cost: &[f64], n: usize, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == n {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row * n + j] + rec(cost, n, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, n, 0, &mut vec![false; n])
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 6;
            let cost: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
            let (assign, u, v) = hungarian(&cost, n);
            let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            assert!((total - brute_force(&cost, n)).abs() < 1e-12);
            for i in 0..n {
                for j in 0..n {
                    assert!(u[i] + v[j] <= cost[i * n + j] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn simplex_is_optimal_on_small_instance() {
        // Classic 3x4 textbook instance with optimum 743.
        let cost = [19.0, 30.0, 50.0, 10.0, 70.0, 30.0, 40.0, 60.0, 40.0, 8.0, 70.0, 20.0];
        let a = [7.0, 9.0, 18.0];
        let b = [5.0, 8.0, 7.0, 14.0];
        let raw = transport_simplex(&cost, &a, &b).unwrap();
        let total: f64 = raw.plan.iter().map(|&(i, j, x)| x * cost[i * 4 + j]).sum();
        assert!((total - 743.0).abs() < 1e-9);
        let dual: f64 = a.iter().zip(&raw.phi).map(|(w, p)| w * p).sum::<f64>()
            + b.iter().zip(&raw.psi).map(|(w, p)| w * p).sum::<f64>();
        assert!((dual - 743.0).abs() < 1e-9);
    }

    #[test]
    fn centering_keeps_duals_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 8;
        let cost: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
        let (assign, mut u, mut v) = hungarian(&cost, n);
        let plan: Vec<_> = assign.iter().enumerate().map(|(i, &j)| (i, j, 1.0)).collect();
        let before: f64 = u.iter().sum::<f64>() + v.iter().sum::<f64>();
        center_duals(&cost, n, n, &plan, &mut u, &mut v);
        let after: f64 = u.iter().sum::<f64>() + v.iter().sum::<f64>();
        assert!((before - after).abs() < 1e-12);
        for i in 0..n {
            for j in 0..n {
                assert!(u[i] + v[j] <= cost[i * n + j] + 1e-12);
            }
            assert!((u[i] + v[assign[i]] - cost[i * n + assign[i]]).abs() < 1e-12);
        }
    }
}
