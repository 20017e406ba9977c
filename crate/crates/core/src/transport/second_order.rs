use nalgebra::DMatrix;

use crate::error::SolverError;
use crate::geometry::cost::{cross_hessian, CostModel};
use crate::geometry::density::DensityPair;
use crate::geometry::metric::chi;
use crate::linalg::{generalized_sym_eigen, symmetrize};
use crate::transport::solution::TransportSolution;

/// Relative size below which `det dF` counts as singular.
const INJECTIVITY_TOL: f64 = 1e-12;

/// Second-order data of a transport map at one source point.
#[derive(Debug, Clone)]
pub struct SecondOrderData {
    pub x: Vec<f64>,
    pub fx: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    /// `B = -c_{x xbar}(x, F(x)) dF`, symmetrized.
    pub b: DMatrix<f64>,
    /// Asymmetry `|B - B^T|` before symmetrization.
    pub b_asymmetry: f64,
    pub chi: f64,
    /// `A = chi B`.
    pub a: DMatrix<f64>,
    /// Eigenvalues of `A` relative to `h`, ascending.
    pub lambdas: Vec<f64>,
    /// Matching `h`-orthonormal eigenvectors as columns.
    pub eigvecs: DMatrix<f64>,
}

impl SecondOrderData {
    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// `mu_i = (lambda_i + 1/lambda_i) / 2`.
    pub fn mus(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| 0.5 * (l + 1.0 / l)).collect()
    }

    pub fn is_positive(&self) -> bool {
        self.lambdas.iter().all(|&l| l > 0.0)
    }
}

/// Builds `B`, `A` and the eigen-data from a map value and its Jacobian.
pub fn from_jacobian(
    model: &CostModel,
    dens: &DensityPair,
    x: &[f64],
    fx: &[f64],
    jacobian: DMatrix<f64>,
    index: usize,
) -> Result<SecondOrderData, SolverError> {
    let n = model.dim;
    let det = jacobian.determinant();
    let scale = jacobian.norm().max(1.0).powi(n as i32);
    if !det.is_finite() || det.abs() <= INJECTIVITY_TOL * scale {
        return Err(SolverError::NonInjectiveMap { index, det: det.abs() });
    }
    let c = cross_hessian(model, x, fx)?;
    let raw = -(&c * &jacobian);
    let b_asymmetry = (&raw - raw.transpose()).abs().max();
    let b = symmetrize(&raw);
    let chi = chi(model, dens, x, fx)?;
    let a = &b * chi;
    let (lambdas, eigvecs) = generalized_sym_eigen(&a, &model.h)
        .ok_or_else(|| SolverError::InvalidInput("metric h is not positive definite".into()))?;
    Ok(SecondOrderData { x: x.to_vec(), fx: fx.to_vec(), jacobian, b, b_asymmetry, chi, a, lambdas, eigvecs })
}

/// Second-order data at source atom `index` of a solution on a grid.
pub fn second_order_data(
    model: &CostModel,
    dens: &DensityPair,
    sol: &TransportSolution,
    index: usize,
) -> Result<SecondOrderData, SolverError> {
    if !sol.sharp.get(index).copied().unwrap_or(false) {
        return Err(SolverError::NotInterior { index });
    }
    let jac = match sol.stored_jacobian(index) {
        Some(j) => j,
        None => sol.map_jacobian(index)?,
    };
    from_jacobian(model, dens, &sol.mu.points[index], &sol.map[index], jac, index)
}

/// `B` from the potential instead of the map: `D^2 u + c_xx(x, F(x))`,
/// with `D^2 u` by centered differences on the source grid.
pub fn b_from_potential(model: &CostModel, sol: &TransportSolution, index: usize) -> Result<DMatrix<f64>, SolverError> {
    let grid = sol.mu.grid.as_ref().ok_or(SolverError::NotInterior { index })?;
    let idx = grid.multi_index(index);
    if !grid.is_interior(&idx, 1) {
        return Err(SolverError::NotInterior { index });
    }
    let n = grid.dim();
    let steps = grid.steps();
    let at = |off: &[i64]| -> Result<f64, SolverError> {
        grid.offset(&idx, off).map(|k| sol.u[k]).ok_or(SolverError::NotInterior { index })
    };
    let mut hess = DMatrix::zeros(n, n);
    let u0 = sol.u[index];
    for a in 0..n {
        let mut e = vec![0i64; n];
        e[a] = 1;
        let up = at(&e)?;
        e[a] = -1;
        let dn = at(&e)?;
        hess[(a, a)] = (up - 2.0 * u0 + dn) / (steps[a] * steps[a]);
        for b in (a + 1)..n {
            let mut e = vec![0i64; n];
            let mut corner = |sa: i64, sb: i64| {
                e[a] = sa;
                e[b] = sb;
                at(&e)
            };
            let v = (corner(1, 1)? - corner(1, -1)? - corner(-1, 1)? + corner(-1, -1)?) / (4.0 * steps[a] * steps[b]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    let x = &sol.mu.points[index];
    let fx = &sol.map[index];
    model.check_point(x, fx)?;
    Ok(hess + model.hess_xx(x, fx))
}

/// `|prod lambda - (rho / vol_h)^2| / (rho / vol_h)^2` at the data point.
pub fn check_det_identity(data: &SecondOrderData, dens: &DensityPair, h: &DMatrix<f64>) -> f64 {
    let rho = dens.rho.value(&data.x);
    let target = rho * rho / h.determinant();
    let prod = data.a.determinant() / h.determinant();
    (prod - target).abs() / target
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cost::CostKind;
    use crate::geometry::domain::BoxDomain;

    #[test]
    fn rescaling_map_gives_unit_a() {
        let x = BoxDomain::unit(1);
        let xb = BoxDomain::from_pairs(&[[0.0, 2.0]]).unwrap();
        let model = CostModel::new(CostKind::Quadratic, x.clone(), xb.clone()).unwrap();
        let dens = DensityPair::uniform(&x, &xb);
        let d = from_jacobian(&model, &dens, &[0.3], &[0.6], DMatrix::from_element(1, 1, 2.0), 0).unwrap();
        assert!((d.b[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((d.chi - 0.5).abs() < 1e-14);
        assert!((d.lambdas[0] - 1.0).abs() < 1e-14);
        assert!(check_det_identity(&d, &dens, &model.h) < 1e-14);
    }

    #[test]
    fn singular_jacobian_is_rejected() {
        let b = BoxDomain::unit(2);
        let model = CostModel::new(CostKind::Quadratic, b.clone(), b.clone()).unwrap();
        let dens = DensityPair::uniform(&b, &b);
        let jac = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            from_jacobian(&model, &dens, &[0.5, 0.5], &[0.5, 0.5], jac, 3),
            Err(SolverError::NonInjectiveMap { index: 3, .. })
        ));
    }
}
