use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::EstimateError;
use crate::geometry::domain::BoxDomain;

/// `t * psi(|x - x0|^2 / r^2)` with `psi(s) = max(0, 1 - s)^3`.
///
/// The bump depends on the source point only, so on the product it is
/// constant along the target fibres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

/// A cutoff whose closed support ball lies inside `region`.
pub fn make_cutoff(center: Vec<f64>, radius: f64, region: &BoxDomain) -> Result<Cutoff, EstimateError> {
    let escapes = || EstimateError::SupportEscapesRegion { center: center.clone(), radius };
    if center.len() != region.dim() || !(radius > 0.0 && radius.is_finite()) {
        return Err(escapes());
    }
    if !region.contains(&center) || region.inradius_at(&center) < radius {
        return Err(escapes());
    }
    Ok(Cutoff { center, radius, scale: 1.0 })
}

impl Cutoff {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// The same bump multiplied by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self { scale: self.scale * t, ..self.clone() }
    }

    fn s(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (self.radius * self.radius)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let s = self.s(x);
        if s >= 1.0 {
            0.0
        } else {
            self.scale * (1.0 - s).powi(3)
        }
    }

    pub fn grad(&self, x: &[f64]) -> DVector<f64> {
        let s = self.s(x);
        let n = self.dim();
        if s >= 1.0 {
            return DVector::zeros(n);
        }
        let r2 = self.radius * self.radius;
        let dpsi = -3.0 * (1.0 - s).powi(2);
        DVector::from_fn(n, |i, _| self.scale * dpsi * 2.0 * (x[i] - self.center[i]) / r2)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let s = self.s(x);
        let n = self.dim();
        if s >= 1.0 {
            return DMatrix::zeros(n, n);
        }
        let r2 = self.radius * self.radius;
        let ds = DVector::from_fn(n, |i, _| 2.0 * (x[i] - self.center[i]) / r2);
        let dpsi = -3.0 * (1.0 - s).powi(2);
        let d2psi = 6.0 * (1.0 - s);
        (&ds * ds.transpose() * d2psi + DMatrix::identity(n, n) * (dpsi * 2.0 / r2)) * self.scale
    }

    /// Value at a product point `(x, xbar)`.
    pub fn value_ambient(&self, z: &[f64]) -> f64 {
        self.value(&z[..self.dim()])
    }

    /// Largest absolute value among the bump and its first two derivatives.
    pub fn c2_norm(&self) -> f64 {
        // Radial scan; the bump is rotationally symmetric.
        let r = self.radius;
        let mut norm: f64 = self.scale;
        for k in 0..=2000 {
            let t = k as f64 / 2000.0;
            let mut x = self.center.clone();
            x[0] += t * r;
            norm = norm.max(self.grad(&x).amax()).max(self.hessian(&x).amax());
        }
        norm
    }
}
