//! Second-order jets of matrix fields and the Levi-Civita data derived from them.
//!
//! First derivatives use the five-point stencil, pure second derivatives the
//! five-point second-difference stencil, and mixed second derivatives the
//! tensor product of two first-derivative stencils; all are fourth order.

use nalgebra::DMatrix;

use crate::error::GeometryError;
use crate::geometry::metric::MetricField;
use crate::linalg::{Tensor3, Tensor4};

/// Default step for curvature stencils.
pub const DEFAULT_STENCIL_H: f64 = 5e-3;

const FIRST: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Value and first two partial derivatives of a matrix field at a point.
///
/// `d1.get(a, b, c) = d_c F_ab` and `d2.get(a, b, c, d) = d_c d_d F_ab`.
/// The matrix is square of size `m`; derivatives run over `d` point coordinates.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub point: Vec<f64>,
    pub value: DMatrix<f64>,
    pub d1: Vec<DMatrix<f64>>,
    pub d2: Vec<Vec<DMatrix<f64>>>,
    pub step: f64,
}

impl FieldJet {
    pub fn compute(field: &MetricField, p: &[f64], step: f64) -> Result<Self, GeometryError> {
        let d = field.point_dim;
        if p.len() != d {
            return Err(GeometryError::InvalidInput(format!("jet point has {} coordinates, expected {d}", p.len())));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(GeometryError::InvalidInput(format!("stencil step {step} must be positive")));
        }
        let reach = 2.0 * step;
        if let Some(domain) = &field.domain {
            if !domain.contains_with_margin(p, -reach) {
                return Err(GeometryError::StencilOutOfDomain { point: p.to_vec() });
            }
        }
        let sample = |offsets: &[(usize, f64)]| -> Result<DMatrix<f64>, GeometryError> {
            let mut q = p.to_vec();
            for &(axis, k) in offsets {
                q[axis] += k * step;
            }
            field.eval(&q)
        };
        let value = field.eval(p)?;
        let m = value.nrows();
        let mut d1 = vec![DMatrix::zeros(m, m); d];
        let mut d2 = vec![vec![DMatrix::zeros(m, m); d]; d];
        for c in 0..d {
            let fm2 = sample(&[(c, -2.0)])?;
            let fm1 = sample(&[(c, -1.0)])?;
            let fp1 = sample(&[(c, 1.0)])?;
            let fp2 = sample(&[(c, 2.0)])?;
            d1[c] = (&fm2 - &fp2 + (&fp1 - &fm1) * 8.0) / (12.0 * step);
            d2[c][c] = ((&fm2 + &fp2) * -1.0 + (&fp1 + &fm1) * 16.0 - &value * 30.0) / (12.0 * step * step);
        }
        for c in 0..d {
            for e in c + 1..d {
                let mut acc = DMatrix::zeros(m, m);
                for &(s, ws) in &FIRST {
                    for &(t, wt) in &FIRST {
                        acc += sample(&[(c, s), (e, t)])? * (ws * wt);
                    }
                }
                acc /= 144.0 * step * step;
                d2[e][c] = acc.clone();
                d2[c][e] = acc;
            }
        }
        Ok(Self { point: p.to_vec(), value, d1, d2, step })
    }

    /// A jet assembled from externally computed derivatives.
    pub fn from_parts(
        point: Vec<f64>,
        value: DMatrix<f64>,
        d1: Vec<DMatrix<f64>>,
        d2: Vec<Vec<DMatrix<f64>>>,
        step: f64,
    ) -> Self {
        Self { point, value, d1, d2, step }
    }

    pub fn size(&self) -> usize {
        self.value.nrows()
    }

    pub fn point_dim(&self) -> usize {
        self.d1.len()
    }

    /// `d_c F_ab`.
    #[inline]
    pub fn d(&self, a: usize, b: usize, c: usize) -> f64 {
        self.d1[c][(a, b)]
    }

    /// `d_c d_e F_ab`.
    #[inline]
    pub fn dd(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.d2[c][e][(a, b)]
    }

    /// Largest absolute entry of the value and its first two derivatives.
    pub fn c2_norm(&self) -> f64 {
        let mut norm = self.value.amax();
        for m in &self.d1 {
            norm = norm.max(m.amax());
        }
        for row in &self.d2 {
            for m in row {
                norm = norm.max(m.amax());
            }
        }
        norm
    }
}

/// Levi-Civita connection and curvature of a (pseudo-)metric from its jet.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub jet: FieldJet,
    pub g_inv: DMatrix<f64>,
    /// `Gamma_{e,bc}` stored at `(e, b, c)`.
    pub gamma_lower: Tensor3,
    /// `Gamma^m_{bc}` stored at `(m, b, c)`.
    pub gamma: Tensor3,
    /// `d_a Gamma^m_{bc}` stored at `(a, m, b, c)`.
    pub dgamma: Tensor4,
    /// `R_{abcd}` in the convention where `R(X, Y, X, Y)` is the sectional numerator.
    pub riemann: Tensor4,
}

impl MetricJet {
    pub fn compute(field: &MetricField, p: &[f64], step: f64) -> Result<Self, GeometryError> {
        if field.dim != field.point_dim {
            return Err(GeometryError::InvalidInput("metric must act on tangent vectors of its domain".into()));
        }
        Self::from_jet(FieldJet::compute(field, p, step)?)
    }

    pub fn from_jet(jet: FieldJet) -> Result<Self, GeometryError> {
        let d = jet.point_dim();
        if jet.size() != d {
            return Err(GeometryError::InvalidInput("metric jet must be square in the point dimension".into()));
        }
        let g_inv = jet
            .value
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| GeometryError::SingularMetric { point: jet.point.clone() })?;

        let mut gamma_lower = Tensor3::zeros(d);
        let mut dgamma_lower = Tensor4::zeros(d); // (a, e, b, c) = d_a Gamma_{e,bc}
        for e in 0..d {
            for b in 0..d {
                for c in 0..d {
                    gamma_lower.set(e, b, c, 0.5 * (jet.d(e, b, c) + jet.d(e, c, b) - jet.d(b, c, e)));
                    for a in 0..d {
                        let v = 0.5 * (jet.dd(e, b, c, a) + jet.dd(e, c, b, a) - jet.dd(b, c, e, a));
                        dgamma_lower.set(a, e, b, c, v);
                    }
                }
            }
        }
        let mut gamma = Tensor3::zeros(d);
        for m in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let v: f64 = (0..d).map(|e| g_inv[(m, e)] * gamma_lower.get(e, b, c)).sum();
                    gamma.set(m, b, c, v);
                }
            }
        }
        // d_a g^{me} = -g^{mp} (d_a g_pq) g^{qe}
        let dg_inv: Vec<DMatrix<f64>> = (0..d).map(|a| -(&g_inv * &jet.d1[a] * &g_inv)).collect();
        let mut dgamma = Tensor4::zeros(d);
        for a in 0..d {
            for m in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        let v: f64 = (0..d)
                            .map(|e| {
                                dg_inv[a][(m, e)] * gamma_lower.get(e, b, c)
                                    + g_inv[(m, e)] * dgamma_lower.get(a, e, b, c)
                            })
                            .sum();
                        dgamma.set(a, m, b, c, v);
                    }
                }
            }
        }
        let mut riemann = Tensor4::zeros(d);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for dd in 0..d {
                        let second = 0.5
                            * (jet.dd(b, c, a, dd) + jet.dd(a, dd, b, c) - jet.dd(b, dd, a, c) - jet.dd(a, c, b, dd));
                        let mut quad = 0.0;
                        for e in 0..d {
                            for f in 0..d {
                                let gi = g_inv[(e, f)];
                                if gi != 0.0 {
                                    quad += gi
                                        * (gamma_lower.get(e, a, dd) * gamma_lower.get(f, b, c)
                                            - gamma_lower.get(e, b, dd) * gamma_lower.get(f, a, c));
                                }
                            }
                        }
                        riemann.set(a, b, c, dd, second + quad);
                    }
                }
            }
        }
        Ok(Self { jet, g_inv, gamma_lower, gamma, dgamma, riemann })
    }

    pub fn dim(&self) -> usize {
        self.jet.point_dim()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.jet.value
    }

    /// `Gamma(u, v)^m = Gamma^m_{bc} u^b v^c`.
    pub fn gamma_apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|m| {
                let mut s = 0.0;
                for b in 0..d {
                    for c in 0..d {
                        s += self.gamma.get(m, b, c) * u[b] * v[c];
                    }
                }
                s
            })
            .collect()
    }
}

/// First and second covariant derivatives of a symmetric (0,2)-tensor field.
///
/// `first.get(c, a, b) = (D_c T)_{ab}`; `second.get(d, c, a, b) = (D^2_{d,c} T)_{ab}`.
#[derive(Debug, Clone)]
pub struct CovariantJet {
    pub first: Tensor3,
    pub second: Tensor4,
}

impl CovariantJet {
    pub fn compute(tensor: &FieldJet, metric: &MetricJet) -> Self {
        let d = metric.dim();
        let t = &tensor.value;
        let gam = &metric.gamma;
        let mut first = Tensor3::zeros(d);
        for c in 0..d {
            for a in 0..d {
                for b in 0..d {
                    let mut v = tensor.d(a, b, c);
                    for m in 0..d {
                        v -= gam.get(m, c, a) * t[(m, b)] + gam.get(m, c, b) * t[(a, m)];
                    }
                    first.set(c, a, b, v);
                }
            }
        }
        let mut second = Tensor4::zeros(d);
        for dd in 0..d {
            for c in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        // d_dd of (D_c T)_ab
                        let mut v = tensor.dd(a, b, c, dd);
                        for m in 0..d {
                            v -= metric.dgamma.get(dd, m, c, a) * t[(m, b)] + gam.get(m, c, a) * tensor.d(m, b, dd);
                            v -= metric.dgamma.get(dd, m, c, b) * t[(a, m)] + gam.get(m, c, b) * tensor.d(a, m, dd);
                        }
                        for m in 0..d {
                            v -= gam.get(m, dd, c) * first.get(m, a, b)
                                + gam.get(m, dd, a) * first.get(c, m, b)
                                + gam.get(m, dd, b) * first.get(c, a, m);
                        }
                        second.set(dd, c, a, b, v);
                    }
                }
            }
        }
        Self { first, second }
    }

    /// `(D_w T)(u, v)`.
    pub fn first_apply(&self, w: &[f64], u: &[f64], v: &[f64]) -> f64 {
        let d = self.first.dim;
        let mut s = 0.0;
        for c in 0..d {
            if w[c] == 0.0 {
                continue;
            }
            for a in 0..d {
                for b in 0..d {
                    s += w[c] * u[a] * v[b] * self.first.get(c, a, b);
                }
            }
        }
        s
    }

    /// `(D^2_{w1,w2} T)(u, v)`.
    pub fn second_apply(&self, w1: &[f64], w2: &[f64], u: &[f64], v: &[f64]) -> f64 {
        self.second.contract(w1, w2, u, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::MetricLabel;

    /// Round sphere in stereographic coordinates: `4 / (1 + |x|^2)^2 delta`.
    fn sphere() -> MetricField {
        MetricField::from_fn(MetricLabel::Custom, 2, (2, 0), |p| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            DMatrix::identity(2, 2) * (4.0 / ((1.0 + r2) * (1.0 + r2)))
        })
    }

    #[test]
    fn sphere_has_unit_curvature() {
        let p = [0.3, -0.4];
        let mj = MetricJet::compute(&sphere(), &p, DEFAULT_STENCIL_H).unwrap();
        let g = mj.g();
        let k = mj.riemann.get(0, 1, 0, 1) / (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(0, 1)]);
        assert!((k - 1.0).abs() < 1e-8, "{k}");
    }

    #[test]
    fn first_derivative_stencil_is_accurate() {
        let field = MetricField::from_fn(MetricLabel::Custom, 1, (1, 0), |p| DMatrix::from_element(1, 1, p[0].exp()));
        let jet = FieldJet::compute(&field, &[0.2], 1e-2).unwrap();
        assert!((jet.d(0, 0, 0) - 0.2f64.exp()).abs() < 1e-9);
        assert!((jet.dd(0, 0, 0, 0) - 0.2f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn covariant_derivative_of_metric_vanishes() {
        let p = [0.1, 0.25];
        let mj = MetricJet::compute(&sphere(), &p, DEFAULT_STENCIL_H).unwrap();
        let cov = CovariantJet::compute(&mj.jet, &mj);
        assert!(cov.first.max_abs() < 1e-8);
        assert!(cov.second.max_abs() < 1e-6);
    }

    #[test]
    fn stencil_must_stay_inside_domain() {
        let field = sphere().with_domain(crate::geometry::domain::BoxDomain::unit(2));
        assert!(matches!(
            FieldJet::compute(&field, &[0.005, 0.5], 5e-3),
            Err(GeometryError::StencilOutOfDomain { .. })
        ));
    }
}
