use otgeo_core::geometry::cost::{CostKind, CostModel, Monomial};
use otgeo_core::geometry::curvature::riemann_curvature;
use otgeo_core::geometry::density::{Density, DensityKind, DensityPair};
use otgeo_core::geometry::domain::BoxDomain;
use otgeo_core::geometry::jet::DEFAULT_STENCIL_H;
use otgeo_core::geometry::metric::{chi, kmw_metric};
use otgeo_core::geometry::mtw::{estimate_kappa, mtw_sectional, KappaOptions, MtwOptions};
use proptest::prelude::*;

fn log_model() -> (CostModel, DensityPair) {
    let x = BoxDomain::unit(2);
    let xb = BoxDomain::from_pairs(&[[2.0, 3.0], [0.0, 1.0]]).unwrap();
    let m = CostModel::new(CostKind::LogDistance, x.clone(), xb.clone()).unwrap();
    (m, DensityPair::uniform(&x, &xb))
}

fn gaussian(domain: &BoxDomain, mean: Vec<f64>, sigma: Vec<f64>) -> Density {
    Density::new(DensityKind::GaussianClipped { mean, sigma }, domain.clone()).unwrap()
}

/// Symbolic Christoffel/Riemann evaluation of the log-cost pseudo-metric.
const LOG_MTW_ORACLE: f64 = 0.5;

#[test]
fn log_cross_curvature_matches_the_symbolic_oracle() {
    let (m, d) = log_model();
    let v = mtw_sectional(&m, &d, &[0.5, 0.5], &[2.5, 0.5], &[1.0, 0.0], &[0.0, 1.0], &MtwOptions::default()).unwrap();
    assert!((v - LOG_MTW_ORACLE).abs() < 1e-6, "{v}");
}

/// In one dimension the off-diagonal entry is `rho(x) rho_bar(xbar)` for every cost: separable, hence flat.
#[test]
fn one_dimensional_metrics_are_flat_for_any_densities() {
    let x = BoxDomain::from_pairs(&[[0.0, 1.0]]).unwrap();
    for (kind, xb, p) in [
        (CostKind::Quadratic, BoxDomain::from_pairs(&[[0.0, 2.0]]).unwrap(), [0.3, 0.6]),
        (CostKind::LogDistance, BoxDomain::from_pairs(&[[2.0, 3.0]]).unwrap(), [0.3, 2.7]),
    ] {
        let m = CostModel::new(kind, x.clone(), xb.clone()).unwrap();
        let mean = xb.center()[0] - 0.3;
        let d = DensityPair::new(gaussian(&x, vec![0.4], vec![0.3]), gaussian(&xb, vec![mean], vec![0.5]));
        let s = riemann_curvature(&kmw_metric(&m, &d), &p, DEFAULT_STENCIL_H).unwrap();
        assert!(s.riemann.get(0, 1, 0, 1).abs() < 1e-4, "{}", s.riemann.get(0, 1, 0, 1));
    }
}

#[test]
fn log_metric_has_split_signature_and_curvature_symmetries() {
    let (m, d) = log_model();
    let field = kmw_metric(&m, &d);
    for p in [[0.2, 0.3, 2.4, 0.8], [0.7, 0.6, 2.1, 0.2], [0.5, 0.9, 2.9, 0.5]] {
        assert_eq!(field.signature_at(&p).unwrap(), (2, 2));
        let s = riemann_curvature(&field, &p, DEFAULT_STENCIL_H).unwrap();
        assert!(s.symmetry_residuals().max() < 1e-6, "{:?}", s.symmetry_residuals());
    }
}

#[test]
fn log_kappa_is_positive_and_stable_under_refinement() {
    let (m, d) = log_model();
    let inner = BoxDomain::from_pairs(&[[0.1, 0.9], [0.1, 0.9]]).unwrap();
    let k = |region: &BoxDomain, grid| {
        let est = estimate_kappa(&m, &d, region, &m.domain_xbar, &KappaOptions { grid, ..Default::default() }).unwrap();
        assert!(!est.mtw_violated);
        est.kappa.unwrap()
    };
    for (region, grid) in [(&m.domain_x, 8), (&inner, 4)] {
        let (a, b) = (k(region, grid), k(region, 2 * grid));
        assert!(a > 0.0 && b > 0.0);
        assert!((a - b).abs() < 0.1 * a, "{grid}: {a} {b}");
    }
}

/// `c = -x1 xb1 - x2 xb2 - 0.1 x1^2 xb1^2 + 0.2 x1 x2 xb2` and its pullback under `x = diag(2, 1/2) y`.
fn sheared_pair() -> ((CostModel, DensityPair), (CostModel, DensityPair)) {
    let mono = |coeff, powers: [u32; 4]| Monomial { coeff, powers: powers.to_vec() };
    let (bx, bxb) = (BoxDomain::unit(2), BoxDomain::unit(2));
    let by = BoxDomain::from_pairs(&[[0.0, 0.5], [0.0, 2.0]]).unwrap();
    let c = CostKind::CustomTable(vec![
        mono(-1.0, [1, 0, 1, 0]),
        mono(-1.0, [0, 1, 0, 1]),
        mono(-0.1, [2, 0, 2, 0]),
        mono(0.2, [1, 1, 0, 1]),
    ]);
    let c_pulled = CostKind::CustomTable(vec![
        mono(-2.0, [1, 0, 1, 0]),
        mono(-0.5, [0, 1, 0, 1]),
        mono(-0.4, [2, 0, 2, 0]),
        mono(0.2, [1, 1, 0, 1]),
    ]);
    let target = gaussian(&bxb, vec![0.5, 0.3], vec![0.4, 0.4]);
    let orig = (
        CostModel::new(c, bx.clone(), bxb.clone()).unwrap(),
        DensityPair::new(gaussian(&bx, vec![0.4, 0.6], vec![0.3, 0.5]), target.clone()),
    );
    let pulled = (
        CostModel::new(c_pulled, by.clone(), bxb).unwrap(),
        DensityPair::new(gaussian(&by, vec![0.2, 1.2], vec![0.15, 1.0]), target),
    );
    (orig, pulled)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cross_curvature_is_biquadratic(
        a in 0.1f64..5.0, b in -5.0f64..-0.1,
        t in 0.0f64..std::f64::consts::TAU,
        x in prop::array::uniform2(0.1f64..0.9), xb in prop::array::uniform2(0.1f64..0.9),
    ) {
        let (m, d) = log_model();
        let xb = [2.0 + xb[0], xb[1]];
        let opts = MtwOptions { project: true, ..Default::default() };
        let xi = [t.cos(), t.sin()];
        let xib = [-t.sin() + 0.3, t.cos()];
        let base = mtw_sectional(&m, &d, &x, &xb, &xi, &xib, &opts).unwrap();
        let scaled = mtw_sectional(&m, &d, &x, &xb, &[a * xi[0], a * xi[1]], &[b * xib[0], b * xib[1]], &opts).unwrap();
        prop_assert!((scaled - a * a * b * b * base).abs() <= 1e-9 * scaled.abs().max(1e-12));
    }

    #[test]
    fn cross_curvature_sign_survives_conformal_density_changes(
        t in 0.0f64..std::f64::consts::TAU, s in -1.0f64..1.0,
        x in prop::array::uniform2(0.1f64..0.9), xb in prop::array::uniform2(0.1f64..0.9),
    ) {
        let (m, uniform) = log_model();
        let bent = DensityPair::new(
            gaussian(&m.domain_x, vec![0.2, 0.7], vec![0.25, 0.4]),
            gaussian(&m.domain_xbar, vec![2.8, 0.1], vec![0.3, 0.6]),
        );
        let xb = [2.0 + xb[0], xb[1]];
        let opts = MtwOptions { project: true, ..Default::default() };
        let xi = [t.cos(), t.sin()];
        let xib = [s, 1.0 - s.abs()];
        prop_assume!(xib[0] != 0.0 || xib[1] != 0.0);
        let (a, b) = match (
            mtw_sectional(&m, &uniform, &x, &xb, &xi, &xib, &opts),
            mtw_sectional(&m, &bent, &x, &xb, &xi, &xib, &opts),
        ) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(TestCaseError::reject("projection annihilated the pair")),
        };
        prop_assert!(a.abs() > 1e-8 && b.abs() > 1e-8);
        prop_assert_eq!(a > 0.0, b > 0.0);
    }

    #[test]
    fn chi_is_chart_independent(
        y in prop::array::uniform2(0.05f64..0.95), xb in prop::array::uniform2(0.0f64..1.0),
    ) {
        let ((m, d), (mp, dp)) = sheared_pair();
        let y = [0.5 * y[0], 2.0 * y[1]];
        let x = [2.0 * y[0], 0.5 * y[1]];
        let a = chi(&m, &d, &x, &xb).unwrap();
        let b = chi(&mp, &dp, &y, &xb).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a, "{} {}", a, b);
    }
}
