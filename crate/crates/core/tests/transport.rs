use nalgebra::DMatrix;
use otgeo_core::error::SolverError;
use otgeo_core::geometry::cost::{CostKind, CostModel};
use otgeo_core::geometry::density::{Density, DensityKind, DensityPair};
use otgeo_core::geometry::domain::BoxDomain;
use otgeo_core::transport::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn interval(lo: f64, hi: f64) -> BoxDomain {
    BoxDomain::from_pairs(&[[lo, hi]]).unwrap()
}

struct Rescaling {
    model: CostModel,
    dens: DensityPair,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    cost: Vec<f64>,
}

/// Uniform on [0,1] to uniform on [0,2] with the quadratic cost.
fn rescaling(atoms: usize) -> Rescaling {
    let (x, xb) = (interval(0.0, 1.0), interval(0.0, 2.0));
    let model = CostModel::new(CostKind::Quadratic, x.clone(), xb.clone()).unwrap();
    let dens = DensityPair::uniform(&x, &xb);
    let mu = discretize(&dens.rho, &GridSpec::uniform(x, atoms).unwrap()).unwrap();
    let nu = discretize(&dens.rho_bar, &GridSpec::uniform(xb, atoms).unwrap()).unwrap();
    let cost = cost_matrix(&model, &mu, &nu);
    Rescaling { model, dens, mu, nu, cost }
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    equal: bool,
) -> (Vec<f64>, DiscreteMeasure, DiscreteMeasure) {
    let mut weights = |k: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| if equal { 1.0 } else { rng.gen_range(0.1..1.0) }).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    };
    let (wa, wb) = (weights(m), weights(n));
    let pa = (0..m).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let pb = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let mu = DiscreteMeasure::new(pa, wa).unwrap();
    let nu = DiscreteMeasure::new(pb, wb).unwrap();
    let cost = mu
        .points
        .iter()
        .flat_map(|x| nu.points.iter().map(move |y| 0.5 * ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))))
        .collect();
    (cost, mu, nu)
}

/// `W_1` between the atoms and the density via CDFs on a fine trapezoid grid.
fn w1_to_density(m: &DiscreteMeasure, d: &Density, lo: f64, hi: f64) -> f64 {
    let k = 200_000;
    let dx = (hi - lo) / k as f64;
    let (mut cdf, mut atom_cdf, mut w1) = (0.0, 0.0, 0.0);
    let mut next = 0;
    for s in 0..k {
        let x0 = lo + s as f64 * dx;
        let x1 = x0 + dx;
        cdf += 0.5 * (d.value(&[x0]) + d.value(&[x1])) * dx;
        while next < m.len() && m.points[next][0] <= x1 {
            atom_cdf += m.weights[next];
            next += 1;
        }
        w1 += (cdf - atom_cdf).abs() * dx;
    }
    w1
}

#[test]
fn gaussian_discretization_has_unit_mass() {
    let b = BoxDomain::unit(2);
    let d =
        Density::new(DensityKind::GaussianClipped { mean: vec![0.3, 0.6], sigma: vec![0.2, 0.4] }, b.clone()).unwrap();
    for res in [2, 5, 17] {
        let m = discretize(&d, &GridSpec::uniform(b.clone(), res).unwrap()).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn refining_the_grid_halves_w1() {
    let b = interval(0.0, 1.0);
    let d = Density::new(DensityKind::GaussianClipped { mean: vec![0.4], sigma: vec![0.3] }, b.clone()).unwrap();
    let w = |res| w1_to_density(&discretize(&d, &GridSpec::uniform(b.clone(), res).unwrap()).unwrap(), &d, 0.0, 1.0);
    for res in [16, 32] {
        let ratio = w(res) / w(2 * res);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }
}

#[test]
fn nonpositive_density_is_rejected() {
    let b = interval(0.0, 1.0);
    let d = Density::unnormalized(DensityKind::Uniform, b.clone()).unwrap().scaled(0.0);
    assert!(matches!(
        discretize(&d, &GridSpec::uniform(b, 4).unwrap()),
        Err(otgeo_core::error::GeometryError::NonpositiveDensity { .. })
    ));
}

#[test]
fn two_atoms_match_identically() {
    let mu = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
    let cost = vec![0.0, 0.5, 0.5, 0.0];
    let sol = solve_exact(&cost, &mu, &mu).unwrap();
    assert_eq!(sol.primal, 0.0);
    assert_eq!(sol.map, vec![vec![0.0], vec![1.0]]);
}

#[test]
fn exact_rescaling_is_the_monotone_map() {
    let r = rescaling(64);
    let sol = solve_exact(&r.cost, &r.mu, &r.nu).unwrap();
    let cell = 2.0 / 64.0;
    for (x, fx) in r.mu.points.iter().zip(&sol.map) {
        assert!((fx[0] - 2.0 * x[0]).abs() < cell);
    }
}

#[test]
fn mismatched_masses_are_infeasible() {
    let mu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
    let nu = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.6]).unwrap();
    let cost = vec![0.0; 4];
    assert!(matches!(solve_exact(&cost, &mu, &nu), Err(SolverError::InfeasibleMarginals { .. })));
    assert!(matches!(
        solve_sinkhorn(&cost, &mu, &nu, &[0.1], &SinkhornOptions::default()),
        Err(SolverError::InfeasibleMarginals { .. })
    ));
}

#[test]
fn duality_holds_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..12 {
        let (m, n, equal) = if k % 2 == 0 { (16, 16, true) } else { (16, 11, false) };
        let (cost, mu, nu) = random_instance(&mut rng, m, n, equal);
        let sol = solve_exact(&cost, &mu, &nu).unwrap();
        assert!(sol.duality_gap().abs() < 1e-9, "gap {}", sol.duality_gap());
        assert!(sol.min_slack > -1e-9);
        assert!(sol.support_slack < 1e-9);
        assert!(sol.marginal_residual < 1e-9);
        assert!(sol.primal - sol.dual_bound > -1e-9);
    }
}

#[test]
fn sinkhorn_tracks_exact_objective_in_one_dimension() {
    let r = rescaling(48);
    let exact = solve_exact(&r.cost, &r.mu, &r.nu).unwrap();
    for eps in [1e-2, 3e-3] {
        let sol =
            solve_sinkhorn(&r.cost, &r.mu, &r.nu, &eps_schedule(1.0, eps, 2.0), &SinkhornOptions::default()).unwrap();
        assert!(sol.marginal_residual < 1e-6);
        assert!((sol.primal - exact.primal).abs() < 5.0 * eps * (48f64).ln());
        assert!(sol.primal - sol.dual_bound >= -1e-12);
    }
}

#[test]
fn halving_epsilon_shrinks_the_gap_in_two_dimensions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (cost, mu, nu) = random_instance(&mut rng, 36, 36, false);
    let exact = solve_exact(&cost, &mu, &nu).unwrap();
    let gap = |eps: f64| {
        let s = solve_sinkhorn(&cost, &mu, &nu, &eps_schedule(1.0, eps, 2.0), &SinkhornOptions::default()).unwrap();
        s.primal - exact.primal
    };
    let (g1, g2, g3) = (gap(2e-2), gap(1e-2), gap(5e-3));
    assert!(g1 > g2 && g2 > g3 && g3 > -1e-9, "{g1} {g2} {g3}");
}

#[test]
fn identity_transport_gives_unit_second_order_data() {
    let b = BoxDomain::unit(2);
    let model = CostModel::new(CostKind::Quadratic, b.clone(), b.clone()).unwrap();
    let dens = DensityPair::uniform(&b, &b);
    let g = GridSpec::uniform(b, 6).unwrap();
    let mu = discretize(&dens.rho, &g).unwrap();
    let sol = solve_exact(&cost_matrix(&model, &mu, &mu), &mu, &mu).unwrap();
    let idx = g.flat_index(&[2, 3]);
    let d = second_order_data(&model, &dens, &sol, idx).unwrap();
    assert!((&d.b - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
    assert!((&d.a - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
    assert!(d.lambdas.iter().all(|l| (l - 1.0).abs() < 1e-12));
    assert!(check_det_identity(&d, &dens, &model.h) < 1e-8);
}

#[test]
fn rescaling_second_order_matches_closed_form() {
    let r = rescaling(256);
    let sol = solve_exact(&r.cost, &r.mu, &r.nu).unwrap();
    let step = 1.0 / 256.0;
    for idx in 1..255 {
        let d = second_order_data(&r.model, &r.dens, &sol, idx).unwrap();
        assert!((d.b[(0, 0)] - 2.0).abs() < 1e-9);
        assert!((d.chi - 0.5).abs() < 1e-12);
        assert!((d.lambdas[0] - 1.0).abs() < 1e-9);
        assert!(check_det_identity(&d, &r.dens, &r.model.h) < step);
        let soc = b_from_potential(&r.model, &sol, idx).unwrap();
        assert!((soc[(0, 0)] - d.b[(0, 0)]).abs() < 10.0 * step, "{} at {idx}", soc[(0, 0)]);
    }
    assert!(matches!(second_order_data(&r.model, &r.dens, &sol, 0), Err(SolverError::NotInterior { index: 0 })));
}

#[test]
fn entropic_maps_satisfy_the_determinant_identity_to_grid_order() {
    let b = BoxDomain::unit(2);
    let model = CostModel::new(CostKind::Quadratic, b.clone(), b.clone()).unwrap();
    let rho = Density::new(DensityKind::Uniform, b.clone()).unwrap();
    let rho_bar =
        Density::new(DensityKind::GaussianClipped { mean: vec![0.5, 0.5], sigma: vec![0.6, 0.6] }, b.clone()).unwrap();
    let dens = DensityPair::new(rho.clone(), rho_bar.clone());
    let study = |res: usize| {
        let g = GridSpec::uniform(b.clone(), res).unwrap();
        let mu = discretize(&rho, &g).unwrap();
        let nu = discretize(&rho_bar, &g).unwrap();
        let c = cost_matrix(&model, &mu, &nu);
        let eps = default_final_eps(&model, g.max_step(), 1.0);
        let sol = solve_sinkhorn(&c, &mu, &nu, &default_schedule(&c, eps), &SinkhornOptions::default()).unwrap();
        assert!(sol.marginal_residual < 1e-6);
        let (mut acc, mut count, mut soc_gap) = (0.0, 0, 0.0f64);
        for i in 0..mu.len() {
            if mu.points[i].iter().any(|v| !(0.25..=0.75).contains(v)) {
                continue;
            }
            let d = second_order_data(&model, &dens, &sol, i).unwrap();
            assert!(d.is_positive());
            acc += check_det_identity(&d, &dens, &model.h).powi(2);
            count += 1;
            let soc = b_from_potential(&model, &sol, i).unwrap();
            soc_gap = soc_gap.max((&soc - &d.b).abs().max());
        }
        ((acc / count as f64).sqrt(), soc_gap)
    };
    let (r16, s16) = study(16);
    let (r32, s32) = study(32);
    let order = (r16 / r32).log2();
    assert!(order >= 0.8, "residuals {r16:e} {r32:e}");
    assert!(s32 < s16 && s32 < 1e-2, "soc gaps {s16:e} {s32:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn one_dimensional_plans_do_not_cross(seed in 0u64..1000, m in 3usize..12, n in 3usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs: Vec<f64> = (0..m).map(|_| rng.gen()).collect();
        let mut ys: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let wa: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let wb: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        let (sa, sb): (f64, f64) = (wa.iter().sum(), wb.iter().sum());
        let mu = DiscreteMeasure::new(xs.iter().map(|&x| vec![x]).collect(), wa.iter().map(|w| w / sa).collect()).unwrap();
        let nu = DiscreteMeasure::new(ys.iter().map(|&y| vec![y]).collect(), wb.iter().map(|w| w / sb).collect()).unwrap();
        let cost: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| 0.5 * (x - y).powi(2))).collect();
        let sol = solve_exact(&cost, &mu, &nu).unwrap();
        let support: Vec<(usize, usize)> = sol.plan.iter().filter(|e| e.mass > 1e-14).map(|e| (e.i, e.j)).collect();
        for &(i1, j1) in &support {
            for &(i2, j2) in &support {
                prop_assert!(!(i1 < i2 && j1 > j2), "crossing pairs ({i1},{j1}) ({i2},{j2})");
            }
        }
        prop_assert!(sol.duality_gap().abs() < 1e-12);
    }

    #[test]
    fn solution_json_roundtrips(seed in 0u64..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (cost, mu, nu) = random_instance(&mut rng, 5, 4, false);
        let sol = solve_exact(&cost, &mu, &nu).unwrap();
        let back = TransportSolution::from_json(&sol.to_json()).unwrap();
        prop_assert_eq!(back, sol);
    }
}
