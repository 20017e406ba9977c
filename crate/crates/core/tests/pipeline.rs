use std::path::PathBuf;

use otgeo_core::error::{ConfigError, Error};
use otgeo_core::geometry::mtw::{mtw_sectional, MtwOptions};
use otgeo_core::pipeline::dump::{dump_pairs, MTW_LABEL};
use otgeo_core::pipeline::*;
use serde_json::Value;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn load(name: &str) -> Scenario {
    Scenario::load(scenario_path(name).to_str().unwrap()).unwrap()
}

fn parse(text: &str) -> Result<Scenario, Error> {
    Scenario::from_json(text)
}

const MINIMAL: &str =
    r#"{"name":"m","cost":{"kind":"quadratic"},"source":{"box":[[0,1]]},"target":{"box":[[0,2]]},"grids":[8]}"#;

#[test]
fn minimal_scenario_takes_defaults() {
    let s = parse(MINIMAL).unwrap();
    assert_eq!(s.seed, 0);
    assert_eq!(s.solver.method, scenario::SolverMethod::Exact);
    assert!(s.cutoff.is_none() && s.probes.is_none());
}

#[test]
fn invalid_scenarios_are_config_errors() {
    let cases = [
        MINIMAL.replace(r#""grids":[8]"#, r#""grids":[1]"#),
        MINIMAL.replace(r#""grids":[8]"#, r#""grids":[]"#),
        MINIMAL.replace("quadratic", "cubic"),
        MINIMAL.replace(r#""name":"m""#, r#""name":"m","colour":1"#),
        MINIMAL.replace(r#"[[0,2]]"#, r#"[[0,2],[0,1]]"#),
        MINIMAL.replace(r#"[[0,1]]"#, r#"[[1,0]]"#),
        MINIMAL.replace(r#""grids":[8]"#, r#""grids":[8],"cutoff":{"center":[0.5,0.5],"radius":0.1}"#),
        MINIMAL.replace(r#""grids":[8]"#, r#""grids":[8],"solver":{"eps_schedule":[0.1,0.2]}"#),
    ];
    for text in cases {
        let err = parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
        assert!(matches!(err, Error::Config(ConfigError::Parse(_) | ConfigError::Invalid(_))));
    }
}

#[test]
fn shipped_scenarios_conform_to_the_schema() {
    let schema = scenario_schema();
    let validator = jsonschema::JSONSchema::compile(&schema).unwrap();
    let dir = scenario_path("");
    let mut checked = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "batch.json" {
            continue;
        }
        let value: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(validator.is_valid(&value), "{}", path.display());
        Scenario::from_json(&value.to_string()).unwrap();
        checked += 1;
    }
    assert!(checked >= 3);
    let bad: Value = serde_json::from_str(&MINIMAL.replace("quadratic", "cubic")).unwrap();
    assert!(!validator.is_valid(&bad));
}

#[test]
fn bilinear_run_flags_the_flat_condition() {
    let report = run_scenario(&load("bilinear_flat.json")).unwrap();
    assert!(report.flags.contains(&Flag::MtwViolated) && report.flags.contains(&Flag::KappaNonpositive));
    assert_eq!(report.kappa.kappa, Some(0.0));
    for g in &report.grids {
        assert!(g.pogorelov.is_none());
        assert!(!g.quant.is_empty());
        assert!(g.quant.iter().all(|r| r.lambda_sums.iter().all(|s| (s - 2.0).abs() < 1e-9)));
    }
    let verify = report.stages.iter().find(|s| s.name == "verify").unwrap();
    assert_eq!(verify.status, StageStatus::Flagged);
    assert!(report.geometry.volume.g_hat < 1e-12 && report.geometry.signature_ok);
}

#[test]
fn rescaling_run_meets_the_determinant_identity() {
    let report = run_scenario(&load("rescaling_1d.json")).unwrap();
    assert!(report.flags.contains(&Flag::KappaUndefined));
    for g in &report.grids {
        let det = g.second_order.det_identity.unwrap();
        assert!(det.max < g.step, "{} {}", det.max, g.step);
        assert!(g.solve.duality_gap.abs() < 1e-9);
        assert!(g.graph.mean_curvature.unwrap().max < 1e-8);
        assert!(g.quant.iter().all(|r| (r.lambdas[0] - 1.0).abs() < 1e-9));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let s = load("rescaling_1d.json");
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    emit_report(&run_scenario(&s).unwrap(), a.to_str().unwrap()).unwrap();
    emit_report(&run_scenario(&s).unwrap(), b.to_str().unwrap()).unwrap();
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);

    let mut other = s.clone();
    other.seed = 99;
    assert_ne!(other.config_hash(), s.config_hash());
}

#[test]
fn report_roundtrips_and_hash_tracks_residuals() {
    let mut s = parse(MINIMAL).unwrap();
    s.probes = Some(vec![]);
    let report = run_scenario(&s).unwrap();
    assert_eq!(report.grids[0].graph.probes, 0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    emit_report(&report, path.to_str().unwrap()).unwrap();
    let back = read_report(path.to_str().unwrap()).unwrap();
    assert_eq!(back, report_value(&report));

    let mut perturbed = report.clone();
    perturbed.grids[0].solve.support_slack += 1e-15;
    assert_ne!(report_hash(&perturbed), report_hash(&report));
    assert_eq!(report_hash(&report.clone()), report_hash(&report));
}

#[test]
fn timings_are_opt_in() {
    let mut s = parse(MINIMAL).unwrap();
    assert!(run_scenario(&s).unwrap().stages.iter().all(|r| r.seconds.is_none()));
    s.output.timings = true;
    assert!(run_scenario(&s).unwrap().stages.iter().all(|r| r.seconds.is_some()));
}

fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn bilinear_dump_is_constant_and_counted() {
    let geo = load("bilinear_flat.json").build_geometry().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields.csv");
    let rows = dump_fields(&geo, 2, path.to_str().unwrap()).unwrap();
    let (header, data) = read_csv(&path);
    assert_eq!(header.join(","), "x1,x2,xbar1,xbar2,label,i,j,value");
    let points = 2usize.pow(4);
    let per_point = 2 * 16 + 9 * 2;
    assert_eq!(rows, points * per_point);
    assert_eq!(data.len(), rows);
    for row in data.iter().filter(|r| r[4] == "g_hat") {
        let (i, j): (usize, usize) = (row[5].parse().unwrap(), row[6].parse().unwrap());
        let v: f64 = row[7].parse().unwrap();
        let expect = if (i + 2 == j) || (j + 2 == i) { 1.0 } else { 0.0 };
        assert_eq!(v, expect);
    }
}

#[test]
fn dumped_cross_curvature_matches_direct_calls() {
    let geo = load("log_cost_2d.json").build_geometry().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields.csv");
    dump_fields(&geo, 1, path.to_str().unwrap()).unwrap();
    let (_, data) = read_csv(&path);
    let opts = MtwOptions { stencil_h: geo.ambient.stencil_h, ..Default::default() };
    let mut checked = 0;
    for row in data.iter().filter(|r| r[4] == MTW_LABEL) {
        let p: Vec<f64> = row[..4].iter().map(|v| v.parse().unwrap()).collect();
        let (r, k): (usize, usize) = (row[5].parse().unwrap(), row[6].parse().unwrap());
        let pairs = dump_pairs(&geo, &p[..2], &p[2..]).unwrap();
        let (xi, xb) = &pairs[r][k];
        let direct =
            mtw_sectional(&geo.model, &geo.dens, &p[..2], &p[2..], xi.as_slice(), xb.as_slice(), &opts).unwrap();
        let dumped: f64 = row[7].parse().unwrap();
        assert_eq!(dumped.to_bits(), direct.to_bits());
        assert!(direct > 0.0);
        checked += 1;
    }
    assert_eq!(checked, 18);
}

#[test]
fn riemann_dump_has_every_component() {
    let geo = load("log_cost_2d.json").build_geometry().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("riemann.csv");
    let rows = dump_riemann(&geo, &[0.5, 0.5, 2.5, 0.5], path.to_str().unwrap()).unwrap();
    let (header, data) = read_csv(&path);
    assert_eq!(header.join(","), "alpha,beta,gamma,delta,value");
    assert_eq!((rows, data.len()), (256, 256));
}
