//! `otgeo`: scenario-driven front end for the geometry, solver and estimate stages.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use otgeo_core::error::{ConfigError, Error};
use otgeo_core::pipeline::scenario::{CutoffSpec, Scenario, SolverMethod};
use otgeo_core::pipeline::stages::{graph_report, scan_report, solve_stage, verify_report};
use otgeo_core::pipeline::{dump_fields, dump_riemann, emit_report, report_hash, run_scenario, scenario_schema};
use otgeo_core::transport::TransportSolution;
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "otgeo", version, about = "Curvature of transport costs and a priori estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario JSON file
    #[arg(long)]
    config: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Sinkhorn,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the cross-curvature bound over the cutoff region
    MtwScan {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: Option<String>,
    },
    /// Solve the discrete transport problem on one grid
    Solve {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Overrides the scenario's solver method
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Grid resolution; the first scenario grid by default
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        out: String,
    },
    /// Frames, second fundamental form and identity residuals on the graph of a solution
    Graph {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        solution: String,
        /// CSV of source-grid node indices
        #[arg(long)]
        points: Option<String>,
        #[arg(long)]
        out: String,
    },
    /// Observed constants of the interior estimate for a solution
    Verify {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        solution: String,
        /// `{"center": [...], "radius": r}`; the scenario cutoff by default
        #[arg(long)]
        cutoff: Option<String>,
        #[arg(long)]
        out: String,
    },
    /// Full pipeline for one scenario or a batch
    Run {
        #[arg(long, conflicts_with = "batch", required_unless_present = "batch")]
        config: Option<String>,
        /// JSON array of scenario paths, relative to the batch file
        #[arg(long)]
        batch: Option<String>,
        /// Scenarios run concurrently in batch mode
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Report path; for batches, a directory
        #[arg(long)]
        out: Option<String>,
    },
    /// CSV dumps of the ambient fields
    Dump {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Samples per axis of the product grid
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: String,
        /// Product point `x1,..,xn,xbar1,..,xbarn` for a curvature tensor dump
        #[arg(long, requires = "riemann_out", value_delimiter = ',')]
        riemann_at: Option<Vec<f64>>,
        #[arg(long)]
        riemann_out: Option<String>,
    },
    /// Print the scenario JSON schema
    Schema,
}

fn config_error(msg: impl Into<String>) -> Error {
    Error::Config(ConfigError::Invalid(msg.into()))
}

fn load(path: &str) -> Result<Scenario, Error> {
    Scenario::load(path)?.with_env_seed()
}

fn load_solution(path: &str) -> Result<TransportSolution, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(TransportSolution::from_json(&text)?)
}

/// Node indices from a CSV file; a non-numeric first row is a header.
fn read_points(path: &str) -> Result<Vec<usize>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        let parsed: Result<Vec<usize>, _> = fields.iter().map(|f| f.parse::<usize>()).collect();
        match parsed {
            Ok(v) => out.extend(v),
            Err(_) if row == 0 => {}
            Err(_) => return Err(config_error(format!("{path}: row {} is not a list of node indices", row + 1))),
        }
    }
    Ok(out)
}

fn write_or_print(report: &impl serde::Serialize, out: Option<&str>) -> Result<(), Error> {
    match out {
        Some(path) => emit_report(report, path),
        None => {
            let value = otgeo_core::pipeline::report_value(report);
            println!("{}", otgeo_core::canonical::to_string(&value));
            Ok(())
        }
    }
}

fn run_one(path: &str, out: Option<String>) -> Result<String, Error> {
    let scenario = load(path)?;
    let report = run_scenario(&scenario)?;
    let target = out.or_else(|| scenario.output.report.clone());
    write_or_print(&report, target.as_deref())?;
    Ok(report_hash(&report))
}

fn run_batch(batch: &str, jobs: usize, out_dir: Option<&str>) -> Result<(), Error> {
    let text = std::fs::read_to_string(batch).map_err(|e| Error::io(batch, e))?;
    let entries: Vec<String> =
        serde_json::from_str(&text).map_err(|e| Error::Config(ConfigError::Parse(format!("{batch}: {e}"))))?;
    let base = Path::new(batch).parent().map(Path::to_path_buf).unwrap_or_default();
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| config_error(format!("thread pool: {e}")))?;
    let results: Vec<(String, Result<String, Error>)> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let path: PathBuf = base.join(entry);
                let path = path.to_string_lossy().into_owned();
                let out = out_dir.map(|d| {
                    let stem = Path::new(entry).file_stem().map(|s| s.to_string_lossy().into_owned());
                    format!("{d}/{}.report.json", stem.unwrap_or_else(|| "scenario".into()))
                });
                let res = run_one(&path, out.or_else(|| Some(format!("{path}.report.json"))));
                (path, res)
            })
            .collect()
    });
    let mut first_err = None;
    for (path, res) in results {
        match res {
            Ok(hash) => println!("ok {path} {hash}"),
            Err(e) => {
                println!("failed {path}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::MtwScan { cfg, out } => write_or_print(&scan_report(&load(&cfg.config)?)?, out.as_deref()),
        Command::Solve { cfg, method, res, out } => {
            let scenario = load(&cfg.config)?;
            let method = match method {
                Some(MethodArg::Exact) => SolverMethod::Exact,
                Some(MethodArg::Sinkhorn) => SolverMethod::Sinkhorn,
                None => scenario.solver.method,
            };
            let res = res.unwrap_or(scenario.grids[0]);
            if res < 2 {
                return Err(config_error("grid resolution must be at least 2"));
            }
            let sol = solve_stage(&scenario, &scenario.build_geometry()?, res, method)?;
            std::fs::write(&out, sol.to_json() + "\n").map_err(|e| Error::io(&out, e))
        }
        Command::Graph { cfg, solution, points, out } => {
            let scenario = load(&cfg.config)?;
            let probes = points.as_deref().map(read_points).transpose()?;
            let report = graph_report(&scenario, &load_solution(&solution)?, probes)?;
            emit_report(&report, &out)
        }
        Command::Verify { cfg, solution, cutoff, out } => {
            let scenario = load(&cfg.config)?;
            let spec: Option<CutoffSpec> = cutoff
                .map(|c| {
                    serde_json::from_str(&c).map_err(|e| Error::Config(ConfigError::Parse(format!("--cutoff: {e}"))))
                })
                .transpose()?;
            let cutoff = scenario.cutoff_from(spec.as_ref().or(scenario.cutoff.as_ref()))?;
            emit_report(&verify_report(&scenario, &load_solution(&solution)?, cutoff)?, &out)
        }
        Command::Run { config, batch, jobs, out } => match (config, batch) {
            (Some(path), _) => {
                let hash = run_one(&path, out)?;
                eprintln!("report sha256 {hash}");
                Ok(())
            }
            (None, Some(batch)) => run_batch(&batch, jobs, out.as_deref()),
            (None, None) => Err(config_error("either --config or --batch is required")),
        },
        Command::Dump { cfg, grid, out, riemann_at, riemann_out } => {
            let scenario = load(&cfg.config)?;
            let geo = scenario.build_geometry()?;
            let rows = dump_fields(&geo, grid.unwrap_or(scenario.output.dump_grid), &out)?;
            eprintln!("{rows} field rows written to {out}");
            if let (Some(p), Some(path)) = (riemann_at, riemann_out) {
                if p.len() != 2 * geo.dim() {
                    return Err(config_error(format!("--riemann-at needs {} coordinates", 2 * geo.dim())));
                }
                dump_riemann(&geo, &p, &path)?;
            }
            Ok(())
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&scenario_schema()).expect("schema serializes"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
