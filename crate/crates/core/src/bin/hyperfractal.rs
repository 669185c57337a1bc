use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hyperfractal::analytics::{
    campbell_check, concentration_probe, expected_relay_count, ProcessKind, TestFunction,
    TEST_FUNCTION_IDS,
};
use hyperfractal::experiments::{
    generate_map, node_pairs, run_sweep, simulate_pairs, Metric, PairSweep, SweepConfig,
};
use hyperfractal::fitting::{fit_dataset, synthetic_dataset, FitDataset, RatioEstimator, RelayFitOptions, SyntheticDensities};
use hyperfractal::graph::build_graph;
use hyperfractal::io::{write_nodes_csv, write_pairs_csv, write_relays_csv, write_slopes_json, write_sweep_csv};
use hyperfractal::map::{derive_pr_from_dr, MapParams, NodeMode};
use hyperfractal::rng::substream;
use hyperfractal::sampling::sample_relays;
use hyperfractal::stats::mean_and_stderr;
use hyperfractal::{Error, Result};

/// Hyperfractal urban vehicular network simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Master seed; overrides the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON file with sweep-style settings (n_grid, d_F, d_r, delta, ...).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one map and write nodes.csv and relays.csv.
    Generate {
        #[command(flatten)]
        map: MapArgs,
        /// Also write edges.csv.
        #[arg(long)]
        edges: bool,
        /// Also write segments.csv and intersections.csv for streets up to this level.
        #[arg(long, value_name = "LEVEL")]
        fit_export: Option<u32>,
    },
    /// Mean number of relays, truncated sum and optional Monte Carlo check.
    RelayCount {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        dr: f64,
        #[arg(long, default_value_t = 60)]
        kmax: u32,
        /// Average the relay count of this many sampled maps.
        #[arg(long, value_name = "N")]
        measure: Option<usize>,
    },
    /// Route random node pairs on one map and write pairs.csv.
    SimulatePairs {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long, default_value_t = 30)]
        kmax: usize,
        #[arg(long, value_enum, default_value_t = ConstraintArg::Energy)]
        constraint: ConstraintArg,
        /// Energy cap, or comma-separated power caps (default: the config's
        /// power_caps times P_max).
        #[arg(long, value_delimiter = ',')]
        budget: Vec<f64>,
    },
    /// Replicated sweep over n; writes sweep.csv, slopes.json and config.json.
    Sweep {
        /// Start from a named setup instead of the defaults.
        #[arg(long)]
        preset: Option<String>,
        /// Comma-separated metrics, e.g. relay_count,hops_scaling.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Exit with status 2 if any slope misses its tolerance.
        #[arg(long)]
        check: bool,
    },
    /// Estimate d_F and d_r from street segments and intersections.
    Fit {
        #[arg(long, value_name = "PATH")]
        segments: PathBuf,
        #[arg(long, value_name = "PATH")]
        intersections: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tail_fraction: f64,
        #[arg(long, default_value_t = 12)]
        bins: usize,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Differential)]
        estimator: EstimatorArg,
    },
    /// Monte Carlo check of the Campbell-Mecke identity.
    Campbell {
        #[command(flatten)]
        map: MapArgs,
        /// users, auxiliary, relays or all.
        #[arg(long, default_value = "all")]
        process: String,
        /// Test function id or all.
        #[arg(long, default_value = "all")]
        function: String,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
    },
    /// Out-of-band frequency of a street-interval node count.
    Concentration {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1)]
        level: u32,
        /// Probed share of the street; ignored with --target-mean.
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
        /// Choose phi so that the mean count equals this value.
        #[arg(long)]
        target_mean: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        replicates: usize,
    },
}

#[derive(Args, Clone, Default)]
struct MapArgs {
    /// Node count (default: the config's first n_grid value).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "d-f")]
    d_f: Option<f64>,
    #[arg(long = "d-r")]
    d_r: Option<f64>,
    /// Relay mass (default: the config's rho rule).
    #[arg(long)]
    rho: Option<f64>,
    /// Pathloss exponent.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    max_level: Option<u32>,
    /// Poisson(n) nodes instead of exactly n.
    #[arg(long)]
    poisson: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    Energy,
    Power,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Differential,
    Cumulative,
}

impl MapArgs {
    /// Sweep settings with the flags applied, and the node count to use.
    fn resolve(&self, cfg: &SweepConfig) -> Result<(SweepConfig, usize, MapParams)> {
        let mut cfg = cfg.clone();
        if let Some(d) = self.d_f {
            cfg.d_f = d;
        }
        if let Some(d) = self.d_r {
            cfg.d_r = d;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        if let Some(l) = self.max_level {
            cfg.max_level = l;
        }
        if self.poisson {
            cfg.node_mode = NodeMode::PoissonN;
        }
        let n = self.n.unwrap_or(cfg.n_grid[0]);
        let mut params = cfg.map_params(n)?;
        if let Some(rho) = self.rho {
            params = MapParams::from_dimensions(n, cfg.d_f, rho, cfg.d_r)?
                .with_node_mode(cfg.node_mode)
                .with_max_level(cfg.max_level)?
                .with_map_length(cfg.map_length)?;
        }
        let seed = cfg.seed;
        Ok((cfg, n, params.with_seed(seed)))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{}", serde_json::to_string_pretty(value)?) {
        // a closed pipe (e.g. `| head`) is not an error for us
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn load_config(cli: &Cli) -> Result<SweepConfig> {
    let mut cfg = match &cli.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_path();
    fs::create_dir_all(out)?;
    match cli.command {
        Command::Generate {
            map,
            edges,
            fit_export,
        } => {
            let (cfg, _, params) = map.resolve(&cfg)?;
            let (nodes, relays) = generate_map(&params, cfg.seed);
            write_nodes_csv(&nodes, create(out, "nodes.csv")?)?;
            write_relays_csv(&relays, create(out, "relays.csv")?)?;
            if edges {
                build_graph(&nodes, &relays, cfg.energy_model()?).write_edges_csv(create(out, "edges.csv")?)?;
            }
            if let Some(level) = fit_export {
                let data = synthetic_dataset(&params, level, SyntheticDensities::Observed(&nodes), &relays)?;
                data.write_segments(create(out, "segments.csv")?)?;
                data.write_intersections(create(out, "intersections.csv")?)?;
            }
            print_json(&json!({
                "seed": cfg.seed,
                "n": params.n,
                "nodes": nodes.len(),
                "relays": relays.len(),
                "d_F": params.d_f,
                "p": params.p,
                "d_r": params.d_r,
                "p_r": params.p_r,
                "rho": params.rho,
            }))?;
        }
        Command::RelayCount {
            rho,
            dr,
            kmax,
            measure,
        } => {
            let p_r = derive_pr_from_dr(dr)?;
            let expected = expected_relay_count(rho, p_r, kmax)?;
            let measured = match measure {
                None => None,
                Some(0) => return Err(Error::InvalidArgument("--measure must be >= 1".into())),
                Some(maps) => {
                    let params = MapParams::from_dimensions(1, cfg.d_f, rho, dr)?;
                    let counts: Vec<f64> = (0..maps as u64)
                        .map(|i| sample_relays(&params, &mut substream(cfg.seed, 0x52, i)).len() as f64)
                        .collect();
                    let (mean, stderr) = mean_and_stderr(&counts);
                    Some(json!({ "maps": maps, "mean": mean, "stderr": stderr }))
                }
            };
            print_json(&json!({
                "rho": rho,
                "d_r": dr,
                "p_r": p_r,
                "k_max": kmax,
                "expected": expected.value,
                "tail_bound": expected.tail_bound,
                "measured": measured,
            }))?;
        }
        Command::SimulatePairs {
            map,
            pairs,
            kmax,
            constraint,
            budget,
        } => {
            let (cfg, _, params) = map.resolve(&cfg)?;
            let (nodes, relays) = generate_map(&params, cfg.seed);
            let model = cfg.energy_model()?;
            let graph = build_graph(&nodes, &relays, model);
            let chosen = node_pairs(&graph, pairs, &mut substream(cfg.seed, 0x50, 0));
            let sweep = match constraint {
                ConstraintArg::Energy => {
                    if budget.len() > 1 {
                        return Err(Error::InvalidArgument("energy constraint takes one budget".into()));
                    }
                    PairSweep::Energy {
                        k_max: kmax,
                        budget: budget.first().copied(),
                    }
                }
                ConstraintArg::Power => PairSweep::Power {
                    caps: if budget.is_empty() {
                        cfg.power_caps.iter().map(|f| f * model.p_max).collect()
                    } else {
                        budget
                    },
                },
            };
            let rows = simulate_pairs(&graph, &chosen, &sweep)?;
            write_pairs_csv(&rows, create(out, "pairs.csv")?)?;
            print_json(&json!({
                "seed": cfg.seed,
                "pairs": chosen.len(),
                "rows": rows.len(),
                "feasible_rows": rows.iter().filter(|r| r.feasible).count(),
                "p_max": model.p_max,
            }))?;
        }
        Command::Sweep {
            preset,
            metrics,
            replicates,
            check,
        } => {
            let mut cfg = match preset {
                Some(name) => SweepConfig {
                    seed: cfg.seed,
                    ..SweepConfig::preset(&name)?
                },
                None => cfg,
            };
            if !metrics.is_empty() {
                cfg.metrics = metrics.iter().map(|m| m.parse()).collect::<Result<Vec<Metric>>>()?;
            }
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            let result = run_sweep(&cfg)?;
            write_sweep_csv(&result.rows, create(out, "sweep.csv")?)?;
            write_slopes_json(&result.slopes, create(out, "slopes.json")?)?;
            serde_json::to_writer_pretty(create(out, "config.json")?, &result.config)?;
            for (metric, s) in &result.slopes {
                eprintln!(
                    "{metric}: slope {:.4} +- {:.4} (expected {:.4}, tol {:.2}) {}",
                    s.slope,
                    s.stderr,
                    s.expected,
                    s.tolerance,
                    if s.pass { "PASS" } else { "FAIL" }
                );
            }
            for (metric, e) in &result.slope_errors {
                eprintln!("{metric}: no slope ({e})");
            }
            if check && !result.all_pass() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Fit {
            segments,
            intersections,
            tail_fraction,
            bins,
            estimator,
        } => {
            let data = FitDataset::from_paths(&segments, &intersections)?;
            let opts = RelayFitOptions {
                bins,
                tail_fraction,
                estimator: match estimator {
                    EstimatorArg::Differential => RatioEstimator::Differential,
                    EstimatorArg::Cumulative => RatioEstimator::Cumulative,
                },
                ..RelayFitOptions::default()
            };
            let report = fit_dataset(&data, tail_fraction, &opts);
            let diag = |fit: &Option<hyperfractal::fitting::FitResult>| {
                fit.as_ref().map(|f| {
                    json!({
                        "slope": f.slope,
                        "intercept": f.intercept,
                        "r_squared": f.r_squared,
                        "points_used": f.points_used,
                        "valid": f.valid,
                    })
                })
            };
            print_json(&json!({
                "d_F": report.d_f.as_ref().map(|f| f.estimate),
                "d_r": report.d_r.as_ref().map(|f| f.estimate),
                "stderr": {
                    "d_F": report.d_f.as_ref().map(|f| f.stderr),
                    "d_r": report.d_r.as_ref().map(|f| f.stderr),
                },
                "windows": {
                    "d_F": report.d_f.as_ref().map(|f| f.window),
                    "d_r": report.d_r.as_ref().map(|f| f.window),
                },
                "diagnostics": {
                    "d_F": diag(&report.d_f),
                    "d_r": diag(&report.d_r),
                    "errors": report.errors,
                },
            }))?;
            if report.d_f.is_none() && report.d_r.is_none() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Campbell {
            map,
            process,
            function,
            replicates,
        } => {
            let (cfg, _, params) = map.resolve(&cfg)?;
            let processes = if process == "all" {
                vec![ProcessKind::Users, ProcessKind::Auxiliary, ProcessKind::Relays]
            } else {
                vec![process.parse()?]
            };
            let functions = if function == "all" {
                TestFunction::registry()
            } else {
                vec![TestFunction::from_id(&function)?]
            };
            let mut reports = Vec::new();
            for p in &processes {
                for f in &functions {
                    let report = campbell_check(&params, *p, *f, replicates, cfg.seed)?;
                    let agrees = report.agrees(3.0);
                    reports.push(json!({ "report": report, "agrees_3se": agrees }));
                }
            }
            print_json(&json!({ "functions": TEST_FUNCTION_IDS, "results": reports }))?;
        }
        Command::Concentration {
            map,
            level,
            phi,
            target_mean,
            replicates,
        } => {
            let (cfg, n, params) = map.resolve(&cfg)?;
            let phi = match target_mean {
                None => phi,
                Some(m) => {
                    let phi = m / (n as f64 * params.node_street_probability(level));
                    if !(phi > 0.0 && phi <= 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "mean {m} is not reachable on a level-{level} street with n = {n}"
                        )));
                    }
                    phi
                }
            };
            let report = concentration_probe(&params, level, phi, replicates, cfg.seed)?;
            let within = report.within_oracle(3.0);
            print_json(&json!({ "report": report, "within_oracle_3sigma": within }))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
