//! `finsler` — reports, property suites, and geodesic traces for the
//! Finsler geometry engine.
//!
//! Subcommands: `report` (single-point tensors and diagnostics), `suite`
//! (the full property battery, nonzero exit on failure), `trace` (geodesic
//! CSV export). JSON goes to stdout unless `--json <path>` is given.
//! Exit codes: 0 success, 1 failed checks, 2 configuration/spec/domain
//! errors (with a machine-readable error object on stdout).

mod doc;
mod report;
mod suite;

use clap::{Args, Parser, Subcommand};
use doc::ErrorDoc;
use finsler_core::geodesic::{integrate_geodesic, write_trajectory_csv};
use finsler_core::{make_metric, parse_metric_spec, FinslerMetric, SupportElement};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "finsler", version, about = "Finsler geometry engine: curvature, nullity spaces, geodesics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-point report: tensors, curvature norms, identities, nullity.
    Report(ReportArgs),
    /// Run the property battery; exit 1 if any check fails.
    Suite(SuiteArgs),
    /// Integrate a geodesic and write the trajectory CSV.
    Trace(TraceArgs),
}

#[derive(Args)]
struct ReportArgs {
    /// metric specification file (JSON)
    spec_path: PathBuf,
    /// base point, comma-separated (e.g. 0.5,0)
    #[arg(long)]
    point: String,
    /// tangent vector, comma-separated
    #[arg(long)]
    vector: String,
    /// nullity constant k >= 0
    #[arg(long, default_value_t = 0.0)]
    k: f64,
    /// write the JSON document here instead of stdout
    #[arg(long)]
    json: Option<PathBuf>,
    /// worker threads (default: all cores; env FINSLER_THREADS)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SuiteArgs {
    spec_path: PathBuf,
    /// comma-separated list of nullity constants
    #[arg(long, default_value = "0,0.5,1")]
    k: String,
    /// random seed driving all sampled points and flags
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// involutivity grid, format <half_width>x<points> (e.g. 0.2x5)
    #[arg(long, default_value = "0.2x5")]
    grid: String,
    /// sampled support elements per check
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct TraceArgs {
    spec_path: PathBuf,
    /// start support element "x1,..,xn;v1,..,vn"
    #[arg(long)]
    start: String,
    /// integration horizon
    #[arg(long)]
    t_end: f64,
    /// write the CSV here instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
    /// integrator relative tolerance
    #[arg(long, default_value_t = 1e-9)]
    rtol: f64,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let doc = ErrorDoc::new(kind, message);
    println!("{}", serde_json::to_string_pretty(&doc).expect("serialize error document"));
    ExitCode::from(2)
}

fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| format!("invalid number `{p}`: {e}"))
        })
        .collect()
}

fn load_metric(path: &PathBuf) -> Result<FinslerMetric, (String, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ("io".to_string(), format!("{}: {e}", path.display())))?;
    let spec = parse_metric_spec(&text).map_err(|e| ("spec".to_string(), e.to_string()))?;
    make_metric(spec).map_err(|e| ("spec".to_string(), e.to_string()))
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("FINSLER_THREADS")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    })
}

fn init_pool(threads: usize) {
    // ignore the error if a global pool already exists
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
}

fn emit_json<T: serde::Serialize>(doc: &T, path: &Option<PathBuf>) -> Result<(), String> {
    let text = serde_json::to_string_pretty(doc).map_err(|e| e.to_string())?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| format!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run_report(args: ReportArgs) -> ExitCode {
    let metric = match load_metric(&args.spec_path) {
        Ok(m) => m,
        Err((kind, msg)) => return fail(&kind, msg),
    };
    let threads = resolve_threads(args.threads);
    init_pool(threads);
    let x = match parse_vector(&args.point) {
        Ok(v) => v,
        Err(e) => return fail("args", e),
    };
    let v = match parse_vector(&args.vector) {
        Ok(v) => v,
        Err(e) => return fail("args", e),
    };
    let z = match SupportElement::new(x, v) {
        Ok(z) => z,
        Err(e) => return fail("domain", e.to_string()),
    };
    if args.k < 0.0 {
        return fail("args", "k must be non-negative".into());
    }
    match report::build_report(&metric, &z, args.k, 0, threads) {
        Ok(doc) => match emit_json(&doc, &args.json) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail("io", e),
        },
        Err(e) => fail("domain", e.to_string()),
    }
}

fn run_suite(args: SuiteArgs) -> ExitCode {
    let metric = match load_metric(&args.spec_path) {
        Ok(m) => m,
        Err((kind, msg)) => return fail(&kind, msg),
    };
    let threads = resolve_threads(args.threads);
    init_pool(threads);
    let k_values = match parse_vector(&args.k) {
        Ok(ks) if ks.iter().all(|&k| k >= 0.0) => ks,
        Ok(_) => return fail("args", "k values must be non-negative".into()),
        Err(e) => return fail("args", e),
    };
    let (grid_half_width, grid_points) = match args.grid.split_once('x') {
        Some((w, p)) => match (w.parse::<f64>(), p.parse::<usize>()) {
            (Ok(w), Ok(p)) if w > 0.0 && p >= 1 => (w, p),
            _ => return fail("args", format!("invalid grid spec `{}`", args.grid)),
        },
        None => return fail("args", format!("invalid grid spec `{}` (expected WxN)", args.grid)),
    };
    let opt = suite::SuiteOptions {
        k_values,
        seed: args.seed,
        grid_half_width,
        grid_points,
        threads,
        samples: args.samples.max(1),
    };
    match suite::run_suite(&metric, &opt) {
        Ok(doc) => {
            let failed = doc.summary.failed > 0;
            if let Err(e) = emit_json(&doc, &args.json) {
                return fail("io", e);
            }
            if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => fail("domain", e.to_string()),
    }
}

fn run_trace(args: TraceArgs) -> ExitCode {
    let metric = match load_metric(&args.spec_path) {
        Ok(m) => m,
        Err((kind, msg)) => return fail(&kind, msg),
    };
    let parts: Vec<&str> = args.start.split(';').collect();
    if parts.len() != 2 {
        return fail(
            "args",
            "start must be \"x1,..,xn;v1,..,vn\" (two vectors separated by a semicolon)".into(),
        );
    }
    let (x, v) = match (parse_vector(parts[0]), parse_vector(parts[1])) {
        (Ok(x), Ok(v)) => (x, v),
        (Err(e), _) | (_, Err(e)) => return fail("args", e),
    };
    let z0 = match SupportElement::new(x, v) {
        Ok(z) => z,
        Err(e) => return fail("domain", e.to_string()),
    };
    if let Err(e) = metric.check_support(&z0) {
        return fail("domain", e.to_string());
    }
    let traj = match integrate_geodesic(&metric, &z0, args.t_end, args.rtol) {
        Ok(t) => t,
        Err(e) => return fail("integration", e.to_string()),
    };
    let n = metric.dim();
    let result = match &args.csv {
        Some(p) => std::fs::File::create(p)
            .and_then(|f| write_trajectory_csv(&traj, n, std::io::BufWriter::new(f)))
            .map_err(|e| format!("{}: {e}", p.display())),
        None => {
            let mut buf = Vec::new();
            write_trajectory_csv(&traj, n, &mut buf).expect("in-memory write");
            print!("{}", String::from_utf8(buf).expect("csv is utf-8"));
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("io", e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Report(args) => run_report(args),
        Command::Suite(args) => run_suite(args),
        Command::Trace(args) => run_trace(args),
    }
}
