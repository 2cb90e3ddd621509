use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use wannier2d::cli::{
    compare_methods, parse_emit_list, run_pipeline, Method, RunConfig, EXIT_ERROR,
};
use wannier2d::Result;

/// Maximally localized Wannier functions for an isolated band of a 2D
/// tight-binding model.
#[derive(Parser, Debug)]
#[command(name = "wannier2d", version)]
struct Args {
    /// Built-in model name or path to a JSON model file
    #[arg(long)]
    model: String,
    /// Band index (overrides the model file)
    #[arg(long)]
    band: Option<usize>,
    /// Grid size N per direction (even, at least 8)
    #[arg(long = "grid", default_value_t = 100)]
    n: usize,
    /// Transport method: ode, twist or alt
    #[arg(long, default_value = "ode")]
    method: String,
    /// Skip the divergence-free gauge optimization
    #[arg(long)]
    no_optimize: bool,
    /// Disable Richardson extrapolation of the ODE transport
    #[arg(long)]
    no_richardson: bool,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated outputs: bands,sheet,connection,hodge,coeffs,wannier,report
    #[arg(long, default_value = "report")]
    emit: String,
    /// Worker threads (defaults to all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Gaussian orbital width used for real-space samples
    #[arg(long)]
    orbital_sigma: Option<f64>,
    /// Compare ode, twist and alt instead of running one method
    #[arg(long)]
    compare: bool,
}

fn config(args: &Args) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(&args.model, args.n);
    cfg.band = args.band;
    cfg.method = args.method.parse::<Method>()?;
    cfg.optimize = !args.no_optimize;
    cfg.richardson = !args.no_richardson;
    cfg.outputs = args.out.clone();
    cfg.emit = parse_emit_list(&args.emit)?;
    cfg.orbital_sigma = args.orbital_sigma;
    Ok(cfg)
}

// a closed pipe (e.g. `| head`) is not an error for the computation
fn emit_stdout(s: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn run(args: &Args) -> Result<i32> {
    let cfg = config(args)?;
    if args.compare {
        let rep = compare_methods(&cfg)?;
        let json = rep.to_json();
        if let Some(dir) = &cfg.outputs {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("compare.json"), format!("{json}\n"))?;
        }
        emit_stdout(&json);
        return Ok(0);
    }
    let out = run_pipeline(&cfg)?;
    emit_stdout(&out.report.to_json());
    if out.report.obstructed {
        eprintln!(
            "obstruction: Chern number {} is nonzero; no periodic gauge exists",
            out.report.chern
        );
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR as u8);
        }
    };
    match pool.install(|| run(&args)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
