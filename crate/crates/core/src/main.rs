use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use flexopt::degrees::MechanismDegree;
use flexopt::driver::{export_all, RunConfig};
use flexopt::field_ops::MirrorAxis;
use flexopt::variants::RunMode;

#[derive(Parser)]
#[command(name = "flexopt", version, about = "Strain-energy flexure topology optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a topology optimization and export density, log and report files.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    nelx: Option<usize>,
    #[arg(long)]
    nely: Option<usize>,
    #[arg(long)]
    nelz: Option<usize>,

    /// Degrees of constraint (comma separated, e.g. "ty" or "ty,rz").
    #[arg(long, value_delimiter = ',')]
    doc: Vec<String>,
    /// Degrees of freedom (comma separated).
    #[arg(long, value_delimiter = ',')]
    dof: Vec<String>,
    /// Energy bound per DOF (comma separated, same order as --dof).
    #[arg(long, value_delimiter = ',')]
    emax: Vec<f64>,

    /// Formulation: base, robust, stress or robust-stress.
    #[arg(long)]
    mode: Option<String>,
    /// Intermediate projection threshold (robust modes).
    #[arg(long)]
    eta: Option<f64>,
    /// Threshold offset for erode/dilate (robust modes).
    #[arg(long)]
    deta: Option<f64>,
    /// Allowable stress, absolute (stress modes).
    #[arg(long)]
    sigma_bar: Option<f64>,
    /// Allowable stress as a fraction of a reference run's max stress.
    #[arg(long)]
    sigma_bar_fraction: Option<f64>,
    /// report.json of the reference run the fraction refers to.
    #[arg(long)]
    sigma_bar_ref: Option<PathBuf>,

    /// Filter radius in elements.
    #[arg(long)]
    filter_radius: Option<f64>,
    /// Mirror axes to enforce, e.g. "x" or "x,y"; "none" disables symmetry.
    #[arg(long, value_delimiter = ',')]
    symmetry: Vec<String>,
    /// Volume-fraction bound (optional constraint).
    #[arg(long)]
    vmax: Option<f64>,

    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Seed for a pseudo-random initial design (default: homogeneous).
    #[arg(long)]
    seed: Option<u64>,
    /// Write a density snapshot every N iterations.
    #[arg(long)]
    snapshot_every: Option<usize>,

    /// Output directory (default: current directory).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Suppress the per-iteration progress line.
    #[arg(long)]
    quiet: bool,
}

fn parse_degrees(names: &[String]) -> flexopt::Result<Vec<MechanismDegree>> {
    names.iter().map(|s| MechanismDegree::from_str(s)).collect()
}

fn build_config(args: &RunArgs) -> flexopt::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_toml_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.nelx {
        cfg.nelx = v;
    }
    if let Some(v) = args.nely {
        cfg.nely = v;
    }
    if let Some(v) = args.nelz {
        cfg.nelz = Some(v);
    }
    if !args.doc.is_empty() {
        cfg.doc = parse_degrees(&args.doc)?;
    }
    if !args.dof.is_empty() {
        cfg.dof = parse_degrees(&args.dof)?;
    }
    if !args.emax.is_empty() {
        cfg.emax = args.emax.clone();
    }
    if let Some(mode) = &args.mode {
        cfg.variant.mode = match mode.as_str() {
            "base" => RunMode::Base,
            "robust" => RunMode::Robust,
            "stress" => RunMode::Stress,
            "robust-stress" => RunMode::RobustStress,
            other => {
                return Err(flexopt::Error::Config(format!("unknown mode \"{other}\"")));
            }
        };
    }
    if let Some(v) = args.eta {
        cfg.variant.robust.eta = v;
    }
    if let Some(v) = args.deta {
        cfg.variant.robust.delta_eta = v;
    }
    if let Some(v) = args.sigma_bar {
        cfg.variant.stress.sigma_bar = Some(v);
    }
    if let Some(v) = args.sigma_bar_fraction {
        cfg.variant.stress.sigma_bar_fraction = Some(v);
    }
    if let Some(p) = &args.sigma_bar_ref {
        cfg.variant.stress.reference_report = Some(p.clone());
    }
    if let Some(v) = args.filter_radius {
        cfg.constants.filter_radius = v;
    }
    if !args.symmetry.is_empty() {
        cfg.symmetry = if args.symmetry.len() == 1 && args.symmetry[0] == "none" {
            Vec::new()
        } else {
            args.symmetry
                .iter()
                .map(|s| match s.as_str() {
                    "x" => Ok(MirrorAxis::X),
                    "y" => Ok(MirrorAxis::Y),
                    "z" => Ok(MirrorAxis::Z),
                    other => Err(flexopt::Error::Config(format!(
                        "unknown symmetry axis \"{other}\""
                    ))),
                })
                .collect::<flexopt::Result<_>>()?
        };
    }
    if let Some(v) = args.vmax {
        cfg.volume_fraction = Some(v);
    }
    if let Some(v) = args.max_iter {
        cfg.termination.max_iterations = v;
    }
    if let Some(v) = args.threads {
        cfg.threads = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = Some(v);
    }
    if let Some(v) = args.snapshot_every {
        cfg.snapshot_every = Some(v);
    }
    cfg.output_dir = Some(args.out.clone());
    Ok(cfg)
}

fn run_command(args: &RunArgs) -> flexopt::Result<i32> {
    let cfg = build_config(args)?;
    let result = flexopt::driver::run(&cfg)?;
    if !args.quiet {
        for row in &result.log {
            let g: Vec<String> = row.g.iter().map(|g| format!("{g:+.4}")).collect();
            println!(
                "k={:4}  f={:10.4}  g=[{}]  change={:.2e}  kkt={:.2e}",
                row.k,
                row.f,
                g.join(", "),
                row.change,
                row.kkt
            );
        }
    }
    let paths = export_all(&result, &args.out)?;
    if !args.quiet {
        let reason = result
            .termination
            .reason
            .map(|r| format!("{r:?}"))
            .unwrap_or_default();
        println!(
            "{} after {} iterations ({reason}); f = {:.4}, Mnd = {:.4}",
            if result.termination.converged {
                "converged"
            } else {
                "stopped"
            },
            result.iterations,
            result.f,
            result.mnd
        );
        for p in paths {
            println!("wrote {}", p.display());
        }
    }
    Ok(result.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => match run_command(args) {
            Ok(code) => ExitCode::from(code as u8),
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(1)
            }
        },
    }
}
