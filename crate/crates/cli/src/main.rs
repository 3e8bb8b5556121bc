use clap::{ArgGroup, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vps_cli::config::{load, validate};
use vps_cli::error::{CliError, CliResult};
use vps_cli::experiment::{oracle_report, run, thermal_reference};
use vps_cli::plot::plot;
use vps_core::hamiltonian::{build_heisenberg, build_tfim, parse_pauli_file, PauliSum};
use vps_core::parallel::Execution;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  runtime failure (numerical error, I/O, missing artifact)
  2  invalid configuration or arguments

Environment:
  VPS_THREADS  maximum worker threads (positive integer)";

#[derive(Parser)]
#[command(name = "vps", version, about = "Variational post-selection experiments", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML/JSON config or a previous run's manifest.json.
    #[command(after_help = EXIT_CODES)]
    Run {
        config: PathBuf,
        /// Run trials one at a time.
        #[arg(long)]
        sequential: bool,
    },
    /// Exact ground energy and, with --beta, thermal reference free energies.
    #[command(after_help = EXIT_CODES)]
    #[command(group(ArgGroup::new("model").required(true).args(["tfim", "heisenberg", "file"])))]
    Oracle {
        /// Transverse-field Ising lattice, e.g. 4x3
        #[arg(long, value_name = "RxC")]
        tfim: Option<String>,
        /// Heisenberg lattice, e.g. 4x3
        #[arg(long, value_name = "RxC")]
        heisenberg: Option<String>,
        /// Pauli-sum file
        #[arg(long, value_name = "PATH")]
        file: Option<PathBuf>,
        /// Periodic boundaries
        #[arg(long)]
        pbc: bool,
        #[arg(long, value_name = "B")]
        beta: Option<f64>,
        /// Report the Renyi-2 reference at --beta
        #[arg(long, requires = "beta")]
        renyi2: bool,
        /// Report the Gibbs free energy at --beta
        #[arg(long, requires = "beta")]
        gibbs: bool,
    },
    /// Write plot data for a finished campaign directory.
    #[command(after_help = EXIT_CODES)]
    Plot { campaign_dir: PathBuf },
}

fn parse_dims(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("lattice `{s}` is not of the form RxC"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r * c < 2 {
        return Err(bad());
    }
    Ok((r, c))
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("VPS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("VPS_THREADS must be a positive integer, got `{v}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("VPS_THREADS: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn oracle(
    tfim: Option<String>,
    heisenberg: Option<String>,
    file: Option<PathBuf>,
    pbc: bool,
    beta: Option<f64>,
    renyi2: bool,
    gibbs: bool,
) -> CliResult<()> {
    if beta.is_some() && !renyi2 && !gibbs {
        return Err(CliError::Usage("--beta needs --renyi2 or --gibbs".into()));
    }
    if let Some(b) = beta {
        if !(b > 0.0 && b.is_finite()) {
            return Err(CliError::Usage(format!("--beta must be positive, got {b}")));
        }
    }
    let bc = if pbc { "pbc" } else { "obc" };
    let (h, model, lattice): (PauliSum, &str, String) = if let Some(s) = tfim {
        let (r, c) = parse_dims(&s)?;
        (build_tfim(r, c, pbc, r == 1 || c == 1)?, "tfim", format!("{r}x{c} {bc}"))
    } else if let Some(s) = heisenberg {
        let (r, c) = parse_dims(&s)?;
        (build_heisenberg(r, c, pbc)?, "heisenberg", format!("{r}x{c} {bc}"))
    } else {
        let path = file.expect("clap requires one model");
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let h = parse_pauli_file(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        (h, "file", path.display().to_string())
    };
    let report = oracle_report(&h, model, &lattice, &[])?;
    println!("model: {model} {lattice}");
    println!("qubits: {}", report.n_qubits);
    println!("ground_energy: {:.3}", report.ground_energy);
    println!("ground_energy_exact: {:.12}", report.ground_energy);
    if let Some(b) = beta {
        let t = thermal_reference(&h, b)?;
        println!("beta: {b}");
        if gibbs {
            println!("gibbs_free_energy: {:.12}", t.gibbs_free_energy);
        }
        if renyi2 {
            println!("renyi2_free_energy: {:.12}", t.renyi2_free_energy);
            if let Some(e) = t.renyi2_ebar {
                println!("renyi2_ebar: {e:.12}");
            }
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Run { config, sequential } => {
            let loaded = load(&config)?;
            let exp = validate(&loaded)?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let out = run(&loaded, &exp, exec)?;
            println!("wrote {} artifacts to {}", out.artifacts.len() + 1, out.dir.display());
            println!("config_hash: {}", out.manifest.config_hash);
            Ok(())
        }
        Command::Oracle {
            tfim,
            heisenberg,
            file,
            pbc,
            beta,
            renyi2,
            gibbs,
        } => oracle(tfim, heisenberg, file, pbc, beta, renyi2, gibbs),
        Command::Plot { campaign_dir } => {
            for p in plot(&campaign_dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
