use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rcmlab_cli::{load, run, CliError, Experiment};

#[derive(Parser)]
#[command(name = "rcmlab", version, about = "Random walks among random conductances: batch experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo walks: MSD curve and one sample trajectory.
    #[command(after_help = "CSV: msd.csv t,msd_over_t,stderr; trajectory.csv time,site,dx0..")]
    Simulate(Flags),
    /// Variance decay t ↦ E[(f_t)²] and its power-law fit.
    #[command(after_help = "CSV: decay.csv t,value,stderr")]
    Decay(Flags),
    /// A0/A1/A2 estimators of the effective diffusivity over a μ list.
    #[command(after_help = "CSV: diffusivity.csv mu,a0,a1,a2,a2_stderr,mu_phi_sq,excess,excess_stderr,chain_residual,iterations")]
    Diffusivity(Flags),
    /// Mean squared displacement against the diffusivity baseline.
    #[command(after_help = "CSV: msd.csv t,msd_over_t,msd_stderr,gap,gap_stderr,predicted_gap")]
    Msd(Flags),
    /// Eigenvalues of one field's generator and the spectral measure of a functional.
    #[command(after_help = "CSV: spectrum.csv index,eigenvalue; measure.csv lambda,weight")]
    Spectrum(Flags),
    /// Closed-form E[S1(Lf) S1(f)] against Monte Carlo, plus the simple-walk analogue.
    #[command(after_help = "CSV: contract.csv t,value,stderr (simple-walk analogue curve)")]
    Contract(Flags),
    /// Box Nash inequality per radius.
    #[command(after_help = "CSV: nash.csv box,c_s,lhs,poincare,block,rhs,min_slack,holds")]
    NashCheck(Flags),
    /// Writes one sampled field.
    #[command(after_help = "Files: field.txt (native format); CSV: edges.csv edge,x0..,axis,omega")]
    FieldDump(Flags),
}

#[derive(Args)]
struct Flags {
    /// key=value configuration file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// constant:c | uniform:a,b | twopoint:p,low,high | pareto:p,eps,cap[,atom]
    #[arg(long)]
    law: Option<String>,
    /// drift | edge | contract-example | constant:c | poly:<expr>
    #[arg(long)]
    functional: Option<String>,
    /// t1,t2,... or geom:lo,hi,count
    #[arg(long)]
    times: Option<String>,
    /// Strictly decreasing μ list.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match cli.command {
        Command::Simulate(f) => (Experiment::Simulate, f),
        Command::Decay(f) => (Experiment::Decay, f),
        Command::Diffusivity(f) => (Experiment::Diffusivity, f),
        Command::Msd(f) => (Experiment::Msd, f),
        Command::Spectrum(f) => (Experiment::Spectrum, f),
        Command::Contract(f) => (Experiment::Contract, f),
        Command::NashCheck(f) => (Experiment::NashCheck, f),
        Command::FieldDump(f) => (Experiment::FieldDump, f),
    };
    let code = match execute(experiment, flags) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(experiment: Experiment, f: Flags) -> Result<rcmlab_cli::RunOutcome, CliError> {
    let text = match &f.config {
        Some(p) => std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?,
        None => String::new(),
    };
    let mut overrides = vec![("experiment".to_string(), experiment.to_string())];
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.to_string(), v));
        }
    };
    put("seed", f.seed.map(|v| v.to_string()));
    put("workers", f.workers.map(|v| v.to_string()));
    put("out", f.out.map(|v| v.display().to_string()));
    put("d", f.d.map(|v| v.to_string()));
    put("n", f.n.map(|v| v.to_string()));
    put("law", f.law);
    put("functional", f.functional);
    put("times", f.times);
    put("mu", f.mu);
    put("realizations", f.realizations.map(|v| v.to_string()));
    let config = load(&text, &overrides)?;
    run(&config)
}
