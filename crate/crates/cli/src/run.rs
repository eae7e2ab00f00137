use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rcmlab::environment::io::{write_edge_csv, write_field};
use rcmlab::environment::ConductanceField;
use rcmlab::experiments::{
    contractivity_experiment, diffusivity_experiment, msd_experiment, nash_chain_check, variance_decay_experiment,
    ContractConfig, DecayConfig, DecayTarget, DiffusivityConfig, ExperimentReport, MsdConfig, NashConfig, OrderTarget,
};
use rcmlab::functionals::functional_by_name;
use rcmlab::operators::{write_spectrum_csv, Decomposition, GeneratorKind, TorusOperator};
use rcmlab::spectral::{Centering, SpectralMeasure};
use rcmlab::walker::{msd_estimate, simulate, walk_stream, EnsembleConfig, RateTable, StartRule, WalkerKind};

use crate::config::{ConfigErrors, Experiment, RunConfig};

/// CSV schema version, written as the first line of every CSV artifact.
pub const CSV_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{experiment}: {source}")]
    Compute { experiment: Experiment, source: rcmlab::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for anything the user can fix in the configuration, 3 for numerical or I/O failures.
    pub fn exit_code(&self) -> i32 {
        use rcmlab::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Compute { source, .. } => match source {
                E::Parameter(_)
                | E::Lattice(_)
                | E::Aliasing { .. }
                | E::Range(_)
                | E::TooLarge { .. }
                | E::Declaration(_)
                | E::DimensionMismatch { .. }
                | E::Config(_)
                | E::Parse { .. } => 2,
                E::Solver { .. } | E::Nonergodic { .. } | E::Saturated | E::Fit(_) | E::Io(_) => 3,
            },
            CliError::Io { .. } => 3,
        }
    }
}

/// Result of a completed run; artifacts are already on disk.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn csv(&mut self, name: &str, kind: &str, write: impl FnOnce(&mut Vec<u8>) -> rcmlab::Result<()>) -> rcmlab::Result<()> {
        let mut buf = format!("# rcmlab-csv v{CSV_VERSION} {kind}\n").into_bytes();
        write(&mut buf)?;
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }
}

/// Runs the configured experiment on a pool of `config.workers` threads and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Compute {
        experiment: config.experiment,
        source: rcmlab::Error::Parameter(format!("thread pool: {e}")),
    })?;
    let (report, mut artifacts) = pool
        .install(|| dispatch(config))
        .map_err(|source| CliError::Compute { experiment: config.experiment, source })?;

    let mut echo = config.to_text();
    echo.push_str("# resolved experiment parameters\n");
    for line in report.config_text().lines() {
        echo.push_str("# ");
        echo.push_str(line);
        echo.push('\n');
    }
    artifacts.raw("config.txt", echo.into_bytes());
    let summary = report.summary();
    artifacts.raw("summary.txt", summary.clone().into_bytes());
    let files = commit(&config.out, &artifacts)?;
    Ok(RunOutcome { passed: report.passed(), summary, files })
}

/// Writes everything into a staging directory first, so a failure leaves no partial output.
fn commit(out: &Path, artifacts: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io(&parent))?;
    let name = out.file_name().map_or("out".into(), |n| n.to_string_lossy().into_owned());
    let staging = parent.join(format!(".{name}.partial-{}", std::process::id()));
    let result = (|| -> Result<(), CliError> {
        fs::create_dir_all(&staging).map_err(io(&staging))?;
        for (file, bytes) in &artifacts.files {
            let path = staging.join(file);
            let mut f = fs::File::create(&path).map_err(io(&path))?;
            f.write_all(bytes).map_err(io(&path))?;
            f.sync_all().map_err(io(&path))?;
        }
        if !out.exists() {
            fs::rename(&staging, out).map_err(io(out))?;
        } else {
            for (file, _) in &artifacts.files {
                fs::rename(staging.join(file), out.join(file)).map_err(io(&out.join(file)))?;
            }
            fs::remove_dir(&staging).map_err(io(&staging))?;
        }
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result?;
    Ok(artifacts.files.iter().map(|(f, _)| out.join(f)).collect())
}

fn dispatch(c: &RunConfig) -> rcmlab::Result<(ExperimentReport, Artifacts)> {
    let mut art = Artifacts::new();
    let report = match c.experiment {
        Experiment::Simulate => simulate_run(c, &mut art)?,
        Experiment::Decay => {
            let f = functional_by_name(&c.functional, c.d, &c.law)?;
            let mut cfg = DecayConfig::new(c.law, c.d, c.n, f, c.walker, c.times.clone());
            cfg.realizations = c.realizations;
            cfg.seed = c.seed;
            cfg.path = c.path;
            cfg.centering = c.centering;
            cfg.walks_per_field = c.walks;
            cfg.window = c.window;
            cfg.target = c.target_alpha.map(|alpha| DecayTarget { alpha, tolerance: c.target_tol });
            let out = variance_decay_experiment(&cfg)?;
            art.csv("decay.csv", "decay", |w| out.curve.write_csv(w))?;
            out.report
        }
        Experiment::Diffusivity => {
            let mut cfg = DiffusivityConfig::new(c.law, c.d, c.n);
            if let Some(mu) = &c.mu {
                cfg.mu_list = mu.clone();
            }
            cfg.realizations = c.realizations;
            cfg.seed = c.seed;
            cfg.window = c.window;
            if let Some(alpha) = c.target_alpha {
                cfg.target = OrderTarget::Within { order: alpha, tolerance: c.target_tol };
            }
            let out = diffusivity_experiment(&cfg)?;
            art.csv("diffusivity.csv", "diffusivity", |w| out.write_csv(w))?;
            out.report
        }
        Experiment::Msd => {
            let mut cfg = MsdConfig::new(c.law, c.d, c.n);
            cfg.times = c.times.clone();
            cfg.realizations = c.realizations;
            cfg.walks_per_field = c.walks;
            cfg.seed = c.seed;
            if let Some(mu) = &c.mu {
                cfg.mu_list = mu.clone();
            }
            cfg.predict = c.predict;
            let out = msd_experiment(&cfg)?;
            art.csv("msd.csv", "msd", |w| out.write_csv(w))?;
            out.report
        }
        Experiment::Spectrum => spectrum_run(c, &mut art)?,
        Experiment::Contract => {
            let rcmlab::environment::ConductanceLaw::BoundedPareto { p, eps, cap, .. } = c.law else {
                return Err(rcmlab::Error::Config("contract needs a pareto law".into()));
            };
            let mut cfg = ContractConfig::new(p, eps, cap);
            cfg.atom = c.atom;
            cfg.samples = c.samples;
            cfg.seed = c.seed;
            cfg.importance = c.importance;
            let out = contractivity_experiment(&cfg)?;
            art.csv("contract.csv", "contract-analogue", |w| out.analogue.write_csv(w))?;
            out.report
        }
        Experiment::NashCheck => {
            let cfg = NashConfig {
                law: c.law,
                d: c.d,
                n: c.n,
                n_list: c.boxes.clone(),
                functional: functional_by_name(&c.functional, c.d, &c.law)?,
                realizations: c.realizations,
                seed: c.seed,
                time: c.time,
            };
            let out = nash_chain_check(&cfg)?;
            art.csv("nash.csv", "nash", |w| {
                writeln!(w, "box,c_s,lhs,poincare,block,rhs,min_slack,holds")?;
                for r in &out.rows {
                    writeln!(
                        w,
                        "{},{:?},{:?},{:?},{:?},{:?},{:?},{}",
                        r.box_n, r.c_s, r.lhs, r.poincare, r.block, r.rhs, r.min_slack, r.holds
                    )?;
                }
                Ok(())
            })?;
            out.report
        }
        Experiment::FieldDump => {
            let field = ConductanceField::<f64>::sample_realization(&c.law, &c.lattice(), c.seed, 0)?;
            let mut text = Vec::new();
            write_field(&field, &mut text)?;
            art.raw("field.txt", text);
            art.csv("edges.csv", "edges", |w| write_edge_csv(&field, w))?;
            let mut report = ExperimentReport::new("field-dump");
            report.echo("law", c.law);
            report.echo("d", c.d);
            report.echo("n", c.n);
            report.echo("seed", c.seed);
            report.note(format!("{} edges, empirical mean {:.6}", field.values().len(), field.mean()));
            report
        }
    };
    Ok((report, art))
}

fn simulate_run(c: &RunConfig, art: &mut Artifacts) -> rcmlab::Result<ExperimentReport> {
    let lattice = c.lattice();
    let horizon = c.horizon.unwrap_or(*c.times.last().expect("validated times"));
    let ens = EnsembleConfig {
        law: c.law,
        lattice: lattice.clone(),
        kind: c.walker,
        realizations: c.realizations,
        walks_per_field: c.walks,
        horizon,
        times: c.times.clone(),
        seed: c.seed,
        start: StartRule::Origin,
    };
    let curve = msd_estimate(&ens)?;
    art.csv("msd.csv", "simulate-msd", |w| {
        writeln!(w, "t,msd_over_t,stderr")?;
        for i in 0..curve.times.len() {
            writeln!(w, "{:?},{:?},{:?}", curve.times[i], curve.msd_over_t[i], curve.stderr[i])?;
        }
        Ok(())
    })?;
    // first walk of the first field, same stream the ensemble used
    let field = ConductanceField::<f64>::sample_realization(&c.law, &lattice, c.seed, 0)?;
    let rates = match c.walker {
        WalkerKind::Conductance => RateTable::from_field(&field),
        WalkerKind::Simple => RateTable::simple(&lattice),
    };
    let traj = simulate(&rates, 0, horizon, &mut walk_stream(c.seed, 0, 0))?;
    art.csv("trajectory.csv", "trajectory", |w| traj.write_csv(w))?;

    let mut report = ExperimentReport::new("simulate");
    report.echo("law", c.law);
    report.echo("d", c.d);
    report.echo("n", c.n);
    report.echo("walker", format!("{:?}", c.walker).to_lowercase());
    report.echo("realizations", c.realizations);
    report.echo("walks", c.walks);
    report.echo("horizon", horizon);
    report.echo("seed", c.seed);
    report.note(format!("sample trajectory: {} jumps up to t = {horizon}", traj.jumps()));
    Ok(report)
}

fn spectrum_run(c: &RunConfig, art: &mut Artifacts) -> rcmlab::Result<ExperimentReport> {
    let lattice = c.lattice();
    let field = ConductanceField::<f64>::sample_realization(&c.law, &lattice, c.seed, 0)?;
    let kind = match c.walker {
        WalkerKind::Conductance => GeneratorKind::Conductance,
        WalkerKind::Simple => GeneratorKind::Simple,
    };
    let op = TorusOperator::build(&field, kind);
    let dec = Decomposition::new(&op)?;
    let f = functional_by_name(&c.functional, c.d, &c.law)?;
    let g = f.evaluate_all(&field)?;
    let m = SpectralMeasure::from_decomposition(&dec, &g, Centering::Center)?;
    art.csv("spectrum.csv", "spectrum", |w| write_spectrum_csv(dec.eigenvalues(), w))?;
    art.csv("measure.csv", "spectral-measure", |w| m.write_csv(w))?;

    let mut report = ExperimentReport::new("spectrum");
    report.echo("law", c.law);
    report.echo("d", c.d);
    report.echo("n", c.n);
    report.echo("functional", f.name());
    report.echo("walker", format!("{:?}", c.walker).to_lowercase());
    report.echo("seed", c.seed);
    let parseval = g.centered().mean_square();
    let mass = m.total_mass();
    report.check(
        "Parseval",
        (mass - parseval).abs() <= 1e-8 * parseval.max(1e-300) || (mass == 0.0 && parseval < 1e-24),
        format!("total mass {mass:.10e} vs centered mean square {parseval:.10e}"),
    );
    let gap = dec.eigenvalues().get(1).copied().unwrap_or(0.0);
    report.note(format!("spectral gap {gap:.6e}"));
    match m.sigma_squared() {
        Ok(s) => report.note(format!("2 Σ w/λ = {s:.6e}")),
        Err(e) => report.note(format!("no finite 2 Σ w/λ: {e}")),
    }
    Ok(report)
}
