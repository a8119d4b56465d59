use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use permuton_cli::{read_manifest, report, run, CliError, Experiment, ExperimentManifest, RunConfig, RunSummary};
use permuton_core::ssep::{HydroEstimator, Profile};

#[derive(Parser)]
#[command(
    name = "permuton",
    version,
    about = "Interchange-process experiments with reproducible reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the interchange process on a path and write particle trajectories.
    Simulate(RunArgs),
    /// Run one statistical check and write its tables and verdicts.
    Verify {
        #[arg(value_enum)]
        check: Check,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Summarize verdicts from earlier runs.
    Report {
        /// Run directories or output roots to scan for verdict.json files.
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a manifest.json again.
    Rerun {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Tightness,
    Concentration,
    Visits,
    ReturnsScaling,
    Hydrodynamic,
    Independence,
    Returns,
    Moments,
    Marginals,
    Kernel,
}

impl From<Check> for Experiment {
    fn from(c: Check) -> Self {
        match c {
            Check::Tightness => Experiment::Tightness,
            Check::Concentration => Experiment::Concentration,
            Check::Visits => Experiment::Visits,
            Check::ReturnsScaling => Experiment::ReturnsScaling,
            Check::Hydrodynamic => Experiment::Hydrodynamic,
            Check::Independence => Experiment::Independence,
            Check::Returns => Experiment::Returns,
            Check::Moments => Experiment::Moments,
            Check::Marginals => Experiment::Marginals,
            Check::Kernel => Experiment::Kernel,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags take precedence over its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// System sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Macroscopic horizons (or grid times), comma separated.
    #[arg(long = "T", value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, env = "PERMUTON_SEED")]
    seed: Option<u64>,
    /// Window widths for tightness, or times for the fourth-moment check.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Particle pair `i-j`; repeat or comma separate for several.
    #[arg(long = "pair", value_delimiter = ',', value_parser = parse_pair)]
    pairs: Option<Vec<(usize, usize)>>,
    /// Initial profile as JSON, or `left-half`.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    #[arg(long)]
    edge_rate: Option<f64>,
    /// Particles whose trajectories `simulate` writes.
    #[arg(long, value_delimiter = ',')]
    particles: Option<Vec<usize>>,
    #[arg(long = "eps", value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Initial distance of the coupled pair.
    #[arg(long, allow_hyphen_values = true)]
    gap: Option<i64>,
    /// Sample size of the synthetic power check.
    #[arg(long)]
    power_reps: Option<usize>,
    #[arg(long, value_parser = parse_estimator)]
    estimator: Option<HydroEstimator>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        let flags = RunConfig {
            n: self.n.clone(),
            horizons: self.horizons.clone(),
            reps: self.reps,
            deltas: self.deltas.clone(),
            pairs: self.pairs.clone(),
            profile: self.profile.clone(),
            edge_rate: self.edge_rate,
            particles: self.particles.clone(),
            epsilons: self.epsilons.clone(),
            gap: self.gap,
            power_reps: self.power_reps,
            estimator: self.estimator,
            seed: self.seed,
        };
        let file = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                RunConfig::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        Ok(flags.over(file))
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected i-j, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    if s == "left-half" {
        return Ok(Profile::left_half());
    }
    let profile: Profile = serde_json::from_str(s).map_err(|e| e.to_string())?;
    profile.validate().map_err(|e| e.to_string())?;
    Ok(profile)
}

fn parse_estimator(s: &str) -> Result<HydroEstimator, String> {
    match s {
        "tagged" => Ok(HydroEstimator::Tagged),
        "ssep" => Ok(HydroEstimator::Ssep),
        _ => Err(format!("expected tagged or ssep, got {s:?}")),
    }
}

fn print_summary(summary: &RunSummary) {
    for v in &summary.verdict.verdicts {
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "{status} {}: statistic {} (se {}) vs bound {}",
            v.test, v.statistic, v.std_error, v.bound
        );
    }
    println!("{}", summary.dir.display());
}

fn start(experiment: Experiment, args: &RunArgs) -> Result<i32, CliError> {
    let manifest = ExperimentManifest::new(experiment, args.config()?)?;
    let summary = run(manifest, &args.out, args.workers)?;
    print_summary(&summary);
    Ok(summary.exit_code())
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Simulate(args) => start(Experiment::Simulate, &args),
        Command::Verify { check, args } => start(check.into(), &args),
        Command::Rerun { manifest, out, workers } => {
            let summary = run(read_manifest(&manifest)?, &out, workers)?;
            print_summary(&summary);
            Ok(summary.exit_code())
        }
        Command::Report { paths, out } => {
            let summary = report(&paths)?;
            let dir = permuton_cli::fresh_run_dir(&out, "report")?;
            let text = summary.to_text();
            let json = serde_json::to_string_pretty(&summary).expect("serializable") + "\n";
            for (name, contents) in [("summary.json", &json), ("summary.txt", &text)] {
                let path = dir.join(name);
                std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            print!("{text}");
            println!("{}", dir.display());
            Ok(summary.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("permuton: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
