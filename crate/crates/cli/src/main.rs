use std::path::PathBuf;
use std::process::ExitCode;

use bistoch_cli::commands::{self, DEFAULT_SCHEDULES};
use bistoch_cli::{protect, verify, CliError, ReleasePlanConfig};
use bistoch_core::ledger::Targets;
use bistoch_core::matrix::FILE_TOL;
use bistoch_core::{BistochasticMatrix, Convention, MatrixSpec};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bistoch",
    version,
    about = "Bistochastic anonymization of longitudinal panels"
)]
struct Cli {
    /// Release plan (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the plan's master seed; also seeds `verify`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    PerfectSecrecy,
    DpCirculant,
    KAnonBlocks,
    EntropyTarget,
    Identity,
    Custom,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    T1,
    T2,
}

impl From<ConventionArg> for Convention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::T1 => Convention::FromFirstPeriod,
            ConventionArg::T2 => Convention::FromSecondPeriod,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a transition matrix, write it and print its entropy.
    Genmat {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Block sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        partition: Vec<usize>,
        /// Matrix file for `--kind custom`.
        #[arg(long)]
        matrix: Option<PathBuf>,
        /// Output matrix file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Anonymize one period of the release plan.
    Protect {
        #[arg(long)]
        period: u32,
        /// Output directory for the release CSV and ledgers.
        #[arg(long)]
        out: PathBuf,
    },
    /// Report a ledger file, optionally against targets.
    Ledger {
        file: PathBuf,
        /// Convention for the verdict and next-release requirement.
        #[arg(long, value_enum)]
        convention: Option<ConventionArg>,
        /// Per-period β targets, comma separated; defaults to the plan's.
        #[arg(long, value_delimiter = ',')]
        targets: Option<Vec<f64>>,
        #[arg(long)]
        beta_l: Option<f64>,
        /// State count of a prospective next release.
        #[arg(long)]
        next_n: Option<usize>,
    },
    /// Cross-section vs. trajectory percentages for DP-circulant schedules.
    #[command(name = "simulate-table1")]
    SimulateTable1 {
        /// ε per period, comma separated; repeat for several rows.
        #[arg(long)]
        schedule: Vec<String>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Cross-section percentages to turn into trajectory percentages
        /// instead of simulating.
        #[arg(long)]
        cross_section: Option<String>,
    },
    /// Run the oracle suites.
    Verify {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Also check this matrix file and sample from it.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{s:?}: {e}")))
        })
        .collect()
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("--{flag} is required for this kind")))
}

fn load_config(cli: &Cli) -> Result<Option<ReleasePlanConfig>, CliError> {
    cli.config
        .as_deref()
        .map(ReleasePlanConfig::load)
        .transpose()
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    match &cli.command {
        Command::Genmat {
            kind,
            n,
            epsilon,
            beta,
            partition,
            matrix,
            out,
        } => {
            let spec = match kind {
                Kind::PerfectSecrecy => MatrixSpec::PerfectSecrecy { n: need(*n, "n")? },
                Kind::DpCirculant => MatrixSpec::DpCirculant {
                    n: need(*n, "n")?,
                    epsilon: need(*epsilon, "epsilon")?,
                },
                Kind::KAnonBlocks => MatrixSpec::KAnonBlocks {
                    partition: partition.clone(),
                },
                Kind::EntropyTarget => MatrixSpec::EntropyTarget {
                    n: need(*n, "n")?,
                    beta: need(*beta, "beta")?,
                },
                Kind::Identity => MatrixSpec::Identity { n: need(*n, "n")? },
                Kind::Custom => MatrixSpec::Custom {
                    path: need(matrix.clone(), "matrix")?,
                },
            };
            spec.check()?;
            print!("{}", commands::genmat(&spec, out.as_deref())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Protect { period, out } => {
            let cfg = load_config(cli)?
                .ok_or_else(|| CliError::Config("protect needs --config".into()))?;
            let report = protect(&cfg, *period, out, cli.seed)?;
            print!("{}", report.render());
            Ok(ExitCode::SUCCESS)
        }
        Command::Ledger {
            file,
            convention,
            targets,
            beta_l,
            next_n,
        } => {
            let cfg = load_config(cli)?;
            let plan_targets = cfg.as_ref().and_then(|c| c.targets.clone());
            let ledger = commands::read_ledger(file)?;
            let convention = convention
                .map(Convention::from)
                .or(plan_targets.as_ref().map(|t| t.convention))
                .unwrap_or(Convention::FromSecondPeriod);
            let beta_l = beta_l.or(plan_targets.as_ref().map(|t| t.beta_l));
            let targets = match (targets, &plan_targets) {
                (Some(per_period), _) => Some(Targets {
                    per_period: per_period.clone(),
                    beta_l: beta_l.unwrap_or(0.0),
                }),
                (None, Some(plan)) => {
                    // the plan lists every period; judge the ones released so far
                    let mut t = plan.targets();
                    t.per_period.truncate(ledger.records().len());
                    t.beta_l = beta_l.unwrap_or(t.beta_l);
                    Some(t)
                }
                (None, None) => beta_l.map(|b| Targets {
                    per_period: vec![0.0; ledger.records().len()],
                    beta_l: b,
                }),
            };
            let next = match next_n {
                Some(n) => Some((
                    beta_l.ok_or_else(|| {
                        CliError::Config("--next-n needs a beta_L target (--beta-l or plan)".into())
                    })?,
                    *n,
                )),
                None => None,
            };
            let report = commands::ledger_report(&ledger, targets.as_ref(), convention, next)?;
            print!("{}", report.text);
            Ok(match report.pass {
                Some(false) => ExitCode::from(2),
                _ => ExitCode::SUCCESS,
            })
        }
        Command::SimulateTable1 {
            schedule,
            n,
            cross_section,
        } => {
            if let Some(given) = cross_section {
                print!(
                    "{}",
                    commands::simulate_from_cross_sections(&parse_list(given)?)
                );
                return Ok(ExitCode::SUCCESS);
            }
            let schedules: Vec<Vec<f64>> = if schedule.is_empty() {
                DEFAULT_SCHEDULES.iter().map(|s| s.to_vec()).collect()
            } else {
                schedule
                    .iter()
                    .map(|s| parse_list(s))
                    .collect::<Result<_, _>>()?
            };
            print!("{}", commands::simulate(*n, &schedules)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { trials, matrix } => {
            let seed = cli.seed.unwrap_or(1);
            let custom = matrix
                .as_deref()
                .map(|p| BistochasticMatrix::read_file(p, FILE_TOL))
                .transpose()?;
            let reports = [
                verify::block_suite(seed, *trials)?,
                verify::kronecker_suite(seed, *trials)?,
                verify::transition_suite(seed, custom.as_ref()),
            ];
            print!("seed {seed}\n{}", verify::render(&reports));
            if let Some(bad) = reports.iter().find(|r| !r.pass()) {
                return Err(CliError::OracleFailure(bad.name.to_string()));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are validation errors; help and version are not
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
