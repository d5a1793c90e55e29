//! Command-line front end for the blindbounds experiments.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 on invalid input and 3
//! when a checked inequality fails.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blindbounds::audit::{run_audits, AuditConfig, APPROXIMATION_CONSTANT};
use blindbounds::bounds::{separation_pipeline, two_state_example};
use blindbounds::defect::minimize_defect;
use blindbounds::dist::{parse_probability, parse_rational, rational_string};
use blindbounds::protocol::{build_protocol, monte_carlo_check, report_for};
use blindbounds::stochastic::birkhoff_decompose;
use blindbounds::{ClassicalEnsemble, DefectBackend, DefectProblem, Distribution, Error, StochasticMatrix};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use output::{emit, json_document, num, Csv};

#[derive(Parser)]
#[command(
    name = "blindbounds",
    version,
    about = "Blind compression bounds, audits and protocol simulation"
)]
struct Cli {
    /// Worker threads for parallel sweeps (defaults to the number of CPUs).
    #[arg(long, global = true, env = "BLINDBOUNDS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact trace distances and defect bound for the states (1/2, 1/2) and (1/3, 2/3).
    #[command(name = "example-2x2")]
    Example2x2 {
        /// Marginal error, as a decimal or "num/den".
        #[arg(long, default_value = "0")]
        eps: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate bound pipeline for the uniform/staircase ensemble at each d.
    Separation {
        /// Comma-separated alphabet sizes.
        #[arg(long, value_delimiter = ',', required_unless_present = "config")]
        d: Vec<usize>,
        /// JSON file of the form {"d": [..]}, used instead of --d.
        #[arg(long, conflicts_with = "d")]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bucketing protocol on the uniform and staircase distributions.
    Protocol {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Simulated copies for the Monte Carlo error estimate; 0 skips it.
        #[arg(long, default_value_t = 100_000)]
        copies: usize,
        /// JSON file holding [rho, sigma] to use instead of uniform/staircase.
        #[arg(long)]
        pair: Option<PathBuf>,
        /// CSV report path (stdout if absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Bucket table JSON path.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Minimizes the information defect under a marginal error budget.
    Defect {
        /// JSON problem file; overrides the flags below.
        #[arg(long)]
        problem: Option<PathBuf>,
        /// A state as comma-separated probabilities; repeat for each label.
        #[arg(long = "state")]
        states: Vec<String>,
        /// Use the uniform/staircase pair at this size.
        #[arg(long, conflicts_with = "states")]
        staircase: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Backend::PenaltyGradient)]
        backend: Backend,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized audits of the approximation, rigidity and information inequalities.
    Audit {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 6)]
        d_max: usize,
        /// Entrywise constant in the approximation audit; lower it to check the audit catches it.
        #[arg(long, default_value_t = APPROXIMATION_CONSTANT, hide = true)]
        approximation_constant: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Birkhoff decomposition of a doubly stochastic matrix given as JSON rows.
    Decompose {
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    PenaltyGradient,
    GridOracle,
}

impl From<Backend> for DefectBackend {
    fn from(b: Backend) -> Self {
        match b {
            Backend::PenaltyGradient => DefectBackend::PenaltyGradient,
            Backend::GridOracle => DefectBackend::GridOracle,
        }
    }
}

enum Failure {
    Io(String),
    Invalid(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Violation(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Invalid(m) | Failure::Violation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvariantViolated(_) => Failure::Violation(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn parse_state(s: &str) -> Result<Distribution, Failure> {
    let probs = s
        .split(',')
        .map(parse_probability)
        .collect::<blindbounds::Result<Vec<_>>>()?;
    Ok(Distribution::new(probs)?)
}

fn example_2x2(eps: &str, out: Option<&Path>) -> Outcome {
    let x = two_state_example(&parse_rational(eps)?)?;
    let mut csv = Csv::new(None, &["quantity", "exact", "value"]);
    for (name, q) in [
        ("single_copy_distance", &x.single_copy),
        ("two_copy_distance", &x.two_copy),
        ("gap", &x.gap),
        ("epsilon", &x.epsilon),
        ("defect_bound", &x.defect_bound),
    ] {
        let approx = blindbounds::dist::rational_to_f64(q).unwrap_or(f64::NAN);
        csv.row(&[name.to_string(), rational_string(q), num(approx)]);
    }
    Ok(emit(out, &csv.finish())?)
}

fn separation(d: Vec<usize>, config: Option<&Path>, out: Option<&Path>) -> Outcome {
    let ds = match config {
        Some(path) => {
            let v: serde_json::Value = read_json(path)?;
            serde_json::from_value::<Vec<usize>>(v["d"].clone())
                .map_err(|e| Failure::Invalid(format!("{}: field \"d\": {e}", path.display())))?
        }
        None => d,
    };
    if let Some(bad) = ds.iter().find(|&&d| d < 2) {
        return Err(Failure::Invalid(format!("d = {bad} must be at least 2")));
    }
    use rayon::prelude::*;
    let rows = ds
        .par_iter()
        .map(|&d| separation_pipeline(d).map(|r| (d, r)))
        .collect::<blindbounds::Result<Vec<_>>>()?;
    let mut csv = Csv::new(
        None,
        &[
            "d",
            "epsilon",
            "rate_bound",
            "holevo",
            "conditional_entropy",
            "defect_term",
            "vacuous",
        ],
    );
    for (d, r) in rows {
        csv.row(&[
            d.to_string(),
            num(r.epsilon),
            num(r.value),
            num(r.diagnostic("holevo_computed").unwrap_or(f64::NAN)),
            num(r.diagnostic("conditional_entropy").unwrap_or(f64::NAN)),
            num(r.component("defect").unwrap_or(f64::NAN)),
            r.vacuous.to_string(),
        ]);
    }
    Ok(emit(out, &csv.finish())?)
}

#[allow(clippy::too_many_arguments)]
fn protocol(
    d: usize,
    delta: f64,
    gamma: f64,
    seed: u64,
    copies: usize,
    pair: Option<&Path>,
    out: Option<&Path>,
    table: Option<&Path>,
) -> Outcome {
    let (rho, sigma) = match pair {
        Some(path) => {
            let [rho, sigma]: [Distribution; 2] = read_json(path)?;
            if rho.d() != d || sigma.d() != d {
                return Err(Failure::Invalid(format!(
                    "{}: states must have {d} entries",
                    path.display()
                )));
            }
            (rho, sigma)
        }
        None => (Distribution::uniform(d)?, Distribution::staircase(d)?),
    };
    let proto = build_protocol(&rho, &sigma, delta, gamma)?;
    let r = report_for(&proto, &rho, &sigma)?;
    let mut columns = vec![
        "d",
        "delta",
        "gamma",
        "u",
        "bits_sent",
        "bits_sent_integer",
        "rate_bound",
        "local_error_rho",
        "local_error_sigma",
        "truncation_rho",
        "truncation_sigma",
    ];
    let mut row = vec![
        r.d.to_string(),
        num(r.delta),
        num(r.gamma),
        r.u.to_string(),
        num(r.bits_sent),
        r.bits_sent_integer.to_string(),
        num(r.rate_bound),
        num(r.local_error_rho),
        num(r.local_error_sigma),
        num(r.truncation_rho),
        num(r.truncation_sigma),
    ];
    if copies > 0 {
        columns.extend([
            "copies",
            "mc_error_rho",
            "mc_std_error_rho",
            "mc_error_sigma",
            "mc_std_error_sigma",
        ]);
        row.push(copies.to_string());
        for (k, input) in [&rho, &sigma].into_iter().enumerate() {
            let mc = monte_carlo_check(&proto, input, copies, seed.wrapping_add(k as u64))?;
            row.push(num(mc.estimate));
            row.push(num(mc.std_error));
        }
    }
    let mut csv = Csv::new(Some(seed), &columns);
    csv.row(&row);
    emit(out, &csv.finish())?;
    if let Some(path) = table {
        let body = serde_json::to_value(&proto).expect("bucket table serializes");
        emit(Some(path), &json_document(Some(seed), body))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn defect(
    problem: Option<&Path>,
    states: &[String],
    staircase: Option<usize>,
    eps: f64,
    backend: Backend,
    seed: u64,
    restarts: usize,
    out: Option<&Path>,
) -> Outcome {
    let p = match problem {
        Some(path) => read_json::<DefectProblem>(path)?,
        None => {
            let ensemble = match staircase {
                Some(d) => ClassicalEnsemble::uniform_staircase(d)?,
                None if states.is_empty() => {
                    return Err(Failure::Invalid(
                        "give --problem, --state (repeated) or --staircase".into(),
                    ))
                }
                None => ClassicalEnsemble::equiprobable(
                    states.iter().map(|s| parse_state(s)).collect::<Result<Vec<_>, _>>()?,
                )?,
            };
            DefectProblem::new(ensemble, eps, backend.into())?
                .with_seed(seed)
                .with_restarts(restarts)
        }
    };
    let solution = minimize_defect(&p)?;
    let body = json!({
        "problem": p,
        "solution": solution,
    });
    Ok(emit(out, &json_document(Some(p.seed), body))?)
}

fn audit(cfg: AuditConfig, out: Option<&Path>) -> Outcome {
    if cfg.trials == 0 {
        eprintln!("warning: trials = 0, randomized suites check nothing");
    }
    let outcomes = run_audits(&cfg)?;
    let mut csv = Csv::new(
        Some(cfg.seed),
        &["suite", "instances", "violations", "worst_margin", "status"],
    );
    for o in &outcomes {
        csv.row(&[
            o.suite.clone(),
            o.instances.to_string(),
            o.violations.to_string(),
            num(o.worst_margin),
            if o.passed() { "pass" } else { "fail" }.to_string(),
        ]);
    }
    emit(out, &csv.finish())?;
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed())
        .map(|o| o.suite.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(format!("audit failed: {}", failed.join(", "))))
    }
}

fn decompose(matrix: &Path, out: Option<&Path>) -> Outcome {
    let m: StochasticMatrix = read_json(matrix)?;
    let b = birkhoff_decompose(&m)?;
    let error = b
        .reconstruct()
        .iter()
        .zip(m.entries())
        .map(|(a, c)| (a - c).abs())
        .fold(0.0, f64::max);
    let body = json!({
        "d": m.d(),
        "weights": b.weights,
        "permutations": b.permutations,
        "identity_weight": b.identity_weight(),
        "reconstruction_error": error,
    });
    Ok(emit(out, &json_document(None, body))?)
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Invalid("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Invalid(e.to_string()))?;
    }
    match cli.command {
        Command::Example2x2 { eps, out } => example_2x2(&eps, out.as_deref()),
        Command::Separation { d, config, out } => separation(d, config.as_deref(), out.as_deref()),
        Command::Protocol {
            d,
            delta,
            gamma,
            seed,
            copies,
            pair,
            out,
            table,
        } => protocol(
            d,
            delta,
            gamma,
            seed,
            copies,
            pair.as_deref(),
            out.as_deref(),
            table.as_deref(),
        ),
        Command::Defect {
            problem,
            states,
            staircase,
            eps,
            backend,
            seed,
            restarts,
            out,
        } => defect(
            problem.as_deref(),
            &states,
            staircase,
            eps,
            backend,
            seed,
            restarts,
            out.as_deref(),
        ),
        Command::Audit {
            seed,
            trials,
            d_max,
            approximation_constant,
            out,
        } => audit(
            AuditConfig {
                seed,
                trials,
                d_max,
                approximation_constant,
            },
            out.as_deref(),
        ),
        Command::Decompose { matrix, out } => decompose(&matrix, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
