//! `cqbound`: batch front end for the converse-bound toolkit.

mod model;
mod report;

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqbound::bottleneck::{delta, delta_star, DeltaInstance};
use cqbound::bounds::{
    image_size_bound_ii, sc_bound_stein, sc_bound_stein_formal, sc_bound_stein_on_curve, source_coding_bound,
    theta_n_lower, DualCurve,
};
use cqbound::entropy::{conditional_entropy, mutual_information, relative_entropy, renyi_relative_entropy, shannon_entropy, von_neumann_entropy};
use cqbound::hypothesis::{brute_force_beta_distributed, neyman_pearson_beta, CQSource};
use cqbound::linalg::DensityMatrix;
use cqbound::tolerance::Limits;
use cqbound::verify::{run_suite, CheckRow, Suite};
use thiserror::Error;

use model::{load_model, Model};
use report::{margins_csv, Report, Unit};

pub const THREADS_ENV: &str = "CQBOUND_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("precondition error: {0}")]
    Precondition(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numerical(_) | CliError::Failed(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::ResourceCap(_) => 4,
        }
    }
}

impl From<cqbound::Error> for CliError {
    fn from(e: cqbound::Error) -> Self {
        use cqbound::Error as E;
        let msg = e.to_string();
        match e {
            E::Precondition(_) => CliError::Precondition(msg),
            E::ResourceCap(_) => CliError::ResourceCap(msg),
            E::Numerical(_) => CliError::Numerical(msg),
            _ => CliError::Validation(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cqbound", version, about = "Entropic quantities and converse bounds for classical-quantum sources")]
struct Cli {
    /// Report entropic quantities and rates in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ModelArg {
    /// Model file (JSON).
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropies, mutual information and source constants.
    Entropy {
        #[command(flatten)]
        model: ModelArg,
        /// Also report the Rényi divergence of this order against the alternative.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Optimal type-II error for `n` copies of the joint state against the alternative.
    Beta {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        n: usize,
    },
    /// Bottleneck functional Δ(Q, Λ, ρ_Y, c).
    Delta {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        c: f64,
    },
    /// Channel form Δ*(Q, Λ, ρ_Y, c).
    DeltaStar {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        c: f64,
        /// Auxiliary alphabet size (default |X| + 1).
        #[arg(long)]
        u_size: Option<usize>,
    },
    /// Finite-n lower estimate of the rate-constrained Stein exponent.
    Theta {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        n: usize,
        /// Sender rate per letter.
        #[arg(long)]
        r: f64,
    },
    /// Strong-converse upper bound on the Stein exponent.
    ScBound {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        u_size: Option<usize>,
        /// Evaluate the expression even below the block-length threshold.
        #[arg(long)]
        formal: bool,
    },
    /// Image-size lower bound (second form).
    ImageSize {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        u_size: Option<usize>,
    },
    /// Strong-converse bound for source coding with side information.
    SourceBound {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: usize,
        /// Helper rate per letter.
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        u_size: Option<usize>,
    },
    /// Run seeded verification suites and emit a margins table.
    Verify {
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        suite: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        seed: u64,
        /// Instances per suite (default depends on the suite).
        #[arg(long)]
        instances: Option<usize>,
        /// Write the margins table here instead of appending it to the report.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Exit with status 1 when any check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Brute-force exponent against the formal strong-converse bound for n = 1..=n_max.
    Sweep {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n_max: usize,
        #[arg(long)]
        u_size: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("cqbound: {e}");
        return ExitCode::from(e.exit_code());
    }
    match run(&cli) {
        Ok(text) => match write_output(cli.out.as_ref(), &text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("cqbound: {e}");
                ExitCode::from(e.exit_code())
            }
        },
        Err((e, partial)) => {
            if let Some(text) = partial {
                let _ = write_output(cli.out.as_ref(), &text);
            }
            eprintln!("cqbound: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("{THREADS_ENV}: '{v}' is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn flags(pairs: &[(&'static str, String)]) -> BTreeMap<&'static str, String> {
    pairs.iter().cloned().collect()
}

fn rate(cli: &Cli, r: f64) -> f64 {
    if cli.bits {
        r * LN_2
    } else {
        r
    }
}

fn u_size_or_default(src: &CQSource, u: Option<usize>) -> usize {
    u.unwrap_or(src.size() + 1)
}

/// Joint state and its alternative: `alt_states` when given, else the product of marginals.
fn hypotheses(m: &Model) -> Result<(DensityMatrix, DensityMatrix), CliError> {
    let joint = m.source.joint_state()?;
    let alt = match &m.alt_states {
        Some(alt) => CQSource::new(m.source.alphabet().to_vec(), m.source.q_x().to_vec(), alt.clone())?.joint_state()?,
        None => m.source.product_of_marginals()?,
    };
    Ok((joint, alt))
}

type RunResult = Result<String, (CliError, Option<String>)>;

fn run(cli: &Cli) -> RunResult {
    match &cli.command {
        Command::Verify { suite, all, seed, instances, csv, strict } => {
            verify(cli, suite.as_deref(), *all, *seed, *instances, csv.as_ref(), *strict)
        }
        Command::Sweep { model, r, eps, n_max, u_size, csv } => {
            sweep(cli, model, *r, *eps, *n_max, *u_size, csv.as_ref()).map_err(|e| (e, None))
        }
        other => single(cli, other).map_err(|e| (e, None)),
    }
}

fn single(cli: &Cli, command: &Command) -> Result<String, CliError> {
    let text = match command {
        Command::Entropy { model, alpha } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let joint = src.joint_state()?;
            let mut f = vec![];
            if let Some(a) = alpha {
                f.push(("alpha", a.to_string()));
            }
            let mut rep = Report::new(cli.bits, &flags(&f));
            rep.value("H_X", shannon_entropy(src.q_x()).nats, Unit::Entropic);
            rep.value("H_Y", von_neumann_entropy(src.rho_y()).nats, Unit::Entropic);
            rep.value("I_XY", mutual_information(&joint, &[0])?.nats, Unit::Entropic);
            rep.value("H_Y_given_X", conditional_entropy(&joint, 0)?.nats, Unit::Entropic);
            let (joint, alt) = hypotheses(&m)?;
            rep.value("D_joint_alt", relative_entropy(&joint, alt.op())?.nats, Unit::Entropic);
            if let Some(a) = alpha {
                rep.value("D_alpha_joint_alt", renyi_relative_entropy(&joint, alt.op(), *a)?.nats, Unit::Entropic);
            }
            rep.value("eta", src.eta(), Unit::Dimensionless);
            rep.value("gamma", src.gamma(), Unit::Dimensionless);
            rep.render()
        }
        Command::Beta { model, eps, n } => {
            let m = load_model(&model.model)?;
            let (joint, alt) = hypotheses(&m)?;
            if *n == 0 {
                return Err(CliError::Validation("n: must be positive".into()));
            }
            let limits = Limits::default();
            let dim = (joint.dim() as f64).powi(*n as i32);
            if dim > limits.max_dim as f64 {
                return Err(CliError::ResourceCap(format!("dimension {dim} of {n} copies exceeds {}", limits.max_dim)));
            }
            let (beta, _) = neyman_pearson_beta(&joint.tensor_power(*n), &alt.tensor_power(*n), *eps)?;
            let mut rep = Report::new(cli.bits, &flags(&[("eps", eps.to_string()), ("n", n.to_string())]));
            rep.value("beta", beta, Unit::Dimensionless);
            rep.value("exponent", -beta.ln() / *n as f64, Unit::Entropic);
            rep.render()
        }
        Command::Delta { model, c } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let inst = DeltaInstance::from_states(src.q_x().to_vec(), src.states(), src.rho_y().op().clone(), *c)?;
            let sol = delta(&inst)?;
            let mut rep = Report::new(cli.bits, &flags(&[("c", c.to_string())]));
            rep.value("delta", sol.value, Unit::Entropic);
            rep.value("delta.ascent", sol.ascent_value, Unit::Entropic);
            if let Some(g) = sol.grid_value {
                rep.value("delta.grid", g, Unit::Entropic);
            }
            for (x, g) in src.alphabet().iter().zip(&sol.gamma) {
                rep.value(format!("gamma[{x}]"), *g, Unit::Dimensionless);
            }
            rep.render()
        }
        Command::DeltaStar { model, c, u_size } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let u = u_size_or_default(src, *u_size);
            let (value, best) = delta_star(src.q_x(), src.states(), src.rho_y().op(), *c, u)?;
            let mut rep = Report::new(cli.bits, &flags(&[("c", c.to_string()), ("u_size", u.to_string())]));
            rep.value("delta_star", value, Unit::Entropic);
            for (i, p) in best.p_u.iter().enumerate() {
                rep.value(format!("p_u[{i}]"), *p, Unit::Dimensionless);
            }
            rep.render()
        }
        Command::Theta { model, n, r } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let alt = m.alt_states.clone().unwrap_or_else(|| vec![src.rho_y().clone(); src.size()]);
            let b = theta_n_lower(src, &alt, *n, rate(cli, *r), true)?;
            let mut rep = Report::new(cli.bits, &flags(&[("n", n.to_string()), ("r", r.to_string())]));
            rep.bound(&b);
            rep.render()
        }
        Command::ScBound { model, r, eps, n, u_size, formal } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let u = u_size_or_default(src, *u_size);
            let r_nats = rate(cli, *r);
            let b = if *formal {
                sc_bound_stein_formal(src, r_nats, *eps, *n, u)?
            } else {
                sc_bound_stein(src, r_nats, *eps, *n, u)?
            };
            let mut rep = Report::new(
                cli.bits,
                &flags(&[
                    ("eps", eps.to_string()),
                    ("formal", formal.to_string()),
                    ("n", n.to_string()),
                    ("r", r.to_string()),
                    ("u_size", u.to_string()),
                ]),
            );
            rep.bound(&b);
            rep.render()
        }
        Command::ImageSize { model, c, delta, eps, n, u_size } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let u = u_size_or_default(src, *u_size);
            let b = image_size_bound_ii(src.q_x(), src, src.rho_y(), *c, *delta, *eps, *n, u)?;
            let mut rep = Report::new(
                cli.bits,
                &flags(&[
                    ("c", c.to_string()),
                    ("delta", delta.to_string()),
                    ("eps", eps.to_string()),
                    ("n", n.to_string()),
                    ("u_size", u.to_string()),
                ]),
            );
            rep.bound(&b);
            rep.render()
        }
        Command::SourceBound { model, eps, n, rate: w, u_size } => {
            let m = load_model(&model.model)?;
            let src = &m.source;
            let u = u_size_or_default(src, *u_size);
            let b = source_coding_bound(src, *eps, *n, rate(cli, *w), u)?;
            let mut rep = Report::new(
                cli.bits,
                &flags(&[("eps", eps.to_string()), ("n", n.to_string()), ("rate", w.to_string()), ("u_size", u.to_string())]),
            );
            rep.bound(&b);
            rep.render()
        }
        Command::Verify { .. } | Command::Sweep { .. } => unreachable!("handled in run"),
    };
    Ok(text)
}

fn verify(
    cli: &Cli,
    suite: Option<&str>,
    all: bool,
    seed: u64,
    instances: Option<usize>,
    csv: Option<&PathBuf>,
    strict: bool,
) -> RunResult {
    let suites: Vec<Suite> = if all {
        Suite::ALL.to_vec()
    } else {
        let name = suite.unwrap_or_default();
        let s = Suite::from_name(name).ok_or_else(|| {
            let known: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
            (CliError::Validation(format!("suite: unknown '{name}' (known: {})", known.join(", "))), None)
        })?;
        vec![s]
    };
    let mut f = vec![("seed", seed.to_string())];
    if let Some(k) = instances {
        f.push(("instances", k.to_string()));
    }
    let mut rep = Report::new(cli.bits, &flags(&f));
    let mut rows: Vec<CheckRow> = Vec::new();
    let mut failed = 0usize;
    for s in suites {
        let outcome = run_suite(s, seed, instances).map_err(|e| (CliError::from(e), None))?;
        let mut checks: Vec<&'static str> = Vec::new();
        for r in &outcome.rows {
            if !checks.contains(&r.check) {
                checks.push(r.check);
            }
        }
        for check in checks {
            let n = outcome.rows_of(check).count();
            let fails = outcome.rows_of(check).filter(|r| !r.passed()).count();
            failed += fails;
            let worst = outcome.worst(check).expect("check has rows");
            let key = format!("{}.{check}", s.name());
            rep.value(format!("{key}.instances"), n as f64, Unit::Count);
            rep.value(format!("{key}.failures"), fails as f64, Unit::Count);
            rep.value(format!("{key}.worst_margin"), worst.margin, Unit::Dimensionless);
            rep.value(format!("{key}.tolerance"), worst.tolerance, Unit::Dimensionless);
            rep.text(format!("{key}.status"), if fails == 0 { "PASS" } else { "FAIL" });
        }
        rows.extend(outcome.rows);
    }
    let table = margins_csv(&rows).map_err(|e| (CliError::Numerical(format!("csv: {e}")), None))?;
    let mut text = rep.render();
    match csv {
        Some(path) => std::fs::write(path, &table)
            .map_err(|e| (CliError::Validation(format!("{}: {e}", path.display())), None))?,
        None => {
            text.push('\n');
            text.push_str(&table);
        }
    }
    if strict && failed > 0 {
        return Err((CliError::Failed(format!("{failed} check(s) below tolerance")), Some(text)));
    }
    Ok(text)
}

fn sweep(
    cli: &Cli,
    model: &ModelArg,
    r: f64,
    eps: f64,
    n_max: usize,
    u_size: Option<usize>,
    csv: Option<&PathBuf>,
) -> Result<String, CliError> {
    let m = load_model(&model.model)?;
    let src = &m.source;
    let u = u_size_or_default(src, u_size);
    let r_nats = rate(cli, r);
    let mut rep = Report::new(
        cli.bits,
        &flags(&[("eps", eps.to_string()), ("formal", "true".into()), ("r", r.to_string()), ("u_size", u.to_string())]),
    );
    let curve = DualCurve::for_source(src, u)?;
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let brute = brute_force_beta_distributed(src, n, r_nats, eps)?;
        let lhs = -brute.beta.ln() / n as f64;
        let rhs = sc_bound_stein_on_curve(&curve, src, r_nats, eps, n)?.total;
        rep.value(format!("n{n}.brute_exponent"), lhs, Unit::Entropic);
        rep.value(format!("n{n}.bound"), rhs, Unit::Entropic);
        rows.push(CheckRow {
            suite: "sweep",
            check: "sc_bound_formal",
            instance_id: n - 1,
            seed: 0,
            params: vec![("n", n as f64), ("r", r_nats), ("eps", eps)],
            lhs,
            rhs,
            margin: rhs - lhs,
            tolerance: 0.0,
        });
    }
    let table = margins_csv(&rows).map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    let mut text = rep.render();
    match csv {
        Some(path) => std::fs::write(path, &table).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?,
        None => {
            text.push('\n');
            text.push_str(&table);
        }
    }
    Ok(text)
}
