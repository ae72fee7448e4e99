//! `livsic` - command-line front end for the colligation toolkit.
//!
//! Exit codes: 0 on success, 1 for domain errors (singular points, violated
//! model constraints, failed property tables), 2 for parse and usage errors.

mod demos;
mod format;

use clap::{Parser, Subcommand, ValueEnum};
use livsic::charfn::{self, eval_s};
use livsic::colligation::{self, SubspaceBasis};
use livsic::factorize;
use livsic::models::{self, CombinedModel};
use livsic::multint;
use livsic::numerics::{cplx, C64};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    /// Malformed input files or flags: exit code 2.
    Parse(String),
    /// Well-formed input outside the domain of an operation: exit code 1.
    Domain(String),
}

impl CliError {
    pub fn parse(msg: String) -> Self {
        CliError::Parse(msg)
    }

    pub fn domain(msg: String) -> Self {
        CliError::Domain(msg)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Domain(m) => write!(f, "error: {m}"),
        }
    }
}

macro_rules! domain_from {
    ($ty:ty) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Domain(e.to_string())
            }
        }
    };
}
domain_from!(livsic::colligation::ColligationError);
domain_from!(livsic::charfn::CharFnError);
domain_from!(livsic::factorize::FactorizeError);
domain_from!(livsic::models::ModelError);
domain_from!(livsic::multint::MultIntError);
domain_from!(livsic::numerics::NumericsError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Domain(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "livsic", version, about = "Operator colligations, characteristic functions, factorizations, product integrals and triangular models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Numerical tolerance for validations and integrations.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for randomized demo inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ChannelChoice {
    /// Canonical minimal channel ran(Im A).
    ImA,
    /// The full internal space.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DemoName {
    IntegrationOperator,
    Unicellular,
    Completeness,
    EnergyBalance,
}

#[derive(Subcommand)]
enum Command {
    /// Embed a complex matrix (JSON nested [re, im] arrays) in a colligation.
    Embed {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ChannelChoice::ImA)]
        channel: ChannelChoice,
    },
    /// Sweep the characteristic function over a z-grid, emitting CSV.
    Charfn {
        input: PathBuf,
        /// Grid spec "re0:re1:n,im0:im1:m".
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
    /// Extract the Blaschke-Potapov factorization of a colligation file.
    Factorize { input: PathBuf },
    /// Couple two colligations into their product.
    Product { left: PathBuf, right: PathBuf },
    /// Assemble a triangular model colligation from model data files.
    Model {
        /// Discrete part: JSON {"entries": [{"lambda", "eta"}]}.
        #[arg(long)]
        discrete: Option<PathBuf>,
        /// Continuous part: CSV of t, a(t), xi entries.
        #[arg(long)]
        continuous: Option<PathBuf>,
        /// Rank parameter of xi(t).
        #[arg(long, default_value_t = 1)]
        p: usize,
        /// Collocation cells for the continuous part.
        #[arg(long = "N", default_value_t = 100)]
        cells: usize,
        /// Keep only the first K discrete entries (truncation).
        #[arg(long = "K")]
        truncate: Option<usize>,
    },
    /// Integrate a sampled weight (CSV) as a multiplicative Stieltjes integral.
    Multint {
        weight: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_levels: usize,
    },
    /// Run a named demonstration, printing a property table.
    Demo {
        name: DemoName,
        /// Discretization size.
        #[arg(long = "N", default_value_t = 200)]
        n: usize,
        /// Truncation / repetition count where applicable.
        #[arg(long = "K", default_value_t = 10)]
        k: usize,
    },
}

fn write_output(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<C64>, CliError> {
    let parse_axis = |axis: &str| -> Result<Vec<f64>, CliError> {
        let parts: Vec<&str> = axis.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::parse(format!("grid axis '{axis}' is not lo:hi:count")));
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| CliError::parse(format!("bad number in '{axis}'")))?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| CliError::parse(format!("bad number in '{axis}'")))?;
        let count: usize = parts[2].trim().parse().map_err(|_| CliError::parse(format!("bad count in '{axis}'")))?;
        if count == 0 {
            return Err(CliError::parse("grid count must be positive".into()));
        }
        Ok(if count == 1 {
            vec![lo]
        } else {
            (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
        })
    };
    let axes: Vec<&str> = spec.split(',').collect();
    if axes.len() != 2 {
        return Err(CliError::parse(format!("grid '{spec}' is not 're0:re1:n,im0:im1:m'")));
    }
    let res = parse_axis(axes[0])?;
    let ims = parse_axis(axes[1])?;
    let mut zs = Vec::with_capacity(res.len() * ims.len());
    for &im in &ims {
        for &re in &res {
            zs.push(cplx(re, im));
        }
    }
    Ok(zs)
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = std::env::var("LIVSIC_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Domain(e.to_string()))
}

fn cmd_embed(input: &Path, channel: ChannelChoice, out: &Option<PathBuf>) -> Result<(), CliError> {
    let a = format::read_matrix(input)?;
    let c = match channel {
        ChannelChoice::ImA => colligation::embed(&a, None)?,
        ChannelChoice::Full => colligation::embed(&a, Some(&SubspaceBasis::full(a.nrows())))?,
    };
    let file = format::ColligationFile::from_colligation(&c);
    write_output(out, &format::to_canonical_json(&file))?;
    eprintln!(
        "embedded {}x{} matrix: r = {}, identity residual {:.3e}",
        c.n(),
        c.n(),
        c.r(),
        c.validate(c.default_tol()).identity_residual
    );
    Ok(())
}

fn cmd_charfn(input: &Path, grid: &str, tol: f64, out: &Option<PathBuf>) -> Result<(), CliError> {
    let c = format::read_colligation(input)?;
    let zs = parse_grid(grid)?;
    let pool = thread_pool()?;
    let rows: Vec<(C64, charfn::CharFnSample)> = pool.install(|| {
        use rayon::prelude::*;
        zs.par_iter().map(|&z| (z, eval_s(&c, z))).collect()
    });
    let mut csv = String::new();
    let header = format::csv_fields(
        ["re_z", "im_z", "regular"].map(String::from).to_vec(),
        format::csv_matrix_header("s", c.r(), c.r()),
        "class",
    );
    csv.push_str(&header);
    csv.push('\n');
    for (z, sample) in rows {
        let class = if sample.regular {
            charfn::classify_j_form(&sample.s, c.j(), tol.max(1e-12)).to_string()
        } else {
            "irregular".to_string()
        };
        let row = format::csv_fields(
            vec![z.re.to_string(), z.im.to_string(), sample.regular.to_string()],
            format::csv_matrix_row(&sample.s),
            &class,
        );
        csv.push_str(&row);
        csv.push('\n');
    }
    write_output(out, &csv)
}

fn cmd_factorize(input: &Path, out: &Option<PathBuf>) -> Result<(), CliError> {
    let c = format::read_colligation(input)?;
    let bp = factorize::potapov_factorize(&c)?;
    let file = format::BlaschkeFile::from_product(&bp);
    write_output(out, &format::to_canonical_json(&file))?;
    eprintln!(
        "{} factors, eta-gram residual {:.3e}, trace slack {:.3e}",
        bp.factors.len(),
        (bp.eta_gram() - c.phi() * c.phi().adjoint()).norm(),
        bp.trace_slack()
    );
    Ok(())
}

fn cmd_product(left: &Path, right: &Path, out: &Option<PathBuf>) -> Result<(), CliError> {
    let c1 = format::read_colligation(left)?;
    let c2 = format::read_colligation(right)?;
    let p = c1.product(&c2)?;
    let file = format::ColligationFile::from_colligation(&p);
    write_output(out, &format::to_canonical_json(&file))
}

fn cmd_model(
    discrete: &Option<PathBuf>,
    continuous: &Option<PathBuf>,
    p: usize,
    cells: usize,
    truncate: Option<usize>,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let (mut data, j_file) = match discrete {
        Some(path) => format::read_discrete_model(path)?,
        None => (Default::default(), None),
    };
    if let Some(k) = truncate {
        let dropped_mass: f64 = data.etas.iter().skip(k).map(|e| e.norm_squared()).sum();
        data.lambdas.truncate(k);
        data.etas.truncate(k);
        if dropped_mass > 0.0 {
            eprintln!("truncated discrete part to K = {k}; dropped channel mass {dropped_mass:.3e}");
        }
    }
    let cont = match continuous {
        Some(path) => Some(format::read_continuous_model(path, p)?),
        None => None,
    };
    let r = cont
        .as_ref()
        .map(|cmd| cmd.external_dim())
        .or_else(|| data.etas.first().map(|e| e.len()))
        .ok_or_else(|| CliError::parse("need at least one of --discrete / --continuous".into()))?;
    let j = j_file.unwrap_or_else(|| livsic::colligation::Signature::plus(r));
    if j.r() != r {
        return Err(CliError::parse(format!(
            "signature length {} does not match channel dimension {r}",
            j.r()
        )));
    }
    let cm = CombinedModel { discrete: data, continuous: cont, cells };
    let model = models::build_combined_model(&cm, &j)?;
    eprintln!(
        "model: n = {}, r = {}, identity residual {:.3e}",
        model.n(),
        model.r(),
        model.validate(model.default_tol()).identity_residual
    );
    let file = format::ColligationFile::from_colligation(&model);
    write_output(out, &format::to_canonical_json(&file))
}

fn cmd_multint(weight: &Path, tol: f64, max_levels: usize, out: &Option<PathBuf>) -> Result<(), CliError> {
    let w = format::read_weight(weight)?;
    let res = multint::multint_stieltjes_weight(|_| 1.0, &w, tol, max_levels)?;
    let dim = res.value.nrows();
    let mut csv = String::new();
    csv.push_str(&format!("levels,cauchy_residual,{}\n", format::csv_matrix_header("w", dim, dim)));
    csv.push_str(&format!(
        "{},{},{}\n",
        res.levels_used,
        res.cauchy_residual,
        format::csv_matrix_row(&res.value)
    ));
    write_output(out, &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Embed { input, channel } => cmd_embed(input, *channel, &cli.out),
        Command::Charfn { input, grid } => cmd_charfn(input, grid, cli.tol, &cli.out),
        Command::Factorize { input } => cmd_factorize(input, &cli.out),
        Command::Product { left, right } => cmd_product(left, right, &cli.out),
        Command::Model { discrete, continuous, p, cells, truncate } => {
            cmd_model(discrete, continuous, *p, *cells, *truncate, &cli.out)
        }
        Command::Multint { weight, max_levels } => cmd_multint(weight, cli.tol, *max_levels, &cli.out),
        Command::Demo { name, n, k } => demos::run(*name, *n, *k, cli.tol, cli.seed, &cli.out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Parse(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e @ CliError::Domain(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
