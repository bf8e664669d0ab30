//! The `rwrs` command line: flag parsing, settings resolution, output.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rwrs_core::partition::{DEFAULT_CHI_RANGE, DEFAULT_Z_THRESHOLD};
use rwrs_core::walk::IncrementLaw;

use crate::config::{ConfigFile, List, Settings};
use crate::error::{usage, Result};
use crate::exec::Parallel;
use crate::experiments::{self as ex, Model, Report, TailChoice};
use crate::format::{scheme_key_values, Format};

#[derive(Debug, Parser)]
#[command(name = "rwrs", version, about = "Random walk in random scenery: simulation and tail estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed (required, flag or config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output table path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or jsonl.
    #[arg(long)]
    format: Option<String>,
    /// `key = value` defaults, overridden by flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Lattice dimension.
    #[arg(long = "d")]
    dim: Option<usize>,
    /// simple or lazy.
    #[arg(long)]
    law: Option<String>,
    /// Scenery tail exponent.
    #[arg(long)]
    alpha: Option<f64>,
    /// Scenery tail constant.
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Debug, Args)]
struct TailArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated step counts.
    #[arg(long)]
    n: Option<List<usize>>,
    #[arg(long)]
    y: Option<f64>,
    /// Outer replicas.
    #[arg(long)]
    replicas: Option<usize>,
    /// Inner scenery draws per walk (tilted estimator).
    #[arg(long)]
    inner: Option<usize>,
    /// naive, tilted or auto.
    #[arg(long)]
    estimator: Option<TailChoice>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw RWRS samples and report per-replica statistics.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Second moment of X_n, direct and decoupled.
    Moments {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<List<usize>>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Estimate P(X_n >= ny).
    Tail(TailArgs),
    /// Fit the speed exponent of P(X_n >= ny) over several n.
    Exponent(TailArgs),
    /// Sojourn-time decay for boxes of several sides.
    Localization {
        #[command(flatten)]
        common: Common,
        #[arg(long = "d")]
        dim: Option<usize>,
        #[arg(long)]
        sides: Option<List<u32>>,
        /// One count, or one per side.
        #[arg(long)]
        replicas: Option<List<usize>>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long = "min-hits")]
        min_hits: Option<u64>,
    },
    /// Build the level scheme and classify simulated ranges.
    Partition {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        y: Option<f64>,
        /// Down-class constant z.
        #[arg(long)]
        z: Option<f64>,
        #[arg(long = "chi-lo")]
        chi_lo: Option<f64>,
        #[arg(long = "chi-hi")]
        chi_hi: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// Also write the scheme as a key-value block.
        #[arg(long = "scheme-out")]
        scheme_out: Option<PathBuf>,
    },
    /// Convolution closure, coefficient monotonicity and the sum identity.
    #[command(name = "bellshape-verify")]
    BellshapeVerify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long = "monotone-cases")]
        monotone_cases: Option<usize>,
        /// Grid spacing of the closure check.
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Single-site lower bound and its optimal return count.
    #[command(name = "lower-bound")]
    LowerBound {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: Option<List<u64>>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        k: Option<u64>,
    },
}

fn parse_law(s: &str) -> Result<IncrementLaw> {
    match s {
        "simple" => Ok(IncrementLaw::Simple),
        "lazy" => Ok(IncrementLaw::LazySimple),
        _ => Err(usage(format!("unknown law {s:?} (expected simple or lazy)"))),
    }
}

fn model(s: &Settings, m: ModelArgs, default_alpha: f64) -> Result<Model> {
    let law: String = s.or(m.law, "law", "simple".to_owned())?;
    Ok(Model {
        dim: s.or(m.dim, "d", 3)?,
        law: parse_law(&law)?,
        alpha: s.or(m.alpha, "alpha", default_alpha)?,
        c: s.or(m.c, "c", 1.0)?,
    })
}

struct Output {
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
}

fn common(s: &Settings, c: Common) -> Result<Output> {
    let format: String = s.or(c.format, "format", "csv".to_owned())?;
    Ok(Output {
        seed: s.required(c.seed, "seed")?,
        out: s.get(c.out, "out")?,
        format: format.parse()?,
    })
}

fn tail_params(s: &Settings, a: TailArgs, default_ns: &[usize]) -> Result<(Output, ex::TailParams)> {
    let o = common(s, a.common)?;
    let p = ex::TailParams {
        model: model(s, a.model, 1.0)?,
        ns: s.or(a.n, "n", List(default_ns.to_vec()))?.0,
        y: s.or(a.y, "y", 1.0)?,
        replicas: s.or(a.replicas, "replicas", 10_000)?,
        inner: s.or(a.inner, "inner", 1)?,
        estimator: s.or(a.estimator, "estimator", TailChoice::Auto)?,
        seed: o.seed,
    };
    Ok((o, p))
}

fn config_path(cmd: &Command) -> Option<&PathBuf> {
    let c = match cmd {
        Command::Simulate { common, .. }
        | Command::Moments { common, .. }
        | Command::Localization { common, .. }
        | Command::Partition { common, .. }
        | Command::BellshapeVerify { common, .. }
        | Command::LowerBound { common, .. } => common,
        Command::Tail(a) | Command::Exponent(a) => &a.common,
    };
    c.config.as_ref()
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<(Output, Report)> {
    let file = config_path(&cmd).map(|p| ConfigFile::load(p)).transpose()?;
    let s = Settings::new(file.as_ref());
    let exec = Parallel::from_env()?;
    let (o, report) = match cmd {
        Command::Simulate {
            common: c,
            model: m,
            n,
            replicas,
        } => {
            let o = common(&s, c)?;
            let p = ex::SimulateParams {
                model: model(&s, m, 1.0)?,
                n: s.or(n, "n", 1000)?,
                replicas: s.or(replicas, "replicas", 10)?,
                seed: o.seed,
            };
            s.finish()?;
            (o, ex::simulate(&p, &exec)?)
        }
        Command::Moments {
            common: c,
            model: m,
            n,
            replicas,
        } => {
            let o = common(&s, c)?;
            let p = ex::MomentParams {
                model: model(&s, m, 2.0)?,
                ns: s.or(n, "n", List(vec![1000, 4000, 16_000]))?.0,
                replicas: s.or(replicas, "replicas", 2000)?,
                seed: o.seed,
            };
            s.finish()?;
            (o, ex::moments(&p, &exec)?)
        }
        Command::Tail(a) => {
            let (o, p) = tail_params(&s, a, &[1024])?;
            s.finish()?;
            (o, ex::tail(&p, &exec)?)
        }
        Command::Exponent(a) => {
            let (o, p) = tail_params(&s, a, &[256, 1024, 4096, 16_384])?;
            s.finish()?;
            (o, ex::exponent(&p, &exec)?.0)
        }
        Command::Localization {
            common: c,
            dim,
            sides,
            replicas,
            horizon,
            min_hits,
        } => {
            let o = common(&s, c)?;
            let p = ex::LocalizationParams {
                dim: s.or(dim, "d", 3)?,
                sides: s.or(sides, "sides", List(vec![1, 2, 4, 8]))?.0,
                replicas: s.or(replicas, "replicas", List(vec![40_000]))?.0,
                horizon: s.or(horizon, "horizon", 1_000_000)?,
                min_hits: s.or(min_hits, "min-hits", 100)?,
                seed: o.seed,
            };
            s.finish()?;
            (o, ex::localization(&p, &exec)?.0)
        }
        Command::Partition {
            common: c,
            model: m,
            n,
            y,
            z,
            chi_lo,
            chi_hi,
            samples,
            scheme_out,
        } => {
            let o = common(&s, c)?;
            let p = ex::PartitionParams {
                model: model(&s, m, 2.0)?,
                n: s.or(n, "n", 10_000)?,
                y: s.or(y, "y", 0.5)?,
                z_threshold: s.or(z, "z", DEFAULT_Z_THRESHOLD)?,
                chi_range: (
                    s.or(chi_lo, "chi-lo", DEFAULT_CHI_RANGE.0)?,
                    s.or(chi_hi, "chi-hi", DEFAULT_CHI_RANGE.1)?,
                ),
                samples: s.or(samples, "samples", 1000)?,
                seed: o.seed,
            };
            let scheme_out: Option<PathBuf> = s.get(scheme_out, "scheme-out")?;
            s.finish()?;
            let (report, run) = ex::partition(&p, &exec)?;
            if let Some(path) = scheme_out {
                std::fs::write(path, scheme_key_values(&run.scheme))?;
            }
            if run.violations > 0 || run.mismatches > 0 {
                write_table(&o, &report, out)?;
                return Err(rwrs_core::Error::Invariant(report.summary).into());
            }
            (o, report)
        }
        Command::BellshapeVerify {
            common: c,
            pairs,
            monotone_cases,
            spacing,
            replicas,
        } => {
            let o = common(&s, c)?;
            let p = ex::BellshapeParams {
                pairs: s.or(pairs, "pairs", 50)?,
                monotone_cases: s.or(monotone_cases, "monotone-cases", 20)?,
                spacing: s.or(spacing, "spacing", 0.01)?,
                replicas: s.or(replicas, "replicas", 100_000)?,
                seed: o.seed,
            };
            s.finish()?;
            (o, ex::bellshape_verify(&p, &exec)?.0)
        }
        Command::LowerBound {
            common: c,
            model: m,
            n,
            y,
            k,
        } => {
            let o = common(&s, c)?;
            let p = ex::LowerBoundParams {
                model: model(&s, m, 1.0)?,
                ns: s.or(n, "n", List(vec![4096]))?.0,
                y: s.or(y, "y", 1.0)?,
                k: s.get(k, "k")?,
                seed: o.seed,
            };
            s.finish()?;
            (o, ex::lower_bounds(&p)?)
        }
    };
    Ok((o, report))
}

fn write_table(o: &Output, report: &Report, out: &mut dyn Write) -> Result<()> {
    match &o.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            report.table.write(&mut f, o.format)?;
            f.flush()?;
        }
        None => report.table.write(out, o.format)?,
    }
    Ok(())
}

/// Runs the tool on `args` (program name first). The table goes to `--out`
/// or `out`; the one-line summary and errors go to `err`. Returns the exit
/// code: 0 on success, 2 on invalid input, 1 on failures while running.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = execute(cli.command, out).and_then(|(o, report)| {
        write_table(&o, &report, out)?;
        Ok(report.summary)
    });
    match result {
        Ok(summary) => {
            let _ = writeln!(err, "{summary}");
            0
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
