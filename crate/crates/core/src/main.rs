use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use torusq::commutant::{self, OperatorSet};
use torusq::suite::{emit_report, run_suite, RunConfig, SUITES};
use torusq::trigpoly::ChernLevel;
use torusq::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "torusq", version, about = "Prequantization of the torus: verification suites and commutant analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write report.json and residuals.csv.
    Verify {
        /// One of: dirac, heisenberg, zak, prequant-identities, go-theorem, reducibility, bad-operator, all.
        suite: String,
        #[arg(long = "n", allow_negative_numbers = true)]
        n: Option<i64>,
        #[arg(long)]
        degree_max: Option<i64>,
        #[arg(long = "hermite-D")]
        hermite_d: Option<usize>,
        #[arg(long)]
        quad: Option<usize>,
        /// Grid as GxG, e.g. 128x128.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        margin: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Flat JSON config; flags override its values.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate commutant dimensions of an operator set over several truncations.
    Commutant {
        /// FN or custom:<file>.
        #[arg(long)]
        set: String,
        #[arg(long = "n", allow_negative_numbers = true, default_value_t = 1)]
        n: i64,
        #[arg(long, value_delimiter = ',', default_value = "24,32,40")]
        d_list: Vec<usize>,
        /// Interior margin; D/4 when omitted.
        #[arg(long)]
        margin: Option<usize>,
        #[arg(long, default_value_t = commutant::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Also write the report to this directory as commutant.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_grid(s: &str) -> Result<[usize; 2], Error> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Config(format!("grid `{s}` must look like 128x128")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("grid `{s}` must look like 128x128")))
    };
    Ok([parse(a)?, parse(b)?])
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::ZeroLevel
            | Error::QuadratureTooLow { .. }
            | Error::Parse { .. }
            | Error::DuplicateMode { .. }
            | Error::InvalidMargin { .. }
            | Error::InvalidGrid(_)
            | Error::EmptySet
            | Error::Config(_)
            | Error::Json { .. }
    )
}

fn fail(e: Error, during_setup: bool) -> ExitCode {
    eprintln!("error: {e}");
    if during_setup || is_config_error(&e) {
        ExitCode::from(EXIT_CONFIG)
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Verify {
            suite,
            n,
            degree_max,
            hermite_d,
            quad,
            grid,
            window,
            margin,
            seed,
            config,
            out,
        } => {
            if !SUITES.contains(&suite.as_str()) {
                return fail(Error::Config(format!("unknown suite `{suite}`; expected one of {}", SUITES.join(", "))), true);
            }
            let mut cfg = match config {
                Some(path) => match RunConfig::from_file(&path) {
                    Ok(c) => c,
                    Err(e) => return fail(e, true),
                },
                None => RunConfig::default(),
            };
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = degree_max {
                cfg.degree_max = v;
            }
            if let Some(v) = hermite_d {
                cfg.degree = v;
            }
            if let Some(v) = quad {
                cfg.quad = Some(v);
            }
            if let Some(g) = grid {
                match parse_grid(&g) {
                    Ok(g) => cfg.grid = g,
                    Err(e) => return fail(e, true),
                }
            }
            if let Some(v) = window {
                cfg.window = v;
            }
            if let Some(v) = margin {
                cfg.margin = Some(v);
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = out {
                cfg.out = v;
            }
            let resolved = match cfg.resolve() {
                Ok(r) => r,
                Err(e) => return fail(e, true),
            };
            let result = match run_suite(&suite, &resolved) {
                Ok(r) => r,
                Err(e) => return fail(e, false),
            };
            if let Err(e) = emit_report(&result, &resolved) {
                return fail(e, false);
            }
            for r in &result.residuals {
                println!(
                    "{:<5} {:<40} {:>12.3e}  (tolerance {:.1e}, {:?})",
                    if r.pass() { "PASS" } else { "FAIL" },
                    r.check,
                    r.value,
                    r.tolerance,
                    r.comparison
                );
            }
            println!(
                "{}: {} in {:.1}s, report in {}",
                result.suite,
                if result.pass { "pass" } else { "FAIL" },
                result.wall_time,
                resolved.out.display()
            );
            if result.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Command::Commutant {
            set,
            n,
            d_list,
            margin,
            threshold,
            out,
        } => {
            let level = match ChernLevel::new(n) {
                Ok(l) => l,
                Err(e) => return fail(e, true),
            };
            let set = match OperatorSet::from_arg(&set) {
                Ok(s) => s,
                Err(e) => return fail(e, true),
            };
            if !(threshold.is_finite() && threshold > 0.0) {
                return fail(Error::Config("threshold must be positive".into()), true);
            }
            if let Some(m) = margin {
                if let Some(&d) = d_list.iter().find(|&&d| m == 0 || m > d) {
                    return fail(Error::InvalidMargin { margin: m, limit: d + 1 }, true);
                }
            }
            let report = match commutant::convergence_study(
                &set,
                level,
                &d_list,
                |d| margin.unwrap_or_else(|| commutant::default_margin(d)),
                threshold,
                None,
            ) {
                Ok(r) => r,
                Err(e) => return fail(e, false),
            };
            let json = serde_json::to_string_pretty(&report).expect("report serializes");
            println!("{json}");
            if let Some(dir) = out {
                let path = dir.join("commutant.json");
                let written = std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(&path, json + "\n"));
                if let Err(e) = written {
                    return fail(Error::Io { path, source: e }, false);
                }
            }
            ExitCode::SUCCESS
        }
    }
}
