//! Command-line grammar:
//! `bwb <verb> [sub] [--config file.json] [--check id ...] [--strict] [--out path] [--format json|csv]`.

use super::queries::{apartment_query, mp_query, sl2_convolve_query, stab_certificate};
use super::{emit_report, exit_code, run_suite, tally, OutputFormat, RunConfig, CONFIG_ENV};
use crate::error::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "bwb",
    version,
    about = "Exact checks for depth-r projector identities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Config file; defaults to the file named by BWB_CONFIG, then built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Restrict to these check ids.
    #[arg(long, num_args = 1..)]
    pub check: Vec<String>,
    /// Treat skipped instances as failures.
    #[arg(long)]
    pub strict: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config `format` (default json).
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VerifyWhat {
    Stab,
    Euler,
    Convex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MpWhat {
    Spec,
    Region,
    Jumps,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Sl2What {
    Convolve,
    Projector,
    RlogCheck,
    IndicatorCheck,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CheckWord {
    Check,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Cell inventory, or retraction data for `query.{x, s, cell}`.
    Apartment(Common),
    /// Stabilization certificate when `query` is set, otherwise the selected checks.
    Verify {
        what: VerifyWhat,
        #[command(flatten)]
        common: Common,
    },
    /// Threshold queries on filtration lattices and their duals.
    Mp {
        what: MpWhat,
        #[command(flatten)]
        common: Common,
    },
    /// Exact convolutions and the SL2 checks.
    Sl2 {
        what: Sl2What,
        #[command(flatten)]
        common: Common,
    },
    /// Fourier identities in the finite Lie algebra model.
    Fourier {
        what: Option<CheckWord>,
        #[command(flatten)]
        common: Common,
    },
    /// Steinberg representation checks over F_q.
    Steinberg {
        what: Option<CheckWord>,
        #[command(flatten)]
        common: Common,
    },
    /// Every configured check.
    Suite(Common),
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if common.strict {
        cfg.strict = true;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.display().to_string());
    }
    if let Some(f) = common.format {
        cfg.format = Some(match f {
            Format::Json => "json".into(),
            Format::Csv => "csv".into(),
        });
    }
    Ok(cfg)
}

fn write_value(cfg: &RunConfig, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Error::Invalid(e.to_string()))?;
    text.push('\n');
    match &cfg.out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Error::Invalid(format!("cannot write {p}: {e}")))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs `ids` (or the `--check` selection) and emits the report.
fn run_checks(mut cfg: RunConfig, common: &Common, ids: &[&str]) -> Result<i32> {
    cfg.checks = if common.check.is_empty() {
        ids.iter().map(|s| s.to_string()).collect()
    } else {
        common.check.clone()
    };
    let reports = run_suite(&cfg)?;
    let format = OutputFormat::parse(cfg.format.as_deref().unwrap_or("json"))?;
    emit_report(&reports, format, cfg.out.as_deref().map(Path::new))?;
    let t = tally(&reports);
    eprintln!("{} pass, {} fail, {} skipped", t.pass, t.fail, t.skipped);
    Ok(exit_code(&reports, cfg.strict))
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.verb {
        Verb::Apartment(common) => {
            let cfg = load_config(&common)?;
            write_value(&cfg, &apartment_query(&cfg)?)?;
            Ok(0)
        }
        Verb::Verify { what, common } => {
            let cfg = load_config(&common)?;
            match what {
                VerifyWhat::Stab if cfg.query.is_some() => {
                    let (pass, v) = stab_certificate(&cfg)?;
                    write_value(&cfg, &v)?;
                    Ok(if pass { 0 } else { 1 })
                }
                VerifyWhat::Stab => run_checks(cfg, &common, &["stab"]),
                VerifyWhat::Euler => run_checks(cfg, &common, &["euler"]),
                VerifyWhat::Convex => run_checks(cfg, &common, &["convex", "convexity"]),
            }
        }
        Verb::Mp { what, common } => {
            let cfg = load_config(&common)?;
            let sub = match what {
                MpWhat::Spec => "spec",
                MpWhat::Region => "region",
                MpWhat::Jumps => "jumps",
            };
            write_value(&cfg, &mp_query(&cfg, sub)?)?;
            Ok(0)
        }
        Verb::Sl2 { what, common } => {
            let cfg = load_config(&common)?;
            match what {
                Sl2What::Convolve => {
                    write_value(&cfg, &sl2_convolve_query(&cfg)?)?;
                    Ok(0)
                }
                Sl2What::Projector => run_checks(cfg, &common, &["projector", "lemma_equal"]),
                Sl2What::RlogCheck => run_checks(cfg, &common, &["rlog"]),
                Sl2What::IndicatorCheck => run_checks(cfg, &common, &["indicator"]),
            }
        }
        Verb::Fourier { common, .. } => {
            let cfg = load_config(&common)?;
            run_checks(cfg, &common, &["fourier"])
        }
        Verb::Steinberg { common, .. } => {
            let cfg = load_config(&common)?;
            run_checks(cfg, &common, &["steinberg"])
        }
        Verb::Suite(common) => {
            let cfg = load_config(&common)?;
            let ids: Vec<String> = cfg.checks.clone();
            let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
            run_checks(cfg, &common, &ids)
        }
    }
}

/// Entry point shared by the binary and the tests. Returns the exit code:
/// 0 on success, 1 when a check failed, 2 on a usage or config error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
