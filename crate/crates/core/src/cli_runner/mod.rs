//! Batch orchestration: run configuration, check execution and report output.
//!
//! A [`RunConfig`] is a JSON document (rationals written as strings `"a/b"`).
//! Every check turns the config into a list of instances, each of which yields
//! one [`CheckReport`]. Reports are sorted before emission so the output is a
//! function of the config alone.

mod checks;
mod cli;
mod queries;

pub use checks::{check_ids, run_check};
pub use cli::{main_with_args, Cli};
pub use queries::{apartment_query, mp_query, sl2_convolve_query, stab_certificate};

use crate::error::{Error, Result};
use crate::rational::{parse_q, Q};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::Path;
use std::time::Instant;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "BWB_CONFIG";

fn default_systems() -> Vec<String> {
    vec!["A1".into()]
}
fn default_m() -> Vec<u32> {
    vec![1, 2]
}
fn default_window() -> [i64; 2] {
    [-2, 2]
}
fn default_p() -> Vec<i64> {
    vec![2, 3]
}
fn default_n() -> Vec<u32> {
    vec![3, 4]
}
fn default_r() -> Vec<String> {
    vec!["0".into(), "1/2".into(), "1".into()]
}
fn default_s() -> Vec<String> {
    vec!["0".into(), "1/2".into(), "1".into()]
}
fn default_seed() -> u64 {
    20_240_601
}
fn default_samples() -> usize {
    20
}
fn default_budget() -> u128 {
    crate::sl2_padic_engine::DEFAULT_BUDGET
}
fn default_lie_ab() -> [u32; 2] {
    [1, 2]
}
fn default_lie_window() -> [i64; 2] {
    [-1, 1]
}
fn default_indicator_samples() -> usize {
    200
}
fn default_checks() -> Vec<String> {
    check_ids().iter().map(|s| s.to_string()).collect()
}

/// Parameters for a batch of checks. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_systems")]
    pub systems: Vec<String>,
    #[serde(default)]
    pub delta: i64,
    #[serde(default = "default_m")]
    pub m: Vec<u32>,
    /// Integer cube `[lo, hi]^rank` used as the base window.
    #[serde(default = "default_window")]
    pub window: [i64; 2],
    #[serde(default = "default_p")]
    pub p: Vec<i64>,
    #[serde(default = "default_n", rename = "N")]
    pub n: Vec<u32>,
    #[serde(default = "default_r")]
    pub r: Vec<String>,
    #[serde(default = "default_s")]
    pub s: Vec<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Random instances per parameter combination.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Largest coset enumeration any single step may perform.
    #[serde(default = "default_budget")]
    pub budget: u128,
    /// Wall time per check in milliseconds; instances started after it has
    /// elapsed are skipped.
    #[serde(default)]
    pub max_ms: Option<u64>,
    #[serde(default = "default_checks")]
    pub checks: Vec<String>,
    #[serde(default)]
    pub strict: bool,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    /// Record wall times in reports. Off by default so reports are reproducible.
    #[serde(default)]
    pub timings: bool,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
    /// Lie model exponents `(A, B)` for the Fourier check.
    #[serde(default = "default_lie_ab")]
    pub lie_ab: [u32; 2],
    /// Integer window whose cells the Fourier check covers.
    #[serde(default = "default_lie_window")]
    pub lie_window: [i64; 2],
    /// Sampled matrices per inclusion-exclusion instance.
    #[serde(default = "default_indicator_samples")]
    pub indicator_samples: usize,
    /// Inputs for the single-instance query verbs.
    #[serde(default)]
    pub query: Option<Value>,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, msg: String| Err(Error::Config(format!("key `{k}`: {msg}")));
        if self.budget == 0 {
            return bad("budget", "must be positive".into());
        }
        if self.samples == 0 {
            return bad("samples", "must be positive".into());
        }
        if self.m.contains(&0) {
            return bad("m", "refinement must be positive".into());
        }
        if self.window[0] >= self.window[1] {
            return bad("window", "lo must be below hi".into());
        }
        if let Some(p) = self
            .p
            .iter()
            .find(|&&p| !crate::sl2_padic_engine::is_prime(p as i128))
        {
            return bad("p", format!("{p} is not prime"));
        }
        for (k, grid) in [("r", &self.r), ("s", &self.s)] {
            for v in grid {
                match parse_q(v) {
                    Ok(x) if x >= Q::from_integer(0) => {}
                    _ => return bad(k, format!("`{v}` is not a nonnegative rational")),
                }
            }
        }
        for c in &self.checks {
            if !check_ids().contains(&c.as_str()) {
                return bad("checks", format!("unknown check `{c}`"));
            }
        }
        for s in &self.systems {
            crate::affine_apartment::SystemName::parse(s)
                .map_err(|e| Error::Config(format!("key `systems`: {e}")))?;
        }
        if let Some(f) = &self.format {
            OutputFormat::parse(f)?;
        }
        Ok(())
    }

    pub fn r_grid(&self) -> Vec<Q> {
        self.r.iter().filter_map(|v| parse_q(v).ok()).collect()
    }

    pub fn s_grid(&self) -> Vec<Q> {
        self.s.iter().filter_map(|v| parse_q(v).ok()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        }
    }
}

/// Outcome of one check instance. A failing report carries the instance and
/// the offending values in `witness`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub instance: Value,
    pub verdict: Verdict,
    pub ms: u64,
    pub witness: Value,
}

impl CheckReport {
    pub fn pass(check: &str, instance: Value, detail: Value) -> Self {
        Self {
            check: check.into(),
            instance,
            verdict: Verdict::Pass,
            ms: 0,
            witness: detail,
        }
    }

    pub fn fail(check: &str, instance: Value, offending: Value) -> Self {
        let witness = serde_json::json!({"inputs": instance.clone(), "offending": offending});
        Self {
            check: check.into(),
            instance,
            verdict: Verdict::Fail,
            ms: 0,
            witness,
        }
    }

    pub fn skipped(check: &str, instance: Value, reason: String) -> Self {
        Self {
            check: check.into(),
            instance,
            verdict: Verdict::Skipped,
            ms: 0,
            witness: Value::String(reason),
        }
    }

    /// Maps an evaluation result: budget and precision errors become skips,
    /// any other error is a failure.
    pub fn from_result(check: &str, instance: Value, r: Result<(bool, Value)>) -> Self {
        match r {
            Ok((true, detail)) => Self::pass(check, instance, detail),
            Ok((false, detail)) => Self::fail(check, instance, detail),
            Err(e @ (Error::Budget { .. } | Error::Precision(_))) => {
                Self::skipped(check, instance, e.to_string())
            }
            Err(e) => Self::fail(check, instance, Value::String(e.to_string())),
        }
    }

    fn sort_key(&self) -> (String, String) {
        (self.check.clone(), self.instance.to_string())
    }
}

/// Summary counts of a report list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

pub fn tally(reports: &[CheckReport]) -> Tally {
    let mut t = Tally::default();
    for r in reports {
        match r.verdict {
            Verdict::Pass => t.pass += 1,
            Verdict::Fail => t.fail += 1,
            Verdict::Skipped => t.skipped += 1,
        }
    }
    t
}

/// Process exit code for a finished run: 0 iff nothing failed (and, in
/// strict mode, nothing was skipped).
pub fn exit_code(reports: &[CheckReport], strict: bool) -> i32 {
    let t = tally(reports);
    if t.fail > 0 || (strict && t.skipped > 0) {
        1
    } else {
        0
    }
}

/// Runs every selected check on a pool of `config.workers` threads.
pub fn run_suite(config: &RunConfig) -> Result<Vec<CheckReport>> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if config.workers > 0 {
        builder = builder.num_threads(config.workers);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("key `workers`: {e}")))?;
    let mut reports: Vec<CheckReport> = pool
        .install(|| {
            config
                .checks
                .par_iter()
                .map(|id| {
                    let start = Instant::now();
                    let mut out = run_check(id, config)?;
                    if config.timings {
                        let ms = start.elapsed().as_millis() as u64;
                        let per = ms / out.len().max(1) as u64;
                        out.iter_mut().for_each(|r| r.ms = per);
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<Vec<CheckReport>>>>()
        })?
        .into_iter()
        .flatten()
        .collect();
    reports.sort_by_key(|r| r.sort_key());
    Ok(reports)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!(
                "key `format`: unknown format `{other}`"
            ))),
        }
    }
}

/// Serializes reports. JSON objects have sorted keys; one report gives a
/// single object, otherwise an array.
pub fn render_report(reports: &[CheckReport], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let v = if reports.len() == 1 {
                serde_json::to_value(&reports[0])
            } else {
                serde_json::to_value(reports)
            }
            .map_err(|e| Error::Invalid(e.to_string()))?;
            let mut s =
                serde_json::to_string_pretty(&v).map_err(|e| Error::Invalid(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| Error::Invalid(e.to_string());
            w.write_record(["check", "instance", "verdict", "ms", "witness"])
                .map_err(err)?;
            for r in reports {
                let witness = match &r.witness {
                    Value::String(s) => s.clone(),
                    v => v.to_string(),
                };
                w.write_record([
                    r.check.as_str(),
                    &r.instance.to_string(),
                    r.verdict.as_str(),
                    &r.ms.to_string(),
                    &witness,
                ])
                .map_err(err)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
        }
    }
}

/// Writes the rendered reports to `path`, or to stdout when `path` is `None`.
pub fn emit_report(
    reports: &[CheckReport],
    format: OutputFormat,
    path: Option<&Path>,
) -> Result<()> {
    let text = render_report(reports, format)?;
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Scientific notation with three significant digits, used for float errors.
pub fn fmt_err(x: f64) -> String {
    format!("{x:.2e}")
}
