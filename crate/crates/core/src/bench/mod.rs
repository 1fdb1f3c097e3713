//! Acceptance harness: a suite file of cases, each with scenarios to run
//! and assertions over the resulting metrics, evaluated into a pass/fail
//! report.
//!
//! Metrics:
//! - `<measure>.<METHOD>.<Y1|Y2>` for measures `coverage`, `bias`,
//!   `pct_bias`, `rmse`, `avg_width`, `mc_error_bias`, `mc_error_cr`,
//!   `n_effective`, `n_failed` and `bias_z` (`|bias| / mc_error_bias`).
//!   `*` in the method or outcome slot expands to every method or outcome.
//! - `audit.altered`, `audit.checked`: observed-cell audit of the run.
//! - `determinism.identical`: 1 when the replicate CSV is byte-identical to a
//!   rerun at `rerun_parallelism` workers.
//! - `oracle.*`, `mmi.*`: deterministic reference checks (see [`oracles`]).
//! - `a - b`: difference of two metrics.
//!
//! Assertions hold over every scenario of the case (`all`) or over at least
//! `K` scenario evaluations (`at_least:K`).

pub mod oracles;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scenario::{build_scenario_grid, FactorOverrides, Method, RunSettings, ScenarioConfig};
use crate::sim::io::{fmt_f64, write_records};
use crate::sim::{run_scenario, PerfSummary, ScenarioRun};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSelector {
    pub design: String,
    pub icc: [f64; 2],
    pub mechanism: String,
    pub eta: String,
    pub nonresponse: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Between,
    AbsLt,
    AbsLe,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertion {
    pub metric: String,
    pub cmp: Comparator,
    pub bound: f64,
    /// Upper limit for `between`.
    pub upper: Option<f64>,
    /// `all` (default) or `at_least:K`.
    #[serde(default = "default_quantifier")]
    pub quantifier: String,
}

fn default_quantifier() -> String {
    "all".into()
}

impl Assertion {
    pub fn describe(&self) -> String {
        let b = bound(self.bound);
        let c = match self.cmp {
            Comparator::Lt => format!("< {b}"),
            Comparator::Le => format!("<= {b}"),
            Comparator::Gt => format!("> {b}"),
            Comparator::Ge => format!(">= {b}"),
            Comparator::Between => format!("in [{b}, {}]", bound(self.upper.unwrap_or(f64::NAN))),
            Comparator::AbsLt => format!("|.| < {b}"),
            Comparator::AbsLe => format!("|.| <= {b}"),
        };
        format!("{} {} ({})", self.metric, c, self.quantifier)
    }

    fn holds(&self, v: f64) -> bool {
        match self.cmp {
            Comparator::Lt => v < self.bound,
            Comparator::Le => v <= self.bound,
            Comparator::Gt => v > self.bound,
            Comparator::Ge => v >= self.bound,
            Comparator::Between => v >= self.bound && self.upper.is_some_and(|u| v <= u),
            Comparator::AbsLt => v.abs() < self.bound,
            Comparator::AbsLe => v.abs() <= self.bound,
        }
    }

    fn required(&self, evaluations: usize) -> Result<usize> {
        if self.quantifier == "all" {
            return Ok(evaluations);
        }
        self.quantifier
            .strip_prefix("at_least:")
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| Error::Config(format!("bad quantifier '{}'", self.quantifier)))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceCase {
    pub name: String,
    pub criterion: u32,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSelector>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub rerun_parallelism: Option<usize>,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
    /// Expected wall-clock budget; informational.
    pub budget_seconds: Option<f64>,
    pub assertions: Vec<Assertion>,
}

fn default_replicates() -> usize {
    1000
}

fn default_parallelism() -> usize {
    1
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(default, rename = "case")]
    pub cases: Vec<AcceptanceCase>,
}

impl Suite {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Errored,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Errored => "ERROR",
        }
    }
}

/// One row of the report.
#[derive(Debug, Clone, PartialEq)]
pub struct AssertionOutcome {
    pub case: String,
    pub criterion: u32,
    pub assertion: String,
    /// Every evaluated value, labelled by scenario and expansion.
    pub observed: Vec<(String, f64)>,
    pub passed: usize,
    pub required: usize,
    pub status: Status,
    pub message: String,
}

impl AssertionOutcome {
    /// Compact rendering of the observed values.
    pub fn observed_summary(&self) -> String {
        self.observed
            .iter()
            .map(|(k, v)| format!("{k}={}", short(*v)))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

fn bound(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn short(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e6) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub outcomes: Vec<AssertionOutcome>,
    /// Wall-clock seconds per case.
    pub timings: Vec<(String, f64)>,
}

impl Report {
    /// Overall status per criterion, in criterion order.
    pub fn by_criterion(&self) -> Vec<(u32, Status)> {
        let mut out: Vec<(u32, Status)> = Vec::new();
        for o in &self.outcomes {
            match out.iter_mut().find(|(c, _)| *c == o.criterion) {
                Some((_, s)) => {
                    *s = match (*s, o.status) {
                        (Status::Errored, _) | (_, Status::Errored) => Status::Errored,
                        (Status::Fail, _) | (_, Status::Fail) => Status::Fail,
                        _ => Status::Pass,
                    }
                }
                None => out.push((o.criterion, o.status)),
            }
        }
        out.sort_by_key(|(c, _)| *c);
        out
    }

    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.status == Status::Pass)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["criterion", "case", "assertion", "status", "passed", "required", "observed", "message"])?;
        for o in &self.outcomes {
            w.write_record([
                o.criterion.to_string(),
                o.case.clone(),
                o.assertion.clone(),
                o.status.label().to_string(),
                o.passed.to_string(),
                o.required.to_string(),
                o.observed
                    .iter()
                    .map(|(k, v)| format!("{k}={}", fmt_f64(*v)))
                    .collect::<Vec<_>>()
                    .join("; "),
                o.message.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Scenario runs shared between cases.
#[derive(Default)]
pub struct RunCache {
    runs: HashMap<String, std::result::Result<ScenarioRun, String>>,
}

impl RunCache {
    fn key(config: &ScenarioConfig, parallelism: usize) -> String {
        format!(
            "{}|{}|{}|{}|{:?}|{}",
            config.master_seed, config.scenario_index, config.n_replicates, config.m, config.methods, parallelism
        )
    }

    pub fn get_or_run(&mut self, config: &ScenarioConfig, parallelism: usize) -> std::result::Result<&ScenarioRun, String> {
        let key = Self::key(config, parallelism);
        self.runs
            .entry(key)
            .or_insert_with(|| run_scenario(config, parallelism).map_err(|e| e.to_string()))
            .as_ref()
            .map_err(|e| e.clone())
    }
}

/// Resolve a selector into a scenario configuration.
pub fn scenario_for(sel: &ScenarioSelector, case: &AcceptanceCase) -> Result<ScenarioConfig> {
    let overrides = FactorOverrides {
        icc: Some(vec![sel.icc]),
        design: Some(vec![sel.design.clone()]),
        mechanism: Some(vec![sel.mechanism.clone()]),
        eta: Some(vec![sel.eta.clone()]),
        nonresponse: Some(vec![sel.nonresponse.clone()]),
    };
    let run = RunSettings {
        n_replicates: case.replicates,
        methods: case.methods.clone(),
        ..RunSettings::default()
    };
    build_scenario_grid(case.seed, &overrides, &run)?
        .pop()
        .ok_or_else(|| Error::Config("selector matched no scenario".into()))
}

const PERF_MEASURES: [&str; 10] = [
    "coverage",
    "bias",
    "pct_bias",
    "rmse",
    "avg_width",
    "mc_error_bias",
    "mc_error_cr",
    "n_effective",
    "n_failed",
    "bias_z",
];

fn perf_value(p: &PerfSummary, measure: &str) -> f64 {
    match measure {
        "coverage" => p.coverage,
        "bias" => p.bias,
        "pct_bias" => p.pct_bias.unwrap_or(f64::NAN),
        "rmse" => p.rmse,
        "avg_width" => p.avg_width,
        "mc_error_bias" => p.mc_error_bias,
        "mc_error_cr" => p.mc_error_cr,
        "n_effective" => p.n_effective as f64,
        "n_failed" => p.n_failed as f64,
        "bias_z" => p.bias.abs() / p.mc_error_bias,
        _ => f64::NAN,
    }
}

/// Everything a metric can be evaluated against for one scenario.
struct Context<'a> {
    run: Option<&'a ScenarioRun>,
    identical: Option<bool>,
}

/// Split a metric into its terms: `a - b` gives `[(+1, a), (-1, b)]`.
fn terms(metric: &str) -> Vec<(f64, String)> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    for tok in metric.split_whitespace() {
        match tok {
            "-" => sign = -1.0,
            "+" => sign = 1.0,
            t => {
                out.push((sign, t.to_string()));
                sign = 1.0;
            }
        }
    }
    out
}

/// Expand `*` placeholders into concrete method/outcome labels.
fn expansions(metric: &str, methods: &[Method]) -> Vec<(String, String)> {
    let mut out = vec![(String::new(), metric.to_string())];
    if metric.contains(".*.") || metric.contains("*.Y") {
        out = methods
            .iter()
            .map(|m| (m.label().to_string(), metric.replace(".*.", &format!(".{}.", m.label()))))
            .collect();
    }
    let mut next = Vec::new();
    for (tag, m) in out {
        if m.ends_with(".*") {
            for y in ["Y1", "Y2"] {
                let t = if tag.is_empty() { y.to_string() } else { format!("{tag}.{y}") };
                next.push((t, format!("{}.{y}", &m[..m.len() - 2])));
            }
        } else {
            next.push((tag, m));
        }
    }
    next
}

fn eval_term(term: &str, ctx: &Context) -> Result<f64> {
    let parts: Vec<&str> = term.split('.').collect();
    match parts.as_slice() {
        [measure, method, outcome] if PERF_MEASURES.contains(measure) => {
            let run = ctx.run.ok_or_else(|| Error::Config(format!("metric '{term}' needs a scenario run")))?;
            let m: Method = method.parse()?;
            let l = match *outcome {
                "Y1" => 0,
                "Y2" => 1,
                _ => return Err(Error::Config(format!("unknown outcome in metric '{term}'"))),
            };
            run.performance
                .iter()
                .find(|p| p.method == m && p.outcome == l)
                .map(|p| perf_value(p, measure))
                .ok_or_else(|| Error::Config(format!("method {m} was not run for metric '{term}'")))
        }
        ["audit", which] => {
            let run = ctx.run.ok_or_else(|| Error::Config(format!("metric '{term}' needs a scenario run")))?;
            match *which {
                "altered" => Ok(run.audit.altered as f64),
                "checked" => Ok(run.audit.checked as f64),
                _ => Err(Error::Config(format!("unknown metric '{term}'"))),
            }
        }
        ["determinism", "identical"] => ctx
            .identical
            .map(|b| if b { 1.0 } else { 0.0 })
            .ok_or_else(|| Error::Config("determinism metric needs rerun_parallelism".into())),
        ["oracle", name] => oracle_value(name),
        ["mmi", name] => mmi_value(name),
        _ => Err(Error::Config(format!("unknown metric '{term}'"))),
    }
}

fn oracle_value(name: &str) -> Result<f64> {
    match name {
        "loglik_max_abs_diff" => Ok(oracles::structured_vs_dense_max_diff(100, 7)),
        "rubin_qbar_err" => Ok(oracles::rubin_hand_case_errors()?[0]),
        "rubin_t_err" => Ok(oracles::rubin_hand_case_errors()?[1]),
        "rubin_df_err" => Ok(oracles::rubin_hand_case_errors()?[2]),
        "anova_2x2_max_rel_err" => oracles::anova_2x2_max_rel_err(),
        "calibrate_eta0_err" => Ok(oracles::calibration_errors()?[0]),
        "calibrate_eta1_err" => Ok(oracles::calibration_errors()?[1]),
        _ => Err(Error::Config(format!("unknown metric 'oracle.{name}'"))),
    }
}

fn mmi_value(name: &str) -> Result<f64> {
    match name {
        "recovery_max_rel_err" => oracles::mmi_recovery_max_rel_err(11, 20, 200, 500),
        "stationarity_max_z" => oracles::mmi_stationarity_max_z(13, 2000),
        _ => Err(Error::Config(format!("unknown metric 'mmi.{name}'"))),
    }
}

fn evaluate(metric: &str, ctx: &Context) -> Result<f64> {
    let ts = terms(metric);
    if ts.is_empty() {
        return Err(Error::Config("empty metric".into()));
    }
    let mut v = 0.0;
    for (sign, t) in ts {
        v += sign * eval_term(&t, ctx)?;
    }
    Ok(v)
}

/// Check that every metric name in a case is known, before running anything.
fn validate_case(case: &AcceptanceCase) -> Result<()> {
    for a in &case.assertions {
        a.required(1)?;
        if a.cmp == Comparator::Between && a.upper.is_none() {
            return Err(Error::Config(format!("'between' needs an upper bound in '{}'", a.metric)));
        }
        for (_, m) in expansions(&a.metric, &case.methods) {
            for (_, t) in terms(&m) {
                let parts: Vec<&str> = t.split('.').collect();
                let known = match parts.as_slice() {
                    [measure, method, outcome] if PERF_MEASURES.contains(measure) => {
                        method.parse::<Method>().is_ok() && matches!(*outcome, "Y1" | "Y2")
                    }
                    ["audit", "altered" | "checked"] | ["determinism", "identical"] => true,
                    ["oracle", n] => matches!(
                        *n,
                        "loglik_max_abs_diff"
                            | "rubin_qbar_err"
                            | "rubin_t_err"
                            | "rubin_df_err"
                            | "anova_2x2_max_rel_err"
                            | "calibrate_eta0_err"
                            | "calibrate_eta1_err"
                    ),
                    ["mmi", "recovery_max_rel_err" | "stationarity_max_z"] => true,
                    _ => false,
                };
                if !known {
                    return Err(Error::Config(format!("unknown metric '{t}'")));
                }
            }
        }
    }
    Ok(())
}

fn errored(case: &AcceptanceCase, message: &str) -> Vec<AssertionOutcome> {
    case.assertions
        .iter()
        .map(|a| AssertionOutcome {
            case: case.name.clone(),
            criterion: case.criterion,
            assertion: a.describe(),
            observed: Vec::new(),
            passed: 0,
            required: 0,
            status: Status::Errored,
            message: message.to_string(),
        })
        .collect()
}

fn records_csv(run: &ScenarioRun) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_records(&mut buf, &run.records)?;
    Ok(buf)
}

/// Run one case against the shared cache.
pub fn run_case(case: &AcceptanceCase, cache: &mut RunCache) -> Vec<AssertionOutcome> {
    if let Err(e) = validate_case(case) {
        return errored(case, &e.to_string());
    }
    // scenario contexts: (label, run, determinism flag)
    let mut contexts: Vec<(String, Option<ScenarioRun>, Option<bool>)> = Vec::new();
    if case.scenarios.is_empty() {
        contexts.push(("-".into(), None, None));
    }
    for sel in &case.scenarios {
        let config = match scenario_for(sel, case) {
            Ok(c) => c,
            Err(e) => return errored(case, &e.to_string()),
        };
        let run = match cache.get_or_run(&config, case.parallelism) {
            Ok(r) => r.clone(),
            Err(e) => return errored(case, &format!("{}: {e}", config.label())),
        };
        let identical = match case.rerun_parallelism {
            None => None,
            Some(k) => {
                let other = match cache.get_or_run(&config, k) {
                    Ok(r) => r.clone(),
                    Err(e) => return errored(case, &format!("{}: {e}", config.label())),
                };
                match (records_csv(&run), records_csv(&other)) {
                    (Ok(a), Ok(b)) => Some(a == b),
                    (Err(e), _) | (_, Err(e)) => return errored(case, &e.to_string()),
                }
            }
        };
        contexts.push((format!("#{}", config.scenario_index), Some(run), identical));
    }
    let mut out = Vec::new();
    for a in &case.assertions {
        let mut observed = Vec::new();
        let mut passed = 0;
        let mut failure = None;
        for (label, run, identical) in &contexts {
            let ctx = Context {
                run: run.as_ref(),
                identical: *identical,
            };
            for (tag, metric) in expansions(&a.metric, &case.methods) {
                let key = if tag.is_empty() { label.clone() } else { format!("{label}/{tag}") };
                match evaluate(&metric, &ctx) {
                    Ok(v) => {
                        if a.holds(v) {
                            passed += 1;
                        }
                        observed.push((key, v));
                    }
                    Err(e) => failure = Some(e.to_string()),
                }
            }
        }
        let (status, required, message) = match failure {
            Some(msg) => (Status::Errored, 0, msg),
            None => match a.required(observed.len()) {
                Ok(req) => (
                    if passed >= req && !observed.is_empty() {
                        Status::Pass
                    } else {
                        Status::Fail
                    },
                    req,
                    String::new(),
                ),
                Err(e) => (Status::Errored, 0, e.to_string()),
            },
        };
        out.push(AssertionOutcome {
            case: case.name.clone(),
            criterion: case.criterion,
            assertion: a.describe(),
            observed,
            passed,
            required,
            status,
            message,
        });
    }
    out
}

/// Run every case of the suite, sharing scenario runs between cases.
pub fn run_acceptance(suite: &Suite) -> Report {
    let mut cache = RunCache::default();
    let mut report = Report::default();
    for case in &suite.cases {
        let start = Instant::now();
        report.outcomes.extend(run_case(case, &mut cache));
        report.timings.push((case.name.clone(), start.elapsed().as_secs_f64()));
    }
    report
}
