//! Replicate loop: generate, mask, analyse with each method, pool.

use rayon::prelude::*;

use crate::data::{ImputedSet, TrialDataset};
use crate::datagen::generate_dataset;
use crate::error::{Error, Result};
use crate::fcs::{fcs_impute, FcsModelSpec, FcsVariant};
use crate::lmm::{cca_prepare, fit_bivariate_lmm, FitOptions, FitResult};
use crate::missingness::{impose_missingness, MissingnessSpec};
use crate::mmi::{pan_gibbs_impute, MmiPriors};
use crate::pooling::{barnard_rubin_pool, rubin_pool, t_interval};
use crate::rng::make_stream;
use crate::scenario::{DfRule, Method, ScenarioConfig};

use super::performance::{compute_performance, PerfSummary};

/// Share of failed replicates above which a method aborts the scenario.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

/// One method's estimate of one treatment effect in one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub scenario_index: usize,
    pub replicate: usize,
    pub method: Method,
    /// 0 for Y1, 1 for Y2.
    pub outcome: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub df: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub converged: bool,
    pub n_imputation_failures: usize,
}

impl ReplicateRecord {
    fn failed(config: &ScenarioConfig, replicate: usize, method: Method, outcome: usize, n_fail: usize) -> Self {
        Self {
            scenario_index: config.scenario_index,
            replicate,
            method,
            outcome,
            estimate: f64::NAN,
            std_error: f64::NAN,
            df: f64::NAN,
            ci_lower: f64::NAN,
            ci_upper: f64::NAN,
            converged: false,
            n_imputation_failures: n_fail,
        }
    }
}

/// Checks that no imputation engine touched an observed cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ObservedCellAudit {
    /// Completed datasets compared with their incomplete source.
    pub checked: usize,
    /// Completed datasets whose observed cells differ from the source.
    pub altered: usize,
}

impl ObservedCellAudit {
    fn merge(&mut self, o: &Self) {
        self.checked += o.checked;
        self.altered += o.altered;
    }
}

/// Everything produced by one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutput {
    pub records: Vec<ReplicateRecord>,
    pub audit: ObservedCellAudit,
    /// Observed non-response proportions `[arm][outcome]`.
    pub missing_rate: [[f64; 2]; 2],
    /// (cluster, outcome) pairs left fully missing after the re-draw.
    pub fully_missing: usize,
    /// Method failures with their reasons.
    pub errors: Vec<(Method, String)>,
}

/// Results of a whole scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub scenario_index: usize,
    pub records: Vec<ReplicateRecord>,
    pub performance: Vec<PerfSummary>,
    pub audit: ObservedCellAudit,
    /// Mean observed non-response proportions `[arm][outcome]`.
    pub missing_rate: [[f64; 2]; 2],
    pub fully_missing: usize,
}

fn single_fit_record(
    config: &ScenarioConfig,
    replicate: usize,
    method: Method,
    fit: &FitResult,
) -> [ReplicateRecord; 2] {
    let df = (fit.n_clusters as f64 - 2.0).max(1.0);
    std::array::from_fn(|l| {
        let se = fit.std_error(l);
        let (lo, hi) = t_interval(fit.beta_hat[l], se, df);
        ReplicateRecord {
            scenario_index: config.scenario_index,
            replicate,
            method,
            outcome: l,
            estimate: fit.beta_hat[l],
            std_error: se,
            df,
            ci_lower: lo,
            ci_upper: hi,
            converged: fit.converged,
            n_imputation_failures: 0,
        }
    })
}

fn analyse_cca(config: &ScenarioConfig, replicate: usize, data: &TrialDataset, opts: &FitOptions) -> Result<[ReplicateRecord; 2]> {
    let cca = cca_prepare(data)?;
    let fit = fit_bivariate_lmm(&cca.data, opts)?;
    Ok(single_fit_record(config, replicate, Method::Cca, &fit))
}

fn pool_imputations(
    config: &ScenarioConfig,
    replicate: usize,
    method: Method,
    imputed: &ImputedSet,
    opts: &FitOptions,
) -> Result<[ReplicateRecord; 2]> {
    let mut est = [Vec::new(), Vec::new()];
    let mut var = [Vec::new(), Vec::new()];
    let mut failures = 0;
    let mut n_clusters = 0;
    for d in &imputed.completed {
        match fit_bivariate_lmm(d, opts) {
            Ok(f) if f.converged => {
                n_clusters = f.n_clusters;
                for l in 0..2 {
                    est[l].push(f.beta_hat[l]);
                    var[l].push(f.beta_cov[(l, l)].max(0.0));
                }
            }
            _ => failures += 1,
        }
    }
    if est[0].len() < 2 {
        return Err(Error::PoolingTooFew(est[0].len()));
    }
    let mut out = Vec::with_capacity(2);
    for l in 0..2 {
        let p = match config.imputation.df_rule {
            DfRule::Classical => rubin_pool(&est[l], &var[l])?,
            DfRule::BarnardRubin => barnard_rubin_pool(&est[l], &var[l], (n_clusters as f64 - 2.0).max(1.0))?,
        };
        out.push(ReplicateRecord {
            scenario_index: config.scenario_index,
            replicate,
            method,
            outcome: l,
            estimate: p.q_bar,
            std_error: p.std_error(),
            df: p.df,
            ci_lower: p.ci.0,
            ci_upper: p.ci.1,
            converged: true,
            n_imputation_failures: failures,
        });
    }
    Ok([out[0].clone(), out[1].clone()])
}

fn audit_imputed(source: &TrialDataset, imputed: &ImputedSet) -> ObservedCellAudit {
    let fp = source.observed_fingerprint();
    let altered = imputed
        .completed
        .iter()
        .filter(|d| d.len() != source.len() || d.observed_fingerprint() != fp)
        .count();
    ObservedCellAudit {
        checked: imputed.len(),
        altered,
    }
}

fn observed_rates(data: &TrialDataset) -> [[f64; 2]; 2] {
    let mut miss = [[0.0; 2]; 2];
    let mut n = [0.0; 2];
    for r in &data.rows {
        let k = r.arm as usize;
        n[k] += 1.0;
        for l in 0..2 {
            if !r.observed[l] {
                miss[k][l] += 1.0;
            }
        }
    }
    for k in 0..2 {
        for l in 0..2 {
            if n[k] > 0.0 {
                miss[k][l] /= n[k];
            }
        }
    }
    miss
}

/// Run one replicate. Every stage draws from its own keyed stream, so the
/// result depends only on `(config, replicate)`.
pub fn run_replicate(config: &ScenarioConfig, spec: &MissingnessSpec, replicate: usize) -> Result<ReplicateOutput> {
    let seed = config.master_seed;
    let scen = config.scenario_index as u64;
    let rep = replicate as u64;
    let complete = generate_dataset(config, &mut make_stream(seed, scen, rep, "datagen"))?;
    let (data, report) = impose_missingness(&complete, spec, &mut make_stream(seed, scen, rep, "missing"))?;
    let opts = FitOptions::default();
    let mut records = Vec::with_capacity(2 * config.methods.len());
    let mut audit = ObservedCellAudit::default();
    let mut errors = Vec::new();
    for &method in &config.methods {
        let result = match method {
            Method::Cca => analyse_cca(config, replicate, &data, &opts),
            Method::Smi | Method::Fmi => {
                let (variant, tag) = if method == Method::Smi {
                    (FcsVariant::Smi, "smi")
                } else {
                    (FcsVariant::Fmi, "fmi")
                };
                let spec = FcsModelSpec {
                    variant,
                    n_cycles: config.imputation.fcs_cycles,
                    m: config.m,
                };
                fcs_impute(&data, &spec, &mut make_stream(seed, scen, rep, tag)).and_then(|imp| {
                    audit.merge(&audit_imputed(&data, &imp));
                    pool_imputations(config, replicate, method, &imp, &opts)
                })
            }
            Method::Mmi => pan_gibbs_impute(
                &data,
                &MmiPriors::default(),
                config.m,
                config.imputation.mmi_burn_in,
                config.imputation.mmi_thin,
                &mut make_stream(seed, scen, rep, "mmi"),
            )
            .and_then(|imp| {
                audit.merge(&audit_imputed(&data, &imp));
                pool_imputations(config, replicate, method, &imp, &opts)
            }),
        };
        match result {
            Ok(r) => records.extend(r),
            Err(e) => {
                errors.push((method, e.to_string()));
                let n_fail = if let Error::PoolingTooFew(k) = e { config.m - k } else { 0 };
                records.push(ReplicateRecord::failed(config, replicate, method, 0, n_fail));
                records.push(ReplicateRecord::failed(config, replicate, method, 1, n_fail));
            }
        }
    }
    Ok(ReplicateOutput {
        records,
        audit,
        missing_rate: observed_rates(&data),
        fully_missing: report.fully_missing,
        errors,
    })
}

/// Run every replicate of `config` on `parallelism` worker threads and
/// summarise. Output is identical for any worker count.
pub fn run_scenario(config: &ScenarioConfig, parallelism: usize) -> Result<ScenarioRun> {
    config.design.validate()?;
    if config.methods.iter().any(|m| *m != Method::Cca) && config.m < 2 {
        return Err(Error::PoolingTooFew(config.m));
    }
    let spec = MissingnessSpec::for_scenario(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outputs: Vec<Result<ReplicateOutput>> = pool.install(|| {
        (0..config.n_replicates)
            .into_par_iter()
            .map(|rep| run_replicate(config, &spec, rep))
            .collect()
    });
    let mut records = Vec::with_capacity(config.n_replicates * config.methods.len() * 2);
    let mut audit = ObservedCellAudit::default();
    let mut rate = [[0.0; 2]; 2];
    let mut fully_missing = 0;
    for o in outputs {
        let o = o?;
        records.extend(o.records);
        audit.merge(&o.audit);
        fully_missing += o.fully_missing;
        for k in 0..2 {
            for l in 0..2 {
                rate[k][l] += o.missing_rate[k][l];
            }
        }
    }
    if config.n_replicates > 0 {
        for row in rate.iter_mut() {
            for v in row.iter_mut() {
                *v /= config.n_replicates as f64;
            }
        }
    }
    let theta = config.true_theta();
    let mut performance = Vec::new();
    for &method in &config.methods {
        let failed = records
            .iter()
            .filter(|r| r.method == method && r.outcome == 0 && !r.converged)
            .count();
        if config.n_replicates > 0 && failed as f64 > MAX_FAILURE_SHARE * config.n_replicates as f64 {
            return Err(Error::ScenarioAborted {
                method: method.label().to_string(),
                failed,
                total: config.n_replicates,
            });
        }
        for l in 0..2 {
            let subset: Vec<ReplicateRecord> = records
                .iter()
                .filter(|r| r.method == method && r.outcome == l)
                .cloned()
                .collect();
            performance.push(compute_performance(&subset, theta[l])?);
        }
    }
    Ok(ScenarioRun {
        scenario_index: config.scenario_index,
        records,
        performance,
        audit,
        missing_rate: rate,
        fully_missing,
    })
}
