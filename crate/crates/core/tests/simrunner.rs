//! Whole-scenario runs: reproducibility, audit and config plumbing.

use crtmi::scenario::{build_scenario_grid, FactorOverrides, Method, RunSettings, ScenarioConfig};
use crtmi::sim::{run_scenario, StudyConfig};

fn small(design: &str, n: usize) -> ScenarioConfig {
    let overrides = FactorOverrides {
        icc: Some(vec![[0.20, 0.05]]),
        design: Some(vec![design.into()]),
        mechanism: Some(vec!["both".into()]),
        eta: Some(vec!["high".into()]),
        nonresponse: Some(vec!["different".into()]),
    };
    let run = RunSettings {
        n_replicates: n,
        m: 5,
        ..RunSettings::default()
    };
    build_scenario_grid(2024, &overrides, &run).unwrap().remove(0)
}

#[test]
fn same_config_same_results() {
    let c = small("many_small", 6);
    assert_eq!(run_scenario(&c, 1).unwrap(), run_scenario(&c, 1).unwrap());
}

#[test]
fn parallelism_does_not_change_results() {
    let c = small("few_large", 8);
    let a = run_scenario(&c, 1).unwrap();
    let b = run_scenario(&c, 4).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.performance, b.performance);
    assert_eq!(a.audit, b.audit);
}

#[test]
fn imputation_never_touches_observed_cells() {
    let c = small("unbalanced", 5);
    let r = run_scenario(&c, 1).unwrap();
    assert_eq!(r.audit.altered, 0);
    assert!(r.audit.checked > 0);
    assert_eq!(r.records.len(), 5 * 4 * 2);
}

#[test]
fn without_missing_data_every_method_is_the_complete_data_fit() {
    let mut c = small("many_small", 4);
    c.target_override = Some([[0.0, 0.0], [0.0, 0.0]]);
    let r = run_scenario(&c, 1).unwrap();
    assert_eq!(r.missing_rate, [[0.0, 0.0], [0.0, 0.0]]);
    for rec in r.records.iter().filter(|x| x.method == Method::Cca) {
        for other in r.records.iter().filter(|x| {
            x.method != Method::Cca && x.replicate == rec.replicate && x.outcome == rec.outcome
        }) {
            assert!(
                (other.estimate - rec.estimate).abs() < 1e-10,
                "{:?} rep {} Y{}",
                other.method,
                rec.replicate,
                rec.outcome + 1
            );
            // no between-imputation variance
            assert!((other.std_error - rec.std_error).abs() < 1e-10);
        }
    }
}

#[test]
fn config_file_drives_the_grid() {
    let cfg = StudyConfig::parse(
        r#"
        [factors]
        icc = [[0.20, 0.05]]
        design = ["few_large"]
        mechanism = ["cluster"]
        eta = ["low"]
        nonresponse = ["equal"]
        [run]
        M = 3
        N = 3
        seed = 99
        methods = ["CCA", "SMI"]
        "#,
    )
    .unwrap();
    let s = cfg.scenarios().unwrap();
    assert_eq!(s.len(), 1);
    let r = run_scenario(&s[0], 1).unwrap();
    assert_eq!(r.records.len(), 3 * 2 * 2);
    assert!(r.records.iter().all(|x| matches!(x.method, Method::Cca | Method::Smi)));
    assert_eq!(r.performance.len(), 4);
}

#[test]
fn different_seeds_differ() {
    let a = small("many_small", 3);
    let mut b = a.clone();
    b.master_seed = 2025;
    assert_ne!(run_scenario(&a, 1).unwrap().records, run_scenario(&b, 1).unwrap().records);
}
