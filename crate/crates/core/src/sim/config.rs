//! Study configuration files (TOML).
//!
//! ```toml
//! [factors]
//! icc = [[0.01, 0.01], [0.20, 0.20]]
//! design = ["many_small"]
//! mechanism = ["treatment_differential"]
//! eta = ["low"]
//! nonresponse = ["equal"]
//!
//! [generation]
//! beta = [1.0, 1.0]
//!
//! [run]
//! M = 10
//! N = 1000
//! seed = 20240611
//! methods = ["CCA", "SMI", "FMI", "MMI"]
//! ```
//!
//! Missing factor lists keep every level. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scenario::{
    build_scenario_grid, DfRule, FactorOverrides, GenerationSettings, ImputationSettings, Method, RunSettings,
    ScenarioConfig,
};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSection {
    pub icc: Option<Vec<[f64; 2]>>,
    pub design: Option<Vec<String>>,
    pub mechanism: Option<Vec<String>>,
    pub eta: Option<Vec<String>>,
    pub nonresponse: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "M", default = "default_m")]
    pub m: usize,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub fcs_cycles: Option<usize>,
    pub df_rule: Option<String>,
}

fn default_m() -> usize {
    10
}

fn default_n() -> usize {
    1000
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            m: default_m(),
            n: default_n(),
            seed: 0,
            methods: default_methods(),
            burn_in: None,
            thin: None,
            fcs_cycles: None,
            df_rule: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default)]
    pub factors: FactorSection,
    #[serde(default)]
    pub generation: GenerationSettings,
    #[serde(default)]
    pub run: RunSection,
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn run_settings(&self) -> Result<RunSettings> {
        let mut imputation = ImputationSettings::default();
        if let Some(b) = self.run.burn_in {
            imputation.mmi_burn_in = b;
        }
        if let Some(t) = self.run.thin {
            imputation.mmi_thin = t;
        }
        if let Some(c) = self.run.fcs_cycles {
            imputation.fcs_cycles = c;
        }
        if let Some(r) = &self.run.df_rule {
            imputation.df_rule = r.parse::<DfRule>()?;
        }
        Ok(RunSettings {
            m: self.run.m,
            n_replicates: self.run.n,
            methods: self.run.methods.clone(),
            generation: self.generation,
            imputation,
        })
    }

    pub fn overrides(&self) -> FactorOverrides {
        FactorOverrides {
            icc: self.factors.icc.clone(),
            design: self.factors.design.clone(),
            mechanism: self.factors.mechanism.clone(),
            eta: self.factors.eta.clone(),
            nonresponse: self.factors.nonresponse.clone(),
        }
    }

    /// Scenario list for this config with the seed from the file.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        build_scenario_grid(self.run.seed, &self.overrides(), &self.run_settings()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let c = StudyConfig::parse(
            r#"
            [factors]
            icc = [[0.01, 0.01], [0.20, 0.20]]
            design = ["many_small"]
            mechanism = ["treatment_differential"]
            eta = ["low"]
            nonresponse = ["equal"]
            [generation]
            beta = [1.0, 0.5]
            [run]
            M = 5
            N = 20
            seed = 7
            methods = ["CCA", "MMI"]
            "#,
        )
        .unwrap();
        let s = c.scenarios().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].m, 5);
        assert_eq!(s[0].n_replicates, 20);
        assert_eq!(s[0].master_seed, 7);
        assert_eq!(s[0].true_theta(), [1.0, 0.5]);
        assert_eq!(s[0].methods, vec![Method::Cca, Method::Mmi]);
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(StudyConfig::parse("[run]\nreplicates = 4\n").is_err());
        assert!(StudyConfig::parse("[generation]\nsigma = 1.0\n").is_err());
        assert!(StudyConfig::parse("[other]\n").is_err());
    }

    #[test]
    fn empty_file_is_full_grid() {
        assert_eq!(StudyConfig::parse("").unwrap().scenarios().unwrap().len(), 192);
    }
}
