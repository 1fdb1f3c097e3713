//! Factorial scenario grid: factor levels, cluster designs and generating
//! parameters.

use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intraclass correlation pair `(ICC₁, ICC₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IccLevel {
    Low,
    Moderate,
    High,
    DifferentialByOutcome,
}

impl IccLevel {
    pub const ALL: [IccLevel; 4] = [
        IccLevel::Low,
        IccLevel::Moderate,
        IccLevel::High,
        IccLevel::DifferentialByOutcome,
    ];

    pub fn values(self) -> [f64; 2] {
        match self {
            IccLevel::Low => [0.01, 0.01],
            IccLevel::Moderate => [0.20, 0.05],
            IccLevel::High => [0.20, 0.20],
            IccLevel::DifferentialByOutcome => [0.60, 0.01],
        }
    }

    /// Matches an ICC pair against the canonical levels.
    pub fn from_pair(pair: [f64; 2]) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| {
                let v = l.values();
                (v[0] - pair[0]).abs() < 1e-9 && (v[1] - pair[1]).abs() < 1e-9
            })
            .ok_or_else(|| Error::UnknownFactorLevel(format!("ICC pair ({}, {})", pair[0], pair[1])))
    }

    pub fn label(self) -> String {
        let v = self.values();
        format!("{:.2},{:.2}", v[0], v[1])
    }
}

/// The three cluster designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DesignLevel {
    /// J = 50, n_j = 10.
    ManySmall,
    /// J = 10, n_j = 50.
    FewLarge,
    /// J = 30, sizes ~ Gamma(mean 20, cv 0.5).
    Unbalanced,
}

impl DesignLevel {
    pub const ALL: [DesignLevel; 3] = [DesignLevel::ManySmall, DesignLevel::FewLarge, DesignLevel::Unbalanced];

    pub fn design(self) -> Design {
        match self {
            DesignLevel::ManySmall => Design {
                n_clusters: 50,
                size_rule: SizeRule::Fixed(10),
            },
            DesignLevel::FewLarge => Design {
                n_clusters: 10,
                size_rule: SizeRule::Fixed(50),
            },
            DesignLevel::Unbalanced => Design {
                n_clusters: 30,
                size_rule: SizeRule::Gamma { mean: 20.0, cv: 0.5 },
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DesignLevel::ManySmall => "many_small",
            DesignLevel::FewLarge => "few_large",
            DesignLevel::Unbalanced => "unbalanced",
        }
    }
}

impl FromStr for DesignLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "many_small" | "j50" => Ok(DesignLevel::ManySmall),
            "ii" | "few_large" | "j10" => Ok(DesignLevel::FewLarge),
            "iii" | "unbalanced" | "j30" => Ok(DesignLevel::Unbalanced),
            _ => Err(Error::UnknownFactorLevel(format!("design '{s}'"))),
        }
    }
}

/// Which covariates drive non-response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mechanism {
    Individual,
    Cluster,
    Both,
    TreatmentDifferential,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Individual,
        Mechanism::Cluster,
        Mechanism::Both,
        Mechanism::TreatmentDifferential,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Individual => "individual",
            Mechanism::Cluster => "cluster",
            Mechanism::Both => "both",
            Mechanism::TreatmentDifferential => "treatment",
        }
    }

    /// Variance of the covariate combination in the linear predictor, per
    /// unit of η².
    pub fn covariate_variance(self) -> f64 {
        match self {
            Mechanism::Individual | Mechanism::Cluster => 1.0,
            Mechanism::Both | Mechanism::TreatmentDifferential => 2.0,
        }
    }
}

impl FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "individual" | "ind" => Ok(Mechanism::Individual),
            "cluster" | "clus" => Ok(Mechanism::Cluster),
            "both" => Ok(Mechanism::Both),
            "treatment" | "treat" | "treatment_differential" | "treatment-differential" => {
                Ok(Mechanism::TreatmentDifferential)
            }
            _ => Err(Error::UnknownFactorLevel(format!("mechanism '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EtaSetting {
    Low,
    High,
}

impl EtaSetting {
    pub const ALL: [EtaSetting; 2] = [EtaSetting::Low, EtaSetting::High];

    pub fn label(self) -> &'static str {
        match self {
            EtaSetting::Low => "low",
            EtaSetting::High => "high",
        }
    }
}

impl FromStr for EtaSetting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(EtaSetting::Low),
            "high" => Ok(EtaSetting::High),
            _ => Err(Error::UnknownFactorLevel(format!("eta '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NonResponse {
    /// 20% / 20% (control arm values for the differential mechanism).
    Equal,
    /// 30% for Y₁, 10% for Y₂.
    Different,
}

impl NonResponse {
    pub const ALL: [NonResponse; 2] = [NonResponse::Equal, NonResponse::Different];

    pub fn label(self) -> &'static str {
        match self {
            NonResponse::Equal => "equal",
            NonResponse::Different => "different",
        }
    }
}

impl FromStr for NonResponse {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" | "20/20" => Ok(NonResponse::Equal),
            "different" | "30/10" => Ok(NonResponse::Different),
            _ => Err(Error::UnknownFactorLevel(format!("non-response '{s}'"))),
        }
    }
}

/// Strategy used to handle the missing outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CCA")]
    Cca,
    #[serde(rename = "SMI")]
    Smi,
    #[serde(rename = "FMI")]
    Fmi,
    #[serde(rename = "MMI")]
    Mmi,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Cca, Method::Smi, Method::Fmi, Method::Mmi];

    pub fn label(self) -> &'static str {
        match self {
            Method::Cca => "CCA",
            Method::Smi => "SMI",
            Method::Fmi => "FMI",
            Method::Mmi => "MMI",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CCA" => Ok(Method::Cca),
            "SMI" => Ok(Method::Smi),
            "FMI" => Ok(Method::Fmi),
            "MMI" => Ok(Method::Mmi),
            _ => Err(Error::UnknownFactorLevel(format!("method '{s}'"))),
        }
    }
}

/// Cluster-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeRule {
    Fixed(usize),
    /// Gamma(shape = 1/cv², scale = mean·cv²), rounded, floored at 2.
    Gamma { mean: f64, cv: f64 },
}

/// Number of clusters and how their sizes are drawn. The first half of the
/// clusters form the control arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Design {
    pub n_clusters: usize,
    pub size_rule: SizeRule,
}

impl Design {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 4 || !self.n_clusters.is_multiple_of(2) {
            return Err(Error::InvalidDesign(format!(
                "need an even number of clusters >= 4, got {}",
                self.n_clusters
            )));
        }
        match self.size_rule {
            SizeRule::Fixed(n) if n < 2 => Err(Error::InvalidDesign(format!("fixed cluster size {n} < 2"))),
            SizeRule::Gamma { mean, cv } if !(mean > 0.0 && cv > 0.0) => Err(Error::InvalidDesign(format!(
                "gamma sizes need mean > 0 and cv > 0 (mean={mean}, cv={cv})"
            ))),
            _ => Ok(()),
        }
    }

    pub fn clusters_per_arm(&self) -> usize {
        self.n_clusters / 2
    }
}

/// Scenario-independent generating coefficients; the covariance components
/// follow from these and the ICC pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationSettings {
    pub intercepts: [f64; 2],
    pub beta: [f64; 2],
    pub nu_x: [f64; 2],
    pub nu_w: [f64; 2],
    /// Level-1 correlation between outcomes.
    pub rho: f64,
    /// Level-2 correlation between cluster effects.
    pub phi: f64,
    /// Residual variance per outcome before the ICC split.
    pub total_var: [f64; 2],
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            intercepts: [0.0, 0.0],
            beta: [1.0, 1.0],
            nu_x: [0.5, 0.5],
            // ν_W² matches the lowest ICC level, so the cluster covariate
            // does not swamp the between-cluster variance of low-ICC cells
            nu_w: [0.1, 0.1],
            rho: 0.4,
            phi: 0.4,
            total_var: [1.0, 1.0],
        }
    }
}

/// Fully resolved generating parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub intercepts: [f64; 2],
    pub beta: [f64; 2],
    pub nu_x: [f64; 2],
    pub nu_w: [f64; 2],
    pub sigma: [f64; 2],
    pub rho: f64,
    pub tau: [f64; 2],
    pub phi: f64,
}

impl GenParams {
    pub fn from_icc(settings: &GenerationSettings, icc: [f64; 2]) -> Result<Self> {
        if !(settings.rho.abs() < 1.0) || !(settings.phi.abs() <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need |rho| < 1 and |phi| <= 1 (rho={}, phi={})",
                settings.rho, settings.phi
            )));
        }
        let mut sigma = [0.0; 2];
        let mut tau = [0.0; 2];
        for l in 0..2 {
            let (t2, s2) = variance_components_from_icc(icc[l], settings.total_var[l])?;
            sigma[l] = s2.sqrt();
            tau[l] = t2.sqrt();
        }
        Ok(Self {
            intercepts: settings.intercepts,
            beta: settings.beta,
            nu_x: settings.nu_x,
            nu_w: settings.nu_w,
            sigma,
            rho: settings.rho,
            tau,
            phi: settings.phi,
        })
    }

    /// Σ, the individual-level covariance.
    pub fn level1_cov(&self) -> Matrix2<f64> {
        let c = self.rho * self.sigma[0] * self.sigma[1];
        Matrix2::new(self.sigma[0].powi(2), c, c, self.sigma[1].powi(2))
    }

    /// Ψ, the cluster-level covariance.
    pub fn level2_cov(&self) -> Matrix2<f64> {
        let c = self.phi * self.tau[0] * self.tau[1];
        Matrix2::new(self.tau[0].powi(2), c, c, self.tau[1].powi(2))
    }

    pub fn icc(&self) -> [f64; 2] {
        [0, 1].map(|l| {
            let t = self.tau[l].powi(2);
            let s = self.sigma[l].powi(2);
            if t + s > 0.0 {
                t / (t + s)
            } else {
                0.0
            }
        })
    }
}

/// Split a residual variance into between-cluster `τ²` and within-cluster
/// `σ²` so that `τ²/(τ²+σ²) = icc`.
pub fn variance_components_from_icc(icc: f64, total_var: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&icc) {
        return Err(Error::InvalidParameter(format!("ICC {icc} outside [0, 1)")));
    }
    if !(total_var > 0.0) {
        return Err(Error::InvalidParameter(format!("total variance {total_var} must be positive")));
    }
    Ok((icc * total_var, (1.0 - icc) * total_var))
}

/// Degrees-of-freedom rule used when pooling with Rubin's rules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DfRule {
    /// `(M-1)(1 + 1/r)²`.
    #[default]
    Classical,
    /// Barnard–Rubin small-sample df with complete-data df `J - 2`.
    BarnardRubin,
}

impl FromStr for DfRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" | "rubin" => Ok(DfRule::Classical),
            "barnard_rubin" | "barnard-rubin" => Ok(DfRule::BarnardRubin),
            _ => Err(Error::Config(format!("unknown df rule '{s}'"))),
        }
    }
}

/// Tuning for the imputation engines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImputationSettings {
    pub fcs_cycles: usize,
    pub mmi_burn_in: usize,
    pub mmi_thin: usize,
    pub df_rule: DfRule,
}

impl Default for ImputationSettings {
    fn default() -> Self {
        Self {
            fcs_cycles: 10,
            mmi_burn_in: 500,
            mmi_thin: 100,
            df_rule: DfRule::Classical,
        }
    }
}

/// One cell of the factorial design plus run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario_index: usize,
    pub icc: IccLevel,
    pub design_level: DesignLevel,
    pub design: Design,
    pub mechanism: Mechanism,
    pub eta: EtaSetting,
    pub nonresponse: NonResponse,
    pub generation: GenerationSettings,
    pub gen: GenParams,
    /// Number of imputations.
    pub m: usize,
    /// Number of replicates.
    pub n_replicates: usize,
    pub methods: Vec<Method>,
    pub master_seed: u64,
    pub imputation: ImputationSettings,
    /// Replaces the tabulated non-response targets (`[arm][outcome]`);
    /// zero targets switch missingness off.
    pub target_override: Option<[[f64; 2]; 2]>,
}

impl ScenarioConfig {
    /// Per-arm η: `[control, intervention]`.
    pub fn eta_per_arm(&self) -> [f64; 2] {
        match (self.mechanism, self.eta) {
            (Mechanism::TreatmentDifferential, EtaSetting::Low) => [1.0, 2.0],
            (Mechanism::TreatmentDifferential, EtaSetting::High) => [1.5, 3.0],
            (_, EtaSetting::Low) => [1.0, 1.0],
            (_, EtaSetting::High) => [2.0, 2.0],
        }
    }

    /// Non-response targets `[arm][outcome]`.
    pub fn target_pi(&self) -> [[f64; 2]; 2] {
        if let Some(t) = self.target_override {
            return t;
        }
        tabulated_targets(self.mechanism, self.eta, self.nonresponse)
    }

    pub fn true_theta(&self) -> [f64; 2] {
        self.gen.beta
    }

    pub fn label(&self) -> String {
        format!(
            "#{} {} {} eta={} nr={} icc={}",
            self.scenario_index,
            self.mechanism.label(),
            self.design_level.label(),
            self.eta.label(),
            self.nonresponse.label(),
            self.icc.label()
        )
    }
}

/// Tabulated non-response targets `[arm][outcome]`. For the differential
/// mechanism the intervention row holds the approximate empirical rates.
pub fn tabulated_targets(mechanism: Mechanism, eta: EtaSetting, nr: NonResponse) -> [[f64; 2]; 2] {
    match mechanism {
        Mechanism::TreatmentDifferential => match (eta, nr) {
            (EtaSetting::Low, NonResponse::Equal) => [[0.20, 0.20], [0.35, 0.35]],
            (EtaSetting::Low, NonResponse::Different) => [[0.30, 0.10], [0.45, 0.20]],
            (EtaSetting::High, NonResponse::Equal) => [[0.10, 0.10], [0.30, 0.30]],
            (EtaSetting::High, NonResponse::Different) => [[0.15, 0.10], [0.35, 0.30]],
        },
        _ => match nr {
            NonResponse::Equal => [[0.20, 0.20], [0.20, 0.20]],
            NonResponse::Different => [[0.30, 0.10], [0.30, 0.10]],
        },
    }
}

/// Subsets of the canonical factor levels; `None` keeps every level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FactorOverrides {
    pub icc: Option<Vec<[f64; 2]>>,
    pub design: Option<Vec<String>>,
    pub mechanism: Option<Vec<String>>,
    pub eta: Option<Vec<String>>,
    pub nonresponse: Option<Vec<String>>,
}

/// Run-level settings shared by every scenario in a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub m: usize,
    pub n_replicates: usize,
    pub methods: Vec<Method>,
    pub generation: GenerationSettings,
    pub imputation: ImputationSettings,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            m: 10,
            n_replicates: 1000,
            methods: Method::ALL.to_vec(),
            generation: GenerationSettings::default(),
            imputation: ImputationSettings::default(),
        }
    }
}

fn select<T: Copy + PartialEq>(all: &[T], chosen: Option<Vec<T>>) -> Vec<T> {
    match chosen {
        None => all.to_vec(),
        Some(c) => all.iter().copied().filter(|l| c.contains(l)).collect(),
    }
}

fn parse_all<T: FromStr<Err = Error>>(v: &Option<Vec<String>>) -> Result<Option<Vec<T>>> {
    v.as_ref()
        .map(|xs| xs.iter().map(|s| s.parse()).collect::<Result<Vec<T>>>())
        .transpose()
}

/// Number of canonical scenarios.
pub const GRID_SIZE: usize = 192;

/// Canonical position of a factor combination. Nesting order (outer to inner):
/// mechanism, design, η, non-response, ICC.
pub fn canonical_index(m: Mechanism, d: DesignLevel, e: EtaSetting, nr: NonResponse, icc: IccLevel) -> usize {
    fn pos<T: PartialEq>(all: &[T], x: T) -> usize {
        all.iter().position(|v| *v == x).expect("level is in ALL")
    }
    let mi = pos(&Mechanism::ALL, m);
    let di = pos(&DesignLevel::ALL, d);
    let ei = pos(&EtaSetting::ALL, e);
    let ni = pos(&NonResponse::ALL, nr);
    let ii = pos(&IccLevel::ALL, icc);
    (((mi * 3 + di) * 2 + ei) * 2 + ni) * 4 + ii
}

/// Build the full factorial grid (192 scenarios) or the subset selected by
/// `overrides`. Scenario indices are canonical positions, so a subset keeps
/// the same indices (and therefore the same random streams) as the full run.
pub fn build_scenario_grid(master_seed: u64, overrides: &FactorOverrides, run: &RunSettings) -> Result<Vec<ScenarioConfig>> {
    let iccs = overrides
        .icc
        .as_ref()
        .map(|v| v.iter().map(|p| IccLevel::from_pair(*p)).collect::<Result<Vec<_>>>())
        .transpose()?;
    let iccs = select(&IccLevel::ALL, iccs);
    let designs = select(&DesignLevel::ALL, parse_all(&overrides.design)?);
    let mechs = select(&Mechanism::ALL, parse_all(&overrides.mechanism)?);
    let etas = select(&EtaSetting::ALL, parse_all(&overrides.eta)?);
    let nrs = select(&NonResponse::ALL, parse_all(&overrides.nonresponse)?);

    let mut out = Vec::new();
    for &mechanism in &mechs {
        for &design_level in &designs {
            for &eta in &etas {
                for &nonresponse in &nrs {
                    for &icc in &iccs {
                        let gen = GenParams::from_icc(&run.generation, icc.values())?;
                        out.push(ScenarioConfig {
                            scenario_index: canonical_index(mechanism, design_level, eta, nonresponse, icc),
                            icc,
                            design_level,
                            design: design_level.design(),
                            mechanism,
                            eta,
                            nonresponse,
                            generation: run.generation,
                            gen,
                            m: run.m,
                            n_replicates: run.n_replicates,
                            methods: run.methods.clone(),
                            master_seed,
                            imputation: run.imputation,
                            target_override: None,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_192_unique_scenarios() {
        let g = build_scenario_grid(1, &FactorOverrides::default(), &RunSettings::default()).unwrap();
        assert_eq!(g.len(), GRID_SIZE);
        let mut idx: Vec<_> = g.iter().map(|s| s.scenario_index).collect();
        idx.sort();
        idx.dedup();
        assert_eq!(idx, (0..GRID_SIZE).collect::<Vec<_>>());
        let diff = g
            .iter()
            .filter(|s| s.mechanism == Mechanism::TreatmentDifferential)
            .count();
        assert_eq!(diff, 48);
    }

    #[test]
    fn overrides_restrict_the_grid() {
        let o = FactorOverrides {
            mechanism: Some(vec!["individual".into()]),
            design: Some(vec!["i".into()]),
            ..Default::default()
        };
        let g = build_scenario_grid(1, &o, &RunSettings::default()).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.iter().all(|s| s.design.n_clusters == 50));
    }

    #[test]
    fn unknown_levels_are_rejected() {
        let o = FactorOverrides {
            icc: Some(vec![[0.30, 0.30]]),
            ..Default::default()
        };
        let e = build_scenario_grid(1, &o, &RunSettings::default()).unwrap_err();
        assert!(matches!(e, Error::UnknownFactorLevel(_)));
        let o = FactorOverrides {
            mechanism: Some(vec!["mnar".into()]),
            ..Default::default()
        };
        assert!(build_scenario_grid(1, &o, &RunSettings::default()).is_err());
    }

    #[test]
    fn icc_split() {
        assert_eq!(variance_components_from_icc(0.5, 2.0).unwrap(), (1.0, 1.0));
        assert_eq!(variance_components_from_icc(0.0, 1.0).unwrap(), (0.0, 1.0));
        let (t, s) = variance_components_from_icc(0.20, 1.0).unwrap();
        assert!((t - 0.20).abs() < 1e-15 && (s - 0.80).abs() < 1e-15);
        assert!(variance_components_from_icc(1.0, 1.0).is_err());
        assert!(variance_components_from_icc(-0.1, 1.0).is_err());
        assert!(variance_components_from_icc(0.1, 0.0).is_err());
    }

    #[test]
    fn gen_params_reproduce_icc() {
        for level in IccLevel::ALL {
            let g = GenParams::from_icc(&GenerationSettings::default(), level.values()).unwrap();
            let icc = g.icc();
            assert!((icc[0] - level.values()[0]).abs() < 1e-12);
            assert!((icc[1] - level.values()[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn differential_eta_and_targets() {
        let g = build_scenario_grid(
            3,
            &FactorOverrides {
                mechanism: Some(vec!["treatment".into()]),
                eta: Some(vec!["high".into()]),
                nonresponse: Some(vec!["different".into()]),
                ..Default::default()
            },
            &RunSettings::default(),
        )
        .unwrap();
        let s = &g[0];
        assert_eq!(s.eta_per_arm(), [1.5, 3.0]);
        assert_eq!(s.target_pi(), [[0.15, 0.10], [0.35, 0.30]]);
    }
}
