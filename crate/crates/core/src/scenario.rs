//! Scenario configuration files and grid expansion.
//!
//! A scenario file is TOML with one `[[scenario]]` section per scenario.
//! `lambda_1`/`lambda_2` and `gamma_1`/`gamma_2` are equal-length lists
//! zipped positionally into pairs; the pair lists, discount factors, sigmas,
//! and exploration policies are crossed into the full cell grid. Every cell
//! receives its own seed derived from the scenario seed and the cell
//! ordinal.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::exploration::{
    BoltzmannSchedules, EpsilonSchedule, PolicyConfig, RationalDecay, UcbConstants,
};
use crate::model::{FirmParams, ModelError, SharingRule};
use crate::runner::ScenarioSpec;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("no scenarios defined")]
    Empty,
    #[error("duplicate scenario name {0:?}")]
    DuplicateName(String),
    #[error("scenario {name}: {field} must not be empty")]
    EmptyList { name: String, field: &'static str },
    #[error("scenario {name}: lambda_1 and lambda_2 lists must pair positionally ({len_1} vs {len_2} entries)")]
    LambdaPairMismatch { name: String, len_1: usize, len_2: usize },
    #[error("scenario {name}: gamma_1 and gamma_2 lists must pair positionally ({len_1} vs {len_2} entries)")]
    GammaPairMismatch { name: String, len_1: usize, len_2: usize },
    #[error(
        "scenario {name}: unknown exploration policy {value:?}; expected boltzmann/bm, egreedy/greedy, or ucb"
    )]
    UnknownPolicy { name: String, value: String },
    #[error("scenario {name}: {source}")]
    Model {
        name: String,
        #[source]
        source: ModelError,
    },
}

fn default_b() -> f64 {
    12.0
}
fn default_theta_s() -> f64 {
    60.0
}
fn default_theta_b() -> f64 {
    100.0
}
fn default_lambda_s() -> f64 {
    1.0
}
fn default_sigma() -> Vec<f64> {
    vec![0.0]
}
fn default_policy() -> Vec<String> {
    vec!["boltzmann".to_string()]
}
fn default_n_runs() -> u32 {
    10_000
}
fn default_t_learn() -> u32 {
    2000
}
fn default_t_eval() -> u32 {
    100
}
fn default_learning_rate() -> f64 {
    0.5
}
fn default_beta_seller() -> [f64; 2] {
    [49_975.0, 498.75]
}
fn default_beta_buyer() -> [f64; 2] {
    [24_987.5, 498.75]
}
fn default_ucb_seller() -> f64 {
    60.0
}
fn default_ucb_buyer() -> f64 {
    30.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(rename = "scenario")]
    scenarios: Vec<RawScenario>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    #[serde(default = "default_b")]
    b: f64,
    #[serde(default = "default_theta_s")]
    e_theta_s: f64,
    #[serde(default = "default_theta_b")]
    e_theta_1: f64,
    #[serde(default = "default_theta_b")]
    e_theta_2: f64,
    #[serde(default = "default_lambda_s")]
    lambda_s: f64,
    lambda_1: Vec<f64>,
    lambda_2: Vec<f64>,
    gamma_1: Vec<f64>,
    gamma_2: Vec<f64>,
    discount: Vec<f64>,
    #[serde(default = "default_sigma")]
    sigma: Vec<f64>,
    #[serde(default = "default_policy")]
    exploration: Vec<String>,
    #[serde(default = "default_n_runs")]
    n_runs: u32,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_t_learn")]
    t_learn: u32,
    #[serde(default = "default_t_eval")]
    t_eval: u32,
    #[serde(default = "default_learning_rate")]
    learning_rate: f64,
    #[serde(default = "default_beta_seller")]
    beta_seller: [f64; 2],
    #[serde(default = "default_beta_buyer")]
    beta_buyer: [f64; 2],
    #[serde(default = "default_ucb_seller")]
    ucb_c_seller: f64,
    #[serde(default = "default_ucb_buyer")]
    ucb_c_buyer: f64,
}

/// One validated (still unexpanded) scenario section.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDef {
    pub name: String,
    pub b: f64,
    pub e_theta_s: f64,
    pub e_theta_1: f64,
    pub e_theta_2: f64,
    pub lambda_s: f64,
    /// Positionally paired with `lambda_2`.
    pub lambda_1: Vec<f64>,
    pub lambda_2: Vec<f64>,
    /// Positionally paired with `gamma_2`.
    pub gamma_1: Vec<f64>,
    pub gamma_2: Vec<f64>,
    pub discount: Vec<f64>,
    pub sigma: Vec<f64>,
    pub exploration: Vec<String>,
    pub n_runs: u32,
    pub seed: u64,
    pub t_learn: u32,
    pub t_eval: u32,
    pub learning_rate: f64,
    pub beta_seller: [f64; 2],
    pub beta_buyer: [f64; 2],
    pub ucb_c_seller: f64,
    pub ucb_c_buyer: f64,
}

/// Everything identifying one cell of the expanded grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey {
    pub scenario: String,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub discount: f64,
    pub sigma: f64,
    pub policy: String,
}

/// One expanded scenario: aligned cell keys and runnable specs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGrid {
    pub name: String,
    pub keys: Vec<CellKey>,
    pub specs: Vec<ScenarioSpec>,
}

impl ScenarioGrid {
    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }
}

fn canonical_policy(name: &str, raw: &str) -> Result<&'static str, ConfigError> {
    match raw.to_ascii_lowercase().as_str() {
        "boltzmann" | "bm" | "softmax" => Ok("boltzmann"),
        "egreedy" | "greedy" | "epsilon-greedy" | "epsilon_greedy" => Ok("egreedy"),
        "ucb" => Ok("ucb"),
        _ => Err(ConfigError::UnknownPolicy { name: name.to_string(), value: raw.to_string() }),
    }
}

impl ScenarioDef {
    fn from_raw(raw: RawScenario) -> Result<Self, ConfigError> {
        let name = raw.name.clone();
        for (field, len) in [
            ("lambda_1", raw.lambda_1.len()),
            ("gamma_1", raw.gamma_1.len()),
            ("discount", raw.discount.len()),
            ("sigma", raw.sigma.len()),
            ("exploration", raw.exploration.len()),
        ] {
            if len == 0 {
                return Err(ConfigError::EmptyList { name, field });
            }
        }
        if raw.lambda_1.len() != raw.lambda_2.len() {
            return Err(ConfigError::LambdaPairMismatch {
                name,
                len_1: raw.lambda_1.len(),
                len_2: raw.lambda_2.len(),
            });
        }
        if raw.gamma_1.len() != raw.gamma_2.len() {
            return Err(ConfigError::GammaPairMismatch {
                name,
                len_1: raw.gamma_1.len(),
                len_2: raw.gamma_2.len(),
            });
        }
        for policy in &raw.exploration {
            canonical_policy(&name, policy)?;
        }
        Ok(Self {
            name: raw.name,
            b: raw.b,
            e_theta_s: raw.e_theta_s,
            e_theta_1: raw.e_theta_1,
            e_theta_2: raw.e_theta_2,
            lambda_s: raw.lambda_s,
            lambda_1: raw.lambda_1,
            lambda_2: raw.lambda_2,
            gamma_1: raw.gamma_1,
            gamma_2: raw.gamma_2,
            discount: raw.discount,
            sigma: raw.sigma,
            exploration: raw.exploration,
            n_runs: raw.n_runs,
            seed: raw.seed,
            t_learn: raw.t_learn,
            t_eval: raw.t_eval,
            learning_rate: raw.learning_rate,
            beta_seller: raw.beta_seller,
            beta_buyer: raw.beta_buyer,
            ucb_c_seller: raw.ucb_c_seller,
            ucb_c_buyer: raw.ucb_c_buyer,
        })
    }

    fn policy_config(&self, canonical: &str) -> PolicyConfig {
        match canonical {
            "boltzmann" => {
                let buyer = RationalDecay { scale: self.beta_buyer[0], offset: self.beta_buyer[1] };
                PolicyConfig::Boltzmann(BoltzmannSchedules {
                    seller: RationalDecay { scale: self.beta_seller[0], offset: self.beta_seller[1] },
                    first_buyer: buyer,
                    second_buyer: buyer,
                })
            }
            "egreedy" => PolicyConfig::EpsilonGreedy(EpsilonSchedule { t_learn: self.t_learn }),
            "ucb" => PolicyConfig::Ucb(UcbConstants {
                seller: self.ucb_c_seller,
                first_buyer: self.ucb_c_buyer,
                second_buyer: self.ucb_c_buyer,
            }),
            _ => unreachable!("policy canonicalized at parse time"),
        }
    }

    /// Cross lambda pairs, gamma pairs, discounts, sigmas, and policies into
    /// the full cell grid. Cell seeds are `seed + ordinal`.
    pub fn expand(&self) -> Result<ScenarioGrid, ConfigError> {
        let mut keys = Vec::new();
        let mut specs = Vec::new();
        let mut ordinal = 0u64;
        for (&lambda_1, &lambda_2) in self.lambda_1.iter().zip(&self.lambda_2) {
            for (&gamma_1, &gamma_2) in self.gamma_1.iter().zip(&self.gamma_2) {
                for &discount in &self.discount {
                    for &sigma in &self.sigma {
                        for policy_name in &self.exploration {
                            let canonical = canonical_policy(&self.name, policy_name)?;
                            let params = FirmParams::new(
                                self.b,
                                self.e_theta_s,
                                self.e_theta_1,
                                self.e_theta_2,
                                sigma,
                                self.lambda_s,
                                lambda_1,
                                lambda_2,
                            )
                            .map_err(|source| ConfigError::Model { name: self.name.clone(), source })?;
                            let rule = SharingRule::new(gamma_1, gamma_2)
                                .map_err(|source| ConfigError::Model { name: self.name.clone(), source })?;
                            let mut spec =
                                ScenarioSpec::new(params, rule, discount, self.policy_config(canonical));
                            spec.t_learn = self.t_learn;
                            spec.t_eval = self.t_eval;
                            spec.learning_rate = self.learning_rate;
                            spec.n_runs = self.n_runs;
                            spec.base_seed = self.seed.wrapping_add(ordinal);
                            keys.push(CellKey {
                                scenario: self.name.clone(),
                                lambda_1,
                                lambda_2,
                                gamma_1,
                                gamma_2,
                                discount,
                                sigma,
                                policy: canonical.to_string(),
                            });
                            specs.push(spec);
                            ordinal += 1;
                        }
                    }
                }
            }
        }
        Ok(ScenarioGrid { name: self.name.clone(), keys, specs })
    }
}

/// Parse a scenario file's text into validated scenario definitions.
pub fn parse_scenarios(text: &str) -> Result<Vec<ScenarioDef>, ConfigError> {
    let raw: RawFile = toml::from_str(text)?;
    if raw.scenarios.is_empty() {
        return Err(ConfigError::Empty);
    }
    let mut defs = Vec::with_capacity(raw.scenarios.len());
    for raw_scenario in raw.scenarios {
        let def = ScenarioDef::from_raw(raw_scenario)?;
        if defs.iter().any(|d: &ScenarioDef| d.name == def.name) {
            return Err(ConfigError::DuplicateName(def.name));
        }
        defs.push(def);
    }
    Ok(defs)
}

/// Read and parse a scenario file.
pub fn load_scenario_file(path: &Path) -> Result<Vec<ScenarioDef>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_scenarios(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [[scenario]]
        name = "I"
        lambda_1 = [0.5]
        lambda_2 = [0.5]
        gamma_1 = [0.5]
        gamma_2 = [0.5]
        discount = [0.0, 0.9]
        seed = 7
    "#;

    #[test]
    fn minimal_scenario_round_trip() {
        let defs = parse_scenarios(MINIMAL).unwrap();
        assert_eq!(defs.len(), 1);
        let def = &defs[0];
        assert_eq!(def.b, 12.0);
        assert_eq!(def.n_runs, 10_000);
        assert_eq!(def.t_learn, 2000);

        let grid = def.expand().unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid.keys[0].discount, 0.0);
        assert_eq!(grid.keys[1].discount, 0.9);
        assert_eq!(grid.specs[0].base_seed, 7);
        assert_eq!(grid.specs[1].base_seed, 8);
        assert_eq!(grid.keys[0].policy, "boltzmann");
    }

    #[test]
    fn unknown_key_is_named_in_the_error() {
        let text = MINIMAL.replace("seed = 7", "sede = 7");
        let err = parse_scenarios(&text).unwrap_err();
        assert!(err.to_string().contains("sede"), "error was: {err}");
    }

    #[test]
    fn paired_list_lengths_are_enforced() {
        let text = MINIMAL.replace("lambda_2 = [0.5]", "lambda_2 = [0.5, 0.4]");
        assert!(matches!(parse_scenarios(&text).unwrap_err(), ConfigError::LambdaPairMismatch { .. }));
        let text = MINIMAL.replace("gamma_2 = [0.5]", "gamma_2 = []");
        assert!(matches!(parse_scenarios(&text).unwrap_err(), ConfigError::GammaPairMismatch { .. }));
    }

    #[test]
    fn policy_aliases_are_accepted() {
        let text = MINIMAL.replace(
            "discount = [0.0, 0.9]",
            "discount = [0.0]\nexploration = [\"BM\", \"Greedy\", \"UCB\"]",
        );
        let defs = parse_scenarios(&text).unwrap();
        let grid = defs[0].expand().unwrap();
        let policies: Vec<&str> = grid.keys.iter().map(|k| k.policy.as_str()).collect();
        assert_eq!(policies, ["boltzmann", "egreedy", "ucb"]);
        assert!(matches!(grid.specs[1].policy, PolicyConfig::EpsilonGreedy(s) if s.t_learn == 2000));
    }

    #[test]
    fn unknown_policy_is_rejected() {
        let text = MINIMAL.replace("discount = [0.0, 0.9]", "discount = [0.0]\nexploration = [\"sarsa\"]");
        assert!(matches!(parse_scenarios(&text).unwrap_err(), ConfigError::UnknownPolicy { .. }));
    }

    #[test]
    fn full_symmetric_sweep_expands_to_the_expected_cell_count() {
        // Two lambda pairs, seven gamma pairs, ten discounts: 140 cells.
        let text = r#"
            [[scenario]]
            name = "III"
            lambda_1 = [0.5, 0.222]
            lambda_2 = [0.5, 0.222]
            gamma_1 = [0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55]
            gamma_2 = [0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55]
            discount = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
        "#;
        let defs = parse_scenarios(text).unwrap();
        let grid = defs[0].expand().unwrap();
        assert_eq!(grid.len(), 140);
        // Every cell gets a distinct seed.
        let mut seeds: Vec<u64> = grid.specs.iter().map(|s| s.base_seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 140);
    }

    #[test]
    fn invalid_economics_are_reported_with_the_scenario_name() {
        let text = MINIMAL.replace("lambda_1 = [0.5]", "lambda_1 = [-0.5]");
        let defs = parse_scenarios(&text).unwrap();
        let err = defs[0].expand().unwrap_err();
        assert!(matches!(err, ConfigError::Model { .. }));
        assert!(err.to_string().contains('I'));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let text = format!("{MINIMAL}\n{}", MINIMAL.replace("seed = 7", "seed = 9"));
        assert!(matches!(parse_scenarios(&text).unwrap_err(), ConfigError::DuplicateName(_)));
    }
}
