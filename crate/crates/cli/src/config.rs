//! Line-oriented `key = value` suite configuration.

use std::collections::HashSet;
use std::path::PathBuf;

use dqlos_core::framework::{
    DEFAULT_EPSILON, DEFAULT_FRONT_RESOLUTION, DEFAULT_TRAIN_SIZE, DEFAULT_UPDATE_PERIOD,
};
use dqlos_core::problems::BuiltinProblem;
use dqlos_core::state::{DEFAULT_MAX_REPLAY, DEFAULT_REQUIRED_REPLAY};
use dqlos_core::{
    PolicyMode, RunConfig, SelectionPolicy, StateAssessor, TrainHyper,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub problems: Vec<BuiltinProblem>,
    pub policies: Vec<PolicyMode>,
    pub seeds: Vec<u64>,
    /// Decision-space dimension of every problem.
    pub dim: usize,
    pub pop_size: usize,
    pub generations: usize,
    pub out: PathBuf,
    pub host: String,
    pub assessor: StateAssessor,
    pub epsilon: f64,
    pub max_replay: usize,
    pub required_replay: usize,
    pub train_size: usize,
    pub update_period: usize,
    pub hyper: TrainHyper,
    pub front_resolution: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            problems: BuiltinProblem::ALL.to_vec(),
            policies: vec![
                PolicyMode::Drl,
                PolicyMode::Random,
                PolicyMode::Fixed(dqlos_core::OperatorId::Ga),
                PolicyMode::Fixed(dqlos_core::OperatorId::De),
            ],
            seeds: (1..=10).collect(),
            dim: 10,
            pop_size: 40,
            generations: 200,
            out: PathBuf::from("results"),
            host: dqlos_core::Nsga2Host::NAME.to_string(),
            assessor: StateAssessor::Objectives,
            epsilon: DEFAULT_EPSILON,
            max_replay: DEFAULT_MAX_REPLAY,
            required_replay: DEFAULT_REQUIRED_REPLAY,
            train_size: DEFAULT_TRAIN_SIZE,
            update_period: DEFAULT_UPDATE_PERIOD,
            hyper: TrainHyper::default(),
            front_resolution: DEFAULT_FRONT_RESOLUTION,
        }
    }
}

impl SuiteConfig {
    /// The per-run configuration for one policy and seed.
    pub fn run_config(&self, policy: PolicyMode, seed: u64) -> RunConfig {
        RunConfig {
            pop_size: self.pop_size,
            generations: self.generations,
            seed,
            policy: SelectionPolicy::new(policy).with_epsilon(self.epsilon),
            hyper: self.hyper,
            max_replay: self.max_replay,
            required_replay: self.required_replay,
            train_size: self.train_size,
            update_period: self.update_period,
            assessor: self.assessor,
            operator_params: None,
            front_resolution: self.front_resolution,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.problems.is_empty() {
            return invalid("problems list is empty");
        }
        if self.policies.is_empty() {
            return invalid("policies list is empty");
        }
        if self.seeds.is_empty() {
            return invalid("seeds list is empty");
        }
        let distinct: HashSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return invalid("seeds must be distinct");
        }
        if let Some(p) = self.problems.iter().find(|p| dqlos_core::make_problem(p.name(), self.dim).is_err()) {
            return Err(ConfigError::Invalid(format!("{p} cannot be built with dim = {}", self.dim)));
        }
        dqlos_core::host::make_host(&self.host).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.run_config(PolicyMode::Drl, 0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn list<T, E: std::fmt::Display>(value: &str, parse: impl Fn(&str) -> Result<T, E>) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn scalar<T: std::str::FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| format!("`{value}`: {e}"))
}

fn apply(cfg: &mut SuiteConfig, key: &str, value: &str) -> Result<(), String> {
    match key {
        "problems" => cfg.problems = list(value, str::parse)?,
        "policies" => cfg.policies = list(value, str::parse)?,
        "seeds" => cfg.seeds = list(value, str::parse::<u64>)?,
        "dim" => cfg.dim = scalar(value)?,
        "pop" => cfg.pop_size = scalar(value)?,
        "gens" => cfg.generations = scalar(value)?,
        "out" => cfg.out = PathBuf::from(value),
        "host" => cfg.host = value.to_string(),
        "assessor" => cfg.assessor = scalar(value)?,
        "epsilon" => {
            let e: f64 = scalar(value)?;
            if !(0.0..=1.0).contains(&e) {
                return Err(format!("epsilon {e} outside [0, 1]"));
            }
            cfg.epsilon = e;
        }
        "gamma" => cfg.hyper.gamma = scalar(value)?,
        "ms_ep" => cfg.max_replay = scalar(value)?,
        "rs_ep" => cfg.required_replay = scalar(value)?,
        "s_tr" => cfg.train_size = scalar(value)?,
        "update_period" => cfg.update_period = scalar(value)?,
        "learning_rate" => cfg.hyper.learning_rate = scalar(value)?,
        "lr_decay" => cfg.hyper.lr_decay = scalar(value)?,
        "max_iters" => cfg.hyper.max_iters = scalar(value)?,
        "front_resolution" => cfg.front_resolution = scalar(value)?,
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

/// Parses a configuration; omitted keys keep their defaults.
pub fn parse_config(text: &str) -> Result<SuiteConfig, ConfigError> {
    let mut cfg = SuiteConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError::Line {
            line: line_no,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected `key = value`".into()))?;
        apply(&mut cfg, key.trim(), value.trim()).map_err(err)?;
        // lists that parse to nothing are reported where they appear
        if matches!(key.trim(), "problems" | "policies" | "seeds")
            && (cfg.problems.is_empty() || cfg.policies.is_empty() || cfg.seeds.is_empty())
        {
            return Err(err(format!("empty `{}` list", key.trim())));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
