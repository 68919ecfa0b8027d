//! Flat `key=value` run configuration.
//!
//! Scenario defaults depend on the scenario, so assignments are collected in
//! order first and applied on top of `ScenarioSpec::new(scenario, model)`.

use std::path::{Path, PathBuf};

use irc_core::potentials::ModelId;
use irc_core::scenarios::{ScenarioId, ScenarioSpec};

use crate::CliError;

#[derive(Debug, Default, Clone)]
pub struct RunConfig {
    assignments: Vec<(String, String)>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = split_assignment(line).map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
            cfg.push(k, v)?;
        }
        Ok(cfg)
    }

    pub fn push(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "out" => self.out = Some(PathBuf::from(value)),
            "summary" => self.summary = Some(PathBuf::from(value)),
            _ => {
                // reject unknown keys up front so the message names the source line
                ScenarioSpec::new(ScenarioId::Belt, ModelId::Lagged).set(key, value)?;
                self.assignments.push((key.to_string(), value.to_string()));
            }
        }
        Ok(())
    }

    pub fn push_assignment(&mut self, text: &str) -> Result<(), CliError> {
        let (k, v) = split_assignment(text).map_err(CliError::Config)?;
        self.push(k, v)
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.assignments.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Effective spec with `default_scenario` used when no scenario is given.
    pub fn spec(&self, default_scenario: ScenarioId) -> Result<ScenarioSpec, CliError> {
        let scenario = match self.last("scenario") {
            Some(s) => s.parse()?,
            None => default_scenario,
        };
        let model = match self.last("model") {
            Some(s) => s.parse()?,
            None => ModelId::Lagged,
        };
        let mut spec = ScenarioSpec::new(scenario, model);
        for (k, v) in &self.assignments {
            spec.set(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn split_assignment(text: &str) -> Result<(&str, &str), String> {
    let (k, v) = text.split_once('=').ok_or_else(|| format!("expected key=value, got '{text}'"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err(format!("empty key in '{text}'"));
    }
    Ok((k, v))
}
