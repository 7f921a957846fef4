//! JSON configuration files.
//!
//! A file is one object. The sweep parameters sit at the top level; the
//! optional `solve`, `check`, `thresholds` and `validate` objects configure
//! the matching subcommands. Unknown keys anywhere are rejected.

use std::path::Path;

use lasso_lab::experiment::{EnsembleSpec, ExperimentConfig, StatConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

/// Selects one trial instance for `solve` and `check`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSection {
    /// Dimension; defaults to the first entry of `p_list`.
    pub p: Option<usize>,
    /// Sample-size parameter; defaults to 1.
    pub theta: Option<f64>,
    pub trial: usize,
    /// Overrides the scheduled regularization level.
    pub lambda: Option<f64>,
    pub tol_kkt: Option<f64>,
    pub max_iters: Option<usize>,
}

/// Population constants for `thresholds`. Missing values are computed from
/// the ensemble.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSection {
    pub c_min: Option<f64>,
    pub c_max: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FileConfig {
    pub experiment: ExperimentConfig,
    pub solve: InstanceSection,
    pub check: InstanceSection,
    pub thresholds: ThresholdSection,
    pub validate: StatConfig,
}

fn section<T: for<'de> Deserialize<'de> + Default>(
    obj: &mut Map<String, Value>,
    key: &str,
) -> Result<T, CliError> {
    match obj.remove(key) {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v)
            .map_err(|e| CliError::Usage(format!("invalid `{key}` section: {e}"))),
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Usage(format!("malformed JSON: {e}")))?;
        let Value::Object(mut obj) = value else {
            return Err(CliError::Usage(
                "configuration must be a JSON object".into(),
            ));
        };
        let solve = section(&mut obj, "solve")?;
        let check = section(&mut obj, "check")?;
        let thresholds = section(&mut obj, "thresholds")?;
        let validate_has_ensemble = obj
            .get("validate")
            .and_then(Value::as_object)
            .is_some_and(|v| v.contains_key("ensemble"));
        let mut validate: StatConfig = section(&mut obj, "validate")?;
        let experiment: ExperimentConfig = serde_json::from_value(Value::Object(obj))
            .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
        if !validate_has_ensemble {
            validate.ensemble = experiment.ensemble.clone();
        }
        Ok(Self {
            experiment,
            solve,
            check,
            thresholds,
            validate,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Short label for an ensemble.
pub fn ensemble_label(e: &EnsembleSpec) -> String {
    match e {
        EnsembleSpec::Identity => "identity".into(),
        EnsembleSpec::Toeplitz { rho } => format!("toeplitz(rho={rho})"),
        EnsembleSpec::Custom { matrix } => format!("custom({0}x{0})", matrix.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lasso_lab::ensemble::Regime;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = FileConfig::parse("{}").unwrap();
        assert_eq!(cfg, FileConfig::default());
    }

    #[test]
    fn sections_and_top_level() {
        let cfg = FileConfig::parse(
            r#"{"p_list":[32],"regime":"linear","alpha":0.1,
                "ensemble":{"kind":"toeplitz","rho":0.1},
                "solve":{"theta":2.0,"trial":3},
                "thresholds":{"epsilon":0.5},
                "validate":{"reps":100}}"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment.p_list, vec![32]);
        assert_eq!(cfg.experiment.regime, Regime::Linear);
        assert_eq!(cfg.solve.theta, Some(2.0));
        assert_eq!(cfg.solve.trial, 3);
        assert_eq!(cfg.thresholds.epsilon, Some(0.5));
        assert_eq!(cfg.validate.reps, 100);
        assert_eq!(cfg.validate.ensemble, EnsembleSpec::Toeplitz { rho: 0.1 });
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"p_lsit":[32]}"#,
            r#"{"solve":{"thetta":1.0}}"#,
            r#"{"validate":{"n":10,"extra":1}}"#,
            r#"{"ensemble":{"kind":"toeplitz","rho":0.1,"q":1}}"#,
            r#"{"ensemble":{"kind":"banded"}}"#,
            r#"[1,2]"#,
            r#"{"trials":"#,
        ] {
            assert!(
                matches!(FileConfig::parse(text), Err(CliError::Usage(_))),
                "{text}"
            );
        }
    }
}
