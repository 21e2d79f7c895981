use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use splitflow::{make_model, ModelPreset, PartitionSpec, Reference, SchemeKind, SolverOptions};

use crate::Failure;

/// Which audits a run performs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Audits {
    pub edb: bool,
    pub remainder: bool,
    pub decomposition: bool,
    pub qye: bool,
}

impl Default for Audits {
    fn default() -> Self {
        Audits {
            edb: true,
            remainder: true,
            decomposition: true,
            qye: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Random pairs in the first probe round; the second round doubles it.
    pub samples: usize,
    /// Interior nodes of the witness grid.
    pub witness_m: usize,
    pub witness_amplitude: f64,
    pub witness_n: Vec<usize>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            samples: 2000,
            witness_m: 64,
            witness_amplitude: 1e6,
            witness_n: vec![4, 8, 16, 32, 64],
        }
    }
}

/// One experiment. Every field can come from the config file; command-line
/// flags override it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    pub overrides: serde_json::Value,
    pub scheme: Option<SchemeKind>,
    pub steps: Option<usize>,
    pub nodes: Option<Vec<f64>>,
    pub study: Option<Vec<usize>>,
    pub reference: Option<Reference>,
    pub inner_steps: usize,
    pub tol: f64,
    pub variational: bool,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
    pub audits: Audits,
    pub probe: ProbeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        RunConfig {
            model: "counterexample".into(),
            overrides: serde_json::Value::Object(Default::default()),
            scheme: None,
            steps: None,
            nodes: None,
            study: None,
            reference: None,
            inner_steps: o.inner_steps,
            tol: o.tol,
            variational: false,
            out: None,
            jobs: 1,
            seed: 0,
            audits: Audits::default(),
            probe: ProbeConfig::default(),
        }
    }
}

pub const DEFAULT_STEPS: usize = 64;
pub const DEFAULT_ROOT: &str = "splitflow-out";

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            inner_steps: self.inner_steps,
            with_variational: self.variational,
        }
    }

    pub fn partition_spec(&self) -> PartitionSpec {
        match &self.nodes {
            Some(n) => PartitionSpec::Nodes(n.clone()),
            None => PartitionSpec::Uniform {
                steps: self.steps.unwrap_or(DEFAULT_STEPS),
            },
        }
    }

    /// Builds the preset and fills every defaulted field, so that the echo
    /// records what actually ran.
    pub fn resolve(mut self) -> Result<(Self, ModelPreset), Failure> {
        let preset = make_model(&self.model, &self.overrides).map_err(Failure::from)?;
        if self.scheme.is_none() {
            self.scheme = Some(preset.default_scheme);
        }
        let scheme = self.scheme.expect("set above");
        let block_model = preset.system.block_layout().is_some();
        if scheme != SchemeKind::Effective && scheme.is_block() != block_model {
            return Err(Failure::Config(format!(
                "scheme '{}' does not fit model '{}'",
                scheme.name(),
                preset.name.name()
            )));
        }
        if self.nodes.is_some() && self.steps.is_some() {
            return Err(Failure::Config("give either steps or nodes, not both".into()));
        }
        if self.nodes.is_none() && self.steps.is_none() {
            self.steps = Some(DEFAULT_STEPS);
        }
        if self.study.is_some() && self.reference.is_none() {
            self.reference = Some(preset.reference);
        }
        if self.jobs == 0 {
            return Err(Failure::Config("jobs must be at least 1".into()));
        }
        if self.probe.samples == 0 {
            return Err(Failure::Config("probe samples must be at least 1".into()));
        }
        Ok((self, preset))
    }

    /// `--out`, else `$SPLITFLOW_OUT/<label>`, else `splitflow-out/<label>`.
    pub fn out_dir(&self, label: &str) -> PathBuf {
        if let Some(o) = &self.out {
            return o.clone();
        }
        let root = std::env::var_os("SPLITFLOW_OUT")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT));
        root.join(label)
    }
}

/// Parses `key=value` where the value is JSON, falling back to a string.
pub fn parse_override(s: &str) -> Result<(String, serde_json::Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| serde_json::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"modle": "x"}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"audits": {"edb": true, "x": 1}}"#).is_err());
    }

    #[test]
    fn resolve_fills_defaults() {
        let (c, p) = RunConfig::default().resolve().unwrap();
        assert_eq!(c.scheme, Some(SchemeKind::Split));
        assert_eq!(c.steps, Some(DEFAULT_STEPS));
        assert_eq!(p.system.dim(), 2);
        let c = RunConfig {
            model: "visco-plasticity-1d".into(),
            scheme: Some(SchemeKind::Amm),
            ..Default::default()
        };
        assert!(matches!(c.resolve(), Err(Failure::Config(_))));
        let c = RunConfig {
            steps: Some(4),
            nodes: Some(vec![0.0, 1.5]),
            ..Default::default()
        };
        assert!(matches!(c.resolve(), Err(Failure::Config(_))));
    }

    #[test]
    fn overrides_parse_as_json() {
        assert_eq!(parse_override("p=3").unwrap(), ("p".into(), serde_json::json!(3)));
        assert_eq!(parse_override("u0=[1,2]").unwrap().1, serde_json::json!([1, 2]));
        assert_eq!(parse_override("name=abc").unwrap().1, serde_json::json!("abc"));
        assert!(parse_override("p").is_err());
    }
}
