//! Run configuration: one TOML document describing a reproducible run.
//!
//! ```toml
//! label = "gauss-to-gauss"
//! output_dir = "runs/gauss"
//!
//! [source]
//! family = "isotropic_gaussian"   # or two_moons, two_circles
//! n = 500
//! mean = [0.0, 0.0]
//! variance = 1.0
//! seed = 1
//!
//! [target]
//! family = "isotropic_gaussian"
//! n = 500
//! mean = [5.0, 5.0]
//! seed = 2
//!
//! [train]
//! epochs = 3000
//! batch_size = 500          # omit for full batch
//! inv_lambda = 1e-6
//! seed = 0
//! shuffle = true
//! cost = "squared_euclidean"
//! kernel = { family = "gaussian", alpha = 1.0 }
//! net = { hidden = [64], activation = "relu" }
//! adam = { lr = 1e-4, beta1 = 0.9, beta2 = 0.999, eps = 1e-8 }
//!
//! [evaluation]
//! test_size = 10000
//! source_seed = 101          # default: derived from the training seed
//! target_seed = 102
//!
//! [compare]
//! sizes = [200, 1000, 2000]
//! methods = ["sinkhorn", "mmd"]
//! epsilon_scale = 0.1        # epsilon = scale * median cost, unless `epsilon` is set
//! max_iters = 10000
//! tol = 1e-9
//! log_domain = true
//! max_points = 16384
//! mmd_epochs = 3000          # default: train.epochs
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::train::TrainConfig;

/// Documentation of every key, printed by the CLI `--help`.
pub const CONFIG_KEYS_HELP: &str = "\
CONFIG KEYS (TOML):
  label                      run name (default \"run\")
  output_dir                 directory for artifacts (default \"out\")
  [source], [target]         datasets:
    family                   two_moons | two_circles | isotropic_gaussian
    n                        number of points
    seed                     RNG seed
    noise                    noise SD for moons/circles (default 0.05)
    factor                   inner circle radius for two_circles (default 0.5)
    mean                     gaussian mean vector (default [0, 0])
    variance                 gaussian per-coordinate variance (default 1)
  [train]
    epochs                   passes over the data (default 3000)
    batch_size               points per step; omit for full batch
    inv_lambda               1/lambda, weight on transport cost (default 1e-6)
    seed                     init and shuffle seed (default 0)
    shuffle                  shuffle each epoch (default true)
    cost                     squared_euclidean
    kernel.family            gaussian | matern
    kernel.alpha             gaussian exponent (default kernel: gaussian, alpha 1)
    kernel.order             matern: half | three_halves | five_halves
    kernel.lengthscale       matern lengthscale
    net.hidden               hidden widths (default [64])
    net.activation           relu | tanh | identity (default relu)
    adam.lr                  learning rate (default 1e-4)
    adam.beta1, adam.beta2   moment decays (default 0.9, 0.999)
    adam.eps                 denominator offset (default 1e-8)
  [evaluation]
    test_size                held-out points per side (default 10000)
    source_seed, target_seed held-out seeds (default derived, never equal to training seeds)
  [compare]
    sizes                    data sizes (default [200, 1000, 2000])
    methods                  subset of [\"sinkhorn\", \"mmd\"]
    epsilon                  fixed Sinkhorn regularization
    epsilon_scale            epsilon = scale * median cost when epsilon unset (default 0.1)
    max_iters, tol           Sinkhorn stopping (default 10000, 1e-9)
    log_domain               log-domain iterations (default true)
    max_points               cap on size per side (default 16384)
    mmd_epochs               training epochs for the mmd method (default train.epochs)

Any scalar key can be overridden with --set key.path=value.";

fn default_label() -> String {
    "run".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub test_size: usize,
    pub source_seed: Option<u64>,
    pub target_seed: Option<u64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            test_size: 10_000,
            source_seed: None,
            target_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mmd,
    Sinkhorn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mmd => "mmd",
            Method::Sinkhorn => "sinkhorn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub sizes: Vec<usize>,
    pub methods: Vec<Method>,
    pub epsilon: Option<f64>,
    pub epsilon_scale: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub log_domain: bool,
    pub max_points: usize,
    pub mmd_epochs: Option<usize>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            sizes: vec![200, 1000, 2000],
            methods: vec![Method::Sinkhorn, Method::Mmd],
            epsilon: None,
            epsilon_scale: 0.1,
            max_iters: 10_000,
            tol: 1e-9,
            log_domain: true,
            max_points: 16_384,
            mmd_epochs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub source: DatasetSpec,
    pub target: DatasetSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub evaluation: EvalConfig,
    #[serde(default)]
    pub compare: CompareConfig,
}

/// Parses `value` as a TOML value, falling back to a bare string.
fn parse_override_value(value: &str) -> toml::Value {
    let doc = format!("v = {value}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(value.into())),
        Err(_) => toml::Value::String(value.into()),
    }
}

fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::config(key, "empty override key"))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(leaf.to_string(), parse_override_value(value));
    Ok(())
}

impl RunConfig {
    /// Parses a TOML document, applying `key.path=value` overrides first.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<document>", e.to_string()))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let merged = toml::to_string(&table)
            .map_err(|e| Error::config("<document>", e.to_string()))?;
        let config: RunConfig = toml::from_str(&merged).map_err(|e: toml::de::Error| {
            Error::config("<document>", e.message().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config(
                "<file>",
                format!("cannot read config {}: {e}", path.display()),
            )
        })?;
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.source
            .validate()
            .map_err(|e| Error::config("source", e.to_string()))?;
        self.target
            .validate()
            .map_err(|e| Error::config("target", e.to_string()))?;
        if self.source.dim() != self.target.dim() {
            return Err(Error::config(
                "target",
                format!(
                    "dimension {} differs from source dimension {}",
                    self.target.dim(),
                    self.source.dim()
                ),
            ));
        }
        self.train.validate()?;
        if self.evaluation.test_size < 2 {
            return Err(Error::config("evaluation.test_size", "must be at least 2"));
        }
        let (s, t) = self.test_seeds();
        let train_seeds = [self.source.seed(), self.target.seed()];
        if train_seeds.contains(&s) || train_seeds.contains(&t) {
            return Err(Error::config(
                "evaluation",
                "held-out seeds must differ from the training data seeds",
            ));
        }
        let c = &self.compare;
        if c.sizes.iter().any(|&n| n < 2) {
            return Err(Error::config("compare.sizes", "sizes must be at least 2"));
        }
        if let Some(eps) = c.epsilon {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::config("compare.epsilon", "must be positive"));
            }
        }
        if !(c.epsilon_scale > 0.0 && c.epsilon_scale.is_finite()) {
            return Err(Error::config("compare.epsilon_scale", "must be positive"));
        }
        if !(c.tol > 0.0) {
            return Err(Error::config("compare.tol", "must be positive"));
        }
        Ok(())
    }

    /// Seeds for the held-out evaluation sets.
    pub fn test_seeds(&self) -> (u64, u64) {
        const SPLIT: u64 = 0x9E37_79B9_7F4A_7C15;
        (
            self.evaluation
                .source_seed
                .unwrap_or(self.source.seed() ^ SPLIT),
            self.evaluation
                .target_seed
                .unwrap_or(self.target.seed() ^ SPLIT.rotate_left(17)),
        )
    }

    pub fn source_test_spec(&self) -> DatasetSpec {
        self.source
            .with_n_and_seed(self.evaluation.test_size, self.test_seeds().0)
    }

    pub fn target_test_spec(&self) -> DatasetSpec {
        self.target
            .with_n_and_seed(self.evaluation.test_size, self.test_seeds().1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[source]
family = "isotropic_gaussian"
n = 20
seed = 1

[target]
family = "isotropic_gaussian"
n = 20
mean = [5.0, 5.0]
seed = 2
"#;

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::from_toml(MINIMAL, &[]).unwrap();
        assert_eq!(c.train.epochs, 3000);
        assert_eq!(c.train.adam.lr, 1e-4);
        assert_eq!(c.train.inv_lambda, 1e-6);
        assert_eq!(c.train.net.hidden, vec![64]);
        assert_eq!(c.evaluation.test_size, 10_000);
        let (s, t) = c.test_seeds();
        assert!(s != 1 && s != 2 && t != 1 && t != 2);
    }

    #[test]
    fn overrides_apply() {
        let o = vec![
            ("train.epochs".to_string(), "7".to_string()),
            ("train.kernel.family".to_string(), "gaussian".to_string()),
            ("train.kernel.alpha".to_string(), "0.5".to_string()),
            ("label".to_string(), "quick".to_string()),
        ];
        let c = RunConfig::from_toml(MINIMAL, &o).unwrap();
        assert_eq!(c.train.epochs, 7);
        assert_eq!(c.label, "quick");
        assert_eq!(
            c.train.kernel,
            crate::kernel::KernelSpec::Gaussian { alpha: 0.5 }
        );
    }

    #[test]
    fn errors_name_fields() {
        let bad = MINIMAL.replace("n = 20\nseed = 1", "n = 20\nseed = 1\nbogus = 3");
        let e = RunConfig::from_toml(&bad, &[]).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let o = vec![("train.adam.lr".to_string(), "0".to_string())];
        match RunConfig::from_toml(MINIMAL, &o).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "train.adam"),
            other => panic!("{other:?}"),
        }
        let clash = vec![("evaluation.source_seed".to_string(), "2".to_string())];
        assert!(RunConfig::from_toml(MINIMAL, &clash).is_err());
    }

    #[test]
    fn serialized_config_reparses() {
        let c = RunConfig::from_toml(MINIMAL, &[]).unwrap();
        assert_eq!(RunConfig::from_toml(&c.to_toml(), &[]).unwrap(), c);
    }
}
