//! Layered run configuration.
//!
//! Three layers, later wins: built-in defaults, a TOML file, explicit flag
//! overrides. The file may set any subset of keys; unset keys keep the layer
//! below. Flags arrive as an [`Overrides`] value so precedence is testable
//! without a command line.

use std::path::Path;

use thiserror::Error;
use toml::Value;

use crate::encoder::EncoderConfig;
use crate::graph::GraphVariant;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("config {path} does not describe a training run: {source}")]
    Shape {
        path: String,
        source: toml::de::Error,
    },
    #[error("unknown graph variant {0:?}; expected full, no-anaphor, or random-replace")]
    BadVariant(String),
}

/// Desk-scale starting point; `train` overwrites vocabulary and relation
/// counts from the corpus, so the placeholders here are never load-bearing.
pub fn default_train_config() -> TrainConfig {
    let encoder = EncoderConfig {
        vocab_size: 1,
        hidden: 64,
        layers: 1,
        heads: 2,
        ff_width: 128,
        max_len: 512,
        dropout: 0.1,
        attn_layers: 1,
    };
    TrainConfig::with_model(ModelConfig::with_encoder(encoder, 1))
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Table(b), Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults overlaid with the file's keys. `None` returns plain defaults.
pub fn load_train_config(path: Option<&Path>) -> Result<TrainConfig, ConfigError> {
    let mut value = Value::try_from(default_train_config()).expect("defaults serialize");
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let over: Value = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })?;
        merge(&mut value, over);
        value
            .try_into()
            .map_err(|source| ConfigError::Shape {
                path: path.display().to_string(),
                source,
            })
    } else {
        Ok(value.try_into().expect("defaults deserialize"))
    }
}

pub fn parse_graph_variant(s: &str) -> Result<GraphVariant, ConfigError> {
    match s {
        "full" => Ok(GraphVariant::Full),
        "no-anaphor" => Ok(GraphVariant::NoAnaphor),
        "random-replace" => Ok(GraphVariant::RandomReplace),
        other => Err(ConfigError::BadVariant(other.to_string())),
    }
}

/// Flag-level settings; `None` means the flag was absent.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr_encoder: Option<f64>,
    pub lr_classifier: Option<f64>,
    pub warmup_ratio: Option<f64>,
    pub beta: Option<f64>,
    pub weight_decay: Option<f64>,
    pub clip_norm: Option<f64>,
    pub seed: Option<u64>,
    pub min_count: Option<usize>,
    pub graph_variant: Option<GraphVariant>,
    pub hidden: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub ff_width: Option<usize>,
    pub max_len: Option<usize>,
    pub dropout: Option<f64>,
    pub attn_layers: Option<usize>,
    pub gcn_layers: Option<usize>,
    pub gcn_iterations: Option<usize>,
    pub adj_heads: Option<usize>,
    pub bilinear_groups: Option<usize>,
    pub use_graph: Option<bool>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        fn set<T: Copy>(slot: &mut T, v: Option<T>) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        set(&mut cfg.epochs, self.epochs);
        set(&mut cfg.batch_size, self.batch_size);
        set(&mut cfg.lr_encoder, self.lr_encoder);
        set(&mut cfg.lr_classifier, self.lr_classifier);
        set(&mut cfg.warmup_ratio, self.warmup_ratio);
        set(&mut cfg.beta, self.beta);
        set(&mut cfg.weight_decay, self.weight_decay);
        set(&mut cfg.clip_norm, self.clip_norm);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.min_count, self.min_count);
        set(&mut cfg.graph_variant, self.graph_variant);
        set(&mut cfg.model.encoder.hidden, self.hidden);
        set(&mut cfg.model.encoder.layers, self.layers);
        set(&mut cfg.model.encoder.heads, self.heads);
        set(&mut cfg.model.encoder.ff_width, self.ff_width);
        set(&mut cfg.model.encoder.max_len, self.max_len);
        set(&mut cfg.model.encoder.dropout, self.dropout);
        set(&mut cfg.model.encoder.attn_layers, self.attn_layers);
        set(&mut cfg.model.gcn_layers, self.gcn_layers);
        set(&mut cfg.model.gcn_iterations, self.gcn_iterations);
        set(&mut cfg.model.adj_heads, self.adj_heads);
        set(&mut cfg.model.bilinear_groups, self.bilinear_groups);
        set(&mut cfg.model.use_graph, self.use_graph);
    }
}

/// Defaults, then the optional file, then flags.
pub fn resolve_train_config(
    path: Option<&Path>,
    flags: &Overrides,
) -> Result<TrainConfig, ConfigError> {
    let mut cfg = load_train_config(path)?;
    flags.apply(&mut cfg);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_overrides_defaults_and_flags_override_the_file() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "epochs = 7\nbeta = 0.3\n\n[model]\ngcn_layers = 4\n\n[model.encoder]\nhidden = 16"
        )
        .unwrap();

        let from_file = resolve_train_config(Some(file.path()), &Overrides::default()).unwrap();
        assert_eq!(from_file.epochs, 7);
        assert_eq!(from_file.beta, 0.3);
        assert_eq!(from_file.model.gcn_layers, 4);
        assert_eq!(from_file.model.encoder.hidden, 16);
        // untouched keys keep their defaults
        assert_eq!(from_file.batch_size, default_train_config().batch_size);

        let flags = Overrides {
            epochs: Some(2),
            hidden: Some(8),
            ..Overrides::default()
        };
        let layered = resolve_train_config(Some(file.path()), &flags).unwrap();
        assert_eq!(layered.epochs, 2);
        assert_eq!(layered.model.encoder.hidden, 8);
        // flag absent: the file's value survives
        assert_eq!(layered.beta, 0.3);
    }

    #[test]
    fn missing_and_malformed_files_are_distinct_errors() {
        let missing = load_train_config(Some(Path::new("/nonexistent/run.toml")));
        assert!(matches!(missing, Err(ConfigError::Io { .. })));

        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "epochs = [not toml").unwrap();
        let bad = load_train_config(Some(file.path()));
        assert!(matches!(bad, Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn graph_variant_names_round_trip() {
        assert_eq!(parse_graph_variant("full").unwrap(), GraphVariant::Full);
        assert_eq!(
            parse_graph_variant("no-anaphor").unwrap(),
            GraphVariant::NoAnaphor
        );
        assert_eq!(
            parse_graph_variant("random-replace").unwrap(),
            GraphVariant::RandomReplace
        );
        assert!(parse_graph_variant("banana").is_err());
    }
}
