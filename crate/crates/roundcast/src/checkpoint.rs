//! Model checkpoints: a JSON document with the architecture, the resolved
//! training configuration, and every parameter tensor.
//!
//! Values are stored as 16-digit hex bit patterns of the 64-bit floats, so
//! a load is bit-exact no matter what printed decimals would round to.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Model;
use crate::optim::TrainConfig;
use crate::tensor::SeededRng;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: String,
    pub config: TrainConfig,
    pub parameters: Vec<CheckpointParam>,
}

pub fn checkpoint_from_model(model: &Model, cfg: &TrainConfig) -> Checkpoint {
    Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        architecture: model.architecture().to_string(),
        config: cfg.clone(),
        parameters: model
            .params()
            .iter()
            .map(|p| CheckpointParam {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                values: p
                    .value
                    .data()
                    .iter()
                    .map(|f| format!("{:016x}", f.to_bits()))
                    .collect(),
            })
            .collect(),
    }
}

pub fn save_checkpoint(path: &Path, model: &Model, cfg: &TrainConfig) -> Result<()> {
    let doc = checkpoint_from_model(model, cfg);
    let json = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Format(format!("could not serialize checkpoint: {e}")))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Rebuilds the model a checkpoint describes. The returned config is the
/// one the model was trained under (progression, seed, and all).
pub fn load_checkpoint(path: &Path) -> Result<(Model, TrainConfig)> {
    let text = std::fs::read_to_string(path)?;
    let doc: Checkpoint = serde_json::from_str(&text).map_err(|e| {
        Error::Format(format!(
            "checkpoint did not parse as format version {CHECKPOINT_FORMAT_VERSION}: {e}"
        ))
    })?;
    model_from_checkpoint(&doc).map(|m| (m, doc.config))
}

pub fn model_from_checkpoint(doc: &Checkpoint) -> Result<Model> {
    if doc.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint format version {} is not supported, expected {CHECKPOINT_FORMAT_VERSION}",
            doc.format_version
        )));
    }
    if doc.architecture != doc.config.architecture {
        return Err(Error::Format(format!(
            "checkpoint architecture {:?} disagrees with its config {:?}",
            doc.architecture, doc.config.architecture
        )));
    }
    doc.config.validate()?;

    // The initialization below is thrown away; every tensor is overwritten
    // from the stored bit patterns.
    let mut scratch_rng = SeededRng::new(doc.config.seed);
    let mut model = doc.config.build_model(&mut scratch_rng)?;

    let expected: Vec<String> = model.params().iter().map(|p| p.name.clone()).collect();
    for stored in &doc.parameters {
        if !expected.contains(&stored.name) {
            return Err(Error::Format(format!(
                "checkpoint carries unknown parameter {:?}",
                stored.name
            )));
        }
    }
    for (pi, name) in expected.iter().enumerate() {
        let stored = doc
            .parameters
            .iter()
            .find(|p| &p.name == name)
            .ok_or_else(|| {
                Error::Format(format!("checkpoint is missing parameter {name:?}"))
            })?;
        {
            let shape = model.params()[pi].value.shape();
            if stored.shape != shape {
                return Err(Error::Dimension(format!(
                    "parameter {name:?} has shape {:?} in the checkpoint but {:?} in the model",
                    stored.shape, shape
                )));
            }
        }
        let numel = model.params()[pi].value.numel();
        if stored.values.len() != numel {
            return Err(Error::Dimension(format!(
                "parameter {name:?} stores {} values for {} elements",
                stored.values.len(),
                numel
            )));
        }
        let mut params = model.params_mut();
        let dst = params[pi].value.data_mut();
        for (e, hex) in stored.values.iter().enumerate() {
            let bits = u64::from_str_radix(hex, 16).map_err(|_| {
                Error::Format(format!(
                    "parameter {name:?} element {e} holds {hex:?}, not a 64-bit hex pattern"
                ))
            })?;
            dst[e] = f64::from_bits(bits);
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn awkward_model(cfg: &TrainConfig) -> Model {
        let mut rng = SeededRng::new(99);
        let mut model = cfg.build_model(&mut rng).unwrap();
        // Values decimal printing tends to mangle: thirds, negative zero,
        // and a subnormal.
        let specials = [1.0 / 3.0, -0.0, 5e-324, -1e300, std::f64::consts::PI];
        for (pi, p) in model.params_mut().into_iter().enumerate() {
            for (e, v) in p.value.data_mut().iter_mut().enumerate() {
                if (pi + e) % 3 == 0 {
                    *v = specials[(pi + e) % specials.len()];
                }
            }
        }
        model
    }

    #[test]
    fn round_trip_is_bit_exact_for_both_architectures() {
        let dir = tempfile::tempdir().unwrap();
        for cfg in [TrainConfig::lstm(), TrainConfig::transformer()] {
            let model = awkward_model(&cfg);
            let path = dir.path().join(format!("{}.json", cfg.architecture));
            save_checkpoint(&path, &model, &cfg).unwrap();
            let (loaded, loaded_cfg) = load_checkpoint(&path).unwrap();
            assert_eq!(loaded_cfg, cfg);
            assert_eq!(loaded.architecture(), model.architecture());
            for (a, b) in model.params().iter().zip(loaded.params()) {
                assert_eq!(a.name, b.name);
                assert_eq!(a.value.shape(), b.value.shape());
                for (x, y) in a.value.data().iter().zip(b.value.data()) {
                    assert_eq!(x.to_bits(), y.to_bits(), "{}", a.name);
                }
            }
        }
    }

    #[test]
    fn unsupported_version_is_reported_with_numbers() {
        let cfg = TrainConfig::lstm();
        let mut doc = checkpoint_from_model(&awkward_model(&cfg), &cfg);
        doc.format_version = 7;
        let err = model_from_checkpoint(&doc).unwrap_err();
        match err {
            Error::Format(msg) => {
                assert!(msg.contains('7') && msg.contains('1'), "{msg}");
            }
            other => panic!("expected a format error, got {other:?}"),
        }
    }

    #[test]
    fn corrupt_json_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{\"format_version\": 1, \"arch").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format(_))));
        assert!(matches!(
            load_checkpoint(&dir.path().join("missing.json")),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn parameter_set_must_match_exactly() {
        let cfg = TrainConfig::lstm();
        let model = awkward_model(&cfg);

        let mut missing = checkpoint_from_model(&model, &cfg);
        missing.parameters.remove(0);
        assert!(matches!(
            model_from_checkpoint(&missing),
            Err(Error::Format(_))
        ));

        let mut extra = checkpoint_from_model(&model, &cfg);
        extra.parameters.push(CheckpointParam {
            name: "mystery.weight".to_string(),
            shape: vec![1],
            values: vec![format!("{:016x}", 1.0f64.to_bits())],
        });
        assert!(matches!(
            model_from_checkpoint(&extra),
            Err(Error::Format(_))
        ));

        let mut reshaped = checkpoint_from_model(&model, &cfg);
        reshaped.parameters[0].shape = vec![1, 2, 3];
        assert!(matches!(
            model_from_checkpoint(&reshaped),
            Err(Error::Dimension(_))
        ));

        let mut mangled = checkpoint_from_model(&model, &cfg);
        mangled.parameters[0].values[0] = "not-hex".to_string();
        assert!(matches!(
            model_from_checkpoint(&mangled),
            Err(Error::Format(_))
        ));
    }
}
