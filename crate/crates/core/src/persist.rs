//! Versioned JSON model files.
//!
//! A saved model is one JSON object:
//!
//! ```text
//! {
//!   "format": "sleepclass-model",
//!   "version": 1,
//!   "family": "classic" | "cnn",
//!   "model": { ... }
//! }
//! ```
//!
//! Classic models carry a `kind` tag (`logreg`, `dtree`, `knn`, `gnb`,
//! `svm`) next to their parameter arrays. Arrays are stored as
//! `{"shape": [..], "data": [..]}` and floats round-trip exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classic::ClassicModel;
use crate::convnet::CnnModel;
use crate::{Error, Result};

pub const FORMAT_TAG: &str = "sleepclass-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum Model {
    Classic(ClassicModel),
    Cnn(CnnModel),
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    model: &'a Model,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

pub fn to_json(model: &Model) -> Result<String> {
    let envelope = EnvelopeOut {
        format: FORMAT_TAG,
        version: FORMAT_VERSION,
        model,
    };
    serde_json::to_string_pretty(&envelope).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json(text: &str) -> Result<Model> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let header: Header =
        serde_json::from_value(value.clone()).map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "not a model file (format '{}')",
            header.format
        )));
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {} (this build reads {FORMAT_VERSION})",
            header.version
        )));
    }
    serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json(model)? + "\n").map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::{train, ClassicKind, TrainConfig};
    use crate::convnet::{build_cnn, CnnTrainConfig, Variant};
    use crate::tensor::{rand_uniform, Rng};

    #[test]
    fn every_kind_round_trips() {
        let x = rand_uniform(&mut Rng::new(1), &[12, 3], -1.0, 1.0).unwrap();
        let y: Vec<u8> = x.rows().map(|r| u8::from(r[0] > 0.1 * r[1])).collect();
        let cfg = TrainConfig {
            epochs: 20,
            ..Default::default()
        };
        for kind in [
            ClassicKind::Logreg,
            ClassicKind::Dtree,
            ClassicKind::Knn,
            ClassicKind::Gnb,
            ClassicKind::Svm,
        ] {
            let model = Model::Classic(train(kind, &x, &y, &cfg).unwrap());
            assert_eq!(from_json(&to_json(&model).unwrap()).unwrap(), model);
        }
        let cnn = build_cnn(
            Variant::Conv1d2,
            5,
            &CnnTrainConfig::default(),
            &mut Rng::new(2),
        )
        .unwrap();
        let model = Model::Cnn(cnn);
        assert_eq!(from_json(&to_json(&model).unwrap()).unwrap(), model);
    }

    #[test]
    fn header_is_checked() {
        let model = Model::Classic(ClassicModel::Logreg(crate::classic::LinearModel {
            weights: vec![0.1],
            bias: -0.3,
        }));
        let text = to_json(&model).unwrap();
        assert!(text.contains("\"version\": 1") && text.contains("\"kind\": \"logreg\""));
        let bumped = text.replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(from_json(&bumped), Err(Error::Format(m)) if m.contains('9')));
        let foreign = text.replace(FORMAT_TAG, "other");
        assert!(matches!(from_json(&foreign), Err(Error::Format(_))));
        assert!(from_json("{").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = Model::Classic(ClassicModel::Svm(crate::classic::LinearModel {
            weights: vec![0.1 + 0.2, -1e-300],
            bias: std::f64::consts::PI,
        }));
        save(&model, &path).unwrap();
        assert_eq!(load(&path).unwrap(), model);
        assert!(matches!(
            load(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }
}
