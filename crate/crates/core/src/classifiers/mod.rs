//! Random forest, logistic regression and SVM behind one train/predict
//! contract, plus a versioned JSON model format.
//!
//! A saved model is a single JSON object:
//!
//! ```text
//! {"format": "faultforge-model", "version": 1, "model": {"Rf" | "Lr" | "Svm": {...}}}
//! ```
//!
//! Readers reject any other `format` or `version`.

pub mod forest;
pub mod logistic;
pub mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use forest::{train_rf, ForestModel, RfParams};
pub use logistic::{train_lr, LinearModel, LrParams, Penalty};
pub use svm::{train_svm, Gamma, KernelKind, SvmModel, SvmParams};

pub const MODEL_FORMAT: &str = "faultforge-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("solver did not converge after {iterations} iterations (objective {objective})")]
    NoConvergence { objective: f64, iterations: usize },
    #[error("SMO did not converge: {violations} KKT violations remain (gap {gap})")]
    SvmNoConvergence { violations: usize, gap: f64 },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("support set is empty")]
    EmptySupport,
    #[error("training data is empty")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("model file: {0}")]
    Format(String),
}

pub(crate) fn check_binary(y: &[u8]) -> Result<(), ClassifierError> {
    match y.iter().find(|&&v| v > 1) {
        Some(&v) => Err(ClassifierError::InvalidLabel(v)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    Rf,
    Lr,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rf, ModelKind::Lr, ModelKind::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Lr => "lr",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rf" => Ok(ModelKind::Rf),
            "lr" => Ok(ModelKind::Lr),
            "svm" => Ok(ModelKind::Svm),
            other => Err(format!("unknown model '{other}' (expected rf, lr or svm)")),
        }
    }
}

/// Concrete hyperparameters for one of the three model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Rf(RfParams),
    Lr(LrParams),
    Svm(SvmParams),
}

impl ModelParams {
    /// Untuned defaults.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Rf => ModelParams::Rf(RfParams::default()),
            ModelKind::Lr => ModelParams::Lr(LrParams::default()),
            ModelKind::Svm => ModelParams::Svm(SvmParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Lr(_) => ModelKind::Lr,
            ModelParams::Svm(_) => ModelKind::Svm,
        }
    }

    /// Same parameters with the seed replaced (only the forest is seeded).
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let ModelParams::Rf(p) = &mut self {
            p.seed = seed;
        }
        self
    }

    pub fn train(&self, x: &Matrix, y: &[u8]) -> Result<Model, ClassifierError> {
        if x.rows() == 0 {
            return Err(ClassifierError::EmptyInput);
        }
        Ok(match self {
            ModelParams::Rf(p) => Model::Rf(train_rf(x, y, p)?),
            ModelParams::Lr(p) => Model::Lr(train_lr(x, y, p)?),
            ModelParams::Svm(p) => Model::Svm(train_svm(x, y, p)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Rf(ForestModel),
    Lr(LinearModel),
    Svm(SvmModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    model: M,
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rf(_) => ModelKind::Rf,
            Model::Lr(_) => ModelKind::Lr,
            Model::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Rf(m) => m.n_features(),
            Model::Lr(m) => m.n_features(),
            Model::Svm(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>, ClassifierError> {
        if x.cols() != self.n_features() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features(),
                got: x.cols(),
            });
        }
        Ok(match self {
            Model::Rf(m) => m.predict(x),
            Model::Lr(m) => m.predict(x),
            Model::Svm(m) => m.predict(x),
        })
    }

    pub fn to_json(&self) -> String {
        let env = Envelope {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            model: self,
        };
        serde_json::to_string(&env).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let env: Envelope<Model> =
            serde_json::from_str(text).map_err(|e| ClassifierError::Format(e.to_string()))?;
        if env.format != MODEL_FORMAT {
            return Err(ClassifierError::Format(format!(
                "unknown format '{}'",
                env.format
            )));
        }
        if env.version != MODEL_FORMAT_VERSION {
            return Err(ClassifierError::Format(format!(
                "unsupported version {}",
                env.version
            )));
        }
        Ok(env.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<u8>) {
        let x = Matrix::from_rows(&[
            [0.0, 0.2],
            [0.1, 0.4],
            [0.3, 0.1],
            [0.7, 0.9],
            [0.8, 0.6],
            [1.0, 0.8],
        ]);
        (x, vec![0, 0, 0, 1, 1, 1])
    }

    #[test]
    fn model_kind_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
        }
        assert!("knn".parse::<ModelKind>().is_err());
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let (x, y) = toy();
        for kind in ModelKind::ALL {
            let model = ModelParams::default_for(kind)
                .with_seed(5)
                .train(&x, &y)
                .unwrap();
            let back = Model::from_json(&model.to_json()).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
        }
    }

    #[test]
    fn rejects_foreign_envelopes() {
        let (x, y) = toy();
        let json = ModelParams::default_for(ModelKind::Lr)
            .train(&x, &y)
            .unwrap()
            .to_json();
        let wrong_version = json.replace("\"version\":1", "\"version\":9");
        assert!(matches!(
            Model::from_json(&wrong_version),
            Err(ClassifierError::Format(_))
        ));
        let wrong_format = json.replace(MODEL_FORMAT, "other");
        assert!(matches!(
            Model::from_json(&wrong_format),
            Err(ClassifierError::Format(_))
        ));
    }

    #[test]
    fn predict_checks_width() {
        let (x, y) = toy();
        let m = ModelParams::default_for(ModelKind::Lr)
            .train(&x, &y)
            .unwrap();
        assert!(m.predict(&Matrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn non_binary_labels_rejected() {
        assert_eq!(
            check_binary(&[0, 1, 2]),
            Err(ClassifierError::InvalidLabel(2))
        );
    }
}
