//! Physics-guided adversarial testing and physics-informed fine-tuning of
//! feedforward regression networks.

// `!(x >= 0.0)` style checks reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod model;
pub mod net;
pub mod physreg;
pub mod rulespace;
pub mod scaler;
pub mod search;

pub use data::{load_dataset, Dataset, FeatureKind, FeatureMeta, Schema};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::{FnModel, PredictiveModel};
pub use net::{init_network, train, Network, NetworkConfig, TrainConfig};
pub use scaler::{fit_scaler, Scaler, Standardizer};
pub use physreg::{finetune, AugmentationRule, AxStore, FinetuneConfig};
pub use rulespace::{Envelope, SensitivityRule};
pub use search::{run_campaign, AdversarialExample, Algorithm, CampaignStats, SearchParams};
