//! Streaming human activity recognition: one diagonal Gaussian mixture per
//! activity, scored over a rolling window of recent frames.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod bench;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod hmm;
pub mod predictor;
pub mod scalar;
pub mod synth;

pub use data::{
    ActivityLabel, ChannelKind, ChannelSpec, Dataset, FrameMatrix, Frames, LabeledSequence,
    N_ACTIVITIES,
};
pub use error::{Error, ErrorKind, Result};
pub use eval::{apply_border_tolerance, run_cv, CvConfig, CvReport, EvalReport, Method};
pub use features::{DirectionalConfig, FeatureConfig, FeatureStream};
pub use gmm::{
    fit_em, train_activity_models, ActivityModelSet, Component, ComponentCounts, EmConfig, GmmModel,
};
pub use hmm::{predict_stream_hmm, viterbi_block, HmmConfig, TransitionMatrix};
pub use predictor::{
    predict_sequence, predict_sequence_naive, Prediction, PredictorConfig, PredictorSession,
};
pub use scalar::Scalar;
pub use synth::{generate, SynthParams, SynthSpec};

pub type Gmm = GmmModel<f64>;
pub type Gmm32 = GmmModel<f32>;
pub type ModelSet = ActivityModelSet<f64>;
pub type ModelSet32 = ActivityModelSet<f32>;
pub type Session = PredictorSession<f64>;
pub type Session32 = PredictorSession<f32>;
pub type Recording = LabeledSequence<f64>;
pub type Recordings = Dataset<f64>;
