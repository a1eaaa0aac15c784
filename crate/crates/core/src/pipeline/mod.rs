//! Burst detection, feature extraction and ground-truth labeling.

mod detect;
mod features;
mod label;

pub use detect::{
    detect_bursts, observe_window, sweep_offsets, DetectorParams, ObservedBurst, MAX_CLASSIFIABLE_US,
    MIN_CLASSIFIABLE_US, SWEEP_TRIGGER_US,
};
pub use features::{extract_features, FeatureVector, FEATURE_NAMES, N_ENVELOPE_FEATURES, N_FEATURES, SF_SENTINEL_DB};
pub use label::{label_burst, label_bursts, LabelOutcome, LabeledBurst};
