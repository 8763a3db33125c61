//! Text-dependent speaker identification with MFCC features and LBG
//! vector-quantization codebooks.
//!
//! The pipeline runs in two phases. Enrollment extracts normalized
//! 12-coefficient MFCC frames from each speaker's clips and trains a
//! per-speaker codebook with the Linde-Buzo-Gray splitting algorithm.
//! Identification extracts features from an unknown clip and picks the
//! speaker whose codebook yields the smallest mean quantization distance.
//!
//! [`signal`] adds the notch filter used for robustness sweeps and a
//! deterministic synthetic-speaker generator for reproducible corpora.

pub mod audio;
pub mod error;
pub mod mfcc;
pub mod recognizer;
pub mod signal;
pub mod vq;

pub use audio::{peak_normalize, read_wav, write_wav, AudioClip};
pub use error::{Error, Result};
pub use mfcc::{
    extract_mfcc, frame_signal, hamming_window, power_spectrum, pre_emphasize, FeatureMatrix,
    MfccConfig, MfccExtractor,
};
pub use recognizer::{
    distance_matrix, identify, load_db, save_db, DistanceMatrix, MatchResult, SpeakerDb,
    SpeakerModel,
};
pub use signal::{notch_filter, synth_speaker_clip, NotchSpec, SpeakerProfile};
pub use vq::{avg_distortion, quantize, train_codebook, Codebook, LbgConfig, LbgTrace};
