//! Acoustic scenes: microphone array, sources and their signals, sphere-model
//! transfer functions, multichannel mixing and noise covariances.

mod atf;
mod config;
mod cpsd;
mod mix;

pub use atf::{build_atfs, AtfSet};
pub use config::{MicArrayConfig, Role, Scene, SignalSpec, SourceSpec, REFERENCE_INTERFERER_AZIMUTHS};
pub use cpsd::{estimate_cpsd, oracle_cpsd, stft_psd, white_noise_psd, CpsdSet, EstimateStatus, SourcePsds};
pub use mix::{mix, Mixture};
