pub mod beamform;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod scene;
pub mod sdp;
pub mod sphere;
pub mod stft;

pub use error::{Error, Result};
