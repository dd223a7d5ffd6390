use std::f64::consts::PI;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::SphereParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Interferer,
}

/// Microphones on the sphere surface. Index 0 is the right reference
/// microphone and the last index is the left reference microphone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicArrayConfig {
    /// Microphone azimuths in degrees, in (-180, 180].
    pub azimuths_deg: Vec<f64>,
    #[serde(default = "default_head_radius")]
    pub head_radius: f64,
}

fn default_head_radius() -> f64 {
    0.0875
}

impl MicArrayConfig {
    /// `count / 2` microphones per ear, 5 degrees apart and centered on
    /// +/-100 degrees, mirrored so the two reference microphones are
    /// symmetric about the mid-sagittal plane.
    pub fn behind_the_ear(count: usize) -> Result<Self> {
        if count < 2 || !count.is_multiple_of(2) {
            return Err(Error::Config(format!("microphone count {count} must be even and >= 2")));
        }
        let half = count / 2;
        let first = 100.0 - 2.5 * (half as f64 - 1.0);
        let mut az = vec![0.0; count];
        for j in 0..half {
            let a = first + 5.0 * j as f64;
            az[j] = a;
            az[count - 1 - j] = -a;
        }
        Ok(Self {
            azimuths_deg: az,
            head_radius: default_head_radius(),
        })
    }

    pub fn count(&self) -> usize {
        self.azimuths_deg.len()
    }

    pub fn left_ref(&self) -> usize {
        self.count() - 1
    }

    pub fn right_ref(&self) -> usize {
        0
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.count();
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::Config(format!("microphone count {m} must be even and >= 2")));
        }
        if !(self.head_radius > 0.0) {
            return Err(Error::Config("head radius must be positive".into()));
        }
        if let Some(a) = self.azimuths_deg.iter().find(|&&a| !(a > -180.0 && a <= 180.0)) {
            return Err(Error::Config(format!("microphone azimuth {a} outside (-180, 180]")));
        }
        Ok(())
    }
}

/// Mono source signal, either synthesized or read from a WAV file by the
/// caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Wav {
        path: PathBuf,
    },
    Tone {
        freq_hz: f64,
    },
    /// White Gaussian noise.
    Noise {
        seed: u64,
    },
    /// Harmonic complex with a slow pitch glide and syllable-rate envelope.
    Harmonic {
        f0_hz: f64,
    },
    /// Gated white noise.
    NoiseBursts {
        seed: u64,
        burst_s: f64,
        gap_s: f64,
    },
}

impl SignalSpec {
    /// Renders a synthetic signal with unit RMS scale (before gating).
    /// Returns `None` for file-backed signals.
    pub fn synthesize(&self, len: usize, sample_rate: f64) -> Option<Vec<f64>> {
        let t = |n: usize| n as f64 / sample_rate;
        match *self {
            SignalSpec::Wav { .. } => None,
            SignalSpec::Tone { freq_hz } => Some(
                (0..len)
                    .map(|n| (2.0 * PI * freq_hz * t(n)).sin() * 2f64.sqrt())
                    .collect(),
            ),
            SignalSpec::Noise { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, 1.0).unwrap();
                Some((0..len).map(|_| normal.sample(&mut rng)).collect())
            }
            SignalSpec::Harmonic { f0_hz } => {
                let mut phase = 0.0;
                let out = (0..len)
                    .map(|n| {
                        let glide = 1.0 + 0.1 * (2.0 * PI * 0.3 * t(n)).sin();
                        phase += 2.0 * PI * f0_hz * glide / sample_rate;
                        let env = 0.6 + 0.4 * (2.0 * PI * 4.0 * t(n)).sin();
                        let mut v = 0.0;
                        let mut h = 1;
                        while (h as f64) * f0_hz * 1.2 < sample_rate / 2.0 && h <= 30 {
                            v += (h as f64 * phase).sin() / h as f64;
                            h += 1;
                        }
                        env * v
                    })
                    .collect();
                Some(out)
            }
            SignalSpec::NoiseBursts { seed, burst_s, gap_s } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let normal = Normal::new(0.0, 1.0).unwrap();
                let period = burst_s + gap_s;
                Some(
                    (0..len)
                        .map(|n| {
                            let v = normal.sample(&mut rng);
                            if period > 0.0 && t(n) % period < burst_s {
                                v
                            } else {
                                0.0
                            }
                        })
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub role: Role,
    /// Degrees; 0 at the mid-sagittal plane, positive clockwise (to the right).
    pub azimuth_deg: f64,
    pub distance_m: f64,
    #[serde(default)]
    pub gain_db: f64,
    pub signal: SignalSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub mic_array: MicArrayConfig,
    pub sources: Vec<SourceSpec>,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_fft_size")]
    pub fft_size: usize,
    #[serde(default = "default_snr")]
    pub self_noise_snr_db: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff_hz: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
    /// Externally supplied ATF table replacing the sphere model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atf_csv: Option<PathBuf>,
}

fn default_sample_rate() -> f64 {
    16_000.0
}
fn default_fft_size() -> usize {
    256
}
fn default_snr() -> f64 {
    50.0
}
fn default_cutoff() -> f64 {
    800.0
}
fn default_duration() -> f64 {
    20.0
}
fn default_speed_of_sound() -> f64 {
    343.0
}

/// Interferer azimuths of the reference evaluation scenario.
pub const REFERENCE_INTERFERER_AZIMUTHS: [f64; 8] = [-20.0, 20.0, -40.0, 40.0, -60.0, 60.0, -90.0, 90.0];

impl Scene {
    /// Reference scenario: target at 0 degrees and the first `interferers`
    /// of the reference interferer positions, all at 1 m, with synthetic
    /// signals.
    pub fn reference(mics: usize, interferers: usize) -> Result<Self> {
        let mut sources = vec![SourceSpec {
            role: Role::Target,
            azimuth_deg: 0.0,
            distance_m: 1.0,
            gain_db: 0.0,
            signal: SignalSpec::Harmonic { f0_hz: 140.0 },
        }];
        for (i, &az) in REFERENCE_INTERFERER_AZIMUTHS.iter().take(interferers).enumerate() {
            let signal = match i % 3 {
                0 => SignalSpec::Harmonic {
                    f0_hz: 95.0 + 23.0 * i as f64,
                },
                1 => SignalSpec::Noise { seed: 100 + i as u64 },
                _ => SignalSpec::NoiseBursts {
                    seed: 200 + i as u64,
                    burst_s: 0.35,
                    gap_s: 0.15,
                },
            };
            sources.push(SourceSpec {
                role: Role::Interferer,
                azimuth_deg: az,
                distance_m: 1.0,
                gain_db: 0.0,
                signal,
            });
        }
        let scene = Self {
            mic_array: MicArrayConfig::behind_the_ear(mics)?,
            sources,
            sample_rate: default_sample_rate(),
            fft_size: default_fft_size(),
            self_noise_snr_db: default_snr(),
            cutoff_hz: default_cutoff(),
            duration_s: default_duration(),
            speed_of_sound: default_speed_of_sound(),
            atf_csv: None,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scene: Scene = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn mic_count(&self) -> usize {
        self.mic_array.count()
    }

    pub fn sphere_params(&self) -> SphereParams {
        SphereParams {
            radius: self.mic_array.head_radius,
            speed_of_sound: self.speed_of_sound,
            ..SphereParams::default()
        }
    }

    /// Largest interferer count that leaves the cue-preserving beamformer
    /// at least one degree of freedom.
    pub fn max_interferers(&self) -> usize {
        2 * self.mic_count() - 3
    }

    pub fn target(&self) -> &SourceSpec {
        self.sources
            .iter()
            .find(|s| s.role == Role::Target)
            .expect("validated scene has a target")
    }

    pub fn target_index(&self) -> usize {
        self.sources.iter().position(|s| s.role == Role::Target).unwrap()
    }

    pub fn interferers(&self) -> impl Iterator<Item = &SourceSpec> {
        self.sources.iter().filter(|s| s.role == Role::Interferer)
    }

    pub fn interferer_count(&self) -> usize {
        self.interferers().count()
    }

    pub fn sample_count(&self) -> usize {
        (self.duration_s * self.sample_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.mic_array.validate()?;
        let targets = self.sources.iter().filter(|s| s.role == Role::Target).count();
        if targets != 1 {
            return Err(Error::Config(format!(
                "scene must contain exactly one target, found {targets}"
            )));
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !(s.distance_m > self.mic_array.head_radius) {
                return Err(Error::Geometry(format!(
                    "source {i} at {} m lies inside the head (radius {} m)",
                    s.distance_m, self.mic_array.head_radius
                )));
            }
            if !s.azimuth_deg.is_finite() || !s.gain_db.is_finite() {
                return Err(Error::Config(format!("source {i} has a non-finite azimuth or gain")));
            }
        }
        let r = self.interferer_count();
        if r > self.max_interferers() {
            return Err(Error::Config(format!(
                "{r} interferers exceed the maximum {} for {} microphones",
                self.max_interferers(),
                self.mic_count()
            )));
        }
        if !(self.sample_rate > 0.0) || !(self.duration_s > 0.0) {
            return Err(Error::Config("sample rate and duration must be positive".into()));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < self.sample_rate / 2.0) {
            return Err(Error::Config(format!("cutoff {} Hz outside (0, fs/2)", self.cutoff_hz)));
        }
        if self.self_noise_snr_db.is_nan() {
            return Err(Error::Config("self-noise SNR is NaN".into()));
        }
        Ok(())
    }
}
