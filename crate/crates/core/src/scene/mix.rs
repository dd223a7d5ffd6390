use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::stft::{analyze, synthesize, Spectrogram, StftConfig};

use super::atf::AtfSet;
use super::config::{Role, Scene};

/// Microphone observation with its ground-truth components. Every stream
/// is `[channel][sample]`.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub y: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
    pub interferers: Vec<Vec<Vec<f64>>>,
    pub self_noise: Vec<Vec<f64>>,
    /// Effective dry source signals after level scaling, target first.
    pub dry: Vec<Vec<f64>>,
    /// Self-noise variance per sample.
    pub noise_variance: f64,
}

impl Mixture {
    /// Everything except the target.
    pub fn noise(&self) -> Vec<Vec<f64>> {
        let mut n = self.self_noise.clone();
        for comp in &self.interferers {
            for (dst, src) in n.iter_mut().zip(comp) {
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            }
        }
        n
    }

    pub fn len(&self) -> usize {
        self.y.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mean square over the two reference microphones.
fn reference_power(scene: &Scene, channels: &[Vec<f64>]) -> f64 {
    let ms = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    0.5 * (ms(&channels[scene.mic_array.left_ref()]) + ms(&channels[scene.mic_array.right_ref()]))
}

/// Filters a mono signal through per-bin ATFs in the STFT domain.
fn spatialize(config: &StftConfig, atfs: &AtfSet, source: usize, signal: &[f64]) -> Result<Vec<Vec<f64>>> {
    let mono = analyze(config, &[signal.to_vec()])?;
    let m = atfs.mic_count();
    let mut spec = Spectrogram::zeros(m, mono.frames(), mono.bins(), mono.signal_len());
    for l in 0..mono.frames() {
        for k in 0..mono.bins() {
            let s = mono.get(0, l, k);
            let a = atfs.source(source, k);
            for j in 0..m {
                spec.set(j, l, k, a[j] * s);
            }
        }
    }
    synthesize(config, &spec)
}

fn scale(channels: &mut [Vec<f64>], g: f64) {
    channels.iter_mut().flatten().for_each(|v| *v *= g);
}

/// Spatializes `signals` (one per scene source, in scene order) and adds
/// white self-noise. Interferers are normalized to the target power at the
/// reference microphones, then their own gains are applied.
pub fn mix(scene: &Scene, atfs: &AtfSet, signals: &[Vec<f64>], seed: u64) -> Result<Mixture> {
    scene.validate()?;
    if signals.len() != scene.sources.len() {
        return Err(Error::Input(format!(
            "{} signals supplied for {} sources",
            signals.len(),
            scene.sources.len()
        )));
    }
    let n = scene.sample_count();
    for (i, s) in signals.iter().enumerate() {
        if s.len() < n {
            return Err(Error::Input(format!(
                "signal of source {i} has {} samples, {} needed for {} s",
                s.len(),
                n,
                scene.duration_s
            )));
        }
    }
    if atfs.mic_count() != scene.mic_count() || atfs.interferer_count() != scene.interferer_count() {
        return Err(Error::Input("ATF set does not match the scene".into()));
    }
    let config = StftConfig::new(scene.sample_rate, scene.fft_size)?;
    let db = |g: f64| 10f64.powf(g / 20.0);

    let ti = scene.target_index();
    let target_gain = db(scene.sources[ti].gain_db);
    let target_dry: Vec<f64> = signals[ti][..n].iter().map(|v| v * target_gain).collect();
    let target = spatialize(&config, atfs, 0, &target_dry)?;
    let target_power = reference_power(scene, &target);

    let mut dry = vec![target_dry];
    let mut interferers = Vec::new();
    for (i, src) in scene
        .sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.role == Role::Interferer)
    {
        let raw = &signals[i][..n];
        let mut comp = spatialize(&config, atfs, interferers.len() + 1, raw)?;
        let p = reference_power(scene, &comp);
        let g = if p > 0.0 {
            (target_power / p).sqrt() * db(src.gain_db)
        } else {
            0.0
        };
        scale(&mut comp, g);
        dry.push(raw.iter().map(|v| v * g).collect());
        interferers.push(comp);
    }

    let m = scene.mic_count();
    let noise_variance = if scene.self_noise_snr_db.is_infinite() && scene.self_noise_snr_db > 0.0 {
        0.0
    } else {
        target_power / 10f64.powf(scene.self_noise_snr_db / 10.0)
    };
    let self_noise: Vec<Vec<f64>> = if noise_variance > 0.0 {
        let normal = Normal::new(0.0, noise_variance.sqrt()).map_err(|e| Error::Numeric(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| (0..n).map(|_| normal.sample(&mut rng)).collect())
            .collect()
    } else {
        vec![vec![0.0; n]; m]
    };

    let mut y = target.clone();
    for comp in interferers.iter().chain(std::iter::once(&self_noise)) {
        for (dst, src) in y.iter_mut().zip(comp) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }
    Ok(Mixture {
        y,
        target,
        interferers,
        self_noise,
        dry,
        noise_variance,
    })
}
