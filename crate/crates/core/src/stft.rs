//! Short-time Fourier analysis and synthesis with square-root Hann windows at
//! 50% overlap.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{CVec, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub sample_rate: f64,
    pub frame_len: usize,
    pub fft_size: usize,
    pub hop: usize,
}

impl StftConfig {
    /// 12.5 ms frames zero-padded to `fft_size`, hop of half a frame.
    pub fn new(sample_rate: f64, fft_size: usize) -> Result<Self> {
        let frame_len = (0.0125 * sample_rate).round() as usize;
        let cfg = Self {
            sample_rate,
            frame_len,
            fft_size,
            hop: frame_len / 2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::Input("sample rate must be positive".into()));
        }
        if self.frame_len < 2 || !self.frame_len.is_multiple_of(2) {
            return Err(Error::Input(format!(
                "frame length {} must be even and >= 2",
                self.frame_len
            )));
        }
        if self.hop * 2 != self.frame_len {
            return Err(Error::Input("hop must be half the frame length".into()));
        }
        if self.fft_size < self.frame_len || !self.fft_size.is_multiple_of(2) {
            return Err(Error::Input(format!(
                "fft size {} must be even and at least the frame length {}",
                self.fft_size, self.frame_len
            )));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.fft_size as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.bin_frequency(k)).collect()
    }

    /// Square root of a periodic Hann window; its square overlap-adds to one
    /// at half-frame hops.
    pub fn window(&self) -> Vec<f64> {
        let n = self.frame_len as f64;
        (0..self.frame_len)
            .map(|i| (0.5 * (1.0 - (2.0 * PI * i as f64 / n).cos())).sqrt())
            .collect()
    }

    /// Number of frames used for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.frame_len {
            1
        } else {
            (len - self.frame_len).div_ceil(self.hop) + 1
        }
    }
}

/// Multichannel STFT coefficients laid out as `[channel][frame][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    channels: usize,
    frames: usize,
    bins: usize,
    signal_len: usize,
    data: Vec<C64>,
}

impl Spectrogram {
    pub fn zeros(channels: usize, frames: usize, bins: usize, signal_len: usize) -> Self {
        Self {
            channels,
            frames,
            bins,
            signal_len,
            data: vec![C64::new(0.0, 0.0); channels * frames * bins],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    fn idx(&self, ch: usize, frame: usize, bin: usize) -> usize {
        (ch * self.frames + frame) * self.bins + bin
    }

    pub fn get(&self, ch: usize, frame: usize, bin: usize) -> C64 {
        self.data[self.idx(ch, frame, bin)]
    }

    pub fn set(&mut self, ch: usize, frame: usize, bin: usize, v: C64) {
        let i = self.idx(ch, frame, bin);
        self.data[i] = v;
    }

    pub fn frame(&self, ch: usize, frame: usize) -> &[C64] {
        let start = self.idx(ch, frame, 0);
        &self.data[start..start + self.bins]
    }

    fn frame_mut(&mut self, ch: usize, frame: usize) -> &mut [C64] {
        let start = self.idx(ch, frame, 0);
        &mut self.data[start..start + self.bins]
    }

    /// Snapshot vector `y(k, l)` across channels.
    pub fn vector(&self, bin: usize, frame: usize) -> CVec {
        CVec::from_fn(self.channels, |ch, _| self.get(ch, frame, bin))
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    /// Elementwise sum of two spectrograms of identical shape.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.data.len() != other.data.len() || self.bins != other.bins || self.channels != other.channels {
            return Err(Error::Input("spectrogram shapes differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(out)
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut planner = FftPlanner::new();
    Plans {
        forward: planner.plan_fft_forward(n),
        inverse: planner.plan_fft_inverse(n),
    }
}

/// Windowed, zero-padded FFT of every frame of every channel. The tail of
/// the signal is zero-extended to complete the last frame.
pub fn analyze(config: &StftConfig, signals: &[Vec<f64>]) -> Result<Spectrogram> {
    config.validate()?;
    let len = signals.first().map(Vec::len).unwrap_or(0);
    if signals.is_empty() || len == 0 {
        return Err(Error::Input("cannot analyze an empty signal".into()));
    }
    if signals.iter().any(|s| s.len() != len) {
        return Err(Error::Input("channels have different lengths".into()));
    }
    let window = config.window();
    let frames = config.frame_count(len);
    let bins = config.bins();
    let fft = plans(config.fft_size).forward;
    let mut out = Spectrogram::zeros(signals.len(), frames, bins, len);
    let mut buf = vec![C64::new(0.0, 0.0); config.fft_size];
    for (ch, sig) in signals.iter().enumerate() {
        for l in 0..frames {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            let start = l * config.hop;
            for (i, w) in window.iter().enumerate() {
                if let Some(&s) = sig.get(start + i) {
                    buf[i] = C64::new(s * w, 0.0);
                }
            }
            fft.process(&mut buf);
            out.frame_mut(ch, l).copy_from_slice(&buf[..bins]);
        }
    }
    Ok(out)
}

/// Inverse FFT of every frame, synthesis windowing and overlap-add.
pub fn synthesize(config: &StftConfig, spec: &Spectrogram) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    if spec.bins() != config.bins() {
        return Err(Error::Input(format!(
            "spectrogram has {} bins, config expects {}",
            spec.bins(),
            config.bins()
        )));
    }
    if spec.frames() != config.frame_count(spec.signal_len()) {
        return Err(Error::Input("spectrogram frame count does not match config".into()));
    }
    let window = config.window();
    let n = config.fft_size;
    let fft = plans(n).inverse;
    let total = (spec.frames() - 1) * config.hop + config.frame_len;
    let mut outputs = Vec::with_capacity(spec.channels());
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for ch in 0..spec.channels() {
        let mut out = vec![0.0; total.max(spec.signal_len())];
        for l in 0..spec.frames() {
            let half = spec.frame(ch, l);
            buf[..half.len()].copy_from_slice(half);
            // DC and Nyquist must be real for a real frame
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            for k in 1..n / 2 {
                buf[n - k] = half[k].conj();
            }
            fft.process(&mut buf);
            let start = l * config.hop;
            for (i, w) in window.iter().enumerate() {
                out[start + i] += buf[i].re / n as f64 * w;
            }
        }
        out.truncate(spec.signal_len());
        outputs.push(out);
    }
    Ok(outputs)
}

/// Energy of one analyzed frame computed from its half spectrum, scaled by
/// `1/fft_size` (Parseval).
pub fn spectral_frame_energy(config: &StftConfig, frame: &[C64]) -> f64 {
    let n = config.fft_size;
    let mut e = frame[0].norm_sqr() + frame[n / 2].norm_sqr();
    for v in &frame[1..n / 2] {
        e += 2.0 * v.norm_sqr();
    }
    e / n as f64
}

/// `sum_l window^2(n - l*hop)` for each sample of a signal of `len` samples.
pub fn overlap_weight(config: &StftConfig, len: usize) -> Vec<f64> {
    let w = config.window();
    let frames = config.frame_count(len);
    let mut acc = vec![0.0; (frames - 1) * config.hop + config.frame_len];
    for l in 0..frames {
        for (i, v) in w.iter().enumerate() {
            acc[l * config.hop + i] += v * v;
        }
    }
    acc.truncate(len);
    acc
}
