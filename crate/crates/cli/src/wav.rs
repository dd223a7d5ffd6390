use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ild_core::{Error, Result};

const FULL_SCALE: f64 = 32767.0;

fn wav_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => Error::Input(format!("{}: {other}", path.display())),
    }
}

pub fn quantize(x: f64, scale: f64) -> i16 {
    (x * scale * FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

pub fn dequantize(v: i16, scale: f64) -> f64 {
    v as f64 / (FULL_SCALE * scale)
}

/// Writes 16-bit PCM with one channel per entry of `channels`. Returns the
/// number of clipped samples.
pub fn write(path: &Path, channels: &[Vec<f64>], sample_rate: f64, scale: f64) -> Result<usize> {
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: sample_rate.round() as u32,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| wav_err(path, e))?;
    let len = channels.iter().map(Vec::len).max().unwrap_or(0);
    let mut clipped = 0;
    for n in 0..len {
        for ch in channels {
            let x = ch.get(n).copied().unwrap_or(0.0);
            if (x * scale).abs() > 1.0 {
                clipped += 1;
            }
            w.write_sample(quantize(x, scale)).map_err(|e| wav_err(path, e))?;
        }
    }
    w.finalize().map_err(|e| wav_err(path, e))?;
    Ok(clipped)
}

/// Reads a WAV file as mono (channels averaged) in [-1, 1].
pub fn read_mono(path: &Path, sample_rate: f64) -> Result<Vec<f64>> {
    let mut r = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let spec = r.spec();
    if spec.sample_rate != sample_rate.round() as u32 {
        return Err(Error::Input(format!(
            "{}: sample rate {} Hz, scene expects {sample_rate} Hz",
            path.display(),
            spec.sample_rate
        )));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(|e| wav_err(path, e))?,
        SampleFormat::Int => {
            let full = (1i64 << (spec.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / full))
                .collect::<Result<_, _>>()
                .map_err(|e| wav_err(path, e))?
        }
    };
    let ch = spec.channels.max(1) as usize;
    Ok(interleaved
        .chunks(ch)
        .map(|frame| frame.iter().sum::<f64>() / ch as f64)
        .collect())
}

/// Reads every channel of a 16-bit file as raw sample values.
pub fn read_pcm16(path: &Path) -> Result<Vec<Vec<i16>>> {
    let mut r = WavReader::open(path).map_err(|e| wav_err(path, e))?;
    let ch = r.spec().channels.max(1) as usize;
    let samples: Vec<i16> = r
        .samples::<i16>()
        .collect::<Result<_, _>>()
        .map_err(|e| wav_err(path, e))?;
    Ok((0..ch)
        .map(|c| samples.iter().skip(c).step_by(ch).copied().collect())
        .collect())
}
