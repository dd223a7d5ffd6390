//! End-to-end run: simulate a scene, form oracle covariances, design
//! filters and evaluate them.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::beamform::{apply, design, scaling_factors, BandSplitOptions, Design, Method, RefMics, StackedFilter};
use crate::error::{Error, Result};
use crate::metrics::{
    bin_noise_power, lower_band_summary, output_noise_power, source_cues, source_label, to_db, ReportRow,
};
use crate::scene::{
    build_atfs, mix, oracle_cpsd, stft_psd, white_noise_psd, AtfSet, CpsdSet, Mixture, Scene, SourcePsds,
};
use crate::stft::{analyze, synthesize, Spectrogram, StftConfig};

/// Renders every source signal in scene order; file-backed signals are read
/// with `load`.
pub fn source_signals<F>(scene: &Scene, mut load: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&Path) -> Result<Vec<f64>>,
{
    let n = scene.sample_count();
    scene
        .sources
        .iter()
        .map(|s| match s.signal.synthesize(n, scene.sample_rate) {
            Some(v) => Ok(v),
            None => match &s.signal {
                crate::scene::SignalSpec::Wav { path } => load(path),
                _ => unreachable!("only file-backed signals are not synthesized"),
            },
        })
        .collect()
}

/// A simulated scene with its oracle noise covariances.
#[derive(Debug, Clone)]
pub struct Run {
    pub scene: Scene,
    pub seed: u64,
    pub stft: StftConfig,
    pub atfs: AtfSet,
    pub mixture: Mixture,
    pub cpsd: CpsdSet,
}

impl Run {
    /// Simulates `scene` with sphere-model ATFs.
    pub fn from_scene(scene: Scene, signals: &[Vec<f64>], seed: u64) -> Result<Self> {
        let atfs = build_atfs(&scene)?;
        Self::new(scene, atfs, signals, seed)
    }

    pub fn new(scene: Scene, atfs: AtfSet, signals: &[Vec<f64>], seed: u64) -> Result<Self> {
        let stft = StftConfig::new(scene.sample_rate, scene.fft_size)?;
        let mixture = mix(&scene, &atfs, signals, seed)?;
        let psd = |x: &[f64]| stft_psd(&stft, x);
        let psds = SourcePsds {
            target: psd(&mixture.dry[0])?,
            interferers: mixture.dry[1..].iter().map(|d| psd(d)).collect::<Result<_>>()?,
        };
        let cpsd = oracle_cpsd(&atfs, &psds, &white_noise_psd(&stft, mixture.noise_variance))?;
        Ok(Self {
            scene,
            seed,
            stft,
            atfs,
            mixture,
            cpsd,
        })
    }

    pub fn refs(&self) -> RefMics {
        RefMics {
            left: self.scene.mic_array.left_ref(),
            right: self.scene.mic_array.right_ref(),
        }
    }

    pub fn interferer_azimuths(&self) -> Vec<f64> {
        self.scene.interferers().map(|s| s.azimuth_deg).collect()
    }

    pub fn options(&self) -> BandSplitOptions {
        BandSplitOptions {
            cutoff_hz: self.scene.cutoff_hz,
            ..BandSplitOptions::default()
        }
    }

    pub fn design(&self, method: Method, opts: &BandSplitOptions) -> Result<Design> {
        design(
            method,
            &self.atfs,
            &self.cpsd.noise,
            self.refs(),
            &self.interferer_azimuths(),
            &self.scene.sphere_params(),
            opts,
        )
    }

    /// Intended ILD factors `[bin][interferer]` of `method`.
    pub fn scaling(&self, method: Method, cutoff: f64) -> Result<Vec<Vec<f64>>> {
        match method {
            Method::Ild(d) => scaling_factors(
                &self.atfs,
                &self.interferer_azimuths(),
                d,
                &self.scene.sphere_params(),
                cutoff,
            ),
            _ => Ok(vec![vec![1.0; self.atfs.interferer_count()]; self.atfs.bins()]),
        }
    }

    pub fn mixture_frames(&self) -> Result<Spectrogram> {
        analyze(&self.stft, &self.mixture.y)
    }

    pub fn noise_frames(&self) -> Result<Spectrogram> {
        analyze(&self.stft, &self.mixture.noise())
    }

    /// Binaural time-domain output `[L, R]`.
    pub fn output(&self, filter: &StackedFilter) -> Result<Vec<Vec<f64>>> {
        synthesize(&self.stft, &apply(filter, &self.mixture_frames()?)?)
    }

    /// Per-bin output noise power under the oracle covariance, linear and
    /// relative to the reference-microphone input.
    pub fn noise_power_by_bin(&self, filter: &StackedFilter) -> Vec<f64> {
        (0..self.atfs.bins())
            .map(|k| bin_noise_power(&self.cpsd.noise[k], &filter.weights[k], self.refs()))
            .collect()
    }

    /// Lower-band cue errors of every source and the output noise power.
    pub fn evaluate(&self, filter: &StackedFilter, scaling: &[Vec<f64>], cutoff: f64) -> Result<Vec<ReportRow>> {
        if scaling.len() != self.atfs.bins() || filter.bins() != self.atfs.bins() {
            return Err(Error::Input("filter or scaling grid does not match the scene".into()));
        }
        let refs = self.refs();
        let mut rows = Vec::new();
        for s in 0..self.atfs.source_count() {
            let c: Vec<f64> = if s == 0 {
                vec![1.0; self.atfs.bins()]
            } else {
                scaling.iter().map(|per| per[s - 1]).collect()
            };
            let cues = source_cues(filter, &self.atfs, s, refs);
            let summary = lower_band_summary(&cues, &c, &filter.status, cutoff)?;
            rows.extend(ReportRow::for_source(&filter.method, &source_label(s), &summary));
        }
        let noise = self.noise_frames()?;
        let lower = (0..self.atfs.bins())
            .filter(|&k| self.atfs.frequencies[k] > 0.0 && self.atfs.frequencies[k] < cutoff)
            .fold(None, |r: Option<(usize, usize)>, k| {
                Some(r.map_or((k, k + 1), |(a, _)| (a, k + 1)))
            });
        let mut bands = vec![("all", 0..self.atfs.bins())];
        if let Some((a, b)) = lower {
            bands.push(("lower", a..b));
        }
        for (band, range) in bands {
            let count = range.len();
            let value = output_noise_power(filter, &noise, refs, range)?;
            rows.push(ReportRow {
                method: filter.method.clone(),
                source: "noise".into(),
                band: band.into(),
                metric: "output_noise_power".into(),
                value_db: Some(value),
                bins_included: count,
                bins_excluded: 0,
            });
        }
        Ok(rows)
    }
}

/// One line of the per-bin noise power table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisePowerRow {
    pub method: String,
    pub bin: usize,
    pub f_hz: f64,
    pub noise_power_db: f64,
    pub status: String,
}

impl NoisePowerRow {
    pub fn rows(run: &Run, filter: &StackedFilter) -> Vec<Self> {
        run.noise_power_by_bin(filter)
            .into_iter()
            .enumerate()
            .map(|(k, v)| Self {
                method: filter.method.clone(),
                bin: k,
                f_hz: run.atfs.frequencies[k],
                noise_power_db: to_db(v),
                status: filter.status[k].as_str().into(),
            })
            .collect()
    }

    pub fn write_csv<W: Write>(rows: &[Self], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamform::BinStatus;

    fn run(seconds: f64) -> Run {
        let mut scene = Scene::reference(4, 2).unwrap();
        scene.duration_s = seconds;
        let signals = source_signals(&scene, |_| unreachable!()).unwrap();
        Run::from_scene(scene, &signals, 9).unwrap()
    }

    #[test]
    fn oracle_covariances_are_valid() {
        let r = run(0.5);
        r.cpsd.validate().unwrap();
        assert_eq!(r.cpsd.bins(), 129);
    }

    #[test]
    fn jblcmv_report_preserves_cues() {
        let r = run(0.5);
        let d = r.design(Method::Jblcmv, &r.options()).unwrap();
        assert!(d.filter.status.iter().all(|s| s.is_solved()));
        let rows = r.evaluate(&d.filter, &d.scaling, 800.0).unwrap();
        for row in rows.iter().filter(|r| r.metric != "output_noise_power") {
            assert!(row.value_db.unwrap() < -100.0, "{row:?}");
        }
        let out = r.output(&d.filter).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].len(), r.mixture.len());
    }

    #[test]
    fn wav_sources_use_loader() {
        let mut scene = Scene::reference(2, 1).unwrap();
        scene.duration_s = 0.1;
        scene.sources[1].signal = crate::scene::SignalSpec::Wav { path: "x.wav".into() };
        let n = scene.sample_count();
        let mut calls = Vec::new();
        let s = source_signals(&scene, |p| {
            calls.push(p.to_path_buf());
            Ok(vec![0.5; n])
        })
        .unwrap();
        assert_eq!(calls, vec![std::path::PathBuf::from("x.wav")]);
        assert_eq!(s[1][0], 0.5);
    }

    #[test]
    fn pass_through_noise_power_is_unity() {
        let r = run(0.3);
        let f = StackedFilter::pass_through(r.atfs.bins(), 4, r.refs().left, r.refs().right);
        for v in r.noise_power_by_bin(&f) {
            assert!((v - 1.0).abs() < 1e-12);
        }
        let rows = r
            .evaluate(&f, &r.scaling(Method::Bmvdr, 800.0).unwrap(), 800.0)
            .unwrap();
        let all = rows.iter().find(|r| r.band == "all").unwrap();
        assert!(all.value_db.unwrap().abs() < 1e-9);
        assert_eq!(f.status[0], BinStatus::Solved);
    }
}
