use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_part, outer, CMat, C64};
use crate::stft::{analyze, Spectrogram, StftConfig};

use super::atf::AtfSet;

/// Per-bin covariance matrices. `noise` is always present.
#[derive(Debug, Clone, PartialEq)]
pub struct CpsdSet {
    pub noise: Vec<CMat>,
    pub target: Option<Vec<CMat>>,
    pub interferers: Option<Vec<Vec<CMat>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    Ok,
    /// Fewer than `2M` frames averaged.
    FewFrames,
}

/// Per-bin source powers: target and interferers `[source][bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePsds {
    pub target: Vec<f64>,
    pub interferers: Vec<Vec<f64>>,
}

impl CpsdSet {
    pub fn bins(&self) -> usize {
        self.noise.len()
    }

    /// Hermitian to 1e-12 relative, eigenvalues >= -1e-10 relative.
    pub fn validate(&self) -> Result<()> {
        for (k, p) in self.noise.iter().enumerate() {
            let scale = p.norm().max(f64::MIN_POSITIVE);
            if (p - p.adjoint()).norm() > 1e-12 * scale {
                return Err(Error::Numeric(format!("noise CPSD at bin {k} is not Hermitian")));
            }
            let eig = hermitian_eigenvalues(p);
            let top = eig.first().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
            if eig.iter().any(|&v| v < -1e-10 * top) {
                return Err(Error::Numeric(format!(
                    "noise CPSD at bin {k} is not positive semidefinite"
                )));
            }
        }
        Ok(())
    }
}

/// `P_N(k) = sum_i psd_i(k) b_i b_i^H + sigma_v^2(k) I`.
pub fn oracle_cpsd(atfs: &AtfSet, psds: &SourcePsds, self_noise_power: &[f64]) -> Result<CpsdSet> {
    let bins = atfs.bins();
    if psds.target.len() != bins
        || self_noise_power.len() != bins
        || psds.interferers.len() != atfs.interferer_count()
        || psds.interferers.iter().any(|p| p.len() != bins)
    {
        return Err(Error::Input("PSD shapes do not match the ATF set".into()));
    }
    let m = atfs.mic_count();
    let mut noise = Vec::with_capacity(bins);
    let mut target = Vec::with_capacity(bins);
    let mut interferers = vec![Vec::with_capacity(bins); atfs.interferer_count()];
    for k in 0..bins {
        let mut p = CMat::identity(m, m) * C64::from(self_noise_power[k]);
        for (i, per) in interferers.iter_mut().enumerate() {
            let b = atfs.interferer(i, k);
            let pi = outer(b, b) * C64::from(psds.interferers[i][k]);
            p += &pi;
            per.push(hermitian_part(&pi));
        }
        noise.push(hermitian_part(&p));
        let a = atfs.target(k);
        target.push(hermitian_part(&(outer(a, a) * C64::from(psds.target[k]))));
    }
    Ok(CpsdSet {
        noise,
        target: Some(target),
        interferers: Some(interferers),
    })
}

/// Sample covariance `1/L sum_l y y^H` of noise-only frames.
pub fn estimate_cpsd(frames: &Spectrogram) -> Result<(CpsdSet, EstimateStatus)> {
    let l = frames.frames();
    if l == 0 {
        return Err(Error::Input("no frames to estimate from".into()));
    }
    let m = frames.channels();
    let mut noise = Vec::with_capacity(frames.bins());
    for k in 0..frames.bins() {
        let mut p = CMat::zeros(m, m);
        for t in 0..l {
            let y = frames.vector(k, t);
            p += outer(&y, &y);
        }
        noise.push(hermitian_part(&p.unscale(l as f64)));
    }
    let status = if l < 2 * m {
        EstimateStatus::FewFrames
    } else {
        EstimateStatus::Ok
    };
    Ok((
        CpsdSet {
            noise,
            target: None,
            interferers: None,
        },
        status,
    ))
}

/// Mean over frames of `|S(k, l)|^2` for a mono signal.
pub fn stft_psd(config: &StftConfig, signal: &[f64]) -> Result<Vec<f64>> {
    let spec = analyze(config, &[signal.to_vec()])?;
    let l = spec.frames() as f64;
    Ok((0..spec.bins())
        .map(|k| (0..spec.frames()).map(|t| spec.get(0, t, k).norm_sqr()).sum::<f64>() / l)
        .collect())
}

/// Per-bin STFT power of white noise with variance `variance`.
pub fn white_noise_psd(config: &StftConfig, variance: f64) -> Vec<f64> {
    let energy: f64 = config.window().iter().map(|w| w * w).sum();
    vec![variance * energy; config.bins()]
}
