use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CVec, C64};
use crate::sphere::{angular_separation, normalized_pressure, SphereParams};

use super::config::Scene;

/// Per-bin steering vectors. Source 0 is the target; interferer `i` is
/// stored at source index `i + 1` in CSV exports.
#[derive(Debug, Clone, PartialEq)]
pub struct AtfSet {
    pub frequencies: Vec<f64>,
    target: Vec<CVec>,
    interferers: Vec<Vec<CVec>>,
}

#[derive(Serialize, Deserialize)]
struct AtfRow {
    bin: usize,
    source_id: usize,
    mic_index: usize,
    re: f64,
    im: f64,
}

impl AtfSet {
    pub fn new(frequencies: Vec<f64>, target: Vec<CVec>, interferers: Vec<Vec<CVec>>) -> Result<Self> {
        let bins = frequencies.len();
        if bins == 0 || target.len() != bins || interferers.iter().any(|b| b.len() != bins) {
            return Err(Error::Input("ATF bin counts disagree with the frequency grid".into()));
        }
        let m = target[0].len();
        if m == 0 || target.iter().chain(interferers.iter().flatten()).any(|v| v.len() != m) {
            return Err(Error::Input(
                "ATF vectors must all have the microphone count as length".into(),
            ));
        }
        Ok(Self {
            frequencies,
            target,
            interferers,
        })
    }

    pub fn bins(&self) -> usize {
        self.frequencies.len()
    }

    pub fn mic_count(&self) -> usize {
        self.target[0].len()
    }

    pub fn interferer_count(&self) -> usize {
        self.interferers.len()
    }

    pub fn target(&self, bin: usize) -> &CVec {
        &self.target[bin]
    }

    pub fn interferer(&self, index: usize, bin: usize) -> &CVec {
        &self.interferers[index][bin]
    }

    /// All interferer vectors at one bin.
    pub fn interferers_at(&self, bin: usize) -> Vec<CVec> {
        self.interferers.iter().map(|b| b[bin].clone()).collect()
    }

    /// Source 0 is the target, `i + 1` interferer `i`.
    pub fn source(&self, source: usize, bin: usize) -> &CVec {
        if source == 0 {
            &self.target[bin]
        } else {
            &self.interferers[source - 1][bin]
        }
    }

    pub fn source_count(&self) -> usize {
        1 + self.interferers.len()
    }

    /// Fails if any vector vanishes in `bins`.
    pub fn check_nonzero(&self, bins: std::ops::Range<usize>) -> Result<()> {
        for k in bins {
            for s in 0..self.source_count() {
                if self.source(s, k).iter().all(|v| v.norm() == 0.0) {
                    return Err(Error::Input(format!("ATF of source {s} vanishes at bin {k}")));
                }
            }
        }
        Ok(())
    }

    /// Columns `bin, source_id, mic_index, re, im`; microphones are
    /// numbered from 1.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for k in 0..self.bins() {
            for s in 0..self.source_count() {
                for (j, v) in self.source(s, k).iter().enumerate() {
                    w.serialize(AtfRow {
                        bin: k,
                        source_id: s,
                        mic_index: j + 1,
                        re: v.re,
                        im: v.im,
                    })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`AtfSet::write_csv`] or supplied
    /// externally. `frequencies` gives the bin grid.
    pub fn read_csv<R: Read>(reader: R, frequencies: Vec<f64>, mics: usize) -> Result<Self> {
        let bins = frequencies.len();
        let mut rows: Vec<AtfRow> = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            rows.push(row?);
        }
        let sources = rows.iter().map(|r| r.source_id + 1).max().unwrap_or(0);
        if sources == 0 {
            return Err(Error::Input("ATF table is empty".into()));
        }
        let mut data = vec![vec![CVec::zeros(mics); bins]; sources];
        let mut seen = vec![false; sources * bins * mics];
        for r in &rows {
            if r.bin >= bins || r.mic_index == 0 || r.mic_index > mics {
                return Err(Error::Input(format!(
                    "ATF row (bin {}, mic {}) outside {bins} bins x {mics} microphones",
                    r.bin, r.mic_index
                )));
            }
            data[r.source_id][r.bin][r.mic_index - 1] = c(r.re, r.im);
            seen[(r.source_id * bins + r.bin) * mics + r.mic_index - 1] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            let source = i / (bins * mics);
            let bin = (i / mics) % bins;
            return Err(Error::Input(format!("ATF table misses source {source} at bin {bin}")));
        }
        let mut data = data.into_iter();
        let target = data.next().unwrap();
        Self::new(frequencies, target, data.collect())
    }
}

fn source_vector(
    scene: &Scene,
    params: &SphereParams,
    f: f64,
    azimuth: f64,
    distance: f64,
    bin: usize,
    nyquist: bool,
) -> Result<CVec> {
    let m = scene.mic_count();
    if f == 0.0 {
        return Ok(CVec::from_element(m, c(1.0, 0.0)));
    }
    let mut v = CVec::zeros(m);
    for (j, &mic) in scene.mic_array.azimuths_deg.iter().enumerate() {
        let theta = angular_separation(azimuth, mic);
        let p: C64 = normalized_pressure(params, f, theta, distance).map_err(|e| match e {
            Error::Numeric(msg) => Error::Numeric(format!("bin {bin}, source at {azimuth} deg: {msg}")),
            other => other,
        })?;
        v[j] = if nyquist { c(p.norm(), 0.0) } else { p };
    }
    Ok(v)
}

/// Sphere-model ATFs for every bin from DC to Nyquist.
pub fn build_atfs(scene: &Scene) -> Result<AtfSet> {
    scene.validate()?;
    let params = scene.sphere_params();
    let n = scene.fft_size;
    let bins = n / 2 + 1;
    let frequencies: Vec<f64> = (0..bins).map(|k| k as f64 * scene.sample_rate / n as f64).collect();
    let per_source = |azimuth: f64, distance: f64| -> Result<Vec<CVec>> {
        frequencies
            .iter()
            .enumerate()
            .map(|(k, &f)| source_vector(scene, &params, f, azimuth, distance, k, k == bins - 1))
            .collect()
    };
    let t = scene.target();
    let target = per_source(t.azimuth_deg, t.distance_m)?;
    let interferers = scene
        .interferers()
        .map(|s| per_source(s.azimuth_deg, s.distance_m))
        .collect::<Result<Vec<_>>>()?;
    AtfSet::new(frequencies, target, interferers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::ear_ild_db;

    #[test]
    fn mid_sagittal_target_is_symmetric() {
        let scene = Scene::reference(4, 2).unwrap();
        let atfs = build_atfs(&scene).unwrap();
        for k in 0..atfs.bins() {
            let a = atfs.target(k);
            assert!((a[0].norm() - a[3].norm()).abs() <= 1e-12 * a[0].norm());
        }
    }

    #[test]
    fn dc_and_nyquist_are_real() {
        let atfs = build_atfs(&Scene::reference(4, 3).unwrap()).unwrap();
        let last = atfs.bins() - 1;
        for s in 0..atfs.source_count() {
            assert!(atfs.source(s, 0).iter().all(|v| v.im == 0.0 && v.re == 1.0));
            assert!(atfs.source(s, last).iter().all(|v| v.im == 0.0));
        }
    }

    #[test]
    fn deterministic() {
        let scene = Scene::reference(4, 4).unwrap();
        assert_eq!(build_atfs(&scene).unwrap(), build_atfs(&scene).unwrap());
    }

    #[test]
    fn near_field_interferer_ild() {
        let mut scene = Scene::reference(2, 1).unwrap();
        scene.sources[1].azimuth_deg = 90.0;
        scene.sources[1].distance_m = 0.2;
        scene.fft_size = 64; // 250 Hz spacing puts 500 Hz on bin 2
        let atfs = build_atfs(&scene).unwrap();
        assert_eq!(atfs.frequencies[2], 500.0);
        let b = atfs.interferer(0, 2);
        let ild = 10.0 * (b[1].norm_sqr() / b[0].norm_sqr()).log10();
        assert!((ild - (-12.364_379_625_575)).abs() < 1e-6, "{ild}");
        let direct = ear_ild_db(&scene.sphere_params(), 500.0, 90.0, 0.2).unwrap();
        assert!((ild - direct).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip() {
        let scene = Scene::reference(4, 2).unwrap();
        let atfs = build_atfs(&scene).unwrap();
        let mut buf = Vec::new();
        atfs.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"bin,source_id,mic_index,re,im"));
        let back = AtfSet::read_csv(buf.as_slice(), atfs.frequencies.clone(), 4).unwrap();
        assert_eq!(back, atfs);
    }

    #[test]
    fn csv_missing_row_rejected() {
        let text = "bin,source_id,mic_index,re,im\n0,0,1,1.0,0.0\n";
        assert!(AtfSet::read_csv(text.as_bytes(), vec![0.0], 2).is_err());
    }
}
