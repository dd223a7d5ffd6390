//! Interaural cues of input and filtered sources, cue errors and output
//! noise power.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::Range;

use serde::Serialize;

use crate::beamform::{BinStatus, RefMics, StackedFilter};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::scene::AtfSet;
use crate::stft::Spectrogram;

/// Report value standing in for zero error.
pub const FLOOR_DB: f64 = -300.0;

/// Ratio `num / den`; `None` when `|den| <= 1e-300`.
pub fn itf(num: C64, den: C64) -> Option<C64> {
    if den.norm() <= 1e-300 {
        None
    } else {
        Some(num / den)
    }
}

/// Wraps to `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = (x + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `| |out|^2 - c |in|^2 |`.
pub fn ild_err(out: C64, input: C64, c: f64) -> f64 {
    (out.norm_sqr() - c * input.norm_sqr()).abs()
}

/// Wrapped phase difference normalized to `[0, 1]`.
pub fn ipd_err(out: C64, input: C64) -> f64 {
    wrap_phase(out.arg() - input.arg()).abs() / PI
}

/// `10 log10(x)` clamped at the floor.
pub fn to_db(x: f64) -> f64 {
    if x > 0.0 {
        (10.0 * x.log10()).max(FLOOR_DB)
    } else {
        FLOOR_DB
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cue {
    pub itf: C64,
    /// Power ratio `|ITF|^2`.
    pub ild: f64,
    /// Radians in `(-pi, pi]`.
    pub ipd: f64,
    /// Seconds; `None` at DC.
    pub itd: Option<f64>,
}

impl Cue {
    pub fn new(itf: C64, f_hz: f64) -> Self {
        let ipd = wrap_phase(itf.arg());
        Self {
            itf,
            ild: itf.norm_sqr(),
            ipd,
            itd: (f_hz > 0.0).then(|| ipd / (2.0 * PI * f_hz)),
        }
    }
}

/// Input and output cues of one source at one bin; `None` where the ITF
/// is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinCues {
    pub bin: usize,
    pub f_hz: f64,
    pub input: Option<Cue>,
    pub output: Option<Cue>,
}

/// Cues of `source` (0 is the target) through `filter` at every bin.
pub fn source_cues(filter: &StackedFilter, atfs: &AtfSet, source: usize, refs: RefMics) -> Vec<BinCues> {
    (0..atfs.bins())
        .map(|k| {
            let f_hz = atfs.frequencies[k];
            let s = atfs.source(source, k);
            let input = itf(s[refs.left], s[refs.right]).map(|v| Cue::new(v, f_hz));
            let output = itf(filter.left(k).dotc(s), filter.right(k).dotc(s)).map(|v| Cue::new(v, f_hz));
            BinCues {
                bin: k,
                f_hz,
                input,
                output,
            }
        })
        .collect()
}

/// Mean lower-band errors of one source in dB. `None` when no bin was
/// included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueSummary {
    pub ild_db: Option<f64>,
    pub ipd_db: Option<f64>,
    pub included: usize,
    pub excluded: usize,
}

/// Averages per-bin errors over bins with `0 < f < cutoff`; bins whose
/// filter is not the method's own or whose cue is undefined are excluded
/// and counted. `scaling[k]` is the intended ILD factor at bin `k`.
pub fn lower_band_summary(cues: &[BinCues], scaling: &[f64], status: &[BinStatus], cutoff: f64) -> Result<CueSummary> {
    if scaling.len() != cues.len() || status.len() != cues.len() {
        return Err(Error::Input("cue, scaling and status grids differ".into()));
    }
    let mut ild = 0.0;
    let mut ipd = 0.0;
    let mut included = 0;
    let mut excluded = 0;
    for (k, bc) in cues.iter().enumerate() {
        if !(bc.f_hz > 0.0 && bc.f_hz < cutoff) {
            continue;
        }
        match (bc.input, bc.output) {
            (Some(i), Some(o)) if status[k].is_solved() => {
                ild += ild_err(o.itf, i.itf, scaling[k]);
                ipd += ipd_err(o.itf, i.itf);
                included += 1;
            }
            _ => excluded += 1,
        }
    }
    let mean = |x: f64| (included > 0).then(|| to_db(x / included as f64));
    Ok(CueSummary {
        ild_db: mean(ild),
        ipd_db: mean(ipd),
        included,
        excluded,
    })
}

/// `(w_L^H P w_L + w_R^H P w_R) / (P_LL + P_RR)`, linear.
pub fn bin_noise_power(p_n: &CMat, w: &CVec, refs: RefMics) -> f64 {
    let m = p_n.nrows();
    let quad = |v: CVec| (v.adjoint() * p_n * &v)[(0, 0)].re;
    let out = quad(w.rows(0, m).into_owned()) + quad(w.rows(m, m).into_owned());
    let input = p_n[(refs.left, refs.left)].re + p_n[(refs.right, refs.right)].re;
    out / input
}

/// Output noise power over `bins` relative to the reference-microphone
/// input, in dB, from noise-only frames.
pub fn output_noise_power(
    filter: &StackedFilter,
    noise: &Spectrogram,
    refs: RefMics,
    bins: Range<usize>,
) -> Result<f64> {
    if noise.bins() != filter.bins() || noise.channels() != filter.mic_count() {
        return Err(Error::Input("filter and noise frames disagree in shape".into()));
    }
    let mut out = 0.0;
    let mut input = 0.0;
    for k in bins {
        let wl = filter.left(k);
        let wr = filter.right(k);
        for l in 0..noise.frames() {
            let n = noise.vector(k, l);
            out += wl.dotc(&n).norm_sqr() + wr.dotc(&n).norm_sqr();
            input += n[refs.left].norm_sqr() + n[refs.right].norm_sqr();
        }
    }
    if input == 0.0 {
        return Err(Error::Input("noise frames carry no power".into()));
    }
    Ok(to_db(out / input))
}

/// One line of the error report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub method: String,
    pub source: String,
    pub band: String,
    pub metric: String,
    pub value_db: Option<f64>,
    pub bins_included: usize,
    pub bins_excluded: usize,
}

impl ReportRow {
    /// Rows for one source: ILD and IPD errors.
    pub fn for_source(method: &str, source: &str, summary: &CueSummary) -> [Self; 2] {
        let row = |metric: &str, value_db| Self {
            method: method.into(),
            source: source.into(),
            band: "lower".into(),
            metric: metric.into(),
            value_db,
            bins_included: summary.included,
            bins_excluded: summary.excluded,
        };
        [row("ild_err", summary.ild_db), row("ipd_err", summary.ipd_db)]
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

/// Source label used in reports: `target`, `interferer_1`, ...
pub fn source_label(source: usize) -> String {
    if source == 0 {
        "target".into()
    } else {
        format!("interferer_{source}")
    }
}
