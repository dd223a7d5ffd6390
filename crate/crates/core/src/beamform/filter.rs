use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, CVec, C64};
use crate::stft::Spectrogram;

/// Outcome of the filter design at one bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinStatus {
    /// Closed-form solution.
    Solved,
    /// Closed form after dropping consistent dependent constraints.
    Reduced,
    /// Relaxation certified rank one; filter extracted from it.
    Rank1,
    /// Relaxation solved but not rank one; JBLCMV used instead.
    FallbackRank,
    /// Relaxation solver failed; JBLCMV used instead.
    FallbackSolver,
    /// No filter could be computed; weights are zero.
    Failed,
}

impl BinStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            BinStatus::Solved => "solved",
            BinStatus::Reduced => "reduced",
            BinStatus::Rank1 => "rank1",
            BinStatus::FallbackRank => "fallback-rank",
            BinStatus::FallbackSolver => "fallback-solver",
            BinStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "solved" => BinStatus::Solved,
            "reduced" => BinStatus::Reduced,
            "rank1" => BinStatus::Rank1,
            "fallback-rank" => BinStatus::FallbackRank,
            "fallback-solver" => BinStatus::FallbackSolver,
            "failed" => BinStatus::Failed,
            other => return Err(Error::Input(format!("unknown bin status {other:?}"))),
        })
    }

    /// The bin carries the filter its method intended.
    pub fn is_solved(self) -> bool {
        matches!(self, BinStatus::Solved | BinStatus::Reduced | BinStatus::Rank1)
    }

    /// Some filter (possibly a fallback) exists at the bin.
    pub fn has_filter(self) -> bool {
        self != BinStatus::Failed
    }
}

/// Per-bin stacked weights `w = [w_L; w_R]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedFilter {
    pub method: String,
    pub weights: Vec<CVec>,
    pub status: Vec<BinStatus>,
}

#[derive(Serialize, Deserialize)]
struct FilterRow {
    bin: usize,
    side: String,
    mic_index: usize,
    re: f64,
    im: f64,
    method: String,
    status: String,
}

impl StackedFilter {
    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn mic_count(&self) -> usize {
        self.weights.first().map(|w| w.len() / 2).unwrap_or(0)
    }

    pub fn left(&self, bin: usize) -> CVec {
        self.weights[bin].rows(0, self.mic_count()).into_owned()
    }

    pub fn right(&self, bin: usize) -> CVec {
        let m = self.mic_count();
        self.weights[bin].rows(m, m).into_owned()
    }

    /// Selects the reference microphones unchanged.
    pub fn pass_through(bins: usize, m: usize, left: usize, right: usize) -> Self {
        let mut w = CVec::zeros(2 * m);
        w[left] = c(1.0, 0.0);
        w[m + right] = c(1.0, 0.0);
        Self {
            method: "pass-through".into(),
            weights: vec![w; bins],
            status: vec![BinStatus::Solved; bins],
        }
    }

    /// Columns `bin, side, mic_index, re, im, method, status`; microphones
    /// numbered from 1, side `L` or `R`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let m = self.mic_count();
        for (k, weights) in self.weights.iter().enumerate() {
            for (side, offset) in [("L", 0), ("R", m)] {
                for j in 0..m {
                    let v = weights[offset + j];
                    w.serialize(FilterRow {
                        bin: k,
                        side: side.into(),
                        mic_index: j + 1,
                        re: v.re,
                        im: v.im,
                        method: self.method.clone(),
                        status: self.status[k].as_str().into(),
                    })?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows: Vec<FilterRow> = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            rows.push(row?);
        }
        let first = rows
            .first()
            .ok_or_else(|| Error::Input("filter table is empty".into()))?;
        let method = first.method.clone();
        let bins = rows.iter().map(|r| r.bin + 1).max().unwrap_or(0);
        let m = rows.iter().map(|r| r.mic_index).max().unwrap_or(0);
        if m == 0 || rows.len() != bins * 2 * m {
            return Err(Error::Input("filter table is incomplete".into()));
        }
        let mut weights = vec![CVec::zeros(2 * m); bins];
        let mut status = vec![BinStatus::Failed; bins];
        for r in &rows {
            if r.mic_index == 0 {
                return Err(Error::Input("microphone indices start at 1".into()));
            }
            let offset = match r.side.as_str() {
                "L" => 0,
                "R" => m,
                other => return Err(Error::Input(format!("unknown side {other:?}"))),
            };
            weights[r.bin][offset + r.mic_index - 1] = C64::new(r.re, r.im);
            status[r.bin] = BinStatus::parse(&r.status)?;
        }
        Ok(Self {
            method,
            weights,
            status,
        })
    }
}

/// Binaural output frames: channel 0 is `w_L^H y`, channel 1 `w_R^H y`.
pub fn apply(filter: &StackedFilter, frames: &Spectrogram) -> Result<Spectrogram> {
    let m = filter.mic_count();
    if frames.bins() != filter.bins() || frames.channels() != m {
        return Err(Error::Input(format!(
            "filter has {} bins x {} mics, frames have {} bins x {} channels",
            filter.bins(),
            m,
            frames.bins(),
            frames.channels()
        )));
    }
    let mut out = Spectrogram::zeros(2, frames.frames(), frames.bins(), frames.signal_len());
    for k in 0..frames.bins() {
        let wl = filter.left(k);
        let wr = filter.right(k);
        for l in 0..frames.frames() {
            let y = frames.vector(k, l);
            out.set(0, l, k, wl.dotc(&y));
            out.set(1, l, k, wr.dotc(&y));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stft::{analyze, StftConfig};

    fn frames() -> Spectrogram {
        let cfg = StftConfig::new(16_000.0, 256).unwrap();
        let sig: Vec<Vec<f64>> = (0..3)
            .map(|j| (0..1000).map(|n| ((n * (j + 1)) as f64 * 0.01).sin()).collect())
            .collect();
        analyze(&cfg, &sig).unwrap()
    }

    #[test]
    fn pass_through_selects_references() {
        let y = frames();
        let f = StackedFilter::pass_through(y.bins(), 3, 2, 0);
        let out = apply(&f, &y).unwrap();
        for l in 0..y.frames() {
            for k in 0..y.bins() {
                assert_eq!(out.get(0, l, k), y.get(2, l, k));
                assert_eq!(out.get(1, l, k), y.get(0, l, k));
            }
        }
    }

    #[test]
    fn apply_rejects_shape_mismatch() {
        let y = frames();
        let f = StackedFilter::pass_through(y.bins() - 1, 3, 2, 0);
        assert!(apply(&f, &y).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut f = StackedFilter::pass_through(4, 2, 1, 0);
        f.weights[2][3] = C64::new(0.25, -1.5e-7);
        f.status[1] = BinStatus::FallbackRank;
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"bin,side,mic_index,re,im,method,status"));
        assert_eq!(StackedFilter::read_csv(buf.as_slice()).unwrap(), f);
    }
}
