use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::filter::{BinStatus, StackedFilter};
use super::{bmvdr, jblcmv, objective, regularize, ConstraintSet, LcmvStatus, RefMics};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::scene::AtfSet;
use crate::sdp::{build_problem, qcqp_oracle, solve, LiftedSolution, OracleOptions, SolverOptions, Variant};
use crate::sphere::{DvfTable, SphereParams, FAR_FIELD_DISTANCE};

/// Beamformer selection. `Ild(d)` enhances lower-band interferer ILDs to
/// those of a source at distance `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Bmvdr,
    Jblcmv,
    Ild(f64),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Bmvdr => write!(f, "bmvdr"),
            Method::Jblcmv => write!(f, "jblcmv"),
            Method::Ild(d) => {
                let s = format!("{d}");
                if s.contains('.') {
                    write!(f, "ild_{s}")
                } else {
                    write!(f, "ild_{s}.0")
                }
            }
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bmvdr" => Ok(Method::Bmvdr),
            "jblcmv" => Ok(Method::Jblcmv),
            other => {
                let d = other
                    .strip_prefix("ild_")
                    .and_then(|d| d.parse::<f64>().ok())
                    .filter(|d| d.is_finite() && *d > 0.0)
                    .ok_or_else(|| Error::Config(format!("unknown method {other:?}")))?;
                Ok(Method::Ild(d))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSplitOptions {
    pub cutoff_hz: f64,
    pub variant: Variant,
    pub solver: SolverOptions,
    /// Also run the brute-force oracle (small arrays only).
    pub oracle: bool,
}

impl Default for BandSplitOptions {
    fn default() -> Self {
        Self {
            cutoff_hz: 800.0,
            variant: Variant::Problem3,
            solver: SolverOptions::default(),
            oracle: false,
        }
    }
}

/// Per-bin record of the lower-band relaxations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinDiagnostics {
    pub bin: usize,
    pub f_hz: f64,
    pub objective_p2: f64,
    pub objective_p3: f64,
    pub oracle_upper: Option<f64>,
    pub objective_bmvdr: f64,
    pub objective_jblcmv: Option<f64>,
    pub rank1_gap: f64,
    pub solver_status: String,
    pub bin_status: String,
    pub iterations: usize,
}

impl BinDiagnostics {
    pub fn write_csv<W: Write>(rows: &[Self], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IldOutcome {
    pub w: CVec,
    pub status: BinStatus,
    pub p2: LiftedSolution,
    pub p3: LiftedSolution,
    pub bmvdr_objective: f64,
    pub jblcmv_objective: Option<f64>,
}

impl IldOutcome {
    pub fn chosen(&self, variant: Variant) -> &LiftedSolution {
        match variant {
            Variant::Problem2 => &self.p2,
            Variant::Problem3 => &self.p3,
        }
    }
}

/// Lower-band beamformer: minimum noise output with the target
/// distortionless at both references and every interferer's output ILD
/// scaled by its factor. Falls back to JBLCMV when the chosen relaxation is
/// not certified rank one.
pub fn ild_enhancing(
    p_n: &CMat,
    a: &CVec,
    interferers: &[CVec],
    c_factors: &[f64],
    refs: RefMics,
    variant: Variant,
    opts: &SolverOptions,
) -> Result<IldOutcome> {
    let w_b = bmvdr(p_n, a, refs)?;
    let fallback = jblcmv(p_n, &ConstraintSet::new(a, interferers, refs)).ok();
    let p2 = solve(
        &build_problem(p_n, a, interferers, c_factors, refs, Variant::Problem2)?,
        opts,
    );
    let p3 = solve(
        &build_problem(p_n, a, interferers, c_factors, refs, Variant::Problem3)?,
        opts,
    );
    let chosen = match variant {
        Variant::Problem2 => &p2,
        Variant::Problem3 => &p3,
    };
    let (w, status) = if chosen.certified {
        (chosen.w.clone(), BinStatus::Rank1)
    } else {
        let status = if chosen.status == crate::sdp::SolveStatus::Solved {
            BinStatus::FallbackRank
        } else {
            BinStatus::FallbackSolver
        };
        match &fallback {
            Some((w, _)) => (w.clone(), status),
            None => {
                return Err(Error::Numeric(
                    "relaxation not certified and JBLCMV fallback unavailable".into(),
                ))
            }
        }
    };
    Ok(IldOutcome {
        w,
        status,
        bmvdr_objective: objective(p_n, &w_b),
        jblcmv_objective: fallback.as_ref().map(|(w, _)| objective(p_n, w)),
        p2,
        p3,
    })
}

fn in_lower_band(atfs: &AtfSet, k: usize, cutoff: f64) -> bool {
    let f = atfs.frequencies[k];
    f > 0.0 && f < cutoff && k + 1 != atfs.bins()
}

/// ILD scaling factors `[bin][interferer]` for the lower band; 1 elsewhere.
pub fn scaling_factors(
    atfs: &AtfSet,
    azimuths: &[f64],
    distance: f64,
    params: &SphereParams,
    cutoff: f64,
) -> Result<Vec<Vec<f64>>> {
    if azimuths.len() != atfs.interferer_count() {
        return Err(Error::Input("one azimuth per interferer is required".into()));
    }
    let lower: Vec<f64> = (0..atfs.bins())
        .filter(|&k| in_lower_band(atfs, k, cutoff))
        .map(|k| atfs.frequencies[k])
        .collect();
    if lower.is_empty() {
        return Ok(vec![vec![1.0; azimuths.len()]; atfs.bins()]);
    }
    let grid: Vec<f64> = (-36..=36).map(|i| i as f64 * 5.0).collect();
    let table = DvfTable::build(params, &lower, &grid, &[distance], FAR_FIELD_DISTANCE, cutoff)?;
    (0..atfs.bins())
        .map(|k| {
            if in_lower_band(atfs, k, cutoff) {
                azimuths
                    .iter()
                    .map(|&az| table.interpolate(atfs.frequencies[k], wrap_azimuth(az), distance))
                    .collect()
            } else {
                Ok(vec![1.0; azimuths.len()])
            }
        })
        .collect()
}

fn wrap_azimuth(az: f64) -> f64 {
    let w = (az + 180.0).rem_euclid(360.0) - 180.0;
    if w == -180.0 {
        180.0
    } else {
        w
    }
}

/// Filters, statuses and lower-band diagnostics of one method.
#[derive(Debug, Clone)]
pub struct Design {
    pub filter: StackedFilter,
    pub diagnostics: Vec<BinDiagnostics>,
    /// ILD scaling factors `[bin][interferer]` the filter was designed for.
    pub scaling: Vec<Vec<f64>>,
}

fn lcmv_status(s: &LcmvStatus) -> BinStatus {
    match s {
        LcmvStatus::Full => BinStatus::Solved,
        LcmvStatus::Reduced { .. } => BinStatus::Reduced,
    }
}

/// ILD enhancer below the cutoff (DC and Nyquist excluded), JBLCMV at and
/// above it.
pub fn band_split(
    method: &str,
    atfs: &AtfSet,
    noise: &[CMat],
    refs: RefMics,
    scaling: &[Vec<f64>],
    opts: &BandSplitOptions,
) -> Result<Design> {
    if noise.len() != atfs.bins() || scaling.len() != atfs.bins() {
        return Err(Error::Input(
            "covariances or scaling factors do not cover every bin".into(),
        ));
    }
    let m2 = 2 * atfs.mic_count();
    let per_bin: Vec<(CVec, BinStatus, Option<BinDiagnostics>)> = (0..atfs.bins())
        .into_par_iter()
        .map(|k| {
            let p = regularize(&noise[k]);
            let a = atfs.target(k);
            let bs = atfs.interferers_at(k);
            if in_lower_band(atfs, k, opts.cutoff_hz) {
                match ild_enhancing(&p, a, &bs, &scaling[k], refs, opts.variant, &opts.solver) {
                    Ok(out) => {
                        let chosen = out.chosen(opts.variant);
                        let oracle_upper = if opts.oracle {
                            qcqp_oracle(&p, a, &bs, &scaling[k], refs, &OracleOptions::default())
                                .ok()
                                .filter(|o| o.feasible)
                                .map(|o| o.objective)
                        } else {
                            None
                        };
                        let diag = BinDiagnostics {
                            bin: k,
                            f_hz: atfs.frequencies[k],
                            objective_p2: out.p2.objective,
                            objective_p3: out.p3.objective,
                            oracle_upper,
                            objective_bmvdr: out.bmvdr_objective,
                            objective_jblcmv: out.jblcmv_objective,
                            rank1_gap: chosen.rank1_gap,
                            solver_status: chosen.status.as_str().into(),
                            bin_status: out.status.as_str().into(),
                            iterations: chosen.iterations,
                        };
                        (out.w, out.status, Some(diag))
                    }
                    Err(_) => (CVec::zeros(m2), BinStatus::Failed, None),
                }
            } else {
                match jblcmv(&p, &ConstraintSet::new(a, &bs, refs)) {
                    Ok((w, s)) => (w, lcmv_status(&s), None),
                    Err(_) => (CVec::zeros(m2), BinStatus::Failed, None),
                }
            }
        })
        .collect();
    let mut weights = Vec::with_capacity(per_bin.len());
    let mut status = Vec::with_capacity(per_bin.len());
    let mut diagnostics = Vec::new();
    for (w, s, d) in per_bin {
        weights.push(w);
        status.push(s);
        diagnostics.extend(d);
    }
    Ok(Design {
        filter: StackedFilter {
            method: method.into(),
            weights,
            status,
        },
        diagnostics,
        scaling: scaling.to_vec(),
    })
}

/// Designs the filter of `method` at every bin from noise covariances.
pub fn design(
    method: Method,
    atfs: &AtfSet,
    noise: &[CMat],
    refs: RefMics,
    interferer_azimuths: &[f64],
    params: &SphereParams,
    opts: &BandSplitOptions,
) -> Result<Design> {
    if noise.len() != atfs.bins() {
        return Err(Error::Input("one covariance per bin is required".into()));
    }
    let name = method.to_string();
    let m2 = 2 * atfs.mic_count();
    let closed = |f: &(dyn Fn(&CMat, usize) -> Result<(CVec, BinStatus)> + Sync)| -> Design {
        let (weights, status): (Vec<CVec>, Vec<BinStatus>) = (0..atfs.bins())
            .into_par_iter()
            .map(|k| f(&regularize(&noise[k]), k).unwrap_or_else(|_| (CVec::zeros(m2), BinStatus::Failed)))
            .unzip();
        Design {
            filter: StackedFilter {
                method: name.clone(),
                weights,
                status,
            },
            diagnostics: Vec::new(),
            scaling: vec![vec![1.0; atfs.interferer_count()]; atfs.bins()],
        }
    };
    match method {
        Method::Bmvdr => Ok(closed(&|p, k| Ok((bmvdr(p, atfs.target(k), refs)?, BinStatus::Solved)))),
        Method::Jblcmv => Ok(closed(&|p, k| {
            let (w, s) = jblcmv(p, &ConstraintSet::new(atfs.target(k), &atfs.interferers_at(k), refs))?;
            Ok((w, lcmv_status(&s)))
        })),
        Method::Ild(d) => {
            let scaling = scaling_factors(atfs, interferer_azimuths, d, params, opts.cutoff_hz)?;
            band_split(&name, atfs, noise, refs, &scaling, opts)
        }
    }
}
