//! Rigid-sphere head model.
//!
//! Surface pressure on a rigid sphere from a point source, evaluated as a
//! spherical Hankel / Legendre series. The distance variation function
//! (DVF) is the ratio of near-field to far-field surface pressure, and its
//! interaural squared-magnitude ratio gives the scaling factor `c` that maps
//! far-field ILDs to near-field ILDs.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, C64};

/// Far-field reference distance in meters.
pub const FAR_FIELD_DISTANCE: f64 = 1.0;

/// Distances used for the published scaling-factor curves.
pub const REFERENCE_DISTANCES: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereParams {
    /// Head radius in meters.
    pub radius: f64,
    /// Speed of sound in m/s.
    pub speed_of_sound: f64,
    /// Ear position measured from the mid-sagittal plane, degrees. The left
    /// ear sits at `-ear_azimuth`, the right ear at `+ear_azimuth`.
    pub ear_azimuth: f64,
    /// Relative size of the last included term at which the series stops.
    pub series_tolerance: f64,
    pub max_terms: usize,
}

impl Default for SphereParams {
    fn default() -> Self {
        Self {
            radius: 0.0875,
            speed_of_sound: 343.0,
            ear_azimuth: 100.0,
            series_tolerance: 1e-12,
            max_terms: 200,
        }
    }
}

impl SphereParams {
    pub fn with_radius(radius: f64) -> Self {
        Self {
            radius,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Geometry(format!(
                "sphere radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.speed_of_sound > 0.0) {
            return Err(Error::Domain("speed of sound must be positive".into()));
        }
        if !(self.series_tolerance > 0.0 && self.series_tolerance < 1e-6) {
            return Err(Error::Domain(format!(
                "series tolerance must lie in (0, 1e-6), got {}",
                self.series_tolerance
            )));
        }
        if self.max_terms < 50 {
            return Err(Error::Domain(format!(
                "max_terms must be at least 50, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }

    pub fn wavenumber(&self, f: f64) -> f64 {
        2.0 * PI * f / self.speed_of_sound
    }

    pub fn left_ear(&self) -> f64 {
        -self.ear_azimuth
    }

    pub fn right_ear(&self) -> f64 {
        self.ear_azimuth
    }
}

/// Legendre polynomial `P_m(x)` by the three-term recurrence.
pub fn legendre(m: usize, x: f64) -> Result<f64> {
    if !(x.abs() <= 1.0) {
        return Err(Error::Domain(format!("legendre argument {x} outside [-1, 1]")));
    }
    let (mut prev, mut cur) = (1.0, x);
    if m == 0 {
        return Ok(prev);
    }
    for n in 1..m {
        let next = ((2 * n + 1) as f64 * x * cur - n as f64 * prev) / (n + 1) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Spherical Hankel function of the first kind, `h_m(x) = j_m(x) + i y_m(x)`,
/// and its derivative with respect to `x`.
pub fn spherical_hankel1(m: usize, x: f64) -> Result<(C64, C64)> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "spherical Hankel argument must be positive, got {x}"
        )));
    }
    let mut seq = HankelSeq::new(x);
    for _ in 0..m {
        seq.advance();
    }
    if !seq.value().is_finite() || !seq.next_value().is_finite() {
        return Err(Error::Numeric(format!(
            "spherical Hankel overflow at order {m} for x = {x}"
        )));
    }
    Ok((seq.value(), seq.derivative()))
}

/// Upward recurrence over orders for a fixed argument.
struct HankelSeq {
    x: f64,
    order: usize,
    prev: C64,
    cur: C64,
    next: C64,
}

impl HankelSeq {
    fn new(x: f64) -> Self {
        let (s, co) = x.sin_cos();
        let h0 = c(s / x, -co / x);
        let h1 = c(s / (x * x) - co / x, -co / (x * x) - s / x);
        Self {
            x,
            order: 0,
            // h_{-1}(x) = i h_0 ... only used through the derivative identity
            // at order 0, which is handled separately.
            prev: C64::new(0.0, 0.0),
            cur: h0,
            next: h1,
        }
    }

    fn value(&self) -> C64 {
        self.cur
    }

    fn next_value(&self) -> C64 {
        self.next
    }

    fn derivative(&self) -> C64 {
        if self.order == 0 {
            -self.next
        } else {
            self.prev - self.cur * ((self.order + 1) as f64 / self.x)
        }
    }

    fn advance(&mut self) {
        let m = self.order + 1;
        let following = self.next * ((2 * m + 1) as f64 / self.x) - self.cur;
        self.prev = self.cur;
        self.cur = self.next;
        self.next = following;
        self.order = m;
    }
}

/// Outcome of a truncated series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct SeriesValue {
    pub value: C64,
    pub terms: usize,
    pub achieved_tolerance: f64,
}

/// Surface pressure of a rigid sphere for a point source at distance `r`
/// and angle `theta` (degrees) from the surface point:
///
/// `p = -kr * sum_m (2m+1) h_m(kr) / h'_m(ka) * P_m(cos theta) * exp(-ikr)`.
pub fn sphere_pressure(params: &SphereParams, f: f64, theta: f64, r: f64) -> Result<C64> {
    Ok(sphere_pressure_series(params, f, theta, r)?.value)
}

/// As [`sphere_pressure`], also reporting the number of terms used.
pub fn sphere_pressure_series(params: &SphereParams, f: f64, theta: f64, r: f64) -> Result<SeriesValue> {
    params.validate()?;
    if !(r > params.radius) {
        return Err(Error::Geometry(format!(
            "source distance {r} m must exceed the sphere radius {} m",
            params.radius
        )));
    }
    if !(f > 0.0) {
        return Err(Error::Domain(format!("frequency must be positive, got {f}")));
    }
    let k = params.wavenumber(f);
    let kr = k * r;
    let ka = k * params.radius;
    let x = theta.to_radians().cos().clamp(-1.0, 1.0);

    let mut near = HankelSeq::new(kr);
    let mut surface = HankelSeq::new(ka);
    let (mut p_prev, mut p_cur) = (1.0_f64, x);
    let mut sum = C64::new(0.0, 0.0);
    let mut last_bound = f64::INFINITY;

    for m in 0..params.max_terms {
        if m > 0 {
            near.advance();
            surface.advance();
            if m > 1 {
                let next = ((2 * m - 1) as f64 * x * p_cur - (m - 1) as f64 * p_prev) / m as f64;
                p_prev = p_cur;
                p_cur = next;
            }
        }
        let legendre_m = if m == 0 { p_prev } else { p_cur };
        let ratio = near.value() / surface.derivative();
        if !ratio.is_finite() {
            return Err(Error::Numeric(format!(
                "sphere series overflow at order {m} (f = {f} Hz, r = {r} m)"
            )));
        }
        let weight = (2 * m + 1) as f64;
        sum += ratio * (weight * legendre_m);
        // |P_m| <= 1, so this bounds the term regardless of theta
        let bound = weight * ratio.norm();
        last_bound = bound / sum.norm().max(f64::MIN_POSITIVE);
        if m >= 1 && last_bound < params.series_tolerance {
            let phase = C64::from_polar(1.0, -kr);
            return Ok(SeriesValue {
                value: sum * phase * (-kr),
                terms: m + 1,
                achieved_tolerance: last_bound,
            });
        }
    }
    Err(Error::Numeric(format!(
        "sphere series did not converge within {} terms (achieved relative tolerance {:.3e}, f = {f} Hz, r = {r} m)",
        params.max_terms, last_bound
    )))
}

/// Surface pressure normalized by the free-field pressure at the sphere
/// center; tends to 1 at low frequency.
pub fn normalized_pressure(params: &SphereParams, f: f64, theta: f64, r: f64) -> Result<C64> {
    let ka = params.wavenumber(f) * params.radius;
    Ok(sphere_pressure(params, f, theta, r)? / (ka * ka))
}

/// Great-circle separation on the horizontal plane, wrapped to [0, 180].
pub fn angular_separation(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Near-field to far-field pressure ratio at one surface point.
pub fn dvf(params: &SphereParams, f: f64, theta: f64, d_n: f64, d_f: f64) -> Result<C64> {
    for d in [d_n, d_f] {
        if !(d > params.radius) {
            return Err(Error::Geometry(format!(
                "distance {d} m must exceed the sphere radius {} m",
                params.radius
            )));
        }
    }
    if d_n == d_f {
        params.validate()?;
        return Ok(c(1.0, 0.0));
    }
    let p_n = sphere_pressure(params, f, theta, d_n)?;
    let p_f = sphere_pressure(params, f, theta, d_f)?;
    if p_f.norm() < 1e-300 {
        return Err(Error::Numeric(format!(
            "far-field pressure vanishes at f = {f} Hz, theta = {theta} deg"
        )));
    }
    Ok(p_n / p_f)
}

/// Near-field ILD scaling factor `|DVF_L|^2 / |DVF_R|^2` (linear power ratio).
pub fn dvf_ild(params: &SphereParams, f: f64, source_azimuth: f64, d_n: f64, d_f: f64) -> Result<f64> {
    let theta_l = angular_separation(source_azimuth, params.left_ear());
    let theta_r = angular_separation(source_azimuth, params.right_ear());
    let left = dvf(params, f, theta_l, d_n, d_f)?;
    let right = dvf(params, f, theta_r, d_n, d_f)?;
    Ok(left.norm_sqr() / right.norm_sqr())
}

/// Sphere-model ILD in dB between the ears for a source at `azimuth` and
/// `distance` (left over right).
pub fn ear_ild_db(params: &SphereParams, f: f64, azimuth: f64, distance: f64) -> Result<f64> {
    let theta_l = angular_separation(azimuth, params.left_ear());
    let theta_r = angular_separation(azimuth, params.right_ear());
    let left = sphere_pressure(params, f, theta_l, distance)?;
    let right = sphere_pressure(params, f, theta_r, distance)?;
    Ok(10.0 * (left.norm_sqr() / right.norm_sqr()).log10())
}

/// Dense grid of scaling factors indexed by (distance, azimuth, frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct DvfTable {
    pub frequencies: Vec<f64>,
    pub azimuths: Vec<f64>,
    pub distances: Vec<f64>,
    pub far_field_distance: f64,
    values: Vec<f64>,
}

impl DvfTable {
    /// Builds the table. Every frequency must be positive and at most
    /// `max_frequency`.
    pub fn build(
        params: &SphereParams,
        frequencies: &[f64],
        azimuths: &[f64],
        distances: &[f64],
        far_field_distance: f64,
        max_frequency: f64,
    ) -> Result<Self> {
        params.validate()?;
        check_grid("frequency", frequencies)?;
        check_grid("azimuth", azimuths)?;
        if distances.is_empty() {
            return Err(Error::Range("distance list is empty".into()));
        }
        if let Some(&f) = frequencies.iter().find(|&&f| !(f > 0.0) || f > max_frequency) {
            return Err(Error::Range(format!(
                "table frequency {f} Hz outside (0, {max_frequency}] Hz"
            )));
        }
        let mut values = Vec::with_capacity(distances.len() * azimuths.len() * frequencies.len());
        for &d in distances {
            for &az in azimuths {
                for &f in frequencies {
                    values.push(dvf_ild(params, f, az, d, far_field_distance)?);
                }
            }
        }
        Ok(Self {
            frequencies: frequencies.to_vec(),
            azimuths: azimuths.to_vec(),
            distances: distances.to_vec(),
            far_field_distance,
            values,
        })
    }

    fn index(&self, d: usize, a: usize, f: usize) -> usize {
        (d * self.azimuths.len() + a) * self.frequencies.len() + f
    }

    pub fn value(&self, distance_index: usize, azimuth_index: usize, frequency_index: usize) -> f64 {
        self.values[self.index(distance_index, azimuth_index, frequency_index)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn distance_index(&self, distance: f64) -> Result<usize> {
        self.distances
            .iter()
            .position(|&d| (d - distance).abs() <= 1e-9 * distance.abs().max(1.0))
            .ok_or_else(|| Error::Range(format!("distance {distance} m is not a table node")))
    }

    /// Bilinear interpolation in (azimuth, frequency) at a tabulated distance.
    pub fn interpolate(&self, f: f64, azimuth: f64, distance: f64) -> Result<f64> {
        let di = self.distance_index(distance)?;
        let (fi, ft) = bracket(&self.frequencies, f)
            .ok_or_else(|| Error::Range(format!("frequency {f} Hz outside table range")))?;
        let (ai, at) = bracket(&self.azimuths, azimuth)
            .ok_or_else(|| Error::Range(format!("azimuth {azimuth} deg outside table range")))?;
        let fj = (fi + 1).min(self.frequencies.len() - 1);
        let aj = (ai + 1).min(self.azimuths.len() - 1);
        let v00 = self.value(di, ai, fi);
        let v01 = self.value(di, ai, fj);
        let v10 = self.value(di, aj, fi);
        let v11 = self.value(di, aj, fj);
        Ok((1.0 - at) * ((1.0 - ft) * v00 + ft * v01) + at * ((1.0 - ft) * v10 + ft * v11))
    }

    /// CSV with columns `f_hz, azimuth_deg, distance_m, c_linear, c_db`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["f_hz", "azimuth_deg", "distance_m", "c_linear", "c_db"])?;
        for (di, &d) in self.distances.iter().enumerate() {
            for (ai, &az) in self.azimuths.iter().enumerate() {
                for (fi, &f) in self.frequencies.iter().enumerate() {
                    let v = self.value(di, ai, fi);
                    w.write_record([
                        f.to_string(),
                        az.to_string(),
                        d.to_string(),
                        v.to_string(),
                        (10.0 * v.log10()).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`DvfTable::write_csv`]. Rows may come in
    /// any order but must cover the full grid.
    pub fn read_csv<R: Read>(reader: R, far_field_distance: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Input(format!("missing column {i}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Input(format!("bad number in DVF table: {e}")))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?, parse(3)?));
        }
        let uniq = |sel: fn(&(f64, f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = rows.iter().map(sel).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let frequencies = uniq(|r| r.0);
        let azimuths = uniq(|r| r.1);
        let distances = uniq(|r| r.2);
        let n = frequencies.len() * azimuths.len() * distances.len();
        if rows.len() != n {
            return Err(Error::Input(format!("DVF table has {} rows, expected {n}", rows.len())));
        }
        let mut table = Self {
            frequencies,
            azimuths,
            distances,
            far_field_distance,
            values: vec![f64::NAN; n],
        };
        for (f, a, d, v) in rows {
            let fi = table.frequencies.iter().position(|&x| x == f).unwrap();
            let ai = table.azimuths.iter().position(|&x| x == a).unwrap();
            let di = table.distances.iter().position(|&x| x == d).unwrap();
            let idx = table.index(di, ai, fi);
            table.values[idx] = v;
        }
        if table.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Input("DVF table has duplicate or missing grid points".into()));
        }
        Ok(table)
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Range(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Range(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Lower grid index and fractional position of `x` in a sorted grid.
fn bracket(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let first = *grid.first()?;
    let last = *grid.last()?;
    let tol = 1e-9 * (last - first).abs().max(1.0);
    if x < first - tol || x > last + tol {
        return None;
    }
    if grid.len() == 1 {
        return Some((0, 0.0));
    }
    let i = match grid.iter().position(|&g| g > x) {
        Some(0) => 0,
        Some(i) => i - 1,
        None => grid.len() - 2,
    };
    let i = i.min(grid.len() - 2);
    let t = ((x - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    Some((i, t))
}
