//! Rigid-sphere pressure checked against an independent evaluation: Hankel
//! functions from their explicit finite sums, Legendre polynomials from
//! their cosine series, and a fixed high-order partial sum.

use ild_core::linalg::C64;
use ild_core::sphere::{ear_ild_db, sphere_pressure, SphereParams};
use proptest::prelude::*;

const TERMS: usize = 80;

/// `h_n(x) = (-i)^(n+1) e^(ix) / x * sum_k i^k (n+k)! / (k! (n-k)! (2x)^k)`.
fn hankel(n: usize, x: f64) -> C64 {
    let mut coef = 1.0;
    let mut sum = C64::new(0.0, 0.0);
    let mut ik = C64::new(1.0, 0.0);
    for k in 0..=n {
        sum += ik * coef;
        coef *= ((n + k + 1) * (n - k)) as f64 / ((k + 1) as f64 * 2.0 * x);
        ik *= C64::i();
    }
    C64::i().powu(3 * (n as u32 + 1)) * C64::from_polar(1.0 / x, x) * sum
}

fn hankel_derivative(n: usize, x: f64) -> C64 {
    hankel(n, x) * (n as f64 / x) - hankel(n + 1, x)
}

/// `P_n(cos t) = sum_k g_k g_(n-k) cos((n - 2k) t)` with `g_k = C(2k, k) / 4^k`.
fn legendre_cos(n: usize, t: f64) -> f64 {
    let mut g = vec![1.0; n + 1];
    for k in 1..=n {
        g[k] = g[k - 1] * (2 * k - 1) as f64 / (2 * k) as f64;
    }
    (0..=n)
        .map(|k| g[k] * g[n - k] * ((n as f64 - 2.0 * k as f64) * t).cos())
        .sum()
}

fn pressure(params: &SphereParams, f: f64, theta_deg: f64, r: f64) -> C64 {
    let k = 2.0 * std::f64::consts::PI * f / params.speed_of_sound;
    let (kr, ka) = (k * r, k * params.radius);
    let t = theta_deg.to_radians();
    let sum: C64 = (0..TERMS)
        .map(|m| {
            // scale first: |h|^2 overflows at high order and small argument
            let (num, den) = (hankel(m, kr), hankel_derivative(m, ka));
            let s = den.norm();
            (num / s) / (den / s) * ((2 * m + 1) as f64 * legendre_cos(m, t))
        })
        .sum();
    sum * C64::from_polar(-kr, -kr)
}

fn ild(params: &SphereParams, f: f64, az: f64, r: f64) -> f64 {
    let sep = |ear: f64| {
        let d = (az - ear).rem_euclid(360.0);
        if d > 180.0 {
            360.0 - d
        } else {
            d
        }
    };
    let l = pressure(params, f, sep(-params.ear_azimuth), r);
    let rr = pressure(params, f, sep(params.ear_azimuth), r);
    10.0 * (l.norm_sqr() / rr.norm_sqr()).log10()
}

#[test]
fn oracle_building_blocks() {
    // h_0(x) = -i e^(ix) / x, and P_5 from its polynomial form
    let x = 1.7;
    assert!((hankel(0, x) - C64::new(0.0, -1.0) * C64::from_polar(1.0 / x, x)).norm() < 1e-15);
    let t: f64 = 0.3f64.acos();
    let p5 = (63.0 * 0.3f64.powi(5) - 70.0 * 0.3f64.powi(3) + 15.0 * 0.3) / 8.0;
    assert!((legendre_cos(5, t) - p5).abs() < 1e-14);
}

#[test]
fn near_field_ild_at_ninety_degrees() {
    let params = SphereParams::default();
    let model = ear_ild_db(&params, 500.0, 90.0, 0.2).unwrap();
    let oracle = ild(&params, 500.0, 90.0, 0.2);
    assert!((model - oracle).abs() < 1e-9, "{model} vs {oracle}");
    assert!((model + 12.364_379_625_575).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pressure_matches_oracle(f in 50.0f64..2000.0, theta in 0.0f64..180.0, r in 0.15f64..3.0) {
        let params = SphereParams::default();
        let model = sphere_pressure(&params, f, theta, r).unwrap();
        let oracle = pressure(&params, f, theta, r);
        prop_assert!((model - oracle).norm() <= 1e-9 * oracle.norm(), "{model} vs {oracle}");
    }
}
