//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ild_core::beamform::{bmvdr, jblcmv, objective, BinStatus, ConstraintSet, Design, Method, RefMics};
use ild_core::linalg::{c, CMat, CVec};
use ild_core::metrics::ReportRow;
use ild_core::pipeline::{source_signals, Run};
use ild_core::scene::Scene;
use ild_core::sdp::{build_problem, qcqp_oracle, solve, OracleOptions, SolveStatus, SolverOptions, Variant};
use ild_core::sphere::{ear_ild_db, DvfTable, SphereParams, FAR_FIELD_DISTANCE, REFERENCE_DISTANCES};
use ild_core::stft::{analyze, synthesize, StftConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

fn lower_band(run: &Run) -> Vec<usize> {
    let last = run.atfs.bins() - 1;
    (0..run.atfs.bins())
        .filter(|&k| {
            let f = run.atfs.frequencies[k];
            f > 0.0 && f < run.scene.cutoff_hz && k != last
        })
        .collect()
}

fn dvf_reproduction() -> Outcome {
    let params = SphereParams::default();
    let table = DvfTable::build(
        &params,
        &grid(10.0, 800.0, 10.0),
        &grid(-180.0, 180.0, 5.0),
        &REFERENCE_DISTANCES,
        FAR_FIELD_DISTANCE,
        800.0,
    )
    .expect("table");
    let db = |v: f64| 10.0 * v.log10();
    let far = table.distance_index(1.0).unwrap();
    let near = table.distance_index(0.2).unwrap();
    let mut far_max: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (ai, &az) in table.azimuths.iter().enumerate() {
        for fi in 0..table.frequencies.len() {
            far_max = far_max.max(db(table.value(far, ai, fi)).abs());
            if az.abs() == 90.0 {
                peak = peak.max(db(table.value(near, ai, fi)).abs());
            }
        }
    }
    outcome(
        far_max == 0.0 && (peak - 8.0).abs() <= 2.0,
        format!("max |DVF| at 1.0 m = {far_max} dB; peak |DVF| at 0.2 m, +-90 deg = {peak:.2} dB (8 +- 2)"),
    )
}

fn cutoff_monotonicity() -> Outcome {
    let params = SphereParams::default();
    let azimuths = grid(-90.0, 90.0, 5.0);
    let mut worst_step = f64::INFINITY;
    let mut pass = true;
    for d in [0.3, 0.4, 0.5, 0.6] {
        let ild: Vec<f64> = azimuths
            .iter()
            .map(|&az| ear_ild_db(&params, 800.0, az, d).unwrap())
            .collect();
        let sign = (ild[ild.len() - 1] - ild[0]).signum();
        for w in ild.windows(2) {
            let step = sign * (w[1] - w[0]);
            worst_step = worst_step.min(step);
            pass &= step > 0.0;
        }
    }
    outcome(
        pass,
        format!("800 Hz, d in 0.3..0.6 m, 5 deg grid: smallest step along the monotone direction {worst_step:.4} dB"),
    )
}

struct SceneRun {
    run: Run,
    designs: Vec<Design>,
    csv: Vec<u8>,
}

const METHODS: [Method; 5] = [
    Method::Bmvdr,
    Method::Jblcmv,
    Method::Ild(0.2),
    Method::Ild(0.6),
    Method::Ild(1.0),
];

fn scene_run(seed: u64) -> SceneRun {
    let scene = Scene::reference(4, 4).expect("scene");
    let signals = source_signals(&scene, |_| unreachable!("synthetic scene")).expect("signals");
    let run = Run::from_scene(scene, &signals, seed).expect("simulate");
    let opts = run.options();
    let mut designs = Vec::new();
    let mut rows = Vec::new();
    for m in METHODS {
        let d = run.design(m, &opts).expect("design");
        rows.extend(
            run.evaluate(&d.filter, &d.scaling, run.scene.cutoff_hz)
                .expect("evaluate"),
        );
        designs.push(d);
    }
    let mut csv = Vec::new();
    ReportRow::write_csv(&rows, &mut csv).expect("csv");
    SceneRun { run, designs, csv }
}

fn design(s: &SceneRun, m: Method) -> &Design {
    &s.designs[METHODS.iter().position(|&x| x == m).unwrap()]
}

fn jblcmv_cues(s: &SceneRun) -> Outcome {
    let d = design(s, Method::Jblcmv);
    let rows = s
        .run
        .evaluate(&d.filter, &d.scaling, s.run.scene.cutoff_hz)
        .expect("evaluate");
    let worst = rows
        .iter()
        .filter(|r| r.source.starts_with("interferer"))
        .map(|r| r.value_db.unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst < -100.0,
        format!("M = 4, r = 4: worst interferer ILD/IPD error {worst:.1} dB (< -100 dB)"),
    )
}

fn distortionless(s: &SceneRun) -> Outcome {
    let refs = s.run.refs();
    let mut worst: f64 = 0.0;
    let mut bins = 0;
    for d in &s.designs {
        for k in 0..s.run.atfs.bins() {
            if !d.filter.status[k].is_solved() {
                continue;
            }
            bins += 1;
            let a = s.run.atfs.target(k);
            let el = (d.filter.left(k).dotc(a) - a[refs.left]).norm() / a[refs.left].norm();
            let er = (d.filter.right(k).dotc(a) - a[refs.right]).norm() / a[refs.right].norm();
            worst = worst.max(el).max(er);
        }
    }
    outcome(
        worst <= 1e-6,
        format!(
            "{bins} solved bins over {} methods: worst relative target error {worst:.2e} (<= 1e-6)",
            METHODS.len()
        ),
    )
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

fn relaxation_sandwich() -> Outcome {
    const INSTANCES: usize = 210;
    const SLACK: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let refs = RefMics::for_count(2);
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..INSTANCES {
        let cf = [0.5, 1.0, 2.0][i % 3];
        let g = CMat::from_fn(2, 2, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let p = &g * g.adjoint() + CMat::identity(2, 2) * c(rng.random_range(1e-3..1e-1), 0.0);
        let a = random_vec(&mut rng, 2);
        let b = random_vec(&mut rng, 2);
        let bs = [b];
        let p2 = solve(
            &build_problem(&p, &a, &bs, &[cf], refs, Variant::Problem2).unwrap(),
            &opts,
        );
        let p3 = solve(
            &build_problem(&p, &a, &bs, &[cf], refs, Variant::Problem3).unwrap(),
            &opts,
        );
        let oracle = qcqp_oracle(&p, &a, &bs, &[cf], refs, &OracleOptions::default()).unwrap();
        let mut gaps = vec![p2.objective - p3.objective];
        let mut ok = p2.status == SolveStatus::Solved && p3.status == SolveStatus::Solved && oracle.feasible;
        gaps.push(p3.objective - oracle.objective);
        if cf == 1.0 {
            let wb = bmvdr(&p, &a, refs).unwrap();
            let (wj, _) = jblcmv(&p, &ConstraintSet::new(&a, &bs, refs)).unwrap();
            gaps.push(objective(&p, &wb) - p2.objective);
            gaps.push(p3.objective - objective(&p, &wj));
        }
        let g = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(g);
        ok &= g <= SLACK;
        if !ok {
            failures.push(i);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{INSTANCES} instances (M = 2, r = 1, c in 0.5/1/2): {} violations, worst ordering excess {worst:.1e} (<= 1e-6){}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(", failing {failures:?}") }
        ),
    )
}

fn rank_one_recovery(s: &SceneRun) -> Outcome {
    let d = design(s, Method::Ild(0.2));
    let refs = s.run.refs();
    let lower = lower_band(&s.run);
    let mut certified = 0;
    let mut worst_db: f64 = 0.0;
    for &k in &lower {
        let diag = d.diagnostics.iter().find(|g| g.bin == k);
        let ok = d.filter.status[k] == BinStatus::Rank1 && diag.is_some_and(|g| g.rank1_gap <= 1e-6);
        if !ok {
            continue;
        }
        certified += 1;
        for i in 0..s.run.atfs.interferer_count() {
            let b = s.run.atfs.interferer(i, k);
            let out = d.filter.left(k).dotc(b).norm_sqr() / d.filter.right(k).dotc(b).norm_sqr();
            let inp = b[refs.left].norm_sqr() / b[refs.right].norm_sqr();
            worst_db = worst_db.max((10.0 * (out / (d.scaling[k][i] * inp)).log10()).abs());
        }
    }
    let fraction = certified as f64 / lower.len() as f64;
    outcome(
        fraction >= 0.7 && worst_db <= 0.1,
        format!(
            "ILD_0.2: {certified}/{} lower-band bins rank-1 ({:.0}%, >= 70%); worst enhanced-ILD deviation {worst_db:.1e} dB (<= 0.1)",
            lower.len(),
            100.0 * fraction
        ),
    )
}

fn noise_ordering(s: &SceneRun) -> Outcome {
    let power = |m| s.run.noise_power_by_bin(&design(s, m).filter);
    let (bm, ild, jb) = (power(Method::Bmvdr), power(Method::Ild(1.0)), power(Method::Jblcmv));
    let mut violations = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for k in lower_band(&s.run) {
        let slack = 1e-6 * jb[k];
        let excess = (bm[k] - ild[k]).max(ild[k] - jb[k]);
        worst = worst.max(excess / jb[k]);
        if excess > slack {
            violations.push(k);
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "BMVDR <= ILD_1.0 <= JBLCMV per lower-band bin: {} violations, worst relative excess {worst:.1e} (<= 1e-6)",
            violations.len()
        ),
    )
}

fn stft_round_trip() -> Outcome {
    let cfg = StftConfig::new(16_000.0, 256).unwrap();
    let n = 32_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let tone: Vec<f64> = (0..n)
        .map(|t| (2.0 * std::f64::consts::PI * 440.0 * t as f64 / 16_000.0).sin())
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for x in [noise, tone] {
        let y = synthesize(&cfg, &analyze(&cfg, std::slice::from_ref(&x)).unwrap()).unwrap();
        let edge = cfg.frame_len;
        let (mut e, mut p) = (0.0, 0.0);
        for t in edge..n - edge {
            e += (y[0][t] - x[t]).powi(2);
            p += x[t] * x[t];
        }
        worst = worst.max(10.0 * (e / p).log10());
    }
    outcome(
        worst < -80.0,
        format!("white noise and 440 Hz tone: worst interior error {worst:.1} dB (< -80 dB)"),
    )
}

fn main() -> ExitCode {
    let mut lines = Vec::new();
    let mut record = |id: u32, name: &str, limit: Duration, elapsed: Duration, o: Outcome| {
        let pass = o.pass && elapsed <= limit;
        println!(
            "{} {id}. {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        lines.push(pass);
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };

    let (o, t) = timed(&dvf_reproduction);
    record(1, "DVF_ILD reproduction", Duration::from_secs(10), t, o);
    let (o, t) = timed(&cutoff_monotonicity);
    record(2, "cut-off ILD monotonicity", Duration::from_secs(10), t, o);

    let start = Instant::now();
    let first = scene_run(1);
    let scene_time = start.elapsed();
    let (o, t) = timed(&|| jblcmv_cues(&first));
    record(3, "JBLCMV cue preservation", Duration::from_secs(60), scene_time + t, o);
    let (o, t) = timed(&|| distortionless(&first));
    record(4, "target distortionless", Duration::from_secs(60), scene_time + t, o);

    let (o, t) = timed(&relaxation_sandwich);
    record(5, "relaxation bound sandwich", Duration::from_secs(300), t, o);
    let (o, t) = timed(&|| rank_one_recovery(&first));
    record(6, "rank-1 recovery", Duration::from_secs(300), scene_time + t, o);
    let (o, t) = timed(&|| noise_ordering(&first));
    record(7, "noise-power ordering", Duration::from_secs(60), scene_time + t, o);
    let (o, t) = timed(&stft_round_trip);
    record(8, "STFT round trip", Duration::from_secs(10), t, o);

    let (o, t) = timed(&|| {
        let second = scene_run(1);
        outcome(
            second.csv == first.csv,
            format!(
                "two seeded runs: {} vs {} metric CSV bytes, identical = {}",
                first.csv.len(),
                second.csv.len(),
                second.csv == first.csv
            ),
        )
    });
    record(9, "determinism", Duration::from_secs(120), t, o);

    if lines.iter().all(|&p| p) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
