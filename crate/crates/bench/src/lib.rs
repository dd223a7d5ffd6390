//! Benchmark fixtures shared by the criterion suites.

use ild_core::beamform::RefMics;
use ild_core::linalg::{CMat, CVec};
use ild_core::pipeline::{source_signals, Run};
use ild_core::scene::Scene;

/// Reference scene with `mics` microphones and `interferers` interferers,
/// simulated for `seconds`.
pub fn reference_run(mics: usize, interferers: usize, seconds: f64) -> Run {
    let mut scene = Scene::reference(mics, interferers).expect("reference scene");
    scene.duration_s = seconds;
    let signals = source_signals(&scene, |_| unreachable!("synthetic scene")).expect("signals");
    Run::from_scene(scene, &signals, 1).expect("simulation")
}

/// Noise covariance, target ATF and interferer ATFs of one bin.
pub fn bin_problem(run: &Run, bin: usize) -> (CMat, CVec, Vec<CVec>, RefMics) {
    (
        run.cpsd.noise[bin].clone(),
        run.atfs.target(bin).clone(),
        run.atfs.interferers_at(bin),
        run.refs(),
    )
}
