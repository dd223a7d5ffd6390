use std::fs;
use std::path::{Path, PathBuf};

use ild_core::scene::{Scene, SignalSpec};
use ild_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const FILE_NAME: &str = "manifest.json";

pub const DEFAULT_METHODS: [&str; 5] = ["bmvdr", "jblcmv", "ild_0.2", "ild_0.6", "ild_1.0"];

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    /// Scene with file paths resolved against the config directory.
    pub scene: Scene,
    pub methods: Vec<String>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub tool_version: String,
    /// Linear gain applied before 16-bit quantization.
    pub wav_scale: f64,
    pub files: Vec<PathBuf>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(FILE_NAME);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))?;
        fs::write(dir.join(FILE_NAME), text + "\n")?;
        Ok(())
    }
}

/// Makes relative signal and ATF paths relative to `base`.
pub fn resolve_paths(scene: &mut Scene, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    for s in &mut scene.sources {
        if let SignalSpec::Wav { path } = &mut s.signal {
            fix(path);
        }
    }
    if let Some(p) = &mut scene.atf_csv {
        fix(p);
    }
}

/// Input files named by the scene that do not exist.
pub fn missing_inputs(scene: &Scene) -> Vec<PathBuf> {
    scene
        .sources
        .iter()
        .filter_map(|s| match &s.signal {
            SignalSpec::Wav { path } => Some(path.clone()),
            _ => None,
        })
        .chain(scene.atf_csv.clone())
        .filter(|p| !p.is_file())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths_follow_config() {
        let mut s = Scene::reference(2, 1).unwrap();
        s.sources[1].signal = SignalSpec::Wav { path: "a.wav".into() };
        s.atf_csv = Some("/abs/atf.csv".into());
        resolve_paths(&mut s, Path::new("/cfg"));
        assert_eq!(
            s.sources[1].signal,
            SignalSpec::Wav {
                path: "/cfg/a.wav".into()
            }
        );
        assert_eq!(s.atf_csv, Some(PathBuf::from("/abs/atf.csv")));
        assert_eq!(missing_inputs(&s).len(), 2);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            config_path: None,
            scene: Scene::reference(4, 2).unwrap(),
            methods: DEFAULT_METHODS.iter().map(|s| s.to_string()).collect(),
            output_dir: dir.path().into(),
            seed: 7,
            tool_version: "0".into(),
            wav_scale: 0.25,
            files: vec!["mixture/mic1.wav".into()],
        };
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);
    }
}
