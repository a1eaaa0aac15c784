use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coexmap::maps::GridSpec;
use coexmap::scene::Scenario;
use coexmap::sim::{SimParams, TRAINING_HORIZON_US, TRAINING_PER_CLASS};
use coexmap::tech::TechSet;
use coexmap::Micros;
use serde::{Deserialize, Serialize};

/// Everything a run needs, read from one JSON file. Relative paths are
/// resolved against the directory holding the config.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: Option<PathBuf>,
    /// Replaces the scenario's own horizon.
    pub horizon_us: Option<Micros>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Schedule, detector and device parameters.
    #[serde(flatten)]
    pub sim: SimParams,
    pub classifier: ClassifierConfig,
    pub map: MapConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Labeled dataset CSV; the built-in training campaign is synthesized
    /// when absent.
    pub dataset: Option<PathBuf>,
    pub training_horizon_us: Micros,
    pub per_class: usize,
    pub train_fraction: f64,
    pub split_caps: Vec<usize>,
    pub forest_sizes: Vec<usize>,
    pub knn_k: usize,
    pub ablation_splits: usize,
    /// Split cap of the tree exported as `model.json`.
    pub model_splits: usize,
    pub speed_min_classifications: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            dataset: None,
            training_horizon_us: TRAINING_HORIZON_US,
            per_class: TRAINING_PER_CLASS,
            train_fraction: 0.7,
            split_caps: vec![5, 20, 50, 200],
            forest_sizes: vec![30],
            knn_k: 5,
            ablation_splits: 20,
            model_splits: 20,
            speed_min_classifications: 100_000,
        }
    }
}

/// Technology attached to each detected burst before it enters a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum LabelSource {
    /// Ground truth from the ledger.
    Oracle,
    /// A model saved by `train-eval`.
    Model { path: PathBuf },
    /// A split-capped tree trained on a separate run of the same scenario
    /// (seed `seed`, default: run seed + 1) and then used on every node.
    Calibrated {
        #[serde(default = "default_splits")]
        splits: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
}

fn default_splits() -> usize {
    20
}

impl Default for LabelSource {
    fn default() -> Self {
        LabelSource::Calibrated {
            splits: default_splits(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub bin_seconds: f64,
    pub cell_m: f64,
    /// `[start, end)` in seconds; the whole horizon when absent.
    pub window_s: Option<(f64, f64)>,
    pub techs: Vec<String>,
    pub channels: Option<Vec<u8>>,
    pub labels: LabelSource,
    /// Nodes that get a spectrogram; all nodes when absent.
    pub spectrogram_nodes: Option<Vec<u16>>,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            bin_seconds: 900.0,
            cell_m: GridSpec::DEFAULT_CELL_M,
            window_s: None,
            techs: vec!["wlan".into(), "bt".into()],
            channels: None,
            labels: LabelSource::default(),
            spectrogram_nodes: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.scenario, &mut cfg.out, &mut cfg.classifier.dataset]
            .into_iter()
            .flatten()
        {
            resolve(p);
        }
        if let LabelSource::Model { path } = &mut cfg.map.labels {
            resolve(path);
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .context("a seed is required (set \"seed\" in the config or pass --seed)")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The scenario file with the run's seed and horizon applied.
    pub fn scenario(&self) -> Result<Scenario> {
        let path = self.scenario.as_ref().context("no scenario file configured")?;
        let text = fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
        let mut sc: Scenario =
            serde_json::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))?;
        sc.seed = self.seed()?;
        if let Some(h) = self.horizon_us {
            sc.horizon_us = h;
        }
        sc.validate()
            .with_context(|| format!("invalid scenario {}", path.display()))?;
        Ok(sc)
    }

    pub fn bin_width_us(&self) -> Result<Micros> {
        let s = self.map.bin_seconds;
        if !(s.is_finite() && s > 0.0) {
            bail!("bin width must be a positive number of seconds, got {s}");
        }
        Ok((s * 1e6).round() as Micros)
    }

    pub fn window_us(&self, horizon_us: Micros) -> Result<(Micros, Micros)> {
        match self.map.window_s {
            None => Ok((0, horizon_us)),
            Some((a, b)) => {
                if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
                    bail!("window must satisfy 0 <= start < end, got {a},{b}");
                }
                Ok(((a * 1e6).round() as Micros, (b * 1e6).round() as Micros))
            }
        }
    }

    pub fn techs(&self) -> Result<Vec<(String, TechSet)>> {
        if self.map.techs.is_empty() {
            bail!("no technology selected");
        }
        self.map
            .techs
            .iter()
            .map(|name| {
                let set = TechSet::parse(name)?;
                Ok((name.to_ascii_lowercase(), set))
            })
            .collect()
    }

    pub fn channels(&self) -> Result<Vec<u8>> {
        match &self.map.channels {
            None => Ok(coexmap::maps::all_channels()),
            Some(list) => {
                if list.is_empty() {
                    bail!("empty channel list");
                }
                if let Some(c) = list.iter().find(|&&c| c >= coexmap::maps::N_CHANNELS) {
                    bail!("channel index {c} out of range 0..=15");
                }
                Ok(list.clone())
            }
        }
    }
}

/// `START,END` in seconds.
pub fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected START,END")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("bad window start: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("bad window end: {e}"))?;
    Ok((a, b))
}

/// Comma-separated channel indices; `a-b` spans are inclusive.
pub fn parse_channels(s: &str) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let parse = |v: &str| v.trim().parse::<u8>().map_err(|e| format!("bad channel '{v}': {e}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(format!("empty channel span {part}"));
                }
                out.extend(a..=b);
            }
            None => out.push(parse(part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
