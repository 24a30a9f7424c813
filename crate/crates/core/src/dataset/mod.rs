//! Training data from recorded episodes: consecutive keypoint frames form
//! pairs, annotators label the action between them and the layout of the
//! second frame, and the results are split by episode into JSONL files.

mod annotate;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotate::{
    annotate_all, annotate_pair, ActionAnnotator, AnnotationError, AnnotationRun, FrameSource, FsFrameSource,
    LayoutAnnotator, MemoryFrameSource,
};
pub use split::{select_train, shuffled_order};

use crate::layout::ScreenLayout;

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const TRAIN_FILE: &str = "train.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("episode {path}: {message}")]
    Episode { path: String, message: String },
    #[error("frame {frame_ref}: {message}")]
    Frame { frame_ref: String, message: String },
    #[error("annotator {annotator} unavailable: {message}")]
    AnnotatorUnavailable { annotator: String, message: String },
    #[error("invalid annotation: {message}")]
    InvalidAnnotation {
        message: String,
        #[doc = "Raw annotator output, when there was one."]
        raw: Option<String>,
    },
    #[error("I/O error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Image path, relative to the episode manifest's directory.
    pub frame_ref: String,
    #[serde(default)]
    pub is_keypoint: bool,
    /// Seconds from the start of the episode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub goal_text: String,
    pub frames: Vec<Frame>,
}

impl Episode {
    pub fn validate(&self) -> Result<(), String> {
        if self.episode_id.trim().is_empty() {
            return Err("episode_id is empty".into());
        }
        if self.frames.is_empty() {
            return Err("episode has no frames".into());
        }
        Ok(())
    }

    pub fn keypoint_count(&self) -> usize {
        self.frames.iter().filter(|f| f.is_keypoint).count()
    }
}

/// Reads every `*.json` episode manifest in `dir`, sorted by file name, and
/// checks that each frame resolves to a file under `dir`.
pub fn load_episodes(dir: &Path) -> Result<Vec<Episode>, DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io(format!("{}: {e}", dir.display()));
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.is_file())
        .collect();
    paths.sort();
    let mut episodes = Vec::with_capacity(paths.len());
    for path in paths {
        let err = |message: String| DatasetError::Episode {
            path: path.display().to_string(),
            message,
        };
        let text = fs::read_to_string(&path).map_err(|e| err(e.to_string()))?;
        let episode: Episode = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        episode.validate().map_err(err)?;
        for f in &episode.frames {
            if !dir.join(&f.frame_ref).is_file() {
                return Err(err(format!("frame {} does not resolve", f.frame_ref)));
            }
        }
        episodes.push(episode);
    }
    Ok(episodes)
}

/// Two consecutive keypoints of one episode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePair {
    pub episode_id: String,
    pub pair_index: usize,
    pub initial_frame: String,
    pub next_frame: String,
}

/// `max(k − 1, 0)` pairs for `k` keypoints, in trajectory order.
pub fn extract_pairs(episode: &Episode) -> Vec<FramePair> {
    let keypoints: Vec<&Frame> = episode.frames.iter().filter(|f| f.is_keypoint).collect();
    keypoints
        .windows(2)
        .enumerate()
        .map(|(i, w)| FramePair {
            episode_id: episode.episode_id.clone(),
            pair_index: i,
            initial_frame: w[0].frame_ref.clone(),
            next_frame: w[1].frame_ref.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub example_id: String,
    pub episode_id: String,
    pub pair_index: usize,
    pub initial_frame: String,
    pub action_text: String,
    pub next_layout: ScreenLayout,
    pub annotator_versions: BTreeMap<String, String>,
}

/// One JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub example_id: String,
    pub episode_id: String,
    pub pair_index: usize,
    pub initial_frame: String,
    pub action_text: String,
    pub next_layout_dsl: String,
    pub annotator_versions: BTreeMap<String, String>,
}

impl TrainingExample {
    pub fn to_record(&self) -> ExampleRecord {
        ExampleRecord {
            example_id: self.example_id.clone(),
            episode_id: self.episode_id.clone(),
            pair_index: self.pair_index,
            initial_frame: self.initial_frame.clone(),
            action_text: self.action_text.clone(),
            next_layout_dsl: self.next_layout.to_dsl(),
            annotator_versions: self.annotator_versions.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    InvalidAnnotation,
    AnnotatorUnavailable,
    FrameUnreadable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    #[serde(flatten)]
    pub pair: FramePair,
    pub reason: SkipReason,
    pub detail: String,
}

/// Example counts of a split. Pure arithmetic, independent of any files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitTotals {
    pub total_examples: usize,
    pub train_examples: usize,
    pub eval_examples: usize,
}

impl SplitTotals {
    pub fn validate(&self) -> Result<(), String> {
        match self.train_examples.checked_add(self.eval_examples) {
            Some(sum) if sum == self.total_examples => Ok(()),
            _ => Err(format!(
                "train {} + eval {} != total {}",
                self.train_examples, self.eval_examples, self.total_examples
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub train_target: usize,
    pub total_pairs: usize,
    #[serde(flatten)]
    pub totals: SplitTotals,
    /// `train_examples − train_target`; never positive.
    pub target_delta: i64,
    pub train_episodes: Vec<String>,
    pub eval_episodes: Vec<String>,
    pub skipped: Vec<SkipRecord>,
    pub warnings: Vec<String>,
}

impl DatasetManifest {
    /// Count conservation, split arithmetic and episode disjointness.
    pub fn validate(&self) -> Result<(), String> {
        self.totals.validate()?;
        if self.totals.total_examples + self.skipped.len() != self.total_pairs {
            return Err(format!(
                "{} examples + {} skips != {} pairs",
                self.totals.total_examples,
                self.skipped.len(),
                self.total_pairs
            ));
        }
        if self.totals.train_examples > self.train_target {
            return Err("train split exceeds its target".into());
        }
        if self.target_delta != self.totals.train_examples as i64 - self.train_target as i64 {
            return Err("target_delta disagrees with the counts".into());
        }
        let train: BTreeSet<&String> = self.train_episodes.iter().collect();
        if let Some(both) = self.eval_episodes.iter().find(|e| train.contains(e)) {
            return Err(format!("episode {both} is in both splits"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildConfig {
    pub out_dir: PathBuf,
    pub train_target: usize,
    pub seed: u64,
    pub max_in_flight: usize,
}

/// Splits annotated examples by episode and writes `train.jsonl`,
/// `eval.jsonl` and `manifest.json` into `config.out_dir`.
///
/// Episodes are shuffled by seed; the train split is the subset whose
/// example count comes closest to the target without exceeding it.
/// Episodes without examples go to eval.
pub fn assemble_dataset(
    episodes: &[Episode],
    run: AnnotationRun,
    config: &BuildConfig,
) -> Result<DatasetManifest, DatasetError> {
    let total = run.examples.len();
    if config.train_target > total {
        return Err(DatasetError::Config(format!(
            "train target {} exceeds the {total} available examples",
            config.train_target
        )));
    }
    let mut warnings = Vec::new();
    if config.train_target == total {
        let w = "train target equals the example total; eval split is empty".to_string();
        tracing::warn!("{w}");
        warnings.push(w);
    }
    let mut per_episode: BTreeMap<String, usize> = episodes.iter().map(|e| (e.episode_id.clone(), 0)).collect();
    for ex in &run.examples {
        *per_episode.entry(ex.episode_id.clone()).or_default() += 1;
    }
    let order = shuffled_order(
        per_episode.iter().filter(|(_, c)| **c > 0).map(|(id, _)| id.clone()).collect(),
        config.seed,
    );
    let counts: Vec<usize> = order.iter().map(|id| per_episode[id]).collect();
    let take = select_train(&counts, config.train_target);
    let train_set: BTreeSet<&str> = order
        .iter()
        .zip(&take)
        .filter(|(_, t)| **t)
        .map(|(id, _)| id.as_str())
        .collect();

    let mut examples = run.examples;
    examples.sort_by(|a, b| (&a.episode_id, a.pair_index).cmp(&(&b.episode_id, b.pair_index)));
    let mut train = String::new();
    let mut eval = String::new();
    let mut train_count = 0;
    for ex in &examples {
        let line = serde_json::to_string(&ex.to_record()).expect("record serializes");
        let buf = if train_set.contains(ex.episode_id.as_str()) {
            train_count += 1;
            &mut train
        } else {
            &mut eval
        };
        buf.push_str(&line);
        buf.push('\n');
    }

    let mut skipped = run.skipped;
    skipped.sort_by(|a, b| (&a.pair.episode_id, a.pair.pair_index).cmp(&(&b.pair.episode_id, b.pair.pair_index)));
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        seed: config.seed,
        train_target: config.train_target,
        total_pairs: total + skipped.len(),
        totals: SplitTotals {
            total_examples: total,
            train_examples: train_count,
            eval_examples: total - train_count,
        },
        target_delta: train_count as i64 - config.train_target as i64,
        train_episodes: train_set.iter().map(|s| s.to_string()).collect(),
        eval_episodes: per_episode
            .keys()
            .filter(|id| !train_set.contains(id.as_str()))
            .cloned()
            .collect(),
        skipped,
        warnings,
    };
    manifest.validate().map_err(DatasetError::Config)?;

    fs::create_dir_all(&config.out_dir).map_err(|e| DatasetError::Io(format!("{}: {e}", config.out_dir.display())))?;
    write_file(&config.out_dir.join(TRAIN_FILE), train.as_bytes())?;
    write_file(&config.out_dir.join(EVAL_FILE), eval.as_bytes())?;
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_file(&config.out_dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let io = |e: std::io::Error| DatasetError::Io(format!("{}: {e}", path.display()));
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Extract, annotate and assemble in one pass.
pub async fn build_dataset(
    episodes: &[Episode],
    action_annotator: &dyn ActionAnnotator,
    layout_annotator: &dyn LayoutAnnotator,
    frames: &dyn FrameSource,
    config: &BuildConfig,
) -> Result<DatasetManifest, DatasetError> {
    if episodes.is_empty() {
        return Err(DatasetError::Config("no episodes".into()));
    }
    let mut seen = BTreeSet::new();
    for e in episodes {
        e.validate().map_err(|message| DatasetError::Episode {
            path: e.episode_id.clone(),
            message,
        })?;
        if !seen.insert(e.episode_id.as_str()) {
            return Err(DatasetError::Config(format!("duplicate episode id {}", e.episode_id)));
        }
    }
    if config.max_in_flight == 0 {
        return Err(DatasetError::Config("max_in_flight must be positive".into()));
    }
    let run = annotate_all(episodes, action_annotator, layout_annotator, frames, config.max_in_flight).await;
    assemble_dataset(episodes, run, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(id: &str, keypoints: &[usize], frames: usize) -> Episode {
        Episode {
            episode_id: id.into(),
            goal_text: "goal".into(),
            frames: (0..frames)
                .map(|i| Frame {
                    frame_ref: format!("{id}/{i}.png"),
                    is_keypoint: keypoints.contains(&i),
                    timestamp: Some(i as f64),
                })
                .collect(),
        }
    }

    #[test]
    fn pairs_follow_keypoints() {
        let pairs = extract_pairs(&episode("e", &[2, 5, 9], 10));
        let refs: Vec<_> = pairs.iter().map(|p| (p.initial_frame.as_str(), p.next_frame.as_str())).collect();
        assert_eq!(refs, vec![("e/2.png", "e/5.png"), ("e/5.png", "e/9.png")]);
        assert_eq!(pairs[1].pair_index, 1);
        assert!(extract_pairs(&episode("e", &[], 3)).is_empty());
        assert!(extract_pairs(&episode("e", &[1], 3)).is_empty());
        let ten = extract_pairs(&episode("e", &(0..10).collect::<Vec<_>>(), 12));
        assert_eq!(ten.len(), 9);
    }

    #[test]
    fn paper_scale_totals_validate() {
        let ok = SplitTotals {
            total_examples: 28306,
            train_examples: 27306,
            eval_examples: 1000,
        };
        assert!(ok.validate().is_ok());
        assert!(SplitTotals { eval_examples: 999, ..ok }.validate().is_err());
    }

    #[test]
    fn episode_validation() {
        assert!(episode("", &[], 1).validate().is_err());
        assert!(episode("e", &[], 0).validate().is_err());
        assert!(episode("e", &[], 1).validate().is_ok());
    }

    #[test]
    fn load_episodes_resolves_frames() {
        let dir = tempfile::tempdir().unwrap();
        let ep = Episode {
            episode_id: "ep1".into(),
            goal_text: "send an email".into(),
            frames: vec![Frame {
                frame_ref: "f0.png".into(),
                is_keypoint: true,
                timestamp: None,
            }],
        };
        fs::write(dir.path().join("ep1.json"), serde_json::to_string(&ep).unwrap()).unwrap();
        assert!(matches!(load_episodes(dir.path()), Err(DatasetError::Episode { .. })));
        fs::write(dir.path().join("f0.png"), b"x").unwrap();
        assert_eq!(load_episodes(dir.path()).unwrap(), vec![ep]);
    }
}
