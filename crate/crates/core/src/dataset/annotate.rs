use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use async_trait::async_trait;
use futures::stream::{self, StreamExt};
use thiserror::Error;

use super::{extract_pairs, DatasetError, Episode, FramePair, SkipReason, SkipRecord, TrainingExample};
use crate::engine::BackendDescriptor;
use crate::layout::{parse_layout, LayoutSource};
use crate::raster::Image;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("annotator {annotator} unavailable: {message}")]
    Unavailable { annotator: String, message: String },
    #[error("invalid annotator response: {0}")]
    Invalid(String),
}

/// Labels the user action that leads from one frame to the next.
#[async_trait]
pub trait ActionAnnotator: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;
    async fn annotate_action(&self, initial: &Image, next: &Image, goal_text: &str) -> Result<String, AnnotationError>;
}

/// Describes a frame as layout DSL text.
#[async_trait]
pub trait LayoutAnnotator: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;
    async fn annotate_layout(&self, frame: &Image) -> Result<String, AnnotationError>;
}

#[async_trait]
pub trait FrameSource: Send + Sync {
    async fn load(&self, frame_ref: &str) -> Result<Image, String>;
}

/// Frames as image files relative to a base directory.
#[derive(Debug, Clone)]
pub struct FsFrameSource {
    pub base: PathBuf,
}

#[async_trait]
impl FrameSource for FsFrameSource {
    async fn load(&self, frame_ref: &str) -> Result<Image, String> {
        let bytes = tokio::fs::read(self.base.join(frame_ref)).await.map_err(|e| e.to_string())?;
        Image::decode(&bytes).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryFrameSource {
    pub frames: HashMap<String, Image>,
}

#[async_trait]
impl FrameSource for MemoryFrameSource {
    async fn load(&self, frame_ref: &str) -> Result<Image, String> {
        self.frames.get(frame_ref).cloned().ok_or_else(|| "no such frame".to_string())
    }
}

fn tag(d: &BackendDescriptor) -> String {
    format!("{}@{}", d.name, d.version)
}

fn from_annotation(e: AnnotationError, raw: Option<String>) -> DatasetError {
    match e {
        AnnotationError::Unavailable { annotator, message } => DatasetError::AnnotatorUnavailable { annotator, message },
        AnnotationError::Invalid(message) => DatasetError::InvalidAnnotation { message, raw },
    }
}

pub async fn annotate_pair(
    action_annotator: &dyn ActionAnnotator,
    layout_annotator: &dyn LayoutAnnotator,
    frames: &dyn FrameSource,
    goal_text: &str,
    pair: &FramePair,
) -> Result<TrainingExample, DatasetError> {
    let load = |frame_ref: String| async move {
        frames
            .load(&frame_ref)
            .await
            .map_err(|message| DatasetError::Frame { frame_ref, message })
    };
    let initial = load(pair.initial_frame.clone()).await?;
    let next = load(pair.next_frame.clone()).await?;

    let action_text = action_annotator
        .annotate_action(&initial, &next, goal_text)
        .await
        .map_err(|e| from_annotation(e, None))?;
    let action_text = action_text.trim().to_string();
    if action_text.is_empty() {
        return Err(DatasetError::InvalidAnnotation {
            message: "action annotation is empty".into(),
            raw: Some(action_text),
        });
    }
    let dsl = layout_annotator
        .annotate_layout(&next)
        .await
        .map_err(|e| from_annotation(e, None))?;
    let next_layout = parse_layout(&dsl)
        .map_err(|e| DatasetError::InvalidAnnotation {
            message: format!("layout annotation does not parse: {e}"),
            raw: Some(dsl.clone()),
        })?
        .with_source(LayoutSource::Annotated);

    let mut annotator_versions = BTreeMap::new();
    annotator_versions.insert("action".to_string(), tag(&action_annotator.descriptor()));
    annotator_versions.insert("layout".to_string(), tag(&layout_annotator.descriptor()));
    Ok(TrainingExample {
        example_id: format!("{}:{}", pair.episode_id, pair.pair_index),
        episode_id: pair.episode_id.clone(),
        pair_index: pair.pair_index,
        initial_frame: pair.initial_frame.clone(),
        action_text,
        next_layout,
        annotator_versions,
    })
}

/// Every pair ends up in exactly one of the two lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnnotationRun {
    pub examples: Vec<TrainingExample>,
    pub skipped: Vec<SkipRecord>,
}

/// Annotates all pairs with at most `max_in_flight` pairs in progress.
/// Failed pairs are logged and recorded as skips.
pub async fn annotate_all(
    episodes: &[Episode],
    action_annotator: &dyn ActionAnnotator,
    layout_annotator: &dyn LayoutAnnotator,
    frames: &dyn FrameSource,
    max_in_flight: usize,
) -> AnnotationRun {
    let jobs: Vec<(&str, FramePair)> = episodes
        .iter()
        .flat_map(|e| extract_pairs(e).into_iter().map(move |p| (e.goal_text.as_str(), p)))
        .collect();
    let results: Vec<(FramePair, Result<TrainingExample, DatasetError>)> = stream::iter(jobs)
        .map(|(goal, pair)| async move {
            let r = annotate_pair(action_annotator, layout_annotator, frames, goal, &pair).await;
            (pair, r)
        })
        .buffered(max_in_flight.max(1))
        .collect()
        .await;

    let mut run = AnnotationRun::default();
    for (pair, result) in results {
        match result {
            Ok(ex) => run.examples.push(ex),
            Err(e) => {
                let reason = match e {
                    DatasetError::AnnotatorUnavailable { .. } => SkipReason::AnnotatorUnavailable,
                    DatasetError::Frame { .. } => SkipReason::FrameUnreadable,
                    _ => SkipReason::InvalidAnnotation,
                };
                tracing::warn!(episode = %pair.episode_id, pair = pair.pair_index, "skipping pair: {e}");
                run.skipped.push(SkipRecord {
                    pair,
                    reason,
                    detail: e.to_string(),
                });
            }
        }
    }
    run
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Frame;
    use crate::raster::Rgb;

    struct Canned {
        action: String,
        layout: String,
    }

    #[async_trait]
    impl ActionAnnotator for Canned {
        fn descriptor(&self) -> BackendDescriptor {
            BackendDescriptor::new("canned-action", "1")
        }
        async fn annotate_action(&self, _: &Image, _: &Image, _: &str) -> Result<String, AnnotationError> {
            Ok(self.action.clone())
        }
    }

    #[async_trait]
    impl LayoutAnnotator for Canned {
        fn descriptor(&self) -> BackendDescriptor {
            BackendDescriptor::new("canned-layout", "2")
        }
        async fn annotate_layout(&self, _: &Image) -> Result<String, AnnotationError> {
            Ok(self.layout.clone())
        }
    }

    fn frames() -> MemoryFrameSource {
        let mut m = MemoryFrameSource::default();
        m.frames.insert("a".into(), Image::filled(16, 16, Rgb([0, 0, 0])));
        m.frames.insert("b".into(), Image::filled(16, 16, Rgb([255, 255, 255])));
        m
    }

    fn pair() -> FramePair {
        FramePair {
            episode_id: "ep".into(),
            pair_index: 0,
            initial_frame: "a".into(),
            next_frame: "b".into(),
        }
    }

    const DSL: &str = "CONTAINER root (0,0,1,1)\n  BUTTON send 'Send' (0.1,0.8,0.9,0.9)\n";

    #[tokio::test]
    async fn canned_annotations_become_an_example() {
        let c = Canned {
            action: " tap send ".into(),
            layout: DSL.into(),
        };
        let ex = annotate_pair(&c, &c, &frames(), "send mail", &pair()).await.unwrap();
        assert_eq!(ex.action_text, "tap send");
        assert_eq!(ex.next_layout, parse_layout(DSL).unwrap());
        assert_eq!(ex.example_id, "ep:0");
        assert_eq!(ex.annotator_versions["action"], "canned-action@1");
        assert_eq!(ex.annotator_versions["layout"], "canned-layout@2");
    }

    #[tokio::test]
    async fn bad_annotations_are_rejected() {
        let malformed = Canned {
            action: "tap".into(),
            layout: "BUTTON (".into(),
        };
        match annotate_pair(&malformed, &malformed, &frames(), "", &pair()).await {
            Err(DatasetError::InvalidAnnotation { raw, .. }) => assert_eq!(raw.as_deref(), Some("BUTTON (")),
            other => panic!("{other:?}"),
        }
        let empty = Canned {
            action: "  ".into(),
            layout: DSL.into(),
        };
        assert!(matches!(
            annotate_pair(&empty, &empty, &frames(), "", &pair()).await,
            Err(DatasetError::InvalidAnnotation { .. })
        ));
        let missing = FramePair {
            next_frame: "zzz".into(),
            ..pair()
        };
        assert!(matches!(
            annotate_pair(&empty, &empty, &frames(), "", &missing).await,
            Err(DatasetError::Frame { .. })
        ));
    }

    #[tokio::test]
    async fn skips_are_reported() {
        let ep = Episode {
            episode_id: "ep".into(),
            goal_text: "g".into(),
            frames: ["a", "b", "missing", "a"]
                .iter()
                .map(|r| Frame {
                    frame_ref: r.to_string(),
                    is_keypoint: true,
                    timestamp: None,
                })
                .collect(),
        };
        let c = Canned {
            action: "tap".into(),
            layout: DSL.into(),
        };
        let run = annotate_all(&[ep], &c, &c, &frames(), 2).await;
        assert_eq!(run.examples.len(), 1);
        assert_eq!(run.skipped.len(), 2);
        assert!(run.skipped.iter().all(|s| s.reason == SkipReason::FrameUnreadable));
    }
}
