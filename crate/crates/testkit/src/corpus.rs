//! Synthetic trajectory corpora with scripted annotators.
//!
//! Frames are small solid images. The red channel selects how annotators
//! treat the frame and the green/blue channels carry a frame index.

use std::time::Duration;

use async_trait::async_trait;
use rand::Rng;

use uisim_core::dataset::{ActionAnnotator, AnnotationError, Episode, Frame, LayoutAnnotator, MemoryFrameSource};
use uisim_core::engine::BackendDescriptor;
use uisim_core::raster::{Image, Rgb};

/// Red-channel markers.
pub const NORMAL: u8 = 0;
/// The layout annotator answers with text that is not a layout.
pub const GARBLED_LAYOUT: u8 = 1;
/// The layout annotator is unreachable.
pub const LAYOUT_DOWN: u8 = 2;
/// The action annotator answers with an empty action.
pub const EMPTY_ACTION: u8 = 3;

pub struct Corpus {
    pub episodes: Vec<Episode>,
    pub frames: MemoryFrameSource,
    /// Keypoint count per episode, in episode order.
    pub keypoints: Vec<usize>,
}

fn frame_image(marker: u8, index: u16) -> Image {
    let [g, b] = index.to_be_bytes();
    Image::filled(4, 4, Rgb([marker, g, b]))
}

fn decode(frame: &Image) -> (u8, u16) {
    let Rgb([r, g, b]) = frame.get(0, 0);
    (r, u16::from_be_bytes([g, b]))
}

/// `n` episodes with 0 to 6 keypoints each, interleaved non-keypoint frames
/// and a sprinkling of frames that make annotation fail or cannot be read.
pub fn synthetic_corpus(n: usize, rng: &mut impl Rng) -> Corpus {
    let mut frames = MemoryFrameSource::default();
    let mut episodes = Vec::with_capacity(n);
    let mut keypoints = Vec::with_capacity(n);
    let mut index: u16 = 0;
    for e in 0..n {
        let k = rng.random_range(0..=6);
        let mut list = Vec::new();
        for kp in 0..k {
            for _ in 0..rng.random_range(0..=2) {
                list.push((false, NORMAL));
            }
            let marker = match rng.random_range(0..20) {
                0 => GARBLED_LAYOUT,
                1 => LAYOUT_DOWN,
                2 => EMPTY_ACTION,
                3 if kp > 0 => u8::MAX,
                _ => NORMAL,
            };
            list.push((true, marker));
        }
        if k == 0 {
            list.push((false, NORMAL));
        }
        let mut ep_frames = Vec::with_capacity(list.len());
        for (is_keypoint, marker) in list {
            let frame_ref = format!("ep{e:03}/f{index:05}.png");
            // `u8::MAX` marks a frame that is listed but missing from the source
            if marker != u8::MAX {
                frames.frames.insert(frame_ref.clone(), frame_image(marker, index));
            }
            ep_frames.push(Frame {
                frame_ref,
                is_keypoint,
                timestamp: Some(f64::from(index) * 0.5),
            });
            index += 1;
        }
        keypoints.push(k);
        episodes.push(Episode {
            episode_id: format!("episode-{e:03}"),
            goal_text: format!("goal {e}"),
            frames: ep_frames,
        });
    }
    Corpus {
        episodes,
        frames,
        keypoints,
    }
}

/// Completion order varies with the frame index so that concurrent runs
/// finish out of submission order.
async fn jitter(index: u16) {
    tokio::time::sleep(Duration::from_micros(u64::from(index) * 7919 % 400)).await;
}

pub struct ScriptedActionAnnotator;

#[async_trait]
impl ActionAnnotator for ScriptedActionAnnotator {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::new("scripted-action", "1")
    }

    async fn annotate_action(&self, initial: &Image, next: &Image, _goal: &str) -> Result<String, AnnotationError> {
        let (_, a) = decode(initial);
        let (marker, b) = decode(next);
        jitter(b).await;
        if marker == EMPTY_ACTION {
            return Ok("   ".into());
        }
        Ok(format!("go from {a} to {b}"))
    }
}

pub struct ScriptedLayoutAnnotator;

#[async_trait]
impl LayoutAnnotator for ScriptedLayoutAnnotator {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::new("scripted-layout", "1")
    }

    async fn annotate_layout(&self, frame: &Image) -> Result<String, AnnotationError> {
        let (marker, i) = decode(frame);
        jitter(i.wrapping_mul(3)).await;
        match marker {
            GARBLED_LAYOUT => Ok("BUTTON (0,0".into()),
            LAYOUT_DOWN => Err(AnnotationError::Unavailable {
                annotator: "scripted-layout".into(),
                message: "down".into(),
            }),
            _ => Ok(format!(
                "CONTAINER root (0,0,1,1)\n  TEXT t{i} 'frame {i}' (0.1,0.1,0.9,0.2)\n"
            )),
        }
    }
}
