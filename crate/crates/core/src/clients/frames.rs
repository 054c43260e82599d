use crate::span::TimeSpan;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_FRAME_COUNT: usize = 4;

const IMAGE_EXTENSIONS: [&str; 5] = ["jpg", "jpeg", "png", "webp", "bmp"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub path: PathBuf,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameSetError {
    #[error("frame set is empty")]
    Empty,
    #[error("frame timestamps must be strictly increasing (frame {0})")]
    Unordered(usize),
    #[error("frame {index} at {timestamp_ms} ms lies outside segment {segment}")]
    OutsideSegment {
        index: usize,
        timestamp_ms: u64,
        segment: TimeSpan,
    },
    #[error("cannot read frame directory {path}: {message}")]
    Io { path: String, message: String },
    #[error("no frame timestamp in file name {0}")]
    NoTimestamp(String),
}

/// Video frames for one utterance segment, in time order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameSet {
    pub id: String,
    frames: Vec<Frame>,
    segment: TimeSpan,
}

impl FrameSet {
    pub fn new(
        id: impl Into<String>,
        frames: Vec<Frame>,
        segment: TimeSpan,
    ) -> Result<Self, FrameSetError> {
        if frames.is_empty() {
            return Err(FrameSetError::Empty);
        }
        for (index, f) in frames.iter().enumerate() {
            if index > 0 && f.timestamp_ms <= frames[index - 1].timestamp_ms {
                return Err(FrameSetError::Unordered(index));
            }
            if f.timestamp_ms < segment.start_ms() || f.timestamp_ms > segment.end_ms() {
                return Err(FrameSetError::OutsideSegment {
                    index,
                    timestamp_ms: f.timestamp_ms,
                    segment,
                });
            }
        }
        Ok(Self {
            id: id.into(),
            frames,
            segment,
        })
    }

    /// Loads image files from `dir`. The timestamp of each frame is the run of
    /// digits at the end of its file stem (`frame_006150.jpg` is 6150 ms).
    ///
    /// Without a segment, the segment runs from the first to the last frame.
    /// Frames outside the segment are dropped, then `count` frames are kept.
    pub fn from_dir(
        id: impl Into<String>,
        dir: &Path,
        segment: Option<TimeSpan>,
        count: usize,
    ) -> Result<Self, FrameSetError> {
        let io = |e: std::io::Error| FrameSetError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        };
        let mut frames = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            let is_image = path
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
            if !is_image {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let timestamp_ms = trailing_number(stem)
                .ok_or_else(|| FrameSetError::NoTimestamp(path.display().to_string()))?;
            frames.push(Frame { path, timestamp_ms });
        }
        frames.sort_by_key(|f| f.timestamp_ms);
        frames.dedup_by_key(|f| f.timestamp_ms);
        if frames.is_empty() {
            return Err(FrameSetError::Empty);
        }
        let segment = match segment {
            Some(s) => s,
            None => {
                let first = frames[0].timestamp_ms;
                let last = frames[frames.len() - 1].timestamp_ms;
                TimeSpan::new(first, last.max(first + 1)).expect("first < last")
            }
        };
        frames
            .retain(|f| f.timestamp_ms >= segment.start_ms() && f.timestamp_ms <= segment.end_ms());
        Self::new(id, sample_evenly(frames, count), segment)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn segment(&self) -> TimeSpan {
        self.segment
    }
}

fn trailing_number(stem: &str) -> Option<u64> {
    let digits = stem.len() - stem.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    stem[stem.len() - digits..].parse().ok()
}

/// Keeps `count` items spread evenly by index, always including the first
/// and last. Returns the input unchanged when it is not longer than `count`.
pub fn sample_evenly<T>(items: Vec<T>, count: usize) -> Vec<T> {
    let n = items.len();
    if n <= count {
        return items;
    }
    if count == 0 {
        return Vec::new();
    }
    let picks: Vec<usize> = if count == 1 {
        vec![(n - 1) / 2]
    } else {
        (0..count)
            .map(|i| (2 * i * (n - 1) + (count - 1)) / (2 * (count - 1)))
            .collect()
    };
    items
        .into_iter()
        .enumerate()
        .filter(|(i, _)| picks.contains(i))
        .map(|(_, t)| t)
        .collect()
}
