//! On-disk recording layout:
//!
//! ```text
//! <dir>/manifest.json       {"frames":[{"file":"frames/0001.jpg","timestamp_ms":0},...],
//!                            "camera":{"width":640,"height":480},"calibration":{...}}
//! <dir>/frames/NNNN.jpg
//! <dir>/labels.jsonl        {"frame":3,"cues":[{"class":"EXIT_DOOR","direction":"right"}],"caution":false}
//! <dir>/instructions.jsonl  one dispatched instruction per line (replay or record output)
//! ```
//!
//! `frame` in a label is the 1-based position in the manifest, which is also
//! the sequence number the replay client sends it under.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compose::Instruction;
use crate::config::{CalibrationConfig, ConfigError};
use crate::interpret::ImageDims;
use crate::types::{Direction, Priority, SignClass};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const INSTRUCTIONS_FILE: &str = "instructions.jsonl";
pub const FRAMES_DIR: &str = "frames";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub file: String,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub frames: Vec<ManifestFrame>,
    #[serde(default)]
    pub camera: ImageDims,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

impl Manifest {
    pub fn empty(camera: ImageDims, calibration: CalibrationConfig) -> Self {
        Manifest {
            frames: Vec::new(),
            camera,
            calibration,
        }
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("{FRAMES_DIR}/{index:04}.jpg")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelCue {
    pub class: SignClass,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLabel {
    pub frame: u64,
    #[serde(default)]
    pub cues: Vec<LabelCue>,
    /// A caution instruction is expected for this frame.
    #[serde(default)]
    pub caution: bool,
    /// Exact template texts expected on this frame (exact-text mode).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected_texts: Vec<String>,
}

/// One line of `instructions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedInstruction {
    pub frame_seq: u64,
    pub sign_class: SignClass,
    pub direction: Direction,
    pub priority: Priority,
    pub text: String,
    pub distance_m: Option<f64>,
    pub dedup_key: String,
    pub rewritten: bool,
}

impl From<&Instruction> for LoggedInstruction {
    fn from(i: &Instruction) -> Self {
        LoggedInstruction {
            frame_seq: i.frame_seq,
            sign_class: i.sign_class,
            direction: i.direction,
            priority: i.priority,
            text: i.text.clone(),
            distance_m: i.distance_m,
            dedup_key: i.dedup_key.clone(),
            rewritten: i.rewritten,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub labels: Vec<FrameLabel>,
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, ConfigError> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(ConfigError::io(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ConfigError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| ConfigError::Invalid(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(item);
    }
    Ok(out)
}

impl Recording {
    /// Loads and validates a recording; a missing labels file means an
    /// unlabeled recording.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let dir = dir.as_ref().to_path_buf();
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(|e| ConfigError::io(&mpath, e))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", mpath.display())))?;
        let labels = read_jsonl(&dir.join(LABELS_FILE))?;
        let rec = Recording { dir, manifest, labels };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let frames = &self.manifest.frames;
        for pair in frames.windows(2) {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(ConfigError::Invalid(format!(
                    "manifest timestamps not strictly increasing at {} ({} after {})",
                    pair[1].file, pair[1].timestamp_ms, pair[0].timestamp_ms
                )));
            }
        }
        for l in &self.labels {
            if l.frame == 0 || l.frame as usize > frames.len() {
                return Err(ConfigError::Invalid(format!(
                    "label for frame {} but the manifest has {} frames",
                    l.frame,
                    frames.len()
                )));
            }
        }
        for f in frames {
            let p = self.dir.join(&f.file);
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("missing frame file {}", p.display())));
            }
        }
        self.manifest.calibration.calibration()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    /// Bytes of the frame at 0-based `index`.
    pub fn frame_bytes(&self, index: usize) -> Result<Vec<u8>, ConfigError> {
        let p = self.dir.join(&self.manifest.frames[index].file);
        fs::read(&p).map_err(|e| ConfigError::io(&p, e))
    }

    pub fn label(&self, frame: u64) -> Option<&FrameLabel> {
        self.labels.iter().find(|l| l.frame == frame)
    }

    pub fn write_instructions(&self, instructions: &[LoggedInstruction]) -> Result<(), ConfigError> {
        let path = self.dir.join(INSTRUCTIONS_FILE);
        write_jsonl(&path, instructions).map_err(|e| ConfigError::io(&path, e))
    }
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item)?;
        f.write_all(b"\n")?;
    }
    f.flush()
}
