use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;

use bytes::Bytes;
use tokio::sync::oneshot;
use uuid::Uuid;

use crate::config::CalibrationConfig;
use crate::eval::recording::{
    frame_file_name, LoggedInstruction, Manifest, ManifestFrame, FRAMES_DIR, INSTRUCTIONS_FILE, LABELS_FILE,
    MANIFEST_FILE,
};
use crate::interpret::ImageDims;

enum Event {
    Open(Uuid),
    Frame {
        session: Uuid,
        timestamp_ms: u64,
        dims: Option<ImageDims>,
        jpeg: Bytes,
        instructions: Vec<LoggedInstruction>,
    },
    Sync(oneshot::Sender<()>),
}

/// Persists analyzed frames and dispatched instructions as unlabeled
/// recordings, one directory per session under the output root.
///
/// Writes happen on a dedicated thread. An I/O failure stops recording for
/// that session and is logged; the live session never sees it.
#[derive(Debug, Clone)]
pub struct Recorder {
    tx: mpsc::Sender<Event>,
    root: PathBuf,
}

struct SessionRecording {
    dir: PathBuf,
    manifest: Manifest,
    dims_known: bool,
    stopped: bool,
}

impl SessionRecording {
    fn create(root: &Path, session: Uuid, calibration: &CalibrationConfig) -> std::io::Result<Self> {
        let dir = root.join(session.to_string());
        fs::create_dir_all(dir.join(FRAMES_DIR))?;
        let rec = SessionRecording {
            dir,
            manifest: Manifest::empty(calibration.fallback_dims(), calibration.clone()),
            dims_known: false,
            stopped: false,
        };
        fs::File::create(rec.dir.join(LABELS_FILE))?;
        fs::File::create(rec.dir.join(INSTRUCTIONS_FILE))?;
        rec.write_manifest()?;
        Ok(rec)
    }

    fn write_manifest(&self) -> std::io::Result<()> {
        let tmp = self.dir.join(format!("{MANIFEST_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&self.manifest)?)?;
        fs::rename(tmp, self.dir.join(MANIFEST_FILE))
    }

    fn append(
        &mut self,
        timestamp_ms: u64,
        dims: Option<ImageDims>,
        jpeg: &[u8],
        instructions: &[LoggedInstruction],
    ) -> std::io::Result<()> {
        if self
            .manifest
            .frames
            .last()
            .is_some_and(|last| timestamp_ms <= last.timestamp_ms)
        {
            tracing::warn!(dir = %self.dir.display(), timestamp_ms, "frame timestamp not increasing; not recorded");
            return Ok(());
        }
        let file = frame_file_name(self.manifest.frames.len() + 1);
        fs::write(self.dir.join(&file), jpeg)?;
        let mut log = OpenOptions::new().append(true).open(self.dir.join(INSTRUCTIONS_FILE))?;
        for i in instructions {
            let mut line = serde_json::to_vec(i)?;
            line.push(b'\n');
            log.write_all(&line)?;
        }
        if let (false, Some(d)) = (self.dims_known, dims) {
            self.manifest.camera = d;
            self.dims_known = true;
        }
        self.manifest.frames.push(ManifestFrame { file, timestamp_ms });
        self.write_manifest()
    }
}

fn run(rx: mpsc::Receiver<Event>, root: PathBuf, calibration: CalibrationConfig) {
    let mut sessions: HashMap<Uuid, SessionRecording> = HashMap::new();
    let open = |sessions: &mut HashMap<Uuid, SessionRecording>, id: Uuid| {
        if sessions.contains_key(&id) {
            return;
        }
        match SessionRecording::create(&root, id, &calibration) {
            Ok(r) => {
                sessions.insert(id, r);
            }
            Err(e) => {
                tracing::warn!(session = %id, error = %e, "cannot start recording");
                sessions.insert(
                    id,
                    SessionRecording {
                        dir: root.join(id.to_string()),
                        manifest: Manifest::empty(ImageDims::default(), calibration.clone()),
                        dims_known: false,
                        stopped: true,
                    },
                );
            }
        }
    };
    for event in rx {
        match event {
            Event::Open(id) => open(&mut sessions, id),
            Event::Frame {
                session,
                timestamp_ms,
                dims,
                jpeg,
                instructions,
            } => {
                open(&mut sessions, session);
                let rec = sessions.get_mut(&session).expect("opened above");
                if rec.stopped {
                    continue;
                }
                if let Err(e) = rec.append(timestamp_ms, dims, &jpeg, &instructions) {
                    tracing::warn!(session = %session, error = %e, "recording stopped");
                    rec.stopped = true;
                }
            }
            Event::Sync(done) => {
                let _ = done.send(());
            }
        }
    }
}

impl Recorder {
    /// Starts the writer thread. Fails only if `root` cannot be created.
    pub fn start(root: impl Into<PathBuf>, calibration: CalibrationConfig) -> std::io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let (tx, rx) = mpsc::channel();
        let thread_root = root.clone();
        thread::Builder::new()
            .name("wayfinder-recorder".into())
            .spawn(move || run(rx, thread_root, calibration))?;
        Ok(Recorder { tx, root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, session: Uuid) -> PathBuf {
        self.root.join(session.to_string())
    }

    pub(crate) fn open(&self, session: Uuid) {
        let _ = self.tx.send(Event::Open(session));
    }

    pub(crate) fn frame(
        &self,
        session: Uuid,
        timestamp_ms: u64,
        dims: Option<ImageDims>,
        jpeg: Bytes,
        instructions: Vec<LoggedInstruction>,
    ) {
        let _ = self.tx.send(Event::Frame {
            session,
            timestamp_ms,
            dims,
            jpeg,
            instructions,
        });
    }

    /// Resolves once every event sent before the call has been written.
    pub async fn sync(&self) {
        let (done, wait) = oneshot::channel();
        if self.tx.send(Event::Sync(done)).is_ok() {
            let _ = wait.await;
        }
    }
}
