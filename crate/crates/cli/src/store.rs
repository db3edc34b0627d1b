//! Hosted annotation sessions persisted as append-only JSONL event logs,
//! one file per session, replayed on open.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use bwskit::annotation::{AnnotationError, Question, Session, SubmitOutcome};
use bwskit::corpus::Emotion;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STORE_ENV: &str = "BWSKIT_STORE";
pub const DEFAULT_STORE_DIR: &str = "bwskit-sessions";
const LOG_EXT: &str = "jsonl";

#[derive(Error, Debug)]
pub enum StoreError {
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt event log {path}, line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        session: Box<Session>,
        texts: BTreeMap<String, String>,
        emotion: Emotion,
    },
    Next {
        annotator: String,
    },
    Submit {
        annotator: String,
        tuple_index: usize,
        best: String,
        worst: String,
    },
}

/// A session together with what the service needs to present it.
#[derive(Debug)]
pub struct Hosted {
    pub id: String,
    pub session: Session,
    pub texts: BTreeMap<String, String>,
    pub emotion: Emotion,
    log_path: PathBuf,
    log: File,
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Hosted {
    fn append(&mut self, event: &Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event).expect("events serialize");
        line.push('\n');
        self.log
            .write_all(line.as_bytes())
            .and_then(|_| self.log.sync_data())
            .map_err(|e| io_err(&self.log_path, e))
    }

    /// Fetches (or repeats) the annotator's question. Only fetches that
    /// change session state are logged.
    pub fn next_question(&mut self, annotator: &str) -> Result<Option<Question>, StoreError> {
        let known = self.session.annotator(annotator).is_some();
        let pending = self.session.has_assignment(annotator);
        let q = self.session.next_question(annotator)?;
        if !known || (!pending && q.is_some()) {
            self.append(&Event::Next {
                annotator: annotator.to_string(),
            })?;
        }
        Ok(q)
    }

    /// Applies a submission; it is durable before this returns.
    pub fn submit(
        &mut self,
        annotator: &str,
        tuple_index: usize,
        best: &str,
        worst: &str,
    ) -> Result<SubmitOutcome, StoreError> {
        let outcome = self.session.submit(annotator, tuple_index, best, worst)?;
        self.append(&Event::Submit {
            annotator: annotator.to_string(),
            tuple_index,
            best: best.to_string(),
            worst: worst.to_string(),
        })?;
        Ok(outcome)
    }

    pub fn text(&self, id: &str) -> &str {
        self.texts.get(id).map(String::as_str).unwrap_or("")
    }
}

pub type SharedSession = Arc<RwLock<Hosted>>;

#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    sessions: RwLock<BTreeMap<String, SharedSession>>,
}

/// `--store` if given, else `$BWSKIT_STORE`, else `./bwskit-sessions`.
pub fn resolve_store_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(STORE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_STORE_DIR))
}

impl SessionStore {
    /// Opens `dir`, creating it if needed, and replays every session log.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let mut sessions = BTreeMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == LOG_EXT))
            .collect();
        entries.sort();
        for path in entries {
            let hosted = replay(&path)?;
            sessions.insert(hosted.id.clone(), Arc::new(RwLock::new(hosted)));
        }
        Ok(Self {
            dir,
            sessions: RwLock::new(sessions),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn create(
        &self,
        session: Session,
        texts: BTreeMap<String, String>,
        emotion: Emotion,
    ) -> Result<String, StoreError> {
        let mut sessions = self.sessions.write().expect("store lock");
        let id = (sessions.len() + 1..)
            .map(|n| format!("s{n:04}"))
            .find(|id| !sessions.contains_key(id) && !self.log_path(id).exists())
            .expect("unbounded id space");
        let log_path = self.log_path(&id);
        let log = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(&log_path)
            .map_err(|e| io_err(&log_path, e))?;
        let mut hosted = Hosted {
            id: id.clone(),
            session,
            texts,
            emotion,
            log_path,
            log,
        };
        let created = Event::Created {
            session: Box::new(hosted.session.clone()),
            texts: hosted.texts.clone(),
            emotion,
        };
        hosted.append(&created)?;
        sessions.insert(id.clone(), Arc::new(RwLock::new(hosted)));
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Option<SharedSession> {
        self.sessions.read().expect("store lock").get(id).cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions.read().expect("store lock").keys().cloned().collect()
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{LOG_EXT}"))
    }
}

/// Rebuilds a session from its log. A torn final line (crash during a
/// write) is dropped; damage anywhere else is an error.
fn replay(path: &Path) -> Result<Hosted, StoreError> {
    let corrupt = |line: usize, message: String| StoreError::Corrupt {
        path: path.display().to_string(),
        line,
        message,
    };
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| io_err(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| corrupt(0, "unnamed log".into()))?;
    let mut hosted: Option<(Session, BTreeMap<String, String>, Emotion)> = None;
    let mut valid_bytes = 0usize;
    for (idx, line) in lines.iter().enumerate() {
        let event: Event = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(_) if idx + 1 == lines.len() => break,
            Err(e) => return Err(corrupt(idx + 1, e.to_string())),
        };
        match (event, &mut hosted) {
            (Event::Created { session, texts, emotion }, None) => hosted = Some((*session, texts, emotion)),
            (Event::Next { annotator }, Some((s, _, _))) => {
                s.next_question(&annotator).map_err(|e| corrupt(idx + 1, e.to_string()))?;
            }
            (Event::Submit { annotator, tuple_index, best, worst }, Some((s, _, _))) => {
                s.submit(&annotator, tuple_index, &best, &worst)
                    .map_err(|e| corrupt(idx + 1, e.to_string()))?;
            }
            _ => return Err(corrupt(idx + 1, "event out of order".into())),
        }
        valid_bytes += line.len() + 1;
    }
    let (session, texts, emotion) = hosted.ok_or_else(|| corrupt(1, "no creation event".into()))?;
    let log = OpenOptions::new().write(true).open(path).map_err(|e| io_err(path, e))?;
    // cut a torn tail so later appends start on a fresh line
    log.set_len(valid_bytes as u64).map_err(|e| io_err(path, e))?;
    let log = OpenOptions::new().append(true).open(path).map_err(|e| io_err(path, e))?;
    Ok(Hosted {
        id,
        session,
        texts,
        emotion,
        log_path: path.to_path_buf(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bwskit::annotation::create_session;
    use bwskit::design::generate_design;

    fn hosted_store(dir: &Path) -> (SessionStore, String) {
        let ids: Vec<String> = (0..25).map(|i| format!("i{i:02}")).collect();
        let design = Arc::new(generate_design(&ids, 4).unwrap());
        let session = create_session(design, vec![], 2).unwrap();
        let texts = ids.iter().map(|i| (i.clone(), format!("text {i}"))).collect();
        let store = SessionStore::open(dir).unwrap();
        let id = store.create(session, texts, Emotion::Fear).unwrap();
        (store, id)
    }

    #[test]
    fn replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        let (store, id) = hosted_store(dir.path());
        let before = {
            let shared = store.get(&id).unwrap();
            let mut h = shared.write().unwrap();
            for _ in 0..5 {
                let q = h.next_question("a").unwrap().unwrap();
                h.next_question("a").unwrap();
                h.submit("a", q.tuple_index, &q.item_ids[0], &q.item_ids[3]).unwrap();
            }
            h.next_question("b").unwrap();
            h.session.clone()
        };
        drop(store);
        let reopened = SessionStore::open(dir.path()).unwrap();
        let shared = reopened.get(&id).unwrap();
        assert_eq!(shared.write().unwrap().session, before);
        assert_eq!(shared.write().unwrap().emotion, Emotion::Fear);
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let (store, id) = hosted_store(dir.path());
        {
            let shared = store.get(&id).unwrap();
            let mut h = shared.write().unwrap();
            let q = h.next_question("a").unwrap().unwrap();
            h.submit("a", q.tuple_index, &q.item_ids[0], &q.item_ids[1]).unwrap();
        }
        drop(store);
        let path = dir.path().join(format!("{id}.jsonl"));
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"event":"submit","annot"#).unwrap();
        drop(f);
        let reopened = SessionStore::open(dir.path()).unwrap();
        let shared = reopened.get(&id).unwrap();
        let mut h = shared.write().unwrap();
        assert_eq!(h.session.response_set().len(), 1);
        let q = h.next_question("a").unwrap().unwrap();
        h.submit("a", q.tuple_index, &q.item_ids[0], &q.item_ids[1]).unwrap();
        drop(h);
        drop(reopened);
        let again = SessionStore::open(dir.path()).unwrap();
        assert_eq!(again.get(&id).unwrap().write().unwrap().session.response_set().len(), 2);
    }

    #[test]
    fn ids_are_unique() {
        let dir = tempfile::tempdir().unwrap();
        let (store, first) = hosted_store(dir.path());
        let session = store.get(&first).unwrap().write().unwrap().session.clone();
        let second = store.create(session, BTreeMap::new(), Emotion::Joy).unwrap();
        assert_ne!(first, second);
        assert_eq!(store.ids().len(), 2);
    }
}
