use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{AnswerTrace, PipelineError, TraceStatus};

pub const TRACES_FILE: &str = "traces.jsonl";
pub const TRACE_INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceIndexEntry {
    /// 1-based line of the latest record for this trace.
    pub line: usize,
    pub status: TraceStatus,
}

#[derive(Debug, Default)]
struct State {
    traces: HashMap<String, AnswerTrace>,
    order: Vec<String>,
    index: BTreeMap<String, TraceIndexEntry>,
    lines: usize,
}

/// Append-only trace log for one run. A re-run trace is appended again and
/// the later line wins. Every append is fsynced before returning.
#[derive(Debug)]
pub struct TraceStore {
    dir: PathBuf,
    state: Mutex<State>,
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Store(format!("{}: {e}", path.display()))
}

impl TraceStore {
    /// Opens or creates the store in `dir`. A torn final line (from a crash
    /// mid-write) is cut off; any other unreadable line is an error.
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| store_err(dir, e))?;
        let path = dir.join(TRACES_FILE);
        let mut state = State::default();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(store_err(&path, e)),
        };
        let mut good_len = 0;
        let mut lines = text.split_inclusive('\n').peekable();
        while let Some(line) = lines.next() {
            let is_last = lines.peek().is_none();
            match serde_json::from_str::<AnswerTrace>(line.trim_end()) {
                Ok(trace) => {
                    state.lines += 1;
                    state.record(trace, state.lines);
                    good_len += line.len();
                }
                Err(_) if is_last && !line.ends_with('\n') => {
                    tracing::warn!("dropping torn final line of {}", path.display());
                    let f = OpenOptions::new()
                        .write(true)
                        .open(&path)
                        .map_err(|e| store_err(&path, e))?;
                    f.set_len(good_len as u64)
                        .map_err(|e| store_err(&path, e))?;
                    f.sync_all().map_err(|e| store_err(&path, e))?;
                }
                Err(e) => return Err(store_err(&path, format!("line {}: {e}", state.lines + 1))),
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            state: Mutex::new(state),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&self, trace: &AnswerTrace) -> Result<(), PipelineError> {
        let path = self.dir.join(TRACES_FILE);
        let mut line = serde_json::to_string(trace).map_err(|e| store_err(&path, e))?;
        line.push('\n');
        let mut state = self.state.lock().unwrap();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| store_err(&path, e))?;
        f.write_all(line.as_bytes())
            .map_err(|e| store_err(&path, e))?;
        f.sync_all().map_err(|e| store_err(&path, e))?;
        state.lines += 1;
        let n = state.lines;
        state.record(trace.clone(), n);
        write_index(&self.dir, &state.index)
    }

    pub fn get(&self, trace_id: &str) -> Option<AnswerTrace> {
        self.state.lock().unwrap().traces.get(trace_id).cloned()
    }

    pub fn is_completed(&self, trace_id: &str) -> bool {
        self.state
            .lock()
            .unwrap()
            .index
            .get(trace_id)
            .is_some_and(|e| e.status == TraceStatus::Completed)
    }

    /// Latest version of every trace, in order of first appearance.
    pub fn traces(&self) -> Vec<AnswerTrace> {
        let state = self.state.lock().unwrap();
        state
            .order
            .iter()
            .map(|id| state.traces[id].clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.state.lock().unwrap().order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl State {
    fn record(&mut self, trace: AnswerTrace, line: usize) {
        let id = trace.trace_id.clone();
        self.index.insert(
            id.clone(),
            TraceIndexEntry {
                line,
                status: trace.status,
            },
        );
        if self.traces.insert(id.clone(), trace).is_none() {
            self.order.push(id);
        }
    }
}

fn write_index(dir: &Path, index: &BTreeMap<String, TraceIndexEntry>) -> Result<(), PipelineError> {
    let path = dir.join(TRACE_INDEX_FILE);
    let tmp = dir.join(format!("{TRACE_INDEX_FILE}.tmp"));
    let bytes = serde_json::to_vec_pretty(index).map_err(|e| store_err(&path, e))?;
    let mut f = File::create(&tmp).map_err(|e| store_err(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| store_err(&tmp, e))?;
    f.sync_all().map_err(|e| store_err(&tmp, e))?;
    std::fs::rename(&tmp, &path).map_err(|e| store_err(&path, e))
}
