//! Run registry, background executor and on-disk spool.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex, OnceLock, RwLock, Weak};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use waypoint_core::harness::{
    read_results, run_battery_with, write_results, CurvePayload, RunConfig, RunResult,
};
use waypoint_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl RunStatus {
    pub fn is_finished(self) -> bool {
        matches!(self, RunStatus::Done | RunStatus::Failed)
    }
}

/// Client-visible state of a submitted battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHandle {
    pub id: String,
    pub status: RunStatus,
    /// Completed runs over total runs, in [0, 1].
    pub progress: f64,
    pub completed: usize,
    pub total: usize,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct RunEntry {
    config: RunConfig,
    handle: Mutex<RunHandle>,
    payload: OnceLock<Arc<CurvePayload>>,
}

impl RunEntry {
    fn snapshot(&self) -> RunHandle {
        self.handle.lock().unwrap().clone()
    }

    fn update(&self, f: impl FnOnce(&mut RunHandle)) -> RunHandle {
        let mut h = self.handle.lock().unwrap();
        f(&mut h);
        h.clone()
    }
}

/// Outcome of a curve lookup.
pub enum CurveLookup {
    Ready(Arc<CurvePayload>),
    NotFinished(RunStatus),
    Failed(String),
    Unknown,
}

pub struct Registry {
    runs: RwLock<HashMap<String, Arc<RunEntry>>>,
    spool: Option<PathBuf>,
    workers: usize,
    queue: Mutex<Sender<String>>,
    counter: AtomicU64,
}

impl Registry {
    /// Creates the registry, reloads the spool and starts the executor thread.
    /// Batteries run one at a time, each on `workers` threads (0 = all cores).
    pub fn start(spool: Option<PathBuf>, workers: usize) -> Result<Arc<Self>> {
        let (tx, rx) = mpsc::channel();
        let registry = Arc::new(Registry {
            runs: RwLock::new(HashMap::new()),
            spool,
            workers,
            queue: Mutex::new(tx),
            counter: AtomicU64::new(0),
        });
        let weak = Arc::downgrade(&registry);
        std::thread::Builder::new()
            .name("battery-executor".into())
            .spawn(move || executor(weak, rx))?;
        registry.reload()?;
        Ok(registry)
    }

    /// Registers a validated config and queues it for execution.
    pub fn submit(&self, config: RunConfig, total: usize) -> RunHandle {
        let created_at = unix_now();
        let mut runs = self.runs.write().unwrap();
        let id = loop {
            let n = self.counter.fetch_add(1, Ordering::Relaxed);
            let candidate = format!("{:x}-{:04x}", created_at, n & 0xffff);
            if !runs.contains_key(&candidate) {
                break candidate;
            }
        };
        let handle = RunHandle {
            id: id.clone(),
            status: RunStatus::Queued,
            progress: 0.0,
            completed: 0,
            total,
            created_at,
            error: None,
        };
        let entry = Arc::new(RunEntry {
            config,
            handle: Mutex::new(handle.clone()),
            payload: OnceLock::new(),
        });
        runs.insert(id.clone(), entry.clone());
        drop(runs);
        if let Some(dir) = self.run_dir(&id) {
            let written = fs::create_dir_all(&dir)
                .and_then(|_| fs::write(dir.join("config.json"), entry.config.to_json()));
            if let Err(e) = written {
                tracing::warn!("spool write for {id} failed: {e}");
            }
        }
        self.persist(&handle);
        self.enqueue(id);
        handle
    }

    pub fn handle(&self, id: &str) -> Option<RunHandle> {
        self.entry(id).map(|e| e.snapshot())
    }

    pub fn handles(&self) -> Vec<RunHandle> {
        let mut all: Vec<RunHandle> = self.runs.read().unwrap().values().map(|e| e.snapshot()).collect();
        all.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        all
    }

    pub fn curves(&self, id: &str) -> CurveLookup {
        let Some(entry) = self.entry(id) else {
            return CurveLookup::Unknown;
        };
        let handle = entry.snapshot();
        match (handle.status, entry.payload.get()) {
            (RunStatus::Done, Some(p)) => CurveLookup::Ready(p.clone()),
            (RunStatus::Failed, _) => CurveLookup::Failed(handle.error.unwrap_or_default()),
            (status, _) => CurveLookup::NotFinished(status),
        }
    }

    fn entry(&self, id: &str) -> Option<Arc<RunEntry>> {
        self.runs.read().unwrap().get(id).cloned()
    }

    fn enqueue(&self, id: String) {
        // The receiver lives as long as the registry, so this cannot fail.
        let _ = self.queue.lock().unwrap().send(id);
    }

    fn run_dir(&self, id: &str) -> Option<PathBuf> {
        self.spool.as_ref().map(|s| s.join(id))
    }

    fn persist(&self, handle: &RunHandle) {
        let Some(dir) = self.run_dir(&handle.id) else {
            return;
        };
        let text = serde_json::to_string_pretty(handle).expect("handles serialize");
        if let Err(e) = fs::create_dir_all(&dir).and_then(|_| fs::write(dir.join("handle.json"), text)) {
            tracing::warn!("spool write for {} failed: {e}", handle.id);
        }
    }

    fn execute(&self, id: &str) {
        let Some(entry) = self.entry(id) else {
            return;
        };
        let handle = entry.update(|h| h.status = RunStatus::Running);
        self.persist(&handle);

        let outcome = self.run_entry(&entry);
        let handle = match outcome {
            Ok(payload) => {
                let _ = entry.payload.set(Arc::new(payload));
                entry.update(|h| {
                    h.status = RunStatus::Done;
                    h.completed = h.total;
                    h.progress = 1.0;
                })
            }
            Err(e) => entry.update(|h| {
                h.status = RunStatus::Failed;
                h.error = Some(e.to_string());
            }),
        };
        self.persist(&handle);
    }

    fn run_entry(&self, entry: &RunEntry) -> Result<CurvePayload> {
        let prepared = entry.config.prepare()?;
        let progress = |done: usize, total: usize| {
            entry.update(|h| {
                if done > h.completed {
                    h.completed = done;
                    h.total = total;
                    h.progress = done as f64 / total.max(1) as f64;
                }
            });
        };
        let runs = run_battery_with(&prepared, self.workers, &progress)?;
        let id = entry.snapshot().id;
        let payload = CurvePayload::from_runs(&runs, &entry.config.metric_settings())?;
        if let Some(dir) = self.run_dir(&id) {
            if let Err(e) = write_spool(&dir, &runs, &payload) {
                tracing::warn!("spool write for {id} failed: {e}");
            }
        }
        Ok(payload)
    }

    /// Restores spooled runs. Finished runs are rebuilt from their results file;
    /// runs interrupted by a shutdown are queued again from the start.
    fn reload(&self) -> Result<()> {
        let Some(spool) = &self.spool else {
            return Ok(());
        };
        fs::create_dir_all(spool)?;
        let mut pending = Vec::new();
        for dir in fs::read_dir(spool)? {
            let dir = dir?.path();
            if !dir.is_dir() {
                continue;
            }
            match load_spooled(&dir) {
                Ok((config, mut handle, payload)) => {
                    let entry = RunEntry {
                        config,
                        handle: Mutex::new(handle.clone()),
                        payload: OnceLock::new(),
                    };
                    match (handle.status, payload) {
                        (RunStatus::Done, Some(Ok(p))) => {
                            let _ = entry.payload.set(Arc::new(p));
                        }
                        (RunStatus::Done, Some(Err(e))) => {
                            handle.status = RunStatus::Failed;
                            handle.error = Some(format!("spooled results unreadable: {e}"));
                        }
                        (RunStatus::Failed, _) => {}
                        _ => {
                            handle.status = RunStatus::Queued;
                            handle.completed = 0;
                            handle.progress = 0.0;
                            pending.push((handle.created_at, handle.id.clone()));
                        }
                    }
                    *entry.handle.lock().unwrap() = handle.clone();
                    self.runs
                        .write()
                        .unwrap()
                        .insert(handle.id.clone(), Arc::new(entry));
                    self.persist(&handle);
                }
                Err(e) => tracing::warn!("skipping spool entry {}: {e}", dir.display()),
            }
        }
        pending.sort();
        for (_, id) in pending {
            self.enqueue(id);
        }
        Ok(())
    }
}

type Spooled = (RunConfig, RunHandle, Option<Result<CurvePayload>>);

fn load_spooled(dir: &Path) -> Result<Spooled> {
    let config = RunConfig::from_json(&fs::read_to_string(dir.join("config.json"))?)?;
    let handle: RunHandle = serde_json::from_str(&fs::read_to_string(dir.join("handle.json"))?)?;
    if handle.id != dir.file_name().and_then(|n| n.to_str()).unwrap_or_default() {
        return Err(Error::Config("handle id does not match its directory".into()));
    }
    let payload = (handle.status == RunStatus::Done).then(|| {
        let runs = read_results(fs::File::open(dir.join("results.csv"))?)?;
        CurvePayload::from_runs(&runs, &config.metric_settings())
    });
    Ok((config, handle, payload))
}

fn write_spool(dir: &Path, runs: &[RunResult], payload: &CurvePayload) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results(runs, fs::File::create(dir.join("results.csv"))?)?;
    fs::write(dir.join("report.json"), payload.metrics.to_json())?;
    fs::write(dir.join("report.txt"), payload.metrics.to_table())?;
    fs::write(dir.join("curves.json"), serde_json::to_string(payload)?)?;
    Ok(())
}

fn executor(registry: Weak<Registry>, rx: Receiver<String>) {
    while let Ok(id) = rx.recv() {
        let Some(registry) = registry.upgrade() else {
            return;
        };
        registry.execute(&id);
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
