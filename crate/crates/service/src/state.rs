use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use risemf_core::mapper::{CoverageMap, Variant};
use risemf_core::scene::{parse_scene, serialize_scene, Scene, WeightMode};
use serde::Serialize;

/// A stored scene; `revision` grows on every RIS edit.
#[derive(Debug, Clone)]
pub struct SceneRecord {
    pub scene: Arc<Scene>,
    pub revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JobKey {
    pub scene_id: u64,
    pub revision: u64,
    pub variant: Variant,
    pub weight_mode: Option<WeightMode>,
}

#[derive(Debug, Clone)]
pub struct JobResult {
    pub map: Arc<CoverageMap>,
    pub csv: Arc<String>,
}

#[derive(Debug)]
pub struct Job {
    pub id: String,
    pub scene_id: String,
    pub key: JobKey,
    pub total_cells: usize,
    done_cells: AtomicUsize,
    status: Mutex<(JobState, Option<Result<JobResult, String>>)>,
}

impl Job {
    fn new(id: String, scene_id: String, key: JobKey, total_cells: usize) -> Self {
        Self {
            id,
            scene_id,
            key,
            total_cells,
            done_cells: AtomicUsize::new(0),
            status: Mutex::new((JobState::Queued, None)),
        }
    }

    pub fn state(&self) -> JobState {
        self.status.lock().unwrap().0
    }

    pub fn progress(&self) -> f64 {
        if self.state() == JobState::Done {
            return 1.0;
        }
        let done = self.done_cells.load(Ordering::Relaxed);
        if self.total_cells == 0 {
            0.0
        } else {
            (done as f64 / self.total_cells as f64).min(1.0)
        }
    }

    pub fn record_progress(&self, cells: usize) {
        self.done_cells.fetch_max(cells, Ordering::Relaxed);
    }

    pub fn result(&self) -> Option<JobResult> {
        match &self.status.lock().unwrap().1 {
            Some(Ok(r)) => Some(r.clone()),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<String> {
        match &self.status.lock().unwrap().1 {
            Some(Err(e)) => Some(e.clone()),
            _ => None,
        }
    }

    pub(crate) fn start(&self) {
        let mut s = self.status.lock().unwrap();
        if s.0 == JobState::Queued {
            s.0 = JobState::Running;
        }
    }

    pub(crate) fn finish(&self, outcome: Result<JobResult, String>) {
        let mut s = self.status.lock().unwrap();
        if matches!(s.0, JobState::Done | JobState::Failed) {
            return;
        }
        s.0 = if outcome.is_ok() { JobState::Done } else { JobState::Failed };
        s.1 = Some(outcome);
    }
}

#[derive(Default)]
struct Registry {
    scenes: HashMap<u64, Arc<Mutex<SceneRecord>>>,
    jobs: HashMap<u64, Arc<Job>>,
    by_key: HashMap<JobKey, u64>,
}

/// Shared in-memory store for scenes and jobs.
#[derive(Clone)]
pub struct AppState {
    registry: Arc<RwLock<Registry>>,
    next_scene: Arc<AtomicU64>,
    next_job: Arc<AtomicU64>,
    state_dir: Option<Arc<PathBuf>>,
}

pub fn scene_token(id: u64) -> String {
    format!("s{id}")
}

pub fn job_token(id: u64) -> String {
    format!("j{id}")
}

fn parse_token(token: &str, prefix: char) -> Option<u64> {
    token.strip_prefix(prefix)?.parse().ok()
}

impl AppState {
    pub fn new() -> Self {
        Self {
            registry: Arc::default(),
            next_scene: Arc::new(AtomicU64::new(1)),
            next_job: Arc::new(AtomicU64::new(1)),
            state_dir: None,
        }
    }

    /// Snapshots every stored scene to `dir/<scene_id>.json` and restores
    /// snapshots found there.
    pub fn with_state_dir(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        let mut state = Self::new();
        let mut max_id = 0;
        {
            let mut reg = state.registry.write().unwrap();
            for entry in std::fs::read_dir(&dir)? {
                let path = entry?.path();
                let Some(id) = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .filter(|_| path.extension().is_some_and(|e| e == "json"))
                    .and_then(|s| parse_token(s, 's'))
                else {
                    continue;
                };
                match std::fs::read_to_string(&path).map_err(|e| e.to_string()).and_then(|t| {
                    parse_scene(&t).map_err(|e| e.to_string())
                }) {
                    Ok(scene) => {
                        reg.scenes.insert(
                            id,
                            Arc::new(Mutex::new(SceneRecord {
                                scene: Arc::new(scene),
                                revision: 1,
                            })),
                        );
                        max_id = max_id.max(id);
                    }
                    Err(e) => tracing::warn!("skipping snapshot {}: {e}", path.display()),
                }
            }
        }
        state.next_scene.store(max_id + 1, Ordering::Relaxed);
        state.state_dir = Some(Arc::new(dir));
        Ok(state)
    }

    fn snapshot(&self, id: u64, scene: &Scene) {
        if let Some(dir) = &self.state_dir {
            let path: &Path = dir;
            if let Err(e) = std::fs::write(path.join(format!("{}.json", scene_token(id))), serialize_scene(scene)) {
                tracing::warn!("could not snapshot scene {}: {e}", scene_token(id));
            }
        }
    }

    pub fn insert_scene(&self, scene: Scene) -> (String, u64) {
        let id = self.next_scene.fetch_add(1, Ordering::Relaxed);
        self.snapshot(id, &scene);
        let record = SceneRecord {
            scene: Arc::new(scene),
            revision: 1,
        };
        self.registry
            .write()
            .unwrap()
            .scenes
            .insert(id, Arc::new(Mutex::new(record)));
        (scene_token(id), 1)
    }

    fn scene_slot(&self, token: &str) -> Option<(u64, Arc<Mutex<SceneRecord>>)> {
        let id = parse_token(token, 's')?;
        let slot = self.registry.read().unwrap().scenes.get(&id)?.clone();
        Some((id, slot))
    }

    pub fn scene(&self, token: &str) -> Option<SceneRecord> {
        self.scene_slot(token).map(|(_, s)| s.lock().unwrap().clone())
    }

    /// Applies `edit` under the scene's lock; on success bumps the revision.
    pub fn update_scene<E>(
        &self,
        token: &str,
        edit: impl FnOnce(&Scene) -> Result<Scene, E>,
    ) -> Option<Result<SceneRecord, E>> {
        let (id, slot) = self.scene_slot(token)?;
        let mut record = slot.lock().unwrap();
        Some(edit(&record.scene).map(|scene| {
            self.snapshot(id, &scene);
            record.scene = Arc::new(scene);
            record.revision += 1;
            record.clone()
        }))
    }

    /// Returns the job for this scene revision and settings, creating it if
    /// none exists yet (or the previous attempt failed). The flag is true
    /// for a newly created job, which the caller must run.
    pub fn job_for(
        &self,
        scene_token: &str,
        record: &SceneRecord,
        variant: Variant,
        weight_mode: Option<WeightMode>,
    ) -> (Arc<Job>, bool) {
        let scene_id = parse_token(scene_token, 's').expect("validated scene token");
        let key = JobKey {
            scene_id,
            revision: record.revision,
            variant,
            weight_mode,
        };
        let mut reg = self.registry.write().unwrap();
        if let Some(job) = reg.by_key.get(&key).and_then(|id| reg.jobs.get(id)) {
            if job.state() != JobState::Failed {
                return (job.clone(), false);
            }
        }
        let id = self.next_job.fetch_add(1, Ordering::Relaxed);
        let job = Arc::new(Job::new(
            job_token(id),
            scene_token.to_string(),
            key,
            record.scene.grid.cell_count(),
        ));
        reg.jobs.insert(id, job.clone());
        reg.by_key.insert(key, id);
        (job, true)
    }

    pub fn job(&self, token: &str) -> Option<Arc<Job>> {
        let id = parse_token(token, 'j')?;
        self.registry.read().unwrap().jobs.get(&id).cloned()
    }
}

impl Default for AppState {
    fn default() -> Self {
        Self::new()
    }
}
