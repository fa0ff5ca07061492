//! Session state and the operations of the service, independent of HTTP.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Instant;

use infillkit::analysis::{analyze_window, MetaSummary};
use infillkit::infill::remote::{serve_generate, RemoteGenerator, WireResponse};
use infillkit::wire::{encode_midi, ErrorCode, WireError};
use infillkit::{
    assign_roles, infill, parse_midi, serialize_midi, slice_window, BaselineGenerator,
    GeneratorPort, InfillResult, RegionSpec, Score, TrackRole,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::config::ServiceConfig;
use crate::http::HttpTransport;
use crate::messages::{
    AnalysisMsg, BarOutcomeMsg, BarTensionMsg, CellOutcomeMsg, GeneratorKind, HealthResponse,
    InfillRequestMsg, InfillResponseMsg, ResolveResponse,
};

struct Pending {
    score: Score,
    result: InfillResult,
}

struct Session {
    id: String,
    /// Never empty; the last entry is the head.
    history: Vec<Score>,
    roles_set: bool,
    origin_bar: Option<usize>,
    pending: Option<Pending>,
    last_access: Instant,
}

impl Session {
    fn head(&self) -> &Score {
        self.history.last().expect("history is never empty")
    }
}

/// What goes to disk on commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Snapshot {
    session_id: String,
    roles_set: bool,
    origin_bar: Option<usize>,
    history: Vec<Score>,
}

pub struct SessionService {
    config: ServiceConfig,
    baseline: BaselineGenerator,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    rng: Mutex<StdRng>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn unknown(id: &str) -> WireError {
    WireError::new(ErrorCode::UnknownSession, format!("no session {id:?}"))
}

impl SessionService {
    pub fn new(config: ServiceConfig) -> Self {
        let service = Self {
            baseline: config.generator.baseline(),
            config,
            sessions: Mutex::new(HashMap::new()),
            rng: Mutex::new(StdRng::from_os_rng()),
        };
        service.restore_snapshots();
        service
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn restore_snapshots(&self) {
        let Some(dir) = &self.config.snapshot_dir else {
            return;
        };
        let Ok(entries) = std::fs::read_dir(dir) else {
            return;
        };
        let mut sessions = lock(&self.sessions);
        for entry in entries.flatten() {
            let path = entry.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let Ok(text) = std::fs::read_to_string(&path) else {
                continue;
            };
            let Ok(snap) = serde_json::from_str::<Snapshot>(&text) else {
                continue;
            };
            if snap.history.is_empty() {
                continue;
            }
            sessions.insert(
                snap.session_id.clone(),
                Arc::new(Mutex::new(Session {
                    id: snap.session_id,
                    history: snap.history,
                    roles_set: snap.roles_set,
                    origin_bar: snap.origin_bar,
                    pending: None,
                    last_access: Instant::now(),
                })),
            );
        }
    }

    fn snapshot_path(&self, id: &str) -> Option<PathBuf> {
        self.config
            .snapshot_dir
            .as_ref()
            .map(|d| d.join(format!("{id}.json")))
    }

    fn write_snapshot(&self, session: &Session) -> std::io::Result<()> {
        let Some(path) = self.snapshot_path(&session.id) else {
            return Ok(());
        };
        let snap = Snapshot {
            session_id: session.id.clone(),
            roles_set: session.roles_set,
            origin_bar: session.origin_bar,
            history: session.history.clone(),
        };
        let text = serde_json::to_string(&snap).expect("snapshot serializes");
        write_atomic(&path, &text)
    }

    /// Drop sessions idle for longer than the TTL as of `now`.
    pub fn evict_idle_at(&self, now: Instant) -> usize {
        let ttl = self.config.ttl();
        let mut sessions = lock(&self.sessions);
        let expired: Vec<String> = sessions
            .iter()
            .filter(|(_, s)| {
                // a locked session is in use
                s.try_lock()
                    .is_ok_and(|s| now.saturating_duration_since(s.last_access) > ttl)
            })
            .map(|(id, _)| id.clone())
            .collect();
        for id in &expired {
            sessions.remove(id);
            if let Some(path) = self.snapshot_path(id) {
                let _ = std::fs::remove_file(path);
            }
        }
        expired.len()
    }

    pub fn session_count(&self) -> usize {
        lock(&self.sessions).len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, WireError> {
        self.evict_idle_at(Instant::now());
        lock(&self.sessions).get(id).cloned().ok_or_else(|| unknown(id))
    }

    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Session) -> Result<T, WireError>,
    ) -> Result<T, WireError> {
        let arc = self.session(id)?;
        let mut session = lock(&arc);
        session.last_access = Instant::now();
        f(&mut session)
    }

    fn new_id(&self) -> String {
        let bits: u128 = lock(&self.rng).random();
        format!("{bits:032x}")
    }

    pub fn create_session(&self, midi: &[u8]) -> Result<(String, MetaSummary), WireError> {
        let score = parse_midi(midi)?;
        let summary = MetaSummary::of(&score)?;
        let id = self.new_id();
        let session = Session {
            id: id.clone(),
            history: vec![score],
            roles_set: false,
            origin_bar: None,
            pending: None,
            last_access: Instant::now(),
        };
        self.evict_idle_at(Instant::now());
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok((id, summary))
    }

    /// Label the tracks; missing tracks up to three are added empty. Every
    /// snapshot in the history is relabelled so revert keeps the roles.
    pub fn set_roles(&self, id: &str, roles: &[TrackRole]) -> Result<Vec<TrackRole>, WireError> {
        self.with_session(id, |s| {
            if s.pending.is_some() {
                return Err(WireError::new(
                    ErrorCode::ConcurrentRequest,
                    "resolve the pending result before changing roles",
                ));
            }
            let history = s
                .history
                .iter()
                .map(|score| assign_roles(score, roles))
                .collect::<Result<Vec<_>, _>>()?;
            s.history = history;
            s.roles_set = true;
            Ok(s.head().roles())
        })
    }

    /// Controls of the window starting at `origin_bar` of the current head.
    /// A pending result is never reflected.
    pub fn analyze(&self, id: &str, origin_bar: usize) -> Result<AnalysisMsg, WireError> {
        self.with_session(id, |s| {
            if !s.roles_set {
                return Err(WireError::new(ErrorCode::NotReady, "set roles before analyzing"));
            }
            let head = s.head();
            let window = slice_window(head, origin_bar)?;
            let analysis = analyze_window(&window);
            let msg = AnalysisMsg::new(MetaSummary::of(head)?, &window, &analysis);
            s.origin_bar = Some(origin_bar);
            Ok(msg)
        })
    }

    pub fn request_infill(
        &self,
        id: &str,
        request: &InfillRequestMsg,
    ) -> Result<InfillResponseMsg, WireError> {
        self.with_session(id, |s| {
            let Some(origin) = s.origin_bar else {
                return Err(WireError::new(ErrorCode::NotReady, "analyze a window first"));
            };
            if s.pending.is_some() {
                return Err(WireError::new(
                    ErrorCode::ConcurrentRequest,
                    "a result is already pending; resolve it first",
                ));
            }
            let head = s.head().clone();
            let window = slice_window(&head, origin)?;
            let region = RegionSpec::new(request.region_cells())?;
            let target = request
                .control_target(window.tracks.len(), window.length)
                .map_err(WireError::invalid)?;
            let result = match request.generator {
                GeneratorKind::Baseline => infill(&window, &region, &target, request.seed, &self.baseline)?,
                GeneratorKind::Remote => {
                    let remote = self.remote_generator().ok_or_else(|| {
                        WireError::invalid("no remote generator is configured")
                    })?;
                    infill(&window, &region, &target, request.seed, &remote)?
                }
            };
            let merged = head.merge_window(&result.window);
            let response = InfillResponseMsg {
                analysis: AnalysisMsg::new(MetaSummary::of(&merged)?, &result.window, &result.analysis),
                midi: encode_midi(&serialize_midi(&merged)),
                cells: result
                    .achieved
                    .iter()
                    .map(|(c, achieved)| CellOutcomeMsg {
                        track: c.track,
                        bar: c.bar,
                        target: result.targets.cells[c],
                        achieved: *achieved,
                    })
                    .collect(),
                bars: result
                    .tension
                    .iter()
                    .map(|(b, t)| BarOutcomeMsg {
                        bar: *b,
                        target: result.targets.tension[b],
                        achieved: BarTensionMsg::new(*b, t),
                    })
                    .collect(),
            };
            s.pending = Some(Pending {
                score: merged,
                result,
            });
            Ok(response)
        })
    }

    /// Keep the pending result as the new head, or drop it.
    pub fn resolve(&self, id: &str, keep: bool) -> Result<ResolveResponse, WireError> {
        self.with_session(id, |s| {
            let pending = s.pending.take().ok_or_else(|| {
                WireError::new(ErrorCode::NothingPending, "no infill result is pending")
            })?;
            if keep {
                s.history.push(pending.score);
                // the commit stands even when the snapshot fails
                let _ = self.write_snapshot(s);
            }
            Ok(ResolveResponse {
                kept: keep,
                history_depth: s.history.len(),
            })
        })
    }

    /// The current head as a Standard MIDI File.
    pub fn export(&self, id: &str) -> Result<Vec<u8>, WireError> {
        self.with_session(id, |s| Ok(serialize_midi(s.head())))
    }

    /// The pending result, if any, for inspection.
    pub fn pending_result(&self, id: &str) -> Result<Option<InfillResult>, WireError> {
        self.with_session(id, |s| Ok(s.pending.as_ref().map(|p| p.result.clone())))
    }

    pub fn history_depth(&self, id: &str) -> Result<usize, WireError> {
        self.with_session(id, |s| Ok(s.history.len()))
    }

    pub fn health(&self) -> HealthResponse {
        HealthResponse {
            status: "ok".into(),
            sessions: self.session_count(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    fn remote_generator(&self) -> Option<RemoteGenerator<HttpTransport>> {
        self.config.remote.as_ref().map(|r| {
            RemoteGenerator::new(HttpTransport::new(&r.endpoint), r.timeout())
        })
    }

    /// Answer a generator request: with the configured remote model when
    /// there is one (acting as a proxy), else with the baseline.
    pub fn generate(&self, body: &str) -> WireResponse {
        match self.remote_generator() {
            Some(remote) => serve_generate(&remote as &dyn GeneratorPort, body),
            None => serve_generate(&self.baseline, body),
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(tmp, path)
}
