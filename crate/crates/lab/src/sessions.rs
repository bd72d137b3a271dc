//! Simulation sessions, their event fan-out and the reclamation policy.
//!
//! Every command that touches a session's simulation holds that session's
//! async mutex for its whole duration, so commands on one session apply one
//! at a time in lock-acquisition order. Bookkeeping read by the collector
//! (status, last activity) lives behind a separate short-lived lock.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex as StdMutex, RwLock};
use std::time::{Duration, Instant};

use cellulat_core::trace::{write_jsonl, TraceRecorder};
use cellulat_core::{ExternalEmission, FiringRecord, SimState, TickReport, TraceRow, WriteEvent};
use serde::Serialize;
use tokio::sync::{broadcast, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Idle,
    Running,
    Ended,
}

/// One item of a session's event stream.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Write(WriteEvent),
    Firing {
        tick: u64,
        #[serde(flatten)]
        record: FiringRecord,
    },
    Emission(ExternalEmission),
    /// Sent after the last message of each tick.
    TickEnd { tick: u64 },
    /// The session was ended; the stream closes after this message.
    End,
}

impl StreamMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            StreamMessage::Write(_) => "write",
            StreamMessage::Firing { .. } => "firing",
            StreamMessage::Emission(_) => "emission",
            StreamMessage::TickEnd { .. } => "tick_end",
            StreamMessage::End => "end",
        }
    }
}

/// Messages for one tick: writes in seq order, then firings, emissions and
/// the tick marker.
pub fn tick_messages(report: &TickReport) -> Vec<StreamMessage> {
    let writes = report.events.iter().cloned().map(StreamMessage::Write);
    let firings = report.firings.iter().map(|f| StreamMessage::Firing {
        tick: report.tick,
        record: f.clone(),
    });
    let emissions = report.emissions.iter().cloned().map(StreamMessage::Emission);
    writes
        .chain(firings)
        .chain(emissions)
        .chain([StreamMessage::TickEnd { tick: report.tick }])
        .collect()
}

/// Mutable simulation state of a session.
#[derive(Debug, Clone)]
pub struct SessionCore {
    pub sim: SimState,
    pub trace: TraceRecorder,
    /// Rows already appended to the persisted trace file.
    pub persisted_rows: usize,
    pub next_lesion: u64,
}

impl SessionCore {
    pub fn new(sim: SimState) -> Self {
        let mut trace = TraceRecorder::new(sim.model());
        trace.record(&sim);
        SessionCore {
            sim,
            trace,
            persisted_rows: 0,
            next_lesion: 1,
        }
    }

    pub fn trace_since(&self, from: u64) -> Vec<TraceRow> {
        let rows = self.trace.rows();
        let start = rows.partition_point(|r| r.tick < from);
        rows[start..].to_vec()
    }

    /// Appends rows not yet written to `<dir>/<session>/trace.jsonl`.
    pub fn persist(&mut self, dir: &Path, session: &str) -> io::Result<()> {
        let session_dir = dir.join(session);
        std::fs::create_dir_all(&session_dir)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(session_dir.join("trace.jsonl"))?;
        let rows = &self.trace.rows()[self.persisted_rows..];
        write_jsonl(rows, BufWriter::new(file))?;
        self.persisted_rows = self.trace.rows().len();
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Activity {
    pub status: Status,
    pub last_active: Instant,
}

#[derive(Debug)]
pub struct SessionHandle {
    pub id: String,
    pub model_id: String,
    pub seed: u64,
    pub parent: Option<String>,
    pub created: Instant,
    pub activity: StdMutex<Activity>,
    pub events: broadcast::Sender<Arc<StreamMessage>>,
    pub core: Arc<Mutex<SessionCore>>,
}

impl SessionHandle {
    pub fn activity(&self) -> Activity {
        *self.activity.lock().expect("activity lock")
    }

    pub fn set_status(&self, status: Status) {
        let mut a = self.activity.lock().expect("activity lock");
        a.status = status;
        a.last_active = Instant::now();
    }

    pub fn touch(&self) {
        self.activity.lock().expect("activity lock").last_active = Instant::now();
    }

    /// Sends to current subscribers; having none is not an error.
    pub fn publish(&self, msg: StreamMessage) {
        let _ = self.events.send(Arc::new(msg));
    }
}

/// Reclamation limits. `None` disables a limit.
#[derive(Debug, Clone, Copy, Default)]
pub struct GcPolicy {
    pub max_idle: Option<Duration>,
    pub max_sessions: Option<usize>,
}

#[derive(Debug)]
pub struct SessionRegistry {
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    counter: AtomicU64,
    event_buffer: usize,
    pub trace_dir: Option<PathBuf>,
}

impl SessionRegistry {
    pub fn new(event_buffer: usize, trace_dir: Option<PathBuf>) -> Self {
        SessionRegistry {
            sessions: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(1),
            event_buffer: event_buffer.max(1),
            trace_dir,
        }
    }

    pub fn create(&self, model_id: &str, core: SessionCore, parent: Option<String>) -> Arc<SessionHandle> {
        let id = format!("s-{}", self.counter.fetch_add(1, Ordering::Relaxed));
        let (events, _) = broadcast::channel(self.event_buffer);
        let now = Instant::now();
        let handle = Arc::new(SessionHandle {
            id: id.clone(),
            model_id: model_id.to_string(),
            seed: core.sim.seed(),
            parent,
            created: now,
            activity: StdMutex::new(Activity {
                status: Status::Idle,
                last_active: now,
            }),
            events,
            core: Arc::new(Mutex::new(core)),
        });
        self.sessions
            .write()
            .expect("registry lock")
            .insert(id, handle.clone());
        handle
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionHandle>> {
        self.sessions.read().expect("registry lock").get(id).cloned()
    }

    pub fn all(&self) -> Vec<Arc<SessionHandle>> {
        let mut v: Vec<_> = self.sessions.read().expect("registry lock").values().cloned().collect();
        v.sort_by_key(|s| s.created);
        v
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("registry lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Removes ended sessions, sessions idle for longer than `max_idle`, and
    /// then the least recently active idle sessions while the registry holds
    /// more than `max_sessions`. A session with a command in flight is never
    /// removed. Returns how many sessions were reclaimed.
    pub fn gc(&self, policy: GcPolicy, now: Instant) -> usize {
        let mut sessions = self.sessions.write().expect("registry lock");
        let busy = |s: &SessionHandle| s.activity().status == Status::Running || s.core.try_lock().is_err();
        let before = sessions.len();

        sessions.retain(|_, s| {
            let a = s.activity();
            if busy(s) {
                return true;
            }
            let expired = policy
                .max_idle
                .is_some_and(|max| now.saturating_duration_since(a.last_active) > max);
            a.status != Status::Ended && !expired
        });

        if let Some(max) = policy.max_sessions {
            let mut idle: Vec<(Instant, String)> = sessions
                .values()
                .filter(|s| !busy(s))
                .map(|s| (s.activity().last_active, s.id.clone()))
                .collect();
            idle.sort();
            let excess = sessions.len().saturating_sub(max);
            for (_, id) in idle.into_iter().take(excess) {
                sessions.remove(&id);
            }
        }
        before - sessions.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellulat_core::ca2plus_scenario;

    fn registry() -> SessionRegistry {
        SessionRegistry::new(16, None)
    }

    fn core() -> SessionCore {
        SessionCore::new(SimState::new(ca2plus_scenario().model(), 7).unwrap())
    }

    fn age(s: &SessionHandle, by: Duration) {
        s.activity.lock().unwrap().last_active -= by;
    }

    #[test]
    fn gc_on_empty_registry() {
        let policy = GcPolicy {
            max_idle: Some(Duration::from_secs(1)),
            max_sessions: Some(1),
        };
        assert_eq!(registry().gc(policy, Instant::now()), 0);
    }

    #[test]
    fn expired_idle_session_is_reclaimed() {
        let r = registry();
        let s = r.create("m", core(), None);
        age(&s, Duration::from_secs(120));
        let fresh = r.create("m", core(), None);
        let policy = GcPolicy {
            max_idle: Some(Duration::from_secs(60)),
            max_sessions: None,
        };
        assert_eq!(r.gc(policy, Instant::now()), 1);
        assert!(r.get(&s.id).is_none());
        assert!(r.get(&fresh.id).is_some());
    }

    #[test]
    fn ended_sessions_are_reclaimed() {
        let r = registry();
        let s = r.create("m", core(), None);
        s.set_status(Status::Ended);
        assert_eq!(r.gc(GcPolicy::default(), Instant::now()), 1);
        assert!(r.is_empty());
    }

    #[test]
    fn active_session_survives_and_oldest_idle_goes() {
        let r = registry();
        let active = r.create("m", core(), None);
        let old = r.create("m", core(), None);
        let young = r.create("m", core(), None);
        age(&active, Duration::from_secs(300));
        age(&old, Duration::from_secs(200));
        age(&young, Duration::from_secs(100));
        let _guard = active.core.try_lock().unwrap();
        let policy = GcPolicy {
            max_idle: None,
            max_sessions: Some(2),
        };
        assert_eq!(r.gc(policy, Instant::now()), 1);
        assert!(r.get(&active.id).is_some());
        assert!(r.get(&old.id).is_none());
        assert!(r.get(&young.id).is_some());
    }

    #[test]
    fn stream_order_within_a_tick() {
        let mut sim = SimState::new(ca2plus_scenario().model(), 7).unwrap();
        let report = sim.step();
        let kinds: Vec<_> = tick_messages(&report).iter().map(|m| m.kind()).collect();
        assert_eq!(kinds, ["write", "firing", "tick_end"]);
        let json = serde_json::to_value(&tick_messages(&report)[1]).unwrap();
        assert_eq!(json["type"], "firing");
        assert_eq!(json["agent"], "GPCR");
        assert_eq!(json["tick"], 0);
    }

    #[test]
    fn trace_since_and_persistence() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = core();
        for _ in 0..3 {
            c.sim.step();
            c.trace.record(&c.sim);
        }
        assert!(c.trace_since(2).iter().all(|r| r.tick >= 2));
        assert_eq!(c.trace_since(0).len(), c.trace.rows().len());
        assert!(c.trace_since(99).is_empty());
        c.persist(dir.path(), "s-1").unwrap();
        c.persist(dir.path(), "s-1").unwrap();
        let text = std::fs::read_to_string(dir.path().join("s-1/trace.jsonl")).unwrap();
        assert_eq!(text.lines().count(), c.trace.rows().len());
    }
}
