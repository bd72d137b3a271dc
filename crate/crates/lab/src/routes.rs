//! HTTP handlers.

use std::convert::Infallible;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::IntoResponse;
use axum::Json;
use cellulat_core::{
    detect_columns, level_occupancy, ActiveStimulus, AgentClass, Diagnostic, ExternalEmission,
    FiringRecord, Lesion, LesionAck, LesionKind, SignalEntry, SimState, Stimulus, TickReport,
    TraceRow,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::error::{ApiError, ApiJson};
use crate::models::StoredModel;
use crate::sessions::{tick_messages, SessionCore, SessionHandle, Status, StreamMessage};
use crate::AppState;

/// Largest `ticks` accepted by one step request.
pub const MAX_STEP_TICKS: u64 = 100_000;

fn session(state: &AppState, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
    state
        .sessions
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session `{id}`")))
}

fn model(state: &AppState, id: &str) -> Result<Arc<StoredModel>, ApiError> {
    state
        .models
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown model `{id}`")))
}

fn ensure_open(s: &SessionHandle) -> Result<(), ApiError> {
    if s.activity().status == Status::Ended {
        return Err(ApiError::Conflict(format!("session `{}` has ended", s.id)));
    }
    Ok(())
}

pub async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Serialize)]
pub struct ModelCreated {
    model_id: String,
    diagnostics: Vec<Diagnostic>,
}

pub async fn create_model(State(state): State<AppState>, body: String) -> Result<Json<ModelCreated>, ApiError> {
    match state.models.insert(&body) {
        Ok(m) => Ok(Json(ModelCreated {
            model_id: m.id.clone(),
            diagnostics: m.warnings.clone(),
        })),
        Err(diagnostics) => Err(ApiError::Unprocessable {
            message: format!(
                "model has {} error(s)",
                diagnostics.iter().filter(|d| d.is_error()).count()
            ),
            diagnostics,
        }),
    }
}

pub async fn list_models(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "models": state.models.ids() }))
}

pub async fn get_model(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let m = model(&state, &id)?;
    let md = &m.model;
    let agents: Vec<Value> = md
        .agents
        .iter()
        .map(|a| {
            json!({
                "id": a.id,
                "class": a.class,
                "priority": a.priority,
                "region": a.default_region(),
                "multiplicity": a.multiplicity,
                "firing_probability": a.firing_probability,
            })
        })
        .collect();
    Ok(Json(json!({
        "model_id": m.id,
        "name": md.name,
        "metadata": md.metadata,
        "levels": md.levels,
        "species": md.species,
        "ligands": md.ligands,
        "stimuli": md.stimuli,
        "agents": agents,
        "interface_agents": md.agents.iter().filter(|a| a.class == AgentClass::Interface).map(|a| &a.id).collect::<Vec<_>>(),
        "diagnostics": m.warnings,
        "level_occupancy": level_occupancy(md),
        "columns": detect_columns(md),
        "text": m.text,
    })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    model_id: String,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
pub struct SessionCreated {
    session_id: String,
}

pub async fn create_session(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<CreateSession>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let m = model(&state, &req.model_id)?;
    let sim = SimState::new((*m.model).clone(), req.seed).map_err(|e| ApiError::invalid(e.to_string()))?;
    state.collect_if_full();
    let handle = state.sessions.create(&m.id, SessionCore::new(sim), None);
    tracing::info!(session = %handle.id, model = %m.id, seed = req.seed, "session created");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: handle.id.clone(),
        }),
    ))
}

pub async fn list_sessions(State(state): State<AppState>) -> Json<Value> {
    let sessions: Vec<Value> = state
        .sessions
        .all()
        .iter()
        .map(|s| {
            json!({
                "session_id": s.id,
                "model_id": s.model_id,
                "seed": s.seed,
                "status": s.activity().status,
                "parent": s.parent,
            })
        })
        .collect();
    Json(json!({ "sessions": sessions }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    ticks: u64,
}

/// What one tick did, without the per-event detail carried by the stream.
#[derive(Debug, Serialize)]
pub struct TickSummary {
    pub tick: u64,
    pub stimuli_active: Vec<ActiveStimulus>,
    pub agenda: Vec<String>,
    pub firings: Vec<FiringRecord>,
    pub event_count: usize,
    pub emissions: Vec<ExternalEmission>,
}

impl From<&TickReport> for TickSummary {
    fn from(r: &TickReport) -> Self {
        TickSummary {
            tick: r.tick,
            stimuli_active: r.stimuli_active.clone(),
            agenda: r.agenda.iter().map(|e| e.agent.clone()).collect(),
            firings: r.firings.iter().filter(|f| f.fired).cloned().collect(),
            event_count: r.events.len(),
            emissions: r.emissions.clone(),
        }
    }
}

pub async fn step(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<StepRequest>,
) -> Result<Json<Vec<TickSummary>>, ApiError> {
    if req.ticks > MAX_STEP_TICKS {
        return Err(ApiError::invalid(format!("ticks must be at most {MAX_STEP_TICKS}")));
    }
    let s = session(&state, &id)?;
    let mut core = s.core.clone().lock_owned().await;
    ensure_open(&s)?;
    s.set_status(Status::Running);
    let handle = s.clone();
    let trace_dir = state.sessions.trace_dir.clone();
    let result = tokio::task::spawn_blocking(move || {
        let mut summaries = Vec::with_capacity(req.ticks as usize);
        for _ in 0..req.ticks {
            let c = &mut *core;
            let report = c.sim.step();
            c.trace.record(&c.sim);
            for msg in tick_messages(&report) {
                handle.publish(msg);
            }
            summaries.push(TickSummary::from(&report));
        }
        if let Some(dir) = trace_dir {
            if let Err(e) = core.persist(&dir, &handle.id) {
                tracing::warn!(session = %handle.id, error = %e, "trace persistence failed");
            }
        }
        summaries
    })
    .await;
    s.set_status(Status::Idle);
    result
        .map(Json)
        .map_err(|e| ApiError::Internal(format!("step task failed: {e}")))
}

#[derive(Serialize)]
pub struct StimulusAck {
    ligand: String,
    amount: f64,
    from_tick: u64,
    to_tick: u64,
}

pub async fn add_stimulus(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(stim): ApiJson<Stimulus>,
) -> Result<Json<StimulusAck>, ApiError> {
    let s = session(&state, &id)?;
    let mut core = s.core.lock().await;
    ensure_open(&s)?;
    core.sim
        .add_stimulus(stim.clone())
        .map_err(|e| ApiError::invalid(e.to_string()))?;
    s.touch();
    Ok(Json(StimulusAck {
        ligand: stim.ligand,
        amount: stim.amount,
        from_tick: stim.from_tick,
        to_tick: stim.to_tick,
    }))
}

/// A lesion either in compact spec form or spelled out field by field.
#[derive(Deserialize)]
#[serde(untagged)]
pub enum LesionRequest {
    Spec {
        spec: String,
        id: Option<String>,
    },
    Structured {
        id: Option<String>,
        #[serde(flatten)]
        kind: LesionKind,
        at_tick: u64,
        until_tick: Option<u64>,
    },
}

pub async fn add_lesion(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<LesionRequest>,
) -> Result<Json<LesionAck>, ApiError> {
    let s = session(&state, &id)?;
    let mut core = s.core.lock().await;
    ensure_open(&s)?;
    let lesion_id = |given: Option<String>, n: u64| given.unwrap_or_else(|| format!("l-{n}"));
    let n = core.next_lesion;
    let lesion = match req {
        LesionRequest::Spec { spec, id } => {
            Lesion::parse_spec(&spec, lesion_id(id, n)).map_err(|e| ApiError::invalid(e.to_string()))?
        }
        LesionRequest::Structured {
            id,
            kind,
            at_tick,
            until_tick,
        } => Lesion {
            id: lesion_id(id, n),
            kind,
            at_tick,
            until_tick,
        },
    };
    let ack = core
        .sim
        .apply_lesion(lesion)
        .map_err(|e| ApiError::invalid(e.to_string()))?;
    core.next_lesion += 1;
    s.touch();
    tracing::info!(session = %s.id, lesion = %ack.id, at = ack.at_tick, "lesion registered");
    Ok(Json(ack))
}

pub async fn fork(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<(StatusCode, Json<SessionCreated>), ApiError> {
    let s = session(&state, &id)?;
    let copy = {
        let core = s.core.lock().await;
        ensure_open(&s)?;
        let mut copy = core.clone();
        copy.persisted_rows = 0;
        copy
    };
    s.touch();
    state.collect_if_full();
    let child = state.sessions.create(&s.model_id, copy, Some(s.id.clone()));
    tracing::info!(parent = %s.id, session = %child.id, "session forked");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated {
            session_id: child.id.clone(),
        }),
    ))
}

pub async fn end(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = session(&state, &id)?;
    let _core = s.core.lock().await;
    ensure_open(&s)?;
    s.set_status(Status::Ended);
    s.publish(StreamMessage::End);
    Ok(Json(json!({ "session_id": s.id, "status": Status::Ended })))
}

#[derive(Serialize)]
pub struct SessionState {
    session_id: String,
    model_id: String,
    seed: u64,
    status: Status,
    parent: Option<String>,
    tick: u64,
    signals: Vec<SignalEntry>,
    /// Lesions whose window has not closed.
    lesions: Vec<Lesion>,
    stimuli: Vec<Stimulus>,
    emissions: usize,
}

pub async fn get_state(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionState>, ApiError> {
    let s = session(&state, &id)?;
    let core = s.core.lock().await;
    Ok(Json(SessionState {
        session_id: s.id.clone(),
        model_id: s.model_id.clone(),
        seed: s.seed,
        status: s.activity().status,
        parent: s.parent.clone(),
        tick: core.sim.tick(),
        signals: core.sim.board().entries(),
        lesions: core.sim.pending_lesions().cloned().collect(),
        stimuli: core.sim.stimuli().to_vec(),
        emissions: core.sim.emissions().len(),
    }))
}

#[derive(Deserialize)]
pub struct TraceQuery {
    #[serde(default)]
    from: u64,
}

pub async fn get_trace(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<TraceQuery>,
) -> Result<Json<Vec<TraceRow>>, ApiError> {
    let s = session(&state, &id)?;
    let core = s.core.lock().await;
    Ok(Json(core.trace_since(q.from)))
}

/// Server-sent events: one JSON object per message, with the message type as
/// the SSE event name. A subscriber that falls more than the buffer size
/// behind receives a final `close` event with code `slow_subscriber` and is
/// disconnected.
pub async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    let s = session(&state, &id)?;
    let rx = s.events.subscribe();
    let ended = s.activity().status == Status::Ended;
    let stream = futures::stream::unfold((rx, ended), |(mut rx, done)| async move {
        if done {
            return None;
        }
        let (event, done) = match rx.recv().await {
            Ok(msg) => {
                let last = matches!(*msg, StreamMessage::End);
                let data = serde_json::to_string(&*msg).expect("stream messages serialize");
                (Event::default().event(msg.kind()).data(data), last)
            }
            Err(RecvError::Lagged(missed)) => {
                let data = json!({ "code": "slow_subscriber", "missed": missed }).to_string();
                (Event::default().event("close").data(data), true)
            }
            Err(RecvError::Closed) => return None,
        };
        Some((Ok::<_, Infallible>(event), (rx, done)))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
