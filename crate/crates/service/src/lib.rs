//! JSON-over-HTTP sessions for the interactive alignment workflow.
//!
//! Enumeration runs as a background job. A request that needs worlds waits
//! up to [`ServiceConfig::job_wait`] for it and otherwise answers `202` with
//! a job id to poll at `/api/jobs/{id}`.

pub mod error;
pub mod session;

use std::collections::{BTreeSet, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use taxoalign::analysis::{consensus, diagnose, mir, mir_provenance, Question};
use taxoalign::engine::{check_consistency, enumerate_worlds, Budget};
use taxoalign::model::{ConstraintFlags, Diagnosis};
use taxoalign::viz::{build_rcg, cluster_worlds, rcg_to_dot};
use taxoalign::{parse_alignment, ConceptRef, RelationMask, Side};
use tokio::sync::{watch, RwLock};
use tower_http::cors::CorsLayer;

pub use error::ApiError;
use session::{load_record, save_record, AnswerRecord, HistoryEntry, SessionRecord, SessionState, RECORD_FORMAT};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Sessions are persisted here when set.
    pub data_dir: Option<PathBuf>,
    pub budget: Budget,
    pub job_wait: Duration,
    /// Origin allowed by CORS; `None` keeps same-origin only.
    pub allow_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            data_dir: None,
            budget: Budget::default(),
            job_wait: Duration::from_secs(2),
            allow_origin: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed { error: String, message: String },
}

struct Job {
    session: String,
    status: watch::Receiver<JobStatus>,
}

type Handle = Arc<RwLock<SessionState>>;

pub struct AppState {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Handle>>,
    jobs: Mutex<HashMap<String, Job>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Arc<AppState> {
        Arc::new(AppState {
            config,
            sessions: RwLock::new(HashMap::new()),
            jobs: Mutex::new(HashMap::new()),
        })
    }

    fn persist(&self, record: &SessionRecord) -> Result<(), ApiError> {
        match &self.config.data_dir {
            Some(dir) => save_record(dir, record),
            None => Ok(()),
        }
    }

    async fn session(&self, id: &str) -> Result<Handle, ApiError> {
        if let Some(h) = self.sessions.read().await.get(id) {
            return Ok(h.clone());
        }
        let dir = self
            .config
            .data_dir
            .as_ref()
            .ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
        let record = load_record(dir, id)?.ok_or_else(|| ApiError::UnknownSession(id.to_string()))?;
        let state = SessionState::from_record(record)?;
        let mut sessions = self.sessions.write().await;
        Ok(sessions
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(RwLock::new(state)))
            .clone())
    }
}

fn new_token() -> String {
    format!("{:016x}", rand::random::<u64>())
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(summary))
        .route("/api/session/{id}/consistency", get(consistency))
        .route("/api/session/{id}/diagnosis", get(diagnosis))
        .route("/api/session/{id}/repair", post(repair))
        .route("/api/session/{id}/worlds", get(worlds))
        .route("/api/session/{id}/mir", get(mir_route))
        .route("/api/session/{id}/question", get(question))
        .route("/api/session/{id}/answer", post(answer))
        .route("/api/session/{id}/reset-answers", post(reset_answers))
        .route("/api/session/{id}/rcg/{world}", get(rcg))
        .route("/api/session/{id}/cluster", get(cluster))
        .route("/api/session/{id}/provenance", get(provenance))
        .route("/api/jobs/{id}", get(job));
    if let Some(origin) = state.config.allow_origin.as_deref().and_then(|o| o.parse::<HeaderValue>().ok()) {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([axum::http::Method::GET, axum::http::Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app.with_state(state)
}

pub async fn serve(config: ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(AppState::new(config))).await
}

fn parse_json<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Storage(format!("worker failed: {e}")))
}

#[derive(Deserialize)]
struct CreateQuery {
    coverage: Option<bool>,
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    Query(q): Query<CreateQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let source = String::from_utf8(body.to_vec()).map_err(|_| ApiError::BadRequest("body is not UTF-8".into()))?;
    parse_alignment(&source).map_err(ApiError::Parse)?;
    let flags = ConstraintFlags {
        coverage: q.coverage.unwrap_or(true),
        ..ConstraintFlags::default()
    };
    let record = SessionRecord {
        format: RECORD_FORMAT,
        id: new_token(),
        source,
        flags,
        disabled: BTreeSet::new(),
        answers: Vec::new(),
        history: Vec::new(),
    };
    st.persist(&record)?;
    let state = SessionState::from_record(record)?;
    let body = summary_json(&state);
    let id = state.record.id.clone();
    st.sessions.write().await.insert(id, Arc::new(RwLock::new(state)));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

fn summary_json(s: &SessionState) -> Value {
    let taxonomies: Vec<Value> = s
        .alignment
        .taxonomies
        .iter()
        .map(|t| {
            let mut concepts: Vec<String> = (0..t.len()).map(|i| t.key(i)).collect();
            concepts.sort();
            json!({ "side": t.side(), "label": t.label(), "concepts": concepts })
        })
        .collect();
    let articulations: Vec<Value> = s
        .alignment
        .articulations
        .iter()
        .map(|a| {
            json!({
                "index": a.index,
                "text": a.to_string(),
                "disabled": s.record.disabled.contains(&a.index),
            })
        })
        .collect();
    json!({
        "id": s.record.id,
        "flags": s.record.flags,
        "taxonomies": taxonomies,
        "articulations": articulations,
        "answers": s.record.answers,
        "history": s.record.history,
    })
}

async fn summary(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let h = st.session(&id).await?;
    let s = h.read().await;
    Ok(Json(summary_json(&s)))
}

async fn consistency(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let h = st.session(&id).await?;
    let (a, version) = {
        let s = h.read().await;
        if let Some(c) = s.consistent {
            return Ok(Json(json!({ "consistent": c })));
        }
        (s.effective(), s.version)
    };
    let budget = st.config.budget;
    let c = blocking(move || check_consistency(&a, &budget)).await??.consistent;
    let mut s = h.write().await;
    if s.version == version {
        s.consistent = Some(c);
    }
    Ok(Json(json!({ "consistent": c })))
}

async fn diagnosis(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Diagnosis>, ApiError> {
    let h = st.session(&id).await?;
    let (a, version) = {
        let s = h.read().await;
        if let Some(d) = &s.diagnosis {
            return Ok(Json((**d).clone()));
        }
        (s.effective(), s.version)
    };
    let budget = st.config.budget;
    let d = blocking(move || -> Result<Diagnosis, ApiError> {
        if check_consistency(&a, &budget)?.consistent {
            return Ok(Diagnosis {
                consistent: true,
                mus: Vec::new(),
                all_conflicts: None,
                repairs: Vec::new(),
                structural_facts: Vec::new(),
            });
        }
        Ok(diagnose(&a, &budget)?)
    })
    .await??;
    let mut s = h.write().await;
    if s.version == version {
        s.consistent = Some(d.consistent);
        s.diagnosis = Some(Arc::new(d.clone()));
    }
    Ok(Json(d))
}

#[derive(Deserialize)]
struct RepairBody {
    #[serde(default)]
    remove: Vec<usize>,
    #[serde(default)]
    restore: Vec<usize>,
}

async fn repair(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: RepairBody = parse_json(&body)?;
    let h = st.session(&id).await?;
    let mut s = h.write().await;
    let known: BTreeSet<usize> = s.alignment.articulation_indices().into_iter().collect();
    if let Some(bad) = body.remove.iter().chain(&body.restore).find(|i| !known.contains(i)) {
        return Err(ApiError::BadRequest(format!("no articulation with index {bad}")));
    }
    let mut record = s.record.clone();
    let mut disabled = record.disabled.clone();
    disabled.extend(body.remove.iter().copied());
    for i in &body.restore {
        disabled.remove(i);
    }
    if disabled != record.disabled {
        record.disabled = disabled;
        record.answers.clear();
        record.history.push(HistoryEntry::Repair {
            disable: body.remove.clone(),
            enable: body.restore.clone(),
        });
        st.persist(&record)?;
        s.record = record;
        s.invalidate();
    }
    Ok(Json(summary_json(&s)))
}

/// Makes sure enumerated worlds are cached, running or joining a job.
async fn ensure_worlds(st: &Arc<AppState>, id: &str, h: &Handle) -> Result<(), ApiError> {
    let (mut rx, job_id) = {
        let mut s = h.write().await;
        if s.worlds.is_some() {
            return Ok(());
        }
        let running = s
            .running_job
            .as_ref()
            .and_then(|j| st.jobs.lock().unwrap().get(j).map(|job| (job.status.clone(), j.clone())));
        match running {
            Some(found) => found,
            None => {
                let job_id = new_token();
                let (tx, rx) = watch::channel(JobStatus::Running);
                st.jobs.lock().unwrap().insert(
                    job_id.clone(),
                    Job {
                        session: id.to_string(),
                        status: rx.clone(),
                    },
                );
                s.running_job = Some(job_id.clone());
                let (a, version, budget, h2, jid) = (s.effective(), s.version, st.config.budget, h.clone(), job_id.clone());
                tokio::spawn(async move {
                    let result = tokio::task::spawn_blocking(move || enumerate_worlds(&a, &budget)).await;
                    let mut s = h2.write().await;
                    if s.running_job.as_deref() == Some(jid.as_str()) {
                        s.running_job = None;
                    }
                    let status = match result {
                        Ok(Ok(e)) => {
                            if s.version == version {
                                s.install_worlds(e);
                            }
                            JobStatus::Done
                        }
                        Ok(Err(e)) => {
                            let api: ApiError = e.into();
                            JobStatus::Failed {
                                error: api.code().to_string(),
                                message: api.to_string(),
                            }
                        }
                        Err(e) => JobStatus::Failed {
                            error: "storage".into(),
                            message: format!("worker failed: {e}"),
                        },
                    };
                    let _ = tx.send(status);
                });
                (rx, job_id)
            }
        }
    };
    if st.config.job_wait.is_zero() {
        return Err(ApiError::Pending { job: job_id });
    }
    let finished = tokio::time::timeout(st.config.job_wait, async {
        rx.wait_for(|s| *s != JobStatus::Running).await.map(|s| s.clone())
    })
    .await;
    let Ok(Ok(status)) = finished else {
        return Err(ApiError::Pending { job: job_id });
    };
    match status {
        JobStatus::Failed { error, message } => Err(ApiError::from_code(&error, message)),
        _ if h.read().await.worlds.is_some() => Ok(()),
        _ => Err(ApiError::Pending { job: job_id }),
    }
}

async fn job(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let jobs = st.jobs.lock().unwrap();
    let job = jobs.get(&id).ok_or_else(|| ApiError::UnknownJob(id.clone()))?;
    let mut body = serde_json::to_value(&*job.status.borrow()).unwrap_or(Value::Null);
    body["id"] = json!(id);
    body["session"] = json!(job.session);
    Ok(Json(body))
}

/// Loads worlds and requires at least one, complete.
async fn with_worlds<T: Send>(
    st: &Arc<AppState>,
    id: &str,
    f: impl FnOnce(&mut SessionState) -> Result<T, ApiError> + Send,
) -> Result<T, ApiError> {
    let h = st.session(id).await?;
    ensure_worlds(st, id, &h).await?;
    let mut s = h.write().await;
    let e = s
        .worlds
        .clone()
        .ok_or_else(|| ApiError::Unprocessable("worlds were invalidated; retry".into()))?;
    if e.worlds.is_empty() {
        return Err(ApiError::Unprocessable("the alignment is inconsistent".into()));
    }
    if e.truncated {
        return Err(ApiError::BudgetExceeded(format!(
            "more than {} possible worlds",
            st.config.budget.max_worlds
        )));
    }
    f(&mut s)
}

#[derive(Deserialize)]
struct WorldsQuery {
    limit: Option<String>,
}

async fn worlds(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<WorldsQuery>,
) -> Result<Json<Value>, ApiError> {
    let limit = match q.limit {
        Some(l) => Some(
            l.parse::<usize>()
                .map_err(|_| ApiError::BadRequest(format!("invalid limit `{l}`")))?,
        ),
        None => None,
    };
    let h = st.session(&id).await?;
    ensure_worlds(&st, &id, &h).await?;
    let s = h.read().await;
    let e = s
        .worlds
        .clone()
        .ok_or_else(|| ApiError::Unprocessable("worlds were invalidated; retry".into()))?;
    if e.worlds.is_empty() {
        return Err(ApiError::Unprocessable("the alignment is inconsistent".into()));
    }
    let shown = limit.unwrap_or(e.worlds.len()).min(e.worlds.len());
    Ok(Json(json!({
        "total": e.worlds.len(),
        "truncated": e.truncated,
        "worlds": &e.worlds[..shown],
    })))
}

#[derive(Deserialize)]
struct MirQuery {
    format: Option<String>,
}

async fn mir_route(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<MirQuery>,
) -> Result<Response, ApiError> {
    let table = with_worlds(&st, &id, |s| Ok(mir(&s.worlds.as_ref().unwrap().worlds)?)).await?;
    match q.format.as_deref() {
        None | Some("json") => {
            let agreed = consensus(&table);
            Ok(Json(json!({ "table": table, "consensus": agreed })).into_response())
        }
        Some("csv") => Ok((
            [(header::CONTENT_TYPE, "text/csv; charset=utf-8")],
            taxoalign::analysis::mir_to_csv(&table),
        )
            .into_response()),
        Some(other) => Err(ApiError::BadRequest(format!("unknown format `{other}`"))),
    }
}

#[derive(Serialize)]
struct QuestionResponse {
    total: usize,
    surviving: usize,
    surviving_ids: Vec<usize>,
    question: Option<Question>,
    answers: Vec<AnswerRecord>,
}

fn question_response(s: &SessionState) -> QuestionResponse {
    let r = s.reduction.as_ref().expect("reduction installed with worlds");
    QuestionResponse {
        total: r.worlds.len(),
        surviving: r.surviving.len(),
        surviving_ids: r.surviving_worlds().map(|w| w.id).collect(),
        question: r.next_question(),
        answers: s.record.answers.clone(),
    }
}

async fn question(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<QuestionResponse>, ApiError> {
    Ok(Json(with_worlds(&st, &id, |s| Ok(question_response(s))).await?))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MaskInput {
    Text(String),
    List(RelationMask),
}

#[derive(Deserialize)]
struct AnswerBody {
    left: String,
    right: String,
    mask: MaskInput,
}

fn concept(key: &str, side: Side) -> Result<ConceptRef, ApiError> {
    ConceptRef::parse_key(key)
        .filter(|c| c.side == side)
        .ok_or_else(|| ApiError::BadRequest(format!("`{key}` is not a taxonomy {} concept key", side.id())))
}

fn mask_of(input: MaskInput) -> Result<RelationMask, ApiError> {
    match input {
        MaskInput::Text(t) => t.parse().map_err(|e| ApiError::BadRequest(format!("{e}"))),
        MaskInput::List(m) => Ok(m),
    }
}

async fn answer(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<QuestionResponse>, ApiError> {
    let body: AnswerBody = parse_json(&body)?;
    let left = concept(&body.left, Side::First)?;
    let right = concept(&body.right, Side::Second)?;
    let mask = mask_of(body.mask)?;
    let st2 = st.clone();
    let resp = with_worlds(&st, &id, move |s| {
        let mut reduction = s.reduction.clone().expect("reduction installed with worlds");
        reduction.apply_answer(&left, &right, mask)?;
        if Some(&reduction) != s.reduction.as_ref() {
            let mut record = s.record.clone();
            let entry = AnswerRecord { left, right, mask };
            record.answers.push(entry.clone());
            record.history.push(HistoryEntry::Answer(entry));
            st2.persist(&record)?;
            s.record = record;
            s.reduction = Some(reduction);
        }
        Ok(question_response(s))
    })
    .await?;
    Ok(Json(resp))
}

async fn reset_answers(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let h = st.session(&id).await?;
    let mut s = h.write().await;
    if !s.record.answers.is_empty() {
        let mut record = s.record.clone();
        record.answers.clear();
        record.history.push(HistoryEntry::ResetAnswers);
        st.persist(&record)?;
        s.record = record;
        if let Some(r) = s.reduction.as_mut() {
            r.reset_answers();
        }
    }
    Ok(Json(summary_json(&s)))
}

async fn rcg(
    State(st): State<Arc<AppState>>,
    Path((id, world)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let world: usize = world
        .parse()
        .map_err(|_| ApiError::BadRequest(format!("invalid world id `{world}`")))?;
    let dot = with_worlds(&st, &id, |s| {
        let w = s
            .worlds
            .as_ref()
            .unwrap()
            .worlds
            .get(world)
            .ok_or(ApiError::UnknownWorld(world))?;
        Ok(rcg_to_dot(&build_rcg(w, &s.effective())?))
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz; charset=utf-8")], dot).into_response())
}

async fn cluster(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let c = with_worlds(&st, &id, |s| Ok(cluster_worlds(&s.worlds.as_ref().unwrap().worlds)?)).await?;
    Ok(Json(json!(c)))
}

#[derive(Deserialize)]
struct ProvenanceQuery {
    left: Option<String>,
    right: Option<String>,
    mask: Option<String>,
}

async fn provenance(
    State(st): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<ProvenanceQuery>,
) -> Result<Json<Value>, ApiError> {
    let missing = |name: &str| ApiError::BadRequest(format!("missing query parameter `{name}`"));
    let left = concept(&q.left.ok_or_else(|| missing("left"))?, Side::First)?;
    let right = concept(&q.right.ok_or_else(|| missing("right"))?, Side::Second)?;
    let mask = mask_of(MaskInput::Text(q.mask.ok_or_else(|| missing("mask"))?))?;
    let h = st.session(&id).await?;
    let a = h.read().await.effective();
    let budget = st.config.budget;
    let (l, r) = (left.clone(), right.clone());
    let support = blocking(move || mir_provenance(&a, &l, &r, mask, &budget)).await??;
    Ok(Json(json!({
        "left": left,
        "right": right,
        "mask": mask,
        "articulations": support,
    })))
}
