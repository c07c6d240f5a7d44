use std::sync::Arc;

use axum::body::{to_bytes, Bytes};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, Multipart, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::Json;
use corand::dataset::{ColumnGroup, NaPolicy, ScalingState};
use corand::selection::DEFAULT_TAU;
use corand::session::{LabeledTile, PcpPayload};
use corand::{
    load_csv, suggest_attributes, AttributeSuggestion, ConstantColumnPolicy, HypothesisSpec, LoadOptions, SeededRng,
    Session, SessionSnapshot, ViewResult, Which,
};
use parking_lot::RwLock;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::AppState;

/// Stream label for view downsampling, independent of permutation draws.
const DOWNSAMPLE_DOMAIN: u64 = 0x646f_776e;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(e.status(), "request.invalid_body", e.body_text()))
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v)
        .map_err(|e| ApiError::bad_request("request.invalid_query", e.body_text()))
}

fn check_version(session: &Session, expected: Option<u64>) -> ApiResult<()> {
    match expected {
        Some(v) if v != session.version() => Err(ApiError::stale(session.version(), v)),
        _ => Ok(()),
    }
}

/// Runs CPU-heavy session work off the async workers.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

// ------------------------------------------------------------------ datasets

/// Load options, given as query parameters or multipart text fields.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct UploadOptions {
    pub delimiter: Option<String>,
    pub header: Option<bool>,
    /// `drop` (default) or `error`.
    pub na: Option<String>,
    /// Comma-separated columns to keep.
    pub columns: Option<String>,
    /// Comma-separated columns to treat as categorical.
    pub categorical: Option<String>,
    /// `zscore` (default) or `none`.
    pub scale: Option<String>,
}

impl UploadOptions {
    fn set(&mut self, name: &str, value: String) -> ApiResult<()> {
        match name {
            "delimiter" => self.delimiter = Some(value),
            "header" => {
                self.header = Some(value.parse().map_err(|_| {
                    ApiError::bad_request("request.invalid_option", format!("header must be true or false, got {value}"))
                })?)
            }
            "na" => self.na = Some(value),
            "columns" => self.columns = Some(value),
            "categorical" => self.categorical = Some(value),
            "scale" => self.scale = Some(value),
            other => return Err(ApiError::bad_request("request.invalid_option", format!("unknown option {other}"))),
        }
        Ok(())
    }

    fn load_options(&self) -> ApiResult<LoadOptions> {
        let invalid = |m: String| ApiError::bad_request("request.invalid_option", m);
        let mut o = LoadOptions::default();
        if let Some(d) = &self.delimiter {
            let d = if d == "\\t" || d == "tab" { "\t" } else { d.as_str() };
            match d.as_bytes() {
                [b] => o.delimiter = *b,
                _ => return Err(invalid(format!("delimiter must be one byte, got {d:?}"))),
            }
        }
        if let Some(h) = self.header {
            o.has_header = h;
        }
        match self.na.as_deref() {
            None | Some("drop") => o.na_policy = NaPolicy::DropRow,
            Some("error") => o.na_policy = NaPolicy::Error,
            Some(other) => return Err(invalid(format!("na must be drop or error, got {other}"))),
        }
        let list = |s: &str| s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect::<Vec<_>>();
        o.columns = self.columns.as_deref().map(list);
        o.categorical = self.categorical.as_deref().map(list).unwrap_or_default();
        Ok(o)
    }

    fn zscore(&self) -> ApiResult<bool> {
        match self.scale.as_deref() {
            None | Some("zscore") => Ok(true),
            Some("none") => Ok(false),
            Some(other) => Err(ApiError::bad_request(
                "request.invalid_option",
                format!("scale must be zscore or none, got {other}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub n: usize,
    pub m: usize,
    pub column_names: Vec<String>,
    pub column_groups: Vec<ColumnGroup>,
    pub scaling: ScalingState,
}

async fn read_multipart(req: Request, state: &AppState, options: &mut UploadOptions) -> ApiResult<Bytes> {
    let limit = state.config.max_upload_bytes;
    let mut multipart = Multipart::from_request(req, state)
        .await
        .map_err(|e| ApiError::bad_request("request.invalid_multipart", e.body_text()))?;
    let mut file = None;
    loop {
        let field = match multipart.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) if e.status() == StatusCode::PAYLOAD_TOO_LARGE => return Err(ApiError::too_large(limit)),
            Err(e) => return Err(ApiError::bad_request("request.invalid_multipart", e.body_text())),
        };
        let name = field.name().unwrap_or_default().to_string();
        let is_file = field.file_name().is_some() || name == "file";
        let bytes = field.bytes().await.map_err(|e| {
            if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
                ApiError::too_large(limit)
            } else {
                ApiError::bad_request("request.invalid_multipart", e.body_text())
            }
        })?;
        if is_file {
            file = Some(bytes);
        } else {
            options.set(&name, String::from_utf8_lossy(&bytes).into_owned())?;
        }
    }
    file.ok_or_else(|| ApiError::bad_request("request.missing_file", "multipart upload needs a file field"))
}

/// `POST /datasets` — CSV as the raw body or as a multipart file field.
pub async fn upload_dataset(
    State(state): State<AppState>,
    opts: Result<Query<UploadOptions>, QueryRejection>,
    req: Request,
) -> ApiResult<(StatusCode, Json<DatasetInfo>)> {
    let mut options = query(opts)?;
    let limit = state.config.max_upload_bytes;
    let is_multipart = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let bytes = if is_multipart {
        read_multipart(req, &state, &mut options).await?
    } else {
        to_bytes(req.into_body(), limit).await.map_err(|_| ApiError::too_large(limit))?
    };
    let load = options.load_options()?;
    let zscore = options.zscore()?;
    let dataset = blocking(move || {
        let mut d = load_csv(bytes.as_ref(), &load)?;
        if zscore {
            d = d.zscore(ConstantColumnPolicy::Error)?;
        }
        Ok(d.onehot_encode()?)
    })
    .await?;
    let info = DatasetInfo {
        id: String::new(),
        n: dataset.n_rows(),
        m: dataset.n_cols(),
        column_names: dataset.column_names().to_vec(),
        column_groups: dataset.column_groups().to_vec(),
        scaling: dataset.scaling_state(),
    };
    let id = state.insert_dataset(dataset);
    tracing::info!(dataset = %id, n = info.n, m = info.m, "dataset uploaded");
    Ok((StatusCode::CREATED, Json(DatasetInfo { id, ..info })))
}

// ------------------------------------------------------------------ sessions

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub dataset_id: String,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    #[serde(flatten)]
    pub snapshot: SessionSnapshot,
    pub n: usize,
    pub m: usize,
}

fn session_info(s: &Session) -> SessionInfo {
    SessionInfo {
        snapshot: s.snapshot(),
        n: s.dataset().n_rows(),
        m: s.dataset().n_cols(),
    }
}

/// `POST /sessions`
pub async fn create_session(
    State(state): State<AppState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<SessionInfo>)> {
    let req = body(payload)?;
    let dataset = state.dataset(&req.dataset_id)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::create(id.clone(), req.dataset_id, dataset, req.seed)?;
    let info = session_info(&session);
    state.persist(&session);
    state.store.sessions.write().insert(id, Arc::new(RwLock::new(session)));
    Ok((StatusCode::CREATED, Json(info)))
}

/// `GET /sessions/{id}`
pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionInfo>> {
    let session = state.session(&id)?;
    let info = session_info(&session.read());
    Ok(Json(info))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPayload {
    pub version: u64,
    #[serde(flatten)]
    pub view: ViewResult,
    /// Row index of each coordinate when the view is downsampled.
    pub rows: Option<Vec<usize>>,
}

/// Seeded uniform subset of rows shown when the data exceed `max_points`.
fn shown_rows(n: usize, max_points: usize, seed: u64) -> Option<Vec<usize>> {
    if n <= max_points {
        return None;
    }
    let mut rng = SeededRng::new(seed).substream(0, DOWNSAMPLE_DOMAIN, 0);
    let mut rows = sample(&mut rng, n, max_points).into_vec();
    rows.sort_unstable();
    Some(rows)
}

fn pick(coords: Vec<[f64; 2]>, rows: &Option<Vec<usize>>) -> Vec<[f64; 2]> {
    match rows {
        None => coords,
        Some(rows) => rows.iter().map(|&i| coords[i]).collect(),
    }
}

/// `GET /sessions/{id}/view`
pub async fn get_view(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ViewPayload>> {
    let session = state.session(&id)?;
    let max_points = state.config.max_points;
    let payload = blocking(move || {
        let mut s = session.write();
        let mut view = s.compute_view()?.clone();
        let rows = shown_rows(s.dataset().n_rows(), max_points, s.seed());
        view.coords = pick(view.coords, &rows);
        Ok(ViewPayload {
            version: s.version(),
            view,
            rows,
        })
    })
    .await?;
    Ok(Json(payload))
}

#[derive(Debug, Deserialize)]
pub struct HypothesisRequest {
    /// Rows of the focus; all rows when absent.
    pub rows: Option<Vec<usize>>,
    /// Column blocks; every column on its own when absent.
    pub partition: Option<Vec<Vec<usize>>>,
    pub version: Option<u64>,
}

/// `PUT /sessions/{id}/hypothesis`
pub async fn put_hypothesis(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<HypothesisRequest>, JsonRejection>,
) -> ApiResult<Json<Value>> {
    let req = body(payload)?;
    let session = state.session(&id)?;
    let mut s = session.write();
    check_version(&s, req.version)?;
    let (n, m) = (s.dataset().n_rows(), s.dataset().n_cols());
    let rows = req.rows.unwrap_or_else(|| (0..n).collect());
    let partition = req.partition.unwrap_or_else(|| (0..m).map(|j| vec![j]).collect());
    let version = s.set_hypothesis(HypothesisSpec::new(rows, partition)?)?;
    state.persist(&s);
    Ok(Json(json!({ "version": version })))
}

#[derive(Debug, Deserialize)]
pub struct SuggestRequest {
    pub rows: Vec<usize>,
    pub tau: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SuggestResponse {
    pub version: u64,
    #[serde(flatten)]
    pub suggestion: AttributeSuggestion,
}

/// `POST /sessions/{id}/suggest`
pub async fn suggest(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<SuggestRequest>, JsonRejection>,
) -> ApiResult<Json<SuggestResponse>> {
    let req = body(payload)?;
    let session = state.session(&id)?;
    let s = session.read();
    let suggestion = suggest_attributes(s.dataset(), &req.rows, req.tau.unwrap_or(DEFAULT_TAU))?;
    Ok(Json(SuggestResponse {
        version: s.version(),
        suggestion,
    }))
}

#[derive(Debug, Deserialize)]
pub struct TileRequest {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    #[serde(default)]
    pub label: String,
    pub version: Option<u64>,
}

/// `POST /sessions/{id}/tiles`
pub async fn post_tile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    payload: Result<Json<TileRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let req = body(payload)?;
    let session = state.session(&id)?;
    let mut s = session.write();
    check_version(&s, req.version)?;
    let version = s.commit_tile(req.rows, req.cols, req.label)?;
    state.persist(&s);
    let tiles = s.user_tiles().len();
    Ok((StatusCode::CREATED, Json(json!({ "version": version, "tiles": tiles }))))
}

#[derive(Debug, Default, Deserialize)]
pub struct VersionQuery {
    pub version: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RollbackResponse {
    pub version: u64,
    pub removed: LabeledTile,
}

/// `DELETE /sessions/{id}/tiles/last`
pub async fn delete_last_tile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<VersionQuery>, QueryRejection>,
) -> ApiResult<Json<RollbackResponse>> {
    let q = query(q)?;
    let session = state.session(&id)?;
    let mut s = session.write();
    check_version(&s, q.version)?;
    let (removed, version) = s.rollback_last_tile()?;
    state.persist(&s);
    Ok(Json(RollbackResponse { version, removed }))
}

#[derive(Debug, Deserialize)]
pub struct PcpQuery {
    /// Comma-separated row indices or inclusive ranges, e.g. `0,4,10-19`.
    pub rows: String,
    pub tau: Option<f64>,
}

fn parse_rows(spec: &str) -> ApiResult<Vec<usize>> {
    let bad = |part: &str| ApiError::bad_request("request.invalid_rows", format!("cannot parse row spec {part:?}"));
    let mut rows = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad(part))?, b.parse().map_err(|_| bad(part))?);
                if a > b {
                    return Err(bad(part));
                }
                rows.extend(a..=b);
            }
            None => rows.push(part.parse().map_err(|_| bad(part))?),
        }
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct PcpResponse {
    pub version: u64,
    #[serde(flatten)]
    pub payload: PcpPayload,
}

/// `GET /sessions/{id}/pcp?rows=…&tau=…`
pub async fn get_pcp(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<PcpQuery>, QueryRejection>,
) -> ApiResult<Json<PcpResponse>> {
    let q = query(q)?;
    let rows = parse_rows(&q.rows)?;
    let session = state.session(&id)?;
    let s = session.read();
    let payload = s.pcp_payload(&rows, q.tau.unwrap_or(DEFAULT_TAU))?;
    Ok(Json(PcpResponse {
        version: s.version(),
        payload,
    }))
}

#[derive(Debug, Deserialize)]
pub struct SampleQuery {
    pub which: u8,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct SampleResponse {
    pub version: u64,
    pub which: u8,
    pub seed: u64,
    pub coords: Vec<[f64; 2]>,
    pub rows: Option<Vec<usize>>,
}

/// `GET /sessions/{id}/sample?which=1|2&seed=…`
pub async fn get_sample(
    State(state): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<SampleQuery>, QueryRejection>,
) -> ApiResult<Json<SampleResponse>> {
    let q = query(q)?;
    let which = Which::try_from(q.which)?;
    let session = state.session(&id)?;
    let max_points = state.config.max_points;
    let response = blocking(move || {
        let s = session.read();
        let rows = shown_rows(s.dataset().n_rows(), max_points, s.seed());
        let coords = pick(s.sample_view(which, q.seed)?, &rows);
        Ok(SampleResponse {
            version: s.version(),
            which: q.which,
            seed: q.seed,
            coords,
            rows,
        })
    })
    .await?;
    Ok(Json(response))
}
