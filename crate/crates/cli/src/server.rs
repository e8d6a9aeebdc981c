//! HTTP annotation service: `POST /annotate`, `POST /stats`, `GET /health`.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pivotud::{EvalSetting, PipelineModel, Upos};
use serde::Deserialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use crate::{annotate_text, render_stats, stats_input, OutputFormat, StatsOptions, StatsReport};

pub const BIND_ENV: &str = "PIVOTUD_BIND";
pub const MIN_REQUEST_BYTES: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub bind: String,
    pub max_request_bytes: usize,
    pub model_path: PathBuf,
    pub default_format: OutputFormat,
    /// Requests annotated at the same time.
    pub workers: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".to_owned(),
            max_request_bytes: 1 << 20,
            model_path: PathBuf::from("model.pivotud"),
            default_format: OutputFormat::Conllu,
            workers: std::thread::available_parallelism().map_or(4, |n| n.get()),
        }
    }
}

impl ServiceConfig {
    /// Reads `key = value` lines; `#` starts a comment. Keys: `bind`,
    /// `max_request_bytes`, `model`, `default_format`, `workers`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ServiceConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected 'key = value'", i + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| format!("config line {}: invalid {what} '{value}'", i + 1);
            match key {
                "bind" => cfg.bind = value.to_owned(),
                "max_request_bytes" => cfg.max_request_bytes = value.parse().map_err(|_| bad("max_request_bytes"))?,
                "model" => cfg.model_path = PathBuf::from(value),
                "default_format" => cfg.default_format = value.parse().map_err(|_| bad("default_format"))?,
                "workers" => cfg.workers = value.parse().map_err(|_| bad("workers"))?,
                other => return Err(format!("config line {}: unknown key '{other}'", i + 1)),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ServiceConfig::parse(&text)
    }

    /// The bind address may be overridden from the environment.
    pub fn apply_env(&mut self) {
        if let Ok(addr) = std::env::var(BIND_ENV) {
            if !addr.trim().is_empty() {
                self.bind = addr.trim().to_owned();
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_request_bytes < MIN_REQUEST_BYTES {
            return Err(format!(
                "max_request_bytes must be at least {MIN_REQUEST_BYTES}, got {}",
                self.max_request_bytes
            ));
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".to_owned());
        }
        self.bind
            .parse::<SocketAddr>()
            .map_err(|_| format!("bind address '{}' is not host:port", self.bind))?;
        Ok(())
    }
}

pub fn model_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Immutable state shared by all requests.
pub struct Service {
    model: PipelineModel,
    model_hash: String,
    default_format: OutputFormat,
    max_request_bytes: usize,
    limit: Semaphore,
}

impl Service {
    pub fn new(model: PipelineModel, model_hash: String, cfg: &ServiceConfig) -> Self {
        Service {
            model,
            model_hash,
            default_format: cfg.default_format,
            max_request_bytes: cfg.max_request_bytes,
            limit: Semaphore::new(cfg.workers.max(1)),
        }
    }

    /// Loads the configured model file; fails when it cannot be used.
    pub fn load(cfg: &ServiceConfig) -> Result<Self, String> {
        cfg.validate()?;
        let bytes = std::fs::read(&cfg.model_path).map_err(|e| format!("{}: {e}", cfg.model_path.display()))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| "model file is not UTF-8".to_owned())?;
        let model = PipelineModel::from_text(text).map_err(|e| e.to_string())?;
        if !model.is_trained() {
            return Err("model file holds an untrained model".to_owned());
        }
        Ok(Service::new(model, model_hash(&bytes), cfg))
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn content_type(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Conllu => "text/plain; charset=utf-8",
        OutputFormat::Tsv => "text/tab-separated-values; charset=utf-8",
        OutputFormat::Json => "application/json",
    }
}

#[derive(Deserialize)]
struct AnnotateRequest {
    text: Option<String>,
    format: Option<String>,
    setting: Option<String>,
}

#[derive(Deserialize)]
struct StatsRequest {
    text: Option<String>,
    report: Option<String>,
    upos_filter: Option<String>,
    top: Option<usize>,
    min_weight: Option<u64>,
}

fn client_error(e: &pivotud::Error) -> bool {
    matches!(e, pivotud::Error::Parse { .. } | pivotud::Error::Validation { .. } | pivotud::Error::InvalidInput(_))
}

async fn run_blocking<T, F>(svc: Arc<Service>, f: F) -> Response
where
    F: FnOnce(&Service) -> pivotud::Result<T> + Send + 'static,
    T: IntoResponse + Send + 'static,
{
    let Ok(_permit) = svc.limit.acquire().await else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "service is shutting down");
    };
    let worker = Arc::clone(&svc);
    match tokio::task::spawn_blocking(move || f(&worker)).await {
        Ok(Ok(body)) => body.into_response(),
        Ok(Err(e)) if client_error(&e) => error(StatusCode::BAD_REQUEST, e.to_string()),
        _ => error(StatusCode::INTERNAL_SERVER_ERROR, "annotation failed"),
    }
}

async fn annotate(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: AnnotateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON body: {e}")),
    };
    let text = req.text.unwrap_or_default();
    if text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text is empty");
    }
    let format = match req.format.as_deref().map(str::parse::<OutputFormat>) {
        None => svc.default_format,
        Some(Ok(f)) => f,
        Some(Err(e)) => return error(StatusCode::BAD_REQUEST, e),
    };
    let setting = match req.setting.as_deref().map(str::parse::<EvalSetting>) {
        None => EvalSetting::RawText,
        Some(Ok(s)) => s,
        Some(Err(e)) => return error(StatusCode::BAD_REQUEST, e.to_string()),
    };
    run_blocking(svc, move |s| {
        let out = annotate_text(&s.model, &text, setting, format)?;
        Ok(([(header::CONTENT_TYPE, content_type(format))], out))
    })
    .await
}

async fn stats(State(svc): State<Arc<Service>>, body: Bytes) -> Response {
    let req: StatsRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid JSON body: {e}")),
    };
    let report = match req.report.as_deref().map(str::parse::<StatsReport>) {
        None => return error(StatusCode::BAD_REQUEST, "report is required"),
        Some(Ok(StatsReport::Genres)) => return error(StatusCode::BAD_REQUEST, "report must be upos, top or cooc"),
        Some(Ok(r)) => r,
        Some(Err(e)) => return error(StatusCode::BAD_REQUEST, e),
    };
    let text = req.text.unwrap_or_default();
    if text.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "text is empty");
    }
    let mut opts = StatsOptions::default();
    if let Some(f) = req.upos_filter {
        match f.parse::<Upos>() {
            Ok(u) => opts.upos_filter = u,
            Err(_) => return error(StatusCode::BAD_REQUEST, format!("unknown UPOS tag '{f}'")),
        }
    }
    if let Some(n) = req.top {
        opts.top_n = n;
    }
    if let Some(w) = req.min_weight {
        opts.min_weight = w;
    }
    run_blocking(svc, move |s| {
        let doc = stats_input(&s.model, &text)?;
        let out = render_stats(&doc, report, &opts)?;
        Ok(([(header::CONTENT_TYPE, content_type(OutputFormat::Tsv))], out))
    })
    .await
}

async fn health(State(svc): State<Arc<Service>>) -> Response {
    Json(json!({ "status": "ok", "model": svc.model_hash })).into_response()
}

pub fn router(service: Arc<Service>) -> Router {
    let limit = service.max_request_bytes;
    Router::new()
        .route("/annotate", post(annotate))
        .route("/stats", post(stats))
        .route("/health", get(health))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(service)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<Service>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_config() {
        let cfg = ServiceConfig::parse("# service\nbind = 0.0.0.0:9000\nmax_request_bytes = 4096\nmodel = m.txt\ndefault_format = json\nworkers = 2\n").unwrap();
        assert_eq!(cfg.bind, "0.0.0.0:9000");
        assert_eq!(cfg.max_request_bytes, 4096);
        assert_eq!(cfg.model_path, PathBuf::from("m.txt"));
        assert_eq!(cfg.default_format, OutputFormat::Json);
        assert_eq!(cfg.workers, 2);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_config() {
        assert!(ServiceConfig::parse("colour = blue").is_err());
        assert!(ServiceConfig::parse("workers two").is_err());
        let cfg = ServiceConfig::parse("max_request_bytes = 100").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(
            model_hash(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
