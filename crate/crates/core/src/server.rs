//! Serves any [`LmBackend`] over the scoring wire protocol.
//!
//! Used as the reference server for a built-in model and as the mock server
//! in protocol tests.

use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Serialize;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::error::{RalmError, Result};
use crate::lm::remote::{ErrorBody, GenerateResponse};
use crate::lm::{GenerateRequest, LmBackend, LmScoreRequest};

/// A running server; dropping it stops the workers.
pub struct ServerHandle {
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
    url: String,
}

impl ServerHandle {
    pub fn url(&self) -> &str {
        &self.url
    }

    /// Blocks until every worker exits.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (e.g. `127.0.0.1:0`) and serves with `workers` threads.
pub fn serve<B>(backend: Arc<B>, addr: &str, workers: usize) -> Result<ServerHandle>
where
    B: LmBackend + ?Sized + 'static,
{
    let server = Server::http(addr).map_err(|e| RalmError::Backend(format!("bind {addr}: {e}")))?;
    let url = match server.server_addr() {
        tiny_http::ListenAddr::IP(a) => format!("http://{a}"),
        #[allow(unreachable_patterns)]
        _ => return Err(RalmError::Backend("unsupported listen address".into())),
    };
    let server = Arc::new(server);
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let backend = Arc::clone(&backend);
            std::thread::spawn(move || {
                while let Ok(req) = server.recv() {
                    handle(&*backend, req);
                }
            })
        })
        .collect();
    Ok(ServerHandle {
        server,
        workers,
        url,
    })
}

fn json_response<T: Serialize>(status: u16, body: &T) -> Response<std::io::Cursor<Vec<u8>>> {
    let bytes = serde_json::to_vec(body).unwrap_or_else(|_| b"{}".to_vec());
    Response::from_data(bytes)
        .with_status_code(status)
        .with_header(Header::from_bytes("Content-Type", "application/json").unwrap())
}

fn error_response(status: u16, message: String) -> Response<std::io::Cursor<Vec<u8>>> {
    json_response(status, &ErrorBody { error: message })
}

fn handle<B: LmBackend + ?Sized>(backend: &B, mut req: Request) {
    let mut body = String::new();
    let response = if req.as_reader().read_to_string(&mut body).is_err() {
        error_response(400, "request body is not valid UTF-8".into())
    } else {
        route(backend, req.method(), req.url(), &body)
    };
    let _ = req.respond(response);
}

fn route<B: LmBackend + ?Sized>(
    backend: &B,
    method: &Method,
    url: &str,
    body: &str,
) -> Response<std::io::Cursor<Vec<u8>>> {
    let path = url.split('?').next().unwrap_or(url);
    match (method, path) {
        (Method::Get, "/v1/health") => json_response(200, &serde_json::json!({ "ok": true })),
        (Method::Get, "/v1/info") => match backend.info() {
            Ok(info) => json_response(200, &info),
            Err(e) => error_response(500, e.to_string()),
        },
        (Method::Post, "/v1/score") => match serde_json::from_str::<LmScoreRequest>(body) {
            Err(e) => error_response(400, format!("malformed score request: {e}")),
            Ok(r) => match backend.score(&r) {
                Ok(result) => json_response(200, &result),
                Err(e) => backend_error(e),
            },
        },
        (Method::Post, "/v1/generate") => match serde_json::from_str::<GenerateRequest>(body) {
            Err(e) => error_response(400, format!("malformed generate request: {e}")),
            Ok(r) => match backend.generate(&r) {
                Ok(text) => json_response(200, &GenerateResponse { text }),
                Err(e) => backend_error(e),
            },
        },
        _ => error_response(404, format!("no route for {method} {path}")),
    }
}

fn backend_error(e: RalmError) -> Response<std::io::Cursor<Vec<u8>>> {
    let status = match e {
        RalmError::ContextOverflow { .. } | RalmError::InvalidArgument(_) => 400,
        _ => 500,
    };
    error_response(status, e.to_string())
}
