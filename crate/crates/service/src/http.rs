//! HTTP server around [`SessionService`] and an HTTP [`Transport`] for the
//! remote generator.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use infillkit::infill::remote::{Transport, TransportError, WireResponse};
use infillkit::wire::MAX_BODY_BYTES;
use thiserror::Error;
use tiny_http::{Header, Method, Response, Server};

use crate::router::handle;
use crate::session::SessionService;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
}

/// A running server. Dropping it without [`HttpServer::shutdown`] leaves
/// the workers running.
pub struct HttpServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("static header is valid")
}

impl HttpServer {
    pub fn start(bind: &str, service: Arc<SessionService>) -> Result<Self, ServeError> {
        let server = Server::http(bind).map_err(|e| ServeError::Bind {
            addr: bind.to_string(),
            reason: e.to_string(),
        })?;
        let addr = server.server_addr().to_ip().ok_or_else(|| ServeError::Bind {
            addr: bind.to_string(),
            reason: "not an IP address".into(),
        })?;
        let server = Arc::new(server);
        let stop = Arc::new(AtomicBool::new(false));
        let workers = (0..service.config().workers.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let service = Arc::clone(&service);
                let stop = Arc::clone(&stop);
                std::thread::spawn(move || {
                    while !stop.load(Ordering::Relaxed) {
                        match server.recv_timeout(Duration::from_millis(100)) {
                            Ok(Some(request)) => serve_one(&service, request),
                            Ok(None) => {}
                            Err(_) => break,
                        }
                    }
                })
            })
            .collect();
        Ok(Self {
            addr,
            stop,
            workers,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::Relaxed);
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Block until the workers exit.
    pub fn wait(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

fn serve_one(service: &SessionService, mut request: tiny_http::Request) {
    let method = request.method().to_string();
    let path = request.url().to_string();
    let response = if *request.method() == Method::Options {
        WireResponse {
            status: 204,
            body: String::new(),
        }
    } else {
        let mut body = Vec::new();
        let read = request
            .as_reader()
            .take(MAX_BODY_BYTES as u64 + 1)
            .read_to_end(&mut body);
        match read {
            Ok(_) => handle(service, &method, &path, &body),
            Err(e) => WireResponse::error(&infillkit::wire::WireError::invalid(format!(
                "cannot read body: {e}"
            ))),
        }
    };
    let reply = Response::from_string(response.body)
        .with_status_code(response.status)
        .with_header(header("Content-Type", "application/json"))
        .with_header(header("Access-Control-Allow-Origin", "*"))
        .with_header(header("Access-Control-Allow-Methods", "GET, POST, OPTIONS"))
        .with_header(header("Access-Control-Allow-Headers", "Content-Type"));
    let _ = request.respond(reply);
}

/// Posts JSON to `{base}{path}` with a per-request deadline.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    base: String,
}

impl HttpTransport {
    pub fn new(base: &str) -> Self {
        Self {
            base: base.trim_end_matches('/').to_string(),
        }
    }
}

impl Transport for HttpTransport {
    fn post(
        &self,
        path: &str,
        body: &str,
        timeout: Duration,
    ) -> Result<WireResponse, TransportError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}{}", self.base, path);
        let mut response = agent
            .post(&url)
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_)
                | ureq::Error::ConnectionFailed
                | ureq::Error::HostNotFound
                | ureq::Error::Io(_) => TransportError::Timeout(format!("{url}: {e}")),
                other => TransportError::Io(format!("{url}: {other}")),
            })?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Io(format!("{url}: {e}")))?;
        Ok(WireResponse { status, body })
    }
}
