//! HTTP front for the mocks, so the wire path can be exercised end to end.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use tiny_http::{Header, Method, Request, Response, Server};

use crate::backends::media::StoreError;
use crate::backends::mock::{MockBackend, MockError};
use crate::backends::protocol::BackendKind;

/// Request bodies larger than this are refused.
pub const MAX_BODY_BYTES: u64 = 1 << 20;

pub struct MockServer {
    server: Arc<Server>,
    mock: Arc<MockBackend>,
}

/// Handle to a server running on background threads; dropping it stops the server.
pub struct RunningServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl MockServer {
    pub fn bind(addr: &str, mock: MockBackend) -> std::io::Result<Self> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        Ok(Self {
            server: Arc::new(server),
            mock: Arc::new(mock),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.server
            .server_addr()
            .to_ip()
            .expect("bound to an IP socket")
    }

    /// Serves on the calling thread until the process is terminated.
    pub fn serve_forever(self) {
        worker_loop(&self.server, &self.mock);
    }

    pub fn spawn(self, threads: usize) -> RunningServer {
        let addr = self.local_addr();
        let workers = (0..threads.max(1))
            .map(|_| {
                let server = Arc::clone(&self.server);
                let mock = Arc::clone(&self.mock);
                std::thread::spawn(move || worker_loop(&server, &mock))
            })
            .collect();
        RunningServer {
            server: self.server,
            addr,
            workers,
        }
    }
}

impl RunningServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

fn worker_loop(server: &Server, mock: &MockBackend) {
    while let Ok(mut request) = server.recv() {
        let (status, body) = answer(mock, &mut request);
        let _ = respond(request, status, body);
    }
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header")
}

fn error_body(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

fn respond(request: Request, status: u16, body: String) -> std::io::Result<()> {
    let resp = Response::from_string(body)
        .with_status_code(status)
        .with_header(json_header());
    request.respond(resp)
}

/// Maps one HTTP request to a status code and body. Malformed envelopes get a 400,
/// unresolvable media a 404; nothing is dropped silently.
fn answer(mock: &MockBackend, request: &mut Request) -> (u16, String) {
    let Some(kind) = BackendKind::from_path(request.url()) else {
        return (404, error_body(&format!("no endpoint at {}", request.url())));
    };
    if *request.method() != Method::Post {
        return (405, error_body("only POST is supported"));
    }
    if request.body_length().is_some_and(|n| n as u64 > MAX_BODY_BYTES) {
        return (413, error_body("body too large"));
    }
    let mut body = Vec::new();
    if let Err(e) = request
        .as_reader()
        .take(MAX_BODY_BYTES + 1)
        .read_to_end(&mut body)
    {
        return (400, error_body(&format!("could not read body: {e}")));
    }
    if body.len() as u64 > MAX_BODY_BYTES {
        return (413, error_body("body too large"));
    }
    match mock.handle_body(kind, &body) {
        Ok(resp) => (200, resp),
        Err(MockError::Store(StoreError::NotFound { .. })) => {
            (404, error_body("referenced media not found"))
        }
        Err(e) => (400, error_body(&e.to_string())),
    }
}
