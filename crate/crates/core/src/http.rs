//! Minimal JSON-over-HTTP plumbing shared by the backend adapters.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::backend::BackendError;

/// Default per-request timeout for backend calls.
const REQUEST_TIMEOUT_SECS: u64 = 120;

pub fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .timeout(std::time::Duration::from_secs(REQUEST_TIMEOUT_SECS))
        .build()
}

/// POST a JSON request body and decode a JSON response.
pub fn post_json<Req: Serialize, Resp: DeserializeOwned>(
    agent: &ureq::Agent,
    url: &str,
    request: &Req,
) -> Result<Resp, BackendError> {
    let response = agent
        .post(url)
        .send_json(request)
        .map_err(|e| BackendError::Http {
            url: url.to_string(),
            detail: e.to_string(),
        })?;
    response.into_json().map_err(|e| BackendError::Http {
        url: url.to_string(),
        detail: format!("bad response body: {e}"),
    })
}

#[cfg(test)]
pub(crate) mod testserver {
    //! A one-shot HTTP server for adapter tests: accepts connections, replies
    //! with a canned JSON body, and records request bodies.

    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    pub struct TestServer {
        pub url: String,
        pub requests: mpsc::Receiver<String>,
        handle: Option<std::thread::JoinHandle<()>>,
    }

    impl TestServer {
        /// Serve `count` requests, each answered with `body` as JSON.
        pub fn serve(body: &str, count: usize) -> TestServer {
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let url = format!("http://{}", listener.local_addr().unwrap());
            let body = body.to_string();
            let (tx, rx) = mpsc::channel();
            let handle = std::thread::spawn(move || {
                for _ in 0..count {
                    let (mut stream, _) = match listener.accept() {
                        Ok(s) => s,
                        Err(_) => return,
                    };
                    let mut reader = BufReader::new(stream.try_clone().unwrap());
                    let mut content_length = 0usize;
                    loop {
                        let mut line = String::new();
                        if reader.read_line(&mut line).is_err() || line.trim().is_empty() {
                            break;
                        }
                        let lower = line.to_ascii_lowercase();
                        if let Some(rest) = lower.strip_prefix("content-length:") {
                            content_length = rest.trim().parse().unwrap_or(0);
                        }
                    }
                    let mut payload = vec![0u8; content_length];
                    let _ = reader.read_exact(&mut payload);
                    let _ = tx.send(String::from_utf8_lossy(&payload).into_owned());
                    let response = format!(
                        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{}",
                        body.len(),
                        body
                    );
                    let _ = stream.write_all(response.as_bytes());
                }
            });
            TestServer {
                url,
                requests: rx,
                handle: Some(handle),
            }
        }
    }

    impl Drop for TestServer {
        fn drop(&mut self) {
            if let Some(h) = self.handle.take() {
                let _ = h.join();
            }
        }
    }
}
