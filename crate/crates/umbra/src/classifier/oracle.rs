//! Bridge to an external classifier process speaking line-delimited JSON
//! over stdio.
//!
//! Handshake: the child prints `{"classes": C}` on start. Each query is
//! `{"id": n, "png_b64": "..."}` and must be answered with
//! `{"id": n, "confidences": [c_0, ..., c_{C-1}]}` within 10 seconds. Any
//! deviation is a protocol error.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::Deserialize;

use super::{Classifier, ConfidenceVector, QueryCounter};
use crate::dataio::encode_png;
use crate::error::{Error, Result};
use crate::raster::RasterImage;

pub const QUERY_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Deserialize)]
struct Handshake {
    classes: usize,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    confidences: Vec<f64>,
}

struct Pipe {
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    next_id: u64,
}

/// A classifier served by a child process. Requests are serialized over the
/// single pipe; concurrent callers queue on the internal lock.
pub struct OracleClassifier {
    child: Mutex<Child>,
    pipe: Mutex<Pipe>,
    classes: usize,
    counter: QueryCounter,
}

impl OracleClassifier {
    /// Spawn `command` through the shell and perform the handshake.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| Error::Protocol("oracle stdin unavailable".into()))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| Error::Protocol("oracle stdout unavailable".into()))?;

        // a dedicated reader thread makes per-line timeouts possible
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let failed = line.is_err();
                if tx.send(line).is_err() || failed {
                    break;
                }
            }
        });

        let first = match lines.recv_timeout(QUERY_TIMEOUT) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Io(e)),
            Err(_) => return Err(Error::QueryTimeout(QUERY_TIMEOUT)),
        };
        let handshake: Handshake = serde_json::from_str(&first)
            .map_err(|e| Error::Protocol(format!("bad handshake {first:?}: {e}")))?;
        if handshake.classes == 0 {
            return Err(Error::Protocol("oracle reports zero classes".into()));
        }

        Ok(Self {
            child: Mutex::new(child),
            pipe: Mutex::new(Pipe { stdin, lines, next_id: 0 }),
            classes: handshake.classes,
            counter: QueryCounter::new(),
        })
    }
}

impl Classifier for OracleClassifier {
    fn classes(&self) -> usize {
        self.classes
    }

    fn predict(&self, image: &RasterImage) -> Result<ConfidenceVector> {
        self.counter.increment();
        let png = encode_png(image)?;
        let b64 = base64::engine::general_purpose::STANDARD.encode(&png);

        let mut pipe = self.pipe.lock().expect("oracle pipe poisoned");
        let id = pipe.next_id;
        pipe.next_id += 1;
        let request = format!("{{\"id\": {id}, \"png_b64\": \"{b64}\"}}\n");
        pipe.stdin.write_all(request.as_bytes())?;
        pipe.stdin.flush()?;

        let line = match pipe.lines.recv_timeout(QUERY_TIMEOUT) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::Io(e)),
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(Error::QueryTimeout(QUERY_TIMEOUT)),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(Error::Protocol("oracle closed its stdout".into()))
            }
        };
        drop(pipe);

        let response: Response = serde_json::from_str(&line)
            .map_err(|e| Error::Protocol(format!("bad response {line:?}: {e}")))?;
        if response.id != id {
            return Err(Error::Protocol(format!(
                "response id {} does not match request id {id}",
                response.id
            )));
        }
        if response.confidences.len() != self.classes {
            return Err(Error::Protocol(format!(
                "expected {} confidences, got {}",
                self.classes,
                response.confidences.len()
            )));
        }
        ConfidenceVector::new(response.confidences)
            .map_err(|e| Error::Protocol(format!("invalid confidences: {e}")))
    }

    fn queries(&self) -> u64 {
        self.counter.count()
    }
}

impl Drop for OracleClassifier {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
