//! Classifier behind a child process speaking JSON lines over stdio.
//!
//! Request: `{"id":k,"width":w,"height":h,"pixels_b64":"..."}` where the
//! payload is the row-major `f32` little-endian pixel buffer in base64.
//! Response: `{"id":k,"probability":p}`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierKind};
use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubprocessRequest {
    pub id: u64,
    pub width: usize,
    pub height: usize,
    pub pixels_b64: String,
}

impl SubprocessRequest {
    pub fn encode(id: u64, x: &Image) -> Self {
        let bytes: Vec<u8> = x.pixels().iter().flat_map(|p| p.to_le_bytes()).collect();
        Self {
            id,
            width: x.width(),
            height: x.height(),
            pixels_b64: STANDARD.encode(bytes),
        }
    }

    pub fn decode_image(&self) -> Result<Image> {
        let bytes = STANDARD
            .decode(&self.pixels_b64)
            .map_err(|e| Error::InvalidImage(format!("bad base64 payload: {e}")))?;
        if bytes.len() != self.width * self.height * 4 {
            return Err(Error::LengthMismatch {
                expected: self.width * self.height * 4,
                actual: bytes.len(),
            });
        }
        let pixels = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Image::new(self.width, self.height, pixels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubprocessResponse {
    pub id: u64,
    pub probability: f64,
}

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

/// Runs one long-lived child and issues one request at a time.
pub struct SubprocessClassifier {
    program: String,
    args: Vec<String>,
    timeout: Duration,
    dims: Option<(usize, usize)>,
    channel: Mutex<Option<Channel>>,
}

impl SubprocessClassifier {
    pub fn spawn(program: impl Into<String>, args: &[String], timeout: Duration) -> Result<Self> {
        let c = Self {
            program: program.into(),
            args: args.to_vec(),
            timeout,
            dims: None,
            channel: Mutex::new(None),
        };
        *c.channel.lock().expect("fresh mutex") = Some(c.start()?);
        Ok(c)
    }

    pub fn with_input_dims(mut self, dims: (usize, usize)) -> Self {
        self.dims = Some(dims);
        self
    }

    fn start(&self) -> Result<Channel> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::SubprocessFailure(format!("cannot start {}: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Channel {
            child,
            stdin,
            lines: rx,
            next_id: 0,
        })
    }

    fn exchange(&self, ch: &mut Channel, x: &Image) -> Result<f64> {
        let id = ch.next_id;
        ch.next_id += 1;
        let mut line = serde_json::to_string(&SubprocessRequest::encode(id, x))?;
        line.push('\n');
        ch.stdin
            .write_all(line.as_bytes())
            .and_then(|_| ch.stdin.flush())
            .map_err(|e| Error::SubprocessFailure(format!("write failed: {e}")))?;
        let reply = match ch.lines.recv_timeout(self.timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => return Err(Error::SubprocessFailure(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::SubprocessFailure(format!(
                    "no response within {:?}",
                    self.timeout
                )))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = ch
                    .child
                    .wait()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|e| e.to_string());
                return Err(Error::SubprocessFailure(format!("child exited: {status}")));
            }
        };
        let resp: SubprocessResponse = serde_json::from_str(reply.trim())
            .map_err(|e| Error::SubprocessFailure(format!("malformed response {reply:?}: {e}")))?;
        if resp.id != id {
            return Err(Error::SubprocessFailure(format!(
                "response id {} does not match request {id}",
                resp.id
            )));
        }
        if !(0.0..=1.0).contains(&resp.probability) {
            return Err(Error::SubprocessFailure(format!(
                "probability {} outside [0,1]",
                resp.probability
            )));
        }
        Ok(resp.probability)
    }
}

impl Classifier for SubprocessClassifier {
    fn probability(&self, x: &Image) -> Result<f64> {
        let mut guard = self
            .channel
            .lock()
            .map_err(|_| Error::SubprocessFailure("channel poisoned".into()))?;
        if guard.is_none() {
            *guard = Some(self.start()?);
        }
        let ch = guard.as_mut().expect("just started");
        let result = self.exchange(ch, x);
        if result.is_err() {
            // a failed child is not reused
            if let Some(mut dead) = guard.take() {
                let _ = dead.child.kill();
                let _ = dead.child.wait();
            }
        }
        result
    }

    fn input_dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    fn concurrency_safe(&self) -> bool {
        false
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Subprocess
    }

    fn describe(&self) -> String {
        format!("subprocess {} {}", self.program, self.args.join(" "))
    }
}

impl Drop for SubprocessClassifier {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.channel.lock() {
            if let Some(mut ch) = guard.take() {
                drop(ch.stdin);
                let _ = ch.child.kill();
                let _ = ch.child.wait();
            }
        }
    }
}

/// Serves `classifier` over stdin/stdout with the same protocol until EOF.
pub fn serve(
    classifier: &dyn Classifier,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<()> {
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let req: SubprocessRequest = serde_json::from_str(&line)?;
        let p = super::predict(classifier, &req.decode_image()?)?;
        let resp = serde_json::to_string(&SubprocessResponse {
            id: req.id,
            probability: p,
        })?;
        writeln!(output, "{resp}")
            .and_then(|_| output.flush())
            .map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}
