use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use super::protocol::{self, RequestHeader};
use super::{Direction, ExposurePredictor, PredictorError};
use crate::color::{DisplayImage, ExposureValue};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Overrides the per-request timeout, in seconds.
pub const TIMEOUT_ENV: &str = "GASLIGHT_PREDICTOR_TIMEOUT";

/// Spawns `command` once per request and talks the length-prefixed protocol
/// over its standard streams.
#[derive(Debug, Clone)]
pub struct ExternalPredictor {
    command: Vec<String>,
    timeout: Duration,
}

impl ExternalPredictor {
    pub fn new(command: Vec<String>) -> Result<Self, PredictorError> {
        if command.is_empty() {
            return Err(PredictorError::Other("empty predictor command line".into()));
        }
        Ok(Self {
            command,
            timeout: DEFAULT_TIMEOUT,
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Reads the timeout from the environment when set.
    pub fn with_env_timeout(self) -> Self {
        match std::env::var(TIMEOUT_ENV).ok().and_then(|v| v.parse::<f64>().ok()) {
            Some(secs) if secs > 0.0 => self.with_timeout(Duration::from_secs_f64(secs)),
            _ => self,
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn run(&self, request: Vec<u8>, transfer: crate::color::Transfer) -> Result<DisplayImage, PredictorError> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PredictorError::Spawn {
                command: self.command.join(" "),
                source,
            })?;

        let mut stdin = child.stdin.take().expect("stdin is piped");
        let writer = thread::spawn(move || {
            // dropping stdin closes the pipe, which marks the end of the PNG body
            let r = stdin.write_all(&request);
            drop(stdin);
            r
        });

        let mut stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut buf = Vec::new();
            let r = stdout.read_to_end(&mut buf).map(|_| buf);
            let _ = tx.send(r);
        });

        let output = match rx.recv_timeout(self.timeout) {
            Ok(r) => r?,
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(PredictorError::Timeout(self.timeout));
            }
        };
        // a predictor may exit without draining stdin; that is not an error by itself
        let _ = writer.join();
        let status = child.wait()?;
        if !status.success() {
            return Err(PredictorError::ProcessFailed(status.to_string()));
        }
        protocol::read_response(&output[..], transfer)
    }
}

impl ExposurePredictor for ExternalPredictor {
    fn predict(
        &mut self,
        img: &DisplayImage,
        _current_ev: ExposureValue,
        direction: Direction,
        step: f64,
    ) -> Result<DisplayImage, PredictorError> {
        let header = RequestHeader {
            direction,
            step_ev: step,
        };
        let request = protocol::encode_request(&header, img)?;
        let out = self.run(request, img.transfer())?;
        if out.dims() != img.dims() {
            return Err(PredictorError::DimensionMismatch {
                expected: img.dims(),
                got: out.dims(),
            });
        }
        Ok(out)
    }
}
