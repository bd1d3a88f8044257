//! Client for the external test-runner workers.
//!
//! A worker is a subprocess speaking line-delimited JSON. On startup it
//! writes one handshake line:
//!
//! ```text
//! {"protocol": "codequal-testrunner", "version": 1}
//! ```
//!
//! Then, for each request line on stdin
//!
//! ```text
//! {"id": "7", "solution_code": "...", "test_code": "...", "timeout_seconds": 10.0, "memory_limit_mb": 512}
//! ```
//!
//! it answers with exactly one line carrying the same `id` and either the
//! run outcome (`total_tests`, `passed`, `errored`, `timed_out`, `per_test`,
//! `duration_seconds`) or an `error` string.
//!
//! Stdout belongs to the protocol: a worker must keep output from the code
//! under test off it. Any line that does not parse is a protocol error and
//! the worker is replaced.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::reward::{ExecutorError, TestExecutor, TestReport};

pub const PROTOCOL_NAME: &str = "codequal-testrunner";
pub const PROTOCOL_VERSION: u64 = 1;

/// Command line of the worker, e.g. `python3 -m codequal_testrunner`.
pub const RUNNER_ENV: &str = "CODEQUAL_TESTRUNNER";
/// Maximum number of concurrent workers.
pub const POOL_SIZE_ENV: &str = "CODEQUAL_TESTRUNNER_POOL";

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("cannot start test runner `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("test runner handshake failed: {0}")]
    Handshake(String),
    #[error("test runner protocol violation: {0}")]
    Protocol(String),
    #[error("test runner exited unexpectedly")]
    WorkerExited,
    #[error("test runner gave no answer within {0:?}")]
    Unresponsive(Duration),
    #[error("all test runner workers are busy")]
    Busy,
    #[error("test runner rejected the request: {0}")]
    Remote(String),
    #[error("test runner i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, RunnerError::Busy)
    }
}

impl From<RunnerError> for ExecutorError {
    fn from(e: RunnerError) -> Self {
        ExecutorError { retryable: e.is_retryable(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunnerCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl RunnerCommand {
    /// Splits a command line on whitespace.
    pub fn parse(command_line: &str) -> Option<Self> {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Self { program, args: parts.collect() })
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(RUNNER_ENV).ok().as_deref().and_then(Self::parse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLimits {
    pub timeout_seconds: f64,
    pub memory_limit_mb: u32,
}

impl Default for RunLimits {
    fn default() -> Self {
        Self { timeout_seconds: 10.0, memory_limit_mb: 512 }
    }
}

#[derive(Debug, Clone)]
pub struct PoolOptions {
    pub size: usize,
    pub limits: RunLimits,
    /// How long a caller waits for a free worker before `Busy`.
    pub acquire_timeout: Duration,
    pub handshake_timeout: Duration,
    /// Slack on top of the run timeout before a silent worker is killed.
    pub response_grace: Duration,
}

impl Default for PoolOptions {
    fn default() -> Self {
        Self {
            size: 2,
            limits: RunLimits::default(),
            acquire_timeout: Duration::from_secs(30),
            handshake_timeout: Duration::from_secs(10),
            response_grace: Duration::from_secs(5),
        }
    }
}

impl PoolOptions {
    /// Defaults, with the pool size taken from the environment if set.
    pub fn from_env() -> Self {
        let size = std::env::var(POOL_SIZE_ENV).ok().and_then(|s| s.trim().parse().ok()).filter(|n| *n > 0);
        Self { size: size.unwrap_or(2), ..Self::default() }
    }
}

#[derive(Serialize)]
struct RunRequest<'a> {
    id: String,
    solution_code: &'a str,
    test_code: &'a str,
    timeout_seconds: f64,
    memory_limit_mb: u32,
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn spawn(command: &RunnerCommand, handshake_timeout: Duration) -> Result<Self, RunnerError> {
        let mut child = Command::new(&command.program)
            .args(&command.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| RunnerError::Spawn { program: command.program.clone(), source })?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut worker = Self { child, stdin, lines };
        let hello = worker.next_document(handshake_timeout).map_err(|e| RunnerError::Handshake(e.to_string()))?;
        let protocol = hello.get("protocol").and_then(Value::as_str);
        let version = hello.get("version").and_then(Value::as_u64);
        if protocol != Some(PROTOCOL_NAME) || version != Some(PROTOCOL_VERSION) {
            return Err(RunnerError::Handshake(format!("unexpected greeting {hello}")));
        }
        Ok(worker)
    }

    /// Next non-empty line, parsed as a JSON object.
    fn next_document(&mut self, timeout: Duration) -> Result<Value, RunnerError> {
        let deadline = Instant::now() + timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(remaining) {
                Ok(line) => line?,
                Err(RecvTimeoutError::Timeout) => return Err(RunnerError::Unresponsive(timeout)),
                Err(RecvTimeoutError::Disconnected) => return Err(RunnerError::WorkerExited),
            };
            if line.trim().is_empty() {
                continue;
            }
            let doc: Value = serde_json::from_str(&line).map_err(|e| RunnerError::Protocol(format!("{e}: {line}")))?;
            if !doc.is_object() {
                return Err(RunnerError::Protocol(format!("expected an object, got {line}")));
            }
            return Ok(doc);
        }
    }

    fn run(&mut self, request: &RunRequest<'_>, timeout: Duration) -> Result<TestReport, RunnerError> {
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        self.stdin.write_all(line.as_bytes()).map_err(|_| RunnerError::WorkerExited)?;
        self.stdin.flush().map_err(|_| RunnerError::WorkerExited)?;
        let doc = self.next_document(timeout)?;
        let id = doc.get("id").and_then(Value::as_str).unwrap_or("unknown");
        if id != request.id {
            return Err(RunnerError::Protocol(format!("response id `{id}` does not match request `{}`", request.id)));
        }
        if let Some(error) = doc.get("error") {
            return Err(RunnerError::Remote(error.as_str().map_or_else(|| error.to_string(), str::to_string)));
        }
        let report: TestReport = serde_json::from_value(doc).map_err(|e| RunnerError::Protocol(e.to_string()))?;
        if report.passed > report.total_tests {
            return Err(RunnerError::Protocol(format!(
                "passed ({}) exceeds total_tests ({})",
                report.passed, report.total_tests
            )));
        }
        Ok(report)
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

struct PoolState {
    idle: Vec<Worker>,
    live: usize,
}

/// A bounded set of lazily started workers, one request in flight each.
pub struct RunnerPool {
    command: RunnerCommand,
    options: PoolOptions,
    state: Mutex<PoolState>,
    freed: Condvar,
    next_id: AtomicU64,
}

impl RunnerPool {
    pub fn new(command: RunnerCommand, options: PoolOptions) -> Self {
        Self {
            command,
            options: PoolOptions { size: options.size.max(1), ..options },
            state: Mutex::new(PoolState { idle: Vec::new(), live: 0 }),
            freed: Condvar::new(),
            next_id: AtomicU64::new(1),
        }
    }

    /// A pool for the worker named in the environment, if any.
    pub fn from_env() -> Option<Self> {
        RunnerCommand::from_env().map(|c| Self::new(c, PoolOptions::from_env()))
    }

    pub fn options(&self) -> &PoolOptions {
        &self.options
    }

    /// Starts (or reuses) a worker to check that the runner is reachable.
    pub fn probe(&self) -> Result<(), RunnerError> {
        let worker = self.checkout()?;
        self.checkin(Some(worker));
        Ok(())
    }

    fn checkout(&self) -> Result<Worker, RunnerError> {
        let deadline = Instant::now() + self.options.acquire_timeout;
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        loop {
            if let Some(worker) = state.idle.pop() {
                return Ok(worker);
            }
            if state.live < self.options.size {
                state.live += 1;
                drop(state);
                return Worker::spawn(&self.command, self.options.handshake_timeout).inspect_err(|_| self.checkin(None));
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(RunnerError::Busy);
            }
            state = self.freed.wait_timeout(state, remaining).unwrap_or_else(|e| e.into_inner()).0;
        }
    }

    /// Returns a healthy worker, or retires a broken one (`None`).
    fn checkin(&self, worker: Option<Worker>) {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        match worker {
            Some(w) => state.idle.push(w),
            None => state.live -= 1,
        }
        drop(state);
        self.freed.notify_one();
    }

    pub fn run(&self, solution_code: &str, test_code: &str) -> Result<TestReport, RunnerError> {
        let mut worker = self.checkout()?;
        let limits = self.options.limits;
        let request = RunRequest {
            id: self.next_id.fetch_add(1, Ordering::Relaxed).to_string(),
            solution_code,
            test_code,
            timeout_seconds: limits.timeout_seconds,
            memory_limit_mb: limits.memory_limit_mb,
        };
        let wait = Duration::from_secs_f64(limits.timeout_seconds) + self.options.response_grace;
        let result = worker.run(&request, wait);
        // A worker that answered, even with an error, stays in service.
        let healthy = matches!(result, Ok(_) | Err(RunnerError::Remote(_)));
        self.checkin(healthy.then_some(worker));
        result
    }
}

impl TestExecutor for RunnerPool {
    fn run_tests(&self, solution_code: &str, test_code: &str) -> Result<TestReport, ExecutorError> {
        self.run(solution_code, test_code).map_err(ExecutorError::from)
    }
}
