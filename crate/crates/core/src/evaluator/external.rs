use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::protocol::{Message, PROTOCOL_VERSION};
use super::transport::{ChildTransport, Transport};
use super::{analyze, EvalError, EvalRequest, Evaluator, ObjectiveVector, Source};
use crate::cost_model::{check_memory_mb, HardwareProfile};
use crate::search_space::{Genome, SearchSpaceConfig};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Per-request fields sent alongside the genome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub input: [u32; 4],
    /// Ask the evaluator to recompute normalization statistics first.
    pub calibrate: bool,
}

impl RequestMeta {
    pub fn for_config(config: &SearchSpaceConfig) -> Self {
        RequestMeta {
            input: [1, 3, config.input_size[0], config.input_size[1]],
            calibrate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExternalReply {
    pub id: u64,
    pub score: f64,
    pub latency_ms: Option<f64>,
    pub peak_mem_mb: Option<f64>,
}

/// A handshaken session with one evaluator. One request in flight at a time.
pub struct Connection {
    transport: Box<dyn Transport>,
    timeout: Duration,
    broken: Option<String>,
}

impl Connection {
    /// Exchanges hellos. Fails on a version mismatch or anything else first.
    pub fn open(transport: Box<dyn Transport>, timeout: Duration) -> Result<Self, EvalError> {
        let mut conn = Connection {
            transport,
            timeout,
            broken: None,
        };
        conn.transport.send_line(&Message::hello().to_line())?;
        match conn.next_message(0)? {
            Message::Hello { version } if version == PROTOCOL_VERSION => Ok(conn),
            Message::Hello { version } => Err(EvalError::Protocol(format!(
                "evaluator speaks version {version}, expected {PROTOCOL_VERSION}"
            ))),
            other => Err(EvalError::Protocol(format!(
                "expected hello, got {}",
                other.to_line()
            ))),
        }
    }

    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, EvalError> {
        Connection::open(Box::new(ChildTransport::spawn(command)?), timeout)
    }

    /// Waits for the next non-blank line, bounded by the connection timeout.
    fn next_message(&mut self, id: u64) -> Result<Message, EvalError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = self.transport.recv_line(left)?.ok_or(EvalError::Timeout {
                id,
                seconds: self.timeout.as_secs_f64(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            return Message::parse(&line)
                .map_err(|e| EvalError::Protocol(format!("malformed line {line:?}: {e}")));
        }
    }

    pub fn request(
        &mut self,
        id: u64,
        genome: &Genome,
        meta: &RequestMeta,
    ) -> Result<ExternalReply, EvalError> {
        if let Some(why) = &self.broken {
            return Err(EvalError::Crash(format!("connection unusable: {why}")));
        }
        let res = self.exchange(id, genome, meta);
        if let Err(e) = &res {
            // After a timeout or garbage the stream position is unknown.
            self.broken = Some(e.to_string());
        }
        res
    }

    fn exchange(
        &mut self,
        id: u64,
        genome: &Genome,
        meta: &RequestMeta,
    ) -> Result<ExternalReply, EvalError> {
        let msg = Message::Eval {
            id,
            genome: genome.clone(),
            input: meta.input,
            calibrate: meta.calibrate,
        };
        self.transport.send_line(&msg.to_line())?;
        match self.next_message(id)? {
            Message::Result {
                id: got,
                score,
                latency_ms,
                peak_mem_mb,
            } => {
                if got != id {
                    return Err(EvalError::Protocol(format!(
                        "response id {got} to request {id}"
                    )));
                }
                if !(score.is_finite() && (0.0..=100.0).contains(&score)) {
                    return Err(EvalError::Protocol(format!(
                        "score {score} outside [0, 100]"
                    )));
                }
                let bad = |v: Option<f64>| v.is_some_and(|x| !(x.is_finite() && x >= 0.0));
                if bad(latency_ms) || bad(peak_mem_mb) {
                    return Err(EvalError::Protocol(
                        "negative or non-finite measurement".into(),
                    ));
                }
                Ok(ExternalReply {
                    id,
                    score,
                    latency_ms,
                    peak_mem_mb,
                })
            }
            other => Err(EvalError::Protocol(format!(
                "expected result, got {}",
                other.to_line()
            ))),
        }
    }

    pub fn shutdown(&mut self) {
        let _ = self.transport.send_line(&Message::Shutdown.to_line());
    }
}

/// One external evaluation. Constraint checking and the analytic cost axes
/// happen locally; the evaluator supplies the score and may override
/// latency and memory with measurements.
pub fn evaluate_external(
    conn: &mut Connection,
    id: u64,
    genome: &Genome,
    meta: &RequestMeta,
    config: &SearchSpaceConfig,
    profile: &HardwareProfile,
) -> Result<ObjectiveVector, EvalError> {
    let mut summary = analyze(genome, config, profile)?;
    let reply = conn.request(id, genome, meta)?;
    if let Some(ms) = reply.latency_ms {
        summary.latency_ms = ms;
    }
    if let Some(mb) = reply.peak_mem_mb {
        summary.memory = check_memory_mb(mb, profile);
    }
    Ok(summary.objectives(reply.score, Source::External))
}

/// A pool of external evaluator processes.
pub struct ExternalEvaluator {
    config: SearchSpaceConfig,
    profile: HardwareProfile,
    pub meta: RequestMeta,
    workers: Vec<Mutex<Connection>>,
}

impl ExternalEvaluator {
    pub fn new(
        connections: Vec<Connection>,
        config: SearchSpaceConfig,
        profile: HardwareProfile,
    ) -> Self {
        assert!(!connections.is_empty(), "need at least one worker");
        ExternalEvaluator {
            meta: RequestMeta::for_config(&config),
            config,
            profile,
            workers: connections.into_iter().map(Mutex::new).collect(),
        }
    }

    /// Starts `workers` copies of `command` and handshakes with each.
    pub fn spawn(
        command: &str,
        workers: usize,
        timeout: Duration,
        config: SearchSpaceConfig,
        profile: HardwareProfile,
    ) -> Result<Self, EvalError> {
        let conns = (0..workers.max(1))
            .map(|_| Connection::spawn(command, timeout))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExternalEvaluator::new(conns, config, profile))
    }

    pub fn workers(&self) -> usize {
        self.workers.len()
    }

    fn run_on(&self, worker: usize, request: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
        let mut conn = self.workers[worker]
            .lock()
            .unwrap_or_else(|p| p.into_inner());
        evaluate_external(
            &mut conn,
            request.id,
            &request.genome,
            &self.meta,
            &self.config,
            &self.profile,
        )
    }
}

impl Evaluator for ExternalEvaluator {
    fn evaluate(&self, request: &EvalRequest) -> Result<ObjectiveVector, EvalError> {
        self.run_on(request.id as usize % self.workers.len(), request)
    }

    fn evaluate_batch(&self, requests: &[EvalRequest]) -> Vec<Result<ObjectiveVector, EvalError>> {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<ObjectiveVector, EvalError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        thread::scope(|s| {
            for w in 0..self.workers.len().min(requests.len()) {
                let (next, slots) = (&next, &slots);
                s.spawn(move || loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= requests.len() {
                        break;
                    }
                    let res = self.run_on(w, &requests[i]);
                    *slots[i].lock().unwrap() = Some(res);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every request is taken"))
            .collect()
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        for w in &self.workers {
            if let Ok(mut c) = w.lock() {
                c.shutdown();
            }
        }
    }
}

/// Evaluator-side loop: answers the handshake, then each eval with
/// `handler(id, genome, calibrate)`, until shutdown or hang-up.
pub fn serve<F>(transport: &mut dyn Transport, mut handler: F) -> Result<(), EvalError>
where
    F: FnMut(u64, &Genome, bool) -> ExternalReply,
{
    loop {
        let Some(line) = transport.recv_line(Duration::from_secs(3600))? else {
            continue;
        };
        if line.trim().is_empty() {
            continue;
        }
        match Message::parse(&line).map_err(|e| EvalError::Protocol(e.to_string()))? {
            Message::Hello { .. } => transport.send_line(&Message::hello().to_line())?,
            Message::Eval {
                id,
                genome,
                calibrate,
                ..
            } => {
                let r = handler(id, &genome, calibrate);
                let out = Message::Result {
                    id: r.id,
                    score: r.score,
                    latency_ms: r.latency_ms,
                    peak_mem_mb: r.peak_mem_mb,
                };
                transport.send_line(&out.to_line())?;
            }
            Message::Shutdown => return Ok(()),
            Message::Result { .. } => {
                return Err(EvalError::Protocol("evaluator received a result".into()))
            }
        }
    }
}
