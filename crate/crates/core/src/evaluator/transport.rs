use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::thread;
use std::time::Duration;

use super::EvalError;

/// A bidirectional line channel to one evaluator.
pub trait Transport: Send {
    fn send_line(&mut self, line: &str) -> Result<(), EvalError>;

    /// Next line without its terminator. `Ok(None)` means the timeout elapsed.
    fn recv_line(&mut self, timeout: Duration) -> Result<Option<String>, EvalError>;
}

/// Talks to a child process over its stdin/stdout. stderr is inherited.
pub struct ChildTransport {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl ChildTransport {
    /// Runs `command` through `sh -c`, in its own process group so that
    /// dropping the transport also stops anything the shell started.
    pub fn spawn(command: &str) -> Result<Self, EvalError> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(command);
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EvalError::Spawn(format!("{command}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(ChildTransport {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exit_note(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("evaluator exited ({status})"),
            _ => "evaluator closed its output".to_string(),
        }
    }
}

impl Transport for ChildTransport {
    fn send_line(&mut self, line: &str) -> Result<(), EvalError> {
        let Some(stdin) = self.stdin.as_mut() else {
            return Err(EvalError::Crash("stdin already closed".into()));
        };
        let res = stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush());
        res.map_err(|e| {
            let note = self.exit_note();
            EvalError::Crash(format!("{note}: write failed: {e}"))
        })
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<Option<String>, EvalError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(Some(line)),
            Ok(Err(e)) => Err(EvalError::Crash(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => {
                // Give the process a moment to be reaped so the status is reported.
                thread::sleep(Duration::from_millis(20));
                Err(EvalError::Crash(self.exit_note()))
            }
        }
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        drop(self.stdin.take());
        // Well-behaved evaluators exit on shutdown or EOF; do not wait on the rest.
        for _ in 0..50 {
            if let Ok(Some(_)) = self.child.try_wait() {
                break;
            }
            thread::sleep(Duration::from_millis(10));
        }
        #[cfg(unix)]
        // SAFETY: plain syscall; the group id is our child's pid.
        unsafe {
            libc::kill(-(self.child.id() as i32), libc::SIGKILL);
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// In-process transport end, built in pairs by [`duplex`].
pub struct ChannelTransport {
    tx: Option<Sender<String>>,
    rx: Receiver<String>,
}

impl ChannelTransport {
    /// Drop the sending half, as a crashed peer would.
    pub fn close(&mut self) {
        self.tx = None;
    }
}

/// Two connected ends: whatever one sends, the other receives.
pub fn duplex() -> (ChannelTransport, ChannelTransport) {
    let (a_tx, a_rx) = mpsc::channel();
    let (b_tx, b_rx) = mpsc::channel();
    (
        ChannelTransport {
            tx: Some(a_tx),
            rx: b_rx,
        },
        ChannelTransport {
            tx: Some(b_tx),
            rx: a_rx,
        },
    )
}

impl Transport for ChannelTransport {
    fn send_line(&mut self, line: &str) -> Result<(), EvalError> {
        let tx = self
            .tx
            .as_ref()
            .ok_or_else(|| EvalError::Crash("channel closed".into()))?;
        tx.send(line.to_string())
            .map_err(|_| EvalError::Crash("peer hung up".into()))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<Option<String>, EvalError> {
        match self.rx.recv_timeout(timeout) {
            Ok(line) => Ok(Some(line)),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(EvalError::Crash("peer hung up".into())),
        }
    }
}
