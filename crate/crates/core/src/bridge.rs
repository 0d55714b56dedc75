//! Payoff oracle backed by an external process speaking newline-delimited
//! JSON over stdin/stdout.
//!
//! Handshake: `{"hello": {"n", "family", "d"}}` answered by
//! `{"ready": true, "d"}`. Queries: `{"id", "coalition": [indices]}`
//! answered by `{"id", "params": {...}}` or `{"id", "error": msg}`, in any
//! order.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::{Family, PayoffOracle, PayoffParams};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    early: HashMap<u64, Value>,
}

impl Channel {
    fn send(&mut self, msg: &Value) -> Result<()> {
        let mut line = msg.to_string();
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::OracleFailure(format!("bridge write failed: {e}")))
    }

    fn recv(&mut self, deadline: Instant, timeout: Duration) -> Result<Value> {
        let left = deadline.saturating_duration_since(Instant::now());
        let line = match self.lines.recv_timeout(left) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(Error::OracleFailure(format!("bridge read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(Error::OracleFailure("bridge closed its output".into()))
            }
        };
        serde_json::from_str(&line).map_err(|e| Error::ProtocolViolation(format!("unparseable reply {line:?}: {e}")))
    }
}

/// A running bridge process. Requests are serialized through one pipe;
/// replies are matched by id.
pub struct BridgeOracle {
    n: usize,
    family: Family,
    timeout: Duration,
    channel: Mutex<Channel>,
}

impl BridgeOracle {
    /// Starts `command` and performs the handshake.
    pub fn spawn(command: &[String], n: usize, family: Family, timeout: Duration) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::BridgeStartFailure("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::BridgeStartFailure(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut channel = Channel {
            child,
            stdin,
            lines: rx,
            next_id: 0,
            early: HashMap::new(),
        };
        let d = match family {
            Family::Categorical { d } => Some(d),
            _ => None,
        };
        let hello = json!({"hello": {"n": n, "family": family.name(), "d": d}});
        let start = |e: Error| match e {
            Error::OracleFailure(msg) => Error::BridgeStartFailure(msg),
            other => other,
        };
        channel.send(&hello).map_err(start)?;
        let reply = channel.recv(Instant::now() + timeout, timeout).map_err(start)?;
        if reply.get("ready") != Some(&Value::Bool(true)) {
            return Err(Error::ProtocolViolation(format!("expected ready, got {reply}")));
        }
        if let Some(d) = d {
            let got = reply.get("d").and_then(Value::as_u64);
            if got != Some(d as u64) {
                return Err(Error::ProtocolViolation(format!("bridge reports d = {got:?}, expected {d}")));
            }
        }
        Ok(Self {
            n,
            family,
            timeout,
            channel: Mutex::new(channel),
        })
    }

    fn parse_params(&self, params: &Value) -> Result<PayoffParams> {
        let bad = || Error::ProtocolViolation(format!("bad params {params} for family {}", self.family));
        let num = |key: &str| params.get(key).and_then(Value::as_f64).ok_or_else(bad);
        match self.family {
            Family::Bernoulli => Ok(PayoffParams::Bernoulli { pi: num("pi")? }),
            Family::Gaussian => Ok(PayoffParams::Gaussian {
                mu: num("mu")?,
                sigma: num("sigma")?,
            }),
            Family::Categorical { d } => {
                let logits = params
                    .get("logits")
                    .and_then(Value::as_array)
                    .ok_or_else(bad)?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(bad))
                    .collect::<Result<Vec<f64>>>()?;
                if logits.len() != d {
                    return Err(Error::ProtocolViolation(format!(
                        "reply has {} logits, expected {d}",
                        logits.len()
                    )));
                }
                Ok(PayoffParams::Categorical { logits })
            }
        }
    }

    fn interpret(&self, reply: Value) -> Result<PayoffParams> {
        if let Some(msg) = reply.get("error") {
            let msg = msg.as_str().map_or_else(|| msg.to_string(), str::to_string);
            return Err(Error::OracleFailure(msg));
        }
        let params = reply
            .get("params")
            .ok_or_else(|| Error::ProtocolViolation(format!("reply without params: {reply}")))?;
        self.parse_params(params)
    }

    /// Sends all queries before reading any reply.
    pub fn payoff_batch(&self, coalitions: &[Coalition]) -> Result<Vec<PayoffParams>> {
        let mut ch = self.channel.lock().map_err(|_| Error::OracleFailure("bridge state poisoned".into()))?;
        let first = ch.next_id;
        ch.next_id += coalitions.len() as u64;
        for (k, c) in coalitions.iter().enumerate() {
            if c.n_players() != self.n {
                return Err(Error::PlayerCountMismatch {
                    expected: self.n,
                    got: c.n_players(),
                });
            }
            ch.send(&json!({"id": first + k as u64, "coalition": c.members()}))?;
        }
        let deadline = Instant::now() + self.timeout;
        let mut replies: Vec<Option<Value>> = vec![None; coalitions.len()];
        let mut missing = coalitions.len();
        for (k, slot) in replies.iter_mut().enumerate() {
            if let Some(v) = ch.early.remove(&(first + k as u64)) {
                *slot = Some(v);
                missing -= 1;
            }
        }
        while missing > 0 {
            let reply = ch.recv(deadline, self.timeout)?;
            let id = reply
                .get("id")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::ProtocolViolation(format!("reply without id: {reply}")))?;
            if id >= first && id < first + coalitions.len() as u64 {
                let slot = &mut replies[(id - first) as usize];
                if slot.is_some() {
                    return Err(Error::ProtocolViolation(format!("duplicate reply for id {id}")));
                }
                *slot = Some(reply);
                missing -= 1;
            } else if id < ch.next_id {
                ch.early.insert(id, reply);
            } else {
                return Err(Error::ProtocolViolation(format!("reply for unknown id {id}")));
            }
        }
        drop(ch);
        replies.into_iter().map(|r| self.interpret(r.expect("filled"))).collect()
    }
}

impl PayoffOracle for BridgeOracle {
    fn n_players(&self) -> usize {
        self.n
    }

    fn family(&self) -> Family {
        self.family
    }

    fn payoff(&self, coalition: &Coalition) -> Result<PayoffParams> {
        Ok(self.payoff_batch(std::slice::from_ref(coalition))?.remove(0))
    }
}

impl Drop for BridgeOracle {
    fn drop(&mut self) {
        if let Ok(ch) = self.channel.get_mut() {
            let _ = ch.child.kill();
            let _ = ch.child.wait();
        }
    }
}
