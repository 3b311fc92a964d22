//! In-memory message bus for simulating party and server actors.
//!
//! Channels are FIFO per `(from, to)` pair. Every delivered payload is
//! recorded in a trace that keeps only metadata and a checksum, never the
//! values themselves.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Matrix(Matrix),
    Vector(Vec<f64>),
    Share { eigvec: Vec<f64>, eigval: f64 },
    Empty,
}

impl Payload {
    pub fn shape(&self) -> Vec<usize> {
        match self {
            Payload::Matrix(m) => vec![m.rows(), m.cols()],
            Payload::Vector(v) => vec![v.len()],
            Payload::Share { eigvec, .. } => vec![eigvec.len()],
            Payload::Empty => vec![],
        }
    }

    pub fn checksum(&self) -> String {
        let bytes = match self {
            Payload::Matrix(m) => m.to_le_bytes(),
            Payload::Vector(v) => v.iter().flat_map(|x| x.to_le_bytes()).collect(),
            Payload::Share { eigvec, eigval } => {
                eigvec.iter().chain(std::iter::once(eigval)).flat_map(|x| x.to_le_bytes()).collect()
            }
            Payload::Empty => Vec::new(),
        };
        payload_checksum(&bytes)
    }
}

/// Hex-encoded SHA-256 prefix used in trace records.
pub fn payload_checksum(bytes: &[u8]) -> String {
    hex::encode(&Sha256::digest(bytes)[..16])
}

pub fn matrix_checksum(m: &Matrix) -> String {
    payload_checksum(&m.to_le_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub session: u64,
    pub from: String,
    pub to: String,
    pub kind: String,
    pub payload: Payload,
}

impl Message {
    pub fn new(session: u64, from: &str, to: &str, kind: &str, payload: Payload) -> Self {
        Message { session, from: from.to_owned(), to: to.to_owned(), kind: kind.to_owned(), payload }
    }
}

/// One line of the JSON-lines protocol trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    pub session: u64,
    pub protocol: String,
    pub from: String,
    pub to: String,
    pub kind: String,
    pub shape: Vec<usize>,
    pub checksum: String,
}

#[derive(Debug, Default)]
pub struct MessageBus {
    channels: BTreeMap<(String, String), VecDeque<Message>>,
    trace: Vec<TraceRecord>,
    sessions: BTreeMap<u64, String>,
    next_session: u64,
    seq: u64,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a new protocol execution and return its session id.
    pub fn open_session(&mut self, protocol: &str) -> u64 {
        let id = self.next_session;
        self.next_session += 1;
        self.sessions.insert(id, protocol.to_owned());
        id
    }

    pub fn send(&mut self, msg: Message) {
        let protocol = self.sessions.get(&msg.session).cloned().unwrap_or_default();
        self.trace.push(TraceRecord {
            seq: self.seq,
            session: msg.session,
            protocol,
            from: msg.from.clone(),
            to: msg.to.clone(),
            kind: msg.kind.clone(),
            shape: msg.payload.shape(),
            checksum: msg.payload.checksum(),
        });
        self.seq += 1;
        self.channels.entry((msg.from.clone(), msg.to.clone())).or_default().push_back(msg);
    }

    pub fn recv(&mut self, from: &str, to: &str) -> Option<Message> {
        self.channels.get_mut(&(from.to_owned(), to.to_owned())).and_then(VecDeque::pop_front)
    }

    pub fn pending(&self) -> usize {
        self.channels.values().map(VecDeque::len).sum()
    }

    fn ready_channels(&self) -> Vec<(String, String)> {
        self.channels.iter().filter(|(_, q)| !q.is_empty()).map(|(k, _)| k.clone()).collect()
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// Number of protocol executions that produced at least one message.
    pub fn executions(&self, protocol_prefix: &str) -> usize {
        let mut seen: Vec<u64> =
            self.trace.iter().filter(|r| r.protocol.starts_with(protocol_prefix)).map(|r| r.session).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn write_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        write_trace(path, &self.trace)
    }

    /// Append another bus's trace, renumbering its sessions and sequence
    /// numbers after this bus's own.
    pub fn absorb(&mut self, other: &MessageBus) {
        let mut remap = BTreeMap::new();
        for r in &other.trace {
            let session = *remap.entry(r.session).or_insert_with(|| self.open_session(&r.protocol));
            self.trace.push(TraceRecord { seq: self.seq, session, ..r.clone() });
            self.seq += 1;
        }
    }
}

pub fn write_trace(path: impl AsRef<Path>, records: &[TraceRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

/// A protocol participant. Actors are single-threaded and react only to
/// delivered messages.
pub trait Actor {
    fn id(&self) -> &str;

    fn start(&mut self, _out: &mut Vec<Message>) -> Result<()> {
        Ok(())
    }

    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Result<()>;
}

/// Delivery order across channels. FIFO within a channel always holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interleaving {
    /// Always deliver from the lexicographically first ready channel.
    Ordered,
    /// Pick the next ready channel with a seeded generator.
    Shuffled(u64),
}

/// Start every actor, then deliver messages until all channels are drained.
pub fn run_actors(bus: &mut MessageBus, actors: &mut [&mut dyn Actor], interleaving: Interleaving) -> Result<()> {
    let mut rng = match interleaving {
        Interleaving::Shuffled(seed) => Some(seeded_rng(seed)),
        Interleaving::Ordered => None,
    };
    let mut out = Vec::new();
    for a in actors.iter_mut() {
        a.start(&mut out)?;
        for m in out.drain(..) {
            bus.send(m);
        }
    }
    loop {
        let ready = bus.ready_channels();
        if ready.is_empty() {
            return Ok(());
        }
        let pick = match rng.as_mut() {
            Some(r) => r.random_range(0..ready.len()),
            None => 0,
        };
        let (from, to) = &ready[pick];
        let msg = bus.recv(from, to).expect("ready channel has a message");
        let actor = actors
            .iter_mut()
            .find(|a| a.id() == msg.to)
            .ok_or_else(|| Error::Protocol(format!("no actor named '{}'", msg.to)))?;
        actor.handle(msg, &mut out)?;
        for m in out.drain(..) {
            bus.send(m);
        }
    }
}
