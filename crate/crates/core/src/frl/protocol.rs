//! Actor implementations of the two FRL protocols.

use std::collections::BTreeMap;

use crate::bus::{Actor, Message, Payload};
use crate::error::{Error, Result};
use crate::numerics::{norm2, Matrix};

use super::fedsvd::{fedsvd_keygen, fedsvd_mask, fedsvd_recover, fedsvd_server, MaskPair};
use super::vfedpca::{align_share_signs, vfedpca_aggregate, vfedpca_local, vfedpca_reconstruct, EigenShare};

pub const SERVER: &str = "server";
pub const KEYGEN: &str = "keygen";

fn unexpected(actor: &str, msg: &Message) -> Error {
    Error::Protocol(format!("{actor} got unexpected '{}' from {}", msg.kind, msg.from))
}

// ---- FedSVD ----

pub(crate) struct KeyGen {
    pub session: u64,
    pub parties: Vec<(String, usize)>,
    pub overlap_size: usize,
    pub seed: u64,
    pub block_size: Option<usize>,
}

impl Actor for KeyGen {
    fn id(&self) -> &str {
        KEYGEN
    }

    fn start(&mut self, out: &mut Vec<Message>) -> Result<()> {
        let sizes: Vec<usize> = self.parties.iter().map(|p| p.1).collect();
        let masks = fedsvd_keygen(self.overlap_size, &sizes, self.seed, self.block_size)?;
        for ((party, _), m) in self.parties.iter().zip(masks) {
            out.push(Message::new(self.session, KEYGEN, party, "fedsvd/mask_a", Payload::Matrix(m.a)));
            out.push(Message::new(self.session, KEYGEN, party, "fedsvd/mask_b", Payload::Matrix(m.b_k)));
        }
        Ok(())
    }

    fn handle(&mut self, msg: Message, _out: &mut Vec<Message>) -> Result<()> {
        Err(unexpected(KEYGEN, &msg))
    }
}

pub(crate) struct SvdParty {
    pub id: String,
    pub session: u64,
    pub h: Matrix,
    pub is_task: bool,
    pub a: Option<Matrix>,
    pub b: Option<Matrix>,
    pub recovered: Option<Matrix>,
    uploaded: bool,
}

impl SvdParty {
    pub fn new(id: &str, session: u64, h: Matrix, is_task: bool) -> Self {
        SvdParty { id: id.to_owned(), session, h, is_task, a: None, b: None, recovered: None, uploaded: false }
    }
}

impl Actor for SvdParty {
    fn id(&self) -> &str {
        &self.id
    }

    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Result<()> {
        match (msg.kind.as_str(), msg.payload) {
            ("fedsvd/mask_a", Payload::Matrix(a)) => self.a = Some(a),
            ("fedsvd/mask_b", Payload::Matrix(b)) => self.b = Some(b),
            ("fedsvd/u_hat", Payload::Matrix(u_hat)) if self.is_task => {
                let a = self.a.as_ref().ok_or_else(|| Error::Protocol("Û arrived before A".into()))?;
                self.recovered = Some(fedsvd_recover(&u_hat, a)?);
                return Ok(());
            }
            (kind, _) => return Err(Error::Protocol(format!("{} got unexpected '{kind}'", self.id))),
        }
        if let (Some(a), Some(b), false) = (&self.a, &self.b, self.uploaded) {
            let masks = MaskPair { a: a.clone(), b_k: b.clone() };
            let hat = fedsvd_mask(&self.h, &masks)?;
            out.push(Message::new(self.session, &self.id, SERVER, "fedsvd/masked", Payload::Matrix(hat)));
            self.uploaded = true;
        }
        Ok(())
    }
}

pub(crate) struct SvdServer {
    pub session: u64,
    /// Concatenation order.
    pub parties: Vec<String>,
    pub task: String,
    pub parts: BTreeMap<String, Matrix>,
}

impl Actor for SvdServer {
    fn id(&self) -> &str {
        SERVER
    }

    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Result<()> {
        let Payload::Matrix(m) = &msg.payload else {
            return Err(unexpected(SERVER, &msg));
        };
        if msg.kind != "fedsvd/masked" || !self.parties.contains(&msg.from) {
            return Err(unexpected(SERVER, &msg));
        }
        self.parts.insert(msg.from.clone(), m.clone());
        if self.parts.len() == self.parties.len() {
            let ordered: Vec<Matrix> = self.parties.iter().map(|p| self.parts[p].clone()).collect();
            let u_hat = fedsvd_server(&ordered)?;
            out.push(Message::new(self.session, SERVER, &self.task, "fedsvd/u_hat", Payload::Matrix(u_hat)));
        }
        Ok(())
    }
}

// ---- VFedPCA ----

pub(crate) struct PcaParty {
    pub id: String,
    pub session: u64,
    pub h: Matrix,
    pub is_task: bool,
    pub iters_per_round: usize,
    pub init: Vec<f64>,
    pub last: Option<EigenShare>,
    pub result: Option<Matrix>,
}

impl PcaParty {
    fn upload(&mut self, out: &mut Vec<Message>) -> Result<()> {
        let local = vfedpca_local(&self.h, self.iters_per_round, &self.init)?;
        self.last = Some(local.share.clone());
        out.push(Message::new(
            self.session,
            &self.id,
            SERVER,
            "vfedpca/share",
            Payload::Share { eigvec: local.share.eigvec, eigval: local.share.eigval },
        ));
        Ok(())
    }
}

impl Actor for PcaParty {
    fn id(&self) -> &str {
        &self.id
    }

    fn start(&mut self, out: &mut Vec<Message>) -> Result<()> {
        self.upload(out)
    }

    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Result<()> {
        match (msg.kind.as_str(), msg.payload) {
            ("vfedpca/sync", Payload::Vector(u)) => {
                // warm start from the current federated direction
                if norm2(&u) > 0.0 {
                    self.init = u;
                } else if let Some(s) = &self.last {
                    self.init = s.eigvec.clone();
                }
                self.upload(out)
            }
            ("vfedpca/u", Payload::Vector(u)) if self.is_task => {
                self.result = Some(vfedpca_reconstruct(&self.h, &u)?);
                Ok(())
            }
            (kind, _) => Err(Error::Protocol(format!("{} got unexpected '{kind}'", self.id))),
        }
    }
}

pub(crate) struct PcaServer {
    pub session: u64,
    pub parties: Vec<String>,
    pub task: String,
    pub rounds: usize,
    pub round: usize,
    pub shares: BTreeMap<String, EigenShare>,
}

impl Actor for PcaServer {
    fn id(&self) -> &str {
        SERVER
    }

    fn handle(&mut self, msg: Message, out: &mut Vec<Message>) -> Result<()> {
        let Payload::Share { eigvec, eigval } = &msg.payload else {
            return Err(unexpected(SERVER, &msg));
        };
        if !self.parties.contains(&msg.from) {
            return Err(unexpected(SERVER, &msg));
        }
        self.shares.insert(msg.from.clone(), EigenShare { eigvec: eigvec.clone(), eigval: *eigval });
        if self.shares.len() < self.parties.len() {
            return Ok(());
        }
        let mut ordered: Vec<EigenShare> = self.parties.iter().map(|p| self.shares[p].clone()).collect();
        self.shares.clear();
        align_share_signs(&mut ordered);
        let agg = vfedpca_aggregate(&ordered)?;
        self.round += 1;
        if self.round < self.rounds {
            for p in &self.parties {
                out.push(Message::new(self.session, SERVER, p, "vfedpca/sync", Payload::Vector(agg.u.clone())));
            }
        } else {
            if agg.degenerate {
                return Err(Error::Degenerate("federated eigenvector cancelled to zero".into()));
            }
            out.push(Message::new(self.session, SERVER, &self.task, "vfedpca/u", Payload::Vector(agg.u)));
        }
        Ok(())
    }
}
