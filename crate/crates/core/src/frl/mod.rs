//! Federated representation learning over the overlapping samples.
//!
//! Both protocols run as actors on a [`MessageBus`]: the task party, one or
//! more data parties, a third-party server and (for FedSVD) a key generator.
//! Only the task party ends up holding the federated representation.

mod fedsvd;
mod protocol;
mod vfedpca;

pub use fedsvd::{fedsvd_keygen, fedsvd_mask, fedsvd_recover, fedsvd_server, MaskPair};
pub use protocol::{KEYGEN, SERVER};
pub use vfedpca::{
    align_share_signs, vfedpca_aggregate, vfedpca_local, vfedpca_reconstruct, Aggregate, EigenShare, LocalEigen,
};

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bus::{run_actors, Actor, Interleaving, MessageBus};
use crate::data::SampleId;
use crate::error::{Error, Result};
use crate::numerics::{seeded_rng, Matrix};

use protocol::{KeyGen, PcaParty, PcaServer, SvdParty, SvdServer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrlMethod {
    Fedsvd,
    Vfedpca,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrlConfig {
    pub method: FrlMethod,
    /// Block-diagonal sample mask with blocks of this size (FedSVD).
    pub block_size: Option<usize>,
    /// Keep only the leading components of the FedSVD representation.
    pub rank: Option<usize>,
    pub iter_num: usize,
    pub period_num: usize,
    pub warm_start: bool,
}

impl Default for FrlConfig {
    fn default() -> Self {
        FrlConfig {
            method: FrlMethod::Fedsvd,
            block_size: None,
            rank: None,
            iter_num: 100,
            period_num: 10,
            warm_start: true,
        }
    }
}

impl FrlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iter_num == 0 || self.period_num == 0 {
            return Err(Error::Config("frl.iter_num and frl.period_num must be positive".into()));
        }
        if self.block_size == Some(0) || self.rank == Some(0) {
            return Err(Error::Config("frl.block_size and frl.rank must be positive when set".into()));
        }
        Ok(())
    }
}

/// Latent representation of the overlapping samples, held by the task party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedRepresentation {
    /// Row `i` belongs to `overlap_ids[i]`.
    pub matrix: Matrix,
    pub method: FrlMethod,
    pub overlap_ids: Vec<SampleId>,
}

/// One party's overlap-aligned input to a protocol run.
pub struct PartyInput<'a> {
    pub id: &'a str,
    pub h_ol: &'a Matrix,
}

/// Run one FRL protocol execution between the task party and the given data
/// parties. All `h_ol` matrices must be row-aligned on `overlap_ids`.
pub fn run_frl(
    bus: &mut MessageBus,
    task: PartyInput<'_>,
    data: &[PartyInput<'_>],
    overlap_ids: &[SampleId],
    cfg: &FrlConfig,
    seed: u64,
    interleaving: Interleaving,
) -> Result<FederatedRepresentation> {
    cfg.validate()?;
    let n = overlap_ids.len();
    if n == 0 {
        return Err(Error::EmptyOverlap);
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("at least one data party is required".into()));
    }
    for p in std::iter::once(&task).chain(data) {
        if p.h_ol.rows() != n {
            return Err(Error::Shape(format!("party '{}' has {} overlap rows, expected {n}", p.id, p.h_ol.rows())));
        }
    }
    let order: Vec<String> = std::iter::once(task.id).chain(data.iter().map(|d| d.id)).map(str::to_owned).collect();

    let matrix = match cfg.method {
        FrlMethod::Fedsvd => {
            let session = bus.open_session("fedsvd");
            let mut keygen = KeyGen {
                session,
                parties: std::iter::once(&task).chain(data).map(|p| (p.id.to_owned(), p.h_ol.cols())).collect(),
                overlap_size: n,
                seed,
                block_size: cfg.block_size,
            };
            let mut task_actor = SvdParty::new(task.id, session, task.h_ol.clone(), true);
            let mut data_actors: Vec<SvdParty> =
                data.iter().map(|d| SvdParty::new(d.id, session, d.h_ol.clone(), false)).collect();
            let mut server =
                SvdServer { session, parties: order.clone(), task: task.id.to_owned(), parts: BTreeMap::new() };
            {
                let mut actors: Vec<&mut dyn Actor> = vec![&mut keygen, &mut task_actor, &mut server];
                actors.extend(data_actors.iter_mut().map(|a| a as &mut dyn Actor));
                run_actors(bus, &mut actors, interleaving)?;
            }
            let u = task_actor.recovered.ok_or_else(|| Error::Protocol("fedsvd finished without Û".into()))?;
            match cfg.rank {
                Some(r) if r < u.cols() => u.col_range(0, r),
                _ => u,
            }
        }
        FrlMethod::Vfedpca => {
            let session = bus.open_session("vfedpca");
            let (rounds, per_round) = if cfg.warm_start {
                (cfg.iter_num.div_ceil(cfg.period_num), cfg.period_num.min(cfg.iter_num))
            } else {
                (1, cfg.iter_num)
            };
            let mut rng = seeded_rng(seed);
            let init: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let make = |p: &PartyInput<'_>, is_task: bool| PcaParty {
                id: p.id.to_owned(),
                session,
                h: p.h_ol.clone(),
                is_task,
                iters_per_round: per_round,
                init: init.clone(),
                last: None,
                result: None,
            };
            let mut task_actor = make(&task, true);
            let mut data_actors: Vec<PcaParty> = data.iter().map(|d| make(d, false)).collect();
            let mut server = PcaServer {
                session,
                parties: order.clone(),
                task: task.id.to_owned(),
                rounds,
                round: 0,
                shares: BTreeMap::new(),
            };
            {
                let mut actors: Vec<&mut dyn Actor> = vec![&mut task_actor, &mut server];
                actors.extend(data_actors.iter_mut().map(|a| a as &mut dyn Actor));
                run_actors(bus, &mut actors, interleaving)?;
            }
            task_actor.result.ok_or_else(|| Error::Protocol("vfedpca finished without u".into()))?
        }
    };
    if !matrix.is_finite() {
        return Err(Error::Degenerate("federated representation is not finite".into()));
    }
    Ok(FederatedRepresentation { matrix, method: cfg.method, overlap_ids: overlap_ids.to_vec() })
}
