//! Simulated private set intersection.
//!
//! Each side hashes its ids with SHA-256 and only the digests are compared.
//! This reproduces the protocol's output (the shared id set and nothing
//! else), not its cryptographic guarantees.

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::types::{check_unique_ids, OverlapIndex, SampleId};
use crate::error::{Error, Result};

fn digest(id: &SampleId) -> [u8; 32] {
    Sha256::digest(id.0.as_bytes()).into()
}

/// Intersect two id lists. The result is ordered lexicographically by id so
/// both sides agree on row order without further coordination.
pub fn psi_intersect(task_ids: &[SampleId], data_ids: &[SampleId]) -> Result<OverlapIndex> {
    if task_ids.is_empty() || data_ids.is_empty() {
        return Err(Error::InvalidArgument("psi needs non-empty id lists on both sides".into()));
    }
    check_unique_ids(task_ids)?;
    check_unique_ids(data_ids)?;

    let data_hashes: HashMap<[u8; 32], usize> = data_ids.iter().enumerate().map(|(i, id)| (digest(id), i)).collect();
    let mut shared: Vec<(SampleId, usize, usize)> = task_ids
        .iter()
        .enumerate()
        .filter_map(|(ti, id)| data_hashes.get(&digest(id)).map(|&di| (id.clone(), ti, di)))
        .collect();
    shared.sort_by(|a, b| a.0.cmp(&b.0));

    let mut out = OverlapIndex { overlapping_ids: Vec::new(), task_rows: Vec::new(), data_rows: Vec::new() };
    for (id, ti, di) in shared {
        out.overlapping_ids.push(id);
        out.task_rows.push(ti);
        out.data_rows.push(di);
    }
    Ok(out)
}
