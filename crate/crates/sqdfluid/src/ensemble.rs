//! Rayon driver for Monte Carlo ensembles.
//!
//! Each replication owns the stream picked by its index, and results are
//! folded in index order, so the summary matches the sequential
//! [`sqdfluid_core::sim::ensemble::ensemble`] bit for bit.

use rayon::prelude::*;
use sqdfluid_core::sim::ensemble::{aggregate, run_replication};
use sqdfluid_core::sim::{EnsembleSpec, EnsembleSummary};
use sqdfluid_core::SimError;

pub fn par_ensemble(spec: &EnsembleSpec, replications: usize, seed: u64) -> Result<EnsembleSummary, SimError> {
    if replications == 0 {
        return Err(SimError::NoReplications);
    }
    let reps = (0..replications as u64)
        .into_par_iter()
        .map(|k| run_replication(spec, seed, k))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(spec, &reps))
}
