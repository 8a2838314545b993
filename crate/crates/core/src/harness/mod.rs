//! Experiment harness: configuration, deterministic output files and the
//! `henonlab` command line.

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{MapDistribution, SequenceSeed};
use crate::error::{Error, Result};
use crate::escape::{classify_orbit, OrbitStatus};
use crate::map::{C2Point, FiltrationParams};
use crate::sequence::Sampled;

/// Escape census over (point, sequence) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeSummary {
    pub pairs: usize,
    pub escaped: usize,
    pub bounded: usize,
    pub uncertain: usize,
    pub escaped_fraction: f64,
    pub bounded_fraction: f64,
    pub uncertain_fraction: f64,
    pub max_iter: usize,
    /// `[escaped, bounded, uncertain]` per grid point.
    #[serde(skip)]
    pub per_point: Vec<[usize; 3]>,
}

/// Classifies `sequences_per_point` sampled orbits from every grid point.
/// Pair `(p, k)` reads the stream `seed.child(p · sequences_per_point + k)`,
/// so a larger cap replays the same sequences.
pub fn escape_stats(
    dist: &MapDistribution,
    params: &FiltrationParams,
    grid: &[C2Point],
    sequences_per_point: usize,
    max_iter: usize,
    seed: SequenceSeed,
) -> Result<EscapeSummary> {
    if grid.is_empty() {
        return Err(Error::EmptySet);
    }
    if sequences_per_point == 0 {
        return Err(Error::InvalidArgument("sequences_per_point must be positive".into()));
    }
    let spp = sequences_per_point;
    let verdicts: Vec<OrbitStatus> = (0..grid.len() * spp)
        .into_par_iter()
        .map(|k| {
            let seq = Sampled::new(dist, seed.child(k as u64));
            classify_orbit(&seq, grid[k / spp], params, max_iter).map(|v| v.status)
        })
        .collect::<Result<_>>()?;
    let mut per_point = vec![[0usize; 3]; grid.len()];
    for (k, v) in verdicts.iter().enumerate() {
        let slot = match v {
            OrbitStatus::Escaped { .. } => 0,
            OrbitStatus::Bounded { .. } => 1,
            OrbitStatus::Uncertain { .. } => 2,
        };
        per_point[k / spp][slot] += 1;
    }
    let tot = |s: usize| per_point.iter().map(|c| c[s]).sum::<usize>();
    let (escaped, bounded, uncertain) = (tot(0), tot(1), tot(2));
    let pairs = verdicts.len();
    let frac = |c: usize| c as f64 / pairs as f64;
    Ok(EscapeSummary {
        pairs,
        escaped,
        bounded,
        uncertain,
        escaped_fraction: frac(escaped),
        bounded_fraction: frac(bounded),
        uncertain_fraction: frac(uncertain),
        max_iter,
        per_point,
    })
}
