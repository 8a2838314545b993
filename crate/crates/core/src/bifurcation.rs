//! Noise-family sweeps: minimal-set counts along `t ↦ τ_t` and the grid
//! intervals where the count changes.

use serde::{Deserialize, Serialize};

use crate::dist::{NoiseFamily, SequenceSeed};
use crate::error::{Error, Result};
use crate::map::C2Point;
use crate::minsets::{discover_minimal_sets, estimate_tl, DiscoveryParams, MinSetId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub discovery: DiscoveryParams,
    /// Starting points for discovery orbits.
    pub grid: Vec<C2Point>,
    /// Cluster radius at `t` is `max(discovery.cluster_eps, eps_per_radius · r_t)`.
    pub eps_per_radius: f64,
    /// Points used for the unresolved-mass half of the mean-stability proxy;
    /// empty disables it.
    pub probes: Vec<C2Point>,
    pub probe_samples: usize,
    pub probe_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorSummary {
    pub id: MinSetId,
    pub period: usize,
    pub cloud_size: usize,
    pub capture_radius: f64,
    pub contraction: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub t: f64,
    pub radius: f64,
    pub cluster_eps: f64,
    /// Including INFINITY.
    pub minset_count: usize,
    pub finite_minsets: usize,
    pub all_attracting: bool,
    /// `all_attracting` and unresolved probe mass below 1%; `None` without probes.
    pub mean_stable: Option<bool>,
    pub max_unresolved: Option<f64>,
    pub nonconvergent_clusters: usize,
    pub descriptors: Vec<DescriptorSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub t_grid: Vec<f64>,
    pub per_t: Vec<SweepRecord>,
    /// Index pairs `(i, j)`, `i < j`, with more finite minimal sets at `t_j`
    /// than at `t_i`.
    pub monotonicity_violations: Vec<(usize, usize)>,
}

/// Runs discovery and certification at every `t` of `t_grid`. All grid
/// points share `seed`, so neighbouring parameters see common random numbers.
pub fn scan_family(fam: &NoiseFamily, t_grid: &[f64], params: &SweepParams, seed: SequenceSeed) -> Result<SweepReport> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("t_grid is empty".into()));
    }
    if t_grid.windows(2).any(|w| !(w[0] < w[1])) || t_grid[0] < 0.0 || t_grid[t_grid.len() - 1] > 1.0 {
        return Err(Error::InvalidArgument("t_grid must be strictly increasing in [0, 1]".into()));
    }
    let mut per_t = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        per_t.push(scan_point(fam, t, params, seed)?);
    }
    let monotonicity_violations = monotonicity_violations(&per_t);
    Ok(SweepReport { t_grid: t_grid.to_vec(), per_t, monotonicity_violations })
}

fn scan_point(fam: &NoiseFamily, t: f64, params: &SweepParams, seed: SequenceSeed) -> Result<SweepRecord> {
    let dist = fam.family_at(t)?;
    let filtration = dist.filtration(1.0)?;
    let radius = fam.radius_at(t);
    let cluster_eps = params.discovery.cluster_eps.max(params.eps_per_radius * radius);
    let disc = DiscoveryParams { cluster_eps, ..params.discovery };
    let found = discover_minimal_sets(&dist, &filtration, &params.grid, &disc, seed)?;
    let descriptors: Vec<DescriptorSummary> = found
        .finite()
        .map(|d| DescriptorSummary {
            id: d.id,
            period: d.period,
            cloud_size: d.cloud.len(),
            capture_radius: d.capture_radius,
            contraction: d.contraction,
            certified: d.contraction < 1.0 - 1e-3,
        })
        .collect();
    let all_attracting = descriptors.iter().all(|d| d.certified);
    let (mean_stable, max_unresolved) = if params.probes.is_empty() {
        (None, None)
    } else {
        let mut worst: f64 = 0.0;
        for (k, z) in params.probes.iter().enumerate() {
            let est = estimate_tl(
                &dist,
                &found.descriptors,
                &filtration,
                *z,
                params.probe_samples,
                params.probe_max_iter,
                seed.child(0xB1F0 + k as u64),
            )?;
            worst = worst.max(est.unresolved);
        }
        (Some(all_attracting && worst < 0.01), Some(worst))
    };
    Ok(SweepRecord {
        t,
        radius,
        cluster_eps,
        minset_count: descriptors.len() + 1,
        finite_minsets: descriptors.len(),
        all_attracting,
        mean_stable,
        max_unresolved,
        nonconvergent_clusters: found.nonconvergent.len(),
        descriptors,
    })
}

fn monotonicity_violations(per_t: &[SweepRecord]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..per_t.len() {
        for j in i + 1..per_t.len() {
            if per_t[j].finite_minsets > per_t[i].finite_minsets {
                out.push((i, j));
            }
        }
    }
    out
}

/// Grid intervals `(t_k, t_{k+1})` across which the minimal-set count changes.
pub fn locate_bifurcations(report: &SweepReport) -> Vec<(f64, f64)> {
    report
        .per_t
        .windows(2)
        .filter(|w| w[0].minset_count != w[1].minset_count)
        .map(|w| (w[0].t, w[1].t))
        .collect()
}

/// `n + 1` evenly spaced points of `[0, 1]`.
pub fn uniform_t_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64, finite: usize) -> SweepRecord {
        SweepRecord {
            t,
            radius: 0.0,
            cluster_eps: 0.01,
            minset_count: finite + 1,
            finite_minsets: finite,
            all_attracting: true,
            mean_stable: None,
            max_unresolved: None,
            nonconvergent_clusters: 0,
            descriptors: Vec::new(),
        }
    }

    fn report(counts: &[usize]) -> SweepReport {
        let t = uniform_t_grid(counts.len() - 1);
        let per_t: Vec<SweepRecord> = t.iter().zip(counts).map(|(&t, &c)| record(t, c)).collect();
        let monotonicity_violations = monotonicity_violations(&per_t);
        SweepReport { t_grid: t, per_t, monotonicity_violations }
    }

    #[test]
    fn single_drop() {
        let r = report(&[1, 1, 1, 0, 0]);
        assert_eq!(locate_bifurcations(&r), vec![(0.5, 0.75)]);
        assert!(r.monotonicity_violations.is_empty());
    }

    #[test]
    fn constant_report_has_no_intervals() {
        assert!(locate_bifurcations(&report(&[2, 2, 2])).is_empty());
    }

    #[test]
    fn two_drops_respect_count_bound() {
        let r = report(&[2, 2, 1, 1, 0]);
        let iv = locate_bifurcations(&r);
        assert_eq!(iv.len(), 2);
        assert!(iv.len() <= r.per_t[0].finite_minsets);
    }

    #[test]
    fn increases_are_flagged() {
        let r = report(&[1, 0, 1]);
        assert_eq!(r.monotonicity_violations, vec![(1, 2)]);
    }
}
