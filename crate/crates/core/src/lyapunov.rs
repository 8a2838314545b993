//! Top Lyapunov exponent along random orbits.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{MapDistribution, SequenceSeed};
use crate::error::{Error, Result};
use crate::map::{in_d_r, C2Point, FiltrationParams};
use crate::rng::stream_rng;
use crate::sequence::{MapSequence, Sampled};

pub const MIN_STEPS: usize = 100;
pub const MIN_SAMPLES: usize = 10;

/// Stream id offset for the start-vector draw, kept apart from map draws.
const START_VECTOR_STREAM: u64 = 0x5EED_0F_7A46;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SingleRun {
    Exponent(f64),
    Escaped,
}

impl SingleRun {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Self::Exponent(e) => Some(*e),
            Self::Escaped => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Mean exponent over non-escaped runs, nats per step.
    pub exponent: f64,
    pub n_steps: usize,
    pub samples: usize,
    pub ci95_halfwidth: f64,
    pub escaped_fraction: f64,
    /// Per-run outcomes, ordered by stream index.
    #[serde(skip)]
    pub runs: Vec<SingleRun>,
}

/// Unit start vector `(cos θ, e^{iφ} sin θ)` drawn from `seed`.
pub fn start_vector(seed: SequenceSeed) -> [Complex64; 2] {
    let mut rng = stream_rng(seed.master_seed, seed.stream_id ^ START_VECTOR_STREAM, 0);
    let theta = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    [Complex64::new(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi)]
}

/// `(1/n) Σ log‖J_k v_k‖` with per-step renormalization of `v`.
///
/// Returns [`SingleRun::Escaped`] once the base orbit leaves `D_{10R}`.
pub fn max_lyapunov_single<S: MapSequence + ?Sized>(
    seq: &S,
    z: C2Point,
    n: usize,
    params: &FiltrationParams,
    v0: [Complex64; 2],
) -> Result<SingleRun> {
    if n < MIN_STEPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_STEPS} steps, got {n}")));
    }
    let r_big = 10.0 * params.r;
    let mut z = z;
    let mut v = v0;
    let norm0 = v[0].norm().hypot(v[1].norm());
    v = [v[0] / norm0, v[1] / norm0];
    let mut acc = 0.0;
    for k in 0..n {
        if !in_d_r(z, r_big) {
            return Ok(SingleRun::Escaped);
        }
        let f = seq.map_at(k);
        let w0 = v[1];
        let w1 = -f.delta() * v[0] + f.poly().eval_derivative(z.y) * v[1];
        let norm = w0.norm().hypot(w1.norm());
        if !(norm >= 1e-300) {
            return Err(Error::Degenerate);
        }
        acc += norm.ln();
        v = [w0 / norm, w1 / norm];
        z = f.apply(z);
    }
    if !in_d_r(z, r_big) {
        return Ok(SingleRun::Escaped);
    }
    Ok(SingleRun::Exponent(acc / n as f64))
}

/// Exponent averaged over `samples` independent sequences drawn from `dist`.
pub fn lyapunov_statistics(
    dist: &MapDistribution,
    z: C2Point,
    samples: usize,
    n: usize,
    seed: SequenceSeed,
) -> Result<LyapunovReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {samples}")));
    }
    let params = dist.filtration(1.0)?;
    let runs: Vec<SingleRun> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.child(k);
            max_lyapunov_single(&Sampled::new(dist, s), z, n, &params, start_vector(s))
        })
        .collect::<Result<_>>()?;
    summarize(runs, n)
}

fn summarize(runs: Vec<SingleRun>, n: usize) -> Result<LyapunovReport> {
    let values: Vec<f64> = runs.iter().filter_map(SingleRun::exponent).collect();
    if values.is_empty() {
        return Err(Error::AllEscaped);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let ci = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        1.96 * (var / k).sqrt()
    } else {
        0.0
    };
    Ok(LyapunovReport {
        exponent: mean,
        n_steps: n,
        samples: runs.len(),
        ci95_halfwidth: ci,
        escaped_fraction: 1.0 - k / runs.len() as f64,
        runs,
    })
}

/// Backward exponent: the forward statistics of `τ⁻¹` at `s(z)` in the
/// swap-conjugated chart.
pub fn backward_lyapunov_statistics(
    dist: &MapDistribution,
    z: C2Point,
    samples: usize,
    n: usize,
    seed: SequenceSeed,
) -> Result<LyapunovReport> {
    lyapunov_statistics(&dist.inverse_distribution()?, z.swap(), samples, n, seed)
}

/// Diameter of the image of the stencil `z ± radius·e_x`, `z ± radius·e_y`
/// after each of `n` steps (index 0 is the initial stencil).
pub fn stencil_diameters<S: MapSequence + ?Sized>(seq: &S, z: C2Point, radius: f64, n: usize) -> Vec<f64> {
    let one = Complex64::new(radius, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut pts = [
        z + C2Point::new(one, zero),
        z - C2Point::new(one, zero),
        z + C2Point::new(zero, one),
        z - C2Point::new(zero, one),
    ];
    let diam = |p: &[C2Point; 4]| {
        let mut d: f64 = 0.0;
        for a in 0..4 {
            for b in a + 1..4 {
                d = d.max(p[a].distance(&p[b]));
            }
        }
        d
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(diam(&pts));
    for k in 0..n {
        let f = seq.map_at(k);
        for p in pts.iter_mut() {
            *p = f.apply(*p);
        }
        out.push(diam(&pts));
    }
    out
}
