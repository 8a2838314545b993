//! Distributions of maps and reproducible sampling.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{condition_a_radius_bounds, CoefficientBounds, FiltrationParams, HenonMap};
use crate::rng::{mix64, stream_rng, unit_ball4};

/// Key of one random sequence: draws at `(master_seed, stream_id, index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceSeed {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SequenceSeed {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// Independent stream for the `k`-th sub-task (grid point, sample, row …).
    pub fn child(&self, k: u64) -> Self {
        Self { master_seed: self.master_seed, stream_id: mix64(self.stream_id ^ mix64(k.wrapping_add(1))) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDist {
    maps: Vec<HenonMap>,
    weights: Vec<f64>,
    cdf: Vec<f64>,
}

impl FiniteDist {
    pub fn maps(&self) -> &[HenonMap] {
        &self.maps
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn pick(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.maps.len() - 1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BallNoise {
    base: HenonMap,
    radius: f64,
}

impl BallNoise {
    pub fn base(&self) -> &HenonMap {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// The measure τ from which each step's map is drawn.
#[derive(Clone, Debug, PartialEq)]
pub enum MapDistribution {
    /// `Σ w_j δ_{h_j}`.
    Finite(FiniteDist),
    /// `f + (a, b)` with `(a, b)` uniform on the complex 2-ball of `radius`.
    Ball(BallNoise),
}

const WEIGHT_TOL: f64 = 1e-12;

impl MapDistribution {
    pub fn finite(maps: Vec<HenonMap>, weights: Vec<f64>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::InvalidArgument("finite distribution needs at least one map".into()));
        }
        if maps.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} maps but {} weights",
                maps.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("weights must be positive, got {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!("weights must sum to 1, got {total}")));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self::Finite(FiniteDist { maps, weights, cdf }))
    }

    pub fn uniform(maps: Vec<HenonMap>) -> Result<Self> {
        let n = maps.len();
        if n == 0 {
            return Err(Error::InvalidArgument("finite distribution needs at least one map".into()));
        }
        let mut weights = vec![1.0 / n as f64; n];
        let head: f64 = weights[..n - 1].iter().sum();
        weights[n - 1] = 1.0 - head;
        Self::finite(maps, weights)
    }

    pub fn point_mass(f: HenonMap) -> Self {
        Self::finite(vec![f], vec![1.0]).expect("point mass is valid")
    }

    pub fn ball(base: HenonMap, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("noise radius must be positive, got {radius}")));
        }
        Ok(Self::Ball(BallNoise { base, radius }))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Finite(_) => "finite",
            Self::Ball(_) => "ball",
        }
    }

    pub fn as_finite(&self) -> Option<&FiniteDist> {
        match self {
            Self::Finite(f) => Some(f),
            Self::Ball(_) => None,
        }
    }

    /// The map used at step `index` of the sequence keyed by `seed`.
    pub fn sample_map(&self, seed: SequenceSeed, index: u64) -> HenonMap {
        let mut rng = stream_rng(seed.master_seed, seed.stream_id, index);
        match self {
            Self::Finite(f) => {
                if f.maps.len() == 1 {
                    return f.maps[0];
                }
                f.maps[f.pick(rng.random::<f64>())]
            }
            Self::Ball(b) => {
                let [ar, ai, br, bi] = unit_ball4(&mut rng);
                let r = b.radius;
                b.base.translated(Complex64::new(ar * r, ai * r), Complex64::new(br * r, bi * r))
            }
        }
    }

    pub fn sample_sequence(&self, seed: SequenceSeed, n: usize) -> Vec<HenonMap> {
        (0..n as u64).map(|i| self.sample_map(seed, i)).collect()
    }

    /// τ⁻¹, realized in the swap-conjugated chart through
    /// [`HenonMap::inverse_as_plus`].
    pub fn inverse_distribution(&self) -> Result<Self> {
        match self {
            Self::Finite(f) => Ok(Self::Finite(FiniteDist {
                maps: f.maps.iter().map(HenonMap::inverse_as_plus).collect(),
                weights: f.weights.clone(),
                cdf: f.cdf.clone(),
            })),
            Self::Ball(_) => Err(Error::UnsupportedKind("ball-noise")),
        }
    }

    /// Coefficient bounds covering the whole support.
    pub fn coefficient_bounds(&self) -> Vec<CoefficientBounds> {
        match self {
            Self::Finite(f) => f.maps.iter().map(CoefficientBounds::of).collect(),
            Self::Ball(b) => vec![CoefficientBounds::inflated(&b.base, b.radius)],
        }
    }

    /// Condition-(A) radii valid for every map in the support.
    pub fn filtration(&self, rho_margin: f64) -> Result<FiltrationParams> {
        condition_a_radius_bounds(&self.coefficient_bounds(), rho_margin)
    }

    /// Finite stand-in for the support: all maps of a finite distribution,
    /// or the base map plus `k − 1` draws for ball noise.
    pub fn support_sample(&self, k: usize, seed: SequenceSeed) -> Vec<HenonMap> {
        match self {
            Self::Finite(f) => f.maps.clone(),
            Self::Ball(b) => {
                let mut out = vec![b.base];
                out.extend((1..k.max(1) as u64).map(|i| self.sample_map(seed, i)));
                out
            }
        }
    }

    /// Same distribution with finite weights replaced.
    pub fn reweighted(&self, weights: Vec<f64>) -> Result<Self> {
        match self {
            Self::Finite(f) => Self::finite(f.maps.clone(), weights),
            Self::Ball(_) => Err(Error::UnsupportedKind("ball-noise")),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum DistRepr {
    Finite { maps: Vec<HenonMap>, weights: Vec<f64> },
    Ball { base: HenonMap, radius: f64 },
}

impl Serialize for MapDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(f) => DistRepr::Finite { maps: f.maps.clone(), weights: f.weights.clone() },
            Self::Ball(b) => DistRepr::Ball { base: b.base, radius: b.radius },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match DistRepr::deserialize(d)? {
            DistRepr::Finite { maps, weights } => Self::finite(maps, weights),
            DistRepr::Ball { base, radius } => Self::ball(base, radius),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// The family `τ_t`: ball noise of radius `u·t + (1 − t)·v` around `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseFamily {
    pub base: HenonMap,
    pub v: f64,
    pub u: f64,
}

impl NoiseFamily {
    /// `u == v` is accepted as a degenerate constant family.
    pub fn new(base: HenonMap, v: f64, u: f64) -> Result<Self> {
        if !(v > 0.0) || !(u >= v) || !u.is_finite() {
            return Err(Error::InvalidArgument(format!("noise family needs 0 < v <= u, got v={v}, u={u}")));
        }
        Ok(Self { base, v, u })
    }

    pub fn radius_at(&self, t: f64) -> f64 {
        self.u * t + (1.0 - t) * self.v
    }

    pub fn family_at(&self, t: f64) -> Result<MapDistribution> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
        }
        MapDistribution::ball(self.base, self.radius_at(t))
    }
}
