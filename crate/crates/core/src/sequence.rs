//! Random and explicit map sequences `γ = (γ_0, γ_1, …)`.

use crate::dist::{MapDistribution, SequenceSeed};
use crate::map::HenonMap;

/// Index-addressable sequence of maps.
pub trait MapSequence: Sync {
    fn map_at(&self, index: usize) -> HenonMap;
}

impl<S: MapSequence + ?Sized> MapSequence for &S {
    fn map_at(&self, index: usize) -> HenonMap {
        (**self).map_at(index)
    }
}

/// Draws from `dist` keyed by `seed`.
#[derive(Clone, Copy, Debug)]
pub struct Sampled<'a> {
    pub dist: &'a MapDistribution,
    pub seed: SequenceSeed,
}

impl<'a> Sampled<'a> {
    pub fn new(dist: &'a MapDistribution, seed: SequenceSeed) -> Self {
        Self { dist, seed }
    }
}

impl MapSequence for Sampled<'_> {
    fn map_at(&self, index: usize) -> HenonMap {
        self.dist.sample_map(self.seed, index as u64)
    }
}

/// Explicit list of maps, repeated periodically past its end.
#[derive(Clone, Debug, PartialEq)]
pub struct Explicit(pub Vec<HenonMap>);

impl MapSequence for Explicit {
    fn map_at(&self, index: usize) -> HenonMap {
        self.0[index % self.0.len()]
    }
}

/// The constant sequence `(f, f, f, …)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constant(pub HenonMap);

impl MapSequence for Constant {
    fn map_at(&self, _index: usize) -> HenonMap {
        self.0
    }
}

/// Left shift `σ^k(γ)`.
#[derive(Clone, Copy, Debug)]
pub struct Shifted<S> {
    pub inner: S,
    pub by: usize,
}

impl<S: MapSequence> MapSequence for Shifted<S> {
    fn map_at(&self, index: usize) -> HenonMap {
        self.inner.map_at(index + self.by)
    }
}

/// `head` on indices `< prefix`, `tail` afterwards.
#[derive(Clone, Copy, Debug)]
pub struct Spliced<A, B> {
    pub head: A,
    pub tail: B,
    pub prefix: usize,
}

impl<A: MapSequence, B: MapSequence> MapSequence for Spliced<A, B> {
    fn map_at(&self, index: usize) -> HenonMap {
        if index < self.prefix {
            self.head.map_at(index)
        } else {
            self.tail.map_at(index)
        }
    }
}

/// Each map replaced by its swap-conjugated inverse.
#[derive(Clone, Copy, Debug)]
pub struct Inverted<S>(pub S);

impl<S: MapSequence> MapSequence for Inverted<S> {
    fn map_at(&self, index: usize) -> HenonMap {
        self.0.map_at(index).inverse_as_plus()
    }
}
