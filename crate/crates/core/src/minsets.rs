//! Attracting minimal sets, their cyclic periods and basin probabilities.
//!
//! A finite minimal set is represented by an ε-cloud: post-transient orbit
//! points, clustered by single linkage and saturated under a finite sample of
//! the support. The set at infinity (`[0:1:0]`) is always present and is
//! detected through the certified escape region `V_R⁺`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{MapDistribution, SequenceSeed};
use crate::error::{Error, Result};
use crate::map::{in_d_r, in_v_plus, C2Point, FiltrationParams, HenonMap};
use crate::rng::stream_rng;
use crate::sequence::{MapSequence, Sampled};

/// Consecutive steps inside a capture neighborhood before an orbit is
/// assigned to it.
pub const CAPTURE_STEPS: usize = 20;

/// Support sample size for ball-noise saturation.
pub const SUPPORT_SAMPLES: usize = 64;

const MAX_SATURATION_ROUNDS: usize = 50;
const MAX_CLOUD_POINTS: usize = 50_000;
const PROBE_SEED_TAG: u64 = 0xCA97_0BE5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MinSetId {
    Finite(usize),
    Infinity,
}

impl fmt::Display for MinSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(i) => write!(f, "{i}"),
            Self::Infinity => f.write_str("INFINITY"),
        }
    }
}

impl Serialize for MinSetId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(i) => s.serialize_u64(*i as u64),
            Self::Infinity => s.serialize_str("INFINITY"),
        }
    }
}

impl<'de> Deserialize<'de> for MinSetId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "INFINITY" => Ok(Self::Infinity),
            serde_json::Value::Number(n) if n.as_u64().is_some() => Ok(Self::Finite(n.as_u64().unwrap() as usize)),
            other => Err(serde::de::Error::custom(format!("bad minimal set id {other}"))),
        }
    }
}

/// Ball `B(center, radius)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: C2Point,
    pub radius: f64,
}

impl Ball {
    fn hull(points: &[C2Point]) -> Self {
        let k = points.len() as f64;
        let sum = points.iter().fold([0.0; 4], |mut acc, p| {
            for (a, v) in acc.iter_mut().zip(p.to_reals()) {
                *a += v;
            }
            acc
        });
        let center = C2Point::from_array(sum.map(|s| s / k));
        let radius = points.iter().map(|p| p.distance(&center)).fold(0.0, f64::max);
        Self { center, radius }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalSetDescriptor {
    pub id: MinSetId,
    pub cloud: Vec<C2Point>,
    /// Cyclic period `r_L`.
    pub period: usize,
    /// Cyclic classes `L_1 … L_{r_L}` as indices into `cloud`.
    pub parts: Vec<Vec<usize>>,
    /// Bounding balls of the ε-components of the cloud.
    pub hulls: Vec<Ball>,
    /// Margin added to every hull to form the capture neighborhood.
    pub capture_radius: f64,
    /// Empirical per-step contraction ratio of nearby pairs.
    pub contraction: f64,
}

impl MinimalSetDescriptor {
    pub fn infinity() -> Self {
        Self {
            id: MinSetId::Infinity,
            cloud: Vec::new(),
            period: 1,
            parts: vec![Vec::new()],
            hulls: Vec::new(),
            capture_radius: 0.0,
            contraction: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.id != MinSetId::Infinity
    }

    /// Membership in the capture neighborhood (finite sets only).
    pub fn captures(&self, z: C2Point) -> bool {
        self.hulls.iter().any(|b| z.distance(&b.center) <= b.radius + self.capture_radius)
    }

    fn neighborhood_gap(&self, other: &MinimalSetDescriptor) -> f64 {
        let mut gap = f64::INFINITY;
        for a in &self.hulls {
            for b in &other.hulls {
                gap = gap.min(a.center.distance(&b.center) - a.radius - b.radius);
            }
        }
        gap
    }

    /// Uniform-ish draw from the capture neighborhood.
    fn probe<R: Rng>(&self, rng: &mut R) -> C2Point {
        let b = self.hulls[rng.random_range(0..self.hulls.len())];
        let dir = crate::rng::unit_ball4(rng);
        let n = dir.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        let r = (b.radius + self.capture_radius) * rng.random::<f64>().powf(0.25);
        b.center + C2Point::from_array(dir.map(|a| a / n * r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryParams {
    pub burn_in: usize,
    pub n_record: usize,
    pub cluster_eps: f64,
    pub support_samples: usize,
    /// Pair probes and horizon used for the contraction certificate.
    pub certify_probes: usize,
    pub certify_steps: usize,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            n_record: 100,
            cluster_eps: 1e-2,
            support_samples: SUPPORT_SAMPLES,
            certify_probes: 64,
            certify_steps: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    /// Finite descriptors first, `INFINITY` last.
    pub descriptors: Vec<MinimalSetDescriptor>,
    /// Grid points whose sampled orbit escaped.
    pub escaped_orbits: usize,
    /// Clusters that did not saturate (reported, not fatal).
    pub nonconvergent: Vec<usize>,
}

impl Discovery {
    pub fn finite(&self) -> impl Iterator<Item = &MinimalSetDescriptor> {
        self.descriptors.iter().filter(|d| d.is_finite())
    }

    pub fn finite_count(&self) -> usize {
        self.finite().count()
    }
}

/// Spatial hash on ℝ⁴ with cubic cells.
struct Grid4 {
    cell: f64,
    map: HashMap<[i64; 4], Vec<usize>>,
}

impl Grid4 {
    fn new(cell: f64) -> Self {
        Self { cell, map: HashMap::new() }
    }

    fn key(&self, p: &C2Point) -> [i64; 4] {
        p.to_reals().map(|v| (v / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: &C2Point, idx: usize) {
        let k = self.key(p);
        self.map.entry(k).or_default().push(idx);
    }

    /// Indices in the 3⁴ block of cells around `p`.
    fn neighbors(&self, p: &C2Point, mut f: impl FnMut(usize)) {
        let k = self.key(p);
        for d0 in -1..=1 {
            for d1 in -1..=1 {
                for d2 in -1..=1 {
                    for d3 in -1..=1 {
                        if let Some(v) = self.map.get(&[k[0] + d0, k[1] + d1, k[2] + d2, k[3] + d3]) {
                            v.iter().for_each(|&i| f(i));
                        }
                    }
                }
            }
        }
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }

    /// Components as sorted index lists, ordered by smallest member.
    fn components(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.0.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}

/// Single-linkage clusters at radius `eps`.
pub fn single_linkage(points: &[C2Point], eps: f64) -> Vec<Vec<usize>> {
    let mut grid = Grid4::new(eps);
    for (i, p) in points.iter().enumerate() {
        grid.insert(p, i);
    }
    let mut uf = UnionFind::new(points.len());
    for (i, p) in points.iter().enumerate() {
        grid.neighbors(p, |j| {
            if j > i && p.distance(&points[j]) <= eps {
                uf.union(i, j);
            }
        });
    }
    uf.components()
}

/// Drops points closer than `eps` to an earlier kept point.
fn thin(points: &[C2Point], eps: f64) -> Vec<C2Point> {
    let mut grid = Grid4::new(eps);
    let mut kept: Vec<C2Point> = Vec::new();
    for p in points {
        let mut close = false;
        grid.neighbors(p, |j| close |= kept[j].distance(p) < eps);
        if !close {
            grid.insert(p, kept.len());
            kept.push(*p);
        }
    }
    kept
}

enum OrbitRecord {
    Escaped,
    Recorded(Vec<C2Point>),
}

fn record_orbit<S: MapSequence>(seq: &S, z: C2Point, r: f64, burn_in: usize, n_record: usize) -> OrbitRecord {
    let mut z = z;
    let mut out = Vec::with_capacity(n_record);
    for n in 0..burn_in + n_record {
        if in_v_plus(z, r) || !z.is_finite() {
            return OrbitRecord::Escaped;
        }
        if n >= burn_in {
            out.push(z);
        }
        z = seq.map_at(n).apply(z);
    }
    OrbitRecord::Recorded(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum NetState {
    Open,
    Closed,
    Failed,
}

/// Shared `spacing`-net of all saturated clouds. Each point remembers the
/// cluster that added it.
struct SaturationNet {
    spacing: f64,
    grid: Grid4,
    points: Vec<C2Point>,
    owner: Vec<usize>,
    state: Vec<NetState>,
}

enum Nearby {
    Free,
    Own,
    Closed(usize),
    Failed,
}

impl SaturationNet {
    fn new(spacing: f64, clusters: usize) -> Self {
        Self {
            spacing,
            grid: Grid4::new(spacing),
            points: Vec::new(),
            owner: Vec::new(),
            state: vec![NetState::Open; clusters],
        }
    }

    fn nearby(&self, q: &C2Point, k: usize) -> Nearby {
        let mut out = Nearby::Free;
        self.grid.neighbors(q, |j| {
            if self.points[j].distance(q) >= self.spacing {
                return;
            }
            let o = self.owner[j];
            match (self.state[o], &out) {
                (NetState::Failed, _) => out = Nearby::Failed,
                (_, Nearby::Failed) => {}
                _ if o == k => out = Nearby::Own,
                (NetState::Closed, Nearby::Free) => out = Nearby::Closed(o),
                _ => {}
            }
        });
        out
    }

    /// Adds `q` for cluster `k` unless covered. Returns false if `q` lands on
    /// a failed cluster.
    fn offer(&mut self, q: C2Point, k: usize, links: &mut Vec<(usize, usize)>) -> bool {
        match self.nearby(&q, k) {
            Nearby::Free => {
                self.grid.insert(&q, self.points.len());
                self.points.push(q);
                self.owner.push(k);
                true
            }
            Nearby::Own => true,
            Nearby::Closed(j) => {
                links.push((k, j));
                true
            }
            Nearby::Failed => false,
        }
    }

    /// Closes cluster `k`'s cloud under `maps`. Images near another closed
    /// cloud are absorbed into it (closure of a union is the union of the
    /// closures) and recorded as links.
    fn saturate(&mut self, k: usize, cloud: &[C2Point], maps: &[HenonMap], r: f64, links: &mut Vec<(usize, usize)>) -> bool {
        let first = self.points.len();
        let ok = self.saturate_inner(k, cloud, maps, r, links, first);
        self.state[k] = if ok { NetState::Closed } else { NetState::Failed };
        ok
    }

    fn saturate_inner(
        &mut self,
        k: usize,
        cloud: &[C2Point],
        maps: &[HenonMap],
        r: f64,
        links: &mut Vec<(usize, usize)>,
        first: usize,
    ) -> bool {
        for p in cloud {
            if !self.offer(*p, k, links) {
                return false;
            }
        }
        let mut frontier = first;
        for _ in 0..MAX_SATURATION_ROUNDS {
            let images: Vec<C2Point> = self.points[frontier..]
                .par_iter()
                .flat_map_iter(|p| maps.iter().map(move |h| h.apply(*p)))
                .collect();
            let before = self.points.len();
            frontier = before;
            for q in images {
                if !q.is_finite() || !in_d_r(q, r) || !self.offer(q, k, links) {
                    return false;
                }
            }
            if self.points.len() == before {
                return true;
            }
            if self.points.len() - first > MAX_CLOUD_POINTS {
                return false;
            }
        }
        false
    }

    fn cloud_of(&self, k: usize) -> impl Iterator<Item = C2Point> + '_ {
        self.points.iter().zip(&self.owner).filter(move |(_, &o)| o == k).map(|(p, _)| *p)
    }
}

/// Random orbits from every grid point, clustered and saturated into
/// candidate minimal sets, each with its period, cyclic parts, certified
/// capture neighborhood and contraction ratio.
pub fn discover_minimal_sets(
    dist: &MapDistribution,
    params: &FiltrationParams,
    grid: &[C2Point],
    disc: &DiscoveryParams,
    seed: SequenceSeed,
) -> Result<Discovery> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("discovery grid is empty".into()));
    }
    if disc.burn_in < 1000 {
        return Err(Error::InvalidArgument(format!("burn_in must be >= 1000, got {}", disc.burn_in)));
    }
    if !(disc.cluster_eps > 0.0) {
        return Err(Error::InvalidArgument("cluster_eps must be positive".into()));
    }
    let eps = disc.cluster_eps;
    let records: Vec<OrbitRecord> = grid
        .par_iter()
        .enumerate()
        .map(|(i, z)| record_orbit(&Sampled::new(dist, seed.child(i as u64)), *z, params.r, disc.burn_in, disc.n_record))
        .collect();
    let escaped_orbits = records.iter().filter(|r| matches!(r, OrbitRecord::Escaped)).count();
    let pooled: Vec<C2Point> = records
        .into_iter()
        .filter_map(|r| match r {
            OrbitRecord::Recorded(v) => Some(v),
            OrbitRecord::Escaped => None,
        })
        .flatten()
        .collect();
    let pooled = thin(&pooled, eps / 2.0);
    let clusters = single_linkage(&pooled, eps);

    let support = dist.support_sample(disc.support_samples, seed.child(u64::MAX));
    let mut nonconvergent = Vec::new();
    let mut net = SaturationNet::new(eps / 2.0, clusters.len());
    let mut links = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        let cloud: Vec<C2Point> = c.iter().map(|&i| pooled[i]).collect();
        if !net.saturate(ci, &cloud, &support, params.r, &mut links) {
            nonconvergent.push(ci);
        }
    }
    let closed: Vec<usize> = (0..clusters.len()).filter(|&k| net.state[k] == NetState::Closed).collect();
    let saturated: Vec<Vec<C2Point>> = closed.iter().map(|&k| net.cloud_of(k).collect()).collect();

    // Clusters whose saturations touch are the same minimal set.
    let slot: HashMap<usize, usize> = closed.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let mut uf = UnionFind::new(saturated.len());
    for (a, b) in links {
        if let (Some(&i), Some(&j)) = (slot.get(&a), slot.get(&b)) {
            uf.union(i, j);
        }
    }
    let owner: Vec<usize> = saturated.iter().enumerate().flat_map(|(k, s)| std::iter::repeat(k).take(s.len())).collect();
    let all: Vec<C2Point> = saturated.iter().flatten().copied().collect();
    for comp in single_linkage(&all, eps) {
        for w in comp.windows(2) {
            uf.union(owner[w[0]], owner[w[1]]);
        }
    }
    let mut merged: Vec<Vec<C2Point>> = Vec::new();
    for group in uf.components() {
        merged.push(group.iter().flat_map(|&k| saturated[k].iter().copied()).collect());
    }

    let mut descriptors: Vec<MinimalSetDescriptor> = Vec::new();
    for (id, cloud) in merged.into_iter().enumerate() {
        let mut d = MinimalSetDescriptor {
            id: MinSetId::Finite(id),
            cloud,
            period: 1,
            parts: Vec::new(),
            hulls: Vec::new(),
            capture_radius: 0.0,
            contraction: 0.0,
        };
        let comps = single_linkage(&d.cloud, eps);
        d.hulls = comps.iter().map(|c| Ball::hull(&c.iter().map(|&i| d.cloud[i]).collect::<Vec<_>>())).collect();
        d.parts = vec![(0..d.cloud.len()).collect()];
        match period_digraph(&d, &support, eps, eps) {
            Ok((period, parts)) => {
                d.period = period;
                d.parts = parts;
            }
            Err(Error::NotMinimal) => nonconvergent.push(id),
            Err(e) => return Err(e),
        }
        descriptors.push(d);
    }

    assign_capture_radii(&mut descriptors, dist, params, eps, seed.child(PROBE_SEED_TAG));
    for d in descriptors.iter_mut() {
        let rep = certify_attracting(dist, d, params, disc.certify_probes, disc.certify_steps, seed.child(id_tag(d.id)))?;
        d.contraction = rep.ratio;
    }
    descriptors.push(MinimalSetDescriptor::infinity());
    Ok(Discovery { descriptors, escaped_orbits, nonconvergent })
}

fn id_tag(id: MinSetId) -> u64 {
    match id {
        MinSetId::Finite(i) => 0x1000 + i as u64,
        MinSetId::Infinity => 0x0FFF,
    }
}

/// Largest margin (halving from a generous start) whose neighborhood is
/// disjoint from the others and from which every probe orbit is captured.
fn assign_capture_radii(
    descriptors: &mut [MinimalSetDescriptor],
    dist: &MapDistribution,
    params: &FiltrationParams,
    eps: f64,
    seed: SequenceSeed,
) {
    let n = descriptors.len();
    for k in 0..n {
        let mut gap = f64::INFINITY;
        for j in 0..n {
            if j != k {
                gap = gap.min(descriptors[k].neighborhood_gap(&descriptors[j]));
            }
        }
        let scale = descriptors[k].hulls.iter().map(|b| b.radius).fold(0.0, f64::max);
        let mut margin = (4.0 * eps).max(0.5 * scale).min(0.45 * gap).min(0.25 * params.r);
        let mut accepted = false;
        for _ in 0..10 {
            descriptors[k].capture_radius = margin;
            if capture_holds(&descriptors[k], dist, params, seed.child(k as u64)) {
                accepted = true;
                break;
            }
            margin /= 2.0;
        }
        if !accepted {
            descriptors[k].capture_radius = margin;
        }
    }
}

fn capture_holds(d: &MinimalSetDescriptor, dist: &MapDistribution, params: &FiltrationParams, seed: SequenceSeed) -> bool {
    const PROBES: u64 = 64;
    const HORIZON: usize = 400;
    (0..PROBES).into_par_iter().all(|k| {
        let mut rng = stream_rng(seed.master_seed, seed.stream_id, k);
        let z = d.probe(&mut rng);
        let seq = Sampled::new(dist, seed.child(k));
        let mut z = z;
        let mut streak = 0;
        for n in 0..HORIZON {
            if in_v_plus(z, params.r) || !z.is_finite() {
                return false;
            }
            if d.captures(z) {
                streak += 1;
                if streak >= CAPTURE_STEPS {
                    return true;
                }
            } else {
                streak = 0;
            }
            z = seq.map_at(n).apply(z);
        }
        false
    })
}

/// Period of the sub-cluster transition digraph and the induced cyclic
/// classes. Nodes are the `node_eps`-components of the cloud; `u → v` when a
/// support map sends a point of `u` within `link_eps` of `v`'s hull.
fn period_digraph(
    d: &MinimalSetDescriptor,
    maps: &[HenonMap],
    node_eps: f64,
    link_eps: f64,
) -> Result<(usize, Vec<Vec<usize>>)> {
    let comps = single_linkage(&d.cloud, node_eps);
    let hulls: Vec<Ball> = comps.iter().map(|c| Ball::hull(&c.iter().map(|&i| d.cloud[i]).collect::<Vec<_>>())).collect();
    let m = comps.len();
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (u, comp) in comps.iter().enumerate() {
        let mut targets = Vec::new();
        for &i in comp {
            for h in maps {
                let q = h.apply(d.cloud[i]);
                let best = (0..m)
                    .map(|v| (v, q.distance(&hulls[v].center) - hulls[v].radius))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((v, gap)) = best {
                    if gap <= link_eps {
                        targets.push(v);
                    }
                }
            }
        }
        targets.sort_unstable();
        targets.dedup();
        edges[u] = targets;
    }
    let (period, class) = digraph_period(&edges)?;
    let mut parts = vec![Vec::new(); period];
    for (u, comp) in comps.iter().enumerate() {
        parts[class[u]].extend(comp.iter().copied());
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok((period, parts))
}

/// Period (gcd of cycle lengths) of a strongly connected digraph, and the
/// cyclic class of every node. `NOT_MINIMAL` if not strongly connected.
pub fn digraph_period(edges: &[Vec<usize>]) -> Result<(usize, Vec<usize>)> {
    let m = edges.len();
    if m == 0 {
        return Err(Error::NotMinimal);
    }
    let bfs = |adj: &Vec<Vec<usize>>| {
        let mut level = vec![usize::MAX; m];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let level = bfs(&edges.to_vec());
    let mut reverse = vec![Vec::new(); m];
    for (u, vs) in edges.iter().enumerate() {
        for &v in vs {
            reverse[v].push(u);
        }
    }
    let back = bfs(&reverse);
    if level.iter().chain(back.iter()).any(|&l| l == usize::MAX) {
        return Err(Error::NotMinimal);
    }
    let mut g: i64 = 0;
    for (u, vs) in edges.iter().enumerate() {
        for &v in vs {
            g = gcd(g, level[u] as i64 + 1 - level[v] as i64);
        }
    }
    let period = g.unsigned_abs().max(1) as usize;
    Ok((period, level.iter().map(|l| l % period).collect()))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Cyclic period `r_L` of a finite descriptor, with `parts` rebuilt from the
/// cyclic classes. `resolution` divides the cluster radius used to split the
/// cloud into digraph nodes (1 = discovery resolution).
pub fn detect_period(
    dist: &MapDistribution,
    d: &mut MinimalSetDescriptor,
    cluster_eps: f64,
    resolution: usize,
    seed: SequenceSeed,
) -> Result<usize> {
    if !d.is_finite() {
        return Err(Error::InvalidArgument("detect_period needs a finite minimal set".into()));
    }
    let maps = dist.support_sample(SUPPORT_SAMPLES, seed);
    let node_eps = cluster_eps / resolution.max(1) as f64;
    let (period, parts) = period_digraph(d, &maps, node_eps, cluster_eps)?;
    d.period = period;
    d.parts = parts;
    Ok(period)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `max over pairs of (d_n/d_0)^{1/n}`; infinite if a probe escaped.
    pub ratio: f64,
    pub certified: bool,
    pub pairs_used: usize,
}

/// Tracks probe pairs from the capture neighborhood under shared random
/// sequences.
pub fn certify_attracting(
    dist: &MapDistribution,
    d: &MinimalSetDescriptor,
    params: &FiltrationParams,
    probes: usize,
    n: usize,
    seed: SequenceSeed,
) -> Result<ContractionReport> {
    if !d.is_finite() || d.hulls.is_empty() {
        return Err(Error::InvalidArgument("certify_attracting needs a finite minimal set".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("certification horizon must be positive".into()));
    }
    let ratios: Vec<Option<f64>> = (0..probes as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed.master_seed, seed.stream_id ^ PROBE_SEED_TAG, k);
            let (mut p, mut q) = (d.probe(&mut rng), d.probe(&mut rng));
            let d0 = p.distance(&q);
            if d0 < 1e-12 {
                return None;
            }
            let seq = Sampled::new(dist, seed.child(k));
            // Pairs that merge to round-off are measured at the merge step.
            let floor = 1e-9 * (1.0 + p.norm());
            let mut steps = n;
            for i in 0..n {
                if in_v_plus(p, params.r) || in_v_plus(q, params.r) || !p.is_finite() || !q.is_finite() {
                    return Some(f64::INFINITY);
                }
                let f = seq.map_at(i);
                p = f.apply(p);
                q = f.apply(q);
                if p.distance(&q) < floor {
                    steps = i + 1;
                    break;
                }
            }
            let dn = p.distance(&q);
            Some(if dn.is_finite() { (dn / d0).powf(1.0 / steps as f64) } else { f64::INFINITY })
        })
        .collect();
    let used: Vec<f64> = ratios.into_iter().flatten().collect();
    let ratio = used.iter().copied().fold(0.0, f64::max);
    Ok(ContractionReport { ratio, certified: !used.is_empty() && ratio < 1.0 - 1e-3, pairs_used: used.len() })
}

/// Fate of one orbit against a set of descriptors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fate {
    Captured(MinSetId),
    Unresolved,
}

/// Minimal sets together with the escape radius, answering "where does this
/// orbit go".
#[derive(Clone, Debug)]
pub struct BasinClassifier<'a> {
    pub minsets: &'a [MinimalSetDescriptor],
    pub params: FiltrationParams,
}

impl<'a> BasinClassifier<'a> {
    pub fn new(minsets: &'a [MinimalSetDescriptor], params: FiltrationParams) -> Result<Self> {
        let finite: Vec<&MinimalSetDescriptor> = minsets.iter().filter(|d| d.is_finite()).collect();
        for (i, a) in finite.iter().enumerate() {
            for b in &finite[i + 1..] {
                if a.neighborhood_gap(b) <= a.capture_radius + b.capture_radius {
                    return Err(Error::AmbiguousCapture(format!("neighborhoods of {} and {} overlap", a.id, b.id)));
                }
            }
        }
        Ok(Self { minsets, params })
    }

    /// The descriptor whose region contains `z` right now, if any.
    pub fn locate(&self, z: C2Point) -> Result<Option<MinSetId>> {
        if in_v_plus(z, self.params.r) || !z.is_finite() {
            return Ok(Some(MinSetId::Infinity));
        }
        let mut hit = None;
        for d in self.minsets.iter().filter(|d| d.is_finite()) {
            if d.captures(z) {
                if hit.is_some() {
                    return Err(Error::AmbiguousCapture(z.to_string()));
                }
                hit = Some(d.id);
            }
        }
        Ok(hit)
    }

    /// Follows one orbit for at most `max_iter` steps.
    pub fn fate<S: MapSequence + ?Sized>(&self, seq: &S, z: C2Point, max_iter: usize) -> Result<Fate> {
        let mut z = z;
        let mut current: Option<MinSetId> = None;
        let mut streak = 0;
        for n in 0..=max_iter {
            match self.locate(z)? {
                Some(MinSetId::Infinity) => return Ok(Fate::Captured(MinSetId::Infinity)),
                Some(id) => {
                    streak = if current == Some(id) { streak + 1 } else { 1 };
                    current = Some(id);
                    if streak >= CAPTURE_STEPS {
                        return Ok(Fate::Captured(id));
                    }
                }
                None => {
                    current = None;
                    streak = 0;
                }
            }
            if n < max_iter {
                z = seq.map_at(n).apply(z);
            }
        }
        Ok(Fate::Unresolved)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub probabilities: BTreeMap<MinSetId, f64>,
    pub counts: BTreeMap<MinSetId, usize>,
    pub samples: usize,
    pub unresolved: f64,
    pub unresolved_count: usize,
}

impl BasinEstimate {
    pub fn probability(&self, id: MinSetId) -> f64 {
        self.probabilities.get(&id).copied().unwrap_or(0.0)
    }

    /// Binomial standard error of `probability(id)`.
    pub fn std_error(&self, id: MinSetId) -> f64 {
        let p = self.probability(id);
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

/// Monte-Carlo `T_{L,τ}(z)` for every descriptor.
pub fn estimate_tl(
    dist: &MapDistribution,
    minsets: &[MinimalSetDescriptor],
    params: &FiltrationParams,
    z: C2Point,
    samples: usize,
    max_iter: usize,
    seed: SequenceSeed,
) -> Result<BasinEstimate> {
    if samples < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {samples}")));
    }
    let classifier = BasinClassifier::new(minsets, *params)?;
    let fates: Vec<Fate> = (0..samples as u64)
        .into_par_iter()
        .map(|k| classifier.fate(&Sampled::new(dist, seed.child(k)), z, max_iter))
        .collect::<Result<_>>()?;
    Ok(tally(minsets, &fates))
}

pub(crate) fn tally(minsets: &[MinimalSetDescriptor], fates: &[Fate]) -> BasinEstimate {
    let mut counts: BTreeMap<MinSetId, usize> = minsets.iter().map(|d| (d.id, 0)).collect();
    counts.entry(MinSetId::Infinity).or_insert(0);
    let mut unresolved_count = 0;
    for f in fates {
        match f {
            Fate::Captured(id) => *counts.entry(*id).or_insert(0) += 1,
            Fate::Unresolved => unresolved_count += 1,
        }
    }
    let s = fates.len() as f64;
    BasinEstimate {
        probabilities: counts.iter().map(|(k, &c)| (*k, c as f64 / s)).collect(),
        counts,
        samples: fates.len(),
        unresolved: unresolved_count as f64 / s,
        unresolved_count,
    }
}

/// Descriptors whose capture neighborhoods intersect (should be empty).
pub fn overlapping_pairs(minsets: &[MinimalSetDescriptor]) -> Vec<(MinSetId, MinSetId)> {
    let finite: Vec<&MinimalSetDescriptor> = minsets.iter().filter(|d| d.is_finite()).collect();
    let mut out = Vec::new();
    for (i, a) in finite.iter().enumerate() {
        for b in &finite[i + 1..] {
            if a.neighborhood_gap(b) <= a.capture_radius + b.capture_radius {
                out.push((a.id, b.id));
            }
        }
    }
    out
}

/// Cloud points deduplicated into a set of cells, used by tests comparing
/// clouds.
pub fn cloud_cells(cloud: &[C2Point], cell: f64) -> HashSet<[i64; 4]> {
    let g = Grid4::new(cell);
    cloud.iter().map(|p| g.key(p)).collect()
}
