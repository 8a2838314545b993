//! The transition operator `M_τ φ(z) = E_{f∼τ} φ(f(z))`: evaluation,
//! iteration, convergence-rate fits toward `T_L`, and the weight derivative
//! of `T_L` as a Neumann series with a finite-difference oracle.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{FiniteDist, MapDistribution, SequenceSeed};
use crate::error::{Error, Result};
use crate::map::{in_v_plus, C2Point, FiltrationParams, HenonMap};
use crate::minsets::{estimate_tl, BasinClassifier, Fate, MinSetId, MinimalSetDescriptor, CAPTURE_STEPS};
use crate::rng::stream_rng;
use crate::sequence::{MapSequence, Sampled};

/// Default word budget for exact tree expansion.
pub const TREE_BUDGET: u64 = 1_000_000;
/// Sequence samples used when the tree is too large.
pub const MC_SEQUENCES: usize = 100_000;
/// Series terms allowed before giving up on decay.
pub const MAX_SERIES_TERMS: usize = 200;

/// Bounded scalar observable on `ℂ²`.
#[derive(Clone)]
pub struct TestFunction {
    eval: Arc<dyn Fn(C2Point) -> f64 + Send + Sync>,
    pub description: String,
    /// Declared bound on `|φ|`.
    pub bound: f64,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction").field("description", &self.description).field("bound", &self.bound).finish()
    }
}

impl TestFunction {
    pub fn new(description: impl Into<String>, bound: f64, eval: impl Fn(C2Point) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), description: description.into(), bound }
    }

    pub fn eval(&self, z: C2Point) -> f64 {
        (self.eval)(z)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant {c}"), c.abs(), move |_| c)
    }

    /// `Re x`, clipped to `[-bound, bound]`.
    pub fn re_x(bound: f64) -> Self {
        Self::new("Re x", bound, move |z| z.x.re.clamp(-bound, bound))
    }

    /// Smooth bump `exp(−|z − c|²/s²)`.
    pub fn gaussian_bump(center: C2Point, scale: f64) -> Self {
        Self::new(format!("gaussian bump at {center}, scale {scale}"), 1.0, move |z| {
            let d = z.distance(&center) / scale;
            (-d * d).exp()
        })
    }

    /// Separator for `L`: 1 on the cloud hulls, falling linearly to 0 at
    /// distance `capture_radius`, hence 0 on every other capture neighborhood.
    pub fn separator(l: &MinimalSetDescriptor) -> Result<Self> {
        if !l.is_finite() || l.hulls.is_empty() || !(l.capture_radius > 0.0) {
            return Err(Error::InvalidArgument("separator needs a finite minimal set with a capture radius".into()));
        }
        let hulls = l.hulls.clone();
        let ramp = l.capture_radius;
        Ok(Self::new(format!("separator of minimal set {}", l.id), 1.0, move |z| {
            let d = hulls.iter().map(|b| (z.distance(&b.center) - b.radius).max(0.0)).fold(f64::INFINITY, f64::min);
            (1.0 - d / ramp).clamp(0.0, 1.0)
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MEstimate {
    pub value: f64,
    /// Zero for exact evaluations.
    pub std_error: f64,
    pub exact: bool,
}

impl MEstimate {
    fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0, exact: true }
    }
}

/// One application of `M_τ` at `z`.
pub fn apply_m(dist: &MapDistribution, phi: &TestFunction, z: C2Point, mc_samples: usize, seed: SequenceSeed) -> Result<MEstimate> {
    match dist {
        MapDistribution::Finite(f) => {
            Ok(MEstimate::exact(f.maps().iter().zip(f.weights()).map(|(h, w)| w * phi.eval(h.apply(z))).sum()))
        }
        MapDistribution::Ball(_) => {
            if mc_samples < 2 {
                return Err(Error::InvalidArgument("need at least 2 Monte-Carlo samples".into()));
            }
            let vals: Vec<f64> =
                (0..mc_samples as u64).into_par_iter().map(|k| phi.eval(dist.sample_map(seed.child(k), 0).apply(z))).collect();
            let (mean, var) = mean_var(&vals);
            Ok(MEstimate { value: mean, std_error: (var / vals.len() as f64).sqrt(), exact: false })
        }
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var)
}

fn finite_of(dist: &MapDistribution) -> Result<&FiniteDist> {
    dist.as_finite().ok_or(Error::UnsupportedKind("ball-noise"))
}

/// `M_τⁿ φ(z)` for a finite distribution: exact tree sum over all `mⁿ`
/// words when that is at most `budget`, stratified Monte Carlo over the first
/// map otherwise.
pub fn iterate_m(
    dist: &MapDistribution,
    phi: &TestFunction,
    z: C2Point,
    n: usize,
    budget: u64,
    seed: SequenceSeed,
) -> Result<MEstimate> {
    let fin = finite_of(dist)?;
    let m = fin.maps().len();
    if words_within(m, n, budget) {
        return Ok(MEstimate::exact(tree_sum(fin, phi, z, n)));
    }
    Ok(stratified(dist, fin, phi, z, n, MC_SEQUENCES, seed))
}

fn words_within(m: usize, n: usize, budget: u64) -> bool {
    m == 1 || (m as f64).powi(n as i32) <= budget as f64
}

fn tree_sum(fin: &FiniteDist, phi: &TestFunction, z: C2Point, n: usize) -> f64 {
    let maps = fin.maps();
    if maps.len() == 1 {
        let mut z = z;
        for _ in 0..n {
            z = maps[0].apply(z);
        }
        return phi.eval(z);
    }
    if n == 0 {
        return phi.eval(z);
    }
    let branches: Vec<f64> = maps.par_iter().map(|h| tree_rec(maps, fin.weights(), phi, h.apply(z), n - 1)).collect();
    branches.iter().zip(fin.weights()).map(|(b, w)| w * b).sum()
}

fn tree_rec(maps: &[HenonMap], weights: &[f64], phi: &TestFunction, z: C2Point, n: usize) -> f64 {
    if n == 0 {
        return phi.eval(z);
    }
    maps.iter().zip(weights).map(|(h, w)| w * tree_rec(maps, weights, phi, h.apply(z), n - 1)).sum()
}

/// Sample counts per first-map stratum, proportional to the weights.
fn allocation(weights: &[f64], total: usize) -> Vec<usize> {
    weights.iter().map(|w| ((w * total as f64).round() as usize).max(2)).collect()
}

fn stratified(dist: &MapDistribution, fin: &FiniteDist, phi: &TestFunction, z: C2Point, n: usize, total: usize, seed: SequenceSeed) -> MEstimate {
    let alloc = allocation(fin.weights(), total);
    let mut value = 0.0;
    let mut var = 0.0;
    for (j, (&count, &w)) in alloc.iter().zip(fin.weights()).enumerate() {
        let first = fin.maps()[j].apply(z);
        let vals: Vec<f64> = (0..count as u64)
            .into_par_iter()
            .map(|k| {
                let seq = Sampled::new(dist, seed.child(((j as u64) << 40) | k));
                let mut p = first;
                for i in 0..n - 1 {
                    p = seq.map_at(i).apply(p);
                }
                phi.eval(p)
            })
            .collect();
        let (mean, v) = mean_var(&vals);
        value += w * mean;
        var += w * w * v / count as f64;
    }
    MEstimate { value, std_error: var.sqrt(), exact: false }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `exp(slope)` of the fitted line through `(n, log e_n)`.
    pub lambda_hat: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Inclusive resolvable range actually fitted.
    pub n_range: (usize, usize),
    /// `e_n` for each `n` of `n_range`.
    pub sup_errors: Vec<f64>,
    /// Errors for the whole requested range, including unresolved ones.
    pub all_errors: Vec<(usize, f64)>,
    /// Error floor below which `e_n` is not trusted.
    pub floor: f64,
    /// `r_squared ≥ 0.9`.
    pub rate_reported: bool,
}

/// Settings for [`fit_convergence_rate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFitParams {
    pub n_min: usize,
    pub n_max: usize,
    pub tl_samples: usize,
    pub tl_max_iter: usize,
    pub budget: u64,
}

/// Sup-norm decay of `M_τⁿ φ_L − T_L` over `test_points` and its fitted
/// geometric rate.
pub fn fit_convergence_rate(
    dist: &MapDistribution,
    minsets: &[MinimalSetDescriptor],
    l: &MinimalSetDescriptor,
    params: &FiltrationParams,
    test_points: &[C2Point],
    fit: &RateFitParams,
    seed: SequenceSeed,
) -> Result<RateFit> {
    let phi = TestFunction::separator(l)?;
    fit_with_function(dist, minsets, l.id, &phi, params, test_points, fit, seed)
}

/// [`fit_convergence_rate`] for an arbitrary observable `phi` compared
/// against `T_target`.
#[allow(clippy::too_many_arguments)]
pub fn fit_with_function(
    dist: &MapDistribution,
    minsets: &[MinimalSetDescriptor],
    target: MinSetId,
    phi: &TestFunction,
    params: &FiltrationParams,
    test_points: &[C2Point],
    fit: &RateFitParams,
    seed: SequenceSeed,
) -> Result<RateFit> {
    if test_points.is_empty() || fit.n_max < fit.n_min {
        return Err(Error::InvalidArgument("need test points and a nonempty n range".into()));
    }
    let mut tl = Vec::with_capacity(test_points.len());
    let mut floor: f64 = 1e-12;
    for (k, z) in test_points.iter().enumerate() {
        let est = estimate_tl(dist, minsets, params, *z, fit.tl_samples, fit.tl_max_iter, seed.child(k as u64))?;
        floor = floor.max(10.0 * (est.std_error(target) + est.unresolved));
        tl.push(est.probability(target));
    }
    let mut all_errors = Vec::new();
    for n in fit.n_min..=fit.n_max {
        let mut e: f64 = 0.0;
        for (k, z) in test_points.iter().enumerate() {
            let m = iterate_m(dist, phi, *z, n, fit.budget, seed.child(0x4D00 + k as u64))?;
            e = e.max((m.value - tl[k]).abs() + m.std_error);
        }
        all_errors.push((n, e));
    }
    // The resolvable regime is the leading run of errors above the floor.
    let resolved: Vec<(usize, f64)> = all_errors.iter().copied().take_while(|&(_, e)| e > floor).collect();
    if resolved.len() < 3 {
        return Err(Error::RateUnresolved);
    }
    let xs: Vec<f64> = resolved.iter().map(|&(n, _)| n as f64).collect();
    let ys: Vec<f64> = resolved.iter().map(|&(_, e)| e.ln()).collect();
    let (slope, intercept, r_squared) = least_squares(&xs, &ys);
    Ok(RateFit {
        lambda_hat: slope.exp(),
        slope,
        intercept,
        r_squared,
        n_range: (resolved[0].0, resolved[resolved.len() - 1].0),
        sup_errors: resolved.iter().map(|&(_, e)| e).collect(),
        all_errors,
        floor,
        rate_reported: r_squared >= 0.9,
    })
}

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b, R²)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (a, b, r2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeParams {
    /// Stop after three consecutive terms with bound below this.
    pub eps_trunc: f64,
    /// Words per level expanded exactly before switching to sampled orbits.
    pub tree_budget: u64,
    /// Continuation pairs per `ζ` evaluation at tree nodes.
    pub zeta_samples: usize,
    /// Outer orbits in the sampled regime.
    pub outer_samples: usize,
    pub max_iter: usize,
}

impl Default for DerivativeParams {
    fn default() -> Self {
        Self { eps_trunc: 1e-3, tree_budget: 1024, zeta_samples: 256, outer_samples: 20_000, max_iter: 2000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Per-term values of `M_τⁿ ζ(z)`.
    pub terms: Vec<f64>,
    /// Per-term magnitude bounds (unresolved mass).
    pub bounds: Vec<f64>,
    /// Terms computed by exact word expansion.
    pub tree_terms: usize,
}

/// Orbit node carried through the series: point, weight, and the capture
/// streak used to decide when the node's subtree contributes nothing.
#[derive(Clone, Copy)]
struct Node {
    z: C2Point,
    weight: f64,
    streak_id: Option<MinSetId>,
    streak: usize,
    word: u64,
}

impl Node {
    fn resolved(&self) -> bool {
        self.streak_id == Some(MinSetId::Infinity) || self.streak >= CAPTURE_STEPS
    }

    fn advance(&mut self, classifier: &BasinClassifier<'_>) -> Result<()> {
        match classifier.locate(self.z)? {
            Some(id) => {
                self.streak = if self.streak_id == Some(id) { self.streak + 1 } else { 1 };
                self.streak_id = Some(id);
            }
            None => {
                self.streak = 0;
                self.streak_id = None;
            }
        }
        Ok(())
    }
}

/// `∂T_L/∂b_i` along `b_i − b_{m−1}` (the last map is the reference map) as
/// `Σ_n M_τⁿ ζ(z)`, `ζ(w) = T_L(h_i w) − T_L(h_{m−1} w)`.
///
/// Levels with at most `tree_budget` unresolved words are expanded exactly;
/// `ζ` is then estimated from continuation pairs sharing random numbers.
/// Past that, the series is carried by sampled outer orbits. Nodes captured
/// for 20 steps or inside `V_R⁺` contribute `ζ = 0` from then on.
#[allow(clippy::too_many_arguments)]
pub fn weight_derivative_tl(
    dist: &MapDistribution,
    minsets: &[MinimalSetDescriptor],
    target: MinSetId,
    params: &FiltrationParams,
    i: usize,
    z: C2Point,
    dp: &DerivativeParams,
    seed: SequenceSeed,
) -> Result<DerivativeEstimate> {
    let fin = finite_of(dist)?;
    let m = fin.maps().len();
    if m < 2 || i >= m - 1 {
        return Err(Error::InvalidArgument(format!("map index {i} must be below the reference index {}", m - 1)));
    }
    let classifier = BasinClassifier::new(minsets, *params)?;
    let (hi, hm) = (fin.maps()[i], fin.maps()[m - 1]);
    if hi == hm {
        return Ok(DerivativeEstimate { value: 0.0, std_error: 0.0, terms: vec![0.0], bounds: vec![0.0], tree_terms: 0 });
    }
    let zeta_ctx = ZetaContext { dist, classifier: &classifier, target, hi, hm, max_iter: dp.max_iter };

    let mut terms = Vec::new();
    let mut bounds = Vec::new();
    let mut variance = 0.0;
    let mut quiet = 0;

    // Exact word expansion.
    let mut level = vec![Node { z, weight: 1.0, streak_id: None, streak: 0, word: 0 }];
    for nd in level.iter_mut() {
        nd.advance(&classifier)?;
    }
    let mut n = 0usize;
    while level.len() as u64 <= dp.tree_budget && n < MAX_SERIES_TERMS {
        let live: Vec<Node> = level.iter().copied().filter(|nd| !nd.resolved()).collect();
        let bound: f64 = live.iter().map(|nd| nd.weight).sum();
        let zetas: Vec<(f64, f64)> = live
            .par_iter()
            .map(|nd| zeta_ctx.estimate(nd.z, dp.zeta_samples, seed.child(mix(n as u64, nd.word))))
            .collect::<Result<_>>()?;
        terms.push(live.iter().zip(&zetas).map(|(nd, (v, _))| nd.weight * v).sum());
        variance += live.iter().zip(&zetas).map(|(nd, (_, s))| (nd.weight * s).powi(2)).sum::<f64>();
        bounds.push(bound);
        n += 1;
        quiet = if bound < dp.eps_trunc { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return Ok(finish(terms, bounds, variance, n));
        }
        let mut next = Vec::with_capacity(live.len() * m);
        for nd in &live {
            for (j, (h, w)) in fin.maps().iter().zip(fin.weights()).enumerate() {
                let mut c = Node { z: h.apply(nd.z), weight: nd.weight * w, word: nd.word * m as u64 + j as u64 + 1, ..*nd };
                c.advance(&classifier)?;
                next.push(c);
            }
        }
        level = next;
    }
    let tree_terms = n;
    let tree_variance = variance;

    // Sampled continuation of the remaining levels. Each outer orbit starts
    // from a node of the current level drawn proportionally to weight.
    let total: f64 = level.iter().map(|nd| nd.weight).sum();
    let cdf: Vec<f64> = level
        .iter()
        .scan(0.0, |acc, nd| {
            *acc += nd.weight / total;
            Some(*acc)
        })
        .collect();
    let k_outer = dp.outer_samples.max(2);
    let horizon = MAX_SERIES_TERMS - n;
    let outer: Vec<Vec<f64>> = (0..k_outer as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.child(0x5EED_0000_0000 + k);
            let mut rng = stream_rng(s.master_seed, s.stream_id, u64::MAX);
            let u: f64 = rng.random();
            let pick = cdf.partition_point(|&c| c < u).min(level.len() - 1);
            let mut nd = level[pick];
            let seq = Sampled::new(dist, s);
            let mut contributions = Vec::new();
            for step in 0..horizon {
                if nd.resolved() {
                    break;
                }
                let (v, _) = zeta_ctx.estimate(nd.z, 1, s.child(step as u64))?;
                contributions.push(v);
                nd.z = seq.map_at(step).apply(nd.z);
                nd.advance(&classifier)?;
            }
            Ok(contributions)
        })
        .collect::<Result<_>>()?;
    let mut stalled = true;
    for step in 0..horizon {
        let vals: Vec<f64> = outer.iter().map(|c| c.get(step).copied().unwrap_or(0.0) * total).collect();
        let live = outer.iter().filter(|c| c.len() > step).count() as f64 / k_outer as f64 * total;
        terms.push(vals.iter().sum::<f64>() / k_outer as f64);
        bounds.push(live);
        quiet = if live < dp.eps_trunc { quiet + 1 } else { 0 };
        if quiet >= 3 {
            stalled = false;
            break;
        }
    }
    if stalled {
        return Err(Error::SeriesStall(MAX_SERIES_TERMS));
    }
    // Terms from the same outer orbits are correlated; the per-orbit sums
    // give the error of the sampled part.
    let sums: Vec<f64> = outer.iter().map(|c| c.iter().sum::<f64>() * total).collect();
    let (_, var_sum) = mean_var(&sums);
    Ok(finish(terms, bounds, tree_variance + var_sum / k_outer as f64, tree_terms))
}

fn finish(terms: Vec<f64>, bounds: Vec<f64>, variance: f64, tree_terms: usize) -> DerivativeEstimate {
    DerivativeEstimate { value: terms.iter().sum(), std_error: variance.sqrt(), terms, bounds, tree_terms }
}

fn mix(a: u64, b: u64) -> u64 {
    crate::rng::mix64(a ^ crate::rng::mix64(b))
}

struct ZetaContext<'a> {
    dist: &'a MapDistribution,
    classifier: &'a BasinClassifier<'a>,
    target: MinSetId,
    hi: HenonMap,
    hm: HenonMap,
    max_iter: usize,
}

impl ZetaContext<'_> {
    /// Mean and standard error of `1{h_i w → L} − 1{h_m w → L}` over
    /// `samples` continuation pairs sharing random sequences.
    fn estimate(&self, w: C2Point, samples: usize, seed: SequenceSeed) -> Result<(f64, f64)> {
        let (a, b) = (self.hi.apply(w), self.hm.apply(w));
        if in_v_plus(a, self.classifier.params.r) && in_v_plus(b, self.classifier.params.r) {
            return Ok((0.0, 0.0));
        }
        let mut vals = Vec::with_capacity(samples);
        for k in 0..samples as u64 {
            let seq = Sampled::new(self.dist, seed.child(k));
            let fa = self.classifier.fate(&seq, a, self.max_iter)?;
            let fb = self.classifier.fate(&seq, b, self.max_iter)?;
            let ind = |f: Fate| f64::from(u8::from(f == Fate::Captured(self.target)));
            vals.push(ind(fa) - ind(fb));
        }
        let (mean, var) = mean_var(&vals);
        Ok((mean, (var / samples as f64).sqrt()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdEstimate {
    pub value: f64,
    pub std_error: f64,
    pub h: f64,
}

/// Central difference `(T_L(b + h(e_i − e_{m−1})) − T_L(b − h(e_i − e_{m−1})))/2h`
/// under common random numbers: both weightings read the same uniform
/// variates, so only draws near a cdf breakpoint differ.
#[allow(clippy::too_many_arguments)]
pub fn fd_derivative_tl(
    dist: &MapDistribution,
    minsets: &[MinimalSetDescriptor],
    target: MinSetId,
    params: &FiltrationParams,
    i: usize,
    z: C2Point,
    h: f64,
    samples: usize,
    max_iter: usize,
    seed: SequenceSeed,
) -> Result<FdEstimate> {
    let fin = finite_of(dist)?;
    let m = fin.maps().len();
    if m < 2 || i >= m - 1 {
        return Err(Error::InvalidArgument(format!("map index {i} must be below the reference index {}", m - 1)));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step h must be positive".into()));
    }
    let shifted = |sign: f64| -> Result<MapDistribution> {
        let mut w = fin.weights().to_vec();
        w[i] += sign * h;
        w[m - 1] -= sign * h;
        if w.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::InvalidArgument(format!("weights {w:?} leave the open simplex")));
        }
        dist.reweighted(w)
    };
    let (plus, minus) = (shifted(1.0)?, shifted(-1.0)?);
    let classifier = BasinClassifier::new(minsets, *params)?;
    let diffs: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let s = seed.child(k);
            let a = classifier.fate(&Sampled::new(&plus, s), z, max_iter)?;
            let b = classifier.fate(&Sampled::new(&minus, s), z, max_iter)?;
            let ind = |f: Fate| f64::from(u8::from(f == Fate::Captured(target)));
            Ok(ind(a) - ind(b))
        })
        .collect::<Result<_>>()?;
    let (mean, var) = mean_var(&diffs);
    Ok(FdEstimate { value: mean / (2.0 * h), std_error: (var / samples as f64).sqrt() / (2.0 * h), h })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_maps() -> (HenonMap, HenonMap) {
        (HenonMap::real(0.0, 0.1, &[1.0, 0.0, 0.0]).unwrap(), HenonMap::real(0.0, 0.1, &[1.0, 0.0, 0.2]).unwrap())
    }

    fn seed() -> SequenceSeed {
        SequenceSeed::new(9, 0)
    }

    #[test]
    fn constants_are_fixed() {
        let (h1, h2) = two_maps();
        let d = MapDistribution::finite(vec![h1, h2], vec![0.3, 0.7]).unwrap();
        let z = C2Point::from_reals(0.1, 0.0, 0.2, 0.1);
        let phi = TestFunction::constant(2.5);
        assert_eq!(apply_m(&d, &phi, z, 10, seed()).unwrap().value, 2.5);
        assert!((iterate_m(&d, &phi, z, 5, TREE_BUDGET, seed()).unwrap().value - 2.5).abs() < 1e-12);
        let ball = MapDistribution::ball(h1, 0.1).unwrap();
        let e = apply_m(&ball, &phi, z, 100, seed()).unwrap();
        assert_eq!(e.value, 2.5);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn point_mass_is_composition() {
        let (h1, _) = two_maps();
        let d = MapDistribution::point_mass(h1);
        let z = C2Point::from_reals(0.1, 0.0, 0.2, 0.1);
        let phi = TestFunction::re_x(10.0);
        assert_eq!(apply_m(&d, &phi, z, 1, seed()).unwrap().value, h1.apply(z).x.re);
        let three = h1.apply(h1.apply(h1.apply(z)));
        assert_eq!(iterate_m(&d, &phi, z, 3, TREE_BUDGET, seed()).unwrap().value, three.x.re);
    }

    #[test]
    fn two_term_expansion() {
        let (h1, h2) = two_maps();
        let d = MapDistribution::finite(vec![h1, h2], vec![0.25, 0.75]).unwrap();
        let z = C2Point::from_reals(0.3, -0.1, 0.2, 0.4);
        let phi = TestFunction::re_x(10.0);
        let expect = 0.25 * h1.apply(z).x.re + 0.75 * h2.apply(z).x.re;
        assert!((apply_m(&d, &phi, z, 1, seed()).unwrap().value - expect).abs() < 1e-15);
        assert_eq!(iterate_m(&d, &phi, z, 0, TREE_BUDGET, seed()).unwrap().value, phi.eval(z));
        let one = iterate_m(&d, &phi, z, 1, TREE_BUDGET, seed()).unwrap();
        assert!(one.exact && (one.value - expect).abs() < 1e-15);
    }

    #[test]
    fn eight_words_by_hand() {
        let (h1, h2) = two_maps();
        let w = [0.4, 0.6];
        let d = MapDistribution::finite(vec![h1, h2], w.to_vec()).unwrap();
        let z = C2Point::from_reals(0.2, 0.0, 0.3, 0.0);
        let phi = TestFunction::gaussian_bump(C2Point::from_reals(0.1, 0.0, 0.1, 0.0), 0.3);
        let maps = [h1, h2];
        let mut expect = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let p = maps[c].apply(maps[b].apply(maps[a].apply(z)));
                    expect += w[a] * w[b] * w[c] * phi.eval(p);
                }
            }
        }
        let got = iterate_m(&d, &phi, z, 3, TREE_BUDGET, seed()).unwrap();
        assert!(got.exact);
        assert!((got.value - expect).abs() < 1e-14, "{} vs {expect}", got.value);
    }

    #[test]
    fn monte_carlo_agrees_with_tree() {
        let (h1, h2) = two_maps();
        let d = MapDistribution::finite(vec![h1, h2], vec![0.4, 0.6]).unwrap();
        let z = C2Point::from_reals(0.2, 0.0, 0.3, 0.0);
        let phi = TestFunction::gaussian_bump(C2Point::from_reals(0.1, 0.0, 0.1, 0.0), 0.05);
        let exact = iterate_m(&d, &phi, z, 8, TREE_BUDGET, seed()).unwrap();
        let mc = iterate_m(&d, &phi, z, 8, 10, seed()).unwrap();
        assert!(!mc.exact && mc.std_error > 0.0);
        assert!((mc.value - exact.value).abs() <= 4.0 * mc.std_error, "{mc:?} vs {exact:?}");
    }

    #[test]
    fn least_squares_recovers_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 2.0).collect();
        let (a, b, r2) = least_squares(&xs, &ys);
        assert!((a + 0.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_maps_have_zero_derivative() {
        let (h1, _) = two_maps();
        let d = MapDistribution::finite(vec![h1, h1], vec![0.5, 0.5]).unwrap();
        let p = d.filtration(1.0).unwrap();
        let inf = [MinimalSetDescriptor::infinity()];
        let z = C2Point::from_reals(0.0, 0.0, 0.5, 0.0);
        let est = weight_derivative_tl(&d, &inf, MinSetId::Infinity, &p, 0, z, &DerivativeParams::default(), seed()).unwrap();
        assert_eq!(est.value, 0.0);
        let fd = fd_derivative_tl(&d, &inf, MinSetId::Infinity, &p, 0, z, 0.05, 200, 500, seed()).unwrap();
        assert_eq!(fd.value, 0.0);
    }

    #[test]
    fn simplex_violation_rejected() {
        let (h1, h2) = two_maps();
        let d = MapDistribution::finite(vec![h1, h2], vec![0.96, 0.04]).unwrap();
        let p = d.filtration(1.0).unwrap();
        let inf = [MinimalSetDescriptor::infinity()];
        let r = fd_derivative_tl(&d, &inf, MinSetId::Infinity, &p, 0, C2Point::default(), 0.05, 200, 100, seed());
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }
}
