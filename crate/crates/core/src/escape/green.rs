use serde::{Deserialize, Serialize};

use crate::dist::MapDistribution;
use crate::error::{Error, Result};
use crate::escape::orbit::{classify_orbit, OrbitStatus};
use crate::map::{C2Point, CoefficientBounds, FiltrationParams, HenonMap, OVERFLOW_GUARD};
use crate::sequence::{Inverted, MapSequence};

/// Hard stop for the post-entry loop; the error bound reaches any sane
/// tolerance long before this.
const MAX_TAIL_STEPS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenEstimate {
    pub value: f64,
    pub n_used: usize,
    pub error_bound: f64,
}

/// Growth constants of a compact family on the closure of `V_R⁺`:
/// `a₁|y|^d ≤ |π_y h(x, y)| ≤ a₂|y|^d`, and the telescoping constant
/// `C_tel = log max{a₂, 1/a₁, √2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenConstants {
    pub a1: f64,
    pub a2: f64,
    pub c_tel: f64,
}

impl GreenConstants {
    pub fn from_bounds(bounds: &[CoefficientBounds], params: &FiltrationParams) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidArgument("no maps".into()));
        }
        let mut a1 = f64::INFINITY;
        let mut a2: f64 = 0.0;
        for b in bounds {
            let (lo, hi) = b.growth_constants(params.r);
            a1 = a1.min(lo);
            a2 = a2.max(hi);
        }
        if !(a1 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radius {} too small for a positive lower growth constant",
                params.r
            )));
        }
        let c_tel = a2.max(1.0 / a1).max(std::f64::consts::SQRT_2).ln();
        Ok(Self { a1, a2, c_tel })
    }

    pub fn for_maps(maps: &[HenonMap], params: &FiltrationParams) -> Result<Self> {
        let b: Vec<CoefficientBounds> = maps.iter().map(CoefficientBounds::of).collect();
        Self::from_bounds(&b, params)
    }

    pub fn for_dist(dist: &MapDistribution, params: &FiltrationParams) -> Result<Self> {
        Self::from_bounds(&dist.coefficient_bounds(), params)
    }

    /// Bound on `|𝒢 − 𝒢_n|` once the orbit is in `V_R⁺` at step `n`.
    pub fn tail_bound(&self, n: usize) -> f64 {
        self.c_tel * 2f64.powi(1 - n as i32)
    }
}

/// Post-entry iteration of `𝒢_n = log|π_y(γ_{n−1,0} z)| / (d_0⋯d_{n−1})`.
///
/// Coordinates are tracked exactly until `|y|` exceeds the overflow guard,
/// then only `ℓ = log|y|` is carried through
/// `ℓ' = d·ℓ + log|c_0| + η` with `|η| ≤ 2ε`, `ε` the relative size of the
/// lower-order terms at the current magnitude.
struct GreenWalker<'s, S: ?Sized> {
    seq: &'s S,
    n: usize,
    log_degree: f64,
    exact: Option<C2Point>,
    ell: f64,
    correction: f64,
}

impl<'s, S: MapSequence + ?Sized> GreenWalker<'s, S> {
    fn new(seq: &'s S, entry: C2Point, n0: usize) -> Self {
        let log_degree = (0..n0).map(|k| (seq.map_at(k).degree() as f64).ln()).sum();
        Self { seq, n: n0, log_degree, exact: Some(entry), ell: entry.y.norm().ln(), correction: 0.0 }
    }

    fn step(&mut self) {
        let f = self.seq.map_at(self.n);
        let d = f.degree() as f64;
        match self.exact {
            Some(z) => {
                let w = f.apply(z);
                if w.y.norm() > OVERFLOW_GUARD || !w.is_finite() {
                    self.exact = None;
                    self.advance_log(&f);
                } else {
                    self.ell = w.y.norm().ln();
                    self.exact = Some(w);
                }
            }
            None => self.advance_log(&f),
        }
        self.log_degree += d.ln();
        self.n += 1;
    }

    fn advance_log(&mut self, f: &HenonMap) {
        let d = f.degree();
        let c = f.poly().coeffs();
        let c0 = c[0].norm();
        let mut eps = 0.0;
        for (j, cj) in c.iter().enumerate().skip(1) {
            eps += cj.norm() / c0 * (-(j as f64) * self.ell).exp();
        }
        eps += f.delta().norm() / c0 * ((1.0 - d as f64) * self.ell).exp();
        self.ell = d as f64 * self.ell + c0.ln();
        self.correction += 2.0 * eps * (-(self.log_degree + (d as f64).ln())).exp();
    }

    fn value(&self) -> f64 {
        self.ell * (-self.log_degree).exp()
    }
}

/// Forward Green function `𝒢_γ⁺(z)` with a certified error bound.
///
/// Bounded orbits return 0; orbits left undecided at `max_iter` return
/// `GREEN_INDETERMINATE` with the partial estimate.
pub fn green_plus<S: MapSequence + ?Sized>(
    seq: &S,
    z: C2Point,
    params: &FiltrationParams,
    consts: &GreenConstants,
    tol: f64,
    max_iter: usize,
) -> Result<GreenEstimate> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let verdict = classify_orbit(seq, z, params, max_iter)?;
    match verdict.status {
        OrbitStatus::Bounded { iterations } => Ok(GreenEstimate { value: 0.0, n_used: iterations, error_bound: 0.0 }),
        OrbitStatus::Uncertain { iterations } => {
            let log_d: f64 = (0..iterations).map(|k| (seq.map_at(k).degree() as f64).ln()).sum();
            let norm = verdict.last_point.norm();
            let partial = if norm > 1.0 { norm.ln() * (-log_d).exp() } else { 0.0 };
            Err(Error::GreenIndeterminate { partial, iterations })
        }
        OrbitStatus::Escaped { step, .. } => Ok(green_from_entry(seq, verdict.last_point, step, consts, tol)),
    }
}

/// Continues an orbit that entered `V_R⁺` at step `n0` at point `entry`.
pub fn green_from_entry<S: MapSequence + ?Sized>(
    seq: &S,
    entry: C2Point,
    n0: usize,
    consts: &GreenConstants,
    tol: f64,
) -> GreenEstimate {
    let mut w = GreenWalker::new(seq, entry, n0);
    while consts.tail_bound(w.n) > tol && w.n < n0 + MAX_TAIL_STEPS {
        w.step();
    }
    GreenEstimate { value: w.value(), n_used: w.n, error_bound: consts.tail_bound(w.n) + w.correction }
}

/// Backward Green function `𝒢_γ⁻(z)`. `seq` lists the maps in the order they
/// are inverted, `seq[k] = γ_{−k−1}`; the computation is [`green_plus`] for
/// the swap-conjugated inverses at `s(z)`. `params` and `consts` must be
/// certified for those conjugated inverses.
pub fn green_minus<S: MapSequence + ?Sized>(
    seq: &S,
    z: C2Point,
    params: &FiltrationParams,
    consts: &GreenConstants,
    tol: f64,
    max_iter: usize,
) -> Result<GreenEstimate> {
    green_plus(&Inverted(seq), z.swap(), params, consts, tol, max_iter)
}

/// Successive iterates `(n, 𝒢_n)` for `n = n0 ..= n0 + steps`, where `n0` is
/// the step at which the orbit entered `V_R⁺`. `None` if it never does
/// within `max_iter`.
pub fn green_trace<S: MapSequence + ?Sized>(
    seq: &S,
    z: C2Point,
    params: &FiltrationParams,
    max_iter: usize,
    steps: usize,
) -> Result<Option<Vec<(usize, f64)>>> {
    let verdict = classify_orbit(seq, z, params, max_iter)?;
    let Some(n0) = verdict.escaped_at() else {
        return Ok(None);
    };
    let mut w = GreenWalker::new(seq, verdict.last_point, n0);
    let mut out = vec![(w.n, w.value())];
    for _ in 0..steps {
        w.step();
        out.push((w.n, w.value()));
    }
    Ok(Some(out))
}
