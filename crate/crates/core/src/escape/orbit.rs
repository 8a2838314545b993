use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{in_d_r, in_v_plus, C2Point, FiltrationParams, HenonMap};
use crate::sequence::MapSequence;

/// Per-step tangent shrinkage (nats) required for a BOUNDED verdict.
const MIN_CONTRACTION_RATE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Direction {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "UPPERCASE")]
pub enum OrbitStatus {
    Escaped { step: usize, direction: Direction },
    Bounded { iterations: usize },
    Uncertain { iterations: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitVerdict {
    pub status: OrbitStatus,
    /// Entry point into `V_R⁺` for escaped orbits, final iterate otherwise.
    pub last_point: C2Point,
}

impl OrbitVerdict {
    pub fn escaped_at(&self) -> Option<usize> {
        match self.status {
            OrbitStatus::Escaped { step, .. } => Some(step),
            _ => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.status, OrbitStatus::Bounded { .. })
    }

    pub fn is_uncertain(&self) -> bool {
        matches!(self.status, OrbitStatus::Uncertain { .. })
    }
}

/// Forward classification against the filtration.
///
/// * `ESCAPED{n}`: the `n`-th iterate is the first one in `V_R⁺`; condition
///   (A) makes this a proof of escape.
/// * `BOUNDED`: no iterate up to `max_iter` entered `V_R⁺`, the final iterate
///   lies in `D_R`, and a tangent vector carried along the second half of the
///   orbit shrank, i.e. the orbit is being captured by an attracting region.
/// * `UNCERTAIN`: anything else (orbits lingering near `J_γ⁺`, or bounded
///   orbits without contraction such as elliptic regions of volume-preserving
///   maps).
pub fn classify_orbit<S: MapSequence + ?Sized>(
    seq: &S,
    z: C2Point,
    params: &FiltrationParams,
    max_iter: usize,
) -> Result<OrbitVerdict> {
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    let r = params.r;
    let window_start = max_iter / 2;
    let mut z = z;
    let mut v = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
    let mut log_growth = 0.0;
    for n in 0..max_iter {
        if in_v_plus(z, r) {
            return Ok(escaped(n, z));
        }
        let f = seq.map_at(n);
        if n >= window_start {
            log_growth += tangent_step(&f, z, &mut v);
        }
        z = f.apply(z);
        if !z.is_finite() {
            return Ok(OrbitVerdict { status: OrbitStatus::Uncertain { iterations: n + 1 }, last_point: z });
        }
    }
    if in_v_plus(z, r) {
        return Ok(escaped(max_iter, z));
    }
    let window = (max_iter - window_start) as f64;
    let status = if in_d_r(z, r) && log_growth < -MIN_CONTRACTION_RATE * window {
        OrbitStatus::Bounded { iterations: max_iter }
    } else {
        OrbitStatus::Uncertain { iterations: max_iter }
    };
    Ok(OrbitVerdict { status, last_point: z })
}

fn escaped(step: usize, z: C2Point) -> OrbitVerdict {
    OrbitVerdict { status: OrbitStatus::Escaped { step, direction: Direction::Plus }, last_point: z }
}

/// Pushes `v` through `Df_z`, renormalizes, and returns `log‖Df_z v‖`.
#[inline]
pub(crate) fn tangent_step(f: &HenonMap, z: C2Point, v: &mut [Complex64; 2]) -> f64 {
    let w0 = v[1];
    let w1 = -f.delta() * v[0] + f.poly().eval_derivative(z.y) * v[1];
    let n = w0.norm().hypot(w1.norm());
    if n > 0.0 && n.is_finite() {
        v[0] = w0 / n;
        v[1] = w1 / n;
        n.ln()
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::condition_a_radius;
    use crate::sequence::Constant;

    fn attracting() -> HenonMap {
        HenonMap::real(0.0, 0.1, &[1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn start_in_v_plus_escapes_immediately() {
        let f = attracting();
        let p = condition_a_radius(&[f], 1.0).unwrap();
        let z = C2Point::from_reals(1.0, 0.0, 2.0 * p.r, 0.0);
        let v = classify_orbit(&Constant(f), z, &p, 10).unwrap();
        assert_eq!(v.status, OrbitStatus::Escaped { step: 0, direction: Direction::Plus });
    }

    #[test]
    fn fixed_point_is_bounded() {
        let f = attracting();
        let p = condition_a_radius(&[f], 1.0).unwrap();
        let v = classify_orbit(&Constant(f), C2Point::default(), &p, 100).unwrap();
        assert_eq!(v.status, OrbitStatus::Bounded { iterations: 100 });
    }

    #[test]
    fn zero_cap_rejected() {
        let f = attracting();
        let p = condition_a_radius(&[f], 1.0).unwrap();
        assert!(classify_orbit(&Constant(f), C2Point::default(), &p, 0).is_err());
    }

    #[test]
    fn elliptic_point_is_not_certified_bounded() {
        // δ = 1: the origin is an elliptic fixed point, nothing contracts.
        let f = HenonMap::real(0.0, 1.0, &[1.0, 0.0, 0.0]).unwrap();
        let p = condition_a_radius(&[f], 1.0).unwrap();
        let v = classify_orbit(&Constant(f), C2Point::default(), &p, 100).unwrap();
        assert!(v.is_uncertain());
    }
}
