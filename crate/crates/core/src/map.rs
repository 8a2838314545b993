//! Map algebra for generalized Hénon-type automorphisms of ℂ².

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest polynomial degree accepted by [`PolyC`].
pub const MAX_DEGREE: usize = 16;

/// Magnitude beyond which exact iteration stops and log-magnitude tracking
/// takes over.
pub const OVERFLOW_GUARD: f64 = 1e100;

const EPS_RADIUS: f64 = 1e-6;

fn finite(c: Complex64) -> bool {
    c.re.is_finite() && c.im.is_finite()
}

/// A point `(x, y)` of ℂ².
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct C2Point {
    pub x: Complex64,
    pub y: Complex64,
}

impl C2Point {
    pub const fn new(x: Complex64, y: Complex64) -> Self {
        Self { x, y }
    }

    pub fn from_reals(xr: f64, xi: f64, yr: f64, yi: f64) -> Self {
        Self::new(Complex64::new(xr, xi), Complex64::new(yr, yi))
    }

    pub fn try_new(x: Complex64, y: Complex64) -> Result<Self> {
        if finite(x) && finite(y) {
            Ok(Self { x, y })
        } else {
            Err(Error::InvalidArgument("point components must be finite".into()))
        }
    }

    pub fn is_finite(&self) -> bool {
        finite(self.x) && finite(self.y)
    }

    /// Euclidean norm `sqrt(|x|² + |y|²)`, evaluated with `hypot` so that
    /// components up to ~1e150 do not overflow.
    pub fn norm(&self) -> f64 {
        self.x.norm().hypot(self.y.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.x.norm().max(self.y.norm())
    }

    pub fn distance(&self, other: &C2Point) -> f64 {
        (*self - *other).norm()
    }

    /// The coordinate swap `s(x, y) = (y, x)`.
    pub fn swap(&self) -> Self {
        Self::new(self.y, self.x)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }

    /// Real coordinates `(Re x, Im x, Re y, Im y)`.
    pub fn to_reals(&self) -> [f64; 4] {
        [self.x.re, self.x.im, self.y.re, self.y.im]
    }

    pub fn from_array(r: [f64; 4]) -> Self {
        Self::from_reals(r[0], r[1], r[2], r[3])
    }
}

impl Add for C2Point {
    type Output = C2Point;
    fn add(self, o: C2Point) -> C2Point {
        C2Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for C2Point {
    type Output = C2Point;
    fn sub(self, o: C2Point) -> C2Point {
        C2Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for C2Point {
    type Output = C2Point;
    fn mul(self, k: f64) -> C2Point {
        self.scale(k)
    }
}

impl fmt::Display for C2Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Serialize for C2Point {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [[self.x.re, self.x.im], [self.y.re, self.y.im]].serialize(s)
    }
}

impl<'de> Deserialize<'de> for C2Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [[xr, xi], [yr, yi]] = <[[f64; 2]; 2]>::deserialize(d)?;
        Ok(C2Point::from_reals(xr, xi, yr, yi))
    }
}

/// 2×2 complex matrix, row-major.
pub type Mat2 = [[Complex64; 2]; 2];

pub fn det2(m: &Mat2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat_vec(m: &Mat2, v: [Complex64; 2]) -> [Complex64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Polynomial `c_0 y^d + c_1 y^{d-1} + … + c_d`, stored densely with the
/// leading coefficient first.
#[derive(Clone, Copy, PartialEq)]
pub struct PolyC {
    coeffs: [Complex64; MAX_DEGREE + 1],
    len: u8,
}

impl PolyC {
    pub fn new(coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(Error::InvalidMap {
                field: "poly",
                message: format!("degree must be at least 2, got {}", coeffs.len().saturating_sub(1)),
            });
        }
        if coeffs.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidMap {
                field: "poly",
                message: format!("degree must be at most {MAX_DEGREE}, got {}", coeffs.len() - 1),
            });
        }
        if !coeffs.iter().all(|&c| finite(c)) {
            return Err(Error::InvalidMap { field: "poly", message: "coefficients must be finite".into() });
        }
        if coeffs[0].norm() == 0.0 {
            return Err(Error::InvalidMap {
                field: "poly",
                message: "leading coefficient must be nonzero".into(),
            });
        }
        let mut buf = [Complex64::new(0.0, 0.0); MAX_DEGREE + 1];
        buf[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Self { coeffs: buf, len: coeffs.len() as u8 })
    }

    /// Convenience constructor from real coefficients.
    pub fn real(coeffs: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = coeffs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        Self::new(&c)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs[..self.len as usize]
    }

    pub fn degree(&self) -> usize {
        self.len as usize - 1
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn constant(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    pub fn eval(&self, y: Complex64) -> Complex64 {
        let c = self.coeffs();
        c[1..].iter().fold(c[0], |acc, &ci| acc * y + ci)
    }

    /// `p′(y)` by Horner on the derived coefficients `(d−k)·c_k`.
    pub fn eval_derivative(&self, y: Complex64) -> Complex64 {
        let d = self.degree();
        let c = self.coeffs();
        let mut acc = c[0] * d as f64;
        for (k, &ck) in c.iter().enumerate().take(d).skip(1) {
            acc = acc * y + ck * (d - k) as f64;
        }
        acc
    }

    /// `q(w) = p(w + a)`, by repeated synthetic division (Taylor shift).
    pub fn shifted(&self, a: Complex64) -> Self {
        let mut out = *self;
        let n = self.len as usize;
        for i in 0..n - 1 {
            for j in 1..n - i {
                let prev = out.coeffs[j - 1];
                out.coeffs[j] += a * prev;
            }
        }
        out
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        let mut out = *self;
        for c in out.coeffs[..out.len as usize].iter_mut() {
            *c *= k;
        }
        out
    }

    /// Same polynomial with `b` added to the constant term.
    pub fn with_constant_offset(&self, b: Complex64) -> Self {
        let mut out = *self;
        let d = out.degree();
        out.coeffs[d] += b;
        out
    }
}

impl fmt::Debug for PolyC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs().iter()).finish()
    }
}

/// One generator `f(x, y) = (y + α, p(y) − δx)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HenonMap {
    alpha: Complex64,
    delta: Complex64,
    poly: PolyC,
}

impl HenonMap {
    pub fn new(alpha: Complex64, delta: Complex64, poly: PolyC) -> Result<Self> {
        if !finite(alpha) {
            return Err(Error::InvalidMap { field: "alpha", message: "must be finite".into() });
        }
        if !finite(delta) {
            return Err(Error::InvalidMap { field: "delta", message: "must be finite".into() });
        }
        if delta.norm() == 0.0 {
            return Err(Error::InvalidMap { field: "delta", message: "must be nonzero".into() });
        }
        Ok(Self { alpha, delta, poly })
    }

    /// Real-parameter shorthand used throughout tests and presets.
    pub fn real(alpha: f64, delta: f64, poly: &[f64]) -> Result<Self> {
        Self::new(Complex64::new(alpha, 0.0), Complex64::new(delta, 0.0), PolyC::real(poly)?)
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn delta(&self) -> Complex64 {
        self.delta
    }

    pub fn poly(&self) -> &PolyC {
        &self.poly
    }

    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    /// `(y + α, p(y) − δx)` with no overflow check.
    #[inline]
    pub fn apply(&self, z: C2Point) -> C2Point {
        C2Point::new(z.y + self.alpha, self.poly.eval(z.y) - self.delta * z.x)
    }

    /// `((p(x − α) − y)/δ, x − α)` with no overflow check.
    #[inline]
    pub fn apply_inverse(&self, z: C2Point) -> C2Point {
        let w = z.x - self.alpha;
        C2Point::new((self.poly.eval(w) - z.y) / self.delta, w)
    }

    pub fn eval_map(&self, z: C2Point) -> Result<C2Point> {
        checked(self.apply(z))
    }

    pub fn eval_inverse(&self, z: C2Point) -> Result<C2Point> {
        checked(self.apply_inverse(z))
    }

    /// `Df_z = [[0, 1], [−δ, p′(y)]]`.
    pub fn jacobian(&self, z: C2Point) -> Mat2 {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        [[zero, one], [-self.delta, self.poly.eval_derivative(z.y)]]
    }

    /// The map `h = s ∘ f⁻¹ ∘ s`, which is again of Hénon type:
    /// `α′ = −α`, `δ′ = 1/δ`, `p′(w) = p(w − α)/δ`.
    pub fn inverse_as_plus(&self) -> HenonMap {
        let inv_delta = Complex64::new(1.0, 0.0) / self.delta;
        HenonMap {
            alpha: -self.alpha,
            delta: inv_delta,
            poly: self.poly.shifted(-self.alpha).scaled(inv_delta),
        }
    }

    /// `f + (a, b)`: translation added to both output coordinates.
    pub fn translated(&self, a: Complex64, b: Complex64) -> HenonMap {
        HenonMap { alpha: self.alpha + a, delta: self.delta, poly: self.poly.with_constant_offset(b) }
    }

    /// Largest coefficientwise distance to another map of the same degree.
    pub fn coefficient_distance(&self, other: &HenonMap) -> f64 {
        if self.degree() != other.degree() {
            return f64::INFINITY;
        }
        let mut d = (self.alpha - other.alpha).norm().max((self.delta - other.delta).norm());
        for (a, b) in self.poly.coeffs().iter().zip(other.poly.coeffs()) {
            d = d.max((a - b).norm());
        }
        d
    }
}

fn checked(z: C2Point) -> Result<C2Point> {
    if z.is_finite() && z.max_abs() <= OVERFLOW_GUARD {
        Ok(z)
    } else {
        Err(Error::EscapedNumeric)
    }
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    alpha: [f64; 2],
    delta: [f64; 2],
    poly: Vec<[f64; 2]>,
}

impl Serialize for HenonMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MapRepr {
            alpha: [self.alpha.re, self.alpha.im],
            delta: [self.delta.re, self.delta.im],
            poly: self.poly.coeffs().iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HenonMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = MapRepr::deserialize(d)?;
        let c = |v: [f64; 2]| Complex64::new(v[0], v[1]);
        let coeffs: Vec<Complex64> = r.poly.into_iter().map(c).collect();
        let poly = PolyC::new(&coeffs).map_err(serde::de::Error::custom)?;
        HenonMap::new(c(r.alpha), c(r.delta), poly).map_err(serde::de::Error::custom)
    }
}

/// Escape radii `(R, ρ)` certified by condition (A).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiltrationParams {
    #[serde(rename = "R")]
    pub r: f64,
    pub rho: f64,
}

/// Coefficient magnitudes of one map, the only information the escape
/// certificates depend on.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientBounds {
    pub alpha: f64,
    pub delta: f64,
    /// `|c_0|, |c_1|, …, |c_d|`.
    pub coeffs: Vec<f64>,
}

impl CoefficientBounds {
    pub fn of(f: &HenonMap) -> Self {
        Self {
            alpha: f.alpha.norm(),
            delta: f.delta.norm(),
            coeffs: f.poly.coeffs().iter().map(|c| c.norm()).collect(),
        }
    }

    /// Bounds valid for every `f + (a, b)` with `|(a, b)| ≤ radius`.
    pub fn inflated(f: &HenonMap, radius: f64) -> Self {
        let mut b = Self::of(f);
        b.alpha += radius;
        if let Some(last) = b.coeffs.last_mut() {
            *last += radius;
        }
        b
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn rho0(&self) -> f64 {
        (self.delta + 8.0).max(16.0 * self.delta + 2.0)
    }

    fn radius_for(&self, rho0: f64) -> f64 {
        let c0 = self.coeffs[0];
        let d = self.degree() as f64;
        let tail: f64 = self.coeffs[1..].iter().map(|c| c / c0).sum();
        let growth = (2.0 * rho0 / c0).powf(1.0 / (d - 1.0));
        (1.0 + EPS_RADIUS).max(2.0 * self.alpha + EPS_RADIUS).max(2.0 * tail).max(growth)
    }

    /// Constants `a₁, a₂` with `a₁|y|^d ≤ |π_y f(x, y)| ≤ a₂|y|^d` on the
    /// closure of `V_R⁺`.
    pub fn growth_constants(&self, r: f64) -> (f64, f64) {
        let d = self.degree() as i32;
        let mut tail = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1) {
            tail += c * r.powi(-(j as i32));
        }
        tail += self.delta * r.powi(1 - d);
        (self.coeffs[0] - tail, self.coeffs[0] + tail)
    }
}

/// Closed-form condition-(A) radii for a finite family of maps.
pub fn condition_a_radius(maps: &[HenonMap], rho_margin: f64) -> Result<FiltrationParams> {
    let bounds: Vec<CoefficientBounds> = maps.iter().map(CoefficientBounds::of).collect();
    condition_a_radius_bounds(&bounds, rho_margin)
}

/// As [`condition_a_radius`], from coefficient magnitudes.
///
/// `ρ₀ = rho_margin + max{|δ|+8, 16|δ|+2}` over the family, and `R` is the
/// smallest radius for which `|p(ζ)| ≥ |c₀||ζ|^d/2 ≥ ρ₀|ζ|` holds whenever
/// `|ζ| ≥ R`, together with `R > max{1, 2|α|}`. Every map then satisfies
/// condition (A) for `(R, 2)`.
pub fn condition_a_radius_bounds(bounds: &[CoefficientBounds], rho_margin: f64) -> Result<FiltrationParams> {
    if bounds.is_empty() {
        return Err(Error::InvalidArgument("condition_a_radius needs at least one map".into()));
    }
    if !(rho_margin >= 1.0) {
        return Err(Error::InvalidArgument(format!("rho_margin must be >= 1, got {rho_margin}")));
    }
    let rho0 = rho_margin + bounds.iter().map(CoefficientBounds::rho0).fold(f64::MIN, f64::max);
    let r = bounds.iter().map(|b| b.radius_for(rho0)).fold(f64::MIN, f64::max);
    Ok(FiltrationParams { r, rho: 2.0 })
}

/// Cell of the filtration `ℂ² = D_R ∪ V_R⁺ ∪ V_R⁻ ∪ seam`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    VPlus,
    VMinus,
    #[serde(rename = "D_R")]
    DR,
    Boundary,
}

pub fn classify_region(z: C2Point, r: f64) -> Region {
    let ax = z.x.norm();
    let ay = z.y.norm();
    if r.max(ax) < ay {
        Region::VPlus
    } else if r.max(ay) < ax {
        Region::VMinus
    } else if ax.max(ay) < r {
        Region::DR
    } else {
        Region::Boundary
    }
}

#[inline]
pub fn in_v_plus(z: C2Point, r: f64) -> bool {
    let ay = z.y.norm();
    ay > r && ay > z.x.norm()
}

#[inline]
pub fn in_d_r(z: C2Point, r: f64) -> bool {
    z.x.norm() < r && z.y.norm() < r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn quad() -> HenonMap {
        HenonMap::real(0.0, 1.0, &[1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn eval_examples() {
        let f = quad();
        assert_eq!(f.eval_map(C2Point::default()).unwrap(), C2Point::default());
        assert_eq!(f.eval_map(C2Point::from_reals(1.0, 0.0, 2.0, 0.0)).unwrap(), C2Point::from_reals(2.0, 0.0, 3.0, 0.0));

        let g = HenonMap::new(c(0.0, 1.0), c(2.0, 0.0), PolyC::real(&[1.0, 0.0, 0.0, 0.0]).unwrap()).unwrap();
        let z = g.eval_map(C2Point::from_reals(0.0, 0.0, 1.0, 0.0)).unwrap();
        assert_eq!(z, C2Point::new(c(1.0, 1.0), c(1.0, 0.0)));
    }

    #[test]
    fn inverse_examples() {
        let f = quad();
        let z = f.eval_inverse(C2Point::from_reals(2.0, 0.0, 3.0, 0.0)).unwrap();
        assert_eq!(z, C2Point::from_reals(1.0, 0.0, 2.0, 0.0));
        let g = HenonMap::real(0.0, 2.0, &[1.0, 0.0, 0.0]).unwrap();
        let z = g.eval_inverse(C2Point::from_reals(0.0, 0.0, 4.0, 0.0)).unwrap();
        assert_eq!(z, C2Point::from_reals(-2.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn overflow_is_reported() {
        let f = quad();
        let z = C2Point::from_reals(0.0, 0.0, 1e80, 0.0);
        assert_eq!(f.eval_map(z), Err(Error::EscapedNumeric));
    }

    #[test]
    fn jacobian_examples() {
        let f = quad();
        let j = f.jacobian(C2Point::from_reals(3.0, -1.0, 0.0, 0.0));
        assert_eq!(j, [[c(0.0, 0.0), c(1.0, 0.0)], [c(-1.0, 0.0), c(0.0, 0.0)]]);

        let g = HenonMap::real(0.0, 0.1, &[1.0, -1.1, 0.0]).unwrap();
        let j = g.jacobian(C2Point::default());
        assert_eq!(j[1][0], c(-0.1, 0.0));
        assert_eq!(j[1][1], c(-1.1, 0.0));
    }

    #[test]
    fn derivative_matches_hand_expansion() {
        // p(y) = 2y³ − y + 5, p′(y) = 6y² − 1
        let p = PolyC::real(&[2.0, 0.0, -1.0, 5.0]).unwrap();
        let y = c(0.3, -1.2);
        assert!((p.eval_derivative(y) - (y * y * 6.0 - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn taylor_shift() {
        // (w − 1)² = w² − 2w + 1
        let p = PolyC::real(&[1.0, 0.0, 0.0]).unwrap();
        let q = p.shifted(c(-1.0, 0.0));
        assert_eq!(q.coeffs(), &[c(1.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn inverse_as_plus_of_quadratic() {
        let h = quad().inverse_as_plus();
        assert_eq!(h, quad());
        let g = HenonMap::real(0.5, 3.0, &[2.0, 1.0, 0.0, -1.0]).unwrap();
        assert_eq!(g.inverse_as_plus().degree(), 3);
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(matches!(
            HenonMap::real(0.0, 0.0, &[1.0, 0.0, 0.0]),
            Err(Error::InvalidMap { field: "delta", .. })
        ));
        assert!(matches!(PolyC::real(&[1.0, 0.0]), Err(Error::InvalidMap { field: "poly", .. })));
        assert!(matches!(PolyC::real(&[0.0, 1.0, 0.0]), Err(Error::InvalidMap { field: "poly", .. })));
        assert!(PolyC::real(&[1.0; 18]).is_err());
    }

    #[test]
    fn condition_a_example() {
        let p = condition_a_radius(&[quad()], 1.0).unwrap();
        assert!((p.r - 38.0).abs() < 1e-12);
        assert_eq!(p.rho, 2.0);
        assert!(condition_a_radius(&[], 1.0).is_err());
    }

    #[test]
    fn regions() {
        assert_eq!(classify_region(C2Point::default(), 2.0), Region::DR);
        assert_eq!(classify_region(C2Point::from_reals(1.0, 0.0, 10.0, 0.0), 2.0), Region::VPlus);
        assert_eq!(classify_region(C2Point::from_reals(10.0, 0.0, 1.0, 0.0), 2.0), Region::VMinus);
        assert_eq!(classify_region(C2Point::from_reals(2.0, 0.0, 1.0, 0.0), 2.0), Region::Boundary);
    }

    #[test]
    fn norm_does_not_overflow() {
        let z = C2Point::from_reals(1e150, 1e150, -1e150, 1e150);
        assert!((z.norm() - 2e150).abs() / 2e150 < 1e-15);
    }

    #[test]
    fn json_roundtrip() {
        let g = HenonMap::new(c(0.5, -1.0), c(0.1, 0.2), PolyC::real(&[1.0, 0.0, -0.3]).unwrap()).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"alpha":[0.5,-1.0],"delta":[0.1,0.2],"poly":[[1.0,0.0],[0.0,0.0],[-0.3,0.0]]}"#);
        let back: HenonMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"alpha":[0,0],"delta":[0,0],"poly":[[1,0],[0,0],[0,0]]}"#;
        let err = serde_json::from_str::<HenonMap>(bad).unwrap_err().to_string();
        assert!(err.contains("delta"), "{err}");
    }
}
