use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::green::{green_from_entry, GreenConstants};
use crate::escape::orbit::{classify_orbit, OrbitStatus};
use crate::map::{C2Point, FiltrationParams, HenonMap};
use crate::sequence::MapSequence;

/// Real 2-plane window `anchor + s·dir1 + t·dir2`, `s, t ∈ [−extent, extent]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceSpec {
    pub anchor: C2Point,
    pub dir1: C2Point,
    pub dir2: C2Point,
    pub extent: f64,
    pub resolution: usize,
}

impl SliceSpec {
    /// The `(Re y, Im y)` plane through `anchor`.
    pub fn y_plane(anchor: C2Point, extent: f64, resolution: usize) -> Self {
        Self {
            anchor,
            dir1: C2Point::from_reals(0.0, 0.0, 1.0, 0.0),
            dir2: C2Point::from_reals(0.0, 0.0, 0.0, 1.0),
            extent,
            resolution,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be positive".into()));
        }
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(Error::InvalidArgument("extent must be positive".into()));
        }
        for d in [self.dir1, self.dir2] {
            if (d.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument("slice directions must be unit vectors".into()));
            }
        }
        let a = self.dir1.to_reals();
        let b = self.dir2.to_reals();
        let dot: f64 = a.iter().zip(&b).map(|(p, q)| p * q).sum();
        if dot.abs() > 1.0 - 1e-9 {
            return Err(Error::InvalidArgument("slice directions must be linearly independent".into()));
        }
        if !self.anchor.is_finite() {
            return Err(Error::InvalidArgument("anchor must be finite".into()));
        }
        Ok(())
    }

    /// World distance between neighbouring pixel centres.
    pub fn pixel_pitch(&self) -> f64 {
        2.0 * self.extent / self.resolution as f64
    }

    /// Centre of pixel `(i, j)`, `i` the column, `j` the row.
    pub fn pixel(&self, i: usize, j: usize) -> C2Point {
        let pitch = self.pixel_pitch();
        let s = -self.extent + (i as f64 + 0.5) * pitch;
        let t = -self.extent + (j as f64 + 0.5) * pitch;
        self.anchor + self.dir1 * s + self.dir2 * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "n", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CellVerdict {
    EscapedAt(usize),
    Bounded,
    Uncertain,
}

impl CellVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            Self::EscapedAt(_) => "ESCAPED",
            Self::Bounded => "BOUNDED",
            Self::Uncertain => "UNCERTAIN",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub green: f64,
    pub verdict: CellVerdict,
    /// Steps used: escape step for escaped cells, the cap otherwise.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    /// Row-major, `cells[j * width + i]`.
    pub cells: Vec<Cell>,
}

impl Raster {
    pub fn get(&self, i: usize, j: usize) -> &Cell {
        &self.cells[j * self.width + i]
    }

    pub fn count(&self, pred: impl Fn(&CellVerdict) -> bool) -> usize {
        self.cells.iter().filter(|c| pred(&c.verdict)).count()
    }

    pub fn uncertain_count(&self) -> usize {
        self.count(|v| *v == CellVerdict::Uncertain)
    }

    pub fn max_green(&self) -> f64 {
        self.cells.iter().map(|c| c.green).fold(0.0, f64::max)
    }
}

/// Prefix of a sequence held in memory so that per-pixel orbits do not redraw
/// the same maps.
struct Cached<'a, S: ?Sized> {
    head: Vec<HenonMap>,
    inner: &'a S,
}

impl<S: MapSequence + ?Sized> MapSequence for Cached<'_, S> {
    fn map_at(&self, index: usize) -> HenonMap {
        match self.head.get(index) {
            Some(f) => *f,
            None => self.inner.map_at(index),
        }
    }
}

/// Per-pixel escape classification and Green value over a slice.
pub fn raster_slice<S: MapSequence + ?Sized>(
    seq: &S,
    spec: &SliceSpec,
    params: &FiltrationParams,
    consts: &GreenConstants,
    max_iter: usize,
    tol: f64,
) -> Result<Raster> {
    spec.validate()?;
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let cached = Cached { head: (0..max_iter + 128).map(|k| seq.map_at(k)).collect(), inner: seq };
    let res = spec.resolution;
    let rows: Vec<Vec<Cell>> = (0..res)
        .into_par_iter()
        .map(|j| {
            (0..res)
                .map(|i| {
                    let z = spec.pixel(i, j);
                    let v = classify_orbit(&cached, z, params, max_iter).expect("validated cap");
                    match v.status {
                        OrbitStatus::Escaped { step, .. } => {
                            let g = green_from_entry(&cached, v.last_point, step, consts, tol);
                            Cell { green: g.value, verdict: CellVerdict::EscapedAt(step), n: step }
                        }
                        OrbitStatus::Bounded { iterations } => {
                            Cell { green: 0.0, verdict: CellVerdict::Bounded, n: iterations }
                        }
                        OrbitStatus::Uncertain { iterations } => {
                            Cell { green: 0.0, verdict: CellVerdict::Uncertain, n: iterations }
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok(Raster { width: res, height: res, cells: rows.into_iter().flatten().collect() })
}

/// Discrete `∂K⁺`: BOUNDED pixels 4-adjacent to an ESCAPED pixel.
pub fn boundary_extract(r: &Raster) -> BTreeSet<(usize, usize)> {
    let escaped = |i: usize, j: usize| matches!(r.get(i, j).verdict, CellVerdict::EscapedAt(_));
    let mut out = BTreeSet::new();
    for j in 0..r.height {
        for i in 0..r.width {
            if r.get(i, j).verdict != CellVerdict::Bounded {
                continue;
            }
            let touches = (i > 0 && escaped(i - 1, j))
                || (i + 1 < r.width && escaped(i + 1, j))
                || (j > 0 && escaped(i, j - 1))
                || (j + 1 < r.height && escaped(i, j + 1));
            if touches {
                out.insert((i, j));
            }
        }
    }
    out
}

/// Symmetric Hausdorff distance between pixel sets, in world units.
pub fn hausdorff_pixels(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>, pixel_pitch: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let pa: Vec<(f64, f64)> = a.iter().map(|&(i, j)| (i as f64, j as f64)).collect();
    let pb: Vec<(f64, f64)> = b.iter().map(|&(i, j)| (i as f64, j as f64)).collect();
    let d = directed(&pa, &pb).max(directed(&pb, &pa));
    Ok(d.sqrt() * pixel_pitch)
}

/// Squared directed Hausdorff distance, parallel over the source set.
fn directed(from: &[(f64, f64)], to: &[(f64, f64)]) -> f64 {
    from.par_iter()
        .map(|&(x, y)| {
            to.iter().map(|&(u, v)| (x - u) * (x - u) + (y - v) * (y - v)).fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster_from(width: usize, height: usize, f: impl Fn(usize, usize) -> CellVerdict) -> Raster {
        let mut cells = Vec::new();
        for j in 0..height {
            for i in 0..width {
                cells.push(Cell { green: 0.0, verdict: f(i, j), n: 0 });
            }
        }
        Raster { width, height, cells }
    }

    #[test]
    fn uniform_rasters_have_no_boundary() {
        assert!(boundary_extract(&raster_from(8, 8, |_, _| CellVerdict::Bounded)).is_empty());
        assert!(boundary_extract(&raster_from(8, 8, |_, _| CellVerdict::EscapedAt(3))).is_empty());
    }

    #[test]
    fn half_plane_seam() {
        let r = raster_from(8, 6, |i, _| if i < 4 { CellVerdict::Bounded } else { CellVerdict::EscapedAt(1) });
        let b = boundary_extract(&r);
        let expect: BTreeSet<_> = (0..6).map(|j| (3, j)).collect();
        assert_eq!(b, expect);
    }

    #[test]
    fn hausdorff_examples() {
        let a: BTreeSet<_> = [(1, 2), (5, 5)].into_iter().collect();
        assert_eq!(hausdorff_pixels(&a, &a, 0.1).unwrap(), 0.0);
        let p: BTreeSet<_> = [(0, 0)].into_iter().collect();
        let q: BTreeSet<_> = [(3, 4)].into_iter().collect();
        assert!((hausdorff_pixels(&p, &q, 1.0).unwrap() - 5.0).abs() < 1e-12);
        let c1: BTreeSet<_> = (0..10).map(|j| (2, j)).collect();
        let c2: BTreeSet<_> = (0..10).map(|j| (9, j)).collect();
        assert!((hausdorff_pixels(&c1, &c2, 0.25).unwrap() - 7.0 * 0.25).abs() < 1e-12);
        assert_eq!(hausdorff_pixels(&p, &BTreeSet::new(), 1.0), Err(Error::EmptySet));
    }

    #[test]
    fn slice_validation() {
        let mut s = SliceSpec::y_plane(C2Point::default(), 1.0, 4);
        assert!(s.validate().is_ok());
        s.dir2 = s.dir1;
        assert!(s.validate().is_err());
        s.dir2 = C2Point::from_reals(0.0, 0.0, 2.0, 0.0);
        assert!(s.validate().is_err());
    }

    #[test]
    fn pixel_centres() {
        let s = SliceSpec::y_plane(C2Point::default(), 1.0, 2);
        assert_eq!(s.pixel(0, 0), C2Point::from_reals(0.0, 0.0, -0.5, -0.5));
        assert_eq!(s.pixel(1, 1), C2Point::from_reals(0.0, 0.0, 0.5, 0.5));
    }
}
