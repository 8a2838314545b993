//! Experiment configuration: JSON in, validated records out. Every error
//! names the JSON pointer of the offending field.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dist::{MapDistribution, NoiseFamily};
use crate::error::{Error, Result};
use crate::map::{C2Point, HenonMap, PolyC};
use crate::minsets::{DiscoveryParams, MinSetId};

/// Cursor into a JSON document that remembers its pointer.
pub struct At<'a> {
    value: &'a Value,
    pointer: String,
}

fn escape_token(t: &str) -> String {
    t.replace('~', "~0").replace('/', "~1")
}

impl<'a> At<'a> {
    pub fn root(value: &'a Value) -> Self {
        Self { value, pointer: String::new() }
    }

    pub fn pointer(&self) -> &str {
        if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::config(self.pointer(), msg)
    }

    pub fn is_null(&self) -> bool {
        self.value.is_null()
    }

    pub fn object(&self) -> Result<&'a serde_json::Map<String, Value>> {
        self.value.as_object().ok_or_else(|| self.err("expected an object"))
    }

    /// Rejects keys outside `allowed`.
    pub fn only_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.object()?.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::config(format!("{}/{}", self.pointer, escape_token(k)), "unknown field"));
            }
        }
        Ok(())
    }

    pub fn opt(&self, key: &str) -> Result<Option<At<'a>>> {
        let obj = self.object()?;
        Ok(obj.get(key).filter(|v| !v.is_null()).map(|v| At { value: v, pointer: format!("{}/{}", self.pointer, escape_token(key)) }))
    }

    pub fn req(&self, key: &str) -> Result<At<'a>> {
        self.opt(key)?.ok_or_else(|| Error::config(format!("{}/{}", self.pointer, escape_token(key)), "missing required field"))
    }

    pub fn items(&self) -> Result<Vec<At<'a>>> {
        let arr = self.value.as_array().ok_or_else(|| self.err("expected an array"))?;
        Ok(arr.iter().enumerate().map(|(i, v)| At { value: v, pointer: format!("{}/{i}", self.pointer) }).collect())
    }

    pub fn f64(&self) -> Result<f64> {
        let v = self.value.as_f64().ok_or_else(|| self.err("expected a number"))?;
        if !v.is_finite() {
            return Err(self.err("expected a finite number"));
        }
        Ok(v)
    }

    pub fn positive(&self) -> Result<f64> {
        let v = self.f64()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be positive, got {v}")))
        }
    }

    pub fn u64(&self) -> Result<u64> {
        if let Some(v) = self.value.as_u64() {
            return Ok(v);
        }
        // Integral floats such as 1e6 are accepted.
        match self.value.as_f64() {
            Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
            _ => Err(self.err("expected a nonnegative integer")),
        }
    }

    pub fn usize(&self) -> Result<usize> {
        Ok(self.u64()? as usize)
    }

    pub fn bool(&self) -> Result<bool> {
        self.value.as_bool().ok_or_else(|| self.err("expected true or false"))
    }

    pub fn str(&self) -> Result<&'a str> {
        self.value.as_str().ok_or_else(|| self.err("expected a string"))
    }

    /// A real number or a `[re, im]` pair.
    pub fn complex(&self) -> Result<Complex64> {
        if self.value.is_number() {
            return Ok(Complex64::new(self.f64()?, 0.0));
        }
        let items = self.items().map_err(|_| self.err("expected a number or [re, im]"))?;
        if items.len() != 2 {
            return Err(self.err("expected [re, im]"));
        }
        Ok(Complex64::new(items[0].f64()?, items[1].f64()?))
    }

    /// `[x, y]` with complex entries.
    pub fn point(&self) -> Result<C2Point> {
        let items = self.items()?;
        if items.len() != 2 {
            return Err(self.err("expected a point [x, y]"));
        }
        Ok(C2Point::new(items[0].complex()?, items[1].complex()?))
    }

    pub fn henon_map(&self) -> Result<HenonMap> {
        self.only_keys(&["alpha", "delta", "poly"])?;
        let alpha = self.req("alpha")?.complex()?;
        let delta_at = self.req("delta")?;
        let delta = delta_at.complex()?;
        if delta.norm() == 0.0 {
            return Err(delta_at.err("delta must be nonzero"));
        }
        let poly_at = self.req("poly")?;
        let coeffs: Vec<Complex64> = poly_at.items()?.iter().map(At::complex).collect::<Result<_>>()?;
        let poly = PolyC::new(&coeffs).map_err(|e| poly_at.err(e.to_string()))?;
        HenonMap::new(alpha, delta, poly).map_err(|e| self.err(e.to_string()))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.opt(key)?.map_or(Ok(default), |a| a.f64())
    }

    pub fn positive_or(&self, key: &str, default: f64) -> Result<f64> {
        self.opt(key)?.map_or(Ok(default), |a| a.positive())
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.opt(key)?.map_or(Ok(default), |a| a.usize())
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.opt(key)?.map_or(Ok(default), |a| a.bool())
    }

    /// A section object, or an empty one when absent.
    pub fn section(&self, key: &str) -> Result<At<'a>> {
        static EMPTY: std::sync::OnceLock<Value> = std::sync::OnceLock::new();
        match self.opt(key)? {
            Some(s) => {
                s.object()?;
                Ok(s)
            }
            None => Ok(At { value: EMPTY.get_or_init(|| json!({})), pointer: format!("{}/{}", self.pointer, escape_token(key)) }),
        }
    }

    pub fn at_least(&self, key: &str, default: usize, min: usize) -> Result<usize> {
        let v = self.usize_or(key, default)?;
        if v < min {
            return Err(Error::config(format!("{}/{key}", self.pointer), format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }
}

fn complex_json(c: Complex64) -> Value {
    json!([c.re, c.im])
}

fn point_json(p: &C2Point) -> Value {
    json!([complex_json(p.x), complex_json(p.y)])
}

fn map_json(f: &HenonMap) -> Value {
    json!({
        "alpha": complex_json(f.alpha()),
        "delta": complex_json(f.delta()),
        "poly": f.poly().coeffs().iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
    })
}

/// Maps, weights and optional ball noise as given at the top level.
#[derive(Clone, Debug, PartialEq)]
pub struct DistSpec {
    pub maps: Vec<HenonMap>,
    pub weights: Option<Vec<f64>>,
    pub noise_radius: Option<f64>,
}

impl DistSpec {
    pub fn parse(root: &At<'_>) -> Result<Self> {
        let maps_at = root.req("maps")?;
        let maps: Vec<HenonMap> = maps_at.items()?.iter().map(At::henon_map).collect::<Result<_>>()?;
        if maps.is_empty() {
            return Err(maps_at.err("at least one map is required"));
        }
        let weights = match root.opt("weights")? {
            Some(w) => {
                let ws: Vec<f64> = w.items()?.iter().map(At::f64).collect::<Result<_>>()?;
                if ws.len() != maps.len() {
                    return Err(w.err(format!("expected {} weights, got {}", maps.len(), ws.len())));
                }
                MapDistribution::finite(maps.clone(), ws.clone()).map_err(|e| w.err(e.to_string()))?;
                Some(ws)
            }
            None => None,
        };
        let noise_radius = match root.opt("noise_radius")? {
            Some(r) => {
                if maps.len() != 1 {
                    return Err(r.err("ball noise needs exactly one base map"));
                }
                Some(r.positive()?)
            }
            None => None,
        };
        Ok(Self { maps, weights, noise_radius })
    }

    pub fn distribution(&self) -> Result<MapDistribution> {
        if let Some(r) = self.noise_radius {
            return MapDistribution::ball(self.maps[0], r);
        }
        match &self.weights {
            Some(w) => MapDistribution::finite(self.maps.clone(), w.clone()),
            None => MapDistribution::uniform(self.maps.clone()),
        }
    }

    fn write(&self, out: &mut serde_json::Map<String, Value>) {
        out.insert("maps".into(), Value::Array(self.maps.iter().map(map_json).collect()));
        if let Some(w) = &self.weights {
            out.insert("weights".into(), json!(w));
        }
        if let Some(r) = self.noise_radius {
            out.insert("noise_radius".into(), json!(r));
        }
    }
}

/// Probe points: explicit, or the pixel centres of an `(Re y, Im y)` window.
#[derive(Clone, Debug, PartialEq)]
pub enum GridSpec {
    Points(Vec<C2Point>),
    YPlane { anchor: C2Point, extent: f64, resolution: usize },
}

impl GridSpec {
    pub fn parse(at: &At<'_>) -> Result<Self> {
        if at.value.is_array() {
            let pts: Vec<C2Point> = at.items()?.iter().map(At::point).collect::<Result<_>>()?;
            if pts.is_empty() {
                return Err(at.err("point list is empty"));
            }
            return Ok(Self::Points(pts));
        }
        at.only_keys(&["anchor", "extent", "resolution"])?;
        let anchor = at.opt("anchor")?.map_or(Ok(C2Point::default()), |a| a.point())?;
        let extent = at.positive_or("extent", 1.0)?;
        let resolution = at.at_least("resolution", 10, 1)?;
        Ok(Self::YPlane { anchor, extent, resolution })
    }

    pub fn parse_or(section: &At<'_>, key: &str, default: GridSpec) -> Result<Self> {
        section.opt(key)?.map_or(Ok(default), |g| Self::parse(&g))
    }

    pub fn points(&self) -> Vec<C2Point> {
        match self {
            Self::Points(p) => p.clone(),
            Self::YPlane { anchor, extent, resolution } => {
                let spec = crate::escape::SliceSpec::y_plane(*anchor, *extent, *resolution);
                let mut out = Vec::with_capacity(resolution * resolution);
                for j in 0..*resolution {
                    for i in 0..*resolution {
                        out.push(spec.pixel(i, j));
                    }
                }
                out
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Points(p) => Value::Array(p.iter().map(point_json).collect()),
            Self::YPlane { anchor, extent, resolution } => {
                json!({"anchor": point_json(anchor), "extent": extent, "resolution": resolution})
            }
        }
    }
}

fn parse_target(section: &At<'_>) -> Result<MinSetId> {
    match section.opt("target")? {
        None => Ok(MinSetId::Finite(0)),
        Some(t) => {
            if let Ok(s) = t.str() {
                if s == "INFINITY" {
                    return Ok(MinSetId::Infinity);
                }
                return Err(t.err("expected an integer id or \"INFINITY\""));
            }
            Ok(MinSetId::Finite(t.usize()?))
        }
    }
}

fn target_json(t: MinSetId) -> Value {
    match t {
        MinSetId::Finite(i) => json!(i),
        MinSetId::Infinity => json!("INFINITY"),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscoverySection {
    pub grid: GridSpec,
    pub params: DiscoveryParams,
    pub refine: bool,
}

impl DiscoverySection {
    fn parse(s: &At<'_>) -> Result<Self> {
        s.only_keys(&["grid", "burn_in", "n_record", "cluster_eps", "support_samples", "certify_probes", "certify_steps", "refine"])?;
        let d = DiscoveryParams::default();
        Ok(Self {
            grid: GridSpec::parse_or(s, "grid", GridSpec::YPlane { anchor: C2Point::default(), extent: 0.5, resolution: 5 })?,
            params: DiscoveryParams {
                burn_in: s.at_least("burn_in", d.burn_in, 1000)?,
                n_record: s.at_least("n_record", d.n_record, 1)?,
                cluster_eps: s.positive_or("cluster_eps", d.cluster_eps)?,
                support_samples: s.at_least("support_samples", d.support_samples, 1)?,
                certify_probes: s.at_least("certify_probes", d.certify_probes, 1)?,
                certify_steps: s.at_least("certify_steps", d.certify_steps, 1)?,
            },
            refine: s.bool_or("refine", false)?,
        })
    }

    fn to_json(&self) -> Value {
        let p = &self.params;
        json!({
            "grid": self.grid.to_json(),
            "burn_in": p.burn_in,
            "n_record": p.n_record,
            "cluster_eps": p.cluster_eps,
            "support_samples": p.support_samples,
            "certify_probes": p.certify_probes,
            "certify_steps": p.certify_steps,
            "refine": self.refine,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderSection {
    pub anchor: C2Point,
    pub dir1: C2Point,
    pub dir2: C2Point,
    pub extent: f64,
    pub resolution: usize,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreenSection {
    pub points: GridSpec,
    pub max_iter: usize,
    pub tol: f64,
    pub minus: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovSection {
    pub grid: GridSpec,
    pub samples: usize,
    pub n_steps: usize,
    pub backward: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TlSection {
    pub grid: GridSpec,
    pub samples: usize,
    pub max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MopSection {
    pub test_points: GridSpec,
    pub target: MinSetId,
    pub n_min: usize,
    pub n_max: usize,
    pub tl_samples: usize,
    pub tl_max_iter: usize,
    pub budget: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DtlSection {
    pub points: GridSpec,
    pub target: MinSetId,
    pub map_index: usize,
    pub h: f64,
    pub fd_samples: usize,
    pub max_iter: usize,
    pub eps_trunc: f64,
    pub tree_budget: u64,
    pub zeta_samples: usize,
    pub outer_samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BifurcateSection {
    pub v: f64,
    pub u: f64,
    pub t_steps: usize,
    pub eps_per_radius: f64,
    pub probes: Option<GridSpec>,
    pub probe_samples: usize,
    pub probe_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeSection {
    pub grid: GridSpec,
    pub sequences_per_point: usize,
    pub max_iter: usize,
}

/// One fully resolved experiment: the shared distribution plus every
/// command section with defaults filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub rho_margin: f64,
    pub dist: DistSpec,
    pub minsets: DiscoverySection,
    pub render: RenderSection,
    pub green: Option<GreenSection>,
    pub lyapunov: LyapunovSection,
    pub tl: TlSection,
    pub mop: MopSection,
    pub dtl: DtlSection,
    pub bifurcate: BifurcateSection,
    pub escape: EscapeSection,
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "rho_margin",
    "maps",
    "weights",
    "noise_radius",
    "description",
    "render-julia",
    "green",
    "lyapunov",
    "minsets",
    "tl",
    "mop",
    "dtl",
    "bifurcate",
    "escape-stats",
];

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::config("/", format!("malformed JSON: {e}")))?;
        Self::from_value(&v)
    }

    pub fn from_value(v: &Value) -> Result<Self> {
        let root = At::root(v);
        root.only_keys(TOP_KEYS)?;
        let seed = root.opt("seed")?.map_or(Ok(0), |s| s.u64())?;
        let rho_margin = root.positive_or("rho_margin", 1.0)?;
        let dist = DistSpec::parse(&root)?;
        let minsets = DiscoverySection::parse(&root.section("minsets")?)?;

        let s = root.section("render-julia")?;
        s.only_keys(&["anchor", "dir1", "dir2", "extent", "resolution", "max_iter", "tol"])?;
        let y_plane = crate::escape::SliceSpec::y_plane(C2Point::default(), 1.0, 1);
        let render = RenderSection {
            anchor: s.opt("anchor")?.map_or(Ok(C2Point::default()), |a| a.point())?,
            dir1: s.opt("dir1")?.map_or(Ok(y_plane.dir1), |a| a.point())?,
            dir2: s.opt("dir2")?.map_or(Ok(y_plane.dir2), |a| a.point())?,
            extent: s.positive_or("extent", 2.0)?,
            resolution: s.at_least("resolution", 256, 1)?,
            max_iter: s.at_least("max_iter", 500, 1)?,
            tol: s.positive_or("tol", 1e-6)?,
        };

        let green = match root.opt("green")? {
            None => None,
            Some(s) => {
                s.only_keys(&["points", "max_iter", "tol", "direction"])?;
                let minus = match s.opt("direction")? {
                    None => false,
                    Some(d) => match d.str()? {
                        "plus" => false,
                        "minus" => true,
                        _ => return Err(d.err("expected \"plus\" or \"minus\"")),
                    },
                };
                Some(GreenSection {
                    points: GridSpec::parse(&s.req("points")?)?,
                    max_iter: s.at_least("max_iter", 1000, 1)?,
                    tol: s.positive_or("tol", 1e-6)?,
                    minus,
                })
            }
        };

        let s = root.section("lyapunov")?;
        s.only_keys(&["grid", "samples", "n_steps", "backward"])?;
        let lyapunov = LyapunovSection {
            grid: GridSpec::parse_or(&s, "grid", GridSpec::Points(vec![C2Point::default()]))?,
            samples: s.at_least("samples", 10, crate::lyapunov::MIN_SAMPLES)?,
            n_steps: s.at_least("n_steps", 1000, crate::lyapunov::MIN_STEPS)?,
            backward: s.bool_or("backward", false)?,
        };

        let s = root.section("tl")?;
        s.only_keys(&["grid", "samples", "max_iter"])?;
        let tl = TlSection {
            grid: GridSpec::parse_or(&s, "grid", GridSpec::YPlane { anchor: C2Point::default(), extent: 1.0, resolution: 10 })?,
            samples: s.at_least("samples", 1000, 100)?,
            max_iter: s.at_least("max_iter", 10_000, 1)?,
        };

        let s = root.section("mop")?;
        s.only_keys(&["test_points", "target", "n_min", "n_max", "tl_samples", "tl_max_iter", "budget"])?;
        let n_min = s.usize_or("n_min", 1)?;
        let mop = MopSection {
            test_points: GridSpec::parse_or(&s, "test_points", GridSpec::YPlane { anchor: C2Point::default(), extent: 0.3, resolution: 4 })?,
            target: parse_target(&s)?,
            n_min,
            n_max: s.at_least("n_max", 60, n_min)?,
            tl_samples: s.at_least("tl_samples", 1000, 100)?,
            tl_max_iter: s.at_least("tl_max_iter", 10_000, 1)?,
            budget: s.opt("budget")?.map_or(Ok(crate::operator::TREE_BUDGET), |b| b.u64())?,
        };

        let s = root.section("dtl")?;
        s.only_keys(&[
            "points",
            "target",
            "map_index",
            "h",
            "fd_samples",
            "max_iter",
            "eps_trunc",
            "tree_budget",
            "zeta_samples",
            "outer_samples",
        ])?;
        let dd = crate::operator::DerivativeParams::default();
        let dtl = DtlSection {
            points: GridSpec::parse_or(&s, "points", GridSpec::Points(vec![C2Point::default()]))?,
            target: parse_target(&s)?,
            map_index: s.usize_or("map_index", 0)?,
            h: s.positive_or("h", 0.05)?,
            fd_samples: s.at_least("fd_samples", 100_000, 100)?,
            max_iter: s.at_least("max_iter", dd.max_iter, 1)?,
            eps_trunc: s.positive_or("eps_trunc", dd.eps_trunc)?,
            tree_budget: s.opt("tree_budget")?.map_or(Ok(dd.tree_budget), |b| b.u64())?,
            zeta_samples: s.at_least("zeta_samples", dd.zeta_samples, 1)?,
            outer_samples: s.at_least("outer_samples", dd.outer_samples, 2)?,
        };

        let s = root.section("bifurcate")?;
        s.only_keys(&["v", "u", "t_steps", "eps_per_radius", "probes", "probe_samples", "probe_max_iter"])?;
        let v = s.positive_or("v", 0.01)?;
        let u_at = s.opt("u")?;
        let u = u_at.as_ref().map_or(Ok(0.5), |a| a.positive())?;
        if u < v {
            return Err(Error::config(format!("{}/u", s.pointer), format!("u must be at least v = {v}")));
        }
        let bifurcate = BifurcateSection {
            v,
            u,
            t_steps: s.at_least("t_steps", 10, 1)?,
            eps_per_radius: s.f64_or("eps_per_radius", 0.5)?,
            probes: s.opt("probes")?.map(|p| GridSpec::parse(&p)).transpose()?,
            probe_samples: s.at_least("probe_samples", 100, 100)?,
            probe_max_iter: s.at_least("probe_max_iter", 1000, 1)?,
        };

        let s = root.section("escape-stats")?;
        s.only_keys(&["grid", "sequences_per_point", "max_iter"])?;
        let escape = EscapeSection {
            grid: GridSpec::parse_or(&s, "grid", GridSpec::YPlane { anchor: C2Point::default(), extent: 1.0, resolution: 10 })?,
            sequences_per_point: s.at_least("sequences_per_point", 1, 1)?,
            max_iter: s.at_least("max_iter", 10_000, 1)?,
        };

        Ok(Self { seed, rho_margin, dist, minsets, render, green, lyapunov, tl, mop, dtl, bifurcate, escape })
    }

    pub fn distribution(&self) -> Result<MapDistribution> {
        self.dist.distribution()
    }

    pub fn family(&self) -> Result<NoiseFamily> {
        if self.dist.maps.len() != 1 {
            return Err(Error::config("/maps", "a noise family needs exactly one base map"));
        }
        NoiseFamily::new(self.dist.maps[0], self.bifurcate.v, self.bifurcate.u)
    }

    /// The resolved configuration in input schema; feeding it back
    /// reproduces the run.
    pub fn to_json(&self) -> Value {
        let mut out = serde_json::Map::new();
        out.insert("seed".into(), json!(self.seed));
        out.insert("rho_margin".into(), json!(self.rho_margin));
        self.dist.write(&mut out);
        out.insert("minsets".into(), self.minsets.to_json());
        let r = &self.render;
        out.insert(
            "render-julia".into(),
            json!({
                "anchor": point_json(&r.anchor), "dir1": point_json(&r.dir1), "dir2": point_json(&r.dir2),
                "extent": r.extent, "resolution": r.resolution, "max_iter": r.max_iter, "tol": r.tol,
            }),
        );
        if let Some(g) = &self.green {
            out.insert(
                "green".into(),
                json!({
                    "points": g.points.to_json(), "max_iter": g.max_iter, "tol": g.tol,
                    "direction": if g.minus { "minus" } else { "plus" },
                }),
            );
        }
        let l = &self.lyapunov;
        out.insert(
            "lyapunov".into(),
            json!({"grid": l.grid.to_json(), "samples": l.samples, "n_steps": l.n_steps, "backward": l.backward}),
        );
        let t = &self.tl;
        out.insert("tl".into(), json!({"grid": t.grid.to_json(), "samples": t.samples, "max_iter": t.max_iter}));
        let m = &self.mop;
        out.insert(
            "mop".into(),
            json!({
                "test_points": m.test_points.to_json(), "target": target_json(m.target), "n_min": m.n_min,
                "n_max": m.n_max, "tl_samples": m.tl_samples, "tl_max_iter": m.tl_max_iter, "budget": m.budget,
            }),
        );
        let d = &self.dtl;
        out.insert(
            "dtl".into(),
            json!({
                "points": d.points.to_json(), "target": target_json(d.target), "map_index": d.map_index, "h": d.h,
                "fd_samples": d.fd_samples, "max_iter": d.max_iter, "eps_trunc": d.eps_trunc,
                "tree_budget": d.tree_budget, "zeta_samples": d.zeta_samples, "outer_samples": d.outer_samples,
            }),
        );
        let b = &self.bifurcate;
        let mut bj = json!({
            "v": b.v, "u": b.u, "t_steps": b.t_steps, "eps_per_radius": b.eps_per_radius,
            "probe_samples": b.probe_samples, "probe_max_iter": b.probe_max_iter,
        });
        if let Some(p) = &b.probes {
            bj["probes"] = p.to_json();
        }
        out.insert("bifurcate".into(), bj);
        let e = &self.escape;
        out.insert(
            "escape-stats".into(),
            json!({"grid": e.grid.to_json(), "sequences_per_point": e.sequences_per_point, "max_iter": e.max_iter}),
        );
        Value::Object(out)
    }
}

/// Version stamp embedded in every output.
#[derive(Clone, Debug, Serialize)]
pub struct ToolVersion {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: ToolVersion = ToolVersion { name: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION") };

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"maps": [{"alpha": 0, "delta": 0.1, "poly": [1, 0, 0]}]}"#;

    #[test]
    fn minimal_config_resolves() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c.seed, 0);
        assert_eq!(c.dist.maps.len(), 1);
        assert_eq!(c.render.resolution, 256);
    }

    #[test]
    fn missing_delta_names_pointer() {
        let e = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": 0, "poly": [1, 0, 0]}]}"#).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("/maps/0/delta"), "{e}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let e = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": 0, "delta": 1, "poly": [1, 0, 0]}], "mapz": 1}"#).unwrap_err();
        assert!(e.to_string().contains("/mapz"), "{e}");
        let e = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": 0, "delta": 1, "poly": [1, 0, 0]}], "tl": {"samples": 5}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("/tl/samples"), "{e}");
    }

    #[test]
    fn bad_values_name_pointer() {
        let e = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": 0, "delta": 0, "poly": [1, 0, 0]}]}"#).unwrap_err();
        assert!(e.to_string().contains("/maps/0/delta"), "{e}");
        let e = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": 0, "delta": 1, "poly": [1]}]}"#).unwrap_err();
        assert!(e.to_string().contains("/maps/0/poly"), "{e}");
        let e = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": "x", "delta": 1, "poly": [1, 0, 0]}]}"#).unwrap_err();
        assert!(e.to_string().contains("/maps/0/alpha"), "{e}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_value(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_json(), again.to_json());
    }
}
