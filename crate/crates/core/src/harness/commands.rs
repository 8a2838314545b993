//! One function per subcommand. Each reads a resolved config, computes,
//! and writes its outputs into `out`.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::bifurcation::{locate_bifurcations, scan_family, uniform_t_grid, SweepParams};
use crate::dist::{MapDistribution, SequenceSeed};
use crate::error::{Error, Result};
use crate::escape::{boundary_extract, green_minus, green_plus, raster_slice, CellVerdict, GreenConstants, SliceSpec};
use crate::harness::config::{ExperimentConfig, TOOL};
use crate::harness::escape_stats;
use crate::harness::output::{envelope, num, pgm_bytes, Table, Written};
use crate::lyapunov::{backward_lyapunov_statistics, lyapunov_statistics, LyapunovReport};
use crate::map::{C2Point, FiltrationParams};
use crate::minsets::{detect_period, discover_minimal_sets, estimate_tl, Discovery, MinSetId, MinimalSetDescriptor};
use crate::operator::{fd_derivative_tl, fit_convergence_rate, weight_derivative_tl, DerivativeParams, RateFitParams};
use crate::sequence::Sampled;

const STREAM_RENDER: u64 = 0x01;
const STREAM_GREEN: u64 = 0x02;
const STREAM_LYAPUNOV: u64 = 0x03;
const STREAM_DISCOVERY: u64 = 0x04;
const STREAM_TL: u64 = 0x05;
const STREAM_MOP: u64 = 0x06;
const STREAM_DTL: u64 = 0x07;
const STREAM_SWEEP: u64 = 0x08;
const STREAM_ESCAPE: u64 = 0x09;
const STREAM_BACKWARD_SUPPORT: u64 = 0x0A;

/// Support draws standing in for a ball-noise distribution wherever a
/// finite inverse is needed.
pub const BACKWARD_SUPPORT: usize = 64;

fn seed(cfg: &ExperimentConfig, stream: u64) -> SequenceSeed {
    SequenceSeed::new(cfg.seed, stream)
}

fn point_cols(z: &C2Point) -> [String; 4] {
    z.to_reals().map(num)
}

const POINT_HEADER: [&str; 4] = ["x_re", "x_im", "y_re", "y_im"];

fn header(extra: &[&str]) -> Vec<String> {
    POINT_HEADER.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn table(cols: &[String]) -> Result<Table> {
    Table::new(&cols.iter().map(String::as_str).collect::<Vec<_>>())
}

fn filtration(cfg: &ExperimentConfig, dist: &MapDistribution) -> Result<FiltrationParams> {
    dist.filtration(cfg.rho_margin)
}

/// Finite stand-in used for backward quantities of ball noise.
pub fn finite_approximation(dist: &MapDistribution, s: SequenceSeed) -> Result<MapDistribution> {
    match dist {
        MapDistribution::Finite(_) => Ok(dist.clone()),
        MapDistribution::Ball(_) => MapDistribution::uniform(dist.support_sample(BACKWARD_SUPPORT, s)),
    }
}

#[derive(Serialize)]
struct RenderReport {
    width: usize,
    height: usize,
    v_max: f64,
    escaped: usize,
    bounded: usize,
    uncertain: usize,
    boundary_pixels: usize,
    pixel_pitch: f64,
    filtration: FiltrationParams,
}

pub fn render_julia(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let dist = cfg.distribution()?;
    let params = filtration(cfg, &dist)?;
    let consts = GreenConstants::for_dist(&dist, &params)?;
    let r = &cfg.render;
    let spec = SliceSpec { anchor: r.anchor, dir1: r.dir1, dir2: r.dir2, extent: r.extent, resolution: r.resolution };
    spec.validate().map_err(|e| Error::config("/render-julia", e.to_string()))?;
    let seq = Sampled::new(&dist, seed(cfg, STREAM_RENDER));
    let raster = raster_slice(&seq, &spec, &params, &consts, r.max_iter, r.tol)?;
    let v_max = raster.max_green();
    let boundary = boundary_extract(&raster);
    let config = cfg.to_json();
    let comments = vec![
        format!("{} {}", TOOL.name, TOOL.version),
        format!("v_max {}", num(v_max)),
        format!("config {}", serde_json::to_string(&config).map_err(|e| Error::Io(e.to_string()))?),
    ];
    let mut w = Written::default();
    w.bytes(out, "julia.pgm", &pgm_bytes(&raster, v_max, &comments))?;

    let mut t = Table::new(&["i", "j", "verdict", "green", "n"])?;
    for j in 0..raster.height {
        for i in 0..raster.width {
            let c = raster.get(i, j);
            t.row([i.to_string(), j.to_string(), c.verdict.label().to_string(), num(c.green), c.n.to_string()])?;
        }
    }
    w.table(out, "julia.csv", t)?;
    let mut b = Table::new(&["i", "j"])?;
    for (i, j) in &boundary {
        b.row([i.to_string(), j.to_string()])?;
    }
    w.table(out, "boundary.csv", b)?;

    let report = RenderReport {
        width: raster.width,
        height: raster.height,
        v_max,
        escaped: raster.count(|v| matches!(v, CellVerdict::EscapedAt(_))),
        bounded: raster.count(|v| *v == CellVerdict::Bounded),
        uncertain: raster.uncertain_count(),
        boundary_pixels: boundary.len(),
        pixel_pitch: spec.pixel_pitch(),
        filtration: params,
    };
    w.json(out, "julia.json", &envelope("render-julia", &config, report)?)?;
    Ok(w)
}

pub fn green(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let g = cfg.green.as_ref().ok_or_else(|| Error::config("/green", "missing required section"))?;
    let dist = cfg.distribution()?;
    let s = seed(cfg, STREAM_GREEN);
    let backward_dist = if g.minus { Some(finite_approximation(&dist, seed(cfg, STREAM_BACKWARD_SUPPORT))?) } else { None };
    // Backward radii and constants belong to the swap-conjugated inverses.
    let chart = match &backward_dist {
        Some(bd) => bd.inverse_distribution()?,
        None => dist.clone(),
    };
    let params = filtration(cfg, &chart)?;
    let consts = GreenConstants::for_dist(&chart, &params)?;
    let mut t = table(&header(&["status", "green", "error_bound", "n_used"]))?;
    let mut rows = Vec::new();
    for z in g.points.points() {
        let res = match &backward_dist {
            Some(bd) => green_minus(&Sampled::new(bd, s), z, &params, &consts, g.tol, g.max_iter),
            None => green_plus(&Sampled::new(&dist, s), z, &params, &consts, g.tol, g.max_iter),
        };
        let (status, value, bound, n) = match res {
            Ok(e) => ("OK", e.value, e.error_bound, e.n_used),
            Err(Error::GreenIndeterminate { partial, iterations }) => ("INDETERMINATE", partial, f64::NAN, iterations),
            Err(e) => return Err(e),
        };
        let mut row = point_cols(&z).to_vec();
        row.extend([status.to_string(), num(value), num(bound), n.to_string()]);
        t.row(&row)?;
        rows.push(json!({"z": z, "status": status, "green": value, "error_bound": if bound.is_finite() { json!(bound) } else { Value::Null }, "n_used": n}));
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "green.csv", t)?;
    w.json(out, "green.json", &envelope("green", &config, json!({"filtration": params, "constants": consts, "points": rows}))?)?;
    Ok(w)
}

#[derive(Serialize)]
struct LyapunovPoint {
    z: C2Point,
    exponent: Option<f64>,
    ci95: Option<f64>,
    n: usize,
    samples: usize,
    escaped_fraction: f64,
}

pub fn lyapunov(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let l = &cfg.lyapunov;
    let dist = cfg.distribution()?;
    let base = seed(cfg, STREAM_LYAPUNOV);
    let backward_dist =
        if l.backward { Some(finite_approximation(&dist, seed(cfg, STREAM_BACKWARD_SUPPORT))?) } else { None };
    let mut points = Vec::new();
    let mut runs = Table::new(&["point", "run", "outcome", "exponent"])?;
    for (p, z) in l.grid.points().iter().enumerate() {
        let s = base.child(p as u64);
        let res: Result<LyapunovReport> = match &backward_dist {
            Some(bd) => backward_lyapunov_statistics(bd, *z, l.samples, l.n_steps, s),
            None => lyapunov_statistics(&dist, *z, l.samples, l.n_steps, s),
        };
        match res {
            Ok(r) => {
                for (k, run) in r.runs.iter().enumerate() {
                    let (outcome, e) = match run.exponent() {
                        Some(e) => ("EXPONENT", num(e)),
                        None => ("ESCAPED", String::new()),
                    };
                    runs.row([p.to_string(), k.to_string(), outcome.to_string(), e])?;
                }
                points.push(LyapunovPoint {
                    z: *z,
                    exponent: Some(r.exponent),
                    ci95: Some(r.ci95_halfwidth),
                    n: r.n_steps,
                    samples: r.samples,
                    escaped_fraction: r.escaped_fraction,
                });
            }
            Err(Error::AllEscaped) => {
                for k in 0..l.samples {
                    runs.row([p.to_string(), k.to_string(), "ESCAPED".to_string(), String::new()])?;
                }
                points.push(LyapunovPoint { z: *z, exponent: None, ci95: None, n: l.n_steps, samples: l.samples, escaped_fraction: 1.0 });
            }
            Err(e) => return Err(e),
        }
    }
    let mut summary = table(&header(&["exponent", "ci95", "n", "samples", "escaped_fraction"]))?;
    for p in &points {
        let mut row = point_cols(&p.z).to_vec();
        row.extend([
            p.exponent.map(num).unwrap_or_default(),
            p.ci95.map(num).unwrap_or_default(),
            p.n.to_string(),
            p.samples.to_string(),
            num(p.escaped_fraction),
        ]);
        summary.row(&row)?;
    }
    let config = cfg.to_json();
    let direction = if l.backward { "backward" } else { "forward" };
    let approx = match (&backward_dist, &dist) {
        (Some(_), MapDistribution::Ball(_)) => json!(format!("uniform over {BACKWARD_SUPPORT} support draws")),
        _ => Value::Null,
    };
    let mut w = Written::default();
    w.table(out, "lyapunov.csv", summary)?;
    w.table(out, "lyapunov_runs.csv", runs)?;
    w.json(
        out,
        "lyapunov.json",
        &envelope("lyapunov", &config, json!({"direction": direction, "backward_approximation": approx, "points": points}))?,
    )?;
    Ok(w)
}

/// Discovery as configured in the `minsets` section, shared by every
/// command that needs minimal sets.
pub fn discover(cfg: &ExperimentConfig, dist: &MapDistribution, params: &FiltrationParams) -> Result<Discovery> {
    let m = &cfg.minsets;
    let s = seed(cfg, STREAM_DISCOVERY);
    let mut found = discover_minimal_sets(dist, params, &m.grid.points(), &m.params, s)?;
    if m.refine {
        for d in found.descriptors.iter_mut().filter(|d| d.is_finite()) {
            detect_period(dist, d, m.params.cluster_eps, 2, s)?;
        }
    }
    Ok(found)
}

fn descriptor<'a>(found: &'a Discovery, id: MinSetId, pointer: &str) -> Result<&'a MinimalSetDescriptor> {
    found
        .descriptors
        .iter()
        .find(|d| d.id == id)
        .ok_or_else(|| Error::InvalidArgument(format!("{pointer}: no minimal set with id {id} was discovered")))
}

pub fn minsets(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let dist = cfg.distribution()?;
    let params = filtration(cfg, &dist)?;
    let found = discover(cfg, &dist, &params)?;
    let mut t = Table::new(&["id", "period", "cloud_size", "hulls", "capture_radius", "contraction"])?;
    for d in &found.descriptors {
        t.row([
            d.id.to_string(),
            d.period.to_string(),
            d.cloud.len().to_string(),
            d.hulls.len().to_string(),
            num(d.capture_radius),
            num(d.contraction),
        ])?;
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "minsets.csv", t)?;
    w.json(out, "minsets.json", &envelope("minsets", &config, json!({"filtration": params, "discovery": found}))?)?;
    Ok(w)
}

pub fn tl(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let dist = cfg.distribution()?;
    let params = filtration(cfg, &dist)?;
    let found = discover(cfg, &dist, &params)?;
    let ids: Vec<MinSetId> = found.descriptors.iter().map(|d| d.id).collect();
    let mut cols = Vec::new();
    for id in &ids {
        cols.push(format!("T_{id}"));
        cols.push(format!("se_{id}"));
    }
    cols.push("unresolved".into());
    let extra: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = table(&header(&extra))?;
    let base = seed(cfg, STREAM_TL);
    let mut estimates = Vec::new();
    for (p, z) in cfg.tl.grid.points().iter().enumerate() {
        let est = estimate_tl(&dist, &found.descriptors, &params, *z, cfg.tl.samples, cfg.tl.max_iter, base.child(p as u64))?;
        let mut row = point_cols(z).to_vec();
        for id in &ids {
            row.push(num(est.probability(*id)));
            row.push(num(est.std_error(*id)));
        }
        row.push(num(est.unresolved));
        t.row(&row)?;
        estimates.push(json!({"z": z, "estimate": est}));
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "tl.csv", t)?;
    w.json(out, "tl.json", &envelope("tl", &config, json!({"minsets": ids, "points": estimates}))?)?;
    Ok(w)
}

pub fn mop(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let m = &cfg.mop;
    let dist = cfg.distribution()?;
    let params = filtration(cfg, &dist)?;
    let found = discover(cfg, &dist, &params)?;
    let l = descriptor(&found, m.target, "/mop/target")?;
    let fit = RateFitParams { n_min: m.n_min, n_max: m.n_max, tl_samples: m.tl_samples, tl_max_iter: m.tl_max_iter, budget: m.budget };
    let rate = fit_convergence_rate(&dist, &found.descriptors, l, &params, &m.test_points.points(), &fit, seed(cfg, STREAM_MOP))?;
    let mut t = Table::new(&["n", "sup_error", "fitted"])?;
    for (n, e) in &rate.all_errors {
        let fitted = (rate.n_range.0..=rate.n_range.1).contains(n);
        t.row([n.to_string(), num(*e), fitted.to_string()])?;
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "mop.csv", t)?;
    w.json(out, "mop.json", &envelope("mop", &config, &rate)?)?;
    Ok(w)
}

pub fn dtl(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let d = &cfg.dtl;
    let dist = cfg.distribution()?;
    let params = filtration(cfg, &dist)?;
    let found = discover(cfg, &dist, &params)?;
    descriptor(&found, d.target, "/dtl/target")?;
    let dp = DerivativeParams {
        eps_trunc: d.eps_trunc,
        tree_budget: d.tree_budget,
        zeta_samples: d.zeta_samples,
        outer_samples: d.outer_samples,
        max_iter: d.max_iter,
    };
    let base = seed(cfg, STREAM_DTL);
    let mut t = table(&header(&["neumann", "neumann_se", "finite_difference", "fd_se", "abs_diff", "tolerance", "agree"]))?;
    let mut rows = Vec::new();
    for (p, z) in d.points.points().iter().enumerate() {
        let s = base.child(p as u64);
        let neu = weight_derivative_tl(&dist, &found.descriptors, d.target, &params, d.map_index, *z, &dp, s)?;
        let fd = fd_derivative_tl(&dist, &found.descriptors, d.target, &params, d.map_index, *z, d.h, d.fd_samples, d.max_iter, s)?;
        let diff = (neu.value - fd.value).abs();
        let tol = (3.0 * neu.std_error.hypot(fd.std_error)).max(0.02);
        let mut row = point_cols(z).to_vec();
        row.extend([num(neu.value), num(neu.std_error), num(fd.value), num(fd.std_error), num(diff), num(tol), (diff <= tol).to_string()]);
        t.row(&row)?;
        rows.push(json!({"z": z, "neumann": neu, "finite_difference": fd, "abs_diff": diff, "tolerance": tol}));
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "dtl.csv", t)?;
    w.json(out, "dtl.json", &envelope("dtl", &config, json!({"points": rows}))?)?;
    Ok(w)
}

pub fn bifurcate(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let b = &cfg.bifurcate;
    let fam = cfg.family()?;
    let params = SweepParams {
        discovery: cfg.minsets.params,
        grid: cfg.minsets.grid.points(),
        eps_per_radius: b.eps_per_radius,
        probes: b.probes.as_ref().map(|p| p.points()).unwrap_or_default(),
        probe_samples: b.probe_samples,
        probe_max_iter: b.probe_max_iter,
    };
    let report = scan_family(&fam, &uniform_t_grid(b.t_steps), &params, seed(cfg, STREAM_SWEEP))?;
    let intervals = locate_bifurcations(&report);
    let mut t = Table::new(&["t", "minset_count", "all_attracting", "finite_minsets", "radius", "cluster_eps", "mean_stable"])?;
    for r in &report.per_t {
        t.row([
            num(r.t),
            r.minset_count.to_string(),
            r.all_attracting.to_string(),
            r.finite_minsets.to_string(),
            num(r.radius),
            num(r.cluster_eps),
            r.mean_stable.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "bifurcation.csv", t)?;
    w.json(out, "bifurcation.json", &envelope("bifurcate", &config, json!({"sweep": report, "intervals": intervals}))?)?;
    Ok(w)
}

pub fn escape_census(cfg: &ExperimentConfig, out: &Path) -> Result<Written> {
    let e = &cfg.escape;
    let dist = cfg.distribution()?;
    let params = filtration(cfg, &dist)?;
    let grid = e.grid.points();
    let summary = escape_stats(&dist, &params, &grid, e.sequences_per_point, e.max_iter, seed(cfg, STREAM_ESCAPE))?;
    let mut t = table(&header(&["escaped", "bounded", "uncertain"]))?;
    for (z, c) in grid.iter().zip(&summary.per_point) {
        let mut row = point_cols(z).to_vec();
        row.extend(c.iter().map(usize::to_string));
        t.row(&row)?;
    }
    let config = cfg.to_json();
    let mut w = Written::default();
    w.table(out, "escape.csv", t)?;
    w.json(out, "escape.json", &envelope("escape-stats", &config, &summary)?)?;
    Ok(w)
}

/// Quick structural checks with exact or closed-form answers.
pub fn selftest() -> Vec<(&'static str, bool)> {
    use crate::map::{in_v_plus, HenonMap};
    use crate::minsets::digraph_period;
    use crate::Complex64;

    let mut out = Vec::new();
    let f = HenonMap::real(0.3, 0.1, &[1.0, -0.5, 0.2]).expect("valid map");
    let z = C2Point::from_reals(0.4, -0.2, 1.1, 0.7);
    out.push(("inverse roundtrip", f.apply_inverse(f.apply(z)).distance(&z) <= 1e-12 * (1.0 + z.norm())));
    let j = f.jacobian(z);
    out.push(("jacobian determinant equals delta", (crate::map::det2(&j) - f.delta()).norm() < 1e-12));
    let g = f.inverse_as_plus();
    out.push(("swap conjugation", g.apply(z.swap()).swap().distance(&f.apply_inverse(z)) < 1e-12));
    let point_mass = MapDistribution::point_mass(HenonMap::real(0.0, 0.1, &[1.0, 0.0, 0.0]).expect("valid map"));
    let escape_ok = point_mass.filtration(1.0).and_then(|p| {
        let far = C2Point::new(Complex64::new(0.0, 0.0), Complex64::new(10.0 * p.r, 0.0));
        let s = escape_stats(&point_mass, &p, &[far], 4, 50, SequenceSeed::new(0, 0))?;
        Ok(in_v_plus(far, p.r) && s.escaped_fraction == 1.0)
    });
    out.push(("V_R+ grid escapes", escape_ok.unwrap_or(false)));
    let bounded_ok = point_mass.filtration(1.0).and_then(|p| {
        let s = escape_stats(&point_mass, &p, &[C2Point::default()], 2, 200, SequenceSeed::new(0, 0))?;
        Ok(s.bounded_fraction == 1.0)
    });
    out.push(("attracting basin bounded", bounded_ok.unwrap_or(false)));
    out.push(("three-cycle digraph period", digraph_period(&[vec![1], vec![2], vec![0]]).map(|(p, _)| p).ok() == Some(3)));
    let bad = ExperimentConfig::from_json_str(r#"{"maps": [{"alpha": 0, "poly": [1, 0, 0]}]}"#);
    out.push(("schema error names pointer", matches!(bad, Err(ref e) if e.is_config() && e.to_string().contains("/maps/0/delta"))));
    out
}
