//! Both sides of the area-distortion inequalities, sharpness families, and
//! structured reports.
//!
//! Everything is evaluated in the mirrored frame `g(z) = f(1/z)`, where the
//! sets live in the unit disk and the comparison map is `g₀(z) = z/(1-pz)`.
//! A set given in the original frame (a subset of the exterior disk) is
//! inverted first; `|f₀(E)| = |g₀(1/E)|`.

use crate::beltrami::BeltramiSolution;
use crate::error::{Error, Result};
use crate::exec::{map_range, Exec};
use crate::extremal::{inverse_stretch, pole_stretch, DistortionParams, StackedMap};
use crate::geometry::{check_pole, pseudo_disk, Disk, PseudoAnnulus};
use crate::measure::{
    area, integrate, piecewise_reference, pushforward_area, reference_area, weighted_pushforward, weighted_reference,
    Estimate, Frame, QuadSpec, Region, Weight,
};
use crate::transforms::{hilbert, sample_cell_average, GridSpec};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Relative slack on inequality checks for floating-point round-off.
pub const ROUNDOFF: f64 = 1e-12;
/// Standard errors allowed on either side of a check.
pub const SIGMAS: f64 = 3.0;
pub const DEFAULT_EQUALITY_FLOOR: f64 = 0.01;
pub const TH3_EQUALITY_FLOOR: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    Th1i,
    Th1ii,
    Th1iii,
    Th2,
    Th3,
}

impl TheoremId {
    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Th1i => "th1i",
            TheoremId::Th1ii => "th1ii",
            TheoremId::Th1iii => "th1iii",
            TheoremId::Th2 => "th2",
            TheoremId::Th3 => "th3",
        }
    }
}

impl std::str::FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "th1i" => TheoremId::Th1i,
            "th1ii" => TheoremId::Th1ii,
            "th1iii" => TheoremId::Th1iii,
            "th2" => TheoremId::Th2,
            "th3" => TheoremId::Th3,
            other => return Err(Error::Parse(format!("unknown theorem '{other}'"))),
        })
    }
}

/// What a report asserts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "floor")]
pub enum CheckKind {
    /// `lhs ≤ rhs` (and `lower ≤ lhs` when a lower bound is present).
    Inequality,
    /// `|lhs/rhs - 1| ≤ max(floor, 3σ)`.
    Equality(f64),
}

impl CheckKind {
    pub fn equality() -> Self {
        CheckKind::Equality(DEFAULT_EQUALITY_FLOOR)
    }
}

/// Mirrored (`E′ ⊂ 𝔻`) or original (`E ⊂ 𝔻*`) description of a set.
#[derive(Clone, Debug, PartialEq)]
pub enum FramedRegion {
    Mirror(Region),
    Original(Region),
}

impl FramedRegion {
    pub fn mirror(&self) -> Result<Region> {
        match self {
            FramedRegion::Mirror(r) => Ok(r.clone()),
            FramedRegion::Original(r) => r.invert(),
        }
    }

    fn describe(&self) -> Result<(String, String)> {
        let brief = |r: &Region| match r {
            Region::Mask(m) => format!("mask({}x{}, h={})", m.rows, m.cols, m.h),
            other => serde_json::to_string(other).unwrap_or_else(|_| other.kind().to_string()),
        };
        Ok(match self {
            FramedRegion::Mirror(r) => (brief(r), r.invert().map(|o| brief(&o)).unwrap_or_else(|_| "n/a".into())),
            FramedRegion::Original(r) => (brief(&r.invert()?), brief(r)),
        })
    }
}

/// The map under test, in the mirrored frame.
#[derive(Clone, Copy, Debug)]
pub enum MapSource<'a> {
    Analytic(&'a crate::extremal::PiecewiseQCMap),
    Grid(&'a BeltramiSolution),
}

impl MapSource<'_> {
    fn label(&self) -> String {
        match self {
            MapSource::Analytic(m) => m.label.clone(),
            MapSource::Grid(s) => format!("beltrami_solution(n={}, L={})", s.grid().n, s.grid().half_width),
        }
    }

    /// `∫_E w^power J dm`.
    fn weighted(&self, e: &Region, w: &Weight, power: f64, q: &QuadSpec) -> Result<Estimate> {
        match self {
            MapSource::Analytic(m) => weighted_pushforward(m, e, w, power, q),
            MapSource::Grid(s) => {
                let grid = s.grid();
                let frac = grid.region_fraction(e);
                let weight: Vec<f64> = frac
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| if f == 0.0 { 0.0 } else { f * w.eval(grid.point_at(i)).powf(power) })
                    .collect();
                if weight.iter().any(|x| *x < 0.0 || x.is_nan()) {
                    return Err(Error::NegativeWeight);
                }
                let value = s.area_with(&weight);
                let err = grid_error_proxy(grid, e, &frac, s.p, q)?;
                Ok(Estimate {
                    value,
                    std_err: err * value.abs(),
                    samples: grid.len() as u64,
                    exact: false,
                })
            }
        }
    }

    fn pushforward(&self, e: &Region, q: &QuadSpec) -> Result<Estimate> {
        match self {
            MapSource::Analytic(m) => pushforward_area(m, e, q),
            MapSource::Grid(_) => self.weighted(e, &Weight::Constant(1.0), 1.0, q),
        }
    }
}

/// Relative error of the cell-fraction rule on the conformal reference
/// integrand, used as the error bar of grid-based integrals.
fn grid_error_proxy(grid: GridSpec, e: &Region, frac: &[f64], p: f64, q: &QuadSpec) -> Result<f64> {
    let h2 = grid.h().powi(2);
    let quad: f64 = frac
        .iter()
        .enumerate()
        .filter(|(_, f)| **f > 0.0)
        .map(|(i, f)| f * Frame::G0.jacobian(p, grid.point_at(i)))
        .sum::<f64>()
        * h2;
    let exact = reference_area(e, p, Frame::G0, q)?.value;
    Ok(if exact > 0.0 { (quad / exact - 1.0).abs() } else { 0.0 })
}

/// One verification row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub theorem: TheoremId,
    pub check: CheckKind,
    pub map: String,
    pub p: f64,
    pub r: Option<f64>,
    #[serde(rename = "K")]
    pub big_k: f64,
    pub k: f64,
    /// Number of stacked layers, when applicable.
    pub n: Option<usize>,
    pub quad: Option<QuadSpec>,
    pub grid: Option<GridSpec>,
    pub seed: Option<u64>,
    pub region_mirror: String,
    pub region_original: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Two-sided checks only.
    pub lower: Option<f64>,
    pub ratio: f64,
    /// Combined standard error of `lhs - rhs`.
    pub std_err: f64,
    /// Allowed deviation in the units of the check.
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime_ms: Option<f64>,
}

/// Verdict of `lhs ≤ rhs` with quadrature slack.
pub fn inequality_holds(lhs: f64, rhs: f64, se: f64) -> bool {
    lhs <= rhs + SIGMAS * se + ROUNDOFF * rhs.abs()
}

/// Relative tolerance for an equality family.
pub fn equality_tolerance(floor: f64, rhs: f64, se: f64) -> f64 {
    floor.max(SIGMAS * se / rhs.abs())
}

/// `A = π(1-p²)^{-2}`, the area of `g₀(𝔻)`.
pub fn disk_image_area(p: f64) -> f64 {
    PI / (1.0 - p * p).powi(2)
}

/// Common setup shared by the reports.
#[derive(Clone, Debug)]
struct Row {
    theorem: TheoremId,
    check: CheckKind,
    map: String,
    p: f64,
    r: Option<f64>,
    big_k: f64,
    n: Option<usize>,
    quad: Option<QuadSpec>,
    grid: Option<GridSpec>,
    regions: (String, String),
}

impl Row {
    fn finish(self, lhs: Estimate, rhs: (f64, f64), lower: Option<(f64, f64)>) -> DistortionReport {
        let (rhs, rhs_se) = rhs;
        let se = lhs.std_err.hypot(rhs_se);
        let ratio = lhs.value / rhs;
        let (tolerance, mut pass) = match self.check {
            CheckKind::Inequality => (SIGMAS * se, inequality_holds(lhs.value, rhs, se)),
            CheckKind::Equality(floor) => {
                let t = equality_tolerance(floor, rhs, se);
                (t, (ratio - 1.0).abs() <= t)
            }
        };
        if let Some((low, low_se)) = lower {
            pass &= inequality_holds(low, lhs.value, low_se.hypot(lhs.std_err));
        }
        let k = (self.big_k - 1.0) / (self.big_k + 1.0);
        DistortionReport {
            theorem: self.theorem,
            check: self.check,
            map: self.map,
            p: self.p,
            r: self.r,
            big_k: self.big_k,
            k,
            n: self.n,
            seed: self.quad.map(|q| q.seed),
            quad: self.quad,
            grid: self.grid,
            region_mirror: self.regions.0,
            region_original: self.regions.1,
            lhs: lhs.value,
            rhs,
            lower: lower.map(|l| l.0),
            ratio,
            std_err: se,
            tolerance,
            pass,
            runtime_ms: None,
        }
    }
}

/// Parameters echoed into reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub p: f64,
    pub r: f64,
    #[serde(rename = "K")]
    pub big_k: f64,
}

impl Point {
    pub fn new(p: f64, r: f64, big_k: f64) -> Result<Self> {
        DistortionParams::from_big_k(p, r, big_k)?;
        Ok(Self { p, r, big_k })
    }

    pub fn params(&self) -> Result<DistortionParams> {
        DistortionParams::from_big_k(self.p, self.r, self.big_k)
    }
}

fn check_k(big_k: f64) -> Result<()> {
    crate::extremal::k_from_big_k(big_k).map(|_| ())
}

/// `C·R^{1/K}` with its propagated standard error.
fn power_side(c: f64, r: Estimate, expo: f64) -> (f64, f64) {
    let v = c * r.value.powf(expo);
    let se = if r.value > 0.0 { c * expo * r.value.powf(expo - 1.0) * r.std_err } else { 0.0 };
    (v, se.abs())
}

#[allow(clippy::too_many_arguments)]
fn verify_th1(
    which: TheoremId,
    p: f64,
    r: Option<f64>,
    big_k: f64,
    e: &FramedRegion,
    f: MapSource<'_>,
    q: &QuadSpec,
    check: CheckKind,
) -> Result<DistortionReport> {
    check_pole(p)?;
    check_k(big_k)?;
    let mirror = e.mirror()?;
    let lhs = f.pushforward(&mirror, q)?;
    // The comparison side is in closed form whenever the set allows it.
    let reference = reference_area(&mirror, p, Frame::G0, &QuadSpec { closed_form: true, ..*q })?;
    let a = disk_image_area(p);
    let rhs = match which {
        TheoremId::Th1i => power_side(a.powf(1.0 - 1.0 / big_k), reference, 1.0 / big_k),
        TheoremId::Th1ii => (big_k * reference.value, big_k * reference.std_err),
        TheoremId::Th1iii => power_side(big_k * a.powf(1.0 - 1.0 / big_k), reference, 1.0 / big_k),
        _ => unreachable!("not a part of the first theorem"),
    };
    let row = Row {
        theorem: which,
        check,
        map: f.label(),
        p,
        r,
        big_k,
        n: None,
        quad: Some(*q),
        grid: None,
        regions: e.describe()?,
    };
    Ok(row.finish(lhs, rhs, None))
}

/// `|f(E)| ≤ [π(1-p²)^{-2}]^{1-1/K} |f₀(E)|^{1/K}` for `f` conformal on `E`.
pub fn verify_th1_i(p: f64, r: Option<f64>, big_k: f64, e: &FramedRegion, f: MapSource<'_>, q: &QuadSpec, check: CheckKind) -> Result<DistortionReport> {
    verify_th1(TheoremId::Th1i, p, r, big_k, e, f, q, check)
}

/// `|f(E)| ≤ K |f₀(E)|` for `f` conformal outside `E`.
pub fn verify_th1_ii(p: f64, r: Option<f64>, big_k: f64, e: &FramedRegion, f: MapSource<'_>, q: &QuadSpec, check: CheckKind) -> Result<DistortionReport> {
    verify_th1(TheoremId::Th1ii, p, r, big_k, e, f, q, check)
}

/// `|f(E)| ≤ K [π(1-p²)^{-2}]^{1-1/K} |f₀(E)|^{1/K}` for any `E`.
pub fn verify_th1_iii(p: f64, r: Option<f64>, big_k: f64, e: &FramedRegion, f: MapSource<'_>, q: &QuadSpec, check: CheckKind) -> Result<DistortionReport> {
    verify_th1(TheoremId::Th1iii, p, r, big_k, e, f, q, check)
}

/// The equality family of the conformal-on-`B(r)` bound.
pub fn th1_i_family(pt: Point, q: &QuadSpec, check: CheckKind) -> Result<DistortionReport> {
    let g = pole_stretch(pt.params()?)?;
    let e = FramedRegion::Mirror(Region::Disk(pseudo_disk(pt.p, pt.r)?));
    verify_th1_i(pt.p, Some(pt.r), pt.big_k, &e, MapSource::Analytic(&g), q, check)
}

/// `E′ = 𝔻̄ ∖ B₀(r)` as a pseudo-annulus.
pub fn th1_ii_region(pt: Point) -> Result<Region> {
    Ok(Region::PseudoAnnulus(PseudoAnnulus::new(pt.p, pt.r.powf(1.0 / pt.big_k), 1.0)?))
}

/// The near-sharpness family of the conformal-outside bound.
pub fn th1_ii_family(pt: Point, q: &QuadSpec) -> Result<DistortionReport> {
    let h = inverse_stretch(pt.params()?)?;
    let e = FramedRegion::Mirror(th1_ii_region(pt)?);
    verify_th1_ii(pt.p, Some(pt.r), pt.big_k, &e, MapSource::Analytic(&h), q, CheckKind::Inequality)
}

/// Closed-form ratio `(1-r²)/(K(1-r^{2/K}))` along the family.
pub fn th1_ii_exact_ratio(r: f64, big_k: f64) -> f64 {
    (1.0 - r * r) / (big_k * (1.0 - r.powf(2.0 / big_k)))
}

/// Lower and upper bounds of the weighted inequality.
pub fn th2_bounds(p: f64, big_k: f64, j_inv: Estimate, j_pow: Estimate) -> ((f64, f64), (f64, f64)) {
    let a = disk_image_area(p);
    let lower = power_side(a.powf(1.0 - big_k), j_inv, big_k);
    let upper = power_side(a.powf(1.0 - 1.0 / big_k), j_pow, 1.0 / big_k);
    (lower, upper)
}

/// Weighted distortion, both sides.
#[allow(clippy::too_many_arguments)]
pub fn verify_th2(
    p: f64,
    big_k: f64,
    e: &FramedRegion,
    f: MapSource<'_>,
    w: &Weight,
    q: &QuadSpec,
    check: CheckKind,
) -> Result<DistortionReport> {
    check_pole(p)?;
    check_k(big_k)?;
    let mirror = e.mirror()?;
    let middle = f.weighted(&mirror, w, 1.0, q)?;
    let j_inv = weighted_reference(&mirror, w, 1.0 / big_k, p, Frame::G0, q)?;
    let j_pow = weighted_reference(&mirror, w, big_k, p, Frame::G0, q)?;
    let (lower, upper) = th2_bounds(p, big_k, j_inv, j_pow);
    let row = Row {
        theorem: TheoremId::Th2,
        check,
        map: f.label(),
        p,
        r: None,
        big_k,
        n: None,
        quad: Some(*q),
        grid: None,
        regions: e.describe()?,
    };
    Ok(row.finish(middle, upper, Some(lower)))
}

/// The stacked equality construction; the reference integrals are exact.
pub fn verify_th2_stacked(s: &StackedMap, q: &QuadSpec, check: CheckKind) -> Result<DistortionReport> {
    let e = Region::PseudoAnnulus(PseudoAnnulus::new(s.p, 0.0, 1.0)?);
    let w = Weight::stacked(s);
    let middle = weighted_pushforward(&s.map, &e, &w, 1.0, q)?;
    let j_inv = piecewise_reference(&w, 1.0 / s.big_k, s.p, Frame::G0, q)?;
    let j_pow = piecewise_reference(&w, s.big_k, s.p, Frame::G0, q)?;
    let (lower, upper) = th2_bounds(s.p, s.big_k, j_inv, j_pow);
    let row = Row {
        theorem: TheoremId::Th2,
        check,
        map: s.map.label.clone(),
        p: s.p,
        r: Some(s.radii[0]),
        big_k: s.big_k,
        n: Some(s.radii.len()),
        quad: Some(*q),
        grid: None,
        regions: FramedRegion::Mirror(e).describe()?,
    };
    Ok(row.finish(middle, upper, Some(lower)))
}

/// `|g₀(E)| log(π(1-p²)^{-2} / |g₀(E)|)`.
pub fn th3_rhs(p: f64, g0_area: f64) -> f64 {
    if g0_area <= 0.0 {
        return 0.0;
    }
    g0_area * (disk_image_area(p) / g0_area).ln()
}

/// `2π(1-p²)^{-2} r² log(1/r)`.
pub fn th3_sharp_value(p: f64, r: f64) -> f64 {
    2.0 * PI * r * r * (1.0 / r).ln() / (1.0 - p * p).powi(2)
}

/// `∫_{𝔻∖E} |1-pz|^{-2} |H[χ_E (1-pz̄)^{-2}]| dm` on a grid.
pub fn th3_lhs(p: f64, e: &Region, grid: GridSpec) -> Result<f64> {
    check_pole(p)?;
    let g = grid;
    let chi = g.region_fraction(e);
    let field = sample_cell_average(|_| C64::new(0.0, 0.0), g)?;
    let mut field = field;
    for (i, v) in field.values.iter_mut().enumerate() {
        if chi[i] > 0.0 {
            let z = g.point_at(i);
            *v = chi[i] * (C64::new(1.0, 0.0) - p * z.conj()).powi(-2);
        }
    }
    let hf = hilbert(&field)?;
    let outside = g.region_fraction(&Region::Disk(Disk::unit()));
    let weight: Vec<f64> = (0..g.len())
        .map(|i| {
            let f = (outside[i] - chi[i]).max(0.0);
            if f == 0.0 {
                0.0
            } else {
                f / (C64::new(1.0, 0.0) - p * g.point_at(i)).norm_sqr()
            }
        })
        .collect();
    Ok(hf.weighted_l1(&weight))
}

fn th3_report(p: f64, r: Option<f64>, lhs: f64, rhs: f64, grid: GridSpec, check: CheckKind, e: FramedRegion) -> Result<DistortionReport> {
    let row = Row {
        theorem: TheoremId::Th3,
        check,
        map: "beurling_transform".into(),
        p,
        r,
        big_k: 1.0,
        n: None,
        quad: None,
        grid: Some(grid),
        regions: e.describe()?,
    };
    Ok(row.finish(Estimate::exact(lhs), (rhs, 0.0), None))
}

/// Sharpness case `E = B(r)`.
pub fn verify_th3(p: f64, r: f64, grid: GridSpec) -> Result<DistortionReport> {
    let e = Region::Disk(pseudo_disk(p, r)?);
    let lhs = th3_lhs(p, &e, grid)?;
    let rhs = th3_rhs(p, PI * r * r / (1.0 - p * p).powi(2));
    th3_report(p, Some(r), lhs, rhs, grid, CheckKind::Equality(TH3_EQUALITY_FLOOR), FramedRegion::Mirror(e))
}

/// Inequality case for an arbitrary set inside the unit disk.
pub fn verify_th3_region(p: f64, e: &Region, grid: GridSpec, q: &QuadSpec) -> Result<DistortionReport> {
    let (lo, hi) = e.window()?;
    let corners = [lo, hi, C64::new(lo.re, hi.im), C64::new(hi.re, lo.im)];
    if let Region::Mask(_) = e {
        if corners.iter().any(|c| c.norm() > 1.0 + 1e-12) && !mask_inside_unit(e) {
            return Err(Error::Range("the set must lie in the closed unit disk".into()));
        }
    } else if !e.excludes(C64::new(0.0, 0.0), -1.0) || !inside_unit(e) {
        return Err(Error::Range("the set must lie in the closed unit disk".into()));
    }
    let lhs = th3_lhs(p, e, grid)?;
    let g0_area = reference_area(e, p, Frame::G0, q)?.value;
    let rhs = th3_rhs(p, g0_area);
    th3_report(p, None, lhs, rhs, grid, CheckKind::Inequality, FramedRegion::Mirror(e.clone()))
}

fn mask_inside_unit(e: &Region) -> bool {
    let Region::Mask(m) = e else { return false };
    (0..m.rows).all(|i| {
        (0..m.cols).all(|j| {
            !m.get(i, j) || {
                let x = [m.x0 + j as f64 * m.h, m.x0 + (j + 1) as f64 * m.h];
                let y = [m.y0 + i as f64 * m.h, m.y0 + (i + 1) as f64 * m.h];
                x.iter().all(|a| y.iter().all(|b| a.hypot(*b) <= 1.0 + 1e-12))
            }
        })
    })
}

fn inside_unit(e: &Region) -> bool {
    let within = |d: &Disk| d.center.norm() + d.radius <= 1.0 + 1e-12;
    match e {
        Region::Disk(d) => within(d),
        Region::PseudoAnnulus(a) => within(&a.outer_disk()),
        Region::DiskDifference { outer, .. } => within(outer),
        Region::UnionOfDisks(ds) => ds.iter().all(within),
        Region::Exterior(x) => x.clip.as_ref().is_some_and(within),
        Region::Mask(_) => mask_inside_unit(e),
    }
}

/// One sweep point; errors abort only their own point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub point: Point,
    pub report: Option<DistortionReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub theorem: TheoremId,
    pub entries: Vec<SweepEntry>,
    /// For the `th1ii` family: ratios increase with `r` within each `(p, K)`.
    pub monotone: Option<bool>,
}

impl SweepResult {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.report.as_ref().is_some_and(|r| r.pass)) && self.monotone != Some(false)
    }

    pub fn reports(&self) -> Vec<DistortionReport> {
        self.entries.iter().filter_map(|e| e.report.clone()).collect()
    }
}

/// Sharpness-family sweep over `(p, r, K)` points.
pub fn sweep(theorem: TheoremId, points: &[Point], q: &QuadSpec, grid: GridSpec, exec: Exec) -> SweepResult {
    // Parallelism lives at the point level; inner loops run sequentially.
    let inner = q.with_exec(if exec.is_parallel() { Exec::Sequential } else { q.exec });
    let grid = grid.with_exec(inner.exec);
    let entries = map_range(exec, points.len(), |i| {
        let pt = points[i];
        let run = || -> Result<DistortionReport> {
            match theorem {
                TheoremId::Th1i => th1_i_family(pt, &inner, CheckKind::equality()),
                TheoremId::Th1ii => th1_ii_family(pt, &inner),
                TheoremId::Th1iii => {
                    let g = pole_stretch(pt.params()?)?;
                    let e = FramedRegion::Mirror(Region::Disk(pseudo_disk(pt.p, pt.r)?));
                    verify_th1_iii(pt.p, Some(pt.r), pt.big_k, &e, MapSource::Analytic(&g), &inner, CheckKind::Inequality)
                }
                TheoremId::Th2 => {
                    let radii = [pt.r, pt.r];
                    let pw = crate::extremal::feasible_pweights(&radii, STACK_SHRINK)?;
                    let s = crate::extremal::stacked_map(pt.p, pt.big_k, &radii, &pw)?;
                    verify_th2_stacked(&s, &inner, CheckKind::equality())
                }
                TheoremId::Th3 => verify_th3(pt.p, pt.r, grid),
            }
        };
        match run() {
            Ok(r) => SweepEntry { point: pt, report: Some(r), error: None },
            Err(e) => SweepEntry { point: pt, report: None, error: Some(e.to_string()) },
        }
    });
    let monotone = (theorem == TheoremId::Th1ii).then(|| ratios_increase(&entries));
    SweepResult { theorem, entries, monotone }
}

/// Shrink factor `ρ_{j+1}/(ρ_j r_j)` for sweep-built stacks.
pub const STACK_SHRINK: f64 = 0.6;

fn ratios_increase(entries: &[SweepEntry]) -> bool {
    let mut groups: Vec<((f64, f64), Vec<(f64, f64)>)> = Vec::new();
    for e in entries {
        let Some(rep) = &e.report else { continue };
        let key = (e.point.p, e.point.big_k);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push((e.point.r, rep.ratio)),
            None => groups.push((key, vec![(e.point.r, rep.ratio)])),
        }
    }
    groups.iter_mut().all(|(_, v)| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.windows(2).all(|w| w[0].0 == w[1].0 || w[1].1 > w[0].1)
    })
}

/// Cartesian product of parameter lists, in `p`-major order.
pub fn grid_points(ps: &[f64], rs: &[f64], ks: &[f64]) -> Result<Vec<Point>> {
    let mut out = Vec::with_capacity(ps.len() * rs.len() * ks.len());
    for &p in ps {
        for &r in rs {
            for &k in ks {
                out.push(Point::new(p, r, k)?);
            }
        }
    }
    Ok(out)
}

/// Parses `p r K` lines; `#` starts a comment.
pub fn parse_points(text: &str) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1))))
            .collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected 'p r K'", n + 1)));
        }
        out.push(Point::new(v[0], v[1], v[2])?);
    }
    Ok(out)
}

/// A randomised test configuration in the mirrored frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomConfig {
    pub seed: u64,
    pub p: f64,
    pub k: f64,
    /// `E′`: disks inside the annulus `0.1 ≤ |z| ≤ 0.9`.
    pub disks: Vec<Disk>,
    /// Weight value on each disk (first match wins on overlaps).
    pub weights: Vec<f64>,
    /// Coefficients of the smooth phase of `μ`.
    pub phase: Vec<(f64, f64, f64)>,
}

impl RandomConfig {
    pub fn big_k(&self) -> f64 {
        (1.0 + self.k) / (1.0 - self.k)
    }

    pub fn region(&self) -> Region {
        Region::UnionOfDisks(self.disks.clone())
    }

    pub fn weight(&self) -> Weight {
        Weight::Piecewise {
            pieces: self.disks.iter().zip(&self.weights).map(|(d, w)| (Region::Disk(*d), *w)).collect(),
            otherwise: 0.0,
        }
    }

    /// `μ = k·s(z)·e^{iθ(z)}` on `𝔻 ∖ E′`, zero elsewhere; `s ∈ [½, 1]`.
    pub fn mu(&self, z: C64) -> C64 {
        if z.norm() > 1.0 || self.disks.iter().any(|d| d.contains(z)) {
            return C64::new(0.0, 0.0);
        }
        let theta: f64 = self.phase.iter().map(|(a, b, c)| c * (a * z.re + b * z.im).sin()).sum();
        let s = 0.75 + 0.25 * (3.0 * z.re - 2.0 * z.im).cos();
        C64::from_polar(self.k * s, theta)
    }
}

/// Pole in `[0, 0.6]`, `k ≤ k_max`, one to three disks away from the pole
/// of `g₀` (which sits outside the unit disk).
pub fn random_config(seed: u64, k_max: f64) -> RandomConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = 0.6 * rng.random::<f64>();
    let k = k_max * (0.1 + 0.9 * rng.random::<f64>());
    let count = rng.random_range(1..=3);
    let mut disks = Vec::with_capacity(count);
    for _ in 0..count {
        let radius = 0.05 + 0.15 * rng.random::<f64>();
        let modulus = (0.1 + radius) + (0.8 - 2.0 * radius) * rng.random::<f64>();
        let center = C64::from_polar(modulus, 2.0 * PI * rng.random::<f64>());
        disks.push(Disk { center, radius });
    }
    let weights = (0..count).map(|_| 0.2 + 2.8 * rng.random::<f64>()).collect();
    let phase = (0..3)
        .map(|_| (4.0 * rng.random::<f64>() - 2.0, 4.0 * rng.random::<f64>() - 2.0, 2.0 * rng.random::<f64>()))
        .collect();
    RandomConfig { seed, p, k, disks, weights, phase }
}

/// Pole-free area bound: `π^{1-1/K} |E|^{1/K}`.
pub fn classical_area_bound(big_k: f64, e_area: f64) -> f64 {
    PI.powf(1.0 - 1.0 / big_k) * e_area.powf(1.0 / big_k)
}

/// Pole-free bound `K |E|`.
pub fn classical_scaling_bound(big_k: f64, e_area: f64) -> f64 {
    big_k * e_area
}

/// Pole-free weighted upper bound: `π^{1-1/K} (∫ w^K)^{1/K}` with `J₀ = 1` in the
/// mirrored frame.
pub fn classical_weighted_upper(big_k: f64, int_w_pow_k: f64) -> f64 {
    PI.powf(1.0 - 1.0 / big_k) * int_w_pow_k.powf(1.0 / big_k)
}

/// Pole-free weighted lower bound: `π^{1-K} (∫ w^{1/K})^K`.
pub fn classical_weighted_lower(big_k: f64, int_w_pow_inv_k: f64) -> f64 {
    PI.powf(1.0 - big_k) * int_w_pow_inv_k.powf(big_k)
}

/// `|E| log(π/|E|)`.
pub fn th3_zero_pole_rhs(e_area: f64) -> f64 {
    e_area * (PI / e_area).ln()
}

/// Writes reports as a JSON array.
pub fn write_json(reports: &[DistortionReport], out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(out, reports)?;
    Ok(())
}

/// Flat CSV row of a report.
#[derive(Serialize)]
struct CsvRow<'a> {
    theorem: &'static str,
    check: &'static str,
    floor: f64,
    map: &'a str,
    p: f64,
    r: Option<f64>,
    #[serde(rename = "K")]
    big_k: f64,
    k: f64,
    n: Option<usize>,
    method: Option<&'static str>,
    samples: Option<u64>,
    seed: Option<u64>,
    grid_n: Option<usize>,
    half_width: Option<f64>,
    region_mirror: &'a str,
    region_original: &'a str,
    lhs: f64,
    rhs: f64,
    lower: Option<f64>,
    ratio: f64,
    std_err: f64,
    tolerance: f64,
    pass: bool,
    runtime_ms: Option<f64>,
}

pub fn write_csv(reports: &[DistortionReport], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        let (check, floor) = match r.check {
            CheckKind::Inequality => ("inequality", 0.0),
            CheckKind::Equality(f) => ("equality", f),
        };
        w.serialize(CsvRow {
            theorem: r.theorem.name(),
            check,
            floor,
            map: &r.map,
            p: r.p,
            r: r.r,
            big_k: r.big_k,
            k: r.k,
            n: r.n,
            method: r.quad.map(|q| match q.method {
                crate::measure::QuadMethod::MonteCarlo => "montecarlo",
                crate::measure::QuadMethod::TensorGrid => "tensorgrid",
            }),
            samples: r.quad.map(|q| q.samples),
            seed: r.seed,
            grid_n: r.grid.map(|g| g.n).or(r.quad.map(|q| q.grid_n)),
            half_width: r.grid.map(|g| g.half_width),
            region_mirror: &r.region_mirror,
            region_original: &r.region_original,
            lhs: r.lhs,
            rhs: r.rhs,
            lower: r.lower,
            ratio: r.ratio,
            std_err: r.std_err,
            tolerance: r.tolerance,
            pass: r.pass,
            runtime_ms: r.runtime_ms,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Calibration of the grid Beurling transform against the closed form
/// `H[χ_{B(r)}(1-pz̄)^{-2}] = -r²(z-p)^{-2}` off `B(r)` (zero inside).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub p: f64,
    pub r: f64,
    /// Relative L² error off a `4h` collar of the circle.
    pub error: f64,
    pub pass: bool,
}

pub const CALIBRATION_TOL: f64 = 0.02;
pub const ISOMETRY_TOL: f64 = 0.01;

pub fn calibrate_hilbert(p: f64, r: f64, grid: GridSpec) -> Result<Calibration> {
    let b = pseudo_disk(p, r)?;
    let chi = grid.region_fraction(&Region::Disk(b));
    let mut field = crate::transforms::ComplexField::zeros(grid).with_support(Region::Disk(b));
    for (i, v) in field.values.iter_mut().enumerate() {
        if chi[i] > 0.0 {
            *v = chi[i] * (C64::new(1.0, 0.0) - p * grid.point_at(i).conj()).powi(-2);
        }
    }
    let hf = hilbert(&field)?;
    let exact = crate::transforms::sample(
        |z| if b.contains(z) { C64::new(0.0, 0.0) } else { -r * r / ((z - p) * (z - p)) },
        grid,
    )?;
    let off: Vec<bool> = grid.seam_band(&[b], 4.0 * grid.h()).iter().map(|x| !x).collect();
    let error = hf.relative_error_on(&exact, &off)?;
    Ok(Calibration { p, r, error, pass: error < CALIBRATION_TOL })
}

/// Largest `|‖H f‖/‖f‖ - 1|` over `count` random smooth bumps in `[-1, 1]²`.
pub fn isometry_defect(seed: u64, count: usize, grid: GridSpec) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let rad = 0.2 + 0.3 * rng.random::<f64>();
        let room = 0.95 - rad;
        let center = C64::new(room * (2.0 * rng.random::<f64>() - 1.0), room * (2.0 * rng.random::<f64>() - 1.0));
        let amp = C64::from_polar(0.5 + rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let (a, b) = (6.0 * rng.random::<f64>() - 3.0, 6.0 * rng.random::<f64>() - 3.0);
        let f = crate::transforms::sample(
            |z| {
                let t = (z - center).norm_sqr() / (rad * rad);
                if t >= 1.0 {
                    C64::new(0.0, 0.0)
                } else {
                    amp * (-1.0 / (1.0 - t)).exp() * C64::from_polar(1.0, a * z.re + b * z.im)
                }
            },
            grid,
        )?;
        worst = worst.max((hilbert(&f)?.l2_norm() / f.l2_norm() - 1.0).abs());
    }
    Ok(worst)
}

/// `|E|` and `|g₀(E)|` for a configuration, used by the property runs.
pub fn region_areas(e: &Region, p: f64, q: &QuadSpec) -> Result<(f64, f64)> {
    Ok((area(e)?.value, reference_area(e, p, Frame::G0, q)?.value))
}

/// `∫_E w^power dm`, the `p = 0` reference integral.
pub fn plain_weighted(e: &Region, w: &Weight, power: f64, q: &QuadSpec) -> Result<Estimate> {
    integrate(e, q, |z| {
        let v = w.eval(z);
        if v <= 0.0 {
            0.0
        } else {
            v.powf(power)
        }
    })
}
