//! Planar regions and area functionals.
//!
//! Integrals `∫_E F dm` run either by seeded Monte Carlo (fixed batches, each
//! with its own ChaCha stream, reduced in batch order) or by a midpoint
//! tensor rule. Disks and pseudo-annuli are sampled in polar coordinates
//! (the latter in the `u = (z-p)/(1-pz)` plane); everything else by
//! rejection from its bounding window.

use crate::error::{range_err, Error, Result};
use crate::exec::{map_range, Exec};
use crate::extremal::{PiecewiseQCMap, StackedMap};
use crate::geometry::{invert_region, CircleImage, Circular, Disk, ExteriorRegion, MobiusMap, PseudoAnnulus};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

/// Samples per Monte Carlo batch; each batch owns one RNG stream.
pub const BATCH: u64 = 1 << 14;

/// Minimum distance kept between a region and a singular point.
pub const POLE_MARGIN: f64 = 1e-3;

/// Boolean raster; cell `(i, j)` covers `[x0 + jh, x0 + (j+1)h] × [y0 + ih, y0 + (i+1)h]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMask {
    pub rows: usize,
    pub cols: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub cells: Vec<bool>,
}

impl GridMask {
    pub fn new(rows: usize, cols: usize, x0: f64, y0: f64, h: f64, cells: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::Parse(format!(
                "mask needs rows*cols = {} cells, got {}",
                rows * cols,
                cells.len()
            )));
        }
        if !(h > 0.0 && h.is_finite() && x0.is_finite() && y0.is_finite()) {
            return Err(Error::Parse(format!("bad mask geometry x0={x0} y0={y0} h={h}")));
        }
        Ok(Self { rows, cols, x0, y0, h, cells })
    }

    /// Rasterise a predicate at cell centres.
    pub fn from_fn(rows: usize, cols: usize, x0: f64, y0: f64, h: f64, f: impl Fn(C64) -> bool) -> Result<Self> {
        let mut cells = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                cells.push(f(C64::new(x0 + (j as f64 + 0.5) * h, y0 + (i as f64 + 0.5) * h)));
            }
        }
        Self::new(rows, cols, x0, y0, h, cells)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_string())?)
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.cols + j]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn contains(&self, z: C64) -> bool {
        let fj = ((z.re - self.x0) / self.h).floor();
        let fi = ((z.im - self.y0) / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.rows as f64 || fj >= self.cols as f64 {
            return false;
        }
        self.get(fi as usize, fj as usize)
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.h * self.h
    }

    fn min_distance(&self, z: C64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                let (lx, ly) = (self.x0 + j as f64 * self.h, self.y0 + i as f64 * self.h);
                let dx = (lx - z.re).max(z.re - lx - self.h).max(0.0);
                let dy = (ly - z.im).max(z.im - ly - self.h).max(0.0);
                best = best.min(dx.hypot(dy));
            }
        }
        best
    }
}

impl FromStr for GridMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty mask".into()))?;
        let t: Vec<&str> = header.split_whitespace().collect();
        if t.len() != 5 {
            return Err(Error::Parse(format!("mask header needs 'rows cols x0 y0 h', got '{header}'")));
        }
        let num = |x: &str| x.parse::<f64>().map_err(|e| Error::Parse(format!("'{x}': {e}")));
        let int = |x: &str| x.parse::<usize>().map_err(|e| Error::Parse(format!("'{x}': {e}")));
        let (rows, cols) = (int(t[0])?, int(t[1])?);
        let (x0, y0, h) = (num(t[2])?, num(t[3])?, num(t[4])?);
        let mut cells = Vec::with_capacity(rows * cols);
        for line in lines {
            let before = cells.len();
            for ch in line.chars().filter(|c| !c.is_whitespace()) {
                match ch {
                    '0' => cells.push(false),
                    '1' => cells.push(true),
                    _ => return Err(Error::Parse(format!("mask cells must be 0 or 1, got '{ch}'"))),
                }
            }
            if cells.len() - before != cols {
                return Err(Error::Parse(format!(
                    "mask row {} has {} cells, expected {cols}",
                    before / cols.max(1),
                    cells.len() - before
                )));
            }
        }
        Self::new(rows, cols, x0, y0, h, cells)
    }
}

impl fmt::Display for GridMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {} {} {}", self.rows, self.cols, self.x0, self.y0, self.h)?;
        for i in 0..self.rows {
            let row: Vec<&str> = (0..self.cols).map(|j| if self.get(i, j) { "1" } else { "0" }).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// A measurable planar set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Disk(Disk),
    /// Complement of a disk, optionally intersected with a clip disk.
    Exterior(ExteriorRegion),
    PseudoAnnulus(PseudoAnnulus),
    /// `outer ∖ hole`, with `hole ⊂ outer`.
    DiskDifference { outer: Disk, hole: Disk },
    /// Possibly overlapping union.
    UnionOfDisks(Vec<Disk>),
    Mask(GridMask),
}

impl Region {
    pub fn disk_difference(outer: Disk, hole: Disk) -> Result<Self> {
        if !outer.contains_disk(&hole) {
            return range_err("disk difference needs the hole inside the outer disk");
        }
        Ok(Region::DiskDifference { outer, hole })
    }

    pub fn contains(&self, z: C64) -> bool {
        match self {
            Region::Disk(d) => d.contains(z),
            Region::Exterior(e) => e.contains(z),
            Region::PseudoAnnulus(a) => a.contains(z),
            Region::DiskDifference { outer, hole } => outer.contains(z) && !hole.contains(z),
            Region::UnionOfDisks(ds) => ds.iter().any(|d| d.contains(z)),
            Region::Mask(m) => m.contains(z),
        }
    }

    /// Axis-aligned bounding window `(lower-left, upper-right)`.
    pub fn window(&self) -> Result<(C64, C64)> {
        let of_disk = |d: &Disk| (d.center - C64::new(d.radius, d.radius), d.center + C64::new(d.radius, d.radius));
        match self {
            Region::Disk(d) => Ok(of_disk(d)),
            Region::Exterior(e) => e.clip.as_ref().map(of_disk).ok_or(Error::Unbounded),
            Region::PseudoAnnulus(a) => Ok(of_disk(&a.outer_disk())),
            Region::DiskDifference { outer, .. } => Ok(of_disk(outer)),
            Region::UnionOfDisks(ds) => {
                if ds.is_empty() {
                    return range_err("empty union of disks");
                }
                let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
                let mut hi = -lo;
                for d in ds {
                    let (a, b) = of_disk(d);
                    lo = C64::new(lo.re.min(a.re), lo.im.min(a.im));
                    hi = C64::new(hi.re.max(b.re), hi.im.max(b.im));
                }
                Ok((lo, hi))
            }
            Region::Mask(m) => Ok((
                C64::new(m.x0, m.y0),
                C64::new(m.x0 + m.cols as f64 * m.h, m.y0 + m.rows as f64 * m.h),
            )),
        }
    }

    /// True when the closure of the region stays at least `margin` away from `z`.
    pub fn excludes(&self, z: C64, margin: f64) -> bool {
        let outside = |d: &Disk| d.boundary_distance(z) >= margin;
        let deep_inside = |d: &Disk| d.boundary_distance(z) <= -margin;
        match self {
            Region::Disk(d) => outside(d),
            Region::Exterior(e) => deep_inside(&e.excluded) || e.clip.as_ref().is_some_and(outside),
            Region::PseudoAnnulus(a) => outside(&a.outer_disk()) || a.inner_disk().as_ref().is_some_and(deep_inside),
            Region::DiskDifference { outer, hole } => outside(outer) || deep_inside(hole),
            Region::UnionOfDisks(ds) => ds.iter().all(outside),
            Region::Mask(m) => m.min_distance(z) >= margin,
        }
    }

    /// Image under `z ↦ 1/z`, for regions whose image has a closed form here.
    pub fn invert(&self) -> Result<Region> {
        let to_region = |c: Circular| match c {
            Circular::Disk(d) => Region::Disk(d),
            Circular::Exterior(d) => Region::Exterior(ExteriorRegion::new(d)),
        };
        match self {
            Region::Disk(d) => invert_region(d).map(to_region),
            Region::Exterior(e) if e.clip.is_none() => Circular::Exterior(e.excluded).invert().map(to_region),
            Region::UnionOfDisks(ds) => {
                let mut out = Vec::with_capacity(ds.len());
                for d in ds {
                    match invert_region(d)? {
                        Circular::Disk(x) => out.push(x),
                        Circular::Exterior(_) => {
                            return Err(Error::Unsupported("inverting a union containing the origin".into()))
                        }
                    }
                }
                Ok(Region::UnionOfDisks(out))
            }
            _ => Err(Error::Unsupported(format!("inversion of {}", self.kind()))),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Region::Disk(_) => "disk",
            Region::Exterior(_) => "exterior",
            Region::PseudoAnnulus(_) => "pseudo-annulus",
            Region::DiskDifference { .. } => "disk-difference",
            Region::UnionOfDisks(_) => "union-of-disks",
            Region::Mask(_) => "mask",
        }
    }

    /// Circular pieces whose intersection is the region, when it has that shape.
    fn circular_pieces(&self) -> Option<Vec<Circular>> {
        match self {
            Region::Disk(d) => Some(vec![Circular::Disk(*d)]),
            Region::Exterior(e) => {
                let mut v = vec![Circular::Exterior(e.excluded)];
                v.extend(e.clip.map(Circular::Disk));
                Some(v)
            }
            Region::PseudoAnnulus(a) => {
                let mut v = vec![Circular::Disk(a.outer_disk())];
                v.extend(a.inner_disk().map(Circular::Exterior));
                Some(v)
            }
            Region::DiskDifference { outer, hole } => Some(vec![Circular::Disk(*outer), Circular::Exterior(*hole)]),
            _ => None,
        }
    }
}

/// `(value, standard error)` of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    /// Number of integrand evaluations; zero for closed forms.
    pub samples: u64,
    pub exact: bool,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_err: 0.0, samples: 0, exact: true }
    }

    pub fn scale(self, s: f64) -> Self {
        Self {
            value: self.value * s,
            std_err: self.std_err * s.abs(),
            ..self
        }
    }

    /// Sum of independent estimates.
    pub fn add(self, other: Estimate) -> Self {
        Self {
            value: self.value + other.value,
            std_err: self.std_err.hypot(other.std_err),
            samples: self.samples + other.samples,
            exact: self.exact && other.exact,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QuadMethod {
    #[default]
    MonteCarlo,
    TensorGrid,
}

/// Quadrature settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub method: QuadMethod,
    pub samples: u64,
    pub seed: u64,
    /// Points per axis for the tensor rule.
    pub grid_n: usize,
    #[serde(skip)]
    pub exec: Exec,
    /// Use closed forms where available instead of sampling.
    pub closed_form: bool,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            method: QuadMethod::MonteCarlo,
            samples: 1_000_000,
            seed: 0,
            grid_n: 512,
            exec: Exec::default(),
            closed_form: true,
        }
    }
}

impl QuadSpec {
    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        Self { samples, seed, ..Self::default() }
    }

    pub fn tensor(grid_n: usize) -> Self {
        Self {
            method: QuadMethod::TensorGrid,
            grid_n,
            ..Self::default()
        }
    }

    pub fn sampled(mut self) -> Self {
        self.closed_form = false;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    fn check(&self) -> Result<()> {
        match self.method {
            QuadMethod::MonteCarlo if self.samples == 0 => Err(Error::EmptyBudget),
            QuadMethod::TensorGrid if self.grid_n == 0 => Err(Error::EmptyBudget),
            _ => Ok(()),
        }
    }
}

/// How points are drawn for a region.
#[derive(Clone, Debug)]
enum Sampler {
    /// Uniform in a disk; `hole` points contribute zero.
    Polar { disk: Disk, region: Option<Region> },
    /// Uniform in the u-plane annulus, mapped back with its Jacobian.
    UPolar(PseudoAnnulus),
    /// Uniform in a rectangle with rejection against the region.
    Window { lo: C64, hi: C64, region: Region },
}

impl Sampler {
    fn for_region(e: &Region) -> Result<Sampler> {
        Ok(match e {
            Region::Disk(d) => Sampler::Polar { disk: *d, region: None },
            Region::PseudoAnnulus(a) => Sampler::UPolar(*a),
            Region::DiskDifference { outer, .. } => Sampler::Polar {
                disk: *outer,
                region: Some(e.clone()),
            },
            Region::Exterior(x) => match x.clip {
                Some(clip) => Sampler::Polar {
                    disk: clip,
                    region: Some(e.clone()),
                },
                None => return Err(Error::Unbounded),
            },
            _ => {
                let (lo, hi) = e.window()?;
                Sampler::Window { lo, hi, region: e.clone() }
            }
        })
    }

    /// Maps a point of the unit square to `(z, weight)`; weight 0 means outside.
    fn map(&self, s: f64, t: f64) -> (C64, f64) {
        match self {
            Sampler::Polar { disk, region } => {
                let z = disk.center + C64::from_polar(disk.radius * s.sqrt(), 2.0 * PI * t);
                let inside = region.as_ref().is_none_or(|r| r.contains(z));
                (z, if inside { disk.area() } else { 0.0 })
            }
            Sampler::UPolar(a) => {
                let (i2, o2) = (a.inner * a.inner, a.outer * a.outer);
                let u = C64::from_polar((i2 + s * (o2 - i2)).sqrt(), 2.0 * PI * t);
                let den = C64::new(1.0, 0.0) + a.p * u;
                let z = (u + a.p) / den;
                let dz_du = (1.0 - a.p * a.p) / den.norm_sqr();
                (z, PI * (o2 - i2) * dz_du * dz_du)
            }
            Sampler::Window { lo, hi, region } => {
                let d = hi - lo;
                let z = C64::new(lo.re + s * d.re, lo.im + t * d.im);
                (z, if region.contains(z) { d.re * d.im } else { 0.0 })
            }
        }
    }
}

/// `∫_E F dm`. Unclipped exteriors are pulled back through `z ↦ 1/z`.
pub fn integrate<F>(e: &Region, q: &QuadSpec, f: F) -> Result<Estimate>
where
    F: Fn(C64) -> f64 + Sync,
{
    q.check()?;
    if let Region::Exterior(x) = e {
        if x.clip.is_none() {
            let mirror = e.invert().map_err(|_| Error::Unbounded)?;
            if !matches!(mirror, Region::Disk(_)) {
                return Err(Error::Unbounded);
            }
            return integrate_bounded(&mirror, q, |w| {
                if w == C64::from(0.0) {
                    return 0.0;
                }
                f(w.inv()) / w.norm_sqr().powi(2)
            });
        }
    }
    integrate_bounded(e, q, f)
}

fn integrate_bounded<F>(e: &Region, q: &QuadSpec, f: F) -> Result<Estimate>
where
    F: Fn(C64) -> f64 + Sync,
{
    let sampler = Sampler::for_region(e)?;
    let est = match q.method {
        QuadMethod::MonteCarlo => monte_carlo(&sampler, q, &f),
        QuadMethod::TensorGrid => tensor(&sampler, q, &f),
    };
    if !est.value.is_finite() {
        return Err(Error::NonFinite(format!("integral over {} is {}", e.kind(), est.value)));
    }
    Ok(est)
}

fn monte_carlo<F: Fn(C64) -> f64 + Sync>(s: &Sampler, q: &QuadSpec, f: &F) -> Estimate {
    let batches = q.samples.div_ceil(BATCH);
    let parts = map_range(q.exec, batches as usize, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(q.seed);
        rng.set_stream(b as u64);
        let count = BATCH.min(q.samples - b as u64 * BATCH);
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..count {
            let (z, w) = s.map(rng.random(), rng.random());
            if w != 0.0 {
                let v = w * f(z);
                sum += v;
                sq += v * v;
            }
        }
        (sum, sq)
    });
    let (sum, sq) = parts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let n = q.samples as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0);
    Estimate {
        value: mean,
        std_err: (var / n).sqrt(),
        samples: q.samples,
        exact: false,
    }
}

fn tensor<F: Fn(C64) -> f64 + Sync>(s: &Sampler, q: &QuadSpec, f: &F) -> Estimate {
    let n = q.grid_n;
    let rows = map_range(q.exec, n, |i| {
        let s_ = (i as f64 + 0.5) / n as f64;
        let mut acc = 0.0;
        for j in 0..n {
            let (z, w) = s.map(s_, (j as f64 + 0.5) / n as f64);
            if w != 0.0 {
                acc += w * f(z);
            }
        }
        acc
    });
    let total: f64 = rows.iter().sum();
    Estimate {
        value: total / (n * n) as f64,
        std_err: 0.0,
        samples: (n * n) as u64,
        exact: false,
    }
}

/// Area of two overlapping disks.
pub fn lens_area(a: &Disk, b: &Disk) -> f64 {
    let d = (a.center - b.center).norm();
    let (r1, r2) = (a.radius, b.radius);
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        return PI * r1.min(r2).powi(2);
    }
    let c1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0);
    let c2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0);
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * c1.acos() + r2 * r2 * c2.acos() - 0.5 * k.sqrt()
}

/// Exact area of a union of disks by Green's theorem over the uncovered arcs.
pub fn union_area(disks: &[Disk]) -> f64 {
    let mut total = 0.0;
    for (i, a) in disks.iter().enumerate() {
        let mut covered: Vec<(f64, f64)> = Vec::new();
        let mut hidden = false;
        for (j, b) in disks.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = (b.center - a.center).norm();
            if d + a.radius <= b.radius && (a.radius < b.radius || d > 0.0 || j < i) {
                hidden = true;
                break;
            }
            if d >= a.radius + b.radius || d + b.radius <= a.radius {
                continue;
            }
            let phi = (b.center - a.center).arg();
            let alpha = ((a.radius * a.radius + d * d - b.radius * b.radius) / (2.0 * a.radius * d))
                .clamp(-1.0, 1.0)
                .acos();
            let lo = (phi - alpha).rem_euclid(2.0 * PI);
            let hi = lo + 2.0 * alpha;
            if hi > 2.0 * PI {
                covered.push((lo, 2.0 * PI));
                covered.push((0.0, hi - 2.0 * PI));
            } else {
                covered.push((lo, hi));
            }
        }
        if hidden {
            continue;
        }
        covered.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut arcs = Vec::new();
        let mut at = 0.0;
        for (lo, hi) in covered {
            if lo > at {
                arcs.push((at, lo));
            }
            at = f64::max(at, hi);
        }
        if at < 2.0 * PI {
            arcs.push((at, 2.0 * PI));
        }
        let (r, cx, cy) = (a.radius, a.center.re, a.center.im);
        for (t1, t2) in arcs {
            total += 0.5 * (r * r * (t2 - t1) + r * cx * (t2.sin() - t1.sin()) - r * cy * (t2.cos() - t1.cos()));
        }
    }
    total
}

fn circular_area(c: &Circular) -> Result<f64> {
    match c {
        Circular::Disk(d) => Ok(d.area()),
        Circular::Exterior(_) => Err(Error::Unbounded),
    }
}

/// Area of an intersection of circular pieces (at most one exterior).
fn intersection_area(pieces: &[Circular]) -> Result<f64> {
    match pieces {
        [one] => circular_area(one),
        [Circular::Disk(a), Circular::Disk(b)] => Ok(lens_area(a, b)),
        [Circular::Disk(a), Circular::Exterior(x)] | [Circular::Exterior(x), Circular::Disk(a)] => {
            Ok(a.area() - lens_area(a, x))
        }
        [Circular::Exterior(_), Circular::Exterior(_)] => Err(Error::Unbounded),
        _ => Err(Error::Unsupported("intersection of more than two circular pieces".into())),
    }
}

/// Image of a circular piece; `None` if the pole sits on its boundary.
fn map_circular(m: &MobiusMap, c: &Circular) -> Option<Circular> {
    match c {
        Circular::Disk(d) => match m.image_disk(d) {
            CircleImage::Disk(x) => Some(Circular::Disk(x)),
            CircleImage::Exterior(x) => Some(Circular::Exterior(x.excluded)),
            CircleImage::HalfPlane(_) => None,
        },
        Circular::Exterior(d) => match m.image_disk(d) {
            CircleImage::Disk(x) => Some(Circular::Exterior(x)),
            CircleImage::Exterior(x) => Some(Circular::Disk(x.excluded)),
            CircleImage::HalfPlane(_) => None,
        },
    }
}

/// Exact `|M(E)|` when `E` is built from circles and avoids the pole.
pub fn mobius_image_area(m: &MobiusMap, e: &Region) -> Option<f64> {
    if let Region::UnionOfDisks(ds) = e {
        let mut images = Vec::with_capacity(ds.len());
        for d in ds {
            match m.image_disk(d) {
                CircleImage::Disk(x) => images.push(x),
                _ => return None,
            }
        }
        return Some(union_area(&images));
    }
    let pieces = e.circular_pieces()?;
    let images: Option<Vec<Circular>> = pieces.iter().map(|c| map_circular(m, c)).collect();
    intersection_area(&images?).ok()
}

/// `|E|`. Closed form for every variant; bounded regions only.
pub fn area(e: &Region) -> Result<Estimate> {
    match e {
        Region::Mask(m) => Ok(Estimate::exact(m.area())),
        Region::UnionOfDisks(ds) => Ok(Estimate::exact(union_area(ds))),
        _ => {
            e.window()?;
            let pieces = e.circular_pieces().expect("circular variant");
            Ok(Estimate::exact(intersection_area(&pieces)?))
        }
    }
}

fn check_pole(e: &Region, pole: Option<C64>) -> Result<()> {
    match pole {
        Some(z) if !e.excludes(z, POLE_MARGIN) => Err(Error::PoleInRegion(format!(
            "{z} lies within {POLE_MARGIN} of the {} region",
            e.kind()
        ))),
        _ => Ok(()),
    }
}

/// `|f(E)| = ∫_E J_f dm`.
pub fn pushforward_area(f: &PiecewiseQCMap, e: &Region, q: &QuadSpec) -> Result<Estimate> {
    check_pole(e, f.pole)?;
    q.check()?;
    if q.closed_form {
        if let (Region::Disk(d), Some(first)) = (e, f.branches.first()) {
            if let crate::extremal::BranchRegion::ClosedDisk(b) = first.region {
                if b.approx_eq(d, 1e-12) {
                    if let Some(m) = first.formula.as_mobius() {
                        if let Some(a) = mobius_image_area(&m, e) {
                            return Ok(Estimate::exact(a));
                        }
                    }
                }
            }
        }
    }
    integrate(e, q, |z| f.jacobian(z))
}

/// Which normalised conformal comparison map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// `f₀(z) = 1/(z - p)`.
    F0,
    /// `g₀(z) = z/(1 - pz)`.
    G0,
}

impl Frame {
    pub fn map(self, p: f64) -> MobiusMap {
        match self {
            Frame::F0 => MobiusMap::f0(p),
            Frame::G0 => MobiusMap::g0(p),
        }
    }

    pub fn pole(self, p: f64) -> Option<C64> {
        match self {
            Frame::F0 => Some(C64::from(p)),
            Frame::G0 => (p > 0.0).then(|| C64::from(1.0 / p)),
        }
    }

    /// Jacobian of the frame map.
    pub fn jacobian(self, p: f64, z: C64) -> f64 {
        match self {
            Frame::F0 => 1.0 / (z - p).norm_sqr().powi(2),
            Frame::G0 => 1.0 / (C64::from(1.0) - p * z).norm_sqr().powi(2),
        }
    }
}

/// `|f₀(E)|` or `|g₀(E)|`; exact for circular regions, quadrature otherwise.
pub fn reference_area(e: &Region, p: f64, frame: Frame, q: &QuadSpec) -> Result<Estimate> {
    check_pole(e, frame.pole(p))?;
    if q.closed_form {
        if let Some(a) = mobius_image_area(&frame.map(p), e) {
            return Ok(Estimate::exact(a));
        }
    }
    integrate(e, q, |z| frame.jacobian(p, z))
}

/// A nonnegative weight function.
#[derive(Clone)]
pub enum Weight {
    Constant(f64),
    /// First matching piece wins; `otherwise` elsewhere.
    Piecewise { pieces: Vec<(Region, f64)>, otherwise: f64 },
    Function(Arc<dyn Fn(C64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Constant(c) => write!(f, "Constant({c})"),
            Weight::Piecewise { pieces, otherwise } => f
                .debug_struct("Piecewise")
                .field("pieces", pieces)
                .field("otherwise", otherwise)
                .finish(),
            Weight::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Weight {
    /// `W₀ = Σ w_j χ_{Ẽ_j}` for a stacked construction.
    pub fn stacked(s: &StackedMap) -> Self {
        Weight::Piecewise {
            pieces: s
                .annuli
                .iter()
                .zip(&s.weights)
                .map(|(a, &w)| (Region::PseudoAnnulus(*a), w))
                .collect(),
            otherwise: 0.0,
        }
    }

    pub fn eval(&self, z: C64) -> f64 {
        match self {
            Weight::Constant(c) => *c,
            Weight::Piecewise { pieces, otherwise } => pieces
                .iter()
                .find(|(r, _)| r.contains(z))
                .map_or(*otherwise, |(_, w)| *w),
            Weight::Function(f) => f(z),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |c: f64| c >= 0.0 && c.is_finite();
        match self {
            Weight::Constant(c) if !ok(*c) => Err(Error::NegativeWeight),
            Weight::Piecewise { pieces, otherwise } if !ok(*otherwise) || pieces.iter().any(|(_, w)| !ok(*w)) => {
                Err(Error::NegativeWeight)
            }
            _ => Ok(()),
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Weight::Constant(c) => *c == 0.0,
            Weight::Piecewise { pieces, otherwise } => *otherwise == 0.0 && pieces.iter().all(|(_, w)| *w == 0.0),
            Weight::Function(_) => false,
        }
    }
}

fn weighted<F: Fn(C64) -> f64 + Sync>(e: &Region, w: &Weight, power: f64, q: &QuadSpec, jac: F) -> Result<Estimate> {
    w.validate()?;
    if w.is_zero() {
        return Ok(Estimate::exact(0.0));
    }
    let negative = AtomicBool::new(false);
    let est = integrate(e, q, |z| {
        let v = w.eval(z);
        if v < 0.0 {
            negative.store(true, Ordering::Relaxed);
            return 0.0;
        }
        if v == 0.0 {
            return 0.0;
        }
        v.powf(power) * jac(z)
    });
    if negative.load(Ordering::Relaxed) {
        return Err(Error::NegativeWeight);
    }
    est
}

/// `∫_E w^power J_f dm`.
pub fn weighted_pushforward(f: &PiecewiseQCMap, e: &Region, w: &Weight, power: f64, q: &QuadSpec) -> Result<Estimate> {
    check_pole(e, f.pole)?;
    if let Weight::Constant(c) = w {
        if *c > 0.0 {
            w.validate()?;
            return Ok(pushforward_area(f, e, q)?.scale(c.powf(power)));
        }
    }
    weighted(e, w, power, q, |z| f.jacobian(z))
}

/// `∫_E w^power J_0 dm` for the chosen frame.
pub fn weighted_reference(e: &Region, w: &Weight, power: f64, p: f64, frame: Frame, q: &QuadSpec) -> Result<Estimate> {
    check_pole(e, frame.pole(p))?;
    if let Weight::Constant(c) = w {
        if *c > 0.0 {
            w.validate()?;
            return Ok(reference_area(e, p, frame, q)?.scale(c.powf(power)));
        }
    }
    weighted(e, w, power, q, |z| frame.jacobian(p, z))
}

/// `Σ c_j^power |M(E_j)|` for a piecewise weight whose pieces are disjoint.
pub fn piecewise_reference(w: &Weight, power: f64, p: f64, frame: Frame, q: &QuadSpec) -> Result<Estimate> {
    let Weight::Piecewise { pieces, .. } = w else {
        return Err(Error::Unsupported("piecewise_reference needs a piecewise weight".into()));
    };
    w.validate()?;
    pieces.iter().try_fold(Estimate::exact(0.0), |acc, (r, c)| {
        Ok(acc.add(reference_area(r, p, frame, q)?.scale(c.powf(power))))
    })
}
