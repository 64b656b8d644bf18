//! Grid fields and the planar singular integral operators.
//!
//! A [`GridSpec`] is the square `[-L, L]²` cut into `n × n` cells of side
//! `h = 2L/n`; samples live at cell centres, row `i` at `y = -L + (i + ½)h`.
//! The Cauchy transform `T` and the Beurling transform `H` satisfy
//! `∂̄T = id` and `∂T = H` on compactly supported densities.

mod beurling;
mod cauchy;
pub mod fft;

pub use beurling::{hilbert, hilbert_with, DEFAULT_PAD};
pub use cauchy::{cauchy, wirtinger};

use crate::error::{range_err, Error, Result};
use crate::exec::{map_range, Exec};
use crate::geometry::Disk;
use crate::measure::Region;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Sub-samples per axis used for cell averages.
pub const CELL_SUBSAMPLES: usize = 4;

/// Square sampling window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub n: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl GridSpec {
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width >= 2.0 && half_width.is_finite()) {
            return range_err(format!("window half-width must be at least 2, got {half_width}"));
        }
        if n < 8 || !n.is_power_of_two() {
            return range_err(format!("grid size must be a power of two and at least 8, got {n}"));
        }
        Ok(Self {
            half_width,
            n,
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Centre of cell `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> C64 {
        let h = self.h();
        C64::new(
            -self.half_width + (j as f64 + 0.5) * h,
            -self.half_width + (i as f64 + 0.5) * h,
        )
    }

    pub fn point_at(&self, idx: usize) -> C64 {
        self.point(idx / self.n, idx % self.n)
    }

    fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.half_width == other.half_width
    }

    /// Per-cell booleans.
    pub fn mask(&self, f: impl Fn(C64) -> bool + Sync + Send) -> Vec<bool> {
        self.collect(f)
    }

    /// Fraction of each cell inside `region`, from a sub-sampled average.
    pub fn region_fraction(&self, region: &Region) -> Vec<f64> {
        let s = CELL_SUBSAMPLES;
        let h = self.h();
        self.collect(|z| {
            let mut hits = 0usize;
            for a in 0..s {
                for b in 0..s {
                    let dz = C64::new(((a as f64 + 0.5) / s as f64 - 0.5) * h, ((b as f64 + 0.5) / s as f64 - 0.5) * h);
                    hits += usize::from(region.contains(z + dz));
                }
            }
            hits as f64 / (s * s) as f64
        })
    }

    /// Cells within `width` of any of the circles.
    pub fn seam_band(&self, circles: &[Disk], width: f64) -> Vec<bool> {
        self.collect(|z| circles.iter().any(|d| d.boundary_distance(z).abs() < width))
    }

    /// Cells within `width` of the window edge.
    pub fn edge_ring(&self, width: f64) -> Vec<bool> {
        let l = self.half_width;
        self.collect(|z| z.re.abs() > l - width || z.im.abs() > l - width)
    }

    fn collect<T: Send>(&self, f: impl Fn(C64) -> T + Sync + Send) -> Vec<T> {
        let n = self.n;
        map_range(self.exec, n, |i| (0..n).map(|j| f(self.point(i, j))).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Complex samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<C64>,
    /// Declared support; `None` means "infer from the nonzero samples".
    pub support: Option<Region>,
}

impl ComplexField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.len()],
            support: None,
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}×{} grid",
                values.len(),
                grid.n,
                grid.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!("sample {i} at {}", grid.point_at(i))));
        }
        Ok(Self { grid, values, support: None })
    }

    pub fn with_support(mut self, support: Region) -> Self {
        self.support = Some(support);
        self
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn map(&self, f: impl Fn(C64, C64) -> C64) -> ComplexField {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.point_at(i), v))
            .collect();
        ComplexField {
            grid: self.grid,
            values,
            support: self.support.clone(),
        }
    }

    pub fn zip(&self, other: &ComplexField, f: impl Fn(C64, C64) -> C64) -> Result<ComplexField> {
        self.check_grid(other)?;
        Ok(ComplexField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            support: None,
        })
    }

    pub fn scale(&self, a: C64) -> ComplexField {
        self.map(|_, v| a * v)
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip(other, |a, b| a * b)
    }

    pub fn check_grid(&self, other: &ComplexField) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "n={} L={} vs n={} L={}",
                self.grid.n, self.grid.half_width, other.grid.n, other.grid.half_width
            )))
        }
    }

    /// `(Σ|v|² h²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt() * self.h()
    }

    /// L² norm over the cells where `mask` holds.
    pub fn l2_norm_on(&self, mask: &[bool]) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        s.sqrt() * self.h()
    }

    /// `⟨f, g⟩ = Σ f·conj(g) h²`.
    pub fn inner(&self, other: &ComplexField) -> Result<C64> {
        self.check_grid(other)?;
        let h2 = self.h() * self.h();
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum::<C64>() * h2)
    }

    /// `Σ weight·|v| h²`.
    pub fn weighted_l1(&self, weight: &[f64]) -> f64 {
        let h2 = self.h() * self.h();
        self.values.iter().zip(weight).map(|(v, w)| w * v.norm()).sum::<f64>() * h2
    }

    /// `Σ weight·v h²`.
    pub fn weighted_sum(&self, weight: &[f64]) -> C64 {
        let h2 = self.h() * self.h();
        self.values.iter().zip(weight).map(|(v, w)| v * *w).sum::<C64>() * h2
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Relative L² distance `‖self - reference‖ / ‖reference‖` over `mask`.
    pub fn relative_error_on(&self, reference: &ComplexField, mask: &[bool]) -> Result<f64> {
        let diff = self.sub(reference)?;
        Ok(diff.l2_norm_on(mask) / reference.l2_norm_on(mask))
    }

    /// Compact support well inside the window: within `[-1, 1]²` up to one
    /// cell when inferred from samples.
    pub fn check_support(&self) -> Result<()> {
        // A margin of L - 1 from the window edge.
        let limit = 1.0;
        let (lo, hi, slack) = match &self.support {
            Some(r) => {
                let (lo, hi) = r.window()?;
                (lo, hi, 1e-9)
            }
            None => {
                let mut lo = C64::new(0.0, 0.0);
                let mut hi = C64::new(0.0, 0.0);
                for (i, v) in self.values.iter().enumerate() {
                    if *v != C64::new(0.0, 0.0) {
                        let z = self.grid.point_at(i);
                        lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
                        hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
                    }
                }
                (lo, hi, 2.0 * self.h())
            }
        };
        let reach = [lo.re, lo.im, hi.re, hi.im].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if reach > limit + slack {
            return Err(Error::SupportMargin(format!(
                "support reaches {reach:.4} but must stay within {limit} for a window of half-width {}",
                self.grid.half_width
            )));
        }
        Ok(())
    }

    /// Text dump: `n L`, then `n²` lines `re im`, row-major.
    pub fn to_dump(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 40);
        let _ = writeln!(s, "{} {}", self.grid.n, self.grid.half_width);
        for v in &self.values {
            let _ = writeln!(s, "{} {}", v.re, v.im);
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty field dump".into()))?;
        let mut h = header.split_whitespace();
        let (Some(n), Some(l), None) = (h.next(), h.next(), h.next()) else {
            return Err(Error::Parse(format!("field header must be 'n L', got '{header}'")));
        };
        let n: usize = n.parse().map_err(|e| Error::Parse(format!("n: {e}")))?;
        let l: f64 = l.parse().map_err(|e| Error::Parse(format!("L: {e}")))?;
        let grid = GridSpec::new(l, n)?;
        let mut values = Vec::with_capacity(grid.len());
        for (k, line) in lines.enumerate() {
            let mut t = line.split_whitespace();
            let (Some(re), Some(im), None) = (t.next(), t.next(), t.next()) else {
                return Err(Error::Parse(format!("line {}: expected 're im'", k + 2)));
            };
            let p = |x: &str| x.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", k + 2)));
            values.push(C64::new(p(re)?, p(im)?));
        }
        Self::from_values(grid, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_dump())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_dump(&std::fs::read_to_string(path)?)
    }
}

/// Point samples at cell centres.
pub fn sample(rule: impl Fn(C64) -> C64 + Sync + Send, grid: GridSpec) -> Result<ComplexField> {
    ComplexField::from_values(grid, grid.collect(rule))
}

/// Cell averages from a `CELL_SUBSAMPLES²` sub-grid; resolves jumps at the
/// cell scale.
pub fn sample_cell_average(rule: impl Fn(C64) -> C64 + Sync + Send, grid: GridSpec) -> Result<ComplexField> {
    let s = CELL_SUBSAMPLES;
    let h = grid.h();
    let values = grid.collect(|z| {
        let mut acc = C64::new(0.0, 0.0);
        for a in 0..s {
            for b in 0..s {
                let dz = C64::new(((a as f64 + 0.5) / s as f64 - 0.5) * h, ((b as f64 + 0.5) / s as f64 - 0.5) * h);
                acc += rule(z + dz);
            }
        }
        acc / (s * s) as f64
    });
    ComplexField::from_values(grid, values)
}
