//! Neumann-series solution of `∂̄g = μ ∂g` for maps normalised like
//! `g₀(z) = z/(1 - pz)`.
//!
//! With `φ = (1 - pz)^{-2}` and `w = ∂̄g`, the unknown satisfies
//! `w = μφ + μH[w]`; then `∂g = φ + H[w]` and `g = g₀ + T[w]`.

use crate::error::{range_err, Error, Result};
use crate::extremal::PiecewiseQCMap;
use crate::geometry::check_pole;
use crate::measure::Region;
use crate::transforms::{cauchy, hilbert, sample, sample_cell_average, wirtinger, ComplexField, GridSpec};
use crate::C64;
use std::path::Path;

/// Slack allowed when comparing `|μ|` against its declared bound.
const BOUND_SLACK: f64 = 1e-12;

/// A Beltrami coefficient on a grid with its sup-norm bound.
#[derive(Clone, Debug)]
pub struct DilatationField {
    pub field: ComplexField,
    pub k: f64,
}

impl DilatationField {
    pub fn new(field: ComplexField, k: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return range_err(format!("dilatation bound must lie in [0, 1), got {k}"));
        }
        let m = field.max_norm();
        if m > k + BOUND_SLACK {
            return range_err(format!("|mu| reaches {m}, above the bound {k}"));
        }
        let h = field.h();
        if let Some(i) = field
            .values
            .iter()
            .enumerate()
            .position(|(i, v)| v.norm() > 0.0 && field.grid.point_at(i).norm() > 1.0 + h)
        {
            return range_err(format!(
                "mu must vanish outside the closed unit disk; sample at {} is nonzero",
                field.grid.point_at(i)
            ));
        }
        Ok(Self { field, k })
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self {
            field: ComplexField::zeros(grid),
            k: 0.0,
        }
    }

    /// Cell averages of the analytic dilatation of `map`.
    pub fn from_map(map: &PiecewiseQCMap, grid: GridSpec) -> Result<Self> {
        let field = sample_cell_average(|z| map.dilatation(z), grid)?.with_support(Region::Disk(crate::geometry::Disk::unit()));
        Self::new(field, map.dilatation_bound())
    }

    /// From a field dump; `k` defaults to the observed sup norm.
    pub fn load(path: impl AsRef<Path>, k: Option<f64>) -> Result<Self> {
        let field = ComplexField::load(path)?;
        let k = k.unwrap_or_else(|| field.max_norm());
        Self::new(field, k)
    }

    pub fn grid(&self) -> GridSpec {
        self.field.grid
    }
}

/// Stopping rule for [`neumann_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Absolute tolerance on `‖w_{m+1} - w_m‖₂`; `None` means `1e-6·‖w₀‖₂`.
    pub tol: Option<f64>,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: None, max_iter: 200 }
    }
}

pub const DEFAULT_RELATIVE_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BeltramiSolution {
    pub p: f64,
    pub mu: DilatationField,
    /// `∂̄g`.
    pub w: ComplexField,
    /// `∂g = φ + H[w]`.
    pub dg: ComplexField,
    /// `T[w]`, so that `g = g₀ + t`.
    pub t: ComplexField,
    pub g: ComplexField,
    pub iterations: usize,
    pub residual: f64,
    /// `‖w_{m+1} - w_m‖₂` per iteration.
    pub history: Vec<f64>,
    pub w0_norm: f64,
    pub tol: f64,
}

fn phi(p: f64) -> impl Fn(C64) -> C64 + Sync + Send {
    move |z| (C64::new(1.0, 0.0) - p * z).powi(-2)
}

fn g0(p: f64) -> impl Fn(C64) -> C64 + Sync + Send {
    move |z| z / (C64::new(1.0, 0.0) - p * z)
}

pub fn neumann_solve(mu: &DilatationField, p: f64, opts: SolveOptions) -> Result<BeltramiSolution> {
    check_pole(p)?;
    if opts.max_iter == 0 {
        return range_err("max_iter must be positive");
    }
    let phi_f = phi(p);
    // φ is only needed where μ is nonzero, which keeps the pole 1/p out of it.
    let w0 = mu.field.map(|z, m| if m == C64::new(0.0, 0.0) { m } else { m * phi_f(z) });
    let w0_norm = w0.l2_norm();
    let tol = match opts.tol {
        Some(t) if t > 0.0 => t,
        Some(t) => return range_err(format!("tolerance must be positive, got {t}")),
        None => DEFAULT_RELATIVE_TOL * w0_norm,
    };
    let mut w = w0.clone();
    let mut history = Vec::new();
    let mut iterations = 1;
    if w0_norm > 0.0 {
        iterations = 0;
        loop {
            let hw = hilbert(&w)?;
            let mut next = w0.clone();
            for ((v, m), x) in next.values.iter_mut().zip(&mu.field.values).zip(&hw.values) {
                *v += m * x;
            }
            let d = next.sub(&w)?.l2_norm();
            history.push(d);
            iterations += 1;
            w = next;
            w.support = mu.field.support.clone();
            if d <= tol {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::NonConvergence { iterations, residual: d });
            }
        }
    }
    let hw = hilbert(&w)?;
    let dg = hw.map(|z, h| phi_f(z) + h);
    let t = cauchy(&w)?;
    let g0_f = g0(p);
    let g = t.map(|z, v| g0_f(z) + v);
    Ok(BeltramiSolution {
        p,
        mu: mu.clone(),
        w,
        dg,
        t,
        g,
        iterations,
        residual: history.last().copied().unwrap_or(0.0),
        history,
        w0_norm,
        tol,
    })
}

/// Norms of the Neumann terms `μφ, μH[μφ], …`.
pub fn series_term_norms(mu: &DilatationField, p: f64, count: usize) -> Result<Vec<f64>> {
    check_pole(p)?;
    let phi_f = phi(p);
    let mut term = mu.field.map(|z, m| if m == C64::new(0.0, 0.0) { m } else { m * phi_f(z) });
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(term.l2_norm());
        let hw = hilbert(&term)?;
        term = hw.zip(&mu.field, |x, m| m * x)?;
        term.support = mu.field.support.clone();
    }
    Ok(out)
}

impl BeltramiSolution {
    pub fn grid(&self) -> GridSpec {
        self.w.grid
    }

    /// `J = |∂g|² - |∂̄g|²` per cell.
    pub fn jacobian(&self) -> Vec<f64> {
        self.dg
            .values
            .iter()
            .zip(&self.w.values)
            .map(|(d, w)| d.norm_sqr() - w.norm_sqr())
            .collect()
    }

    /// `Σ J·weight·h²`.
    pub fn area_with(&self, weight: &[f64]) -> f64 {
        let h2 = self.grid().h().powi(2);
        self.jacobian().iter().zip(weight).map(|(j, w)| j * w).sum::<f64>() * h2
    }

    /// `|g(E)|` from cell fractions of `E`.
    pub fn pushforward_area(&self, e: &Region) -> f64 {
        self.area_with(&self.grid().region_fraction(e))
    }

    /// Grid Wirtinger derivatives of `g`: differences of `T[w]` plus the
    /// exact `g₀′`, which avoids differencing across the pole.
    pub fn derivatives(&self) -> (ComplexField, ComplexField) {
        let (dt, dbt) = wirtinger(&self.t);
        let phi_f = phi(self.p);
        (dt.map(|z, v| v + phi_f(z)), dbt)
    }

    /// `‖∂̄g - μ∂g‖₂ / ‖∂g‖₂` over `mask`, with grid derivatives.
    pub fn beltrami_residual(&self, mask: &[bool]) -> Result<f64> {
        let (dz, dzb) = self.derivatives();
        let lhs = dzb.sub(&self.mu.field.mul(&dz)?)?;
        Ok(lhs.l2_norm_on(mask) / dz.l2_norm_on(mask))
    }

    /// `max |∂̄g| / |∂g|` over `mask`.
    pub fn max_dilatation_on(&self, mask: &[bool]) -> f64 {
        let (dz, dzb) = self.derivatives();
        dz.values
            .iter()
            .zip(&dzb.values)
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|((a, b), _)| b.norm() / a.norm())
            .fold(0.0, f64::max)
    }

    /// `max |g - g₀|` on the outermost ring of cells.
    pub fn edge_deviation(&self) -> f64 {
        let ring = self.grid().edge_ring(self.grid().h());
        self.t
            .values
            .iter()
            .zip(&ring)
            .filter(|(_, &r)| r)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max)
    }

    /// Observed contraction ratios `‖Δ_{m+1}‖/‖Δ_m‖`.
    pub fn residual_ratios(&self) -> Vec<f64> {
        self.history.windows(2).map(|w| w[1] / w[0]).collect()
    }

    /// A priori iteration bound for a contraction with factor `k`.
    pub fn iteration_bound(&self) -> usize {
        let k = self.mu.k;
        if k == 0.0 || self.w0_norm == 0.0 {
            return 4;
        }
        let x = (self.tol * (1.0 - k) / self.w0_norm).ln() / k.ln();
        x.ceil().max(0.0) as usize + 3
    }

    /// Exact `g₀` on the grid, for comparisons.
    pub fn g0_field(&self) -> Result<ComplexField> {
        sample(g0(self.p), self.grid())
    }
}
