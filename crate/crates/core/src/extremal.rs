//! Explicit extremal maps and their first-order jets.
//!
//! Every map is a [`PiecewiseQCMap`]: an ordered list of branches, each a
//! region predicate plus a [`Formula`]. The first branch whose region
//! contains `z` is used, so a disk branch owns its boundary circle.
//!
//! Formulas are chains of elementary [`Stage`]s whose Wirtinger derivatives
//! are known in closed form and composed by the chain rule
//!
//! ```text
//! ∂(F∘H)  = F_w·∂H  + F_w̄·conj(∂̄H)
//! ∂̄(F∘H) = F_w·∂̄H + F_w̄·conj(∂H)
//! ```

use crate::error::{range_err, Error, Result};
use crate::geometry::{check_pole, check_radius, pseudo_disk, Disk, MobiusMap, PseudoAnnulus};
use crate::C64;
use serde::{Deserialize, Serialize};

/// Parameters of the extremal families. `k` is canonical; `K` is derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    k: f64,
    /// Kept alongside `k` so that a given `K` round-trips exactly.
    big_k: f64,
    p: f64,
    r: f64,
}

impl DistortionParams {
    pub fn new(p: f64, r: f64, k: f64) -> Result<Self> {
        check_pole(p)?;
        check_radius(r)?;
        if !(0.0..1.0).contains(&k) {
            return range_err(format!("k must lie in [0, 1), got {k}"));
        }
        Ok(Self { k, big_k: (1.0 + k) / (1.0 - k), p, r })
    }

    pub fn from_big_k(p: f64, r: f64, big_k: f64) -> Result<Self> {
        Ok(Self { big_k, ..Self::new(p, r, k_from_big_k(big_k)?)? })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn big_k(&self) -> f64 {
        self.big_k
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// The original-frame extremal sets need the pole inside `B(r)`.
    pub fn require_pole_inside(&self) -> Result<()> {
        if self.p < self.r {
            Ok(())
        } else {
            range_err(format!("this construction needs p < r, got p={} r={}", self.p, self.r))
        }
    }
}

pub fn k_from_big_k(big_k: f64) -> Result<f64> {
    if !(big_k >= 1.0 && big_k.is_finite()) {
        return range_err(format!("K must be finite and at least 1, got {big_k}"));
    }
    Ok((big_k - 1.0) / (big_k + 1.0))
}

/// Value and Wirtinger derivatives at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub value: C64,
    pub dz: C64,
    pub dzb: C64,
}

impl Jet {
    pub fn identity(z: C64) -> Self {
        Self {
            value: z,
            dz: C64::from(1.0),
            dzb: C64::from(0.0),
        }
    }

    /// `|∂f|² - |∂̄f|²`.
    pub fn jacobian(&self) -> f64 {
        self.dz.norm_sqr() - self.dzb.norm_sqr()
    }

    /// `∂̄f / ∂f`; zero where the map is holomorphic.
    pub fn dilatation(&self) -> C64 {
        if self.dzb == C64::from(0.0) {
            C64::from(0.0)
        } else {
            self.dzb / self.dz
        }
    }

    fn then(self, value: C64, fw: C64, fwb: C64) -> Jet {
        Jet {
            value,
            dz: fw * self.dz + fwb * self.dzb.conj(),
            dzb: fw * self.dzb + fwb * self.dz.conj(),
        }
    }
}

/// An elementary map with closed-form Wirtinger derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stage {
    Mobius(MobiusMap),
    /// `u ↦ u|u|^exponent`.
    RadialPower(f64),
    /// `u ↦ ū`.
    Conjugate,
    /// `f^ρ_r(u) = ρ·f_r(u/ρ)` with `f_r` the three-branch radial stretch.
    RadialStretch { r: f64, inv_k: f64, rho: f64 },
}

impl Stage {
    /// Returns `(F, F_w, F_w̄)` at `w`.
    fn local(&self, w: C64) -> (C64, C64, C64) {
        let zero = C64::from(0.0);
        match *self {
            Stage::Mobius(m) => (m.eval(w), m.derivative(w), zero),
            Stage::RadialPower(a) => radial_power(w, a),
            Stage::Conjugate => (w.conj(), zero, C64::from(1.0)),
            Stage::RadialStretch { r, inv_k, rho } => {
                let s = w.norm();
                if s <= rho * r {
                    let c = r.powf(inv_k - 1.0);
                    (w * c, C64::from(c), zero)
                } else if s <= rho {
                    let (f, fw, fwb) = radial_power(w / rho, inv_k - 1.0);
                    (f * rho, fw, fwb)
                } else {
                    (w, C64::from(1.0), zero)
                }
            }
        }
    }

    fn is_holomorphic(&self) -> bool {
        matches!(self, Stage::Mobius(_))
    }
}

fn radial_power(w: C64, a: f64) -> (C64, C64, C64) {
    let s = w.norm();
    if s == 0.0 {
        return (C64::from(0.0), C64::from(f64::NAN), C64::from(f64::NAN));
    }
    let m = s.powf(a);
    let phase = w / w.conj();
    (w * m, C64::from((1.0 + a / 2.0) * m), phase * ((a / 2.0) * m))
}

/// A chain of stages, applied first to last.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Formula(pub Vec<Stage>);

impl Formula {
    pub fn mobius(m: MobiusMap) -> Self {
        Formula(vec![Stage::Mobius(m)])
    }

    pub fn then(mut self, stage: Stage) -> Self {
        self.0.push(stage);
        self
    }

    pub fn jet(&self, z: C64) -> Jet {
        self.0.iter().fold(Jet::identity(z), |j, stage| {
            let (f, fw, fwb) = stage.local(j.value);
            j.then(f, fw, fwb)
        })
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.0.iter().fold(z, |w, stage| stage.local(w).0)
    }

    /// Collapses an all-Möbius chain into a single map.
    pub fn as_mobius(&self) -> Option<MobiusMap> {
        self.0.iter().try_fold(MobiusMap::identity(), |acc, s| match s {
            Stage::Mobius(m) => Some(m.compose(&acc)),
            _ => None,
        })
    }

    pub fn is_holomorphic(&self) -> bool {
        self.0.iter().all(Stage::is_holomorphic)
    }
}

/// Where a branch applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchRegion {
    ClosedDisk(Disk),
    Everywhere,
}

impl BranchRegion {
    pub fn contains(&self, z: C64) -> bool {
        match self {
            BranchRegion::ClosedDisk(d) => d.contains_closed(z),
            BranchRegion::Everywhere => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub region: BranchRegion,
    pub formula: Formula,
    /// Declared conformal (orientation-preserving and holomorphic).
    pub conformal: bool,
}

/// A quasiconformal map given by ordered branches.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseQCMap {
    pub label: String,
    pub branches: Vec<Branch>,
    /// Circles across which the formula changes.
    pub seams: Vec<Disk>,
    /// Finite pole of the map, if any.
    pub pole: Option<C64>,
    pub params: Option<DistortionParams>,
}

impl PiecewiseQCMap {
    pub fn branch_index(&self, z: C64) -> usize {
        self.branches
            .iter()
            .position(|b| b.region.contains(z))
            .unwrap_or(self.branches.len() - 1)
    }

    pub fn branch(&self, z: C64) -> &Branch {
        &self.branches[self.branch_index(z)]
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.branch(z).formula.eval(z)
    }

    /// Analytic jet at `z`.
    pub fn jet(&self, z: C64) -> Jet {
        self.branch(z).formula.jet(z)
    }

    pub fn jacobian(&self, z: C64) -> f64 {
        self.jet(z).jacobian()
    }

    pub fn dilatation(&self, z: C64) -> C64 {
        let b = self.branch(z);
        if b.conformal {
            C64::from(0.0)
        } else {
            b.formula.jet(z).dilatation()
        }
    }

    pub fn is_conformal_at(&self, z: C64) -> bool {
        self.branch(z).conformal
    }

    pub fn seam_distance(&self, z: C64) -> f64 {
        self.seams
            .iter()
            .map(|s| s.boundary_distance(z).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Declared bound on `|μ|`.
    pub fn dilatation_bound(&self) -> f64 {
        self.params.map_or(0.0, |p| p.k())
    }

    /// Wirtinger derivatives by centred finite differences with step `h`.
    pub fn finite_difference_jet(&self, z: C64, h: f64) -> Result<Jet> {
        if !(h > 0.0) {
            return range_err(format!("finite-difference step must be positive, got {h}"));
        }
        let d = self.seam_distance(z);
        if d < 2.0 * h {
            return Err(Error::NearSeam {
                point: format!("{z}"),
                distance: d,
                step: h,
            });
        }
        if let Some(pole) = self.pole {
            if (z - pole).norm() < 2.0 * h.max(1e-6) {
                return Err(Error::NearPole(format!("{z}")));
            }
        }
        let fx = (self.eval(z + h) - self.eval(z - h)) / (2.0 * h);
        let ih = C64::new(0.0, h);
        let fy = (self.eval(z + ih) - self.eval(z - ih)) / (2.0 * h);
        let i = C64::i();
        Ok(Jet {
            value: self.eval(z),
            dz: (fx - i * fy) * 0.5,
            dzb: (fx + i * fy) * 0.5,
        })
    }

    /// Complex dilatation from finite-difference derivatives.
    pub fn dilatation_at(&self, z: C64, h: f64) -> Result<C64> {
        let j = self.finite_difference_jet(z, h)?;
        Ok(j.dzb / j.dz)
    }

    /// Jacobian from finite-difference derivatives.
    pub fn jacobian_at(&self, z: C64, h: f64) -> Result<f64> {
        Ok(self.finite_difference_jet(z, h)?.jacobian())
    }
}

/// Default finite-difference step relative to the local length scale.
pub fn default_step(scale: f64) -> f64 {
    1e-5 * scale.max(f64::MIN_POSITIVE)
}

fn affine_real(scale: f64, shift: f64) -> MobiusMap {
    MobiusMap::affine(C64::from(scale), C64::from(shift)).expect("nonzero scale")
}

/// `w ↦ w/(1 - p²) + p/(1 - p²)`; sends the u-plane back to the g₀ picture.
fn normalizer(p: f64) -> MobiusMap {
    let s = 1.0 / (1.0 - p * p);
    affine_real(s, p * s)
}

fn check_big_k(big_k: f64) -> Result<()> {
    k_from_big_k(big_k).map(|_| ())
}

/// The radial stretch `f_r`: `r^{1/K-1}z` on `|z| < r`, `z|z|^{1/K-1}` on
/// `r ≤ |z| ≤ 1`, identity outside.
pub fn radial_stretch(r: f64, big_k: f64) -> Result<PiecewiseQCMap> {
    check_radius(r)?;
    check_big_k(big_k)?;
    let inner = Disk::new(C64::from(0.0), r)?;
    let a = 1.0 / big_k - 1.0;
    Ok(PiecewiseQCMap {
        label: format!("radial_stretch(r={r}, K={big_k})"),
        branches: vec![
            Branch {
                region: BranchRegion::ClosedDisk(inner),
                formula: Formula::mobius(affine_real(r.powf(a), 0.0)),
                conformal: true,
            },
            Branch {
                region: BranchRegion::ClosedDisk(Disk::unit()),
                formula: Formula(vec![Stage::RadialPower(a)]),
                conformal: big_k == 1.0,
            },
            Branch {
                region: BranchRegion::Everywhere,
                formula: Formula::mobius(MobiusMap::identity()),
                conformal: true,
            },
        ],
        seams: vec![inner, Disk::unit()],
        pole: None,
        params: Some(DistortionParams::from_big_k(0.0, r, big_k)?),
    })
}

fn pole_family(params: DistortionParams, inner: Disk, linear: f64, exponent: f64, label: String) -> PiecewiseQCMap {
    let p = params.p();
    let u = MobiusMap::pseudo_hyperbolic(p);
    let norm = normalizer(p);
    PiecewiseQCMap {
        label,
        branches: vec![
            Branch {
                region: BranchRegion::ClosedDisk(inner),
                formula: Formula::mobius(norm.compose(&affine_real(linear, 0.0)).compose(&u)),
                conformal: true,
            },
            Branch {
                region: BranchRegion::ClosedDisk(Disk::unit()),
                formula: Formula::mobius(u)
                    .then(Stage::RadialPower(exponent))
                    .then(Stage::Mobius(norm)),
                conformal: params.k() == 0.0,
            },
            Branch {
                region: BranchRegion::Everywhere,
                formula: Formula::mobius(MobiusMap::g0(p)),
                conformal: true,
            },
        ],
        seams: vec![inner, Disk::unit()],
        pole: (p > 0.0).then(|| C64::from(1.0 / p)),
        params: Some(params),
    }
}

/// The extremal map for the conformal-on-`B(r)` inequality.
pub fn pole_stretch(params: DistortionParams) -> Result<PiecewiseQCMap> {
    let (p, r, big_k) = (params.p(), params.r(), params.big_k());
    let inner = pseudo_disk(p, r)?;
    Ok(pole_family(
        params,
        inner,
        r.powf(1.0 / big_k - 1.0),
        1.0 / big_k - 1.0,
        format!("pole_stretch(p={p}, r={r}, K={big_k})"),
    ))
}

/// The extremal map for the conformal-outside-a-compact-set inequality.
/// Its linear branch lives on `B₀(r) = B(r^{1/K})`.
pub fn inverse_stretch(params: DistortionParams) -> Result<PiecewiseQCMap> {
    let (p, r, big_k) = (params.p(), params.r(), params.big_k());
    let inner = pseudo_disk(p, r.powf(1.0 / big_k))?;
    Ok(pole_family(
        params,
        inner,
        r.powf(1.0 - 1.0 / big_k),
        big_k - 1.0,
        format!("inverse_stretch(p={p}, r={r}, K={big_k})"),
    ))
}

/// Output of [`stacked_map`].
#[derive(Clone, Debug)]
pub struct StackedMap {
    pub map: PiecewiseQCMap,
    pub big_k: f64,
    pub p: f64,
    pub radii: Vec<f64>,
    pub pweights: Vec<f64>,
    /// `w_j = (r_1⋯r_j)^{-2/K}`.
    pub weights: Vec<f64>,
    /// `ρ_1 = 1, ρ_{j+1}² = r_j²ρ_j² - p_j`.
    pub rho: Vec<f64>,
    /// `Ẽ_j`: preimages of `E_j = {ρ_{j+1} < |u| < ρ_j r_j}` (`E_n` a disk).
    pub annuli: Vec<PseudoAnnulus>,
}

const CHAIN_TOL: f64 = 1e-12;

/// Composition of scaled radial stretches transplanted to the pole frame.
pub fn stacked_map(p: f64, big_k: f64, radii: &[f64], pweights: &[f64]) -> Result<StackedMap> {
    check_pole(p)?;
    check_big_k(big_k)?;
    let n = radii.len();
    if n == 0 || pweights.len() != n {
        return range_err(format!(
            "need equally many radii and weights (got {} and {})",
            n,
            pweights.len()
        ));
    }
    for &r in radii {
        check_radius(r)?;
    }
    if let Some(q) = pweights.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
        return range_err(format!("stacking weights p_j must lie in (0, 1), got {q}"));
    }
    let mut weights = Vec::with_capacity(n);
    let mut prod = 1.0;
    for &r in radii {
        prod *= r;
        weights.push(prod.powf(-2.0 / big_k));
    }
    let total: f64 = pweights.iter().zip(&weights).map(|(q, w)| q * w.powf(big_k)).sum();
    if (total - 1.0).abs() > CHAIN_TOL {
        return Err(Error::Normalization(total));
    }
    let mut rho = vec![1.0];
    for j in 0..n - 1 {
        let next = radii[j] * radii[j] * rho[j] * rho[j] - pweights[j];
        if !(next > 0.0) {
            return Err(Error::InfeasibleChain(format!("rho_{}^2 = {next} is not positive", j + 2)));
        }
        rho.push(next.sqrt());
    }
    let last = radii[n - 1] * radii[n - 1] * rho[n - 1] * rho[n - 1];
    if (last - pweights[n - 1]).abs() > CHAIN_TOL {
        return Err(Error::InfeasibleChain(format!(
            "r_n^2 rho_n^2 = {last} differs from p_n = {}",
            pweights[n - 1]
        )));
    }

    let inv_k = 1.0 / big_k;
    let mut formula = Formula::mobius(MobiusMap::pseudo_hyperbolic(p));
    for j in (0..n).rev() {
        formula = formula.then(Stage::RadialStretch {
            r: radii[j],
            inv_k,
            rho: rho[j],
        });
    }
    formula = formula.then(Stage::Mobius(normalizer(p)));

    let mut annuli = Vec::with_capacity(n);
    let mut seams = Vec::new();
    for j in 0..n {
        let inner = if j + 1 < n { rho[j + 1] } else { 0.0 };
        annuli.push(PseudoAnnulus::new(p, inner, rho[j] * radii[j])?);
        seams.push(pseudo_disk_or_unit(p, rho[j] * radii[j]));
        seams.push(pseudo_disk_or_unit(p, rho[j]));
    }
    let conformal = big_k == 1.0;
    let map = PiecewiseQCMap {
        label: format!("stacked_map(p={p}, K={big_k}, n={n})"),
        branches: vec![
            Branch {
                region: BranchRegion::ClosedDisk(Disk::unit()),
                formula,
                conformal,
            },
            Branch {
                region: BranchRegion::Everywhere,
                formula: Formula::mobius(MobiusMap::g0(p)),
                conformal: true,
            },
        ],
        seams,
        pole: (p > 0.0).then(|| C64::from(1.0 / p)),
        params: Some(DistortionParams::from_big_k(p, radii[0], big_k)?),
    };
    Ok(StackedMap {
        map,
        big_k,
        p,
        radii: radii.to_vec(),
        pweights: pweights.to_vec(),
        weights,
        rho,
        annuli,
    })
}

fn pseudo_disk_or_unit(p: f64, s: f64) -> Disk {
    if s >= 1.0 {
        Disk::unit()
    } else {
        PseudoAnnulus { p, inner: 0.0, outer: s }.outer_disk()
    }
}

/// Feasible stacking weights for fixed radii: `ρ_{j+1} = shrink·ρ_j r_j`,
/// `p_j = r_j²ρ_j² - ρ_{j+1}²`, `p_n = r_n²ρ_n²`. The normalisation
/// `Σ p_j w_j^K = 1` then holds by telescoping.
pub fn feasible_pweights(radii: &[f64], shrink: f64) -> Result<Vec<f64>> {
    if !(shrink > 0.0 && shrink < 1.0) {
        return range_err(format!("shrink factor must lie in (0, 1), got {shrink}"));
    }
    for &r in radii {
        check_radius(r)?;
    }
    let n = radii.len();
    let mut rho = 1.0f64;
    let mut out = Vec::with_capacity(n);
    for (j, &r) in radii.iter().enumerate() {
        let outer = r * rho;
        if j + 1 < n {
            let next = shrink * outer;
            out.push(outer * outer - next * next);
            rho = next;
        } else {
            out.push(outer * outer);
        }
    }
    Ok(out)
}

/// The continuous witness whose `∂̄` is `χ_E(1 - pz̄)^{-2}`, with `E = B(r)`.
#[derive(Clone, Debug)]
pub struct Th3Witness {
    pub map: PiecewiseQCMap,
    pub region: Disk,
    pub p: f64,
    pub r: f64,
}

impl Th3Witness {
    /// `∂̄f = χ_E(1 - pz̄)^{-2}`.
    pub fn dbar(&self, z: C64) -> C64 {
        if self.region.contains(z) {
            let d = 1.0 - self.p * z.conj();
            (d * d).inv()
        } else {
            C64::from(0.0)
        }
    }

    /// `∂f = -r²(z - p)^{-2}χ_{ℂ∖E}`.
    pub fn d(&self, z: C64) -> C64 {
        if self.region.contains(z) {
            C64::from(0.0)
        } else {
            let d = z - self.p;
            -(self.r * self.r) / (d * d)
        }
    }
}

pub fn th3_witness(p: f64, r: f64) -> Result<Th3Witness> {
    let region = pseudo_disk(p, r)?;
    let s = 1.0 - p * p;
    let inside = MobiusMap::new(C64::from(1.0 / s), C64::from(-p / s), C64::from(-p), C64::from(1.0))?;
    let outside = MobiusMap::new(
        C64::from(-p * r * r),
        C64::from(r * r),
        C64::from(s),
        C64::from(-s * p),
    )?;
    let map = PiecewiseQCMap {
        label: format!("th3_witness(p={p}, r={r})"),
        branches: vec![
            Branch {
                region: BranchRegion::ClosedDisk(region),
                formula: Formula(vec![Stage::Conjugate, Stage::Mobius(inside)]),
                conformal: false,
            },
            Branch {
                region: BranchRegion::Everywhere,
                formula: Formula::mobius(outside),
                conformal: true,
            },
        ],
        seams: vec![region],
        pole: None,
        params: None,
    };
    Ok(Th3Witness { map, region, p, r })
}
