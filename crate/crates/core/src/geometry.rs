//! Möbius transformations and the disks used by the extremal constructions.
//!
//! Everything in this module is closed form. The pseudo-hyperbolic disk
//! `B(r)` is the preimage of `{|w| < r}` under `w = (z - p)/(1 - pz)`;
//! [`pseudo_disk`] returns it as a Euclidean disk.

use crate::error::{range_err, Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tolerance on `|ad - bc|` below which a map is rejected.
pub const DEGENERACY_TOL: f64 = 1e-14;
/// Distance below which a pole counts as lying on a circle.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// A point of the Riemann sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtPoint {
    Finite(C64),
    Infinity,
}

impl ExtPoint {
    pub fn finite(self) -> Option<C64> {
        match self {
            ExtPoint::Finite(z) => Some(z),
            ExtPoint::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtPoint::Infinity)
    }
}

/// `z ↦ (az + b)/(cz + d)` with `ad - bc ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MobiusMap {
    a: C64,
    b: C64,
    c: C64,
    d: C64,
}

impl MobiusMap {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > DEGENERACY_TOL) {
            return Err(Error::DegenerateMobius(det.norm()));
        }
        Ok(Self { a, b, c, d })
    }

    fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(C64::from(a), C64::from(b), C64::from(c), C64::from(d))
            .expect("real coefficients checked by caller")
    }

    pub fn identity() -> Self {
        Self::real(1.0, 0.0, 0.0, 1.0)
    }

    /// `z ↦ (z - p)/(1 - pz)`, a disk automorphism for `0 ≤ p < 1`.
    pub fn pseudo_hyperbolic(p: f64) -> Self {
        Self::real(1.0, -p, -p, 1.0)
    }

    /// `g₀(z) = z/(1 - pz)`, the conformal map of the class normalised at `1/p`.
    pub fn g0(p: f64) -> Self {
        Self::real(1.0, 0.0, -p, 1.0)
    }

    /// `f₀(z) = 1/(z - p)`.
    pub fn f0(p: f64) -> Self {
        Self::real(0.0, 1.0, 1.0, -p)
    }

    /// `z ↦ 1/z`.
    pub fn inversion() -> Self {
        Self::real(0.0, 1.0, 1.0, 0.0)
    }

    /// `z ↦ scale·z + shift`.
    pub fn affine(scale: C64, shift: C64) -> Result<Self> {
        Self::new(scale, shift, C64::from(0.0), C64::from(1.0))
    }

    pub fn coefficients(&self) -> [C64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn determinant(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Raw evaluation; non-finite at the pole.
    #[inline]
    pub fn eval(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Complex derivative `(ad - bc)/(cz + d)²`.
    #[inline]
    pub fn derivative(&self, z: C64) -> C64 {
        let den = self.c * z + self.d;
        self.determinant() / (den * den)
    }

    pub fn apply(&self, z: C64) -> ExtPoint {
        let num = self.a * z + self.b;
        let den = self.c * z + self.d;
        let scale = (self.c * z).norm() + self.d.norm();
        if den.norm() <= f64::EPSILON * scale || den.norm() == 0.0 {
            ExtPoint::Infinity
        } else {
            ExtPoint::Finite(num / den)
        }
    }

    pub fn apply_ext(&self, z: ExtPoint) -> ExtPoint {
        match z {
            ExtPoint::Finite(z) => self.apply(z),
            ExtPoint::Infinity => {
                if self.c.norm() == 0.0 {
                    ExtPoint::Infinity
                } else {
                    ExtPoint::Finite(self.a / self.c)
                }
            }
        }
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &MobiusMap) -> MobiusMap {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let (e, f, g, h) = (inner.a, inner.b, inner.c, inner.d);
        MobiusMap {
            a: a * e + b * g,
            b: a * f + b * h,
            c: c * e + d * g,
            d: c * f + d * h,
        }
    }

    pub fn inverse(&self) -> MobiusMap {
        MobiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// The point sent to infinity.
    pub fn pole(&self) -> ExtPoint {
        if self.c.norm() == 0.0 {
            ExtPoint::Infinity
        } else {
            ExtPoint::Finite(-self.d / self.c)
        }
    }

    /// Exact image of the open disk `disk`.
    pub fn image_disk(&self, disk: &Disk) -> CircleImage {
        let (c0, r) = (disk.center, disk.radius);
        let pole = match self.pole() {
            ExtPoint::Infinity => {
                let center = self.eval(c0);
                let radius = r * (self.a / self.d).norm();
                return CircleImage::Disk(Disk { center, radius });
            }
            ExtPoint::Finite(z) => z,
        };
        let offset = pole - c0;
        let dist = offset.norm();
        if (dist - r).abs() <= BOUNDARY_TOL * r.max(1.0) {
            return CircleImage::HalfPlane(self.half_plane_image(disk, pole));
        }
        // The reflection of the pole across the circle maps to the image center.
        let center = if dist <= f64::EPSILON * r {
            self.a / self.c
        } else {
            self.eval(c0 + r * r / offset.conj())
        };
        let far = if dist <= f64::EPSILON * r {
            c0 + r
        } else {
            c0 - offset * (r / dist)
        };
        let radius = (self.eval(far) - center).norm();
        let image = Disk { center, radius };
        if dist < r {
            CircleImage::Exterior(ExteriorRegion {
                excluded: image,
                clip: None,
            })
        } else {
            CircleImage::Disk(image)
        }
    }

    fn half_plane_image(&self, disk: &Disk, pole: C64) -> HalfPlane {
        let base = ((pole - disk.center) / disk.radius).arg();
        let w1 = self.eval(disk.boundary_point(base + 2.0 * PI / 3.0));
        let w2 = self.eval(disk.boundary_point(base - 2.0 * PI / 3.0));
        let inside = self.eval(disk.center);
        let t = (w2 - w1) / (w2 - w1).norm();
        let mut normal = C64::i() * t;
        if ((inside - w1) * normal.conj()).re > 0.0 {
            normal = -normal;
        }
        HalfPlane { point: w1, normal }
    }
}

/// Open Euclidean disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: C64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: C64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && center.re.is_finite() && center.im.is_finite()) {
            return range_err(format!("disk radius must be positive and finite, got {radius}"));
        }
        Ok(Self { center, radius })
    }

    pub fn unit() -> Self {
        Self {
            center: C64::from(0.0),
            radius: 1.0,
        }
    }

    #[inline]
    pub fn contains(&self, z: C64) -> bool {
        (z - self.center).norm_sqr() < self.radius * self.radius
    }

    #[inline]
    pub fn contains_closed(&self, z: C64) -> bool {
        (z - self.center).norm_sqr() <= self.radius * self.radius
    }

    /// Signed distance to the boundary circle (negative inside).
    #[inline]
    pub fn boundary_distance(&self, z: C64) -> f64 {
        (z - self.center).norm() - self.radius
    }

    pub fn boundary_point(&self, theta: f64) -> C64 {
        self.center + C64::from_polar(self.radius, theta)
    }

    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// Whether `other` lies inside `self` (closed containment).
    pub fn contains_disk(&self, other: &Disk) -> bool {
        (other.center - self.center).norm() + other.radius <= self.radius
    }

    pub fn approx_eq(&self, other: &Disk, tol: f64) -> bool {
        (self.center - other.center).norm() <= tol && (self.radius - other.radius).abs() <= tol
    }
}

/// `{z : |z - center| > radius}`, optionally intersected with a clip disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteriorRegion {
    pub excluded: Disk,
    pub clip: Option<Disk>,
}

impl ExteriorRegion {
    pub fn new(excluded: Disk) -> Self {
        Self {
            excluded,
            clip: None,
        }
    }

    pub fn with_clip(mut self, clip: Disk) -> Self {
        self.clip = Some(clip);
        self
    }

    pub fn contains(&self, z: C64) -> bool {
        !self.excluded.contains_closed(z) && self.clip.is_none_or(|c| c.contains_closed(z))
    }

    /// True when the set lies in the open exterior of the unit disk.
    pub fn within_unit_exterior(&self) -> bool {
        self.excluded.contains_disk(&Disk::unit()) && self.excluded.radius > 1.0
    }
}

/// `{w : Re((w - point)·conj(normal)) < 0}`; `normal` points outward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub point: C64,
    pub normal: C64,
}

impl HalfPlane {
    pub fn contains(&self, w: C64) -> bool {
        ((w - self.point) * self.normal.conj()).re < 0.0
    }

    pub fn boundary_distance(&self, w: C64) -> f64 {
        ((w - self.point) * self.normal.conj()).re / self.normal.norm()
    }
}

/// Image of a disk under a Möbius map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CircleImage {
    Disk(Disk),
    Exterior(ExteriorRegion),
    HalfPlane(HalfPlane),
}

impl CircleImage {
    /// Distance from `w` to the image boundary.
    pub fn boundary_distance(&self, w: C64) -> f64 {
        match self {
            CircleImage::Disk(d) => d.boundary_distance(w).abs(),
            CircleImage::Exterior(e) => e.excluded.boundary_distance(w).abs(),
            CircleImage::HalfPlane(h) => h.boundary_distance(w).abs(),
        }
    }
}

/// A disk or the exterior of a disk: the sets closed under inversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Circular {
    Disk(Disk),
    Exterior(Disk),
}

impl Circular {
    /// Image under `z ↦ 1/z`.
    pub fn invert(&self) -> Result<Circular> {
        match self {
            Circular::Disk(d) => invert_region(d),
            Circular::Exterior(excluded) => {
                // The exterior is the complement of the closed disk; its image
                // is the complement of the image of that disk.
                match invert_region(excluded)? {
                    Circular::Disk(img) => Ok(Circular::Exterior(img)),
                    Circular::Exterior(img) => Ok(Circular::Disk(img)),
                }
            }
        }
    }

    pub fn approx_eq(&self, other: &Circular, tol: f64) -> bool {
        match (self, other) {
            (Circular::Disk(a), Circular::Disk(b)) | (Circular::Exterior(a), Circular::Exterior(b)) => {
                a.approx_eq(b, tol)
            }
            _ => false,
        }
    }
}

/// Image of `disk` under `z ↦ 1/z`.
pub fn invert_region(disk: &Disk) -> Result<Circular> {
    let gap = (disk.center.norm() - disk.radius).abs();
    if gap <= BOUNDARY_TOL * disk.radius.max(1.0) {
        return Err(Error::BoundaryPole);
    }
    match MobiusMap::inversion().image_disk(disk) {
        CircleImage::Disk(d) => Ok(Circular::Disk(d)),
        CircleImage::Exterior(e) => Ok(Circular::Exterior(e.excluded)),
        CircleImage::HalfPlane(_) => Err(Error::BoundaryPole),
    }
}

/// `p ∈ [0, 1)`.
pub fn check_pole(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return range_err(format!("pole p must lie in [0, 1), got {p}"));
    }
    Ok(())
}

/// `r ∈ (0, 1)`.
pub fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < 1.0) {
        return range_err(format!("radius r must lie in (0, 1), got {r}"));
    }
    Ok(())
}

fn pseudo_disk_unchecked(p: f64, r: f64) -> Disk {
    let den = 1.0 - p * p * r * r;
    Disk {
        center: C64::from(p * (1.0 - r * r) / den),
        radius: r * (1.0 - p * p) / den,
    }
}

/// `B(r)`: the preimage of `{|w| < r}` under `(z - p)/(1 - pz)`.
pub fn pseudo_disk(p: f64, r: f64) -> Result<Disk> {
    check_pole(p)?;
    check_radius(r)?;
    Ok(pseudo_disk_unchecked(p, r))
}

/// `B₀(r)` written out with the exponent `1/K`; equal to `pseudo_disk(p, r^{1/K})`.
pub fn b0_disk(p: f64, r: f64, big_k: f64) -> Result<Disk> {
    check_pole(p)?;
    check_radius(r)?;
    if !(big_k >= 1.0) {
        return range_err(format!("K must be at least 1, got {big_k}"));
    }
    let s2 = r.powf(2.0 / big_k);
    let den = 1.0 - p * p * s2;
    Ok(Disk {
        center: C64::from(p * (1.0 - s2) / den),
        radius: r.powf(1.0 / big_k) * (1.0 - p * p) / den,
    })
}

/// `{z : inner < |(z - p)/(1 - pz)| < outer}` with `0 ≤ inner < outer ≤ 1`.
///
/// `inner = 0` gives the disk `B(outer)`; `outer = 1` the unit disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoAnnulus {
    pub p: f64,
    pub inner: f64,
    pub outer: f64,
}

impl PseudoAnnulus {
    pub fn new(p: f64, inner: f64, outer: f64) -> Result<Self> {
        check_pole(p)?;
        if !(inner >= 0.0 && inner < outer && outer <= 1.0) {
            return range_err(format!(
                "pseudo-annulus radii must satisfy 0 <= inner < outer <= 1, got {inner}, {outer}"
            ));
        }
        Ok(Self { p, inner, outer })
    }

    pub fn to_u(&self) -> MobiusMap {
        MobiusMap::pseudo_hyperbolic(self.p)
    }

    #[inline]
    pub fn u_modulus(&self, z: C64) -> f64 {
        ((z - self.p) / (1.0 - self.p * z)).norm()
    }

    pub fn contains(&self, z: C64) -> bool {
        if self.outer >= 1.0 && z.norm_sqr() > 1.0 {
            return false;
        }
        let s = self.u_modulus(z);
        s >= self.inner && s <= self.outer
    }

    pub fn outer_disk(&self) -> Disk {
        pseudo_disk_unchecked(self.p, self.outer)
    }

    pub fn inner_disk(&self) -> Option<Disk> {
        (self.inner > 0.0).then(|| pseudo_disk_unchecked(self.p, self.inner))
    }

    /// Euclidean area of the set.
    pub fn area(&self) -> f64 {
        self.outer_disk().area() - self.inner_disk().map_or(0.0, |d| d.area())
    }

    /// Boundary circles in the z-plane.
    pub fn boundaries(&self) -> Vec<Disk> {
        let mut v = vec![self.outer_disk()];
        v.extend(self.inner_disk());
        v
    }
}
