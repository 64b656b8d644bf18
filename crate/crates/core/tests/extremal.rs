use proptest::prelude::*;
use qcarea::extremal::{
    default_step, feasible_pweights, inverse_stretch, pole_stretch, radial_stretch, stacked_map, DistortionParams,
    PiecewiseQCMap,
};
use qcarea::geometry::{b0_disk, pseudo_disk, Disk};
use qcarea::C64;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn maps() -> Vec<PiecewiseQCMap> {
    let mut out = vec![radial_stretch(0.6, 2.0).unwrap(), radial_stretch(0.3, 1.2).unwrap()];
    for &(p, r, k) in &[(0.0, 0.6, 2.0), (0.4, 0.6, 1.5), (0.5, 0.8, 1.2), (0.3, 0.5, 3.0)] {
        let params = DistortionParams::from_big_k(p, r, k).unwrap();
        out.push(pole_stretch(params).unwrap());
        out.push(inverse_stretch(params).unwrap());
    }
    for &p in &[0.0, 0.4] {
        let radii = [0.7, 0.7];
        out.push(stacked_map(p, 2.0, &radii, &feasible_pweights(&radii, 0.6).unwrap()).unwrap().map);
    }
    out
}

fn circumcircle(a: C64, b: C64, z: C64) -> (C64, f64) {
    let (b, z) = (b - a, z - a);
    let d = 2.0 * (b.re * z.im - b.im * z.re);
    let center = c(
        (z.im * b.norm_sqr() - b.im * z.norm_sqr()) / d,
        (b.re * z.norm_sqr() - z.re * b.norm_sqr()) / d,
    );
    (center + a, center.norm())
}

fn unit_circle() -> Disk {
    Disk::unit()
}

/// Seams plus the unit circle, which every construction also crosses.
fn all_seams(m: &PiecewiseQCMap) -> Vec<Disk> {
    let mut s = m.seams.clone();
    if !s.iter().any(|d| d.approx_eq(&unit_circle(), 1e-12)) {
        s.push(unit_circle());
    }
    s
}

#[test]
fn branches_agree_across_seams() {
    for m in maps() {
        for d in all_seams(&m) {
            for t in 0..720 {
                let theta = 2.0 * PI * t as f64 / 720.0;
                let inner = d.center + C64::from_polar(d.radius * (1.0 - 1e-12), theta);
                let outer = d.center + C64::from_polar(d.radius * (1.0 + 1e-12), theta);
                let (a, b) = (m.eval(inner), m.eval(outer));
                assert!((a - b).norm() < 1e-8, "{}: {} vs {} at {theta}", m.label, a, b);
            }
        }
    }
}

/// Points on a polar grid over the closed disk of radius 1.4, off seams.
fn samples(m: &PiecewiseQCMap, h: f64) -> Vec<C64> {
    let mut out = Vec::new();
    for i in 1..40 {
        for j in 0..48 {
            let z = C64::from_polar(1.4 * i as f64 / 40.0, 2.0 * PI * (j as f64 + 0.37) / 48.0);
            if m.seam_distance(z) > 10.0 * h && m.pole.is_none_or(|q| (z - q).norm() > 0.1) {
                out.push(z);
            }
        }
    }
    out
}

#[test]
fn dilatation_bound_and_conformal_regions() {
    for m in maps() {
        let k = m.dilatation_bound();
        for z in samples(&m, default_step(1.0)) {
            let h = default_step(z.norm().max(0.1));
            let fd = m.dilatation_at(z, h).unwrap();
            let exact = m.jet(z).dilatation();
            assert!(fd.norm() <= k + 1e-4, "{} at {z}: {fd}", m.label);
            assert!((fd - exact).norm() < 1e-4, "{} at {z}: {fd} vs {exact}", m.label);
            // Stretches have |μ| = k exactly; everything else is conformal.
            assert!(exact.norm() < 1e-12 || (exact.norm() - k).abs() < 1e-12, "{} at {z}", m.label);
            if m.is_conformal_at(z) {
                assert!(fd.norm() < 1e-6, "{} at {z}: conformal branch has {fd}", m.label);
            }
        }
    }
}

#[test]
fn stacked_layers_are_conformal() {
    for &p in &[0.0, 0.4] {
        let radii = [0.7, 0.7];
        let s = stacked_map(p, 2.0, &radii, &feasible_pweights(&radii, 0.6).unwrap()).unwrap();
        let k = 1.0 / 3.0;
        let mut seen = (0, 0);
        for z in samples(&s.map, default_step(1.0)) {
            if z.norm() >= 1.0 {
                continue;
            }
            let mu = s.map.dilatation_at(z, default_step(z.norm().max(0.1))).unwrap().norm();
            if s.annuli.iter().any(|a| a.contains(z)) {
                assert!(mu < 1e-6, "layer point {z}: {mu}");
                seen.0 += 1;
            } else {
                assert!((mu - k).abs() < 1e-4, "gap point {z}: {mu}");
                seen.1 += 1;
            }
        }
        assert!(seen.0 > 50 && seen.1 > 50);
    }
}

#[test]
fn orientation_and_analytic_jacobian() {
    for m in maps() {
        for z in samples(&m, default_step(1.0)) {
            let h = default_step(z.norm().max(0.1));
            let fd = m.jacobian_at(z, h).unwrap();
            let exact = m.jacobian(z);
            assert!(fd > 0.0 && exact > 0.0, "{} at {z}", m.label);
            assert!((fd / exact - 1.0).abs() < 1e-5, "{} at {z}: {fd} vs {exact}", m.label);
        }
    }
}

#[test]
fn zero_pole_reduces_to_radial_stretch() {
    for &(r, k) in &[(0.6, 2.0), (0.3, 1.2)] {
        let a = pole_stretch(DistortionParams::from_big_k(0.0, r, k).unwrap()).unwrap();
        let b = radial_stretch(r, k).unwrap();
        for i in 0..101 {
            for j in 0..101 {
                let z = c(-2.0 + 4.0 * i as f64 / 100.0, -2.0 + 4.0 * j as f64 / 100.0);
                assert!((a.eval(z) - b.eval(z)).norm() <= 1e-12 * b.eval(z).norm().max(1.0), "{z}");
            }
        }
    }
}

#[test]
fn injective_on_sample_grid() {
    for m in maps() {
        let mut pts = Vec::with_capacity(4096);
        for i in 0..64 {
            for j in 0..64 {
                let z = c(-1.5 + 3.0 * (i as f64 + 0.5) / 64.0, -1.5 + 3.0 * (j as f64 + 0.5) / 64.0);
                pts.push(m.eval(z));
            }
        }
        pts.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                if b.re - a.re > 1e-9 {
                    break;
                }
                assert!((a - b).norm() > 1e-9, "{}: collision at {a}", m.label);
            }
        }
    }
}

#[test]
fn jacobian_examples() {
    // Conformal branch of the pole map at p = 0 is the scaling z·r^{1/K - 1}.
    let m = pole_stretch(DistortionParams::from_big_k(0.0, 0.6, 2.0).unwrap()).unwrap();
    assert!((m.jacobian(c(0.1, 0.2)) - 0.6f64.powf(2.0 / 2.0 - 2.0)).abs() < 1e-12);
    let rs = radial_stretch(0.5, 2.0).unwrap();
    let rho = 0.7f64;
    let expected = 0.5 * rho.powf(2.0 / 2.0 - 2.0);
    assert!((rs.jacobian(C64::from_polar(rho, 1.1)) - expected).abs() < 1e-12);
    assert!((rs.jacobian(c(1.5, 0.2)) - 1.0).abs() < 1e-14);
}

#[test]
fn images_of_the_pseudo_disks() {
    // g(B(r)) is the disk g₀-image scaled to area π r^{2/K}(1-p²)^{-2}; the
    // inverse map sends B₀(r) onto a set of area π r²(1-p²)^{-2}.
    for &(p, r, k) in &[(0.3, 0.6, 2.0), (0.5, 0.8, 1.2)] {
        let params = DistortionParams::from_big_k(p, r, k).unwrap();
        let g = pole_stretch(params).unwrap();
        let b = pseudo_disk(p, r).unwrap();
        let pts: Vec<C64> = (0..64).map(|t| g.eval(b.boundary_point(2.0 * PI * t as f64 / 64.0))).collect();
        let (center, radius) = circumcircle(pts[0], pts[21], pts[42]);
        for w in &pts {
            assert!(((w - center).norm() - radius).abs() < 1e-10);
        }
        assert!((PI * radius * radius - PI * r.powf(2.0 / k) / (1.0 - p * p).powi(2)).abs() < 1e-10);
        let h = inverse_stretch(params).unwrap();
        let b0 = b0_disk(p, r, k).unwrap();
        let pts: Vec<C64> = (0..64).map(|t| h.eval(b0.boundary_point(2.0 * PI * t as f64 / 64.0))).collect();
        let (center, radius) = circumcircle(pts[0], pts[21], pts[42]);
        for w in &pts {
            assert!(((w - center).norm() - radius).abs() < 1e-10);
        }
        assert!((PI * radius * radius - PI * r * r / (1.0 - p * p).powi(2)).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pole_stretch_orientation_and_bound(p in 0.0..0.6f64, r in 0.65..0.95f64, big_k in 1.0..3.0f64,
                                          t in 0.0..1.0f64, s in 0.0..1.0f64) {
        let params = DistortionParams::from_big_k(p, r, big_k).unwrap();
        let g = pole_stretch(params).unwrap();
        let z = C64::from_polar(0.95 * t, 2.0 * PI * s);
        prop_assert!(g.jacobian(z) > 0.0);
        prop_assert!(g.dilatation(z).norm() <= params.k() + 1e-12);
    }

    #[test]
    fn stacked_chain_normalisation(p in 0.0..0.6f64, r1 in 0.3..0.9f64, r2 in 0.3..0.9f64, shrink in 0.1..0.9f64,
                                   big_k in 1.1..3.0f64) {
        let radii = [r1, r2];
        let pw = feasible_pweights(&radii, shrink).unwrap();
        let s = stacked_map(p, big_k, &radii, &pw).unwrap();
        let total: f64 = s.pweights.iter().zip(&s.weights).map(|(q, w)| q * w.powf(big_k)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(s.rho[0] == 1.0);
        prop_assert!(s.map.dilatation_bound() <= (big_k - 1.0) / (big_k + 1.0) + 1e-15);
    }
}
