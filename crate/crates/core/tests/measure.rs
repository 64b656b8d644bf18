use proptest::prelude::*;
use qcarea::extremal::{Branch, BranchRegion, Formula, PiecewiseQCMap};
use qcarea::geometry::{CircleImage, Disk, MobiusMap};
use qcarea::measure::{
    area, integrate, pushforward_area, weighted_pushforward, GridMask, QuadSpec, Region, Weight,
};
use qcarea::{Exec, C64};
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mobius_map(m: MobiusMap) -> PiecewiseQCMap {
    let pole = m.pole().finite();
    PiecewiseQCMap {
        label: "mobius".into(),
        branches: vec![Branch {
            region: BranchRegion::Everywhere,
            formula: Formula::mobius(m),
            conformal: true,
        }],
        seams: vec![],
        pole,
        params: None,
    }
}

/// `|M(D)|` by the image-disk formula, as an oracle independent of `measure`.
fn image_area(m: &MobiusMap, d: &Disk) -> f64 {
    match m.image_disk(d) {
        CircleImage::Disk(x) => PI * x.radius * x.radius,
        _ => f64::INFINITY,
    }
}

// Monte Carlo checks at 3σ fail occasionally by design; a fixed runner seed
// keeps the suite reproducible.
fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        rng_seed: proptest::test_runner::RngSeed::Fixed(20),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn mobius_pushforward_matches_image_area(
        a in -2.0..2.0f64, b in -2.0..2.0f64, cc in -1.0..1.0f64, d in 0.5..2.0f64,
        x in -0.5..0.5f64, y in -0.5..0.5f64, r in 0.1..0.5f64, seed in 0u64..1000,
    ) {
        let m = MobiusMap::new(c(a, 0.3), c(b, 0.0), c(cc, 0.1), c(d, 0.0)).unwrap();
        prop_assume!(m.determinant().norm() > 0.1);
        let disk = Disk::new(c(x, y), r).unwrap();
        if let Some(q) = m.pole().finite() {
            prop_assume!(disk.boundary_distance(q) > 0.3);
        }
        let exact = image_area(&m, &disk);
        let f = mobius_map(m);
        let est = pushforward_area(&f, &Region::Disk(disk), &QuadSpec::monte_carlo(200_000, seed).sampled()).unwrap();
        prop_assert!((est.value - exact).abs() <= 3.0 * est.std_err + 1e-12 * exact,
            "{} vs {exact} (se {})", est.value, est.std_err);
        let closed = pushforward_area(&f, &Region::Disk(disk), &QuadSpec::default()).unwrap();
        prop_assert!((closed.value - exact).abs() <= 3.0 * closed.std_err + 1e-9 * exact);
    }

    #[test]
    fn additivity_over_disjoint_disks(sep in 0.05..0.4f64, seed in 0u64..1000) {
        let f = mobius_map(MobiusMap::g0(0.4));
        let d1 = Disk::new(c(-0.3 - sep / 2.0, 0.0), 0.3).unwrap();
        let d2 = Disk::new(c(0.3 + sep / 2.0, 0.1), 0.25).unwrap();
        let q = QuadSpec::monte_carlo(200_000, seed).sampled();
        let a1 = pushforward_area(&f, &Region::Disk(d1), &q).unwrap();
        let a2 = pushforward_area(&f, &Region::Disk(d2), &q).unwrap();
        let both = pushforward_area(&f, &Region::UnionOfDisks(vec![d1, d2]), &q).unwrap();
        let se = (a1.std_err.powi(2) + a2.std_err.powi(2) + both.std_err.powi(2)).sqrt();
        prop_assert!((both.value - a1.value - a2.value).abs() <= 3.0 * se);
    }

    #[test]
    fn area_scales_quadratically(x in -2.0..2.0f64, y in -2.0..2.0f64, r in 0.01..2.0f64, lambda in 0.1..10.0f64) {
        let a = area(&Region::Disk(Disk::new(c(x, y), r).unwrap())).unwrap().value;
        let b = area(&Region::Disk(Disk::new(c(x, y), lambda * r).unwrap())).unwrap().value;
        prop_assert!((b - lambda * lambda * a).abs() <= 4.0 * f64::EPSILON * b);
    }
}

#[test]
fn seeded_runs_are_bit_identical() {
    let f = mobius_map(MobiusMap::g0(0.3));
    let e = Region::UnionOfDisks(vec![Disk::new(c(0.2, 0.2), 0.3).unwrap(), Disk::new(c(-0.2, 0.0), 0.4).unwrap()]);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let q = QuadSpec::monte_carlo(100_000, 42).sampled().with_exec(exec);
        let a = pushforward_area(&f, &e, &q).unwrap();
        let b = pushforward_area(&f, &e, &q).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }
    let s = pushforward_area(&f, &e, &QuadSpec::monte_carlo(100_000, 42).sampled().with_exec(Exec::Sequential)).unwrap();
    let p = pushforward_area(&f, &e, &QuadSpec::monte_carlo(100_000, 42).sampled().with_exec(Exec::Parallel)).unwrap();
    assert_eq!(s, p);
    let other = pushforward_area(&f, &e, &QuadSpec::monte_carlo(100_000, 43).sampled()).unwrap();
    assert_ne!(s.value, other.value);
}

#[test]
fn tensor_rule_converges() {
    let e = Region::Disk(Disk::new(c(0.1, -0.2), 0.6).unwrap());
    let exact = PI * 0.36;
    let coarse = integrate(&e, &QuadSpec::tensor(64), |_| 1.0).unwrap().value;
    let fine = integrate(&e, &QuadSpec::tensor(512), |_| 1.0).unwrap().value;
    assert!((fine - exact).abs() < (coarse - exact).abs().max(1e-12) || (fine - exact).abs() < 1e-6);
    assert!((fine / exact - 1.0).abs() < 1e-3);
}

#[test]
fn weight_examples() {
    let f = mobius_map(MobiusMap::g0(0.5));
    let e = Region::Disk(Disk::new(c(0.0, 0.0), 0.5).unwrap());
    let q = QuadSpec::monte_carlo(100_000, 1);
    let one = weighted_pushforward(&f, &e, &Weight::Constant(1.0), 1.0, &q).unwrap();
    let plain = pushforward_area(&f, &e, &q).unwrap();
    assert_eq!(one.value, plain.value);
    let zero = weighted_pushforward(&f, &e, &Weight::Constant(0.0), 1.0, &q).unwrap();
    assert_eq!(zero.value, 0.0);
}

#[test]
fn mask_region_integrates_like_its_cells() {
    let m: GridMask = "4 4 -0.5 -0.5 0.25\n0110\n1 1 1 1\n1111\n0110\n".parse().unwrap();
    assert_eq!(m.count(), 12);
    assert!((m.area() - 12.0 * 0.0625).abs() < 1e-15);
    let e = Region::Mask(m);
    let est = integrate(&e, &QuadSpec::monte_carlo(400_000, 3), |_| 1.0).unwrap();
    assert!((est.value - 0.75).abs() <= 3.0 * est.std_err);
    assert!((area(&e).unwrap().value - 0.75).abs() < 1e-15);
}
