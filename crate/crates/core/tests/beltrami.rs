use qcarea::beltrami::{neumann_solve, series_term_norms, BeltramiSolution, DilatationField, SolveOptions};
use qcarea::extremal::{pole_stretch, DistortionParams, PiecewiseQCMap};
use qcarea::geometry::{pseudo_disk, Disk};
use qcarea::measure::Region;
use qcarea::transforms::{sample, sample_cell_average, GridSpec};
use qcarea::C64;
use std::sync::OnceLock;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

struct Case {
    map: PiecewiseQCMap,
    sol: BeltramiSolution,
}

fn case() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| {
        let grid = GridSpec::new(4.0, 512).unwrap();
        let map = pole_stretch(DistortionParams::from_big_k(0.4, 0.6, 1.5).unwrap()).unwrap();
        let mu = DilatationField::from_map(&map, grid).unwrap();
        let sol = neumann_solve(&mu, 0.4, SolveOptions::default()).unwrap();
        Case { map, sol }
    })
}

fn off_seams(grid: GridSpec, map: &PiecewiseQCMap) -> Vec<bool> {
    let mut circles = map.seams.clone();
    circles.push(Disk::unit());
    grid.seam_band(&circles, 4.0 * grid.h()).iter().map(|x| !x).collect()
}

#[test]
fn beltrami_equation_holds_off_seams() {
    let Case { map, sol } = case();
    let mask = off_seams(sol.grid(), map);
    let res = sol.beltrami_residual(&mask).unwrap();
    let tol_rel = sol.tol / sol.w0_norm;
    assert!(res <= (2.0 * tol_rel).max(0.03), "residual {res}");
}

#[test]
fn conformal_where_mu_vanishes() {
    let Case { map, sol } = case();
    let grid = sol.grid();
    let off = off_seams(grid, map);
    let mask: Vec<bool> = (0..grid.len())
        .map(|i| off[i] && sol.mu.field.values[i] == c(0.0, 0.0) && (grid.point_at(i) - c(2.5, 0.0)).norm() > 0.1)
        .collect();
    let m = sol.max_dilatation_on(&mask);
    assert!(m < 1e-3, "max |dbar g|/|d g| = {m}");
}

#[test]
fn converges_geometrically() {
    let Case { sol, .. } = case();
    assert!(sol.iterations <= sol.iteration_bound(), "{} > {}", sol.iterations, sol.iteration_bound());
    let k = sol.mu.k;
    for (m, r) in sol.residual_ratios().iter().enumerate() {
        assert!(*r <= k + 0.05, "ratio {r} at step {}", m + 2);
    }
}

#[test]
fn normalised_at_window_edge() {
    let Case { sol, .. } = case();
    let h = sol.grid().h();
    assert!(sol.edge_deviation() < 5.0 * h, "{}", sol.edge_deviation());
}

#[test]
fn matches_closed_form_map() {
    let Case { map, sol } = case();
    let grid = sol.grid();
    let exact = sample(|z| map.eval(z), grid).unwrap();
    let off = off_seams(grid, map);
    let mask: Vec<bool> = (0..grid.len()).map(|i| off[i] && (grid.point_at(i) - c(2.5, 0.0)).norm() > 0.25).collect();
    assert!(sol.g.relative_error_on(&exact, &mask).unwrap() < 0.03);
    // Area of the image of B(r) from the grid Jacobian.
    let b = Region::Disk(pseudo_disk(0.4, 0.6).unwrap());
    let expected = std::f64::consts::PI * 0.6f64.powf(2.0 / 1.5) / (1.0 - 0.16f64).powi(2);
    assert!((sol.pushforward_area(&b) / expected - 1.0).abs() < 0.02);
}

#[test]
fn series_terms_decay_with_k() {
    let grid = GridSpec::new(4.0, 128).unwrap();
    let f = sample_cell_average(|z| if z.norm() < 0.9 { C64::from_polar(0.3, 2.0 * z.re) } else { c(0.0, 0.0) }, grid)
        .unwrap()
        .with_support(Region::Disk(Disk::unit()));
    let mu = DilatationField::new(f, 0.3).unwrap();
    let norms = series_term_norms(&mu, 0.2, 6).unwrap();
    for w in norms.windows(2) {
        assert!(w[1] <= 0.3 * w[0] * 1.01, "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn iterates_equal_partial_sums() {
    let grid = GridSpec::new(4.0, 128).unwrap();
    let f = sample_cell_average(|z| if z.norm() < 0.8 { c(0.2, 0.1) * z } else { c(0.0, 0.0) }, grid)
        .unwrap()
        .with_support(Region::Disk(Disk::unit()));
    let mu = DilatationField::new(f, 0.2).unwrap();
    let sol = neumann_solve(&mu, 0.3, SolveOptions::default()).unwrap();
    // Successive differences are the series terms.
    let norms = series_term_norms(&mu, 0.3, sol.history.len() + 1).unwrap();
    for (d, t) in sol.history.iter().zip(&norms[1..]) {
        assert!((d - t).abs() <= 1e-9 * t.max(1e-300) + 1e-14, "{d} vs {t}");
    }
}

#[test]
fn explicit_tolerance_and_defaults() {
    let grid = GridSpec::new(4.0, 64).unwrap();
    let f = sample_cell_average(|z| if z.norm() < 0.5 { c(0.1, 0.0) } else { c(0.0, 0.0) }, grid)
        .unwrap()
        .with_support(Region::Disk(Disk::unit()));
    let mu = DilatationField::new(f, 0.1).unwrap();
    let d = neumann_solve(&mu, 0.0, SolveOptions::default()).unwrap();
    assert!((d.tol - 1e-6 * d.w0_norm).abs() < 1e-20);
    let e = neumann_solve(&mu, 0.0, SolveOptions { tol: Some(1e-3), max_iter: 200 }).unwrap();
    assert!(e.iterations <= d.iterations && e.residual <= 1e-3);
    assert!(neumann_solve(&mu, 1.0, SolveOptions::default()).is_err());
}
