//! Cauchy transform by zero-padded FFT convolution, and grid Wirtinger
//! derivatives.

use super::fft::fft2;
use super::ComplexField;
use crate::error::Result;
use crate::exec::Exec;
use crate::C64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Offsets `|a|, |b| ≤ NEAR` use the exact cell average of the kernel.
const NEAR: i64 = 3;
const GAUSS_POINTS: usize = 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|i| {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Mean of `1/(π ζ)` over the unit cell centred at `a + ib`.
fn cell_kernel(a: i64, b: i64, nodes: &[(f64, f64)]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for &(x, wx) in nodes {
        for &(y, wy) in nodes {
            let z = C64::new(a as f64 + x / 2.0, b as f64 + y / 2.0);
            s += wx * wy / 4.0 / (PI * z);
        }
    }
    s
}

/// FFT of the unit-spacing kernel on a `2n` periodic grid. The kernel for
/// spacing `h` is `h` times this.
fn kernel_spectrum(n: usize, exec: Exec) -> Arc<Vec<C64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<C64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("kernel cache poisoned").get(&n) {
        return k.clone();
    }
    let big = 2 * n;
    let nodes = gauss_legendre(GAUSS_POINTS);
    let mut k = vec![C64::new(0.0, 0.0); big * big];
    for (idx, v) in k.iter_mut().enumerate() {
        let (i, j) = ((idx / big) as i64, (idx % big) as i64);
        let b = if i < n as i64 { i } else { i - big as i64 };
        let a = if j < n as i64 { j } else { j - big as i64 };
        *v = if a == 0 && b == 0 {
            // Odd kernel: the centre cell averages to zero.
            C64::new(0.0, 0.0)
        } else if a.abs() <= NEAR && b.abs() <= NEAR {
            cell_kernel(a, b, &nodes)
        } else {
            1.0 / (PI * C64::new(a as f64, b as f64))
        };
    }
    fft2(&mut k, big, false, exec);
    let k = Arc::new(k);
    cache.lock().expect("kernel cache poisoned").insert(n, k.clone());
    k
}

/// `T[f](z) = (1/π) ∫ f(ζ)/(z - ζ) dm(ζ)`.
pub fn cauchy(f: &ComplexField) -> Result<ComplexField> {
    f.check_support()?;
    let n = f.grid.n;
    let big = 2 * n;
    let exec = f.grid.exec;
    let spectrum = kernel_spectrum(n, exec);
    let mut buf = vec![C64::new(0.0, 0.0); big * big];
    for i in 0..n {
        buf[i * big..i * big + n].copy_from_slice(&f.values[i * n..(i + 1) * n]);
    }
    fft2(&mut buf, big, false, exec);
    let scale = f.h() / (big * big) as f64;
    for (v, k) in buf.iter_mut().zip(spectrum.iter()) {
        *v *= k * scale;
    }
    fft2(&mut buf, big, true, exec);
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        values.extend_from_slice(&buf[i * big..i * big + n]);
    }
    Ok(ComplexField {
        grid: f.grid,
        values,
        support: None,
    })
}

/// `(∂f, ∂̄f)` by centred differences; one-sided on the window edge.
pub fn wirtinger(f: &ComplexField) -> (ComplexField, ComplexField) {
    let n = f.grid.n;
    let h = f.h();
    let v = &f.values;
    let diff = |lo: usize, hi: usize, span: usize| (v[hi] - v[lo]) / (span as f64 * h);
    let mut dz = Vec::with_capacity(n * n);
    let mut dzb = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (jl, jh) = (j.saturating_sub(1), (j + 1).min(n - 1));
            let (il, ih) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let fx = diff(i * n + jl, i * n + jh, jh - jl);
            let fy = diff(il * n + j, ih * n + j, ih - il);
            let i_fy = C64::new(-fy.im, fy.re);
            dz.push((fx - i_fy) * 0.5);
            dzb.push((fx + i_fy) * 0.5);
        }
    }
    let wrap = |values| ComplexField {
        grid: f.grid,
        values,
        support: None,
    };
    (wrap(dz), wrap(dzb))
}
