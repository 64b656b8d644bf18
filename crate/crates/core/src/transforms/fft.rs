//! Square two-dimensional FFTs built from cached one-dimensional plans.

use crate::exec::{for_each_chunk_mut_init, Exec};
use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanCache = Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>;

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<PlanCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("fft plan cache poisoned");
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

fn rows(data: &mut [C64], n: usize, fft: &Arc<dyn Fft<f64>>, exec: Exec) {
    let len = fft.get_inplace_scratch_len();
    for_each_chunk_mut_init(
        exec,
        data,
        n,
        || vec![C64::new(0.0, 0.0); len],
        |scratch, _, row| fft.process_with_scratch(row, scratch),
    );
}

/// In-place square transpose.
pub fn transpose(data: &mut [C64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Unnormalised 2-D DFT of an `n × n` row-major array. The inverse carries
/// no `1/n²` factor either.
pub fn fft2(data: &mut [C64], n: usize, inverse: bool, exec: Exec) {
    assert_eq!(data.len(), n * n, "fft2 expects a square array");
    let fft = plan(n, inverse);
    rows(data, n, &fft, exec);
    transpose(data, n);
    rows(data, n, &fft, exec);
    transpose(data, n);
}

/// `2π·k/(n h)` with `k` in the usual signed order.
pub fn frequency(k: usize, n: usize, h: f64) -> f64 {
    let signed = if k < n.div_ceil(2) { k as f64 } else { k as f64 - n as f64 };
    2.0 * std::f64::consts::PI * signed / (n as f64 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_exec_agreement() {
        let n = 16;
        let src: Vec<C64> = (0..n * n).map(|i| C64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut a = src.clone();
        let mut b = src.clone();
        fft2(&mut a, n, false, Exec::Sequential);
        fft2(&mut b, n, false, Exec::Parallel);
        assert_eq!(a, b);
        fft2(&mut a, n, true, Exec::Sequential);
        for (x, y) in a.iter().zip(&src) {
            assert!((x / (n * n) as f64 - y).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode() {
        let n = 8;
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        a[0] = C64::new(1.0, 0.0);
        fft2(&mut a, n, false, Exec::Sequential);
        assert!(a.iter().all(|v| (v - 1.0).norm() < 1e-14));
        assert_eq!(frequency(5, 8, 1.0), 2.0 * std::f64::consts::PI * -3.0 / 8.0);
    }
}
