//! Beurling transform as the Fourier multiplier `conj(ξ)/ξ`.

use super::fft::{fft2, frequency};
use super::ComplexField;
use crate::error::{range_err, Result};
use crate::exec::for_each_chunk_mut;
use crate::C64;

/// Zero-padding factor. Without padding the periodic images of `|z|^{-2}`
/// tails cost several percent.
pub const DEFAULT_PAD: usize = 2;

pub fn hilbert(f: &ComplexField) -> Result<ComplexField> {
    hilbert_with(f, DEFAULT_PAD)
}

/// `H[f]` computed on a `pad·n` periodic grid with `f` centred in it.
pub fn hilbert_with(f: &ComplexField, pad: usize) -> Result<ComplexField> {
    if pad == 0 || !pad.is_power_of_two() {
        return range_err(format!("padding factor must be a power of two, got {pad}"));
    }
    f.check_support()?;
    let n = f.grid.n;
    let big = n * pad;
    let off = (big - n) / 2;
    let h = f.h();
    let exec = f.grid.exec;
    let mut buf = vec![C64::new(0.0, 0.0); big * big];
    for i in 0..n {
        buf[(i + off) * big + off..(i + off) * big + off + n].copy_from_slice(&f.values[i * n..(i + 1) * n]);
    }
    fft2(&mut buf, big, false, exec);
    let norm = 1.0 / (big * big) as f64;
    for_each_chunk_mut(exec, &mut buf, big, |ky, row| {
        let y = frequency(ky, big, h);
        for (kx, v) in row.iter_mut().enumerate() {
            let x = frequency(kx, big, h);
            *v = if kx == 0 && ky == 0 {
                C64::new(0.0, 0.0)
            } else {
                let xi = C64::new(x, y);
                *v * (xi.conj() / xi) * norm
            };
        }
    });
    fft2(&mut buf, big, true, exec);
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        values.extend_from_slice(&buf[(i + off) * big + off..(i + off) * big + off + n]);
    }
    Ok(ComplexField {
        grid: f.grid,
        values,
        support: None,
    })
}
