//! Orthonormal Haar wavelet analysis and synthesis on power-of-two
//! signals.
//!
//! Coefficient layout after a full decomposition (length `n = 2^L`):
//! index 0 holds the DC term (signal sum / √n), index 1 the coarsest
//! detail, indices `[2^(s-1), 2^s)` the details of scale `s` down to the
//! finest scale in `[n/2, n)`.
//!
//! Each butterfly is computed as `a·r + b·r` and `a·r − b·r` with
//! `r = 1/√2`. Keeping the products explicit means a sparse two-term
//! dot product over the same inputs rounds to the same double, so the
//! transform can be cross-checked bit-for-bit against a matrix route.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Range;

/// Full in-place forward transform. `x.len()` must be a power of two.
pub fn forward(x: &mut [f64]) {
    debug_assert!(x.len().is_power_of_two());
    let mut scratch = vec![0.0; x.len()];
    let mut m = x.len();
    while m >= 2 {
        let half = m / 2;
        for i in 0..half {
            let a = x[2 * i];
            let b = x[2 * i + 1];
            scratch[i] = a * FRAC_1_SQRT_2 + b * FRAC_1_SQRT_2;
            scratch[half + i] = a * FRAC_1_SQRT_2 - b * FRAC_1_SQRT_2;
        }
        x[..m].copy_from_slice(&scratch[..m]);
        m = half;
    }
}

/// Inverse of [`forward`]; reconstructs the signal in place.
pub fn inverse(x: &mut [f64]) {
    debug_assert!(x.len().is_power_of_two());
    let mut scratch = vec![0.0; x.len()];
    let mut m = 2;
    while m <= x.len() {
        let half = m / 2;
        for i in 0..half {
            let a = x[i];
            let d = x[half + i];
            scratch[2 * i] = a * FRAC_1_SQRT_2 + d * FRAC_1_SQRT_2;
            scratch[2 * i + 1] = a * FRAC_1_SQRT_2 - d * FRAC_1_SQRT_2;
        }
        x[..m].copy_from_slice(&scratch[..m]);
        m *= 2;
    }
}

/// Coefficient index ranges by temporal scale: the DC slot first, then
/// detail scales from coarsest to finest. `n` must be a power of two.
pub fn scale_ranges(n: usize) -> Vec<Range<usize>> {
    debug_assert!(n.is_power_of_two());
    let mut ranges = vec![0..1];
    let mut lo = 1;
    while lo < n {
        ranges.push(lo..lo * 2);
        lo *= 2;
    }
    ranges
}

/// Largest power of two `≤ n` (0 for `n == 0`).
pub fn pow2_floor(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        1 << (usize::BITS - 1 - n.leading_zeros())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense orthonormal Haar analysis matrix for size n, built
    /// recursively: H_1 = [1]; rows of H_2n interleave averaging and
    /// differencing of H_n rows. Used only as an oracle.
    fn haar_matrix(n: usize) -> Vec<Vec<f64>> {
        assert!(n.is_power_of_two());
        if n == 1 {
            return vec![vec![1.0]];
        }
        let prev = haar_matrix(n / 2);
        let mut rows = Vec::with_capacity(n);
        // averaging rows recurse; the transform applies scale by scale,
        // so expand each previous row over pairs.
        for prow in &prev {
            let mut row = vec![0.0; n];
            for (j, v) in prow.iter().enumerate() {
                row[2 * j] = v * FRAC_1_SQRT_2;
                row[2 * j + 1] = v * FRAC_1_SQRT_2;
            }
            rows.push(row);
        }
        for i in 0..n / 2 {
            let mut row = vec![0.0; n];
            row[2 * i] = FRAC_1_SQRT_2;
            row[2 * i + 1] = -FRAC_1_SQRT_2;
            rows.push(row);
        }
        rows
    }

    fn apply(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter()
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    #[test]
    fn constant_signal_concentrates_in_dc() {
        // DC = sum / √n, details vanish
        let mut x = [1.0, 1.0, 1.0, 1.0];
        forward(&mut x);
        assert!((x[0] - 2.0).abs() <= 1e-12);
        assert_eq!(&x[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_matrix_oracle_on_4_point_signal() {
        let signal = [3.0, 1.0, -2.0, 4.0];
        let mut fast = signal;
        forward(&mut fast);
        let oracle = apply(&haar_matrix(4), &signal);
        for (f, o) in fast.iter().zip(&oracle) {
            assert!((f - o).abs() <= 1e-12, "fast {f} vs oracle {o}");
        }
    }

    #[test]
    fn alternating_signal_lands_in_finest_scale() {
        let mut x = [1.0, -1.0, 1.0, -1.0];
        forward(&mut x);
        let s = 2f64.sqrt();
        assert!((x[0]).abs() < 1e-15 && (x[1]).abs() < 1e-15);
        assert!((x[2] - s).abs() < 1e-15 && (x[3] - s).abs() < 1e-15);
    }

    #[test]
    fn parseval_energy_preserved() {
        let signal: Vec<f64> = (0..256).map(|i| ((i * 37) % 101) as f64 / 10.0 - 5.0).collect();
        let energy_in: f64 = signal.iter().map(|v| v * v).sum();
        let mut coeff = signal.clone();
        forward(&mut coeff);
        let energy_out: f64 = coeff.iter().map(|v| v * v).sum();
        assert!(((energy_in - energy_out) / energy_in).abs() <= 1e-9);
    }

    #[test]
    fn inverse_reconstructs() {
        let signal: Vec<f64> = (0..128).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        let mut x = signal.clone();
        forward(&mut x);
        inverse(&mut x);
        let max_err = x
            .iter()
            .zip(&signal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err <= 1e-9, "max abs error {max_err}");
    }

    #[test]
    fn scale_ranges_partition_indices() {
        let ranges = scale_ranges(8);
        assert_eq!(ranges, vec![0..1, 1..2, 2..4, 4..8]);
    }

    #[test]
    fn pow2_floor_rounds_down() {
        assert_eq!(pow2_floor(1), 1);
        assert_eq!(pow2_floor(1000), 512);
        assert_eq!(pow2_floor(1024), 1024);
    }
}
