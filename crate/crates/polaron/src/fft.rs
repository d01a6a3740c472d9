//! 3D complex FFTs on flat x-fastest arrays.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::parallel;

/// Batched 3D transform for an `n³` cube. Holds its own transpose scratch so
/// repeated calls do not allocate.
pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Fft3 {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::default(); n * n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn lines_x(n: usize, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        parallel::for_each_aligned_chunk_mut(data, n, |_, lines| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            for line in lines.chunks_exact_mut(n) {
                plan.process_with_scratch(line, &mut scratch);
            }
        });
    }

    fn lines_y(n: usize, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        parallel::for_each_aligned_chunk_mut(data, n * n, |_, slabs| {
            let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
            let mut line = vec![Complex64::default(); n];
            for slab in slabs.chunks_exact_mut(n * n) {
                for x in 0..n {
                    for y in 0..n {
                        line[y] = slab[x + y * n];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for y in 0..n {
                        slab[x + y * n] = line[y];
                    }
                }
            }
        });
    }

    /// Swap x and z so z lines become contiguous, transform, swap back.
    fn lines_z(&mut self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        transpose_xz(data, &mut self.scratch, n);
        let plan = if forward { &self.fwd } else { &self.inv };
        Self::lines_x(n, &mut self.scratch, plan);
        transpose_xz(&self.scratch, data, n);
    }

    /// Unnormalized forward transform.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n * self.n, "fft buffer size");
        Self::lines_x(self.n, data, &self.fwd.clone());
        Self::lines_y(self.n, data, &self.fwd.clone());
        self.lines_z(data, true);
    }

    /// Inverse transform scaled by `1/n³` (round trip is the identity).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n * self.n, "fft buffer size");
        Self::lines_x(self.n, data, &self.inv.clone());
        Self::lines_y(self.n, data, &self.inv.clone());
        self.lines_z(data, false);
        let norm = 1.0 / (self.n * self.n * self.n) as f64;
        parallel::for_each_chunk_mut(data, |_, c| {
            for v in c {
                *v *= norm;
            }
        });
    }
}

/// `dst[z + n(y + n x)] = src[x + n(y + n z)]`
fn transpose_xz(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    parallel::for_each_aligned_chunk_mut(dst, n * n, |base, out| {
        for (local, v) in out.iter_mut().enumerate() {
            let idx = base + local;
            let z = idx % n;
            let y = (idx / n) % n;
            let x = idx / (n * n);
            *v = src[x + n * (y + n * z)];
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_fill(data: &mut [Complex64], seed: u64) {
        let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        for v in data.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
            *v = Complex64::new(a, b);
        }
    }

    #[test]
    fn round_trip() {
        let n = 12;
        let mut fft = Fft3::new(n);
        let mut data = vec![Complex64::default(); n * n * n];
        rng_fill(&mut data, 7);
        let orig = data.clone();
        fft.forward(&mut data);
        fft.inverse(&mut data);
        let max = data
            .iter()
            .zip(&orig)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        assert!(max < 1e-12, "round trip error {max}");
    }

    #[test]
    fn plane_wave_is_a_delta() {
        let n = 8;
        let mut fft = Fft3::new(n);
        let mut data = vec![Complex64::default(); n * n * n];
        // e^{2πi(2x + y)/n} in index space
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let phase =
                        2.0 * std::f64::consts::PI * (2.0 * x as f64 + y as f64) / n as f64;
                    data[x + n * (y + n * z)] = Complex64::from_polar(1.0, phase);
                }
            }
        }
        fft.forward(&mut data);
        let hot = 2 + n;
        for (i, v) in data.iter().enumerate() {
            if i == hot {
                assert!((v.re - (n * n * n) as f64).abs() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "leak at {i}: {v}");
            }
        }
    }
}
