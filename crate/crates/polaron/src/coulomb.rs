//! Free-space Coulomb convolution by zero padding to double size.
//!
//! `Φ = K ⋆ ρ` with `K(x) = 1/|x|`; the kernel value on the singular node is
//! the analytic cell average of `1/|x|` over one grid cell, which removes the
//! `1/0` node without biasing the quadrature at second order.

use num_complex::Complex64;

use crate::error::{PolaronError, Result};
use crate::fft::Fft3;
use crate::grid::Grid3D;
use crate::parallel;
use crate::potential::singular_node_constant;

/// Cached padded kernel transform plus work buffer for one grid.
pub struct CoulombSolver {
    grid: Grid3D,
    kernel_hat: Vec<f64>,
    fft: Fft3,
    buf: Vec<Complex64>,
}

impl CoulombSolver {
    pub fn new(grid: Grid3D) -> Self {
        let n = grid.points_per_axis();
        let m = 2 * n;
        let h = grid.spacing();
        let mut fft = Fft3::new(m);
        let mut kernel = vec![Complex64::default(); m * m * m];
        let reg = singular_node_constant() / h;
        parallel::for_each_aligned_chunk_mut(&mut kernel, m, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let i = idx % m;
                let j = (idx / m) % m;
                let k = idx / (m * m);
                let d = |t: usize| -> f64 {
                    let s = if t <= m / 2 { t as isize } else { t as isize - m as isize };
                    s as f64 * h
                };
                let (dx, dy, dz) = (d(i), d(j), d(k));
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                *v = Complex64::new(if r == 0.0 { reg } else { 1.0 / r }, 0.0);
            }
        });
        fft.forward(&mut kernel);
        // even real kernel: transform is real
        let kernel_hat = kernel.iter().map(|v| v.re).collect();
        CoulombSolver {
            grid,
            kernel_hat,
            fft,
            buf: vec![Complex64::default(); m * m * m],
        }
    }

    pub fn grid(&self) -> &Grid3D {
        &self.grid
    }

    fn convolve(&mut self, src: &[Complex64], dst: &mut [Complex64]) {
        let n = self.grid.points_per_axis();
        let m = 2 * n;
        debug_assert_eq!(src.len(), n * n * n);
        debug_assert_eq!(dst.len(), n * n * n);
        let buf = &mut self.buf;
        parallel::for_each_aligned_chunk_mut(buf, m, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let i = idx % m;
                let j = (idx / m) % m;
                let k = idx / (m * m);
                *v = if i < n && j < n && k < n {
                    src[i + n * (j + n * k)]
                } else {
                    Complex64::default()
                };
            }
        });
        self.fft.forward(buf);
        let khat = &self.kernel_hat;
        parallel::for_each_chunk_mut(buf, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                *v *= khat[base + off];
            }
        });
        self.fft.inverse(buf);
        let h3 = self.grid.node_volume();
        let buf = &self.buf;
        parallel::for_each_aligned_chunk_mut(dst, n, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let i = idx % n;
                let j = (idx / n) % n;
                let k = idx / (n * n);
                *v = buf[i + m * (j + m * k)] * h3;
            }
        });
    }

    /// `Φ(x) = h³ Σ_y K(x−y) ρ(y)` for a real density.
    pub fn potential_of_density(&mut self, rho: &[f64], out: &mut [f64]) {
        let src: Vec<Complex64> = rho.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let mut dst = vec![Complex64::default(); src.len()];
        self.convolve(&src, &mut dst);
        for (o, v) in out.iter_mut().zip(&dst) {
            *o = v.re;
        }
    }

    /// Complex-valued convolution for factor cross products.
    pub fn potential_of_complex(&mut self, g: &[Complex64], out: &mut [Complex64]) {
        self.convolve(g, out);
    }

    /// Bilinear form `D(g₁, g₂) = h⁶ Σ_{x,y} g₁(x) K(x−y) g₂(y)` (no
    /// conjugation; callers pass conjugated products where needed).
    pub fn bilinear(&mut self, g1: &[Complex64], g2: &[Complex64]) -> Complex64 {
        let mut pot = vec![Complex64::default(); g2.len()];
        self.convolve(g2, &mut pot);
        let h3 = self.grid.node_volume();
        let re = parallel::chunked_sum2(g1, &pot, |a, b| {
            a.iter().zip(b).map(|(x, y)| (x * y).re).sum()
        });
        let im = parallel::chunked_sum2(g1, &pot, |a, b| {
            a.iter().zip(b).map(|(x, y)| (x * y).im).sum()
        });
        Complex64::new(re, im) * h3
    }

    /// `D(ρ,ρ)` for a real density without precondition checks.
    pub fn self_energy_unchecked(&mut self, rho: &[f64]) -> f64 {
        let mut pot = vec![0.0; rho.len()];
        self.potential_of_density(rho, &mut pot);
        parallel::chunked_sum2(rho, &pot, |a, b| a.iter().zip(b).map(|(x, y)| x * y).sum())
            * self.grid.node_volume()
    }
}

/// `D(ρ,ρ) = ∬ ρ(x)ρ(y)/|x−y|` for a nonnegative unit-mass density.
pub fn coulomb_self_energy(rho: &[f64], grid: &Grid3D) -> Result<f64> {
    if rho.len() != grid.len() {
        return Err(PolaronError::Shape(format!(
            "density has {} nodes, grid has {}",
            rho.len(),
            grid.len()
        )));
    }
    if rho.iter().any(|&r| r < 0.0) {
        return Err(PolaronError::Precondition(
            "density must be nonnegative".into(),
        ));
    }
    let mass: f64 = rho.iter().sum::<f64>() * grid.node_volume();
    if (mass - 1.0).abs() > 1e-8 {
        return Err(PolaronError::Precondition(format!(
            "density mass = {mass}, need 1 within 1e-8"
        )));
    }
    let mut solver = CoulombSolver::new(*grid);
    Ok(solver.self_energy_unchecked(rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ComplexField3D;
    use crate::grid::Boundary;

    #[test]
    fn gaussian_self_energy_closed_form() {
        // D(ρ,ρ) = 2√(a/π) for ρ = |ψ_a|²
        let a = 1.0 / (9.0 * std::f64::consts::PI);
        let g = Grid3D::new(48, 36.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::gaussian(g, a, [0.0; 3]);
        let rho = psi.density();
        let d = coulomb_self_energy(&rho, &g).unwrap();
        let exact = 2.0 * (a / std::f64::consts::PI).sqrt();
        assert!(
            (d - exact).abs() / exact < 5e-5,
            "D = {d}, exact = {exact}"
        );
    }

    #[test]
    fn zero_density_rejected() {
        let g = Grid3D::new(8, 4.0, Boundary::Periodic).unwrap();
        let rho = vec![0.0; g.len()];
        assert!(coulomb_self_energy(&rho, &g).is_err());
    }

    #[test]
    fn negative_density_rejected() {
        let g = Grid3D::new(8, 4.0, Boundary::Periodic).unwrap();
        let mut rho = vec![0.0; g.len()];
        rho[0] = -1.0;
        rho[1] = 1.0 / g.node_volume() + 1.0;
        assert!(matches!(
            coulomb_self_energy(&rho, &g),
            Err(PolaronError::Precondition(_))
        ));
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let g = Grid3D::new(8, 6.0, Boundary::Periodic).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
        let f = ComplexField3D::random_band_limited(g, 2, &mut rng);
        let rho = f.density();
        let mut solver = CoulombSolver::new(g);
        let mut pot = vec![0.0; g.len()];
        solver.potential_of_density(&rho, &mut pot);

        let h = g.spacing();
        let reg = singular_node_constant() / h;
        let n = g.points_per_axis();
        // direct O(N²) sum with the same kernel values
        for probe in [0usize, 13, 100, 300, 511] {
            let (ix, iy, iz) = g.unindex(probe);
            let mut s = 0.0;
            for idx in 0..g.len() {
                let (jx, jy, jz) = g.unindex(idx);
                let dx = (ix as isize - jx as isize) as f64 * h;
                let dy = (iy as isize - jy as isize) as f64 * h;
                let dz = (iz as isize - jz as isize) as f64 * h;
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                let k = if r == 0.0 { reg } else { 1.0 / r };
                s += k * rho[idx];
            }
            s *= g.node_volume();
            assert!(
                (s - pot[probe]).abs() < 1e-10,
                "node {probe}: direct {s} vs fft {}",
                pot[probe]
            );
            let _ = n;
        }
    }

    #[test]
    fn bilinear_symmetry_via_polarization() {
        let g = Grid3D::new(8, 6.0, Boundary::Periodic).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        let f1 = ComplexField3D::random_band_limited(g, 2, &mut rng);
        let f2 = ComplexField3D::random_band_limited(g, 2, &mut rng);
        let r1: Vec<Complex64> = f1.density().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let r2: Vec<Complex64> = f2.density().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut solver = CoulombSolver::new(g);
        let d12 = solver.bilinear(&r1, &r2);
        let d21 = solver.bilinear(&r2, &r1);
        assert!((d12 - d21).norm() < 1e-12 * d12.norm().max(1.0));
    }
}
