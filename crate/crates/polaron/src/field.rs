use num_complex::Complex64;
use rand::Rng;
use std::io::Write;
use std::path::Path;

use crate::error::{PolaronError, Result};
use crate::grid::Grid3D;
use crate::parallel;

/// A complex scalar field sampled on a [`Grid3D`], x-fastest.
#[derive(Debug, Clone)]
pub struct ComplexField3D {
    pub grid: Grid3D,
    pub values: Vec<Complex64>,
}

impl ComplexField3D {
    pub fn zeros(grid: Grid3D) -> Self {
        ComplexField3D {
            grid,
            values: vec![Complex64::default(); grid.len()],
        }
    }

    /// Normalized constant field, `φ = extent^{-3/2}`.
    pub fn constant(grid: Grid3D) -> Self {
        let v = Complex64::new(grid.extent().powf(-1.5), 0.0);
        ComplexField3D {
            grid,
            values: vec![v; grid.len()],
        }
    }

    /// Build from a pointwise function of position.
    pub fn from_fn(grid: Grid3D, f: impl Fn([f64; 3]) -> Complex64 + Sync) -> Self {
        let n = grid.points_per_axis();
        let xs = grid.axis_coords();
        let mut field = ComplexField3D::zeros(grid);
        parallel::for_each_aligned_chunk_mut(&mut field.values, n, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let ix = idx % n;
                let iy = (idx / n) % n;
                let iz = idx / (n * n);
                *v = f([xs[ix], xs[iy], xs[iz]]);
            }
        });
        field
    }

    /// Gaussian `(2a/π)^{3/4} e^{−a|x−c|²}`, unit L² norm in the continuum.
    pub fn gaussian(grid: Grid3D, a: f64, center: [f64; 3]) -> Self {
        let amp = (2.0 * a / std::f64::consts::PI).powf(0.75);
        Self::from_fn(grid, |x| {
            let r2 = (x[0] - center[0]).powi(2)
                + (x[1] - center[1]).powi(2)
                + (x[2] - center[2]).powi(2);
            Complex64::new(amp * (-a * r2).exp(), 0.0)
        })
    }

    /// Random band-limited field: unit-variance complex Gaussian coefficients
    /// on Fourier modes with `max_j |m_j| ≤ band`, transformed to position
    /// space and normalized.
    pub fn random_band_limited(grid: Grid3D, band: usize, rng: &mut impl Rng) -> Self {
        use rand::distributions::Distribution;
        let normal = rand::distributions::Uniform::new(-1.0f64, 1.0);
        let n = grid.points_per_axis();
        let mut hat = vec![Complex64::default(); grid.len()];
        let idx_of = |m: i64| -> usize {
            if m >= 0 {
                m as usize
            } else {
                (n as i64 + m) as usize
            }
        };
        let b = band as i64;
        for mz in -b..=b {
            for my in -b..=b {
                for mx in -b..=b {
                    let re = normal.sample(rng);
                    let im = normal.sample(rng);
                    hat[idx_of(mx) + n * (idx_of(my) + n * idx_of(mz))] = Complex64::new(re, im);
                }
            }
        }
        let mut fft = crate::fft::Fft3::new(n);
        fft.inverse(&mut hat);
        let mut field = ComplexField3D { grid, values: hat };
        field.normalize();
        field
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `h³ Σ conj(a)·b`.
    pub fn inner(&self, other: &ComplexField3D) -> Complex64 {
        debug_assert_eq!(self.grid, other.grid);
        let re = parallel::chunked_sum2(&self.values, &other.values, |ca, cb| {
            ca.iter().zip(cb).map(|(a, b)| (a.conj() * b).re).sum()
        });
        let im = parallel::chunked_sum2(&self.values, &other.values, |ca, cb| {
            ca.iter().zip(cb).map(|(a, b)| (a.conj() * b).im).sum()
        });
        Complex64::new(re, im) * self.grid.node_volume()
    }

    /// `h³ Σ |φ|²`.
    pub fn norm_sq(&self) -> f64 {
        parallel::chunked_sum(&self.values, |c| c.iter().map(|v| v.norm_sqr()).sum())
            * self.grid.node_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Scale to unit L² norm; returns the previous norm.
    pub fn normalize(&mut self) -> f64 {
        let nrm = self.norm();
        if nrm > 0.0 {
            let s = 1.0 / nrm;
            parallel::for_each_chunk_mut(&mut self.values, |_, c| {
                for v in c {
                    *v *= s;
                }
            });
        }
        nrm
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }

    /// Pointwise density `|φ|²`.
    pub fn density(&self) -> Vec<f64> {
        parallel::map_indices(self.values.len(), |i| self.values[i].norm_sqr())
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: Complex64, other: &ComplexField3D) {
        debug_assert_eq!(self.grid, other.grid);
        let ov = &other.values;
        parallel::for_each_chunk_mut(&mut self.values, |base, c| {
            for (off, v) in c.iter_mut().enumerate() {
                *v += s * ov[base + off];
            }
        });
    }

    pub fn scale(&mut self, s: Complex64) {
        parallel::for_each_chunk_mut(&mut self.values, |_, c| {
            for v in c {
                *v *= s;
            }
        });
    }

    /// Exact trigonometric interpolation onto a finer grid of the same
    /// extent (Nyquist modes dropped). Used to warm-start refined solves.
    pub fn spectral_upsample(&self, target: Grid3D) -> Result<ComplexField3D> {
        let n = self.grid.points_per_axis();
        let m = target.points_per_axis();
        if target.extent() != self.grid.extent() || m < n {
            return Err(PolaronError::Shape(
                "upsample target must share the extent and refine the grid".into(),
            ));
        }
        let mut hat = self.values.clone();
        crate::fft::Fft3::new(n).forward(&mut hat);
        let mut big = vec![Complex64::default(); target.len()];
        let map = |i: usize| -> Option<usize> {
            if i < n / 2 {
                Some(i)
            } else if i > n / 2 {
                Some(m - (n - i))
            } else {
                None // drop Nyquist
            }
        };
        let scale = (m as f64 / n as f64).powi(3);
        for iz in 0..n {
            let Some(jz) = map(iz) else { continue };
            for iy in 0..n {
                let Some(jy) = map(iy) else { continue };
                for ix in 0..n {
                    let Some(jx) = map(ix) else { continue };
                    big[jx + m * (jy + m * jz)] = hat[ix + n * (iy + n * iz)] * scale;
                }
            }
        }
        crate::fft::Fft3::new(m).inverse(&mut big);
        Ok(ComplexField3D {
            grid: target,
            values: big,
        })
    }

    /// Debug snapshot: little-endian f64 pairs (re, im), x-fastest.
    pub fn export_raw(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(self.values.len() * 16);
        for v in &self.values {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(&buf))
            .map_err(|e| PolaronError::Precondition(format!("export to {path:?}: {e}")))
    }
}
