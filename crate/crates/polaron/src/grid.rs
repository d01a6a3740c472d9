use crate::error::{PolaronError, Result};

/// How the box edges are treated by differential operators.
///
/// The Coulomb convolution is always free-space (zero padded to double size);
/// the boundary choice only selects the differentiation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Periodic torus; derivatives are spectral.
    Periodic,
    /// Fields are extended by zero outside the box; derivatives are 4th-order
    /// centered differences.
    ZeroPaddedFreeSpace,
}

/// Uniform cubic grid, cell-centered and symmetric about the origin.
///
/// Units: ħ = 1, m = 1/2, Coulomb coefficient 1, so the kinetic energy of a
/// normalized state is `‖∇φ‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3D {
    points_per_axis: usize,
    extent: f64,
    boundary: Boundary,
}

fn is_transform_smooth(mut n: usize) -> bool {
    for p in [2usize, 3, 5, 7] {
        while n % p == 0 {
            n /= p;
        }
    }
    n == 1
}

impl Grid3D {
    /// Build a grid. `points_per_axis` must be ≥ 8 and factor into
    /// {2, 3, 5, 7} so the transforms stay fast; `extent` is the box side.
    pub fn new(points_per_axis: usize, extent: f64, boundary: Boundary) -> Result<Self> {
        if points_per_axis < 8 {
            return Err(PolaronError::Sizing(format!(
                "points_per_axis = {points_per_axis}, need at least 8"
            )));
        }
        if !is_transform_smooth(points_per_axis) {
            return Err(PolaronError::Sizing(format!(
                "points_per_axis = {points_per_axis} has prime factors outside {{2,3,5,7}}"
            )));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(PolaronError::Sizing(format!("extent = {extent}, need > 0")));
        }
        Ok(Grid3D {
            points_per_axis,
            extent,
            boundary,
        })
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Grid spacing `h = extent / points_per_axis`.
    pub fn spacing(&self) -> f64 {
        self.extent / self.points_per_axis as f64
    }

    /// Total node count `n³`.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one node, `h³`.
    pub fn node_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Cell-centered coordinate of index `i` along one axis.
    pub fn coord(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing() - 0.5 * self.extent
    }

    /// All axis coordinates.
    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|i| self.coord(i)).collect()
    }

    /// Flat index with x fastest.
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        let n = self.points_per_axis;
        ix + n * (iy + n * iz)
    }

    /// Decompose a flat index into `(ix, iy, iz)`.
    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.points_per_axis;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// Position of a flat index.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.unindex(idx);
        [self.coord(ix), self.coord(iy), self.coord(iz)]
    }

    /// Angular frequencies `2π m / extent` in FFT layout; `m = i` for
    /// `i ≤ n/2`, else `i − n`.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let fac = 2.0 * std::f64::consts::PI / self.extent;
        (0..n)
            .map(|i| {
                let m = if i <= n / 2 {
                    i as f64
                } else {
                    i as f64 - n as f64
                };
                fac * m
            })
            .collect()
    }

    /// Frequencies for first derivatives: the Nyquist mode is zeroed so the
    /// derivative of a real field stays conjugate-symmetric.
    pub fn derivative_frequencies(&self) -> Vec<f64> {
        let n = self.points_per_axis;
        let mut k = self.frequencies();
        if n % 2 == 0 {
            k[n / 2] = 0.0;
        }
        k
    }

    /// Index of the node whose cell contains `x` along one axis (clamped).
    pub fn cell_of(&self, x: f64) -> usize {
        let h = self.spacing();
        let f = ((x + 0.5 * self.extent) / h).floor();
        (f.max(0.0) as usize).min(self.points_per_axis - 1)
    }

    /// The grid used for coordinate-matched rescaling `x → x/alpha`:
    /// same point count, extent divided by `alpha`.
    pub fn coordinate_scaled(&self, alpha: f64) -> Result<Grid3D> {
        if !(alpha > 0.0) {
            return Err(PolaronError::Precondition(format!(
                "scaling factor alpha = {alpha}, need > 0"
            )));
        }
        Grid3D::new(self.points_per_axis, self.extent / alpha, self.boundary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_coords() {
        let g = Grid3D::new(64, 16.0, Boundary::Periodic).unwrap();
        assert_eq!(g.spacing(), 0.25);
        // cell-centered, symmetric about the origin
        assert_eq!(g.coord(0), -7.875);
        assert_eq!(g.coord(63), 7.875);
        for i in 0..64 {
            assert!((g.coord(i) + g.coord(63 - i)).abs() < 1e-14);
        }
    }

    #[test]
    fn sizing_rejections() {
        assert!(Grid3D::new(0, 16.0, Boundary::Periodic).is_err());
        assert!(Grid3D::new(7, 16.0, Boundary::Periodic).is_err());
        assert!(Grid3D::new(22, 16.0, Boundary::Periodic).is_err()); // 11 | 22
        assert!(Grid3D::new(64, 0.0, Boundary::Periodic).is_err());
        assert!(Grid3D::new(64, -1.0, Boundary::Periodic).is_err());
        assert!(Grid3D::new(64, f64::NAN, Boundary::Periodic).is_err());
        assert!(Grid3D::new(60, 16.0, Boundary::Periodic).is_ok()); // 2²·3·5
    }

    #[test]
    fn frequency_layout() {
        let g = Grid3D::new(8, 4.0, Boundary::Periodic).unwrap();
        let k = g.frequencies();
        let f0 = 2.0 * std::f64::consts::PI / 4.0;
        assert_eq!(k[0], 0.0);
        assert!((k[1] - f0).abs() < 1e-15);
        assert!((k[4] - 4.0 * f0).abs() < 1e-15);
        assert!((k[5] + 3.0 * f0).abs() < 1e-15);
        assert_eq!(g.derivative_frequencies()[4], 0.0);
    }

    #[test]
    fn cell_lookup() {
        let g = Grid3D::new(8, 8.0, Boundary::Periodic).unwrap();
        assert_eq!(g.cell_of(g.coord(3)), 3);
        assert_eq!(g.cell_of(-100.0), 0);
        assert_eq!(g.cell_of(100.0), 7);
    }
}
