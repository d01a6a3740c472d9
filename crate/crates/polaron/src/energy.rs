//! The three energy quadratures: magnetic kinetic, scalar potential,
//! and the Hardy–Sobolev form-bound audit.

use num_complex::Complex64;

use crate::error::{PolaronError, Result};
use crate::fft::Fft3;
use crate::field::ComplexField3D;
use crate::grid::Boundary;
use crate::parallel;
use crate::potential::{ScalarPotentialSpec, VectorPotentialSpec};

/// Spectral gradient components of a periodic field (one forward, three
/// inverse transforms). The Nyquist mode is zeroed in first derivatives.
pub fn spectral_gradient(phi: &ComplexField3D) -> [ComplexField3D; 3] {
    let grid = phi.grid;
    let n = grid.points_per_axis();
    let mut fft = Fft3::new(n);
    let mut hat = phi.values.clone();
    fft.forward(&mut hat);
    let kd = grid.derivative_frequencies();
    let mut out: Vec<ComplexField3D> = Vec::with_capacity(3);
    for axis in 0..3 {
        let mut comp = hat.clone();
        parallel::for_each_aligned_chunk_mut(&mut comp, n, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let m = match axis {
                    0 => idx % n,
                    1 => (idx / n) % n,
                    _ => idx / (n * n),
                };
                *v *= Complex64::new(0.0, kd[m]);
            }
        });
        fft.inverse(&mut comp);
        out.push(ComplexField3D { grid, values: comp });
    }
    let [a, b, c]: [ComplexField3D; 3] = out.try_into().expect("three components");
    [a, b, c]
}

/// 4th-order centered differences with zero extension outside the box.
pub fn fd4_gradient(phi: &ComplexField3D) -> [ComplexField3D; 3] {
    let grid = phi.grid;
    let n = grid.points_per_axis();
    let inv12h = 1.0 / (12.0 * grid.spacing());
    let src = &phi.values;
    let stride = [1usize, n, n * n];
    let mut comps = Vec::with_capacity(3);
    for axis in 0..3 {
        let s = stride[axis];
        let mut vals = vec![Complex64::default(); src.len()];
        parallel::for_each_aligned_chunk_mut(&mut vals, n, |base, chunk| {
            for (off, v) in chunk.iter_mut().enumerate() {
                let idx = base + off;
                let pos = match axis {
                    0 => idx % n,
                    1 => (idx / n) % n,
                    _ => idx / (n * n),
                };
                let get = |p: isize| -> Complex64 {
                    let q = pos as isize + p;
                    if q < 0 || q >= n as isize {
                        Complex64::default()
                    } else {
                        src[(idx as isize + p * s as isize) as usize]
                    }
                };
                *v = (get(-2) - get(-1) * 8.0 + get(1) * 8.0 - get(2)) * inv12h;
            }
        });
        comps.push(ComplexField3D { grid, values: vals });
    }
    let [a, b, c]: [ComplexField3D; 3] = comps.try_into().expect("three components");
    [a, b, c]
}

/// Gradient dispatched on the grid boundary.
pub fn gradient(phi: &ComplexField3D) -> [ComplexField3D; 3] {
    match phi.grid.boundary() {
        Boundary::Periodic => spectral_gradient(phi),
        Boundary::ZeroPaddedFreeSpace => fd4_gradient(phi),
    }
}

/// `h³ Σ |(−i∇ + A)φ|²`.
pub fn kinetic_energy(phi: &ComplexField3D, a: &VectorPotentialSpec) -> Result<f64> {
    let grad = gradient(phi);
    let a_fields = a.evaluate(&phi.grid)?;
    let mi = Complex64::new(0.0, -1.0);
    let mut total = 0.0;
    for axis in 0..3 {
        let g = &grad[axis].values;
        total += match &a_fields {
            None => parallel::chunked_sum(g, |c| c.iter().map(|v| v.norm_sqr()).sum()),
            Some(af) => {
                let acomp = &af[axis];
                parallel::chunked_sum2_offset(g, &phi.values, |base, cg, cp| {
                    cg.iter()
                        .zip(cp)
                        .enumerate()
                        .map(|(off, (gv, pv))| (mi * gv + acomp[base + off] * pv).norm_sqr())
                        .sum()
                })
            }
        };
    }
    Ok(total * phi.grid.node_volume())
}

/// `h³ Σ V |φ|²` with the declared Coulomb-center regularization.
pub fn potential_energy(phi: &ComplexField3D, v: &ScalarPotentialSpec) -> Result<f64> {
    match v.evaluate(&phi.grid)? {
        None => Ok(0.0),
        Some(vals) => Ok(parallel::chunked_sum2(&vals, &phi.values, |cv, cp| {
            cv.iter().zip(cp).map(|(v, p)| v * p.norm_sqr()).sum()
        }) * phi.grid.node_volume()),
    }
}

/// Sharp Sobolev ratio `‖∇f‖² ≥ S ‖f‖₆²` on ℝ³: `S = 3 (π/2)^{4/3}`,
/// saturated by the Talenti profile `(1+|x|²)^{−1/2}`.
pub fn sharp_sobolev_constant() -> f64 {
    3.0 * (std::f64::consts::FRAC_PI_2).powf(4.0 / 3.0)
}

/// Two-sided report for the `L^{5/3} + L^∞` form bound.
#[derive(Debug, Clone)]
pub struct FormBoundReport {
    /// `|⟨φ, Vφ⟩|` with `V = V₁ + V₂`.
    pub lhs: f64,
    /// `‖V₁‖_{5/3}` on the grid.
    pub v1_norm: f64,
    /// `‖V₂‖_∞` on the grid.
    pub v2_norm: f64,
    /// Constant multiplying `‖V₁‖_{5/3} ‖φ‖²_{H¹}` assembled from the
    /// Hölder/Young/Sobolev chain.
    pub constant: f64,
    /// `C ‖V₁‖_{5/3} ‖φ‖²_{H¹} + ‖V₂‖_∞ ‖φ‖²`.
    pub rhs: f64,
    /// `rhs − lhs` (nonnegative when the bound holds).
    pub margin: f64,
}

/// Evaluate both sides of the form bound for a declared split `V = V₁ + V₂`.
///
/// Chain: Hölder gives `|⟨φ,V₁φ⟩| ≤ ‖V₁‖_{5/3}‖φ‖₅²`; interpolation gives
/// `‖φ‖₅² ≤ ‖φ‖^{1/5}‖φ‖₆^{9/5}`; Young with exponents (10, 10/9) and the
/// sharp Sobolev inequality turn that into
/// `(1/10)‖φ‖² + (9/10) S⁻¹ ‖∇φ‖² ≤ C ‖φ‖²_{H¹}` with `C = (9/10) S⁻¹`.
pub fn form_bound_check(
    phi: &ComplexField3D,
    v1: &[f64],
    v2: &[f64],
) -> Result<FormBoundReport> {
    let grid = phi.grid;
    if v1.len() != grid.len() || v2.len() != grid.len() {
        return Err(PolaronError::Shape("potential split size".into()));
    }
    let h3 = grid.node_volume();
    let rho = phi.density();
    let lhs = (parallel::chunked_sum2(v1, &rho, |a, b| {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }) + parallel::chunked_sum2(v2, &rho, |a, b| {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }))
    .abs()
        * h3;
    let v1_norm = (parallel::chunked_sum(v1, |c| {
        c.iter().map(|x| x.abs().powf(5.0 / 3.0)).sum()
    }) * h3)
        .powf(3.0 / 5.0);
    let v2_norm = v2.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let norm_sq = phi.norm_sq();
    let grad_sq = kinetic_energy(phi, &VectorPotentialSpec::Zero)?;
    let constant = 0.9 / sharp_sobolev_constant();
    let rhs = v1_norm * constant * (norm_sq + grad_sq) + v2_norm * norm_sq;
    Ok(FormBoundReport {
        lhs,
        v1_norm,
        v2_norm,
        constant,
        rhs,
        margin: rhs - lhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid3D;

    fn gaussian_a() -> f64 {
        1.0 / (9.0 * std::f64::consts::PI)
    }

    #[test]
    fn free_gaussian_kinetic() {
        let g = Grid3D::new(48, 36.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::gaussian(g, gaussian_a(), [0.0; 3]);
        let t = kinetic_energy(&psi, &VectorPotentialSpec::Zero).unwrap();
        let exact = 3.0 * gaussian_a();
        assert!((t - exact).abs() < 1e-7, "T = {t}, exact = {exact}");
    }

    #[test]
    fn constant_field_kinetic_is_zero() {
        let g = Grid3D::new(16, 8.0, Boundary::Periodic).unwrap();
        let c = ComplexField3D::constant(g);
        let t = kinetic_energy(&c, &VectorPotentialSpec::Zero).unwrap();
        assert!(t.abs() < 1e-14, "T = {t}");
    }

    #[test]
    fn magnetic_gaussian_kinetic() {
        let a = gaussian_a();
        let b = 0.7;
        let g = Grid3D::new(48, 36.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::gaussian(g, a, [0.0; 3]);
        let spec = VectorPotentialSpec::ConstantField { b: [0.0, 0.0, b] };
        let t = kinetic_energy(&psi, &spec).unwrap();
        let exact = 3.0 * a + b * b / (8.0 * a);
        assert!(
            (t - exact).abs() / exact < 1e-6,
            "T = {t}, exact = {exact}"
        );
    }

    #[test]
    fn fd4_matches_spectral_on_smooth_field() {
        // FD4 truncation is O((kh)^4); use a wide state and verify 4th-order
        // shrinkage toward the spectral value under h -> h/2.
        let a = 0.08;
        let errs: Vec<f64> = [32usize, 64]
            .iter()
            .map(|&n| {
                let gp = Grid3D::new(n, 24.0, Boundary::Periodic).unwrap();
                let gf = Grid3D::new(n, 24.0, Boundary::ZeroPaddedFreeSpace).unwrap();
                let pp = ComplexField3D::gaussian(gp, a, [0.0; 3]);
                let pf = ComplexField3D::gaussian(gf, a, [0.0; 3]);
                let ts = kinetic_energy(&pp, &VectorPotentialSpec::Zero).unwrap();
                let tf = kinetic_energy(&pf, &VectorPotentialSpec::Zero).unwrap();
                ((ts - tf) / ts).abs()
            })
            .collect();
        assert!(errs[0] < 5e-3, "coarse FD4 error {}", errs[0]);
        assert!(errs[1] < errs[0] / 8.0, "errors {errs:?} not 4th order");
    }

    #[test]
    fn coulomb_potential_closed_form() {
        let a = gaussian_a();
        let g = Grid3D::new(48, 36.0, Boundary::Periodic).unwrap();
        // center on a node: the single-node regularization rule is exact there
        let c = g.coord(24);
        let psi = ComplexField3D::gaussian(g, a, [c; 3]);
        let spec = ScalarPotentialSpec::Coulomb {
            z: 1.5,
            center: [c; 3],
        };
        let v = potential_energy(&psi, &spec).unwrap();
        let exact = -2.0 * 1.5 * (2.0 * a / std::f64::consts::PI).sqrt();
        assert!(
            (v - exact).abs() / exact.abs() < 1e-4,
            "V = {v}, exact = {exact}"
        );
    }

    #[test]
    fn wide_well_approaches_constant() {
        let g = Grid3D::new(24, 12.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::gaussian(g, 0.5, [0.0; 3]);
        let spec = ScalarPotentialSpec::GaussianWell {
            depth: -1.0,
            width: 1e4,
        };
        let v = potential_energy(&psi, &spec).unwrap();
        assert!((v + 1.0).abs() < 1e-6, "V = {v}");
    }

    #[test]
    fn zero_potential_energy() {
        let g = Grid3D::new(8, 4.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::constant(g);
        assert_eq!(
            potential_energy(&psi, &ScalarPotentialSpec::Zero).unwrap(),
            0.0
        );
    }

    #[test]
    fn sobolev_constant_pinned_by_talenti_profile() {
        // radial quadrature of u = (1+r²)^{−1/2}
        let n = 400_000;
        let rmax = 400.0;
        let dr = rmax / n as f64;
        let (mut grad, mut six) = (0.0, 0.0);
        for i in 0..n {
            let r = (i as f64 + 0.5) * dr;
            let u2 = 1.0 / (1.0 + r * r);
            let du = -r * u2.powf(1.5);
            grad += du * du * r * r * dr;
            six += u2.powi(3) * r * r * dr;
        }
        // analytic tails: integrands ~ r^{-2} - 3r^{-4} and ~ r^{-4}
        grad += 1.0 / rmax - 1.0 / rmax.powi(3);
        six += 1.0 / (3.0 * rmax.powi(3));
        grad *= 4.0 * std::f64::consts::PI;
        six *= 4.0 * std::f64::consts::PI;
        let ratio = grad / six.powf(1.0 / 3.0);
        assert!(
            (ratio - sharp_sobolev_constant()).abs() / ratio < 1e-5,
            "quadrature {ratio} vs closed form {}",
            sharp_sobolev_constant()
        );
    }

    #[test]
    fn form_bound_zero_and_constant_cases() {
        let g = Grid3D::new(16, 8.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::gaussian(g, 0.3, [0.0; 3]);
        let zeros = vec![0.0; g.len()];
        let rep = form_bound_check(&psi, &zeros, &zeros).unwrap();
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);
        assert_eq!(rep.margin, 0.0);

        let v2 = vec![-0.75; g.len()];
        let rep = form_bound_check(&psi, &zeros, &v2).unwrap();
        assert!((rep.lhs - 0.75 * psi.norm_sq()).abs() < 1e-12);
        assert!(rep.margin.abs() < 1e-12, "margin {}", rep.margin);
    }

    #[test]
    fn form_bound_coulomb_split_has_positive_margin() {
        let g = Grid3D::new(32, 16.0, Boundary::Periodic).unwrap();
        let psi = ComplexField3D::gaussian(g, 0.2, [0.0; 3]);
        let coul = ScalarPotentialSpec::Coulomb {
            z: 1.0,
            center: [0.0; 3],
        };
        let full = coul.evaluate(&g).unwrap().unwrap();
        // split at radius 1
        let mut v1 = vec![0.0; g.len()];
        let mut v2 = vec![0.0; g.len()];
        for idx in 0..g.len() {
            let p = g.position(idx);
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if r < 1.0 {
                v1[idx] = full[idx];
            } else {
                v2[idx] = full[idx];
            }
        }
        let rep = form_bound_check(&psi, &v1, &v2).unwrap();
        assert!(rep.margin > 0.0, "margin {}", rep.margin);
        // direct quadrature of the lhs agrees with potential_energy
        let pe = potential_energy(&psi, &coul).unwrap();
        assert!((rep.lhs - pe.abs()).abs() < 1e-10);
    }
}
