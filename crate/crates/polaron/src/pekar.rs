//! Single-polaron functional: evaluation, sphere-constrained minimization,
//! and the scaling / concavity / diamagnetic / weak-field audits.
//!
//! The minimizer is preconditioned nonlinear conjugate descent on the unit
//! sphere: tangent-projected gradients, `(1 − Δ)⁻¹` smoothing, and an exact
//! polynomial line search along the normalized ray `(φ + t d)/‖φ + t d‖`
//! (kinetic and potential terms are quadratic in `t`, the Hartree term is
//! quartic, so three convolutions per iteration give the energy exactly for
//! every `t`). Accepted steps always decrease the energy.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coulomb::CoulombSolver;
use crate::error::{PolaronError, Result};
use crate::fft::Fft3;
use crate::field::ComplexField3D;
use crate::grid::{Boundary, Grid3D};
use crate::parallel;
use crate::potential::{scale_potentials, PotentialPair, ScalarPotentialSpec, VectorPotentialSpec};

/// A Pekar minimization instance.
#[derive(Debug, Clone)]
pub struct PekarProblem {
    pub pair: PotentialPair,
    /// Coulomb coupling multiplying the self-interaction term.
    pub alpha: f64,
    pub grid: Grid3D,
}

impl PekarProblem {
    pub fn free(alpha: f64, grid: Grid3D) -> Self {
        PekarProblem {
            pair: PotentialPair::free(),
            alpha,
            grid,
        }
    }
}

/// How the self-interaction term is evaluated.
#[derive(Debug, Clone)]
pub enum HartreeTerm {
    /// Free-space `1/|x|` kernel by zero-padded convolution.
    FreeSpace,
    /// Block-mode replacement `D(ρ) = (1/2π²) Σ_n M_n² |ρ̂(k_n)|²`.
    ModeSum {
        weights_sq: Vec<f64>,
        momenta: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone)]
pub enum Initializer {
    /// Gaussian with a coupling-derived width estimate.
    Auto,
    /// Gaussian `e^{−a|x|²}` with the given `a`.
    GaussianWidth(f64),
    /// Explicit starting field (normalized internally).
    Field(ComplexField3D),
}

#[derive(Debug, Clone)]
pub struct PekarOptions {
    /// Tangent-residual norm target.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of starts (first uses `initializer`, the rest perturb it).
    pub restarts: usize,
    pub initializer: Initializer,
    /// Seed for restart perturbations.
    pub seed: u64,
}

impl Default for PekarOptions {
    fn default() -> Self {
        PekarOptions {
            tolerance: 1e-6,
            max_iterations: 600,
            restarts: 1,
            initializer: Initializer::Auto,
            seed: 0,
        }
    }
}

/// Converged (or best-effort) minimizer record.
#[derive(Debug, Clone)]
pub struct PekarSolution {
    pub energy: f64,
    pub kinetic: f64,
    pub potential: f64,
    /// Self-interaction `D(ρ,ρ)` (enters the energy as `−α·coulomb`).
    pub coulomb: f64,
    pub phi: ComplexField3D,
    pub projected_residual: f64,
    pub iterations: usize,
    pub trace: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Energy decomposition of one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub coulomb: f64,
}

/// Reusable evaluation/minimization state for one problem.
pub struct PekarEngine {
    problem: PekarProblem,
    hartree: HartreeTerm,
    fft: Fft3,
    coulomb: Option<CoulombSolver>,
    /// Σ over axes of squared derivative frequencies (periodic grids).
    kin_mult: Vec<f64>,
    /// `1/(1 + k²)` smoothing multiplier.
    pre_mult: Vec<f64>,
    a_fields: Option<[Vec<f64>; 3]>,
    v_field: Option<Vec<f64>>,
    /// Phase fields `e^{i k_n·x}` for the mode-sum Hartree term.
    mode_phases: Vec<Vec<Complex64>>,
}

struct LineSearch {
    /// kinetic+potential quadratic: q0 + 2 q1 t + q2 t²
    q: [f64; 3],
    /// Hartree quartic numerator coefficients (of 1, t, t², t³, t⁴)
    dq: [f64; 5],
    /// ‖φ+td‖² = 1 + 2 s1 t + s2 t²
    s1: f64,
    s2: f64,
    alpha: f64,
}

impl LineSearch {
    fn energy(&self, t: f64) -> f64 {
        let nsq = 1.0 + 2.0 * self.s1 * t + self.s2 * t * t;
        let quad = self.q[0] + 2.0 * self.q[1] * t + self.q[2] * t * t;
        let quart = self.dq[0]
            + t * (self.dq[1] + t * (self.dq[2] + t * (self.dq[3] + t * self.dq[4])));
        quad / nsq - self.alpha * quart / (nsq * nsq)
    }
}

fn real_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    parallel::chunked_sum2(a, b, |ca, cb| {
        ca.iter().zip(cb).map(|(x, y)| (x.conj() * y).re).sum()
    })
}

fn imag_dot(a: &[Complex64], b: &[Complex64]) -> f64 {
    parallel::chunked_sum2(a, b, |ca, cb| {
        ca.iter().zip(cb).map(|(x, y)| (x.conj() * y).im).sum()
    })
}

struct Evaluation {
    kinetic: f64,
    potential: f64,
    coulomb: f64,
    gradient: Vec<Complex64>,
}

impl PekarEngine {
    pub fn new(problem: PekarProblem) -> Result<Self> {
        Self::with_hartree(problem, HartreeTerm::FreeSpace)
    }

    pub fn with_hartree(problem: PekarProblem, hartree: HartreeTerm) -> Result<Self> {
        if !(problem.alpha >= 0.0) || !problem.alpha.is_finite() {
            return Err(PolaronError::Precondition(format!(
                "alpha = {}, need finite and >= 0",
                problem.alpha
            )));
        }
        let grid = problem.grid;
        let n = grid.points_per_axis();
        let kd = grid.derivative_frequencies();
        let kin_mult = parallel::map_indices(grid.len(), |idx| {
            let ix = idx % n;
            let iy = (idx / n) % n;
            let iz = idx / (n * n);
            kd[ix] * kd[ix] + kd[iy] * kd[iy] + kd[iz] * kd[iz]
        });
        let pre_mult: Vec<f64> = kin_mult.iter().map(|&k2| 1.0 / (1.0 + k2)).collect();
        let a_fields = problem.pair.a.evaluate(&grid)?;
        let v_field = problem.pair.v.evaluate(&grid)?;
        let coulomb = match hartree {
            HartreeTerm::FreeSpace => Some(CoulombSolver::new(grid)),
            HartreeTerm::ModeSum { .. } => None,
        };
        let mode_phases = match &hartree {
            HartreeTerm::FreeSpace => Vec::new(),
            HartreeTerm::ModeSum { momenta, .. } => momenta
                .iter()
                .map(|k| {
                    let kv = *k;
                    parallel::map_indices(grid.len(), move |idx| {
                        let p = grid.position(idx);
                        Complex64::from_polar(
                            1.0,
                            kv[0] * p[0] + kv[1] * p[1] + kv[2] * p[2],
                        )
                    })
                })
                .collect(),
        };
        Ok(PekarEngine {
            problem,
            hartree,
            fft: Fft3::new(n),
            coulomb,
            kin_mult,
            pre_mult,
            a_fields,
            v_field,
            mode_phases,
        })
    }

    pub fn problem(&self) -> &PekarProblem {
        &self.problem
    }

    /// Hartree potential `Φ` of a real source: `D(ρ,σ) = h³ Σ ρ Φ_σ`.
    fn hartree_potential(&mut self, src: &[f64], out: &mut [f64]) {
        match &self.hartree {
            HartreeTerm::FreeSpace => {
                self.coulomb
                    .as_mut()
                    .expect("free-space solver present")
                    .potential_of_density(src, out);
            }
            HartreeTerm::ModeSum { weights_sq, .. } => {
                let h3 = self.problem.grid.node_volume();
                let inv_2pi2 = 0.5 / (std::f64::consts::PI * std::f64::consts::PI);
                out.iter_mut().for_each(|v| *v = 0.0);
                for (m2, phase) in weights_sq.iter().zip(&self.mode_phases) {
                    // ρ̂(k) = h³ Σ ρ e^{−ikx}
                    let re = parallel::chunked_sum2(src, phase, |cs, cp| {
                        cs.iter().zip(cp).map(|(s, p)| s * p.re).sum()
                    });
                    let im = parallel::chunked_sum2(src, phase, |cs, cp| {
                        cs.iter().zip(cp).map(|(s, p)| -s * p.im).sum()
                    });
                    let rho_hat = Complex64::new(re, im) * h3;
                    let w = m2 * inv_2pi2;
                    parallel::for_each_chunk_mut(out, |base, chunk| {
                        for (off, v) in chunk.iter_mut().enumerate() {
                            *v += w * (rho_hat * phase[base + off]).re;
                        }
                    });
                }
            }
        }
    }

    /// Covariant derivative components `(−i∇ + A)φ`.
    fn covariant_fields(&self, phi: &ComplexField3D) -> [Vec<Complex64>; 3] {
        let comps = crate::energy::gradient(phi);
        let mi = Complex64::new(0.0, -1.0);
        let mut out: Vec<Vec<Complex64>> = comps.into_iter().map(|c| c.values).collect();
        for (axis, comp) in out.iter_mut().enumerate() {
            match &self.a_fields {
                None => {
                    parallel::for_each_chunk_mut(comp, |_, c| {
                        for v in c {
                            *v *= mi;
                        }
                    });
                }
                Some(af) => {
                    let a = &af[axis];
                    let pv = &phi.values;
                    parallel::for_each_chunk_mut(comp, |base, c| {
                        for (off, v) in c.iter_mut().enumerate() {
                            *v = mi * *v + a[base + off] * pv[base + off];
                        }
                    });
                }
            }
        }
        let [a, b, c]: [Vec<Complex64>; 3] = out.try_into().expect("three components");
        [a, b, c]
    }

    /// `D_A† F = Σ_ℓ (−i∂_ℓ + A_ℓ) F_ℓ` (componentwise the same operator,
    /// since `(−i∂)† = −i∂` for both the spectral and the centered stencil).
    fn covariant_adjoint(&self, fields: &[Vec<Complex64>; 3]) -> Vec<Complex64> {
        let grid = self.problem.grid;
        let mut acc = vec![Complex64::default(); grid.len()];
        for axis in 0..3 {
            let comp = ComplexField3D {
                grid,
                values: fields[axis].clone(),
            };
            let grads = crate::energy::gradient(&comp);
            let deriv = &grads[axis].values;
            let mi = Complex64::new(0.0, -1.0);
            let afield = self.a_fields.as_ref().map(|af| &af[axis]);
            let fvals = &fields[axis];
            parallel::for_each_chunk_mut(&mut acc, |base, c| {
                for (off, v) in c.iter_mut().enumerate() {
                    let idx = base + off;
                    let mut t = mi * deriv[idx];
                    if let Some(a) = afield {
                        t += a[idx] * fvals[idx];
                    }
                    *v += t;
                }
            });
        }
        acc
    }

    fn norm_sqrs(f: &[Vec<Complex64>; 3]) -> f64 {
        f.iter()
            .map(|c| parallel::chunked_sum(c, |ch| ch.iter().map(|v| v.norm_sqr()).sum()))
            .sum()
    }

    /// Full energy/gradient evaluation given the current density and Hartree
    /// potential.
    fn eval_with(&mut self, phi: &ComplexField3D, rho: &[f64], hpot: &[f64]) -> Evaluation {
        let grid = self.problem.grid;
        let h3 = grid.node_volume();
        let n = grid.len();
        let alpha = self.problem.alpha;
        let spectral_free =
            grid.boundary() == Boundary::Periodic && self.a_fields.is_none();

        let (kinetic, mut g) = if spectral_free {
            let mut hat = phi.values.clone();
            self.fft.forward(&mut hat);
            let km = &self.kin_mult;
            let kin = h3 / n as f64
                * parallel::chunked_sum2(km, &hat, |ck, ch| {
                    ck.iter().zip(ch).map(|(k2, v)| k2 * v.norm_sqr()).sum()
                });
            parallel::for_each_chunk_mut(&mut hat, |base, c| {
                for (off, v) in c.iter_mut().enumerate() {
                    *v *= km[base + off];
                }
            });
            self.fft.inverse(&mut hat);
            (kin, hat)
        } else {
            let f = self.covariant_fields(phi);
            let kin = h3 * Self::norm_sqrs(&f);
            (kin, self.covariant_adjoint(&f))
        };
        let potential = match &self.v_field {
            None => 0.0,
            Some(v) => {
                h3 * parallel::chunked_sum2(v, rho, |cv, cr| {
                    cv.iter().zip(cr).map(|(a, b)| a * b).sum()
                })
            }
        };
        let coulomb = h3
            * parallel::chunked_sum2(rho, hpot, |cr, cp| {
                cr.iter().zip(cp).map(|(a, b)| a * b).sum()
            });
        let vf = self.v_field.as_deref();
        let pv = &phi.values;
        parallel::for_each_chunk_mut(&mut g, |base, c| {
            for (off, v) in c.iter_mut().enumerate() {
                let idx = base + off;
                let mut t = *v;
                if let Some(vals) = vf {
                    t += vals[idx] * pv[idx];
                }
                t -= 2.0 * alpha * hpot[idx] * pv[idx];
                *v = 2.0 * t;
            }
        });
        Evaluation {
            kinetic,
            potential,
            coulomb,
            gradient: g,
        }
    }

    /// Energy breakdown at `phi`.
    pub fn evaluate(&mut self, phi: &ComplexField3D) -> Result<EnergyBreakdown> {
        if phi.grid != self.problem.grid {
            return Err(PolaronError::Shape("field grid != problem grid".into()));
        }
        let rho = phi.density();
        let mut hpot = vec![0.0; rho.len()];
        self.hartree_potential(&rho, &mut hpot);
        let ev = self.eval_with(phi, &rho, &hpot);
        Ok(EnergyBreakdown {
            total: ev.kinetic + ev.potential - self.problem.alpha * ev.coulomb,
            kinetic: ev.kinetic,
            potential: ev.potential,
            coulomb: ev.coulomb,
        })
    }

    /// Unconstrained functional gradient `2[D_A²φ + Vφ − 2α(K⋆ρ)φ]`.
    pub fn gradient(&mut self, phi: &ComplexField3D) -> Result<ComplexField3D> {
        if phi.grid != self.problem.grid {
            return Err(PolaronError::Shape("field grid != problem grid".into()));
        }
        let rho = phi.density();
        let mut hpot = vec![0.0; rho.len()];
        self.hartree_potential(&rho, &mut hpot);
        let ev = self.eval_with(phi, &rho, &hpot);
        Ok(ComplexField3D {
            grid: phi.grid,
            values: ev.gradient,
        })
    }

    fn initial_field(&self, init: &Initializer) -> ComplexField3D {
        let grid = self.problem.grid;
        match init {
            Initializer::Field(f) => {
                let mut f = f.clone();
                f.normalize();
                f
            }
            Initializer::GaussianWidth(a) => {
                let mut f = ComplexField3D::gaussian(grid, *a, [0.0; 3]);
                f.normalize();
                f
            }
            Initializer::Auto => {
                // Gaussian-family optimum at this coupling, clamped so the
                // box and the grid both resolve it.
                let alpha = self.problem.alpha.max(1e-3);
                let a_opt = alpha * alpha / (9.0 * std::f64::consts::PI);
                let a_min = (3.0 / grid.extent()).powi(2);
                let a_max = (0.25 / grid.spacing()).powi(2);
                let mut f =
                    ComplexField3D::gaussian(grid, a_opt.clamp(a_min, a_max), [0.0; 3]);
                f.normalize();
                f
            }
        }
    }

    /// One descent run from a fixed start.
    fn descend(&mut self, start: ComplexField3D, opts: &PekarOptions) -> Result<PekarSolution> {
        let grid = self.problem.grid;
        let h3 = grid.node_volume();
        let n = grid.len();
        let alpha = self.problem.alpha;
        let spectral_free =
            grid.boundary() == Boundary::Periodic && self.a_fields.is_none();

        let mut phi = start;
        phi.normalize();

        let mut trace = Vec::new();
        let mut window: std::collections::VecDeque<f64> = std::collections::VecDeque::new();

        let mut rho = phi.density();
        let mut hpot = vec![0.0; n];
        self.hartree_potential(&rho, &mut hpot);

        let mut ev = self.eval_with(&phi, &rho, &hpot);
        let mut energy = ev.kinetic + ev.potential - alpha * ev.coulomb;

        let mut dir: Option<Vec<Complex64>> = None;
        let mut r_prev: Option<Vec<Complex64>> = None;
        let mut z_prev_dot = 0.0;
        let mut t_prev: f64 = 1.0;
        let mut residual = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;

        for it in 0..opts.max_iterations {
            iterations = it + 1;
            // tangent residual
            let ip = Complex64::new(
                h3 * real_dot(&phi.values, &ev.gradient),
                h3 * imag_dot(&phi.values, &ev.gradient),
            );
            let mut r = ev.gradient.clone();
            {
                let pv = &phi.values;
                parallel::for_each_chunk_mut(&mut r, |base, c| {
                    for (off, v) in c.iter_mut().enumerate() {
                        *v -= ip * pv[base + off];
                    }
                });
            }
            residual = (h3 * real_dot(&r, &r)).sqrt();
            trace.push((it, energy));
            window.push_back(energy);
            if window.len() > 10 {
                window.pop_front();
            }
            let plateau = window.len() == 10
                && (window[0] - energy).abs()
                    <= opts.tolerance * opts.tolerance * energy.abs().max(1.0);
            if residual < opts.tolerance && (plateau || residual < 0.03 * opts.tolerance) {
                converged = true;
                break;
            }

            // preconditioned tangent direction
            let mut z = r.clone();
            self.fft.forward(&mut z);
            {
                let pm = &self.pre_mult;
                parallel::for_each_chunk_mut(&mut z, |base, c| {
                    for (off, v) in c.iter_mut().enumerate() {
                        *v *= pm[base + off];
                    }
                });
            }
            self.fft.inverse(&mut z);
            let zp = Complex64::new(
                h3 * real_dot(&phi.values, &z),
                h3 * imag_dot(&phi.values, &z),
            );
            {
                let pv = &phi.values;
                parallel::for_each_chunk_mut(&mut z, |base, c| {
                    for (off, v) in c.iter_mut().enumerate() {
                        *v -= zp * pv[base + off];
                    }
                });
            }

            let z_dot_r = h3 * real_dot(&z, &r);
            let beta = match (&r_prev, z_prev_dot) {
                (Some(rp), zd) if zd > 0.0 && it % 40 != 0 => {
                    let num = parallel::chunked_sum2(&z, &r, |cz, cr| {
                        cz.iter().zip(cr).map(|(a, b)| (a.conj() * b).re).sum()
                    }) - parallel::chunked_sum2(&z, rp, |cz, cr| {
                        cz.iter().zip(cr).map(|(a, b)| (a.conj() * b).re).sum()
                    });
                    (h3 * num / zd).max(0.0)
                }
                _ => 0.0,
            };
            let mut d: Vec<Complex64> = z.iter().map(|v| -v).collect();
            if beta > 0.0 {
                if let Some(prev) = &dir {
                    parallel::for_each_chunk_mut(&mut d, |base, c| {
                        for (off, v) in c.iter_mut().enumerate() {
                            *v += beta * prev[base + off];
                        }
                    });
                }
            }
            if h3 * real_dot(&d, &r) >= 0.0 {
                d = z.iter().map(|v| -v).collect();
            }

            // line-search polynomial coefficients
            let (t_cross, t_dd) = if spectral_free {
                let mut dhat = d.clone();
                self.fft.forward(&mut dhat);
                let mut phat = phi.values.clone();
                self.fft.forward(&mut phat);
                let km = &self.kin_mult;
                let cross = h3 / n as f64
                    * parallel::chunked_sum2_offset(&phat, &dhat, |base, ca, cb| {
                        ca.iter()
                            .zip(cb)
                            .enumerate()
                            .map(|(off, (x, y))| km[base + off] * (x.conj() * y).re)
                            .sum()
                    });
                let tdd = h3 / n as f64
                    * parallel::chunked_sum2_offset(km, &dhat, |_, ck, cd| {
                        ck.iter().zip(cd).map(|(kv, da)| kv * da.norm_sqr()).sum()
                    });
                (cross, tdd)
            } else {
                let dfield = ComplexField3D {
                    grid,
                    values: d.clone(),
                };
                let fphi = self.covariant_fields(&phi);
                let fd = self.covariant_fields(&dfield);
                let mut cross = 0.0;
                for axis in 0..3 {
                    cross += h3 * real_dot(&fphi[axis], &fd[axis]);
                }
                (cross, h3 * Self::norm_sqrs(&fd))
            };
            let cross_density: Vec<f64> =
                parallel::map_indices(n, |i| 2.0 * (phi.values[i].conj() * d[i]).re);
            let rho_d: Vec<f64> = parallel::map_indices(n, |i| d[i].norm_sqr());
            let (v_c, v_dd) = match &self.v_field {
                None => (0.0, 0.0),
                Some(v) => (
                    h3 * parallel::chunked_sum2(v, &cross_density, |a, b| {
                        a.iter().zip(b).map(|(x, y)| x * y).sum()
                    }),
                    h3 * parallel::chunked_sum2(v, &rho_d, |a, b| {
                        a.iter().zip(b).map(|(x, y)| x * y).sum()
                    }),
                ),
            };
            let mut pot_c = vec![0.0; n];
            self.hartree_potential(&cross_density, &mut pot_c);
            let mut pot_dd = vec![0.0; n];
            self.hartree_potential(&rho_d, &mut pot_dd);
            let dot = |a: &[f64], b: &[f64]| -> f64 {
                h3 * parallel::chunked_sum2(a, b, |x, y| {
                    x.iter().zip(y).map(|(p, q)| p * q).sum()
                })
            };
            let ls = LineSearch {
                q: [
                    ev.kinetic + ev.potential,
                    t_cross + 0.5 * v_c,
                    t_dd + v_dd,
                ],
                dq: [
                    ev.coulomb,
                    2.0 * dot(&cross_density, &hpot),
                    dot(&cross_density, &pot_c) + 2.0 * dot(&rho_d, &hpot),
                    2.0 * dot(&rho_d, &pot_c),
                    dot(&rho_d, &pot_dd),
                ],
                s1: h3 * real_dot(&phi.values, &d),
                s2: h3 * real_dot(&d, &d),
                alpha,
            };

            // bracket a descent step, then golden-section refine
            let mut t_best = 0.0;
            let mut e_best = energy;
            let mut t = t_prev.max(1e-12);
            for _ in 0..60 {
                let e = ls.energy(t);
                if e < e_best {
                    e_best = e;
                    t_best = t;
                    t *= 2.0;
                } else if t_best == 0.0 {
                    t *= 0.25;
                    if t < 1e-18 {
                        break;
                    }
                } else {
                    break;
                }
            }
            if t_best > 0.0 {
                let (mut lo, mut hi) = (t_best / 4.0, t_best * 4.0);
                let gr = 0.618_033_988_749_894_9;
                let mut x1 = hi - gr * (hi - lo);
                let mut x2 = lo + gr * (hi - lo);
                let (mut f1, mut f2) = (ls.energy(x1), ls.energy(x2));
                for _ in 0..70 {
                    if f1 < f2 {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - gr * (hi - lo);
                        f1 = ls.energy(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + gr * (hi - lo);
                        f2 = ls.energy(x2);
                    }
                }
                let t_star = 0.5 * (lo + hi);
                let e_star = ls.energy(t_star);
                if e_star < e_best {
                    t_best = t_star;
                    e_best = e_star;
                }
            }
            if t_best == 0.0 || e_best >= energy {
                converged = residual < 10.0 * opts.tolerance;
                break;
            }

            let nsq = 1.0 + 2.0 * ls.s1 * t_best + ls.s2 * t_best * t_best;
            let inv_nrm = 1.0 / nsq.sqrt();
            {
                let dref = &d;
                parallel::for_each_chunk_mut(&mut phi.values, |base, c| {
                    for (off, v) in c.iter_mut().enumerate() {
                        *v = (*v + t_best * dref[base + off]) * inv_nrm;
                    }
                });
            }
            phi.normalize();
            rho = phi.density();
            self.hartree_potential(&rho, &mut hpot);
            let ev_new = self.eval_with(&phi, &rho, &hpot);
            energy = ev_new.kinetic + ev_new.potential - alpha * ev_new.coulomb;
            r_prev = Some(r);
            z_prev_dot = z_dot_r;
            dir = Some(d);
            t_prev = t_best;
            ev = ev_new;
        }

        Ok(PekarSolution {
            energy,
            kinetic: ev.kinetic,
            potential: ev.potential,
            coulomb: ev.coulomb,
            phi,
            projected_residual: residual,
            iterations,
            trace,
            converged,
        })
    }

    /// Constrained minimization with restarts; lowest energy wins, ties break
    /// on the residual.
    pub fn minimize(&mut self, opts: &PekarOptions) -> Result<PekarSolution> {
        if !(opts.tolerance > 0.0) {
            return Err(PolaronError::Precondition(format!(
                "tolerance = {}, need > 0",
                opts.tolerance
            )));
        }
        let base = self.initial_field(&opts.initializer);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut best: Option<PekarSolution> = None;
        for attempt in 0..opts.restarts.max(1) {
            let start = if attempt == 0 {
                base.clone()
            } else {
                let mut s = base.clone();
                let noise = ComplexField3D::random_band_limited(self.problem.grid, 3, &mut rng);
                s.axpy(Complex64::new(0.3, 0.0), &noise);
                s.normalize();
                s
            };
            let sol = self.descend(start, opts)?;
            let better = match &best {
                None => true,
                Some(b) => {
                    sol.energy < b.energy
                        || (sol.energy == b.energy
                            && sol.projected_residual < b.projected_residual)
                }
            };
            if better {
                best = Some(sol);
            }
        }
        Ok(best.expect("at least one attempt"))
    }
}

/// `𝓔_α(A, V, φ)` for a normalized trial state.
pub fn pekar_energy(phi: &ComplexField3D, problem: &PekarProblem) -> Result<f64> {
    Ok(PekarEngine::new(problem.clone())?.evaluate(phi)?.total)
}

/// Unconstrained Euler–Lagrange gradient field of `𝓔_α`.
pub fn pekar_gradient(phi: &ComplexField3D, problem: &PekarProblem) -> Result<ComplexField3D> {
    PekarEngine::new(problem.clone())?.gradient(phi)
}

/// Minimize `𝓔_α` on the unit sphere.
pub fn minimize_pekar(problem: &PekarProblem, opts: &PekarOptions) -> Result<PekarSolution> {
    PekarEngine::new(problem.clone())?.minimize(opts)
}

/// Outcome of the coordinate-matched scaling identity audit.
#[derive(Debug, Clone)]
pub struct ScalingCheck {
    /// `E_P(A_α, V_α, α·c)` evaluated at the transported minimizer.
    pub lhs: f64,
    /// `α² E_P(A, V, c)` from the base solve.
    pub rhs: f64,
    /// `|lhs − rhs| / |rhs|`.
    pub deviation: f64,
}

/// Verify `E_P(A_α, V_α, α·c) = α² E_P(A, V, c)` on coordinate-matched grids.
///
/// The base problem is solved once; the minimizer is transported by the exact
/// node-for-node substitution `φ'(x) = α^{3/2} φ(αx)` onto the grid with
/// extent `extent/α`, where every discrete term scales by exactly `α²`, so
/// the deviation is at rounding level.
pub fn scaling_check(
    problem: &PekarProblem,
    alpha: f64,
    opts: &PekarOptions,
) -> Result<ScalingCheck> {
    if !(alpha > 0.0) {
        return Err(PolaronError::Precondition(format!(
            "alpha = {alpha}, need > 0"
        )));
    }
    let base = minimize_pekar(problem, opts)?;
    let scaled_grid = problem.grid.coordinate_scaled(alpha)?;
    let scaled = PekarProblem {
        pair: scale_potentials(&problem.pair, alpha)?,
        alpha: alpha * problem.alpha,
        grid: scaled_grid,
    };
    let transported = ComplexField3D {
        grid: scaled_grid,
        values: base
            .phi
            .values
            .iter()
            .map(|v| v * alpha.powf(1.5))
            .collect(),
    };
    let lhs = PekarEngine::new(scaled)?.evaluate(&transported)?.total;
    let rhs = alpha * alpha * base.energy;
    Ok(ScalingCheck {
        lhs,
        rhs,
        deviation: (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE),
    })
}

/// One solved point of a parameter scan.
#[derive(Debug, Clone)]
pub struct ScanPoint {
    pub parameter: f64,
    pub energy: f64,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) fn scale_scalar(v: &ScalarPotentialSpec, lambda: f64) -> ScalarPotentialSpec {
    match v {
        ScalarPotentialSpec::Zero => ScalarPotentialSpec::Zero,
        ScalarPotentialSpec::Coulomb { z, center } => ScalarPotentialSpec::Coulomb {
            z: lambda * z,
            center: *center,
        },
        ScalarPotentialSpec::GaussianWell { depth, width } => ScalarPotentialSpec::GaussianWell {
            depth: lambda * depth,
            width: *width,
        },
        ScalarPotentialSpec::Sampled(vals) => {
            ScalarPotentialSpec::Sampled(vals.iter().map(|x| lambda * x).collect())
        }
    }
}

/// Energies `E_P(A, λV, λ²)` along increasing `λ`. The map is an infimum of
/// functions concave in λ, so second differences must be ≤ solver slack.
/// Consecutive solves warm-start from the previous minimizer.
pub fn concavity_scan(
    pair: &PotentialPair,
    lambdas: &[f64],
    grid: Grid3D,
    opts: &PekarOptions,
) -> Result<Vec<ScanPoint>> {
    if lambdas.windows(2).any(|w| w[0] >= w[1]) || lambdas.iter().any(|&l| l <= 0.0) {
        return Err(PolaronError::Precondition(
            "lambdas must be positive and increasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut warm: Option<ComplexField3D> = None;
    for &lam in lambdas {
        let problem = PekarProblem {
            pair: PotentialPair {
                a: pair.a.clone(),
                v: scale_scalar(&pair.v, lam),
            },
            alpha: lam * lam,
            grid,
        };
        let mut o = opts.clone();
        if let Some(w) = &warm {
            o.initializer = Initializer::Field(w.clone());
        }
        let sol = minimize_pekar(&problem, &o)?;
        out.push(ScanPoint {
            parameter: lam,
            energy: sol.energy,
            residual: sol.projected_residual,
            converged: sol.converged,
        });
        warm = Some(sol.phi);
    }
    Ok(out)
}

/// Second differences `E(i−1) − 2E(i) + E(i+1)` of a scan.
pub fn second_differences(points: &[ScanPoint]) -> Vec<f64> {
    points
        .windows(3)
        .map(|w| w[0].energy - 2.0 * w[1].energy + w[2].energy)
        .collect()
}

/// One point of the diamagnetic ordering audit.
#[derive(Debug, Clone)]
pub struct DiamagneticPoint {
    pub b: f64,
    pub energy: f64,
    /// `E_P(B) − E_P(0)`; expected ≥ −ε_solver.
    pub margin: f64,
    pub converged: bool,
}

/// `E_P(A_B, V, α) ≥ E_P(0, V, α)` for every `B` in the list (which must
/// contain 0, the reference point).
pub fn diamagnetic_check(
    v: &ScalarPotentialSpec,
    b_values: &[f64],
    alpha: f64,
    grid: Grid3D,
    opts: &PekarOptions,
) -> Result<Vec<DiamagneticPoint>> {
    if !b_values.contains(&0.0) {
        return Err(PolaronError::Precondition("B values must include 0".into()));
    }
    let free = minimize_pekar(
        &PekarProblem {
            pair: PotentialPair {
                a: VectorPotentialSpec::Zero,
                v: v.clone(),
            },
            alpha,
            grid,
        },
        opts,
    )?;
    let mut out = Vec::new();
    let mut warm = free.phi.clone();
    for &b in b_values {
        let point = if b == 0.0 {
            DiamagneticPoint {
                b,
                energy: free.energy,
                margin: 0.0,
                converged: free.converged,
            }
        } else {
            let problem = PekarProblem {
                pair: PotentialPair {
                    a: VectorPotentialSpec::ConstantField { b: [0.0, 0.0, b] },
                    v: v.clone(),
                },
                alpha,
                grid,
            };
            let mut o = opts.clone();
            o.initializer = Initializer::Field(warm.clone());
            let sol = minimize_pekar(&problem, &o)?;
            warm = sol.phi.clone();
            DiamagneticPoint {
                b,
                energy: sol.energy,
                margin: sol.energy - free.energy,
                converged: sol.converged,
            }
        };
        out.push(point);
    }
    Ok(out)
}

/// Row of the weak-field convergence table.
#[derive(Debug, Clone)]
pub struct WeakFieldPoint {
    pub alpha: f64,
    pub lambda: f64,
    pub energy: f64,
    /// `|E − e_P^discrete|` against the free minimum on the same grid.
    pub deviation: f64,
    /// `deviation · α^{1/5}`, reported against the `O(α^{−1/5})` envelope.
    pub envelope_ratio: f64,
    pub converged: bool,
}

/// Compute `E_P(A_{α⁻¹}, λ V_{α⁻¹}, λ²)` along increasing α; deviations from
/// the free discrete minimum on the same grid should shrink.
pub fn weak_field_scan(
    pair: &PotentialPair,
    alphas: &[f64],
    lambda_of_alpha: impl Fn(f64) -> f64,
    grid: Grid3D,
    opts: &PekarOptions,
) -> Result<Vec<WeakFieldPoint>> {
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PolaronError::Precondition("alphas must be increasing".into()));
    }
    let free = minimize_pekar(&PekarProblem::free(1.0, grid), opts)?;
    let mut out = Vec::new();
    let mut warm = free.phi.clone();
    for &a in alphas {
        let lam = lambda_of_alpha(a);
        let scaled = scale_potentials(pair, 1.0 / a)?;
        let problem = PekarProblem {
            pair: PotentialPair {
                a: scaled.a,
                v: scale_scalar(&scaled.v, lam),
            },
            alpha: lam * lam,
            grid,
        };
        let mut o = opts.clone();
        o.initializer = Initializer::Field(warm.clone());
        let sol = minimize_pekar(&problem, &o)?;
        warm = sol.phi.clone();
        let dev = (sol.energy - free.energy).abs();
        out.push(WeakFieldPoint {
            alpha: a,
            lambda: lam,
            energy: sol.energy,
            deviation: dev,
            envelope_ratio: dev * a.powf(0.2),
            converged: sol.converged,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> Grid3D {
        Grid3D::new(16, 14.0, Boundary::Periodic).unwrap()
    }

    #[test]
    fn constant_minimizer_at_zero_coupling() {
        let g = small_grid();
        let sol = minimize_pekar(&PekarProblem::free(0.0, g), &PekarOptions::default()).unwrap();
        assert!(sol.converged, "residual {}", sol.projected_residual);
        assert!(sol.energy.abs() < 1e-8, "E = {}", sol.energy);
    }

    #[test]
    fn trace_is_non_increasing() {
        let g = small_grid();
        let sol = minimize_pekar(&PekarProblem::free(1.0, g), &PekarOptions::default()).unwrap();
        for w in sol.trace.windows(2) {
            assert!(w[1].1 <= w[0].1 + 1e-13, "trace rose: {:?}", w);
        }
        assert!(sol.energy < 0.0);
    }

    #[test]
    fn breakdown_identity() {
        let g = small_grid();
        let sol = minimize_pekar(&PekarProblem::free(1.0, g), &PekarOptions::default()).unwrap();
        let lhs = sol.energy;
        let rhs = sol.kinetic + sol.potential - 1.0 * sol.coulomb;
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        assert!((sol.phi.norm_sq() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = Grid3D::new(12, 10.0, Boundary::Periodic).unwrap();
        let problem = PekarProblem {
            pair: PotentialPair {
                a: VectorPotentialSpec::ConstantField { b: [0.0, 0.0, 0.4] },
                v: ScalarPotentialSpec::GaussianWell {
                    depth: -0.5,
                    width: 3.0,
                },
            },
            alpha: 1.2,
            grid: g,
        };
        let mut rng = <ChaCha8Rng as SeedableRng>::seed_from_u64(5);
        let phi = ComplexField3D::random_band_limited(g, 2, &mut rng);
        let grad = pekar_gradient(&phi, &problem).unwrap();
        let h3 = g.node_volume();
        let t = 1e-4;
        for k in 0..20 {
            let eta = ComplexField3D::random_band_limited(g, 2, &mut rng);
            let mut plus = phi.clone();
            plus.axpy(Complex64::new(t, 0.0), &eta);
            let mut minus = phi.clone();
            minus.axpy(Complex64::new(-t, 0.0), &eta);
            let ep = pekar_energy(&plus, &problem).unwrap();
            let em = pekar_energy(&minus, &problem).unwrap();
            let fd = (ep - em) / (2.0 * t);
            let ip = h3 * real_dot(&grad.values, &eta.values);
            assert!(
                (fd - ip).abs() <= 1e-6 * ip.abs().max(1e-3),
                "direction {k}: fd {fd} vs ⟨g,η⟩ {ip}"
            );
        }
    }

    #[test]
    fn phase_freedom() {
        let g = small_grid();
        let problem = PekarProblem::free(1.0, g);
        let sol = minimize_pekar(&problem, &PekarOptions::default()).unwrap();
        let mut rotated = sol.phi.clone();
        rotated.scale(Complex64::from_polar(1.0, 1.234));
        let e = pekar_energy(&rotated, &problem).unwrap();
        assert!((e - sol.energy).abs() < 1e-12 * sol.energy.abs());
    }

    #[test]
    fn rejects_bad_options() {
        let g = small_grid();
        let mut o = PekarOptions::default();
        o.tolerance = 0.0;
        assert!(minimize_pekar(&PekarProblem::free(1.0, g), &o).is_err());
    }

    #[test]
    fn scaling_identity_alpha_one_is_exact() {
        let g = small_grid();
        let chk = scaling_check(
            &PekarProblem::free(1.0, g),
            1.0,
            &PekarOptions::default(),
        )
        .unwrap();
        assert_eq!(chk.lhs, chk.rhs, "identity transport must be bit-exact");
    }
}
