//! Solver for the nonlocal potential equation
//!
//! ```text
//!   -lap phi - eps^4 div(|grad phi|^2 grad phi) = rho,   phi(R) = 0,
//! ```
//!
//! posed as the strictly convex minimization of
//!
//! ```text
//!   E(phi) = 1/2 int |grad phi|^2 + eps^4/4 int |grad phi|^4 - int rho phi.
//! ```
//!
//! The discrete energy uses the half-node flux quadrature of [`crate::grid`],
//! which makes the stationarity relation
//! `int |grad phi|^2 + eps^4 int |grad phi|^4 = int rho phi` an exact
//! consequence of a vanishing gradient rather than a discretization claim.
//!
//! Damped Newton iteration: the Hessian is tridiagonal and positive definite,
//! steps are backtracked with an Armijo test, and a steepest-descent fallback
//! guards indefinite arithmetic.  Convergence is measured on the sup norm of
//! the volume-scaled energy gradient (the pointwise equation residual), and
//! after the tolerance is met the iteration polishes until quadratic progress
//! stalls so that downstream identity checks sit on the roundoff floor.

use thiserror::Error;

use crate::grid::{solve_spd_tridiagonal, Field, GridError, RadialGrid};

/// Armijo slope fraction for the damped Newton line search.
const ARMIJO_C: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("non-finite value during potential solve at iteration {iteration}")]
    NonFinite { iteration: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct PotentialOptions {
    /// Sup-norm tolerance on the pointwise equation residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Maximum step halvings per line search.
    pub max_backtracks: usize,
}

impl Default for PotentialOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
            max_backtracks: 40,
        }
    }
}

/// Converged potential together with the quadrature values every caller
/// needs: gradient integrals, source coupling, and the stationarity residual.
#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub phi: Field,
    pub eps: f64,
    pub iterations: usize,
    /// Final sup norm of the pointwise equation residual.
    pub residual: f64,
    /// int |grad phi|^2.
    pub grad_sq: f64,
    /// int |grad phi|^4.
    pub grad_quart: f64,
    /// int rho phi.
    pub coupling: f64,
    pub min_value: f64,
    pub converged: bool,
}

impl PotentialSolution {
    /// Norm in the natural space for the quasilinear problem:
    /// |grad phi|_2 + |grad phi|_4.
    pub fn x_norm(&self) -> f64 {
        self.grad_sq.sqrt() + self.grad_quart.powf(0.25)
    }

    /// Relative defect of the stationarity identity
    /// int |grad phi|^2 + eps^4 int |grad phi|^4 = int rho phi.
    pub fn identity_residual(&self) -> f64 {
        let lhs = self.grad_sq + self.eps.powi(4) * self.grad_quart;
        (lhs - self.coupling).abs() / self.coupling.abs().max(1.0)
    }
}

/// Energy value E(phi) for a candidate potential.
pub fn energy_value(
    grid: &RadialGrid,
    phi: &Field,
    rho: &Field,
    eps: f64,
) -> Result<f64, GridError> {
    let eps4 = eps.powi(4);
    let d2 = grid.grad_sq_integral(phi)?;
    let d4 = grid.grad_quart_integral(phi)?;
    let c = grid.volume_integral_product(rho, phi)?;
    Ok(0.5 * d2 + 0.25 * eps4 * d4 - c)
}

pub fn solve(
    grid: &RadialGrid,
    rho: &Field,
    eps: f64,
    opts: &PotentialOptions,
) -> Result<PotentialSolution, PotentialError> {
    let init = Field::zeros(grid);
    solve_from(grid, rho, eps, &init, opts)
}

/// Solve starting from a caller-supplied initial potential.  The energy is
/// strictly convex, so every start converges to the same minimizer; the
/// initial point only changes the iteration count.
pub fn solve_from(
    grid: &RadialGrid,
    rho: &Field,
    eps: f64,
    init: &Field,
    opts: &PotentialOptions,
) -> Result<PotentialSolution, PotentialError> {
    let state = SolverState::new(grid, rho, eps)?;
    state.run(init.clone(), opts)
}

struct SolverState<'a> {
    grid: &'a RadialGrid,
    rho: &'a Field,
    eps4: f64,
    eps: f64,
}

impl<'a> SolverState<'a> {
    fn new(grid: &'a RadialGrid, rho: &'a Field, eps: f64) -> Result<Self, PotentialError> {
        // trigger the grid-membership check once up front
        grid.volume_integral(rho)?;
        Ok(Self {
            grid,
            rho,
            eps4: eps.powi(4),
            eps,
        })
    }

    fn energy(&self, phi: &Field) -> f64 {
        let mut quad = 0.0;
        let dr = self.grid.dr();
        let wh = self.grid.flux_volumes();
        let v = phi.values();
        for i in 0..self.grid.intervals() {
            let d = (v[i + 1] - v[i]) / dr;
            let d2 = d * d;
            quad += (0.5 * d2 + 0.25 * self.eps4 * d2 * d2) * wh[i];
        }
        let mut coupling = 0.0;
        let vol = self.grid.volumes();
        let r = self.rho.values();
        for i in 0..=self.grid.intervals() {
            coupling += r[i] * v[i] * vol[i];
        }
        quad - coupling
    }

    /// Weak-form gradient over the n interior unknowns.
    fn gradient(&self, phi: &Field) -> Vec<f64> {
        let n = self.grid.intervals();
        let dr = self.grid.dr();
        let wh = self.grid.flux_volumes();
        let vol = self.grid.volumes();
        let v = phi.values();
        let r = self.rho.values();
        // flux forces q_i = (d + eps^4 d^3) w_half on each half node
        let mut q = vec![0.0; n];
        for i in 0..n {
            let d = (v[i + 1] - v[i]) / dr;
            q[i] = (d + self.eps4 * d * d * d) * wh[i];
        }
        let mut g = vec![0.0; n];
        for j in 0..n {
            let prev = if j == 0 { 0.0 } else { q[j - 1] };
            g[j] = (prev - q[j]) / dr - r[j] * vol[j];
        }
        g
    }

    fn residual_sup(&self, g: &[f64]) -> f64 {
        let vol = self.grid.volumes();
        g.iter()
            .enumerate()
            .fold(0.0_f64, |m, (j, gj)| m.max((gj / vol[j]).abs()))
    }

    fn newton_direction(&self, phi: &Field, g: &[f64]) -> Result<Vec<f64>, GridError> {
        let n = self.grid.intervals();
        let dr = self.grid.dr();
        let inv_dr2 = 1.0 / (dr * dr);
        let wh = self.grid.flux_volumes();
        let v = phi.values();
        let mut a = vec![0.0; n];
        for i in 0..n {
            let d = (v[i + 1] - v[i]) / dr;
            a[i] = (1.0 + 3.0 * self.eps4 * d * d) * wh[i];
        }
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let mut rhs = vec![0.0; n];
        for j in 0..n {
            let lo = if j == 0 { 0.0 } else { a[j - 1] };
            diag[j] = (lo + a[j]) * inv_dr2;
            if j + 1 < n {
                off[j] = -a[j] * inv_dr2;
            }
            rhs[j] = -g[j];
        }
        solve_spd_tridiagonal(&diag, &off, &rhs)
    }

    fn add_direction(&self, phi: &Field, p: &[f64], t: f64) -> Field {
        let mut values = phi.values().to_vec();
        for (j, pj) in p.iter().enumerate() {
            values[j] += t * pj;
        }
        // boundary node untouched: p covers interior unknowns only
        Field::from_values(self.grid, values).expect("interior update keeps the boundary")
    }

    /// Backtracking line search; returns the accepted iterate or None when
    /// the maximum number of halvings is exhausted.
    fn line_search(
        &self,
        phi: &Field,
        e0: f64,
        p: &[f64],
        slope: f64,
        opts: &PotentialOptions,
    ) -> Option<(Field, f64)> {
        // The energy is a sum over the grid cells, so comparisons between
        // nearby values carry an accumulation error of order n * eps * scale.
        // Without this slack the Armijo test rejects full Newton steps once
        // the true decrease drops below summation noise, and the iteration
        // stalls short of the residual floor.
        let noise = self.grid.intervals() as f64 * f64::EPSILON * (1.0 + e0.abs());
        let mut t = 1.0;
        for _ in 0..=opts.max_backtracks {
            let cand = self.add_direction(phi, p, t);
            let e = self.energy(&cand);
            if e.is_finite() && e <= e0 + ARMIJO_C * t * slope + noise {
                return Some((cand, e));
            }
            t *= 0.5;
        }
        None
    }

    fn run(&self, mut phi: Field, opts: &PotentialOptions) -> Result<PotentialSolution, PotentialError> {
        let mut iterations = 0;
        let mut prev_res = f64::INFINITY;
        let converged;
        loop {
            let g = self.gradient(&phi);
            if g.iter().any(|x| !x.is_finite()) {
                return Err(PotentialError::NonFinite {
                    iteration: iterations,
                });
            }
            let res = self.residual_sup(&g);
            if res <= opts.tol {
                // polish: keep stepping while the residual still drops fast,
                // so identity checks land on the roundoff floor
                if res <= opts.tol * 1e-3 || res >= 0.25 * prev_res {
                    converged = true;
                    break;
                }
            }
            if iterations >= opts.max_iter {
                converged = res <= opts.tol;
                break;
            }
            let e0 = self.energy(&phi);
            if !e0.is_finite() {
                return Err(PotentialError::NonFinite {
                    iteration: iterations,
                });
            }
            let p = self.newton_direction(&phi, &g)?;
            let slope: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            let step = if slope < 0.0 {
                self.line_search(&phi, e0, &p, slope, opts)
            } else {
                None
            };
            let step = match step {
                Some(s) => Some(s),
                None => {
                    // steepest-descent fallback with its own backtracking
                    let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
                    let slope_g: f64 = -g.iter().map(|x| x * x).sum::<f64>();
                    self.line_search(&phi, e0, &neg_g, slope_g, opts)
                }
            };
            match step {
                Some((next, _)) => {
                    phi = next;
                    iterations += 1;
                    prev_res = res;
                }
                None => {
                    // no descent possible at this scale: stop with whatever
                    // accuracy the iterate reached
                    converged = res <= opts.tol;
                    break;
                }
            }
        }

        let grad_sq = self.grid.grad_sq_integral(&phi)?;
        let grad_quart = self.grid.grad_quart_integral(&phi)?;
        let coupling = self.grid.volume_integral_product(self.rho, &phi)?;
        let g = self.gradient(&phi);
        let residual = self.residual_sup(&g);
        Ok(PotentialSolution {
            min_value: phi.min_value(),
            phi,
            eps: self.eps,
            iterations,
            residual,
            grad_sq,
            grad_quart,
            coupling,
            converged,
        })
    }
}

/// Integral-kernel solution of the eps = 0 problem with the same Dirichlet
/// truncation as the solver:
///
/// ```text
///   phi(r) = (1/r) int_0^r s^2 rho ds + int_r^R s rho ds - (1/R) int_0^R s^2 rho ds.
/// ```
///
/// Cumulative trapezoid quadrature; serves as an independent oracle for
/// [`solve`] at eps = 0.  For compactly supported sources the unshifted
/// potential obeys the far field r phi -> (total charge) / (4 pi).
pub fn newtonian_potential(grid: &RadialGrid, rho: &Field) -> Result<Field, GridError> {
    grid.volume_integral(rho)?; // grid-membership check
    let n = grid.intervals();
    let dr = grid.dr();
    let r = grid.nodes();
    let rv = rho.values();
    let mut inner = vec![0.0; n + 1]; // int_0^{r_i} s^2 rho ds
    for i in 1..=n {
        let a = r[i - 1] * r[i - 1] * rv[i - 1];
        let b = r[i] * r[i] * rv[i];
        inner[i] = inner[i - 1] + 0.5 * (a + b) * dr;
    }
    let mut outer = vec![0.0; n + 1]; // int_{r_i}^R s rho ds
    for i in (0..n).rev() {
        let a = r[i] * rv[i];
        let b = r[i + 1] * rv[i + 1];
        outer[i] = outer[i + 1] + 0.5 * (a + b) * dr;
    }
    let shift = inner[n] / grid.r_max();
    let mut values = vec![0.0; n + 1];
    values[0] = outer[0] - shift;
    for i in 1..n {
        values[i] = inner[i] / r[i] + outer[i] - shift;
    }
    values[n] = 0.0;
    Ok(Field::from_values(grid, values).expect("kernel potential is finite with zero boundary"))
}
