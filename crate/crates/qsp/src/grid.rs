//! Uniform radial grid on [0, R] with shell-volume quadrature.
//!
//! Profiles live on the N+1 nodes r_i = i*dr, dr = R/N.  The outer node is a
//! homogeneous Dirichlet boundary (truncation of decay at infinity, with an
//! O(1/R) far-field error for potentials) and the origin is a natural
//! boundary: no flux crosses r = 0.
//!
//! Quadrature weights are exact shell volumes, so they sum to (4/3) pi R^3 in
//! exact arithmetic and integrate smooth profiles to second order in dr.
//! Derivatives live on half nodes r_{i+1/2}; gradient integrals pair squared
//! slopes with the half-node shell areas.  The discrete Laplacian is the flux
//! divergence of those half-node slopes, which makes summation by parts an
//! identity rather than an approximation.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

/// Minimum node count accepted by [`RadialGrid::uniform`].
pub const MIN_NODES: usize = 16;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("radial extent must be positive and finite, got {value}")]
    BadExtent { value: f64 },
    #[error("radial grid needs at least {MIN_NODES} intervals, got {actual}")]
    TooFewNodes { actual: usize },
    #[error("field built on grid {field_grid} was used with grid {grid}")]
    GridMismatch { field_grid: u64, grid: u64 },
    #[error("field has {actual} values but the grid carries {expected} nodes")]
    LengthMismatch { actual: usize, expected: usize },
    #[error("outer boundary value must vanish, got {value}")]
    BoundaryNotZero { value: f64 },
    #[error("non-finite field value at node {index}")]
    NonFinite { index: usize },
    #[error("tridiagonal solve lost positivity at row {row} (pivot {pivot})")]
    SingularSystem { row: usize, pivot: f64 },
}

/// Uniform mesh of [0, R] with N intervals and precomputed quadrature data.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    id: u64,
    r_max: f64,
    n: usize,
    dr: f64,
    nodes: Vec<f64>,
    /// Shell volume owned by each node; cells are [r_i - dr/2, r_i + dr/2]
    /// clipped to [0, R], so the weights telescope to the ball volume.
    vol: Vec<f64>,
    /// Half-node weights 4 pi r_{i+1/2}^2 dr used for gradient quadrature.
    flux_vol: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(r_max: f64, n: usize) -> Result<Self, GridError> {
        if !r_max.is_finite() || r_max <= 0.0 {
            return Err(GridError::BadExtent { value: r_max });
        }
        if n < MIN_NODES {
            return Err(GridError::TooFewNodes { actual: n });
        }
        let dr = r_max / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| i as f64 * dr).collect();
        let third = 4.0 * std::f64::consts::PI / 3.0;
        let vol: Vec<f64> = (0..=n)
            .map(|i| {
                let lo = (nodes[i] - 0.5 * dr).max(0.0);
                let hi = (nodes[i] + 0.5 * dr).min(r_max);
                third * (hi * hi * hi - lo * lo * lo)
            })
            .collect();
        let flux_vol: Vec<f64> = (0..n)
            .map(|i| {
                let rh = (i as f64 + 0.5) * dr;
                4.0 * std::f64::consts::PI * rh * rh * dr
            })
            .collect();
        Ok(Self {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            r_max,
            n,
            dr,
            nodes,
            vol,
            flux_vol,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Number of intervals; the grid carries n + 1 nodes.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.n + 1
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn volumes(&self) -> &[f64] {
        &self.vol
    }

    pub fn flux_volumes(&self) -> &[f64] {
        &self.flux_vol
    }

    /// Nodal quadrature weights; they partition the ball exactly.
    pub fn volume_weights(&self) -> &[f64] {
        &self.vol
    }

    fn check(&self, f: &Field) -> Result<(), GridError> {
        if f.grid_id != self.id {
            return Err(GridError::GridMismatch {
                field_grid: f.grid_id,
                grid: self.id,
            });
        }
        Ok(())
    }

    /// Integral of the field over the ball, sum of v_i w_i.
    pub fn volume_integral(&self, f: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        Ok(dot(&f.values, &self.vol))
    }

    /// Integral of the pointwise product a*b over the ball.
    pub fn volume_integral_product(&self, a: &Field, b: &Field) -> Result<f64, GridError> {
        self.check(a)?;
        self.check(b)?;
        Ok(a.values
            .iter()
            .zip(&b.values)
            .zip(&self.vol)
            .map(|((x, y), w)| x * y * w)
            .sum())
    }

    /// Midpoint slopes (f_{i+1} - f_i)/dr on the N half nodes; exact for
    /// quadratic profiles at the half nodes.
    pub fn flux_derivative(&self, f: &Field) -> Result<Vec<f64>, GridError> {
        self.check(f)?;
        Ok(self.flux_derivative_unchecked(&f.values))
    }

    fn flux_derivative_unchecked(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| (v[i + 1] - v[i]) / self.dr).collect()
    }

    /// Integral of |grad f|^2 via half-node quadrature.
    pub fn grad_sq_integral(&self, f: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        let mut acc = 0.0;
        for i in 0..self.n {
            let d = (f.values[i + 1] - f.values[i]) / self.dr;
            acc += d * d * self.flux_vol[i];
        }
        Ok(acc)
    }

    /// Integral of |grad f|^4 via half-node quadrature.
    pub fn grad_quart_integral(&self, f: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        let mut acc = 0.0;
        for i in 0..self.n {
            let d = (f.values[i + 1] - f.values[i]) / self.dr;
            acc += d * d * d * d * self.flux_vol[i];
        }
        Ok(acc)
    }

    /// H^1 inner product: gradient pairing on half nodes plus mass pairing on
    /// nodes.
    pub fn h1_inner(&self, a: &Field, b: &Field) -> Result<f64, GridError> {
        self.check(a)?;
        self.check(b)?;
        let mut acc = 0.0;
        for i in 0..self.n {
            let da = (a.values[i + 1] - a.values[i]) / self.dr;
            let db = (b.values[i + 1] - b.values[i]) / self.dr;
            acc += da * db * self.flux_vol[i];
        }
        for i in 0..=self.n {
            acc += a.values[i] * b.values[i] * self.vol[i];
        }
        Ok(acc)
    }

    pub fn h1_norm_sq(&self, f: &Field) -> Result<f64, GridError> {
        self.h1_inner(f, f)
    }

    pub fn h1_norm(&self, f: &Field) -> Result<f64, GridError> {
        Ok(self.h1_norm_sq(f)?.sqrt())
    }

    /// L^p norm for even integer-like p; p is a float to allow direct use with
    /// model exponents.
    pub fn lp_norm(&self, f: &Field, p: f64) -> Result<f64, GridError> {
        self.check(f)?;
        let acc: f64 = f
            .values
            .iter()
            .zip(&self.vol)
            .map(|(v, w)| v.abs().powf(p) * w)
            .sum();
        Ok(acc.powf(1.0 / p))
    }

    pub fn sup_norm(&self, f: &Field) -> Result<f64, GridError> {
        self.check(f)?;
        Ok(f.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    /// Flux-divergence form of -lap acting on a profile that is tested
    /// against functions vanishing at R.  Satisfies the summation-by-parts
    /// identity sum_i (Lf)_i v_i w_i = sum_half (Df)(Dv) w_half exactly.
    pub fn neg_laplacian_apply(&self, f: &Field) -> Result<Field, GridError> {
        self.check(f)?;
        let mut out = vec![0.0; self.n + 1];
        let d = self.flux_derivative_unchecked(&f.values);
        for i in 0..self.n {
            let prev = if i == 0 {
                0.0
            } else {
                d[i - 1] * self.flux_vol[i - 1]
            };
            out[i] = (prev - d[i] * self.flux_vol[i]) / (self.dr * self.vol[i]);
        }
        Ok(Field {
            grid_id: self.id,
            values: out,
        })
    }

    /// (-lap + 1) in the same flux-divergence form as
    /// [`Self::neg_laplacian_apply`].
    pub fn helmholtz_apply(&self, f: &Field) -> Result<Field, GridError> {
        let mut out = self.neg_laplacian_apply(f)?;
        for i in 0..self.n {
            out.values[i] += f.values[i];
        }
        Ok(out)
    }

    /// Solves (-lap + 1) w = s with w(R) = 0 and a no-flux origin; this is the
    /// Riesz representative map of the H^1 pairing, used to turn weak-form
    /// derivatives into gradient fields.  Direct tridiagonal factorization,
    /// accurate to machine precision on well-scaled data.
    pub fn solve_helmholtz(&self, s: &Field) -> Result<Field, GridError> {
        self.check(s)?;
        // Row i of the weak form: flux couplings to i-1 and i+1 plus the mass
        // term; unknowns are nodes 0..n-1, node n pinned to zero.
        let n = self.n;
        let inv_dr2 = 1.0 / (self.dr * self.dr);
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n - 1];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hi = self.flux_vol[i] * inv_dr2;
            let lo = if i == 0 {
                0.0
            } else {
                self.flux_vol[i - 1] * inv_dr2
            };
            diag[i] = hi + lo + self.vol[i];
            if i + 1 < n {
                off[i] = -hi;
            }
            rhs[i] = s.values[i] * self.vol[i];
        }
        let sol = solve_spd_tridiagonal(&diag, &off, &rhs)?;
        let mut values = sol;
        values.push(0.0);
        Ok(Field {
            grid_id: self.id,
            values,
        })
    }
}

/// Thomas elimination for a symmetric positive definite tridiagonal system.
/// No pivoting; positivity of the pivots is checked and reported.
pub fn solve_spd_tridiagonal(
    diag: &[f64],
    off: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, GridError> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n, "off-diagonal length mismatch");
    assert_eq!(rhs.len(), n, "right-hand side length mismatch");
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    for i in 0..n {
        if i > 0 {
            piv = diag[i] - off[i - 1] * c[i - 1];
        }
        if !(piv.is_finite() && piv > 0.0) {
            return Err(GridError::SingularSystem { row: i, pivot: piv });
        }
        if i + 1 < n {
            c[i] = off[i] / piv;
        }
        let prev = if i > 0 { off[i - 1] * d[i - 1] } else { 0.0 };
        d[i] = (rhs[i] - prev) / piv;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Nodal values of a radial profile tied to the grid it was built on.  The
/// outer boundary value is pinned to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid_id: u64,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: &RadialGrid) -> Self {
        Self {
            grid_id: grid.id,
            values: vec![0.0; grid.n + 1],
        }
    }

    /// Samples a profile at the nodes; the outer node is forced to zero.
    pub fn from_profile(grid: &RadialGrid, f: impl Fn(f64) -> f64) -> Self {
        let mut values: Vec<f64> = grid.nodes.iter().map(|&r| f(r)).collect();
        values[grid.n] = 0.0;
        Self {
            grid_id: grid.id,
            values,
        }
    }

    /// Adopts raw nodal values, validating length, finiteness, and the
    /// vanishing boundary value.
    pub fn from_values(grid: &RadialGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n + 1 {
            return Err(GridError::LengthMismatch {
                actual: values.len(),
                expected: grid.n + 1,
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite { index: idx });
        }
        let last = values[grid.n];
        if last != 0.0 {
            return Err(GridError::BoundaryNotZero { value: last });
        }
        Ok(Self {
            grid_id: grid.id,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// self + c * other; both operands must share a grid (enforced upstream by
    /// construction, asserted here).
    pub fn axpy(&self, c: f64, other: &Field) -> Field {
        assert_eq!(self.grid_id, other.grid_id, "axpy across different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        Field {
            grid_id: self.grid_id,
            values,
        }
    }

    pub fn scale(&self, c: f64) -> Field {
        Field {
            grid_id: self.grid_id,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Pointwise map; the boundary value stays pinned at zero only if the map
    /// fixes zero, which every use in this crate does.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid_id: self.grid_id,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn mul_pointwise(&self, other: &Field) -> Field {
        assert_eq!(self.grid_id, other.grid_id, "product across different grids");
        Field {
            grid_id: self.grid_id,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// Replaces strictly negative entries by zero, returning the most negative
    /// value seen.  Used as a consistency projection after saddle searches.
    pub fn clip_negative(&mut self) -> f64 {
        let mut worst = 0.0_f64;
        for v in &mut self.values {
            if *v < 0.0 {
                worst = worst.min(*v);
                *v = 0.0;
            }
        }
        worst
    }

    #[doc(hidden)]
    pub fn set_value_for_test(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }
}

#[doc(hidden)]
impl RadialGrid {
    /// Test hook: scales one quadrature weight to exercise failure reporting
    /// in the invariant suite.
    pub fn corrupt_volume_weight(&mut self, index: usize, factor: f64) {
        self.vol[index] *= factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PI: f64 = std::f64::consts::PI;

    fn gaussian_bump(grid: &RadialGrid) -> Field {
        Field::from_profile(grid, |r| (-r * r / 2.0).exp())
    }

    /// Smooth random field: sum of a few positive-width bumps with seeded
    /// amplitudes, pinned to zero at R like every field.
    fn random_smooth_field(grid: &RadialGrid, rng: &mut ChaCha8Rng) -> Field {
        let r_max = grid.r_max();
        let mut centers = [0.0; 3];
        let mut widths = [0.0; 3];
        let mut amps = [0.0; 3];
        for k in 0..3 {
            centers[k] = rng.gen_range(0.0..0.6 * r_max);
            widths[k] = rng.gen_range(0.5..2.0);
            amps[k] = rng.gen_range(-1.0..1.0);
        }
        Field::from_profile(grid, |r| {
            (0..3)
                .map(|k| amps[k] * (-((r - centers[k]) / widths[k]).powi(2)).exp())
                .sum()
        })
    }

    #[test]
    fn rejects_bad_extent_and_too_few_nodes() {
        assert!(matches!(
            RadialGrid::uniform(-1.0, 100),
            Err(GridError::BadExtent { .. })
        ));
        assert!(matches!(
            RadialGrid::uniform(f64::NAN, 100),
            Err(GridError::BadExtent { .. })
        ));
        assert!(matches!(
            RadialGrid::uniform(10.0, 8),
            Err(GridError::TooFewNodes { actual: 8 })
        ));
    }

    #[test]
    fn weights_sum_to_ball_volume_exactly() {
        let grid = RadialGrid::uniform(20.0, 2000).unwrap();
        let total: f64 = grid.volumes().iter().sum();
        let exact = 4.0 / 3.0 * PI * 20.0_f64.powi(3);
        assert!(
            (total - exact).abs() <= 1e-12 * exact,
            "ball volume off: {total} vs {exact}"
        );
    }

    #[test]
    fn gaussian_integral_matches_closed_form() {
        let grid = RadialGrid::uniform(20.0, 4000).unwrap();
        let f = Field::from_profile(&grid, |r| (-r * r).exp());
        let val = grid.volume_integral(&f).unwrap();
        let exact = PI.powf(1.5);
        assert!(
            (val - exact).abs() <= 1e-4 * exact,
            "Gaussian integral off: {val} vs {exact}"
        );
    }

    #[test]
    fn indicator_integral_is_first_order() {
        let grid = RadialGrid::uniform(20.0, 2000).unwrap();
        let f = Field::from_profile(&grid, |r| if r < 1.0 { 1.0 } else { 0.0 });
        let val = grid.volume_integral(&f).unwrap();
        let exact = 4.0 / 3.0 * PI;
        assert!(
            (val - exact).abs() <= 5.0 * grid.dr() * exact,
            "unit ball volume off: {val} vs {exact}"
        );
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        let exact = PI.powf(1.5);
        let mut errors = Vec::new();
        for n in [200_usize, 400, 800] {
            let grid = RadialGrid::uniform(15.0, n).unwrap();
            let f = Field::from_profile(&grid, |r| (-r * r).exp());
            errors.push((grid.volume_integral(&f).unwrap() - exact).abs());
        }
        for k in 0..errors.len() - 1 {
            let order = (errors[k] / errors[k + 1]).log2();
            assert!(
                (1.8..=2.2).contains(&order),
                "empirical quadrature order {order} outside [1.8, 2.2] (errors {errors:?})"
            );
        }
    }

    #[test]
    fn h1_norm_of_gaussian_matches_closed_form() {
        let grid = RadialGrid::uniform(20.0, 4000).unwrap();
        let f = gaussian_bump(&grid);
        let grad = grid.grad_sq_integral(&f).unwrap();
        let total = grid.h1_norm_sq(&f).unwrap();
        let exact_grad = 1.5 * PI.powf(1.5);
        let exact_total = 2.5 * PI.powf(1.5);
        assert!((grad - exact_grad).abs() <= 1e-3 * exact_grad);
        assert!(
            (total - exact_total).abs() <= 1e-3 * exact_total,
            "H1 norm^2 {total} vs {exact_total}"
        );
    }

    #[test]
    fn flux_derivative_exact_on_quadratics() {
        let grid = RadialGrid::uniform(10.0, 64).unwrap();
        let mut f = Field::from_profile(&grid, |r| 3.0 * r * r - 2.0 * r);
        // keep the interior quadratic; the pinned boundary only affects the
        // last half node, which the loop below skips
        f.set_value_for_test(grid.intervals(), 3.0 * 100.0 - 2.0 * 10.0);
        let d = grid.flux_derivative(&f).unwrap();
        for i in 0..grid.intervals() {
            let rh = (i as f64 + 0.5) * grid.dr();
            let exact = 6.0 * rh - 2.0;
            assert!(
                (d[i] - exact).abs() <= 1e-10 * (1.0 + exact.abs()),
                "slope at half node {i}: {} vs {exact}",
                d[i]
            );
        }
    }

    #[test]
    fn summation_by_parts_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = RadialGrid::uniform(15.0, 800).unwrap();
        for _ in 0..5 {
            let h = random_smooth_field(&grid, &mut rng);
            let v = random_smooth_field(&grid, &mut rng);
            let dh = grid.flux_derivative(&h).unwrap();
            let dv = grid.flux_derivative(&v).unwrap();
            let weak: f64 = dh
                .iter()
                .zip(&dv)
                .zip(grid.flux_volumes())
                .map(|((a, b), w)| a * b * w)
                .sum();
            let lap_h = grid.neg_laplacian_apply(&h).unwrap();
            let strong = grid.volume_integral_product(&lap_h, &v).unwrap();
            let scale = weak.abs().max(1.0);
            assert!(
                (weak - strong).abs() <= 1e-12 * scale,
                "summation by parts violated: weak {weak} strong {strong}"
            );
        }
    }

    #[test]
    fn helmholtz_solve_inverts_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let grid = RadialGrid::uniform(15.0, 800).unwrap();
        for _ in 0..4 {
            let f = random_smooth_field(&grid, &mut rng);
            let s = grid.helmholtz_apply(&f).unwrap();
            let back = grid.solve_helmholtz(&s).unwrap();
            let mut worst = 0.0_f64;
            for i in 0..grid.node_count() {
                worst = worst.max((back.values()[i] - f.values()[i]).abs());
            }
            let scale = grid.sup_norm(&f).unwrap().max(1.0);
            assert!(
                worst <= 1e-10 * scale,
                "Helmholtz round trip error {worst} for scale {scale}"
            );
        }
    }

    #[test]
    fn helmholtz_solve_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let grid = RadialGrid::uniform(15.0, 800).unwrap();
        for _ in 0..4 {
            let s1 = random_smooth_field(&grid, &mut rng);
            let s2 = random_smooth_field(&grid, &mut rng);
            let w1 = grid.solve_helmholtz(&s1).unwrap();
            let w2 = grid.solve_helmholtz(&s2).unwrap();
            let a = grid.volume_integral_product(&w1, &s2).unwrap();
            let b = grid.volume_integral_product(&w2, &s1).unwrap();
            assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                "self-adjointness violated: {a} vs {b}"
            );
        }
    }

    #[test]
    fn helmholtz_manufactured_solution_converges() {
        // w(r) = exp(-r^2) satisfies (-lap + 1) w = (7 - 4 r^2) exp(-r^2).
        let mut errors = Vec::new();
        for n in [500_usize, 1000, 2000] {
            let grid = RadialGrid::uniform(20.0, n).unwrap();
            let s = Field::from_profile(&grid, |r| (7.0 - 4.0 * r * r) * (-r * r).exp());
            let w = grid.solve_helmholtz(&s).unwrap();
            let exact = Field::from_profile(&grid, |r| (-r * r).exp());
            let mut worst = 0.0_f64;
            for i in 0..grid.node_count() {
                worst = worst.max((w.values()[i] - exact.values()[i]).abs());
            }
            errors.push(worst);
        }
        for k in 0..errors.len() - 1 {
            let factor = errors[k] / errors[k + 1];
            assert!(
                (3.0..=5.0).contains(&factor),
                "error reduction factor {factor} outside [3, 5]: {errors:?}"
            );
        }
    }

    #[test]
    fn helmholtz_matches_h1_riesz_pairing() {
        // The solve returns the Riesz representative: <w, v>_H1 = (s, v)_vol.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let grid = RadialGrid::uniform(15.0, 800).unwrap();
        let s = random_smooth_field(&grid, &mut rng);
        let w = grid.solve_helmholtz(&s).unwrap();
        for _ in 0..5 {
            let v = random_smooth_field(&grid, &mut rng);
            let lhs = grid.h1_inner(&w, &v).unwrap();
            let rhs = grid.volume_integral_product(&s, &v).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0),
                "Riesz pairing violated: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn field_validation_catches_bad_input() {
        let grid = RadialGrid::uniform(10.0, 32).unwrap();
        let short = vec![0.0; 5];
        assert!(matches!(
            Field::from_values(&grid, short),
            Err(GridError::LengthMismatch { .. })
        ));
        let mut bad_boundary = vec![0.0; 33];
        bad_boundary[32] = 0.5;
        assert!(matches!(
            Field::from_values(&grid, bad_boundary),
            Err(GridError::BoundaryNotZero { .. })
        ));
        let mut non_finite = vec![0.0; 33];
        non_finite[3] = f64::NAN;
        assert!(matches!(
            Field::from_values(&grid, non_finite),
            Err(GridError::NonFinite { index: 3 })
        ));
        let other = RadialGrid::uniform(10.0, 32).unwrap();
        let f = Field::zeros(&other);
        assert!(matches!(
            grid.volume_integral(&f),
            Err(GridError::GridMismatch { .. })
        ));
    }
}
