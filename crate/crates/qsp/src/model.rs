//! Model data: reaction terms, norm truncation, and the supercritical cap.
//!
//! The reaction f(x, t) is a sum of coefficient-weighted powers
//! sum_i C_i(x) t_+^(q_i - 1) with exponents q_i strictly between 4 and 6;
//! the full right-hand side adds the critical power |t|^4 t.  A run with a
//! supercritical cap replaces the critical power by |t|^(p-2) t below the
//! cap height K and by the capped growth K^(p-6) |t|^4 t above it, which
//! restores subcritical growth at infinity while leaving the equation
//! untouched wherever the profile stays below K.
//!
//! The truncation weight h(s) = psi(s / T^2) multiplies the nonlocal energy;
//! psi is one on [0, 1], a descending cubic on [1, 2], and zero beyond, so
//! functionals with and without truncation agree exactly on the ball of
//! H^1 radius T.

use thiserror::Error;

use crate::grid::{Field, RadialGrid};

pub const DEFAULT_LAMBDA: f64 = 30.0;
pub const DEFAULT_EPS: f64 = 0.5;
pub const DEFAULT_THETA: f64 = 5.0;
pub const DEFAULT_TRUNC_RADIUS: f64 = 3.0;
pub const CRITICAL_EXPONENT: f64 = 6.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model hypotheses failed: {summary}")]
    Invalid { summary: String },
    #[error("coefficient profile of term {term} has {actual} values, grid carries {expected}")]
    ProfileGridMismatch {
        term: usize,
        actual: usize,
        expected: usize,
    },
}

/// Spatial coefficient of one reaction term: either a constant or a nodal
/// profile on the run grid.
#[derive(Debug, Clone)]
pub enum Coefficient {
    Constant(f64),
    Profile(Field),
}

impl Coefficient {
    pub fn at(&self, node: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Profile(f) => f.values()[node],
        }
    }

    pub fn max_value(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Profile(f) => f.max_value(),
        }
    }

    pub fn min_value(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Profile(f) => f.min_value(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReactionTerm {
    pub coeff: Coefficient,
    /// Power of the primitive: the term contributes C(x) t_+^(exponent - 1)
    /// to the reaction and C(x) t_+^exponent / exponent to its primitive.
    pub exponent: f64,
}

/// Supercritical growth data: exponent p > 6 and cap height K.
#[derive(Debug, Clone, Copy)]
pub struct SupercriticalCap {
    pub exponent: f64,
    pub height: f64,
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Coupling in front of the subcritical reaction.
    pub lambda: f64,
    /// Quasilinear strength; enters the potential equation as eps^4.
    pub eps: f64,
    /// Superquadraticity exponent used by the level decomposition; must sit
    /// in (4, min_i q_i].
    pub theta: f64,
    /// H^1 radius T of the truncation; the truncated and plain functionals
    /// agree on the ball of radius T.
    pub trunc_radius: f64,
    pub terms: Vec<ReactionTerm>,
    pub cap: Option<SupercriticalCap>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            eps: DEFAULT_EPS,
            theta: DEFAULT_THETA,
            trunc_radius: DEFAULT_TRUNC_RADIUS,
            terms: vec![ReactionTerm {
                coeff: Coefficient::Constant(1.0),
                exponent: 5.0,
            }],
            cap: None,
        }
    }
}

/// Cutoff psi: one on [0, 1], the descending cubic 1 - 3 s^2 + 2 s^3 in the
/// shifted variable s = x - 1 on [1, 2], zero beyond.  C^1 with slope bounded
/// by 1.5 in magnitude.
pub fn cutoff(x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else if x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        1.0 - 3.0 * s * s + 2.0 * s * s * s
    }
}

pub fn cutoff_slope(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        0.0
    } else {
        let s = x - 1.0;
        -6.0 * s + 6.0 * s * s
    }
}

impl ModelParams {
    pub fn eps_fourth(&self) -> f64 {
        self.eps.powi(4)
    }

    /// Reaction f(x, t) at a node: zero for t <= 0.
    pub fn reaction(&self, node: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|term| term.coeff.at(node) * t.powf(term.exponent - 1.0))
            .sum()
    }

    /// Primitive F(x, t) of the reaction in t.
    pub fn reaction_primitive(&self, node: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.terms
            .iter()
            .map(|term| term.coeff.at(node) * t.powf(term.exponent) / term.exponent)
            .sum()
    }

    /// Full right-hand side density: lambda f plus the critical power, or the
    /// capped variant when a supercritical cap is set.
    pub fn rhs_reaction(&self, node: usize, t: f64) -> f64 {
        let base = self.lambda * self.reaction(node, t);
        match self.cap {
            None => base + t.abs().powi(4) * t,
            Some(cap) => {
                if t.abs() <= cap.height {
                    base + t.abs().powf(cap.exponent - 2.0) * t
                } else {
                    base + cap.height.powf(cap.exponent - CRITICAL_EXPONENT) * t.abs().powi(4) * t
                }
            }
        }
    }

    /// Primitive of [`Self::rhs_reaction`] in t, vanishing at t = 0.
    pub fn rhs_primitive(&self, node: usize, t: f64) -> f64 {
        self.lambda * self.reaction_primitive(node, t) + self.power_primitive(t)
    }

    /// Coupling-free part of the primitive (the critical or capped power
    /// alone).  The negative-endpoint scan uses this as an upper bound on the
    /// truncated energy that holds for every coupling and every eps.
    pub fn power_primitive(&self, t: f64) -> f64 {
        let a = t.abs();
        match self.cap {
            None => a.powi(6) / 6.0,
            Some(cap) => {
                if a <= cap.height {
                    a.powf(cap.exponent) / cap.exponent
                } else {
                    let k = cap.height;
                    k.powf(cap.exponent) / cap.exponent
                        + k.powf(cap.exponent - CRITICAL_EXPONENT) * (a.powi(6) - k.powi(6)) / 6.0
                }
            }
        }
    }

    /// Truncation weight h(s) applied to the nonlocal energy at H^1 norm
    /// squared s.
    pub fn truncation_weight(&self, h1_sq: f64) -> f64 {
        cutoff(h1_sq / (self.trunc_radius * self.trunc_radius))
    }

    /// Chain factor (2 / T^2) psi'(s / T^2); multiplies the nonlocal energy in
    /// the H^1 part of the truncated gradient.
    pub fn truncation_slope_factor(&self, h1_sq: f64) -> f64 {
        let t_sq = self.trunc_radius * self.trunc_radius;
        2.0 / t_sq * cutoff_slope(h1_sq / t_sq)
    }

    pub fn min_exponent(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.exponent)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_exponent(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.exponent)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Verifies that every coefficient profile matches the run grid.
    pub fn check_profiles(&self, grid: &RadialGrid) -> Result<(), ModelError> {
        for (i, term) in self.terms.iter().enumerate() {
            if let Coefficient::Profile(f) = &term.coeff {
                if f.values().len() != grid.node_count() {
                    return Err(ModelError::ProfileGridMismatch {
                        term: i,
                        actual: f.values().len(),
                        expected: grid.node_count(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Runs every structural and growth hypothesis, returning one pass/fail
    /// record per hypothesis.  Never aborts early: a report always covers the
    /// full list so failures can be itemized.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let mut push = |name: &'static str, passed: bool, detail: String| {
            checks.push(HypothesisCheck {
                name,
                passed,
                detail,
            });
        };

        push(
            "coupling-positive",
            self.lambda.is_finite() && self.lambda > 0.0,
            format!("lambda = {}", self.lambda),
        );
        push(
            "eps-nonnegative",
            self.eps.is_finite() && self.eps >= 0.0,
            format!("eps = {}", self.eps),
        );
        push(
            "truncation-radius-positive",
            self.trunc_radius.is_finite() && self.trunc_radius > 0.0,
            format!("T = {}", self.trunc_radius),
        );
        let min_q = self.min_exponent();
        let max_q = self.max_exponent();
        push(
            "exponent-window",
            !self.terms.is_empty()
                && self.theta > 4.0
                && self.theta <= min_q
                && min_q > 4.0
                && max_q < CRITICAL_EXPONENT,
            format!(
                "theta = {}, exponents in [{min_q}, {max_q}], need 4 < theta <= min q and max q < 6",
                self.theta
            ),
        );
        let coeffs_ok = self.terms.iter().all(|t| {
            t.coeff.min_value() >= 0.0
                && t.coeff.max_value().is_finite()
                && t.coeff.min_value().is_finite()
        });
        push(
            "coefficients-nonnegative",
            coeffs_ok,
            format!(
                "per-term minima {:?}",
                self.terms
                    .iter()
                    .map(|t| t.coeff.min_value())
                    .collect::<Vec<_>>()
            ),
        );
        if let Some(cap) = self.cap {
            push(
                "cap-window",
                cap.exponent > CRITICAL_EXPONENT && cap.height > 0.0 && cap.height.is_finite(),
                format!("p = {}, K = {}", cap.exponent, cap.height),
            );
        }

        // Growth spot checks evaluate at the node carrying the largest total
        // coefficient so profile terms are exercised at full strength.
        let node = self.strongest_node();
        let coeff_scale = 1.0
            + self
                .terms
                .iter()
                .map(|t| t.coeff.max_value().abs())
                .sum::<f64>();

        let mut near_zero = 0.0_f64;
        for k in 0..60 {
            let t = 1e-8 * 10.0_f64.powf(k as f64 * 5.0 / 59.0).min(1e5);
            let t = t.min(1e-3);
            near_zero = near_zero.max(self.reaction(node, t) / t);
        }
        push(
            "reaction-vanishes-at-zero",
            near_zero <= 1e-5 * coeff_scale,
            format!("max f(t)/t on (0, 1e-3] = {near_zero:e}"),
        );

        let q_chk = (max_q + CRITICAL_EXPONENT) / 2.0;
        let ratio_lo = self.reaction(node, 1.0) / 1.0_f64.powf(q_chk - 1.0);
        let ratio_hi = self.reaction(node, 1e6) / 1e6_f64.powf(q_chk - 1.0);
        push(
            "reaction-subcritical-growth",
            ratio_hi <= 1e-2 * (ratio_lo + 1.0),
            format!("f(t)/t^(q-1) with q = {q_chk}: {ratio_lo:e} at t=1, {ratio_hi:e} at t=1e6"),
        );

        let mut ar_worst = f64::NEG_INFINITY;
        for k in 1..=200 {
            let t = 50.0 * k as f64 / 200.0;
            let gap = self.theta * self.reaction_primitive(node, t) - t * self.reaction(node, t);
            ar_worst = ar_worst.max(gap / (1.0 + (t * self.reaction(node, t)).abs()));
        }
        push(
            "superquadratic-primitive",
            ar_worst <= 1e-12,
            format!("max (theta F - t f) / (1 + |t f|) = {ar_worst:e}"),
        );

        if self.cap.is_some() {
            let mut cap_ar_worst = f64::NEG_INFINITY;
            let mut growth_worst = f64::NEG_INFINITY;
            let cap = self.cap.unwrap();
            for k in 1..=300 {
                let t = 3.0 * cap.height * k as f64 / 300.0;
                let g = self.rhs_reaction(node, t);
                let big_g = self.rhs_primitive(node, t);
                cap_ar_worst =
                    cap_ar_worst.max((self.theta * big_g - t * g) / (1.0 + (t * g).abs()));
                if t >= cap.height {
                    let bound = self.lambda * self.reaction(node, t)
                        + cap.height.powf(cap.exponent - CRITICAL_EXPONENT)
                            * t.powf(CRITICAL_EXPONENT - 1.0);
                    growth_worst = growth_worst.max((g - bound) / (1.0 + bound.abs()));
                }
            }
            push(
                "cap-superquadratic",
                cap_ar_worst <= 1e-12,
                format!("max (theta G - t g) / (1 + |t g|) = {cap_ar_worst:e}"),
            );
            push(
                "cap-growth-bound",
                growth_worst <= 1e-12,
                format!("max excess over capped growth = {growth_worst:e}"),
            );
        }

        ValidationReport { checks }
    }

    fn strongest_node(&self) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for term in &self.terms {
            if let Coefficient::Profile(f) = &term.coeff {
                for (i, v) in f.values().iter().enumerate() {
                    if *v > best_val {
                        best_val = *v;
                        best = i;
                    }
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_names(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect()
    }

    pub fn into_result(self) -> Result<(), ModelError> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(ModelError::Invalid {
                summary: self.failed_names().join("; "),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::RadialGrid;

    #[test]
    fn cutoff_values_and_slope_bound() {
        assert_eq!(cutoff(0.0), 1.0);
        assert_eq!(cutoff(1.0), 1.0);
        assert_eq!(cutoff(1.5), 0.5);
        assert_eq!(cutoff(2.0), 0.0);
        assert_eq!(cutoff(5.0), 0.0);
        let mut max_slope = 0.0_f64;
        for k in 0..=4000 {
            let x = 0.5 + 2.0 * k as f64 / 4000.0;
            max_slope = max_slope.max(cutoff_slope(x).abs());
            assert!(cutoff_slope(x) <= 0.0, "cutoff must be nonincreasing");
        }
        assert!((max_slope - 1.5).abs() <= 1e-6, "peak slope {max_slope}");
        assert!(max_slope <= 2.0);
    }

    #[test]
    fn cutoff_is_c1_at_the_joints() {
        let h = 1e-6;
        for x in [1.0, 2.0] {
            let fd = (cutoff(x + h) - cutoff(x - h)) / (2.0 * h);
            assert!(fd.abs() <= 1e-5, "slope at joint {x} is {fd}");
        }
    }

    #[test]
    fn reaction_power_example() {
        let m = ModelParams::default();
        assert!((m.reaction(0, 2.0) - 16.0).abs() <= 1e-12);
        assert!((m.reaction_primitive(0, 2.0) - 32.0 / 5.0).abs() <= 1e-12);
        assert_eq!(m.reaction(0, -3.0), 0.0);
        assert_eq!(m.reaction_primitive(0, -3.0), 0.0);
    }

    #[test]
    fn capped_reaction_examples() {
        let m = ModelParams {
            lambda: 1.0,
            cap: Some(SupercriticalCap {
                exponent: 7.0,
                height: 1.0,
            }),
            ..ModelParams::default()
        };
        // below the cap: f + t^(p-1) = 0.5^4 + 0.5^6
        assert!((m.rhs_reaction(0, 0.5) - 0.078125).abs() <= 1e-14);
        // above the cap: 16 lambda + K^(p-6) 2^5
        assert!((m.rhs_reaction(0, 2.0) - 48.0).abs() <= 1e-12);
        let m2 = ModelParams { lambda: 3.0, ..m };
        assert!((m2.rhs_reaction(0, 2.0) - (16.0 * 3.0 + 32.0)).abs() <= 1e-12);
    }

    #[test]
    fn capped_reaction_is_continuous_at_the_cap() {
        let m = ModelParams {
            cap: Some(SupercriticalCap {
                exponent: 7.0,
                height: 1.3,
            }),
            ..ModelParams::default()
        };
        let below = m.rhs_reaction(0, 1.3 - 1e-9);
        let above = m.rhs_reaction(0, 1.3 + 1e-9);
        assert!(
            (below - above).abs() <= 1e-6 * below.abs(),
            "jump at cap: {below} vs {above}"
        );
        let pb = m.rhs_primitive(0, 1.3 - 1e-9);
        let pa = m.rhs_primitive(0, 1.3 + 1e-9);
        assert!((pb - pa).abs() <= 1e-6 * pb.abs());
    }

    #[test]
    fn primitives_match_derivatives() {
        let m = ModelParams {
            cap: Some(SupercriticalCap {
                exponent: 7.0,
                height: 1.0,
            }),
            ..ModelParams::default()
        };
        let h = 1e-6;
        for &t in &[0.3, 0.9, 1.5, 2.5, -0.7, -1.8] {
            let fd = (m.rhs_primitive(0, t + h) - m.rhs_primitive(0, t - h)) / (2.0 * h);
            let g = m.rhs_reaction(0, t);
            assert!(
                (fd - g).abs() <= 1e-6 * (1.0 + g.abs()),
                "primitive mismatch at t = {t}: {fd} vs {g}"
            );
        }
        let plain = ModelParams::default();
        for &t in &[0.4, 1.1, 2.2] {
            let fd = (plain.rhs_primitive(0, t + h) - plain.rhs_primitive(0, t - h)) / (2.0 * h);
            let g = plain.rhs_reaction(0, t);
            assert!((fd - g).abs() <= 1e-6 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn truncation_weight_matches_cutoff_scaling() {
        let m = ModelParams::default(); // T = 3
        assert_eq!(m.truncation_weight(4.0), 1.0); // s = 4/9 < 1
        assert_eq!(m.truncation_weight(9.0), 1.0);
        assert_eq!(m.truncation_weight(13.5), 0.5); // s = 1.5
        assert_eq!(m.truncation_weight(18.0), 0.0);
        assert_eq!(m.truncation_slope_factor(4.0), 0.0);
        assert!(m.truncation_slope_factor(13.5) < 0.0);
    }

    #[test]
    fn default_model_validates() {
        let report = ModelParams::default().validate();
        assert!(report.is_ok(), "failures: {:?}", report.failed_names());
    }

    #[test]
    fn capped_model_validates() {
        let m = ModelParams {
            cap: Some(SupercriticalCap {
                exponent: 7.0,
                height: 1.0,
            }),
            ..ModelParams::default()
        };
        let report = m.validate();
        assert!(report.is_ok(), "failures: {:?}", report.failed_names());
    }

    #[test]
    fn validation_flags_bad_parameters() {
        let m = ModelParams {
            theta: 3.0,
            ..ModelParams::default()
        };
        let report = m.validate();
        assert!(!report.is_ok());
        assert!(report
            .failed_names()
            .iter()
            .any(|n| n.contains("exponent-window")));

        let m = ModelParams {
            terms: vec![ReactionTerm {
                coeff: Coefficient::Constant(-1.0),
                exponent: 5.0,
            }],
            theta: 5.0,
            ..ModelParams::default()
        };
        assert!(!m.validate().is_ok());

        // a quadratic-growth term violates vanishing at zero
        let m = ModelParams {
            terms: vec![ReactionTerm {
                coeff: Coefficient::Constant(1.0),
                exponent: 2.0,
            }],
            theta: 4.5,
            ..ModelParams::default()
        };
        let report = m.validate();
        assert!(!report.is_ok());

        let m = ModelParams {
            cap: Some(SupercriticalCap {
                exponent: 5.0,
                height: 1.0,
            }),
            ..ModelParams::default()
        };
        assert!(m
            .validate()
            .failed_names()
            .iter()
            .any(|n| n.contains("cap-window")));
    }

    #[test]
    fn profile_coefficients_are_supported() {
        let grid = RadialGrid::uniform(10.0, 64).unwrap();
        let profile = Field::from_profile(&grid, |r| 2.0 / (1.0 + r * r));
        let m = ModelParams {
            terms: vec![ReactionTerm {
                coeff: Coefficient::Profile(profile),
                exponent: 5.0,
            }],
            ..ModelParams::default()
        };
        assert!(m.validate().is_ok());
        assert!(m.check_profiles(&grid).is_ok());
        let other = RadialGrid::uniform(10.0, 128).unwrap();
        assert!(matches!(
            m.check_profiles(&other),
            Err(ModelError::ProfileGridMismatch { .. })
        ));
        // reaction uses the nodal coefficient
        let c0 = 2.0;
        assert!((m.reaction(0, 2.0) - c0 * 16.0).abs() <= 1e-12);
    }

    #[test]
    fn superquadratic_gap_is_tight_at_theta_equal_q() {
        // with theta = q the primitive inequality holds with equality
        let m = ModelParams::default();
        for &t in &[0.5, 1.0, 3.0] {
            let gap = m.theta * m.reaction_primitive(0, t) - t * m.reaction(0, t);
            assert!(gap.abs() <= 1e-12 * (1.0 + t * m.reaction(0, t)));
        }
    }
}
