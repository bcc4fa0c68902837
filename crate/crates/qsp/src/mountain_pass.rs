//! Saddle search for the truncated action.
//!
//! The minimax level is approximated in two phases.  Phase one deforms a
//! discrete path from the origin to the negative far endpoint: each iteration
//! moves the highest node downhill along the Riesz gradient with an Armijo
//! line search and locally re-spaces its neighbors, so the path level is
//! non-increasing by construction.  Phase two polishes the handed-off peak
//! node by a ray-constrained descent: the iterate is kept maximal along its
//! own scaling ray, then stepped against the gradient, which removes the one
//! unstable direction of the saddle and leaves a plain minimization in the
//! transverse directions.
//!
//! Convergence is declared at an absolute gradient tolerance.  After
//! convergence tiny negative undershoots are clipped to zero (the reaction
//! vanishes on the negative axis, so descent never rewards dips and the
//! undershoot stays at roundoff scale) and criticality is re-verified on the
//! clipped field.  If the converged point escapes the truncation ball the
//! radius is doubled and the search restarted, mirroring the free choice of
//! the truncation scale in the analysis.

use std::time::Instant;

use thiserror::Error;

use crate::energy::{EnergyError, Functional, RayPeak};
use crate::grid::{Field, RadialGrid};
use crate::model::ModelParams;
use crate::potential::{PotentialOptions, PotentialSolution};

/// Armijo slope fraction shared by both phases.
const ARMIJO_C: f64 = 1e-4;
/// Maximum step halvings per line search.
const MAX_BACKTRACKS: usize = 40;
/// Allowed level increase per path iteration (roundoff guard).
const LEVEL_SLACK: f64 = 1e-12;
/// Iteration budget of the path phase before handing off to the polish.
const PATH_PHASE_CAP: usize = 600;
/// The path phase hands off once the level improves by less than this
/// relative amount over a trailing window.
const PLATEAU_WINDOW: usize = 25;
const PLATEAU_REL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum MpaError {
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("saddle path lost its interior maximum (peak at node {index} of {nodes})")]
    PeakAtEndpoint { index: usize, nodes: usize },
}

#[derive(Debug, Clone)]
pub struct MpaOptions {
    /// Number of path segments; the path carries this many nodes plus one.
    pub path_segments: usize,
    /// Absolute H^1 tolerance on the truncated gradient.
    pub tol: f64,
    /// Total iteration budget across both phases.
    pub max_iter: usize,
    /// Truncation-radius doublings allowed when the saddle escapes the ball.
    pub max_restarts: usize,
    /// Previous critical point to continue from; skips the path phase.
    pub warm_start: Option<Field>,
    /// Options for the inner potential solves.
    pub pot: PotentialOptions,
}

impl Default for MpaOptions {
    fn default() -> Self {
        Self {
            path_segments: 31,
            tol: 1e-6,
            max_iter: 5000,
            max_restarts: 3,
            warm_start: None,
            pot: PotentialOptions::default(),
        }
    }
}

/// Non-fatal diagnostics attached to a finished search.
#[derive(Debug, Clone, PartialEq)]
pub enum MpaWarning {
    /// Level at or above ((6 - theta)/(6 theta)) S^(3/2): the compactness
    /// window of the critical term is not certified at this level.
    CompactnessThreshold { level: f64, cap: f64 },
    /// Level at or above ((theta - 2)/(2 theta)) T^2: minimizing sequences
    /// are not certified to stay inside the truncation ball.
    TruncationThreshold { level: f64, cap: f64 },
    /// The point still sits outside the truncation ball after all restarts,
    /// so it is critical for the truncated action only.
    OutsideTruncationBall { h1_norm: f64, trunc_radius: f64 },
}

impl std::fmt::Display for MpaWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MpaWarning::CompactnessThreshold { level, cap } => write!(
                f,
                "level {level:.6e} is not below the compactness cap {cap:.6e}; the critical term's compactness window is not certified"
            ),
            MpaWarning::TruncationThreshold { level, cap } => write!(
                f,
                "level {level:.6e} is not below the truncation cap {cap:.6e}; minimizing sequences are not certified to stay in the ball"
            ),
            MpaWarning::OutsideTruncationBall {
                h1_norm,
                trunc_radius,
            } => write!(
                f,
                "solution norm {h1_norm:.6e} exceeds the truncation radius {trunc_radius:.6e}; the point is critical for the truncated action only"
            ),
        }
    }
}

/// Discrete path from the origin to the negative endpoint together with its
/// node values and current peak.
#[derive(Debug, Clone)]
pub struct PathState {
    nodes: Vec<Field>,
    values: Vec<f64>,
    max_index: usize,
}

impl PathState {
    pub fn nodes(&self) -> &[Field] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_index(&self) -> usize {
        self.max_index
    }

    pub fn level_estimate(&self) -> f64 {
        self.values[self.max_index]
    }

    fn refresh_max(&mut self) {
        let mut best = 0usize;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        self.max_index = best;
    }
}

/// Outcome of one path-deformation iteration.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    /// False when the line search could not improve the peak node (a stall,
    /// not convergence).
    pub moved: bool,
    /// H^1 norm of the truncated gradient at the peak node before the move.
    pub grad_at_peak: f64,
}

/// Result of a saddle search.  Returned even on non-convergence, flagged.
#[derive(Debug, Clone)]
pub struct CriticalPoint {
    pub u: Field,
    /// Truncated action at u; equals the plain action when promoted.
    pub level: f64,
    /// H^1 norm of the truncated Riesz gradient at u.
    pub grad_norm: f64,
    pub h1_norm: f64,
    /// Most negative nodal value seen before the final clip.
    pub min_u: f64,
    /// Potential at the returned u.
    pub phi: PotentialSolution,
    pub converged: bool,
    pub iterations: usize,
    /// Truncation radius in force at the end (after any doubling restarts).
    pub trunc_radius_used: f64,
    /// True when the point sits inside the truncation ball, where the
    /// truncated and plain actions coincide.
    pub promoted: bool,
    /// H^1 norm of the plain-action gradient at u.
    pub untruncated_grad_norm: f64,
    /// Level estimate at the hand-off from the path phase (or the warm-start
    /// ray peak).
    pub path_level: f64,
    /// Relative gap between the level and the superquadraticity
    /// decomposition; meaningful at promoted critical points.
    pub decomposition_gap: f64,
    pub warnings: Vec<MpaWarning>,
    /// Wall time of the search.
    pub seconds: f64,
}

/// Straight-segment initial path t -> t * e_T sampled at equal increments.
pub fn init_path(fun: &Functional, segments: usize) -> Result<PathState, MpaError> {
    let endpoint = fun.negative_endpoint()?;
    let mut nodes = Vec::with_capacity(segments + 1);
    let mut values = Vec::with_capacity(segments + 1);
    for k in 0..=segments {
        let node = endpoint.scale(k as f64 / segments as f64);
        values.push(fun.energy_truncated(&node)?.total);
        nodes.push(node);
    }
    let mut state = PathState {
        nodes,
        values,
        max_index: 0,
    };
    state.refresh_max();
    if state.max_index == 0 || state.max_index == segments {
        return Err(MpaError::PeakAtEndpoint {
            index: state.max_index,
            nodes: segments + 1,
        });
    }
    Ok(state)
}

/// One deformation iteration: Armijo descent of the peak node along the
/// negative truncated gradient, then a guarded local re-spacing of its
/// neighbors.  Endpoints are never touched and the level cannot increase
/// beyond a roundoff allowance.
pub fn mpa_step(fun: &Functional, state: &mut PathState) -> Result<StepReport, MpaError> {
    let k = state.max_index;
    let last = state.nodes.len() - 1;
    if k == 0 || k == last {
        return Err(MpaError::PeakAtEndpoint {
            index: k,
            nodes: state.nodes.len(),
        });
    }
    let grid = fun.grid();
    let peak = &state.nodes[k];
    let g = fun.gradient_truncated(peak)?;
    let gn_sq = grid.h1_norm_sq(&g).map_err(EnergyError::from)?;
    let gn = gn_sq.sqrt();
    let val = state.values[k];
    let noise = grid.intervals() as f64 * f64::EPSILON * (1.0 + val.abs());

    // cap the displacement by a fraction of the local node spacing: an
    // unbounded step lets the peak jump across the ridge into the negative
    // valley, collapsing the discrete path through the barrier
    let spacing = {
        let left = state.nodes[k].axpy(-1.0, &state.nodes[k - 1]);
        let right = state.nodes[k + 1].axpy(-1.0, &state.nodes[k]);
        let l = grid.h1_norm(&left).map_err(EnergyError::from)?;
        let r = grid.h1_norm(&right).map_err(EnergyError::from)?;
        l.min(r)
    };
    let mut moved = false;
    let mut step = if gn > 0.0 {
        (0.5 * spacing / gn).min(1.0)
    } else {
        1.0
    };
    for _ in 0..=MAX_BACKTRACKS {
        let cand = peak.axpy(-step, &g);
        let cand_val = fun.energy_truncated(&cand)?.total;
        if cand_val.is_finite() && cand_val <= val - ARMIJO_C * step * gn_sq + noise {
            state.nodes[k] = cand;
            state.values[k] = cand_val;
            moved = true;
            break;
        }
        step *= 0.5;
    }

    if moved {
        let level = state.level_estimate().max(state.values[k]);
        // re-space the moved node's neighbors as local midpoints, keeping any
        // candidate that would lift the path above the current level
        for j in [k - 1, k + 1] {
            if j == 0 || j == last {
                continue;
            }
            let mid = state.nodes[j - 1].axpy(1.0, &state.nodes[j + 1]).scale(0.5);
            let mid_val = fun.energy_truncated(&mid)?.total;
            if mid_val <= level + LEVEL_SLACK {
                state.nodes[j] = mid;
                state.values[j] = mid_val;
            }
        }
        state.refresh_max();
    }

    Ok(StepReport {
        moved,
        grad_at_peak: gn,
    })
}

/// Ray peak through `w` bracketed by a local walk around `guess` and refined
/// to the given relative width.  Falls back to the global scan only when the
/// walk fails to enclose a maximum.
fn repeak(
    fun: &Functional,
    w: &Field,
    guess: f64,
    rel_tol: f64,
) -> Result<RayPeak, EnergyError> {
    let mut lo = guess * 0.8;
    let mut mid = guess;
    let mut hi = guess * 1.25;
    let mut f_lo = fun.ray_value(w, lo)?;
    let mut f_mid = fun.ray_value(w, mid)?;
    let mut f_hi = fun.ray_value(w, hi)?;
    let mut enclosed = false;
    for _ in 0..200 {
        if f_mid >= f_lo && f_mid >= f_hi {
            enclosed = true;
            break;
        }
        if f_lo > f_mid {
            hi = mid;
            f_hi = f_mid;
            mid = lo;
            f_mid = f_lo;
            lo *= 0.8;
            f_lo = fun.ray_value(w, lo)?;
        } else {
            lo = mid;
            f_lo = f_mid;
            mid = hi;
            f_mid = f_hi;
            hi *= 1.25;
            f_hi = fun.ray_value(w, hi)?;
        }
    }
    if !enclosed {
        return fun.ray_peak(w);
    }
    fun.refine_peak(w, lo, hi, rel_tol)
}

struct Attempt {
    u: Field,
    converged: bool,
    iterations: usize,
    path_level: f64,
}

/// Peak-polish phase: keep the iterate ray-maximal, descend the gradient,
/// accept on the ray-peak value with an Armijo rule and a roundoff slack.
fn polish(
    fun: &Functional,
    start: &Field,
    opts: &MpaOptions,
    mut iterations: usize,
) -> Result<Attempt, MpaError> {
    let grid = fun.grid();
    let peak = repeak(fun, start, 1.0, 1e-4)?;
    let path_level = peak.level;
    let mut u = start.scale(peak.scale);
    let mut level = peak.level;
    let mut alpha = 1.0f64;

    let converged = loop {
        let g = fun.gradient_truncated(&u)?;
        let gn_sq = grid.h1_norm_sq(&g).map_err(EnergyError::from)?;
        let gn = gn_sq.sqrt();
        if gn <= opts.tol {
            break level > 0.0;
        }
        if iterations >= opts.max_iter {
            break false;
        }
        // tighten the ray re-peak as the gradient shrinks so the residual
        // ray component never dominates the measured norm
        let rel_tol = (1e-2 * gn).clamp(1e-9, 1e-4);
        let noise = grid.intervals() as f64 * f64::EPSILON * (1.0 + level.abs());
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let w = u.axpy(-alpha, &g);
            let trial = repeak(fun, &w, 1.0, rel_tol)?;
            if trial.level.is_finite()
                && trial.level <= level - ARMIJO_C * alpha * gn_sq + noise
            {
                accepted = Some((w.scale(trial.scale), trial.level));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((next, next_level)) => {
                u = next;
                level = next_level;
                iterations += 1;
                alpha = (alpha * 1.5).min(1.0);
            }
            None => {
                // line search exhausted: the peak value is at its floor;
                // report whatever the gradient says
                break gn <= opts.tol && level > 0.0;
            }
        }
    };

    Ok(Attempt {
        u,
        converged,
        iterations,
        path_level,
    })
}

fn attempt(fun: &Functional, opts: &MpaOptions) -> Result<Attempt, MpaError> {
    if let Some(warm) = &opts.warm_start {
        let out = polish(fun, warm, opts, 0)?;
        if out.converged {
            return Ok(out);
        }
        // fall through to a cold run when the warm continuation stalls
    }

    let mut state = init_path(fun, opts.path_segments)?;
    let mut iterations = 0usize;
    let mut history = vec![state.level_estimate()];
    let mut handoff = state.nodes[state.max_index].clone();
    let phase_cap = PATH_PHASE_CAP.min(opts.max_iter);
    while iterations < phase_cap {
        let k = state.max_index;
        // a peak on an endpoint or at the rim floor means the discrete path
        // has slipped through the barrier; the ray re-peak in the polish
        // phase recovers the level from the last healthy node
        if k == 0 || k == state.nodes.len() - 1 || state.level_estimate() <= 1e-10 {
            break;
        }
        handoff = state.nodes[k].clone();
        let report = mpa_step(fun, &mut state)?;
        iterations += 1;
        if !report.moved {
            break;
        }
        history.push(state.level_estimate());
        if history.len() > PLATEAU_WINDOW {
            let then = history[history.len() - 1 - PLATEAU_WINDOW];
            let now = *history.last().expect("nonempty history");
            if then - now <= PLATEAU_REL * now.abs().max(1e-30) {
                break;
            }
        }
    }
    polish(fun, &handoff, opts, iterations)
}

/// Full saddle search: path deformation, ray polish, truncation-radius
/// restarts, nonnegativity clip, and threshold diagnostics.
pub fn run(
    grid: &RadialGrid,
    params: &ModelParams,
    opts: &MpaOptions,
) -> Result<CriticalPoint, MpaError> {
    let clock = Instant::now();
    let mut radius = params.trunc_radius;
    let mut restarts = 0usize;
    let (fun, outcome) = loop {
        let attempt_params = ModelParams {
            trunc_radius: radius,
            ..params.clone()
        };
        let fun = Functional::with_options(grid, attempt_params, opts.pot)?;
        let outcome = attempt(&fun, opts)?;
        let h1 = grid.h1_norm(&outcome.u).map_err(EnergyError::from)?;
        if outcome.converged && h1 > radius && restarts < opts.max_restarts {
            restarts += 1;
            radius *= 2.0;
            continue;
        }
        break (fun, outcome);
    };

    let mut u = outcome.u;
    let min_u = u.min_value().min(0.0);
    u.clip_negative();

    // re-verify criticality on the clipped field
    let g = fun.gradient_truncated(&u)?;
    let grad_norm = grid.h1_norm(&g).map_err(EnergyError::from)?;
    let level = fun.energy_truncated(&u)?.total;
    let h1_norm = grid.h1_norm(&u).map_err(EnergyError::from)?;
    let converged = outcome.converged && grad_norm <= opts.tol && level > 0.0;

    let phi = fun.potential(&u)?;
    let g_plain = fun.gradient(&u)?;
    let untruncated_grad_norm = grid.h1_norm(&g_plain).map_err(EnergyError::from)?;
    let decomposition = fun.level_decomposition(&u)?;
    let plain_level = fun.energy(&u)?.total;
    let decomposition_gap =
        (plain_level - decomposition.sum).abs() / plain_level.abs().max(1.0);

    let mut warnings = Vec::new();
    let promoted = h1_norm <= radius;
    if !promoted {
        warnings.push(MpaWarning::OutsideTruncationBall {
            h1_norm,
            trunc_radius: radius,
        });
    }
    let thresholds = fun.level_thresholds();
    if level >= thresholds.compactness_cap {
        warnings.push(MpaWarning::CompactnessThreshold {
            level,
            cap: thresholds.compactness_cap,
        });
    }
    if level >= thresholds.truncation_cap {
        warnings.push(MpaWarning::TruncationThreshold {
            level,
            cap: thresholds.truncation_cap,
        });
    }

    Ok(CriticalPoint {
        u,
        level,
        grad_norm,
        h1_norm,
        min_u,
        phi,
        converged,
        iterations: outcome.iterations,
        trunc_radius_used: radius,
        promoted,
        untruncated_grad_norm,
        path_level: outcome.path_level,
        decomposition_gap,
        warnings,
        seconds: clock.elapsed().as_secs_f64(),
    })
}
