//! Experiment drivers.
//!
//! Each driver owns one reproducible experiment: it builds the grid and
//! model from a [`RunConfig`], runs the required solves, and persists a
//! self-describing set of artifacts into the output directory: the resolved
//! configuration, a CSV of scalar diagnostics, one field dump per solution,
//! and (optionally) an SVG chart.  Drivers are strictly sequential and use
//! no randomness, so identical configurations reproduce identical numbers;
//! only the wall-clock `seconds` column varies between runs.
//!
//! [`verify_sweep`] closes the loop: it reads a sweep's CSV and field dumps
//! back and recomputes every stored diagnostic from the persisted solution,
//! flagging any disagreement.  Verification reconstructs the functional at
//! the configured truncation radius, so rows produced by a search that had
//! to enlarge its truncation ball (and left the enlarged ball) would be
//! flagged rather than silently accepted.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::config::{ConfigError, Experiment, RunConfig};
use crate::energy::{EnergyError, Functional};
use crate::grid::{Field, GridError, RadialGrid};
use crate::model::ModelParams;
use crate::mountain_pass::{self, CriticalPoint, MpaError};
use crate::potential::{self, PotentialError, PotentialSolution};
use crate::report::{
    self, ReportError, SvgChart, SvgSeries, SweepRecord,
};

/// Relative tolerance for re-verification of persisted diagnostics.
pub const VERIFY_REL_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("saddle search at parameter {param} failed: {source}")]
    Saddle {
        param: f64,
        #[source]
        source: MpaError,
    },
    #[error("the supercritical scan needs cap = exponent:height in the model section")]
    CapRequired,
    #[error("source dump has negative entries (min {min}); the potential equation expects a nonnegative source")]
    NegativeSource { min: f64 },
    #[error(
        "row {row} of {path}: stored {field} = {stored:e} but recomputation gives {recomputed:e} (rel {rel:.3e} > {tol:.1e})"
    )]
    VerifyMismatch {
        path: PathBuf,
        row: usize,
        field: &'static str,
        stored: f64,
        recomputed: f64,
        rel: f64,
        tol: f64,
    },
}

/// Which sweep produced an artifact directory; fixes file names and how the
/// `param` column maps back onto model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Lambda,
    Epsilon,
    Supercritical,
}

impl SweepKind {
    pub fn csv_name(self) -> &'static str {
        match self {
            SweepKind::Lambda => "lambda_sweep.csv",
            SweepKind::Epsilon => "epsilon_sweep.csv",
            SweepKind::Supercritical => "supercritical.csv",
        }
    }

    fn svg_name(self) -> &'static str {
        match self {
            SweepKind::Lambda => "lambda_sweep.svg",
            SweepKind::Epsilon => "epsilon_sweep.svg",
            SweepKind::Supercritical => "supercritical.svg",
        }
    }

    fn apply(self, base: &ModelParams, param: f64) -> ModelParams {
        let mut p = base.clone();
        match self {
            SweepKind::Lambda | SweepKind::Supercritical => p.lambda = param,
            SweepKind::Epsilon => p.eps = param,
        }
        p
    }
}

fn dump_name(row: usize) -> String {
    format!("u_row_{row:02}.txt")
}

fn prepare_dir(cfg: &RunConfig, experiment: Experiment) -> Result<PathBuf, ExperimentError> {
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|source| ReportError::Io {
        path: dir.clone(),
        source,
    })?;
    let resolved = dir.join("resolved.cfg");
    std::fs::write(&resolved, cfg.resolved(experiment)).map_err(|source| ReportError::Io {
        path: resolved.clone(),
        source,
    })?;
    Ok(dir)
}

fn record_from(
    grid: &RadialGrid,
    point: &CriticalPoint,
    param: f64,
) -> Result<SweepRecord, ExperimentError> {
    Ok(SweepRecord {
        param,
        level: point.level,
        h1_norm: point.h1_norm,
        x_norm: point.phi.x_norm(),
        phi_inf: grid.sup_norm(&point.phi.phi)?,
        u_inf: grid.sup_norm(&point.u)?,
        grad_norm: point.grad_norm,
        converged: point.converged,
        seconds: point.seconds,
    })
}

fn persist_row(dir: &Path, row: usize, grid: &RadialGrid, u: &Field) -> Result<(), ExperimentError> {
    let path = dir.join(dump_name(row));
    report::write_field_dump(grid.r_max(), u.values(), &path)?;
    Ok(())
}

/// Outcome of a single saddle solve, together with its scalar record.
#[derive(Debug)]
pub struct SolveOutcome {
    pub point: CriticalPoint,
    pub record: SweepRecord,
    pub dir: PathBuf,
}

/// One saddle search at the configured parameters.  Persists `u.txt`,
/// `phi.txt`, a one-row `solve.csv`, and a profile chart when plotting is
/// enabled.
pub fn solve_saddle(cfg: &RunConfig) -> Result<SolveOutcome, ExperimentError> {
    let dir = prepare_dir(cfg, Experiment::Solve)?;
    let grid = cfg.build_grid()?;
    let params = cfg.build_model(&grid)?;
    let opts = cfg.mpa_options();
    let point = mountain_pass::run(&grid, &params, &opts).map_err(|source| {
        ExperimentError::Saddle {
            param: params.lambda,
            source,
        }
    })?;
    let record = record_from(&grid, &point, params.lambda)?;
    report::write_field_dump(grid.r_max(), point.u.values(), &dir.join("u.txt"))?;
    report::write_field_dump(grid.r_max(), point.phi.phi.values(), &dir.join("phi.txt"))?;
    report::emit_csv(std::slice::from_ref(&record), &dir.join("solve.csv"))?;
    if cfg.plot {
        let r: Vec<f64> = grid.nodes().to_vec();
        let series = |label: &str, values: &[f64]| SvgSeries {
            label: label.to_string(),
            points: r.iter().copied().zip(values.iter().copied()).collect(),
        };
        let chart = SvgChart {
            title: "saddle profile".to_string(),
            x_label: "r".to_string(),
            y_label: "value".to_string(),
            log_x: false,
            log_y: false,
            series: vec![
                series("u", point.u.values()),
                series("phi", point.phi.phi.values()),
            ],
        };
        report::emit_svg(&chart, &dir.join("solution.svg"))?;
    }
    Ok(SolveOutcome { point, record, dir })
}

/// Outcome of a potential-only solve.
#[derive(Debug)]
pub struct PhiOutcome {
    pub solution: PotentialSolution,
    pub seconds: f64,
    pub dir: PathBuf,
}

/// Solves the potential equation for a stored source dump, or for the
/// squared default profile when no source is given.  The source must be
/// nonnegative.
pub fn solve_phi(cfg: &RunConfig, rho_path: Option<&Path>) -> Result<PhiOutcome, ExperimentError> {
    let dir = prepare_dir(cfg, Experiment::SolvePhi)?;
    let grid = cfg.build_grid()?;
    let rho = match rho_path {
        Some(path) => load_field(path, &grid)?,
        None => {
            let profile = crate::energy::default_profile(&grid)?;
            profile.mul_pointwise(&profile)
        }
    };
    let min = rho.min_value();
    if min < 0.0 {
        return Err(ExperimentError::NegativeSource { min });
    }
    let clock = Instant::now();
    let solution = potential::solve(&grid, &rho, cfg.eps, &cfg.potential_options())?;
    let seconds = clock.elapsed().as_secs_f64();
    report::write_field_dump(grid.r_max(), solution.phi.values(), &dir.join("phi.txt"))?;
    if cfg.plot {
        let chart = SvgChart {
            title: "potential profile".to_string(),
            x_label: "r".to_string(),
            y_label: "phi".to_string(),
            log_x: false,
            log_y: false,
            series: vec![SvgSeries {
                label: "phi".to_string(),
                points: grid
                    .nodes()
                    .iter()
                    .copied()
                    .zip(solution.phi.values().iter().copied())
                    .collect(),
            }],
        };
        report::emit_svg(&chart, &dir.join("solve_phi.svg"))?;
    }
    Ok(PhiOutcome {
        solution,
        seconds,
        dir,
    })
}

/// Reads a field dump and validates it against the run grid.
pub fn load_field(path: &Path, grid: &RadialGrid) -> Result<Field, ExperimentError> {
    let dump = report::read_field_dump(path)?;
    if dump.r_max != grid.r_max() || dump.intervals != grid.intervals() {
        return Err(ExperimentError::Report(ReportError::BadDump {
            line: 0,
            reason: format!(
                "dump was written on R = {}, N = {} but the run grid is R = {}, N = {}",
                dump.r_max,
                dump.intervals,
                grid.r_max(),
                grid.intervals()
            ),
        }));
    }
    Ok(Field::from_values(grid, dump.values)?)
}

/// Outcome of a sweep over a parameter grid.
#[derive(Debug)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    pub points: Vec<CriticalPoint>,
    pub dir: PathBuf,
}

impl SweepOutcome {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

/// Runs the saddle search over the ascending coupling grid, warm-starting
/// each run from the previous solution.  Rows are recorded even when a run
/// fails to converge; partial results are persisted if a run errors out.
pub fn sweep_lambda(cfg: &RunConfig) -> Result<SweepOutcome, ExperimentError> {
    let dir = prepare_dir(cfg, Experiment::SweepLambda)?;
    let grid = cfg.build_grid()?;
    let base = cfg.build_model(&grid)?;
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut warm: Option<Field> = None;
    for (row, &lambda) in cfg.lambdas.iter().enumerate() {
        let params = SweepKind::Lambda.apply(&base, lambda);
        let mut opts = cfg.mpa_options();
        opts.warm_start = warm.take();
        let point = match mountain_pass::run(&grid, &params, &opts) {
            Ok(p) => p,
            Err(source) => {
                persist_partial(&dir, SweepKind::Lambda, &records)?;
                return Err(ExperimentError::Saddle {
                    param: lambda,
                    source,
                });
            }
        };
        records.push(record_from(&grid, &point, lambda)?);
        persist_row(&dir, row, &grid, &point.u)?;
        warm = Some(point.u.clone());
        points.push(point);
    }
    report::emit_csv(&records, &dir.join(SweepKind::Lambda.csv_name()))?;
    if cfg.plot {
        let chart = sweep_chart(
            "levels and norms vs coupling",
            "lambda",
            &records,
        );
        report::emit_svg(&chart, &dir.join(SweepKind::Lambda.svg_name()))?;
    }
    Ok(SweepOutcome {
        records,
        points,
        dir,
    })
}

fn persist_partial(
    dir: &Path,
    kind: SweepKind,
    records: &[SweepRecord],
) -> Result<(), ExperimentError> {
    if !records.is_empty() {
        report::emit_csv(records, &dir.join(kind.csv_name()))?;
    }
    Ok(())
}

fn sweep_chart(title: &str, x_label: &str, records: &[SweepRecord]) -> SvgChart {
    let pick = |f: fn(&SweepRecord) -> f64| -> Vec<(f64, f64)> {
        records.iter().map(|r| (r.param, f(r))).collect()
    };
    SvgChart {
        title: title.to_string(),
        x_label: x_label.to_string(),
        y_label: "value".to_string(),
        log_x: true,
        log_y: true,
        series: vec![
            SvgSeries {
                label: "level".to_string(),
                points: pick(|r| r.level),
            },
            SvgSeries {
                label: "h1 norm".to_string(),
                points: pick(|r| r.h1_norm),
            },
            SvgSeries {
                label: "sup phi".to_string(),
                points: pick(|r| r.phi_inf),
            },
        ],
    }
}

/// Distances between a solution at positive quasilinear strength and the
/// limit solution at strength zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonDelta {
    pub eps: f64,
    /// H^1 distance between the two saddle solutions.
    pub du_h1: f64,
    /// L^2 distance between the potential gradients.
    pub dphi_grad: f64,
    /// eps times the fourth root of the quartic gradient integral; the
    /// natural size of the quasilinear term.
    pub eps_grad_quart: f64,
}

pub const DELTA_CSV_HEADER: &str = "param,du_h1,dphi_grad,eps_grad_quart";

fn render_delta_csv(deltas: &[EpsilonDelta]) -> Result<String, ReportError> {
    if deltas.is_empty() {
        return Err(ReportError::EmptyRecords);
    }
    let mut out = String::from(DELTA_CSV_HEADER);
    out.push('\n');
    for d in deltas {
        out.push_str(&format!(
            "{},{},{},{}\n",
            report::format_full(d.eps),
            report::format_full(d.du_h1),
            report::format_full(d.dphi_grad),
            report::format_full(d.eps_grad_quart),
        ));
    }
    Ok(out)
}

/// Outcome of the quasilinear-strength sweep: the limit run at strength
/// zero comes last in `records` and `points`.
#[derive(Debug)]
pub struct EpsilonSweepOutcome {
    pub records: Vec<SweepRecord>,
    pub points: Vec<CriticalPoint>,
    pub deltas: Vec<EpsilonDelta>,
    pub dir: PathBuf,
}

impl EpsilonSweepOutcome {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

/// Sweeps the quasilinear strength over the descending configured grid and
/// compares every solution against the limit run at strength zero.  The
/// limit run happens first (it anchors the distance columns) but is listed
/// last, keeping the `param` column strictly descending.
pub fn sweep_epsilon(cfg: &RunConfig) -> Result<EpsilonSweepOutcome, ExperimentError> {
    let dir = prepare_dir(cfg, Experiment::SweepEpsilon)?;
    let grid = cfg.build_grid()?;
    let base = cfg.build_model(&grid)?;

    let zero_params = SweepKind::Epsilon.apply(&base, 0.0);
    let opts = cfg.mpa_options();
    let baseline = mountain_pass::run(&grid, &zero_params, &opts).map_err(|source| {
        ExperimentError::Saddle {
            param: 0.0,
            source,
        }
    })?;

    let mut records: Vec<SweepRecord> = Vec::new();
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut deltas: Vec<EpsilonDelta> = Vec::new();
    let mut warm = Some(baseline.u.clone());
    let total_rows = cfg.epsilons.len() + 1;
    let finish = |dir: &Path,
                  records: &mut Vec<SweepRecord>,
                  deltas: &mut Vec<EpsilonDelta>|
     -> Result<(), ExperimentError> {
        report::emit_csv(records, &dir.join(SweepKind::Epsilon.csv_name()))?;
        let text = render_delta_csv(deltas)?;
        let path = dir.join("epsilon_deltas.csv");
        std::fs::write(&path, text).map_err(|source| ReportError::Io { path, source })?;
        Ok(())
    };
    for (row, &eps) in cfg.epsilons.iter().enumerate() {
        let params = SweepKind::Epsilon.apply(&base, eps);
        let mut opts = cfg.mpa_options();
        opts.warm_start = warm.take();
        let point = match mountain_pass::run(&grid, &params, &opts) {
            Ok(p) => p,
            Err(source) => {
                // Persist what exists; the baseline row would be misleading
                // on its own, so only emit rows already completed in order.
                finish(&dir, &mut records, &mut deltas).ok();
                return Err(ExperimentError::Saddle { param: eps, source });
            }
        };
        records.push(record_from(&grid, &point, eps)?);
        deltas.push(delta_against(&grid, &point, &baseline, eps)?);
        persist_row(&dir, row, &grid, &point.u)?;
        warm = Some(point.u.clone());
        points.push(point);
    }
    records.push(record_from(&grid, &baseline, 0.0)?);
    deltas.push(delta_against(&grid, &baseline, &baseline, 0.0)?);
    persist_row(&dir, total_rows - 1, &grid, &baseline.u)?;
    points.push(baseline);
    finish(&dir, &mut records, &mut deltas)?;
    if cfg.plot {
        let chart = SvgChart {
            title: "distance to the limit solution".to_string(),
            x_label: "eps".to_string(),
            y_label: "distance".to_string(),
            log_x: true,
            log_y: true,
            series: vec![
                SvgSeries {
                    label: "u distance (h1)".to_string(),
                    points: deltas.iter().map(|d| (d.eps, d.du_h1)).collect(),
                },
                SvgSeries {
                    label: "phi gradient distance".to_string(),
                    points: deltas.iter().map(|d| (d.eps, d.dphi_grad)).collect(),
                },
                SvgSeries {
                    label: "quartic term size".to_string(),
                    points: deltas.iter().map(|d| (d.eps, d.eps_grad_quart)).collect(),
                },
            ],
        };
        report::emit_svg(&chart, &dir.join(SweepKind::Epsilon.svg_name()))?;
    }
    Ok(EpsilonSweepOutcome {
        records,
        points,
        deltas,
        dir,
    })
}

fn delta_against(
    grid: &RadialGrid,
    point: &CriticalPoint,
    baseline: &CriticalPoint,
    eps: f64,
) -> Result<EpsilonDelta, ExperimentError> {
    let du = point.u.axpy(-1.0, &baseline.u);
    let dphi = point.phi.phi.axpy(-1.0, &baseline.phi.phi);
    Ok(EpsilonDelta {
        eps,
        du_h1: grid.h1_norm(&du)?,
        dphi_grad: grid.grad_sq_integral(&dphi)?.sqrt(),
        eps_grad_quart: eps * point.phi.grad_quart.powf(0.25),
    })
}

/// Certificate for the first capped run whose solution stays under the cap,
/// at which point the capped equation coincides with the supercritical one.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub row: usize,
    pub lambda: f64,
    pub sup_u: f64,
    pub cap_height: f64,
    /// H^1-dual residual of the supercritical equation, assembled directly
    /// from the stored solution rather than through the capped machinery.
    pub residual: f64,
    /// Acceptance bound on the residual (ten times the saddle tolerance).
    pub residual_tol: f64,
}

impl Certificate {
    pub fn is_valid(&self) -> bool {
        self.sup_u <= self.cap_height && self.residual <= self.residual_tol
    }

    pub fn summary(&self) -> String {
        format!(
            "certified row {} at lambda = {}: sup u = {:.6e} <= cap {:.6e}, supercritical residual {:.3e} (tol {:.1e})",
            self.row, self.lambda, self.sup_u, self.cap_height, self.residual, self.residual_tol
        )
    }
}

/// Outcome of the supercritical scan.
#[derive(Debug)]
pub struct SupercriticalOutcome {
    pub records: Vec<SweepRecord>,
    pub points: Vec<CriticalPoint>,
    pub certificate: Option<Certificate>,
    pub dir: PathBuf,
}

/// Scans the ascending coupling grid with the capped supercritical model.
/// The first converged run whose sup norm stays at or under the cap height
/// is certified by a direct residual of the uncapped supercritical equation.
/// If no run qualifies, the scan reports that honestly.
///
/// Unlike the coupling sweep, every run here starts cold.  The capped
/// functional can carry extra critical points deep in the capped regime,
/// and warm-starting across couplings was observed to track such a branch,
/// delaying certification past couplings whose mountain-pass solution
/// already sits under the cap.
pub fn supercritical_scan(cfg: &RunConfig) -> Result<SupercriticalOutcome, ExperimentError> {
    if cfg.cap.is_none() {
        return Err(ExperimentError::CapRequired);
    }
    let dir = prepare_dir(cfg, Experiment::Supercritical)?;
    let grid = cfg.build_grid()?;
    let base = cfg.build_model(&grid)?;
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut certificate: Option<Certificate> = None;
    for (row, &lambda) in cfg.supercritical_lambdas.iter().enumerate() {
        let params = SweepKind::Supercritical.apply(&base, lambda);
        let opts = cfg.mpa_options();
        let point = match mountain_pass::run(&grid, &params, &opts) {
            Ok(p) => p,
            Err(source) => {
                persist_partial(&dir, SweepKind::Supercritical, &records)?;
                return Err(ExperimentError::Saddle {
                    param: lambda,
                    source,
                });
            }
        };
        let record = record_from(&grid, &point, lambda)?;
        let cap = params.cap.expect("cap presence checked above");
        if certificate.is_none() && point.converged && record.u_inf <= cap.height {
            let residual = supercritical_residual(&grid, &params, &point, cfg)?;
            certificate = Some(Certificate {
                row,
                lambda,
                sup_u: record.u_inf,
                cap_height: cap.height,
                residual,
                residual_tol: 10.0 * cfg.mp_tol,
            });
        }
        records.push(record);
        persist_row(&dir, row, &grid, &point.u)?;
        points.push(point);
    }
    report::emit_csv(&records, &dir.join(SweepKind::Supercritical.csv_name()))?;
    let cert_path = dir.join("certificate.txt");
    let cert_text = match &certificate {
        Some(c) => format!("{}\n", c.summary()),
        None => "no coupling in the scan produced a solution under the cap\n".to_string(),
    };
    std::fs::write(&cert_path, cert_text).map_err(|source| ReportError::Io {
        path: cert_path,
        source,
    })?;
    if cfg.plot {
        let cap_height = base.cap.expect("cap checked").height;
        let lo = cfg.supercritical_lambdas[0];
        let hi = *cfg.supercritical_lambdas.last().expect("nonempty grid");
        let chart = SvgChart {
            title: "sup norm vs coupling under the cap".to_string(),
            x_label: "lambda".to_string(),
            y_label: "sup u".to_string(),
            log_x: true,
            log_y: false,
            series: vec![
                SvgSeries {
                    label: "sup u".to_string(),
                    points: records.iter().map(|r| (r.param, r.u_inf)).collect(),
                },
                SvgSeries {
                    label: "cap height".to_string(),
                    points: vec![(lo, cap_height), (hi, cap_height)],
                },
            ],
        };
        report::emit_svg(&chart, &dir.join(SweepKind::Supercritical.svg_name()))?;
    }
    Ok(SupercriticalOutcome {
        records,
        points,
        certificate,
        dir,
    })
}

/// H^1-dual residual of the uncapped supercritical equation at `point.u`,
/// assembled term by term: the potential is solved afresh from u^2 and the
/// pure power enters directly, bypassing the capped reaction used by the
/// search.  On solutions with sup u <= cap height the two routes describe
/// the same equation, so this is an independent check of the certificate.
fn supercritical_residual(
    grid: &RadialGrid,
    params: &ModelParams,
    point: &CriticalPoint,
    cfg: &RunConfig,
) -> Result<f64, ExperimentError> {
    let cap = params.cap.expect("caller checked the cap");
    let u = &point.u;
    let rho = u.mul_pointwise(u);
    let phi = potential::solve(grid, &rho, params.eps, &cfg.potential_options())?;
    let density_values: Vec<f64> = u
        .values()
        .iter()
        .zip(phi.phi.values())
        .enumerate()
        .map(|(node, (&t, &p))| {
            let pure_power = t.abs().powf(cap.exponent - 2.0) * t;
            p * t - params.lambda * params.reaction(node, t) - pure_power
        })
        .collect();
    let density = Field::from_values(grid, density_values)?;
    let riesz = grid.solve_helmholtz(&density)?;
    let residual = u.axpy(1.0, &riesz);
    Ok(grid.h1_norm(&residual)?)
}

/// Re-verifies a sweep's persisted artifacts: reads the CSV and the row
/// dumps back and recomputes every stored diagnostic from the stored u.
/// Returns the worst relative discrepancy; errors on the first field that
/// misses `tol`.  `converged` and `seconds` are reporting-only and are not
/// recomputed.
pub fn verify_sweep(
    cfg: &RunConfig,
    kind: SweepKind,
    dir: &Path,
    tol: f64,
) -> Result<f64, ExperimentError> {
    let csv_path = dir.join(kind.csv_name());
    let records = report::read_csv(&csv_path)?;
    let grid = cfg.build_grid()?;
    let base = cfg.build_model(&grid)?;
    let mut worst = 0.0_f64;
    for (row, record) in records.iter().enumerate() {
        let u = load_field(&dir.join(dump_name(row)), &grid)?;
        let params = kind.apply(&base, record.param);
        let fun = Functional::with_options(&grid, params, cfg.potential_options())?;
        let level = fun.energy_truncated(&u)?.total;
        let grad_norm = grid.h1_norm(&fun.gradient_truncated(&u)?)?;
        let sol = fun.potential(&u)?;
        let recomputed: [(&'static str, f64, f64); 6] = [
            ("level", record.level, level),
            ("h1_norm", record.h1_norm, grid.h1_norm(&u)?),
            ("x_norm", record.x_norm, sol.x_norm()),
            ("phi_inf", record.phi_inf, grid.sup_norm(&sol.phi)?),
            ("u_inf", record.u_inf, grid.sup_norm(&u)?),
            ("grad_norm", record.grad_norm, grad_norm),
        ];
        for (field, stored, fresh) in recomputed {
            let rel = (stored - fresh).abs() / stored.abs().max(1.0);
            worst = worst.max(rel);
            if rel > tol {
                return Err(ExperimentError::VerifyMismatch {
                    path: csv_path,
                    row,
                    field,
                    stored,
                    recomputed: fresh,
                    rel,
                    tol,
                });
            }
        }
    }
    Ok(worst)
}
