//! Run configuration.
//!
//! The on-disk format is line oriented: `key = value` pairs grouped under
//! bracketed section headers, with `#` starting a comment anywhere on a
//! line.  Every key has a default, unknown sections or keys are rejected,
//! and list values are comma separated.  Reaction terms are written as
//! `C:q` pairs (coefficient and exponent); a term's constant coefficient can
//! be replaced by a radial profile with `profile_K = file`, where `K` is the
//! 1-based term index and the file is a field dump on the run grid.
//!
//! [`RunConfig::resolved`] renders the fully resolved configuration,
//! including defaulted keys, so every experiment can persist the exact
//! settings it ran with next to its outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::grid::{Field, GridError, RadialGrid};
use crate::model::{
    Coefficient, ModelError, ModelParams, ReactionTerm, SupercriticalCap,
};
use crate::mountain_pass::MpaOptions;
use crate::potential::PotentialOptions;
use crate::report::ReportError;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey {
        line: usize,
        key: String,
        section: String,
    },
    #[error("line {line}: bad value for {key}: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("sweep grid {name} is invalid: {reason}")]
    BadSweepGrid { name: String, reason: String },
    #[error("coefficient profile for term {term}: {source}")]
    ProfileDump {
        term: usize,
        #[source]
        source: ReportError,
    },
    #[error("coefficient profile for term {term} was dumped on R = {dump_r}, N = {dump_n} but the run grid is R = {grid_r}, N = {grid_n}")]
    ProfileGridMismatch {
        term: usize,
        dump_r: f64,
        dump_n: usize,
        grid_r: f64,
        grid_n: usize,
    },
    #[error("profile_{term} given but only {terms} reaction terms are configured")]
    ProfileIndexOutOfRange { term: usize, terms: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Experiment selected by the command line; recorded in the resolved
/// configuration written next to the outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    SolvePhi,
    Solve,
    SweepLambda,
    SweepEpsilon,
    Supercritical,
    Check,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SolvePhi => "solve-phi",
            Experiment::Solve => "solve",
            Experiment::SweepLambda => "sweep-lambda",
            Experiment::SweepEpsilon => "sweep-epsilon",
            Experiment::Supercritical => "supercritical",
            Experiment::Check => "check",
        }
    }
}

/// Fully resolved run settings; every field has a default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Truncation radius R of the computational domain.
    pub r_max: f64,
    /// Number of grid intervals N.
    pub intervals: usize,
    pub lambda: f64,
    pub eps: f64,
    pub theta: f64,
    pub trunc_radius: f64,
    /// Constant-coefficient reaction terms as (coefficient, exponent).
    pub terms: Vec<(f64, f64)>,
    /// Radial coefficient profiles overriding term constants, keyed by
    /// 1-based term index; values are field-dump paths.
    pub term_profiles: BTreeMap<usize, PathBuf>,
    /// Supercritical (exponent, cap height), if configured.
    pub cap: Option<(f64, f64)>,
    pub phi_tol: f64,
    pub phi_max_iter: usize,
    pub mp_tol: f64,
    pub mp_max_iter: usize,
    pub path_segments: usize,
    pub max_restarts: usize,
    /// Ascending coupling grid for the coupling sweep.
    pub lambdas: Vec<f64>,
    /// Descending quasilinear-strength grid; the limit run at strength zero
    /// is added by the sweep driver itself.
    pub epsilons: Vec<f64>,
    /// Ascending coupling grid scanned for a certified capped solution.
    pub supercritical_lambdas: Vec<f64>,
    pub out_dir: PathBuf,
    pub plot: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelParams::default();
        let phi = PotentialOptions::default();
        let mpa = MpaOptions::default();
        Self {
            r_max: 20.0,
            intervals: 1200,
            lambda: model.lambda,
            eps: model.eps,
            theta: model.theta,
            trunc_radius: model.trunc_radius,
            terms: vec![(1.0, 5.0)],
            term_profiles: BTreeMap::new(),
            cap: None,
            phi_tol: phi.tol,
            phi_max_iter: phi.max_iter,
            mp_tol: mpa.tol,
            mp_max_iter: mpa.max_iter,
            path_segments: mpa.path_segments,
            max_restarts: mpa.max_restarts,
            lambdas: vec![600.0, 1200.0, 2400.0, 4800.0, 9600.0],
            epsilons: vec![1.0, 0.5, 0.25, 0.1],
            supercritical_lambdas: vec![30.0, 120.0, 480.0, 1920.0],
            out_dir: PathBuf::from("out"),
            plot: false,
        }
    }
}

fn parse_list(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"))
        })
        .collect()
}

fn parse_pairs(raw: &str) -> Result<Vec<(f64, f64)>, String> {
    raw.split(',')
        .map(|s| {
            let s = s.trim();
            let (a, b) = s
                .split_once(':')
                .ok_or_else(|| format!("{s:?} is not a colon-separated pair"))?;
            let a = a.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
            let b = b.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}"))?;
            Ok((a, b))
        })
        .collect()
}

fn check_grid_list(name: &str, list: &[f64], ascending: bool) -> Result<(), ConfigError> {
    let fail = |reason: String| ConfigError::BadSweepGrid {
        name: name.to_string(),
        reason,
    };
    if list.is_empty() {
        return Err(fail("the grid is empty".to_string()));
    }
    if let Some(bad) = list.iter().find(|v| !v.is_finite() || **v <= 0.0) {
        return Err(fail(format!("entries must be positive and finite, found {bad}")));
    }
    for w in list.windows(2) {
        let ok = if ascending { w[0] < w[1] } else { w[0] > w[1] };
        if !ok {
            return Err(fail(format!(
                "entries must be strictly {}, found {} then {}",
                if ascending { "ascending" } else { "descending" },
                w[0],
                w[1]
            )));
        }
    }
    Ok(())
}

impl RunConfig {
    /// Parses configuration text, starting from the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    reason: format!("unterminated section header {line:?}"),
                })?;
                let name = name.trim();
                if !matches!(name, "grid" | "model" | "solver" | "sweep" | "output") {
                    return Err(ConfigError::UnknownSection {
                        line: line_no,
                        name: name.to_string(),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: line_no,
                reason: format!("expected key = value, found {line:?}"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    reason: format!("key {key:?} has an empty value"),
                });
            }
            cfg.apply(&section, key, value, line_no)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    fn apply(
        &mut self,
        section: &str,
        key: &str,
        value: &str,
        line: usize,
    ) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            reason,
        };
        let as_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{e}")));
        let as_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(format!("{e}")));
        let positive = |x: f64| -> Result<f64, ConfigError> {
            if x.is_finite() && x > 0.0 {
                Ok(x)
            } else {
                Err(bad(format!("must be positive and finite, found {x}")))
            }
        };
        match (section, key) {
            ("grid", "r_max") => self.r_max = positive(as_f64(value)?)?,
            ("grid", "intervals") => {
                let n = as_usize(value)?;
                if n < 2 {
                    return Err(bad(format!("need at least 2 intervals, found {n}")));
                }
                self.intervals = n;
            }
            ("model", "lambda") => self.lambda = positive(as_f64(value)?)?,
            ("model", "eps") => {
                let x = as_f64(value)?;
                if !x.is_finite() || x < 0.0 {
                    return Err(bad(format!("must be nonnegative and finite, found {x}")));
                }
                self.eps = x;
            }
            ("model", "theta") => self.theta = positive(as_f64(value)?)?,
            ("model", "trunc_radius") => self.trunc_radius = positive(as_f64(value)?)?,
            ("model", "terms") => {
                self.terms = parse_pairs(value).map_err(bad)?;
                if self.terms.is_empty() {
                    return Err(bad("need at least one reaction term".to_string()));
                }
            }
            ("model", "cap") => {
                let pairs = parse_pairs(value).map_err(bad)?;
                if pairs.len() != 1 {
                    return Err(bad(format!(
                        "cap takes a single exponent:height pair, found {} pairs",
                        pairs.len()
                    )));
                }
                self.cap = Some(pairs[0]);
            }
            ("model", _) if key.starts_with("profile_") => {
                let term: usize = key["profile_".len()..]
                    .parse()
                    .map_err(|e| bad(format!("bad term index: {e}")))?;
                if term == 0 {
                    return Err(bad("term indices are 1-based".to_string()));
                }
                self.term_profiles.insert(term, PathBuf::from(value));
            }
            ("solver", "phi_tol") => self.phi_tol = positive(as_f64(value)?)?,
            ("solver", "phi_max_iter") => self.phi_max_iter = as_usize(value)?,
            ("solver", "mp_tol") => self.mp_tol = positive(as_f64(value)?)?,
            ("solver", "mp_max_iter") => self.mp_max_iter = as_usize(value)?,
            ("solver", "path_segments") => {
                let n = as_usize(value)?;
                if n < 2 {
                    return Err(bad(format!("need at least 2 path segments, found {n}")));
                }
                self.path_segments = n;
            }
            ("solver", "max_restarts") => self.max_restarts = as_usize(value)?,
            ("sweep", "lambdas") => self.lambdas = parse_list(value).map_err(bad)?,
            ("sweep", "epsilons") => self.epsilons = parse_list(value).map_err(bad)?,
            ("sweep", "supercritical_lambdas") => {
                self.supercritical_lambdas = parse_list(value).map_err(bad)?
            }
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("output", "plot") => {
                self.plot = match value {
                    "true" => true,
                    "false" => false,
                    other => return Err(bad(format!("expected true or false, found {other:?}"))),
                }
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                    section: section.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Structural checks that do not need a grid: sweep grids nonempty,
    /// positive, and sorted the way the drivers consume them.
    pub fn check(&self) -> Result<(), ConfigError> {
        check_grid_list("lambdas", &self.lambdas, true)?;
        check_grid_list("epsilons", &self.epsilons, false)?;
        check_grid_list("supercritical_lambdas", &self.supercritical_lambdas, true)?;
        if let Some((idx, _)) = self.term_profiles.range((self.terms.len() + 1)..).next() {
            return Err(ConfigError::ProfileIndexOutOfRange {
                term: *idx,
                terms: self.terms.len(),
            });
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<RadialGrid, ConfigError> {
        Ok(RadialGrid::uniform(self.r_max, self.intervals)?)
    }

    /// Assembles validated model parameters on the given grid, loading any
    /// coefficient profiles from their dumps.  The outer node of a loaded
    /// profile multiplies the boundary value u(R) = 0 wherever it appears,
    /// so it is forced to zero to fit the Dirichlet field class.
    pub fn build_model(&self, grid: &RadialGrid) -> Result<ModelParams, ConfigError> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, &(coeff, exponent)) in self.terms.iter().enumerate() {
            let index = i + 1;
            let coeff = match self.term_profiles.get(&index) {
                None => Coefficient::Constant(coeff),
                Some(path) => {
                    let dump = crate::report::read_field_dump(path)
                        .map_err(|source| ConfigError::ProfileDump {
                            term: index,
                            source,
                        })?;
                    if dump.r_max != grid.r_max() || dump.intervals != grid.intervals() {
                        return Err(ConfigError::ProfileGridMismatch {
                            term: index,
                            dump_r: dump.r_max,
                            dump_n: dump.intervals,
                            grid_r: grid.r_max(),
                            grid_n: grid.intervals(),
                        });
                    }
                    let mut values = dump.values;
                    values[self.intervals] = 0.0;
                    Coefficient::Profile(Field::from_values(grid, values)?)
                }
            };
            terms.push(ReactionTerm { coeff, exponent });
        }
        let params = ModelParams {
            lambda: self.lambda,
            eps: self.eps,
            theta: self.theta,
            trunc_radius: self.trunc_radius,
            terms,
            cap: self.cap.map(|(exponent, height)| SupercriticalCap {
                exponent,
                height,
            }),
        };
        params.validate().into_result()?;
        params.check_profiles(grid)?;
        Ok(params)
    }

    pub fn potential_options(&self) -> PotentialOptions {
        PotentialOptions {
            tol: self.phi_tol,
            max_iter: self.phi_max_iter,
            ..PotentialOptions::default()
        }
    }

    pub fn mpa_options(&self) -> MpaOptions {
        MpaOptions {
            path_segments: self.path_segments,
            tol: self.mp_tol,
            max_iter: self.mp_max_iter,
            max_restarts: self.max_restarts,
            warm_start: None,
            pot: self.potential_options(),
        }
    }

    /// Renders the fully resolved configuration, annotated with the
    /// experiment it was used for.  The output parses back to this config.
    pub fn resolved(&self, experiment: Experiment) -> String {
        let full = crate::report::format_full;
        let mut out = String::new();
        let _ = writeln!(out, "# resolved configuration for {}", experiment.name());
        let _ = writeln!(out, "[grid]");
        let _ = writeln!(out, "r_max = {}", full(self.r_max));
        let _ = writeln!(out, "intervals = {}", self.intervals);
        let _ = writeln!(out, "\n[model]");
        let _ = writeln!(out, "lambda = {}", full(self.lambda));
        let _ = writeln!(out, "eps = {}", full(self.eps));
        let _ = writeln!(out, "theta = {}", full(self.theta));
        let _ = writeln!(out, "trunc_radius = {}", full(self.trunc_radius));
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|(c, q)| format!("{}:{}", full(*c), full(*q)))
            .collect();
        let _ = writeln!(out, "terms = {}", terms.join(", "));
        if let Some((p, k)) = self.cap {
            let _ = writeln!(out, "cap = {}:{}", full(p), full(k));
        }
        for (idx, path) in &self.term_profiles {
            let _ = writeln!(out, "profile_{idx} = {}", path.display());
        }
        let _ = writeln!(out, "\n[solver]");
        let _ = writeln!(out, "phi_tol = {}", full(self.phi_tol));
        let _ = writeln!(out, "phi_max_iter = {}", self.phi_max_iter);
        let _ = writeln!(out, "mp_tol = {}", full(self.mp_tol));
        let _ = writeln!(out, "mp_max_iter = {}", self.mp_max_iter);
        let _ = writeln!(out, "path_segments = {}", self.path_segments);
        let _ = writeln!(out, "max_restarts = {}", self.max_restarts);
        let _ = writeln!(out, "\n[sweep]");
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| full(*x))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(out, "lambdas = {}", list(&self.lambdas));
        let _ = writeln!(out, "epsilons = {}", list(&self.epsilons));
        let _ = writeln!(
            out,
            "supercritical_lambdas = {}",
            list(&self.supercritical_lambdas)
        );
        let _ = writeln!(out, "\n[output]");
        let _ = writeln!(out, "dir = {}", self.out_dir.display());
        let _ = writeln!(out, "plot = {}", self.plot);
        out
    }
}
