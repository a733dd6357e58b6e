//! Run orchestration: config ingestion, ensemble simulation, inequality
//! verification, and machine-readable outputs.
//!
//! One JSON config file fully determines a run; identical (config, seed)
//! produce byte-identical outputs. All floating-point values are written
//! with 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{abe_term_check, analyze_ensemble, ito_identity_check};
use crate::error::{Error, Result};
use crate::integrators::{simulate_ensemble, SanitizePolicy, TimeGrid};
use crate::models::build_model;
use crate::sampling::{
    random_density, random_diagonal_density, random_diagonal_hermitian, random_hermitian,
    random_matrix, random_unitary,
};
use crate::statecore::{generalized_variance, variance, CMat, DensityMatrix, SpectralFloor};

/// Environment variable overriding the output directory of both subcommands.
pub const ENV_OUTPUT_DIR: &str = "ENTROSIM_OUTPUT_DIR";

/// Acceptance thresholds pinned by the property suite.
pub const ITO_RESIDUAL_TOL: f64 = 1e-10;
pub const ABE_SLACK_TOL: f64 = -1e-9;
pub const COMMUTING_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Timeseries,
    Verdicts,
    Summary,
}

fn default_emit() -> Vec<Emit> {
    vec![Emit::Timeseries, Emit::Verdicts, Emit::Summary]
}

fn default_window() -> usize {
    10
}

fn default_floor_epsilon() -> f64 {
    1e-12
}

/// One run, fully specified. `initial_state` (row-major `[re, im]` pairs)
/// overrides the catalog default when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model_name: String,
    #[serde(default)]
    pub model_params: BTreeMap<String, f64>,
    pub trajectories: usize,
    pub dt: f64,
    pub t_final: f64,
    pub base_seed: u64,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_floor_epsilon")]
    pub floor_epsilon: f64,
    pub output_dir: PathBuf,
    #[serde(default = "default_emit")]
    pub emit: Vec<Emit>,
    #[serde(default)]
    pub initial_state: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub allow_coarse_dt: bool,
}

impl RunConfig {
    /// Parse a config file; serde reports line/column and field names.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories < 1 {
            return Err(Error::Config("trajectories must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be >= dt, got t_final={} dt={}",
                self.t_final, self.dt
            )));
        }
        if self.window < 1 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        SpectralFloor::new(self.floor_epsilon)?;
        if self.emit.is_empty() {
            return Err(Error::Config(
                "emit must request at least one output".into(),
            ));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round().max(1.0) as usize
    }

    fn emits(&self, kind: Emit) -> bool {
        self.emit.contains(&kind)
    }

    fn initial_state(&self, fallback: &DensityMatrix) -> Result<DensityMatrix> {
        let Some(rows) = &self.initial_state else {
            return Ok(fallback.clone());
        };
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Config(
                "initial_state must be a square matrix".into(),
            ));
        }
        let mat = CMat::from_fn(d, d, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        DensityMatrix::new(mat, 1e-8)
    }
}

/// Aggregate results of one run. `wall_time_seconds` is reported on stdout
/// but excluded from summary.json to keep outputs byte-deterministic.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub steps: usize,
    pub min_margin_sigmas: Option<f64>,
    pub min_margin_time: Option<f64>,
    pub violation_count: usize,
    /// Fraction of (trajectory, time) bound evaluations that hit the floor.
    pub floored_fraction: f64,
    /// Time averages of the ensemble-mean bound terms.
    pub mean_commutator_term: f64,
    pub mean_var_term: f64,
    pub mean_genvar_term: f64,
    pub mean_rhs: f64,
    pub max_pre_sanitize_negativity: f64,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

impl RunSummary {
    pub fn violated(&self) -> bool {
        self.violation_count > 0
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Simulate the configured ensemble, verify the inequality, and write the
/// requested outputs into `config.output_dir`.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    config.validate()?;

    let entry = build_model(&config.model_name, &config.model_params)?;
    let rho0 = config.initial_state(&entry.default_initial_state)?;
    if rho0.dim() != entry.spec.dim() {
        return Err(Error::Config(format!(
            "initial_state dimension {} does not match model dimension {}",
            rho0.dim(),
            entry.spec.dim()
        )));
    }
    let mut grid = TimeGrid::new(0.0, config.dt, config.steps())?;
    if config.allow_coarse_dt {
        grid = grid.with_coarse_dt();
    }
    let floor = SpectralFloor::new(config.floor_epsilon)?;
    let policy = SanitizePolicy::default();

    let records = simulate_ensemble(
        &entry.spec,
        &grid,
        &rho0,
        config.trajectories,
        config.base_seed,
        &policy,
        &floor,
    )?;
    let stats = analyze_ensemble(&records, &entry.spec, &floor, config.window)?;

    fs::create_dir_all(&config.output_dir)?;
    if config.emits(Emit::Timeseries) {
        write_atomic(
            &config.output_dir.join("timeseries.csv"),
            timeseries_csv(&stats).as_bytes(),
        )?;
    }
    if config.emits(Emit::Verdicts) {
        write_atomic(
            &config.output_dir.join("verdicts.json"),
            &to_json_17(&stats.verdicts)?,
        )?;
    }

    let (min_margin_sigmas, min_margin_time) = match stats.min_margin() {
        Some((margin, time)) => (Some(margin), Some(time)),
        None => (None, None),
    };
    let summary = RunSummary {
        config: config.clone(),
        steps: grid.steps,
        min_margin_sigmas,
        min_margin_time,
        violation_count: stats.violation_count(),
        floored_fraction: mean(&stats.floored_fraction),
        mean_commutator_term: mean(&stats.commutator_mean),
        mean_var_term: mean(&stats.var_mean),
        mean_genvar_term: mean(&stats.genvar_mean),
        mean_rhs: mean(&stats.rhs_mean),
        max_pre_sanitize_negativity: records.iter().map(|r| r.max_negativity).fold(0.0, f64::max),
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    if config.emits(Emit::Summary) {
        write_atomic(
            &config.output_dir.join("summary.json"),
            &to_json_17(&summary)?,
        )?;
    }
    Ok(summary)
}

/// Results of the algebraic property suite over random states/operators.
#[derive(Debug, Clone, Serialize)]
pub struct PropsSummary {
    pub dims: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub max_ito_residual: f64,
    pub ito_residual_tol: f64,
    pub min_abe_slack: f64,
    pub abe_slack_tol: f64,
    pub max_commuting_gap: f64,
    pub commuting_gap_tol: f64,
    pub passed: bool,
    #[serde(skip)]
    pub wall_time_seconds: f64,
}

/// Run the identity, Abe-inequality, and commuting-reduction sweeps on
/// `samples` random draws per dimension. Writes `props_summary.json` into
/// `output_dir`.
pub fn run_property_suite(
    dims: &[usize],
    samples: usize,
    seed: u64,
    output_dir: &Path,
) -> Result<PropsSummary> {
    let start = Instant::now();
    if dims.is_empty() || dims.iter().any(|d| !(2..=5).contains(d)) {
        return Err(Error::Config(format!(
            "dims must be a nonempty subset of {{2,3,4,5}}, got {dims:?}"
        )));
    }
    if samples < 100 {
        return Err(Error::Config(format!(
            "samples must be >= 100, got {samples}"
        )));
    }

    let floor = SpectralFloor::default();
    let mut max_ito = 0.0f64;
    let mut min_abe = f64::INFINITY;
    let mut max_gap = 0.0f64;

    for &d in dims {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(d as u64));
        for i in 0..samples {
            // Itô expansion identity on well-conditioned states
            let rho = random_density(&mut rng, d, 0.05);
            let m = random_hermitian(&mut rng, d);
            max_ito = max_ito.max(ito_identity_check(&rho, &m, &floor)?);

            // Abe term: Hermitian and non-Hermitian A alternate
            let rho = random_density(&mut rng, d, 0.01);
            let a = if i % 2 == 0 {
                random_hermitian(&mut rng, d)
            } else {
                random_matrix(&mut rng, d)
            };
            min_abe = min_abe.min(abe_term_check(&rho, &a, &floor)?);

            // commuting reduction: Var^gen == Var for simultaneous-diagonal
            // pairs, plain or co-rotated into a shared random basis
            let rho_d = random_diagonal_density(&mut rng, d, 0.01);
            let m_d = random_diagonal_hermitian(&mut rng, d);
            let (rho_c, m_c) = if i % 2 == 0 {
                (rho_d, m_d)
            } else {
                let u = random_unitary(&mut rng, d);
                let rotated = DensityMatrix::new(&u * rho_d.mat() * u.adjoint(), 1e-9)?;
                (rotated, &u * m_d * u.adjoint())
            };
            let gap = (generalized_variance(&m_c, &rho_c, &floor)? - variance(&m_c, &rho_c)?).abs();
            max_gap = max_gap.max(gap);
        }
    }

    let summary = PropsSummary {
        dims: dims.to_vec(),
        samples,
        seed,
        max_ito_residual: max_ito,
        ito_residual_tol: ITO_RESIDUAL_TOL,
        min_abe_slack: min_abe,
        abe_slack_tol: ABE_SLACK_TOL,
        max_commuting_gap: max_gap,
        commuting_gap_tol: COMMUTING_GAP_TOL,
        passed: max_ito <= ITO_RESIDUAL_TOL
            && min_abe >= ABE_SLACK_TOL
            && max_gap <= COMMUTING_GAP_TOL,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    fs::create_dir_all(output_dir)?;
    write_atomic(
        &output_dir.join("props_summary.json"),
        &to_json_17(&summary)?,
    )?;
    Ok(summary)
}

/// 17-significant-digit decimal form used in every output file.
pub fn fmt_g17(x: f64) -> String {
    debug_assert!(x.is_finite(), "non-finite value in output: {x}");
    format!("{x:.16e}")
}

struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "non-finite float in JSON output",
            ));
        }
        write!(writer, "{value:.16e}")
    }
}

/// Serialize to JSON with all floats at 17 significant digits.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci17);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Io(io::Error::new(io::ErrorKind::InvalidData, e.to_string())))?;
    buf.push(b'\n');
    Ok(buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fixed-column CSV of the per-time ensemble statistics. `lhs_rate` and
/// `margin_sigmas` are empty outside the window where the centered
/// finite difference exists.
pub fn timeseries_csv(stats: &crate::bounds::EnsembleStats) -> String {
    let mut out = String::with_capacity(stats.times.len() * 220);
    out.push_str(
        "t,mean_entropy,entropy_stderr,lhs_rate,rhs_mean,rhs_stderr,commutator_term,var_term,genvar_term,margin_sigmas,floored_fraction\n",
    );
    for (k, &t) in stats.times.iter().enumerate() {
        let verdict = if !stats.verdicts.is_empty() && k >= stats.verdict_start {
            stats.verdicts.get(k - stats.verdict_start)
        } else {
            None
        };
        let (lhs, margin) = match verdict {
            Some(v) => (fmt_g17(v.lhs_rate), fmt_g17(v.margin_sigmas)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_g17(t),
            fmt_g17(stats.mean_entropy[k]),
            fmt_g17(stats.entropy_stderr[k]),
            lhs,
            fmt_g17(stats.rhs_mean[k]),
            fmt_g17(stats.rhs_stderr[k]),
            fmt_g17(stats.commutator_mean[k]),
            fmt_g17(stats.var_mean[k]),
            fmt_g17(stats.genvar_mean[k]),
            margin,
            fmt_g17(stats.floored_fraction[k]),
        ));
    }
    out
}
