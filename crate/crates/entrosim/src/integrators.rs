//! Trajectory-level stochastic integration of the monitored dynamics
//!
//!   dρ = -i[u_t H, ρ]dt + 𝒟[M]ρ dt + 𝒟[L]ρ dt + ℋ[M]ρ dW
//!
//! via Euler–Maruyama (strong order 0.5 — the derivation being checked is
//! first-order Itô, so higher-order schemes buy nothing here), plus a
//! deterministic RK4 integrator for the state-independent-control master
//! equation that serves as the ensemble-average oracle.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::statecore::{
    all_finite, cr, entropy_from_eigenvalues, hermitian_part, hermiticity_error, trace_product,
    CMat, DensityMatrix, SpectralFloor, HERMITICITY_TOL,
};
use crate::superops::{dissipator_unchecked, innovation_unchecked};

/// Control input u_t: either an externally fixed constant or proportional
/// feedback on the expectation of a Hermitian observable.
#[derive(Debug, Clone)]
pub enum ControlPolicy {
    Constant(f64),
    Proportional { observable: CMat, gain: f64 },
}

impl ControlPolicy {
    pub fn value(&self, rho: &CMat) -> f64 {
        match self {
            ControlPolicy::Constant(c) => *c,
            ControlPolicy::Proportional { observable, gain } => {
                gain * trace_product(observable, rho).re
            }
        }
    }

    pub fn is_state_independent(&self) -> bool {
        matches!(self, ControlPolicy::Constant(_))
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ControlPolicy::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::NonFinite);
                }
            }
            ControlPolicy::Proportional { observable, gain } => {
                if !gain.is_finite() || !all_finite(observable) {
                    return Err(Error::NonFinite);
                }
                if observable.nrows() != dim || observable.ncols() != dim {
                    return Err(Error::DimMismatch {
                        left: observable.nrows(),
                        right: dim,
                    });
                }
                let asymmetry = hermiticity_error(observable);
                if asymmetry > HERMITICITY_TOL {
                    return Err(Error::NonHermitian {
                        asymmetry,
                        tol: HERMITICITY_TOL,
                    });
                }
            }
        }
        Ok(())
    }
}

/// The full model: Hamiltonian H, monitored channel M, uncontrolled
/// dissipation channel L, and the control policy (ħ = 1 throughout).
#[derive(Debug, Clone)]
pub struct ModelSpec {
    dim: usize,
    h: CMat,
    m: CMat,
    l: CMat,
    control: ControlPolicy,
    m_hermitian: bool,
}

impl ModelSpec {
    pub fn new(h: CMat, m: CMat, l: CMat, control: ControlPolicy) -> Result<Self> {
        let dim = h.nrows();
        if dim < 2 {
            return Err(Error::DimTooSmall(dim));
        }
        for op in [&h, &m, &l] {
            if op.nrows() != dim || op.ncols() != dim {
                return Err(Error::DimMismatch {
                    left: op.nrows().max(op.ncols()),
                    right: dim,
                });
            }
            if !all_finite(op) {
                return Err(Error::NonFinite);
            }
        }
        let h_asym = hermiticity_error(&h);
        if h_asym > HERMITICITY_TOL {
            return Err(Error::NonHermitian {
                asymmetry: h_asym,
                tol: HERMITICITY_TOL,
            });
        }
        control.validate(dim)?;
        let m_hermitian = hermiticity_error(&m) <= HERMITICITY_TOL;
        Ok(Self {
            dim,
            h,
            m,
            l,
            control,
            m_hermitian,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn hamiltonian(&self) -> &CMat {
        &self.h
    }
    pub fn measurement(&self) -> &CMat {
        &self.m
    }
    pub fn dissipation(&self) -> &CMat {
        &self.l
    }
    pub fn control(&self) -> &ControlPolicy {
        &self.control
    }
    /// Whether M passed the Hermiticity check at construction; the bound
    /// derivation requires this.
    pub fn measurement_is_hermitian(&self) -> bool {
        self.m_hermitian
    }

    /// Drift part of the generator: -i u [H, ρ] + 𝒟[M]ρ + 𝒟[L]ρ.
    pub(crate) fn drift(&self, rho: &CMat, u: f64) -> CMat {
        let comm = (&self.h * rho - rho * &self.h) * Complex64::new(0.0, -u);
        comm + dissipator_unchecked(&self.m, rho) + dissipator_unchecked(&self.l, rho)
    }
}

/// Uniform time grid. Stochastic runs refuse dt > 1e-2 unless
/// `allow_coarse_dt` is set: at that resolution Euler–Maruyama error and
/// sanitize corrections dominate the quantities being measured.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
    pub allow_coarse_dt: bool,
}

/// Largest dt accepted for stochastic integration without the explicit
/// override flag.
pub const MAX_STOCHASTIC_DT: f64 = 1e-2;

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(Error::BadGrid(format!("invalid t0={t0} or dt={dt}")));
        }
        if steps == 0 {
            return Err(Error::BadGrid("steps must be positive".into()));
        }
        Ok(Self {
            t0,
            dt,
            steps,
            allow_coarse_dt: false,
        })
    }

    pub fn with_coarse_dt(mut self) -> Self {
        self.allow_coarse_dt = true;
        self
    }

    pub fn time(&self, index: usize) -> f64 {
        self.t0 + index as f64 * self.dt
    }

    fn check_stochastic(&self) -> Result<()> {
        if self.dt > MAX_STOCHASTIC_DT && !self.allow_coarse_dt {
            return Err(Error::BadGrid(format!(
                "dt = {} exceeds {} for a stochastic run; set allow_coarse_dt to override",
                self.dt, MAX_STOCHASTIC_DT
            )));
        }
        Ok(())
    }
}

/// Post-step projection back onto valid density matrices, applied in the
/// order: Hermitize, clip negative eigenvalues at zero, renormalize trace.
/// Each stage restores one invariant without disturbing the previous one.
#[derive(Debug, Clone)]
pub struct SanitizePolicy {
    pub hermitize: bool,
    pub clip_negative_eigenvalues: bool,
    pub renormalize_trace: bool,
    /// Abort the step when the pre-sanitize spectrum dips below minus this.
    pub max_negativity_before_abort: f64,
}

impl Default for SanitizePolicy {
    fn default() -> Self {
        Self {
            hermitize: true,
            clip_negative_eigenvalues: true,
            renormalize_trace: true,
            max_negativity_before_abort: 1e-3,
        }
    }
}

impl SanitizePolicy {
    pub fn validate(&self) -> Result<()> {
        // abort threshold must exceed the positivity tolerance clipping acts at
        let threshold = self.max_negativity_before_abort;
        if threshold.is_nan() || threshold <= 1e-9 {
            return Err(Error::BadSanitizePolicy(self.max_negativity_before_abort));
        }
        Ok(())
    }
}

/// One sanitized integration step: the new state, its eigenvalues (free
/// byproduct of sanitizing; used for entropy sampling), and the magnitude of
/// the worst pre-sanitize negative eigenvalue.
#[derive(Debug)]
pub struct StepOutcome {
    pub state: DensityMatrix,
    pub eigenvalues: Vec<f64>,
    pub negativity: f64,
}

fn sanitize(raw: CMat, policy: &SanitizePolicy) -> Result<StepOutcome> {
    if !all_finite(&raw) {
        return Err(Error::NonFinite);
    }
    let h = if policy.hermitize {
        hermitian_part(&raw)
    } else {
        raw
    };
    let eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure);
    }
    let min_eig = eig.eigenvalues.min();
    let negativity = (-min_eig).max(0.0);
    if negativity > policy.max_negativity_before_abort {
        return Err(Error::ExcessNegativity {
            negativity,
            threshold: policy.max_negativity_before_abort,
        });
    }

    let clipped: Vec<f64> = if policy.clip_negative_eigenvalues {
        eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect()
    } else {
        eig.eigenvalues.iter().cloned().collect()
    };
    let total: f64 = clipped.iter().sum();
    if policy.renormalize_trace && total <= 0.5 {
        return Err(Error::TraceCollapse(total));
    }
    let scale = if policy.renormalize_trace { total } else { 1.0 };

    let (mat, eigenvalues) = if policy.clip_negative_eigenvalues && min_eig < 0.0 {
        // rebuild from the clipped spectrum
        let vals: Vec<f64> = clipped.iter().map(|&x| x / scale).collect();
        let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&x| cr(x)),
        ));
        let mat = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
        (mat, vals)
    } else {
        let vals: Vec<f64> = clipped.iter().map(|&x| x / scale).collect();
        (h.scale(1.0 / scale), vals)
    };

    Ok(StepOutcome {
        state: DensityMatrix::from_sanitized(mat),
        eigenvalues,
        negativity,
    })
}

/// One Euler–Maruyama step of the stochastic master equation followed by
/// sanitization. `dw` must be a Normal(0, dt) draw.
pub fn step_sme(
    rho: &DensityMatrix,
    model: &ModelSpec,
    dt: f64,
    dw: f64,
    policy: &SanitizePolicy,
) -> Result<StepOutcome> {
    if rho.dim() != model.dim() {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: model.dim(),
        });
    }
    policy.validate()?;
    let u = model.control.value(rho.mat());
    let drift = model.drift(rho.mat(), u);
    let noise = innovation_unchecked(&model.m, rho.mat());
    let raw = rho.mat() + drift.scale(dt) + noise.scale(dw);
    sanitize(raw, policy)
}

/// A Normal(0, dt) Wiener increment; deterministic given the rng state.
pub fn sample_wiener<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> f64 {
    let normal = Normal::new(0.0, dt.sqrt()).expect("dt must be positive and finite");
    normal.sample(rng)
}

/// One stochastic trajectory: the conditioned states, Wiener increments,
/// measurement record, and per-step entropy samples.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub grid: TimeGrid,
    /// states[k] = ρ at grid.time(k); length steps + 1.
    pub states: Vec<DensityMatrix>,
    /// dw[k] drives the step from k to k+1; length steps.
    pub dw: Vec<f64>,
    /// Measurement record increments dy[k] = Tr[(M+M†)ρ_k]dt + dw[k].
    pub y: Vec<f64>,
    /// entropy[k] = S(states[k]); length steps + 1.
    pub entropy: Vec<f64>,
    pub seed: u64,
    /// Worst pre-sanitize negativity seen along the trajectory.
    pub max_negativity: f64,
}

impl TrajectoryRecord {
    /// Consistency of the stored lengths with the grid, and state invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.steps;
        if self.states.len() != n + 1
            || self.dw.len() != n
            || self.y.len() != n
            || self.entropy.len() != n + 1
        {
            return Err(Error::InconsistentRecords);
        }
        for state in &self.states {
            state.validate()?;
        }
        Ok(())
    }

    pub fn final_state(&self) -> &DensityMatrix {
        self.states.last().expect("record holds steps+1 states")
    }
}

/// Integrate one trajectory of the SME. Fully reproducible from
/// (model, grid, rho0, seed): the trajectory owns a counter-seeded rng.
pub fn simulate_trajectory(
    model: &ModelSpec,
    grid: &TimeGrid,
    rho0: &DensityMatrix,
    seed: u64,
    policy: &SanitizePolicy,
    floor: &SpectralFloor,
) -> Result<TrajectoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_core(model, grid, rho0, seed, policy, floor, |_| {
        sample_wiener(&mut rng, grid.dt)
    })
}

/// Integrate one trajectory replaying an explicit Wiener-increment sequence
/// (recorded noise, or a pairwise-summed refinement of one Brownian path for
/// strong-convergence measurements). `increments.len()` must equal
/// `grid.steps`; each entry should be a Normal(0, dt) draw.
pub fn simulate_trajectory_with_increments(
    model: &ModelSpec,
    grid: &TimeGrid,
    rho0: &DensityMatrix,
    increments: &[f64],
    policy: &SanitizePolicy,
    floor: &SpectralFloor,
) -> Result<TrajectoryRecord> {
    if increments.len() != grid.steps {
        return Err(Error::BadGrid(format!(
            "got {} increments for a {}-step grid",
            increments.len(),
            grid.steps
        )));
    }
    simulate_core(model, grid, rho0, 0, policy, floor, |step| increments[step])
}

fn simulate_core(
    model: &ModelSpec,
    grid: &TimeGrid,
    rho0: &DensityMatrix,
    seed: u64,
    policy: &SanitizePolicy,
    floor: &SpectralFloor,
    mut draw: impl FnMut(usize) -> f64,
) -> Result<TrajectoryRecord> {
    grid.check_stochastic()?;
    policy.validate()?;
    if rho0.dim() != model.dim() {
        return Err(Error::DimMismatch {
            left: rho0.dim(),
            right: model.dim(),
        });
    }

    let m_plus_adj = &model.m + model.m.adjoint();

    let mut states = Vec::with_capacity(grid.steps + 1);
    let mut dw_seq = Vec::with_capacity(grid.steps);
    let mut y_seq = Vec::with_capacity(grid.steps);
    let mut entropy = Vec::with_capacity(grid.steps + 1);
    let mut max_negativity = 0.0f64;

    let vals0 = rho0.eigenvalues()?;
    entropy.push(entropy_from_eigenvalues(vals0.as_slice(), floor));
    states.push(rho0.clone());

    for step in 0..grid.steps {
        let rho = states.last().expect("nonempty");
        let dw = draw(step);
        let dy = trace_product(&m_plus_adj, rho.mat()).re * grid.dt + dw;
        let outcome = step_sme(rho, model, grid.dt, dw, policy).map_err(|e| match e {
            Error::ExcessNegativity {
                negativity,
                threshold,
            } => Error::StepAbort {
                step,
                negativity,
                threshold,
            },
            other => other,
        })?;
        max_negativity = max_negativity.max(outcome.negativity);
        entropy.push(entropy_from_eigenvalues(&outcome.eigenvalues, floor));
        states.push(outcome.state);
        dw_seq.push(dw);
        y_seq.push(dy);
    }

    Ok(TrajectoryRecord {
        grid: grid.clone(),
        states,
        dw: dw_seq,
        y: y_seq,
        entropy,
        seed,
        max_negativity,
    })
}

/// Simulate `n` independent trajectories in parallel, seeded
/// `base_seed + index`. Output order is by trajectory index, so ensemble
/// reductions are deterministic.
pub fn simulate_ensemble(
    model: &ModelSpec,
    grid: &TimeGrid,
    rho0: &DensityMatrix,
    n: usize,
    base_seed: u64,
    policy: &SanitizePolicy,
    floor: &SpectralFloor,
) -> Result<Vec<TrajectoryRecord>> {
    if n == 0 {
        return Err(Error::TooFewTrajectories { need: 1, got: 0 });
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            simulate_trajectory(
                model,
                grid,
                rho0,
                base_seed.wrapping_add(i as u64),
                policy,
                floor,
            )
        })
        .collect()
}

/// One classical RK4 step of the deterministic master equation
/// dρ/dt = -i[uH, ρ] + 𝒟[M]ρ + 𝒟[L]ρ, valid only for state-independent
/// control (the ensemble equation does not close otherwise).
pub fn step_me(rho: &DensityMatrix, model: &ModelSpec, dt: f64) -> Result<DensityMatrix> {
    let u = match model.control {
        ControlPolicy::Constant(c) => c,
        ControlPolicy::Proportional { .. } => return Err(Error::StateDependentControl),
    };
    if rho.dim() != model.dim() {
        return Err(Error::DimMismatch {
            left: rho.dim(),
            right: model.dim(),
        });
    }
    let f = |state: &CMat| model.drift(state, u);
    let y0 = rho.mat();
    let k1 = f(y0);
    let k2 = f(&(y0 + k1.scale(dt / 2.0)));
    let k3 = f(&(y0 + k2.scale(dt / 2.0)));
    let k4 = f(&(y0 + k3.scale(dt)));
    let raw = y0 + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
    Ok(sanitize(raw, &SanitizePolicy::default())?.state)
}

/// Integrate the master equation over the whole grid; states at every node.
pub fn simulate_master_equation(
    model: &ModelSpec,
    grid: &TimeGrid,
    rho0: &DensityMatrix,
) -> Result<Vec<DensityMatrix>> {
    let mut states = Vec::with_capacity(grid.steps + 1);
    states.push(rho0.clone());
    for _ in 0..grid.steps {
        let next = step_me(states.last().expect("nonempty"), model, grid.dt)?;
        states.push(next);
    }
    Ok(states)
}
