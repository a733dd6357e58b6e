//! Entropy-change decomposition and the three-term lower bound on the
//! ensemble-averaged entropy rate:
//!
//!   d𝔼[S]/dt ≥ 𝔼[⟨[L†,L]⟩] - 3𝔼[Var[M]] - 𝔼[Var^gen[M]]
//!
//! together with the algebraic identity behind the Itô correction term and
//! ensemble-level statistical verification of the inequality.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrators::{ModelSpec, TrajectoryRecord};
use crate::statecore::{
    dissipative_commutator, generalized_variance_with, require_hermitian, trace_product, CMat,
    DensityMatrix, SpectralFloor, Spectrum,
};
use crate::superops::{dissipator, innovation};

/// The three terms of the bound at one state, and their combination
/// rhs = ⟨[L†,L]⟩ - 3·Var[M] - Var^gen[M].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundReport {
    pub commutator_term: f64,
    pub var_term: f64,
    pub genvar_term: f64,
    pub rhs: f64,
    /// Whether the eigenvalue floor was active when forming ρ⁻¹.
    pub floored: bool,
}

/// Evaluate every term of the bound at a single state. The derivation
/// assumes a Hermitian measurement operator, so non-Hermitian M is rejected.
pub fn bound_terms(
    rho: &DensityMatrix,
    model: &ModelSpec,
    floor: &SpectralFloor,
) -> Result<BoundReport> {
    if !model.measurement_is_hermitian() {
        return Err(Error::NonHermitianMeasurement);
    }
    let spectrum = Spectrum::of(rho, floor)?;
    let commutator_term = dissipative_commutator(model.dissipation(), rho)?;
    let m = model.measurement();
    let mean = trace_product(m, rho.mat()).re;
    let var_term = trace_product(&(m * m), rho.mat()).re - mean * mean;
    let genvar_term = generalized_variance_with(m, rho, &spectrum);
    let rhs = commutator_term - 3.0 * var_term - genvar_term;
    Ok(BoundReport {
        commutator_term,
        var_term,
        genvar_term,
        rhs,
        floored: spectrum.floored(),
    })
}

/// The four trace terms of the entropy increment
///
///   dS = [meas_lindblad + diss_lindblad + ito_term] dt + noise_coeff dW,
///
/// each evaluated with the floored ln ρ and ρ⁻¹.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftTerms {
    /// -Tr{𝒟[M]ρ ln ρ}
    pub meas_lindblad: f64,
    /// -Tr{𝒟[L]ρ ln ρ}
    pub diss_lindblad: f64,
    /// -Tr{ρ⁻¹ (ℋ[M]ρ)²}
    pub ito_term: f64,
    /// -Tr{ℋ[M]ρ ln ρ}, the coefficient of dW
    pub noise_coeff: f64,
}

impl DriftTerms {
    /// Deterministic part of dS/dt.
    pub fn drift(&self) -> f64 {
        self.meas_lindblad + self.diss_lindblad + self.ito_term
    }
}

pub fn drift_terms(
    rho: &DensityMatrix,
    model: &ModelSpec,
    floor: &SpectralFloor,
) -> Result<DriftTerms> {
    let spectrum = Spectrum::of(rho, floor)?;
    let ln_rho = spectrum.ln();
    let inv = spectrum.inverse();
    let dm = dissipator(model.measurement(), rho.mat())?;
    let dl = dissipator(model.dissipation(), rho.mat())?;
    let x = innovation(model.measurement(), rho.mat())?;
    Ok(DriftTerms {
        meas_lindblad: -trace_product(&dm, &ln_rho).re,
        diss_lindblad: -trace_product(&dl, &ln_rho).re,
        ito_term: -trace_product(&inv, &(&x * &x)).re,
        noise_coeff: -trace_product(&x, &ln_rho).re,
    })
}

/// Residual of the Itô-expansion identity
///
///   -Tr{ρ⁻¹(ℋ[M]ρ)²} = -3Tr[M²ρ] + 4Tr[Mρ]² - Tr[ρ⁻¹Mρ²M]
///
/// evaluated along two independent algebraic routes. On full-rank states the
/// residual is pure rounding (≤ 1e-10).
pub fn ito_identity_check(rho: &DensityMatrix, m: &CMat, floor: &SpectralFloor) -> Result<f64> {
    require_hermitian(m)?;
    let spectrum = Spectrum::of(rho, floor)?;
    let inv = spectrum.inverse();
    let x = innovation(m, rho.mat())?;
    let lhs = -trace_product(&inv, &(&x * &x)).re;

    let mean = trace_product(m, rho.mat()).re;
    let second = trace_product(&(m * m), rho.mat()).re;
    let rho_sq = rho.mat() * rho.mat();
    let sandwich = trace_product(&(&inv * m), &(&rho_sq * m)).re;
    let rhs = -3.0 * second + 4.0 * mean * mean - sandwich;
    Ok((lhs - rhs).abs())
}

/// Slack of the dissipator-entropy inequality -Tr{𝒟[A]ρ ln ρ} ≥ ⟨[A†,A]⟩.
/// Nonnegative (up to rounding) for arbitrary A, Hermitian or not.
pub fn abe_term_check(rho: &DensityMatrix, a: &CMat, floor: &SpectralFloor) -> Result<f64> {
    let spectrum = Spectrum::of(rho, floor)?;
    let ln_rho = spectrum.ln();
    let da = dissipator(a, rho.mat())?;
    let entropy_term = -trace_product(&da, &ln_rho).re;
    let adj = a.adjoint();
    let commutator =
        (trace_product(&(&adj * a), rho.mat()) - trace_product(&(a * &adj), rho.mat())).re;
    Ok(entropy_term - commutator)
}

/// Central finite-difference estimate of d𝔼[S]/dt at `t_index`, computed as
/// the ensemble mean of per-trajectory difference quotients so that the
/// standard error reflects trajectory-to-trajectory correlation.
pub fn ensemble_entropy_rate(
    records: &[TrajectoryRecord],
    t_index: usize,
    window: usize,
) -> Result<(f64, f64)> {
    if records.len() < 2 {
        return Err(Error::TooFewTrajectories {
            need: 2,
            got: records.len(),
        });
    }
    let grid = &records[0].grid;
    if window == 0 || t_index < window || t_index + window > grid.steps {
        return Err(Error::WindowOutOfRange {
            window,
            index: t_index,
            steps: grid.steps,
        });
    }
    let span = 2.0 * window as f64 * grid.dt;
    let quotients: Vec<f64> = records
        .iter()
        .map(|r| (r.entropy[t_index + window] - r.entropy[t_index - window]) / span)
        .collect();
    Ok(mean_and_stderr(&quotients))
}

/// Inequality check at one sampled time: margin_sigmas < -3 flags violation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InequalityVerdict {
    pub time: f64,
    /// Finite-difference d𝔼[S]/dt.
    pub lhs_rate: f64,
    pub lhs_stderr: f64,
    /// Ensemble mean of BoundReport.rhs.
    pub rhs_mean: f64,
    pub rhs_stderr: f64,
    /// (lhs_rate - rhs_mean) / sqrt(lhs_stderr² + rhs_stderr²).
    pub margin_sigmas: f64,
}

impl InequalityVerdict {
    pub fn violated(&self) -> bool {
        self.margin_sigmas < -3.0
    }
}

/// Per-time ensemble statistics over a trajectory set: the entropy curve,
/// the bound terms, and (where the finite-difference window fits) the
/// inequality verdicts.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_entropy: Vec<f64>,
    pub entropy_stderr: Vec<f64>,
    pub commutator_mean: Vec<f64>,
    pub var_mean: Vec<f64>,
    pub genvar_mean: Vec<f64>,
    pub rhs_mean: Vec<f64>,
    pub rhs_stderr: Vec<f64>,
    /// Fraction of trajectories whose state needed the eigenvalue floor.
    pub floored_fraction: Vec<f64>,
    pub window: usize,
    /// First time index carrying a verdict (= window), when any exist.
    pub verdict_start: usize,
    pub verdicts: Vec<InequalityVerdict>,
}

impl EnsembleStats {
    pub fn min_margin(&self) -> Option<(f64, f64)> {
        self.verdicts
            .iter()
            .map(|v| (v.margin_sigmas, v.time))
            .min_by(|a, b| a.0.partial_cmp(&b.0).expect("margins are finite"))
    }

    pub fn violation_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.violated()).count()
    }
}

/// Evaluate bound terms and entropy statistics at every grid node and the
/// inequality verdicts wherever `t_index ± window` fits. Records must share
/// one grid. Time indices are processed in parallel; within one index the
/// reduction runs in trajectory order, so results are deterministic.
pub fn analyze_ensemble(
    records: &[TrajectoryRecord],
    model: &ModelSpec,
    floor: &SpectralFloor,
    window: usize,
) -> Result<EnsembleStats> {
    if records.is_empty() {
        return Err(Error::TooFewTrajectories { need: 1, got: 0 });
    }
    if !model.measurement_is_hermitian() {
        return Err(Error::NonHermitianMeasurement);
    }
    let grid = &records[0].grid;
    if records.iter().any(|r| r.grid != *grid) {
        return Err(Error::InconsistentRecords);
    }
    let steps = grid.steps;
    let n = records.len();

    struct TimeSlice {
        mean_entropy: f64,
        entropy_stderr: f64,
        commutator_mean: f64,
        var_mean: f64,
        genvar_mean: f64,
        rhs_mean: f64,
        rhs_stderr: f64,
        floored_fraction: f64,
    }

    let slices: Vec<TimeSlice> = (0..=steps)
        .into_par_iter()
        .map(|k| -> Result<TimeSlice> {
            let mut rhs = Vec::with_capacity(n);
            let mut commutator_sum = 0.0;
            let mut var_sum = 0.0;
            let mut genvar_sum = 0.0;
            let mut floored = 0usize;
            for record in records {
                let report = bound_terms(&record.states[k], model, floor)?;
                commutator_sum += report.commutator_term;
                var_sum += report.var_term;
                genvar_sum += report.genvar_term;
                if report.floored {
                    floored += 1;
                }
                rhs.push(report.rhs);
            }
            let entropies: Vec<f64> = records.iter().map(|r| r.entropy[k]).collect();
            let (mean_entropy, entropy_stderr) = mean_and_stderr(&entropies);
            let (rhs_mean, rhs_stderr) = mean_and_stderr(&rhs);
            Ok(TimeSlice {
                mean_entropy,
                entropy_stderr,
                commutator_mean: commutator_sum / n as f64,
                var_mean: var_sum / n as f64,
                genvar_mean: genvar_sum / n as f64,
                rhs_mean,
                rhs_stderr,
                floored_fraction: floored as f64 / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut verdicts = Vec::new();
    if n >= 2 && window >= 1 && 2 * window <= steps {
        for (offset, slice) in slices[window..=steps - window].iter().enumerate() {
            let k = window + offset;
            let (lhs_rate, lhs_stderr) = ensemble_entropy_rate(records, k, window)?;
            let combined = (lhs_stderr * lhs_stderr + slice.rhs_stderr * slice.rhs_stderr).sqrt();
            let margin_sigmas =
                ((lhs_rate - slice.rhs_mean) / combined.max(1e-300)).clamp(-1e12, 1e12);
            verdicts.push(InequalityVerdict {
                time: grid.time(k),
                lhs_rate,
                lhs_stderr,
                rhs_mean: slice.rhs_mean,
                rhs_stderr: slice.rhs_stderr,
                margin_sigmas,
            });
        }
    }

    Ok(EnsembleStats {
        times: (0..=steps).map(|k| grid.time(k)).collect(),
        mean_entropy: slices.iter().map(|s| s.mean_entropy).collect(),
        entropy_stderr: slices.iter().map(|s| s.entropy_stderr).collect(),
        commutator_mean: slices.iter().map(|s| s.commutator_mean).collect(),
        var_mean: slices.iter().map(|s| s.var_mean).collect(),
        genvar_mean: slices.iter().map(|s| s.genvar_mean).collect(),
        rhs_mean: slices.iter().map(|s| s.rhs_mean).collect(),
        rhs_stderr: slices.iter().map(|s| s.rhs_stderr).collect(),
        floored_fraction: slices.iter().map(|s| s.floored_fraction).collect(),
        window,
        verdict_start: window,
        verdicts,
    })
}

/// The inequality verdicts alone; see [`analyze_ensemble`].
pub fn verify_inequality(
    records: &[TrajectoryRecord],
    model: &ModelSpec,
    floor: &SpectralFloor,
    window: usize,
) -> Result<Vec<InequalityVerdict>> {
    Ok(analyze_ensemble(records, model, floor, window)?.verdicts)
}

/// Sample mean and its standard error (ddof = 1); stderr is 0 for n < 2.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n > 0, "mean of empty sample");
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let var = ss / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::ControlPolicy;
    use crate::models::ops;
    use crate::statecore::cr;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;

    fn floor() -> SpectralFloor {
        SpectralFloor::default()
    }

    fn diag2(a: f64, b: f64) -> DensityMatrix {
        DensityMatrix::new(
            CMat::from_diagonal(&DVector::from_vec(vec![cr(a), cr(b)])),
            1e-12,
        )
        .unwrap()
    }

    fn model(m: CMat, l: CMat) -> ModelSpec {
        ModelSpec::new(
            ops::sigma_z().scale(0.5),
            m,
            l,
            ControlPolicy::Constant(0.0),
        )
        .unwrap()
    }

    #[test]
    fn bound_terms_worked_example() {
        // ρ = I/2, M = σz, L = σ-: rhs = 0 - 3·1 - 1 = -4
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let spec = model(ops::sigma_z(), ops::sigma_minus());
        let report = bound_terms(&mixed, &spec, &floor()).unwrap();
        assert_abs_diff_eq!(report.commutator_term, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(report.var_term, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.genvar_term, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.rhs, -4.0, epsilon = 1e-12);
        assert!(!report.floored);
        // rhs reproducible from the three stored terms
        assert_abs_diff_eq!(
            report.rhs,
            report.commutator_term - 3.0 * report.var_term - report.genvar_term,
            epsilon = 1e-14
        );
    }

    #[test]
    fn bound_terms_zero_measurement_hermitian_l() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let spec = model(CMat::zeros(2, 2), ops::sigma_z());
        let report = bound_terms(&mixed, &spec, &floor()).unwrap();
        assert_eq!(report.commutator_term, 0.0);
        assert_eq!(report.rhs, 0.0);
    }

    #[test]
    fn bound_terms_skew_state_sigma_x() {
        // oracle: Var = 1, Var^gen = 0.01/0.9 + 0.81/0.1
        let rho = diag2(0.9, 0.1);
        let spec = model(ops::sigma_x(), CMat::zeros(2, 2));
        let report = bound_terms(&rho, &spec, &floor()).unwrap();
        let expected = -3.0 - (0.01 / 0.9 + 0.81 / 0.1);
        assert_abs_diff_eq!(report.rhs, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(report.rhs, -11.11111, epsilon = 1e-4);
    }

    #[test]
    fn bound_terms_rejects_non_hermitian_m() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let spec = model(ops::sigma_minus(), CMat::zeros(2, 2));
        assert!(matches!(
            bound_terms(&mixed, &spec, &floor()),
            Err(Error::NonHermitianMeasurement)
        ));
    }

    #[test]
    fn drift_terms_examples() {
        // ρ = I/2, M = σz: ℋ[M]ρ = σz, ρ⁻¹ = 2I, ito = -Tr[2I σz²] = -4
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let spec = model(ops::sigma_z(), ops::sigma_minus());
        let terms = drift_terms(&mixed, &spec, &floor()).unwrap();
        assert_abs_diff_eq!(terms.ito_term, -4.0, epsilon = 1e-12);
        // ln(I/2) ∝ I, so both Lindblad terms vanish at the mixed state
        assert_abs_diff_eq!(terms.meas_lindblad, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(terms.diss_lindblad, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(terms.noise_coeff, 0.0, epsilon = 1e-12);

        // measurement eigenstate (floored): ℋ[M]ρ = 0 exactly
        let ground = DensityMatrix::from_pure(&[cr(1.0), cr(0.0)]).unwrap();
        let terms = drift_terms(&ground, &spec, &floor()).unwrap();
        assert_abs_diff_eq!(terms.ito_term, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(terms.noise_coeff, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ito_identity_worked_examples() {
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!(ito_identity_check(&mixed, &ops::sigma_z(), &floor()).unwrap() < 1e-13);

        // commuting diagonal pair: both routes equal -4 Var[M]
        let rho = diag2(0.7, 0.3);
        let spec = Spectrum::of(&rho, &floor()).unwrap();
        let inv = spec.inverse();
        let x = innovation(&ops::sigma_z(), rho.mat()).unwrap();
        let lhs = -trace_product(&inv, &(&x * &x)).re;
        let var = crate::statecore::variance(&ops::sigma_z(), &rho).unwrap();
        assert_abs_diff_eq!(lhs, -4.0 * var, epsilon = 1e-12);
        assert!(ito_identity_check(&rho, &ops::sigma_z(), &floor()).unwrap() < 1e-12);
    }

    #[test]
    fn abe_term_examples() {
        // A = σ-, ρ = I/2: ln ρ ∝ I so the entropy term vanishes; ⟨[σ+,σ-]⟩ = 0
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        let slack = abe_term_check(&mixed, &ops::sigma_minus(), &floor()).unwrap();
        assert_abs_diff_eq!(slack, 0.0, epsilon = 1e-12);

        // Hermitian A: the commutator vanishes, slack = -Tr{𝒟[A]ρ ln ρ} ≥ 0
        let rho = diag2(0.8, 0.2);
        let slack = abe_term_check(&rho, &ops::sigma_x(), &floor()).unwrap();
        assert!(slack >= -1e-12, "slack = {slack}");
    }

    #[test]
    fn mean_and_stderr_basics() {
        let (m, se) = mean_and_stderr(&[1.0, 1.0, 1.0]);
        assert_eq!(m, 1.0);
        assert_eq!(se, 0.0);
        let (m, se) = mean_and_stderr(&[0.0, 2.0]);
        assert_eq!(m, 1.0);
        // sample var = 2, stderr = sqrt(2/2) = 1
        assert_abs_diff_eq!(se, 1.0, epsilon = 1e-15);
        let (_, se1) = mean_and_stderr(&[5.0]);
        assert_eq!(se1, 0.0);
    }
}
