//! Derivative-free search over carrier frequencies and Fourier envelope
//! coefficients, scored by simulated transfer infidelity.

mod simplex;

pub use simplex::{nelder_mead, SimplexOutcome, SimplexSettings};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use num_traits::Float;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{convergence_check, Convergence, Propagator, SimulationConfig, StateVector};
use crate::jc::{min_frequency_separation, DressedLabel, DriveOperatorKind, SystemParams};
use crate::pulses::{chain_amplitudes, rotation_time, LadderBasis, Pulse, Tone};
use crate::{Error, Result, MHZ_NS};

/// A Fock-ladder transfer to optimize.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationProblem {
    pub params: SystemParams,
    /// Target level N.
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
    /// Pulse duration (ns).
    #[cfg_attr(feature = "serde", serde(rename = "T"))]
    pub duration: f64,
    /// Fourier components per tone.
    #[cfg_attr(feature = "serde", serde(rename = "M"))]
    pub m: usize,
    pub channel: DriveOperatorKind,
    pub initial_state: DressedLabel,
    pub target_state: DressedLabel,
}

impl OptimizationProblem {
    /// `|0⟩ → |N,−⟩` on the transverse qubit drive.
    pub fn fock(params: SystemParams, n: usize, duration: f64, m: usize) -> Self {
        Self {
            params,
            n,
            duration,
            m,
            channel: DriveOperatorKind::QubitTransverse,
            initial_state: DressedLabel::Ground,
            target_state: DressedLabel::Minus(n),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.m < 1 {
            return Err(Error::InvalidArgument("M must be at least 1".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "T must be positive, got {}",
                self.duration
            )));
        }
        if self.target_state != DressedLabel::Minus(self.n) {
            return Err(Error::InvalidArgument(format!(
                "target {} does not match N = {}",
                self.target_state, self.n
            )));
        }
        let ladder = self.ladder()?;
        if ladder.top() + 1 > self.params.n_max {
            return Err(Error::TruncationTooSmall {
                n_max: self.params.n_max,
                required: ladder.top() + 1,
            });
        }
        Ok(())
    }

    /// States climbed from the initial state to the target.
    pub fn ladder(&self) -> Result<LadderBasis> {
        LadderBasis::to_minus(self.initial_state, self.n)
    }

    /// Number of tones (one per ladder step).
    pub fn tones(&self) -> Result<usize> {
        Ok(self.ladder()?.steps())
    }

    /// `tones · (1 + 2M)`.
    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self.tones()? * (1 + 2 * self.m))
    }

    /// Packs a pulse as `[ω, a¹..aᴹ, b¹..bᴹ]` per tone.
    pub fn encode(&self, pulse: &Pulse) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.parameter_count()?);
        for tone in &pulse.tones {
            if tone.order() != self.m {
                return Err(Error::DimensionMismatch {
                    expected: self.m,
                    got: tone.order(),
                });
            }
            x.push(tone.carrier);
            x.extend_from_slice(&tone.a_coeffs);
            x.extend_from_slice(&tone.b_coeffs);
        }
        Ok(x)
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, x: &[f64]) -> Result<Pulse> {
        let stride = 1 + 2 * self.m;
        let expected = self.parameter_count()?;
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: x.len(),
            });
        }
        let tones = x
            .chunks(stride)
            .map(|c| {
                Tone::new(
                    c[0],
                    c[1..=self.m].to_vec(),
                    c[self.m + 1..].to_vec(),
                )
            })
            .collect();
        Pulse::fourier(self.channel, tones, self.duration)
    }
}

/// Search settings shared by every restart.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct OptimizerOptions {
    /// Simplex iterations per restart.
    pub max_iterations: usize,
    /// Extra iterations granted to the best restart once all have finished.
    pub polish_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Simplex size tolerance (MHz).
    pub x_tolerance: f64,
    pub f_tolerance: f64,
    /// Initial simplex spread of carriers (MHz).
    pub frequency_prior_halfwidth: f64,
    /// Initial simplex spread of Fourier coefficients (MHz).
    pub coeff_prior: f64,
    /// Step used while searching; the winner is re-verified with the
    /// simulation config's own step.
    pub search_dt: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            polish_iterations: 0,
            restarts: 8,
            seed: 0,
            x_tolerance: 1e-6,
            f_tolerance: 1e-12,
            frequency_prior_halfwidth: 5.0,
            coeff_prior: 5.0,
            search_dt: 3e-3,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.x_tolerance > 0.0 && self.f_tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if !(self.frequency_prior_halfwidth >= 0.0 && self.coeff_prior >= 0.0) {
            return Err(Error::InvalidArgument("priors must be non-negative".into()));
        }
        if !(self.search_dt.is_finite() && self.search_dt > 0.0) {
            return Err(Error::InvalidArgument("search_dt must be positive".into()));
        }
        Ok(())
    }

    fn settings(&self, max_iterations: usize) -> SimplexSettings {
        SimplexSettings {
            max_iterations,
            x_tolerance: self.x_tolerance,
            f_tolerance: self.f_tolerance,
        }
    }
}

/// Record of one restart.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RestartRecord {
    pub index: usize,
    /// Starting parameter vector.
    pub start: Vec<f64>,
    pub start_infidelity: f64,
    /// Best parameter vector found (equal to `start` if the restart failed).
    pub best: Vec<f64>,
    /// Search-step infidelity of `best`.
    pub infidelity: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Size of the next pass's simplex relative to the priors.
    pub step_scale: f64,
    /// Best objective after each iteration.
    pub history: Vec<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub error: Option<String>,
}

/// Best pulse across restarts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationResult {
    pub best_pulse: Pulse,
    /// `1 − F` of `best_pulse` at the simulation step.
    pub infidelity: f64,
    /// Iterations of the winning restart, polishing included.
    pub iterations: usize,
    pub restart_index: usize,
    pub objective_history: Vec<f64>,
    pub convergence: Convergence,
    /// Truncation not converged at the optimum.
    pub unconverged: bool,
    /// Smallest carrier separation Δω (MHz); absent for a single tone.
    pub min_separation: Option<f64>,
    /// Bound on the largest tone amplitude (MHz).
    pub peak_amplitude: f64,
    /// Some tone amplitude exceeds Δω.
    pub amplitude_exceeds_separation: bool,
    pub per_restart: Vec<RestartRecord>,
}

/// Analytic starting point: zig-zag carriers with the first cosine coefficient
/// set to the constant spin-rotation amplitude for a transfer in time `T`
/// (the `1 − cos` envelope averages to its coefficient).
pub fn seed_from_analytic(problem: &OptimizationProblem) -> Result<Vec<f64>> {
    problem.validate()?;
    let ladder = problem.ladder()?;
    let carriers = ladder.carriers(&problem.params)?;
    let prop = Propagator::new(&problem.params)?;
    let elements = ladder.matrix_elements(prop.basis(), problem.channel)?;
    let omega0 = 0.5 / (problem.duration * MHZ_NS);
    debug_assert!((rotation_time(omega0) - problem.duration).abs() < 1e-9 * problem.duration);
    let amps = chain_amplitudes(&elements, omega0)?;
    let mut x = Vec::with_capacity(problem.parameter_count()?);
    for (c, a) in carriers.iter().zip(&amps) {
        x.push(*c);
        x.push(*a);
        x.extend(core::iter::repeat(0.0).take(2 * problem.m - 1));
    }
    Ok(x)
}

/// Runs `options.restarts` simplex searches and returns the best pulse.
pub fn optimize_fock_pulse(
    problem: &OptimizationProblem,
    options: &OptimizerOptions,
    config: &SimulationConfig,
) -> Result<OptimizationResult> {
    optimize_with_checkpoints(problem, options, config, &[], |_| {})
}

/// As [`optimize_fock_pulse`], reusing finished restarts from `completed` and
/// reporting each newly finished restart to `checkpoint`.
pub fn optimize_with_checkpoints<C>(
    problem: &OptimizationProblem,
    options: &OptimizerOptions,
    config: &SimulationConfig,
    completed: &[RestartRecord],
    mut checkpoint: C,
) -> Result<OptimizationResult>
where
    C: FnMut(&RestartRecord),
{
    problem.validate()?;
    options.validate()?;
    config.validate()?;

    let seed = seed_from_analytic(problem)?;
    let steps = simplex_steps(problem, options);
    let prop = Propagator::new(&problem.params)?;
    let search_config = config.with_dt(options.search_dt);
    let objective = |x: &[f64]| -> f64 {
        match infidelity_of(problem, &prop, x, &search_config) {
            Ok(v) => v,
            Err(_) => f64::NAN,
        }
    };

    let mut records: Vec<RestartRecord> = Vec::with_capacity(options.restarts);
    for index in 0..options.restarts {
        if let Some(done) = completed.iter().find(|r| r.index == index) {
            records.push(done.clone());
            continue;
        }
        let start = restart_start(problem, options, &seed, index);
        let mut record = new_record(index, start, &objective);
        extend_search(&mut record, options.max_iterations, &steps, options, &objective);
        checkpoint(&record);
        records.push(record);
    }

    // Lowest infidelity wins; the earlier restart wins ties.
    let winner = records
        .iter()
        .filter(|r| r.infidelity.is_finite())
        .min_by(|a, b| a.infidelity.total_cmp(&b.infidelity))
        .ok_or_else(|| Error::InvalidArgument("every restart failed".into()))?;
    let mut winner = winner.clone();
    extend_search(&mut winner, options.polish_iterations, &steps, options, &objective);

    let best_pulse = problem.decode(&winner.best)?;
    let pulses = [best_pulse];
    let psi0 = StateVector::dressed(problem.params.n_max, problem.initial_state)?;
    let convergence = convergence_check(
        &problem.params,
        &pulses,
        &psi0,
        problem.target_state,
        problem.duration,
        config,
    )?;
    let [best_pulse] = pulses;
    let infidelity = 1.0 - convergence.fidelity;
    let carriers = best_pulse.carriers();
    let min_separation = if carriers.len() > 1 {
        Some(min_frequency_separation(&carriers)?)
    } else {
        None
    };
    let peak_amplitude = best_pulse
        .tones
        .iter()
        .map(|t| {
            let a: f64 = t.a_coeffs.iter().map(|v| 2.0 * v.abs()).sum();
            let b: f64 = t.b_coeffs.iter().map(|v| v.abs()).sum();
            a.hypot(b)
        })
        .fold(0.0, f64::max);

    Ok(OptimizationResult {
        best_pulse,
        infidelity,
        iterations: winner.iterations,
        restart_index: winner.index,
        objective_history: winner.history,
        unconverged: !convergence.converged(),
        convergence,
        min_separation,
        peak_amplitude,
        amplitude_exceeds_separation: min_separation.is_some_and(|d| peak_amplitude > d),
        per_restart: records,
    })
}

/// `1 − F` of the pulse encoded by `x`.
pub fn infidelity_of(
    problem: &OptimizationProblem,
    propagator: &Propagator,
    x: &[f64],
    config: &SimulationConfig,
) -> Result<f64> {
    let pulse = problem.decode(x)?;
    let f = propagator.transfer_fidelity(
        core::slice::from_ref(&pulse),
        problem.initial_state,
        problem.target_state,
        problem.duration,
        config,
    )?;
    Ok((1.0 - f).clamp(0.0, 1.0))
}

fn simplex_steps(problem: &OptimizationProblem, options: &OptimizerOptions) -> Vec<f64> {
    let stride = 1 + 2 * problem.m;
    let count = problem.parameter_count().unwrap_or(0);
    (0..count)
        .map(|i| {
            if i % stride == 0 {
                options.frequency_prior_halfwidth
            } else {
                options.coeff_prior
            }
        })
        .collect()
}

/// Restart 0 starts at the seed; later restarts draw a uniform perturbation
/// within the priors from a stream keyed by `(seed, index)`.
fn restart_start(
    problem: &OptimizationProblem,
    options: &OptimizerOptions,
    seed: &[f64],
    index: usize,
) -> Vec<f64> {
    if index == 0 {
        return seed.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(index as u64);
    let stride = 1 + 2 * problem.m;
    seed.iter()
        .enumerate()
        .map(|(i, &v)| {
            let half = if i % stride == 0 {
                options.frequency_prior_halfwidth
            } else {
                options.coeff_prior
            };
            if half > 0.0 {
                v + rng.gen_range(-half..=half)
            } else {
                v
            }
        })
        .collect()
}

/// Iterations per simplex pass, per free parameter.
const PASS_ITERATIONS_PER_PARAMETER: usize = 50;
/// Shrink factor of the initial simplex between passes.
const PASS_DECAY: f64 = 0.7;
const MIN_STEP_SCALE: f64 = 0.05;

fn new_record<F>(index: usize, start: Vec<f64>, objective: &F) -> RestartRecord
where
    F: Fn(&[f64]) -> f64,
{
    let start_infidelity = objective(&start);
    let error = (!start_infidelity.is_finite())
        .then(|| "objective is not finite at the starting point".to_string());
    RestartRecord {
        index,
        best: start.clone(),
        start,
        start_infidelity,
        infidelity: start_infidelity,
        iterations: 0,
        evaluations: 1,
        step_scale: 1.0,
        history: Vec::new(),
        error,
    }
}

/// Spends up to `budget` iterations on passes of a fresh simplex around the
/// current best, each pass with a smaller simplex than the last. Stops early
/// once a pass converges without improving.
fn extend_search<F>(
    record: &mut RestartRecord,
    budget: usize,
    steps: &[f64],
    options: &OptimizerOptions,
    objective: &F,
) where
    F: Fn(&[f64]) -> f64,
{
    if record.error.is_some() {
        return;
    }
    let pass = PASS_ITERATIONS_PER_PARAMETER * steps.len();
    let mut spent = 0;
    while spent < budget {
        let local: Vec<f64> = steps.iter().map(|s| s * record.step_scale).collect();
        let settings = options.settings((budget - spent).min(pass));
        match nelder_mead(objective, &record.best, &local, &settings) {
            Ok(out) => {
                spent += out.iterations;
                record.iterations += out.iterations;
                record.evaluations += out.evaluations;
                record.history.extend_from_slice(&out.history);
                let improved = record.infidelity - out.f;
                if out.f < record.infidelity {
                    record.best = out.x;
                    record.infidelity = out.f;
                }
                record.step_scale = (record.step_scale * PASS_DECAY).max(MIN_STEP_SCALE);
                if out.converged && improved <= options.f_tolerance {
                    break;
                }
                if out.iterations == 0 {
                    break;
                }
            }
            Err(e) => {
                record.error = Some(e.to_string());
                break;
            }
        }
    }
}
