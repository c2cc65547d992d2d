//! Time-dependent Schrödinger propagation in the dressed basis.
//!
//! The Hamiltonian is `H(t)/h = diag(E) + Σ_c f_c(t) M_c` with dressed energies
//! `E` and dressed drive matrices `M_c`; nothing is dropped (counter-rotating
//! and cross-coupling terms are all retained). Integration runs in the
//! interaction picture of `diag(E)`, which is an exact change of variables:
//! the fast free phases are applied analytically and the fixed-step
//! fourth-order Runge-Kutta scheme only has to follow the drive. Reported
//! states are always lab-frame dressed amplitudes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::jc::{DressedBasis, DressedLabel, DriveOperatorKind, SystemParams};
use crate::linalg::{inner, norm, CMatrix};
use crate::pulses::Pulse;
use crate::{Error, Result, C64, MHZ_NS, TAU};

/// Norm drift beyond which a propagation is rejected.
pub const NORM_ABORT: f64 = 1e-6;

/// Minimum number of steps per period of the fastest phase the drive bridges.
const DT_FACTOR: f64 = 20.0;

/// Steps between exact re-evaluations of the phase rotors.
const RESYNC_STEPS: usize = 256;

/// State amplitudes over a dressed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes }
    }

    /// Basis vector `|index⟩` of a `dim`-dimensional space.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    /// The dressed state `label` within truncation `n_max`.
    pub fn dressed(n_max: usize, label: DressedLabel) -> Result<Self> {
        let dim = 2 * n_max + 1;
        if label.manifold() > n_max {
            return Err(Error::UnknownLabel(label));
        }
        Ok(Self::basis(dim, label.index()))
    }

    pub fn basis_dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Zero-pads into a larger dressed basis (dressed ordering is
    /// prefix-stable across truncations).
    pub fn embed(&self, dim: usize) -> Result<Self> {
        if dim < self.basis_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis_dim(),
                got: dim,
            });
        }
        let mut amplitudes = self.amplitudes.clone();
        amplitudes.resize(dim, C64::new(0.0, 0.0));
        Ok(Self { amplitudes })
    }
}

/// `|⟨target|psi⟩|²`.
pub fn fidelity(psi: &StateVector, target: &StateVector) -> Result<f64> {
    if psi.basis_dim() != target.basis_dim() {
        return Err(Error::DimensionMismatch {
            expected: target.basis_dim(),
            got: psi.basis_dim(),
        });
    }
    Ok(inner(&target.amplitudes, &psi.amplitudes).norm_sqr())
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimulationConfig {
    /// Nominal step (ns); the actual step divides the duration evenly.
    pub dt: f64,
    /// Spacing of recorded trajectory samples (ns).
    pub sample_stride: f64,
    /// Extra photons added by [`convergence_check`].
    pub convergence_margin: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            dt: 2e-4,
            sample_stride: 0.05,
            convergence_margin: 2,
        }
    }
}

impl SimulationConfig {
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.sample_stride.is_finite() && self.sample_stride > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample stride must be positive, got {}",
                self.sample_stride
            )));
        }
        Ok(())
    }
}

/// Sampled evolution. `states[k]` is the lab-frame state at `times[k]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub labels: Vec<DressedLabel>,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// `populations[k][j] = |⟨label_j|Ψ(times[k])⟩|²`.
    pub populations: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        self.states
            .last()
            .expect("a trajectory always holds the final state")
    }

    /// Population history of one dressed state.
    pub fn population_of(&self, label: DressedLabel) -> Result<Vec<f64>> {
        let j = self
            .labels
            .iter()
            .position(|&l| l == label)
            .ok_or(Error::UnknownLabel(label))?;
        Ok(self.populations.iter().map(|p| p[j]).collect())
    }
}

/// Real sparse operator in a dressed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseOperator {
    /// Keeps entries of a real-valued Hermitian matrix above `threshold`.
    pub fn from_dense(m: &CMatrix, threshold: f64) -> Self {
        let dim = m.dim();
        let mut entries = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let z = m[(i, j)];
                debug_assert!(
                    z.im.abs() <= 1e-12,
                    "drive operators are real in the dressed basis"
                );
                if z.re.abs() > threshold {
                    entries.push((i, j, z.re));
                }
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// `A ⊗ I_right`.
    pub fn kron_identity(&self, right: usize) -> Self {
        let entries = self
            .entries
            .iter()
            .flat_map(|&(i, j, v)| (0..right).map(move |k| (i * right + k, j * right + k, v)))
            .collect();
        Self {
            dim: self.dim * right,
            entries,
        }
    }

    /// `I_left ⊗ A`.
    pub fn identity_kron(&self, left: usize) -> Self {
        let d = self.dim;
        let entries = (0..left)
            .flat_map(|k| {
                self.entries
                    .iter()
                    .map(move |&(i, j, v)| (k * d + i, k * d + j, v))
            })
            .collect();
        Self {
            dim: self.dim * left,
            entries,
        }
    }

    fn largest_gap(&self, energies: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, _)| (energies[i] - energies[j]).abs())
            .fold(0.0, f64::max)
    }
}

/// Exact re-evaluation interval and incremental update of one pulse's phases.
#[derive(Debug, Clone)]
struct PulseClock<'a> {
    pulse: &'a Pulse,
    carrier_w: Vec<f64>,
    envelope_w: f64,
    carriers: Vec<C64>,
    carrier_half: Vec<C64>,
    envelope: C64,
    envelope_half: C64,
    powers: Vec<C64>,
}

impl<'a> PulseClock<'a> {
    fn new(pulse: &'a Pulse, h: f64) -> Self {
        let carrier_w: Vec<f64> = pulse
            .tones
            .iter()
            .map(|t| TAU * t.carrier * MHZ_NS)
            .collect();
        let envelope_w = TAU / pulse.duration;
        let carrier_half = carrier_w
            .iter()
            .map(|w| C64::from_polar(1.0, 0.5 * w * h))
            .collect();
        let order = pulse.fourier_order();
        Self {
            pulse,
            carriers: vec![C64::new(1.0, 0.0); carrier_w.len()],
            carrier_w,
            envelope_w,
            carrier_half,
            envelope: C64::new(1.0, 0.0),
            envelope_half: C64::from_polar(1.0, 0.5 * envelope_w * h),
            powers: vec![C64::new(0.0, 0.0); order],
        }
    }

    fn sync(&mut self, t: f64) {
        for (c, w) in self.carriers.iter_mut().zip(&self.carrier_w) {
            *c = C64::from_polar(1.0, w * t);
        }
        self.envelope = C64::from_polar(1.0, self.envelope_w * t);
    }

    fn advance_half(&mut self) {
        for (c, r) in self.carriers.iter_mut().zip(&self.carrier_half) {
            *c *= r;
        }
        self.envelope *= self.envelope_half;
    }

    fn value(&mut self) -> f64 {
        if let Some(amps) = &self.pulse.constant_amps {
            return amps.iter().zip(&self.carriers).map(|(a, c)| a * c.re).sum();
        }
        let mut z = C64::new(1.0, 0.0);
        for p in self.powers.iter_mut() {
            z *= self.envelope;
            *p = z;
        }
        let mut f = 0.0;
        for (tone, c) in self.pulse.tones.iter().zip(&self.carriers) {
            let mut a = 0.0;
            let mut b = 0.0;
            for ((ak, bk), zk) in tone.a_coeffs.iter().zip(&tone.b_coeffs).zip(&self.powers) {
                a += ak * (1.0 - zk.re);
                b += bk * zk.im;
            }
            f += a * c.re + b * c.im;
        }
        f
    }
}

/// Result of [`DrivenSystem::evolve`].
#[derive(Debug, Clone)]
pub struct Evolution {
    /// Lab-frame final amplitudes at `t = T`.
    pub final_state: Vec<C64>,
    /// Lab-frame samples `(t, ψ(t))`, including `t = 0` and `t = T`.
    pub samples: Vec<(f64, Vec<C64>)>,
    pub steps: usize,
    pub dt: f64,
    pub norm_drift: f64,
}

/// `diag(E) + Σ_c f_c(t) M_c` over an arbitrary dressed basis.
#[derive(Debug, Clone)]
pub struct DrivenSystem<'a> {
    energies: Vec<f64>,
    terms: Vec<(SparseOperator, Vec<&'a Pulse>)>,
}

impl<'a> DrivenSystem<'a> {
    /// Energies in MHz.
    pub fn new(energies: Vec<f64>) -> Self {
        Self {
            energies,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Adds `f(t) · operator` for a pulse.
    pub fn drive(&mut self, operator: SparseOperator, pulse: &'a Pulse) -> Result<()> {
        if operator.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: operator.dim(),
            });
        }
        pulse.validate()?;
        if let Some((_, pulses)) = self.terms.iter_mut().find(|(op, _)| *op == operator) {
            pulses.push(pulse);
        } else {
            self.terms.push((operator, vec![pulse]));
        }
        Ok(())
    }

    /// Fastest phase rate (MHz) the integrator must follow: the largest carrier
    /// plus the largest gap bridged by any drive operator.
    pub fn max_frequency(&self) -> f64 {
        self.terms
            .iter()
            .map(|(op, pulses)| {
                let carrier = pulses
                    .iter()
                    .flat_map(|p| p.tones.iter().map(|t| t.carrier.abs()))
                    .fold(0.0, f64::max);
                carrier + op.largest_gap(&self.energies)
            })
            .fold(0.0, f64::max)
    }

    /// Integrates from `psi0` over `[0, duration]`.
    pub fn evolve(
        &self,
        psi0: &[C64],
        duration: f64,
        config: &SimulationConfig,
        record: bool,
    ) -> Result<Evolution> {
        config.validate()?;
        let dim = self.dim();
        if psi0.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: psi0.len(),
            });
        }
        if !(duration.is_finite() && duration >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "duration must be non-negative, got {duration}"
            )));
        }
        for (_, pulses) in &self.terms {
            for p in pulses {
                if (p.duration - duration).abs() > 1e-9 * duration.max(1.0) {
                    return Err(Error::InvalidPulse(format!(
                        "pulse duration {} ns differs from simulation time {duration} ns",
                        p.duration
                    )));
                }
            }
        }
        let f_max = self.max_frequency();
        if f_max > 0.0 && config.dt > 1.0 / (DT_FACTOR * f_max * MHZ_NS) {
            return Err(Error::InvalidArgument(format!(
                "dt = {} ns too coarse for {f_max:.1} MHz dynamics (limit {:.3e} ns)",
                config.dt,
                1.0 / (DT_FACTOR * f_max * MHZ_NS)
            )));
        }

        let steps = if duration == 0.0 {
            0
        } else {
            (duration / config.dt).ceil().max(1.0) as usize
        };
        let h = if steps == 0 {
            0.0
        } else {
            duration / steps as f64
        };
        let stride = if h > 0.0 {
            ((config.sample_stride / h).round() as usize).max(1)
        } else {
            1
        };

        let omega: Vec<f64> = self.energies.iter().map(|e| TAU * e * MHZ_NS).collect();
        let phase_half: Vec<C64> = omega
            .iter()
            .map(|w| C64::from_polar(1.0, 0.5 * w * h))
            .collect();
        let mut phases = vec![C64::new(1.0, 0.0); dim];
        let mut clocks: Vec<Vec<PulseClock>> = self
            .terms
            .iter()
            .map(|(_, pulses)| pulses.iter().map(|p| PulseClock::new(p, h)).collect())
            .collect();
        let coupling = Coupling::new(dim, self.terms.iter().map(|(op, _)| op));

        let kappa = TAU * MHZ_NS;
        let mut y: Vec<C64> = psi0.to_vec();
        let mut samples = Vec::new();
        if record {
            samples.push((0.0, y.clone()));
        }

        let mut scratch = Scratch::new(dim);
        let mut f0 = vec![0.0; self.terms.len()];
        let mut fm = vec![0.0; self.terms.len()];
        let mut f1 = vec![0.0; self.terms.len()];
        let mut s0 = vec![0.0; coupling.nnz()];
        let mut sm = vec![0.0; coupling.nnz()];
        let mut s1 = vec![0.0; coupling.nnz()];
        let mut p_mid = vec![C64::new(0.0, 0.0); dim];
        let mut p_end = vec![C64::new(0.0, 0.0); dim];

        for step in 0..steps {
            let t0 = step as f64 * h;
            if step % RESYNC_STEPS == 0 {
                for (p, w) in phases.iter_mut().zip(&omega) {
                    *p = C64::from_polar(1.0, w * t0);
                }
                for term in clocks.iter_mut() {
                    for c in term.iter_mut() {
                        c.sync(t0);
                    }
                }
                evaluate_terms(&mut clocks, &mut f0);
                coupling.scale(&f0, &mut s0);
            }
            for ((pm, pe), (p, r)) in p_mid
                .iter_mut()
                .zip(p_end.iter_mut())
                .zip(phases.iter().zip(&phase_half))
            {
                *pm = p * r;
                *pe = *pm * r;
            }
            for term in clocks.iter_mut() {
                for c in term.iter_mut() {
                    c.advance_half();
                }
            }
            evaluate_terms(&mut clocks, &mut fm);
            coupling.scale(&fm, &mut sm);
            for term in clocks.iter_mut() {
                for c in term.iter_mut() {
                    c.advance_half();
                }
            }
            evaluate_terms(&mut clocks, &mut f1);
            coupling.scale(&f1, &mut s1);

            scratch.rk4(
                &mut y,
                h,
                kappa,
                &coupling,
                [&phases, &p_mid, &p_end],
                [&s0, &sm, &s1],
            );

            core::mem::swap(&mut phases, &mut p_end);
            core::mem::swap(&mut f0, &mut f1);
            core::mem::swap(&mut s0, &mut s1);

            if record && ((step + 1) % stride == 0 || step + 1 == steps) {
                let t1 = (step + 1) as f64 * h;
                samples.push((t1, to_lab(&y, &phases)));
            }
        }

        let final_phases: Vec<C64> = omega
            .iter()
            .map(|w| C64::from_polar(1.0, w * duration))
            .collect();
        let final_state = to_lab(&y, &final_phases);
        if let Some(last) = samples.last_mut() {
            if steps > 0 {
                last.1 = final_state.clone();
            }
        }
        let norm_drift = (norm(&final_state) - norm(psi0)).abs();
        if norm_drift > NORM_ABORT {
            return Err(Error::NormDrift {
                drift: norm_drift,
                steps,
                dt: h,
            });
        }
        Ok(Evolution {
            final_state,
            samples,
            steps,
            dt: h,
            norm_drift,
        })
    }
}

fn evaluate_terms(clocks: &mut [Vec<PulseClock>], out: &mut [f64]) {
    for (f, term) in out.iter_mut().zip(clocks.iter_mut()) {
        *f = term.iter_mut().map(|c| c.value()).sum();
    }
}

fn to_lab(y: &[C64], phases: &[C64]) -> Vec<C64> {
    y.iter().zip(phases).map(|(a, p)| a * p.conj()).collect()
}

/// All drive operators merged row by row; `terms[k]` says which drive scales
/// entry `k`.
struct Coupling {
    rows: Vec<usize>,
    cols: Vec<usize>,
    terms: Vec<usize>,
    vals: Vec<f64>,
}

impl Coupling {
    fn new<'o>(dim: usize, ops: impl Iterator<Item = &'o SparseOperator>) -> Self {
        let mut entries: Vec<(usize, usize, usize, f64)> = ops
            .enumerate()
            .flat_map(|(t, op)| op.entries.iter().map(move |&(i, j, v)| (i, j, t, v)))
            .collect();
        entries.sort_by_key(|&(i, j, t, _)| (i, j, t));
        let mut rows = vec![0; dim + 1];
        for &(i, ..) in &entries {
            rows[i + 1] += 1;
        }
        for i in 0..dim {
            rows[i + 1] += rows[i];
        }
        Self {
            rows,
            cols: entries.iter().map(|e| e.1).collect(),
            terms: entries.iter().map(|e| e.2).collect(),
            vals: entries.iter().map(|e| e.3).collect(),
        }
    }

    fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn scale(&self, f: &[f64], out: &mut [f64]) {
        for ((o, &t), &v) in out.iter_mut().zip(&self.terms).zip(&self.vals) {
            *o = f[t] * v;
        }
    }
}

struct Scratch {
    k: [Vec<C64>; 4],
    tmp: Vec<C64>,
    u: Vec<C64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self {
            k: [z.clone(), z.clone(), z.clone(), z.clone()],
            tmp: z.clone(),
            u: z,
        }
    }

    /// Interaction-picture derivative `−i 2π p ⊙ (Σ f_c M_c (p̄ ⊙ y))`, with
    /// the drive values already folded into `scaled`.
    fn derivative(
        u: &mut [C64],
        out: &mut [C64],
        y: &[C64],
        kappa: f64,
        coupling: &Coupling,
        phases: &[C64],
        scaled: &[f64],
    ) {
        for ((ui, yi), p) in u.iter_mut().zip(y).zip(phases) {
            *ui = yi * p.conj();
        }
        for (i, (o, p)) in out.iter_mut().zip(phases).enumerate() {
            let range = coupling.rows[i]..coupling.rows[i + 1];
            let mut acc = C64::new(0.0, 0.0);
            for (&j, &v) in coupling.cols[range.clone()].iter().zip(&scaled[range]) {
                acc += u[j] * v;
            }
            let z = acc * p;
            *o = C64::new(kappa * z.im, -kappa * z.re);
        }
    }

    fn rk4(
        &mut self,
        y: &mut [C64],
        h: f64,
        kappa: f64,
        coupling: &Coupling,
        phases: [&[C64]; 3],
        f: [&[f64]; 3],
    ) {
        let Scratch { k, tmp, u } = self;
        let [k1, k2, k3, k4] = k;
        Self::derivative(u, k1, y, kappa, coupling, phases[0], f[0]);
        for ((t, yi), ki) in tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *t = yi + ki * (0.5 * h);
        }
        Self::derivative(u, k2, tmp, kappa, coupling, phases[1], f[1]);
        for ((t, yi), ki) in tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *t = yi + ki * (0.5 * h);
        }
        Self::derivative(u, k3, tmp, kappa, coupling, phases[1], f[1]);
        for ((t, yi), ki) in tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *t = yi + ki * h;
        }
        Self::derivative(u, k4, tmp, kappa, coupling, phases[2], f[2]);
        let s = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * s;
        }
    }
}

/// Dressed-basis propagator for one qubit-resonator system.
#[derive(Debug, Clone)]
pub struct Propagator {
    basis: DressedBasis,
    operators: [SparseOperator; 3],
}

/// Matrix elements below this magnitude are treated as exact zeros.
const SPARSITY_THRESHOLD: f64 = 1e-13;

fn channel_slot(kind: DriveOperatorKind) -> usize {
    match kind {
        DriveOperatorKind::QubitTransverse => 0,
        DriveOperatorKind::QubitLongitudinal => 1,
        DriveOperatorKind::ResonatorPosition => 2,
    }
}

impl Propagator {
    pub fn new(params: &SystemParams) -> Result<Self> {
        let basis = DressedBasis::new(params)?;
        let operators = DriveOperatorKind::ALL
            .map(|kind| SparseOperator::from_dense(&basis.drive_matrix(kind), SPARSITY_THRESHOLD));
        Ok(Self { basis, operators })
    }

    pub fn basis(&self) -> &DressedBasis {
        &self.basis
    }

    pub fn params(&self) -> &SystemParams {
        self.basis.params()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn operator(&self, kind: DriveOperatorKind) -> &SparseOperator {
        &self.operators[channel_slot(kind)]
    }

    pub fn driven_system<'a>(&self, pulses: &'a [Pulse]) -> Result<DrivenSystem<'a>> {
        let mut system = DrivenSystem::new(self.basis.energies());
        for pulse in pulses {
            system.drive(self.operator(pulse.channel).clone(), pulse)?;
        }
        Ok(system)
    }

    /// Full trajectory sampled every `config.sample_stride`.
    pub fn run(
        &self,
        pulses: &[Pulse],
        psi0: &StateVector,
        duration: f64,
        config: &SimulationConfig,
    ) -> Result<Trajectory> {
        let evolution =
            self.driven_system(pulses)?
                .evolve(&psi0.amplitudes, duration, config, true)?;
        let labels = self.basis.labels();
        let mut times = Vec::with_capacity(evolution.samples.len());
        let mut states = Vec::with_capacity(evolution.samples.len());
        let mut populations = Vec::with_capacity(evolution.samples.len());
        for (t, amps) in evolution.samples {
            let state = StateVector::new(amps);
            times.push(t);
            populations.push(state.populations());
            states.push(state);
        }
        Ok(Trajectory {
            labels,
            times,
            states,
            populations,
        })
    }

    /// Final lab-frame state only.
    pub fn final_state(
        &self,
        pulses: &[Pulse],
        psi0: &StateVector,
        duration: f64,
        config: &SimulationConfig,
    ) -> Result<StateVector> {
        let evolution =
            self.driven_system(pulses)?
                .evolve(&psi0.amplitudes, duration, config, false)?;
        Ok(StateVector::new(evolution.final_state))
    }

    /// `|⟨target|U(T)|initial⟩|²`.
    pub fn transfer_fidelity(
        &self,
        pulses: &[Pulse],
        initial: DressedLabel,
        target: DressedLabel,
        duration: f64,
        config: &SimulationConfig,
    ) -> Result<f64> {
        let n_max = self.params().n_max;
        let psi0 = StateVector::dressed(n_max, initial)?;
        let psi = self.final_state(pulses, &psi0, duration, config)?;
        Ok(psi.amplitudes[self.basis.index_of(target)?].norm_sqr())
    }
}

/// Integrates the driven system from `psi0` over `[0, duration]`.
pub fn propagate(
    params: &SystemParams,
    pulses: &[Pulse],
    psi0: &StateVector,
    duration: f64,
    config: &SimulationConfig,
) -> Result<Trajectory> {
    Propagator::new(params)?.run(pulses, psi0, duration, config)
}

/// Fidelity estimate under qubit and resonator energy decay,
/// `exp(−T/T_q) · exp(−N T / (2 T_r))`.
pub fn decoherence_fidelity(
    duration: f64,
    n: usize,
    t_qubit: f64,
    t_resonator: f64,
) -> Result<f64> {
    if !(t_qubit > 0.0 && t_resonator > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lifetimes must be positive, got T_q = {t_qubit}, T_r = {t_resonator}"
        )));
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    Ok((-duration / t_qubit).exp() * (-(n as f64) * duration / (2.0 * t_resonator)).exp())
}

/// Transfer times (ns) when every tone is capped at `omega_max` (MHz):
/// `(T_single, T_multi)` for simultaneous versus sequential driving.
pub fn transfer_time_bounds(n: usize, omega_max: f64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "target level must be at least 1".into(),
        ));
    }
    if !(omega_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Ω_max must be positive, got {omega_max}"
        )));
    }
    // π/Ω with Ω = 2π · omega_max.
    let half_period = 0.5 / (omega_max * MHZ_NS);
    let multi = (2f64.sqrt() + 2.0 * (n as f64 - 1.0)) * half_period;
    let ratio = crate::pulses::cook_shore_amplitudes(n, 1.0)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok((ratio * half_period, multi))
}

/// Outcome of re-running a propagation at a larger truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Convergence {
    pub fidelity: f64,
    pub fidelity_extended: f64,
    pub delta: f64,
}

impl Convergence {
    /// Differences above this are treated as unconverged.
    pub const TOLERANCE: f64 = 1e-6;

    pub fn converged(&self) -> bool {
        self.delta <= Self::TOLERANCE
    }
}

/// Compares the target fidelity at `n_max` with `n_max + margin`.
pub fn convergence_check(
    params: &SystemParams,
    pulses: &[Pulse],
    psi0: &StateVector,
    target: DressedLabel,
    duration: f64,
    config: &SimulationConfig,
) -> Result<Convergence> {
    let base = Propagator::new(params)?;
    let psi = base.final_state(pulses, psi0, duration, config)?;
    let fid = psi.amplitudes[base.basis().index_of(target)?].norm_sqr();

    let extended_params = params.with_n_max(params.n_max + config.convergence_margin);
    let extended = Propagator::new(&extended_params)?;
    let psi0_ext = psi0.embed(extended.dim())?;
    let psi_ext = extended.final_state(pulses, &psi0_ext, duration, config)?;
    let fid_ext = psi_ext.amplitudes[extended.basis().index_of(target)?].norm_sqr();
    Ok(Convergence {
        fidelity: fid,
        fidelity_extended: fid_ext,
        delta: (fid - fid_ext).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{cook_shore_pulse, Tone};
    use approx::assert_abs_diff_eq;

    #[test]
    fn fidelity_basics() {
        let a = StateVector::new(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        assert_abs_diff_eq!(fidelity(&a, &a).unwrap(), 1.0, epsilon = 1e-15);
        let phased = StateVector::new(
            a.amplitudes
                .iter()
                .map(|z| z * C64::from_polar(1.0, 0.7))
                .collect(),
        );
        assert_abs_diff_eq!(fidelity(&phased, &a).unwrap(), 1.0, epsilon = 1e-15);
        let e0 = StateVector::basis(3, 0);
        let e1 = StateVector::basis(3, 1);
        assert_eq!(fidelity(&e0, &e1).unwrap(), 0.0);
        assert!(fidelity(&a, &e0).is_err());
    }

    #[test]
    fn decoherence_values() {
        assert_eq!(decoherence_fidelity(0.0, 4, 500.0, 3000.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            decoherence_fidelity(500.0, 0, 500.0, 3000.0).unwrap(),
            0.36788,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(
            decoherence_fidelity(50.0, 4, 500.0, 3000.0).unwrap(),
            0.87518,
            epsilon = 1e-5
        );
        assert!(decoherence_fidelity(1.0, 1, 0.0, 1.0).is_err());
        assert!(decoherence_fidelity(1.0, 1, 1.0, -1.0).is_err());
    }

    #[test]
    fn time_bounds() {
        let (single, multi) = transfer_time_bounds(4, 10.0).unwrap();
        assert_abs_diff_eq!(multi / single, 7.4142 / 4.8990, epsilon = 1e-4);
        let (single, multi) = transfer_time_bounds(1, 10.0).unwrap();
        assert_abs_diff_eq!(single, multi, epsilon = 1e-12);
        // √2 π / Ω_max with Ω_max = 2π · 10 MHz
        assert_abs_diff_eq!(single, 2f64.sqrt() * 0.5 / (10.0 * MHZ_NS), epsilon = 1e-9);
        let (s, m) = transfer_time_bounds(400, 1.0).unwrap();
        assert!((m / s - 2.0).abs() < 0.01);
    }

    #[test]
    fn zero_drive_keeps_eigenstate_with_phase() {
        let params = SystemParams::default().with_n_max(4);
        let prop = Propagator::new(&params).unwrap();
        let label = DressedLabel::Minus(2);
        let psi0 = StateVector::dressed(4, label).unwrap();
        let traj = prop
            .run(&[], &psi0, 3.0, &SimulationConfig::default())
            .unwrap();
        let j = label.index();
        for (t, state) in traj.times.iter().zip(&traj.states) {
            assert_abs_diff_eq!(state.amplitudes[j].norm_sqr(), 1.0, epsilon = 1e-12);
            let expect =
                C64::from_polar(1.0, -TAU * prop.basis().energy(label).unwrap() * t * MHZ_NS);
            assert!((state.amplitudes[j] - expect).norm() < 1e-9);
        }
        assert_eq!(traj.times[0], 0.0);
        assert_abs_diff_eq!(*traj.times.last().unwrap(), 3.0, epsilon = 1e-12);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn clock_matches_direct_evaluation() {
        let tones = vec![
            Tone::new(6180.0, vec![20.0, -5.0, 3.0], vec![7.0, 2.0, -1.0]),
            Tone::new(5565.4, vec![11.0, 0.5, 0.0], vec![-3.0, 0.0, 4.0]),
        ];
        let pulse = Pulse::fourier(DriveOperatorKind::QubitTransverse, tones, 12.0).unwrap();
        let h = 1e-3;
        let mut clock = PulseClock::new(&pulse, h);
        clock.sync(0.0);
        for step in 0..12000 {
            let t = step as f64 * 0.5 * h;
            if step % 300 == 0 {
                assert_abs_diff_eq!(clock.value(), pulse.evaluate(t).unwrap(), epsilon = 1e-9);
            }
            clock.advance_half();
        }
    }

    #[test]
    fn step_size_guard() {
        let params = SystemParams::default().with_n_max(3);
        let prop = Propagator::new(&params).unwrap();
        let pulse = cook_shore_pulse(&params, 1, 5.0).unwrap();
        let psi0 = StateVector::dressed(3, DressedLabel::Ground).unwrap();
        let coarse = SimulationConfig::default().with_dt(0.01);
        assert!(prop
            .final_state(
                core::slice::from_ref(&pulse),
                &psi0,
                pulse.duration,
                &coarse
            )
            .is_err());
        let wrong_t = prop.final_state(
            core::slice::from_ref(&pulse),
            &psi0,
            10.0,
            &SimulationConfig::default(),
        );
        assert!(matches!(wrong_t, Err(Error::InvalidPulse(_))));
        let wrong_dim = StateVector::basis(3, 0);
        assert!(prop
            .final_state(&[], &wrong_dim, 1.0, &SimulationConfig::default())
            .is_err());
    }

    #[test]
    fn single_photon_rabi_transfer() {
        let params = SystemParams::default().with_n_max(3);
        let prop = Propagator::new(&params).unwrap();
        let pulse = cook_shore_pulse(&params, 1, 2.0).unwrap();
        let config = SimulationConfig::default().with_dt(1e-3);
        let f = prop
            .transfer_fidelity(
                core::slice::from_ref(&pulse),
                DressedLabel::Ground,
                DressedLabel::Minus(1),
                pulse.duration,
                &config,
            )
            .unwrap();
        assert!(f > 0.999, "fidelity {f}");
    }

    #[test]
    fn sparse_kron() {
        let m = CMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
        let a = SparseOperator::from_dense(&m, 0.0);
        assert_eq!(a.kron_identity(3).nnz(), 6);
        assert_eq!(a.identity_kron(3).dim(), 6);
        assert!(a.kron_identity(2).entries.contains(&(1, 3, 1.0)));
        assert!(a.identity_kron(2).entries.contains(&(2, 3, 1.0)));
    }
}
