//! Multi-tone drives: pulse representation, the constant-amplitude spin-rotation
//! solution, zig-zag carrier selection and the rotating-wave reduction.

use alloc::format;
use alloc::vec::Vec;
use num_traits::Float;

use crate::jc::{
    transition_frequencies, DressedBasis, DressedLabel, DriveOperatorKind, SystemParams,
};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::{Error, Result, C64, MHZ_NS, TAU};

/// One carrier with its two-quadrature Fourier envelope.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tone {
    /// Carrier frequency ω_n/2π (MHz).
    #[cfg_attr(feature = "serde", serde(rename = "carrier_mhz"))]
    pub carrier: f64,
    /// Coefficients `a^{(k)}` of the `1 − cos(2πkt/T)` envelope (MHz).
    #[cfg_attr(feature = "serde", serde(rename = "a_mhz", default))]
    pub a_coeffs: Vec<f64>,
    /// Coefficients `b^{(k)}` of the `sin(2πkt/T)` envelope (MHz).
    #[cfg_attr(feature = "serde", serde(rename = "b_mhz", default))]
    pub b_coeffs: Vec<f64>,
}

impl Tone {
    pub fn new(carrier: f64, a_coeffs: Vec<f64>, b_coeffs: Vec<f64>) -> Self {
        Self {
            carrier,
            a_coeffs,
            b_coeffs,
        }
    }

    /// A tone without Fourier envelope, used by constant-amplitude pulses.
    pub fn bare(carrier: f64) -> Self {
        Self::new(carrier, Vec::new(), Vec::new())
    }

    /// Number of Fourier components `M`.
    pub fn order(&self) -> usize {
        self.a_coeffs.len()
    }

    /// `(A(t), B(t))` for a pulse of duration `duration`.
    pub fn envelopes(&self, t: f64, duration: f64) -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for (k, (ak, bk)) in self.a_coeffs.iter().zip(&self.b_coeffs).enumerate() {
            let phase = TAU * (k + 1) as f64 * t / duration;
            let (s, c) = phase.sin_cos();
            a += ak * (1.0 - c);
            b += bk * s;
        }
        (a, b)
    }
}

/// A drive on one channel: a sum of tones over `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pulse {
    pub channel: DriveOperatorKind,
    /// Pulse length T (ns).
    #[cfg_attr(feature = "serde", serde(rename = "duration_ns"))]
    pub duration: f64,
    pub tones: Vec<Tone>,
    /// Constant amplitudes Ω_n (MHz); when set, every tone has `M = 0`.
    #[cfg_attr(
        feature = "serde",
        serde(
            rename = "constant_amps_mhz",
            default,
            skip_serializing_if = "Option::is_none"
        )
    )]
    pub constant_amps: Option<Vec<f64>>,
}

impl Pulse {
    /// A two-quadrature Fourier pulse. Envelopes vanish at both ends.
    pub fn fourier(channel: DriveOperatorKind, tones: Vec<Tone>, duration: f64) -> Result<Self> {
        let pulse = Self {
            channel,
            duration,
            tones,
            constant_amps: None,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// Constant-amplitude tones `Σ Ω_n cos(ω_n t)` with no ramp.
    pub fn constant(
        channel: DriveOperatorKind,
        carriers: &[f64],
        amplitudes: &[f64],
        duration: f64,
    ) -> Result<Self> {
        let pulse = Self {
            channel,
            duration,
            tones: carriers.iter().map(|&c| Tone::bare(c)).collect(),
            constant_amps: Some(amplitudes.to_vec()),
        };
        pulse.validate()?;
        Ok(pulse)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidPulse(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if self.tones.is_empty() {
            return Err(Error::InvalidPulse(
                "a pulse needs at least one tone".into(),
            ));
        }
        for (i, tone) in self.tones.iter().enumerate() {
            if tone.a_coeffs.len() != tone.b_coeffs.len() {
                return Err(Error::InvalidPulse(format!(
                    "tone {i}: {} cosine vs {} sine coefficients",
                    tone.a_coeffs.len(),
                    tone.b_coeffs.len()
                )));
            }
            let finite = tone.carrier.is_finite()
                && tone
                    .a_coeffs
                    .iter()
                    .chain(&tone.b_coeffs)
                    .all(|x| x.is_finite());
            if !finite {
                return Err(Error::InvalidPulse(format!(
                    "tone {i}: non-finite parameter"
                )));
            }
        }
        if let Some(amps) = &self.constant_amps {
            if amps.len() != self.tones.len() {
                return Err(Error::InvalidPulse(format!(
                    "{} constant amplitudes for {} tones",
                    amps.len(),
                    self.tones.len()
                )));
            }
            if self.tones.iter().any(|t| t.order() != 0) {
                return Err(Error::InvalidPulse(
                    "constant-amplitude pulses cannot carry Fourier envelopes".into(),
                ));
            }
            if amps.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidPulse("non-finite constant amplitude".into()));
            }
        }
        Ok(())
    }

    /// Largest Fourier order over the tones.
    pub fn fourier_order(&self) -> usize {
        self.tones.iter().map(Tone::order).max().unwrap_or(0)
    }

    pub fn carriers(&self) -> Vec<f64> {
        self.tones.iter().map(|t| t.carrier).collect()
    }

    /// Per-tone `(A_n(t), B_n(t))`.
    pub fn envelopes(&self, t: f64) -> Vec<(f64, f64)> {
        match &self.constant_amps {
            Some(amps) => amps.iter().map(|&a| (a, 0.0)).collect(),
            None => self
                .tones
                .iter()
                .map(|tone| tone.envelopes(t, self.duration))
                .collect(),
        }
    }

    /// Drive amplitude `f(t)` in MHz.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                duration: self.duration,
            });
        }
        Ok(self
            .tones
            .iter()
            .zip(self.envelopes(t))
            .map(|(tone, (a, b))| {
                let (s, c) = (TAU * tone.carrier * t * MHZ_NS).sin_cos();
                a * c + b * s
            })
            .sum())
    }

    /// Upper bound on `|f(t)|` over the pulse.
    pub fn peak_bound(&self) -> f64 {
        match &self.constant_amps {
            Some(amps) => amps.iter().map(|a| a.abs()).sum(),
            None => self
                .tones
                .iter()
                .map(|t| {
                    t.a_coeffs.iter().map(|a| 2.0 * a.abs()).sum::<f64>()
                        + t.b_coeffs.iter().map(|b| b.abs()).sum::<f64>()
                })
                .sum(),
        }
    }

    /// Largest envelope coefficient (or constant amplitude) magnitude.
    pub fn max_coefficient(&self) -> f64 {
        match &self.constant_amps {
            Some(amps) => amps.iter().fold(0.0, |m, a| m.max(a.abs())),
            None => self
                .tones
                .iter()
                .flat_map(|t| t.a_coeffs.iter().chain(&t.b_coeffs))
                .fold(0.0, |m, a| m.max(a.abs())),
        }
    }
}

/// `f(t)` for a pulse; `t` must lie in `[0, T]`.
pub fn evaluate_drive(pulse: &Pulse, t: f64) -> Result<f64> {
    pulse.evaluate(t)
}

/// Ordered dressed states `{|v_n⟩}` climbed by a ladder transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderBasis {
    pub labels: Vec<DressedLabel>,
}

impl LadderBasis {
    /// Ladder from `start` up to `|end,−⟩`, one manifold per step.
    ///
    /// Intermediate states alternate sign counting down from `|end,−⟩`, so the
    /// steps are diagonal transitions except possibly the first one, which is
    /// an `ω_{j,−}` step when `start = |j,−⟩` and `end − j` is odd.
    pub fn to_minus(start: DressedLabel, end: usize) -> Result<Self> {
        let first = start.manifold();
        if end <= first {
            return Err(Error::InvalidArgument(format!(
                "ladder end {end} must lie above start {start}"
            )));
        }
        let mut labels = Vec::with_capacity(end - first + 1);
        labels.push(start);
        for m in first + 1..=end {
            labels.push(if (end - m) % 2 == 0 {
                DressedLabel::Minus(m)
            } else {
                DressedLabel::Plus(m)
            });
        }
        Ok(Self { labels })
    }

    /// Number of transitions.
    pub fn steps(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn top(&self) -> usize {
        self.labels.last().map(DressedLabel::manifold).unwrap_or(0)
    }

    /// Carrier of every step, `|E(v_k) − E(v_{k−1})|` (MHz).
    pub fn carriers(&self, params: &SystemParams) -> Result<Vec<f64>> {
        if self.top() > params.n_max {
            return Err(Error::TruncationTooSmall {
                n_max: params.n_max,
                required: self.top(),
            });
        }
        self.labels
            .windows(2)
            .map(|w| step_frequency(params, w[0], w[1]))
            .collect()
    }

    /// Dressed matrix elements `⟨v_k|O|v_{k−1}⟩` along the ladder.
    pub fn matrix_elements(
        &self,
        basis: &DressedBasis,
        kind: DriveOperatorKind,
    ) -> Result<Vec<f64>> {
        let m = basis.drive_matrix(kind);
        self.labels
            .windows(2)
            .map(|w| Ok(m[(basis.index_of(w[1])?, basis.index_of(w[0])?)].re))
            .collect()
    }
}

fn step_frequency(params: &SystemParams, from: DressedLabel, to: DressedLabel) -> Result<f64> {
    use DressedLabel::*;
    if to.manifold() != from.manifold() + 1 {
        return Err(Error::InvalidArgument(format!(
            "{from} → {to} is not a single ladder step"
        )));
    }
    if from == Ground {
        // ω_{0,−} and ω_{0,↗↙} are the first-doublet energies.
        return Ok(to.closed_form_energy(params));
    }
    let t = transition_frequencies(params, from.manifold())?;
    Ok(match (from, to) {
        (Minus(_), Minus(_)) => t.w_minus,
        (Minus(_), Plus(_)) => t.w_up,
        (Plus(_), Minus(_)) => t.w_down,
        (Plus(_), Plus(_)) => t.w_plus,
        _ => unreachable!("ground handled above"),
    })
}

/// `{|v_n⟩}` for the Fock transfer `|0⟩ → |N,−⟩`.
pub fn ladder_basis(n: usize) -> LadderBasis {
    if n == 0 {
        return LadderBasis {
            labels: alloc::vec![DressedLabel::Ground],
        };
    }
    LadderBasis::to_minus(DressedLabel::Ground, n).expect("n ≥ 1 gives a valid ladder")
}

/// Zig-zag carrier set driving `|0⟩ → |N,−⟩` (MHz).
pub fn zigzag_frequencies(params: &SystemParams, n: usize) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "target level must be at least 1".into(),
        ));
    }
    params.validate()?;
    if n + 1 > params.n_max {
        return Err(Error::TruncationTooSmall {
            n_max: params.n_max,
            required: n + 1,
        });
    }
    ladder_basis(n).carriers(params)
}

/// Constant amplitudes turning the rotating-frame ladder into `Ω₀ J_x`.
///
/// `Ω₁ = √(2N) Ω₀`, `Ω_n = 2√(n(N+1−n)) Ω₀` for `n > 1`.
pub fn cook_shore_amplitudes(n: usize, omega0: f64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "target level must be at least 1".into(),
        ));
    }
    if !(omega0.is_finite() && omega0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Ω₀ must be positive, got {omega0}"
        )));
    }
    let nf = n as f64;
    Ok((1..=n)
        .map(|k| {
            if k == 1 {
                (2.0 * nf).sqrt() * omega0
            } else {
                let kf = k as f64;
                2.0 * (kf * (nf + 1.0 - kf)).sqrt() * omega0
            }
        })
        .collect())
}

/// Amplitudes for an arbitrary ladder whose bonds have dressed matrix elements
/// `elements`: bond `m` of `K` gets `Ω₀ √(m(K+1−m)) / |element_m|`, giving the
/// same spin-`K/2` rotating-frame Hamiltonian.
pub fn chain_amplitudes(elements: &[f64], omega0: f64) -> Result<Vec<f64>> {
    let k = elements.len() as f64;
    elements
        .iter()
        .enumerate()
        .map(|(i, &el)| {
            if el.abs() < 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "ladder bond {} has a vanishing matrix element",
                    i + 1
                )));
            }
            let m = (i + 1) as f64;
            Ok(omega0 * (m * (k + 1.0 - m)).sqrt() / el.abs())
        })
        .collect()
}

/// Rotating-wave Hamiltonian of a ladder with bond matrix elements `elements`
/// driven by tones of amplitude `amplitudes` (MHz): bond `m` couples with
/// `|element_m| Ω_m / 2`.
pub fn rwa_chain_hamiltonian(elements: &[f64], amplitudes: &[f64]) -> Result<CMatrix> {
    if elements.len() != amplitudes.len() {
        return Err(Error::DimensionMismatch {
            expected: elements.len(),
            got: amplitudes.len(),
        });
    }
    let n = amplitudes.len();
    let mut h = CMatrix::zeros(n + 1);
    for (i, (el, amp)) in elements.iter().zip(amplitudes).enumerate() {
        let c = C64::new(0.5 * el.abs() * amp, 0.0);
        h[(i, i + 1)] = c;
        h[(i + 1, i)] = c;
    }
    Ok(h)
}

/// Bond matrix elements of the resonant `|0⟩ → |N,−⟩` ladder under `σ_x`:
/// `1/√2` for the first bond, `1/2` afterwards (magnitudes).
pub fn fock_ladder_elements(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            if k == 1 {
                core::f64::consts::FRAC_1_SQRT_2
            } else {
                0.5
            }
        })
        .collect()
}

/// Rotating-wave Hamiltonian of the `|0⟩ → |N,−⟩` ladder (MHz): off-diagonals
/// `√2 Ω₁ / 4` then `Ω_n / 4`.
pub fn rwa_hamiltonian(amplitudes: &[f64], n: usize) -> Result<CMatrix> {
    if amplitudes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: amplitudes.len(),
        });
    }
    rwa_chain_hamiltonian(&fock_ladder_elements(n), amplitudes)
}

/// `|⟨last| exp(−i 2π H T) |first⟩|²` for a real symmetric ladder Hamiltonian
/// `h` in MHz and `duration` in ns.
pub fn ladder_transfer_fidelity(h: &CMatrix, duration: f64) -> f64 {
    let eig = hermitian_eigen(h);
    let last = h.dim() - 1;
    let amp: C64 = (0..h.dim())
        .map(|k| {
            let phase = C64::from_polar(1.0, -TAU * eig.values[k] * duration * MHZ_NS);
            eig.vectors[(last, k)] * phase * eig.vectors[(0, k)].conj()
        })
        .sum();
    amp.norm_sqr()
}

/// Transfer probability `|0⟩ → |N⟩` under the rotating-wave ladder.
pub fn rwa_transfer_fidelity(amplitudes: &[f64], n: usize, duration: f64) -> Result<f64> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    let h = rwa_hamiltonian(amplitudes, n)?;
    Ok(ladder_transfer_fidelity(&h, duration))
}

/// Duration `T = π/Ω₀` of the full spin rotation, with Ω₀/2π in MHz (ns).
pub fn rotation_time(omega0: f64) -> f64 {
    0.5 / (omega0 * MHZ_NS)
}

/// Builds the analytic constant-amplitude pulse for `|0⟩ → |N,−⟩`.
pub fn cook_shore_pulse(params: &SystemParams, n: usize, omega0: f64) -> Result<Pulse> {
    let carriers = zigzag_frequencies(params, n)?;
    let amps = cook_shore_amplitudes(n, omega0)?;
    Pulse::constant(
        DriveOperatorKind::QubitTransverse,
        &carriers,
        &amps,
        rotation_time(omega0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use DressedLabel::*;

    fn p(n_max: usize) -> SystemParams {
        SystemParams::default().with_n_max(n_max)
    }

    #[test]
    fn cook_shore_values() {
        let a = cook_shore_amplitudes(4, 1.0).unwrap();
        let expect = [8f64.sqrt(), 2.0 * 6f64.sqrt(), 2.0 * 6f64.sqrt(), 4.0];
        for (x, y) in a.iter().zip(expect) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(a[0], 2.8284, epsilon = 1e-4);
        assert_abs_diff_eq!(a[1], 4.8990, epsilon = 1e-4);
        assert_abs_diff_eq!(
            cook_shore_amplitudes(1, 1.0).unwrap()[0],
            1.41421,
            epsilon = 1e-5
        );
        let two = cook_shore_amplitudes(2, 1.0).unwrap();
        assert_abs_diff_eq!(two[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(two[1], 2.8284, epsilon = 1e-4);
        assert!(cook_shore_amplitudes(0, 1.0).is_err());
    }

    #[test]
    fn chain_amplitudes_reduce_to_cook_shore() {
        for n in 1..=8 {
            let a = chain_amplitudes(&fock_ladder_elements(n), 1.7).unwrap();
            let b = cook_shore_amplitudes(n, 1.7).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zigzag_sets() {
        let z4 = zigzag_frequencies(&p(7), 4).unwrap();
        for (x, y) in z4.iter().zip([6180.0, 5565.4, 6566.3, 5328.2]) {
            assert_abs_diff_eq!(*x, y, epsilon = 0.1);
        }
        let z1 = zigzag_frequencies(&p(4), 1).unwrap();
        assert_eq!(z1.len(), 1);
        assert_abs_diff_eq!(z1[0], 5820.0, epsilon = 1e-9);
        let z3 = zigzag_frequencies(&p(6), 3).unwrap();
        let g = 180.0;
        let expect = [
            6000.0 - g,
            6000.0 + (2f64.sqrt() + 1.0) * g,
            6000.0 - (3f64.sqrt() + 2f64.sqrt()) * g,
        ];
        for (x, y) in z3.iter().zip(expect) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(z3[1], 6434.6, epsilon = 0.05);
        assert_abs_diff_eq!(z3[2], 5433.7, epsilon = 0.05);
        assert!(zigzag_frequencies(&p(4), 4).is_err());
    }

    #[test]
    fn zigzag_matches_energy_differences() {
        for &delta in &[0.0, 240.0] {
            let params = SystemParams::new(6000.0, delta, 180.0, 10).unwrap();
            let basis = DressedBasis::new(&params).unwrap();
            for n in 1..=8 {
                let carriers = zigzag_frequencies(&params, n).unwrap();
                let ladder = ladder_basis(n);
                for (k, c) in carriers.iter().enumerate() {
                    let de = basis.energy(ladder.labels[k + 1]).unwrap()
                        - basis.energy(ladder.labels[k]).unwrap();
                    assert_abs_diff_eq!(*c, de.abs(), epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn ladders() {
        assert_eq!(
            ladder_basis(4).labels,
            vec![Ground, Plus(1), Minus(2), Plus(3), Minus(4)]
        );
        assert_eq!(ladder_basis(1).labels, vec![Ground, Minus(1)]);
        assert_eq!(
            ladder_basis(3).labels,
            vec![Ground, Minus(1), Plus(2), Minus(3)]
        );
        assert_eq!(
            LadderBasis::to_minus(Plus(1), 4).unwrap().labels,
            vec![Plus(1), Minus(2), Plus(3), Minus(4)]
        );
        assert_eq!(
            LadderBasis::to_minus(Minus(2), 5).unwrap().labels,
            vec![Minus(2), Minus(3), Plus(4), Minus(5)]
        );
        assert!(LadderBasis::to_minus(Minus(3), 3).is_err());
    }

    #[test]
    fn ladder_elements_resonant() {
        let basis = DressedBasis::new(&p(6)).unwrap();
        for n in 1..=5 {
            let els = ladder_basis(n)
                .matrix_elements(&basis, DriveOperatorKind::QubitTransverse)
                .unwrap();
            for (x, y) in els.iter().zip(fock_ladder_elements(n)) {
                assert_abs_diff_eq!(x.abs(), y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn evaluate_drive_endpoints_and_midpoint() {
        let tone = Tone::new(6000.0, vec![10.0], vec![0.0]);
        let pulse = Pulse::fourier(DriveOperatorKind::QubitTransverse, vec![tone], 50.0).unwrap();
        assert_eq!(pulse.evaluate(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(pulse.evaluate(50.0).unwrap(), 0.0, epsilon = 1e-12);
        let expect = 20.0 * (TAU * 6000.0 * 25.0 * MHZ_NS).cos();
        assert_abs_diff_eq!(pulse.evaluate(25.0).unwrap(), expect, epsilon = 1e-12);
        assert!(pulse.evaluate(50.1).is_err());
        assert!(pulse.evaluate(-1e-9).is_err());
    }

    #[test]
    fn constant_pulse_evaluation() {
        let pulse = Pulse::constant(
            DriveOperatorKind::QubitTransverse,
            &[100.0, 250.0],
            &[2.0, 3.0],
            10.0,
        )
        .unwrap();
        let t = 1.3;
        let expect =
            2.0 * (TAU * 100.0 * t * MHZ_NS).cos() + 3.0 * (TAU * 250.0 * t * MHZ_NS).cos();
        assert_abs_diff_eq!(pulse.evaluate(t).unwrap(), expect, epsilon = 1e-12);
        assert_eq!(pulse.evaluate(0.0).unwrap(), 5.0);
    }

    #[test]
    fn pulse_validation() {
        let t = DriveOperatorKind::QubitTransverse;
        assert!(Pulse::fourier(t, vec![], 10.0).is_err());
        assert!(Pulse::fourier(t, vec![Tone::bare(1.0)], 0.0).is_err());
        assert!(Pulse::fourier(t, vec![Tone::new(1.0, vec![1.0], vec![])], 1.0).is_err());
        assert!(Pulse::constant(t, &[1.0, 2.0], &[1.0], 1.0).is_err());
    }

    #[test]
    fn rwa_matrix() {
        let h = rwa_hamiltonian(&cook_shore_amplitudes(4, 1.0).unwrap(), 4).unwrap();
        let expect = [1.0, 1.5f64.sqrt(), 1.5f64.sqrt(), 1.0];
        for (i, e) in expect.iter().enumerate() {
            assert_abs_diff_eq!(h[(i, i + 1)].re, *e, epsilon = 1e-12);
            assert_abs_diff_eq!(
                h[(i, i + 1)].re,
                0.5 * (((i + 1) * (4 - i)) as f64).sqrt(),
                epsilon = 1e-12
            );
            assert_eq!(h[(i, i)].re, 0.0);
        }
        assert_abs_diff_eq!(h[(1, 2)].re, 1.2247, epsilon = 1e-4);
        let one = rwa_hamiltonian(&[2f64.sqrt()], 1).unwrap();
        assert_abs_diff_eq!(one[(0, 1)].re, 0.5, epsilon = 1e-15);
        let zero = rwa_hamiltonian(&[0.0; 3], 3).unwrap();
        assert_eq!(zero.frobenius_norm(), 0.0);
        assert!(rwa_hamiltonian(&[1.0; 2], 3).is_err());
    }

    #[test]
    fn rwa_transfer() {
        let amps = cook_shore_amplitudes(4, 1.0).unwrap();
        assert_eq!(rotation_time(1.0), 500.0);
        assert_abs_diff_eq!(
            rwa_transfer_fidelity(&amps, 4, 500.0).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            rwa_transfer_fidelity(&amps, 4, 0.0).unwrap(),
            0.0,
            epsilon = 1e-30
        );
        let one = cook_shore_amplitudes(1, 1.0).unwrap();
        assert_abs_diff_eq!(
            rwa_transfer_fidelity(&one, 1, 500.0).unwrap(),
            1.0,
            epsilon = 1e-10
        );
        // Two-level Rabi formula sin²(π Ω_eff t) with Ω_eff = Ω₀/2.
        let t = 170.0;
        let rabi = (core::f64::consts::PI * 1.0 * t * MHZ_NS).sin().powi(2);
        assert_abs_diff_eq!(
            rwa_transfer_fidelity(&one, 1, t).unwrap(),
            rabi,
            epsilon = 1e-12
        );
    }

    #[test]
    fn analytic_pulse_shape() {
        let pulse = cook_shore_pulse(&p(7), 4, 1.0).unwrap();
        assert_eq!(pulse.tones.len(), 4);
        assert_eq!(pulse.duration, 500.0);
        assert_eq!(pulse.fourier_order(), 0);
    }
}
