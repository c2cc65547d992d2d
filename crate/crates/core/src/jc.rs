//! Jaynes-Cummings Hamiltonian, dressed eigensystem, transition families and
//! dressed-basis drive operators.
//!
//! Product basis ordering: `|q, n⟩` sits at index `2n + q`, for
//! `q ∈ {0, 1}` and `n = 0..=n_max`. The dressed basis keeps the ground state
//! and both members of every doublet `n = 1..=n_max`; the product state
//! `|1, n_max⟩` belongs to the incomplete excitation manifold `n_max + 1` and is
//! dropped.

use alloc::format;
use alloc::vec::Vec;
use num_traits::Float;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{hermitian_eigen, CMatrix};
use crate::{Error, Result, C64};

/// Physical parameters of the coupled qubit-resonator system.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemParams {
    /// Resonator frequency ω_r/2π (MHz).
    pub omega_r: f64,
    /// Qubit-resonator detuning Δ/2π = (ω_q − ω_r)/2π (MHz).
    pub delta: f64,
    /// Coupling strength g/2π (MHz).
    pub g: f64,
    /// Photon-number truncation.
    pub n_max: usize,
}

impl Default for SystemParams {
    /// Resonant regime with ω_r/2π = 6 GHz, g/2π = 180 MHz and room for a
    /// four-photon target plus three leakage levels.
    fn default() -> Self {
        Self {
            omega_r: 6000.0,
            delta: 0.0,
            g: 180.0,
            n_max: 7,
        }
    }
}

impl SystemParams {
    pub fn new(omega_r: f64, delta: f64, g: f64, n_max: usize) -> Result<Self> {
        let params = Self {
            omega_r,
            delta,
            g,
            n_max,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks the physical constants and `n_max ≥ 1`.
    pub fn validate(&self) -> Result<()> {
        self.validate_physical()?;
        if self.n_max < 1 {
            return Err(Error::TruncationTooSmall {
                n_max: self.n_max,
                required: 1,
            });
        }
        Ok(())
    }

    fn validate_physical(&self) -> Result<()> {
        if !(self.omega_r.is_finite() && self.omega_r > 0.0) {
            return Err(Error::InvalidParams(format!(
                "omega_r must be positive, got {}",
                self.omega_r
            )));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::InvalidParams(format!(
                "g must be positive, got {}",
                self.g
            )));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParams("delta must be finite".into()));
        }
        Ok(())
    }

    pub fn omega_q(&self) -> f64 {
        self.omega_r + self.delta
    }

    pub fn with_n_max(mut self, n_max: usize) -> Self {
        self.n_max = n_max;
        self
    }

    /// Size of the dressed basis, `2·n_max + 1`.
    pub fn dressed_dim(&self) -> usize {
        2 * self.n_max + 1
    }

    /// `√(Δ² + 4 n g²)`, the doublet splitting of manifold `n`.
    pub fn splitting(&self, n: usize) -> f64 {
        (self.delta * self.delta + 4.0 * n as f64 * self.g * self.g).sqrt()
    }

    /// Photon number beyond which dispersive manipulations break down,
    /// `4Δ²/g²`.
    pub fn critical_photon_number(&self) -> f64 {
        4.0 * self.delta * self.delta / (self.g * self.g)
    }
}

/// Identifies a dressed eigenstate: the ground state or a doublet member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DressedLabel {
    Ground,
    Minus(usize),
    Plus(usize),
}

impl DressedLabel {
    /// Excitation number `q + n` of the manifold.
    pub fn manifold(&self) -> usize {
        match *self {
            DressedLabel::Ground => 0,
            DressedLabel::Minus(n) | DressedLabel::Plus(n) => n,
        }
    }

    /// Position in the dressed basis: ground, then `|1,−⟩, |1,+⟩, |2,−⟩, …`.
    pub fn index(&self) -> usize {
        match *self {
            DressedLabel::Ground => 0,
            DressedLabel::Minus(n) => 2 * n - 1,
            DressedLabel::Plus(n) => 2 * n,
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            DressedLabel::Ground
        } else if index % 2 == 1 {
            DressedLabel::Minus(index.div_ceil(2))
        } else {
            DressedLabel::Plus(index / 2)
        }
    }

    /// All labels of a truncation in basis order.
    pub fn all(n_max: usize) -> Vec<DressedLabel> {
        (0..2 * n_max + 1).map(DressedLabel::from_index).collect()
    }

    fn is_valid(&self) -> bool {
        !matches!(self, DressedLabel::Minus(0) | DressedLabel::Plus(0))
    }

    /// Closed-form energy `E/h` in MHz.
    pub fn closed_form_energy(&self, params: &SystemParams) -> f64 {
        match *self {
            DressedLabel::Ground => 0.0,
            DressedLabel::Minus(n) => {
                n as f64 * params.omega_r + 0.5 * (params.delta - params.splitting(n))
            }
            DressedLabel::Plus(n) => {
                n as f64 * params.omega_r + 0.5 * (params.delta + params.splitting(n))
            }
        }
    }
}

impl fmt::Display for DressedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DressedLabel::Ground => write!(f, "0"),
            DressedLabel::Minus(n) => write!(f, "{n}-"),
            DressedLabel::Plus(n) => write!(f, "{n}+"),
        }
    }
}

impl FromStr for DressedLabel {
    type Err = Error;

    /// Parses `0`, `g`, `ground`, `<n>-` or `<n>+`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse dressed label '{s}'"));
        if s == "0" || s.eq_ignore_ascii_case("g") || s.eq_ignore_ascii_case("ground") {
            return Ok(DressedLabel::Ground);
        }
        let (digits, sign) = s.split_at(s.len().checked_sub(1).ok_or_else(bad)?);
        let n: usize = digits.trim().parse().map_err(|_| bad())?;
        let label = match sign {
            "-" => DressedLabel::Minus(n),
            "+" => DressedLabel::Plus(n),
            _ => return Err(bad()),
        };
        if label.is_valid() {
            Ok(label)
        } else {
            Err(bad())
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for DressedLabel {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for DressedLabel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> core::result::Result<Self, D::Error> {
        let s = <alloc::string::String as serde::Deserialize>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A dressed eigenstate with its energy and product-basis amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedState {
    pub label: DressedLabel,
    /// `E/h` in MHz, measured from the ground state.
    pub energy: f64,
    /// Amplitudes over the product basis `|q, n⟩` (index `2n + q`).
    pub amplitudes: Vec<C64>,
}

/// The four transition families leaving manifold `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionSet {
    pub n: usize,
    /// `ω_{n,+}`: `|n,+⟩ → |n+1,+⟩`.
    pub w_plus: f64,
    /// `ω_{n,−}`: `|n,−⟩ → |n+1,−⟩`.
    pub w_minus: f64,
    /// `ω_{n,↗↙}`: `|n,−⟩ → |n+1,+⟩`.
    pub w_up: f64,
    /// `ω_{n,↖↘}`: `|n,+⟩ → |n+1,−⟩`.
    pub w_down: f64,
}

/// Hermitian operators through which the system can be driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DriveOperatorKind {
    /// `σ_x` on the qubit.
    QubitTransverse,
    /// `σ₊σ₋`, a modulation of the qubit frequency.
    QubitLongitudinal,
    /// `a + a†` on the resonator.
    ResonatorPosition,
}

impl DriveOperatorKind {
    pub const ALL: [DriveOperatorKind; 3] = [
        DriveOperatorKind::QubitTransverse,
        DriveOperatorKind::QubitLongitudinal,
        DriveOperatorKind::ResonatorPosition,
    ];

    /// The operator in the product basis of truncation `n_max`.
    pub fn product_operator(&self, n_max: usize) -> CMatrix {
        let dim = 2 * (n_max + 1);
        let mut op = CMatrix::zeros(dim);
        let idx = |q: usize, n: usize| 2 * n + q;
        match self {
            DriveOperatorKind::QubitTransverse => {
                for n in 0..=n_max {
                    op[(idx(0, n), idx(1, n))] = C64::new(1.0, 0.0);
                    op[(idx(1, n), idx(0, n))] = C64::new(1.0, 0.0);
                }
            }
            DriveOperatorKind::QubitLongitudinal => {
                for n in 0..=n_max {
                    op[(idx(1, n), idx(1, n))] = C64::new(1.0, 0.0);
                }
            }
            DriveOperatorKind::ResonatorPosition => {
                for q in 0..2 {
                    for n in 1..=n_max {
                        let amp = C64::new((n as f64).sqrt(), 0.0);
                        op[(idx(q, n - 1), idx(q, n))] = amp;
                        op[(idx(q, n), idx(q, n - 1))] = amp;
                    }
                }
            }
        }
        op
    }
}

impl fmt::Display for DriveOperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriveOperatorKind::QubitTransverse => "qubit_transverse",
            DriveOperatorKind::QubitLongitudinal => "qubit_longitudinal",
            DriveOperatorKind::ResonatorPosition => "resonator_position",
        })
    }
}

/// `H₀/h` in the product basis (MHz).
///
/// Accepts `n_max = 0`, where the matrix is diagonal; everything built on the
/// dressed basis requires `n_max ≥ 1`.
pub fn build_static_hamiltonian(params: &SystemParams) -> Result<CMatrix> {
    params.validate_physical()?;
    let n_max = params.n_max;
    let mut h = CMatrix::zeros(2 * (n_max + 1));
    for n in 0..=n_max {
        let nf = n as f64;
        h[(2 * n, 2 * n)] = C64::new(nf * params.omega_r, 0.0);
        h[(2 * n + 1, 2 * n + 1)] = C64::new(nf * params.omega_r + params.omega_q(), 0.0);
        if n >= 1 {
            // g(aσ₊ + a†σ₋) couples |0, n⟩ and |1, n−1⟩.
            let c = C64::new(params.g * nf.sqrt(), 0.0);
            h[(2 * n, 2 * (n - 1) + 1)] = c;
            h[(2 * (n - 1) + 1, 2 * n)] = c;
        }
    }
    Ok(h)
}

/// Diagonalizes `H₀` and labels the eigenstates.
///
/// States come back in dressed-basis order (see [`DressedLabel::index`]). Each
/// eigenvector's phase is fixed so that its `|0, n⟩` component is real and
/// non-negative.
pub fn dressed_eigensystem(params: &SystemParams) -> Result<Vec<DressedState>> {
    params.validate()?;
    let h = build_static_hamiltonian(params)?;
    let eig = hermitian_eigen(&h);
    let dim = h.dim();
    let n_max = params.n_max;

    let mut by_manifold: Vec<Vec<(f64, Vec<C64>)>> = (0..=n_max).map(|_| Vec::new()).collect();
    for k in 0..dim {
        let v = eig.vectors.column(k);
        let dominant = (0..dim)
            .max_by(|&a, &b| v[a].norm_sqr().total_cmp(&v[b].norm_sqr()))
            .unwrap_or(0);
        let manifold = dominant / 2 + dominant % 2;
        if manifold > n_max {
            continue;
        }
        by_manifold[manifold].push((eig.values[k], v));
    }

    let ground_energy = match by_manifold[0].as_slice() {
        [(e, _)] => *e,
        _ => {
            return Err(Error::LabelAssignment(
                "ground manifold does not contain exactly one state".into(),
            ))
        }
    };

    let mut states = Vec::with_capacity(params.dressed_dim());
    for (manifold, members) in by_manifold.into_iter().enumerate() {
        let expected = if manifold == 0 { 1 } else { 2 };
        if members.len() != expected {
            return Err(Error::LabelAssignment(format!(
                "manifold {manifold} has {} eigenvectors, expected {expected}",
                members.len()
            )));
        }
        let mut members = members;
        members.sort_by(|a, b| a.0.total_cmp(&b.0));
        let labels: &[DressedLabel] = if manifold == 0 {
            &[DressedLabel::Ground]
        } else {
            &[DressedLabel::Minus(manifold), DressedLabel::Plus(manifold)]
        };
        for (label, (value, mut vector)) in labels.iter().zip(members) {
            let energy = value - ground_energy;
            let closed = label.closed_form_energy(params);
            let tol = 1e-9 * (1.0 + closed.abs());
            if (energy - closed).abs() > tol {
                return Err(Error::LabelAssignment(format!(
                    "state {label}: numerical energy {energy} MHz differs from closed form {closed} MHz"
                )));
            }
            fix_phase(&mut vector, manifold);
            states.push(DressedState {
                label: *label,
                energy,
                amplitudes: vector,
            });
        }
    }
    Ok(states)
}

fn fix_phase(vector: &mut [C64], manifold: usize) {
    let anchor = [2 * manifold, 2 * manifold.saturating_sub(1) + 1]
        .into_iter()
        .map(|i| vector[i])
        .find(|z| z.norm() > 1e-300);
    if let Some(z) = anchor {
        let phase = z.conj() / z.norm();
        for a in vector.iter_mut() {
            *a *= phase;
        }
        // Components that should be real are made exactly real.
        for a in vector.iter_mut() {
            if a.im.abs() <= 1e-15 * a.re.abs().max(1e-300) || a.im.abs() < 1e-300 {
                a.im = 0.0;
            }
        }
    }
}

/// The four transition frequencies of manifold `n` (MHz).
pub fn transition_frequencies(params: &SystemParams, n: usize) -> Result<TransitionSet> {
    params.validate()?;
    if n + 1 > params.n_max {
        return Err(Error::TruncationTooSmall {
            n_max: params.n_max,
            required: n + 1,
        });
    }
    let upper = params.splitting(n + 1);
    let lower = params.splitting(n);
    let half_diff = 0.5 * (upper - lower);
    let half_sum = 0.5 * (upper + lower);
    Ok(TransitionSet {
        n,
        w_plus: params.omega_r + half_diff,
        w_minus: params.omega_r - half_diff,
        w_up: params.omega_r + half_sum,
        w_down: params.omega_r - half_sum,
    })
}

/// Dressed basis of a truncation: eigenstates plus cached energies.
#[derive(Debug, Clone)]
pub struct DressedBasis {
    params: SystemParams,
    states: Vec<DressedState>,
}

impl DressedBasis {
    pub fn new(params: &SystemParams) -> Result<Self> {
        Ok(Self {
            params: *params,
            states: dressed_eigensystem(params)?,
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn states(&self) -> &[DressedState] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.energy).collect()
    }

    pub fn labels(&self) -> Vec<DressedLabel> {
        self.states.iter().map(|s| s.label).collect()
    }

    pub fn index_of(&self, label: DressedLabel) -> Result<usize> {
        if !label.is_valid() || label.manifold() > self.params.n_max {
            return Err(Error::UnknownLabel(label));
        }
        Ok(label.index())
    }

    pub fn energy(&self, label: DressedLabel) -> Result<f64> {
        Ok(self.states[self.index_of(label)?].energy)
    }

    /// `⟨j|O|k⟩` over dressed states, computed from the eigenvectors.
    pub fn drive_matrix(&self, kind: DriveOperatorKind) -> CMatrix {
        let op = kind.product_operator(self.params.n_max);
        let dim = self.dim();
        let images: Vec<Vec<C64>> = self
            .states
            .iter()
            .map(|s| op.mul_vec(&s.amplitudes))
            .collect();
        let mut m = CMatrix::zeros(dim);
        for j in 0..dim {
            for k in 0..dim {
                m[(j, k)] = crate::linalg::inner(&self.states[j].amplitudes, &images[k]);
            }
        }
        m
    }
}

/// Dressed-basis matrix elements of a drive operator.
pub fn drive_matrix_elements(params: &SystemParams, kind: DriveOperatorKind) -> Result<CMatrix> {
    Ok(DressedBasis::new(params)?.drive_matrix(kind))
}

/// Dispersive-regime estimates of the transition frequencies (MHz).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveEstimate {
    /// Stark-shifted qubit line, `ω_q + (2n+1) g²/Δ`.
    pub w_up: f64,
    /// Kerr-shifted resonator line `ω_r + [g²/Δ − (2n+1) g⁴/Δ³]`.
    pub w_plus: f64,
    /// Kerr-shifted resonator line `ω_r − [g²/Δ − (2n+1) g⁴/Δ³]`.
    pub w_minus: f64,
}

pub fn dispersive_approximations(params: &SystemParams, n: usize) -> Result<DispersiveEstimate> {
    params.validate_physical()?;
    if params.delta == 0.0 {
        return Err(Error::InvalidArgument(
            "dispersive formulas are singular at zero detuning".into(),
        ));
    }
    let g2 = params.g * params.g;
    let d = params.delta;
    let order = (2 * n + 1) as f64;
    let kerr = g2 / d - order * g2 * g2 / (d * d * d);
    Ok(DispersiveEstimate {
        w_up: params.omega_q() + order * g2 / d,
        w_plus: params.omega_r + kerr,
        w_minus: params.omega_r - kerr,
    })
}

/// Smallest pairwise separation of a set of carrier frequencies.
pub fn min_frequency_separation(tones: &[f64]) -> Result<f64> {
    if tones.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two tones, got {}",
            tones.len()
        )));
    }
    let mut best = f64::INFINITY;
    for (i, a) in tones.iter().enumerate() {
        for b in &tones[i + 1..] {
            best = best.min((a - b).abs());
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn resonant(n_max: usize) -> SystemParams {
        SystemParams::default().with_n_max(n_max)
    }

    #[test]
    fn hamiltonian_smallest_truncation() {
        let h = build_static_hamiltonian(&resonant(0)).unwrap();
        assert_eq!(h.dim(), 2);
        assert_eq!(h[(1, 1)].re, 6000.0);
        assert_eq!(h[(0, 1)].re, 0.0);
        assert_eq!(h[(1, 0)].re, 0.0);
    }

    #[test]
    fn hamiltonian_entries() {
        let h = build_static_hamiltonian(&resonant(4)).unwrap();
        // ⟨1,0|H|0,1⟩ = g
        assert_eq!(h[(1, 2)].re, 180.0);
        for n in 0..=4 {
            assert_eq!(h[(2 * n, 2 * n)].re, n as f64 * 6000.0);
        }
        assert_eq!(h.hermiticity_error(), 0.0);
    }

    #[test]
    fn hamiltonian_block_structure() {
        let params = SystemParams::new(5000.0, 230.0, 75.0, 5).unwrap();
        let h = build_static_hamiltonian(&params).unwrap();
        for a in 0..h.dim() {
            for b in 0..h.dim() {
                let ex = |i: usize| i / 2 + i % 2;
                if ex(a) != ex(b) {
                    assert_eq!(h[(a, b)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(SystemParams::new(6000.0, 0.0, 0.0, 3).is_err());
        assert!(SystemParams::new(-1.0, 0.0, 180.0, 3).is_err());
        assert!(matches!(
            SystemParams::new(6000.0, 0.0, 180.0, 0),
            Err(Error::TruncationTooSmall { .. })
        ));
        assert!(dressed_eigensystem(&resonant(0)).is_err());
    }

    #[test]
    fn resonant_energies() {
        let states = dressed_eigensystem(&resonant(5)).unwrap();
        assert_eq!(states.len(), 11);
        assert_eq!(states[0].label, DressedLabel::Ground);
        assert!(states[0].energy.abs() < 1e-10);
        let e = |l: DressedLabel| states[l.index()].energy;
        assert_abs_diff_eq!(e(DressedLabel::Plus(1)), 6180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e(DressedLabel::Minus(1)), 5820.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e(DressedLabel::Minus(4)), 23640.0, epsilon = 1e-9);
        for n in 1..=5 {
            let nf = n as f64;
            assert_abs_diff_eq!(
                e(DressedLabel::Plus(n)),
                nf * 6000.0 + nf.sqrt() * 180.0,
                epsilon = 1e-9
            );
            assert_abs_diff_eq!(
                e(DressedLabel::Minus(n)),
                nf * 6000.0 - nf.sqrt() * 180.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn resonant_mixing_angle_and_phase() {
        let states = dressed_eigensystem(&resonant(4)).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        for n in 1..=4 {
            let minus = &states[DressedLabel::Minus(n).index()].amplitudes;
            let plus = &states[DressedLabel::Plus(n).index()].amplitudes;
            // |n,−⟩ = (|0,n⟩ − |1,n−1⟩)/√2, |n,+⟩ = (|0,n⟩ + |1,n−1⟩)/√2
            assert_abs_diff_eq!(minus[2 * n].re, h, epsilon = 1e-12);
            assert_abs_diff_eq!(minus[2 * n - 1].re, -h, epsilon = 1e-12);
            assert_abs_diff_eq!(plus[2 * n].re, h, epsilon = 1e-12);
            assert_abs_diff_eq!(plus[2 * n - 1].re, h, epsilon = 1e-12);
        }
        // |⟨1,0|1,+⟩| = 1/√2
        assert_abs_diff_eq!(states[2].amplitudes[1].norm(), h, epsilon = 1e-12);
    }

    #[test]
    fn transitions_resonant() {
        let p = resonant(5);
        let t0 = transition_frequencies(&p, 0).unwrap();
        assert_abs_diff_eq!(t0.w_up, 6180.0, epsilon = 1e-9);
        assert_abs_diff_eq!(t0.w_minus, 5820.0, epsilon = 1e-9);
        let t1 = transition_frequencies(&p, 1).unwrap();
        assert_abs_diff_eq!(t1.w_down, 5565.4, epsilon = 0.05);
        // ω_r ± (√2 − 1) g
        assert_abs_diff_eq!(
            t1.w_plus,
            6000.0 + (2f64.sqrt() - 1.0) * 180.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            t1.w_minus,
            6000.0 - (2f64.sqrt() - 1.0) * 180.0,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(t1.w_plus, 6074.56, epsilon = 0.005);
        assert_abs_diff_eq!(t1.w_minus, 5925.44, epsilon = 0.005);
        assert!(transition_frequencies(&p, 5).is_err());
    }

    #[test]
    fn transitions_match_energy_differences() {
        for &(delta, n_max) in &[(0.0, 6), (350.0, 5), (-120.0, 4)] {
            let p = SystemParams::new(6000.0, delta, 180.0, n_max).unwrap();
            let basis = DressedBasis::new(&p).unwrap();
            let e = |l| basis.energy(l).unwrap();
            for n in 1..n_max {
                let t = transition_frequencies(&p, n).unwrap();
                use DressedLabel::*;
                assert_abs_diff_eq!(t.w_plus, e(Plus(n + 1)) - e(Plus(n)), epsilon = 1e-9);
                assert_abs_diff_eq!(t.w_minus, e(Minus(n + 1)) - e(Minus(n)), epsilon = 1e-9);
                assert_abs_diff_eq!(t.w_up, e(Plus(n + 1)) - e(Minus(n)), epsilon = 1e-9);
                assert_abs_diff_eq!(t.w_down, e(Minus(n + 1)) - e(Plus(n)), epsilon = 1e-9);
            }
            if delta >= 0.0 {
                let t = transition_frequencies(&p, 0).unwrap();
                assert_abs_diff_eq!(t.w_minus, e(DressedLabel::Minus(1)), epsilon = 1e-9);
                assert_abs_diff_eq!(t.w_up, e(DressedLabel::Plus(1)), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn sigma_x_elements_resonant() {
        let basis = DressedBasis::new(&resonant(5)).unwrap();
        let m = basis.drive_matrix(DriveOperatorKind::QubitTransverse);
        use DressedLabel::*;
        let el = |a: DressedLabel, b: DressedLabel| m[(a.index(), b.index())];
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(el(Plus(1), Ground).re, h, epsilon = 1e-12);
        assert_abs_diff_eq!(el(Minus(1), Ground).re, -h, epsilon = 1e-12);
        for n in 1..=3 {
            assert_abs_diff_eq!(el(Plus(n + 1), Minus(n)).re, 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(el(Minus(n + 1), Plus(n)).re, -0.5, epsilon = 1e-12);
            // Elements beyond the two listed families, present in the direct evaluation.
            assert_abs_diff_eq!(el(Minus(n + 1), Minus(n)).re, -0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(el(Plus(n + 1), Plus(n)).re, 0.5, epsilon = 1e-12);
        }
        // No intra-doublet coupling at resonance.
        assert!(el(Plus(1), Minus(1)).norm() < 1e-12);
        assert!(m.hermiticity_error() < 1e-12);
    }

    #[test]
    fn resonator_and_longitudinal_elements() {
        let basis = DressedBasis::new(&resonant(3)).unwrap();
        use DressedLabel::*;
        let x = basis.drive_matrix(DriveOperatorKind::ResonatorPosition);
        assert_abs_diff_eq!(
            x[(Minus(1).index(), Ground.index())].re,
            core::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-12
        );
        let z = basis.drive_matrix(DriveOperatorKind::QubitLongitudinal);
        assert_abs_diff_eq!(
            z[(Minus(1).index(), Plus(1).index())].re,
            -0.5,
            epsilon = 1e-12
        );
        assert_eq!(z[(0, 0)].norm(), 0.0);
        for k in 0..basis.dim() {
            assert_eq!(z[(0, k)].norm(), 0.0);
        }
    }

    #[test]
    fn dispersive_limits() {
        let p = SystemParams::new(6000.0, 1800.0, 180.0, 3).unwrap();
        let d = dispersive_approximations(&p, 0).unwrap();
        let exact = transition_frequencies(&p, 0).unwrap();
        assert_abs_diff_eq!(d.w_up, 7818.0, epsilon = 1e-9);
        assert_abs_diff_eq!(exact.w_up, 7817.83, epsilon = 0.01);
        assert!((d.w_up - exact.w_up).abs() < 0.2);
        // g²/Δ = 18 MHz, g⁴/Δ³ = 0.18 MHz
        assert_abs_diff_eq!(d.w_plus, 6000.0 + 18.0 - 0.18, epsilon = 1e-9);
        assert_abs_diff_eq!(d.w_minus, 6000.0 - 18.0 + 0.18, epsilon = 1e-9);
        let far = SystemParams::new(6000.0, 1e9, 180.0, 3).unwrap();
        let d = dispersive_approximations(&far, 2).unwrap();
        assert_abs_diff_eq!(d.w_up, far.omega_q(), epsilon = 1e-3);
        assert!(dispersive_approximations(&resonant(3), 0).is_err());
    }

    #[test]
    fn frequency_separation() {
        assert_abs_diff_eq!(
            min_frequency_separation(&[6180.0, 5565.4, 6566.3, 5328.2]).unwrap(),
            237.2,
            epsilon = 1e-9
        );
        assert_eq!(min_frequency_separation(&[6000.0, 6000.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            min_frequency_separation(&[5820.0, 6434.6, 5433.7]).unwrap(),
            386.3,
            epsilon = 1e-9
        );
        assert!(min_frequency_separation(&[6000.0]).is_err());
    }

    #[test]
    fn label_parsing_and_indices() {
        for (i, l) in DressedLabel::all(4).into_iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(
                alloc::string::ToString::to_string(&l)
                    .parse::<DressedLabel>()
                    .unwrap(),
                l
            );
        }
        assert_eq!(
            "ground".parse::<DressedLabel>().unwrap(),
            DressedLabel::Ground
        );
        assert!("0-".parse::<DressedLabel>().is_err());
        assert!("3x".parse::<DressedLabel>().is_err());
        assert_eq!(vec![DressedLabel::Ground], DressedLabel::all(0));
    }

    #[test]
    fn critical_photon_number() {
        let p = SystemParams::new(6000.0, 1800.0, 180.0, 3).unwrap();
        assert_abs_diff_eq!(p.critical_photon_number(), 400.0, epsilon = 1e-9);
    }
}
