//! Pulse sequences built on the ladder: single-step Fock preparation, qudit
//! rotations over the coupling graph, and NOON states of two resonators.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::dynamics::{Propagator, SimulationConfig, SparseOperator, StateVector, Trajectory, DrivenSystem};
use crate::jc::{DressedLabel, DriveOperatorKind, SystemParams};
use crate::linalg::inner;
use crate::optimizer::{optimize_fock_pulse, OptimizationProblem, OptimizationResult, OptimizerOptions};
use crate::pulses::{chain_amplitudes, cook_shore_pulse, LadderBasis, Pulse};
use crate::{Error, Result, C64, MHZ_NS, TAU};

use DressedLabel::{Ground, Minus, Plus};

/// Two families of graph edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EdgeKind {
    /// Multi-tone swap along a chain of diagonal transitions, possibly
    /// preceded by one `ω_{j,−}` step. Carries π rotations only.
    Diagonal,
    /// Single `ω_{n,−}` transition between neighbouring levels.
    PlusMinus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
}

/// Qudit node `n` as a dressed label: `|0⟩` or `|n,−⟩`.
pub fn node_label(n: usize) -> DressedLabel {
    if n == 0 {
        Ground
    } else {
        Minus(n)
    }
}

/// Rotations available between the qudit levels `{|0⟩, |1,−⟩, …, |d−1,−⟩}`.
///
/// Neighbouring levels are joined by plus-minus edges. Diagonal edges join
/// `|j,−⟩` and `|k,−⟩` for every `k − j ≥ 2` with `j ≥ 1`, and `|0⟩` with
/// every odd `|k,−⟩`, `k ≥ 3`. Rotations are realized with constant tones of
/// strength `omega0` (MHz) per chain bond.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    params: SystemParams,
    d: usize,
    omega0: f64,
    edges: Vec<Edge>,
}

/// Default chain strength Ω₀ (MHz) of rotation pulses.
pub const DEFAULT_OMEGA0: f64 = 1.0;

/// Builds the coupling graph of a `d`-level qudit.
pub fn build_coupling_graph(params: &SystemParams, d: usize) -> Result<CouplingGraph> {
    params.validate()?;
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "a qudit needs at least two levels, got d = {d}"
        )));
    }
    if d > params.n_max {
        return Err(Error::TruncationTooSmall {
            n_max: params.n_max,
            required: d,
        });
    }
    let mut edges = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let kind = if b == a + 1 {
                Some(EdgeKind::PlusMinus)
            } else if a >= 1 || (b - a) % 2 == 1 {
                Some(EdgeKind::Diagonal)
            } else {
                None
            };
            if let Some(kind) = kind {
                edges.push(Edge { a, b, kind });
            }
        }
    }
    Ok(CouplingGraph {
        params: params.clone(),
        d,
        omega0: DEFAULT_OMEGA0,
        edges,
    })
}

impl CouplingGraph {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Number of levels.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    pub fn with_omega0(mut self, omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Ω₀ must be positive, got {omega0}"
            )));
        }
        self.omega0 = omega0;
        Ok(self)
    }

    pub fn nodes(&self) -> Vec<DressedLabel> {
        (0..self.d).map(node_label).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, j: usize, k: usize) -> Option<Edge> {
        let (a, b) = (j.min(k), j.max(k));
        self.edges.iter().copied().find(|e| e.a == a && e.b == b)
    }

    pub fn neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.a == j {
                    Some(e.b)
                } else if e.b == j {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Number of connected components (breadth-first search).
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.d];
        let mut count = 0;
        for start in 0..self.d {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.components() == 1
    }

    /// Dressed states swept by the rotation on edge `(j, k)`.
    pub fn ladder(&self, j: usize, k: usize) -> Result<LadderBasis> {
        self.edge(j, k).ok_or(Error::NoIntermediate { j, k })?;
        LadderBasis::to_minus(node_label(j.min(k)), j.max(k))
    }

    /// Pulse length (ns) of a rotation by `theta` on edge `(j, k)`.
    pub fn rotation_duration(&self, theta: f64) -> f64 {
        theta.abs() / (TAU * self.omega0 * MHZ_NS)
    }

    /// Constant-tone pulse rotating edge `(j, k)` by `theta`.
    pub fn rotation_pulse(&self, j: usize, k: usize, theta: f64) -> Result<Pulse> {
        let edge = self.edge(j, k).ok_or(Error::NoIntermediate { j, k })?;
        check_angle(theta)?;
        if edge.kind == EdgeKind::Diagonal && !is_pi(theta) {
            return Err(Error::InvalidArgument(format!(
                "diagonal edge ({j}, {k}) only carries π swaps, got θ = {theta}"
            )));
        }
        let ladder = self.ladder(j, k)?;
        ladder_pulse(
            &self.params,
            &ladder,
            DriveOperatorKind::QubitTransverse,
            self.omega0.copysign(theta),
            self.rotation_duration(theta),
        )
    }
}

fn is_pi(theta: f64) -> bool {
    (theta.abs() - core::f64::consts::PI).abs() < 1e-12
}

fn check_angle(theta: f64) -> Result<()> {
    if theta.is_finite() && theta > -TAU && theta <= TAU && theta != 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "rotation angle must lie in (−2π, 2π] and be non-zero, got {theta}"
        )))
    }
}

/// Constant tones driving `ladder` as a spin rotation of strength `omega0`:
/// bond amplitudes follow [`chain_amplitudes`], negative `omega0` reverses
/// the rotation sense.
pub fn ladder_pulse(
    params: &SystemParams,
    ladder: &LadderBasis,
    channel: DriveOperatorKind,
    omega0: f64,
    duration: f64,
) -> Result<Pulse> {
    let carriers = ladder.carriers(params)?;
    let prop = Propagator::new(params)?;
    let elements = ladder.matrix_elements(prop.basis(), channel)?;
    let amps: Vec<f64> = chain_amplitudes(&elements, omega0.abs())?
        .into_iter()
        .map(|a| a.copysign(omega0))
        .collect();
    Pulse::constant(channel, &carriers, &amps, duration)
}

/// One two-level rotation `R_{j,k}(θ)` with the pulse realizing it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotationStep {
    pub j: usize,
    pub k: usize,
    pub angle: f64,
    pub kind: EdgeKind,
    pub realized_by: Pulse,
}

/// Decomposes `R_{j,k}(θ)` into at most three rotations on graph edges.
///
/// A direct edge that can carry `θ` gives one step. Otherwise `j` is swapped
/// onto a neighbour `m` of `k`, rotated, and swapped back; `m` minimizes the
/// total duration with ties going to the smaller `m`. If no such `m` exists
/// the roles of `j` and `k` are exchanged. The result equals `R_{j,k}(θ)` up
/// to phases on the swapped levels.
pub fn compile_rotation(
    graph: &CouplingGraph,
    j: usize,
    k: usize,
    theta: f64,
) -> Result<Vec<RotationStep>> {
    if j == k || j >= graph.d || k >= graph.d {
        return Err(Error::InvalidArgument(format!(
            "rotation needs two distinct levels below d = {}, got ({j}, {k})",
            graph.d
        )));
    }
    check_angle(theta)?;
    let step = |a: usize, b: usize, angle: f64| -> Result<RotationStep> {
        let edge = graph.edge(a, b).ok_or(Error::NoIntermediate { j: a, k: b })?;
        Ok(RotationStep {
            j: a,
            k: b,
            angle,
            kind: edge.kind,
            realized_by: graph.rotation_pulse(a, b, angle)?,
        })
    };
    if let Some(edge) = graph.edge(j, k) {
        if edge.kind == EdgeKind::PlusMinus || is_pi(theta) {
            return Ok(vec![step(j, k, theta)?]);
        }
    }
    let pi = core::f64::consts::PI;
    for (swap_end, other) in [(j, k), (k, j)] {
        let mut best: Option<(f64, usize)> = None;
        for m in [other.wrapping_sub(1), other + 1] {
            if m >= graph.d || m == swap_end {
                continue;
            }
            if graph.edge(swap_end, m).is_none() {
                continue;
            }
            let cost = 2.0 * graph.rotation_duration(pi) + graph.rotation_duration(theta);
            let better = match best {
                None => true,
                Some((c, bm)) => cost < c || (cost == c && m < bm),
            };
            if better {
                best = Some((cost, m));
            }
        }
        if let Some((_, m)) = best {
            let swap = step(swap_end, m, pi)?;
            return Ok(vec![swap.clone(), step(m, other, theta)?, swap]);
        }
    }
    Err(Error::NoIntermediate { j, k })
}

/// A term `amplitude · |labels[0]⟩ ⊗ |labels[1]⟩ ⊗ …` of a plan state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Component {
    pub labels: Vec<DressedLabel>,
    pub amplitude: C64,
}

/// Superposition of product dressed states, one label per system.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PlanState {
    pub components: Vec<Component>,
}

impl PlanState {
    /// `|label⟩` of one system.
    pub fn single(label: DressedLabel) -> Self {
        Self {
            components: vec![Component {
                labels: vec![label],
                amplitude: C64::new(1.0, 0.0),
            }],
        }
    }

    /// `(|a⟩|0⟩ + |0⟩|a⟩)/√2`.
    pub fn symmetric_pair(label: DressedLabel) -> Self {
        let c = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            components: vec![
                Component {
                    labels: vec![label, Ground],
                    amplitude: c,
                },
                Component {
                    labels: vec![Ground, label],
                    amplitude: c,
                },
            ],
        }
    }

    pub fn norm(&self) -> f64 {
        // Distinct components are orthogonal product states.
        let mut total = C64::new(0.0, 0.0);
        for a in &self.components {
            for b in &self.components {
                if a.labels == b.labels {
                    total += a.amplitude.conj() * b.amplitude;
                }
            }
        }
        total.re.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum StageKind {
    /// `|0⟩ → |N,−⟩` in one multi-tone step.
    FockTransfer,
    /// Qudit rotation on a graph edge.
    Rotation,
    /// `|1,+⟩ → |1,−⟩` on the longitudinal channel.
    IntraDoublet,
    /// Zig-zag transfer up to `|N,−⟩` on each resonator in parallel.
    LadderTransfer,
}

/// One pulse applied to every system at once.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stage {
    pub kind: StageKind,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub edge: Option<(usize, usize)>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub angle: Option<f64>,
    pub pulse: Pulse,
    /// Pulse for the second system when it differs from `pulse`.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub pulse_b: Option<Pulse>,
}

impl Stage {
    fn new(kind: StageKind, pulse: Pulse) -> Self {
        Self {
            kind,
            edge: None,
            angle: None,
            pulse,
            pulse_b: None,
        }
    }

    pub fn duration(&self) -> f64 {
        self.pulse.duration
    }

    /// Pulse seen by system `s`.
    pub fn pulse_for(&self, s: usize) -> &Pulse {
        match (s, &self.pulse_b) {
            (1, Some(p)) => p,
            _ => &self.pulse,
        }
    }
}

/// Ordered pulse stages taking `initial` to `target`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProtocolPlan {
    /// Number of independent qubit-resonator systems (1 or 2).
    pub systems: usize,
    pub initial: PlanState,
    pub stages: Vec<Stage>,
    pub target: PlanState,
}

impl ProtocolPlan {
    /// Sum of stage durations (ns).
    pub fn duration(&self) -> f64 {
        self.stages.iter().map(Stage::duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.systems) {
            return Err(Error::InvalidArgument(format!(
                "plans cover one or two systems, got {}",
                self.systems
            )));
        }
        for state in [&self.initial, &self.target] {
            if state.components.is_empty() {
                return Err(Error::InvalidArgument("empty plan state".into()));
            }
            if let Some(c) = state.components.iter().find(|c| c.labels.len() != self.systems) {
                return Err(Error::DimensionMismatch {
                    expected: self.systems,
                    got: c.labels.len(),
                });
            }
            if (state.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "plan state has norm {}",
                    state.norm()
                )));
            }
        }
        for stage in &self.stages {
            stage.pulse.validate()?;
            if let Some(p) = &stage.pulse_b {
                p.validate()?;
                if (p.duration - stage.pulse.duration).abs() > 1e-9 * p.duration {
                    return Err(Error::InvalidPulse(
                        "parallel pulses of one stage must share a duration".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Where the Fock-preparation pulse comes from.
#[derive(Debug, Clone, Copy)]
pub enum PulseSource<'a> {
    /// Constant spin-rotation tones of strength Ω₀ (MHz).
    Analytic { omega0: f64 },
    Optimized(&'a OptimizationResult),
}

/// Single-stage plan `|0⟩ → |N,−⟩`.
pub fn fock_prep_plan(params: &SystemParams, n: usize, source: PulseSource) -> Result<ProtocolPlan> {
    params.validate()?;
    if n < 1 {
        return Err(Error::InvalidArgument("target level must be at least 1".into()));
    }
    if n + 1 > params.n_max {
        return Err(Error::TruncationTooSmall {
            n_max: params.n_max,
            required: n + 1,
        });
    }
    let pulse = match source {
        PulseSource::Analytic { omega0 } => cook_shore_pulse(params, n, omega0)?,
        PulseSource::Optimized(result) => {
            if result.best_pulse.tones.len() != n {
                return Err(Error::InvalidPulse(format!(
                    "optimized pulse has {} tones, N = {n} needs {n}",
                    result.best_pulse.tones.len()
                )));
            }
            result.best_pulse.clone()
        }
    };
    Ok(ProtocolPlan {
        systems: 1,
        initial: PlanState::single(Ground),
        stages: vec![Stage::new(StageKind::FockTransfer, pulse)],
        target: PlanState::single(Minus(n)),
    })
}

/// Plan for `R_{j,k}(θ)` applied to qudit level `initial`, with analytic
/// rotation pulses. The target holds the ideal rotated state.
pub fn qudit_plan(
    graph: &CouplingGraph,
    j: usize,
    k: usize,
    theta: f64,
    initial: usize,
) -> Result<ProtocolPlan> {
    if initial >= graph.d {
        return Err(Error::InvalidArgument(format!(
            "initial level {initial} outside the qudit"
        )));
    }
    let steps = compile_rotation(graph, j, k, theta)?;
    let stages = steps
        .into_iter()
        .map(|s| Stage {
            kind: StageKind::Rotation,
            edge: Some((s.j, s.k)),
            angle: Some(s.angle),
            pulse: s.realized_by,
            pulse_b: None,
        })
        .collect();
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    let target = if initial == j || initial == k {
        let other = if initial == j { k } else { j };
        let mut components = Vec::new();
        if c.abs() > 1e-15 {
            components.push(Component {
                labels: vec![node_label(initial)],
                amplitude: C64::new(c, 0.0),
            });
        }
        if s.abs() > 1e-15 {
            components.push(Component {
                labels: vec![node_label(other)],
                amplitude: C64::new(0.0, -s),
            });
        }
        PlanState { components }
    } else {
        PlanState::single(node_label(initial))
    };
    Ok(ProtocolPlan {
        systems: 1,
        initial: PlanState::single(node_label(initial)),
        stages,
        target,
    })
}

/// Replaces every π-rotation pulse of a qudit plan by an optimized pulse of
/// duration `duration` with `m` Fourier components. Each distinct edge is
/// optimized once; the results are returned edge by edge.
pub fn optimize_rotation_stages(
    plan: &mut ProtocolPlan,
    graph: &CouplingGraph,
    duration: f64,
    m: usize,
    options: &OptimizerOptions,
    config: &SimulationConfig,
) -> Result<Vec<((usize, usize), OptimizationResult)>> {
    let mut done: Vec<((usize, usize), OptimizationResult)> = Vec::new();
    for stage in plan.stages.iter_mut() {
        let (Some((a, b)), Some(angle)) = (stage.edge, stage.angle) else {
            continue;
        };
        if !is_pi(angle) {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if let Some((_, r)) = done.iter().find(|(e, _)| *e == key) {
            stage.pulse = r.best_pulse.clone();
            continue;
        }
        let problem = OptimizationProblem {
            params: graph.params.clone(),
            n: key.1,
            duration,
            m,
            channel: DriveOperatorKind::QubitTransverse,
            initial_state: node_label(key.0),
            target_state: Minus(key.1),
        };
        let result = optimize_fock_pulse(&problem, options, config)?;
        stage.pulse = result.best_pulse.clone();
        done.push((key, result));
    }
    Ok(done)
}

/// `|1,+⟩ → |1,−⟩` on the longitudinal channel, which leaves `|0⟩` invariant.
pub fn intra_doublet_pulse(params: &SystemParams, omega0: f64) -> Result<Pulse> {
    let prop = Propagator::new(params)?;
    let basis = prop.basis();
    let carrier = basis.energy(Plus(1))? - basis.energy(Minus(1))?;
    let m = basis.drive_matrix(DriveOperatorKind::QubitLongitudinal);
    let element = m[(basis.index_of(Minus(1))?, basis.index_of(Plus(1))?)].re;
    let amps = chain_amplitudes(&[element], omega0)?;
    Pulse::constant(
        DriveOperatorKind::QubitLongitudinal,
        &[carrier],
        &amps,
        crate::pulses::rotation_time(omega0),
    )
}

/// NOON plan from `(|1,+⟩|0⟩ + |0⟩|1,+⟩)/√2` to `(|N,−⟩|0⟩ + |0⟩|N,−⟩)/√2`.
///
/// Even `N`: one zig-zag stage `|1,+⟩ → |N,−⟩` on both resonators. Odd `N`:
/// an intra-doublet stage, then a zig-zag stage `|1,−⟩ → |N,−⟩` when `N > 1`.
pub fn noon_plan(
    params_a: &SystemParams,
    params_b: &SystemParams,
    n: usize,
    omega0: f64,
) -> Result<ProtocolPlan> {
    if n < 1 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    for p in [params_a, params_b] {
        p.validate()?;
        if n + 1 > p.n_max {
            return Err(Error::TruncationTooSmall {
                n_max: p.n_max,
                required: n + 1,
            });
        }
    }
    let both = |f: &dyn Fn(&SystemParams) -> Result<Pulse>, kind| -> Result<Stage> {
        let a = f(params_a)?;
        let b = f(params_b)?;
        let mut stage = Stage::new(kind, a);
        if stage.pulse != b {
            stage.pulse_b = Some(b);
        }
        Ok(stage)
    };
    let transfer = |start: DressedLabel| {
        move |p: &SystemParams| -> Result<Pulse> {
            let ladder = LadderBasis::to_minus(start, n)?;
            ladder_pulse(
                p,
                &ladder,
                DriveOperatorKind::QubitTransverse,
                omega0,
                crate::pulses::rotation_time(omega0),
            )
        }
    };
    let mut stages = Vec::new();
    if n % 2 == 0 {
        stages.push(both(&transfer(Plus(1)), StageKind::LadderTransfer)?);
    } else {
        stages.push(both(
            &|p: &SystemParams| intra_doublet_pulse(p, omega0),
            StageKind::IntraDoublet,
        )?);
        if n > 1 {
            stages.push(both(&transfer(Minus(1)), StageKind::LadderTransfer)?);
        }
    }
    Ok(ProtocolPlan {
        systems: 2,
        initial: PlanState::symmetric_pair(Plus(1)),
        stages,
        target: PlanState::symmetric_pair(Minus(n)),
    })
}

/// Evolution of one system from one dressed state through every stage.
#[derive(Debug, Clone)]
pub struct Branch {
    pub system: usize,
    pub initial: DressedLabel,
    pub final_state: StateVector,
    /// Stage trajectories joined on a common clock (present when recorded).
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    /// `|⟨target|U|initial⟩|²`.
    pub fidelity: f64,
    /// Population of each target component's product state.
    pub component_populations: Vec<f64>,
    pub branches: Vec<Branch>,
}

fn check_systems(plan: &ProtocolPlan, params: &[SystemParams]) -> Result<()> {
    plan.validate()?;
    if params.len() != plan.systems {
        return Err(Error::DimensionMismatch {
            expected: plan.systems,
            got: params.len(),
        });
    }
    Ok(())
}

/// Runs a plan. Systems are uncoupled, so every product component of the
/// initial state is followed branch by branch and the overlap with the
/// target is assembled at the end.
pub fn simulate_plan(
    plan: &ProtocolPlan,
    params: &[SystemParams],
    config: &SimulationConfig,
    record: bool,
) -> Result<PlanOutcome> {
    check_systems(plan, params)?;
    let props = params
        .iter()
        .map(Propagator::new)
        .collect::<Result<Vec<_>>>()?;

    let mut branches: Vec<Branch> = Vec::new();
    for comp in &plan.initial.components {
        for (s, &label) in comp.labels.iter().enumerate() {
            if branches.iter().any(|b| b.system == s && b.initial == label) {
                continue;
            }
            branches.push(run_branch(&props[s], plan, s, label, config, record)?);
        }
    }

    let project = |s: usize, start: DressedLabel, onto: DressedLabel| -> Result<C64> {
        let b = branches
            .iter()
            .find(|b| b.system == s && b.initial == start)
            .expect("every initial label has a branch");
        Ok(b.final_state.amplitudes[props[s].basis().index_of(onto)?])
    };

    let mut overlap = C64::new(0.0, 0.0);
    let mut component_populations = Vec::with_capacity(plan.target.components.len());
    for t in &plan.target.components {
        let mut along = C64::new(0.0, 0.0);
        for c in &plan.initial.components {
            let mut amp = c.amplitude;
            for s in 0..plan.systems {
                amp *= project(s, c.labels[s], t.labels[s])?;
            }
            along += amp;
        }
        component_populations.push(along.norm_sqr());
        overlap += t.amplitude.conj() * along;
    }
    Ok(PlanOutcome {
        fidelity: overlap.norm_sqr(),
        component_populations,
        branches,
    })
}

fn run_branch(
    prop: &Propagator,
    plan: &ProtocolPlan,
    s: usize,
    label: DressedLabel,
    config: &SimulationConfig,
    record: bool,
) -> Result<Branch> {
    let mut state = StateVector::dressed(prop.params().n_max, label)?;
    let mut joined: Option<Trajectory> = None;
    let mut offset = 0.0;
    for stage in &plan.stages {
        let pulse = core::slice::from_ref(stage.pulse_for(s));
        let t = stage.duration();
        if record {
            let traj = prop.run(pulse, &state, t, config)?;
            state = traj.final_state().clone();
            match joined.as_mut() {
                None => {
                    let mut first = traj;
                    first.times.iter_mut().for_each(|x| *x += offset);
                    joined = Some(first);
                }
                Some(acc) => {
                    // The first sample repeats the previous stage's last one.
                    for ((time, st), pops) in traj
                        .times
                        .into_iter()
                        .zip(traj.states)
                        .zip(traj.populations)
                        .skip(1)
                    {
                        acc.times.push(time + offset);
                        acc.states.push(st);
                        acc.populations.push(pops);
                    }
                }
            }
        } else {
            state = prop.final_state(pulse, &state, t, config)?;
        }
        offset += t;
    }
    Ok(Branch {
        system: s,
        initial: label,
        final_state: state,
        trajectory: joined,
    })
}

/// Fidelity of a two-system plan from one propagation of the joint
/// tensor-product state. Slow; meant as a cross-check of [`simulate_plan`].
pub fn simulate_plan_joint(
    plan: &ProtocolPlan,
    params: &[SystemParams],
    config: &SimulationConfig,
) -> Result<f64> {
    check_systems(plan, params)?;
    if plan.systems != 2 {
        return Err(Error::InvalidArgument(
            "joint propagation needs a two-system plan".into(),
        ));
    }
    let pa = Propagator::new(&params[0])?;
    let pb = Propagator::new(&params[1])?;
    let (da, db) = (pa.dim(), pb.dim());
    let ea = pa.basis().energies();
    let eb = pb.basis().energies();
    let energies: Vec<f64> = ea
        .iter()
        .flat_map(|x| eb.iter().map(move |y| x + y))
        .collect();

    let joint = |state: &PlanState| -> Result<Vec<C64>> {
        let mut v = vec![C64::new(0.0, 0.0); da * db];
        for c in &state.components {
            let i = pa.basis().index_of(c.labels[0])?;
            let j = pb.basis().index_of(c.labels[1])?;
            v[i * db + j] += c.amplitude;
        }
        Ok(v)
    };
    let mut psi = joint(&plan.initial)?;
    let target = joint(&plan.target)?;

    for stage in &plan.stages {
        let a = stage.pulse_for(0);
        let b = stage.pulse_for(1);
        let op_a: SparseOperator = pa.operator(a.channel).kron_identity(db);
        let op_b: SparseOperator = pb.operator(b.channel).identity_kron(da);
        let mut system = DrivenSystem::new(energies.clone());
        system.drive(op_a, a)?;
        system.drive(op_b, b)?;
        psi = system.evolve(&psi, stage.duration(), config, false)?.final_state;
    }
    Ok(inner(&target, &psi).norm_sqr())
}
