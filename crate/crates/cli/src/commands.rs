//! One function per subcommand. Each takes an activated [`RunConfig`].

use std::path::{Path, PathBuf};

use resonant_core::dynamics::{StateVector, Trajectory};
use resonant_core::jc::{transition_frequencies, DressedBasis, DressedLabel, SystemParams};
use resonant_core::optimizer::{
    optimize_with_checkpoints, OptimizationProblem, OptimizationResult, OptimizerOptions,
    RestartRecord,
};
use resonant_core::protocols::{
    build_coupling_graph, fock_prep_plan, node_label, noon_plan, optimize_rotation_stages,
    qudit_plan, simulate_plan, simulate_plan_joint, PlanOutcome, ProtocolPlan, PulseSource,
};
use resonant_core::pulses::{ladder_basis, LadderBasis, Pulse};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{state_pairs, write_json, write_trajectory_csv};

/// Dressed energies and transitions out of manifold `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SpectrumRecord {
    pub n: usize,
    /// `E(n,−)`; absent for `n = 0`.
    pub E_minus: Option<f64>,
    pub E_plus: Option<f64>,
    pub w_plus: f64,
    pub w_minus: f64,
    pub w_up: f64,
    pub w_down: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub system: SystemParams,
    pub ground_energy: f64,
    pub records: Vec<SpectrumRecord>,
}

pub fn spectrum(config: &RunConfig) -> CliResult<SpectrumReport> {
    let params = config.system;
    let basis = DressedBasis::new(&params)?;
    let mut records = Vec::with_capacity(params.n_max);
    for n in 0..params.n_max {
        let t = transition_frequencies(&params, n)?;
        let (e_minus, e_plus) = if n == 0 {
            (None, None)
        } else {
            (
                Some(basis.energy(DressedLabel::Minus(n))?),
                Some(basis.energy(DressedLabel::Plus(n))?),
            )
        };
        records.push(SpectrumRecord {
            n,
            E_minus: e_minus,
            E_plus: e_plus,
            w_plus: t.w_plus,
            w_minus: t.w_minus,
            w_up: t.w_up,
            w_down: t.w_down,
        });
    }
    let report = SpectrumReport {
        system: params,
        ground_energy: basis.energy(DressedLabel::Ground)?,
        records,
    };
    write_json(config.out.as_deref(), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPopulation {
    pub label: DressedLabel,
    pub population: f64,
}

fn populations(state: &StateVector) -> Vec<LabelPopulation> {
    state
        .populations()
        .into_iter()
        .enumerate()
        .map(|(i, population)| LabelPopulation {
            label: DressedLabel::from_index(i),
            population,
        })
        .collect()
}

/// Outcome of a single-system plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub plan: ProtocolPlan,
    pub fidelity: f64,
    pub infidelity: f64,
    pub component_populations: Vec<f64>,
    /// Final populations of every branch, in branch order.
    pub final_populations: Vec<Vec<LabelPopulation>>,
    /// Final amplitudes of every branch as `[re, im]` pairs.
    pub final_states: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub optimized_edges: Vec<EdgeOptimization>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeOptimization {
    pub edge: (usize, usize),
    pub infidelity: f64,
    pub pulse: Pulse,
}

fn plan_report(plan: ProtocolPlan, outcome: &PlanOutcome) -> PlanReport {
    PlanReport {
        plan,
        fidelity: outcome.fidelity,
        infidelity: 1.0 - outcome.fidelity,
        component_populations: outcome.component_populations.clone(),
        final_populations: outcome
            .branches
            .iter()
            .map(|b| populations(&b.final_state))
            .collect(),
        final_states: outcome
            .branches
            .iter()
            .map(|b| state_pairs(&b.final_state))
            .collect(),
        joint_fidelity: None,
        optimized_edges: Vec::new(),
    }
}

/// Trajectory files: `path` for a single branch, otherwise one file per
/// branch named `<stem>_s<system>_<label>.csv`.
fn write_branches(path: &Path, outcome: &PlanOutcome, first: &[DressedLabel]) -> CliResult<()> {
    let trajectories: Vec<(usize, DressedLabel, &Trajectory)> = outcome
        .branches
        .iter()
        .filter_map(|b| b.trajectory.as_ref().map(|t| (b.system, b.initial, t)))
        .collect();
    if let [(_, _, t)] = trajectories.as_slice() {
        return write_trajectory_csv(path, t, first);
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    for (s, label, t) in trajectories {
        let name = format!("{stem}_s{s}_{}.csv", label.to_string().replace('-', "m").replace('+', "p"));
        write_trajectory_csv(&path.with_file_name(name), t, first)?;
    }
    Ok(())
}

fn run_plan(
    config: &RunConfig,
    plan: ProtocolPlan,
    systems: &[SystemParams],
    first: &[DressedLabel],
) -> CliResult<(PlanReport, PlanOutcome)> {
    let record = config.trajectory.is_some();
    let outcome = simulate_plan(&plan, systems, &config.simulation, record)?;
    if let Some(path) = &config.trajectory {
        write_branches(path, &outcome, first)?;
    }
    Ok((plan_report(plan, &outcome), outcome))
}

fn parse_error(path: &Path, message: impl ToString) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read_json(path: &Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e))
}

/// A pulse read from disk with whatever context the file carried.
#[derive(Debug, Clone)]
pub struct LoadedPulse {
    pub pulse: Pulse,
    pub system: Option<SystemParams>,
    pub published_infidelity: Option<f64>,
}

/// Reads a bare pulse, an optimization result or report, or one row of a
/// bundled table (chosen by `row`, else by `duration`).
pub fn load_pulse(path: &Path, row: Option<usize>, duration: Option<f64>) -> CliResult<LoadedPulse> {
    let value = read_json(path)?;
    let from = |v: &Value| -> CliResult<Pulse> {
        serde_json::from_value(v.clone()).map_err(|e| parse_error(path, e))
    };
    if let Some(rows) = value.get("rows").and_then(Value::as_array) {
        let index = match (row, duration) {
            (Some(r), _) => r,
            (None, Some(t)) => rows
                .iter()
                .position(|r| r.get("duration_ns").and_then(Value::as_f64) == Some(t))
                .ok_or_else(|| CliError::Config(format!("no table row with T = {t} ns")))?,
            (None, None) => {
                return Err(CliError::Config(
                    "table files need a row index or --T".into(),
                ))
            }
        };
        let entry = rows
            .get(index)
            .ok_or_else(|| CliError::Config(format!("table has no row {index}")))?;
        let system = value
            .get("system")
            .map(|s| serde_json::from_value(s.clone()).map_err(|e| parse_error(path, e)))
            .transpose()?;
        return Ok(LoadedPulse {
            pulse: from(&entry["pulse"])?,
            system,
            published_infidelity: entry.get("published_infidelity").and_then(Value::as_f64),
        });
    }
    let pulse = if let Some(p) = value.get("result").and_then(|r| r.get("best_pulse")) {
        from(p)?
    } else if let Some(p) = value.get("best_pulse") {
        from(p)?
    } else {
        from(&value)?
    };
    Ok(LoadedPulse {
        pulse,
        system: None,
        published_infidelity: None,
    })
}

pub fn fock_prep(config: &RunConfig) -> CliResult<PlanReport> {
    let block = config.fock.clone().unwrap_or_default();
    let params = config.system;
    let mut plan = fock_prep_plan(&params, block.n, PulseSource::Analytic { omega0: block.omega0 })?;
    if let Some(path) = &block.pulse_file {
        let loaded = load_pulse(path, None, None)?;
        if loaded.pulse.tones.len() != block.n {
            return Err(CliError::Config(format!(
                "pulse has {} tones but N = {}",
                loaded.pulse.tones.len(),
                block.n
            )));
        }
        plan.stages[0].pulse = loaded.pulse;
    }
    let (report, _) = run_plan(config, plan, &[params], &ladder_basis(block.n).labels)?;
    write_json(config.out.as_deref(), &report)?;
    Ok(report)
}

/// Result file of `optimize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub problem: OptimizationProblem,
    pub options: OptimizerOptions,
    pub result: OptimizationResult,
}

/// Checkpoint next to the result file.
pub fn checkpoint_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".checkpoint");
    out.with_file_name(name)
}

pub fn optimize(config: &RunConfig, strict: bool, resume: bool) -> CliResult<OptimizeReport> {
    let block = config.optimize.clone().unwrap_or_default();
    let problem = OptimizationProblem {
        params: config.system,
        n: block.n,
        duration: block.duration,
        m: block.m,
        channel: block.channel,
        initial_state: block.initial_state,
        target_state: DressedLabel::Minus(block.n),
    };
    let mut options = block.options.clone();
    if let Some(seed) = config.seed {
        options.seed = seed;
    }
    problem.validate()?;
    options.validate()?;

    let checkpoint = config.out.as_deref().map(checkpoint_path);
    let mut completed: Vec<RestartRecord> = Vec::new();
    if resume {
        let path = checkpoint.as_ref().ok_or_else(|| {
            CliError::Config("--resume needs an output path for the checkpoint".into())
        })?;
        if path.exists() {
            let value = read_json(path)?;
            completed = serde_json::from_value(value).map_err(|e| parse_error(path, e))?;
        }
    }
    let mut records = completed.clone();
    let mut write_error = None;
    let result = optimize_with_checkpoints(&problem, &options, &config.simulation, &completed, |r| {
        records.push(r.clone());
        if let Some(path) = &checkpoint {
            if let Err(e) = write_json(Some(path), &records) {
                write_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    if let Some(path) = &config.trajectory {
        let traj = resonant_core::dynamics::propagate(
            &problem.params,
            std::slice::from_ref(&result.best_pulse),
            &StateVector::dressed(problem.params.n_max, problem.initial_state)?,
            problem.duration,
            &config.simulation,
        )?;
        write_trajectory_csv(path, &traj, &problem.ladder()?.labels)?;
    }
    let report = OptimizeReport {
        problem,
        options,
        result,
    };
    write_json(config.out.as_deref(), &report)?;
    if let Some(path) = &checkpoint {
        if path.exists() {
            std::fs::remove_file(path).map_err(|e| CliError::io(path, e))?;
        }
    }
    if strict && report.result.unconverged {
        return Err(CliError::Strict(format!(
            "truncation not converged at the optimum (Δ = {:e})",
            report.result.convergence.delta
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ReplayReport {
    pub N: usize,
    pub duration_ns: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_infidelity: Option<f64>,
    pub final_populations: Vec<LabelPopulation>,
    pub final_state: Vec<[f64; 2]>,
}

pub fn replay(config: &RunConfig, duration: Option<f64>) -> CliResult<ReplayReport> {
    let block = config.replay.clone().unwrap_or_default();
    let path = block
        .pulse_file
        .as_ref()
        .ok_or_else(|| CliError::Config("replay needs a pulse file".into()))?;
    let loaded = load_pulse(path, block.row, duration)?;
    let params = loaded.system.unwrap_or(config.system);
    let n = block.n.unwrap_or(loaded.pulse.tones.len());
    let pulse = loaded.pulse;
    let ladder = LadderBasis::to_minus(DressedLabel::Ground, n)?;
    let psi0 = StateVector::dressed(params.n_max, DressedLabel::Ground)?;
    let pulses = std::slice::from_ref(&pulse);
    let final_state = if let Some(tpath) = &config.trajectory {
        let traj = resonant_core::dynamics::propagate(&params, pulses, &psi0, pulse.duration, &config.simulation)?;
        write_trajectory_csv(tpath, &traj, &ladder.labels)?;
        traj.final_state().clone()
    } else {
        resonant_core::dynamics::Propagator::new(&params)?
            .final_state(pulses, &psi0, pulse.duration, &config.simulation)?
    };
    let fidelity = final_state.amplitudes[DressedLabel::Minus(n).index()].norm_sqr();
    let report = ReplayReport {
        N: n,
        duration_ns: pulse.duration,
        fidelity,
        infidelity: 1.0 - fidelity,
        published_infidelity: loaded.published_infidelity,
        final_populations: populations(&final_state),
        final_state: state_pairs(&final_state),
    };
    if config.out.is_some() {
        println!("1-F = {:.6e}", report.infidelity);
    }
    write_json(config.out.as_deref(), &report)?;
    Ok(report)
}

pub fn qudit(config: &RunConfig) -> CliResult<PlanReport> {
    let block = config.qudit.clone().unwrap_or_default();
    let params = config.system;
    let graph = build_coupling_graph(&params, block.d)?.with_omega0(block.omega0)?;
    let mut plan = qudit_plan(&graph, block.j, block.k, block.theta, block.initial)?;
    let mut optimized = Vec::new();
    if let Some(opt) = &block.optimize {
        let mut options = opt.options.clone();
        if let Some(seed) = config.seed {
            options.seed = seed;
        }
        for (edge, r) in
            optimize_rotation_stages(&mut plan, &graph, opt.duration, opt.m, &options, &config.simulation)?
        {
            optimized.push(EdgeOptimization {
                edge,
                infidelity: r.infidelity,
                pulse: r.best_pulse,
            });
        }
    }
    let nodes: Vec<DressedLabel> = (0..block.d).map(node_label).collect();
    let (mut report, _) = run_plan(config, plan, &[params], &nodes)?;
    report.optimized_edges = optimized;
    write_json(config.out.as_deref(), &report)?;
    Ok(report)
}

pub fn noon(config: &RunConfig) -> CliResult<PlanReport> {
    let block = config.noon.clone().unwrap_or_default();
    let a = config.system;
    let b = block.system_b.unwrap_or(a);
    let plan = noon_plan(&a, &b, block.n, block.omega0)?;
    let ladder = LadderBasis::to_minus(DressedLabel::Plus(1), block.n.max(2))?;
    let (mut report, _) = run_plan(config, plan, &[a, b], &ladder.labels)?;
    if block.joint_check {
        report.joint_fidelity = Some(simulate_plan_joint(&report.plan, &[a, b], &config.simulation)?);
    }
    write_json(config.out.as_deref(), &report)?;
    Ok(report)
}

pub fn simulate(config: &RunConfig) -> CliResult<PlanReport> {
    let block = config.simulate.clone().unwrap_or_default();
    let path = block
        .plan_file
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate needs a plan file".into()))?;
    let value = read_json(path)?;
    // Accept a bare plan or any report that embeds one.
    let plan_value = value.get("plan").cloned().unwrap_or(value);
    let plan: ProtocolPlan = serde_json::from_value(plan_value).map_err(|e| parse_error(path, e))?;
    let systems = if block.systems.is_empty() {
        vec![config.system; plan.systems]
    } else {
        block.systems.clone()
    };
    let (report, _) = run_plan(config, plan, &systems, &[])?;
    write_json(config.out.as_deref(), &report)?;
    Ok(report)
}
