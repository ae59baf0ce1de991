//! Declarative run configuration and the command-line front end's
//! execution paths.
//!
//! A run is described by a TOML file with strict (unknown-key-rejecting)
//! parsing; every field has a documented default, so the minimal config is
//! just a mode and an objective. Each run writes its fully resolved
//! config alongside its outputs for reproducibility, plus a trace file,
//! a summary record (timestamp-free, so identical configs produce
//! byte-identical summaries) and plot-ready delimited data files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayesopt::{
    halton_init, run_batch_bo, BoConfig, ConvergenceCriterion, Objective, OptimizationTrace,
    StopReason,
};
use crate::codesign::{
    evaluate_performance_index, run_codesign, Benchmark, CoDesignConfig, ControlParams,
    IterationWindow, PlantParams, SyntheticQuadratic,
};
use crate::domain::{BoxDomain, InputPoint};
use crate::econ::{economies_report, EconParams};
use crate::plantsim::{history_to_delimited, run_episode, PlantPhysical, WindModel};

/// Process exit codes for the distinct failure classes.
pub const EXIT_MISSING_FILE: i32 = 2;
pub const EXIT_PARSE_ERROR: i32 = 3;
pub const EXIT_VALIDATION_ERROR: i32 = 4;
pub const EXIT_RUN_ERROR: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config file not found: {0}")]
    MissingFile(PathBuf),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config validation error: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingFile(_) => EXIT_MISSING_FILE,
            CliError::Parse(_) => EXIT_PARSE_ERROR,
            CliError::Validation(_) => EXIT_VALIDATION_ERROR,
            CliError::Run(_) | CliError::Io(_) => EXIT_RUN_ERROR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Codesign,
    Bo,
    Econ,
    Simulate,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Codesign => "codesign",
            Mode::Bo => "bo",
            Mode::Econ => "econ",
            Mode::Simulate => "simulate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    Plantsim,
    SyntheticQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    /// Lower bounds for (cm_offset [m], stab_area [m²]).
    pub plant_lower: Vec<f64>,
    pub plant_upper: Vec<f64>,
    /// Bounds for the pitch set-point, rad.
    pub control_lower: Vec<f64>,
    pub control_upper: Vec<f64>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            plant_lower: vec![-0.5, 0.5],
            plant_upper: vec![0.5, 2.0],
            control_lower: vec![-0.2],
            control_upper: vec![0.35],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub epsilon: f64,
    pub window: usize,
    /// Outer-loop (or standalone-BO) evaluation budget after init.
    pub outer_budget: usize,
    /// Inner-loop window budget per plant candidate after init.
    pub inner_budget: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            window: 2,
            outer_budget: 100,
            inner_budget: 18,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub settle_seconds: f64,
    pub performance_seconds: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            settle_seconds: 60.0,
            performance_seconds: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub fit_noise: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iters: 120,
            fit_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 1.0,
            k3: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    /// Normalized plant optimum.
    pub plant_opt: [f64; 2],
    pub control_base: f64,
    pub coupling: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            plant_opt: [0.3, 0.7],
            control_base: 0.6,
            coupling: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub duration_seconds: f64,
    pub pitch_setpoint: f64,
    pub cm_offset: f64,
    pub stab_area: f64,
    pub wind_enabled: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            duration_seconds: 40.0,
            pitch_setpoint: 0.1,
            cm_offset: 0.0,
            stab_area: 1.25,
            wind_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconConfig {
    #[serde(flatten)]
    pub params: EconParams,
    /// `(elements per batch, outer iterations to convergence)` scenarios.
    pub scenarios: Vec<(usize, usize)>,
}

impl Default for EconConfig {
    fn default() -> Self {
        Self {
            params: EconParams::default(),
            scenarios: vec![(1, 8), (3, 6), (4, 5)],
        }
    }
}

/// The full declarative run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub objective: ObjectiveKind,
    pub seed: u64,
    pub batch_size: usize,
    pub out_dir: PathBuf,
    pub domain: DomainConfig,
    pub convergence: ConvergenceConfig,
    pub window: WindowConfig,
    pub gp: GpConfig,
    pub weights: WeightsConfig,
    pub synthetic: SyntheticConfig,
    pub simulate: SimulateConfig,
    pub econ: EconConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Codesign,
            objective: ObjectiveKind::Plantsim,
            seed: 0,
            batch_size: 1,
            out_dir: PathBuf::from("out"),
            domain: DomainConfig::default(),
            convergence: ConvergenceConfig::default(),
            window: WindowConfig::default(),
            gp: GpConfig::default(),
            weights: WeightsConfig::default(),
            synthetic: SyntheticConfig::default(),
            simulate: SimulateConfig::default(),
            econ: EconConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let check_bounds = |name: &str, lo: &[f64], hi: &[f64]| -> Result<(), CliError> {
            if lo.len() != hi.len() {
                return Err(CliError::Validation(format!(
                    "{name}: lower and upper bounds have different lengths"
                )));
            }
            for (d, (&l, &u)) in lo.iter().zip(hi).enumerate() {
                if !(l < u) {
                    return Err(CliError::Validation(format!(
                        "{name}: lower >= upper in dimension {d} ({l} >= {u})"
                    )));
                }
            }
            Ok(())
        };
        check_bounds(
            "domain.plant",
            &self.domain.plant_lower,
            &self.domain.plant_upper,
        )?;
        check_bounds(
            "domain.control",
            &self.domain.control_lower,
            &self.domain.control_upper,
        )?;
        if self.batch_size < 1 {
            return Err(CliError::Validation("batch_size must be >= 1".into()));
        }
        if self.convergence.epsilon <= 0.0 {
            return Err(CliError::Validation(
                "convergence.epsilon must be positive".into(),
            ));
        }
        if self.convergence.window < 1 {
            return Err(CliError::Validation(
                "convergence.window must be >= 1".into(),
            ));
        }
        if self.window.settle_seconds <= 0.0 || self.window.performance_seconds <= 0.0 {
            return Err(CliError::Validation(
                "window durations must be positive".into(),
            ));
        }
        self.econ
            .params
            .validate()
            .map_err(|e| CliError::Validation(format!("econ: {e}")))?;
        if self.econ.scenarios.is_empty() {
            return Err(CliError::Validation(
                "econ.scenarios must be non-empty".into(),
            ));
        }
        Ok(())
    }

    fn plant_domain(&self) -> BoxDomain {
        BoxDomain::new(
            self.domain.plant_lower.clone(),
            self.domain.plant_upper.clone(),
        )
        .expect("validated bounds")
    }

    fn control_domain(&self) -> BoxDomain {
        BoxDomain::new(
            self.domain.control_lower.clone(),
            self.domain.control_upper.clone(),
        )
        .expect("validated bounds")
    }

    fn criterion(&self) -> ConvergenceCriterion {
        ConvergenceCriterion::new(self.convergence.epsilon, self.convergence.window)
    }

    fn bo_config(&self, budget: usize) -> BoConfig {
        let mut c = BoConfig::new(self.seed);
        c.criterion = self.criterion();
        c.budget = budget;
        c.fit_restarts = self.gp.restarts;
        c.fit_max_iters = self.gp.max_iters;
        c.fit_noise = self.gp.fit_noise;
        c
    }
}

/// Load, parse and validate a run config.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    if !path.exists() {
        return Err(CliError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    let config: RunConfig = toml::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub batch_size: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if let Some(d) = &self.out_dir {
            config.out_dir = d.clone();
        }
        if let Some(b) = self.batch_size {
            config.batch_size = b;
        }
    }
}

fn write_resolved_config(config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.out_dir)?;
    let text =
        toml::to_string_pretty(config).map_err(|e| CliError::Run(format!("serialize: {e}")))?;
    fs::write(config.out_dir.join("resolved_config.toml"), text)?;
    Ok(())
}

fn write_convergence_data(trace: &OptimizationTrace, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("iteration\tincumbent\n");
    for r in &trace.iterations {
        out.push_str(&format!("{}\t{:.12e}\n", r.iteration, r.incumbent));
    }
    fs::write(path, out)?;
    Ok(())
}

fn stop_reason_label(stop: &StopReason) -> String {
    match stop {
        StopReason::Converged => "converged".into(),
        StopReason::BudgetExhausted => "budget-exhausted".into(),
        StopReason::ObjectiveFailure(m) => format!("objective-failure: {m}"),
        StopReason::ModelFailure(m) => format!("model-failure: {m}"),
    }
}

/// Execute the configured run, writing all outputs under `out_dir`.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    config.validate()?;
    write_resolved_config(config)?;
    match config.mode {
        Mode::Econ => run_econ(config),
        Mode::Simulate => run_simulate(config),
        Mode::Bo => run_bo(config),
        Mode::Codesign => run_codesign_mode(config),
    }
}

fn run_econ(config: &RunConfig) -> Result<(), CliError> {
    let report = economies_report(&config.econ.params, &config.econ.scenarios)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let table = report.to_table();
    fs::write(config.out_dir.join("econ_table.txt"), &table)?;
    let mut summary = format!("mode: {}\n", config.mode);
    for r in &report.rows {
        summary.push_str(&format!(
            "campaign n_per_batch={} n_convergence={} total={:.2}\n",
            r.n_per_batch, r.n_convergence, r.campaign_total
        ));
    }
    summary.push_str(&format!(
        "monotone_decreasing: {}\n",
        report.monotone_decreasing
    ));
    fs::write(config.out_dir.join("summary.txt"), summary)?;
    print!("{table}");
    Ok(())
}

fn run_simulate(config: &RunConfig) -> Result<(), CliError> {
    let sim = &config.simulate;
    let plant = PlantParams {
        cm_offset: sim.cm_offset,
        stab_area: sim.stab_area,
    };
    let wind = if sim.wind_enabled {
        WindModel::default()
    } else {
        WindModel::disabled()
    };
    let control = ControlParams {
        pitch_setpoint: sim.pitch_setpoint,
    };
    let history = run_episode(&plant, &control, wind, sim.duration_seconds, config.seed)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let physical = PlantPhysical::from_params(&plant).map_err(|e| CliError::Run(e.to_string()))?;
    fs::write(
        config.out_dir.join("timeseries.tsv"),
        history_to_delimited(&history, &physical),
    )?;
    let j = evaluate_performance_index(
        &history,
        (config.weights.k1, config.weights.k2, config.weights.k3),
        (0.0, sim.duration_seconds),
    );
    let summary = format!(
        "mode: {}\nseed: {}\ncm_offset: {}\nstab_area: {}\npitch_setpoint: {}\nduration_seconds: {}\nperformance_index: {:.9e}\n",
        config.mode, config.seed, sim.cm_offset, sim.stab_area, sim.pitch_setpoint,
        sim.duration_seconds, j
    );
    fs::write(config.out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

/// The standalone-BO objective: either the analytic quadratic over the
/// plant domain or a fresh simulator episode per pitch set-point.
struct StandaloneObjective {
    kind: ObjectiveKind,
    domain: BoxDomain,
    config: RunConfig,
    counter: u64,
}

impl Objective for StandaloneObjective {
    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn name(&self) -> &str {
        match self.kind {
            ObjectiveKind::Plantsim => "plantsim-episode",
            ObjectiveKind::SyntheticQuadratic => "synthetic-quadratic",
        }
    }

    fn evaluate(&mut self, point: &InputPoint) -> Result<f64, String> {
        match self.kind {
            ObjectiveKind::SyntheticQuadratic => {
                let q = SyntheticQuadratic {
                    plant_opt: self.config.synthetic.plant_opt,
                    control_base: self.config.synthetic.control_base,
                    coupling: self.config.synthetic.coupling,
                };
                let u = self.domain.normalize(point.coords());
                // Control held at its optimum: a pure quadratic in u.
                let v = q.optimal_control(&u);
                Ok(-q.cost(&u, v))
            }
            ObjectiveKind::Plantsim => {
                self.counter += 1;
                let plant = PlantParams {
                    cm_offset: self.config.simulate.cm_offset,
                    stab_area: self.config.simulate.stab_area,
                };
                let control = ControlParams {
                    pitch_setpoint: point.coords()[0],
                };
                let settle = self.config.window.settle_seconds;
                let perf = self.config.window.performance_seconds;
                let history = run_episode(
                    &plant,
                    &control,
                    WindModel::default(),
                    settle + perf,
                    self.config.seed,
                )
                .map_err(|e| e.to_string())?;
                let w = &self.config.weights;
                Ok(-evaluate_performance_index(
                    &history,
                    (w.k1, w.k2, w.k3),
                    (settle, settle + perf),
                ))
            }
        }
    }
}

fn write_trace_outputs(
    config: &RunConfig,
    trace: &OptimizationTrace,
    extra: &str,
) -> Result<(), CliError> {
    fs::write(config.out_dir.join("trace.tsv"), trace.to_delimited())?;
    write_convergence_data(trace, &config.out_dir.join("convergence.tsv"))?;
    let best = trace
        .best_point
        .as_ref()
        .map(|p| format!("{:?}", p.coords()))
        .unwrap_or_else(|| "none".into());
    let summary = format!(
        "mode: {}\nobjective: {}\nseed: {}\nbatch_size: {}\nbest_point: {}\nbest_reward: {:.9e}\nouter_iterations: {}\nevaluations: {}\nstop_reason: {}\n{extra}",
        config.mode,
        trace.objective_name,
        config.seed,
        config.batch_size,
        best,
        trace.best_reward,
        trace.outer_iterations(),
        trace.evaluation_count(),
        stop_reason_label(&trace.stop_reason),
    );
    fs::write(config.out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn run_bo(config: &RunConfig) -> Result<(), CliError> {
    let domain = match config.objective {
        ObjectiveKind::SyntheticQuadratic => config.plant_domain(),
        ObjectiveKind::Plantsim => config.control_domain(),
    };
    let mut objective = StandaloneObjective {
        kind: config.objective,
        domain,
        config: config.clone(),
        counter: 0,
    };
    let bo = config.bo_config(config.convergence.outer_budget);
    let init = halton_init(&mut objective, 2, 0.0, config.seed)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let trace = run_batch_bo(&mut objective, &init, config.batch_size, &bo)
        .map_err(|e| CliError::Run(e.to_string()))?;
    write_trace_outputs(config, &trace, "")
}

fn run_codesign_mode(config: &RunConfig) -> Result<(), CliError> {
    let benchmark = match config.objective {
        ObjectiveKind::Plantsim => Benchmark::PlantSim,
        ObjectiveKind::SyntheticQuadratic => Benchmark::SyntheticQuadratic(SyntheticQuadratic {
            plant_opt: config.synthetic.plant_opt,
            control_base: config.synthetic.control_base,
            coupling: config.synthetic.coupling,
        }),
    };
    let cd = CoDesignConfig {
        plant_domain: config.plant_domain(),
        control_domain: config.control_domain(),
        n_b: config.batch_size,
        outer: config.bo_config(config.convergence.outer_budget),
        inner: {
            let mut c = BoConfig::coarse(config.seed);
            c.criterion = config.criterion();
            c.budget = config.convergence.inner_budget;
            c
        },
        window: IterationWindow {
            settle_duration: config.window.settle_seconds,
            performance_duration: config.window.performance_seconds,
            update_duration: 0.0,
        },
        weights: (config.weights.k1, config.weights.k2, config.weights.k3),
        benchmark,
        wind: WindModel::default(),
        seed: config.seed,
    };
    let result = run_codesign(&cd).map_err(|e| CliError::Run(e.to_string()))?;
    // Per-candidate inner convergence data for plotting.
    let mut inner = String::from("candidate\tcm_offset\tstab_area\tbest_pitch_setpoint\treward\twindows\tfailed_windows\n");
    for (i, r) in result.inner_traces.iter().enumerate() {
        inner.push_str(&format!(
            "{}\t{:.9}\t{:.9}\t{:.9}\t{:.9e}\t{}\t{}\n",
            i,
            r.plant.cm_offset,
            r.plant.stab_area,
            r.best_control.pitch_setpoint,
            r.reward,
            r.trace.evaluation_count(),
            r.failed_windows,
        ));
    }
    fs::write(config.out_dir.join("inner_runs.tsv"), inner)?;
    let extra = format!(
        "best_plant: cm_offset={:.9} stab_area={:.9}\nbest_control: pitch_setpoint={:.9}\nbest_cost: {:.9e}\n",
        result.best_plant.cm_offset,
        result.best_plant.stab_area,
        result.best_control.pitch_setpoint,
        result.best_cost,
    );
    write_trace_outputs(config, &result.outer_trace, &extra)
}

/// Summarize an existing trace file: per-iteration incumbents, best
/// reward, evaluation count. Used by the `report` subcommand.
pub fn report_trace(trace_path: &Path, out_dir: &Path) -> Result<String, CliError> {
    if !trace_path.exists() {
        return Err(CliError::MissingFile(trace_path.to_path_buf()));
    }
    let text = fs::read_to_string(trace_path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty trace file".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    let it_col = cols
        .iter()
        .position(|&c| c == "iteration")
        .ok_or_else(|| CliError::Parse("missing 'iteration' column".into()))?;
    let inc_col = cols
        .iter()
        .position(|&c| c == "incumbent")
        .ok_or_else(|| CliError::Parse("missing 'incumbent' column".into()))?;
    let mut per_iteration: Vec<(usize, f64)> = Vec::new();
    let mut count = 0usize;
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse()
                .map_err(|_| CliError::Parse(format!("bad number {s:?} on line {}", n + 2)))
        };
        let it: usize = fields[it_col]
            .parse()
            .map_err(|_| CliError::Parse(format!("bad iteration on line {}", n + 2)))?;
        let inc = parse(fields[inc_col])?;
        count += 1;
        match per_iteration.last_mut() {
            Some((last_it, last_inc)) if *last_it == it => *last_inc = inc,
            _ => per_iteration.push((it, inc)),
        }
    }
    fs::create_dir_all(out_dir)?;
    let mut conv = String::from("iteration\tincumbent\n");
    for (it, inc) in &per_iteration {
        conv.push_str(&format!("{it}\t{inc:.12e}\n"));
    }
    fs::write(out_dir.join("convergence.tsv"), conv)?;
    let best = per_iteration
        .iter()
        .map(|&(_, inc)| inc)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(format!(
        "evaluations: {count}\niterations: {}\nbest_incumbent: {best:.9e}\n",
        per_iteration.len()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn minimal_config_gets_all_defaults() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "mode = \"econ\"\nobjective = \"plantsim\"\n").unwrap();
        let config = parse_config(&path).unwrap();
        assert_eq!(config.mode, Mode::Econ);
        assert_eq!(config.batch_size, 1);
        assert_eq!(config.convergence.window, 2);
        assert_eq!(config.econ.scenarios, vec![(1, 8), (3, 6), (4, 5)]);
    }

    #[test]
    fn missing_file_and_parse_and_validation_errors_are_distinct() {
        let dir = tempdir().unwrap();
        let missing = parse_config(&dir.path().join("nope.toml")).unwrap_err();
        assert_eq!(missing.exit_code(), EXIT_MISSING_FILE);

        let bad = dir.path().join("bad.toml");
        fs::write(&bad, "mode = \"econ\"\nnot_a_key = 1\n").unwrap();
        let parse = parse_config(&bad).unwrap_err();
        assert_eq!(parse.exit_code(), EXIT_PARSE_ERROR);
        assert!(parse.to_string().contains("not_a_key"));

        let invalid = dir.path().join("invalid.toml");
        fs::write(
            &invalid,
            "mode = \"bo\"\n[domain]\nplant_lower = [0.5, 0.5]\nplant_upper = [0.5, 2.0]\n",
        )
        .unwrap();
        let validation = parse_config(&invalid).unwrap_err();
        assert_eq!(validation.exit_code(), EXIT_VALIDATION_ERROR);
        assert!(validation.to_string().contains("dimension 0"));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut config = RunConfig::default();
        config.seed = 99;
        config.batch_size = 3;
        config.domain.plant_lower = vec![-1.0, 0.1];
        config.convergence.epsilon = 5e-4;
        let text = toml::to_string_pretty(&config).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn batch_size_zero_rejected() {
        let mut config = RunConfig::default();
        config.batch_size = 0;
        assert_eq!(config.validate().unwrap_err().exit_code(), EXIT_VALIDATION_ERROR);
    }

    #[test]
    fn econ_mode_writes_table_and_summary() {
        let dir = tempdir().unwrap();
        let mut config = RunConfig::default();
        config.mode = Mode::Econ;
        config.out_dir = dir.path().join("out");
        run(&config).unwrap();
        let table = fs::read_to_string(config.out_dir.join("econ_table.txt")).unwrap();
        assert!(table.contains("54293"));
        assert!(table.contains("49200"));
        assert!(table.contains("44533"));
        assert!(config.out_dir.join("resolved_config.toml").exists());
        let summary = fs::read_to_string(config.out_dir.join("summary.txt")).unwrap();
        assert!(summary.contains("monotone_decreasing: true"));
    }

    #[test]
    fn simulate_mode_stationary_flight_reports_zero_cost() {
        let dir = tempdir().unwrap();
        let mut config = RunConfig::default();
        config.mode = Mode::Simulate;
        config.out_dir = dir.path().join("out");
        config.simulate.wind_enabled = false;
        // Pitch set-point at the default plant's trim so nothing moves.
        let plant = PlantPhysical::from_params(&PlantParams {
            cm_offset: config.simulate.cm_offset,
            stab_area: config.simulate.stab_area,
        })
        .unwrap();
        config.simulate.pitch_setpoint = plant.trim_pitch;
        config.simulate.duration_seconds = 10.0;
        run(&config).unwrap();
        let summary = fs::read_to_string(config.out_dir.join("summary.txt")).unwrap();
        let j: f64 = summary
            .lines()
            .find(|l| l.starts_with("performance_index:"))
            .unwrap()
            .split_whitespace()
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert!(j.abs() < 1e-8, "J = {j}");
        assert!(config.out_dir.join("timeseries.tsv").exists());
    }

    #[test]
    fn identical_configs_produce_identical_summaries() {
        let dir = tempdir().unwrap();
        let mut config = RunConfig::default();
        config.mode = Mode::Bo;
        config.objective = ObjectiveKind::SyntheticQuadratic;
        config.convergence.outer_budget = 6;
        config.out_dir = dir.path().join("a");
        run(&config).unwrap();
        let a = fs::read(config.out_dir.join("summary.txt")).unwrap();
        config.out_dir = dir.path().join("b");
        run(&config).unwrap();
        let b = fs::read(config.out_dir.join("summary.txt")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_summarizes_a_trace_file() {
        let dir = tempdir().unwrap();
        let mut config = RunConfig::default();
        config.mode = Mode::Bo;
        config.objective = ObjectiveKind::SyntheticQuadratic;
        config.convergence.outer_budget = 5;
        config.out_dir = dir.path().join("out");
        run(&config).unwrap();
        let summary =
            report_trace(&config.out_dir.join("trace.tsv"), &dir.path().join("rep")).unwrap();
        assert!(summary.contains("evaluations:"));
        assert!(dir.path().join("rep/convergence.tsv").exists());
    }
}
