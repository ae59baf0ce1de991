//! Sequential and batch Bayesian optimization loops over an abstract
//! objective, with a windowed stopping criterion on incumbent-best
//! rewards.
//!
//! Both entry points share one loop: sequential optimization is the batch
//! loop with a batch size of one, which makes the reduction equivalence
//! exact by construction.

use std::time::Instant;

use thiserror::Error;

use crate::acquisition::SearchConfig;
use crate::batch::select_batch;
use crate::domain::{BoxDomain, InputPoint};
use crate::gp::{fit, Dataset, FitConfig, GpError, Hyperparameters};
use crate::sampling::HaltonSampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum BoError {
    #[error("initial dataset needs at least 2 points, got {0}")]
    InsufficientInit(usize),
    #[error("initial dataset dimension {data} does not match domain dimension {domain}")]
    DimensionMismatch { data: usize, domain: usize },
    #[error("objective evaluation failed: {0}")]
    ObjectiveFailure(String),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// A black-box reward function over a box domain. Implementations must be
/// deterministic for a fixed internal seed; the stopping criterion
/// compares rewards across iterations and noise-free repeatability is what
/// makes that comparison meaningful.
///
/// `evaluate` takes `&mut self` because objectives may carry persistent
/// state (e.g. a continuously running simulator).
pub trait Objective {
    fn domain(&self) -> &BoxDomain;
    fn name(&self) -> &str;
    fn evaluate(&mut self, point: &InputPoint) -> Result<f64, String>;
}

/// Windowed stopping rule: stop when the incumbent-best reward has changed
/// by less than `epsilon` relative to each of the previous `window`
/// iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCriterion {
    pub epsilon: f64,
    pub window: usize,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            window: 2,
        }
    }
}

impl ConvergenceCriterion {
    pub fn new(epsilon: f64, window: usize) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        assert!(window >= 1, "window must be at least 1");
        Self { epsilon, window }
    }
}

/// True iff the sequence is long enough and its latest value is within
/// `epsilon` of each of the previous `window` values.
pub fn check_convergence(incumbents: &[f64], criterion: &ConvergenceCriterion) -> bool {
    let n = incumbents.len();
    if n <= criterion.window {
        return false;
    }
    let last = incumbents[n - 1];
    (1..=criterion.window).all(|j| (last - incumbents[n - 1 - j]).abs() < criterion.epsilon)
}

/// One objective evaluation as recorded in the trace. `iteration` 0 is the
/// initialization set; optimizer iterations start at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub iteration: usize,
    pub batch_index: usize,
    pub point: Vec<f64>,
    pub reward: f64,
    /// Best reward observed up to and including this evaluation.
    pub incumbent: f64,
    /// Wall-clock seconds since the start of the run. Excluded from
    /// determinism comparisons.
    pub elapsed_seconds: f64,
}

/// Per-outer-iteration bookkeeping: the fitted hyperparameters and phase
/// wall-clock times.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    pub hyper: Hyperparameters,
    pub incumbent: f64,
    pub fit_seconds: f64,
    pub select_seconds: f64,
    pub eval_seconds: f64,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Converged,
    BudgetExhausted,
    ObjectiveFailure(String),
    ModelFailure(String),
}

/// Full record of one optimization run.
#[derive(Debug, Clone)]
pub struct OptimizationTrace {
    pub objective_name: String,
    pub evaluations: Vec<EvalRecord>,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub best_point: Option<InputPoint>,
    pub best_reward: f64,
}

impl OptimizationTrace {
    /// Incumbent best after each outer iteration (excluding init).
    pub fn incumbent_history(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.incumbent).collect()
    }

    pub fn outer_iterations(&self) -> usize {
        self.iterations.len()
    }

    /// Number of objective evaluations, including initialization.
    pub fn evaluation_count(&self) -> usize {
        self.evaluations.len()
    }

    /// Line-delimited text: one header line, then one line per evaluation
    /// with tab-separated fields
    /// `iteration  batch_index  p0..p{d-1}  reward  incumbent  elapsed_s`.
    pub fn to_delimited(&self) -> String {
        let dim = self
            .evaluations
            .first()
            .map(|e| e.point.len())
            .unwrap_or(0);
        let mut out = String::from("iteration\tbatch_index");
        for d in 0..dim {
            out.push_str(&format!("\tp{d}"));
        }
        out.push_str("\treward\tincumbent\telapsed_s\n");
        for e in &self.evaluations {
            out.push_str(&format!("{}\t{}", e.iteration, e.batch_index));
            for v in &e.point {
                out.push_str(&format!("\t{v:.12e}"));
            }
            out.push_str(&format!(
                "\t{:.12e}\t{:.12e}\t{:.3}\n",
                e.reward, e.incumbent, e.elapsed_seconds
            ));
        }
        out
    }

    /// True when the two traces evaluated the same points and rewards in
    /// the same order (wall-clock fields ignored).
    pub fn same_evaluations(&self, other: &OptimizationTrace) -> bool {
        self.evaluations.len() == other.evaluations.len()
            && self.evaluations.iter().zip(&other.evaluations).all(|(a, b)| {
                a.iteration == b.iteration
                    && a.batch_index == b.batch_index
                    && a.point == b.point
                    && a.reward == b.reward
                    && a.incumbent == b.incumbent
            })
    }
}

/// Optimizer settings shared by the sequential and batch loops.
#[derive(Debug, Clone)]
pub struct BoConfig {
    pub criterion: ConvergenceCriterion,
    /// Maximum objective evaluations after initialization.
    pub budget: usize,
    pub seed: u64,
    /// Multistart restarts for each surrogate refit.
    pub fit_restarts: usize,
    /// Gradient-ascent iterations per restart.
    pub fit_max_iters: usize,
    pub fit_noise: bool,
    /// Acquisition-search settings; the seed field is re-derived per
    /// iteration from `seed`.
    pub search: SearchConfig,
}

impl BoConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            criterion: ConvergenceCriterion::default(),
            budget: 100,
            seed,
            fit_restarts: 8,
            fit_max_iters: 120,
            fit_noise: true,
            search: SearchConfig::new(seed),
        }
    }

    /// Lighter settings for inner loops and tests.
    pub fn coarse(seed: u64) -> Self {
        Self {
            fit_restarts: 4,
            fit_max_iters: 60,
            search: SearchConfig::coarse(seed),
            ..Self::new(seed)
        }
    }

    fn iteration_seed(&self, iteration: usize) -> u64 {
        self.seed ^ (iteration as u64).wrapping_mul(SEED_MIX)
    }
}

/// Evaluate `n` low-discrepancy points to seed the optimizer.
pub fn halton_init(
    objective: &mut dyn Objective,
    n: usize,
    noise_variance: f64,
    seed: u64,
) -> Result<Dataset, BoError> {
    let domain = objective.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1517_8a9d);
    let mut sampler = HaltonSampler::new(domain.dim(), &mut rng);
    let mut data = Dataset::new(noise_variance);
    for unit in sampler.take_points(n) {
        let p = InputPoint::new(domain.denormalize(&unit)).expect("finite init point");
        let r = objective
            .evaluate(&p)
            .map_err(BoError::ObjectiveFailure)?;
        data.push(p, r).map_err(BoError::Gp)?;
    }
    Ok(data)
}

/// Sequential Bayesian optimization: fit, maximize expected improvement,
/// evaluate, append, until convergence or budget exhaustion.
pub fn run_sequential_bo(
    objective: &mut dyn Objective,
    init: &Dataset,
    config: &BoConfig,
) -> Result<OptimizationTrace, BoError> {
    run_batch_bo(objective, init, 1, config)
}

/// Batch Bayesian optimization with local penalization: each outer
/// iteration fits the surrogate once, selects `n_b` designs greedily, and
/// evaluates them all before refitting. Convergence is tested on the
/// incumbent-best reward once per outer iteration.
///
/// Objective failure aborts the run and returns the partial trace with
/// `StopReason::ObjectiveFailure`; the error path is reserved for invalid
/// inputs.
pub fn run_batch_bo(
    objective: &mut dyn Objective,
    init: &Dataset,
    n_b: usize,
    config: &BoConfig,
) -> Result<OptimizationTrace, BoError> {
    assert!(n_b >= 1, "batch size must be at least 1");
    if init.len() < 2 {
        return Err(BoError::InsufficientInit(init.len()));
    }
    let domain = objective.domain().clone();
    if init.dim() != domain.dim() {
        return Err(BoError::DimensionMismatch {
            data: init.dim(),
            domain: domain.dim(),
        });
    }

    let started = Instant::now();
    let mut data = init.clone();
    let mut trace = OptimizationTrace {
        objective_name: objective.name().to_string(),
        evaluations: Vec::new(),
        iterations: Vec::new(),
        stop_reason: StopReason::BudgetExhausted,
        best_point: None,
        best_reward: f64::NEG_INFINITY,
    };

    // Record the init set as iteration 0.
    for (i, (p, &r)) in data.inputs().iter().zip(data.rewards()).enumerate() {
        if r > trace.best_reward {
            trace.best_reward = r;
            trace.best_point = Some(p.clone());
        }
        trace.evaluations.push(EvalRecord {
            iteration: 0,
            batch_index: i,
            point: p.coords().to_vec(),
            reward: r,
            incumbent: trace.best_reward,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        });
    }

    let mut incumbents: Vec<f64> = Vec::new();
    let mut evals_used = 0usize;
    let mut iteration = 0usize;

    loop {
        if evals_used >= config.budget {
            trace.stop_reason = StopReason::BudgetExhausted;
            break;
        }
        iteration += 1;
        let iter_seed = config.iteration_seed(iteration);

        let t_fit = Instant::now();
        let fit_config = FitConfig {
            domain: domain.clone(),
            restarts: config.fit_restarts,
            max_iters: config.fit_max_iters,
            fit_noise: config.fit_noise,
            seed: iter_seed ^ 0x0f17,
        };
        let model = match fit(&data, &fit_config) {
            Ok(m) => m,
            Err(e) => {
                trace.stop_reason = StopReason::ModelFailure(e.to_string());
                return Ok(trace);
            }
        };
        let fit_seconds = t_fit.elapsed().as_secs_f64();

        let t_select = Instant::now();
        let this_batch = n_b.min(config.budget - evals_used);
        let search = SearchConfig {
            seed: iter_seed,
            ..config.search.clone()
        };
        let batch = match select_batch(&model, &domain, this_batch, &search) {
            Ok(b) => b,
            Err(e) => {
                trace.stop_reason = StopReason::ModelFailure(e.to_string());
                return Ok(trace);
            }
        };
        let select_seconds = t_select.elapsed().as_secs_f64();

        let t_eval = Instant::now();
        for (k, p) in batch.elements.iter().enumerate() {
            let r = match objective.evaluate(p) {
                Ok(r) => r,
                Err(msg) => {
                    trace.stop_reason = StopReason::ObjectiveFailure(msg);
                    return Ok(trace);
                }
            };
            evals_used += 1;
            if r > trace.best_reward {
                trace.best_reward = r;
                trace.best_point = Some(p.clone());
            }
            trace.evaluations.push(EvalRecord {
                iteration,
                batch_index: k,
                point: p.coords().to_vec(),
                reward: r,
                incumbent: trace.best_reward,
                elapsed_seconds: started.elapsed().as_secs_f64(),
            });
            if let Err(e) = data.push(p.clone(), r) {
                trace.stop_reason = StopReason::ModelFailure(e.to_string());
                return Ok(trace);
            }
        }
        let eval_seconds = t_eval.elapsed().as_secs_f64();

        incumbents.push(trace.best_reward);
        let converged = check_convergence(&incumbents, &config.criterion);
        trace.iterations.push(IterationRecord {
            iteration,
            hyper: model.hyper().clone(),
            incumbent: trace.best_reward,
            fit_seconds,
            select_seconds,
            eval_seconds,
            fallback_used: batch.fallback_used,
        });
        if converged {
            trace.stop_reason = StopReason::Converged;
            break;
        }
    }

    Ok(trace)
}
