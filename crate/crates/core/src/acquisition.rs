//! Expected-improvement acquisition and global maximization of (possibly
//! penalized) acquisition surfaces over a box domain.
//!
//! The surface maximizer is a two-stage search: dense quasi-random
//! screening followed by derivative-free compass refinement from the best
//! screen points. All stochastic elements are seeded.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;

use crate::domain::{BoxDomain, InputPoint};
use crate::gp::{GpError, GpModel};
use crate::sampling::HaltonSampler;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Variance floor inside the penalizer's `z` to avoid dividing by zero at
/// noiseless training points.
pub const PENALIZER_VARIANCE_FLOOR: f64 = 1e-12;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal PDF.
pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Closed-form expected improvement `E[max{0, R - R_max}]` for a Gaussian
/// belief with the given mean and standard deviation. Returns 0 when
/// `sigma = 0`.
pub fn ei_closed_form(mean: f64, sigma: f64, incumbent_best: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let z = (mean - incumbent_best) / sigma;
    ((mean - incumbent_best) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// Expected improvement of the model's posterior at a raw-coordinate query
/// over the given incumbent reward.
pub fn expected_improvement(
    model: &GpModel,
    query: &InputPoint,
    incumbent_best: f64,
) -> Result<f64, GpError> {
    let (mean, var) = model.predict(query)?;
    Ok(ei_closed_form(mean, var.sqrt(), incumbent_best))
}

/// Softplus `ln(1 + exp(v))`: strictly positive, differentiable, monotone.
pub fn positive_transform(value: f64) -> f64 {
    // Stable for large |v|.
    value.max(0.0) + (-value.abs()).exp().ln_1p()
}

/// An erfc local penalizer centered at a previously selected batch element
/// (normalized coordinates). `phi = erfc(-z)/2` with
/// `z = (L ||u - c|| - R_M + mu_n(c)) / sqrt(2 sigma_n^2(u))`,
/// everything in standardized-reward / normalized-input units.
#[derive(Debug, Clone)]
pub struct Penalizer {
    pub center_unit: Vec<f64>,
    pub lipschitz: f64,
    pub reward_max_std: f64,
    /// Posterior mean at the center, standardized units.
    pub center_mean_std: f64,
}

impl Penalizer {
    pub fn value(&self, model: &GpModel, unit: &[f64]) -> f64 {
        let (_, var) = model.predict_std(unit);
        let var = var.max(PENALIZER_VARIANCE_FLOOR);
        let dist = self
            .center_unit
            .iter()
            .zip(unit)
            .map(|(&c, &u)| (u - c) * (u - c))
            .sum::<f64>()
            .sqrt();
        let z = (self.lipschitz * dist - self.reward_max_std + self.center_mean_std)
            / (2.0 * var).sqrt();
        0.5 * erfc(-z)
    }
}

/// An acquisition surface over the model's domain: softplus-transformed EI
/// times the product of the local penalizers. An empty penalizer list is
/// plain EI.
pub struct AcquisitionSurface<'a> {
    model: &'a GpModel,
    incumbent_best_std: f64,
    penalizers: Vec<Penalizer>,
}

impl<'a> AcquisitionSurface<'a> {
    pub fn new(model: &'a GpModel) -> Self {
        Self {
            incumbent_best_std: model.incumbent_best_std(),
            model,
            penalizers: Vec::new(),
        }
    }

    pub fn with_penalizers(model: &'a GpModel, penalizers: Vec<Penalizer>) -> Self {
        Self {
            incumbent_best_std: model.incumbent_best_std(),
            model,
            penalizers,
        }
    }

    pub fn model(&self) -> &GpModel {
        self.model
    }

    pub fn push_penalizer(&mut self, p: Penalizer) {
        self.penalizers.push(p);
    }

    pub fn penalizers(&self) -> &[Penalizer] {
        &self.penalizers
    }

    /// Plain (untransformed, unpenalized) EI at a normalized point, in
    /// standardized units.
    pub fn raw_ei(&self, unit: &[f64]) -> f64 {
        let (mean, var) = self.model.predict_std(unit);
        ei_closed_form(mean, var.sqrt(), self.incumbent_best_std)
    }

    /// Surface value `g(EI) * prod phi` at a normalized point.
    pub fn value(&self, unit: &[f64]) -> f64 {
        let mut v = positive_transform(self.raw_ei(unit));
        for p in &self.penalizers {
            v *= p.value(self.model, unit);
        }
        v
    }
}

/// Two-stage search settings.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Screening points per input dimension.
    pub screen_per_dim: usize,
    /// Number of top screen points to refine.
    pub refine_top: usize,
    /// Compass-search iterations per refinement start.
    pub refine_iters: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            screen_per_dim: 2048,
            refine_top: 5,
            refine_iters: 200,
            seed,
        }
    }

    /// A lighter-weight search for inner loops and tests.
    pub fn coarse(seed: u64) -> Self {
        Self {
            screen_per_dim: 512,
            refine_top: 3,
            refine_iters: 80,
            seed,
        }
    }
}

/// Result of a surface maximization.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub point: InputPoint,
    pub point_unit: Vec<f64>,
    pub value: f64,
    /// Largest plain EI seen across the screening stage (degeneracy probe).
    pub max_screen_ei: f64,
}

/// Generic two-stage maximizer of `f` over the unit box.
pub fn maximize_on_unit_box(
    f: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    config: &SearchConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, f64)> {
    let n_screen = config.screen_per_dim * dim;
    let mut sampler = HaltonSampler::new(dim, rng);
    let mut screened: Vec<(Vec<f64>, f64)> = sampler
        .take_points(n_screen)
        .into_iter()
        .map(|u| {
            let v = f(&u);
            (u, v)
        })
        .collect();
    screened.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));

    let mut candidates: Vec<(Vec<f64>, f64)> = Vec::new();
    for (start, start_val) in screened.iter().take(config.refine_top) {
        let (u, v) = compass_refine(f, start, *start_val, config.refine_iters);
        candidates.push((u, v));
    }
    // The best screen point always competes, so the result can never be
    // worse than the screening stage.
    if let Some(best_screen) = screened.first() {
        candidates.push(best_screen.clone());
    }
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    candidates
}

/// Bounded compass (pattern) search on the unit box.
fn compass_refine(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    start_val: f64,
    iters: usize,
) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut x = start.to_vec();
    let mut fx = start_val;
    let mut step = 0.05;
    for _ in 0..iters {
        let mut best_probe: Option<(Vec<f64>, f64)> = None;
        for d in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut p = x.clone();
                p[d] = (p[d] + sign * step).clamp(0.0, 1.0);
                let fp = f(&p);
                if fp > fx && best_probe.as_ref().map_or(true, |(_, bv)| fp > *bv) {
                    best_probe = Some((p, fp));
                }
            }
        }
        match best_probe {
            Some((p, fp)) => {
                x = p;
                fx = fp;
            }
            None => {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
    }
    (x, fx)
}

/// Maximize an acquisition surface over the domain. Ties within 1e-12 of
/// the best value break toward the candidate with the largest predictive
/// variance (deterministic exploration preference).
pub fn maximize_acquisition(
    surface: &AcquisitionSurface,
    domain: &BoxDomain,
    config: &SearchConfig,
) -> SearchOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let f = |u: &[f64]| surface.value(u);
    let candidates = maximize_on_unit_box(&f, domain.dim(), config, &mut rng);
    let max_screen_ei = candidates
        .iter()
        .map(|(u, _)| surface.raw_ei(u))
        .fold(0.0f64, f64::max);

    let best_value = candidates[0].1;
    let tol = 1e-12 * best_value.abs().max(1.0);
    let (best_u, best_v) = candidates
        .iter()
        .filter(|(_, v)| *v >= best_value - tol)
        .max_by(|(ua, _), (ub, _)| {
            let va = surface.model().predict_std(ua).1;
            let vb = surface.model().predict_std(ub).1;
            va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .cloned()
        .expect("candidate list non-empty");

    SearchOutcome {
        point: InputPoint::new(domain.denormalize(&best_u)).expect("finite search result"),
        point_unit: best_u,
        value: best_v,
        max_screen_ei,
    }
}
