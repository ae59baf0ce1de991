//! Local-penalization batch selection.
//!
//! One GP fit per outer iteration; the batch is grown greedily by
//! maximizing the softplus-transformed EI times erfc penalizers centered
//! at the elements already chosen. The penalizer scale comes from the
//! estimated Lipschitz constant of the posterior mean and the best
//! observed reward.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::acquisition::{
    maximize_acquisition, maximize_on_unit_box, AcquisitionSurface, Penalizer, SearchConfig,
};
use crate::domain::{BoxDomain, InputPoint};
use crate::gp::{GpError, GpModel};

/// Flat posterior means a zero gradient everywhere; the Lipschitz estimate
/// is floored so penalizer radii stay finite.
pub const LIPSCHITZ_FLOOR: f64 = 1e-4;

/// Minimum pairwise distance between batch elements, normalized units.
pub const MIN_ELEMENT_SEPARATION: f64 = 1e-9;

/// EI below this across the whole screen is treated as degenerate and
/// triggers the max-variance fallback.
const DEGENERATE_EI: f64 = 1e-15;

/// Penalizer scale parameters: Lipschitz estimate (normalized-input /
/// standardized-reward units) and the best observed reward (raw units).
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizerParams {
    pub lipschitz: f64,
    pub reward_max: f64,
}

/// Estimate the penalizer parameters from the fitted model: the reward
/// maximum is the best observed reward; the Lipschitz constant is the
/// largest posterior-mean gradient norm found by quasi-random screening
/// plus local refinement, floored at [`LIPSCHITZ_FLOOR`].
pub fn estimate_penalizer_params(model: &GpModel, domain: &BoxDomain, seed: u64) -> PenalizerParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grad_norm = |u: &[f64]| -> f64 {
        model
            .mean_gradient_std(u)
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    };
    let config = SearchConfig {
        screen_per_dim: 1024,
        refine_top: 5,
        refine_iters: 100,
        seed,
    };
    let candidates = maximize_on_unit_box(&grad_norm, domain.dim(), &config, &mut rng);
    let lipschitz = candidates
        .first()
        .map(|(_, v)| *v)
        .unwrap_or(0.0)
        .max(LIPSCHITZ_FLOOR);
    PenalizerParams {
        lipschitz,
        reward_max: model.incumbent_best(),
    }
}

/// Evaluate the local penalizer `phi(query; center)` in `[0, 1]` for the
/// given model and parameters. Raw-coordinate inputs.
pub fn local_penalizer(
    query: &InputPoint,
    center: &InputPoint,
    model: &GpModel,
    params: &PenalizerParams,
) -> Result<f64, GpError> {
    let pen = build_penalizer(center, model, params)?;
    let u = model.domain().normalize(query.coords());
    Ok(pen.value(model, &u))
}

fn build_penalizer(
    center: &InputPoint,
    model: &GpModel,
    params: &PenalizerParams,
) -> Result<Penalizer, GpError> {
    if center.dim() != model.dim() {
        return Err(GpError::DimensionMismatch {
            expected: model.dim(),
            got: center.dim(),
        });
    }
    let center_unit = model.domain().normalize(center.coords());
    let (center_mean_std, _) = model.predict_std(&center_unit);
    Ok(Penalizer {
        center_unit,
        lipschitz: params.lipschitz,
        reward_max_std: (params.reward_max - model.y_mean()) / model.y_scale(),
        center_mean_std,
    })
}

/// An ordered batch of candidate designs selected in one outer iteration.
#[derive(Debug, Clone)]
pub struct Batch {
    pub elements: Vec<InputPoint>,
    pub iteration_index: usize,
    /// True when the max-variance fallback was used for any element
    /// (degenerate all-zero EI surface or duplicate guard).
    pub fallback_used: bool,
}

/// Greedily select `n_b` batch elements per the local-penalization rule:
/// element 1 maximizes `g(EI)`, element k maximizes `g(EI)` times the
/// penalizers of all previously chosen elements.
pub fn select_batch(
    model: &GpModel,
    domain: &BoxDomain,
    n_b: usize,
    config: &SearchConfig,
) -> Result<Batch, GpError> {
    assert!(n_b >= 1, "batch size must be at least 1");
    let params = estimate_penalizer_params(model, domain, config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut surface = AcquisitionSurface::new(model);
    let mut elements: Vec<InputPoint> = Vec::with_capacity(n_b);
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(n_b);
    let mut fallback_used = false;

    for k in 0..n_b {
        // Element 1 reuses the caller's seed exactly so that a batch of one
        // reduces bit-identically to plain acquisition maximization.
        let sub_config = SearchConfig {
            seed: if k == 0 {
                config.seed
            } else {
                config.seed.wrapping_add(k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
            },
            ..config.clone()
        };
        let out = maximize_acquisition(&surface, domain, &sub_config);
        let mut unit = out.point_unit;

        if out.max_screen_ei < DEGENERATE_EI {
            unit = max_variance_unit(model, domain, &sub_config);
            fallback_used = true;
        }
        if too_close(&unit, &units) {
            unit = max_variance_unit(model, domain, &sub_config);
            fallback_used = true;
            if too_close(&unit, &units) {
                // Pathological surface: nudge deterministically.
                for (d, u) in unit.iter_mut().enumerate() {
                    *u = (*u + 1e-6 * (d + 1) as f64 * (k + 1) as f64).clamp(0.0, 1.0);
                }
            }
        }

        let pen = build_penalizer(
            &InputPoint::new(domain.denormalize(&unit)).expect("finite"),
            model,
            &params,
        )?;
        surface.push_penalizer(pen);
        elements.push(InputPoint::new(domain.denormalize(&unit)).expect("finite"));
        units.push(unit);
    }

    Ok(Batch {
        elements,
        iteration_index: 0,
        fallback_used,
    })
}

fn too_close(unit: &[f64], existing: &[Vec<f64>]) -> bool {
    existing.iter().any(|e| {
        e.iter()
            .zip(unit)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            <= MIN_ELEMENT_SEPARATION
    })
}

fn max_variance_unit(model: &GpModel, domain: &BoxDomain, config: &SearchConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5bf0_3635);
    let var = |u: &[f64]| model.predict_std(u).1;
    let candidates = maximize_on_unit_box(&var, domain.dim(), config, &mut rng);
    candidates[0].0.clone()
}
