//! Economies-of-scale cost model for experimental batch campaigns.
//!
//! Four cost components per batch (main-body print, fin prints, lead
//! time, water-channel occupancy) and the campaign total. All rates are
//! converted to $/hour and all times to hours before combining; daily
//! rates divide by 24.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EconError {
    #[error("elements per batch must be >= 1, got {0}")]
    InvalidBatchSize(usize),
    #[error("convergence iteration count must be >= 1, got {0}")]
    InvalidConvergenceCount(usize),
    #[error("negative parameter: {0}")]
    NegativeParameter(&'static str),
    #[error("staff counts m and m_prime must be >= 1")]
    NoStaff,
}

/// Campaign cost parameters. Units follow the field names; conversions to
/// a common hourly basis happen inside the cost functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconParams {
    /// Engineer cost, $/hour.
    pub c_eng: f64,
    /// Printer equipment recharge, $/day.
    pub c_recharge: f64,
    /// Water-channel recharge, $/day.
    pub c_wrecharge: f64,
    /// Opportunity cost of lost time, $/day.
    pub c_lost_time: f64,
    /// Main-body print time, hours.
    pub t_print_hours: f64,
    /// Fin print time, hours.
    pub t_fins_hours: f64,
    /// Lead time, days.
    pub t_lead_days: f64,
    /// Experiment setup time, minutes.
    pub t_setup_min: f64,
    /// Model reconfiguration time, minutes.
    pub t_reconfig_min: f64,
    /// Single inner-loop experiment duration, seconds.
    pub t_exp_sec: f64,
    /// Print staff count.
    pub m: usize,
    /// Experiment staff count.
    pub m_prime: usize,
}

impl Default for EconParams {
    /// Lab-scale water-channel campaign defaults.
    fn default() -> Self {
        Self {
            c_eng: 30.0,
            c_recharge: 240.0,
            c_wrecharge: 2400.0,
            c_lost_time: 1200.0,
            t_print_hours: 12.0,
            t_fins_hours: 4.0,
            t_lead_days: 5.0,
            t_setup_min: 30.0,
            t_reconfig_min: 5.0,
            t_exp_sec: 1200.0,
            m: 1,
            m_prime: 2,
        }
    }
}

impl EconParams {
    pub fn validate(&self) -> Result<(), EconError> {
        let fields: [(&'static str, f64); 10] = [
            ("c_eng", self.c_eng),
            ("c_recharge", self.c_recharge),
            ("c_wrecharge", self.c_wrecharge),
            ("c_lost_time", self.c_lost_time),
            ("t_print_hours", self.t_print_hours),
            ("t_fins_hours", self.t_fins_hours),
            ("t_lead_days", self.t_lead_days),
            ("t_setup_min", self.t_setup_min),
            ("t_reconfig_min", self.t_reconfig_min),
            ("t_exp_sec", self.t_exp_sec),
        ];
        for (name, v) in fields {
            if v < 0.0 || !v.is_finite() {
                return Err(EconError::NegativeParameter(name));
            }
        }
        if self.m < 1 || self.m_prime < 1 {
            return Err(EconError::NoStaff);
        }
        Ok(())
    }
}

/// Itemized cost of one batch (and, when `n_convergence > 0`, the full
/// campaign).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub n_per_batch: usize,
    /// Main-body 3D printing, $.
    pub c_3d: f64,
    /// Fin 3D printing, $.
    pub c_3dfins: f64,
    /// Lead time, $.
    pub c_lead: f64,
    /// Water-channel occupancy, $.
    pub c_wchannel: f64,
    pub per_batch_total: f64,
    pub n_convergence: usize,
    pub campaign_total: f64,
}

/// Cost of running one batch of `n_per_batch` designs.
pub fn batch_cost(params: &EconParams, n_per_batch: usize) -> Result<CostBreakdown, EconError> {
    params.validate()?;
    if n_per_batch < 1 {
        return Err(EconError::InvalidBatchSize(n_per_batch));
    }
    let n = n_per_batch as f64;
    // Common $/hour basis.
    let recharge_hourly = params.c_recharge / 24.0;
    let wrecharge_hourly = params.c_wrecharge / 24.0;
    let lost_time_hourly = params.c_lost_time / 24.0;
    let lead_hours = params.t_lead_days * 24.0;
    let setup_hours = params.t_setup_min / 60.0;
    let reconfig_hours = params.t_reconfig_min / 60.0;
    let exp_hours = params.t_exp_sec / 3600.0;

    let print_rate = params.m as f64 * params.c_eng + recharge_hourly;
    let c_3d = print_rate * n * params.t_print_hours;
    let c_3dfins = print_rate * n * params.t_fins_hours;
    let c_lead = lost_time_hourly * lead_hours;
    let c_wchannel = (params.m_prime as f64 * params.c_eng + wrecharge_hourly)
        * (setup_hours + n * exp_hours + n * reconfig_hours);
    let per_batch_total = c_3d + c_3dfins + c_lead + c_wchannel;

    Ok(CostBreakdown {
        n_per_batch,
        c_3d,
        c_3dfins,
        c_lead,
        c_wchannel,
        per_batch_total,
        n_convergence: 0,
        campaign_total: 0.0,
    })
}

/// Full-campaign cost: per-batch total times the number of outer
/// iterations needed to converge at that batch size.
pub fn campaign_cost(
    params: &EconParams,
    n_per_batch: usize,
    n_convergence: usize,
) -> Result<CostBreakdown, EconError> {
    if n_convergence < 1 {
        return Err(EconError::InvalidConvergenceCount(n_convergence));
    }
    let mut b = batch_cost(params, n_per_batch)?;
    b.n_convergence = n_convergence;
    b.campaign_total = b.per_batch_total * n_convergence as f64;
    Ok(b)
}

/// Comparison table across `(n_per_batch, n_convergence)` scenarios, with
/// a flag telling whether the campaign total is monotone non-increasing
/// across them in the given order.
#[derive(Debug, Clone)]
pub struct EconReport {
    pub rows: Vec<CostBreakdown>,
    pub monotone_decreasing: bool,
}

impl EconReport {
    /// Render as an aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut out = String::from(
            "n_per_batch  n_convergence      c_3d   c_3dfins     c_lead  c_wchannel   per_batch    campaign\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:>11}  {:>13}  {:>8.2}  {:>9.2}  {:>9.2}  {:>10.2}  {:>10.2}  {:>10.2}\n",
                r.n_per_batch,
                r.n_convergence,
                r.c_3d,
                r.c_3dfins,
                r.c_lead,
                r.c_wchannel,
                r.per_batch_total,
                r.campaign_total,
            ));
        }
        out.push_str(&format!(
            "campaign cost monotone decreasing: {}\n",
            self.monotone_decreasing
        ));
        out
    }
}

/// Evaluate a list of scenarios and flag cost monotonicity.
pub fn economies_report(
    params: &EconParams,
    scenarios: &[(usize, usize)],
) -> Result<EconReport, EconError> {
    if scenarios.is_empty() {
        return Err(EconError::InvalidBatchSize(0));
    }
    let rows = scenarios
        .iter()
        .map(|&(n, nc)| campaign_cost(params, n, nc))
        .collect::<Result<Vec<_>, _>>()?;
    let monotone_decreasing = rows
        .windows(2)
        .all(|w| w[1].campaign_total <= w[0].campaign_total);
    Ok(EconReport {
        rows,
        monotone_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_batch_component_values() {
        let b = batch_cost(&EconParams::default(), 1).unwrap();
        assert_relative_eq!(b.c_3d, 480.0, epsilon = 1e-9);
        assert_relative_eq!(b.c_3dfins, 160.0, epsilon = 1e-9);
        assert_relative_eq!(b.c_lead, 6000.0, epsilon = 1e-9);
        assert_relative_eq!(b.c_wchannel, 146.0 + 2.0 / 3.0, epsilon = 1e-9);
        assert_relative_eq!(b.per_batch_total, 6786.0 + 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_batch_rejected_and_lead_is_batch_size_independent() {
        let p = EconParams::default();
        assert_eq!(batch_cost(&p, 0), Err(EconError::InvalidBatchSize(0)));
        let b1 = batch_cost(&p, 1).unwrap();
        let b2 = batch_cost(&p, 2).unwrap();
        assert_eq!(b1.c_lead, b2.c_lead);
    }

    #[test]
    fn campaign_totals_match_published_table() {
        let p = EconParams::default();
        for (n, nc, expected) in [(1, 8, 54293.0), (3, 6, 49200.0), (4, 5, 44533.0)] {
            let c = campaign_cost(&p, n, nc).unwrap();
            assert!(
                (c.campaign_total - expected).abs() <= 1.0,
                "N={n}: got {}, expected {expected}",
                c.campaign_total
            );
        }
    }

    #[test]
    fn report_flags_monotone_decrease() {
        let p = EconParams::default();
        let r = economies_report(&p, &[(1, 8), (3, 6), (4, 5)]).unwrap();
        assert!(r.monotone_decreasing);
        assert_eq!(r.rows.len(), 3);
        let single = economies_report(&p, &[(2, 4)]).unwrap();
        assert!(single.monotone_decreasing);
    }

    #[test]
    fn equal_convergence_makes_total_increase_with_batch_size() {
        let p = EconParams::default();
        let r = economies_report(&p, &[(1, 6), (3, 6), (4, 6)]).unwrap();
        assert!(!r.monotone_decreasing);
        assert!(r.rows[0].campaign_total < r.rows[1].campaign_total);
        assert!(r.rows[1].campaign_total < r.rows[2].campaign_total);
    }

    #[test]
    fn per_batch_total_is_affine_in_batch_size() {
        let p = EconParams::default();
        let totals: Vec<f64> = (1..=5)
            .map(|n| batch_cost(&p, n).unwrap().per_batch_total)
            .collect();
        let slope = totals[1] - totals[0];
        assert!(slope > 0.0);
        for w in totals.windows(2) {
            assert_relative_eq!(w[1] - w[0], slope, epsilon = 1e-9);
        }
        let intercept = totals[0] - slope;
        // Intercept = lead cost + setup portion of the water channel.
        let b = batch_cost(&p, 1).unwrap();
        let setup_cost = (p.m_prime as f64 * p.c_eng + p.c_wrecharge / 24.0) * p.t_setup_min / 60.0;
        assert_relative_eq!(intercept, b.c_lead + setup_cost, epsilon = 1e-9);
        assert!(intercept > 0.0);
    }

    #[test]
    fn unit_conversions_are_consistent() {
        // Express the same campaign with times given in different units.
        let p = EconParams::default();
        let mut q = p.clone();
        q.t_setup_min = 0.5 * 60.0;
        q.t_exp_sec = (1200.0 / 3600.0) * 3600.0;
        q.t_lead_days = 120.0 / 24.0;
        let a = campaign_cost(&p, 3, 6).unwrap();
        let b = campaign_cost(&q, 3, 6).unwrap();
        assert!((a.campaign_total - b.campaign_total).abs() < 1e-9);
    }
}
