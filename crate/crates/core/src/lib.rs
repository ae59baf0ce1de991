//! Batch Bayesian optimization for nested plant/controller co-design.
//!
//! The toolkit stacks up as follows:
//!
//! * [`gp`] — Gaussian-process regression with marginal-likelihood
//!   hyperparameter fitting on a bounded box domain.
//! * [`acquisition`] — closed-form expected improvement and global
//!   maximization of (possibly penalized) acquisition surfaces.
//! * [`batch`] — local-penalization batch selection: pick `n_b` candidates
//!   per iteration by iteratively penalizing the acquisition peak.
//! * [`bayesopt`] — the sequential and batch optimizer loops with a
//!   windowed convergence detector and reproducible run traces.
//! * [`codesign`] — the nested loop: batch BO over plant parameters, and
//!   for each candidate plant a full inner BO over control parameters
//!   executed against a continuously running simulator.
//! * [`plantsim`] — a reduced tethered-buoyant-body simulator used as the
//!   benchmark co-design objective.
//! * [`econ`] — the economies-of-scale cost model for experimental batch
//!   campaigns.
//! * [`cli`] — declarative run configuration and the command-line front end.

pub mod acquisition;
pub mod batch;
pub mod bayesopt;
pub mod cli;
pub mod codesign;
pub mod domain;
pub mod econ;
pub mod gp;
pub mod plantsim;
pub mod sampling;

pub use domain::{BoxDomain, DomainError, InputPoint};
