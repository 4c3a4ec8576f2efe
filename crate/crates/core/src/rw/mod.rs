//! Blocked Bernoulli walks, their Poisson coupling, ladder renewal
//! functions and two-barrier probabilities.

pub mod barrier;
pub mod coupling;
pub mod pmf;
pub mod renewal;
pub mod walk;

pub use barrier::{barrier_prediction, barrier_probability, BarrierEstimate, BarrierEvent, PoissonSteps, SpecSteps, StepLaw};
pub use coupling::{couple_poisson, coupling_bound, CoupledPaths, MaximalCoupling, PoissonCoupler};
pub use pmf::{poisson_binomial_pmf, poisson_pmf, DiscreteSampler, DEFAULT_TERM_CAP};
pub use renewal::{cached_constants, ladder_constant, renewal_estimate, Direction, RenewalTable};
pub use walk::{error_terms, time_change, ErrorTerms, TimeChange, WalkSpec};
