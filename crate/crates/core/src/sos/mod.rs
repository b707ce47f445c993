//! One-dimensional SOS interface: heat-bath Glauber rates, the single-site
//! chain with walls and censoring, the parallel column dynamics and an
//! exact equilibrium sampler.

mod chain;
mod conditional;
mod exact;
mod rates;

pub use chain::{censored_run, CensorSchedule, Parity, SosChain, SosDynamics};
pub use conditional::{column_sweep, conditional_pmf, site_conditional_sample};
pub use exact::{exact_sample, ExactSampler};
pub use rates::{glauber_rates, rates_at, Move, Rate, BETA, GAMMA};
