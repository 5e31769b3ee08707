//! Lyapunov analysis, exponent estimation, generator oracles and condition
//! audits.

pub mod audit;
pub mod dynkin;
pub mod exponent;
pub mod lyapunov;

pub use audit::{audit_conditions, AuditConfig, ConditionId, ConditionRecord, ConditionReport};
pub use dynkin::{dynkin_estimate, qsr_generator_bound_check, DynkinConfig, DynkinEstimate};
pub use exponent::{classify_convergence, estimate_exponent, ExponentEstimate};
pub use lyapunov::{
    generator_edge, generator_general, generator_qsr, lyapunov_edge, lyapunov_general,
    lyapunov_qsr, qsr_bound_constants, rate_constant,
};
