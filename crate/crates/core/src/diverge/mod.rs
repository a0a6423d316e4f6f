//! The divergent series `f = Σ_a δ_a P_{m_a,γ_a}`: parameter plans, Orlicz
//! membership and pointwise certificates.

mod certify;
mod membership;
mod plan;

pub use certify::*;
pub use membership::*;
pub use plan::*;
