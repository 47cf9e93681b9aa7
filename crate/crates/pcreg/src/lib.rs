//! Polynomial chaos regression toolkit.
//!
//! The crate builds total-order multivariate orthonormal polynomial bases
//! (Hermite and Legendre), draws weighted input samples under three
//! strategies (standard, asymptotic, and coherence-optimal via independence
//! Metropolis-Hastings), solves the weighted least-squares coefficient
//! recovery problem, estimates the coherence parameters that govern sample
//! complexity, and drives the batch experiments behind the `pcreg` CLI.
//!
//! The numerical core is generic over the scalar type through
//! [`scalar::Real`] (implemented for `f32` and `f64`); the experiment
//! drivers are `f64`-only. Concrete aliases for the main types live at the
//! crate root.

pub mod basis;
pub mod coherence;
pub mod error;
pub mod experiments;
pub mod quadrature;
pub mod regression;
pub mod sampling;
pub mod scalar;

pub use basis::{Family, MultiIndexSet, PcBasis};
pub use error::{Error, Result};
pub use sampling::{McmcConfig, SampleBatch, SamplingStrategy, StrategyKind};

/// Double-precision basis.
pub type PcBasisF64 = basis::PcBasis<f64>;
/// Single-precision basis, adequate for small orders only.
pub type PcBasisF32 = basis::PcBasis<f32>;
/// Double-precision sample batch.
pub type SampleBatchF64 = sampling::SampleBatch<f64>;
/// Single-precision sample batch.
pub type SampleBatchF32 = sampling::SampleBatch<f32>;
/// Double-precision quadrature rule.
pub type QuadratureRuleF64 = quadrature::QuadratureRule<f64>;
/// Double-precision design system.
pub type DesignSystemF64 = regression::DesignSystem<f64>;
/// Double-precision fit result.
pub type FitResultF64 = regression::FitResult<f64>;
/// Double-precision coherence report.
pub type CoherenceReportF64 = coherence::CoherenceReport<f64>;
