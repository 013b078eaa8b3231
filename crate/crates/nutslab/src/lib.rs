//! No-U-turn sampling with multinomial and biased progressive index
//! selection, the ideal kernels of the Gaussian analysis, the closed-form
//! constants of the mixing bounds and the experiment drivers that compare
//! them.

pub mod experiments;
pub mod index_select;
pub mod integrator;
pub mod model;
pub mod orbit;
pub mod quadrature;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod theory;

pub use index_select::{IndexPmf, SelectionRule};
pub use integrator::{IntegratorError, Leapfrog, DEFAULT_DIVERGENCE_THRESHOLD};
pub use model::{AssumptionTag, ModelError, PhasePoint, Target, TargetKind};
pub use orbit::{IndexInterval, Orbit, OrbitError, StopReason, UTurnMode};
pub use rng::ChainStreams;
pub use samplers::{KernelConfig, KernelVariant, SamplerError, StepDiagnostics};

pub use theory::{TheoryConstants, TimeLaw};
