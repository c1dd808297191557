//! Generalized Ornstein–Uhlenbeck processes driven by bivariate Lévy processes.

pub mod duality;
pub mod error;
pub mod gou_process;
pub mod inverse_flow;
pub mod jump_law;
pub mod levy_model;
pub mod path_engine;
pub mod presets;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod stochastic_calculus;

pub use error::{GouError, Result};
pub use jump_law::{Atom1, Atom2, JumpLaw2, Marginal};
pub use levy_model::{Degeneracy, GaussianCov, LevyModel2};
pub use rng::StreamKey;
pub use scalar::{Real, Scalar};
pub use path_engine::{Backend, Event, EventPath, PairPath, PathSampler, SamplePath, ScalarPath};
pub use stochastic_calculus::AlignedSeries;
pub use presets::{preset, ModelSpec, Preset, PRESET_NAMES};
pub use duality::{DualPair, DualityConfig, DualityReport, Probe, RuinIdentityConfig, RuinIdentityReport};
pub use gou_process::{AffineFlow, Functional, GouTrajectory, Truncation};
pub use inverse_flow::{FlowMap, InverseFlow};
pub use stats::{EmpiricalDistribution, KsResult, Proportion};

/// Exact rational scalar for event-exact checks.
pub type Exact = num_rational::BigRational;

pub type Model = LevyModel2<f64>;
pub type Model32 = LevyModel2<f32>;
pub type ExactModel = LevyModel2<Exact>;
pub type Path = PairPath<f64>;
pub type ExactPath = PairPath<Exact>;
pub type Trajectory = GouTrajectory<f64>;
