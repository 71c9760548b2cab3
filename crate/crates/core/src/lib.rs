//! Contextual bandits with a context-dependent convex penalty on the policy.
//!
//! The context cube `[0,1]^d` is cut into `B^d` bins; every bin runs its own
//! Upper-Confidence Frank-Wolfe learner on the bin-averaged objective. The
//! evaluation module measures regret against the pointwise oracle and splits
//! it into estimation and approximation parts.

pub mod environment;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod orchestrator;
pub mod parallel;
pub mod partition;
pub mod regularizer;
pub mod rng;
pub mod simplex;
pub mod stats;
pub mod ucfw;

pub use environment::{Environment, EnvironmentSpec, LambdaFunction, NoiseFamily};
pub use error::{Error, Result};
pub use evaluation::{Evaluator, NodeSet, RegretReport};
pub use experiment::{Overrides, SweepSpec};
pub use orchestrator::{run_algorithm, PolicyResult, RunConfig};
pub use parallel::Parallelism;
pub use partition::{BinGrid, Regime};
pub use regularizer::{CoreRegularizer, Regularizer};
pub use simplex::SimplexPoint;
