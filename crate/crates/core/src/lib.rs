//! Deep-Q-learning assisted adaptive operator selection for constrained
//! multi-objective evolutionary algorithms.
//!
//! A population's convergence, feasibility and diversity form the state,
//! the variation operators (GA and DE) are the actions, and the decrease of
//! the state between consecutive generations is the reward. A small
//! state+action value network, trained from an experience replay, picks the
//! operator used by the host algorithm each generation.
//!
//! Module map:
//!
//! * [`model`]: problem definitions, solutions, constraint violation.
//! * [`problems`]: the built-in CP1..CP4 suite and reference fronts.
//! * [`operators`]: SBX, polynomial mutation and DE variation.
//! * [`state`]: population state, reward, records and the replay queue.
//! * [`qnet`]: the value network, its training and a gradient checker.
//! * [`host`]: the host-algorithm interface and a constrained NSGA-II.
//! * [`indicators`]: IGD+, hypervolume and Spacing.
//! * [`framework`]: operator selection and the optimization loop.

pub mod error;
pub mod framework;
pub mod host;
pub mod indicators;
pub mod model;
pub mod numfmt;
pub mod operators;
pub mod problems;
pub mod qnet;
pub mod state;

pub use error::{Error, Result};
pub use framework::{
    run, select_operator, should_update_network, Choice, ChoiceSource, PolicyMode, RunConfig,
    RunResult, SelectionPolicy, StateAssessor, TraceRow, TrainedModel,
};
pub use host::{HostCmoea, Nsga2Host};
pub use model::{constraint_violation, evaluate, is_feasible, Population, ProblemSpec, Solution};
pub use operators::{OperatorId, OperatorParams};
pub use problems::{analytic_front, grid_oracle_front, make_problem, FrontSource, ReferenceFront};
pub use qnet::{NormStats, QNetwork, TrainHyper};
pub use state::{ExperienceReplay, PopulationState, Record};

/// Random number generator used for every seeded run.
pub type RunRng = rand_chacha::ChaCha8Rng;
