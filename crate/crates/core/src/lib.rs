//! Mass-action chemical kinetics with detailed balance, integrated by a
//! variational reaction-trajectory scheme that is positivity preserving,
//! unconditionally energy stable and exactly conservative, plus forward and
//! backward Euler baselines for comparison.
//!
//! ```
//! use crn_core::{parser, scheme};
//!
//! let text = "X1 + 2 X2 <=> X3 ; kf=2, kr=1\nX2 + X3 <=> 2 X4 ; kf=1, kr=1\n\
//!             init X1 = 1\ninit X2 = 1\ninit X3 = 1\ninit X4 = 1\n";
//! let (network, c0) = parser::load(text, None).unwrap();
//! let c0 = c0.unwrap();
//! let eq = network.solve_equilibrium().unwrap();
//! let run = scheme::simulate(&network, &c0, &eq, 1.0, 10.0, &Default::default()).unwrap();
//! assert_eq!(run.records.len(), 11);
//! ```

// `!(x > 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod baselines;
pub mod io;
pub mod linalg;
pub mod model;
pub mod parser;
pub mod scheme;

pub use model::{
    chemical_potential, free_energy, ConservationBasis, EquilibriumState, ModelError, Rates,
    Reaction, ReactionNetwork,
};
pub use scheme::{
    simulate, SchemeError, SimulationResult, SolverOptions, StepContext, StepProblem, StepReport,
};
