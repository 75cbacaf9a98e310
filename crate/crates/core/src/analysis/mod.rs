//! Schedulability decisions built on the demand and supply bounds.

use thiserror::Error;

pub mod flat;
pub mod hierarchical;
pub mod horizon;
pub mod interface;
pub mod tighten;
pub mod tolerance;

pub use flat::{flat_test, flat_test_with, FlatOptions, FlatVerdict, Witness};
pub use hierarchical::{hierarchical_test, HierarchicalVerdict};
pub use horizon::{analysis_horizon, t_max};
pub use interface::{generate_interface, InterfaceResult};
pub use tighten::tighten_deadlines;
pub use tolerance::{max_tolerance, max_tolerance_tightened, ToleranceResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("{count} HC components exceed the limit of {limit}")]
    TooManyHcComponents { count: usize, limit: usize },
    #[error("no feasible tightening found")]
    NoFeasibleTightening,
    #[error("component {0} has no interface period")]
    MissingInterfacePeriod(String),
    #[error("interface capacity search failed for component {0}")]
    InfeasibleInterface(String),
}
