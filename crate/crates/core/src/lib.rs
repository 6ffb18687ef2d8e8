pub mod bounds;
pub mod capacity;
pub mod combinatorics;
pub mod dictionary;
pub mod error;
pub mod lp;
pub mod rng;
pub mod sampling;

pub use bounds::EstimationFunction;
pub use capacity::{CapacityMatrix, CapacityVector};
pub use combinatorics::QuantizationScheme;
pub use dictionary::{CoherenceProfile, Dictionary};
pub use error::{CapsetError, Result};
pub use lp::{LpProblem, LpSolution, LpStatus, SolverConfig};
pub use sampling::{PairPartition, Support, VarianceReport};
