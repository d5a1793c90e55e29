//! Rate lower bounds for blind classical compression of a source with
//! states `ρ^x` on an alphabet of size `d`, together with the stochastic-
//! matrix rigidity results they rest on and the bucketing protocol that
//! beats them in the visible setting.

pub mod audit;
pub mod bounds;
pub mod defect;
pub mod dist;
pub mod error;
pub mod info;
pub mod lp;
pub mod protocol;
pub mod random;
pub mod stochastic;

pub use bounds::{ChainReport, RateBound, TwoStateExample};
pub use defect::{DefectBackend, DefectProblem, DefectSolution};
pub use dist::{ClassicalEnsemble, Distribution, ExactDistribution, JointDistribution};
pub use error::{Error, Result};
pub use info::Bits;
pub use protocol::{BucketIndex, BucketProtocol, ProtocolReport};
pub use stochastic::{BirkhoffDecomposition, ExactMatrix, StochasticMatrix};
