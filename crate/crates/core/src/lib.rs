//! Sequential Bayesian experimental design for the probability that a
//! stochastic, heteroscedastic input-to-response map exceeds a threshold.
//!
//! The surrogate is a variational heteroscedastic Gaussian process
//! ([`vhgpr`]): one GP for the mean response and one for the log noise
//! variance. New samples are chosen where the density-weighted standard
//! deviation of the local exceedance probability is largest
//! ([`acquisition`]), and [`design`] drives the whole loop. Reference
//! problems live in [`benchmarks`] and brute-force ground truth in
//! [`oracle`].

pub mod acquisition;
pub mod benchmarks;
pub mod design;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod linalg;
pub mod optim;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod rng;
pub mod surrogate;
pub mod vhgpr;

pub use error::{Error, Result};
pub use gp::{Dataset, InputPoint, KernelParams, SgprHyper, SgprModel};
pub use problem::ProblemSpec;
pub use surrogate::{PointPosterior, Surrogate};
pub use vhgpr::{TrainedVhgpr, VhgprHyper};
