//! Numerical laboratory for variable-population single-parameter
//! mechanisms: allocation rules, Myerson payments, axiom checkers,
//! deviation search and a step-by-step harness for the characterization of
//! the second-price auction.

pub mod attack;
pub mod axioms;
pub mod error;
pub mod golden;
pub mod grid;
pub mod mechanism;
pub mod payment;
pub mod theorem;
pub mod types;

pub use error::{MechError, Result};
pub use grid::{ProfileSampler, SearchGrid};
pub use mechanism::{
    AllocationRule, Mechanism, MechanismParams, PaymentFn, PaymentMode, PaymentRule, Registry,
};
pub use payment::QuadratureConfig;
pub use types::{
    utility, AgentId, Allocation, BidProfile, Outcome, PaymentVector, Permutation, ToleranceConfig,
};
