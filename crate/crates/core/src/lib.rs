//! Version-controlled asynchronous federated learning on a simulated
//! device population.
//!
//! The server keeps `K` branch models. Whenever a branch comes back from a
//! client it is pushed (its version goes up by one); the master is the
//! version-weighted merge of all branches; before a branch is dispatched
//! again it pulls the master in, and a reward-driven selector picks the
//! client that trains it next. Everything runs on a virtual clock, so a
//! run is a pure function of its configuration and seed.

pub mod device;
pub mod error;
pub mod params;
pub mod selector;
pub mod sim;
pub mod trainer;
pub mod version;

pub use error::{Error, Result};
pub use params::{axpy_combine, BranchModel, ParamVector, Repository};
pub use selector::{ClientStats, Selector, SelectorVariant};
pub use version::{merge_master, model_pull, model_push, version_ctrl, VersionVector};
pub use sim::{run, Algorithm, DataSplit, Environment, RunConfig, RunReport};
