//! Learning-assisted network interdiction.
//!
//! The pipeline: generate interdiction instances ([`instances`]), reduce them
//! to single-level MILPs ([`reduction`]), encode the MILPs as multipartite
//! graphs ([`encoding`]), predict interdictions with a message-passing network
//! ([`gnn`]) and turn predictions into decisions ([`eval`]). Exact follower
//! solvers ([`inner`]), a brute-force oracle ([`oracle`]) and a
//! branch-and-bound MILP solver ([`milp`]) provide ground truth.

pub mod diagnostics;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod inner;
pub mod instances;
pub mod milp;
pub mod oracle;
pub mod reduction;
pub mod rng;

pub use error::{Error, Result};
